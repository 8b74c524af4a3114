//! Regenerates `fixtures/china_times/`: the scripted model turns, search and page
//! replays and image payloads for the Want Want / China Times case.
//!
//! cargo run -p deepsearch-cli --example china_times_fixture [out_dir]

use std::fs;
use std::path::{Path, PathBuf};

use deepsearch_core::fixture::{fixture_key, normalize_query};
use deepsearch_core::imaging::encode_png;
use image::{DynamicImage, Rgb, RgbImage};
use serde_json::{Value, json};

const INPUT_IMAGE: &str = "http://rand-oss//2F%2F9bXW.jpg";
const GROUP_PAGE: &str = "https://zh.wikipedia.org/zh-cn/旺旺中时媒体集团";
const TIMES_PAGE: &str = "https://zh.wikipedia.org/zh-cn/中国时报集团";
const GROUP_LOGO: &str =
    "https://upload.wikimedia.org/wikipedia/zh/thumb/0/05/Want_Want_China_Times_Media_Group_logo.svg/300px-Want_Want_China_Times_Media_Group_logo.svg.png";
const WANT_WANT_LOGO: &str = "https://upload.wikimedia.org/wikipedia/commons/7/74/Want_Want_Group_logo.svg";
const TIMES_BUILDING: &str = "https://upload.wikimedia.org/wikipedia/commons/e/ee/China_Times_headquarters_building.png";
const TIMES_NEWSPAPER: &str = "https://upload.wikimedia.org/wikipedia/zh/9/9b/China_Times_front_page.png";

fn fill(img: &mut RgbImage, x0: u32, y0: u32, w: u32, h: u32, c: [u8; 3]) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.put_pixel(x, y, Rgb(c));
        }
    }
}

/// Table scene with a blue carton on the right, inside (670, 250, 220, 600).
fn input_image() -> Vec<u8> {
    let mut img = RgbImage::from_fn(900, 900, |_, y| {
        let v = 200 - (y / 10) as u8;
        Rgb([v, v, 230 - (y / 12) as u8])
    });
    fill(&mut img, 0, 700, 900, 200, [150, 110, 70]);
    fill(&mut img, 120, 420, 260, 300, [235, 200, 60]);
    fill(&mut img, 690, 280, 180, 560, [30, 80, 200]);
    // mascot face
    fill(&mut img, 730, 420, 100, 100, [250, 220, 190]);
    fill(&mut img, 745, 470, 18, 14, [220, 40, 40]);
    fill(&mut img, 797, 470, 18, 14, [220, 40, 40]);
    encode_png(&DynamicImage::ImageRgb8(img))
}

fn logo_image() -> Vec<u8> {
    let mut img = RgbImage::from_pixel(300, 120, Rgb([255, 255, 255]));
    fill(&mut img, 10, 20, 80, 80, [250, 220, 190]);
    for i in 0..4 {
        fill(&mut img, 110 + i * 45, 35, 38, 38, [210, 30, 30]);
    }
    fill(&mut img, 110, 85, 170, 10, [40, 40, 40]);
    encode_png(&DynamicImage::ImageRgb8(img))
}

/// Building with five trees along the street.
fn building_image() -> Vec<u8> {
    let mut img = RgbImage::from_pixel(640, 480, Rgb([170, 200, 235]));
    fill(&mut img, 120, 40, 400, 360, [190, 185, 175]);
    for row in 0..6 {
        for col in 0..5 {
            fill(&mut img, 150 + col * 75, 70 + row * 55, 40, 30, [90, 110, 140]);
        }
    }
    fill(&mut img, 0, 400, 640, 80, [100, 100, 100]);
    for x in [20u32, 140, 290, 420, 560] {
        fill(&mut img, x + 22, 380, 10, 50, [100, 70, 40]);
        fill(&mut img, x, 320, 55, 65, [40, 130, 50]);
    }
    encode_png(&DynamicImage::ImageRgb8(img))
}

fn text_hit(title: &str, link: &str, snippet: Option<&str>) -> Value {
    match snippet {
        Some(s) => json!({"title": title, "link": link, "snippet": s}),
        None => json!({"title": title, "link": link}),
    }
}

fn image_hit(title: &str, image_url: &str, source_url: &str) -> Value {
    json!({"title": title, "image_url": image_url, "source_url": source_url})
}

fn call(name: &str, arguments: Value) -> Value {
    json!({"name": name, "arguments": arguments})
}

fn turn(text: &str, tool_call: Value) -> Value {
    json!({"text": text, "tool_call": tool_call})
}

fn model_turns() -> Value {
    json!([
        turn(
            "<think>First step is to identify the food company logo in the beverage image. Let's use visual search on the beverage (the blue carton with the cartoon character).</think>",
            call("tool-google-search-visual_search", json!({"image_url": INPUT_IMAGE})),
        ),
        turn(
            "<think>The visual search didn't directly identify the logo. Let's try zooming in on the blue beverage carton part of the image, since that's the logo area. The blue carton is on the right side: x around 670, y around 250, width around 300, height around 400.</think>",
            call("tool-image-processing-zoom_in", json!({"image_url": INPUT_IMAGE, "x": 670, "y": 250, "width": 300, "height": 400})),
        ),
        turn(
            "<think>I need to adjust the zoom region to fit within the 900x900 image. If x=670, width can be up to 230. If y=250, height can be up to 650. Let's use x=670, y=250, width=220, height=600.</think>",
            call("tool-image-processing-zoom_in", json!({"image_url": INPUT_IMAGE, "x": 670, "y": 250, "width": 220, "height": 600})),
        ),
        turn(
            "<think>Now I can see the logo clearly: it's Want Want's mascot (the boy with the red cheeks). Want Want is a food company. Let me search for \"Want Want acquired newspaper 2009\".</think>",
            call("tool-google-search-google_search", json!({"q": "Want Want acquired newspaper 2009"})),
        ),
        turn(
            "<think>So the newspaper company is China Times Group (中时集团), acquired by Want Want with the deal completed in March 2009. Let me find the Wikipedia page of 旺旺中时媒体集团 and check its poster for the tree count.</think>",
            call("tool-google-search-google_search", json!({"q": "旺旺中时媒体集团 Wikipedia"})),
        ),
        turn(
            "<think>Let's open the Wikipedia page for 旺旺中时媒体集团. We need to find the poster (infobox image) and count the number of trees in it.</think>",
            call("jina_scrape_llm_summary-scrape_and_extract_info", json!({"url": GROUP_PAGE, "info_to_extract": "Count the number of trees in the Wikipedia poster of 旺旺中时媒体集团"})),
        ),
        turn(
            "<think>403 Forbidden error. Let's try a different approach and find the infobox image URL for this Wikipedia page through image search.</think>",
            call("tool-google-search-image_search", json!({"q": "旺旺中时媒体集团 维基百科 图片"})),
        ),
        turn(
            "<think>The first image is the logo of Want Want China Times Media Group. Is there a tree in this logo? Let's fetch this image and analyze it.</think>",
            call("tool-fetch-image-fetch_image", json!({"url": GROUP_LOGO})),
        ),
        turn(
            "<think>Looking at this logo, I don't see any trees. Maybe the newspaper's Wikipedia poster refers to the China Times Group page rather than the media group. Let's search for 中国时报集团 维基百科.</think>",
            call("tool-google-search-google_search", json!({"q": "中国时报集团 维基百科"})),
        ),
        turn(
            "<think>Maybe the Wikipedia page for China Times Group is under a different name? Let me try 中时集团 维基百科.</think>",
            call("tool-google-search-google_search", json!({"q": "中时集团 维基百科"})),
        ),
        turn(
            "<think>The newspaper company is China Times Group (中国时报集团). Let's scrape its Wikipedia page and look for the infobox image.</think>",
            call("jina_scrape_llm_summary-scrape_and_extract_info", json!({"url": TIMES_PAGE, "info_to_extract": "Find the infobox image (poster) on the Wikipedia page for 中国时报集团 and count the number of trees in it."})),
        ),
        turn(
            "<think>403 error again. Let's use image search for the infobox image instead.</think>",
            call("tool-google-search-image_search", json!({"q": "中国时报集团 维基百科 infobox"})),
        ),
        turn(
            "<think>The first image is the China Times building with trees in front. Let's fetch that image and count the trees.</think>",
            call("tool-fetch-image-fetch_image", json!({"url": TIMES_BUILDING})),
        ),
        "<think>Now let's count the trees in front of the building. 1. far left, 2. near the pole, 3. near the first taxi, 4. near the second taxi, 5. far right.</think>\n\nThe food company is Want Want, which acquired the **China Times Group** (中时媒体集团) in 2009. The Wikipedia infobox poster for this newspaper shows **5 distinct trees** in front of its headquarters building.",
        "<think>We identified the logo on the beverage as Want Want's mascot, found that Want Want acquired China Times Group in 2009, and counted 5 distinct trees in the group's Wikipedia poster.</think>\n\n\\boxed{5}",
    ])
}

fn write_json(path: &Path, value: &Value) {
    fs::create_dir_all(path.parent().expect("nested path")).expect("create fixture dir");
    fs::write(path, serde_json::to_string_pretty(value).expect("json") + "\n").expect("write fixture");
}

fn write_search(root: &Path, tool: &str, query: &str, hits: Value) {
    let path = root
        .join("search")
        .join(tool)
        .join(format!("{}.json", fixture_key(&normalize_query(query))));
    write_json(&path, &json!({"query": query, "hits": hits}));
}

fn write_forbidden_page(root: &Path, url: &str) {
    let path = root.join("pages").join(format!("{}.json", fixture_key(url)));
    write_json(&path, &json!({"source_url": url, "status": 403}));
}

fn write_image(root: &Path, url: &str, bytes: &[u8]) {
    let dir = root.join("images");
    fs::create_dir_all(&dir).expect("create image dir");
    fs::write(dir.join(fixture_key(url)), bytes).expect("write image");
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/china_times"));
    if out.exists() {
        fs::remove_dir_all(&out).expect("clear old fixture");
    }

    write_json(&out.join("model/china_times.json"), &model_turns());

    write_search(
        &out,
        "visual_search",
        INPUT_IMAGE,
        json!([
            image_hit(
                "Giay tu cong bo san pham FROZEN COLA",
                "https://wantwant.vn/vnt_upload/product/frozen_cola.jpg",
                "https://wantwant.vn/cn/giay-tu-cong-bo-san-pham-frozen-cola"
            ),
            image_hit(
                "Facts For Kids- France",
                "https://www.oocities.org/kidsfacts/france/flag.gif",
                "https://www.oocities.org/kidsfacts/france.html"
            ),
        ]),
    );
    write_search(
        &out,
        "google_search",
        "Want Want acquired newspaper 2009",
        json!([
            text_hit(
                "China Times Group is sold to Want Want",
                "https://www.taipeitimes.com/News/biz/archives/2008/11/05/2003427614",
                Some("It owns the Chinese-language newspapers China Times...")
            ),
            text_hit(
                "China Times Joins a Snack-food Empire|Industry|2009-03-05",
                "https://english.cw.com.tw/article/article.action?id=1234",
                Some("A month after Want Want Holdings chairman Tsai Eng-meng acquired the China Times Group...")
            ),
        ]),
    );
    write_search(
        &out,
        "google_search",
        "旺旺中时媒体集团 Wikipedia",
        json!([
            text_hit("旺旺中时媒体集团 - 维基百科", GROUP_PAGE, None),
            text_hit(
                "可靠来源/常见/旺旺中时媒体集团 - 维基百科",
                "https://zh.wikipedia.org/zh-cn/Wikipedia:可靠来源/常见/旺旺中时媒体集团",
                None
            ),
        ]),
    );
    write_search(
        &out,
        "image_search",
        "旺旺中时媒体集团 维基百科 图片",
        json!([
            image_hit("旺旺中时媒体集团- 维基百科，自由的百科全书", GROUP_LOGO, "https://zh.wikipedia.org/zh-tw/旺旺中時媒體集團"),
            image_hit("旺旺集团- 维基百科，自由的百科全书", WANT_WANT_LOGO, "https://zh.wikipedia.org/zh-tw/旺旺集團"),
        ]),
    );
    write_search(
        &out,
        "google_search",
        "中国时报集团 维基百科",
        json!([
            text_hit("讨论:中国时报集团- 维基百科，自由的百科全书", "https://zh.wikipedia.org/zh-my/Talk:中国时报集团", None),
            text_hit("中时新闻网", "https://www.wikiwand.com/zh-hant/中時新聞網", None),
        ]),
    );
    write_search(
        &out,
        "google_search",
        "中时集团 维基百科",
        json!([
            text_hit("中国时报集团- 维基百科，自由的百科全书", TIMES_PAGE, None),
            text_hit("旺旺中时媒体集团 - 维基百科", GROUP_PAGE, None),
        ]),
    );
    write_search(
        &out,
        "image_search",
        "中国时报集团 维基百科 infobox",
        json!([
            image_hit("中国时报集团- 维基百科，自由的百科全书", TIMES_BUILDING, "https://zh.wikipedia.org/zh-tw/中國時報集團"),
            image_hit("中国时报- 维基百科，自由的百科全书", TIMES_NEWSPAPER, "https://zh.wikipedia.org/zh-cn/中国时报"),
        ]),
    );

    write_forbidden_page(&out, GROUP_PAGE);
    write_forbidden_page(&out, TIMES_PAGE);

    write_image(&out, INPUT_IMAGE, &input_image());
    write_image(&out, GROUP_LOGO, &logo_image());
    write_image(&out, TIMES_BUILDING, &building_image());

    let item = json!({
            "item_id": "china_times",
            "question": "The image on the beverage is the logo of a food company that acquired a newspaper company in 2009. How many trees are there in the newspaper's Wikipedia poster?",
            "input_image_urls": [INPUT_IMAGE],
            "gold_answer": "5",
        "benchmark_label": "VisBrowse"
    });
    fs::write(out.join("bench.jsonl"), item.to_string() + "\n").expect("write bench");
    println!("wrote {}", out.display());
}
