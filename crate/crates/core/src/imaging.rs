//! Small image helpers shared by the visual tools and test fixtures.

use image::{DynamicImage, ImageBuffer, ImageFormat, Rgb};

pub fn encode_png(img: &DynamicImage) -> Vec<u8> {
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), ImageFormat::Png)
        .expect("png encoding into memory cannot fail");
    out
}

/// Deterministic synthetic RGB image; distinct seeds give distinct pixels.
pub fn synthetic_png(width: u32, height: u32, seed: u32) -> Vec<u8> {
    let img = ImageBuffer::from_fn(width, height, |x, y| {
        let v = x.wrapping_mul(31).wrapping_add(y.wrapping_mul(17)).wrapping_add(seed.wrapping_mul(101));
        Rgb([(v % 251) as u8, (seed % 256) as u8, ((x ^ y) % 253) as u8])
    });
    encode_png(&DynamicImage::ImageRgb8(img))
}
