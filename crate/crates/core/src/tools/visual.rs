use std::sync::Arc;

use image::DynamicImage;
use serde_json::{Value, json};

use super::{Args, Tool, ToolError, ToolOutput};
use crate::imaging::encode_png;
use crate::store::AssetStore;

/// Crops `(x, y, w, h)` out of `img`, or explains why the region does not fit.
pub fn crop_region(img: &DynamicImage, x: u32, y: u32, w: u32, h: u32) -> Result<DynamicImage, String> {
    if w == 0 || h == 0 {
        return Err("width and height must be positive".to_string());
    }
    let (iw, ih) = (img.width(), img.height());
    let fits = u64::from(x) + u64::from(w) <= u64::from(iw) && u64::from(y) + u64::from(h) <= u64::from(ih);
    if !fits {
        return Err(format!(
            "Your cropped region extends beyond image bounds (image size: {iw}x{ih}, your cropped region: ({x}+{w})x({y}+{h}))"
        ));
    }
    Ok(img.crop_imm(x, y, w, h))
}

/// Crops a stored image and registers the crop as a new generated asset.
pub struct ZoomInTool {
    store: Arc<AssetStore>,
}

impl ZoomInTool {
    pub fn new(store: Arc<AssetStore>) -> Self {
        Self { store }
    }
}

impl Tool for ZoomInTool {
    fn name(&self) -> &'static str {
        "zoom_in"
    }

    fn wire_name(&self) -> &'static str {
        "tool-image-processing-zoom_in"
    }

    fn description(&self) -> &'static str {
        "Crop the region (x, y, width, height) of an image, in pixels from the top-left corner, \
         and view it. Returns the crop's own image URL."
    }

    fn parameters(&self) -> Value {
        json!({
            "type": "object",
            "properties": {
                "image_url": {"type": "string", "description": "Image UID"},
                "x": {"type": "integer", "minimum": 0},
                "y": {"type": "integer", "minimum": 0},
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1}
            },
            "required": ["image_url", "x", "y", "width", "height"]
        })
    }

    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError> {
        let uid = args.str(&["image_url", "uid", "url", "image"])?;
        let x = args.uint(&["x"])?;
        let y = args.uint(&["y"])?;
        let w = args.uint(&["width", "w"])?;
        let h = args.uint(&["height", "h"])?;
        if w == 0 || h == 0 {
            return Err(ToolError::InvalidArgument("width and height must be positive".into()));
        }
        let asset = self
            .store
            .resolve(uid)
            .map_err(|_| ToolError::Failed(format!("unknown image reference: {uid}")))?;
        let img = asset.decode().map_err(|e| ToolError::Failed(e.to_string()))?;
        let crop = crop_region(&img, x, y, w, h).map_err(ToolError::Failed)?;
        let description = format!("Zoomed region: ({x}, {y}, {w}, {h}) from original image");
        let new_uid = self
            .store
            .register_generated(&encode_png(&crop), Some(&description))
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolOutput {
            text: format!(
                "[SUCCESS]: Zoomed in on region ({x}, {y}, {w}, {h}). Image dimensions: {w}x{h}. \
                 Image URL: {new_uid}, Description: [{description}]"
            ),
            materialized: vec![new_uid.clone()],
            referenced: vec![new_uid],
        })
    }
}
