use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::raster::Image;

#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("unsupported image extension {0:?} (use .png or .ppm)")]
    Extension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Codec(#[from] image::ImageError),
}

/// `round_half_even(clamp(x, 0, 1) · 255)`; NaN maps to 0.
pub fn quantize(x: f64) -> u8 {
    if x.is_nan() {
        return 0;
    }
    (x.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

pub fn to_rgb8(img: &Image) -> Vec<u8> {
    img.data.iter().map(|v| quantize(*v)).collect()
}

fn buffer(img: &Image) -> RgbImage {
    RgbImage::from_raw(img.width as u32, img.height as u32, to_rgb8(img)).expect("buffer matches dimensions")
}

pub fn encode_png(img: &Image) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    buffer(img).write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

/// Binary PPM (P6) bytes.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(to_rgb8(img));
    out
}

/// Writes an 8-bit RGB file; the format follows the extension.
pub fn write_image(img: &Image, path: &Path) -> Result<(), ImageIoError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let bytes = match ext.as_str() {
        "png" => encode_png(img),
        "ppm" => encode_ppm(img),
        _ => return Err(ImageIoError::Extension(ext)),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_image(path: &Path) -> Result<Image, ImageIoError> {
    let rgb = image::open(path)?.to_rgb8();
    Ok(Image {
        width: rgb.width() as usize,
        height: rgb.height() as usize,
        data: rgb.as_raw().iter().map(|b| *b as f64 / 255.0).collect(),
    })
}
