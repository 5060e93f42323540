//! PNG reading (8/16-bit RGB or RGBA) and 8-bit writing.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use dda_core::Image;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PngError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed PNG: {source}")]
    Decode { path: PathBuf, source: png::DecodingError },
    #[error("{path}: unsupported color type {color:?}, expected RGB or RGBA")]
    UnsupportedColor { path: PathBuf, color: png::ColorType },
    #[error("{path}: unsupported bit depth {depth:?}, expected 8 or 16")]
    UnsupportedDepth { path: PathBuf, depth: png::BitDepth },
    #[error("{path}: {source}")]
    Encode { path: PathBuf, source: png::EncodingError },
}

/// Loads an RGB or RGBA PNG into `[0, 1]` samples. Alpha is discarded.
pub fn load_png(path: &Path) -> Result<Image, PngError> {
    let file = File::open(path).map_err(|source| PngError::Io { path: path.into(), source })?;
    let decode = |source| PngError::Decode { path: path.into(), source };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(decode)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(decode)?;
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        color => return Err(PngError::UnsupportedColor { path: path.into(), color }),
    };
    let (h, w) = (info.height as usize, info.width as usize);
    let mut data = Vec::with_capacity(h * w * 3);
    match info.bit_depth {
        png::BitDepth::Eight => {
            for row in buf.chunks(info.line_size).take(h) {
                for px in row[..w * channels].chunks_exact(channels) {
                    data.extend(px[..3].iter().map(|&b| f64::from(b) / 255.0));
                }
            }
        }
        png::BitDepth::Sixteen => {
            for row in buf.chunks(info.line_size).take(h) {
                for px in row[..w * channels * 2].chunks_exact(channels * 2) {
                    data.extend(
                        px[..6]
                            .chunks_exact(2)
                            .map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) / 65535.0),
                    );
                }
            }
        }
        depth => return Err(PngError::UnsupportedDepth { path: path.into(), depth }),
    }
    Ok(Image::new(h, w, data).expect("decoded buffer matches header dims"))
}

fn write(path: &Path, width: usize, height: usize, color: png::ColorType, bytes: &[u8]) -> Result<(), PngError> {
    let file = File::create(path).map_err(|source| PngError::Io { path: path.into(), source })?;
    let encode = |source| PngError::Encode { path: path.into(), source };
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(encode)?;
    writer.write_image_data(bytes).map_err(encode)?;
    writer.finish().map_err(encode)
}

/// Saves as 8-bit RGB, clamping and rounding every sample.
pub fn save_png(path: &Path, image: &Image) -> Result<(), PngError> {
    write(path, image.width(), image.height(), png::ColorType::Rgb, &image.to_u8())
}

/// Saves a row-major 8-bit grayscale buffer.
pub fn save_gray(path: &Path, height: usize, width: usize, pixels: &[u8]) -> Result<(), PngError> {
    assert_eq!(pixels.len(), height * width);
    write(path, width, height, png::ColorType::Grayscale, pixels)
}
