//! 8-bit grayscale and RGB PNG reading and writing.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Maps `[0, 1]` to the nearest 8-bit level.
pub fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn from_byte(b: u8) -> f32 {
    b as f32 / 255.0
}

fn write(path: &Path, bytes: &[u8], width: usize, height: usize, color: png::ColorType) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| Error::format(path, e))?;
    writer.write_image_data(bytes).map_err(|e| Error::format(path, e))?;
    writer.finish().map_err(|e| Error::format(path, e))
}

/// Writes row-major intensities in `[0, 1]` as a grayscale PNG.
pub fn write_gray(path: &Path, data: &[f32], width: usize, height: usize) -> Result<()> {
    let bytes: Vec<u8> = data.iter().map(|&v| to_byte(v)).collect();
    write(path, &bytes, width, height, png::ColorType::Grayscale)
}

pub fn write_rgb(path: &Path, rgb: &[u8], width: usize, height: usize) -> Result<()> {
    write(path, rgb, width, height, png::ColorType::Rgb)
}

/// Reads an 8-bit grayscale PNG as `(intensities, width, height)`.
pub fn read_gray(path: &Path) -> Result<(Vec<f32>, usize, usize)> {
    let file = File::open(path).map_err(Error::io(path))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            path,
            format!(
                "expected 8-bit grayscale, got {:?} {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data = buf[..w * h].iter().map(|&b| from_byte(b)).collect();
    Ok((data, w, h))
}
