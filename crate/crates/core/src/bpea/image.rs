//! Byte-triplet RGB layout and deterministic PNG encoding.

use std::path::Path;

use super::BpeaArtifact;
use crate::error::{Error, Result};

pub const IMAGE_WIDTH: usize = 256;

/// Row-major RGB image, always [`IMAGE_WIDTH`] pixels wide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    /// `data` holds `3 · 256 · height` channel bytes.
    pub fn from_raw(height: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 {
            return Err(Error::InvalidInput(
                "image height must be at least 1".into(),
            ));
        }
        if data.len() != 3 * IMAGE_WIDTH * height {
            return Err(Error::Shape(format!(
                "{} channel bytes for a {IMAGE_WIDTH}x{height} image",
                data.len()
            )));
        }
        Ok(RgbImage { height, data })
    }

    pub fn width(&self) -> usize {
        IMAGE_WIDTH
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        IMAGE_WIDTH * self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let k = 3 * (row * IMAGE_WIDTH + col);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }
}

pub fn bytes_to_image(artifact: &BpeaArtifact) -> Result<RgbImage> {
    layout_bytes(artifact.bytes())
}

/// Consecutive byte triplets become pixels, filled left to right and top to
/// bottom; a short final triplet and the rest of the last row are zeros.
pub fn layout_bytes(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.is_empty() {
        return Err(Error::EmptyArtifact("no bytes to render".into()));
    }
    let pixels = bytes.len().div_ceil(3);
    let height = pixels.div_ceil(IMAGE_WIDTH);
    let mut data = vec![0u8; 3 * IMAGE_WIDTH * height];
    data[..bytes.len()].copy_from_slice(bytes);
    RgbImage::from_raw(height, data)
}

/// Inverse of [`layout_bytes`] given the original length. Bytes past
/// `byte_len` must be padding.
pub fn image_to_bytes(img: &RgbImage, byte_len: usize) -> Result<Vec<u8>> {
    if byte_len == 0 || byte_len > img.data.len() {
        return Err(Error::InvalidInput(format!(
            "byte length {byte_len} does not fit a {}-row image",
            img.height
        )));
    }
    if img.data[byte_len..].iter().any(|b| *b != 0) {
        return Err(Error::Validation(
            "non-zero bytes found in the padding region".into(),
        ));
    }
    Ok(img.data[..byte_len].to_vec())
}

/// 8-bit RGB PNG with fixed compression and filter settings and no
/// ancillary chunks, so equal images give equal files.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, IMAGE_WIDTH as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        enc.set_filter(png::FilterType::NoFilter);
        enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::Format(format!("png header: {e}")))?;
        w.write_image_data(&img.data)
            .map_err(|e| Error::Format(format!("png data: {e}")))?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let dec = png::Decoder::new(bytes);
    let mut reader = dec
        .read_info()
        .map_err(|e| Error::Format(format!("png decode: {e}")))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png decode: {e}")))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format("expected 8-bit RGB png".into()));
    }
    if info.width as usize != IMAGE_WIDTH {
        return Err(Error::Format(format!(
            "png width {} is not {IMAGE_WIDTH}",
            info.width
        )));
    }
    buf.truncate(info.buffer_size());
    RgbImage::from_raw(info.height as usize, buf)
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &encode_png(img)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_row_has_no_padding() {
        let bytes: Vec<u8> = (0..768).map(|i| (i % 251) as u8 + 1).collect();
        let img = layout_bytes(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (256, 1));
        assert_eq!(img.as_raw(), &bytes[..]);
    }

    #[test]
    fn nine_bytes_give_three_pixels() {
        let img = layout_bytes(&[1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        assert_eq!(img.height(), 1);
        assert_eq!(img.pixel(0, 0), [1, 2, 3]);
        assert_eq!(img.pixel(0, 2), [7, 8, 9]);
        assert!((3..256).all(|c| img.pixel(0, c) == [0, 0, 0]));
    }

    #[test]
    fn partial_triplet_is_zero_filled() {
        let img = layout_bytes(&[9, 8, 7, 6]).unwrap();
        assert_eq!(img.pixel(0, 1), [6, 0, 0]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(layout_bytes(&[]), Err(Error::EmptyArtifact(_))));
    }

    #[test]
    fn round_trip_through_png() {
        let bytes: Vec<u8> = (0..1000u32).map(|i| (i * 7 % 256) as u8).collect();
        let img = layout_bytes(&bytes).unwrap();
        let png = encode_png(&img).unwrap();
        assert_eq!(png, encode_png(&img).unwrap());
        let back = decode_png(&png).unwrap();
        assert_eq!(back, img);
        assert_eq!(image_to_bytes(&back, bytes.len()).unwrap(), bytes);
    }

    #[test]
    fn image_to_bytes_checks_padding() {
        let img = layout_bytes(&[1, 2, 3, 4]).unwrap();
        assert!(image_to_bytes(&img, 3).is_err());
        assert!(image_to_bytes(&img, 0).is_err());
        assert!(image_to_bytes(&img, 10_000).is_err());
    }
}
