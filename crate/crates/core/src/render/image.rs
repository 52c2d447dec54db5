use serde::{Deserialize, Serialize};

/// One rendered frame, tightly packed RGB rows from the top-left.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageObservation {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub step_rendered_at: u32,
    pub blackout: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decoding failed: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Layout(String),
}

impl ImageObservation {
    pub fn black(width: u32, height: u32, step: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; (width * height * 3) as usize],
            step_rendered_at: step,
            blackout: true,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y * self.width + x) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn is_all_black(&self) -> bool {
        self.pixels.iter().all(|v| *v == 0)
    }
}

pub fn encode_png(img: &ImageObservation) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width, img.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&img.pixels)?;
    }
    Ok(out)
}

/// Decodes an 8-bit RGB PNG. The step and blackout flag are not stored in
/// the file; blackout is inferred from an all-black image.
pub fn decode_png(bytes: &[u8]) -> Result<ImageObservation, ImageError> {
    let dec = png::Decoder::new(bytes);
    let mut reader = dec.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::Layout(format!(
            "{:?} at {:?} bits",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    let blackout = buf.iter().all(|v| *v == 0);
    Ok(ImageObservation {
        width: info.width,
        height: info.height,
        pixels: buf,
        step_rendered_at: 0,
        blackout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_round_trip() {
        let img = ImageObservation::black(16, 16, 0);
        let bytes = encode_png(&img).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
        assert_eq!(decode_png(&bytes).unwrap(), img);
    }

    #[test]
    fn pattern_round_trip() {
        let pixels: Vec<u8> = (0..20 * 17 * 3).map(|i| (i * 7 % 251) as u8).collect();
        let img = ImageObservation {
            width: 20,
            height: 17,
            pixels,
            step_rendered_at: 0,
            blackout: false,
        };
        assert_eq!(decode_png(&encode_png(&img).unwrap()).unwrap(), img);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(decode_png(b"not a png").is_err());
    }
}
