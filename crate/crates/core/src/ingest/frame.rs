use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// An 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidShape(format!(
                "frame dimensions {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(IngestError::InvalidShape(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, IngestError> {
        Frame::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Replace the pixel buffer, keeping the dimensions.
    pub fn map_pixels(&self, mut f: impl FnMut(usize, u8) -> u8) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .enumerate()
                .map(|(i, &p)| f(i, p))
                .collect(),
        }
    }

    pub fn mean_intensity(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / self.pixels.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NoCrater,
    Crater,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Crater => "crater",
            Label::NoCrater => "no_crater",
        }
    }
}

/// Frames with crater / no-crater labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrames {
    frames: Vec<Frame>,
    labels: Vec<Label>,
}

impl LabeledFrames {
    pub fn new(frames: Vec<Frame>, labels: Vec<Label>) -> Result<Self, IngestError> {
        if frames.len() != labels.len() {
            return Err(IngestError::InvalidShape(format!(
                "{} frames but {} labels",
                frames.len(),
                labels.len()
            )));
        }
        if let Some(first) = frames.first() {
            let dims = (first.width, first.height);
            if frames.iter().any(|f| (f.width, f.height) != dims) {
                return Err(IngestError::InvalidShape("mixed frame sizes".into()));
            }
        }
        Ok(LabeledFrames { frames, labels })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Frame, Label)> {
        self.frames.iter().zip(self.labels.iter().copied())
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&Label::Crater) && self.labels.contains(&Label::NoCrater)
    }

    /// Same labels, different frames (e.g. after transit over the bus).
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self, IngestError> {
        LabeledFrames::new(frames, self.labels.clone())
    }
}

pub fn load_frame_pgm(path: impl AsRef<Path>) -> Result<Frame, IngestError> {
    parse_pgm(&std::fs::read(path)?)
}

/// Parse a binary (P5) PGM with maxval 255. `#` comments in the header are
/// skipped; exactly one whitespace byte separates maxval from the raster.
pub fn parse_pgm(bytes: &[u8]) -> Result<Frame, IngestError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(IngestError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(IngestError::BadHeader("expected a decimal number".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| IngestError::BadHeader(format!("number out of range: {text}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(IngestError::BadHeader(
                "missing separator after maxval".into(),
            ))
        }
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(IngestError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(IngestError::InvalidShape(format!("{width}x{height}")));
    }
    let expected = width as usize * height as usize;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(IngestError::TruncatedPixelData {
            expected,
            found: raster.len(),
        });
    }
    Frame::new(width, height, raster[..expected].to_vec())
}

pub fn write_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_two_by_two() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        let f = parse_pgm(&bytes).unwrap();
        assert_eq!((f.width(), f.height()), (2, 2));
        assert_eq!(f.pixels(), &[0, 64, 128, 255]);
    }

    #[test]
    fn ascii_pgm_is_bad_magic() {
        assert!(matches!(
            parse_pgm(b"P2\n2 2\n255\n0 0 0 0\n"),
            Err(IngestError::BadMagic)
        ));
    }

    #[test]
    fn truncated_raster() {
        let mut bytes = b"P5 4 4 255 ".to_vec();
        bytes.extend_from_slice(&[7; 15]);
        match parse_pgm(&bytes) {
            Err(IngestError::TruncatedPixelData { expected, found }) => {
                assert_eq!((expected, found), (16, 15));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sixteen_bit_maxval_rejected() {
        assert!(matches!(
            parse_pgm(b"P5 1 1 65535\n\0\0"),
            Err(IngestError::UnsupportedMaxval(65535))
        ));
    }

    #[test]
    fn header_comments_skipped() {
        let mut bytes = b"P5\n# made by hand\n1 2\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 10]);
        assert_eq!(parse_pgm(&bytes).unwrap().pixels(), &[9, 10]);
    }

    #[test]
    fn labeled_frames_length_mismatch() {
        let f = Frame::filled(2, 2, 0).unwrap();
        assert!(LabeledFrames::new(vec![f], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h)
                .map(|i| (crate::rng::mix64(seed ^ u64::from(i)) & 0xff) as u8)
                .collect();
            let frame = Frame::new(w, h, pixels).unwrap();
            let back = parse_pgm(&write_pgm(&frame)).unwrap();
            prop_assert_eq!(back, frame);
        }
    }
}
