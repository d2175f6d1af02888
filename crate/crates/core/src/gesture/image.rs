use super::GestureError;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// 28×28 grayscale raster, row-major, row 0 at the top. Pixels lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DigitImage {
    pixels: Vec<f32>,
    label: Option<u8>,
}

impl DigitImage {
    pub fn new(pixels: Vec<f32>, label: Option<u8>) -> Result<Self, GestureError> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(GestureError::PayloadSizeMismatch { expected: IMAGE_PIXELS, got: pixels.len() });
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(GestureError::PixelOutOfRange { index, value });
        }
        if let Some(l) = label {
            if l > 9 {
                return Err(GestureError::InvalidLabel(l));
            }
        }
        Ok(Self { pixels, label })
    }

    pub fn zeros() -> Self {
        Self { pixels: vec![0.0; IMAGE_PIXELS], label: None }
    }

    /// Decodes the 784-byte wire form (`value = byte / 255`).
    pub fn from_bytes(bytes: &[u8], label: Option<u8>) -> Result<Self, GestureError> {
        if bytes.len() != IMAGE_PIXELS {
            return Err(GestureError::PayloadSizeMismatch { expected: IMAGE_PIXELS, got: bytes.len() });
        }
        Self::new(bytes.iter().map(|&b| b as f32 / 255.0).collect(), label)
    }

    /// 784 bytes, `round(pixel * 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| (p * 255.0).round() as u8).collect()
    }

    /// Same image after a trip through the byte encoding.
    pub fn quantized(&self) -> Self {
        Self::from_bytes(&self.to_bytes(), self.label).expect("encoded image is valid")
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * IMAGE_SIDE + col]
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn with_label(mut self, label: Option<u8>) -> Self {
        self.label = label;
        self
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / IMAGE_PIXELS as f64
    }

    /// Coarse text rendering, handy in examples and test failure output.
    pub fn to_ascii(&self) -> String {
        const RAMP: &[u8] = b" .:-=+*#%@";
        let mut s = String::with_capacity(IMAGE_PIXELS + IMAGE_SIDE);
        for row in self.pixels.chunks(IMAGE_SIDE) {
            for &p in row {
                let i = ((p * (RAMP.len() - 1) as f32).round() as usize).min(RAMP.len() - 1);
                s.push(RAMP[i] as char);
            }
            s.push('\n');
        }
        s
    }
}
