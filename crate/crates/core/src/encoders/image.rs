use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale image side length.
pub const IMAGE_SIDE: usize = 8;
pub const CHANNELS: usize = 3;

/// `H×W×3` grid of reals in `[0, 1]`, stored pixel-major (`[(y*W + x)*3 + c]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl RawImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::ImageShape {
                expected_h: height,
                expected_w: width,
                h: height,
                w: width,
                c: data.len() / (height * width).max(1),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// All-zero image; the input of the BlackImage baseline.
    pub fn black() -> Self {
        Self {
            height: IMAGE_SIDE,
            width: IMAGE_SIDE,
            data: vec![0.0; IMAGE_SIDE * IMAGE_SIDE * CHANNELS],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn is_black(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Rejects anything but the desk-scale `8×8×3` layout.
    pub fn check_desk_shape(&self) -> Result<()> {
        if self.height != IMAGE_SIDE || self.width != IMAGE_SIDE {
            return Err(Error::ImageShape {
                expected_h: IMAGE_SIDE,
                expected_w: IMAGE_SIDE,
                h: self.height,
                w: self.width,
                c: CHANNELS,
            });
        }
        Ok(())
    }
}
