//! RGB raster images with unit-interval channels.

use crate::error::{Error, Result};
use crate::nn::Volume;

/// One pixel: red, green, blue, each in [0, 1].
pub type Rgb = [f64; 3];

pub const BLACK: Rgb = [0.0, 0.0, 0.0];

/// A width × height RGB image stored row-major, channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape("image dimensions must be >= 1"));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(format!(
                "pixel count {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.pixels[y * self.width + x] = value;
    }

    /// Repacks the image as a 3 × height × width feature volume
    /// (channel-major, the layout the network layers consume).
    pub fn to_volume(&self) -> Volume {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; 3 * h * w];
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data[(c * h + y) * w + x] = self.pixels[y * w + x][c];
                }
            }
        }
        Volume::new(3, h, w, data).expect("dimensions are consistent by construction")
    }
}
