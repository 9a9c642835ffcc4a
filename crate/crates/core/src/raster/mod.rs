//! Deterministic software rasterizer. No anti-aliasing: a pixel is covered
//! when its centre lies inside the primitive.

mod draw;
mod shapes;
mod transform;

use std::io::Cursor;

use image::{ImageEncoder, RgbImage};
use thiserror::Error;

pub use draw::{cubic_bezier_points, DrawCommand, Point};
pub use shapes::{shape_outline, ShapeKind};
pub use transform::{crop_transform, PixelRect, Rotation};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("png encoding failed: {0}")]
    Encode(String),
    #[error("image decoding failed: {0}")]
    Decode(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Canvas {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Canvas {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Canvas").field("width", &self.width).field("height", &self.height).finish_non_exhaustive()
    }
}

impl Canvas {
    pub fn new(width: u32, height: u32, background: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&background);
        }
        Self { width, height, pixels }
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(RasterError::InvalidParameter(format!(
                "{} bytes for a {width}x{height} RGB canvas",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
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

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&c);
    }

    /// Writes a pixel given signed coordinates; off-canvas writes are dropped.
    pub(crate) fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as u64) < u64::from(self.width) && (y as u64) < u64::from(self.height) {
            self.set(x as u32, y as u32, c);
        }
    }

    pub fn fill_rect(&mut self, rect: PixelRect, c: Rgb) {
        for y in rect.y..(rect.y + rect.h).min(self.height) {
            for x in rect.x..(rect.x + rect.w).min(self.width) {
                self.set(x, y, c);
            }
        }
    }

    /// Copies `src` with its top-left corner at `(x, y)`.
    pub fn blit(&mut self, src: &Canvas, x: u32, y: u32) -> Result<(), RasterError> {
        if x + src.width > self.width || y + src.height > self.height {
            return Err(RasterError::OutOfBounds(format!(
                "{}x{} image at ({x}, {y}) on {}x{} canvas",
                src.width, src.height, self.width, self.height
            )));
        }
        let row = src.width as usize * 3;
        for sy in 0..src.height {
            let d = self.offset(x, y + sy);
            let s = src.offset(0, sy);
            self.pixels[d..d + row].copy_from_slice(&src.pixels[s..s + row]);
        }
        Ok(())
    }

    pub fn count_pixels(&self, c: Rgb) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p == c).count()
    }

    /// Mean and standard deviation of luma over the canvas (0..255 scale).
    pub fn luma_stats(&self) -> (f64, f64) {
        let n = (self.width as usize * self.height as usize).max(1) as f64;
        let lumas = self
            .pixels
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]));
        let (s, ss) = lumas.fold((0.0, 0.0), |(s, ss), l| (s + l, ss + l * l));
        let mean = s / n;
        (mean, (ss / n - mean * mean).max(0.0).sqrt())
    }

    pub fn sha256_hex(&self) -> String {
        crate::hashing::sha256_hex(&self.pixels)
    }

    /// PNG bytes: 8-bit RGB, default compression, no ancillary chunks.
    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(Cursor::new(&mut out))
            .write_image(&self.pixels, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        Ok(Self::from(img.to_rgb8()))
    }

    pub fn draw(&mut self, cmd: &DrawCommand) -> Result<(), RasterError> {
        cmd.check_bounds(self.width, self.height)?;
        cmd.rasterize(self);
        Ok(())
    }
}

impl From<RgbImage> for Canvas {
    fn from(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Self { width, height, pixels: img.into_raw() }
    }
}

/// Renders a display list onto a fresh canvas.
pub fn render_commands(
    width: u32,
    height: u32,
    background: Rgb,
    commands: &[DrawCommand],
) -> Result<Canvas, RasterError> {
    let mut canvas = Canvas::new(width, height, background);
    for cmd in commands {
        canvas.draw(cmd)?;
    }
    Ok(canvas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scene_is_uniform() {
        let c = render_commands(32, 16, [10, 20, 30], &[]).unwrap();
        assert_eq!(c.count_pixels([10, 20, 30]), 32 * 16);
    }

    #[test]
    fn png_roundtrip_is_lossless_and_stable() {
        let mut c = Canvas::new(20, 10, WHITE);
        c.set(3, 4, [1, 2, 3]);
        let a = c.encode_png().unwrap();
        assert_eq!(a, c.encode_png().unwrap());
        assert_eq!(Canvas::decode(&a).unwrap(), c);
    }

    #[test]
    fn blit_bounds() {
        let mut c = Canvas::new(10, 10, WHITE);
        let s = Canvas::new(4, 4, BLACK);
        c.blit(&s, 6, 6).unwrap();
        assert_eq!(c.count_pixels(BLACK), 16);
        assert!(c.blit(&s, 7, 0).is_err());
    }

    #[test]
    fn luma_of_flat_canvas() {
        let (m, s) = Canvas::new(8, 8, [100, 100, 100]).luma_stats();
        assert!((m - 100.0).abs() < 1e-9);
        assert!(s < 1e-6);
    }
}
