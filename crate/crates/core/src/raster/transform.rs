use serde::{Deserialize, Serialize};

use super::{Canvas, RasterError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn intersection_area(&self, o: &PixelRect) -> u64 {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = (self.x + self.w).min(o.x + o.w);
        let y1 = (self.y + self.h).min(o.y + o.h);
        if x1 <= x0 || y1 <= y0 {
            return 0;
        }
        u64::from(x1 - x0) * u64::from(y1 - y0)
    }

    pub fn iou(&self, o: &PixelRect) -> f64 {
        let inter = self.intersection_area(o);
        let union = self.area() + o.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn contains(&self, o: &PixelRect) -> bool {
        o.x >= self.x && o.y >= self.y && o.x + o.w <= self.x + self.w && o.y + o.h <= self.y + self.h
    }
}

/// Clockwise rotation by a multiple of 90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn then(self, o: Rotation) -> Rotation {
        Rotation::try_from((self.degrees() + o.degrees()) % 360).expect("multiple of 90")
    }
}

impl TryFrom<u16> for Rotation {
    type Error = String;

    fn try_from(d: u16) -> Result<Self, String> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(format!("rotation must be 0, 90, 180 or 270 degrees, got {d}")),
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

/// Crops `rect`, rotates it clockwise, then rescales with nearest-neighbour
/// sampling. Output side lengths are `round(side * scale)`, at least 1.
pub fn crop_transform(canvas: &Canvas, rect: PixelRect, rotation: Rotation, scale: f64) -> Result<Canvas, RasterError> {
    if rect.w == 0 || rect.h == 0 || rect.x + rect.w > canvas.width() || rect.y + rect.h > canvas.height() {
        return Err(RasterError::OutOfBounds(format!(
            "crop {rect:?} of {}x{} canvas",
            canvas.width(),
            canvas.height()
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(RasterError::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    let (rw, rh) = match rotation {
        Rotation::R0 | Rotation::R180 => (rect.w, rect.h),
        Rotation::R90 | Rotation::R270 => (rect.h, rect.w),
    };
    // source pixel of rotated-crop coordinate (u, v)
    let src = |u: u32, v: u32| -> (u32, u32) {
        let (cx, cy) = match rotation {
            Rotation::R0 => (u, v),
            Rotation::R90 => (v, rect.h - 1 - u),
            Rotation::R180 => (rect.w - 1 - u, rect.h - 1 - v),
            Rotation::R270 => (rect.w - 1 - v, u),
        };
        (rect.x + cx, rect.y + cy)
    };
    let ow = ((f64::from(rw) * scale).round() as u32).max(1);
    let oh = ((f64::from(rh) * scale).round() as u32).max(1);
    let mut out = Canvas::new(ow, oh, [0, 0, 0]);
    for y in 0..oh {
        let v = if oh == rh { y } else { (((f64::from(y) + 0.5) * f64::from(rh) / f64::from(oh)) as u32).min(rh - 1) };
        for x in 0..ow {
            let u =
                if ow == rw { x } else { (((f64::from(x) + 0.5) * f64::from(rw) / f64::from(ow)) as u32).min(rw - 1) };
            let (sx, sy) = src(u, v);
            out.set(x, y, canvas.get(sx, sy));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Canvas {
        let mut c = Canvas::new(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                c.set(x, y, [x as u8, y as u8, (x * 7 + y * 3) as u8]);
            }
        }
        c
    }

    fn full(c: &Canvas) -> PixelRect {
        PixelRect { x: 0, y: 0, w: c.width(), h: c.height() }
    }

    #[test]
    fn identity() {
        let c = gradient(13, 7);
        assert_eq!(crop_transform(&c, full(&c), Rotation::R0, 1.0).unwrap(), c);
    }

    #[test]
    fn rotate_90_index_arithmetic() {
        let c = gradient(13, 7);
        let r = crop_transform(&c, PixelRect { x: 2, y: 1, w: 5, h: 3 }, Rotation::R90, 1.0).unwrap();
        assert_eq!((r.width(), r.height()), (3, 5));
        for y in 0..5 {
            for x in 0..3 {
                // clockwise: output (x, y) comes from crop (y, h - 1 - x)
                assert_eq!(r.get(x, y), c.get(2 + y, 1 + (3 - 1 - x)));
            }
        }
    }

    #[test]
    fn group_laws() {
        let c = gradient(9, 6);
        let rot = |c: &Canvas, r| crop_transform(c, full(c), r, 1.0).unwrap();
        assert_eq!(rot(&rot(&c, Rotation::R180), Rotation::R180), c);
        assert_eq!(rot(&rot(&c, Rotation::R90), Rotation::R90), rot(&c, Rotation::R180));
        let mut x = c.clone();
        for _ in 0..4 {
            x = rot(&x, Rotation::R90);
        }
        assert_eq!(x, c);
        assert_eq!(rot(&rot(&c, Rotation::R90), Rotation::R270), c);
        assert_eq!(rot(&rot(&c, Rotation::R270), Rotation::R180), rot(&c, Rotation::R90));
        assert_eq!(Rotation::R270.then(Rotation::R180), Rotation::R90);
    }

    #[test]
    fn nearest_neighbour_upscale() {
        let c = gradient(4, 4);
        let s = crop_transform(&c, full(&c), Rotation::R0, 2.0).unwrap();
        assert_eq!((s.width(), s.height()), (8, 8));
        assert_eq!(s.get(5, 3), c.get(2, 1));
    }

    #[test]
    fn bounds_and_scale_errors() {
        let c = gradient(4, 4);
        assert!(crop_transform(&c, PixelRect { x: 2, y: 0, w: 3, h: 1 }, Rotation::R0, 1.0).is_err());
        assert!(crop_transform(&c, full(&c), Rotation::R0, 0.0).is_err());
    }

    #[test]
    fn rect_geometry() {
        let a = PixelRect { x: 0, y: 0, w: 10, h: 10 };
        let b = PixelRect { x: 10, y: 0, w: 5, h: 5 };
        assert_eq!(a.iou(&b), 0.0);
        let c = PixelRect { x: 5, y: 5, w: 10, h: 10 };
        assert!((a.iou(&c) - 25.0 / 175.0).abs() < 1e-15);
        assert!(a.contains(&PixelRect { x: 2, y: 2, w: 8, h: 8 }));
    }
}
