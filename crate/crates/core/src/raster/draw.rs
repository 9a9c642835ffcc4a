use font8x8::{UnicodeFonts, BASIC_FONTS};
use serde::{Deserialize, Serialize};

use super::{Canvas, PixelRect, RasterError, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

/// Samples a cubic Bezier segment at `n + 1` evenly spaced parameters.
pub fn cubic_bezier_points(seg: &[Point; 4], n: usize) -> Vec<Point> {
    let [p0, p1, p2, p3] = *seg;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let u = 1.0 - t;
            let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
            Point::new(a * p0.x + b * p1.x + c * p2.x + d * p3.x, a * p0.y + b * p1.y + c * p2.y + d * p3.y)
        })
        .collect()
}

const BEZIER_STEPS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum DrawCommand {
    Polygon {
        points: Vec<Point>,
        fill: Rgb,
    },
    Circle {
        center: Point,
        radius: f64,
        fill: Rgb,
    },
    Polyline {
        points: Vec<Point>,
        width: f64,
        color: Rgb,
    },
    BezierPath {
        segments: Vec<[Point; 4]>,
        width: f64,
        color: Rgb,
    },
    Arrow {
        from: Point,
        to: Point,
        width: f64,
        head: f64,
        color: Rgb,
    },
    /// 8x8 bitmap glyphs; `origin` is the top-left corner.
    Label {
        origin: Point,
        text: String,
        scale: u32,
        color: Rgb,
    },
    Speckle {
        dots: Vec<Point>,
        radius: f64,
        color: Rgb,
    },
    RectOutline {
        rect: PixelRect,
        width: u32,
        color: Rgb,
    },
    Image {
        x: u32,
        y: u32,
        canvas: Canvas,
    },
}

impl DrawCommand {
    /// Label centred on `center`.
    pub fn centered_label(center: Point, text: &str, scale: u32, color: Rgb) -> Self {
        let (w, h) = label_size(text, scale);
        DrawCommand::Label {
            origin: Point::new((center.x - f64::from(w) / 2.0).round(), (center.y - f64::from(h) / 2.0).round()),
            text: text.to_owned(),
            scale,
            color,
        }
    }

    pub(super) fn check_bounds(&self, width: u32, height: u32) -> Result<(), RasterError> {
        let (w, h) = (f64::from(width), f64::from(height));
        let inside = |p: &Point, margin: f64| {
            p.x.is_finite()
                && p.y.is_finite()
                && p.x - margin >= 0.0
                && p.y - margin >= 0.0
                && p.x + margin <= w
                && p.y + margin <= h
        };
        let fail = |what: &str| Err(RasterError::OutOfBounds(format!("{what} outside {width}x{height} canvas")));
        match self {
            DrawCommand::Polygon { points, .. } | DrawCommand::Polyline { points, .. } => {
                if points.iter().all(|p| inside(p, 0.0)) {
                    Ok(())
                } else {
                    fail("polygon vertex")
                }
            }
            DrawCommand::Circle { center, radius, .. } => {
                if inside(center, *radius) {
                    Ok(())
                } else {
                    fail("circle")
                }
            }
            DrawCommand::BezierPath { segments, .. } => {
                if segments.iter().flatten().all(|p| inside(p, 0.0)) {
                    Ok(())
                } else {
                    fail("bezier control point")
                }
            }
            DrawCommand::Arrow { from, to, .. } => {
                if inside(from, 0.0) && inside(to, 0.0) {
                    Ok(())
                } else {
                    fail("arrow endpoint")
                }
            }
            DrawCommand::Label { origin, text, scale, .. } => {
                let (lw, lh) = label_size(text, *scale);
                let far = Point::new(origin.x + f64::from(lw), origin.y + f64::from(lh));
                if inside(origin, 0.0) && inside(&far, 0.0) {
                    Ok(())
                } else {
                    fail("label")
                }
            }
            DrawCommand::Speckle { dots, radius, .. } => {
                if dots.iter().all(|p| inside(p, *radius)) {
                    Ok(())
                } else {
                    fail("speckle dot")
                }
            }
            DrawCommand::RectOutline { rect, .. } => {
                if rect.x + rect.w <= width && rect.y + rect.h <= height {
                    Ok(())
                } else {
                    fail("rectangle")
                }
            }
            DrawCommand::Image { x, y, canvas } => {
                if x + canvas.width() <= width && y + canvas.height() <= height {
                    Ok(())
                } else {
                    fail("image")
                }
            }
        }
    }

    pub(super) fn rasterize(&self, canvas: &mut Canvas) {
        match self {
            DrawCommand::Polygon { points, fill } => fill_polygon(canvas, points, *fill),
            DrawCommand::Circle { center, radius, fill } => fill_circle(canvas, *center, *radius, *fill),
            DrawCommand::Polyline { points, width, color } => stroke_polyline(canvas, points, *width, *color),
            DrawCommand::BezierPath { segments, width, color } => {
                let mut pts: Vec<Point> = Vec::new();
                for seg in segments {
                    let s = cubic_bezier_points(seg, BEZIER_STEPS);
                    let skip = usize::from(!pts.is_empty());
                    pts.extend(s.into_iter().skip(skip));
                }
                stroke_polyline(canvas, &pts, *width, *color);
            }
            DrawCommand::Arrow { from, to, width, head, color } => {
                draw_arrow(canvas, *from, *to, *width, *head, *color)
            }
            DrawCommand::Label { origin, text, scale, color } => draw_label(canvas, *origin, text, *scale, *color),
            DrawCommand::Speckle { dots, radius, color } => {
                for d in dots {
                    fill_circle(canvas, *d, *radius, *color);
                }
            }
            DrawCommand::RectOutline { rect, width, color } => {
                let w = (*width).min(rect.w).min(rect.h);
                canvas.fill_rect(PixelRect { x: rect.x, y: rect.y, w: rect.w, h: w }, *color);
                canvas.fill_rect(PixelRect { x: rect.x, y: rect.y + rect.h - w, w: rect.w, h: w }, *color);
                canvas.fill_rect(PixelRect { x: rect.x, y: rect.y, w, h: rect.h }, *color);
                canvas.fill_rect(PixelRect { x: rect.x + rect.w - w, y: rect.y, w, h: rect.h }, *color);
            }
            DrawCommand::Image { x, y, canvas: src } => {
                canvas.blit(src, *x, *y).expect("bounds checked");
            }
        }
    }
}

pub fn label_size(text: &str, scale: u32) -> (u32, u32) {
    (text.chars().count() as u32 * 8 * scale, 8 * scale)
}

/// Even-odd scanline fill sampled at pixel centres.
pub(super) fn fill_polygon(canvas: &mut Canvas, points: &[Point], c: Rgb) {
    if points.len() < 3 {
        return;
    }
    let ymin = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let ymax =
        points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil().min(f64::from(canvas.height())) as i64;
    let mut xs = Vec::with_capacity(8);
    for y in ymin..ymax {
        let yc = y as f64 + 0.5;
        xs.clear();
        for i in 0..points.len() {
            let a = points[i];
            let b = points[(i + 1) % points.len()];
            if (a.y <= yc) != (b.y <= yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let x0 = (pair[0] - 0.5).ceil() as i64;
            let x1 = (pair[1] - 0.5).ceil() as i64;
            for x in x0..x1 {
                canvas.put(x, y, c);
            }
        }
    }
}

pub(super) fn fill_circle(canvas: &mut Canvas, center: Point, r: f64, c: Rgb) {
    let r2 = r * r;
    for y in (center.y - r).floor() as i64..=(center.y + r).ceil() as i64 {
        let dy = y as f64 + 0.5 - center.y;
        for x in (center.x - r).floor() as i64..=(center.x + r).ceil() as i64 {
            let dx = x as f64 + 0.5 - center.x;
            if dx * dx + dy * dy <= r2 {
                canvas.put(x, y, c);
            }
        }
    }
}

fn stroke_segment(canvas: &mut Canvas, a: Point, b: Point, width: f64, c: Rgb) {
    let len = a.dist(b);
    if len == 0.0 {
        return;
    }
    let (nx, ny) = (-(b.y - a.y) / len * width / 2.0, (b.x - a.x) / len * width / 2.0);
    let quad = [
        Point::new(a.x + nx, a.y + ny),
        Point::new(b.x + nx, b.y + ny),
        Point::new(b.x - nx, b.y - ny),
        Point::new(a.x - nx, a.y - ny),
    ];
    fill_polygon(canvas, &quad, c);
}

/// Thick polyline with round joins and caps.
pub(super) fn stroke_polyline(canvas: &mut Canvas, points: &[Point], width: f64, c: Rgb) {
    for w in points.windows(2) {
        stroke_segment(canvas, w[0], w[1], width, c);
    }
    for p in points {
        fill_circle(canvas, *p, width / 2.0, c);
    }
}

fn draw_arrow(canvas: &mut Canvas, from: Point, to: Point, width: f64, head: f64, c: Rgb) {
    let len = from.dist(to);
    if len == 0.0 {
        return;
    }
    let (dx, dy) = ((to.x - from.x) / len, (to.y - from.y) / len);
    let head = head.min(len);
    let base = Point::new(to.x - dx * head, to.y - dy * head);
    stroke_polyline(canvas, &[from, base], width, c);
    let half = head * 0.5;
    fill_polygon(
        canvas,
        &[to, Point::new(base.x - dy * half, base.y + dx * half), Point::new(base.x + dy * half, base.y - dx * half)],
        c,
    );
}

fn draw_label(canvas: &mut Canvas, origin: Point, text: &str, scale: u32, c: Rgb) {
    let (ox, oy) = (origin.x.round() as i64, origin.y.round() as i64);
    let s = i64::from(scale);
    for (i, ch) in text.chars().enumerate() {
        let Some(rows) = BASIC_FONTS.get(ch) else { continue };
        let gx = ox + i as i64 * 8 * s;
        for (ry, row) in rows.iter().enumerate() {
            for rx in 0..8 {
                if row >> rx & 1 == 1 {
                    for dy in 0..s {
                        for dx in 0..s {
                            canvas.put(gx + rx * s + dx, oy + ry as i64 * s + dy, c);
                        }
                    }
                }
            }
        }
    }
}
