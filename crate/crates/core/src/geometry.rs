//! Axis-aligned boxes in normalized-center and pixel-corner form.
//!
//! Coordinates are continuous: a box covers the closed real interval between
//! its corners and areas are computed without any pixel-grid rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance band around `[0, 1]` accepted for normalized edges.
pub const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: i64, height: i64) -> Result<Self> {
        if width < 1 || height < 1 || width > u32::MAX as i64 || height > u32::MAX as i64 {
            return Err(Error::InvalidDims { width, height });
        }
        Ok(Self {
            width: width as u32,
            height: height as u32,
        })
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

/// YOLO-style box: center and extents as fractions of the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormBox {
    /// Validates finiteness, positive extents and that every edge lies in
    /// `[-NORM_EPS, 1 + NORM_EPS]`. Values inside the band are kept as given;
    /// clamping happens on conversion to pixels.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { cx, cy, w, h } = *self;
        if ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::MalformedBox(format!(
                "non-finite coordinate in ({cx}, {cy}, {w}, {h})"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::MalformedBox(format!(
                "extents must be positive, got w={w} h={h}"
            )));
        }
        for (axis, lo, hi) in [("x", cx - w / 2.0, cx + w / 2.0), ("y", cy - h / 2.0, cy + h / 2.0)] {
            if lo < -NORM_EPS || hi > 1.0 + NORM_EPS {
                return Err(Error::MalformedBox(format!(
                    "{axis} extent [{lo}, {hi}] outside the image"
                )));
            }
        }
        Ok(())
    }

    /// Same box with its edges pulled into `[0, 1]`.
    pub fn clamped(&self) -> NormBox {
        let x0 = (self.cx - self.w / 2.0).clamp(0.0, 1.0);
        let x1 = (self.cx + self.w / 2.0).clamp(0.0, 1.0);
        let y0 = (self.cy - self.h / 2.0).clamp(0.0, 1.0);
        let y1 = (self.cy + self.h / 2.0).clamp(0.0, 1.0);
        NormBox {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }
}

/// Corner-form box in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl PixelBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::MalformedBox(format!(
                "non-finite corner in ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::MalformedBox(format!(
                "inverted corners ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Build from a COCO-style `[x, y, w, h]` top-left/extent quadruple.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &PixelBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }

    fn clamp_to(&self, dims: ImageDims) -> PixelBox {
        let (w, h) = (dims.width as f64, dims.height as f64);
        PixelBox {
            x_min: self.x_min.clamp(0.0, w),
            y_min: self.y_min.clamp(0.0, h),
            x_max: self.x_max.clamp(0.0, w),
            y_max: self.y_max.clamp(0.0, h),
        }
    }
}

pub fn norm_to_pixel(b: &NormBox, dims: ImageDims) -> Result<PixelBox> {
    if ![b.cx, b.cy, b.w, b.h].iter().all(|v| v.is_finite()) {
        return Err(Error::MalformedBox(format!("non-finite coordinate in {b:?}")));
    }
    let (w, h) = (dims.width as f64, dims.height as f64);
    let raw = PixelBox {
        x_min: (b.cx - b.w / 2.0) * w,
        y_min: (b.cy - b.h / 2.0) * h,
        x_max: (b.cx + b.w / 2.0) * w,
        y_max: (b.cy + b.h / 2.0) * h,
    };
    Ok(raw.clamp_to(dims))
}

/// Inverse of [`norm_to_pixel`]. The box is clamped into the image first; a
/// box with no width or height left after that is rejected.
pub fn pixel_to_norm(b: &PixelBox, dims: ImageDims) -> Result<NormBox> {
    let c = b.clamp_to(dims);
    if !(c.width() > 0.0 && c.height() > 0.0) {
        return Err(Error::DegenerateBox(format!(
            "({}, {}, {}, {}) has no area inside a {}x{} image",
            b.x_min, b.y_min, b.x_max, b.y_max, dims.width, dims.height
        )));
    }
    let (w, h) = (dims.width as f64, dims.height as f64);
    Ok(NormBox {
        cx: (c.x_min + c.x_max) / 2.0 / w,
        cy: (c.y_min + c.y_max) / 2.0 / h,
        w: c.width() / w,
        h: c.height() / h,
    })
}

/// Intersection over union. Two zero-area boxes give 0.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Tightest axis-aligned box around a polygon given as `(x, y)` vertices.
pub fn polygon_bbox(points: &[(f64, f64)]) -> Result<PixelBox> {
    if points.len() < 3 {
        return Err(Error::MalformedPolygon(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::MalformedPolygon("non-finite vertex".into()));
    }
    let init = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (x0, y0, x1, y1) = points.iter().fold(init, |(x0, y0, x1, y1), &(x, y)| {
        (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
    });
    PixelBox::new(x0, y0, x1, y1)
}
