//! Axis-aligned box arithmetic in continuous pixel coordinates.
//!
//! Boxes use the corner convention: `(x1, y1)` is the top-left corner,
//! `(x2, y2)` the bottom-right one, and area is `(x2 - x1) * (y2 - y1)`
//! with no `+1` pixel adjustment. Zero-area boxes are valid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox<T>", into = "RawBox<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BBox<T> {
    x1: T,
    y1: T,
    x2: T,
    y2: T,
}

#[derive(Serialize, Deserialize)]
struct RawBox<T> {
    x1: T,
    y1: T,
    x2: T,
    y2: T,
}

impl<T: Scalar> TryFrom<RawBox<T>> for BBox<T> {
    type Error = Error;

    fn try_from(r: RawBox<T>) -> Result<Self> {
        BBox::new(r.x1, r.y1, r.x2, r.y2)
    }
}

impl<T: Scalar> From<BBox<T>> for RawBox<T> {
    fn from(b: BBox<T>) -> Self {
        RawBox {
            x1: b.x1,
            y1: b.y1,
            x2: b.x2,
            y2: b.y2,
        }
    }
}

impl<T: Scalar> BBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self> {
        let finite = x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite();
        if !finite || x1 > x2 || y1 > y2 {
            return Err(Error::InvalidBox {
                x1: x1.as_f64(),
                y1: y1.as_f64(),
                x2: x2.as_f64(),
                y2: y2.as_f64(),
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from a top-left corner plus width and height (COCO `bbox`).
    pub fn from_xywh(x: T, y: T, w: T, h: T) -> Result<Self> {
        Self::new(x, y, x + w, y + h)
    }

    /// Builds a `w x h` box centered at `(cx, cy)`.
    pub fn from_center(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new(cx - w / two, cy - h / two, cx + w / two, cy + h / two)
    }

    #[inline]
    pub fn x1(&self) -> T {
        self.x1
    }

    #[inline]
    pub fn y1(&self) -> T {
        self.y1
    }

    #[inline]
    pub fn x2(&self) -> T {
        self.x2
    }

    #[inline]
    pub fn y2(&self) -> T {
        self.y2
    }

    #[inline]
    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (T, T) {
        let two = T::lit(2.0);
        ((self.x1 + self.x2) / two, (self.y1 + self.y2) / two)
    }

    #[inline]
    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn translate(&self, dx: T, dy: T) -> Result<Self> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    /// Intersection over union. Two boxes whose union has zero area have IoU 0.
    pub fn iou(&self, other: &Self) -> T {
        iou(self, other)
    }

    /// Whether the box lies inside `[0, width] x [0, height]`.
    pub fn within(&self, width: T, height: T) -> bool {
        self.x1 >= T::zero() && self.y1 >= T::zero() && self.x2 <= width && self.y2 <= height
    }

    /// Clamps the box into `[0, width] x [0, height]`.
    pub fn clamp_to(&self, width: T, height: T) -> Self {
        let cx = |v: T| v.max(T::zero()).min(width);
        let cy = |v: T| v.max(T::zero()).min(height);
        Self {
            x1: cx(self.x1),
            y1: cy(self.y1),
            x2: cx(self.x2),
            y2: cy(self.y2),
        }
    }
}

pub fn area<T: Scalar>(b: &BBox<T>) -> T {
    b.area()
}

pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    // rounding can push inter/union a hair above 1 for near-identical boxes
    (inter / union).min(T::one())
}

/// IoU of two `(w, h)` rectangles sharing a common center.
pub fn center_aligned_iou<T: Scalar>(a: (T, T), b: (T, T)) -> Result<T> {
    for (w, h) in [a, b] {
        if !(w > T::zero() && h > T::zero()) || !w.is_finite() || !h.is_finite() {
            return Err(Error::InvalidShape {
                w: w.as_f64(),
                h: h.as_f64(),
            });
        }
    }
    Ok(center_aligned_iou_unchecked(a, b))
}

/// [`center_aligned_iou`] without the positivity check, for hot loops over validated shapes.
#[inline]
pub(crate) fn center_aligned_iou_unchecked<T: Scalar>(a: (T, T), b: (T, T)) -> T {
    let inter = a.0.min(b.0) * a.1.min(b.1);
    inter / (a.0 * a.1 + b.0 * b.1 - inter)
}
