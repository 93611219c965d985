//! Axis-aligned boxes in normalized image coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated box: `0 <= x_min < x_max <= 1`, same for `y`, score in `[0, 1]`.
///
/// Boxes are closed rectangles, so two boxes that only share an edge have
/// an intersection of measure zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BBox {
    class_id: u32,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    score: f64,
    rater_id: Option<String>,
}

/// Unvalidated box fields, as read from disk or produced by pixel arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBox {
    pub class_id: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
    pub rater_id: Option<String>,
}

impl BBox {
    pub fn new(class_id: u32, coords: [f64; 4], score: f64) -> Result<Self> {
        let [x_min, y_min, x_max, y_max] = coords;
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinate in {coords:?}")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidBox(format!("score {score} outside [0, 1]")));
        }
        if !coords.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::InvalidBox(format!("coordinates {coords:?} outside [0, 1]")));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::DegenerateBox(format!("{coords:?} has no area")));
        }
        Ok(Self {
            class_id,
            x_min,
            y_min,
            x_max,
            y_max,
            score,
            rater_id: None,
        })
    }

    pub fn with_rater(mut self, rater_id: impl Into<String>) -> Self {
        self.rater_id = Some(rater_id.into());
        self
    }

    pub fn with_rater_opt(mut self, rater_id: Option<String>) -> Self {
        self.rater_id = rater_id;
        self
    }

    /// Same geometry and class, different confidence.
    pub fn with_score(&self, score: f64) -> Result<Self> {
        let mut b = BBox::new(self.class_id, self.coords(), score)?;
        b.rater_id = self.rater_id.clone();
        Ok(b)
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    pub fn score(&self) -> f64 {
        self.score
    }
    pub fn rater_id(&self) -> Option<&str> {
        self.rater_id.as_deref()
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
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

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }
}

/// Intersection over union. Zero when interiors are disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Clamp a possibly out-of-range box into the unit square.
pub fn clip_box(raw: &RawBox) -> Result<BBox> {
    let coords = [raw.x_min, raw.y_min, raw.x_max, raw.y_max];
    if !coords.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidBox(format!("non-finite coordinate in {coords:?}")));
    }
    let clamped = coords.map(|c| c.clamp(0.0, 1.0));
    if clamped[0] >= clamped[2] || clamped[1] >= clamped[3] {
        return Err(Error::DegenerateBox(format!(
            "{coords:?} collapses to {clamped:?} after clipping"
        )));
    }
    Ok(BBox::new(raw.class_id, clamped, raw.score)?.with_rater_opt(raw.rater_id.clone()))
}

impl TryFrom<RawBox> for BBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        Ok(BBox::new(
            raw.class_id,
            [raw.x_min, raw.y_min, raw.x_max, raw.y_max],
            raw.score,
        )?
        .with_rater_opt(raw.rater_id))
    }
}

impl From<BBox> for RawBox {
    fn from(b: BBox) -> Self {
        RawBox {
            class_id: b.class_id,
            x_min: b.x_min,
            y_min: b.y_min,
            x_max: b.x_max,
            y_max: b.y_max,
            score: b.score,
            rater_id: b.rater_id,
        }
    }
}
