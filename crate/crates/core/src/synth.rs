//! Synthetic test data: the Checker image and the ideal 1-D step edge.

use crate::error::{param, Error, Result};
use crate::image::{extract_patch_1d, Image, Patch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckerSpec {
    pub image_side: usize,
    pub square_side: usize,
    pub low: f64,
    pub high: f64,
}

impl Default for CheckerSpec {
    fn default() -> Self {
        Self { image_side: 256, square_side: 32, low: 0.0, high: 1.0 }
    }
}

impl CheckerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image_side == 0 || self.square_side == 0 {
            return param("checker sizes must be positive");
        }
        if self.image_side % self.square_side != 0 {
            return param(format!(
                "square side {} does not divide image side {}",
                self.square_side, self.image_side
            ));
        }
        if !(0.0..=1.0).contains(&self.low) || !(0.0..=1.0).contains(&self.high) || !(self.low < self.high) {
            return param(format!("need 0 <= low < high <= 1, got {} and {}", self.low, self.high));
        }
        Ok(())
    }
}

/// Pixel `(r, c)` is `high` iff `r / square + c / square` is odd.
pub fn make_checker(spec: &CheckerSpec) -> Result<Image> {
    spec.validate()?;
    let s = spec.square_side;
    Image::from_fn(spec.image_side, spec.image_side, |r, c| {
        if (r / s + c / s) % 2 == 1 {
            spec.high
        } else {
            spec.low
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub length: usize,
    /// Index of the first `high` sample.
    pub edge_position: usize,
    pub low: f64,
    pub high: f64,
}

impl Default for EdgeSpec {
    fn default() -> Self {
        Self { length: 256, edge_position: 128, low: 0.0, high: 1.0 }
    }
}

pub fn make_edge(spec: &EdgeSpec) -> Result<Vec<f64>> {
    if !(spec.edge_position > 0 && spec.edge_position < spec.length) {
        return param(format!(
            "edge position {} must lie strictly inside a signal of length {}",
            spec.edge_position, spec.length
        ));
    }
    Ok((0..spec.length)
        .map(|i| if i < spec.edge_position { spec.low } else { spec.high })
        .collect())
}

/// The `2 * half_window + 1` length-`k` patches centered on `reference - half_window ..= reference + half_window`.
pub fn edge_patch_cloud(noisy_edge: &[f64], reference: usize, half_window: usize, k: usize) -> Result<Vec<Patch>> {
    if reference < half_window || reference + half_window >= noisy_edge.len() {
        return Err(Error::OutOfBounds {
            row: 0,
            col: reference as isize - half_window as isize,
            width: noisy_edge.len(),
            height: 1,
        });
    }
    (reference - half_window..=reference + half_window)
        .map(|j| extract_patch_1d(noisy_edge, j, k))
        .collect()
}
