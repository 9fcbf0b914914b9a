//! Patch-similarity weights over a search window and nearest-half truncation.

use std::cmp::Ordering;

use crate::error::{param, Result};
use crate::image::{squared_distance, Image, PatchTable, PixelIndex};

/// Search window side `S`, patch side `k` and smoothing parameter `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub window: usize,
    pub patch_side: usize,
    pub h: f64,
}

impl SearchParams {
    pub fn new(window: usize, patch_side: usize, h: f64) -> Result<Self> {
        let p = Self { window, patch_side, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return param(format!("search window must be a positive odd integer, got {}", self.window));
        }
        if self.patch_side == 0 || self.patch_side % 2 == 0 {
            return param(format!("patch side must be a positive odd integer, got {}", self.patch_side));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return param(format!("h must be positive and finite, got {}", self.h));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: PixelIndex,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub center: PixelIndex,
    pub entries: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `exp(-d2 / h^2)`
#[inline]
pub fn gaussian_weight(squared_distance: f64, h: f64) -> f64 {
    (-squared_distance / (h * h)).exp()
}

/// Inclusive range of a window of odd side `window` around `center`, clipped to `0..n`.
#[inline]
pub(crate) fn window_range(center: usize, window: usize, n: usize) -> std::ops::RangeInclusive<usize> {
    let half = window / 2;
    center.saturating_sub(half)..=(center + half).min(n - 1)
}

/// Weights between the patch at `center` and every patch in the clipped
/// `S x S` search window, in row-major window order.
pub fn compute_weights(img: &Image, center: PixelIndex, params: &SearchParams) -> Result<NeighborSet> {
    params.validate()?;
    img.check_bounds(center)?;
    let table = PatchTable::new(img, params.patch_side)?;
    let mut entries = Vec::new();
    neighbors_2d(&table, img.width(), img.height(), center, params, |index, weight| {
        entries.push(Neighbor { index, weight })
    });
    Ok(NeighborSet { center, entries })
}

pub(crate) fn neighbors_2d(
    table: &PatchTable,
    width: usize,
    height: usize,
    center: PixelIndex,
    params: &SearchParams,
    mut emit: impl FnMut(PixelIndex, f64),
) {
    let reference = table.get(center.linear(width));
    for r in window_range(center.row, params.window, height) {
        for c in window_range(center.col, params.window, width) {
            let d2 = squared_distance(reference, table.get(r * width + c));
            emit(PixelIndex::new(r, c), gaussian_weight(d2, params.h));
        }
    }
}

/// Orders by weight non-increasing; among equal weights the center comes
/// first, then ascending pixel index.
#[inline]
pub(crate) fn rank_order(center: PixelIndex) -> impl Fn(&Neighbor, &Neighbor) -> Ordering {
    move |a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| (b.index == center).cmp(&(a.index == center)))
            .then_with(|| a.index.cmp(&b.index))
    }
}

/// Number of neighbors kept from `r` candidates: `ceil(r / 2)`.
#[inline]
pub const fn nearest_half_count(r: usize) -> usize {
    r.div_ceil(2)
}

/// Keeps the `ceil(r/2)` largest-weight entries, sorted non-increasing.
///
/// Ties go to the center pixel first, then to the smaller pixel index, so the
/// self entry (weight 1) is never evicted.
pub fn truncate_to_nearest_half(ns: &NeighborSet) -> Result<NeighborSet> {
    if ns.entries.is_empty() {
        return param("cannot truncate an empty neighbor set");
    }
    let mut entries = ns.entries.clone();
    truncate_in_place(&mut entries, ns.center);
    Ok(NeighborSet { center: ns.center, entries })
}

pub(crate) fn truncate_in_place(entries: &mut Vec<Neighbor>, center: PixelIndex) {
    let keep = nearest_half_count(entries.len());
    let order = rank_order(center);
    if keep < entries.len() {
        entries.select_nth_unstable_by(keep - 1, &order);
        entries.truncate(keep);
    }
    entries.sort_unstable_by(order);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::extract_patch;

    fn textured(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |r, c| ((r * 13 + c * 7 + r * c) % 17) as f64 / 16.0).unwrap()
    }

    fn ns(weights: &[f64]) -> NeighborSet {
        NeighborSet {
            center: PixelIndex::new(0, 0),
            entries: weights
                .iter()
                .enumerate()
                .map(|(i, &weight)| Neighbor { index: PixelIndex::new(0, i), weight })
                .collect(),
        }
    }

    #[test]
    fn constant_image_has_unit_weights() {
        let img = Image::filled(30, 30, 0.4).unwrap();
        let params = SearchParams::new(21, 7, 0.1).unwrap();
        let set = compute_weights(&img, PixelIndex::new(15, 15), &params).unwrap();
        assert_eq!(set.len(), 441);
        assert!(set.entries.iter().all(|n| n.weight == 1.0));
    }

    #[test]
    fn window_is_clipped_at_borders() {
        let img = Image::filled(30, 30, 0.4).unwrap();
        let params = SearchParams::new(21, 7, 0.1).unwrap();
        let set = compute_weights(&img, PixelIndex::new(0, 3), &params).unwrap();
        assert_eq!(set.len(), 11 * 14);
    }

    #[test]
    fn distance_h_squared_gives_inverse_e() {
        assert!((gaussian_weight(0.25, 0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gaussian_weight(0.0, 0.3), 1.0);
    }

    #[test]
    fn weights_match_direct_patch_distances() {
        let img = textured(12, 10);
        let params = SearchParams::new(5, 3, 0.7).unwrap();
        let center = PixelIndex::new(4, 6);
        let set = compute_weights(&img, center, &params).unwrap();
        let pc = extract_patch(&img, center, 3).unwrap();
        for n in &set.entries {
            let pj = extract_patch(&img, n.index, 3).unwrap();
            let d2: f64 = pc.values().iter().zip(pj.values()).map(|(a, b)| (a - b).powi(2)).sum();
            assert!((n.weight - (-d2 / 0.49).exp()).abs() < 1e-15);
        }
        let me = set.entries.iter().find(|n| n.index == center).unwrap();
        assert_eq!(me.weight, 1.0);
    }

    #[test]
    fn truncation_tie_break_uses_pixel_order() {
        let out = truncate_to_nearest_half(&ns(&[0.5; 8])).unwrap();
        let cols: Vec<usize> = out.entries.iter().map(|n| n.index.col).collect();
        assert_eq!(cols, vec![0, 1, 2, 3]);
    }

    #[test]
    fn truncation_keeps_largest() {
        let out = truncate_to_nearest_half(&ns(&[0.1, 0.9, 1.0, 0.5])).unwrap();
        let w: Vec<f64> = out.entries.iter().map(|n| n.weight).collect();
        assert_eq!(w, vec![1.0, 0.9]);
    }

    #[test]
    fn full_window_keeps_221() {
        assert_eq!(nearest_half_count(441), 221);
        let out = truncate_to_nearest_half(&ns(&vec![0.3; 441])).unwrap();
        assert_eq!(out.len(), 221);
        assert_eq!(nearest_half_count(1), 1);
    }

    #[test]
    fn truncation_rejects_empty() {
        assert!(truncate_to_nearest_half(&ns(&[])).is_err());
    }

    #[test]
    fn self_entry_survives_truncation_on_constant_image() {
        let img = Image::filled(15, 15, 0.2).unwrap();
        let params = SearchParams::new(7, 3, 0.1).unwrap();
        for center in [PixelIndex::new(0, 0), PixelIndex::new(7, 7), PixelIndex::new(14, 14), PixelIndex::new(14, 0)] {
            let set = truncate_to_nearest_half(&compute_weights(&img, center, &params).unwrap()).unwrap();
            assert!(set.entries.iter().any(|n| n.index == center), "lost self at {center:?}");
        }
    }

    #[test]
    fn invalid_params() {
        assert!(SearchParams::new(20, 7, 1.0).is_err());
        assert!(SearchParams::new(21, 6, 1.0).is_err());
        assert!(SearchParams::new(21, 7, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shift_invariant_weights(shift in -2.0f64..2.0, r in 0usize..9, c in 0usize..11) {
            // dyadic intensities keep the shifted differences exact
            let img = Image::from_fn(11, 9, |i, j| ((i * 5 + j * 3) % 8) as f64 / 8.0).unwrap();
            let shift = (shift * 64.0).round() / 64.0;
            let params = SearchParams::new(5, 3, 0.6).unwrap();
            let a = compute_weights(&img, PixelIndex::new(r, c), &params).unwrap();
            let b = compute_weights(&img.shifted(shift), PixelIndex::new(r, c), &params).unwrap();
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn truncation_separates_kept_from_discarded(ws in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
            let set = ns(&ws);
            let kept = truncate_to_nearest_half(&set).unwrap();
            proptest::prop_assert_eq!(kept.len(), ws.len().div_ceil(2));
            for pair in kept.entries.windows(2) {
                proptest::prop_assert!(pair[0].weight >= pair[1].weight);
            }
            let min_kept = kept.entries.last().unwrap().weight;
            let kept_idx: Vec<_> = kept.entries.iter().map(|n| n.index).collect();
            for n in set.entries.iter().filter(|n| !kept_idx.contains(&n.index)) {
                proptest::prop_assert!(n.weight <= min_kept);
            }
        }

        #[test]
        fn weight_decreases_with_distance(a in 0.0f64..10.0, b in 0.0f64..10.0, h in 0.1f64..3.0) {
            proptest::prop_assume!(a < b);
            proptest::prop_assert!(gaussian_weight(a, h) >= gaussian_weight(b, h));
        }
    }
}
