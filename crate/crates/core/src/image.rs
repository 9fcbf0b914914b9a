//! Grayscale image container, patch extraction and the PSNR metric.
//!
//! Images are stored row-major as `f64` intensities on the nominal `[0, 1]`
//! scale. Patches are flattened row-major as well, so squared distances
//! between patches do not depend on how they were produced.

use crate::error::{param, Error, Result};

/// PSNR reported when the estimate matches the reference exactly.
///
/// Report writers format this value as `inf`.
pub const PSNR_INFINITE: f64 = f64::INFINITY;

/// Row/column position of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelIndex {
    pub row: usize,
    pub col: usize,
}

impl PixelIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Row-major linear index in an image of the given width.
    #[inline]
    pub const fn linear(self, width: usize) -> usize {
        self.row * width + self.col
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return param(format!("image dimensions must be positive, got {width}x{height}"));
        }
        if data.len() != width * height {
            return param(format!(
                "image data has {} samples, expected {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, at: PixelIndex) -> f64 {
        self.data[at.linear(self.width)]
    }

    pub fn contains(&self, at: PixelIndex) -> bool {
        at.row < self.height && at.col < self.width
    }

    pub(crate) fn check_bounds(&self, at: PixelIndex) -> Result<()> {
        if self.contains(at) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                row: at.row as isize,
                col: at.col as isize,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Sample at a possibly out-of-range position using symmetric reflection.
    #[inline]
    pub fn get_reflected(&self, row: isize, col: isize) -> f64 {
        let r = reflect(row, self.height);
        let c = reflect(col, self.width);
        self.data[r * self.width + c]
    }

    /// Adds a constant to every sample.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v + offset).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Half-sample symmetric reflection of `i` into `0..n`:
/// `-1 -> 0`, `-2 -> 1`, `n -> n-1`, `n+1 -> n-2`.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if (0..n).contains(&i) {
        return i as usize;
    }
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Flattened patch around a pixel.
///
/// Square patches hold `side * side` values; linear (1-D) patches hold `side`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    values: Vec<f64>,
    side: usize,
}

impl Patch {
    pub fn square(side: usize, values: Vec<f64>) -> Result<Self> {
        check_side(side)?;
        if values.len() != side * side {
            return param(format!("patch of side {side} needs {} values, got {}", side * side, values.len()));
        }
        Ok(Self { values, side })
    }

    pub fn linear(values: Vec<f64>) -> Result<Self> {
        let side = values.len();
        check_side(side)?;
        Ok(Self { values, side })
    }

    /// Wraps values whose length is already known to be valid.
    pub(crate) fn from_raw(side: usize, values: Vec<f64>) -> Self {
        debug_assert!(values.len() == side || values.len() == side * side);
        Self { values, side }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + offset).collect(),
            side: self.side,
        }
    }
}

fn check_side(side: usize) -> Result<()> {
    if side == 0 || side % 2 == 0 {
        return param(format!("patch side must be a positive odd integer, got {side}"));
    }
    Ok(())
}

/// Extracts the `side x side` window around `center`, reflecting at the borders.
pub fn extract_patch(img: &Image, center: PixelIndex, side: usize) -> Result<Patch> {
    check_side(side)?;
    img.check_bounds(center)?;
    let mut values = vec![0.0; side * side];
    fill_patch(img, center, side, &mut values);
    Ok(Patch { values, side })
}

pub(crate) fn fill_patch(img: &Image, center: PixelIndex, side: usize, out: &mut [f64]) {
    let half = (side / 2) as isize;
    let (r0, c0) = (center.row as isize, center.col as isize);
    let mut k = 0;
    for dr in -half..=half {
        let r = reflect(r0 + dr, img.height);
        let row = &img.data[r * img.width..(r + 1) * img.width];
        for dc in -half..=half {
            out[k] = row[reflect(c0 + dc, img.width)];
            k += 1;
        }
    }
}

/// Extracts the length-`side` window of a 1-D signal around `center`.
pub fn extract_patch_1d(signal: &[f64], center: usize, side: usize) -> Result<Patch> {
    check_side(side)?;
    if center >= signal.len() {
        return Err(Error::OutOfBounds {
            row: 0,
            col: center as isize,
            width: signal.len(),
            height: 1,
        });
    }
    let half = (side / 2) as isize;
    let values = (-half..=half)
        .map(|d| signal[reflect(center as isize + d, signal.len())])
        .collect();
    Ok(Patch { values, side })
}

/// The center sample of a patch.
#[inline]
pub fn center_pixel(patch: &Patch) -> f64 {
    patch.values[(patch.values.len() - 1) / 2]
}

/// Every patch of an image, stored contiguously and indexed by linear pixel index.
#[derive(Debug, Clone)]
pub struct PatchTable {
    dim: usize,
    data: Vec<f64>,
}

impl PatchTable {
    pub fn new(img: &Image, side: usize) -> Result<Self> {
        check_side(side)?;
        let dim = side * side;
        let mut data = vec![0.0; dim * img.len()];
        for (i, chunk) in data.chunks_exact_mut(dim).enumerate() {
            fill_patch(img, PixelIndex::new(i / img.width, i % img.width), side, chunk);
        }
        Ok(Self { dim, data })
    }

    pub fn new_1d(signal: &[f64], side: usize) -> Result<Self> {
        check_side(side)?;
        if signal.is_empty() {
            return param("empty signal");
        }
        let half = (side / 2) as isize;
        let mut data = Vec::with_capacity(side * signal.len());
        for i in 0..signal.len() as isize {
            data.extend((-half..=half).map(|d| signal[reflect(i + d, signal.len())]));
        }
        Ok(Self { dim: side, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, linear: usize) -> &[f64] {
        &self.data[linear * self.dim..(linear + 1) * self.dim]
    }
}

/// Squared Euclidean distance between two equally sized vectors.
///
/// Accumulates in eight independent lanes so the reduction can be vectorized;
/// the summation order is fixed, so results are reproducible.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Mean squared error between two images of equal size.
pub fn mse(reference: &Image, estimate: &Image) -> Result<f64> {
    if reference.width != estimate.width || reference.height != estimate.height {
        return param(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            reference.width, reference.height, estimate.width, estimate.height
        ));
    }
    let sum: f64 = reference
        .data
        .iter()
        .zip(&estimate.data)
        .map(|(f, u)| (u - f) * (u - f))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// Peak signal-to-noise ratio in dB for intensities on `[0, 1]`.
///
/// Returns [`PSNR_INFINITE`] when the images are identical.
pub fn psnr(reference: &Image, estimate: &Image) -> Result<f64> {
    let mse = mse(reference, estimate)?;
    if mse == 0.0 {
        return Ok(PSNR_INFINITE);
    }
    Ok(-10.0 * mse.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp4() -> Image {
        Image::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 16.0).unwrap()
    }

    #[test]
    fn reflect_is_half_sample_symmetric() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(-5, 4), 3);
        assert_eq!(reflect(-9, 4), 0);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn constant_image_gives_constant_patch() {
        let img = Image::filled(10, 12, 0.5).unwrap();
        let p = extract_patch(&img, PixelIndex::new(0, 9), 7).unwrap();
        assert_eq!(p.dim(), 49);
        assert!(p.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn side_one_is_the_pixel() {
        let img = ramp4();
        let p = extract_patch(&img, PixelIndex::new(2, 3), 1).unwrap();
        assert_eq!(p.values(), &[11.0 / 16.0]);
    }

    #[test]
    fn corner_patch_matches_hand_reflection() {
        // rows -1,0,1 -> 0,0,1 and the same for columns
        let img = ramp4();
        let p = extract_patch(&img, PixelIndex::new(0, 0), 3).unwrap();
        let expected: Vec<f64> = [0, 0, 1, 0, 0, 1, 4, 4, 5].iter().map(|&v| v as f64 / 16.0).collect();
        assert_eq!(p.values(), expected.as_slice());

        let p = extract_patch(&img, PixelIndex::new(3, 3), 3).unwrap();
        let expected: Vec<f64> = [10, 11, 11, 14, 15, 15, 14, 15, 15].iter().map(|&v| v as f64 / 16.0).collect();
        assert_eq!(p.values(), expected.as_slice());
    }

    #[test]
    fn extract_patch_errors() {
        let img = ramp4();
        assert!(matches!(extract_patch(&img, PixelIndex::new(4, 0), 3), Err(Error::OutOfBounds { .. })));
        assert!(matches!(extract_patch(&img, PixelIndex::new(0, 0), 4), Err(Error::Parameter(_))));
        assert!(matches!(extract_patch(&img, PixelIndex::new(0, 0), 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn center_pixel_index() {
        assert_eq!(center_pixel(&Patch::square(1, vec![0.3]).unwrap()), 0.3);
        let vals: Vec<f64> = (0..9).map(|v| v as f64 / 8.0).collect();
        assert_eq!(center_pixel(&Patch::square(3, vals).unwrap()), 0.5);
        let mut vals = vec![0.0; 49];
        vals[24] = 0.77;
        assert_eq!(center_pixel(&Patch::square(7, vals).unwrap()), 0.77);
        assert_eq!(center_pixel(&Patch::linear(vec![0.0, 0.2, 1.0]).unwrap()), 0.2);
    }

    #[test]
    fn patch_table_matches_extract() {
        let img = Image::from_fn(9, 6, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0).unwrap();
        let table = PatchTable::new(&img, 5).unwrap();
        for r in 0..6 {
            for c in 0..9 {
                let p = extract_patch(&img, PixelIndex::new(r, c), 5).unwrap();
                assert_eq!(table.get(r * 9 + c), p.values());
            }
        }
    }

    #[test]
    fn psnr_examples() {
        let f = ramp4();
        assert_eq!(psnr(&f, &f).unwrap(), PSNR_INFINITE);
        let g = f.shifted(0.1);
        assert!((psnr(&f, &g).unwrap() - 20.0).abs() < 1e-9);
        let small = Image::filled(2, 2, 0.0).unwrap();
        assert!(matches!(psnr(&f, &small), Err(Error::Parameter(_))));
    }

    #[test]
    fn image_rejects_bad_lengths() {
        assert!(Image::new(3, 3, vec![0.0; 8]).is_err());
        assert!(Image::new(0, 3, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn center_of_extracted_patch_is_the_pixel(
            w in 1usize..12, h in 1usize..12, seed in 0u64..1000, half in 0usize..5,
            r in 0usize..12, c in 0usize..12,
        ) {
            let img = Image::from_fn(w, h, |i, j| ((i * 31 + j * 17 + seed as usize) % 97) as f64 / 97.0).unwrap();
            let at = PixelIndex::new(r % h, c % w);
            let p = extract_patch(&img, at, 2 * half + 1).unwrap();
            prop_assert_eq!(p.dim(), (2 * half + 1) * (2 * half + 1));
            prop_assert_eq!(center_pixel(&p), img.get(at));
        }

        #[test]
        fn psnr_of_constant_offset(c in prop_oneof![-0.5f64..-1e-3, 1e-3f64..0.5]) {
            let f = Image::from_fn(8, 5, |i, j| (i + j) as f64 / 12.0).unwrap();
            let got = psnr(&f, &f.shifted(c)).unwrap();
            prop_assert!((got + 20.0 * c.abs().log10()).abs() < 1e-9);
        }

        #[test]
        fn psnr_depends_only_on_error(e in proptest::collection::vec(-0.3f64..0.3, 12)) {
            let f = Image::from_fn(4, 3, |i, j| (i * 4 + j) as f64 / 12.0).unwrap();
            let g = Image::filled(4, 3, 0.25).unwrap();
            let add = |img: &Image| Image::new(4, 3, img.data().iter().zip(&e).map(|(a, b)| a + b).collect()).unwrap();
            let a = psnr(&f, &add(&f)).unwrap();
            let b = psnr(&g, &add(&g)).unwrap();
            prop_assert!((a - b).abs() < 1e-9 || (a.is_infinite() && b.is_infinite()));
        }
    }
}
