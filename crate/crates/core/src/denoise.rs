//! Whole-image and 1-D orchestration of non-local patch regression.
//!
//! For every pixel: weights over the search window, optional nearest-half
//! truncation, IRLS from the weighted mean of the kept neighbors, and the
//! center sample of the regressed patch as the output value.

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::image::{Image, PatchTable, PixelIndex};
use crate::irls::{irls_solve, IrlsConfig, IrlsResult, WeightedPatches};
use crate::weights::{gaussian_weight, neighbors_2d, truncate_in_place, window_range, Neighbor, SearchParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseParams {
    pub search: SearchParams,
    pub use_knn_truncation: bool,
    /// Solver settings; `irls.p` is the regression index.
    pub irls: IrlsConfig,
}

impl DenoiseParams {
    /// Parameters with the default IRLS schedule for `p`.
    pub fn new(search: SearchParams, p: f64, use_knn_truncation: bool) -> Result<Self> {
        search.validate()?;
        let irls = IrlsConfig::for_patch(p, search.patch_side)?;
        Ok(Self { search, use_knn_truncation, irls })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.irls.p
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.irls.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub output: Image,
    pub mean_iterations: f64,
    pub per_pixel_converged_fraction: f64,
}

#[derive(Debug, Clone, Copy)]
struct PixelOutcome {
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Per-thread buffers reused across pixels.
struct Scratch {
    entries: Vec<Neighbor>,
    cloud: WeightedPatches,
}

impl Scratch {
    fn new(dim: usize, side: usize, capacity: usize) -> Self {
        Self {
            entries: Vec::with_capacity(capacity),
            cloud: WeightedPatches::with_capacity(side, dim, capacity),
        }
    }
}

fn regress(cloud: &WeightedPatches, cfg: &IrlsConfig) -> Result<IrlsResult> {
    let init = crate::irls::nlm_estimate(cloud)?;
    irls_solve(cloud, cfg, init.values())
}

fn gather(table: &PatchTable, width: usize, entries: &[Neighbor], cloud: &mut WeightedPatches) {
    cloud.clear();
    for n in entries {
        cloud.push(table.get(n.index.linear(width)), n.weight);
    }
}

fn solve_with_table(
    table: &PatchTable,
    width: usize,
    height: usize,
    at: PixelIndex,
    params: &DenoiseParams,
    scratch: &mut Scratch,
) -> Result<IrlsResult> {
    scratch.entries.clear();
    neighbors_2d(table, width, height, at, &params.search, |index, weight| {
        scratch.entries.push(Neighbor { index, weight })
    });
    if params.use_knn_truncation {
        truncate_in_place(&mut scratch.entries, at);
    }
    gather(table, width, &scratch.entries, &mut scratch.cloud);
    regress(&scratch.cloud, &params.irls)
}

fn outcome(res: &IrlsResult) -> PixelOutcome {
    PixelOutcome {
        value: crate::image::center_pixel(&res.estimate),
        iterations: res.iterations,
        converged: res.converged,
    }
}

fn at_pixel(pixel: PixelIndex, err: Error) -> Error {
    Error::AtPixel { pixel, source: Box::new(err) }
}

fn summarize(outcomes: Vec<Result<PixelOutcome>>) -> Result<(Vec<f64>, f64, f64)> {
    let n = outcomes.len() as f64;
    let mut values = Vec::with_capacity(outcomes.len());
    let mut iters = 0usize;
    let mut converged = 0usize;
    for o in outcomes {
        let o = o?;
        values.push(o.value);
        iters += o.iterations;
        converged += o.converged as usize;
    }
    Ok((values, iters as f64 / n, converged as f64 / n))
}

/// Denoises a grayscale image. Pixels are solved independently in parallel.
pub fn denoise(noisy: &Image, params: &DenoiseParams) -> Result<DenoiseReport> {
    params.validate()?;
    let (width, height) = (noisy.width(), noisy.height());
    let table = PatchTable::new(noisy, params.search.patch_side)?;
    let dim = table.dim();
    let capacity = params.search.window * params.search.window;

    let outcomes: Vec<Result<PixelOutcome>> = (0..noisy.len())
        .into_par_iter()
        .map_init(
            || Scratch::new(dim, params.search.patch_side, capacity),
            |scratch, i| {
                let at = PixelIndex::new(i / width, i % width);
                solve_with_table(&table, width, height, at, params, scratch)
                    .map(|r| outcome(&r))
                    .map_err(|e| at_pixel(at, e))
            },
        )
        .collect();

    let (values, mean_iterations, per_pixel_converged_fraction) = summarize(outcomes)?;
    Ok(DenoiseReport {
        output: Image::new(width, height, values)?,
        mean_iterations,
        per_pixel_converged_fraction,
    })
}

/// Full solver output at a single pixel, for multiplier diagnostics.
pub fn solve_pixel(noisy: &Image, at: PixelIndex, params: &DenoiseParams) -> Result<IrlsResult> {
    params.validate()?;
    noisy.check_bounds(at)?;
    let table = PatchTable::new(noisy, params.search.patch_side)?;
    let capacity = params.search.window * params.search.window;
    let mut scratch = Scratch::new(table.dim(), params.search.patch_side, capacity);
    solve_with_table(&table, noisy.width(), noisy.height(), at, params, &mut scratch)
        .map_err(|e| at_pixel(at, e))
}

/// Standard non-local means: `sum_j w_ij u_j / sum_j w_ij` over the full window.
pub fn nlm_closed_form(noisy: &Image, search: &SearchParams) -> Result<Image> {
    search.validate()?;
    let (width, height) = (noisy.width(), noisy.height());
    let table = PatchTable::new(noisy, search.patch_side)?;
    let data = noisy.data();
    let values: Vec<f64> = (0..noisy.len())
        .into_par_iter()
        .map(|i| {
            let at = PixelIndex::new(i / width, i % width);
            let (mut num, mut den) = (0.0, 0.0);
            neighbors_2d(&table, width, height, at, search, |j, w| {
                num += w * data[j.linear(width)];
                den += w;
            });
            num / den
        })
        .collect();
    Image::new(width, height, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoise1dReport {
    pub output: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Final multipliers per position, in neighbor (window) order.
    pub multipliers: Vec<Vec<f64>>,
}

impl Denoise1dReport {
    pub fn mean_iterations(&self) -> f64 {
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
    }
}

/// Neighbors of position `at` in a 1-D signal: window of length `S`, patches of length `k`.
pub fn neighbors_1d(table: &PatchTable, len: usize, at: usize, search: &SearchParams) -> Vec<Neighbor> {
    let reference = table.get(at);
    window_range(at, search.window, len)
        .map(|j| Neighbor {
            index: PixelIndex::new(0, j),
            weight: gaussian_weight(crate::image::squared_distance(reference, table.get(j)), search.h),
        })
        .collect()
}

/// Solver output at one position of a 1-D signal.
pub fn solve_position_1d(signal: &[f64], at: usize, params: &DenoiseParams) -> Result<IrlsResult> {
    params.validate()?;
    if at >= signal.len() {
        return Err(Error::OutOfBounds { row: 0, col: at as isize, width: signal.len(), height: 1 });
    }
    let table = PatchTable::new_1d(signal, params.search.patch_side)?;
    solve_1d(&table, signal.len(), at, params)
}

fn solve_1d(table: &PatchTable, len: usize, at: usize, params: &DenoiseParams) -> Result<IrlsResult> {
    let mut entries = neighbors_1d(table, len, at, &params.search);
    if params.use_knn_truncation {
        truncate_in_place(&mut entries, PixelIndex::new(0, at));
    }
    let mut cloud = WeightedPatches::with_capacity(params.search.patch_side, table.dim(), entries.len());
    gather(table, len, &entries, &mut cloud);
    regress(&cloud, &params.irls).map_err(|e| at_pixel(PixelIndex::new(0, at), e))
}

/// The denoising pipeline on a 1-D signal with length-`k` patches and a length-`S` window.
pub fn denoise_1d(signal: &[f64], params: &DenoiseParams) -> Result<Denoise1dReport> {
    params.validate()?;
    if signal.is_empty() {
        return param("empty signal");
    }
    let table = PatchTable::new_1d(signal, params.search.patch_side)?;
    let results: Vec<IrlsResult> = (0..signal.len())
        .into_par_iter()
        .map(|i| solve_1d(&table, signal.len(), i, params))
        .collect::<Result<_>>()?;
    let mut report = Denoise1dReport {
        output: Vec::with_capacity(results.len()),
        iterations: Vec::with_capacity(results.len()),
        converged: Vec::with_capacity(results.len()),
        multipliers: Vec::with_capacity(results.len()),
    };
    for r in results {
        report.output.push(crate::image::center_pixel(&r.estimate));
        report.iterations.push(r.iterations);
        report.converged.push(r.converged);
        report.multipliers.push(r.multipliers);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(window: usize, side: usize, h: f64, p: f64, knn: bool) -> DenoiseParams {
        DenoiseParams::new(SearchParams::new(window, side, h).unwrap(), p, knn).unwrap()
    }

    #[test]
    fn constant_image_is_fixed() {
        let img = Image::filled(12, 9, 0.35).unwrap();
        for p in [0.1, 1.0, 2.0] {
            for knn in [false, true] {
                let rep = denoise(&img, &params(5, 3, 0.2, p, knn)).unwrap();
                assert_eq!(rep.output, img);
                assert_eq!(rep.per_pixel_converged_fraction, 1.0);
            }
        }
    }

    #[test]
    fn p2_matches_closed_form_nlm() {
        let img = Image::from_fn(14, 11, |r, c| ((r * 7 + c * 5 + r * c) % 13) as f64 / 12.0).unwrap();
        let par = params(7, 3, 0.5, 2.0, false);
        let a = denoise(&img, &par).unwrap().output;
        let b = nlm_closed_form(&img, &par.search).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_pixel_agrees_with_denoise() {
        let img = Image::from_fn(10, 10, |r, c| ((r * 3 + c) % 5) as f64 / 4.0).unwrap();
        let par = params(5, 3, 0.4, 0.5, true);
        let rep = denoise(&img, &par).unwrap();
        let at = PixelIndex::new(4, 7);
        let res = solve_pixel(&img, at, &par).unwrap();
        assert_eq!(crate::image::center_pixel(&res.estimate), rep.output.get(at));
        assert_eq!(res.multipliers.len(), 13);
    }

    #[test]
    fn constant_signal_1d() {
        let sig = vec![0.6; 40];
        let rep = denoise_1d(&sig, &params(9, 3, 0.3, 0.5, false)).unwrap();
        assert_eq!(rep.output, sig);
    }

    #[test]
    fn out_of_bounds_position() {
        let sig = vec![0.6; 4];
        assert!(solve_position_1d(&sig, 4, &params(3, 3, 0.3, 1.0, false)).is_err());
        let img = Image::filled(3, 3, 0.0).unwrap();
        assert!(solve_pixel(&img, PixelIndex::new(3, 0), &params(3, 3, 0.3, 1.0, false)).is_err());
    }
}
