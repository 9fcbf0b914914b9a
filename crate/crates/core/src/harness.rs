//! Experiment drivers: noise-level sweeps, the 1-D edge study and the
//! NLM-versus-NLPR comparison table, plus their CSV/text reports.
//!
//! Noise levels are given on the 0-255 scale and divided by 255 before use.
//! Realization `r` of a sweep uses seed `base_seed * 1000 + r`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::denoise::{denoise, nlm_closed_form, solve_position_1d, DenoiseParams};
use crate::error::{param, Error, Result};
use crate::image::{center_pixel, psnr, Image};
use crate::irls::IrlsResult;
use crate::noise::{add_gaussian_noise, add_noise_to_slice, NoiseSpec};
use crate::pgm::read_pgm;
use crate::synth::{make_checker, make_edge, CheckerSpec, EdgeSpec};
use crate::weights::SearchParams;

/// Smallest `h` handed to the weight kernel; keeps `sigma = 0` runs well defined.
pub const MIN_H: f64 = 1e-3;

/// Regression index used for the NLPR column of the comparison table.
pub const TABLE1_P: f64 = 0.1;

/// Standard test images looked up as `<dir>/<name>.pgm`.
pub const TABLE1_IMAGES: [&str; 5] = ["house", "barbara", "boat", "cameraman", "peppers"];

/// Required size of the comparison-table images.
pub const TABLE1_SIDE: usize = 256;

pub const TABLE1_SIGMAS: [f64; 10] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

pub fn realization_seed(base_seed: u64, realization: usize) -> u64 {
    base_seed.wrapping_mul(1000).wrapping_add(realization as u64)
}

/// Maps a noise level to search parameters: fixed `S` and `k`, `h = h_factor * sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsRule {
    pub window: usize,
    pub patch_side: usize,
    pub h_factor: f64,
}

impl Default for ParamsRule {
    fn default() -> Self {
        Self { window: 21, patch_side: 7, h_factor: 10.0 }
    }
}

impl ParamsRule {
    /// `sigma` on the `[0, 1]` scale.
    pub fn search_for(&self, sigma: f64) -> Result<SearchParams> {
        SearchParams::new(self.window, self.patch_side, (self.h_factor * sigma).max(MIN_H))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Pgm(PathBuf),
    Checker(CheckerSpec),
}

impl ImageSource {
    pub fn load(&self) -> Result<Image> {
        match self {
            Self::Pgm(path) => read_pgm(path),
            Self::Checker(spec) => make_checker(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub input: ImageSource,
    /// Noise levels on the 0-255 scale.
    pub sigmas: Vec<f64>,
    pub ps: Vec<f64>,
    pub realizations: usize,
    pub base_seed: u64,
    pub knn_truncation: bool,
    pub rule: ParamsRule,
    /// Overrides the default iteration cap when set.
    pub max_iters: Option<usize>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.ps.is_empty() {
            return param("sweep needs at least one sigma and one p");
        }
        if self.realizations == 0 {
            return param("sweep needs at least one realization");
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0)) {
            return param(format!("sigma must be nonnegative, got {s}"));
        }
        if let Some(p) = self.ps.iter().find(|p| !(**p > 0.0 && **p <= 2.0)) {
            return param(format!("p must lie in (0, 2], got {p}"));
        }
        Ok(())
    }
}

pub fn denoise_params(search: SearchParams, p: f64, knn: bool, max_iters: Option<usize>) -> Result<DenoiseParams> {
    let mut params = DenoiseParams::new(search, p, knn)?;
    if let Some(m) = max_iters {
        params.irls = params.irls.with_max_iters(m);
    }
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// 0-255 scale.
    pub sigma: f64,
    pub p: f64,
    pub seed: u64,
    pub psnr_db: f64,
    pub mean_iters: f64,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "sigma,p,seed,psnr_db,mean_iters,runtime_s";

/// Formats a float for CSV, spelling out infinities as `inf`.
pub fn fmt_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

impl SweepReport {
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                fmt_float(r.sigma),
                fmt_float(r.p),
                r.seed,
                fmt_float(r.psnr_db),
                fmt_float(r.mean_iters),
                r.runtime_s
            )?;
        }
        Ok(())
    }

    /// Mean PSNR over the realizations of one `(sigma, p)` cell, ignoring failed rows.
    pub fn mean_psnr(&self, sigma: f64, p: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.sigma == sigma && r.p == p && r.error.is_none())
            .map(|r| r.psnr_db)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Adds seeded noise, denoises for every `p` and scores against the clean input.
///
/// Rows come out ordered by `(sigma, p, realization)` as listed in the spec.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let clean = spec.input.load()?;
    let mut report = SweepReport::default();
    for &sigma in &spec.sigmas {
        let sigma01 = sigma / 255.0;
        let search = spec.rule.search_for(sigma01)?;
        let noisy: Vec<(u64, Image)> = (0..spec.realizations)
            .map(|r| {
                let seed = realization_seed(spec.base_seed, r);
                Ok((seed, add_gaussian_noise(&clean, NoiseSpec::new(sigma01, seed)?)))
            })
            .collect::<Result<_>>()?;
        for &p in &spec.ps {
            let params = denoise_params(search, p, spec.knn_truncation, spec.max_iters)?;
            for (seed, u) in &noisy {
                let start = Instant::now();
                let row = match denoise(u, &params).and_then(|rep| Ok((psnr(&clean, &rep.output)?, rep))) {
                    Ok((db, rep)) => SweepRow {
                        sigma,
                        p,
                        seed: *seed,
                        psnr_db: db,
                        mean_iters: rep.mean_iterations,
                        runtime_s: start.elapsed().as_secs_f64(),
                        error: None,
                    },
                    Err(e) => {
                        warn!("sigma={sigma} p={p} seed={seed}: {e}");
                        SweepRow {
                            sigma,
                            p,
                            seed: *seed,
                            psnr_db: f64::NAN,
                            mean_iters: f64::NAN,
                            runtime_s: start.elapsed().as_secs_f64(),
                            error: Some(e.to_string()),
                        }
                    }
                };
                info!("sigma={sigma} p={p} seed={seed} psnr={:.3} dB ({:.2}s)", row.psnr_db, row.runtime_s);
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}

/// Settings of the 1-D edge experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStudyConfig {
    pub edge: EdgeSpec,
    /// Noise level on the `[0, 1]` scale.
    pub sigma: f64,
    pub reference: usize,
    pub window: usize,
    pub patch_side: usize,
    pub h_factor: f64,
}

impl Default for EdgeStudyConfig {
    fn default() -> Self {
        Self {
            edge: EdgeSpec::default(),
            sigma: 0.3,
            reference: 130,
            window: 41,
            patch_side: 3,
            h_factor: 10.0,
        }
    }
}

/// Regression indices whose center estimates are reported.
pub const EDGE_ESTIMATE_PS: [f64; 3] = [2.0, 1.0, 0.1];
/// Regression indices whose multiplier profiles are reported.
pub const EDGE_MULTIPLIER_PS: [f64; 3] = [2.0, 1.0, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSeedResult {
    pub seed: u64,
    /// `(p, center estimate)` for each of [`EDGE_ESTIMATE_PS`].
    pub estimates: Vec<(f64, f64)>,
    /// `(p, multipliers sorted non-increasing)` for each of [`EDGE_MULTIPLIER_PS`].
    pub multipliers: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStudyReport {
    pub per_seed: Vec<EdgeSeedResult>,
    /// `(p, mean center estimate over seeds)`.
    pub means: Vec<(f64, f64)>,
}

impl EdgeStudyReport {
    pub fn mean_for(&self, p: f64) -> Option<f64> {
        self.means.iter().find(|(q, _)| *q == p).map(|(_, m)| *m)
    }

    pub fn write_estimates_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "seed,p,estimate")?;
        for s in &self.per_seed {
            for (p, e) in &s.estimates {
                writeln!(out, "{},{},{}", s.seed, fmt_float(*p), fmt_float(*e))?;
            }
        }
        for (p, m) in &self.means {
            writeln!(out, "mean,{},{}", fmt_float(*p), fmt_float(*m))?;
        }
        Ok(())
    }
}

/// Sorted multipliers as `rank,mu` rows, rank starting at 1.
pub fn write_multipliers_csv(mut out: impl Write, sorted: &[f64]) -> io::Result<()> {
    writeln!(out, "rank,mu")?;
    for (i, mu) in sorted.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, fmt_float(*mu))?;
    }
    Ok(())
}

impl EdgeStudyConfig {
    pub fn params(&self, p: f64) -> Result<DenoiseParams> {
        let search = SearchParams::new(self.window, self.patch_side, (self.h_factor * self.sigma).max(MIN_H))?;
        DenoiseParams::new(search, p, false)
    }

    pub fn noisy_edge(&self, seed: u64) -> Result<Vec<f64>> {
        let clean = make_edge(&self.edge)?;
        Ok(add_noise_to_slice(&clean, NoiseSpec::new(self.sigma, seed)?))
    }

    /// Full-neighborhood regression at the reference position.
    pub fn solve(&self, noisy: &[f64], p: f64) -> Result<IrlsResult> {
        solve_position_1d(noisy, self.reference, &self.params(p)?)
    }
}

pub fn run_edge_study(seeds: &[u64]) -> Result<EdgeStudyReport> {
    run_edge_study_with(&EdgeStudyConfig::default(), seeds)
}

pub fn run_edge_study_with(cfg: &EdgeStudyConfig, seeds: &[u64]) -> Result<EdgeStudyReport> {
    if seeds.is_empty() {
        return param("edge study needs at least one seed");
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let noisy = cfg.noisy_edge(seed)?;
        let estimates = EDGE_ESTIMATE_PS
            .iter()
            .map(|&p| Ok((p, center_pixel(&cfg.solve(&noisy, p)?.estimate))))
            .collect::<Result<_>>()?;
        let multipliers = EDGE_MULTIPLIER_PS
            .iter()
            .map(|&p| Ok((p, cfg.solve(&noisy, p)?.sorted_multipliers())))
            .collect::<Result<_>>()?;
        per_seed.push(EdgeSeedResult { seed, estimates, multipliers });
    }
    let means = EDGE_ESTIMATE_PS
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let sum: f64 = per_seed.iter().map(|s| s.estimates[k].1).sum();
            (p, sum / per_seed.len() as f64)
        })
        .collect();
    Ok(EdgeStudyReport { per_seed, means })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub image: String,
    /// 0-255 scale.
    pub sigma: f64,
    pub nlm_psnr: f64,
    pub nlpr_psnr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table1Report {
    pub rows: Vec<Table1Row>,
    /// `(image name, reason)` for inputs that could not be used.
    pub skipped: Vec<(String, String)>,
}

impl Table1Report {
    pub fn get(&self, image: &str, sigma: f64) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.image == image && r.sigma == sigma)
    }

    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "image,sigma,nlm_psnr_db,nlpr_psnr_db")?;
        for r in &self.rows {
            writeln!(out, "{},{},{:.4},{:.4}", r.image, fmt_float(r.sigma), r.nlm_psnr, r.nlpr_psnr)?;
        }
        Ok(())
    }

    /// Two lines per image (NLM, NLPR) with one column per noise level.
    pub fn to_text(&self) -> String {
        let mut images: Vec<&str> = Vec::new();
        let mut sigmas: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !images.contains(&r.image.as_str()) {
                images.push(&r.image);
            }
            if !sigmas.contains(&r.sigma) {
                sigmas.push(r.sigma);
            }
        }
        let mut s = String::new();
        let _ = write!(s, "{:<10} {:<6}", "image", "method");
        for sg in &sigmas {
            let _ = write!(s, " {:>7}", format!("s={sg}"));
        }
        s.push('\n');
        for img in images {
            for (label, nlpr) in [("NLM", false), ("NLPR", true)] {
                let _ = write!(s, "{img:<10} {label:<6}");
                for &sg in &sigmas {
                    match self.get(img, sg) {
                        Some(r) => {
                            let _ = write!(s, " {:>7.2}", if nlpr { r.nlpr_psnr } else { r.nlm_psnr });
                        }
                        None => {
                            let _ = write!(s, " {:>7}", "-");
                        }
                    }
                }
                s.push('\n');
            }
        }
        for (name, why) in &self.skipped {
            let _ = writeln!(s, "skipped {name}: {why}");
        }
        s
    }
}

/// Loads the standard images present in `dir`; missing or unusable files are reported, not fatal.
pub fn find_table1_images(dir: &Path) -> (Vec<(String, Image)>, Vec<(String, String)>) {
    let mut found = Vec::new();
    let mut skipped = Vec::new();
    for name in TABLE1_IMAGES {
        let path = dir.join(format!("{name}.pgm"));
        if !path.exists() {
            skipped.push((name.to_string(), format!("{} not found", path.display())));
            continue;
        }
        match read_pgm(&path) {
            Ok(img) if img.width() == TABLE1_SIDE && img.height() == TABLE1_SIDE => found.push((name.to_string(), img)),
            Ok(img) => skipped.push((
                name.to_string(),
                format!("expected {TABLE1_SIDE}x{TABLE1_SIDE}, got {}x{}", img.width(), img.height()),
            )),
            Err(e) => skipped.push((name.to_string(), e.to_string())),
        }
    }
    for (name, why) in &skipped {
        warn!("skipping {name}: {why}");
    }
    (found, skipped)
}

/// NLM (closed form, full window) against NLPR (`p = 0.1`, nearest-half truncation),
/// each averaged over `realizations` noise draws.
pub fn run_table1(
    images: &[(String, Image)],
    sigmas: &[f64],
    realizations: usize,
    base_seed: u64,
    rule: &ParamsRule,
) -> Result<Table1Report> {
    if realizations == 0 {
        return param("need at least one realization");
    }
    let mut report = Table1Report::default();
    for (name, clean) in images {
        for &sigma in sigmas {
            let sigma01 = sigma / 255.0;
            let search = rule.search_for(sigma01)?;
            let nlpr_params = DenoiseParams::new(search, TABLE1_P, true)?;
            let (mut nlm_sum, mut nlpr_sum) = (0.0, 0.0);
            for r in 0..realizations {
                let u = add_gaussian_noise(clean, NoiseSpec::new(sigma01, realization_seed(base_seed, r))?);
                nlm_sum += psnr(clean, &nlm_closed_form(&u, &search)?)?;
                nlpr_sum += psnr(clean, &denoise(&u, &nlpr_params)?.output)?;
            }
            let row = Table1Row {
                image: name.clone(),
                sigma,
                nlm_psnr: nlm_sum / realizations as f64,
                nlpr_psnr: nlpr_sum / realizations as f64,
            };
            info!("{name} sigma={sigma}: NLM {:.2} dB, NLPR {:.2} dB", row.nlm_psnr, row.nlpr_psnr);
            report.rows.push(row);
        }
    }
    Ok(report)
}

/// Convenience wrapper that reports absent images as skipped.
pub fn run_table1_from_dir(dir: &Path, sigmas: &[f64], realizations: usize, base_seed: u64) -> Result<Table1Report> {
    if !dir.is_dir() {
        return Err(Error::Io(io::Error::new(io::ErrorKind::NotFound, format!("{} is not a directory", dir.display()))));
    }
    let (images, skipped) = find_table1_images(dir);
    let mut report = run_table1(&images, sigmas, realizations, base_seed, &ParamsRule::default())?;
    report.skipped = skipped;
    Ok(report)
}
