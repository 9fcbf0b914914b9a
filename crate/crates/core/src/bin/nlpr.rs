use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nlpr::harness::{
    self, denoise_params, run_edge_study_with, run_sweep, run_table1_from_dir, write_multipliers_csv, EdgeStudyConfig,
    ExperimentSpec, ImageSource, ParamsRule, TABLE1_SIGMAS,
};
use nlpr::pgm::{read_pgm, write_pgm};
use nlpr::synth::CheckerSpec;
use nlpr::{add_gaussian_noise, denoise, psnr, NoiseSpec, SearchParams};

#[derive(Parser)]
#[command(name = "nlpr", version, about = "Non-local patch regression denoiser and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn is_on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Subcommand)]
enum Command {
    /// Denoise one PGM image
    Denoise(DenoiseArgs),
    /// PSNR sweep over noise levels and regression indices
    Sweep(SweepArgs),
    /// 1-D ideal-edge study with multiplier dumps
    EdgeStudy(EdgeArgs),
    /// NLM versus NLPR (p = 0.1) on the standard test images
    Table1(Table1Args),
    /// Write a Checker test image
    Checker(CheckerArgs),
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Noise level on the 0-255 scale; sets h = 10 * sigma unless --h is given
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Search window side
    #[arg(long = "S", default_value_t = 21)]
    window: usize,
    /// Patch side
    #[arg(long = "k", default_value_t = 7)]
    patch_side: usize,
    /// Smoothing parameter on the 0-255 scale
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum, default_value = "on")]
    knn: Switch,
    /// Treat the input as clean: add seeded noise at --sigma first and report PSNRs
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct SourceArgs {
    /// Clean PGM input; a generated Checker is used when absent
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    checker_size: usize,
    #[arg(long, default_value_t = 32)]
    checker_square: usize,
}

impl SourceArgs {
    fn source(&self) -> ImageSource {
        match &self.input {
            Some(path) => ImageSource::Pgm(path.clone()),
            None => ImageSource::Checker(CheckerSpec {
                image_side: self.checker_size,
                square_side: self.checker_square,
                ..CheckerSpec::default()
            }),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Noise levels on the 0-255 scale
    #[arg(long, value_delimiter = ',', default_values_t = TABLE1_SIGMAS.to_vec())]
    sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 1.0, 1.5, 2.0])]
    ps: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, value_enum, default_value = "off")]
    knn: Switch,
    #[arg(long = "S", default_value_t = 21)]
    window: usize,
    #[arg(long = "k", default_value_t = 7)]
    patch_side: usize,
    #[arg(long)]
    max_iters: Option<usize>,
    /// CSV report path (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EdgeArgs {
    #[arg(long, value_delimiter = ',', default_values_t = (0..10).collect::<Vec<u64>>())]
    seeds: Vec<u64>,
    /// Noise level on the [0, 1] scale of the 0/1 edge
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    /// Estimates CSV (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Writes `<prefix>_p<p>.csv` multiplier profiles for the first seed
    #[arg(long)]
    multipliers_prefix: Option<PathBuf>,
    /// Writes the clean and noisy edge of the first seed as CSV
    #[arg(long)]
    signal_csv: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    /// Directory holding house.pgm, barbara.pgm, boat.pgm, cameraman.pgm, peppers.pgm
    #[arg(long)]
    images_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = TABLE1_SIGMAS.to_vec())]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckerArgs {
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 32)]
    square: usize,
    #[arg(long, default_value_t = 0.0)]
    low: f64,
    #[arg(long, default_value_t = 1.0)]
    high: f64,
    #[arg(long)]
    output: PathBuf,
    /// Also write a noisy copy at this level (0-255 scale) next to the output
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_denoise(a: DenoiseArgs) -> Result<()> {
    if !(a.sigma >= 0.0) {
        bail!("--sigma must be nonnegative");
    }
    let input = read_pgm(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let sigma01 = a.sigma / 255.0;
    let h = a.h.map_or(10.0 * sigma01, |h| h / 255.0).max(harness::MIN_H);
    let params = denoise_params(SearchParams::new(a.window, a.patch_side, h)?, a.p, a.knn.is_on(), a.max_iters)?;

    let noisy = match a.seed {
        Some(seed) => add_gaussian_noise(&input, NoiseSpec::new(sigma01, seed)?),
        None => input.clone(),
    };
    let report = denoise(&noisy, &params)?;
    write_pgm(&a.output, &report.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "mean_iters={:.3} converged_fraction={:.4}",
        report.mean_iterations, report.per_pixel_converged_fraction
    );
    if a.seed.is_some() {
        println!("psnr_noisy_db={}", harness::fmt_float(psnr(&input, &noisy)?));
        println!("psnr_denoised_db={}", harness::fmt_float(psnr(&input, &report.output)?));
    }
    Ok(())
}

fn run_sweep_cmd(a: SweepArgs) -> Result<()> {
    let spec = ExperimentSpec {
        input: a.source.source(),
        sigmas: a.sigmas,
        ps: a.ps,
        realizations: a.realizations,
        base_seed: a.base_seed,
        knn_truncation: a.knn.is_on(),
        rule: ParamsRule { window: a.window, patch_side: a.patch_side, ..ParamsRule::default() },
        max_iters: a.max_iters,
    };
    let report = run_sweep(&spec)?;
    let mut out = open_output(a.output.as_deref())?;
    report.write_csv(&mut out)?;
    out.flush()?;
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} sweep cells failed; their rows carry nan");
    }
    Ok(())
}

fn run_edge(a: EdgeArgs) -> Result<()> {
    let cfg = EdgeStudyConfig { sigma: a.sigma, ..EdgeStudyConfig::default() };
    let report = run_edge_study_with(&cfg, &a.seeds)?;
    let mut out = open_output(a.output.as_deref())?;
    report.write_estimates_csv(&mut out)?;
    out.flush()?;

    let first = &report.per_seed[0];
    if let Some(prefix) = &a.multipliers_prefix {
        for (p, mu) in &first.multipliers {
            let path = PathBuf::from(format!("{}_p{p}.csv", prefix.display()));
            let mut f = open_output(Some(&path))?;
            write_multipliers_csv(&mut f, mu)?;
            f.flush()?;
        }
    }
    if let Some(path) = &a.signal_csv {
        let clean = nlpr::synth::make_edge(&cfg.edge)?;
        let noisy = cfg.noisy_edge(first.seed)?;
        let mut f = open_output(Some(path))?;
        writeln!(f, "index,clean,noisy")?;
        for (i, (c, n)) in clean.iter().zip(&noisy).enumerate() {
            writeln!(f, "{i},{c},{n}")?;
        }
        f.flush()?;
    }
    Ok(())
}

fn run_table1(a: Table1Args) -> Result<()> {
    let report = run_table1_from_dir(&a.images_dir, &a.sigmas, a.realizations, a.base_seed)?;
    if let Some(path) = &a.output {
        let mut f = open_output(Some(path))?;
        report.write_csv(&mut f)?;
        f.flush()?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn run_checker(a: CheckerArgs) -> Result<()> {
    let spec = CheckerSpec { image_side: a.size, square_side: a.square, low: a.low, high: a.high };
    let img = nlpr::synth::make_checker(&spec)?;
    write_pgm(&a.output, &img)?;
    if let Some(sigma) = a.sigma {
        let noisy = add_gaussian_noise(&img, NoiseSpec::from_8bit(sigma, a.seed)?);
        let stem = a.output.with_extension("");
        let path = PathBuf::from(format!("{}_noisy.pgm", stem.display()));
        write_pgm(&path, &noisy)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Denoise(a) => run_denoise(a),
        Command::Sweep(a) => run_sweep_cmd(a),
        Command::EdgeStudy(a) => run_edge(a),
        Command::Table1(a) => run_table1(a),
        Command::Checker(a) => run_checker(a),
    }
}
