//! `spectemp` command line: simulate reference signals, estimate
//! spectro-temporal matrices, extract ECG feature images and run the
//! estimator benchmark.
//!
//! Exit codes: 0 success, 1 usage, 2 numerical/configuration/I-O failure,
//! 3 too few R peaks for segmentation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use spectemp_cli::{io, CliError};
use spectemp::ecg::{featurize, SegmentEstimator, SegmentationSpec};
use spectemp::fourier::{estimate_fourierks, FourierBasisSpec};
use spectemp::oscillator::{estimate_oscks, OscillatorBankSpec};
use spectemp::signal::TimedSignal;
use spectemp::simbench::{
    generate_simulated, run_benchmark, stft_baseline, BenchConfig, BenchMethod, BenchPhase,
    PiecewiseSinusoidSpec, SimEstimatorParams, Window,
};
use spectemp::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "spectemp",
    version,
    about = "Spectro-temporal estimation and ECG feature extraction",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the reference piecewise multi-sinusoid as time,value CSV.
    Simulate(SimulateArgs),
    /// Estimate a frequency-by-time magnitude matrix from a signal CSV.
    Estimate(EstimateArgs),
    /// Extract the averaged 50x50 spectro-temporal feature of an ECG.
    Featurize(FeaturizeArgs),
    /// Benchmark the estimators on the reference signal.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output CSV path (columns: time, value).
    #[arg(long)]
    out: PathBuf,
    /// Sample spacing in seconds.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Standard deviation of the additive observation noise.
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
    /// RNG seed; identical seeds give identical files.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum EstimateMethod {
    Fourierks,
    Oscks,
    Stft,
}

#[derive(Args)]
struct EstimateArgs {
    /// Estimation method.
    #[arg(long, value_enum)]
    method: EstimateMethod,
    /// Input CSV: `value` rows, or `time,value` rows.
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as uniformly sampled at this interval, overriding
    /// any timestamp column. Without it the input must carry timestamps.
    #[arg(long)]
    dt: Option<f64>,
    /// Fundamental frequency of the analysis grid, Hz.
    #[arg(long, default_value_t = 0.1)]
    f0: f64,
    /// Number of analysis frequencies (rows); the grid is j*f0.
    #[arg(long, default_value_t = 400)]
    num_freq: usize,
    /// Coefficient-prior inverse time constant, 1/s.
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Coefficient-prior diffusion.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Measurement-noise variance.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Bias-state diffusion (oscks only).
    #[arg(long, default_value_t = 1e-7)]
    qb: f64,
    /// Window length in samples (stft only).
    #[arg(long, default_value_t = 350)]
    window_len: usize,
    /// Window overlap in samples (stft only).
    #[arg(long, default_value_t = 340)]
    overlap: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write an 8-bit PGM image (frequency axis bottom-to-top).
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FeaturizeMethod {
    Oscks,
    Fourierks,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Input ECG CSV: `value` rows, or `time,value` rows (times ignored).
    #[arg(long)]
    input: PathBuf,
    /// Sampling rate, Hz.
    #[arg(long, default_value_t = 300.0)]
    fs: f64,
    /// Segment half-width in samples; segments are 2*beta+1 long.
    #[arg(long, default_value_t = 300)]
    beta: usize,
    /// Retry threshold: re-run detection when at most this many peaks are
    /// found.
    #[arg(long, default_value_t = 5)]
    delta: usize,
    /// Blanking half-width in samples for the detection retry.
    #[arg(long, default_value_t = 45)]
    alpha: usize,
    /// Per-segment estimator.
    #[arg(long, value_enum, default_value_t = FeaturizeMethod::Oscks)]
    method: FeaturizeMethod,
    /// Fundamental frequency of the analysis grid, Hz.
    #[arg(long, default_value_t = 0.1)]
    f0: f64,
    /// Number of analysis frequencies.
    #[arg(long, default_value_t = 400)]
    num_freq: usize,
    /// Coefficient-prior inverse time constant, 1/s.
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Coefficient-prior diffusion.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Measurement-noise variance.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Bias-state diffusion (oscks only).
    #[arg(long, default_value_t = 1e-7)]
    qb: f64,
    /// Worker threads for per-segment estimation; the output is identical
    /// for any value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output CSV path (50 rows x 50 columns).
    #[arg(long)]
    out: PathBuf,
    /// Also write an 8-bit PGM image.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Signal lengths; the 499 s reference signal is resampled to each.
    #[arg(long, value_delimiter = ',', default_values_t = [5000usize, 50000])]
    lengths: Vec<usize>,
    /// Timed repeats per method and length (one warm-up run excluded).
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    /// RNG seed for the benchmark signal.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV path (method,length,repeat,phase,seconds).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Featurize(args) => cmd_featurize(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = PiecewiseSinusoidSpec::reference(args.dt, args.noise_sd, args.seed);
    let signal = generate_simulated(&spec)?;
    let times = signal.times();
    io::write_signal_csv(&args.out, &times, signal.samples())?;
    println!("wrote {} samples to {}", signal.len(), args.out.display());
    Ok(())
}

/// Interpret an input file as a [`TimedSignal`], honoring an explicit
/// `--dt` override and detecting uniform timestamp grids.
fn load_signal(path: &Path, dt_override: Option<f64>) -> Result<TimedSignal, CliError> {
    let file = io::read_signal_csv(path)?;
    if let Some(dt) = dt_override {
        let t0 = file.times.as_ref().map_or(0.0, |t| t[0]);
        return Ok(TimedSignal::uniform(file.values, dt, t0)?);
    }
    let times = file.times.ok_or_else(|| {
        CliError::format(format!(
            "{}: no timestamp column; pass --dt for single-column input",
            path.display()
        ))
    })?;
    // A uniform grid (to within rounding) unlocks the LTI estimators.
    let dt0 = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt0).abs() <= 1e-9 * dt0.abs());
    if uniform {
        Ok(TimedSignal::uniform(file.values, dt0, times[0])?)
    } else {
        Ok(TimedSignal::with_times(file.values, times)?)
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let signal = load_signal(&args.input, args.dt)?;
    let (matrix, method) = match args.method {
        EstimateMethod::Fourierks => {
            let spec = FourierBasisSpec::new(args.f0, args.num_freq, args.lambda, args.q, args.r);
            (estimate_fourierks(&signal, &spec)?, "fourierks")
        }
        EstimateMethod::Oscks => {
            let dt = signal.uniform_dt().ok_or_else(|| {
                CliError::Core(CoreError::Config(
                    "oscks requires uniform sampling; use --method fourierks for \
                     unevenly sampled input"
                        .into(),
                ))
            })?;
            let spec = OscillatorBankSpec::harmonic(
                args.f0,
                args.num_freq,
                args.lambda,
                args.q,
                args.qb,
                args.r,
                dt,
            );
            (estimate_oscks(&signal, &spec)?, "oscks")
        }
        EstimateMethod::Stft => (
            stft_baseline(&signal, args.window_len, args.overlap, Window::Hann)?,
            "stft",
        ),
    };
    io::write_matrix_csv(&args.out, &matrix, method)?;
    if let Some(pgm) = &args.pgm {
        io::write_pgm(pgm, &matrix.values)?;
    }
    println!(
        "wrote {}x{} {} magnitude matrix to {}",
        matrix.num_freqs(),
        matrix.num_cols(),
        method,
        args.out.display()
    );
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<(), CliError> {
    let file = io::read_signal_csv(&args.input)?;
    let spec = SegmentationSpec {
        beta: args.beta,
        fs: args.fs,
        delta: args.delta,
        alpha: args.alpha,
    };
    let estimator = match args.method {
        FeaturizeMethod::Oscks => SegmentEstimator::OscKs(OscillatorBankSpec::harmonic(
            args.f0,
            args.num_freq,
            args.lambda,
            args.q,
            args.qb,
            args.r,
            1.0 / args.fs,
        )),
        FeaturizeMethod::Fourierks => SegmentEstimator::FourierKs(FourierBasisSpec::new(
            args.f0,
            args.num_freq,
            args.lambda,
            args.q,
            args.r,
        )),
    };
    let feature = featurize(&file.values, &spec, &estimator, args.jobs.max(1))?;
    io::write_feature_csv(&args.out, &feature)?;
    if let Some(pgm) = &args.pgm {
        io::write_pgm(pgm, feature.values())?;
    }
    println!("wrote 50x50 feature matrix to {}", args.out.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let config = BenchConfig {
        methods: vec![BenchMethod::FourierKs, BenchMethod::OscKs, BenchMethod::Stft],
        lengths: args.lengths,
        repeats: args.repeats,
        seed: args.seed,
        noise_sd: 0.1,
        params: SimEstimatorParams::default(),
    };
    let report = run_benchmark(&config)?;
    io::write_bench_csv(&args.out, &report)?;

    println!("machine: {}", report.machine);
    println!("{:<10} {:>8} {:>8} {:>12} {:>12}", "method", "length", "phase", "mean [s]", "min [s]");
    for &length in &config.lengths {
        for &method in &config.methods {
            for phase in [BenchPhase::DareSolve, BenchPhase::Filtering, BenchPhase::Total] {
                if let (Some(mean), Some(min)) = (
                    report.mean_seconds(method, length, phase),
                    report.min_seconds(method, length, phase),
                ) {
                    println!(
                        "{:<10} {:>8} {:>8} {:>12.4} {:>12.4}",
                        method.as_str(),
                        length,
                        phase.as_str(),
                        mean,
                        min
                    );
                }
            }
        }
        if let Some(speedup) = report.speedup(length) {
            println!("oscks speedup over fourierks at N={length}: {speedup:.1}x");
        }
    }
    println!("wrote per-repeat timings to {}", args.out.display());
    Ok(())
}
