//! Argument handling and subcommand execution for the `envsense` binary.

pub mod checks;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use envsense_core::estimate::{
    dt_scaling_sweep, eta_coherence_sweep, sense_experiment, sigma_z_phase_trace,
};
use envsense_core::protocol::{compensation_decay_trace, CompensationMode, ProtocolParams};
use envsense_core::Error;

pub use output::fmt_num;

/// Exit status of a run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Detection efficiencies visited by `sweep-eta`.
pub const ETA_GRID: [f64; 3] = [0.0, 0.9, 0.99];
/// Multiples of `--dt` visited by `sweep-dt`; with the default cycle length
/// this is {4, 2, 1, 0.5}·10⁻³.
pub const DT_GRID_FACTORS: [f64; 4] = [4.0, 2.0, 1.0, 0.5];
/// `sweep-eta` horizon in units of `1/gamma` when `--t-final` is not given.
pub const ETA_SWEEP_HORIZON: f64 = 300.0;

#[derive(Debug, Parser)]
#[command(
    name = "envsense",
    version,
    about = "Error-corrected sensing trajectory simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the built-in oracle and invariant checks
    Validate(Flags),
    /// Single-qubit stationarity of the continuous compensation
    DecayDemo(Flags),
    /// Error-corrected Ramsey run from logical-+
    Sense(Flags),
    /// Final infidelity against cycle length
    SweepDt(Flags),
    /// Coherence time against detection efficiency
    SweepEta(Flags),
    /// Echo cycles against a signal that commutes with the noise
    SigmaZDemo(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Echo,
    Drive,
}

#[derive(Debug, Clone, Args)]
struct Flags {
    /// Amplitude damping rate of the sensing qubit
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Signal strength (angular frequency)
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    g: f64,
    /// Signal axis angle in the x–y plane
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phi: f64,
    /// Error-correction cycle length
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    dt: f64,
    /// Total evolution time [default: 2; sweep-eta: 300/gamma]
    #[arg(long = "t-final", allow_negative_numbers = true)]
    t_final: Option<f64>,
    /// Photodetection efficiency
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    eta: f64,
    /// Noise compensation scheme
    #[arg(long, value_enum, default_value_t = ModeArg::Drive)]
    mode: ModeArg,
    /// Trajectories per ensemble
    #[arg(long, default_value_t = 1000)]
    trajectories: usize,
    /// Master seed of the ensemble
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV output path [default: <subcommand>.csv]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubcommandKind {
    Validate,
    DecayDemo,
    Sense,
    SweepDt,
    SweepEta,
    SigmaZDemo,
}

impl SubcommandKind {
    pub fn name(self) -> &'static str {
        match self {
            SubcommandKind::Validate => "validate",
            SubcommandKind::DecayDemo => "decay-demo",
            SubcommandKind::Sense => "sense",
            SubcommandKind::SweepDt => "sweep-dt",
            SubcommandKind::SweepEta => "sweep-eta",
            SubcommandKind::SigmaZDemo => "sigma-z-demo",
        }
    }
}

/// A fully validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: SubcommandKind,
    pub params: ProtocolParams,
    pub output_path: PathBuf,
    /// `None` means one worker per core.
    pub threads: Option<usize>,
}

/// One-line diagnostic with the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn from_core(err: Error) -> Self {
        match err {
            Error::InvalidArgument(msg) => Self::usage(flag_diagnostic(&msg)),
            other => Self {
                code: EXIT_NUMERICAL,
                message: other.to_string(),
            },
        }
    }
}

/// Parameter-validation messages start with the offending field name,
/// which coincides with the flag name.
fn flag_diagnostic(msg: &str) -> String {
    match msg.split_once(": ") {
        Some((field, rest)) if !field.contains(' ') => format!("--{field}: {rest}"),
        _ => msg.to_string(),
    }
}

/// Parses `argv` (without the program name) into a validated configuration.
pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, Failure>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = std::iter::once(std::ffi::OsString::from("envsense"))
        .chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(args).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            // help and version text go to stdout unchanged
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Failure {
                code: EXIT_OK,
                message: e.to_string(),
            },
            _ => Failure::usage(first_line(&e.to_string())),
        }
    })?;
    let (subcommand, flags) = match cli.command {
        Command::Validate(f) => (SubcommandKind::Validate, f),
        Command::DecayDemo(f) => (SubcommandKind::DecayDemo, f),
        Command::Sense(f) => (SubcommandKind::Sense, f),
        Command::SweepDt(f) => (SubcommandKind::SweepDt, f),
        Command::SweepEta(f) => (SubcommandKind::SweepEta, f),
        Command::SigmaZDemo(f) => (SubcommandKind::SigmaZDemo, f),
    };
    let t_final = match (flags.t_final, subcommand) {
        (Some(t), _) => t,
        (None, SubcommandKind::SweepEta) => {
            if flags.gamma <= 0.0 || flags.gamma.is_nan() {
                return Err(Failure::usage(
                    "--t-final: required by sweep-eta when --gamma is 0",
                ));
            }
            // whole number of cycles
            ((ETA_SWEEP_HORIZON / flags.gamma) / flags.dt).ceil() * flags.dt
        }
        (None, _) => 2.0,
    };
    let params = ProtocolParams {
        gamma: flags.gamma,
        g: flags.g,
        phi: flags.phi,
        dt: flags.dt,
        t_final,
        eta: flags.eta,
        mode: match flags.mode {
            ModeArg::Echo => CompensationMode::PulsedEcho,
            ModeArg::Drive => CompensationMode::ContinuousDrive,
        },
        n_traj: flags.trajectories,
        master_seed: flags.seed,
        ..ProtocolParams::default()
    };
    params.validate().map_err(Failure::from_core)?;
    if subcommand == SubcommandKind::SweepDt {
        for f in DT_GRID_FACTORS {
            let p = ProtocolParams {
                dt: f * params.dt,
                ..params.clone()
            };
            p.validate().map_err(|e| {
                Failure::usage(format!(
                    "{} (sweep-dt point dt={})",
                    flag_diagnostic(&strip(e)),
                    p.dt
                ))
            })?;
        }
    }
    let output_path = flags
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", subcommand.name())));
    Ok(RunConfig {
        subcommand,
        params,
        output_path,
        threads: (flags.threads > 0).then_some(flags.threads),
    })
}

fn strip(err: Error) -> String {
    match err {
        Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("invalid arguments")
        .trim_start_matches("error: ")
        .to_string()
}

/// Outcome of a successful run: the summary line printed to stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: String,
    pub passed: bool,
}

/// Executes the configured subcommand on a dedicated worker pool.
pub fn run(config: &RunConfig) -> Result<Report, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::usage(format!("--threads: {e}")))?;
    let started = Instant::now();
    let mut report = pool.install(|| execute(config))?;
    report.summary = format!(
        "{} runtime={:.3}s",
        report.summary,
        started.elapsed().as_secs_f64()
    );
    Ok(report)
}

fn open_output(config: &RunConfig) -> Result<BufWriter<File>, Failure> {
    File::create(&config.output_path)
        .map(BufWriter::new)
        .map_err(|e| {
            Failure::usage(format!(
                "--out: cannot write {}: {e}",
                config.output_path.display()
            ))
        })
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_NUMERICAL,
        message: format!("write failed: {e}"),
    }
}

fn execute(config: &RunConfig) -> Result<Report, Failure> {
    let p = &config.params;
    let name = config.subcommand.name();
    if config.subcommand == SubcommandKind::Validate {
        let results = checks::run_all();
        let mut all = true;
        for c in &results {
            all &= c.passed;
            println!(
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let failed = results.iter().filter(|c| !c.passed).count();
        return Ok(Report {
            summary: format!("validate: {} checks, {failed} failed", results.len()),
            passed: all,
        });
    }

    let mut out = open_output(config)?;
    let summary = match config.subcommand {
        SubcommandKind::Validate => unreachable!(),
        SubcommandKind::DecayDemo => {
            // sensing amplitudes of the codewords
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let trace = compensation_decay_trace(s, s, p.gamma, p.t_final, p.n_cycles())
                .map_err(Failure::from_core)?;
            output::write_rows(
                &mut out,
                &["time", "norm", "direction_error"],
                trace.iter().map(|(t, n, d)| output::nums(&[*t, *n, *d])),
            )
            .map_err(io_failure)?;
            let max_dir = trace.iter().map(|r| r.2).fold(0.0, f64::max);
            let (t, norm, _) = *trace.last().expect("non-empty");
            format!(
                "{name}: max direction_error={} final norm={} expected={}",
                fmt_num(max_dir),
                fmt_num(norm),
                fmt_num((-p.gamma * 0.5 * t).exp())
            )
        }
        SubcommandKind::Sense => {
            let rep = sense_experiment(p).map_err(Failure::from_core)?;
            output::write_rows(
                &mut out,
                &[
                    "time",
                    "mean_x_logical",
                    "mean_fidelity",
                    "n_jumps_mean",
                    "n_detected_mean",
                ],
                rep.rows.iter().map(|r| {
                    output::nums(&[
                        r.time,
                        r.mean_x_logical,
                        r.mean_fidelity,
                        r.n_jumps_mean,
                        r.n_detected_mean,
                    ])
                }),
            )
            .map_err(io_failure)?;
            format!(
                "{name}: final visibility={} phase={} (2gT={}) fidelity={}",
                fmt_num(rep.final_visibility),
                fmt_num(rep.final_phase),
                fmt_num(2.0 * p.g * p.t_final),
                fmt_num(rep.final_fidelity)
            )
        }
        SubcommandKind::SweepDt => {
            let grid: Vec<f64> = DT_GRID_FACTORS.iter().map(|f| f * p.dt).collect();
            let base = ProtocolParams {
                eta: 1.0,
                ..p.clone()
            };
            let res = dt_scaling_sweep(&base, &grid).map_err(Failure::from_core)?;
            output::write_rows(
                &mut out,
                &["dt", "mean_infidelity", "stderr_infidelity"],
                (0..grid.len())
                    .map(|k| output::nums(&[res.x_values[k], res.y_values[k], res.y_stderr[k]])),
            )
            .map_err(io_failure)?;
            writeln!(
                out,
                "# slope={}, intercept={}",
                fmt_num(res.fit_slope),
                fmt_num(res.fit_intercept)
            )
            .map_err(io_failure)?;
            format!("{name}: log-log slope={}", fmt_num(res.fit_slope))
        }
        SubcommandKind::SweepEta => {
            let res = eta_coherence_sweep(p, &ETA_GRID).map_err(Failure::from_core)?;
            output::write_rows(
                &mut out,
                &["eta", "t_eff", "censored"],
                (0..ETA_GRID.len()).map(|k| {
                    let mut row = output::nums(&[res.x_values[k], res.y_values[k]]);
                    row.push(if res.censored[k] { "1" } else { "0" }.to_string());
                    row
                }),
            )
            .map_err(io_failure)?;
            let base = res.y_values[0];
            format!(
                "{name}: t_eff ratios eta=0.9: {} eta=0.99: {}",
                fmt_num(res.y_values[1] / base),
                fmt_num(res.y_values[2] / base)
            )
        }
        SubcommandKind::SigmaZDemo => {
            let trace =
                sigma_z_phase_trace(p.g, p.gamma, p.dt, p.t_final).map_err(Failure::from_core)?;
            output::write_rows(
                &mut out,
                &["time", "accumulated_phase"],
                trace.iter().map(|(t, ph)| output::nums(&[*t, *ph])),
            )
            .map_err(io_failure)?;
            let phase = trace.last().expect("non-empty").1;
            format!(
                "{name}: |phase|={} bound 2g*dt={}",
                fmt_num(phase.abs()),
                fmt_num(2.0 * p.g.abs() * p.dt)
            )
        }
    };
    out.flush().map_err(io_failure)?;
    Ok(Report {
        summary,
        passed: true,
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(f) => {
            if f.code == EXIT_OK {
                print!("{}", f.message);
            } else {
                eprintln!("error: {}", f.message);
            }
            return f.code;
        }
    };
    match run(&config) {
        Ok(report) => {
            println!("{}", report.summary);
            if report.passed {
                EXIT_OK
            } else {
                EXIT_NUMERICAL
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
