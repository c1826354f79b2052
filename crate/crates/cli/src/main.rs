use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jac_core::array_model::{channel_for, synthesize_received, SourcePosition};
use jac_core::autocorr::autocorr_spectrum;
use jac_core::error::{JacError, Result};
use jac_core::estimators::{equivalent_farfield, jac_estimate, signal_power};
use jac_core::harness::spec::{parse_toml, BenchSpec, CrlbGridSpec, EstimateSpec, SimulateSpec, SweepSpec};
use jac_core::harness::{
    bench_to_csv, crlb_grid, crlb_to_csv, plan, rows_to_csv, rows_to_json, run_complexity_bench,
    run_sweep_with_threads,
};
use jac_core::music::{estimate_p2_music_detailed, pseudospectrum_csv};
use jac_core::signal_io::{read_signal, write_signal, SignalFormat};

/// Near-field channel and position estimation toolkit.
#[derive(Parser, Debug)]
#[command(name = "jac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides JAC_SEED and the config file.
    #[arg(long, env = "JAC_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FileFormat {
    Text,
    Binary,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a received-signal file.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Signal file format; defaults to binary for `.bin` paths, text otherwise.
        #[arg(long, value_enum)]
        signal_format: Option<FileFormat>,
    },
    /// Estimate channel and position from a signal file; prints JSON.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Received-signal file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        signal_format: Option<FileFormat>,
        /// Write the normalized autocorrelation spectrum as `eta,c_hat`.
        #[arg(long)]
        dump_autocorr: Option<PathBuf>,
        /// Write the MUSIC pseudospectrum as `p2,power`.
        #[arg(long)]
        dump_spectrum: Option<PathBuf>,
    },
    /// Run a Monte-Carlo sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Print the planned (value, trial, seed) triples and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Tabulate Cramér-Rao bounds over a parameter grid.
    Crlb {
        #[command(flatten)]
        common: Common,
    },
    /// Measure estimator runtime against array size.
    Bench {
        #[command(flatten)]
        common: Common,
    },
}

fn signal_format(path: &Path, flag: Option<FileFormat>) -> SignalFormat {
    match flag {
        Some(FileFormat::Text) => SignalFormat::Text,
        Some(FileFormat::Binary) => SignalFormat::Binary,
        None => SignalFormat::from_path(path),
    }
}

fn load<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => parse_toml(&std::fs::read_to_string(p)?),
        None => Ok(T::default()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(common: &Common, fmt: Option<FileFormat>) -> Result<()> {
    let mut spec: SimulateSpec = load(&common.config)?;
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    let cfg = spec.array.build()?;
    let pos = SourcePosition::from_degrees(spec.r_m, spec.theta_deg)?;
    let sig = synthesize_received(&cfg, &pos, spec.snapshots, spec.snr_db, spec.seed, spec.model)?;
    let comments = vec![
        format!("n_antennas={} carrier_hz={} spacing_m={}", cfg.n_antennas, cfg.carrier_hz, cfg.spacing_m),
        format!("r_m={} theta_deg={} snr_db={} seed={} model={}", spec.r_m, spec.theta_deg, spec.snr_db, spec.seed, spec.model),
    ];
    match &common.out {
        Some(p) => write_signal(p, signal_format(p, fmt), &sig.samples, &comments),
        None => {
            let stdout = std::io::stdout();
            match fmt {
                Some(FileFormat::Binary) => jac_core::signal_io::write_binary(stdout.lock(), &sig.samples),
                _ => jac_core::signal_io::write_text(stdout.lock(), &sig.samples, &comments),
            }
        }
    }
}

fn estimate(
    common: &Common,
    input: &Path,
    fmt: Option<FileFormat>,
    dump_autocorr: &Option<PathBuf>,
    dump_spectrum: &Option<PathBuf>,
) -> Result<()> {
    let spec: EstimateSpec = load(&common.config)?;
    let y = read_signal(input, signal_format(input, fmt))?;
    let mut array = spec.array;
    if common.config.is_none() {
        array.n_antennas = y.nrows();
    }
    let cfg = array.build()?;
    let est = jac_estimate(&y, &cfg, spec.method, &spec.estimator)?;

    let truth = match (spec.truth_r_m, spec.truth_theta_deg) {
        (Some(r), Some(t)) => Some(channel_for(&cfg, &SourcePosition::from_degrees(r, t)?, spec.truth_model)),
        (None, None) => None,
        _ => return Err(JacError::InvalidConfig("truth_r_m and truth_theta_deg must be given together".into())),
    };
    let json = est.to_json(truth.as_deref());

    if let Some(p) = dump_autocorr {
        let xi = spec.estimator.isf.xi.unwrap_or_else(|| cfg.default_xi());
        let c = autocorr_spectrum(&y, xi)?.normalized(signal_power(&y, xi, spec.estimator.normalization));
        std::fs::write(p, c.to_csv())?;
    }
    if let Some(p) = dump_spectrum {
        let y_tilde = equivalent_farfield(&y, est.p1_hat, &cfg, spec.estimator.literal_sign);
        let (_, spectrum, _) = estimate_p2_music_detailed(&y_tilde, &cfg, &spec.estimator.music)?;
        std::fs::write(p, pseudospectrum_csv(&spectrum))?;
    }
    emit(&common.out, &format!("{}\n", serde_json::to_string_pretty(&json).expect("json")))
}

fn sweep(common: &Common, dry_run: bool) -> Result<()> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| JacError::InvalidConfig("sweep requires --config".into()))?;
    let mut spec = SweepSpec::from_path(path)?;
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if dry_run {
        let planned = plan(&spec);
        let text = match common.format {
            OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&planned).expect("json")),
            OutputFormat::Csv => {
                let mut s = String::from("value,trial,seed\n");
                for p in &planned {
                    s.push_str(&format!("{},{},{}\n", p.value, p.trial, p.seed));
                }
                s
            }
        };
        return emit(&common.out, &text);
    }
    let threads = if common.threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        common.threads
    };
    let rows = run_sweep_with_threads(&spec, threads)?;
    let text = match common.format {
        OutputFormat::Csv => rows_to_csv(&rows)?,
        OutputFormat::Json => format!("{}\n", rows_to_json(&rows)),
    };
    emit(&common.out, &text)
}

fn crlb(common: &Common) -> Result<()> {
    let spec: CrlbGridSpec = load(&common.config)?;
    let rows = crlb_grid(&spec)?;
    let text = match common.format {
        OutputFormat::Csv => crlb_to_csv(&rows)?,
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&rows).expect("json")),
    };
    emit(&common.out, &text)
}

fn bench(common: &Common) -> Result<()> {
    let mut spec: BenchSpec = load(&common.config)?;
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    let rows = run_complexity_bench(&spec)?;
    let text = match common.format {
        OutputFormat::Csv => bench_to_csv(&rows)?,
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&rows).expect("json")),
    };
    emit(&common.out, &text)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common, signal_format } => simulate(common, *signal_format),
        Command::Estimate { common, input, signal_format, dump_autocorr, dump_spectrum } => {
            estimate(common, input, *signal_format, dump_autocorr, dump_spectrum)
        }
        Command::Sweep { common, dry_run } => sweep(common, *dry_run),
        Command::Crlb { common } => crlb(common),
        Command::Bench { common } => bench(common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                JacError::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
