//! Command-line front end: `run`, `gen-channels`, `fit`, `validate`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::channel::write_trace;
use crate::distfit::{Family, FitError};
use crate::metrics::Scheme;
use crate::run::{fit_samples, gen_channels, run_experiment, write_outputs, RunError, RunOptions};
use crate::scenario::{validate, PathPicker, RelaySide, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "bansim", version, about = "Cross-layer routing simulator for co-located body area networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run trials and write outage, PDR, efficiency and fit CSVs.
    Run(RunArgs),
    /// Write trial 0's synthetic channel as a trace file.
    GenChannels(GenArgs),
    /// Fit distributions to a CSV of linear SINR samples.
    Fit(FitArgs),
    /// Check a config file and print the report.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Spr,
    Cmr,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RelaySideArg {
    Rx,
    Tx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PickerArg {
    Etx,
    NearestRssi,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub base: ConfigArgs,
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long, value_enum, default_value = "both")]
    pub scheme: SchemeArg,
    /// Comma-separated subset of the configured duty cycles, in percent.
    #[arg(long, value_delimiter = ',')]
    pub dc: Option<Vec<f64>>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub dump_sinr: bool,
    #[arg(long)]
    pub dump_routes: bool,
    #[arg(long)]
    pub dump_schedule: bool,
    /// Write the pooled linear SINR samples used for fitting.
    #[arg(long)]
    pub dump_samples: bool,
    /// Route each window on the previous window's link statistics.
    #[arg(long)]
    pub lagged_routing: bool,
    #[arg(long, value_enum)]
    pub relay_side: Option<RelaySideArg>,
    #[arg(long, value_enum)]
    pub p2_picker: Option<PickerArg>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<Family>>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub base: ConfigArgs,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with a `sinr_linear` column (or a single unnamed column).
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<Family>>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn load_config(base: &ConfigArgs) -> Result<ScenarioConfig, RunError> {
    let mut config = match &base.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = base.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn run_command(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), RunError> {
    let mut config = load_config(&args.base)?;
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if args.lagged_routing {
        config.routing.lagged_routing = true;
    }
    if let Some(side) = args.relay_side {
        config.routing.relay_side = match side {
            RelaySideArg::Rx => RelaySide::Rx,
            RelaySideArg::Tx => RelaySide::Tx,
        };
    }
    if let Some(p) = args.p2_picker {
        config.routing.p2_picker = match p {
            PickerArg::Etx => PathPicker::Etx,
            PickerArg::NearestRssi => PathPicker::NearestRssi,
        };
    }
    if let Some(f) = &args.families {
        config.fit_families = f.clone();
    }
    let schemes = match args.scheme {
        SchemeArg::Spr => vec![Scheme::Spr],
        SchemeArg::Cmr => vec![Scheme::Cmr],
        SchemeArg::Both => Scheme::ALL.to_vec(),
    };
    let options = RunOptions {
        schemes,
        duty_cycles: args.dc.clone(),
        workers: args.workers,
        dump_sinr: args.dump_sinr,
        dump_routes: args.dump_routes,
        dump_schedule: args.dump_schedule,
        dump_samples: args.dump_samples,
    };
    let mut results = run_experiment(config, options)?;
    let written = write_outputs(&mut results, &args.out)?;
    for r in results.iter() {
        let at10 = r.sinr_at_10pct_outage().map_or("n/a".to_string(), |v| format!("{v:.2} dB"));
        let best = match &r.fit {
            Ok(f) => f.best.model.family().to_string(),
            Err(e) => format!("none ({e})"),
        };
        let _ = writeln!(
            stdout,
            "{} dc={}%: SINR at 10% outage {at10}, best fit {best}",
            r.scheme.as_str(),
            r.duty_cycle_percent
        );
    }
    let _ = writeln!(stdout, "wrote {} files to {}", written.len(), args.out.display());
    Ok(())
}

pub fn gen_channels_command(args: &GenArgs) -> Result<usize, RunError> {
    let config = load_config(&args.base)?;
    let trace = gen_channels(&config)?;
    let out = |source| RunError::Output { path: args.out.clone(), source };
    let file = fs::File::create(&args.out).map_err(out)?;
    write_trace(&trace, io::BufWriter::new(file))?;
    Ok(trace.sample_count())
}

/// Reads the `sinr_linear` column, or the only column of a headerless-looking file.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Output { path: path.to_path_buf(), source })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut column = 0;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))?;
        if i == 0 {
            if let Some(c) = rec.iter().position(|f| f == "sinr_linear") {
                column = c;
                continue;
            }
            if rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
        }
        let Some(field) = rec.get(column) else { continue };
        if field.is_empty() {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| RunError::Usage(format!("{}: bad sample `{field}` on row {}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn fit_command(args: &FitArgs, stdout: &mut dyn Write) -> Result<(), RunError> {
    let samples = read_samples(&args.samples)?;
    if samples.is_empty() {
        return Err(RunError::Usage("no samples".into()));
    }
    let families = args.families.clone().unwrap_or_else(|| Family::ALL.to_vec());
    let fit = fit_samples(&samples, &families).map_err(|e| match e {
        FitError::NonPositiveSample { .. } | FitError::TooFewSamples { .. } => RunError::Usage(e.to_string()),
        other => RunError::Invariant(other.to_string()),
    })?;

    let mut buf = Vec::new();
    {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        let io_err = |e: csv::Error| RunError::Invariant(e.to_string());
        wtr.write_record(["family", "param1", "param2", "param3", "loglik", "ks", "n", "best"]).map_err(io_err)?;
        for f in &fit.fits {
            let mut row: Vec<String> = vec![f.model.family().to_string()];
            let mut params: Vec<String> = f.model.params().iter().map(f64::to_string).collect();
            params.resize(3, String::new());
            row.extend(params);
            row.extend([
                f.log_likelihood.to_string(),
                f.ks_statistic.to_string(),
                f.n_samples.to_string(),
                (f == &fit.best).to_string(),
            ]);
            wtr.write_record(row).map_err(io_err)?;
        }
        wtr.flush().map_err(|e| RunError::Invariant(e.to_string()))?;
    }
    for (family, err) in &fit.skipped {
        eprintln!("skipped {family}: {err}");
    }
    match &args.out {
        Some(path) => fs::write(path, &buf).map_err(|source| RunError::Output { path: path.clone(), source })?,
        None => {
            let _ = stdout.write_all(&buf);
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            if code == 0 {
                let _ = write!(stdout, "{}", e.render());
            } else {
                let _ = write!(stderr, "{}", e.render());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run_command(a, stdout),
        Command::GenChannels(a) => gen_channels_command(a).map(|n| {
            let _ = writeln!(stdout, "wrote {n} samples to {}", a.out.display());
        }),
        Command::Fit(a) => fit_command(a, stdout),
        Command::Validate(a) => ScenarioConfig::load(&a.config).map_err(RunError::from).and_then(|c| {
            let report = validate(&c);
            for w in &report.warnings {
                let _ = writeln!(stdout, "warning: {w}");
            }
            if report.is_valid() {
                let _ = writeln!(stdout, "config is valid");
                Ok(())
            } else {
                Err(RunError::Config(crate::scenario::ConfigError::Invalid(report)))
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
