//! Multi-trial experiment runner and result files.
//!
//! A trial draws one channel realisation (synthetic mode) and, per duty
//! cycle, one set of TDMA offsets. Every ordered pair of coordinated hubs
//! sends one packet per routing window; SPR and CMR are evaluated on the
//! same routes. Per-trial curves are averaged in trial order, so results do
//! not depend on the number of worker threads.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{load_trace, synth_trace, ChannelTrace, LinkId, TraceError};
use crate::distfit::{best_fit, BestFit, Family, FitError, FitResult};
use crate::mac::{build_schedule, TdmaSchedule};
use crate::metrics::{
    mean_curve, outage_curve, packet_delivered, DecodeRule, EfficiencyReport, MetricsError, OutageCurve,
    PdrPoint, Scheme,
};
use crate::routing::{evaluate_plan, select_routes_or_direct, HubGraph, RouteEvaluation, RoutingError};
use crate::scenario::{ChannelSource, ConfigError, NodeId, ScenarioConfig, Topology};
use crate::sinr::{window_sinrs, SinrError};
use crate::window::{routing_links, LinkTable, WindowLinks};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("channel data: {0}")]
    Channel(#[from] SinrError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl RunError {
    /// 1 for configuration problems, 2 for trace and file I/O, 3 for
    /// internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Usage(_) => 1,
            RunError::Trace(_) | RunError::Channel(_) | RunError::Output { .. } => 2,
            RunError::Invariant(_) => 3,
        }
    }
}

impl From<RoutingError> for RunError {
    fn from(e: RoutingError) -> Self {
        RunError::Invariant(e.to_string())
    }
}

impl From<MetricsError> for RunError {
    fn from(e: MetricsError) -> Self {
        RunError::Invariant(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub schemes: Vec<Scheme>,
    /// Subset of the configured duty cycles; `None` runs all of them.
    pub duty_cycles: Option<Vec<f64>>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub dump_sinr: bool,
    pub dump_routes: bool,
    pub dump_schedule: bool,
    pub dump_samples: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            duty_cycles: None,
            workers: None,
            dump_sinr: false,
            dump_routes: false,
            dump_schedule: false,
            dump_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub trials: u32,
    pub schemes: Vec<Scheme>,
    pub duty_cycles_percent: Vec<f64>,
    pub sensitivity_grid_dbm: Vec<f64>,
    pub gamma_th_grid_db: Vec<f64>,
    pub output_dir: Option<PathBuf>,
    pub version: String,
}

/// Hex SHA-256 of the config's JSON form.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let digest = Sha256::digest(serde_json::to_vec(config).expect("config serialization is infallible"));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub sensitivity_dbm: f64,
    pub report: EfficiencyReport,
}

/// Aggregated outcome of one scheme at one duty cycle.
#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub duty_cycle_percent: f64,
    pub outage: OutageCurve,
    pub pdr: Vec<PdrPoint>,
    pub efficiency: Vec<EfficiencyRow>,
    /// Pooled linear SINR, thinned to `fit_max_samples`.
    pub fit_samples: Vec<f64>,
    /// Pooled values dropped for being zero or non-finite.
    pub dropped_samples: usize,
    pub fit: Result<BestFit, FitError>,
}

impl SchemeResult {
    /// SINR in dB at 10% outage.
    pub fn sinr_at_10pct_outage(&self) -> Option<f64> {
        self.outage.sinr_at(0.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRow {
    pub window: usize,
    pub scheme: Scheme,
    pub src: NodeId,
    pub dst: NodeId,
    pub path: String,
    pub gamma_comb_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrRow {
    pub time_ms: f64,
    pub link: LinkId,
    pub sinr_db: f64,
}

/// Per-sample detail of trial 0, kept only when requested.
#[derive(Debug, Clone, Default)]
pub struct TrialDump {
    pub routes: Vec<RouteRow>,
    pub sinr: Vec<SinrRow>,
    pub schedule: Option<TdmaSchedule>,
}

#[derive(Debug, Clone)]
pub struct DutyCycleResult {
    pub duty_cycle_percent: f64,
    pub schemes: Vec<SchemeResult>,
    pub dump: TrialDump,
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub manifest: RunManifest,
    pub config: ScenarioConfig,
    pub options: RunOptions,
    pub duty_cycles: Vec<DutyCycleResult>,
}

impl RunResults {
    pub fn get(&self, scheme: Scheme, duty_cycle_percent: f64) -> Option<&SchemeResult> {
        self.duty_cycles
            .iter()
            .find(|d| d.duty_cycle_percent == duty_cycle_percent)?
            .schemes
            .iter()
            .find(|s| s.scheme == scheme)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SchemeResult> {
        self.duty_cycles.iter().flat_map(|d| d.schemes.iter())
    }
}

/// One trial's outcome for one scheme at one duty cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScheme {
    pub outage: OutageCurve,
    /// Delivered packets per sensitivity grid point.
    pub delivered: Vec<usize>,
    pub packets: usize,
    /// Combined SINR in dB of the packets kept for fitting: those whose
    /// run-wide index (trial-major, then window, then hub pair) is a
    /// multiple of the thinning stride.
    pub fit_gamma_db: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: u32,
    /// Indexed like the selected duty cycles, then like the selected schemes.
    pub per_dc: Vec<Vec<TrialScheme>>,
    pub dumps: Vec<TrialDump>,
}

/// Shared, read-only state of a run.
pub struct RunContext {
    pub config: ScenarioConfig,
    pub options: RunOptions,
    /// Selected duty cycles with their index in the configured list.
    pub duty_cycles: Vec<(usize, f64)>,
    fixed_trace: Option<ChannelTrace>,
    links: Vec<LinkId>,
    hubs: Vec<NodeId>,
    sensitivity_grid: Vec<f64>,
    gamma_grid: Vec<f64>,
    fit_stride: usize,
}

impl RunContext {
    pub fn new(config: ScenarioConfig, options: RunOptions) -> Result<Self, RunError> {
        let config = config.validated()?;
        let configured = config.duty_cycles();
        let duty_cycles: Vec<(usize, f64)> = match &options.duty_cycles {
            None => configured.iter().copied().enumerate().collect(),
            Some(wanted) => {
                let mut out = Vec::new();
                for &w in wanted {
                    let i = configured.iter().position(|&c| (c - w).abs() < 1e-9).ok_or_else(|| {
                        RunError::Usage(format!("duty cycle {w} is not in the configured list {configured:?}"))
                    })?;
                    out.push((i, configured[i]));
                }
                out
            }
        };
        if options.schemes.is_empty() {
            return Err(RunError::Usage("no scheme selected".into()));
        }
        let fixed_trace = match &config.channel_source {
            ChannelSource::TraceFile(path) => Some(load_trace(path, &config.radio)?),
            ChannelSource::Synthetic(_) => None,
        };
        let topology = config.topology();
        let hubs = topology.hubs();
        let packets = config.resolved_time().window_count() * hubs.len() * hubs.len().saturating_sub(1);
        let fit_stride = (config.trials as usize * packets).div_ceil(config.fit_max_samples.max(1)).max(1);
        Ok(Self {
            fit_stride,
            links: routing_links(&topology, config.routing.relay_side),
            hubs,
            sensitivity_grid: config.sensitivity_grid_dbm.points(),
            gamma_grid: config.gamma_th_grid_db.points(),
            duty_cycles,
            fixed_trace,
            config,
            options,
        })
    }

    fn topology(&self) -> Topology {
        self.config.topology()
    }

    /// Packets per trial and scheme: windows times ordered hub pairs.
    pub fn packets_per_trial(&self) -> usize {
        let h = self.hubs.len();
        self.config.resolved_time().window_count() * h * h.saturating_sub(1)
    }

    /// Channel of `trial`: the loaded trace, or a synthetic draw from the
    /// trial's channel stream.
    pub fn channel(&self, trial: u32) -> ChannelTrace {
        match (&self.fixed_trace, &self.config.channel_source) {
            (Some(trace), _) => trace.clone(),
            (None, ChannelSource::Synthetic(params)) => {
                let mut rng = trial_rng(self.config.seed, trial, 0);
                synth_trace(params, &self.topology(), &self.config.resolved_time(), self.config.synthetic_draw, &mut rng)
            }
            (None, ChannelSource::TraceFile(_)) => unreachable!("trace loaded in RunContext::new"),
        }
    }

    pub fn run_trial(&self, trial: u32) -> Result<TrialOutcome, RunError> {
        let owned;
        let trace = match &self.fixed_trace {
            Some(t) => t,
            None => {
                owned = self.channel(trial);
                &owned
            }
        };
        let mut per_dc = Vec::new();
        let mut dumps = Vec::new();
        for &(dc_index, dc) in &self.duty_cycles {
            let mut rng = trial_rng(self.config.seed, trial, 1 + dc_index as u64);
            let schedule = build_schedule(&self.config, dc, &mut rng);
            let want_dump = trial == 0;
            let (schemes, dump) = self.run_schedule(trace, &schedule, trial, want_dump)?;
            per_dc.push(schemes);
            dumps.push(dump);
        }
        Ok(TrialOutcome { trial, per_dc, dumps })
    }

    fn run_schedule(
        &self,
        trace: &ChannelTrace,
        schedule: &TdmaSchedule,
        trial: u32,
        want_dump: bool,
    ) -> Result<(Vec<TrialScheme>, TrialDump), RunError> {
        let config = &self.config;
        let routing = &config.routing;
        let time = config.resolved_time();
        let table = LinkTable::new(trace, schedule, config, &self.links)?;
        let schemes = &self.options.schemes;

        let first_index = trial as usize * self.packets_per_trial();
        let mut gammas: Vec<Vec<f64>> = vec![Vec::with_capacity(self.packets_per_trial()); schemes.len()];
        let mut kept: Vec<Vec<f64>> = vec![Vec::new(); schemes.len()];
        let mut delivered: Vec<Vec<usize>> = vec![vec![0; self.sensitivity_grid.len()]; schemes.len()];
        let mut dump = TrialDump::default();
        if want_dump && self.options.dump_schedule {
            dump.schedule = Some(schedule.clone());
        }

        let rules: Vec<DecodeRule> = self
            .sensitivity_grid
            .iter()
            .map(|&s| DecodeRule { sensitivity_dbm: s, sinr_threshold_db: config.sinr_decode_threshold_db })
            .collect();

        let mut previous: Option<(HubGraph, WindowLinks)> = None;
        for window in time.windows() {
            let links = table.window(&window)?;
            let graph = HubGraph::from_window(self.hubs.clone(), &links);
            let (route_graph, route_links) = match (&previous, routing.lagged_routing) {
                (Some((g, l)), true) => (g, l),
                _ => (&graph, &links),
            };
            for &src in &self.hubs {
                for &dst in &self.hubs {
                    if src == dst {
                        continue;
                    }
                    let plan = select_routes_or_direct(route_graph, route_links, src, dst, routing.p2_picker)?;
                    let eval = evaluate_plan(&plan, &links, window.index, routing.relay_side);
                    check_invariants(&eval, &rules)?;
                    let keep = (first_index + gammas[0].len()) % self.fit_stride == 0;
                    for (i, &scheme) in schemes.iter().enumerate() {
                        if keep {
                            kept[i].push(scheme.gamma_db(&eval));
                        }
                        gammas[i].push(scheme.gamma_db(&eval));
                        for (count, rule) in delivered[i].iter_mut().zip(&rules) {
                            *count += packet_delivered(&eval, scheme, rule) as usize;
                        }
                    }
                    if want_dump && self.options.dump_routes {
                        for &scheme in schemes {
                            let path = match scheme {
                                Scheme::Spr => eval.spr.path.to_string(),
                                Scheme::Cmr => eval
                                    .cmr
                                    .paths
                                    .iter()
                                    .map(|p| p.path.to_string())
                                    .collect::<Vec<_>>()
                                    .join(";"),
                            };
                            dump.routes.push(RouteRow {
                                window: window.index,
                                scheme,
                                src,
                                dst,
                                path,
                                gamma_comb_db: scheme.gamma_db(&eval),
                            });
                        }
                    }
                }
            }
            if want_dump && self.options.dump_sinr {
                for &link in &self.links {
                    for s in window_sinrs(trace, schedule, config, link, &window)? {
                        dump.sinr.push(SinrRow { time_ms: s.time_ms, link, sinr_db: s.sinr_db });
                    }
                }
            }
            previous = Some((graph, links));
        }

        let out = gammas
            .into_iter()
            .zip(delivered)
            .zip(kept)
            .map(|((gamma_db, delivered), fit_gamma_db)| {
                Ok(TrialScheme {
                    outage: outage_curve(&gamma_db, &self.gamma_grid)?,
                    packets: gamma_db.len(),
                    delivered,
                    fit_gamma_db,
                })
            })
            .collect::<Result<Vec<_>, MetricsError>>()?;
        Ok((out, dump))
    }
}

/// Keyed by the master seed; trial and sub-stream select the ChaCha
/// stream, so no two (seed, trial) pairs share a stream.
fn trial_rng(seed: u64, trial: u32, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 32) | stream);
    rng
}

/// CMR never loses to the direct links of its own first path, neither in
/// SINR nor in delivery.
fn check_invariants(eval: &RouteEvaluation, rules: &[DecodeRule]) -> Result<(), RunError> {
    let cmr = eval.cmr.gamma_comb_db;
    let direct = eval.p1_direct_only_db();
    if cmr.is_nan() || !(cmr >= direct - 1e-9) {
        return Err(RunError::Invariant(format!(
            "window {} {}->{}: CMR SINR {cmr} dB below first-path direct SINR {direct} dB",
            eval.window, eval.src, eval.dst
        )));
    }
    for rule in rules {
        if packet_delivered(eval, Scheme::Spr, rule) && !packet_delivered(eval, Scheme::Cmr, rule) {
            return Err(RunError::Invariant(format!(
                "window {} {}->{}: SPR delivers at {} dBm but CMR does not",
                eval.window, eval.src, eval.dst, rule.sensitivity_dbm
            )));
        }
    }
    Ok(())
}

/// Runs every trial and aggregates.
pub fn run_experiment(config: ScenarioConfig, options: RunOptions) -> Result<RunResults, RunError> {
    let ctx = RunContext::new(config, options)?;
    let trials: Vec<u32> = (0..ctx.config.trials).collect();
    let run_all = || trials.par_iter().map(|&t| ctx.run_trial(t)).collect::<Result<Vec<_>, _>>();
    let outcomes = match ctx.options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| RunError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    aggregate(&ctx, outcomes)
}

/// Averages trial outcomes in trial order and fits the pooled samples.
pub fn aggregate(ctx: &RunContext, mut outcomes: Vec<TrialOutcome>) -> Result<RunResults, RunError> {
    outcomes.sort_by_key(|o| o.trial);
    let config = &ctx.config;
    let trials = outcomes.len();
    let total_time_s = config.time.total_time_ms / 1000.0;
    let flows = (ctx.hubs.len() * ctx.hubs.len().saturating_sub(1)).max(1);
    let coordinated = config.ban_set.coordinated.len();

    let mut duty_cycles = Vec::new();
    for (d, &(_, dc)) in ctx.duty_cycles.iter().enumerate() {
        let mut schemes = Vec::new();
        for (s, &scheme) in ctx.options.schemes.iter().enumerate() {
            let trial_results: Vec<&TrialScheme> = outcomes.iter().map(|o| &o.per_dc[d][s]).collect();
            let curves: Vec<OutageCurve> = trial_results.iter().map(|t| t.outage.clone()).collect();
            let outage = mean_curve(&curves);

            let packets: usize = trial_results.iter().map(|t| t.packets).sum();
            let pdr = ctx
                .sensitivity_grid
                .iter()
                .enumerate()
                .map(|(g, &sens)| {
                    let delivered: usize = trial_results.iter().map(|t| t.delivered[g]).sum();
                    PdrPoint { receive_sensitivity_dbm: sens, pdr: delivered as f64 / packets.max(1) as f64 }
                })
                .collect();

            let mut efficiency = Vec::new();
            for (g, &sens) in ctx.sensitivity_grid.iter().enumerate() {
                let mut theta = 0.0;
                for t in &trial_results {
                    // Delivered packets of an average flow over the run.
                    let p_succ = t.delivered[g] as f64 / flows as f64;
                    theta += crate::metrics::throughput(p_succ, config.radio.packet_bits, total_time_s)?;
                }
                theta /= trials.max(1) as f64;
                efficiency.push(EfficiencyRow {
                    sensitivity_dbm: sens,
                    report: EfficiencyReport::new(theta, coordinated, config.radio.bandwidth_hz)?,
                });
            }

            let mut fit_samples = Vec::new();
            let mut dropped_samples = 0;
            for t in &trial_results {
                for &g in &t.fit_gamma_db {
                    let x = 10f64.powf(g / 10.0);
                    if x > 0.0 && x.is_finite() {
                        fit_samples.push(x);
                    } else {
                        dropped_samples += 1;
                    }
                }
            }

            schemes.push(SchemeResult {
                scheme,
                duty_cycle_percent: dc,
                outage,
                pdr,
                efficiency,
                fit_samples,
                dropped_samples,
                fit: Err(FitError::NoFamilyFitted),
            });
        }
        let dump = outcomes.first().map(|o| o.dumps[d].clone()).unwrap_or_default();
        duty_cycles.push(DutyCycleResult { duty_cycle_percent: dc, schemes, dump });
    }

    let families = &config.fit_families;
    duty_cycles
        .par_iter_mut()
        .flat_map(|d| d.schemes.par_iter_mut())
        .for_each(|s| s.fit = fit_samples(&s.fit_samples, families));

    let manifest = RunManifest {
        config_hash: config_hash(config),
        seed: config.seed,
        trials: config.trials,
        schemes: ctx.options.schemes.clone(),
        duty_cycles_percent: ctx.duty_cycles.iter().map(|&(_, dc)| dc).collect(),
        sensitivity_grid_dbm: ctx.sensitivity_grid.clone(),
        gamma_th_grid_db: ctx.gamma_grid.clone(),
        output_dir: None,
        version: VERSION.to_string(),
    };
    Ok(RunResults { manifest, config: config.clone(), options: ctx.options.clone(), duty_cycles })
}

/// `best_fit` with a clear error for an empty sample set.
pub fn fit_samples(samples: &[f64], families: &[Family]) -> Result<BestFit, FitError> {
    if families.is_empty() {
        return Err(FitError::NoFamilyFitted);
    }
    best_fit(samples, families)
}

/// Synthetic channel of trial 0, as the simulator would draw it.
pub fn gen_channels(config: &ScenarioConfig) -> Result<ChannelTrace, RunError> {
    match &config.channel_source {
        ChannelSource::Synthetic(_) => {}
        ChannelSource::TraceFile(_) => {
            return Err(RunError::Usage("gen-channels needs a synthetic channel source".into()))
        }
    }
    let ctx = RunContext::new(config.clone(), RunOptions::default())?;
    Ok(ctx.channel(0))
}

fn dc_label(dc: f64) -> String {
    format!("{dc}")
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, RunError> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|source| RunError::Output { path: path.to_path_buf(), source })
}

fn csv_writer<W: Write>(mut w: W, hash: &str) -> io::Result<csv::Writer<W>> {
    writeln!(w, "# manifest={hash}")?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w))
}

/// Writes one CSV: manifest comment, header, rows.
fn write_csv<I, R>(path: &Path, hash: &str, header: &[&str], rows: I) -> Result<(), RunError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let io_err = |source: io::Error| RunError::Output { path: path.to_path_buf(), source };
    let mut wtr = csv_writer(create(path)?, hash).map_err(io_err)?;
    let csv_err = |e: csv::Error| io_err(e.into());
    wtr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wtr.write_record(row).map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}

fn fit_row(scheme: Scheme, dc: f64, fit: &FitResult) -> Vec<String> {
    let mut params: Vec<String> = fit.model.params().iter().map(f64::to_string).collect();
    params.resize(3, String::new());
    let mut row = vec![scheme.as_str().to_string(), dc.to_string(), fit.model.family().to_string()];
    row.extend(params);
    row.extend([fit.log_likelihood.to_string(), fit.ks_statistic.to_string(), fit.n_samples.to_string()]);
    row
}

pub const FIT_HEADER: [&str; 9] = ["scheme", "duty_cycle", "family", "param1", "param2", "param3", "loglik", "ks", "n"];

/// Writes the manifest first, then every result file. Returns the written paths.
pub fn write_outputs(results: &mut RunResults, out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Output { path: out_dir.to_path_buf(), source })?;
    results.manifest.output_dir = Some(out_dir.to_path_buf());
    let hash = results.manifest.config_hash.clone();
    let mut written = Vec::new();

    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&results.manifest).expect("manifest serialization is infallible");
    fs::write(&manifest_path, json + "\n").map_err(|source| RunError::Output { path: manifest_path.clone(), source })?;
    written.push(manifest_path);

    let mut efficiency_rows = Vec::new();
    let mut fit_rows = Vec::new();
    let mut best_rows = Vec::new();
    let coordinated = results.config.ban_set.coordinated.len();

    for d in &results.duty_cycles {
        let dc = dc_label(d.duty_cycle_percent);
        for s in &d.schemes {
            let name = s.scheme.as_str();
            let path = out_dir.join(format!("outage_{name}_{dc}.csv"));
            write_csv(
                &path,
                &hash,
                &["gamma_th_db", "p_out"],
                s.outage.points.iter().map(|p| [p.gamma_th_db.to_string(), p.p_out.to_string()]),
            )?;
            written.push(path);

            let path = out_dir.join(format!("pdr_{name}_{dc}.csv"));
            write_csv(
                &path,
                &hash,
                &["sensitivity_dbm", "pdr"],
                s.pdr.iter().map(|p| [p.receive_sensitivity_dbm.to_string(), p.pdr.to_string()]),
            )?;
            written.push(path);

            for e in &s.efficiency {
                efficiency_rows.push(vec![
                    name.to_string(),
                    dc.clone(),
                    coordinated.to_string(),
                    e.sensitivity_dbm.to_string(),
                    e.report.throughput_bps.to_string(),
                    e.report.spectral_efficiency.to_string(),
                ]);
            }

            if let Ok(fit) = &s.fit {
                fit_rows.extend(fit.fits.iter().map(|f| fit_row(s.scheme, d.duty_cycle_percent, f)));
                best_rows.push(fit_row(s.scheme, d.duty_cycle_percent, &fit.best));
            }

            if results.options.dump_samples {
                let path = out_dir.join(format!("samples_{name}_{dc}.csv"));
                write_csv(&path, &hash, &["sinr_linear"], s.fit_samples.iter().map(|x| [x.to_string()]))?;
                written.push(path);
            }
        }

        if !d.dump.routes.is_empty() {
            let path = out_dir.join(format!("routes_{dc}.csv"));
            write_csv(
                &path,
                &hash,
                &["window", "scheme", "src", "dst", "path", "gamma_comb_db"],
                d.dump.routes.iter().map(|r| {
                    [
                        r.window.to_string(),
                        r.scheme.as_str().to_string(),
                        r.src.to_string(),
                        r.dst.to_string(),
                        r.path.clone(),
                        r.gamma_comb_db.to_string(),
                    ]
                }),
            )?;
            written.push(path);
        }
        if !d.dump.sinr.is_empty() {
            let path = out_dir.join(format!("sinr_{dc}.csv"));
            write_csv(
                &path,
                &hash,
                &["time_ms", "tx", "rx", "sinr_db"],
                d.dump.sinr.iter().map(|r| {
                    [r.time_ms.to_string(), r.link.tx.to_string(), r.link.rx.to_string(), r.sinr_db.to_string()]
                }),
            )?;
            written.push(path);
        }
        if let Some(schedule) = &d.dump.schedule {
            let path = out_dir.join(format!("schedule_{dc}.csv"));
            let io_err = |source: io::Error| RunError::Output { path: path.clone(), source };
            let mut w = create(&path)?;
            writeln!(w, "# manifest={hash}").map_err(io_err)?;
            schedule.write_csv(&mut w).map_err(|e| io_err(e.into()))?;
            w.flush().map_err(io_err)?;
            written.push(path);
        }
    }

    let path = out_dir.join("efficiency.csv");
    write_csv(
        &path,
        &hash,
        &["scheme", "dc", "coBANs", "sensitivity_dbm", "throughput_bps", "spectral_efficiency"],
        efficiency_rows,
    )?;
    written.push(path);

    let path = out_dir.join("fits.csv");
    write_csv(&path, &hash, &FIT_HEADER, fit_rows)?;
    written.push(path);
    let path = out_dir.join("best_fits.csv");
    write_csv(&path, &hash, &FIT_HEADER, best_rows)?;
    written.push(path);

    Ok(written)
}
