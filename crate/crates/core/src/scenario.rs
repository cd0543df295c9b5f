//! Network entities, time base and the experiment configuration.
//!
//! A scenario is a static description of one experiment: which BANs take part
//! in routing, which only inject interference, the narrowband radio constants,
//! the TDMA duty cycles to sweep and where channel gains come from. Everything
//! else in the crate reads a validated [`ScenarioConfig`] and never mutates it.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::LinkClassParams;
use crate::distfit::Family;

/// Separation between consecutive transmitters in the measurement round-robin.
pub const ROUND_ROBIN_SEPARATION_MS: f64 = 5.0;

/// Routing updates happen once every this many sampling periods.
pub const SAMPLES_PER_WINDOW: f64 = 10.0;

/// Default sweeps, indexed by coordinated BAN count.
const DUTY_CYCLES_4: [f64; 5] = [8.3, 5.8, 4.2, 1.7, 0.2];
const DUTY_CYCLES_5: [f64; 5] = [6.7, 4.7, 3.3, 1.3, 0.1];
const DUTY_CYCLES_6: [f64; 5] = [5.6, 3.9, 1.7, 1.1, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Hub,
    Relay1,
    Relay2,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Hub, Role::Relay1, Role::Relay2];
    pub const RELAYS: [Role; 2] = [Role::Relay1, Role::Relay2];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Hub => "Hub",
            Role::Relay1 => "Relay1",
            Role::Relay2 => "Relay2",
        }
    }
}

/// A radio worn by one person: the hip hub or one of the two on-body relays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub ban: u16,
    pub role: Role,
}

impl NodeId {
    pub const fn new(ban: u16, role: Role) -> Self {
        Self { ban, role }
    }

    pub const fn hub(ban: u16) -> Self {
        Self::new(ban, Role::Hub)
    }

    pub fn is_hub(&self) -> bool {
        self.role == Role::Hub
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ban, self.role.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid node id `{0}`; expected `<ban_index>:<Hub|Relay1|Relay2>`")]
pub struct ParseNodeIdError(pub String);

impl FromStr for NodeId {
    type Err = ParseNodeIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseNodeIdError(s.to_string());
        let (ban, role) = s.trim().split_once(':').ok_or_else(err)?;
        let ban = ban.trim().parse::<u16>().map_err(|_| err())?;
        let role = match role.trim() {
            "Hub" => Role::Hub,
            "Relay1" => Role::Relay1,
            "Relay2" => Role::Relay2,
            _ => return Err(err()),
        };
        Ok(NodeId { ban, role })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanSet {
    pub coordinated: Vec<u16>,
    pub interfering: Vec<u16>,
}

impl Default for BanSet {
    fn default() -> Self {
        Self { coordinated: (0..4).collect(), interfering: (4..10).collect() }
    }
}

/// Narrowband radio constants (IEEE 802.15.6 narrowband defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConstants {
    pub bandwidth_hz: f64,
    pub data_rate_bps: f64,
    pub packet_bits: u32,
    pub packet_tx_time_ms: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub receive_sensitivity_dbm: f64,
}

impl Default for RadioConstants {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1.0e6,
            data_rate_bps: 486.0e3,
            packet_bits: 273,
            packet_tx_time_ms: 0.6,
            tx_power_dbm: 0.0,
            noise_power_dbm: -100.0,
            receive_sensitivity_dbm: -100.0,
        }
    }
}

/// Sampling and routing-update periods. Unset periods are derived from the
/// coordinated node count (5 ms round-robin separation, ten samples per window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeBase {
    pub sampling_period_ms: Option<f64>,
    pub timestamp_window_ms: Option<f64>,
    pub total_time_ms: f64,
}

impl Default for TimeBase {
    fn default() -> Self {
        Self { sampling_period_ms: None, timestamp_window_ms: None, total_time_ms: 45.0 * 60_000.0 }
    }
}

/// [`TimeBase`] with every period fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTime {
    pub sampling_period_ms: f64,
    pub timestamp_window_ms: f64,
    pub total_time_ms: f64,
}

impl ResolvedTime {
    pub fn window_count(&self) -> usize {
        (self.total_time_ms / self.timestamp_window_ms).round() as usize
    }

    pub fn window(&self, index: usize) -> Window {
        let start_ms = index as f64 * self.timestamp_window_ms;
        Window { index, start_ms, end_ms: start_ms + self.timestamp_window_ms }
    }

    pub fn windows(&self) -> impl Iterator<Item = Window> + '_ {
        (0..self.window_count()).map(|i| self.window(i))
    }
}

impl TimeBase {
    pub fn resolve(&self, coordinated_nodes: usize) -> ResolvedTime {
        let sampling = self
            .sampling_period_ms
            .unwrap_or(ROUND_ROBIN_SEPARATION_MS * coordinated_nodes as f64);
        let window = self.timestamp_window_ms.unwrap_or(SAMPLES_PER_WINDOW * sampling);
        ResolvedTime {
            sampling_period_ms: sampling,
            timestamp_window_ms: window,
            total_time_ms: self.total_time_ms,
        }
    }
}

/// Half-open routing-update interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub index: usize,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    TraceFile(PathBuf),
    Synthetic(LinkClassParams),
}

impl Default for ChannelSource {
    fn default() -> Self {
        ChannelSource::Synthetic(LinkClassParams::default())
    }
}

/// How often synthetic gains are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    #[default]
    PerWindow,
    PerSample,
}

/// Which BAN's on-body relays form the cooperative branches of a route-hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaySide {
    #[default]
    Rx,
    Tx,
}

/// How the second CMR path is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathPicker {
    /// Next-best ETX path avoiding the first path's intermediate hub.
    #[default]
    Etx,
    /// Path through the strongest remaining hub as seen from the source.
    NearestRssi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingOptions {
    pub etx_gamma_th_db: f64,
    pub relay_side: RelaySide,
    pub p2_picker: PathPicker,
    pub lagged_routing: bool,
}

impl Default for RoutingOptions {
    fn default() -> Self {
        Self {
            etx_gamma_th_db: 5.0,
            relay_side: RelaySide::Rx,
            p2_picker: PathPicker::Etx,
            lagged_routing: false,
        }
    }
}

/// Inclusive arithmetic grid `start, start + step, ..., stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub ban_set: BanSet,
    pub radio: RadioConstants,
    pub time: TimeBase,
    /// `None` selects the default sweep for the coordinated BAN count.
    pub duty_cycles_percent: Option<Vec<f64>>,
    pub packets_per_node: u32,
    pub trials: u32,
    pub seed: u64,
    pub channel_source: ChannelSource,
    pub synthetic_draw: DrawMode,
    pub routing: RoutingOptions,
    pub sensitivity_grid_dbm: GridSpec,
    pub gamma_th_grid_db: GridSpec,
    /// Optional SINR gate applied on top of the sensitivity test.
    pub sinr_decode_threshold_db: Option<f64>,
    pub fit_families: Vec<Family>,
    /// Pooled samples are thinned to at most this many before fitting.
    pub fit_max_samples: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            ban_set: BanSet::default(),
            radio: RadioConstants::default(),
            time: TimeBase::default(),
            duty_cycles_percent: None,
            packets_per_node: 1,
            trials: 1000,
            seed: 1,
            channel_source: ChannelSource::default(),
            synthetic_draw: DrawMode::PerWindow,
            routing: RoutingOptions::default(),
            sensitivity_grid_dbm: GridSpec::new(-100.0, -86.0, 1.0),
            gamma_th_grid_db: GridSpec::new(-10.0, 40.0, 0.5),
            sinr_decode_threshold_db: None,
            fit_families: Family::ALL.to_vec(),
            fit_max_samples: 100_000,
        }
    }
}

/// Duty-cycle sweep used when the config leaves it unset.
pub fn default_duty_cycles(coordinated_bans: usize) -> Vec<f64> {
    match coordinated_bans {
        5 => DUTY_CYCLES_5.to_vec(),
        6 => DUTY_CYCLES_6.to_vec(),
        _ => DUTY_CYCLES_4.to_vec(),
    }
}

impl ScenarioConfig {
    pub fn topology(&self) -> Topology {
        Topology::new(&self.ban_set)
    }

    /// Hubs plus relays of the coordinated BANs.
    pub fn coordinated_node_count(&self) -> usize {
        3 * self.ban_set.coordinated.len()
    }

    pub fn resolved_time(&self) -> ResolvedTime {
        self.time.resolve(self.coordinated_node_count())
    }

    pub fn duty_cycles(&self) -> Vec<f64> {
        self.duty_cycles_percent
            .clone()
            .unwrap_or_else(|| default_duty_cycles(self.ban_set.coordinated.len()))
    }

    /// Active period of a node per cycle, `P_trans * t`.
    pub fn active_ms(&self) -> f64 {
        self.packets_per_node as f64 * self.radio.packet_tx_time_ms
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(s).map_err(ConfigError::Parse)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_json_string() + "\n")
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
    }

    /// Fails with [`ConfigError::Invalid`] when [`validate`] reports violations.
    pub fn validated(self) -> Result<Self, ConfigError> {
        let report = validate(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(report))
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(serde_json::Error),
    #[error("invalid config:\n{0}")]
    Invalid(ValidationReport),
}

/// Every node of a scenario, coordinated BANs first.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    coordinated: Vec<u16>,
    interfering: Vec<u16>,
}

impl Topology {
    pub fn new(bans: &BanSet) -> Self {
        Self { coordinated: bans.coordinated.clone(), interfering: bans.interfering.clone() }
    }

    pub fn coordinated_bans(&self) -> &[u16] {
        &self.coordinated
    }

    pub fn interfering_bans(&self) -> &[u16] {
        &self.interfering
    }

    pub fn is_coordinated(&self, ban: u16) -> bool {
        self.coordinated.contains(&ban)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.coordinated.contains(&node.ban) || self.interfering.contains(&node.ban)
    }

    pub fn hubs(&self) -> Vec<NodeId> {
        self.coordinated.iter().map(|&b| NodeId::hub(b)).collect()
    }

    pub fn coordinated_nodes(&self) -> Vec<NodeId> {
        expand(&self.coordinated)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        let mut nodes = expand(&self.coordinated);
        nodes.extend(expand(&self.interfering));
        nodes
    }

    pub fn relays_of(ban: u16) -> [NodeId; 2] {
        [NodeId::new(ban, Role::Relay1), NodeId::new(ban, Role::Relay2)]
    }
}

fn expand(bans: &[u16]) -> Vec<NodeId> {
    bans.iter().flat_map(|&b| Role::ALL.map(|r| NodeId::new(b, r))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal consistency notes.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation { field: field.to_string(), message: message.into() });
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Checks every scenario invariant. Pure; an empty report means valid.
pub fn validate(config: &ScenarioConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let bans = &config.ban_set;

    if bans.coordinated.is_empty() {
        report.push("ban_set.coordinated", "at least one coordinated BAN is required");
    }
    let mut seen = BTreeSet::new();
    for &b in bans.coordinated.iter().chain(&bans.interfering) {
        if !seen.insert(b) {
            report.push("ban_set", format!("BAN index {b} listed more than once"));
        }
    }

    let radio = &config.radio;
    let finite = [
        ("radio.tx_power_dbm", radio.tx_power_dbm),
        ("radio.noise_power_dbm", radio.noise_power_dbm),
        ("radio.receive_sensitivity_dbm", radio.receive_sensitivity_dbm),
    ];
    for (field, value) in finite {
        if !value.is_finite() {
            report.push(field, "power must be finite");
        }
    }
    let positive = [
        ("radio.bandwidth_hz", radio.bandwidth_hz),
        ("radio.data_rate_bps", radio.data_rate_bps),
        ("radio.packet_tx_time_ms", radio.packet_tx_time_ms),
    ];
    for (field, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            report.push(field, "must be finite and > 0");
        }
    }
    if radio.packet_bits == 0 {
        report.push("radio.packet_bits", "must be > 0");
    }
    let airtime_bits = radio.packet_tx_time_ms * 1e-3 * radio.data_rate_bps;
    let bits = radio.packet_bits as f64;
    if bits > 0.0 && ((airtime_bits - bits) / bits).abs() > 0.10 {
        report.warnings.push(format!(
            "packet_tx_time_ms x data_rate_bps = {airtime_bits:.1} bits, more than 10% away from packet_bits = {bits}"
        ));
    }

    let time = config.resolved_time();
    if !(time.sampling_period_ms.is_finite() && time.sampling_period_ms > 0.0) {
        report.push("time.sampling_period_ms", "must be finite and > 0");
    }
    if !(time.timestamp_window_ms.is_finite() && time.timestamp_window_ms > 0.0) {
        report.push("time.timestamp_window_ms", "must be finite and > 0");
    } else if !(time.total_time_ms.is_finite() && time.total_time_ms > 0.0) {
        report.push("time.total_time_ms", "must be finite and > 0");
    } else {
        let ratio = time.total_time_ms / time.timestamp_window_ms;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            report.push(
                "time.total_time_ms",
                format!(
                    "total_time_ms {} is not a multiple of timestamp_window_ms {}",
                    time.total_time_ms, time.timestamp_window_ms
                ),
            );
        }
    }

    let dcs = config.duty_cycles();
    if dcs.is_empty() {
        report.push("duty_cycles_percent", "at least one duty cycle is required");
    }
    for dc in dcs {
        if !(dc > 0.0 && dc <= 100.0) {
            report.push("duty_cycles_percent", format!("duty cycle out of range (0, 100]: {dc}"));
        }
    }
    if config.packets_per_node == 0 {
        report.push("packets_per_node", "must be >= 1");
    }
    if config.trials == 0 {
        report.push("trials", "must be >= 1");
    }

    if let ChannelSource::Synthetic(params) = &config.channel_source {
        for (name, class) in params.classes() {
            if !(class.log_std_db.is_finite() && class.log_std_db >= 0.0) {
                report.push(&format!("channel_source.synthetic.{name}.log_std_db"), "must be >= 0");
            }
            if !class.log_mean_db.is_finite() {
                report.push(&format!("channel_source.synthetic.{name}.log_mean_db"), "must be finite");
            }
        }
    }

    if !config.routing.etx_gamma_th_db.is_finite() {
        report.push("routing.etx_gamma_th_db", "must be finite");
    }
    for (field, grid) in [
        ("sensitivity_grid_dbm", &config.sensitivity_grid_dbm),
        ("gamma_th_grid_db", &config.gamma_th_grid_db),
    ] {
        let ok = grid.start.is_finite() && grid.stop.is_finite() && grid.step > 0.0;
        if !ok || grid.stop < grid.start {
            report.push(field, "grid needs finite bounds, stop >= start and step > 0");
        }
    }
    if config.sinr_decode_threshold_db.is_some_and(|t| !t.is_finite()) {
        report.push("sinr_decode_threshold_db", "must be finite when set");
    }
    if config.fit_families.is_empty() {
        report.push("fit_families", "at least one family is required");
    }
    if config.fit_max_samples < 10 {
        report.push("fit_max_samples", "must be >= 10");
    }
    report
}
