//! Per-link channel gains over time.
//!
//! Gains are kept in dB (`|h|^2` in dB, so received power in dBm is
//! `p_tx + gain_db`). A trace is either ingested from a measurement CSV or
//! synthesized from per-class lognormal fading. Links are stored once per
//! unordered node pair; the reverse direction reads the same series.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{DrawMode, NodeId, RadioConstants, ResolvedTime, Topology};

/// Received power assigned to samples that were not decoded (1 dB below
/// the -100 dBm receive sensitivity).
pub const UNDECODED_RX_POWER_DBM: f64 = -101.0;

pub const TRACE_HEADER: [&str; 4] = ["time_ms", "tx_id", "rx_id", "rssi_dbm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId {
    pub tx: NodeId,
    pub rx: NodeId,
}

impl LinkId {
    /// Panics if `tx == rx`; use [`LinkId::try_new`] for untrusted input.
    pub fn new(tx: NodeId, rx: NodeId) -> Self {
        Self::try_new(tx, rx).expect("a link needs two distinct nodes")
    }

    pub fn try_new(tx: NodeId, rx: NodeId) -> Option<Self> {
        (tx != rx).then_some(Self { tx, rx })
    }

    /// Storage key shared by both directions.
    pub fn canonical(self) -> Self {
        if self.tx <= self.rx {
            self
        } else {
            self.reversed()
        }
    }

    pub fn reversed(self) -> Self {
        Self { tx: self.rx, rx: self.tx }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSample {
    pub time_ms: f64,
    pub gain_db: f64,
}

/// Lognormal fading parameters of one link class, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkClass {
    pub log_mean_db: f64,
    pub log_std_db: f64,
}

impl LinkClass {
    pub const fn new(log_mean_db: f64, log_std_db: f64) -> Self {
        Self { log_mean_db, log_std_db }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    OnBody,
    InterBodyCoordinated,
    Interfering,
}

/// Example defaults: on-body links are a good 15 dB stronger than links
/// between bodies. These are not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkClassParams {
    pub on_body: LinkClass,
    pub inter_body_coordinated: LinkClass,
    pub interfering: LinkClass,
}

impl Default for LinkClassParams {
    fn default() -> Self {
        Self {
            on_body: LinkClass::new(-55.0, 4.0),
            inter_body_coordinated: LinkClass::new(-70.0, 6.0),
            interfering: LinkClass::new(-75.0, 6.0),
        }
    }
}

impl LinkClassParams {
    pub fn uniform(class: LinkClass) -> Self {
        Self { on_body: class, inter_body_coordinated: class, interfering: class }
    }

    pub fn classes(&self) -> [(&'static str, &LinkClass); 3] {
        [
            ("on_body", &self.on_body),
            ("inter_body_coordinated", &self.inter_body_coordinated),
            ("interfering", &self.interfering),
        ]
    }

    pub fn class(&self, kind: LinkKind) -> &LinkClass {
        match kind {
            LinkKind::OnBody => &self.on_body,
            LinkKind::InterBodyCoordinated => &self.inter_body_coordinated,
            LinkKind::Interfering => &self.interfering,
        }
    }
}

pub fn link_kind(topology: &Topology, link: LinkId) -> LinkKind {
    if link.tx.ban == link.rx.ban {
        LinkKind::OnBody
    } else if topology.is_coordinated(link.tx.ban) && topology.is_coordinated(link.rx.ban) {
        LinkKind::InterBodyCoordinated
    } else {
        LinkKind::Interfering
    }
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("unknown link {tx} -> {rx}")]
    UnknownLink { tx: NodeId, rx: NodeId },
    #[error("time {time_ms} ms precedes the first sample of {tx} -> {rx}")]
    TimeBeforeFirstSample { tx: NodeId, rx: NodeId, time_ms: f64 },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot access trace {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed trace row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("trace contains no samples")]
    EmptyTrace,
    #[error("time goes backwards for link {tx} -> {rx} at line {line}")]
    NonMonotonicTime { tx: NodeId, rx: NodeId, line: u64 },
    #[error("trace write failed: {0}")]
    Write(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelTrace {
    links: BTreeMap<LinkId, Vec<GainSample>>,
    /// Spacing between consecutive samples of one link, when known.
    pub sampling_period_ms: Option<f64>,
}

impl ChannelTrace {
    /// Builds a trace from per-link series. Series must be sorted by time;
    /// both directions of a pair map to the same series (last one wins).
    pub fn from_series(
        series: impl IntoIterator<Item = (LinkId, Vec<GainSample>)>,
        sampling_period_ms: Option<f64>,
    ) -> Self {
        let links = series.into_iter().map(|(l, s)| (l.canonical(), s)).collect();
        Self { links, sampling_period_ms }
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn sample_count(&self) -> usize {
        self.links.values().map(Vec::len).sum()
    }

    /// Canonical link ids with their series.
    pub fn iter(&self) -> impl Iterator<Item = (&LinkId, &[GainSample])> {
        self.links.iter().map(|(l, s)| (l, s.as_slice()))
    }

    pub fn series(&self, link: LinkId) -> Option<&[GainSample]> {
        self.links.get(&link.canonical()).map(Vec::as_slice)
    }

    pub fn contains(&self, link: LinkId) -> bool {
        self.links.contains_key(&link.canonical())
    }

    /// Zero-order hold: the latest sample at or before `time_ms`.
    pub fn gain_at(&self, link: LinkId, time_ms: f64) -> Result<f64, ChannelError> {
        let series = self
            .series(link)
            .ok_or(ChannelError::UnknownLink { tx: link.tx, rx: link.rx })?;
        hold(series, time_ms).ok_or(ChannelError::TimeBeforeFirstSample {
            tx: link.tx,
            rx: link.rx,
            time_ms,
        })
    }
}

/// Zero-order hold lookup on a time-sorted series.
pub fn hold(series: &[GainSample], time_ms: f64) -> Option<f64> {
    let idx = series.partition_point(|s| s.time_ms <= time_ms);
    idx.checked_sub(1).map(|i| series[i].gain_db)
}

pub fn load_trace(path: &Path, radio: &RadioConstants) -> Result<ChannelTrace, TraceError> {
    let file = std::fs::File::open(path)
        .map_err(|source| TraceError::Io { path: path.to_path_buf(), source })?;
    read_trace(file, radio)
}

/// Parses the `time_ms,tx_id,rx_id,rssi_dbm` trace format. Undecoded
/// samples (`nan` or blank) become a gain giving -101 dBm at `radio.tx_power_dbm`.
pub fn read_trace<R: Read>(reader: R, radio: &RadioConstants) -> Result<ChannelTrace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let malformed = |line: u64, message: String| TraceError::MalformedRow { line, message };

    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if headers.len() != TRACE_HEADER.len() {
        return Err(malformed(1, format!("expected header {}", TRACE_HEADER.join(","))));
    }

    let undecoded_gain = UNDECODED_RX_POWER_DBM - radio.tx_power_dbm;
    // Per canonical link: (time, row sequence, gain).
    let mut merged: BTreeMap<LinkId, Vec<(f64, usize, f64)>> = BTreeMap::new();
    let mut last_time: BTreeMap<LinkId, f64> = BTreeMap::new();

    for (seq, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(malformed(line, format!("expected 4 columns, found {}", record.len())));
        }
        let time_ms: f64 = record[0]
            .parse()
            .map_err(|_| malformed(line, format!("bad time `{}`", &record[0])))?;
        if !time_ms.is_finite() {
            return Err(malformed(line, format!("non-finite time `{}`", &record[0])));
        }
        let tx: NodeId = record[1].parse().map_err(|e| malformed(line, format!("{e}")))?;
        let rx: NodeId = record[2].parse().map_err(|e| malformed(line, format!("{e}")))?;
        let link = LinkId::try_new(tx, rx)
            .ok_or_else(|| malformed(line, format!("self link {tx} -> {rx}")))?;

        let raw = &record[3];
        let gain_db = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            undecoded_gain
        } else {
            let v: f64 = raw
                .parse()
                .map_err(|_| malformed(line, format!("bad rssi `{raw}`")))?;
            if v.is_finite() {
                v
            } else {
                undecoded_gain
            }
        };

        if let Some(&prev) = last_time.get(&link) {
            if time_ms <= prev {
                return Err(TraceError::NonMonotonicTime { tx, rx, line });
            }
        }
        last_time.insert(link, time_ms);
        merged.entry(link.canonical()).or_default().push((time_ms, seq, gain_db));
    }

    if merged.is_empty() {
        return Err(TraceError::EmptyTrace);
    }

    let mut min_gap = f64::INFINITY;
    let links = merged
        .into_iter()
        .map(|(link, mut rows)| {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut series: Vec<GainSample> = Vec::with_capacity(rows.len());
            for (time_ms, _, gain_db) in rows {
                match series.last_mut() {
                    // Reciprocal rows at the same instant: the later row wins.
                    Some(last) if last.time_ms == time_ms => last.gain_db = gain_db,
                    Some(last) => {
                        min_gap = min_gap.min(time_ms - last.time_ms);
                        series.push(GainSample { time_ms, gain_db });
                    }
                    None => series.push(GainSample { time_ms, gain_db }),
                }
            }
            (link, series)
        })
        .collect();

    Ok(ChannelTrace { links, sampling_period_ms: min_gap.is_finite().then_some(min_gap) })
}

/// Writes a trace in the ingestion format, one row per stored sample, in
/// time order. The RSSI column is the received power at 0 dBm transmit power.
pub fn write_trace<W: Write>(trace: &ChannelTrace, writer: W) -> Result<(), TraceError> {
    let mut rows: Vec<(f64, LinkId, f64)> = trace
        .links
        .iter()
        .flat_map(|(l, s)| s.iter().map(move |g| (g.time_ms, *l, g.gain_db)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    wtr.write_record(TRACE_HEADER)?;
    for (t, link, gain) in rows {
        wtr.write_record([t.to_string(), link.tx.to_string(), link.rx.to_string(), gain.to_string()])?;
    }
    wtr.flush().map_err(|e| TraceError::Write(e.into()))?;
    Ok(())
}

/// Links a simulation can touch: every pair with at least one coordinated
/// endpoint (interfering nodes never receive).
pub fn simulated_links(topology: &Topology) -> Vec<LinkId> {
    let nodes = topology.nodes();
    let mut links = Vec::new();
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            if topology.is_coordinated(a.ban) || topology.is_coordinated(b.ban) {
                links.push(LinkId::new(a, b).canonical());
            }
        }
    }
    links.sort();
    links
}

/// Draws i.i.d. lognormal gains (normal in dB) for every simulated link,
/// once per routing window or once per sampling period.
pub fn synth_trace<R: Rng + ?Sized>(
    params: &LinkClassParams,
    topology: &Topology,
    time: &ResolvedTime,
    mode: DrawMode,
    rng: &mut R,
) -> ChannelTrace {
    let spacing = match mode {
        DrawMode::PerWindow => time.timestamp_window_ms,
        DrawMode::PerSample => time.sampling_period_ms,
    };
    let count = (time.total_time_ms / spacing).round().max(1.0) as usize;

    let links = simulated_links(topology)
        .into_iter()
        .map(|link| {
            let class = params.class(link_kind(topology, link));
            let normal = (class.log_std_db > 0.0)
                .then(|| Normal::new(class.log_mean_db, class.log_std_db).expect("validated sigma"));
            let series = (0..count)
                .map(|k| GainSample {
                    time_ms: k as f64 * spacing,
                    gain_db: normal.map_or(class.log_mean_db, |n| n.sample(rng)),
                })
                .collect();
            (link, series)
        })
        .collect();

    ChannelTrace { links, sampling_period_ms: Some(spacing) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{BanSet, Role, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<ChannelTrace, TraceError> {
        read_trace(text.as_bytes(), &RadioConstants::default())
    }

    const HEADER: &str = "time_ms,tx_id,rx_id,rssi_dbm\n";

    #[test]
    fn nan_rssi_becomes_minus_101() {
        let trace = parse(&format!("{HEADER}1200, 0:Hub, 1:Hub, nan\n")).unwrap();
        let link = LinkId::new(NodeId::hub(0), NodeId::hub(1));
        assert_eq!(trace.series(link).unwrap(), &[GainSample { time_ms: 1200.0, gain_db: -101.0 }]);
    }

    #[test]
    fn nan_gain_tracks_tx_power() {
        let radio = RadioConstants { tx_power_dbm: -5.0, ..Default::default() };
        let trace = read_trace(format!("{HEADER}0,0:Hub,1:Hub,\n").as_bytes(), &radio).unwrap();
        let gain = trace.gain_at(LinkId::new(NodeId::hub(0), NodeId::hub(1)), 0.0).unwrap();
        assert_eq!(gain, -96.0);
    }

    #[test]
    fn plain_row_parses() {
        let trace = parse(&format!("{HEADER}0, 0:Hub, 0:Relay1, -55.0\n")).unwrap();
        let link = LinkId::new(NodeId::hub(0), NodeId::new(0, Role::Relay1));
        assert_eq!(trace.gain_at(link, 0.0).unwrap(), -55.0);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(parse(HEADER), Err(TraceError::EmptyTrace)));
    }

    #[test]
    fn malformed_rows_report_line() {
        match parse(&format!("{HEADER}0,0:Hub,1:Hub,-50\n60,0:Hub,1:Hub\n")) {
            Err(TraceError::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse(&format!("{HEADER}x,0:Hub,1:Hub,-50\n")),
            Err(TraceError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            parse(&format!("{HEADER}0,0:Hub,0:Hub,-50\n")),
            Err(TraceError::MalformedRow { .. })
        ));
    }

    #[test]
    fn backwards_time_is_rejected() {
        let text = format!("{HEADER}60,0:Hub,1:Hub,-50\n0,0:Hub,1:Hub,-52\n");
        assert!(matches!(parse(&text), Err(TraceError::NonMonotonicTime { line: 3, .. })));
    }

    #[test]
    fn reciprocal_rows_merge_and_later_wins() {
        let text = format!("{HEADER}0,0:Hub,1:Hub,-50\n0,1:Hub,0:Hub,-52\n60,1:Hub,0:Hub,-70\n");
        let trace = parse(&text).unwrap();
        assert_eq!(trace.link_count(), 1);
        let ab = LinkId::new(NodeId::hub(0), NodeId::hub(1));
        assert_eq!(trace.gain_at(ab, 0.0).unwrap(), -52.0);
        assert_eq!(trace.gain_at(ab.reversed(), 60.0).unwrap(), -70.0);
        assert_eq!(trace.sampling_period_ms, Some(60.0));
    }

    #[test]
    fn hold_semantics() {
        let link = LinkId::new(NodeId::hub(0), NodeId::hub(1));
        let trace = ChannelTrace::from_series(
            [(
                link,
                vec![
                    GainSample { time_ms: 0.0, gain_db: -50.0 },
                    GainSample { time_ms: 60.0, gain_db: -70.0 },
                ],
            )],
            Some(60.0),
        );
        assert_eq!(trace.gain_at(link, 59.0).unwrap(), -50.0);
        assert_eq!(trace.gain_at(link, 60.0).unwrap(), -70.0);
        assert_eq!(trace.gain_at(link.reversed(), 1e6).unwrap(), -70.0);
        assert!(matches!(
            trace.gain_at(link, -1.0),
            Err(ChannelError::TimeBeforeFirstSample { .. })
        ));
        let absent = LinkId::new(NodeId::hub(0), NodeId::hub(2));
        assert!(matches!(trace.gain_at(absent, 0.0), Err(ChannelError::UnknownLink { .. })));
    }

    fn small_config() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.ban_set = BanSet { coordinated: vec![0, 1], interfering: vec![2] };
        c.time.sampling_period_ms = Some(60.0);
        c.time.timestamp_window_ms = Some(600.0);
        c.time.total_time_ms = 6000.0;
        c
    }

    #[test]
    fn zero_sigma_gives_class_means() {
        let c = small_config();
        let params = LinkClassParams {
            on_body: LinkClass::new(-55.0, 0.0),
            inter_body_coordinated: LinkClass::new(-70.0, 0.0),
            interfering: LinkClass::new(-75.0, 0.0),
        };
        let topo = c.topology();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trace = synth_trace(&params, &topo, &c.resolved_time(), DrawMode::PerWindow, &mut rng);
        for (link, series) in trace.iter() {
            let want = params.class(link_kind(&topo, *link)).log_mean_db;
            assert!(series.iter().all(|s| s.gain_db == want));
        }
        // 6 coordinated nodes + 3 interferers: 36 pairs minus 3 interferer-only pairs.
        assert_eq!(trace.link_count(), 33);
        assert_eq!(trace.sample_count(), 33 * 10);
    }

    #[test]
    fn synthesis_is_seed_deterministic() {
        let c = small_config();
        let topo = c.topology();
        let time = c.resolved_time();
        let params = LinkClassParams::default();
        let a = synth_trace(&params, &topo, &time, DrawMode::PerSample, &mut ChaCha8Rng::seed_from_u64(9));
        let b = synth_trace(&params, &topo, &time, DrawMode::PerSample, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.sample_count(), 33 * 100);
    }

    #[test]
    fn synthetic_moments_match_class() {
        // 1e5 draws of N(-60, 5): 3 standard errors are 0.047 (mean) and 0.034 (std).
        let class = LinkClass::new(-60.0, 5.0);
        let mut c = small_config();
        c.ban_set = BanSet { coordinated: vec![0], interfering: vec![] };
        c.time.total_time_ms = 600.0 * 33_334.0;
        let trace = synth_trace(
            &LinkClassParams::uniform(class),
            &c.topology(),
            &c.resolved_time(),
            DrawMode::PerWindow,
            &mut ChaCha8Rng::seed_from_u64(11),
        );
        let xs: Vec<f64> = trace.iter().flat_map(|(_, s)| s.iter().map(|g| g.gain_db)).collect();
        assert!(xs.len() >= 100_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean + 60.0).abs() < 0.15, "mean {mean}");
        assert!((std - 5.0).abs() < 0.15, "std {std}");
    }

    #[test]
    fn write_then_read_is_identity() {
        let c = small_config();
        let trace = synth_trace(
            &LinkClassParams::default(),
            &c.topology(),
            &c.resolved_time(),
            DrawMode::PerWindow,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let back = read_trace(buf.as_slice(), &RadioConstants::default()).unwrap();
        assert_eq!(back, trace);
    }
}
