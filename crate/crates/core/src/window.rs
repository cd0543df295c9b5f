//! Per-window link statistics consumed by routing.
//!
//! For every link a route can use, the SINR samples of one routing window
//! are reduced to an outage fraction (for ETX), a power-averaged SINR and a
//! power-averaged received power. [`LinkTable`] is the fast path used by the
//! simulator; it produces the same samples as [`crate::sinr::window_sinrs`].

use std::collections::BTreeMap;

use crate::channel::{hold, ChannelError, ChannelTrace, GainSample, LinkId};
use crate::mac::TdmaSchedule;
use crate::routing::link_outage_db;
use crate::scenario::{NodeId, RelaySide, ScenarioConfig, Topology, Window};
use crate::sinr::{dbm_to_mw, link_sinr, mw_to_dbm, NoiseModel, SinrError, SinrSample};

/// One link over one window. A link without samples has `-inf` SINR and
/// power and outage 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkWindowStats {
    pub sinr_db: f64,
    pub rx_power_dbm: f64,
    pub outage: f64,
    pub samples: usize,
}

impl LinkWindowStats {
    pub const ABSENT: Self =
        Self { sinr_db: f64::NEG_INFINITY, rx_power_dbm: f64::NEG_INFINITY, outage: 1.0, samples: 0 };

    /// Constant link; handy for hand-built topologies.
    pub fn fixed(sinr_db: f64, rx_power_dbm: f64, outage: f64) -> Self {
        Self { sinr_db, rx_power_dbm, outage, samples: 1 }
    }

    pub fn from_samples(samples: &[SinrSample], gamma_th_db: f64) -> Self {
        let sinrs: Vec<f64> = samples.iter().map(|s| s.sinr_db).collect();
        let powers: Vec<f64> = samples.iter().map(|s| s.rx_power_dbm).collect();
        Self::reduce(&sinrs, &powers, gamma_th_db)
    }

    fn reduce(sinrs_db: &[f64], powers_dbm: &[f64], gamma_th_db: f64) -> Self {
        if sinrs_db.is_empty() {
            return Self::ABSENT;
        }
        Self {
            sinr_db: power_mean_db(sinrs_db),
            rx_power_dbm: power_mean_db(powers_dbm),
            outage: link_outage_db(sinrs_db, gamma_th_db),
            samples: sinrs_db.len(),
        }
    }
}

/// Mean in the linear domain, returned in dB. Equal inputs come back unchanged.
pub fn power_mean_db(values_db: &[f64]) -> f64 {
    let first = values_db[0];
    if values_db.iter().all(|&v| v == first) {
        return first;
    }
    let mean = values_db.iter().map(|&v| dbm_to_mw(v)).sum::<f64>() / values_db.len() as f64;
    mw_to_dbm(mean)
}

/// Directed link statistics of one window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowLinks {
    links: BTreeMap<(NodeId, NodeId), LinkWindowStats>,
}

impl WindowLinks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tx: NodeId, rx: NodeId, stats: LinkWindowStats) {
        self.links.insert((tx, rx), stats);
    }

    /// Missing links read as absent.
    pub fn get(&self, tx: NodeId, rx: NodeId) -> LinkWindowStats {
        self.links.get(&(tx, rx)).copied().unwrap_or(LinkWindowStats::ABSENT)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &LinkWindowStats)> {
        self.links.iter()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// Directed links a route-hop between any two coordinated hubs may use:
/// the hub link and both hops of each relay branch.
pub fn routing_links(topology: &Topology, side: RelaySide) -> Vec<LinkId> {
    let hubs = topology.hubs();
    let mut out = Vec::new();
    for &a in &hubs {
        for &b in &hubs {
            if a == b {
                continue;
            }
            out.push(LinkId::new(a, b));
            let relay_ban = match side {
                RelaySide::Rx => b.ban,
                RelaySide::Tx => a.ban,
            };
            for r in Topology::relays_of(relay_ban) {
                out.push(LinkId::new(a, r));
                out.push(LinkId::new(r, b));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Reference path: runs [`crate::sinr::window_sinrs`] for each link.
pub fn window_links_reference(
    trace: &ChannelTrace,
    schedule: &TdmaSchedule,
    config: &ScenarioConfig,
    links: &[LinkId],
    window: &Window,
) -> Result<WindowLinks, SinrError> {
    let mut out = WindowLinks::new();
    for &link in links {
        let samples = crate::sinr::window_sinrs(trace, schedule, config, link, window)?;
        out.insert(link.tx, link.rx, LinkWindowStats::from_samples(&samples, config.routing.etx_gamma_th_db));
    }
    Ok(out)
}

/// Index-based view of one trial (trace + schedule) for fast per-window
/// evaluation of many links.
pub struct LinkTable<'a> {
    nodes: Vec<NodeId>,
    offsets: Vec<f64>,
    active_ms: f64,
    cycle_ms: f64,
    /// `gains[a * n + b]`, symmetric.
    gains: Vec<Option<&'a [GainSample]>>,
    links: Vec<(usize, usize)>,
    p_tx_dbm: f64,
    noise: NoiseModel,
    gamma_th_db: f64,
}

impl<'a> LinkTable<'a> {
    pub fn new(
        trace: &'a ChannelTrace,
        schedule: &TdmaSchedule,
        config: &ScenarioConfig,
        links: &[LinkId],
    ) -> Result<Self, SinrError> {
        // Sorted node order keeps interference sums in the same order as the reference path.
        let nodes: Vec<NodeId> = schedule.iter().map(|(&n, _)| n).collect();
        let offsets = schedule.iter().map(|(_, s)| s.offset_ms).collect();
        let n = nodes.len();
        let index = |node: NodeId| {
            nodes
                .binary_search(&node)
                .map_err(|_| SinrError::Mac(crate::mac::MacError::UnknownNode(node)))
        };
        let mut gains = vec![None; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    gains[a * n + b] = trace.series(LinkId::new(nodes[a], nodes[b]));
                }
            }
        }
        let links = links
            .iter()
            .map(|l| Ok((index(l.tx)?, index(l.rx)?)))
            .collect::<Result<Vec<_>, SinrError>>()?;
        Ok(Self {
            nodes,
            offsets,
            active_ms: schedule.spec.active_ms,
            cycle_ms: schedule.spec.cycle_ms,
            gains,
            links,
            p_tx_dbm: config.radio.tx_power_dbm,
            noise: NoiseModel { noise_power_dbm: config.radio.noise_power_dbm },
            gamma_th_db: config.routing.etx_gamma_th_db,
        })
    }

    fn gain(&self, tx: usize, rx: usize, time_ms: f64) -> Result<f64, ChannelError> {
        let (a, b) = (self.nodes[tx], self.nodes[rx]);
        let series = self.gains[tx * self.nodes.len() + rx]
            .ok_or(ChannelError::UnknownLink { tx: a, rx: b })?;
        hold(series, time_ms).ok_or(ChannelError::TimeBeforeFirstSample { tx: a, rx: b, time_ms })
    }

    fn is_active(&self, node: usize, time_ms: f64) -> bool {
        (time_ms - self.offsets[node]).rem_euclid(self.cycle_ms) < self.active_ms
    }

    /// Statistics of every configured link over `window`.
    pub fn window(&self, window: &Window) -> Result<WindowLinks, SinrError> {
        let n = self.nodes.len();
        // Burst instants and on-air nodes, per transmitter, computed once.
        let mut bursts: Vec<Option<Vec<(f64, Vec<usize>)>>> = vec![None; n];
        let mut out = WindowLinks::new();
        let mut sinrs = Vec::new();
        let mut powers = Vec::new();
        let mut interferer_gains = Vec::new();
        for &(tx, rx) in &self.links {
            if bursts[tx].is_none() {
                let schedule = crate::mac::NodeSchedule {
                    offset_ms: self.offsets[tx],
                    active_ms: self.active_ms,
                    cycle_ms: self.cycle_ms,
                };
                let list = schedule
                    .burst_midpoints(window.start_ms, window.end_ms)
                    .map(|t| (t, (0..n).filter(|&j| j != tx && self.is_active(j, t)).collect()))
                    .collect();
                bursts[tx] = Some(list);
            }
            sinrs.clear();
            powers.clear();
            for (t, on_air) in bursts[tx].as_ref().expect("filled above") {
                let desired = self.gain(tx, rx, *t)?;
                interferer_gains.clear();
                for &j in on_air {
                    if j != rx {
                        interferer_gains.push(self.gain(j, rx, *t)?);
                    }
                }
                sinrs.push(link_sinr(self.p_tx_dbm, desired, &interferer_gains, self.noise));
                powers.push(self.p_tx_dbm + desired);
            }
            out.insert(
                self.nodes[tx],
                self.nodes[rx],
                LinkWindowStats::reduce(&sinrs, &powers, self.gamma_th_db),
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synth_trace, LinkClassParams};
    use crate::mac::build_schedule;
    use crate::scenario::DrawMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fast_table_equals_reference() {
        let mut config = ScenarioConfig::default();
        config.time.total_time_ms = 3000.0;
        let topo = config.topology();
        let time = config.resolved_time();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trace = synth_trace(&LinkClassParams::default(), &topo, &time, DrawMode::PerSample, &mut rng);
        let links = routing_links(&topo, RelaySide::Rx);
        assert_eq!(links.len(), 12 + 8 + 24);
        for dc in [8.3, 1.7, 0.2] {
            let schedule = build_schedule(&config, dc, &mut rng);
            let table = LinkTable::new(&trace, &schedule, &config, &links).unwrap();
            for w in time.windows() {
                let fast = table.window(&w).unwrap();
                let slow = window_links_reference(&trace, &schedule, &config, &links, &w).unwrap();
                assert_eq!(fast, slow, "dc {dc} window {}", w.index);
            }
        }
    }

    #[test]
    fn missing_link_is_reported() {
        let config = ScenarioConfig::default();
        let trace = ChannelTrace::default();
        let schedule = build_schedule(&config, 8.3, &mut ChaCha8Rng::seed_from_u64(1));
        let links = routing_links(&config.topology(), RelaySide::Rx);
        let table = LinkTable::new(&trace, &schedule, &config, &links).unwrap();
        let err = table.window(&config.resolved_time().window(0)).unwrap_err();
        assert!(matches!(err, SinrError::Channel(ChannelError::UnknownLink { .. })));
    }

    #[test]
    fn power_mean_is_linear() {
        assert_eq!(power_mean_db(&[7.0, 7.0]), 7.0);
        let m = power_mean_db(&[0.0, 10.0]);
        assert!((m - 10.0 * 5.5f64.log10()).abs() < 1e-12);
    }
}
