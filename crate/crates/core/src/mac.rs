//! Duty-cycled TDMA without global coordination.
//!
//! Every node repeats one active burst of `P_trans * t` per cycle. The cycle
//! length follows from the duty cycle, `D_c = active / cycle * 100`. Start
//! offsets are drawn uniformly from the node's idle period, so bursts of
//! different nodes (coordinated or not) can overlap and interfere.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use thiserror::Error;

use crate::scenario::{NodeId, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum MacError {
    #[error("node {0} has no schedule")]
    UnknownNode(NodeId),
    #[error("desired transmitter {tx} is idle at {time_ms} ms")]
    DesiredTxInactive { tx: NodeId, time_ms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleSpec {
    pub duty_cycle_percent: f64,
    pub active_ms: f64,
    pub cycle_ms: f64,
    pub idle_ms: f64,
}

impl DutyCycleSpec {
    pub fn new(duty_cycle_percent: f64, active_ms: f64) -> Self {
        let cycle_ms = active_ms * 100.0 / duty_cycle_percent;
        Self { duty_cycle_percent, active_ms, cycle_ms, idle_ms: cycle_ms - active_ms }
    }

    pub fn for_config(config: &ScenarioConfig, duty_cycle_percent: f64) -> Self {
        Self::new(duty_cycle_percent, config.active_ms())
    }
}

/// Idle span of a fully packed TDMA frame, `(n_d - 1) * P_trans * t`, with
/// `n_d` the coordinated node count. It equals a node's idle period at the
/// top duty cycle `100 / n_d`.
pub fn frame_idle_ms(config: &ScenarioConfig) -> f64 {
    (config.coordinated_node_count() as f64 - 1.0) * config.active_ms()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSchedule {
    pub offset_ms: f64,
    pub active_ms: f64,
    pub cycle_ms: f64,
}

impl NodeSchedule {
    /// Transmitting iff `(t - offset) mod cycle` lies in `[0, active)`.
    pub fn is_active(&self, time_ms: f64) -> bool {
        (time_ms - self.offset_ms).rem_euclid(self.cycle_ms) < self.active_ms
    }

    /// Midpoints of the bursts whose midpoint falls in `[start_ms, end_ms)`.
    pub fn burst_midpoints(&self, start_ms: f64, end_ms: f64) -> impl Iterator<Item = f64> {
        let first = self.offset_ms + 0.5 * self.active_ms;
        let k0 = ((start_ms - first) / self.cycle_ms).ceil();
        let cycle = self.cycle_ms;
        (0..)
            .map(move |i| first + (k0 + i as f64) * cycle)
            .skip_while(move |&t| t < start_ms)
            .take_while(move |&t| t < end_ms)
    }

    /// Total active time inside `[start_ms, end_ms)`.
    pub fn active_time_in(&self, start_ms: f64, end_ms: f64) -> f64 {
        let k0 = ((start_ms - self.offset_ms) / self.cycle_ms).floor() as i64 - 1;
        let mut total = 0.0;
        let mut k = k0;
        loop {
            let a = self.offset_ms + k as f64 * self.cycle_ms;
            if a >= end_ms {
                break;
            }
            let b = a + self.active_ms;
            total += (b.min(end_ms) - a.max(start_ms)).max(0.0);
            k += 1;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaSchedule {
    pub spec: DutyCycleSpec,
    nodes: BTreeMap<NodeId, NodeSchedule>,
}

impl TdmaSchedule {
    pub fn from_offsets(spec: DutyCycleSpec, offsets: impl IntoIterator<Item = (NodeId, f64)>) -> Self {
        let nodes = offsets
            .into_iter()
            .map(|(n, offset_ms)| {
                (n, NodeSchedule { offset_ms, active_ms: spec.active_ms, cycle_ms: spec.cycle_ms })
            })
            .collect();
        Self { spec, nodes }
    }

    pub fn node(&self, node: NodeId) -> Result<&NodeSchedule, MacError> {
        self.nodes.get(&node).ok_or(MacError::UnknownNode(node))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &NodeSchedule)> {
        self.nodes.iter()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        wtr.write_record(["node_id", "offset_ms", "active_ms", "cycle_ms"])?;
        for (n, s) in &self.nodes {
            wtr.write_record([
                n.to_string(),
                s.offset_ms.to_string(),
                s.active_ms.to_string(),
                s.cycle_ms.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draws an independent uniform start offset in `[0, idle_ms]` for every
/// coordinated and interfering node. Interfering BANs share the duty-cycle
/// geometry and differ only in offset.
pub fn build_schedule<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    duty_cycle_percent: f64,
    rng: &mut R,
) -> TdmaSchedule {
    let spec = DutyCycleSpec::for_config(config, duty_cycle_percent);
    let offset = Uniform::new_inclusive(0.0, spec.idle_ms.max(0.0)).expect("finite idle period");
    let offsets: Vec<_> = config.topology().nodes().into_iter().map(|n| (n, offset.sample(rng))).collect();
    TdmaSchedule::from_offsets(spec, offsets)
}

pub fn is_active(schedule: &TdmaSchedule, node: NodeId, time_ms: f64) -> Result<bool, MacError> {
    Ok(schedule.node(node)?.is_active(time_ms))
}

/// Nodes other than the desired transmitter and the victim receiver that are
/// transmitting at `time_ms`. Coordinated nodes whose bursts collide count
/// alongside interfering BANs.
pub fn active_interferers(
    schedule: &TdmaSchedule,
    victim_rx: NodeId,
    desired_tx: NodeId,
    time_ms: f64,
) -> Result<BTreeSet<NodeId>, MacError> {
    if !is_active(schedule, desired_tx, time_ms)? {
        return Err(MacError::DesiredTxInactive { tx: desired_tx, time_ms });
    }
    Ok(schedule
        .iter()
        .filter(|(&n, s)| n != desired_tx && n != victim_rx && s.is_active(time_ms))
        .map(|(&n, _)| n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Role;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one(offset_ms: f64) -> NodeSchedule {
        NodeSchedule { offset_ms, active_ms: 0.6, cycle_ms: 7.2 }
    }

    #[test]
    fn top_duty_cycle_geometry() {
        let config = ScenarioConfig::default();
        let spec = DutyCycleSpec::for_config(&config, 100.0 / 12.0);
        assert!((spec.cycle_ms - 7.2).abs() < 1e-12);
        assert!((spec.idle_ms - 6.6).abs() < 1e-12);
        assert!((frame_idle_ms(&config) - 6.6).abs() < 1e-12);
    }

    #[test]
    fn full_duty_cycle_is_always_on() {
        let spec = DutyCycleSpec::new(100.0, 0.6);
        assert_eq!(spec.idle_ms, 0.0);
        let s = NodeSchedule { offset_ms: 0.0, active_ms: 0.6, cycle_ms: spec.cycle_ms };
        assert!((0..1000).all(|i| s.is_active(i as f64 * 0.0137)));
    }

    #[test]
    fn lowest_duty_cycle_cycle_length() {
        assert!((DutyCycleSpec::new(0.2, 0.6).cycle_ms - 300.0).abs() < 1e-9);
    }

    #[test]
    fn activity_window() {
        let s = one(2.0);
        assert!(s.is_active(2.3));
        assert!(!s.is_active(2.6));
        assert!(s.is_active(9.5));
    }

    #[test]
    fn activity_matches_time_scan() {
        // Brute force: walk two cycles in 1 us steps and rebuild the bursts.
        let s = one(2.0);
        for i in 0..14_400 {
            let t = i as f64 * 1e-3;
            let in_burst = (2.0..2.6).contains(&t) || (9.2..9.8).contains(&t);
            // Ignore samples within float noise of a burst edge.
            let edge = [2.0, 2.6, 9.2, 9.8].iter().any(|e| (t - e).abs() < 1e-9);
            if !edge {
                assert_eq!(s.is_active(t), in_burst, "t = {t}");
            }
        }
    }

    #[test]
    fn burst_midpoints_in_window() {
        let s = one(2.0);
        let mids: Vec<f64> = s.burst_midpoints(0.0, 20.0).collect();
        assert_eq!(mids.len(), 3);
        assert!((mids[0] - 2.3).abs() < 1e-12 && (mids[2] - 16.7).abs() < 1e-12);
        assert!(mids.iter().all(|&t| s.is_active(t)));
        assert_eq!(s.burst_midpoints(2.31, 9.49).count(), 0);
        assert_eq!(s.burst_midpoints(9.5, 9.51).count(), 1);
    }

    #[test]
    fn duty_cycle_identity_over_whole_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dc in [8.3, 5.8, 4.2, 1.7, 0.2, 50.0, 100.0] {
            let spec = DutyCycleSpec::new(dc, 0.6);
            let s = NodeSchedule {
                offset_ms: rng.random_range(0.0..=spec.idle_ms),
                active_ms: 0.6,
                cycle_ms: spec.cycle_ms,
            };
            for cycles in [1.0, 3.0, 17.0] {
                let start = rng.random_range(-50.0..50.0);
                let frac = s.active_time_in(start, start + cycles * spec.cycle_ms) / (cycles * spec.cycle_ms);
                assert!((frac - dc / 100.0).abs() < 1e-9, "dc {dc}: {frac}");
            }
        }
    }

    #[test]
    fn lower_duty_cycle_means_longer_cycle() {
        let dcs = [100.0, 50.0, 8.3, 5.8, 4.2, 1.7, 0.2, 0.1];
        let cycles: Vec<f64> = dcs.iter().map(|&d| DutyCycleSpec::new(d, 0.6).cycle_ms).collect();
        assert!(cycles.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn schedule_covers_all_nodes_within_idle_period() {
        let config = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = build_schedule(&config, 4.2, &mut rng);
        assert_eq!(s.len(), 30);
        assert!(s.iter().all(|(_, n)| n.offset_ms >= 0.0 && n.offset_ms <= s.spec.idle_ms));
        let again = build_schedule(&config, 4.2, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_node_and_idle_desired_tx() {
        let config = ScenarioConfig::default();
        let s = build_schedule(&config, 8.3, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(is_active(&s, NodeId::hub(99), 0.0), Err(MacError::UnknownNode(NodeId::hub(99))));
        let hub = s.node(NodeId::hub(0)).unwrap();
        let idle_t = hub.offset_ms + hub.active_ms + 0.1;
        assert!(matches!(
            active_interferers(&s, NodeId::hub(1), NodeId::hub(0), idle_t),
            Err(MacError::DesiredTxInactive { .. })
        ));
    }

    #[test]
    fn empty_and_forced_overlap() {
        let spec = DutyCycleSpec::new(100.0 / 12.0, 0.6);
        let tx = NodeId::hub(0);
        let rx = NodeId::hub(1);
        let other = NodeId::hub(4);
        let apart = TdmaSchedule::from_offsets(spec, [(tx, 0.0), (rx, 3.0), (other, 5.0)]);
        let aligned = TdmaSchedule::from_offsets(spec, [(tx, 1.0), (rx, 3.0), (other, 1.0)]);
        for k in 0..50 {
            let t = k as f64 * spec.cycle_ms;
            assert!(active_interferers(&apart, rx, tx, t + 0.3).unwrap().is_empty());
            let hit = active_interferers(&aligned, rx, tx, t + 1.3).unwrap();
            assert_eq!(hit.into_iter().collect::<Vec<_>>(), vec![other]);
        }
    }

    #[test]
    fn interferers_match_brute_force() {
        let config = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = build_schedule(&config, 8.3, &mut rng);
        let tx = NodeId::hub(2);
        let rx = NodeId::new(3, Role::Relay1);
        for t in s.node(tx).unwrap().burst_midpoints(0.0, 600.0) {
            let got = active_interferers(&s, rx, tx, t).unwrap();
            let mut want = BTreeSet::new();
            for n in config.topology().nodes() {
                let sch = s.node(n).unwrap();
                let phase = t - sch.offset_ms - ((t - sch.offset_ms) / sch.cycle_ms).floor() * sch.cycle_ms;
                if n != tx && n != rx && phase < sch.active_ms {
                    want.insert(n);
                }
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn collisions_thin_out_with_duty_cycle() {
        // Over 1000 seeded schedules, the chance that a given other node is on
        // air at a hub's burst midpoint must not grow as the duty cycle drops.
        let config = ScenarioConfig::default();
        let tx = NodeId::hub(0);
        let mut freqs = Vec::new();
        for dc in config.duty_cycles() {
            let mut hits = 0usize;
            let mut trials = 0usize;
            for seed in 0..1000u64 {
                let s = build_schedule(&config, dc, &mut ChaCha8Rng::seed_from_u64(seed));
                let t = s.node(tx).unwrap().burst_midpoints(0.0, f64::INFINITY).next().unwrap();
                for (&n, sch) in s.iter() {
                    if n != tx {
                        trials += 1;
                        hits += sch.is_active(t) as usize;
                    }
                }
            }
            freqs.push(hits as f64 / trials as f64);
        }
        assert!(freqs.windows(2).all(|w| w[1] <= w[0]), "{freqs:?}");
        assert!(freqs[0] > 0.05 && *freqs.last().unwrap() < 0.01, "{freqs:?}");
    }
}
