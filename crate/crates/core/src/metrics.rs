//! Outage probability, packet delivery ratio, throughput and spectral efficiency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{LinkObs, RouteEvaluation, RouteHop};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    EmptySamples,
    #[error("total time must be positive, got {0} s")]
    NonPositiveTime(f64),
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Spr,
    Cmr,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Spr, Scheme::Cmr];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Spr => "spr",
            Scheme::Cmr => "cmr",
        }
    }

    pub fn gamma_db(self, eval: &RouteEvaluation) -> f64 {
        match self {
            Scheme::Spr => eval.spr.gamma_comb_db,
            Scheme::Cmr => eval.cmr.gamma_comb_db,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spr" => Ok(Scheme::Spr),
            "cmr" => Ok(Scheme::Cmr),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutagePoint {
    pub gamma_th_db: f64,
    pub p_out: f64,
}

/// Empirical `P(gamma < gamma_th)` on a threshold grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutageCurve {
    pub points: Vec<OutagePoint>,
}

impl OutageCurve {
    /// SINR at which the curve first reaches `target`, linearly interpolated
    /// between grid points. `None` if the grid never gets there.
    pub fn sinr_at(&self, target: f64) -> Option<f64> {
        let pts = &self.points;
        let i = pts.iter().position(|p| p.p_out >= target)?;
        if i == 0 {
            return Some(pts[0].gamma_th_db);
        }
        let (a, b) = (pts[i - 1], pts[i]);
        if b.p_out == a.p_out {
            return Some(b.gamma_th_db);
        }
        let f = (target - a.p_out) / (b.p_out - a.p_out);
        Some(a.gamma_th_db + f * (b.gamma_th_db - a.gamma_th_db))
    }
}

pub fn outage_curve(samples_db: &[f64], grid_db: &[f64]) -> Result<OutageCurve, MetricsError> {
    if samples_db.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut sorted = samples_db.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let points = grid_db
        .iter()
        .map(|&th| OutagePoint { gamma_th_db: th, p_out: sorted.partition_point(|&x| x < th) as f64 / n })
        .collect();
    Ok(OutageCurve { points })
}

/// Point-wise arithmetic mean of curves sharing one grid.
pub fn mean_curve(curves: &[OutageCurve]) -> OutageCurve {
    let Some(first) = curves.first() else {
        return OutageCurve::default();
    };
    let n = curves.len() as f64;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| OutagePoint {
            gamma_th_db: p.gamma_th_db,
            p_out: curves.iter().map(|c| c.points[i].p_out).sum::<f64>() / n,
        })
        .collect();
    OutageCurve { points }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdrPoint {
    pub receive_sensitivity_dbm: f64,
    pub pdr: f64,
}

/// Per-link decode rule: received power at or above the sensitivity and,
/// optionally, SINR at or above a decode threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeRule {
    pub sensitivity_dbm: f64,
    pub sinr_threshold_db: Option<f64>,
}

impl DecodeRule {
    pub fn new(sensitivity_dbm: f64) -> Self {
        Self { sensitivity_dbm, sinr_threshold_db: None }
    }

    pub fn decodes(&self, link: &LinkObs) -> bool {
        link.rx_power_dbm >= self.sensitivity_dbm
            && self.sinr_threshold_db.is_none_or(|th| link.sinr_db >= th)
    }

    fn route_hop(&self, hop: &RouteHop) -> bool {
        self.decodes(&hop.direct)
            || hop.relays.iter().any(|r| self.decodes(&r.first) && self.decodes(&r.second))
    }
}

/// Whether the window's packet reaches the destination.
///
/// SPR needs every hub link of its path. For CMR a route-hop gets through
/// if any branch does (both link-hops for a relayed branch), a path needs
/// all its route-hops and the packet needs either path.
pub fn packet_delivered(eval: &RouteEvaluation, scheme: Scheme, rule: &DecodeRule) -> bool {
    match scheme {
        Scheme::Spr => eval.spr.hops.iter().all(|l| rule.decodes(l)),
        Scheme::Cmr => eval.cmr.paths.iter().any(|p| p.hops.iter().all(|h| rule.route_hop(h))),
    }
}

/// Delivered packets per sensitivity, one packet per evaluation.
pub fn delivered_counts(
    evals: &[RouteEvaluation],
    scheme: Scheme,
    sensitivity_grid_dbm: &[f64],
    sinr_threshold_db: Option<f64>,
) -> Vec<usize> {
    sensitivity_grid_dbm
        .iter()
        .map(|&s| {
            let rule = DecodeRule { sensitivity_dbm: s, sinr_threshold_db };
            evals.iter().filter(|e| packet_delivered(e, scheme, &rule)).count()
        })
        .collect()
}

pub fn packet_delivery(
    evals: &[RouteEvaluation],
    scheme: Scheme,
    sensitivity_grid_dbm: &[f64],
    sinr_threshold_db: Option<f64>,
) -> Vec<PdrPoint> {
    let total = evals.len().max(1) as f64;
    delivered_counts(evals, scheme, sensitivity_grid_dbm, sinr_threshold_db)
        .into_iter()
        .zip(sensitivity_grid_dbm)
        .map(|(c, &s)| PdrPoint { receive_sensitivity_dbm: s, pdr: c as f64 / total })
        .collect()
}

/// `P_succ * packet_bits / T`, in bit/s.
pub fn throughput(delivered_packets: f64, packet_bits: u32, total_time_s: f64) -> Result<f64, MetricsError> {
    if !(total_time_s > 0.0) {
        return Err(MetricsError::NonPositiveTime(total_time_s));
    }
    Ok(delivered_packets * packet_bits as f64 / total_time_s)
}

/// Aggregated throughput per hertz, `throughput * coordinated_bans / bandwidth`.
pub fn spectral_efficiency(throughput_bps: f64, coordinated_bans: usize, bandwidth_hz: f64) -> Result<f64, MetricsError> {
    if !(bandwidth_hz > 0.0) {
        return Err(MetricsError::NonPositiveBandwidth(bandwidth_hz));
    }
    Ok(throughput_bps * coordinated_bans as f64 / bandwidth_hz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub throughput_bps: f64,
    pub coordinated_bans: usize,
    pub bandwidth_hz: f64,
    pub spectral_efficiency: f64,
}

impl EfficiencyReport {
    pub fn new(throughput_bps: f64, coordinated_bans: usize, bandwidth_hz: f64) -> Result<Self, MetricsError> {
        Ok(Self {
            throughput_bps,
            coordinated_bans,
            bandwidth_hz,
            spectral_efficiency: spectral_efficiency(throughput_bps, coordinated_bans, bandwidth_hz)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{evaluate_cmr, HubGraph, RouteOptions};
    use crate::scenario::{NodeId, RelaySide, Role};
    use crate::window::{LinkWindowStats, WindowLinks};
    use proptest::prelude::*;

    #[test]
    fn step_curve() {
        let c = outage_curve(&[10.0; 5], &[5.0, 10.0, 15.0]).unwrap();
        let p: Vec<f64> = c.points.iter().map(|p| p.p_out).collect();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        assert_eq!(outage_curve(&[3.0, 4.0], &[-100.0]).unwrap().points[0].p_out, 0.0);
        assert_eq!(outage_curve(&[], &[0.0]), Err(MetricsError::EmptySamples));
    }

    proptest! {
        #[test]
        fn curve_matches_brute_count(xs in proptest::collection::vec(-20.0..50.0f64, 1..300)) {
            let grid: Vec<f64> = (0..=140).map(|i| -20.0 + 0.5 * i as f64).collect();
            let c = outage_curve(&xs, &grid).unwrap();
            for p in &c.points {
                let below = xs.iter().filter(|&&x| x < p.gamma_th_db).count() as f64 / xs.len() as f64;
                prop_assert_eq!(p.p_out, below);
            }
            prop_assert!(c.points.windows(2).all(|w| w[1].p_out >= w[0].p_out));
            prop_assert_eq!(c.points[0].p_out, 0.0);
            prop_assert_eq!(c.points.last().unwrap().p_out, 1.0);
        }
    }

    #[test]
    fn interpolated_outage_point() {
        let c = OutageCurve {
            points: vec![
                OutagePoint { gamma_th_db: 0.0, p_out: 0.0 },
                OutagePoint { gamma_th_db: 1.0, p_out: 0.05 },
                OutagePoint { gamma_th_db: 2.0, p_out: 0.15 },
            ],
        };
        assert!((c.sinr_at(0.1).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(c.sinr_at(0.5), None);
    }

    #[test]
    fn mean_of_curves() {
        let a = outage_curve(&[1.0], &[0.0, 2.0]).unwrap();
        let b = outage_curve(&[3.0], &[0.0, 2.0]).unwrap();
        let m = mean_curve(&[a, b]);
        assert_eq!(m.points[1].p_out, 0.5);
    }

    #[test]
    fn throughput_and_efficiency() {
        assert_eq!(throughput(1000.0, 273, 1.0).unwrap(), 273_000.0);
        assert_eq!(throughput(0.0, 273, 1.0).unwrap(), 0.0);
        assert_eq!(throughput(1.0, 273, 0.0), Err(MetricsError::NonPositiveTime(0.0)));
        // 45 min, 600 ms windows, every window delivered.
        assert!((throughput(4500.0, 273, 2700.0).unwrap() - 455.0).abs() < 1e-9);
        assert!((spectral_efficiency(25_000.0, 4, 1.0e6).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(spectral_efficiency(0.0, 4, 1.0e6).unwrap(), 0.0);
        assert_eq!(spectral_efficiency(1.0, 4, 0.0), Err(MetricsError::NonPositiveBandwidth(0.0)));
    }

    fn h(i: u16) -> NodeId {
        NodeId::hub(i)
    }

    /// Three hubs, route 0 -> 1 -> 2 plus the cooperative branches of hop 0 -> 1.
    fn toy(powers: [f64; 4]) -> RouteEvaluation {
        let mut links = WindowLinks::new();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    links.insert(h(a), h(b), LinkWindowStats::fixed(20.0, -80.0, 0.0));
                }
            }
        }
        links.insert(h(0), h(1), LinkWindowStats::fixed(20.0, powers[0], 0.0));
        let r = NodeId::new(1, Role::Relay1);
        links.insert(h(0), r, LinkWindowStats::fixed(20.0, powers[1], 0.0));
        links.insert(r, h(1), LinkWindowStats::fixed(20.0, powers[2], 0.0));
        links.insert(h(1), h(2), LinkWindowStats::fixed(20.0, powers[3], 0.0));
        // No direct 0 <-> 2 link, so the only path runs through hub 1.
        links.insert(h(0), h(2), LinkWindowStats::ABSENT);
        links.insert(h(2), h(0), LinkWindowStats::ABSENT);
        let g = HubGraph::from_window(vec![h(0), h(1), h(2)], &links);
        evaluate_cmr(&g, &links, h(0), h(2), 0, RouteOptions { relay_side: RelaySide::Rx, ..Default::default() })
            .unwrap()
    }

    #[test]
    fn delivery_matches_boolean_enumeration() {
        let levels = [-99.0, -92.0, -85.0];
        for &a in &levels {
            for &b in &levels {
                for &c in &levels {
                    for &d in &levels {
                        let eval = toy([a, b, c, d]);
                        assert_eq!(eval.spr.path.hubs(), &[h(0), h(1), h(2)]);
                        for s in [-100.0, -95.0, -90.0, -84.0] {
                            let ok = |p: f64| p >= s;
                            let spr = ok(a) && ok(d);
                            let cmr = (ok(a) || (ok(b) && ok(c))) && ok(d);
                            let rule = DecodeRule::new(s);
                            assert_eq!(packet_delivered(&eval, Scheme::Spr, &rule), spr);
                            assert_eq!(packet_delivered(&eval, Scheme::Cmr, &rule), cmr, "{a} {b} {c} {d} @ {s}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pdr_edges() {
        let good = toy([-70.0; 4]);
        let bad = toy([-101.0; 4]);
        let grid = [-100.0];
        for scheme in Scheme::ALL {
            assert_eq!(packet_delivery(&[good.clone()], scheme, &grid, None)[0].pdr, 1.0);
            assert_eq!(packet_delivery(&[bad.clone()], scheme, &grid, None)[0].pdr, 0.0);
        }
    }

    #[test]
    fn sinr_gate() {
        let eval = toy([-70.0; 4]);
        let rule = DecodeRule { sensitivity_dbm: -100.0, sinr_threshold_db: Some(25.0) };
        assert!(!packet_delivered(&eval, Scheme::Spr, &rule));
    }
}
