//! Instantaneous SINR of a link.
//!
//! `gamma = p_tx |h_sd|^2 / (sum_i p_tx |h_i,d|^2 + nu^2)`, evaluated in
//! linear milliwatts. Every transmitter uses the same power.

use thiserror::Error;

use crate::channel::{ChannelError, ChannelTrace, LinkId};
use crate::mac::{active_interferers, MacError, TdmaSchedule};
use crate::scenario::{ScenarioConfig, Window};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub noise_power_dbm: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { noise_power_dbm: -100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub link: LinkId,
    pub time_ms: f64,
    pub sinr_db: f64,
    pub rx_power_dbm: f64,
}

#[derive(Debug, Error)]
pub enum SinrError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mac(#[from] MacError),
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// SINR in dB. With no interferers this is the SNR, `p_tx + gain - noise`.
pub fn link_sinr(p_tx_dbm: f64, desired_gain_db: f64, interferer_gains_db: &[f64], noise: NoiseModel) -> f64 {
    if interferer_gains_db.is_empty() {
        return p_tx_dbm + desired_gain_db - noise.noise_power_dbm;
    }
    let interference: f64 = interferer_gains_db.iter().map(|g| dbm_to_mw(p_tx_dbm + g)).sum();
    let signal = dbm_to_mw(p_tx_dbm + desired_gain_db);
    mw_to_dbm(signal / (interference + dbm_to_mw(noise.noise_power_dbm)))
}

/// SINR samples of `link` at the midpoints of its transmitter's bursts inside
/// `window`. A window in which the transmitter never fires yields no samples.
pub fn window_sinrs(
    trace: &ChannelTrace,
    schedule: &TdmaSchedule,
    config: &ScenarioConfig,
    link: LinkId,
    window: &Window,
) -> Result<Vec<SinrSample>, SinrError> {
    let p_tx = config.radio.tx_power_dbm;
    let noise = NoiseModel { noise_power_dbm: config.radio.noise_power_dbm };
    let tx = schedule.node(link.tx)?;
    let mut out = Vec::new();
    let mut gains = Vec::new();
    for time_ms in tx.burst_midpoints(window.start_ms, window.end_ms) {
        let desired = trace.gain_at(link, time_ms)?;
        gains.clear();
        for i in active_interferers(schedule, link.rx, link.tx, time_ms)? {
            gains.push(trace.gain_at(LinkId::new(i, link.rx), time_ms)?);
        }
        out.push(SinrSample {
            link,
            time_ms,
            sinr_db: link_sinr(p_tx, desired, &gains, noise),
            rx_power_dbm: p_tx + desired,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{GainSample, LinkClass, LinkClassParams};
    use crate::mac::{build_schedule, DutyCycleSpec};
    use crate::scenario::{BanSet, NodeId, Role};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const NOISE: NoiseModel = NoiseModel { noise_power_dbm: -100.0 };

    #[test]
    fn snr_without_interference() {
        assert_eq!(link_sinr(0.0, -60.0, &[], NOISE), 40.0);
    }

    #[test]
    fn equal_interferer_is_near_zero_db() {
        // 1e-6 / (1e-6 + 1e-10) in dB.
        let want = 10.0 * (1e-6f64 / (1e-6 + 1e-10)).log10();
        let got = link_sinr(0.0, -60.0, &[-60.0], NOISE);
        assert!((got - want).abs() < 1e-12);
        assert!((got + 0.000_434_3).abs() < 1e-6);
    }

    #[test]
    fn undecoded_sample_against_noise_floor() {
        assert_eq!(link_sinr(0.0, -101.0, &[], NOISE), -1.0);
    }

    proptest! {
        #[test]
        fn adding_interference_never_helps(
            p in -10.0..10.0f64, g in -110.0..-30.0f64,
            ints in proptest::collection::vec(-120.0..-30.0f64, 0..6),
            extra in -120.0..-30.0f64,
        ) {
            let base = link_sinr(p, g, &ints, NOISE);
            let mut more = ints.clone();
            more.push(extra);
            prop_assert!(link_sinr(p, g, &more, NOISE) <= base + 1e-12);
            prop_assert!(base <= p + g - NOISE.noise_power_dbm + 1e-12);
        }

        #[test]
        fn stronger_signal_strictly_helps(
            g in -110.0..-30.0f64, dg in 0.01..20.0f64,
            ints in proptest::collection::vec(-120.0..-30.0f64, 0..6),
        ) {
            prop_assert!(link_sinr(0.0, g + dg, &ints, NOISE) > link_sinr(0.0, g, &ints, NOISE));
        }

        #[test]
        fn snr_is_a_db_identity(p in -20.0..20.0f64, g in -120.0..0.0f64, n in -120.0..-60.0f64) {
            let noise = NoiseModel { noise_power_dbm: n };
            prop_assert!((link_sinr(p, g, &[], noise) - (p + g - n)).abs() < 1e-9);
        }
    }

    fn toy_config() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.ban_set = BanSet { coordinated: vec![0], interfering: vec![] };
        c.time.timestamp_window_ms = Some(600.0);
        c.time.total_time_ms = 1200.0;
        c
    }

    #[test]
    fn idle_transmitter_gives_empty_window() {
        let c = toy_config();
        let spec = DutyCycleSpec::new(0.1, 0.6); // 600 ms cycle
        let hub = NodeId::hub(0);
        let r1 = NodeId::new(0, Role::Relay1);
        let r2 = NodeId::new(0, Role::Relay2);
        let schedule = TdmaSchedule::from_offsets(spec, [(hub, 500.0), (r1, 0.0), (r2, 0.0)]);
        let link = LinkId::new(hub, r1);
        let trace = ChannelTrace::from_series(
            [(link, vec![GainSample { time_ms: 0.0, gain_db: -50.0 }])],
            None,
        );
        let w = crate::scenario::Window { index: 0, start_ms: 0.0, end_ms: 400.0 };
        assert!(window_sinrs(&trace, &schedule, &c, link, &w).unwrap().is_empty());
    }

    #[test]
    fn constant_channel_gives_snr() {
        let c = toy_config();
        let params = LinkClassParams::uniform(LinkClass::new(-55.0, 0.0));
        let topo = c.topology();
        let time = c.resolved_time();
        let trace = crate::channel::synth_trace(&params, &topo, &time, c.synthetic_draw, &mut ChaCha8Rng::seed_from_u64(1));
        // One BAN at 100% overlap would interfere; keep the relays out of the hub's bursts.
        let spec = DutyCycleSpec::new(8.3, 0.6);
        let hub = NodeId::hub(0);
        let r1 = NodeId::new(0, Role::Relay1);
        let r2 = NodeId::new(0, Role::Relay2);
        let schedule = TdmaSchedule::from_offsets(spec, [(hub, 0.0), (r1, 2.0), (r2, 4.0)]);
        let samples = window_sinrs(&trace, &schedule, &c, LinkId::new(hub, r1), &time.window(1)).unwrap();
        assert_eq!(samples.len(), 83);
        assert!(samples.iter().all(|s| s.sinr_db == 45.0 && s.rx_power_dbm == -55.0));
    }

    #[test]
    fn window_matches_per_instant_recomputation() {
        // Three nodes, random offsets at 50% duty cycle so bursts collide often.
        let c = toy_config();
        let topo = c.topology();
        let time = c.resolved_time();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trace = crate::channel::synth_trace(
            &LinkClassParams::default(),
            &topo,
            &time,
            crate::scenario::DrawMode::PerSample,
            &mut rng,
        );
        let schedule = build_schedule(&c, 50.0, &mut rng);
        let hub = NodeId::hub(0);
        let r1 = NodeId::new(0, Role::Relay1);
        let r2 = NodeId::new(0, Role::Relay2);
        let link = LinkId::new(r1, hub);
        for w in time.windows() {
            let got = window_sinrs(&trace, &schedule, &c, link, &w).unwrap();
            let mut want = Vec::new();
            let on = |n: NodeId, t: f64| {
                let s = schedule.node(n).unwrap();
                let mut k = 0.0;
                while s.offset_ms + (k + 1.0) * s.cycle_ms <= t {
                    k += 1.0;
                }
                t >= s.offset_ms + k * s.cycle_ms && t < s.offset_ms + k * s.cycle_ms + s.active_ms
            };
            let s = schedule.node(r1).unwrap();
            let mut t = s.offset_ms + 0.5 * s.active_ms;
            while t < w.end_ms {
                if t >= w.start_ms {
                    let g = |a: NodeId| {
                        let series = trace.series(LinkId::new(a, hub)).unwrap();
                        series.iter().rev().find(|x| x.time_ms <= t).unwrap().gain_db
                    };
                    let signal = 10f64.powf(g(r1) / 10.0);
                    let interference = if on(r2, t) { 10f64.powf(g(r2) / 10.0) } else { 0.0 };
                    let gamma = if interference == 0.0 {
                        g(r1) + 100.0
                    } else {
                        10.0 * (signal / (interference + 1e-10)).log10()
                    };
                    want.push((t, gamma));
                }
                t += s.cycle_ms;
            }
            assert_eq!(got.len(), want.len());
            for (a, (t, gamma)) in got.iter().zip(want) {
                assert!((a.time_ms - t).abs() < 1e-9);
                assert!((a.sinr_db - gamma).abs() < 1e-9, "{} vs {gamma}", a.sinr_db);
            }
        }
    }
}
