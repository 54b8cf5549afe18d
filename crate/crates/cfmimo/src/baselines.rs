//! Cellular massive MIMO and small-cell baselines.
//!
//! Both run under the identical aging and estimation model as the cell-free
//! system so that architecture is the only difference in a comparison:
//!
//! - cellular: one base station at the area center carrying the whole
//!   antenna budget, centralized MMSE combining (the cell-free engine with
//!   M = 1); the per-AP speed spread degenerates, every UE ages at its mean
//!   speed;
//! - small cells: M single-antenna APs, each UE decoded only from its
//!   nearest AP's scalar observation, every other UE's signal at that AP
//!   treated as noise-like interference.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{evolve_block, EstimateSet};
use crate::error::{Error, Result};
use crate::numerics::{stream_id, Mat, RngStream, StreamPurpose};
use crate::scenario::{CorrelationProfile, Deployment, ScenarioConfig};
use crate::uplink::{run_mc_with_dropper, validate_probe_times, McRun};

/// Which baseline architecture a run represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMode {
    Cellular,
    SmallCell,
}

/// The cellular variant of a cell-free scenario: a single BS at the area
/// center with the full antenna budget `M*N`. The speed spread is
/// meaningless with one AP, so delta is dropped.
pub fn cellular_config(cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    out.ap_count = 1;
    out.antennas_per_ap = cfg.total_antennas();
    out.delta = 0.0;
    out.validate()?;
    Ok(out)
}

fn center_dropper(cfg: &ScenarioConfig) -> impl Fn(u64, usize) -> Result<Deployment> + Sync + '_ {
    move |seed, drop_index| {
        let mut ue_rng = RngStream::new(seed, stream_id(StreamPurpose::UePositions, drop_index, 0));
        let mut vel_rng = RngStream::new(seed, stream_id(StreamPurpose::Velocities, drop_index, 0));
        let side = cfg.area_side;
        let ue_pos = (0..cfg.ue_count)
            .map(|_| Complex64::new(ue_rng.uniform(0.0, side), ue_rng.uniform(0.0, side)))
            .collect();
        let center = Complex64::new(side / 2.0, side / 2.0);
        Deployment::from_positions(cfg, vec![center], ue_pos, &mut vel_rng)
    }
}

/// Monte Carlo run of the cellular baseline. UE drops come from the same
/// substream as the cell-free engine, so a comparison at equal seed sees
/// identical user positions.
pub fn run_cellular_mc(
    cfg: &ScenarioConfig,
    drops: usize,
    trials: usize,
    probe_times: &[usize],
    seed: u64,
) -> Result<McRun> {
    let cell = cellular_config(cfg)?;
    let dropper = center_dropper(&cell);
    run_mc_with_dropper(&cell, drops, trials, probe_times, seed, &dropper)
}

/// Serving AP per UE under nearest-AP association; ties break to the lowest
/// AP index.
pub fn nearest_ap(dep: &Deployment) -> Vec<usize> {
    dep.ue_pos
        .iter()
        .map(|ue| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (m, ap) in dep.ap_pos.iter().enumerate() {
                let d = (ap - ue).norm();
                if d < best_d {
                    best = m;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Monte Carlo run of the small-cell baseline: scalar MMSE processing at
/// each UE's serving AP.
pub fn run_smallcell_mc(
    cfg: &ScenarioConfig,
    drops: usize,
    trials: usize,
    probe_times: &[usize],
    seed: u64,
) -> Result<McRun> {
    run_smallcell_with_dropper(cfg, drops, trials, probe_times, seed, &|s, d| {
        Deployment::drop_uniform(cfg, s, d)
    })
}

pub fn run_smallcell_with_dropper(
    cfg: &ScenarioConfig,
    drops: usize,
    trials: usize,
    probe_times: &[usize],
    seed: u64,
    dropper: &(dyn Fn(u64, usize) -> Result<Deployment> + Sync),
) -> Result<McRun> {
    if cfg.antennas_per_ap != 1 {
        return Err(Error::config(
            "antennas_per_ap",
            "the small-cell baseline uses single-antenna APs",
        ));
    }
    validate_probe_times(cfg, probe_times)?;
    if drops == 0 || trials == 0 {
        return Err(Error::domain(
            "run_smallcell_mc",
            "drop and trial counts must be at least 1",
        ));
    }
    let deployments: Vec<Deployment> = (0..drops)
        .map(|d| dropper(seed, d))
        .collect::<Result<_>>()?;
    let profiles: Vec<CorrelationProfile> = deployments
        .iter()
        .map(|dep| CorrelationProfile::new(cfg, dep))
        .collect();
    let serving: Vec<Vec<usize>> = deployments.iter().map(nearest_ap).collect();

    // same block times as the cell-free engine so trial streams line up
    let mut block_times: Vec<usize> = (1..=cfg.pilot_len)
        .filter(|&p| !cfg.pilot_slots[p - 1].is_empty())
        .collect();
    block_times.push(cfg.pilot_len);
    block_times.extend_from_slice(probe_times);
    block_times.sort_unstable();
    block_times.dedup();

    let items: Vec<(usize, usize)> = (0..drops)
        .flat_map(|d| (0..trials).map(move |t| (d, t)))
        .collect();
    let per_item: Vec<Mat> = items
        .par_iter()
        .map(|&(d, t)| {
            smallcell_trial(
                cfg,
                &deployments[d],
                &profiles[d],
                &serving[d],
                &block_times,
                probe_times,
                RngStream::new(seed, stream_id(StreamPurpose::Trial, d, t)),
            )
        })
        .collect::<Result<_>>()?;

    let k_count = cfg.ue_count;
    let mut per_drop = Vec::with_capacity(drops);
    let mut mean = Mat::zeros(probe_times.len(), k_count);
    for d in 0..drops {
        let mut drop_mean = Mat::zeros(probe_times.len(), k_count);
        for t in 0..trials {
            let item = &per_item[d * trials + t];
            for ti in 0..probe_times.len() {
                for k in 0..k_count {
                    drop_mean[(ti, k)] += item[(ti, k)] / trials as f64;
                }
            }
        }
        for ti in 0..probe_times.len() {
            for k in 0..k_count {
                mean[(ti, k)] += drop_mean[(ti, k)] / drops as f64;
            }
        }
        per_drop.push(drop_mean);
    }
    Ok(McRun {
        probe_times: probe_times.to_vec(),
        mean_sinr: mean,
        per_drop,
        drops,
        trials,
        seed,
    })
}

fn smallcell_trial(
    cfg: &ScenarioConfig,
    dep: &Deployment,
    profile: &CorrelationProfile,
    serving: &[usize],
    block_times: &[usize],
    probe_times: &[usize],
    mut rng: RngStream,
) -> Result<Mat> {
    let block = evolve_block(profile, &mut rng, cfg.pilot_len, block_times, 1)?;
    let est = EstimateSet::from_pilots(cfg, dep, profile, &block, &mut rng)?;
    let mut out = Mat::zeros(probe_times.len(), cfg.ue_count);
    for (ti, &n) in probe_times.iter().enumerate() {
        let lag = (n - cfg.pilot_len) as i64;
        for k in 0..cfg.ue_count {
            let m = serving[k];
            let rho = profile.rho(m, k, lag);
            let r2 = rho * rho;
            let beta = dep.beta[(m, k)];
            let ek = cfg.data_energy[k];
            let h2 = est.h_hat(m, k)[0].norm_sqr();
            let signal = ek * beta * est.a(m, k) * est.a(m, k) * r2 * h2;
            // own estimation error and aging, plus every other UE at full
            // power, plus noise
            let mut denom =
                ek * beta * (est.a_bar_sq(m, k) * r2 + (1.0 - r2).max(0.0)) + cfg.noise_power;
            for l in 0..cfg.ue_count {
                if l != k {
                    denom += cfg.data_energy[l] * dep.beta[(m, l)];
                }
            }
            out[(ti, k)] = signal / denom;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uplink::run_monte_carlo;

    #[test]
    fn cellular_uses_full_antenna_budget_at_center() {
        let cfg = ScenarioConfig::uniform(8, 2, 3, 64, 4, 100.0, 1.0, 10.0, 0.5).unwrap();
        let cell = cellular_config(&cfg).unwrap();
        assert_eq!(cell.ap_count, 1);
        assert_eq!(cell.antennas_per_ap, 16);
        assert_eq!(cell.delta, 0.0);
        let dropper = center_dropper(&cell);
        let dep = dropper(3, 0).unwrap();
        assert_eq!(dep.ap_pos[0], Complex64::new(0.5, 0.5));
        // delta dropped: relative speed equals the mean speed exactly
        for k in 0..3 {
            assert_eq!(dep.v_rel[(0, k)], 10.0);
        }
    }

    #[test]
    fn cellular_matches_cf_engine_on_equivalent_config() {
        // the baseline is the cell-free engine run at M=1 with a centered
        // AP; pinning that here keeps the code paths shared
        let cfg = ScenarioConfig::uniform(4, 2, 2, 64, 4, 100.0, 1.0, 20.0, 0.0).unwrap();
        let a = run_cellular_mc(&cfg, 2, 3, &[5, 64], 11).unwrap();
        let cell = cellular_config(&cfg).unwrap();
        let dropper = center_dropper(&cell);
        let b = run_mc_with_dropper(&cell, 2, 3, &[5, 64], 11, &dropper).unwrap();
        assert_eq!(a.mean_sinr, b.mean_sinr);
    }

    #[test]
    fn cellular_flat_at_zero_speed() {
        let cfg = ScenarioConfig::uniform(4, 1, 2, 64, 4, 100.0, 1.0, 0.0, 0.0).unwrap();
        let run = run_cellular_mc(&cfg, 2, 4, &[5, 16, 64], 7).unwrap();
        for k in 0..2 {
            let first = run.mean_sinr[(0, k)];
            for ti in 1..3 {
                assert!((run.mean_sinr[(ti, k)] / first - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nearest_ap_tie_breaks_to_lowest_index() {
        let cfg = ScenarioConfig::uniform(2, 1, 1, 64, 4, 100.0, 1.0, 0.0, 0.0).unwrap();
        // both APs equidistant from the UE
        let dep = Deployment::from_positions_and_velocities(
            &cfg,
            vec![Complex64::new(0.3, 0.5), Complex64::new(0.7, 0.5)],
            vec![Complex64::new(0.5, 0.5)],
            Mat::zeros(2, 1),
        )
        .unwrap();
        assert_eq!(nearest_ap(&dep), vec![0]);
    }

    #[test]
    fn smallcell_requires_single_antenna_aps() {
        let cfg = ScenarioConfig::uniform(4, 2, 2, 64, 4, 100.0, 1.0, 0.0, 0.0).unwrap();
        assert!(run_smallcell_mc(&cfg, 1, 1, &[5], 1).is_err());
    }

    #[test]
    fn single_ap_single_ue_smallcell_equals_cellular() {
        // with M = K = 1 and the AP pinned to the center, the scalar
        // small-cell SINR and the cellular SINR are the same quantity
        let cfg = ScenarioConfig::uniform(1, 1, 1, 64, 4, 100.0, 1.0, 30.0, 0.0).unwrap();
        let cell = cellular_config(&cfg).unwrap();
        let dropper = center_dropper(&cell);
        let sc = run_smallcell_with_dropper(&cfg, 2, 5, &[5, 16, 64], 3, &dropper).unwrap();
        let cel = run_mc_with_dropper(&cell, 2, 5, &[5, 16, 64], 3, &dropper).unwrap();
        for ti in 0..3 {
            let (a, b) = (sc.mean_sinr[(ti, 0)], cel.mean_sinr[(ti, 0)]);
            assert!((a / b - 1.0).abs() < 1e-9, "smallcell {a} vs cellular {b}");
        }
    }

    #[test]
    fn smallcell_below_cellfree_at_desk_scale() {
        // same drops, same channel seeds; distributed MMSE combining beats
        // nearest-AP scalar processing
        let cfg = ScenarioConfig::uniform(16, 1, 4, 64, 4, 100.0, 1.0, 10.0, 0.0).unwrap();
        let cf = run_monte_carlo(&cfg, 3, 5, &[5, 64], 21).unwrap();
        let sc = run_smallcell_mc(&cfg, 3, 5, &[5, 64], 21).unwrap();
        for ti in 0..2 {
            for k in 0..4 {
                assert!(
                    cf.mean_sinr[(ti, k)] > sc.mean_sinr[(ti, k)],
                    "t={ti} k={k}: cf {} <= sc {}",
                    cf.mean_sinr[(ti, k)],
                    sc.mean_sinr[(ti, k)]
                );
            }
        }
    }
}
