//! Link-level Monte Carlo engine: concatenated receive model, conditional
//! covariance, MMSE combining, and the per-realization SINR decomposition.
//!
//! Conditioned on the estimates, the decoded sample for user k splits into
//! five parts: desired signal, residual multi-user interference through the
//! known channels, carried-over estimation error, aging innovation, and
//! noise. `compute_conditional_sinr` evaluates the expected power of each
//! part analytically (expectations over symbols, estimation errors,
//! innovations, and noise); `mmse_combine_and_decode` produces one realized
//! decoded sample so the analytic powers can be cross-checked by brute
//! force.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{aged_true_channel, evolve_block, ChannelBlock, EstimateSet};
use crate::error::{Error, Result};
use crate::numerics::{
    cdot, norm_sqr, sample_complex_gaussian, stream_id, CholeskyFactor, HermitianMatrix, Mat,
    RngStream, StreamPurpose,
};
use crate::scenario::{CorrelationProfile, Deployment, ScenarioConfig};

/// Effective channels and per-AP noise-plus-interference levels at one
/// data-phase time index.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub time: usize,
    pub n_ant: usize,
    pub noise_power: f64,
    /// `g_hat[k]`: the MN-dimensional known effective channel of UE k; block
    /// m is `rho_mk[n-P] a_mk sqrt(E_usk beta_mk) h_hat_mk`.
    pub g_hat: Vec<Vec<Complex64>>,
    /// Per-AP diagonal level `psi_m = d2_m + d3_m + N0`.
    pub psi: Vec<f64>,
    /// Per-AP estimation-error power `sum_l E_usl beta_ml abar_ml^2 rho_ml^2`.
    pub d2: Vec<f64>,
    /// Per-AP aging power `sum_l E_usl beta_ml rhobar_ml^2`.
    pub d3: Vec<f64>,
}

/// The five power terms of the uplink SINR and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrBreakdown {
    pub eta_s: f64,
    pub eta_1: f64,
    pub eta_2: f64,
    pub eta_3: f64,
    pub eta_w: f64,
    pub sinr: f64,
}

impl SinrBreakdown {
    pub fn new(eta_s: f64, eta_1: f64, eta_2: f64, eta_3: f64, eta_w: f64) -> Self {
        SinrBreakdown {
            eta_s,
            eta_1,
            eta_2,
            eta_3,
            eta_w,
            sinr: eta_s / (eta_1 + eta_2 + eta_3 + eta_w),
        }
    }

    pub fn sinr_db(&self) -> f64 {
        10.0 * self.sinr.log10()
    }
}

/// Assembles the known effective channels and the diagonal covariance
/// levels at data-phase time `n`.
pub fn effective_channels(
    cfg: &ScenarioConfig,
    dep: &Deployment,
    est: &EstimateSet,
    profile: &CorrelationProfile,
    n: usize,
) -> Result<EffectiveChannels> {
    if n <= cfg.pilot_len || n > cfg.frame_len {
        return Err(Error::domain(
            "effective_channels",
            format!(
                "time {n} outside the data phase ({}..={}]",
                cfg.pilot_len + 1,
                cfg.frame_len
            ),
        ));
    }
    let (m_count, k_count, n_ant) = (cfg.ap_count, cfg.ue_count, cfg.antennas_per_ap);
    let lag = (n - cfg.pilot_len) as i64;
    let mut g_hat = vec![vec![Complex64::new(0.0, 0.0); m_count * n_ant]; k_count];
    let mut d2 = vec![0.0; m_count];
    let mut d3 = vec![0.0; m_count];
    for m in 0..m_count {
        for l in 0..k_count {
            let rho = profile.rho(m, l, lag);
            let r2 = rho * rho;
            let rb2 = (1.0 - r2).max(0.0);
            let beta_e = dep.beta[(m, l)] * cfg.data_energy[l];
            d2[m] += beta_e * est.a_bar_sq(m, l) * r2;
            d3[m] += beta_e * rb2;
            let gain = rho * est.a(m, l) * beta_e.sqrt();
            let h_hat = est.h_hat(m, l);
            for i in 0..n_ant {
                g_hat[l][m * n_ant + i] = gain * h_hat[i];
            }
        }
    }
    let psi = d2
        .iter()
        .zip(&d3)
        .map(|(a, b)| a + b + cfg.noise_power)
        .collect();
    Ok(EffectiveChannels {
        time: n,
        n_ant,
        noise_power: cfg.noise_power,
        g_hat,
        psi,
        d2,
        d3,
    })
}

/// Covariance of the received vector conditioned on the estimates:
/// `R = sum_k g_hat_k g_hat_k^H + blockdiag(psi_m I_N)`.
pub fn conditional_covariance(eff: &EffectiveChannels) -> HermitianMatrix {
    let mn = eff.psi.len() * eff.n_ant;
    let mut r = HermitianMatrix::zeros(mn);
    for g in &eff.g_hat {
        r.add_outer(g, 1.0);
    }
    for (m, &psi) in eff.psi.iter().enumerate() {
        r.add_diagonal(m * eff.n_ant..(m + 1) * eff.n_ant, psi);
    }
    r
}

/// Conditional SINR of user `k` with the MMSE combiner `c = R^{-1} g_hat_k`,
/// decomposed into the five power terms.
pub fn compute_conditional_sinr(
    eff: &EffectiveChannels,
    factor: &CholeskyFactor,
    k: usize,
) -> SinrBreakdown {
    let c = factor.solve(&eff.g_hat[k]);
    breakdown_with_combiner(eff, &c, k)
}

fn breakdown_with_combiner(eff: &EffectiveChannels, c: &[Complex64], k: usize) -> SinrBreakdown {
    let eta_s = cdot(c, &eff.g_hat[k]).norm_sqr();
    let mut eta_1 = 0.0;
    for (l, g) in eff.g_hat.iter().enumerate() {
        if l != k {
            eta_1 += cdot(c, g).norm_sqr();
        }
    }
    let (mut eta_2, mut eta_3) = (0.0, 0.0);
    for (m, (&d2, &d3)) in eff.d2.iter().zip(&eff.d3).enumerate() {
        let block = &c[m * eff.n_ant..(m + 1) * eff.n_ant];
        let p = norm_sqr(block);
        eta_2 += d2 * p;
        eta_3 += d3 * p;
    }
    let eta_w = eff.noise_power * norm_sqr(c);
    SinrBreakdown::new(eta_s, eta_1, eta_2, eta_3, eta_w)
}

/// Realized estimation-error and aging effective channels at time `n`:
/// `g_tilde[l]` stacks `rho a_bar sqrt(E beta) h_tilde` and `xi[l]` stacks
/// `rho_bar sqrt(E beta) z` over APs.
#[derive(Debug, Clone)]
pub struct RealizedSignals {
    pub g_tilde: Vec<Vec<Complex64>>,
    pub xi: Vec<Vec<Complex64>>,
}

pub fn realize_error_channels(
    cfg: &ScenarioConfig,
    dep: &Deployment,
    profile: &CorrelationProfile,
    est: &EstimateSet,
    block: &ChannelBlock,
    n: usize,
    rng: &mut RngStream,
) -> Result<RealizedSignals> {
    let (m_count, k_count, n_ant) = (cfg.ap_count, cfg.ue_count, cfg.antennas_per_ap);
    let mut g_tilde = vec![vec![Complex64::new(0.0, 0.0); m_count * n_ant]; k_count];
    let mut xi = vec![vec![Complex64::new(0.0, 0.0); m_count * n_ant]; k_count];
    for m in 0..m_count {
        for l in 0..k_count {
            let aged = aged_true_channel(block, profile, est, m, l, n, rng)?;
            let scale = (cfg.data_energy[l] * dep.beta[(m, l)]).sqrt();
            for i in 0..n_ant {
                g_tilde[l][m * n_ant + i] = scale * aged.est_error[i];
                xi[l][m * n_ant + i] = scale * aged.innovation[i];
            }
        }
    }
    Ok(RealizedSignals { g_tilde, xi })
}

/// One decoded sample split into its five constituents (their sum is the
/// decoded signal).
#[derive(Debug, Clone, Copy)]
pub struct DecodedSignal {
    pub desired: Complex64,
    pub interference: Complex64,
    pub est_error: Complex64,
    pub aging: Complex64,
    pub noise: Complex64,
}

impl DecodedSignal {
    pub fn total(&self) -> Complex64 {
        self.desired + self.interference + self.est_error + self.aging + self.noise
    }
}

/// Decodes user `k` from one realized receive: combiner `c = R^{-1} g_hat_k`
/// applied to the five components of the received vector.
pub fn mmse_combine_and_decode(
    eff: &EffectiveChannels,
    factor: &CholeskyFactor,
    symbols: &[Complex64],
    signals: &RealizedSignals,
    w: &[Complex64],
    k: usize,
) -> DecodedSignal {
    let c = factor.solve(&eff.g_hat[k]);
    let mut desired = Complex64::new(0.0, 0.0);
    let mut interference = Complex64::new(0.0, 0.0);
    let mut est_error = Complex64::new(0.0, 0.0);
    let mut aging = Complex64::new(0.0, 0.0);
    for l in 0..symbols.len() {
        let s = symbols[l];
        let through_known = cdot(&c, &eff.g_hat[l]) * s;
        if l == k {
            desired = through_known;
        } else {
            interference += through_known;
        }
        est_error += cdot(&c, &signals.g_tilde[l]) * s;
        aging += cdot(&c, &signals.xi[l]) * s;
    }
    let noise = eff.noise_power.sqrt() * cdot(&c, w);
    DecodedSignal {
        desired,
        interference,
        est_error,
        aging,
        noise,
    }
}

/// Per-time, per-UE averaged Monte Carlo SINRs with the seeds that produced
/// them.
#[derive(Debug, Clone)]
pub struct McRun {
    pub probe_times: Vec<usize>,
    /// Linear-scale SINR averaged over trials within each drop, then over
    /// drops; probe_times x K.
    pub mean_sinr: Mat,
    /// Per-drop trial means, for matched cross-engine comparison.
    pub per_drop: Vec<Mat>,
    pub drops: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Full Monte Carlo sweep over drops and trials with uniform deployments.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    drops: usize,
    trials: usize,
    probe_times: &[usize],
    seed: u64,
) -> Result<McRun> {
    run_mc_with_dropper(cfg, drops, trials, probe_times, seed, &|s, d| {
        Deployment::drop_uniform(cfg, s, d)
    })
}

/// Monte Carlo engine over a custom deployment sampler (the baselines reuse
/// this with their own placement rules).
pub fn run_mc_with_dropper(
    cfg: &ScenarioConfig,
    drops: usize,
    trials: usize,
    probe_times: &[usize],
    seed: u64,
    dropper: &(dyn Fn(u64, usize) -> Result<Deployment> + Sync),
) -> Result<McRun> {
    validate_probe_times(cfg, probe_times)?;
    if drops == 0 || trials == 0 {
        return Err(Error::domain(
            "run_monte_carlo",
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
    let block_times = block_times(cfg, probe_times);

    // one work item per (drop, trial); ordered reduction keeps the result
    // independent of the worker count
    let items: Vec<(usize, usize)> = (0..drops)
        .flat_map(|d| (0..trials).map(move |t| (d, t)))
        .collect();
    let per_item: Vec<Mat> = items
        .par_iter()
        .map(|&(d, t)| {
            single_trial_sinr(
                cfg,
                &deployments[d],
                &profiles[d],
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

pub(crate) fn validate_probe_times(cfg: &ScenarioConfig, probe_times: &[usize]) -> Result<()> {
    if probe_times.is_empty() {
        return Err(Error::domain("probe_times", "need at least one probe time"));
    }
    if probe_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("probe_times", "must be strictly ascending"));
    }
    for &n in probe_times {
        if n <= cfg.pilot_len || n > cfg.frame_len {
            return Err(Error::domain(
                "probe_times",
                format!(
                    "time {n} outside the data phase {}..={}",
                    cfg.pilot_len + 1,
                    cfg.frame_len
                ),
            ));
        }
    }
    Ok(())
}

/// Times the channel block must realize: occupied pilot slots, the anchor,
/// and the probe times.
fn block_times(cfg: &ScenarioConfig, probe_times: &[usize]) -> Vec<usize> {
    let mut t: Vec<usize> = (1..=cfg.pilot_len)
        .filter(|&p| !cfg.pilot_slots[p - 1].is_empty())
        .collect();
    t.push(cfg.pilot_len);
    t.extend_from_slice(probe_times);
    t.sort_unstable();
    t.dedup();
    t
}

fn single_trial_sinr(
    cfg: &ScenarioConfig,
    dep: &Deployment,
    profile: &CorrelationProfile,
    block_times: &[usize],
    probe_times: &[usize],
    mut rng: RngStream,
) -> Result<Mat> {
    let block = evolve_block(
        profile,
        &mut rng,
        cfg.pilot_len,
        block_times,
        cfg.antennas_per_ap,
    )?;
    let est = EstimateSet::from_pilots(cfg, dep, profile, &block, &mut rng)?;
    let mut out = Mat::zeros(probe_times.len(), cfg.ue_count);
    for (ti, &n) in probe_times.iter().enumerate() {
        let eff = effective_channels(cfg, dep, &est, profile, n)?;
        let r = conditional_covariance(&eff);
        let factor = r.cholesky()?;
        for k in 0..cfg.ue_count {
            out[(ti, k)] = compute_conditional_sinr(&eff, &factor, k).sinr;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mat;

    /// All-beta-one fixture with explicit velocities.
    fn fixture(
        m: usize,
        k: usize,
        n_ant: usize,
        speed_mps: f64,
        energy: f64,
    ) -> (ScenarioConfig, Deployment, CorrelationProfile) {
        let cfg = ScenarioConfig::uniform(m, n_ant, k, 64, 4, energy, 1.0, speed_mps, 0.0).unwrap();
        let pos = Complex64::new(0.5, 0.5);
        let dep = Deployment::from_positions_and_velocities(
            &cfg,
            vec![pos; m],
            vec![pos; k],
            Mat::from_fn(m, k, |_, _| speed_mps),
        )
        .unwrap();
        let profile = CorrelationProfile::new(&cfg, &dep);
        (cfg, dep, profile)
    }

    fn trial_setup(
        cfg: &ScenarioConfig,
        dep: &Deployment,
        profile: &CorrelationProfile,
        times: &[usize],
        seed: u64,
    ) -> (ChannelBlock, EstimateSet, RngStream) {
        let mut rng = RngStream::new(seed, 0);
        let block =
            evolve_block(profile, &mut rng, cfg.pilot_len, times, cfg.antennas_per_ap).unwrap();
        let est = EstimateSet::from_pilots(cfg, dep, profile, &block, &mut rng).unwrap();
        (block, est, rng)
    }

    #[test]
    fn perfect_csi_no_aging_psi_is_noise_floor() {
        // a -> 1 via huge pilot energy and v = 0: psi_m = N0 and the
        // effective channel reduces to sqrt(E beta) h_hat
        let (mut cfg, dep, profile) = fixture(2, 2, 2, 0.0, 100.0);
        cfg.pilot_energy = vec![1e14; 2];
        cfg.validate().unwrap();
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, 16], 1);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 16).unwrap();
        for m in 0..2 {
            assert!((eff.psi[m] - cfg.noise_power).abs() < 1e-9, "psi {}", eff.psi[m]);
        }
        for k in 0..2 {
            let gain = (cfg.data_energy[k] * dep.beta[(0, k)]).sqrt();
            let h_hat = est.h_hat(0, k);
            for i in 0..2 {
                assert!((eff.g_hat[k][i] - gain * h_hat[i]).norm() < 1e-6 * gain);
            }
        }
    }

    #[test]
    fn static_noisy_psi_keeps_estimation_error_only() {
        // v = 0, noisy pilots: psi_m = sum_l E beta abar^2 + N0
        let (cfg, dep, profile) = fixture(2, 2, 1, 0.0, 100.0);
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, 16], 2);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 16).unwrap();
        for m in 0..2 {
            let expect: f64 = (0..2)
                .map(|l| cfg.data_energy[l] * dep.beta[(m, l)] * est.a_bar_sq(m, l))
                .sum::<f64>()
                + cfg.noise_power;
            assert!((eff.psi[m] - expect).abs() < 1e-12);
            assert!(eff.d3[m].abs() < 1e-15, "no aging term at v=0");
        }
    }

    #[test]
    fn hand_computed_psi_single_ap_two_ues() {
        // M=1, K=2 numeric fixture evaluated by hand from the formula:
        // psi = sum_l E_l beta_l (abar_l^2 rho_l^2 + rhobar_l^2) + N0
        let (cfg, dep, profile) = fixture(1, 2, 1, 30.0, 100.0);
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, 32], 3);
        let n = 32;
        let lag = (n - cfg.pilot_len) as i64;
        let eff = effective_channels(&cfg, &dep, &est, &profile, n).unwrap();
        let mut expect = cfg.noise_power;
        for l in 0..2 {
            let rho = profile.rho(0, l, lag);
            let r2 = rho * rho;
            expect += 100.0 * 1.0 * (est.a_bar_sq(0, l) * r2 + (1.0 - r2));
        }
        assert!((eff.psi[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn covariance_reduces_to_diagonal_without_user_power() {
        // zero data energy wipes the outer products and the interference
        // diagonals: R = N0 I
        let (mut cfg, dep, profile) = fixture(2, 1, 2, 0.0, 100.0);
        cfg.data_energy = vec![0.0];
        cfg.validate().unwrap();
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 4, 8], 4);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 8).unwrap();
        let r = conditional_covariance(&eff);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { cfg.noise_power } else { 0.0 };
                assert!((r.get(i, j) - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn scalar_single_user_covariance() {
        let (cfg, dep, profile) = fixture(1, 1, 1, 0.0, 100.0);
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 4, 8], 5);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 8).unwrap();
        let r = conditional_covariance(&eff);
        let expect = eff.g_hat[0][0].norm_sqr() + eff.psi[0];
        assert!((r.get(0, 0).re - expect).abs() < 1e-12);
    }

    #[test]
    fn covariance_eigenvalues_respect_psi_floor() {
        let (cfg, dep, profile) = fixture(4, 3, 2, 40.0, 100.0);
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 2, 3, 4, 32], 6);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 32).unwrap();
        let r = conditional_covariance(&eff);
        let eig = crate::numerics::hermitian_eigenvalues(&r);
        let floor = eff.psi.iter().cloned().fold(f64::INFINITY, f64::min);
        for l in eig {
            assert!(l >= floor - 1e-9, "eigenvalue {l} below floor {floor}");
        }
    }

    #[test]
    fn matched_filter_scalar_sinr() {
        // M=N=K=1, perfect CSI, no aging: sinr = E beta |h|^2 / N0
        let (mut cfg, dep, profile) = fixture(1, 1, 1, 0.0, 100.0);
        cfg.pilot_energy = vec![1e14];
        cfg.validate().unwrap();
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 4, 8], 7);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 8).unwrap();
        let r = conditional_covariance(&eff);
        let bd = compute_conditional_sinr(&eff, &r.cholesky().unwrap(), 0);
        let h2 = est.h_hat(0, 0)[0].norm_sqr();
        let expect = 100.0 * h2 / cfg.noise_power;
        assert!(
            (bd.sinr / expect - 1.0).abs() < 1e-6,
            "sinr {} vs {expect}",
            bd.sinr
        );
        assert!(bd.eta_3.abs() < 1e-12);
    }

    #[test]
    fn no_aging_kills_eta_3() {
        let (cfg, dep, profile) = fixture(3, 2, 1, 0.0, 100.0);
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, 20], 8);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 20).unwrap();
        let r = conditional_covariance(&eff);
        let factor = r.cholesky().unwrap();
        for k in 0..2 {
            let bd = compute_conditional_sinr(&eff, &factor, k);
            assert_eq!(bd.eta_3, 0.0);
        }
    }

    #[test]
    fn sinr_invariant_under_per_ap_unitaries() {
        let (cfg, dep, profile) = fixture(2, 2, 2, 60.0, 100.0);
        let (_, est, mut rng) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, 40], 9);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 40).unwrap();
        let r = conditional_covariance(&eff);
        let base: Vec<SinrBreakdown> = (0..2)
            .map(|k| compute_conditional_sinr(&eff, &r.cholesky().unwrap(), k))
            .collect();

        // random 2x2 unitary per AP via Gram-Schmidt on Gaussian columns
        let mut rotated = eff.clone();
        for m in 0..2 {
            let u = random_unitary_2x2(&mut rng);
            for g in rotated.g_hat.iter_mut() {
                let b = m * 2;
                let (x, y) = (g[b], g[b + 1]);
                g[b] = u[0] * x + u[1] * y;
                g[b + 1] = u[2] * x + u[3] * y;
            }
        }
        let r2 = conditional_covariance(&rotated);
        for k in 0..2 {
            let bd = compute_conditional_sinr(&rotated, &r2.cholesky().unwrap(), k);
            assert!(
                (bd.sinr / base[k].sinr - 1.0).abs() < 1e-10,
                "user {k}: {} vs {}",
                bd.sinr,
                base[k].sinr
            );
        }
    }

    fn random_unitary_2x2(rng: &mut RngStream) -> [Complex64; 4] {
        let a = [rng.complex_gaussian(), rng.complex_gaussian()];
        let norm_a = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        let a = [a[0] / norm_a, a[1] / norm_a];
        let mut b = [rng.complex_gaussian(), rng.complex_gaussian()];
        let proj = a[0].conj() * b[0] + a[1].conj() * b[1];
        b = [b[0] - proj * a[0], b[1] - proj * a[1]];
        let norm_b = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
        [a[0], b[0] / norm_b, a[1], b[1] / norm_b]
    }

    #[test]
    fn sinr_strictly_decreases_with_noise() {
        let (cfg, dep, profile) = fixture(2, 2, 2, 30.0, 100.0);
        let (_, est, _) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, 32], 10);
        let mut prev = f64::INFINITY;
        for n0 in [0.5, 1.0, 2.0, 8.0] {
            let mut c = cfg.clone();
            c.noise_power = n0;
            c.validate().unwrap();
            let eff = effective_channels(&c, &dep, &est, &profile, 32).unwrap();
            let r = conditional_covariance(&eff);
            let bd = compute_conditional_sinr(&eff, &r.cholesky().unwrap(), 0);
            assert!(bd.sinr < prev, "sinr {} not below {prev} at N0={n0}", bd.sinr);
            prev = bd.sinr;
        }
    }

    #[test]
    fn decoded_terms_sum_to_signal_and_noiseless_case_is_exact() {
        let (cfg, dep, profile) = fixture(2, 1, 1, 20.0, 100.0);
        let (block, est, mut rng) = trial_setup(&cfg, &dep, &profile, &[1, 4, 16], 11);
        let eff = effective_channels(&cfg, &dep, &est, &profile, 16).unwrap();
        let r = conditional_covariance(&eff);
        let factor = r.cholesky().unwrap();
        let signals = realize_error_channels(&cfg, &dep, &profile, &est, &block, 16, &mut rng)
            .unwrap();
        let symbols = vec![Complex64::new(1.0, 0.0)];
        let w = sample_complex_gaussian(&mut rng, 2);
        let dec = mmse_combine_and_decode(&eff, &factor, &symbols, &signals, &w, 0);
        let total = dec.total();
        let parts = dec.desired + dec.interference + dec.est_error + dec.aging + dec.noise;
        assert!((total - parts).norm() < 1e-12);

        // zero noise / zero aging / zero estimation error: r = g^H R^-1 g s
        let (mut cfg2, dep2, profile2) = fixture(2, 1, 1, 0.0, 100.0);
        cfg2.pilot_energy = vec![1e14];
        cfg2.validate().unwrap();
        let (block2, est2, mut rng2) = trial_setup(&cfg2, &dep2, &profile2, &[1, 4, 16], 12);
        let eff2 = effective_channels(&cfg2, &dep2, &est2, &profile2, 16).unwrap();
        let r2 = conditional_covariance(&eff2);
        let f2 = r2.cholesky().unwrap();
        let sig2 =
            realize_error_channels(&cfg2, &dep2, &profile2, &est2, &block2, 16, &mut rng2).unwrap();
        let s = Complex64::new(0.6, -0.8);
        let wzero = vec![Complex64::new(0.0, 0.0); 2];
        let dec2 = mmse_combine_and_decode(&eff2, &f2, &[s], &sig2, &wzero, 0);
        let c = f2.solve(&eff2.g_hat[0]);
        let expect = cdot(&c, &eff2.g_hat[0]) * s;
        assert!((dec2.total() - expect).norm() < 1e-6 * expect.norm());
    }

    #[test]
    fn conditional_sinr_matches_brute_force_term_powers() {
        // M=2, N=1, K=2: average the five realized term powers over many
        // draws of (h_tilde, z, w, s) with the estimates held fixed, and
        // compare with the analytic conditional powers.
        let (cfg, dep, profile) = fixture(2, 1, 2, 60.0, 100.0);
        let n = 40;
        let (_, est, mut rng) = trial_setup(&cfg, &dep, &profile, &[1, 2, 4, n], 13);
        let eff = effective_channels(&cfg, &dep, &est, &profile, n).unwrap();
        let r = conditional_covariance(&eff);
        let factor = r.cholesky().unwrap();
        let bd = compute_conditional_sinr(&eff, &factor, 0);

        // fresh error/innovation realizations each iteration: rebuild the
        // estimate-independent parts from a block that has no data-phase
        // entry, so innovations and errors are redrawn
        let trials = 100_000;
        let mn = 2;
        let (mut p_s, mut p_1, mut p_2, mut p_3, mut p_w) = (0.0, 0.0, 0.0, 0.0, 0.0);
        // conditional distribution of g_tilde/xi: Gaussian with per-entry
        // variances E beta abar^2 rho^2 and E beta rhobar^2
        let lag = (n - cfg.pilot_len) as i64;
        for _ in 0..trials {
            let mut g_tilde = vec![vec![Complex64::new(0.0, 0.0); mn]; 2];
            let mut xi = vec![vec![Complex64::new(0.0, 0.0); mn]; 2];
            for m in 0..2 {
                for l in 0..2 {
                    let rho = profile.rho(m, l, lag);
                    let scale = (cfg.data_energy[l] * dep.beta[(m, l)]).sqrt();
                    let sd_e = scale * rho.abs() * est.a_bar_sq(m, l).sqrt();
                    let sd_z = scale * (1.0 - rho * rho).max(0.0).sqrt();
                    g_tilde[l][m] = sd_e * rng.complex_gaussian();
                    xi[l][m] = sd_z * rng.complex_gaussian();
                }
            }
            let signals = RealizedSignals { g_tilde, xi };
            let symbols = vec![rng.complex_gaussian(), rng.complex_gaussian()];
            let w = sample_complex_gaussian(&mut rng, mn);
            let dec = mmse_combine_and_decode(&eff, &factor, &symbols, &signals, &w, 0);
            p_s += dec.desired.norm_sqr();
            p_1 += dec.interference.norm_sqr();
            p_2 += dec.est_error.norm_sqr();
            p_3 += dec.aging.norm_sqr();
            p_w += dec.noise.norm_sqr();
        }
        let t = trials as f64;
        for (got, want, name) in [
            (p_s / t, bd.eta_s, "eta_s"),
            (p_1 / t, bd.eta_1, "eta_1"),
            (p_2 / t, bd.eta_2, "eta_2"),
            (p_3 / t, bd.eta_3, "eta_3"),
            (p_w / t, bd.eta_w, "eta_w"),
        ] {
            assert!(
                (got / want - 1.0).abs() < 0.01,
                "{name}: brute force {got} vs analytic {want}"
            );
        }
    }

    #[test]
    fn run_is_deterministic_and_flat_at_zero_speed() {
        let cfg = ScenarioConfig::uniform(4, 1, 2, 64, 4, 100.0, 1.0, 0.0, 0.0).unwrap();
        let a = run_monte_carlo(&cfg, 2, 3, &[5, 16, 64], 77).unwrap();
        let b = run_monte_carlo(&cfg, 2, 3, &[5, 16, 64], 77).unwrap();
        assert_eq!(a.mean_sinr, b.mean_sinr);
        // v = 0: the channel never ages, so the SINR is exactly constant in n
        for k in 0..2 {
            let first = a.mean_sinr[(0, k)];
            for ti in 1..3 {
                assert!((a.mean_sinr[(ti, k)] / first - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_probe_times() {
        let cfg = ScenarioConfig::uniform(2, 1, 2, 64, 4, 100.0, 1.0, 0.0, 0.0).unwrap();
        assert!(run_monte_carlo(&cfg, 1, 1, &[4], 1).is_err());
        assert!(run_monte_carlo(&cfg, 1, 1, &[65], 1).is_err());
        assert!(run_monte_carlo(&cfg, 1, 1, &[16, 8], 1).is_err());
        assert!(run_monte_carlo(&cfg, 1, 1, &[], 1).is_err());
    }
}
