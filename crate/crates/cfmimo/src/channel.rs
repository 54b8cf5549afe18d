//! Fast-fading channel blocks, the pilot phase, and MMSE channel estimation.
//!
//! A [`ChannelBlock`] realizes the channels of every (AP, UE) pair at a set
//! of requested time indices. All times are tied to the anchor index `P`
//! (the end of the pilot phase) by a single lag step
//! `h[t] = rho[|t - P|] h[P] + rho_bar[|t - P|] z_t` with an innovation that
//! is fresh per requested time: innovations are white across time for a
//! fixed anchor, which is exactly the statistics the estimator and the
//! deterministic-equivalent engine assume. Pilot-slot times use the same
//! relation through the time-reversal property of the evolution model.
//!
//! Estimates are stored unit-variance: the raw MMSE output for UE k at AP m
//! has per-entry variance `a_mk^2`, so we keep `h_hat` scaled to unit
//! variance together with the scalar `a_mk`, making the anchored
//! decomposition `h[P] = a h_hat + a_bar h_tilde` hold with two independent
//! unit-variance parts.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{sample_complex_gaussian, Mat, RngStream};
use crate::scenario::{CorrelationProfile, Deployment, ScenarioConfig};

/// Realized fast-fading channels at a set of time indices.
#[derive(Debug, Clone)]
pub struct ChannelBlock {
    anchor: usize,
    times: Vec<usize>,
    ap_count: usize,
    ue_count: usize,
    n_ant: usize,
    /// Layout: [time][(m * K + k) * N + antenna].
    h: Vec<Complex64>,
}

impl ChannelBlock {
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn contains(&self, n: usize) -> bool {
        self.times.binary_search(&n).is_ok()
    }

    fn time_index(&self, n: usize) -> Result<usize> {
        self.times
            .binary_search(&n)
            .map_err(|_| Error::domain("ChannelBlock", format!("time {n} not realized")))
    }

    /// The N-vector channel of pair (m, k) at time `n`.
    pub fn channel(&self, m: usize, k: usize, n: usize) -> Result<&[Complex64]> {
        let t = self.time_index(n)?;
        let stride = self.ap_count * self.ue_count * self.n_ant;
        let base = t * stride + (m * self.ue_count + k) * self.n_ant;
        Ok(&self.h[base..base + self.n_ant])
    }
}

/// Realizes channels at `times` (ascending), anchored at `anchor`.
///
/// The anchor is realized first as CN(0, I); every other requested index is
/// one correlated hop away with its own innovation. Marginals are CN(0, I)
/// at every index.
pub fn evolve_block(
    profile: &CorrelationProfile,
    rng: &mut RngStream,
    anchor: usize,
    times: &[usize],
    n_ant: usize,
) -> Result<ChannelBlock> {
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(
            "evolve_block",
            "times must be strictly ascending",
        ));
    }
    let mut all: Vec<usize> = times.to_vec();
    if let Err(pos) = all.binary_search(&anchor) {
        all.insert(pos, anchor);
    }
    let (m_count, k_count) = (profile.ap_count(), profile.ue_count());
    let stride = m_count * k_count * n_ant;
    let mut h = vec![Complex64::new(0.0, 0.0); all.len() * stride];
    let anchor_pos = all.binary_search(&anchor).unwrap();

    // anchor state first, fixed (m, k, antenna) order
    for mk in 0..m_count * k_count {
        let base = anchor_pos * stride + mk * n_ant;
        for a in 0..n_ant {
            h[base + a] = rng.complex_gaussian();
        }
    }
    // remaining times in ascending order, one hop from the anchor each
    for (t_pos, &t) in all.iter().enumerate() {
        if t == anchor {
            continue;
        }
        let lag = t.abs_diff(anchor) as i64;
        for m in 0..m_count {
            for k in 0..k_count {
                let rho = profile.rho(m, k, lag);
                let rho_bar = profile.rho_bar(m, k, lag);
                let src = anchor_pos * stride + (m * k_count + k) * n_ant;
                let dst = t_pos * stride + (m * k_count + k) * n_ant;
                for a in 0..n_ant {
                    let z = rng.complex_gaussian();
                    h[dst + a] = rho * h[src + a] + rho_bar * z;
                }
            }
        }
    }
    Ok(ChannelBlock {
        anchor,
        times: all,
        ap_count: m_count,
        ue_count: k_count,
        n_ant,
        h,
    })
}

/// Received pilot signal at AP `m` in slot `p` (1-based):
/// `y_m[p] = sum_{l in U_p} sqrt(beta_ml E_upl) h_ml[p] + sqrt(N0) w`.
///
/// An empty slot yields pure noise.
pub fn pilot_receive(
    dep: &Deployment,
    block: &ChannelBlock,
    cfg: &ScenarioConfig,
    m: usize,
    p: usize,
    rng: &mut RngStream,
) -> Result<Vec<Complex64>> {
    if p == 0 || p > cfg.pilot_len {
        return Err(Error::domain(
            "pilot_receive",
            format!("slot {p} outside 1..={}", cfg.pilot_len),
        ));
    }
    let n_ant = cfg.antennas_per_ap;
    let mut y = vec![Complex64::new(0.0, 0.0); n_ant];
    for &l in &cfg.pilot_slots[p - 1] {
        let gain = (dep.beta[(m, l)] * cfg.pilot_energy[l]).sqrt();
        let h = block.channel(m, l, p)?;
        for (yi, hi) in y.iter_mut().zip(h) {
            *yi += gain * hi;
        }
    }
    let noise = cfg.noise_power.sqrt();
    for yi in y.iter_mut() {
        *yi += noise * rng.complex_gaussian();
    }
    Ok(y)
}

/// Per-slot pilot observation variance at AP `m`:
/// `sum_{l in U_p} beta_ml E_upl + N0`.
fn pilot_denominator(dep: &Deployment, cfg: &ScenarioConfig, m: usize, p: usize) -> f64 {
    cfg.pilot_slots[p - 1]
        .iter()
        .map(|&l| dep.beta[(m, l)] * cfg.pilot_energy[l])
        .sum::<f64>()
        + cfg.noise_power
}

/// Closed-form estimation quality
/// `a_mk = sqrt(rho^2[P-p] beta_mk E_upk / (sum_{l in U_p} beta_ml E_upl + N0))`.
fn estimate_quality(
    dep: &Deployment,
    cfg: &ScenarioConfig,
    profile: &CorrelationProfile,
    m: usize,
    k: usize,
    p: usize,
) -> f64 {
    let rho = profile.rho(m, k, (cfg.pilot_len - p) as i64);
    (rho * rho * dep.beta[(m, k)] * cfg.pilot_energy[k] / pilot_denominator(dep, cfg, m, p)).sqrt()
}

/// The full `a_mk` matrix. Deterministic given the deployment; this is what
/// the deterministic-equivalent engine consumes (no fast fading involved).
pub fn estimation_coefficients(
    cfg: &ScenarioConfig,
    dep: &Deployment,
    profile: &CorrelationProfile,
) -> Mat {
    Mat::from_fn(cfg.ap_count, cfg.ue_count, |m, k| {
        estimate_quality(dep, cfg, profile, m, k, cfg.pilot_slot_of(k))
    })
}

/// MMSE estimate of `h_mk[P]` from the pilot received in slot `p`.
///
/// Returns the unit-variance estimate and the quality coefficient `a_mk`.
/// When `a_mk = 0` the estimate carries no information; the returned vector
/// is zero and the caller should treat the pair as uninformative.
pub fn mmse_estimate(
    dep: &Deployment,
    cfg: &ScenarioConfig,
    profile: &CorrelationProfile,
    y_m_p: &[Complex64],
    m: usize,
    k: usize,
    p: usize,
) -> Result<(Vec<Complex64>, f64)> {
    if p == 0 || p > cfg.pilot_len || !cfg.pilot_slots[p - 1].contains(&k) {
        return Err(Error::domain(
            "mmse_estimate",
            format!("UE {k} does not transmit its pilot in slot {p}"),
        ));
    }
    let a = estimate_quality(dep, cfg, profile, m, k, p);
    if a == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); y_m_p.len()], 0.0));
    }
    let rho = profile.rho(m, k, (cfg.pilot_len - p) as i64);
    let scale = rho.signum() / pilot_denominator(dep, cfg, m, p).sqrt();
    Ok((y_m_p.iter().map(|y| y * scale).collect(), a))
}

/// Estimates and their error decomposition for every (AP, UE) pair.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    ap_count: usize,
    ue_count: usize,
    n_ant: usize,
    /// Unit-variance estimates, layout [(m * K + k) * N + antenna].
    h_hat: Vec<Complex64>,
    /// Realized unit-variance estimation errors, same layout.
    h_tilde: Vec<Complex64>,
    /// Estimation quality a_mk in [0, 1].
    pub a: Mat,
    /// Pairs whose estimate carries no information (a_mk = 0).
    pub uninformative: Vec<bool>,
}

impl EstimateSet {
    /// Runs the pilot phase over every slot and AP, estimating each UE's
    /// channel at its own slot and realizing the error component
    /// `h_tilde = (h[P] - a h_hat) / a_bar`.
    pub fn from_pilots(
        cfg: &ScenarioConfig,
        dep: &Deployment,
        profile: &CorrelationProfile,
        block: &ChannelBlock,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let (m_count, k_count, n_ant) = (cfg.ap_count, cfg.ue_count, cfg.antennas_per_ap);
        let mut est = EstimateSet {
            ap_count: m_count,
            ue_count: k_count,
            n_ant,
            h_hat: vec![Complex64::new(0.0, 0.0); m_count * k_count * n_ant],
            h_tilde: vec![Complex64::new(0.0, 0.0); m_count * k_count * n_ant],
            a: Mat::zeros(m_count, k_count),
            uninformative: vec![false; m_count * k_count],
        };
        let anchor = block.anchor();
        for p in 1..=cfg.pilot_len {
            if cfg.pilot_slots[p - 1].is_empty() {
                continue;
            }
            for m in 0..m_count {
                let y = pilot_receive(dep, block, cfg, m, p, rng)?;
                for &k in &cfg.pilot_slots[p - 1] {
                    let (h_hat, a) = mmse_estimate(dep, cfg, profile, &y, m, k, p)?;
                    let base = (m * k_count + k) * n_ant;
                    let h_p = block.channel(m, k, anchor)?;
                    let a_bar = (1.0 - a * a).max(0.0).sqrt();
                    for i in 0..n_ant {
                        est.h_hat[base + i] = h_hat[i];
                        est.h_tilde[base + i] = if a_bar > 0.0 {
                            (h_p[i] - a * h_hat[i]) / a_bar
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                    }
                    est.a[(m, k)] = a;
                    est.uninformative[m * k_count + k] = a == 0.0;
                }
            }
        }
        Ok(est)
    }

    pub fn h_hat(&self, m: usize, k: usize) -> &[Complex64] {
        let base = (m * self.ue_count + k) * self.n_ant;
        &self.h_hat[base..base + self.n_ant]
    }

    pub fn h_tilde(&self, m: usize, k: usize) -> &[Complex64] {
        let base = (m * self.ue_count + k) * self.n_ant;
        &self.h_tilde[base..base + self.n_ant]
    }

    pub fn a(&self, m: usize, k: usize) -> f64 {
        self.a[(m, k)]
    }

    /// `1 - a_mk^2`, the estimation-error variance share.
    pub fn a_bar_sq(&self, m: usize, k: usize) -> f64 {
        (1.0 - self.a[(m, k)] * self.a[(m, k)]).max(0.0)
    }

    pub fn ap_count(&self) -> usize {
        self.ap_count
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }

    pub fn n_ant(&self) -> usize {
        self.n_ant
    }
}

/// The aged channel at a data-phase index, split into its three components.
#[derive(Debug, Clone)]
pub struct AgedChannel {
    /// `rho[n-P] a h_hat`: the part the combiner knows.
    pub known: Vec<Complex64>,
    /// `rho[n-P] a_bar h_tilde`: carried-over estimation error.
    pub est_error: Vec<Complex64>,
    /// `rho_bar[n-P] z`: innovation accumulated since the anchor.
    pub innovation: Vec<Complex64>,
}

impl AgedChannel {
    /// The realized channel `h_mk[n]`, the sum of the three parts.
    pub fn total(&self) -> Vec<Complex64> {
        self.known
            .iter()
            .zip(&self.est_error)
            .zip(&self.innovation)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Three-term decomposition of `h_mk[n]` for `n > P`:
/// `h = rho a h_hat + rho a_bar h_tilde + rho_bar z`.
///
/// If the block realized time `n`, the innovation is recovered from the
/// realized channel so the terms sum to it exactly; otherwise a fresh
/// innovation is drawn from `rng`.
pub fn aged_true_channel(
    block: &ChannelBlock,
    profile: &CorrelationProfile,
    est: &EstimateSet,
    m: usize,
    k: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<AgedChannel> {
    let anchor = block.anchor();
    if n <= anchor {
        return Err(Error::domain(
            "aged_true_channel",
            format!("time {n} is not in the data phase (anchor {anchor})"),
        ));
    }
    let lag = (n - anchor) as i64;
    let rho = profile.rho(m, k, lag);
    let rho_bar = profile.rho_bar(m, k, lag);
    let a = est.a(m, k);
    let a_bar = est.a_bar_sq(m, k).sqrt();
    let n_ant = est.n_ant();

    let z: Vec<Complex64> = if block.contains(n) {
        if rho_bar > 0.0 {
            let h_n = block.channel(m, k, n)?;
            let h_p = block.channel(m, k, anchor)?;
            h_n.iter()
                .zip(h_p)
                .map(|(hn, hp)| (hn - rho * hp) / rho_bar)
                .collect()
        } else {
            vec![Complex64::new(0.0, 0.0); n_ant]
        }
    } else {
        sample_complex_gaussian(rng, n_ant)
    };

    let h_hat = est.h_hat(m, k);
    let h_tilde = est.h_tilde(m, k);
    Ok(AgedChannel {
        known: h_hat.iter().map(|v| rho * a * v).collect(),
        est_error: h_tilde.iter().map(|v| rho * a_bar * v).collect(),
        innovation: z.iter().map(|v| rho_bar * v).collect(),
    })
}
