//! Scenario configuration, deployment geometry, multi-slope path loss, and
//! Jakes temporal correlation with per-(AP, UE) relative velocities.
//!
//! Geometry lives on a square of side `area_side` in abstract units; only the
//! `unit_to_meters` label relates it to physical length. Doppler never sees
//! map distance: it depends on the physical speed, carrier, and sampling
//! interval alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bessel_j0, stream_id, Mat, RngStream, StreamPurpose};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// All physical and experiment parameters of one scenario.
///
/// Loadable from TOML (see the `harness` module for the schema); per-UE
/// fields accept either a scalar (applied to every UE) or an array of length
/// `ue_count`. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Number of access points (M).
    pub ap_count: usize,
    /// Antennas per access point (N).
    pub antennas_per_ap: usize,
    /// Number of user terminals (K).
    pub ue_count: usize,
    /// Side of the square deployment area, in abstract units.
    pub area_side: f64,
    /// Physical meters per geometry unit; labels axes only.
    pub unit_to_meters: f64,
    /// Carrier frequency f_c in Hz.
    pub carrier_hz: f64,
    /// Signaling bandwidth in Hz; the sampling interval is its inverse.
    pub bandwidth_hz: f64,
    /// Frame length T in channel uses.
    pub frame_len: usize,
    /// Pilot phase length P in channel uses.
    pub pilot_len: usize,
    /// Per-UE pilot energy, linear.
    pub pilot_energy: Vec<f64>,
    /// Per-UE data energy, linear.
    pub data_energy: Vec<f64>,
    /// Noise power N0, linear.
    pub noise_power: f64,
    /// Per-UE mean speed in m/s.
    pub mean_speed_mps: Vec<f64>,
    /// Relative half-width of the per-AP speed spread, in [0, 1].
    pub delta: f64,
    /// Path-loss normalizer for the first bracket.
    pub pathloss_mu0: f64,
    /// Strictly increasing bracket boundaries; the last one must be `inf`.
    pub pathloss_thresholds: Vec<f64>,
    /// One exponent per bracket.
    pub pathloss_exponents: Vec<f64>,
    /// Pilot slot assignment: `pilot_slots[p]` lists the UEs sharing slot
    /// p+1. Every UE must appear exactly once; empty slots are allowed.
    pub pilot_slots: Vec<Vec<usize>>,
    /// Chained normalizers, derived; not part of the schema.
    #[serde(skip)]
    mu_chain: Vec<f64>,
}

/// Scalar-or-array helper for per-UE config fields.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerUe {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerUe {
    fn expand(self, k: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            PerUe::Uniform(v) => Ok(vec![v; k]),
            PerUe::Each(v) if v.len() == k => Ok(v),
            PerUe::Each(v) => Err(Error::config(
                key,
                format!("expected {} entries (one per UE), got {}", k, v.len()),
            )),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ap_count: usize,
    antennas_per_ap: usize,
    ue_count: usize,
    #[serde(default = "default_area_side")]
    area_side: f64,
    #[serde(default = "default_unit_to_meters")]
    unit_to_meters: f64,
    carrier_hz: f64,
    bandwidth_hz: f64,
    frame_len: usize,
    pilot_len: usize,
    pilot_energy: PerUe,
    data_energy: PerUe,
    noise_power: f64,
    mean_speed_mps: PerUe,
    #[serde(default)]
    delta: f64,
    #[serde(default = "default_mu0")]
    pathloss_mu0: f64,
    pathloss_thresholds: Vec<f64>,
    pathloss_exponents: Vec<f64>,
    #[serde(default)]
    pilot_slots: Option<Vec<Vec<usize>>>,
}

fn default_area_side() -> f64 {
    1.0
}

fn default_unit_to_meters() -> f64 {
    1000.0
}

fn default_mu0() -> f64 {
    1.0
}

impl<'de> Deserialize<'de> for ScenarioConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawConfig::deserialize(d)?;
        ScenarioConfig::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

impl ScenarioConfig {
    fn from_raw(raw: RawConfig) -> Result<Self> {
        let k = raw.ue_count;
        let pilot_slots = match raw.pilot_slots {
            Some(s) => s,
            None => orthogonal_slots(k, raw.pilot_len)?,
        };
        let mut cfg = ScenarioConfig {
            ap_count: raw.ap_count,
            antennas_per_ap: raw.antennas_per_ap,
            ue_count: raw.ue_count,
            area_side: raw.area_side,
            unit_to_meters: raw.unit_to_meters,
            carrier_hz: raw.carrier_hz,
            bandwidth_hz: raw.bandwidth_hz,
            frame_len: raw.frame_len,
            pilot_len: raw.pilot_len,
            pilot_energy: raw.pilot_energy.expand(k, "pilot_energy")?,
            data_energy: raw.data_energy.expand(k, "data_energy")?,
            noise_power: raw.noise_power,
            mean_speed_mps: raw.mean_speed_mps.expand(k, "mean_speed_mps")?,
            delta: raw.delta,
            pathloss_mu0: raw.pathloss_mu0,
            pathloss_thresholds: raw.pathloss_thresholds,
            pathloss_exponents: raw.pathloss_exponents,
            pilot_slots,
            mu_chain: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A scenario with every UE at the same energies and mean speed, the
    /// two-slope near-field/far-field path-loss table, and orthogonal pilots.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        ap_count: usize,
        antennas_per_ap: usize,
        ue_count: usize,
        frame_len: usize,
        pilot_len: usize,
        energy: f64,
        noise_power: f64,
        speed_mps: f64,
        delta: f64,
    ) -> Result<Self> {
        let mut cfg = ScenarioConfig {
            ap_count,
            antennas_per_ap,
            ue_count,
            area_side: 1.0,
            unit_to_meters: 1000.0,
            carrier_hz: 5e9,
            bandwidth_hz: 5e6,
            frame_len,
            pilot_len,
            pilot_energy: vec![energy; ue_count],
            data_energy: vec![energy; ue_count],
            noise_power,
            mean_speed_mps: vec![speed_mps; ue_count],
            delta,
            pathloss_mu0: 1.0,
            pathloss_thresholds: vec![0.1, f64::INFINITY],
            pathloss_exponents: vec![0.0, 3.0],
            pilot_slots: orthogonal_slots(ue_count, pilot_len)?,
            mu_chain: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<config>", e.to_string()))
    }

    /// Checks every invariant and recomputes the chained normalizers.
    pub fn validate(&mut self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        }
        if self.ap_count == 0 {
            return Err(Error::config("ap_count", "must be at least 1"));
        }
        if self.antennas_per_ap == 0 {
            return Err(Error::config("antennas_per_ap", "must be at least 1"));
        }
        if self.ue_count == 0 {
            return Err(Error::config("ue_count", "must be at least 1"));
        }
        positive("area_side", self.area_side)?;
        positive("unit_to_meters", self.unit_to_meters)?;
        positive("carrier_hz", self.carrier_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("noise_power", self.noise_power)?;
        positive("pathloss_mu0", self.pathloss_mu0)?;
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config(
                "delta",
                format!("must lie in [0, 1], got {}", self.delta),
            ));
        }
        if self.pilot_len >= self.frame_len {
            return Err(Error::config(
                "pilot_len",
                format!(
                    "pilot phase ({}) must be shorter than the frame ({})",
                    self.pilot_len, self.frame_len
                ),
            ));
        }
        for (key, v) in [
            ("pilot_energy", &self.pilot_energy),
            ("data_energy", &self.data_energy),
            ("mean_speed_mps", &self.mean_speed_mps),
        ] {
            if v.len() != self.ue_count {
                return Err(Error::config(
                    key,
                    format!("expected {} entries, got {}", self.ue_count, v.len()),
                ));
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::config(key, format!("invalid value {bad}")));
            }
        }
        if self.pathloss_thresholds.is_empty() {
            return Err(Error::config("pathloss_thresholds", "slope table is empty"));
        }
        if self.pathloss_exponents.len() != self.pathloss_thresholds.len() {
            return Err(Error::config(
                "pathloss_exponents",
                format!(
                    "expected {} entries to match pathloss_thresholds, got {}",
                    self.pathloss_thresholds.len(),
                    self.pathloss_exponents.len()
                ),
            ));
        }
        if *self.pathloss_thresholds.last().unwrap() != f64::INFINITY {
            return Err(Error::config(
                "pathloss_thresholds",
                "last threshold must be inf",
            ));
        }
        for w in self.pathloss_thresholds.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::config(
                    "pathloss_thresholds",
                    "thresholds must be strictly increasing",
                ));
            }
        }
        if self.pathloss_thresholds[0] <= 0.0 {
            return Err(Error::config(
                "pathloss_thresholds",
                "first threshold must be positive",
            ));
        }
        if self.pilot_slots.len() != self.pilot_len {
            return Err(Error::config(
                "pilot_slots",
                format!(
                    "expected {} slots, got {}",
                    self.pilot_len,
                    self.pilot_slots.len()
                ),
            ));
        }
        let mut seen = vec![false; self.ue_count];
        for slot in &self.pilot_slots {
            for &ue in slot {
                if ue >= self.ue_count {
                    return Err(Error::config(
                        "pilot_slots",
                        format!("UE index {ue} out of range"),
                    ));
                }
                if seen[ue] {
                    return Err(Error::config(
                        "pilot_slots",
                        format!("UE {ue} appears in more than one slot"),
                    ));
                }
                seen[ue] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::config(
                "pilot_slots",
                format!("UE {missing} has no pilot slot"),
            ));
        }
        // chained normalizers: continuity at every finite threshold
        let mut mu = vec![self.pathloss_mu0];
        for l in 1..self.pathloss_exponents.len() {
            let d = self.pathloss_thresholds[l - 1];
            let step = self.pathloss_exponents[l] - self.pathloss_exponents[l - 1];
            mu.push(mu[l - 1] * d.powf(step));
        }
        self.mu_chain = mu;
        Ok(())
    }

    /// Sampling interval T_s in seconds.
    pub fn sample_interval(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Radians of Doppler phase per unit lag for a given relative speed:
    /// `2 pi (v f_c / c) T_s`.
    pub fn doppler_coefficient(&self, speed_mps: f64) -> f64 {
        2.0 * std::f64::consts::PI * speed_mps * self.carrier_hz / SPEED_OF_LIGHT
            * self.sample_interval()
    }

    /// 1-based pilot slot of UE `k`.
    pub fn pilot_slot_of(&self, k: usize) -> usize {
        for (p, slot) in self.pilot_slots.iter().enumerate() {
            if slot.contains(&k) {
                return p + 1;
            }
        }
        unreachable!("validated config covers every UE")
    }

    /// Total antenna count M*N.
    pub fn total_antennas(&self) -> usize {
        self.ap_count * self.antennas_per_ap
    }
}

fn orthogonal_slots(ue_count: usize, pilot_len: usize) -> Result<Vec<Vec<usize>>> {
    if ue_count > pilot_len {
        return Err(Error::config(
            "pilot_slots",
            format!(
                "orthogonal pilots need pilot_len >= ue_count ({pilot_len} < {ue_count}); \
                 pass an explicit pilot_slots assignment to share slots"
            ),
        ));
    }
    Ok((0..pilot_len)
        .map(|p| if p < ue_count { vec![p] } else { vec![] })
        .collect())
}

/// Piecewise path gain `mu_l d^{-eta_l}` for the bracket containing `d`.
/// A distance exactly on a threshold belongs to the bracket to its right.
pub fn path_loss(cfg: &ScenarioConfig, distance: f64) -> Result<f64> {
    if cfg.pathloss_thresholds.is_empty() || cfg.mu_chain.is_empty() {
        return Err(Error::config("pathloss_thresholds", "slope table is empty"));
    }
    if !(distance >= 0.0) {
        return Err(Error::domain(
            "path_loss",
            format!("distance must be nonnegative, got {distance}"),
        ));
    }
    let l = cfg.pathloss_thresholds.partition_point(|&t| t <= distance);
    Ok(cfg.mu_chain[l] * distance.powf(-cfg.pathloss_exponents[l]))
}

/// One realized drop: positions, large-scale gains, relative speeds.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub ap_pos: Vec<Complex64>,
    pub ue_pos: Vec<Complex64>,
    /// beta[(m, k)]: large-scale gain between AP m and UE k.
    pub beta: Mat,
    /// v_rel[(m, k)]: relative speed of UE k seen from AP m, m/s.
    pub v_rel: Mat,
}

impl Deployment {
    /// Uniform drop of APs and UEs over the square, with speeds spread
    /// uniformly over `[(1-delta) v_k, (1+delta) v_k]` across APs.
    ///
    /// AP positions, UE positions, and speed draws come from separate
    /// substreams of `(seed, drop_index)`, so changing the AP count leaves
    /// the UE drop untouched.
    pub fn drop_uniform(cfg: &ScenarioConfig, seed: u64, drop_index: usize) -> Result<Self> {
        let mut ap_rng = RngStream::new(seed, stream_id(StreamPurpose::ApPositions, drop_index, 0));
        let mut ue_rng = RngStream::new(seed, stream_id(StreamPurpose::UePositions, drop_index, 0));
        let mut vel_rng = RngStream::new(seed, stream_id(StreamPurpose::Velocities, drop_index, 0));
        let side = cfg.area_side;
        let ap_pos = (0..cfg.ap_count)
            .map(|_| Complex64::new(ap_rng.uniform(0.0, side), ap_rng.uniform(0.0, side)))
            .collect();
        let ue_pos = (0..cfg.ue_count)
            .map(|_| Complex64::new(ue_rng.uniform(0.0, side), ue_rng.uniform(0.0, side)))
            .collect();
        Self::from_positions(cfg, ap_pos, ue_pos, &mut vel_rng)
    }

    /// Builds a deployment from given positions, drawing only the speeds.
    pub fn from_positions(
        cfg: &ScenarioConfig,
        ap_pos: Vec<Complex64>,
        ue_pos: Vec<Complex64>,
        vel_rng: &mut RngStream,
    ) -> Result<Self> {
        let v_rel = draw_velocities(cfg, ap_pos.len(), vel_rng);
        Self::from_positions_and_velocities(cfg, ap_pos, ue_pos, v_rel)
    }

    /// Fully explicit construction (fixtures and baselines).
    pub fn from_positions_and_velocities(
        cfg: &ScenarioConfig,
        ap_pos: Vec<Complex64>,
        ue_pos: Vec<Complex64>,
        v_rel: Mat,
    ) -> Result<Self> {
        if ap_pos.len() != cfg.ap_count || ue_pos.len() != cfg.ue_count {
            return Err(Error::dimension(
                "Deployment",
                format!(
                    "expected {} APs / {} UEs, got {} / {}",
                    cfg.ap_count,
                    cfg.ue_count,
                    ap_pos.len(),
                    ue_pos.len()
                ),
            ));
        }
        let mut beta = Mat::zeros(ap_pos.len(), ue_pos.len());
        for (m, ap) in ap_pos.iter().enumerate() {
            for (k, ue) in ue_pos.iter().enumerate() {
                beta[(m, k)] = path_loss(cfg, (ap - ue).norm())?;
            }
        }
        Ok(Deployment {
            ap_pos,
            ue_pos,
            beta,
            v_rel,
        })
    }
}

/// Speeds `v_mk = v_k (1 + delta (2u - 1))`, u uniform on [0, 1). One draw is
/// consumed per (m, k) regardless of delta, so sweeps over delta see the same
/// underlying randomness.
fn draw_velocities(cfg: &ScenarioConfig, ap_count: usize, rng: &mut RngStream) -> Mat {
    Mat::from_fn(ap_count, cfg.ue_count, |_, k| {
        let u = rng.uniform(0.0, 1.0);
        cfg.mean_speed_mps[k] * (1.0 + cfg.delta * (2.0 * u - 1.0))
    })
}

/// Temporal correlation coefficients `rho_mk[tau] = J0(2 pi f_dmk T_s |tau|)`
/// for a realized deployment.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    /// Doppler phase per unit lag, per (m, k).
    coeff: Mat,
}

impl CorrelationProfile {
    pub fn new(cfg: &ScenarioConfig, dep: &Deployment) -> Self {
        let coeff = Mat::from_fn(dep.beta.rows(), dep.beta.cols(), |m, k| {
            cfg.doppler_coefficient(dep.v_rel[(m, k)])
        });
        CorrelationProfile { coeff }
    }

    pub fn ap_count(&self) -> usize {
        self.coeff.rows()
    }

    pub fn ue_count(&self) -> usize {
        self.coeff.cols()
    }

    /// `rho_mk[tau]`, even in the lag.
    pub fn rho(&self, m: usize, k: usize, tau: i64) -> f64 {
        bessel_j0(self.coeff[(m, k)] * tau.unsigned_abs() as f64)
            .expect("finite Doppler coefficient")
    }

    /// `sqrt(1 - rho^2)`.
    pub fn rho_bar(&self, m: usize, k: usize, tau: i64) -> f64 {
        let r = self.rho(m, k, tau);
        (1.0 - r * r).max(0.0).sqrt()
    }
}

/// Correlation coefficient between the channel of UE `k` at AP `m` and
/// itself `tau` samples apart.
pub fn correlation(cfg: &ScenarioConfig, dep: &Deployment, m: usize, k: usize, tau: i64) -> f64 {
    bessel_j0(cfg.doppler_coefficient(dep.v_rel[(m, k)]) * tau.unsigned_abs() as f64)
        .expect("finite Doppler coefficient")
}
