//! Reproducible random streams.
//!
//! Every random quantity in the simulator is drawn from an [`RngStream`]
//! addressed by `(seed, stream_id)`. ChaCha8 gives 2^64 independent streams
//! per seed, so parallel workers draw from disjoint streams and a run is
//! bit-reproducible at any thread count.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// A deterministic random stream addressed by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// What a sub-stream is used for; part of the stream address so that, e.g.,
/// the UE drop of a deployment does not shift when the AP count changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    ApPositions,
    UePositions,
    Velocities,
    Trial,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::ApPositions => 1,
            StreamPurpose::UePositions => 2,
            StreamPurpose::Velocities => 3,
            StreamPurpose::Trial => 4,
        }
    }
}

/// Builds the stream id for a `(purpose, drop, trial)` work item.
///
/// Layout: purpose in the top byte, drop index in the next 24 bits, trial
/// index in the low 32 bits.
pub fn stream_id(purpose: StreamPurpose, drop: usize, trial: usize) -> u64 {
    debug_assert!(drop < (1 << 24));
    debug_assert!(trial < (1 << 32));
    (purpose.tag() << 56) | ((drop as u64) << 32) | trial as u64
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One draw from N(0, 1).
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One draw uniform on [low, high).
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        if low == high {
            return low;
        }
        Uniform::new(low, high)
            .expect("valid uniform range")
            .sample(&mut self.rng)
    }

    /// One circularly-symmetric complex Gaussian draw with unit variance
    /// (real and imaginary parts each N(0, 1/2)).
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(self.standard_normal() * s, self.standard_normal() * s)
    }
}

/// An i.i.d. CN(0, I_n) vector.
pub fn sample_complex_gaussian(rng: &mut RngStream, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| rng.complex_gaussian()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_sequence() {
        let a = sample_complex_gaussian(&mut RngStream::new(42, 7), 64);
        let b = sample_complex_gaussian(&mut RngStream::new(42, 7), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = sample_complex_gaussian(&mut RngStream::new(42, 7), 64);
        let b = sample_complex_gaussian(&mut RngStream::new(42, 8), 64);
        assert_ne!(a, b);
    }

    #[test]
    fn complex_gaussian_moments() {
        let mut rng = RngStream::new(1, 0);
        let n = 100_000;
        let v = sample_complex_gaussian(&mut rng, n);
        let mean_re = v.iter().map(|z| z.re).sum::<f64>() / n as f64;
        let mean_im = v.iter().map(|z| z.im).sum::<f64>() / n as f64;
        let var = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!(mean_re.abs() < 0.01, "mean re {mean_re}");
        assert!(mean_im.abs() < 0.01, "mean im {mean_im}");
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        // component variances are 1/2 each
        let var_re = v.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        assert!((var_re - 0.5).abs() < 0.01, "re variance {var_re}");
    }

    #[test]
    fn stream_ids_disjoint_across_purposes() {
        let ids = [
            stream_id(StreamPurpose::ApPositions, 3, 0),
            stream_id(StreamPurpose::UePositions, 3, 0),
            stream_id(StreamPurpose::Velocities, 3, 0),
            stream_id(StreamPurpose::Trial, 3, 9),
            stream_id(StreamPurpose::Trial, 4, 9),
        ];
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                assert_ne!(ids[i], ids[j]);
            }
        }
    }
}
