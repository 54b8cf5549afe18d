//! Dense complex Hermitian and real linear algebra.
//!
//! Problem sizes here are small (matrix dimension is the total antenna count,
//! a few hundred at most), so everything is dense and hand-rolled: Cholesky
//! for Hermitian positive definite systems, partially pivoted LU for the
//! small real systems of the deterministic-equivalent solver, and a Jacobi
//! eigensolver used as an independent oracle in tests and diagnostics.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense Hermitian matrix, full row-major storage.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Sets entry (i, j) and its conjugate mirror.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v.conj();
    }

    /// `self += scale * v v^H` (rank-one Hermitian update).
    pub fn add_outer(&mut self, v: &[Complex64], scale: f64) {
        assert_eq!(v.len(), self.n, "outer product dimension");
        for i in 0..self.n {
            let vi = v[i] * scale;
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (j, r) in row.iter_mut().enumerate() {
                *r += vi * v[j].conj();
            }
        }
    }

    /// Adds `value` to diagonal entries in `range`.
    pub fn add_diagonal(&mut self, range: std::ops::Range<usize>, value: f64) {
        for i in range {
            self.data[i * self.n + i] += value;
        }
    }

    /// `A x` for a dense vector.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Maximum Hermitian-symmetry violation, for validation.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..=i {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Cholesky factorization `A = L L^H`. Fails with the offending pivot if
    /// the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let n = self.n;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot_index: j,
                    pivot_value: d,
                });
            }
            let dj = d.sqrt();
            l[j * n + j] = Complex64::new(dj, 0.0);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / dj;
            }
        }
        Ok(CholeskyFactor { n, l })
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<Complex64>,
}

impl CholeskyFactor {
    /// Solves `A x = b` using the factorization.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n, "rhs dimension");
        let n = self.n;
        let mut y = b.to_vec();
        // L y = b
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[i * n + k];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        // L^H x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[k * n + i].conj();
                y[i] = y[i] - lki * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Solves the Hermitian positive definite system `A x = b`.
pub fn solve_hermitian(a: &HermitianMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != a.dim() {
        return Err(Error::dimension(
            "solve_hermitian",
            format!("matrix dim {} vs rhs len {}", a.dim(), b.len()),
        ));
    }
    Ok(a.cholesky()?.solve(b))
}

/// Solves the real square system `A x = b` by LU with partial pivoting.
/// `a` is row-major n*n and is consumed as scratch.
pub fn solve_real(n: usize, mut a: Vec<f64>, b: &[f64], stage: &str) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for col in 0..n {
        let (mut piv, mut best) = (col, a[col * n + col].abs());
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                piv = r;
                best = v;
            }
        }
        if best < f64::EPSILON || !best.is_finite() {
            return Err(Error::Singular {
                stage: stage.to_string(),
                column: col,
            });
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for j in col + 1..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
                x[r] -= f * x[col];
            }
            a[r * n + col] = 0.0;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

/// `sum_i conj(x_i) y_i`.
#[inline]
pub fn cdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigenvalues of a Hermitian matrix via cyclic Jacobi on the real symmetric
/// 2n x 2n embedding `[[X, -Y], [Y, X]]` (each eigenvalue appears twice).
/// Independent of the Cholesky path; used as a test/diagnostic oracle.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Vec<f64> {
    let n = a.dim();
    let m = 2 * n;
    let mut s = vec![0.0_f64; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a.get(i, j);
            s[i * m + j] = z.re;
            s[(i + n) * m + (j + n)] = z.re;
            s[i * m + (j + n)] = -z.im;
            s[(i + n) * m + j] = z.im;
        }
    }
    let mut eig = jacobi_symmetric_eigenvalues(m, &mut s);
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // keep every other one: the embedding doubles each eigenvalue
    eig.into_iter().step_by(2).collect()
}

/// Cyclic Jacobi for a dense real symmetric matrix (destroys `s`).
pub fn jacobi_symmetric_eigenvalues(n: usize, s: &mut [f64]) -> Vec<f64> {
    assert_eq!(s.len(), n * n);
    let scale: f64 = (0..n * n).map(|i| s[i].abs()).fold(0.0, f64::max).max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(s[p * n + q].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = s[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (s[q * n + q] - s[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[k * n + p];
                    let skq = s[k * n + q];
                    s[k * n + p] = c * skp - sn * skq;
                    s[k * n + q] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[p * n + k];
                    let sqk = s[q * n + k];
                    s[p * n + k] = c * spk - sn * sqk;
                    s[q * n + k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|i| s[i * n + i]).collect()
}

/// Spectral radius of an elementwise-nonnegative real matrix by power
/// iteration (Perron-Frobenius guarantees convergence from a positive start).
pub fn nonneg_spectral_radius(n: usize, a: &[f64]) -> f64 {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0_f64; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
            .collect();
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next.max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{sample_complex_gaussian, RngStream};

    fn random_pd(n: usize, seed: u64) -> HermitianMatrix {
        // A = G G^H + I from a seeded complex Gaussian G
        let mut rng = RngStream::new(seed, 0);
        let mut a = HermitianMatrix::identity(n);
        for _ in 0..n {
            let g = sample_complex_gaussian(&mut rng, n);
            a.add_outer(&g, 1.0);
        }
        a
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = HermitianMatrix::identity(4);
        let b: Vec<Complex64> = (0..4)
            .map(|i| Complex64::new(i as f64 + 1.0, -(i as f64)))
            .collect();
        let x = solve_hermitian(&a, &b).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_solve() {
        let mut a = HermitianMatrix::zeros(2);
        a.set(0, 0, Complex64::new(2.0, 0.0));
        a.set(1, 1, Complex64::new(4.0, 0.0));
        let b = vec![Complex64::new(2.0, 0.0), Complex64::new(8.0, 0.0)];
        let x = solve_hermitian(&a, &b).unwrap();
        assert!((x[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn residual_small_on_seeded_pd_instances() {
        for seed in 0..100 {
            let n = 16;
            let a = random_pd(n, seed);
            let mut rng = RngStream::new(seed ^ 0xdead, 1);
            let b = sample_complex_gaussian(&mut rng, n);
            let x = solve_hermitian(&a, &b).unwrap();
            let ax = a.mul_vec(&x);
            let num: f64 = ax
                .iter()
                .zip(&b)
                .map(|(p, q)| (p - q).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den = norm_sqr(&b).sqrt();
            assert!(num / den <= 1e-10, "seed {seed}: residual {}", num / den);
        }
    }

    #[test]
    fn non_pd_reports_pivot() {
        let mut a = HermitianMatrix::identity(3);
        a.set(1, 1, Complex64::new(-2.0, 0.0));
        match a.cholesky() {
            Err(Error::NotPositiveDefinite { pivot_index, .. }) => assert_eq!(pivot_index, 1),
            other => panic!("expected pivot error, got {other:?}"),
        }
    }

    #[test]
    fn lu_solves_small_real_system() {
        // [[2, 1], [1, 3]] x = [5, 10] -> x = [1, 3]
        let a = vec![2.0, 1.0, 1.0, 3.0];
        let x = solve_real(2, a, &[5.0, 10.0], "test").unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(
            solve_real(2, a, &[1.0, 1.0], "test"),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn jacobi_matches_known_eigenvalues() {
        // real symmetric [[2, 1], [1, 2]] -> {1, 3}
        let mut s = vec![2.0, 1.0, 1.0, 2.0];
        let mut e = jacobi_symmetric_eigenvalues(2, &mut s);
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_match_trace_and_positivity() {
        let a = random_pd(8, 3);
        let eig = hermitian_eigenvalues(&a);
        assert_eq!(eig.len(), 8);
        let tr: f64 = (0..8).map(|i| a.get(i, i).re).sum();
        let sum: f64 = eig.iter().sum();
        assert!((tr - sum).abs() < 1e-9 * tr.abs());
        assert!(eig.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn spectral_radius_of_known_matrix() {
        // [[0, 1], [1, 0]] has spectral radius 1
        let r = nonneg_spectral_radius(2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((r - 1.0).abs() < 1e-9);
    }
}
