//! Deterministic numerical building blocks: unitary DFTs, the Bessel function
//! J0, Dolph-Chebyshev windows, the generalized trace, and a correlated
//! Gaussian process sampler.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Dense complex matrix used for every frequency-domain operator.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Dense real matrix (correlation matrices, time-domain kernels).
pub type RealMatrix = DMatrix<f64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// K-point unitary DFT matrix, `[F]_{kn} = exp(-j 2 pi k n / K) / sqrt(K)`.
///
/// The inverse is the conjugate transpose.
pub fn dft_matrix(k: usize) -> Result<ComplexMatrix> {
    if k == 0 {
        return Err(Error::dim("DFT size must be at least 1"));
    }
    let scale = 1.0 / (k as f64).sqrt();
    Ok(ComplexMatrix::from_fn(k, k, |r, c| {
        // reduce the exponent modulo k before converting to keep the phase exact
        let e = (r * c) % k;
        cis(-2.0 * PI * e as f64 / k as f64) * scale
    }))
}

/// Unitary forward/inverse FFT of a fixed length.
#[derive(Clone)]
pub struct UnitaryFft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for UnitaryFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryFft").field("len", &self.len).finish()
    }
}

impl UnitaryFft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        let mut planner = FftPlanner::new();
        UnitaryFft {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: 1.0 / (len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place `F x`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// In-place `F^H x`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// `F A F^H` for a square matrix of matching size.
    pub fn conjugate_transform(&self, a: &ComplexMatrix) -> ComplexMatrix {
        let n = self.len;
        assert_eq!(a.shape(), (n, n));
        let mut out = a.clone();
        let mut buf = vec![ZERO; n];
        // F applied to every column
        for c in 0..n {
            buf.copy_from_slice(out.column(c).as_slice());
            self.forward(&mut buf);
            out.column_mut(c).copy_from_slice(&buf);
        }
        // (F^H applied on the right) == conj(F * conj(row)) per row
        for r in 0..n {
            for (c, v) in buf.iter_mut().enumerate() {
                *v = out[(r, c)].conj();
            }
            self.forward(&mut buf);
            for (c, v) in buf.iter().enumerate() {
                out[(r, c)] = v.conj();
            }
        }
        out
    }
}

/// Cyclic shift of a sequence by `shift` positions towards higher indices.
pub fn circshift<T: Copy>(v: &[T], shift: usize) -> Vec<T> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let s = shift % n;
    (0..n).map(|i| v[(i + n - s) % n]).collect()
}

/// Bessel function of the first kind, order zero.
///
/// Uses Miller's backward recurrence below `|x| = 25` and the Hankel
/// asymptotic expansion above it. Absolute error stays below `1e-12` for
/// `|x| <= 1e4`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0 of non-finite argument {x}")));
    }
    Ok(j0(x))
}

pub(crate) fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        1.0
    } else if ax < 25.0 {
        j0_backward_recurrence(ax)
    } else {
        j0_hankel(ax)
    }
}

fn j0_backward_recurrence(x: f64) -> f64 {
    // Even starting order far enough above x that J_start is negligible.
    let mut start = (x + 30.0 + 4.0 * x.sqrt()) as usize;
    start += start % 2;
    let mut j_next = 0.0_f64; // J_{n+1}
    let mut j_cur = 1e-300_f64; // J_n, arbitrary scale
    let mut even_sum = 0.0_f64; // sum of J_{2k}, k >= 1
    for n in (1..=start).rev() {
        let j_prev = 2.0 * n as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let order = n - 1;
        if order > 0 && order % 2 == 0 {
            even_sum += j_cur;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    // 1 = J0 + 2 sum_{k>=1} J_{2k}
    j_cur / (j_cur + 2.0 * even_sum)
}

fn j0_hankel(x: f64) -> f64 {
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut k = 0usize;
    loop {
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        k += 1;
        let odd = (2 * k - 1) as f64;
        let next = term * -(odd * odd) / (8.0 * k as f64 * x);
        if next.abs() < 1e-17 * p.abs().max(1e-300) || next.abs() >= term.abs() || k > 200 {
            break;
        }
        term = next;
    }
    let (s, c) = x.sin_cos();
    let cos_chi = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
    let sin_chi = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Real symmetric window with its design attenuation.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCoefficients {
    pub values: Vec<f64>,
    pub design_attenuation_db: f64,
}

impl WindowCoefficients {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dolph-Chebyshev window, peak-normalized to 1.
///
/// All sidelobes of the window's spectrum sit `attenuation_db` below the
/// mainlobe peak.
pub fn chebyshev_window(length: usize, attenuation_db: f64) -> Result<WindowCoefficients> {
    if length == 0 {
        return Err(Error::dim("window length must be at least 1"));
    }
    if !(attenuation_db > 0.0) || !attenuation_db.is_finite() {
        return Err(Error::Domain(format!(
            "window attenuation must be positive, got {attenuation_db}"
        )));
    }
    if length == 1 {
        return Ok(WindowCoefficients {
            values: vec![1.0],
            design_attenuation_db: attenuation_db,
        });
    }
    let m = length;
    let order = (m - 1) as f64;
    let ripple = 10f64.powf(attenuation_db / 20.0);
    let x0 = (ripple.acosh() / order).cosh();

    // Sample the Chebyshev polynomial on the DFT grid and transform back.
    let spectrum: Vec<Complex64> = (0..m)
        .map(|k| {
            let x = x0 * (PI * k as f64 / m as f64).cos();
            let p = if x > 1.0 {
                (order * x.acosh()).cosh()
            } else if x < -1.0 {
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                sign * (order * (-x).acosh()).cosh()
            } else {
                (order * x.acos()).cos()
            };
            if m % 2 == 1 {
                Complex64::new(p, 0.0)
            } else {
                cis(PI * k as f64 / m as f64) * p
            }
        })
        .collect();
    let dft_re = |n: usize| -> f64 {
        spectrum
            .iter()
            .enumerate()
            .map(|(k, s)| (s * cis(-2.0 * PI * ((k * n) % m) as f64 / m as f64)).re)
            .sum()
    };

    let mut values = Vec::with_capacity(m);
    if m % 2 == 1 {
        let half = m.div_ceil(2);
        let w: Vec<f64> = (0..half).map(dft_re).collect();
        values.extend(w[1..].iter().rev());
        values.extend(w.iter());
    } else {
        let half = m / 2 + 1;
        let w: Vec<f64> = (0..half).map(dft_re).collect();
        values.extend(w[1..].iter().rev());
        values.extend(w[1..].iter());
    }
    let peak = values.iter().cloned().fold(f64::MIN, f64::max);
    values.iter_mut().for_each(|v| *v /= peak);
    // mirror once more so the symmetry is bit-exact
    for n in 0..m / 2 {
        values[m - 1 - n] = values[n];
    }
    Ok(WindowCoefficients {
        values,
        design_attenuation_db: attenuation_db,
    })
}

/// Generalized trace: `r_j = sum_i a[(i + j) mod N, i]`.
pub fn gtr(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim(format!(
            "gtr needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok((0..n).map(|j| (0..n).map(|i| a[((i + j) % n, i)]).sum()).collect())
}

/// Elementwise product of two equally sized matrices.
pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "hadamard shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// Real Toeplitz matrix `[T]_{ij} = seq[|i - j|]`.
pub fn symmetric_toeplitz(seq: &[f64], size: usize) -> Result<RealMatrix> {
    if seq.len() < size {
        return Err(Error::dim(format!(
            "Toeplitz of size {size} needs {size} lags, got {}",
            seq.len()
        )));
    }
    Ok(RealMatrix::from_fn(size, size, |i, j| seq[i.abs_diff(j)]))
}

/// Zero-mean circularly symmetric complex Gaussian sampler with a fixed
/// real covariance.
///
/// The covariance is factored once with a diagonally pivoted Cholesky
/// decomposition that stops as soon as the residual trace drops below the
/// jitter level, so nearly rank-deficient correlations (slow fading) produce a
/// thin factor and cheap draws.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    dim: usize,
    /// Factor columns, each of length `dim`.
    columns: Vec<Vec<f64>>,
    jitter: f64,
}

impl GaussianSampler {
    /// Factor `corr` (symmetric, unit diagonal) with jitter `1e-10 * trace / K`.
    pub fn new(corr: &RealMatrix) -> Result<Self> {
        let k = corr.nrows();
        if k == 0 || corr.ncols() != k {
            return Err(Error::dim(format!(
                "covariance must be square and non-empty, got {}x{}",
                corr.nrows(),
                corr.ncols()
            )));
        }
        if corr.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotCovariance("non-finite entry".into()));
        }
        for i in 0..k {
            for j in 0..i {
                let (a, b) = (corr[(i, j)], corr[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::NotCovariance(format!(
                        "asymmetric entries at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        let trace: f64 = corr.diagonal().iter().sum();
        if !(trace > 0.0) {
            return Err(Error::NotCovariance(format!("trace {trace} is not positive")));
        }
        let jitter = 1e-10 * trace / k as f64;

        // Pivots stop once every residual diagonal entry is below jitter / K, so
        // the dropped part has trace below the jitter level.
        let threshold = jitter / k as f64;
        let mut residual_diag: Vec<f64> = (0..k).map(|i| corr[(i, i)]).collect();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        while columns.len() < k {
            let (pivot, &pivot_val) = residual_diag
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty");
            if pivot_val <= threshold {
                break;
            }
            let root = pivot_val.sqrt();
            let mut col: Vec<f64> = (0..k).map(|i| corr[(i, pivot)]).collect();
            for prev in &columns {
                let s = prev[pivot];
                col.iter_mut().zip(prev).for_each(|(c, p)| *c -= p * s);
            }
            col.iter_mut().for_each(|c| *c /= root);
            col[pivot] = root;
            for (d, c) in residual_diag.iter_mut().zip(&col) {
                *d -= c * c;
            }
            residual_diag[pivot] = 0.0;
            columns.push(col);
        }

        let sampler = GaussianSampler {
            dim: k,
            columns,
            jitter,
        };
        sampler.check_residual(corr)?;
        Ok(sampler)
    }

    /// Accepts the factor when the residual is small in Frobenius norm (which
    /// bounds every eigenvalue of the residual); otherwise falls back to an
    /// exact eigenvalue check of the jittered matrix.
    fn check_residual(&self, corr: &RealMatrix) -> Result<()> {
        let k = self.dim;
        let mut frob2 = 0.0;
        for j in 0..k {
            for i in 0..k {
                let mut s = corr[(i, j)];
                for col in &self.columns {
                    s -= col[i] * col[j];
                }
                frob2 += s * s;
            }
        }
        if frob2.sqrt() <= 10.0 * self.jitter {
            return Ok(());
        }
        let mut jittered = corr.clone();
        for i in 0..k {
            jittered[(i, i)] += self.jitter;
        }
        let min_eig = SymmetricEigen::new(jittered)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -10.0 * self.jitter {
            return Err(Error::NotCovariance(format!(
                "minimum eigenvalue {min_eig:.3e} below tolerance {:.3e}",
                -10.0 * self.jitter
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of factor columns kept.
    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draw one realization into `out` (length `dim`), scaled by `amplitude`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64, out: &mut [Complex64]) {
        assert_eq!(out.len(), self.dim);
        out.iter_mut().for_each(|v| *v = ZERO);
        let scale = amplitude * std::f64::consts::FRAC_1_SQRT_2;
        for col in &self.columns {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re, im) * scale;
            out.iter_mut().zip(col).for_each(|(o, c)| *o += z * c);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        self.sample_into(rng, 1.0, &mut out);
        out
    }
}

/// One draw of a unit-power complex Gaussian vector with covariance `corr`.
pub fn sample_gaussian_process(corr: &RealMatrix, rng_seed: u64) -> Result<Vec<Complex64>> {
    let sampler = GaussianSampler::new(corr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(sampler.sample(&mut rng))
}

/// Frobenius norm of `a - b`. Panics if the shapes differ.
pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_small_cases() {
        let f1 = dft_matrix(1).unwrap();
        assert_eq!(f1[(0, 0)], c(1.0, 0.0));

        let f2 = dft_matrix(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[s, s], [s, -s]];
        for r in 0..2 {
            for col in 0..2 {
                assert!((f2[(r, col)] - c(expected[r][col], 0.0)).norm() < 1e-15);
            }
        }
        assert!(matches!(dft_matrix(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn dft_unitary() {
        for k in [1, 2, 8, 64, 2048] {
            let f = dft_matrix(k).unwrap();
            let prod = &f * f.adjoint();
            let err = frobenius_distance(&prod, &ComplexMatrix::identity(k, k));
            assert!(err < 1e-12, "K={k}: {err}");
        }
    }

    #[test]
    fn unitary_fft_matches_matrix() {
        let n = 12;
        let f = dft_matrix(n).unwrap();
        let fft = UnitaryFft::new(n);
        let x: Vec<Complex64> = (0..n).map(|i| c(i as f64 * 0.3 - 1.0, (i * i) as f64 * 0.01)).collect();
        let mut y = x.clone();
        fft.forward(&mut y);
        let expect = &f * nalgebra::DVector::from_vec(x.clone());
        for i in 0..n {
            assert!((y[i] - expect[i]).norm() < 1e-12);
        }
        fft.inverse(&mut y);
        for i in 0..n {
            assert!((y[i] - x[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugate_transform_matches_products() {
        let n = 10;
        let f = dft_matrix(n).unwrap();
        let a = ComplexMatrix::from_fn(n, n, |r, col| {
            c((r * 3 + col) as f64 % 7.0, (r as f64 - col as f64) * 0.2)
        });
        let direct = &f * &a * f.adjoint();
        let fast = UnitaryFft::new(n).conjugate_transform(&a);
        assert!(frobenius_distance(&direct, &fast) < 1e-11);
    }

    #[test]
    fn j0_known_points() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
        assert!((bessel_j0(1.0).unwrap() - 0.7651976865579666).abs() < 1e-15);
        assert!(bessel_j0(2.404825557695773).unwrap().abs() < 1e-10);
        assert_eq!(bessel_j0(-3.7).unwrap(), bessel_j0(3.7).unwrap());
        assert!(matches!(bessel_j0(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(bessel_j0(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn j0_branches_agree_at_split() {
        for x in [24.0, 24.5, 24.999, 25.0, 25.5, 30.0] {
            let a = j0_backward_recurrence(x);
            let b = j0_hankel(x);
            assert!((a - b).abs() < 1e-13, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn chebyshev_trivial_cases() {
        assert_eq!(chebyshev_window(1, 40.0).unwrap().values, vec![1.0]);
        assert!(matches!(chebyshev_window(0, 40.0), Err(Error::InvalidDimension(_))));
        assert!(matches!(chebyshev_window(5, 0.0), Err(Error::Domain(_))));
        for len in 2..40 {
            let w = chebyshev_window(len, 40.0).unwrap().values;
            for n in 0..len {
                assert_eq!(w[n], w[len - 1 - n]);
            }
            let peak = w.iter().cloned().fold(f64::MIN, f64::max);
            assert!((peak - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gtr_definition() {
        let n = 4;
        let r = gtr(&ComplexMatrix::identity(n, n)).unwrap();
        assert_eq!(r[0], c(n as f64, 0.0));
        assert!(r[1..].iter().all(|v| *v == ZERO));

        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        // [[a,b],[c,d]] -> [a+d, b+c]
        assert_eq!(gtr(&m).unwrap(), vec![c(5.0, 0.0), c(5.0, 0.0)]);
        assert!(gtr(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn circshift_moves_right() {
        assert_eq!(circshift(&[1, 2, 3, 4], 1), vec![4, 1, 2, 3]);
        assert_eq!(circshift(&[1, 2, 3, 4], 6), vec![3, 4, 1, 2]);
    }

    #[test]
    fn sampler_rank_one_case() {
        let ones = RealMatrix::from_element(16, 16, 1.0);
        let s = GaussianSampler::new(&ones).unwrap();
        assert_eq!(s.rank(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = s.sample(&mut rng);
            assert!(v.iter().all(|x| (x - v[0]).norm() < 1e-6));
        }
    }

    #[test]
    fn sampler_rejects_indefinite() {
        let mut m = RealMatrix::identity(3, 3);
        m[(0, 1)] = 1.5;
        m[(1, 0)] = 1.5;
        assert!(matches!(GaussianSampler::new(&m), Err(Error::NotCovariance(_))));
        let mut asym = RealMatrix::identity(3, 3);
        asym[(0, 2)] = 0.1;
        assert!(GaussianSampler::new(&asym).is_err());
    }

    #[test]
    fn sampler_seed_is_deterministic() {
        let m = symmetric_toeplitz(&[1.0, 0.5, 0.25, 0.125], 4).unwrap();
        assert_eq!(
            sample_gaussian_process(&m, 11).unwrap(),
            sample_gaussian_process(&m, 11).unwrap()
        );
    }
}
