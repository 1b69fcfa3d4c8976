//! Frequency-domain route: correlation kernels `R_H = E[H Gamma H^H]` on the
//! `2N` grid and quadratic forms with the receive operators.
//!
//! With `H = F h F^H` for the circular channel matrix `h`, the second-order
//! statistics factor as
//!
//! ```text
//! E[H(k,k') H*(l,l')] = R_f(k - l) / (2N) * R_D(k - k', l - l')
//! ```
//!
//! so `R_H(i, j) = R_f(i - j) / (2N) * S(i, j)` where `S` is the 2D circular
//! convolution of `Gamma` with `R_D`. The kernel is computed either by 2D FFTs
//! (default) or row by row from generalized traces.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::channel::SpectralStats;
use crate::error::{Error, Result};
use crate::numerics::{gtr, ComplexMatrix};
use crate::waveform::{receive_matrices, PulseMatrix, SystemConfig, WaveformKind};

use super::PowerBreakdown;
use crate::channel::{PowerDelayProfile, TimeCorrModel};

/// Which part of the transmit Gram matrix a kernel is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    /// `Gamma = T T^H`.
    Total,
    /// `Gamma = t_k t_k^H`.
    Signal(usize),
    /// `Gamma = T T^H - t_k t_k^H`.
    Ici(usize),
}

/// Evaluation strategy for the 2D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMethod {
    #[default]
    Fft,
    /// One generalized trace per column; `O(N^4)`, kept for cross-checks.
    GtrRowwise,
}

#[derive(Debug, Clone)]
pub struct CorrKernel {
    pub variant: KernelVariant,
    pub r_h: ComplexMatrix,
}

fn check_dims(gamma: &ComplexMatrix, stats: &SpectralStats) -> Result<usize> {
    let two_n = 2 * stats.n;
    if gamma.nrows() != two_n || gamma.ncols() != two_n {
        return Err(Error::dim(format!(
            "Gram matrix is {}x{}, statistics are on a {two_n}-point grid",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    if stats.r_f.len() != two_n || stats.r_d.nrows() != two_n || stats.r_d.ncols() != two_n {
        return Err(Error::dim("inconsistent spectral statistics"));
    }
    Ok(two_n)
}

/// `R_H` for an arbitrary `2N x 2N` Gram matrix.
pub fn correlate(gamma: &ComplexMatrix, stats: &SpectralStats, method: KernelMethod) -> Result<ComplexMatrix> {
    let two_n = check_dims(gamma, stats)?;
    let scale = 1.0 / two_n as f64;
    let mut r_h = match method {
        KernelMethod::Fft => circular_convolve_2d(gamma, &stats.r_d),
        KernelMethod::GtrRowwise => {
            // Q(n, m) = R_D(-m, -n); gtr(Gamma P_j Q)_i = S(i, j)
            let q = ComplexMatrix::from_fn(two_n, two_n, |n, m| {
                stats.r_d[((two_n - m) % two_n, (two_n - n) % two_n)]
            });
            let mut s = ComplexMatrix::zeros(two_n, two_n);
            for j in 0..two_n {
                let shifted = ComplexMatrix::from_fn(two_n, two_n, |n, m| q[((n + two_n - j) % two_n, m)]);
                let traces = gtr(&(gamma * shifted))?;
                for (i, v) in traces.into_iter().enumerate() {
                    s[(i, j)] = v;
                }
            }
            s
        }
    };
    for j in 0..two_n {
        for i in 0..two_n {
            r_h[(i, j)] *= stats.r_f[(i + two_n - j) % two_n] * scale;
        }
    }
    Ok(r_h)
}

/// 2D circular convolution `S(i, j) = sum_{a,b} A(a, b) B(i - a, j - b)`.
pub fn circular_convolve_2d(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = (a.nrows(), a.ncols());
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(cols);
    let col_fft = planner.plan_fft_forward(rows);
    let row_ifft = planner.plan_fft_inverse(cols);
    let col_ifft = planner.plan_fft_inverse(rows);

    let transform = |m: &ComplexMatrix, rf: &dyn rustfft::Fft<f64>, cf: &dyn rustfft::Fft<f64>| {
        let mut out = m.clone();
        // nalgebra is column-major: columns are contiguous
        for mut col in out.column_iter_mut() {
            cf.process(col.as_mut_slice());
        }
        let mut t = out.transpose();
        for mut col in t.column_iter_mut() {
            rf.process(col.as_mut_slice());
        }
        t.transpose()
    };
    let fa = transform(a, row_fft.as_ref(), col_fft.as_ref());
    let fb = transform(b, row_fft.as_ref(), col_fft.as_ref());
    let product = fa.component_mul(&fb);
    let mut s = transform(&product, row_ifft.as_ref(), col_ifft.as_ref());
    let norm = 1.0 / (rows * cols) as f64;
    s.iter_mut().for_each(|v| *v *= norm);
    s
}

fn rank_one(column: &[Complex64]) -> ComplexMatrix {
    let v = ComplexMatrix::from_column_slice(column.len(), 1, column);
    &v * v.adjoint()
}

/// Kernel of one variant for the pulse matrix `pulse`.
pub fn corr_kernel(pulse: &PulseMatrix, stats: &SpectralStats, variant: KernelVariant) -> Result<CorrKernel> {
    corr_kernel_with(pulse, stats, variant, KernelMethod::Fft)
}

pub fn corr_kernel_with(
    pulse: &PulseMatrix,
    stats: &SpectralStats,
    variant: KernelVariant,
    method: KernelMethod,
) -> Result<CorrKernel> {
    let column = |k: usize| {
        if k >= pulse.t.ncols() {
            Err(Error::dim(format!("subcarrier {k} outside 0..{}", pulse.t.ncols())))
        } else {
            Ok(pulse.column(k))
        }
    };
    let gamma = match variant {
        KernelVariant::Total => pulse.gamma.clone(),
        KernelVariant::Signal(k) => rank_one(&column(k)?),
        KernelVariant::Ici(k) => &pulse.gamma - rank_one(&column(k)?),
    };
    Ok(CorrKernel {
        variant,
        r_h: correlate(&gamma, stats, method)?,
    })
}

/// `w R w^H` for one receive row.
pub fn row_power(w: &ComplexMatrix, row: usize, r_h: &ComplexMatrix) -> f64 {
    let n = r_h.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..n {
        let mut inner = Complex64::new(0.0, 0.0);
        for a in 0..n {
            inner += w[(row, a)] * r_h[(a, b)];
        }
        acc += inner * w[(row, b)].conj();
    }
    acc.re
}

/// `diag(W_I R_H W_I^H)` over all `N` rows.
pub fn isi_power(w_i: &ComplexMatrix, total: &CorrKernel) -> Result<Vec<f64>> {
    if w_i.ncols() != total.r_h.nrows() {
        return Err(Error::dim(format!(
            "ISI operator has {} columns, kernel is {}x{}",
            w_i.ncols(),
            total.r_h.nrows(),
            total.r_h.ncols()
        )));
    }
    Ok((0..w_i.nrows()).map(|k| row_power(w_i, k, &total.r_h)).collect())
}

/// Per-subcarrier `(P_S, P_ICI)` for the listed subcarriers.
pub fn signal_ici_power(
    w_d: &ComplexMatrix,
    pulse: &PulseMatrix,
    stats: &SpectralStats,
    subcarriers: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if w_d.ncols() != pulse.t.nrows() {
        return Err(Error::dim("detection operator and pulse matrix disagree"));
    }
    let total = corr_kernel(pulse, stats, KernelVariant::Total)?;
    let mut p_s = Vec::with_capacity(subcarriers.len());
    let mut p_ici = Vec::with_capacity(subcarriers.len());
    for &k in subcarriers {
        let signal = corr_kernel(pulse, stats, KernelVariant::Signal(k))?;
        let s = row_power(w_d, k, &signal.r_h);
        p_s.push(s);
        p_ici.push(row_power(w_d, k, &total.r_h) - s);
    }
    Ok((p_s, p_ici))
}

/// Full breakdown through the `2N`-grid operators. Cost grows like `N^3` per
/// subcarrier, so this route is meant for small systems and cross-checks.
pub fn breakdown(
    cfg: &SystemConfig,
    kind: WaveformKind,
    pdp: &PowerDelayProfile,
    model: &TimeCorrModel,
) -> Result<PowerBreakdown> {
    pdp.ensure_supported(cfg)?;
    let pulse = crate::waveform::pulse_matrix(cfg, kind)?;
    let rx = receive_matrices(cfg, kind, pdp.max_delay())?;
    let stats = SpectralStats::new(pdp, model, cfg.n)?;
    let subcarriers = cfg.active_subcarriers();
    let (p_s, p_ici) = signal_ici_power(&rx.w_d, &pulse, &stats, &subcarriers)?;
    let total = corr_kernel(&pulse, &stats, KernelVariant::Total)?;
    let isi_all = isi_power(&rx.w_i, &total)?;
    let p_isi = subcarriers.iter().map(|&k| isi_all[k]).collect();
    Ok(PowerBreakdown::new(
        subcarriers,
        p_s,
        p_ici,
        p_isi,
        cfg.noise_variance(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{exp_pdp, TimeCorrModel};
    use crate::numerics::frobenius_distance;
    use crate::waveform::pulse_matrix;

    #[test]
    fn static_flat_kernel_is_gram() {
        let cfg = SystemConfig::new(8, 2, 2, 0, 3).unwrap();
        let pulse = pulse_matrix(&cfg, WaveformKind::Cp).unwrap();
        let flat = PowerDelayProfile::new(vec![0], vec![1.0]).unwrap();
        let stats = SpectralStats::new(&flat, &TimeCorrModel::Static, 8).unwrap();
        let k = corr_kernel(&pulse, &stats, KernelVariant::Total).unwrap();
        assert!(frobenius_distance(&k.r_h, &pulse.gamma) < 1e-12);
    }

    #[test]
    fn fft_and_gtr_routes_agree() {
        let cfg = SystemConfig::new(8, 2, 2, 1, 3).unwrap();
        let pulse = pulse_matrix(&cfg, WaveformKind::Uf).unwrap();
        let pdp = exp_pdp(0.5, 4, 1).unwrap();
        let stats = SpectralStats::new(&pdp, &TimeCorrModel::Jakes { fd_ts: 0.02 }, 8).unwrap();
        let a = correlate(&pulse.gamma, &stats, KernelMethod::Fft).unwrap();
        let b = correlate(&pulse.gamma, &stats, KernelMethod::GtrRowwise).unwrap();
        assert!(frobenius_distance(&a, &b) < 1e-11);
    }

    #[test]
    fn variants_add_up() {
        let cfg = SystemConfig::new(8, 2, 4, 0, 2).unwrap();
        let pulse = pulse_matrix(&cfg, WaveformKind::Zp).unwrap();
        let pdp = exp_pdp(0.3, 3, 2).unwrap();
        let stats = SpectralStats::new(&pdp, &TimeCorrModel::Jakes { fd_ts: 0.05 }, 8).unwrap();
        let total = corr_kernel(&pulse, &stats, KernelVariant::Total).unwrap();
        for k in [0, 3, 5] {
            let s = corr_kernel(&pulse, &stats, KernelVariant::Signal(k)).unwrap();
            let i = corr_kernel(&pulse, &stats, KernelVariant::Ici(k)).unwrap();
            assert!(frobenius_distance(&(s.r_h + i.r_h), &total.r_h) < 1e-12);
        }
        assert!(corr_kernel(&pulse, &stats, KernelVariant::Signal(8)).is_err());
    }
}
