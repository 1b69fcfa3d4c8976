//! Direct constructions shared by the structural tests and the acceptance run.

#![allow(dead_code)]

use std::f64::consts::PI;

use dispersive_sinr::channel::SpectralStats;
use dispersive_sinr::numerics::ComplexMatrix;
use dispersive_sinr::waveform::{design_subband_filter, SystemConfig, WaveformKind};
use num_complex::Complex64;

pub const SIZES: [(usize, usize); 3] = [(16, 2), (32, 4), (64, 8)];

pub fn dft(n: usize) -> ComplexMatrix {
    let s = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |r, c| {
        Complex64::from_polar(s, -2.0 * PI * (r * c) as f64 / n as f64)
    })
}

pub fn config(n: usize, l: usize) -> SystemConfig {
    // a few subbands, one of them wrapping past bin 0
    let n_rb = 4;
    let cfg = SystemConfig::new(n, l, n_rb, 0, 1).unwrap();
    cfg.with_subbands(vec![n_rb, 2 * n_rb + 1, n - 2]).unwrap()
}

/// `(N + L) x N` time-domain transmit operator, zero-padded to `2N` rows.
pub fn transmit_operator(cfg: &SystemConfig, kind: WaveformKind) -> ComplexMatrix {
    let (n, l) = (cfg.n, cfg.l);
    let idft = dft(n).adjoint();
    let mut a = ComplexMatrix::zeros(2 * n, n);
    match kind {
        WaveformKind::Cp => {
            for t in 0..n + l {
                let src = (t + n - l) % n;
                for k in cfg.active_subcarriers() {
                    a[(t, k)] = idft[(src, k)];
                }
            }
        }
        WaveformKind::Zp => {
            for t in 0..n {
                for k in cfg.active_subcarriers() {
                    a[(t, k)] = idft[(t, k)];
                }
            }
        }
        WaveformKind::Uf => {
            for sb in 0..cfg.subbands.len() {
                let g = design_subband_filter(cfg, sb).unwrap();
                for k in cfg.subband_subcarriers(sb) {
                    // linear convolution of the filter with the N-sample IDFT column
                    for t in 0..n + l {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (i, gi) in g.iter().enumerate() {
                            if t >= i && t - i < n {
                                acc += gi * idft[(t - i, k)];
                            }
                        }
                        a[(t, k)] = acc;
                    }
                }
            }
        }
    }
    a
}

/// Time-domain receive rows for the current window and for the previous
/// symbol's tail, each `N x 2N`.
pub fn receive_operators(cfg: &SystemConfig, kind: WaveformKind, d: usize) -> (ComplexMatrix, ComplexMatrix) {
    let (n, l) = (cfg.n, cfg.l);
    let start = if kind == WaveformKind::Cp { l } else { 0 };
    let f = |k: usize, t: usize| {
        Complex64::from_polar(
            cfg.window[t] / (n as f64).sqrt(),
            -2.0 * PI * (k as f64) * (t as f64 - start as f64) / n as f64,
        )
    };
    let mut rd = ComplexMatrix::zeros(n, 2 * n);
    let mut ri = ComplexMatrix::zeros(n, 2 * n);
    for k in 0..n {
        for t in start..n + l {
            rd[(k, t)] = f(k, t);
        }
        // the previous symbol's response reaches D samples past its end
        for t in start..d {
            ri[(k, n + l + t)] = f(k, t);
        }
    }
    (rd, ri)
}

pub fn random_hermitian(size: usize, seed: u64) -> ComplexMatrix {
    // small deterministic generator; the values only need to be generic
    let mut state = seed;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let a = ComplexMatrix::from_fn(size, size, |_, _| Complex64::new(next(), next()));
    &a * a.adjoint()
}

/// `r_ij = R_f(i - j) / 2N * sum_{a,b} Gamma(a, b) R_D(i - a, j - b)`.
pub fn double_sum_kernel(gamma: &ComplexMatrix, stats: &SpectralStats) -> ComplexMatrix {
    let two_n = 2 * stats.n;
    let mut direct = ComplexMatrix::zeros(two_n, two_n);
    for i in 0..two_n {
        for j in 0..two_n {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..two_n {
                for b in 0..two_n {
                    acc += gamma[(a, b)] * stats.r_d[((i + two_n - a) % two_n, (j + two_n - b) % two_n)];
                }
            }
            direct[(i, j)] = acc * stats.r_f[(i + two_n - j) % two_n] / two_n as f64;
        }
    }
    direct
}
