//! Time-domain route used at full scale.
//!
//! The demodulated output of bin `k` is `Y_k = sum_t f_k[t] y[t]` with the
//! front end `f_k[t] = exp(-j 2 pi k (t - t0) / N) w[t] / sqrt(N)`. For a pulse
//! `p` sent through the WSSUS channel,
//!
//! ```text
//! E|Y_k|^2 = 1/N sum_{c,c'} exp(-j 2 pi k (c - c') / N) G[c, c'] M[c, c']
//! M[c, c'] = R_t(c - c') sum_i rho_i w[c + i] w[c' + i]
//! ```
//!
//! where `G = sum_q p_q p_q^H` over the transmitted pulses. `M` depends only on
//! the channel and the receive weights, `G` only on the waveform, and the sum
//! collapses to an `N`-point DFT over the lag `c - c'`. All pulses share a
//! common core on which their demodulated shape is constant, which makes `G`
//! Toeplitz there and keeps its construction cheap.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;

use crate::channel::{time_corr, PowerDelayProfile, TimeCorrModel};
use crate::error::Result;
use crate::numerics::{cis, UnitaryFft, ZERO};
use crate::waveform::{SystemConfig, Transceiver, WaveformKind};

/// Demodulated pulses of the allocated subcarriers and their Gram matrix.
#[derive(Debug, Clone)]
pub(crate) struct PulseGram {
    len: usize,
    n: usize,
    core: Range<usize>,
    edges: Vec<usize>,
    subcarriers: Vec<usize>,
    /// Value of each demodulated pulse on the core.
    core_value: Vec<Complex64>,
    /// Demodulated pulse on `edges`, one row per subcarrier.
    edge_values: Vec<Vec<Complex64>>,
    /// Row-major `len x len` Gram matrix.
    gram: Vec<Complex64>,
}

impl PulseGram {
    pub(crate) fn new(tx: &Transceiver) -> Self {
        let cfg = tx.config();
        let (n, len) = (cfg.n, cfg.symbol_len());
        let core = tx.pulse_core();
        let edges: Vec<usize> = match tx.kind() {
            WaveformKind::Uf => (0..core.start).chain(core.end..len).collect(),
            // ZP pulses vanish outside the core; CP has no edges
            _ => Vec::new(),
        };
        let subcarriers = cfg.active_subcarriers();
        let mut core_value = Vec::with_capacity(subcarriers.len());
        let mut edge_values = Vec::with_capacity(subcarriers.len());
        for &k in &subcarriers {
            let beta = tx.demodulated_pulse(k);
            core_value.push(beta[core.start]);
            edge_values.push(edges.iter().map(|&e| beta[e]).collect::<Vec<_>>());
        }
        let mut pg = PulseGram {
            len,
            n,
            core,
            edges,
            subcarriers,
            core_value,
            edge_values,
            gram: Vec::new(),
        };
        pg.gram = pg.build_gram();
        pg
    }

    /// `G[c, c'] = 1/N sum_q exp(j 2 pi q (c - c') / N) beta_q[c] conj(beta_q[c'])`.
    fn build_gram(&self) -> Vec<Complex64> {
        let (n, len) = (self.n, self.len);
        let fft = UnitaryFft::new(n);
        let sqrt_n = (n as f64).sqrt();
        let mut gram = vec![ZERO; len * len];

        // core x core: Toeplitz in c - c'
        let mut toe = vec![ZERO; n];
        for (&q, b) in self.subcarriers.iter().zip(&self.core_value) {
            toe[q] += b.norm_sqr() / n as f64;
        }
        fft.inverse(&mut toe);
        toe.iter_mut().for_each(|v| *v *= sqrt_n);
        for c in self.core.clone() {
            for c2 in self.core.clone() {
                gram[c * len + c2] = toe[(c + n - c2 % n) % n];
            }
        }

        // edge rows against the core, via one DFT per edge sample
        for (ei, &c) in self.edges.iter().enumerate() {
            let mut w = vec![ZERO; n];
            for (qi, &q) in self.subcarriers.iter().enumerate() {
                let phase = cis(2.0 * PI * ((q * c) % n) as f64 / n as f64);
                w[q] += self.edge_values[qi][ei] * self.core_value[qi].conj() * phase / n as f64;
            }
            fft.forward(&mut w);
            for c2 in self.core.clone() {
                let v = w[c2 % n] * sqrt_n;
                gram[c * len + c2] = v;
                gram[c2 * len + c] = v.conj();
            }
        }

        // edge x edge, directly
        for (ei, &c) in self.edges.iter().enumerate() {
            for (ej, &c2) in self.edges.iter().enumerate().take(ei + 1) {
                let mut acc = ZERO;
                for (qi, &q) in self.subcarriers.iter().enumerate() {
                    let lag = (q * ((c + n - c2 % n) % n)) % n;
                    acc += cis(2.0 * PI * lag as f64 / n as f64)
                        * self.edge_values[qi][ei]
                        * self.edge_values[qi][ej].conj();
                }
                let v = acc / n as f64;
                gram[c * len + c2] = v;
                gram[c2 * len + c] = v.conj();
            }
        }
        gram
    }

    pub(crate) fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    /// `1/N^2 beta_k^H M beta_k` for every allocated subcarrier.
    pub(crate) fn signal_powers(&self, m: &ChannelWeights) -> Vec<f64> {
        let core_sum = m.core_sum(&self.core);
        let row_sums: Vec<f64> = self.edges.iter().map(|&e| m.core_row_sum(e, &self.core)).collect();
        let edge_block: Vec<Vec<f64>> = self
            .edges
            .iter()
            .map(|&e| self.edges.iter().map(|&e2| m.get(e, e2)).collect())
            .collect();
        let norm = 1.0 / (self.n * self.n) as f64;
        (0..self.subcarriers.len())
            .map(|i| {
                let b = self.core_value[i];
                let edge = &self.edge_values[i];
                let cross: Complex64 = edge.iter().zip(&row_sums).map(|(d, s)| d * s).sum();
                let mut quad = 0.0;
                for (ei, row) in edge_block.iter().enumerate() {
                    for (ej, w) in row.iter().enumerate() {
                        // imaginary parts cancel because M is symmetric
                        quad += (edge[ei].conj() * edge[ej]).re * w;
                    }
                }
                (b.norm_sqr() * core_sum + 2.0 * (b.conj() * cross).re + quad) * norm
            })
            .collect()
    }

    /// `E|Y_k|^2` for every bin `k` of the `N`-point grid.
    pub(crate) fn profile(&self, m: &ChannelWeights) -> Vec<f64> {
        let (n, len) = (self.n, self.len);
        let mut z = vec![ZERO; n];
        for lag in 0..len {
            let mut e = ZERO;
            for c2 in 0..len - lag {
                let c = c2 + lag;
                let w = m.get(c, c2);
                if w != 0.0 {
                    e += self.gram[c * len + c2] * w;
                }
            }
            z[lag % n] += e;
            if lag > 0 {
                z[(n - lag % n) % n] += e.conj();
            }
        }
        // Q(k) = 1/N sum_d z[d] exp(-j 2 pi k d / N)
        let fft = UnitaryFft::new(n);
        fft.forward(&mut z);
        let scale = 1.0 / (n as f64).sqrt();
        z.iter().map(|v| v.re * scale).collect()
    }
}

/// `M[c, c'] = R_t(c - c') sum_i rho_i w[c + i] w[c' + i]`, stored as the lower
/// triangle of a symmetric `len x len` matrix.
#[derive(Debug, Clone)]
pub(crate) struct ChannelWeights {
    len: usize,
    lower: Vec<f64>,
}

impl ChannelWeights {
    pub(crate) fn new(pdp: &PowerDelayProfile, rt: &[f64], weights: &[f64], len: usize) -> Self {
        let mut lower = vec![0.0; len * len];
        for (d, rho) in pdp.taps() {
            let w: Vec<f64> = (0..len).map(|c| weights.get(c + d).copied().unwrap_or(0.0)).collect();
            let support: Vec<usize> = (0..len).filter(|&c| w[c] != 0.0).collect();
            for (si, &c) in support.iter().enumerate() {
                let row = &mut lower[c * len..];
                let wc = rho * w[c];
                for &c2 in &support[..=si] {
                    row[c2] += wc * w[c2];
                }
            }
        }
        for c in 0..len {
            for c2 in 0..=c {
                lower[c * len + c2] *= rt[c - c2];
            }
        }
        ChannelWeights { len, lower }
    }

    #[inline]
    pub(crate) fn get(&self, c: usize, c2: usize) -> f64 {
        if c >= c2 {
            self.lower[c * self.len + c2]
        } else {
            self.lower[c2 * self.len + c]
        }
    }

    fn core_row_sum(&self, c: usize, core: &Range<usize>) -> f64 {
        core.clone().map(|c2| self.get(c, c2)).sum()
    }

    fn core_sum(&self, core: &Range<usize>) -> f64 {
        let mut total = 0.0;
        for c in core.clone() {
            total += self.lower[c * self.len + core.start..c * self.len + c]
                .iter()
                .sum::<f64>()
                * 2.0;
            total += self.lower[c * self.len + c];
        }
        total
    }
}

/// Per-bin powers of one transmitter through one channel.
#[derive(Debug, Clone)]
pub(crate) struct Profiles {
    /// Signal power of each allocated subcarrier, in allocation order.
    pub signal: Vec<f64>,
    /// Total current-symbol power landing on every bin.
    pub detection: Vec<f64>,
    /// Previous-symbol power landing on every bin.
    pub isi: Vec<f64>,
}

/// Evaluates the lag-domain powers for one waveform and allocation.
#[derive(Debug, Clone)]
pub(crate) struct LagAnalyzer {
    tx: Transceiver,
    gram: PulseGram,
}

impl LagAnalyzer {
    pub(crate) fn new(cfg: &SystemConfig, kind: WaveformKind) -> Result<Self> {
        let tx = Transceiver::new(cfg, kind)?;
        let gram = PulseGram::new(&tx);
        Ok(LagAnalyzer { tx, gram })
    }

    pub(crate) fn config(&self) -> &SystemConfig {
        self.tx.config()
    }

    pub(crate) fn subcarriers(&self) -> &[usize] {
        self.gram.subcarriers()
    }

    pub(crate) fn profiles(&self, pdp: &PowerDelayProfile, model: &TimeCorrModel) -> Result<Profiles> {
        let cfg = self.tx.config();
        pdp.ensure_supported(cfg)?;
        let len = cfg.symbol_len();
        let d = pdp.max_delay();
        let rt = time_corr(model, len)?;
        let detection_w = ChannelWeights::new(pdp, rt.values(), &self.tx.detection_weights(d), len);
        let isi_w = ChannelWeights::new(pdp, rt.values(), &self.tx.isi_weights(d), len);
        let signal = self.gram.signal_powers(&detection_w);
        Ok(Profiles {
            signal,
            detection: self.gram.profile(&detection_w),
            isi: self.gram.profile(&isi_w),
        })
    }
}
