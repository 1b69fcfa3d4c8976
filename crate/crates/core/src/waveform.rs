//! Transmit and receive chains for CP-, ZP- and UF-OFDM.
//!
//! Two equivalent descriptions live here. The time-domain [`Transceiver`]
//! builds symbols sample by sample and is what the Monte Carlo oracle drives.
//! The frequency-domain [`PulseMatrix`] and [`ReceiveMatrices`] express the
//! same chains as `2N`-point operators, where the channel becomes
//! `H = F_2N h F_2N^H`:
//!
//! ```text
//! Y_m = W_D H_m T X_m + W_I H_{m-1} T X_{m-1} + n
//! ```
//!
//! Conventions used throughout:
//!
//! * a symbol spans `N + L` samples; the `2N` grid zero-pads it;
//! * CP prepends the last `L` body samples, ZP appends `L` zeros after the
//!   body, UF convolves each subband with a length-`L + 1` FIR filter;
//! * the CP receiver drops the first `L` samples and takes an `N`-point DFT;
//!   the ZP and UF receivers fold all `N + L` samples onto the `N`-point grid
//!   (overlap-add), which is the same as keeping every second bin of a
//!   `2N`-point DFT scaled by `sqrt(2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{chebyshev_window, circshift, cis, ComplexMatrix, UnitaryFft, ZERO};

/// Waveform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Cp,
    Zp,
    Uf,
}

impl WaveformKind {
    pub const ALL: [WaveformKind; 3] = [WaveformKind::Cp, WaveformKind::Zp, WaveformKind::Uf];

    pub fn name(self) -> &'static str {
        match self {
            WaveformKind::Cp => "cp",
            WaveformKind::Zp => "zp",
            WaveformKind::Uf => "uf",
        }
    }

    /// First received sample fed to the DFT, and the sample the DFT phase is
    /// referenced to.
    pub(crate) fn front_end_start(self, l: usize) -> usize {
        match self {
            WaveformKind::Cp => l,
            WaveformKind::Zp | WaveformKind::Uf => 0,
        }
    }
}

impl std::str::FromStr for WaveformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp" => Ok(WaveformKind::Cp),
            "zp" => Ok(WaveformKind::Zp),
            "uf" => Ok(WaveformKind::Uf),
            other => Err(Error::config(format!("unknown waveform '{other}'"))),
        }
    }
}

impl std::fmt::Display for WaveformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Waveform dimensions, allocation and receiver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Subcarriers (DFT size).
    pub n: usize,
    /// Guard length: CP/ZP samples, or the UF filter order.
    pub l: usize,
    /// UF filter length, always `l + 1`.
    pub lf: usize,
    /// Subcarriers per subband.
    pub n_rb: usize,
    /// First subcarrier of every allocated subband; a subband occupies
    /// `start .. start + n_rb` modulo `n`.
    pub subbands: Vec<usize>,
    pub noise_floor_db: f64,
    /// Receive window over the `n + l` samples of a symbol.
    pub window: Vec<f64>,
    /// Sidelobe attenuation of the UF prototype filter.
    pub filter_attenuation_db: f64,
}

impl SystemConfig {
    /// Config with `m` contiguous subbands starting at `first_subcarrier`,
    /// rectangular receive window, -40 dB noise floor and 40 dB filters.
    pub fn new(n: usize, l: usize, n_rb: usize, first_subcarrier: usize, m: usize) -> Result<Self> {
        let cfg = SystemConfig {
            n,
            l,
            lf: l + 1,
            n_rb,
            subbands: (0..m).map(|i| (first_subcarrier + i * n_rb) % n.max(1)).collect(),
            noise_floor_db: -40.0,
            window: vec![1.0; n + l],
            filter_attenuation_db: 40.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `N = 1024`, `L = 73`, 85 subbands of 12 subcarriers centred in the band.
    pub fn downlink_default() -> Self {
        let (n, n_rb, m) = (1024, 12, 85);
        Self::new(n, 73, n_rb, (n - n_rb * m) / 2, m).expect("default config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::dim(format!("N = {} is too small", self.n)));
        }
        if self.l >= self.n {
            return Err(Error::dim(format!("L = {} must be below N = {}", self.l, self.n)));
        }
        if self.lf != self.l + 1 {
            return Err(Error::config(format!(
                "filter length {} must equal L + 1 = {}",
                self.lf,
                self.l + 1
            )));
        }
        if self.n_rb == 0 {
            return Err(Error::dim("subbands need at least one subcarrier"));
        }
        if self.window.len() != self.n + self.l {
            return Err(Error::dim(format!(
                "receive window has {} samples, expected N + L = {}",
                self.window.len(),
                self.n + self.l
            )));
        }
        if self.window.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("receive window entries must lie in [0, 1]"));
        }
        if !self.noise_floor_db.is_finite() {
            return Err(Error::config("noise floor must be finite"));
        }
        if !(self.filter_attenuation_db > 0.0) {
            return Err(Error::config("filter attenuation must be positive"));
        }
        let mut used = vec![false; self.n];
        for &start in &self.subbands {
            if start >= self.n {
                return Err(Error::dim(format!("subband start {start} outside 0..{}", self.n)));
            }
            for j in 0..self.n_rb {
                let k = (start + j) % self.n;
                if std::mem::replace(&mut used[k], true) {
                    return Err(Error::config(format!("subcarrier {k} allocated twice")));
                }
            }
        }
        Ok(())
    }

    /// Samples per multicarrier symbol.
    pub fn symbol_len(&self) -> usize {
        self.n + self.l
    }

    pub fn noise_variance(&self) -> f64 {
        10f64.powf(self.noise_floor_db / 10.0)
    }

    pub fn subband_subcarriers(&self, index: usize) -> Vec<usize> {
        let start = self.subbands[index];
        (0..self.n_rb).map(|j| (start + j) % self.n).collect()
    }

    /// Occupied subcarriers in allocation order.
    pub fn active_subcarriers(&self) -> Vec<usize> {
        (0..self.subbands.len())
            .flat_map(|i| self.subband_subcarriers(i))
            .collect()
    }

    /// Same system with a different allocation.
    pub fn with_subbands(&self, subbands: Vec<usize>) -> Result<Self> {
        let cfg = SystemConfig {
            subbands,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Complex FIR taps of the UF filter for one subband.
///
/// The Chebyshev prototype is shifted to the subband centre and scaled so
/// that a UF symbol carries unit energy per QAM symbol on average over the
/// subband.
pub fn design_subband_filter(cfg: &SystemConfig, subband_index: usize) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if subband_index >= cfg.subbands.len() {
        return Err(Error::dim(format!(
            "subband {subband_index} not allocated ({} subbands)",
            cfg.subbands.len()
        )));
    }
    let proto = chebyshev_window(cfg.lf, cfg.filter_attenuation_db)?;
    let n = cfg.n;
    let centre = cfg.subbands[subband_index] as f64 + (cfg.n_rb as f64 - 1.0) / 2.0;
    let mut taps: Vec<Complex64> = proto
        .values
        .iter()
        .enumerate()
        .map(|(l, &w)| cis(2.0 * PI * centre * l as f64 / n as f64) * w)
        .collect();

    let energy: f64 = cfg
        .subband_subcarriers(subband_index)
        .iter()
        .map(|&k| uf_pulse_energy(&taps, n, k))
        .sum::<f64>()
        / cfg.n_rb as f64;
    let scale = 1.0 / energy.sqrt();
    taps.iter_mut().for_each(|t| *t *= scale);
    Ok(taps)
}

/// Energy of `g * f_k` where `f_k` is the unit-energy tone of subcarrier `k`.
fn uf_pulse_energy(taps: &[Complex64], n: usize, k: usize) -> f64 {
    demodulated_uf_pulse(taps, n, k)
        .iter()
        .map(|b| b.norm_sqr())
        .sum::<f64>()
        / n as f64
}

/// `beta[c] = sum_{l : 0 <= c - l < N} g[l] exp(-j 2 pi k l / N)` for `c` in
/// `0..N+L`; the UF pulse of subcarrier `k` is `exp(j 2 pi k c / N) beta[c] / sqrt(N)`.
pub(crate) fn demodulated_uf_pulse(taps: &[Complex64], n: usize, k: usize) -> Vec<Complex64> {
    let lf = taps.len();
    let len = n + lf - 1;
    let modulated: Vec<Complex64> = taps
        .iter()
        .enumerate()
        .map(|(l, g)| g * cis(-2.0 * PI * ((k * l) % n) as f64 / n as f64))
        .collect();
    let mut prefix = vec![ZERO; lf + 1];
    for l in 0..lf {
        prefix[l + 1] = prefix[l] + modulated[l];
    }
    (0..len)
        .map(|c| {
            let lo = (c + 1).saturating_sub(n);
            let hi = c.min(lf - 1);
            prefix[hi + 1] - prefix[lo]
        })
        .collect()
}

/// Sample-level transmitter and receiver for one waveform.
#[derive(Debug, Clone)]
pub struct Transceiver {
    cfg: SystemConfig,
    kind: WaveformKind,
    filters: Vec<Vec<Complex64>>,
    fft: UnitaryFft,
}

impl Transceiver {
    pub fn new(cfg: &SystemConfig, kind: WaveformKind) -> Result<Self> {
        cfg.validate()?;
        let filters = match kind {
            WaveformKind::Uf => (0..cfg.subbands.len())
                .map(|i| design_subband_filter(cfg, i))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        Ok(Transceiver {
            cfg: cfg.clone(),
            kind,
            filters,
            fft: UnitaryFft::new(cfg.n),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn kind(&self) -> WaveformKind {
        self.kind
    }

    /// UF filter taps of each subband (empty for CP/ZP).
    pub fn filters(&self) -> &[Vec<Complex64>] {
        &self.filters
    }

    /// Time-domain symbol for a full `N`-bin spectrum. Bins outside the
    /// allocation are ignored.
    pub fn modulate_spectrum(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        if spectrum.len() != n {
            return Err(Error::dim(format!(
                "spectrum has {} bins, expected {n}",
                spectrum.len()
            )));
        }
        let mut out = vec![ZERO; n + l];
        match self.kind {
            WaveformKind::Cp | WaveformKind::Zp => {
                let mut body = vec![ZERO; n];
                for k in self.cfg.active_subcarriers() {
                    body[k] = spectrum[k];
                }
                self.fft.inverse(&mut body);
                if self.kind == WaveformKind::Cp {
                    out[..l].copy_from_slice(&body[n - l..]);
                    out[l..].copy_from_slice(&body);
                } else {
                    out[..n].copy_from_slice(&body);
                }
            }
            WaveformKind::Uf => {
                let mut body = vec![ZERO; n];
                for (sb, taps) in self.filters.iter().enumerate() {
                    body.iter_mut().for_each(|v| *v = ZERO);
                    for k in self.cfg.subband_subcarriers(sb) {
                        body[k] = spectrum[k];
                    }
                    self.fft.inverse(&mut body);
                    for (i, &x) in body.iter().enumerate() {
                        for (j, &g) in taps.iter().enumerate() {
                            out[i + j] += g * x;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Time-domain symbol from per-subband QAM vectors (`n_rb` each).
    pub fn modulate(&self, qam: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
        if qam.len() != self.cfg.subbands.len() {
            return Err(Error::dim(format!(
                "{} QAM vectors for {} subbands",
                qam.len(),
                self.cfg.subbands.len()
            )));
        }
        let mut spectrum = vec![ZERO; self.cfg.n];
        for (sb, symbols) in qam.iter().enumerate() {
            if symbols.len() != self.cfg.n_rb {
                return Err(Error::dim(format!(
                    "subband {sb} carries {} symbols, expected {}",
                    symbols.len(),
                    self.cfg.n_rb
                )));
            }
            for (k, &s) in self.cfg.subband_subcarriers(sb).iter().zip(symbols) {
                spectrum[*k] = s;
            }
        }
        self.modulate_spectrum(&spectrum)
    }

    /// Time-domain pulse of a unit symbol on subcarrier `k` (`N + L` samples).
    pub fn pulse(&self, k: usize) -> Vec<Complex64> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        let scale = 1.0 / (n as f64).sqrt();
        let phase = |c: usize| cis(2.0 * PI * ((k * c) % n) as f64 / n as f64);
        match self.kind {
            WaveformKind::Cp => (0..n + l).map(|c| phase((c + n - l) % n) * scale).collect(),
            WaveformKind::Zp => (0..n + l)
                .map(|c| if c < n { phase(c) * scale } else { ZERO })
                .collect(),
            WaveformKind::Uf => match self.subband_of(k) {
                Some(sb) => demodulated_uf_pulse(&self.filters[sb], n, k)
                    .into_iter()
                    .enumerate()
                    .map(|(c, b)| phase(c) * b * scale)
                    .collect(),
                None => vec![ZERO; n + l],
            },
        }
    }

    /// Subband index holding subcarrier `k`, if allocated.
    pub fn subband_of(&self, k: usize) -> Option<usize> {
        let n = self.cfg.n;
        self.cfg.subbands.iter().position(|&s| (k + n - s) % n < self.cfg.n_rb)
    }

    /// Receiver front end: windowing, guard handling and `N`-point DFT of the
    /// `N + L` samples of one detection window.
    pub fn demodulate(&self, rx: &[Complex64]) -> Result<Vec<Complex64>> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        if rx.len() != n + l {
            return Err(Error::dim(format!("received {} samples, expected {}", rx.len(), n + l)));
        }
        let start = self.kind.front_end_start(l);
        let mut buf = vec![ZERO; n];
        for t in start..n + l {
            buf[(t - start) % n] += rx[t] * self.cfg.window[t];
        }
        self.fft.forward(&mut buf);
        Ok(buf)
    }

    /// Single output bin of [`Self::demodulate`].
    pub fn demodulate_bin(&self, rx: &[Complex64], k: usize) -> Complex64 {
        let (n, l) = (self.cfg.n, self.cfg.l);
        let start = self.kind.front_end_start(l);
        let scale = 1.0 / (n as f64).sqrt();
        let mut acc = ZERO;
        for t in start..n + l {
            let e = (k * ((t - start) % n)) % n;
            acc += rx[t] * self.cfg.window[t] * cis(-2.0 * PI * e as f64 / n as f64);
        }
        acc * scale
    }

    /// `beta_k[c] = sqrt(N) exp(-j 2 pi k c / N) pulse_k[c]`: the pulse with its
    /// carrier removed.
    pub(crate) fn demodulated_pulse(&self, k: usize) -> Vec<Complex64> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        match self.kind {
            WaveformKind::Cp => vec![cis(-2.0 * PI * ((k * l) % n) as f64 / n as f64); n + l],
            WaveformKind::Zp => (0..n + l)
                .map(|c| if c < n { Complex64::new(1.0, 0.0) } else { ZERO })
                .collect(),
            WaveformKind::Uf => match self.subband_of(k) {
                Some(sb) => demodulated_uf_pulse(&self.filters[sb], n, k),
                None => vec![ZERO; n + l],
            },
        }
    }

    /// Range of samples on which every demodulated pulse is constant.
    pub(crate) fn pulse_core(&self) -> std::ops::Range<usize> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        match self.kind {
            WaveformKind::Cp => 0..n + l,
            WaveformKind::Zp => 0..n,
            WaveformKind::Uf => l..n,
        }
    }

    /// Receive weights of the detection path on the extended time axis
    /// `0..N+L+extra`: `window[t]` inside the front-end span of the current
    /// symbol, zero elsewhere.
    pub(crate) fn detection_weights(&self, extra: usize) -> Vec<f64> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        let start = self.kind.front_end_start(l);
        (0..n + l + extra)
            .map(|t| {
                if t >= start && t < n + l {
                    self.cfg.window[t]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Receive weights seen by the previous symbol: its samples at `N + L + r`
    /// land at position `r` of the current window.
    pub(crate) fn isi_weights(&self, extra: usize) -> Vec<f64> {
        let (n, l) = (self.cfg.n, self.cfg.l);
        let start = self.kind.front_end_start(l);
        (0..n + l + extra)
            .map(|t| {
                if t < n + l {
                    return 0.0;
                }
                let r = t - n - l;
                if r >= start && r < n + l {
                    self.cfg.window[r]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Convenience wrapper around [`Transceiver::modulate`].
pub fn modulate(cfg: &SystemConfig, kind: WaveformKind, qam: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    Transceiver::new(cfg, kind)?.modulate(qam)
}

/// Frequency-domain transmit operator `T` (`2N x N`) and its Gram matrix.
#[derive(Debug, Clone)]
pub struct PulseMatrix {
    pub kind: WaveformKind,
    /// Column `k` is the `2N`-point spectrum of the zero-padded pulse of
    /// subcarrier `k`; unallocated subcarriers have zero columns.
    pub t: ComplexMatrix,
    /// `T T^H`.
    pub gamma: ComplexMatrix,
}

impl PulseMatrix {
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        self.t.column(k).iter().cloned().collect()
    }
}

/// Closed-form construction of `T`: every column is a cyclic shift by `2k` of
/// one prototype spectrum with a per-column phase (CP), or, for UF, the
/// product of the subband filter response with such a shifted column.
pub fn pulse_matrix(cfg: &SystemConfig, kind: WaveformKind) -> Result<PulseMatrix> {
    cfg.validate()?;
    let (n, l) = (cfg.n, cfg.l);
    let two_n = 2 * n;
    let fft = UnitaryFft::new(two_n);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let spectrum_of = |support: usize, scale: f64| {
        let mut v = vec![ZERO; two_n];
        v[..support].iter_mut().for_each(|x| *x = Complex64::new(scale, 0.0));
        fft.forward(&mut v);
        v
    };

    let mut t = ComplexMatrix::zeros(two_n, n);
    match kind {
        WaveformKind::Cp | WaveformKind::Zp => {
            let support = if kind == WaveformKind::Cp { n + l } else { n };
            let t0 = spectrum_of(support, inv_sqrt_n);
            for k in cfg.active_subcarriers() {
                let phase = if kind == WaveformKind::Cp {
                    cis(-2.0 * PI * ((k * l) % n) as f64 / n as f64)
                } else {
                    Complex64::new(1.0, 0.0)
                };
                for (r, v) in circshift(&t0, 2 * k).into_iter().enumerate() {
                    t[(r, k)] = v * phase;
                }
            }
        }
        WaveformKind::Uf => {
            let base = spectrum_of(n, 2f64.sqrt());
            for sb in 0..cfg.subbands.len() {
                let taps = design_subband_filter(cfg, sb)?;
                let mut response = vec![ZERO; two_n];
                response[..taps.len()].copy_from_slice(&taps);
                fft.forward(&mut response);
                for k in cfg.subband_subcarriers(sb) {
                    for (r, v) in circshift(&base, 2 * k).into_iter().enumerate() {
                        t[(r, k)] = response[r] * v;
                    }
                }
            }
        }
    }
    let gamma = &t * t.adjoint();
    Ok(PulseMatrix { kind, t, gamma })
}

/// Frequency-domain receive operators, both `N x 2N`.
#[derive(Debug, Clone)]
pub struct ReceiveMatrices {
    pub kind: WaveformKind,
    pub max_delay: usize,
    /// Detection of the current symbol.
    pub w_d: ComplexMatrix,
    /// Leakage of the previous symbol into the current detection window.
    pub w_i: ComplexMatrix,
}

/// Closed-form `W_D` and `W_I`: row `k` is the prototype row cyclically shifted
/// by `2k` with a constant phase.
pub fn receive_matrices(cfg: &SystemConfig, kind: WaveformKind, max_delay: usize) -> Result<ReceiveMatrices> {
    cfg.validate()?;
    let (n, l) = (cfg.n, cfg.l);
    if max_delay > n - l {
        return Err(Error::UnsupportedRegime {
            max_delay,
            limit: n - l,
        });
    }
    let two_n = 2 * n;
    let start = kind.front_end_start(l);
    let fft = UnitaryFft::new(two_n);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();

    // time-domain prototype rows on the 2N grid
    let mut u_d = vec![ZERO; two_n];
    for t in start..n + l {
        u_d[t] = Complex64::new(cfg.window[t] * inv_sqrt_n, 0.0);
    }
    let mut u_i = vec![ZERO; two_n];
    for r in start..max_delay {
        u_i[n + l + r] = Complex64::new(cfg.window[r] * inv_sqrt_n, 0.0);
    }
    // row vector times F^H is the unitary inverse DFT
    fft.inverse(&mut u_d);
    fft.inverse(&mut u_i);

    let build = |proto: &[Complex64], offset: usize| {
        let mut w = ComplexMatrix::zeros(n, two_n);
        for k in 0..n {
            let phase = cis(2.0 * PI * ((k * offset) % n) as f64 / n as f64);
            for (c, v) in circshift(proto, 2 * k).into_iter().enumerate() {
                w[(k, c)] = v * phase;
            }
        }
        w
    };
    Ok(ReceiveMatrices {
        kind,
        max_delay,
        w_d: build(&u_d, start),
        w_i: if max_delay > start {
            build(&u_i, n + l + start)
        } else {
            ComplexMatrix::zeros(n, two_n)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::frobenius_distance;

    fn qpsk_pattern(cfg: &SystemConfig) -> Vec<Vec<Complex64>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..cfg.subbands.len())
            .map(|sb| {
                (0..cfg.n_rb)
                    .map(|j| {
                        let q = (sb * 7 + j * 3) % 4;
                        Complex64::new(if q & 1 == 0 { s } else { -s }, if q & 2 == 0 { s } else { -s })
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(32, 4, 4, 0, 8).is_ok());
        assert!(matches!(SystemConfig::new(32, 4, 4, 0, 9), Err(Error::Config(_))));
        assert!(SystemConfig::new(32, 32, 4, 0, 1).is_err());
        let mut cfg = SystemConfig::new(32, 4, 4, 0, 2).unwrap();
        cfg.lf = 4;
        assert!(cfg.validate().is_err());
        cfg.lf = 5;
        cfg.window[3] = 1.5;
        assert!(cfg.validate().is_err());
        let dl = SystemConfig::downlink_default();
        assert_eq!(dl.active_subcarriers().len(), 1020);
        assert_eq!(dl.lf, 74);
    }

    #[test]
    fn cp_prefix_repeats_tail() {
        let cfg = SystemConfig::new(32, 4, 1, 5, 1).unwrap();
        let x = modulate(&cfg, WaveformKind::Cp, &[vec![Complex64::new(1.0, 0.0)]]).unwrap();
        for t in 0..4 {
            assert!((x[t] - x[t + 32]).norm() < 1e-15);
        }
        // a single subcarrier is a pure tone
        let tx = Transceiver::new(&cfg, WaveformKind::Cp).unwrap();
        let p = tx.pulse(5);
        for t in 0..36 {
            assert!((x[t] - p[t]).norm() < 1e-14);
        }
    }

    #[test]
    fn zp_tail_is_zero() {
        let cfg = SystemConfig::new(32, 4, 4, 2, 3).unwrap();
        let x = modulate(&cfg, WaveformKind::Zp, &qpsk_pattern(&cfg)).unwrap();
        assert!(x[32..].iter().all(|v| *v == ZERO));
    }

    #[test]
    fn uf_matches_direct_convolution() {
        let cfg = SystemConfig::new(32, 4, 4, 3, 2).unwrap();
        let qam = qpsk_pattern(&cfg);
        let tx = Transceiver::new(&cfg, WaveformKind::Uf).unwrap();
        let x = tx.modulate(&qam).unwrap();
        // oracle: explicit IDFT per subband, then explicit linear convolution
        let n = cfg.n;
        let mut expect = vec![ZERO; n + cfg.l];
        for sb in 0..2 {
            let taps = design_subband_filter(&cfg, sb).unwrap();
            let body: Vec<Complex64> = (0..n)
                .map(|t| {
                    cfg.subband_subcarriers(sb)
                        .iter()
                        .zip(&qam[sb])
                        .map(|(&k, &s)| s * cis(2.0 * PI * (k * t) as f64 / n as f64))
                        .sum::<Complex64>()
                        / (n as f64).sqrt()
                })
                .collect();
            for (i, b) in body.iter().enumerate() {
                for (j, g) in taps.iter().enumerate() {
                    expect[i + j] += b * g;
                }
            }
        }
        let err = x.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn modulate_rejects_bad_allocation() {
        let cfg = SystemConfig::new(32, 4, 4, 0, 2).unwrap();
        assert!(matches!(
            modulate(&cfg, WaveformKind::Cp, &[vec![ZERO; 4]]),
            Err(Error::InvalidDimension(_))
        ));
        assert!(modulate(&cfg, WaveformKind::Uf, &[vec![ZERO; 4], vec![ZERO; 3]]).is_err());
    }

    #[test]
    fn cp_roundtrip_identity_channel() {
        let cfg = SystemConfig::new(64, 8, 4, 10, 5).unwrap();
        let qam = qpsk_pattern(&cfg);
        let tx = Transceiver::new(&cfg, WaveformKind::Cp).unwrap();
        let y = tx.demodulate(&tx.modulate(&qam).unwrap()).unwrap();
        let mut err: f64 = 0.0;
        for (sb, symbols) in qam.iter().enumerate() {
            for (k, s) in cfg.subband_subcarriers(sb).into_iter().zip(symbols) {
                err = err.max((y[k] - s).norm());
            }
        }
        assert!(err < 1e-10);
    }

    #[test]
    fn demodulate_bin_matches_full() {
        for kind in WaveformKind::ALL {
            let cfg = SystemConfig::new(16, 3, 4, 1, 2).unwrap();
            let tx = Transceiver::new(&cfg, kind).unwrap();
            let rx: Vec<Complex64> = (0..19)
                .map(|t| Complex64::new((t as f64).sin(), (t as f64 * 0.3).cos()))
                .collect();
            let full = tx.demodulate(&rx).unwrap();
            for k in 0..16 {
                assert!((full[k] - tx.demodulate_bin(&rx, k)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn uf_unit_energy_per_symbol() {
        let cfg = SystemConfig::downlink_default();
        let tx = Transceiver::new(&cfg, WaveformKind::Uf).unwrap();
        for sb in [0, 40, 84] {
            let e: f64 = cfg
                .subband_subcarriers(sb)
                .iter()
                .map(|&k| tx.pulse(k).iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                / 12.0;
            assert!((e - 1.0).abs() < 1e-9, "{e}");
        }
    }

    #[test]
    fn filter_shapes() {
        // N_RB odd so a subband can be centred exactly on DC
        let cfg = SystemConfig::new(64, 8, 3, 63, 1).unwrap();
        let taps = design_subband_filter(&cfg, 0).unwrap();
        for (l, t) in taps.iter().enumerate() {
            assert!(t.im.abs() < 1e-12);
            assert!((t.re - taps[taps.len() - 1 - l].re).abs() < 1e-12);
        }
        let shifted = SystemConfig::new(64, 8, 3, 20, 1).unwrap();
        let other = design_subband_filter(&shifted, 0).unwrap();
        for (a, b) in taps.iter().zip(&other) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn demodulated_pulse_is_constant_on_core() {
        let cfg = SystemConfig::new(64, 8, 4, 6, 3).unwrap();
        for kind in WaveformKind::ALL {
            let tx = Transceiver::new(&cfg, kind).unwrap();
            for k in cfg.active_subcarriers() {
                let beta = tx.demodulated_pulse(k);
                let core = tx.pulse_core();
                let b0 = beta[core.start];
                assert!(core.clone().all(|c| (beta[c] - b0).norm() < 1e-12));
                // consistent with the time-domain pulse
                let p = tx.pulse(k);
                for c in 0..p.len() {
                    let expect = cis(2.0 * PI * ((k * c) % 64) as f64 / 64.0) * beta[c] / 8.0;
                    assert!((p[c] - expect).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn shortcut_matrices_shift_structure() {
        let cfg = SystemConfig::new(16, 2, 4, 0, 4).unwrap();
        let pm = pulse_matrix(&cfg, WaveformKind::Cp).unwrap();
        let mags: Vec<f64> = pm.t.column(0).iter().map(|v| v.norm()).collect();
        for k in 1..16 {
            let col: Vec<f64> = pm.t.column(k).iter().map(|v| v.norm()).collect();
            let shifted = circshift(&mags, 2 * k);
            assert!(col.iter().zip(&shifted).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        let gram = &pm.t * pm.t.adjoint();
        assert!(frobenius_distance(&gram, &pm.gamma) < 1e-12);

        let rm = receive_matrices(&cfg, WaveformKind::Cp, 6).unwrap();
        let row0: Vec<Complex64> = rm.w_i.row(0).iter().cloned().collect();
        for i in 1..16 {
            let phase = cis(4.0 * PI * (i * 2) as f64 / 16.0);
            let expect = circshift(&row0.iter().map(|v| v * phase).collect::<Vec<_>>(), 2 * i);
            for (c, e) in expect.iter().enumerate() {
                assert!((rm.w_i[(i, c)] - e).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn isi_operator_vanishes_inside_guard() {
        let cfg = SystemConfig::new(32, 4, 4, 0, 8).unwrap();
        for kind in [WaveformKind::Cp] {
            for d in 0..=4 {
                let rm = receive_matrices(&cfg, kind, d).unwrap();
                assert!(rm.w_i.iter().all(|v| *v == ZERO));
            }
        }
        let uf = receive_matrices(&cfg, WaveformKind::Uf, 1).unwrap();
        assert!(uf.w_i.iter().any(|v| v.norm() > 1e-3));
        assert!(matches!(
            receive_matrices(&cfg, WaveformKind::Cp, 29),
            Err(Error::UnsupportedRegime { .. })
        ));
    }
}
