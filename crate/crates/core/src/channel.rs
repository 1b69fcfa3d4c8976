//! Channel statistics and realizations.
//!
//! The channel is a tapped delay line whose taps are independent zero-mean
//! complex Gaussian processes (WSSUS). Tap `i` has power `rho_i` and every tap
//! shares the same time correlation `R_t`:
//!
//! ```text
//! E[h_{i,j} h*_{m,n}] = rho_i R_t(j - n)   if i == m, else 0
//! ```
//!
//! `h_{i,j}` is the gain applied at delay `i` to the input sample sent at time
//! `j`, so the output is `y[t] = sum_i h_{i,t-i} x[t-i]`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bessel_j0, cis, symmetric_toeplitz, ComplexMatrix, GaussianSampler, UnitaryFft, ZERO};
use crate::waveform::SystemConfig;

/// Environment variable overriding the directory holding PDP tables.
pub const DATA_DIR_ENV: &str = "DISPERSIVE_SINR_DATA";

/// Sample rate at which the shipped Vehicular-B table is quantized by default.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 15.36e6;

/// Discrete power delay profile with unit total power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDelayProfile {
    delays: Vec<usize>,
    powers: Vec<f64>,
}

impl PowerDelayProfile {
    /// Builds a profile from integer delays and linear powers. Powers are
    /// normalized to unit sum and zero-power taps are dropped.
    pub fn new(delays: Vec<usize>, powers: Vec<f64>) -> Result<Self> {
        if delays.len() != powers.len() {
            return Err(Error::dim(format!(
                "{} delays but {} powers",
                delays.len(),
                powers.len()
            )));
        }
        if delays.is_empty() {
            return Err(Error::dim("power delay profile needs at least one tap"));
        }
        if delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("tap delays must be strictly increasing"));
        }
        if delays[0] != 0 {
            return Err(Error::config("first tap delay must be zero"));
        }
        if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config("tap powers must be finite and non-negative"));
        }
        let total: f64 = powers.iter().sum();
        if !(total > 0.0) {
            return Err(Error::config("power delay profile has zero total power"));
        }
        let (delays, powers) = delays
            .into_iter()
            .zip(powers)
            .filter(|(_, p)| *p > 0.0)
            .map(|(d, p)| (d, p / total))
            .unzip::<_, _, Vec<_>, Vec<_>>();
        // the first kept tap may not sit at zero if the leading taps were dropped
        let offset = delays[0];
        Ok(PowerDelayProfile {
            delays: delays.into_iter().map(|d| d - offset).collect(),
            powers,
        })
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn taps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.delays.iter().copied().zip(self.powers.iter().copied())
    }

    /// Channel memory `D` in samples.
    pub fn max_delay(&self) -> usize {
        *self.delays.last().expect("non-empty profile")
    }

    pub fn mean_delay(&self) -> f64 {
        self.taps().map(|(d, p)| d as f64 * p).sum()
    }

    /// Standard deviation of the profile, in samples.
    pub fn rms_delay(&self) -> f64 {
        let mean = self.mean_delay();
        self.taps()
            .map(|(d, p)| p * (d as f64 - mean).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Rejects profiles whose memory reaches beyond the previous symbol.
    pub fn ensure_supported(&self, cfg: &SystemConfig) -> Result<()> {
        let limit = cfg.n.saturating_sub(cfg.l);
        if self.max_delay() > limit {
            return Err(Error::UnsupportedRegime {
                max_delay: self.max_delay(),
                limit,
            });
        }
        Ok(())
    }
}

/// Exponential profile `rho_i ~ beta^i` with taps every `stretch` samples.
pub fn exp_pdp(beta: f64, n_taps: usize, stretch: usize) -> Result<PowerDelayProfile> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(format!("decay factor {beta} outside [0, 1)")));
    }
    if n_taps == 0 {
        return Err(Error::dim("exponential profile needs at least one tap"));
    }
    if stretch == 0 && n_taps > 1 {
        return Err(Error::config("tap stretch must be positive"));
    }
    let delays = (0..n_taps).map(|i| i * stretch).collect();
    let powers = (0..n_taps).map(|i| beta.powi(i as i32)).collect();
    PowerDelayProfile::new(delays, powers)
}

/// Decay factor whose exponential profile has the requested rms delay.
///
/// The rms delay grows monotonically with `beta`, from zero up to the spread
/// of a uniform profile, so bisection on `[0, 1)` converges.
pub fn beta_for_rms(target_rms: f64, n_taps: usize, stretch: usize) -> Result<f64> {
    if !(target_rms >= 0.0) {
        return Err(Error::config(format!("rms delay {target_rms} must be non-negative")));
    }
    if target_rms == 0.0 {
        return Ok(0.0);
    }
    let rms = |beta: f64| exp_pdp(beta, n_taps, stretch).map(|p| p.rms_delay());
    let mut hi = 1.0 - 1e-12;
    let ceiling = rms(hi)?;
    if target_rms >= ceiling {
        return Err(Error::config(format!(
            "rms delay {target_rms} not reachable with {n_taps} taps every {stretch} samples (max {ceiling:.3})"
        )));
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let value = rms(mid)?;
        if (value - target_rms).abs() < 1e-9 {
            return Ok(mid);
        }
        if value < target_rms {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Directory searched for PDP tables.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("data"),
    }
}

/// Reads a `delay_ns power_dB` table; `#` starts a comment.
pub fn load_pdp_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::config(format!("{}:{}: cannot parse '{s}'", path.display(), lineno + 1)))
        };
        if fields.len() != 2 {
            return Err(Error::config(format!(
                "{}:{}: expected 'delay_ns power_dB'",
                path.display(),
                lineno + 1
            )));
        }
        rows.push((parse(fields[0])?, parse(fields[1])?));
    }
    if rows.is_empty() {
        return Err(Error::config(format!("{} holds no taps", path.display())));
    }
    Ok(rows)
}

/// Quantizes a `(delay_ns, power_dB)` table to integer sample delays.
/// Taps that land on the same sample are merged by adding their powers.
pub fn pdp_from_table(rows: &[(f64, f64)], sample_rate_hz: f64) -> Result<PowerDelayProfile> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::config("sample rate must be positive"));
    }
    let mut taps: Vec<(usize, f64)> = Vec::new();
    let first = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (delay_ns, power_db) in sorted {
        if !delay_ns.is_finite() || !power_db.is_finite() {
            return Err(Error::config("non-finite entry in PDP table"));
        }
        let sample = ((delay_ns - first) * 1e-9 * sample_rate_hz).round() as usize;
        let power = 10f64.powf(power_db / 10.0);
        match taps.last_mut() {
            Some(last) if last.0 == sample => last.1 += power,
            _ => taps.push((sample, power)),
        }
    }
    let (delays, powers) = taps.into_iter().unzip();
    PowerDelayProfile::new(delays, powers)
}

/// ITU Vehicular-B profile at `scaling` times the default sample rate.
pub fn vehb_pdp(sample_rate_scaling: f64) -> Result<PowerDelayProfile> {
    let path = data_dir().join("itu_veh_b.txt");
    let rows = load_pdp_table(&path).map_err(|e| match e {
        Error::Io { path, source } => Error::config(format!("cannot read PDP table {path}: {source}")),
        other => other,
    })?;
    pdp_from_table(&rows, DEFAULT_SAMPLE_RATE_HZ * sample_rate_scaling)
}

/// Time-correlation model of every tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeCorrModel {
    /// Clarke/Jakes: `R_t(n) = J0(2 pi fd_ts n)`.
    Jakes { fd_ts: f64 },
    /// Time-invariant channel.
    Static,
    /// Explicit sequence starting at lag 0.
    Custom(Vec<f64>),
}

/// Correlation sequence `R_t(0..len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCorr {
    pub model: TimeCorrModel,
    values: Vec<f64>,
}

impl TimeCorr {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `R_t(|lag|)`.
    pub fn at(&self, lag: isize) -> f64 {
        self.values[lag.unsigned_abs()]
    }

    /// The first `len` lags.
    pub fn truncated(&self, len: usize) -> Result<TimeCorr> {
        if len > self.values.len() {
            return Err(Error::dim(format!(
                "time correlation holds {} lags, {len} requested",
                self.values.len()
            )));
        }
        Ok(TimeCorr {
            model: self.model.clone(),
            values: self.values[..len].to_vec(),
        })
    }
}

/// Evaluates `model` on lags `0..max_lag`.
pub fn time_corr(model: &TimeCorrModel, max_lag: usize) -> Result<TimeCorr> {
    if max_lag == 0 {
        return Err(Error::dim("time correlation needs at least lag 0"));
    }
    let values = match model {
        TimeCorrModel::Jakes { fd_ts } => {
            if !(fd_ts.is_finite() && *fd_ts >= 0.0) {
                return Err(Error::Domain(format!(
                    "normalized Doppler {fd_ts} must be finite and >= 0"
                )));
            }
            (0..max_lag)
                .map(|n| bessel_j0(2.0 * PI * fd_ts * n as f64))
                .collect::<Result<Vec<_>>>()?
        }
        TimeCorrModel::Static => vec![1.0; max_lag],
        TimeCorrModel::Custom(seq) => {
            if seq.len() < max_lag {
                return Err(Error::dim(format!(
                    "custom correlation has {} lags, {max_lag} needed",
                    seq.len()
                )));
            }
            let values = seq[..max_lag].to_vec();
            if (values[0] - 1.0).abs() > 1e-12 {
                return Err(Error::config("custom correlation must satisfy R_t(0) = 1"));
            }
            if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-12) {
                return Err(Error::config("custom correlation entries must lie in [-1, 1]"));
            }
            // rejects sequences whose Toeplitz matrix is indefinite
            GaussianSampler::new(&symmetric_toeplitz(&values, max_lag)?)?;
            values
        }
    };
    Ok(TimeCorr {
        model: model.clone(),
        values,
    })
}

/// Frequency correlation on the `2N` lag grid:
/// `R_f(d) = sum_p rho_p exp(-j pi p d / N)` for `d = 0..2N`.
pub fn freq_corr(pdp: &PowerDelayProfile, n: usize) -> Vec<Complex64> {
    let two_n = 2 * n;
    (0..two_n)
        .map(|d| {
            pdp.taps()
                .map(|(p, rho)| cis(-PI * ((p * d) % two_n) as f64 / n as f64) * rho)
                .sum()
        })
        .collect()
}

/// `F R_t F^H` for the `size`-point unitary DFT, with `R_t` as a Toeplitz
/// matrix. Tap powers are not included.
pub fn doppler_cov(rt: &TimeCorr, size: usize) -> Result<ComplexMatrix> {
    if rt.len() < size {
        return Err(Error::dim(format!(
            "time correlation holds {} lags, Doppler covariance needs {size}",
            rt.len()
        )));
    }
    let toeplitz = symmetric_toeplitz(&rt.values[..size], size)?;
    let complex = toeplitz.map(|v| Complex64::new(v, 0.0));
    Ok(UnitaryFft::new(size).conjugate_transform(&complex))
}

/// Second-order channel statistics on the `2N` grid.
#[derive(Debug, Clone)]
pub struct SpectralStats {
    pub n: usize,
    /// Frequency correlation, lag-indexed modulo `2N`.
    pub r_f: Vec<Complex64>,
    /// Doppler covariance with unit tap power.
    pub r_d: ComplexMatrix,
}

impl SpectralStats {
    pub fn new(pdp: &PowerDelayProfile, model: &TimeCorrModel, n: usize) -> Result<Self> {
        let rt = time_corr(model, 2 * n)?;
        Ok(SpectralStats {
            n,
            r_f: freq_corr(pdp, n),
            r_d: doppler_cov(&rt, 2 * n)?,
        })
    }
}

/// Tap gains over a contiguous stretch of input times.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    delays: Vec<usize>,
    /// `gains[tap][j]`: gain of that tap for the input sample sent at time `j`.
    gains: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    /// Wraps explicit per-tap gain sequences of equal length.
    pub fn from_gains(delays: Vec<usize>, gains: Vec<Vec<Complex64>>) -> Result<Self> {
        if delays.len() != gains.len() || gains.is_empty() {
            return Err(Error::dim("one gain sequence per tap required"));
        }
        let span = gains[0].len();
        if gains.iter().any(|g| g.len() != span) {
            return Err(Error::dim("gain sequences differ in length"));
        }
        Ok(ChannelRealization { delays, gains })
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn gains(&self) -> &[Vec<Complex64>] {
        &self.gains
    }

    pub fn span(&self) -> usize {
        self.gains[0].len()
    }

    /// Output at time `t` for an input `x` placed at times `origin..origin+x.len()`.
    pub fn output_at(&self, x: &[Complex64], origin: usize, t: usize) -> Complex64 {
        let mut acc = ZERO;
        for (&d, g) in self.delays.iter().zip(&self.gains) {
            if t < origin + d {
                continue;
            }
            let idx = t - d - origin;
            if idx < x.len() {
                acc += g[t - d] * x[idx];
            }
        }
        acc
    }
}

/// Draws realizations of the WSSUS channel over `span` input samples.
#[derive(Debug, Clone)]
pub struct RealizationSampler {
    delays: Vec<usize>,
    amplitudes: Vec<f64>,
    process: GaussianSampler,
}

impl RealizationSampler {
    pub fn new(pdp: &PowerDelayProfile, rt: &TimeCorr, span: usize) -> Result<Self> {
        if span == 0 {
            return Err(Error::dim("realization span must be positive"));
        }
        let rt = rt.truncated(span)?;
        let corr = symmetric_toeplitz(rt.values(), span)?;
        Ok(RealizationSampler {
            delays: pdp.delays().to_vec(),
            amplitudes: pdp.powers().iter().map(|p| p.sqrt()).collect(),
            process: GaussianSampler::new(&corr)?,
        })
    }

    pub fn span(&self) -> usize {
        self.process.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let span = self.span();
        let gains = self
            .amplitudes
            .iter()
            .map(|&a| {
                let mut g = vec![ZERO; span];
                self.process.sample_into(rng, a, &mut g);
                g
            })
            .collect();
        ChannelRealization {
            delays: self.delays.clone(),
            gains,
        }
    }
}

/// One realization seeded deterministically from `rng_seed`.
pub fn sample_realization(
    pdp: &PowerDelayProfile,
    rt: &TimeCorr,
    span: usize,
    rng_seed: u64,
) -> Result<ChannelRealization> {
    use rand::SeedableRng;
    let sampler = RealizationSampler::new(pdp, rt, span)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(sampler.sample(&mut rng))
}

/// `2N x 2N` circular-convolution matrix seen by symbol `symbol_index`:
/// entry `(r, c)` is `h_{(r - c) mod 2N, s + c}` with `s = symbol_index (N + L)`.
pub fn circular_channel_matrix(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    symbol_index: usize,
) -> Result<ComplexMatrix> {
    let (n, l) = (cfg.n, cfg.l);
    let two_n = 2 * n;
    let start = symbol_index * (n + l);
    if real.span() < start + two_n {
        return Err(Error::dim(format!(
            "realization spans {} samples, symbol {symbol_index} needs {}",
            real.span(),
            start + two_n
        )));
    }
    if real.delays.iter().any(|&d| d >= two_n) {
        return Err(Error::dim("tap delay exceeds the 2N grid"));
    }
    let mut h = ComplexMatrix::zeros(two_n, two_n);
    for (&d, g) in real.delays.iter().zip(&real.gains) {
        for c in 0..two_n {
            h[((c + d) % two_n, c)] += g[start + c];
        }
    }
    Ok(h)
}
