//! Monte Carlo link simulation used as an independent check of the analytic
//! powers.
//!
//! Each realization draws a channel spanning two consecutive symbols, sends
//! random QAM symbols through the sample-level transmitter, and splits the
//! demodulated output of every allocated subcarrier into three parts by
//! linearity: the subcarrier's own pulse (signal), the rest of the current
//! symbol (ICI) and the previous symbol (ISI). Noise is left out; reports add
//! it analytically.
//!
//! Realization `i` uses a ChaCha8 stream selected by `i` under the master
//! seed, and statistics are reduced over fixed blocks in index order, so the
//! output depends only on the seed and never on the worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{time_corr, ChannelRealization, PowerDelayProfile, RealizationSampler, TimeCorrModel};
use crate::error::{Error, Result};
use crate::numerics::{cis, ZERO};
use crate::waveform::{SystemConfig, Transceiver, WaveformKind};

const BLOCK: usize = 256;

/// Constellation used for the data symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QamOrder {
    #[default]
    Qpsk,
    Qam16,
}

impl QamOrder {
    /// Unit-power symbol drawn uniformly.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            QamOrder::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let bits: u8 = rng.random_range(0..4);
                Complex64::new(if bits & 1 == 0 { s } else { -s }, if bits & 2 == 0 { s } else { -s })
            }
            QamOrder::Qam16 => {
                let level = |b: u8| (2.0 * b as f64 - 3.0) / 10f64.sqrt();
                let bits: u8 = rng.random_range(0..16);
                Complex64::new(level(bits & 3), level(bits >> 2))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub cfg: SystemConfig,
    pub kind: WaveformKind,
    pub pdp: PowerDelayProfile,
    pub model: TimeCorrModel,
    pub n_realizations: usize,
    pub seed: u64,
    pub qam: QamOrder,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SimSpec {
    pub fn new(
        cfg: SystemConfig,
        kind: WaveformKind,
        pdp: PowerDelayProfile,
        model: TimeCorrModel,
        n_realizations: usize,
        seed: u64,
    ) -> Self {
        SimSpec {
            cfg,
            kind,
            pdp,
            model,
            n_realizations,
            seed,
            qam: QamOrder::default(),
            workers: None,
        }
    }
}

/// Sample means and variances of the three power terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBreakdown {
    pub subcarriers: Vec<usize>,
    pub n_realizations: usize,
    pub p_s: Vec<f64>,
    pub p_ici: Vec<f64>,
    pub p_isi: Vec<f64>,
    /// Unbiased sample variance of the per-realization `|.|^2` values.
    pub var_s: Vec<f64>,
    pub var_ici: Vec<f64>,
    pub var_isi: Vec<f64>,
}

/// Standard errors of the estimated means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub s: Vec<f64>,
    pub ici: Vec<f64>,
    pub isi: Vec<f64>,
}

pub fn estimate_error(emp: &EmpiricalBreakdown) -> Result<StandardErrors> {
    if emp.n_realizations < 2 {
        return Err(Error::config("standard errors need at least two realizations"));
    }
    let n = emp.n_realizations as f64;
    let se = |v: &[f64]| v.iter().map(|x| (x / n).sqrt()).collect();
    Ok(StandardErrors {
        s: se(&emp.var_s),
        ici: se(&emp.var_ici),
        isi: se(&emp.var_isi),
    })
}

/// Running mean and sum of squared deviations, merged pairwise.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            count: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / total;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
        }
        self.count = total;
    }

    fn variance(&self) -> Vec<f64> {
        let denom = (self.count - 1.0).max(1.0);
        self.m2.iter().map(|s| s / denom).collect()
    }
}

/// Per-realization complex outputs of the three terms on every allocated
/// subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSamples {
    pub signal: Vec<Complex64>,
    pub ici: Vec<Complex64>,
    pub isi: Vec<Complex64>,
    /// Demodulated total (current plus previous symbol) for the same bins.
    pub received: Vec<Complex64>,
}

/// Precomputed transmit pulses and receive rows for one spec.
pub struct LinkSimulator {
    tx: Transceiver,
    sampler: RealizationSampler,
    subcarriers: Vec<usize>,
    pulses: Vec<Vec<Complex64>>,
    /// Front-end row of each allocated bin over the symbol window.
    rows: Vec<Vec<Complex64>>,
    qam: QamOrder,
}

impl LinkSimulator {
    pub fn new(spec: &SimSpec) -> Result<Self> {
        let cfg = &spec.cfg;
        spec.pdp.ensure_supported(cfg)?;
        let tx = Transceiver::new(cfg, spec.kind)?;
        let (n, len) = (cfg.n, cfg.symbol_len());
        let span = 2 * len;
        let rt = time_corr(&spec.model, span)?;
        let sampler = RealizationSampler::new(&spec.pdp, &rt, span)?;
        let subcarriers = cfg.active_subcarriers();
        let pulses = subcarriers.iter().map(|&k| tx.pulse(k)).collect();
        let start = if spec.kind == WaveformKind::Cp { cfg.l } else { 0 };
        let scale = 1.0 / (n as f64).sqrt();
        let rows = subcarriers
            .iter()
            .map(|&k| {
                (0..len)
                    .map(|t| {
                        if t < start {
                            return ZERO;
                        }
                        let e = (k * ((t - start) % n)) % n;
                        cis(-2.0 * std::f64::consts::PI * e as f64 / n as f64) * cfg.window[t] * scale
                    })
                    .collect()
            })
            .collect();
        Ok(LinkSimulator {
            tx,
            sampler,
            subcarriers,
            pulses,
            rows,
            qam: spec.qam,
        })
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    fn through_channel(&self, real: &ChannelRealization, x: &[Complex64], origin: usize) -> Vec<Complex64> {
        let len = self.tx.config().symbol_len();
        (0..len).map(|r| real.output_at(x, origin, len + r)).collect()
    }

    fn detect(row: &[Complex64], y: &[Complex64]) -> Complex64 {
        row.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// One realization with the given generator.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TermSamples> {
        let cfg = self.tx.config();
        let len = cfg.symbol_len();
        let real = self.sampler.sample(rng);
        let mut draw = || {
            let mut spectrum = vec![ZERO; cfg.n];
            for &k in &self.subcarriers {
                spectrum[k] = self.qam.draw(rng);
            }
            spectrum
        };
        let previous = draw();
        let current = draw();
        let y_prev = self.through_channel(&real, &self.tx.modulate_spectrum(&previous)?, 0);
        let y_cur = self.through_channel(&real, &self.tx.modulate_spectrum(&current)?, len);

        let mut out = TermSamples {
            signal: Vec::with_capacity(self.subcarriers.len()),
            ici: Vec::with_capacity(self.subcarriers.len()),
            isi: Vec::with_capacity(self.subcarriers.len()),
            received: Vec::with_capacity(self.subcarriers.len()),
        };
        for (i, &k) in self.subcarriers.iter().enumerate() {
            let row = &self.rows[i];
            let own = self.through_channel(&real, &self.pulses[i], len);
            let signal = current[k] * Self::detect(row, &own);
            let detected = Self::detect(row, &y_cur);
            let isi = Self::detect(row, &y_prev);
            out.signal.push(signal);
            out.ici.push(detected - signal);
            out.isi.push(isi);
            out.received.push(detected + isi);
        }
        Ok(out)
    }

    /// Generator of realization `index` under `seed`.
    pub fn stream(seed: u64, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        rng
    }

    fn block(&self, seed: u64, range: std::ops::Range<usize>) -> Result<[Moments; 3]> {
        let len = self.subcarriers.len();
        let mut acc = [Moments::new(len), Moments::new(len), Moments::new(len)];
        let mut buf = vec![0.0; len];
        for index in range {
            let terms = self.realize(&mut Self::stream(seed, index))?;
            for (m, values) in acc.iter_mut().zip([&terms.signal, &terms.ici, &terms.isi]) {
                buf.iter_mut().zip(values).for_each(|(b, v)| *b = v.norm_sqr());
                m.push(&buf);
            }
        }
        Ok(acc)
    }

    pub fn run(&self, n_realizations: usize, seed: u64) -> Result<EmpiricalBreakdown> {
        if n_realizations == 0 {
            return Err(Error::config("at least one realization required"));
        }
        let blocks: Vec<_> = (0..n_realizations)
            .step_by(BLOCK)
            .map(|s| s..(s + BLOCK).min(n_realizations))
            .collect();
        let partial = blocks
            .into_par_iter()
            .map(|r| self.block(seed, r))
            .collect::<Result<Vec<_>>>()?;
        let len = self.subcarriers.len();
        let mut total = [Moments::new(len), Moments::new(len), Moments::new(len)];
        for block in &partial {
            for (t, b) in total.iter_mut().zip(block) {
                t.merge(b);
            }
        }
        let [s, ici, isi] = total;
        Ok(EmpiricalBreakdown {
            subcarriers: self.subcarriers.clone(),
            n_realizations,
            var_s: s.variance(),
            var_ici: ici.variance(),
            var_isi: isi.variance(),
            p_s: s.mean,
            p_ici: ici.mean,
            p_isi: isi.mean,
        })
    }
}

/// Runs `spec.n_realizations` independent realizations.
pub fn simulate(spec: &SimSpec) -> Result<EmpiricalBreakdown> {
    let sim = LinkSimulator::new(spec)?;
    match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?
            .install(|| sim.run(spec.n_realizations, spec.seed)),
        None => sim.run(spec.n_realizations, spec.seed),
    }
}
