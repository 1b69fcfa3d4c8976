//! Expected signal, ICI and ISI powers per subcarrier, SINR and capacity.
//!
//! Two routes compute the same quantities. [`kernel`] builds the `2N x 2N`
//! correlation kernels and receive operators explicitly and is practical for
//! small `N`. [`Analyzer`] works on lag sums in the time domain and handles
//! `N = 1024` in well under a second per channel; it is the production path.

pub mod kernel;
mod lag;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{PowerDelayProfile, TimeCorrModel};
use crate::error::{Error, Result};
use crate::waveform::{SystemConfig, WaveformKind};

/// Threshold below which a negative power counts as a numerical defect.
pub const CLIP_TOLERANCE: f64 = 1e-12;

/// Expected powers on the occupied subcarriers (linear scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub subcarriers: Vec<usize>,
    pub p_s: Vec<f64>,
    pub p_ici: Vec<f64>,
    pub p_isi: Vec<f64>,
    /// Noise variance.
    pub noise: f64,
    /// Entries that came out below `-CLIP_TOLERANCE` before clipping.
    pub clipped: usize,
    /// Largest magnitude removed by clipping.
    pub max_clip: f64,
}

impl PowerBreakdown {
    /// Assembles a breakdown, setting negative round-off to zero.
    pub fn new(subcarriers: Vec<usize>, p_s: Vec<f64>, p_ici: Vec<f64>, p_isi: Vec<f64>, noise: f64) -> Self {
        let mut clipped = 0;
        let mut max_clip: f64 = 0.0;
        let mut clip = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|x| {
                    if x < 0.0 {
                        if x < -CLIP_TOLERANCE {
                            clipped += 1;
                        }
                        max_clip = max_clip.max(-x);
                        0.0
                    } else {
                        x
                    }
                })
                .collect()
        };
        let (p_s, p_ici, p_isi) = (clip(p_s), clip(p_ici), clip(p_isi));
        PowerBreakdown {
            subcarriers,
            p_s,
            p_ici,
            p_isi,
            noise,
            clipped,
            max_clip,
        }
    }

    pub fn len(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subcarriers.is_empty()
    }

    pub fn mean_signal(&self) -> f64 {
        mean(&self.p_s)
    }

    pub fn mean_ici(&self) -> f64 {
        mean(&self.p_ici)
    }

    pub fn mean_isi(&self) -> f64 {
        mean(&self.p_isi)
    }

    /// Same powers with a different noise variance.
    pub fn with_noise(&self, noise: f64) -> Self {
        PowerBreakdown { noise, ..self.clone() }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// SINR per subcarrier and derived averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub subcarriers: Vec<usize>,
    pub sinr_db: Vec<f64>,
    /// `10 log10` of the linear mean SINR.
    pub mean_sinr_db: f64,
    /// Mean of the per-subcarrier dB values.
    pub mean_sinr_db_of_db: f64,
    /// Mean of `log2(1 + SINR)` over the subcarriers, in bits per channel use.
    pub capacity_bpcu: f64,
}

pub fn sinr_report(pb: &PowerBreakdown) -> SinrReport {
    let linear: Vec<f64> = (0..pb.len())
        .map(|i| pb.p_s[i] / (pb.p_ici[i] + pb.p_isi[i] + pb.noise))
        .collect();
    let sinr_db: Vec<f64> = linear.iter().map(|&s| to_db(s)).collect();
    SinrReport {
        subcarriers: pb.subcarriers.clone(),
        mean_sinr_db: to_db(mean(&linear)),
        mean_sinr_db_of_db: mean(&sinr_db),
        capacity_bpcu: mean(&linear.iter().map(|s| (1.0 + s).log2()).collect::<Vec<_>>()),
        sinr_db,
    }
}

/// Production analyzer for one waveform and allocation. Construction builds
/// the pulse Gram matrix once; each channel evaluation is then independent.
#[derive(Debug, Clone)]
pub struct Analyzer {
    inner: lag::LagAnalyzer,
    kind: WaveformKind,
}

impl Analyzer {
    pub fn new(cfg: &SystemConfig, kind: WaveformKind) -> Result<Self> {
        Ok(Analyzer {
            inner: lag::LagAnalyzer::new(cfg, kind)?,
            kind,
        })
    }

    pub fn kind(&self) -> WaveformKind {
        self.kind
    }

    pub fn config(&self) -> &SystemConfig {
        self.inner.config()
    }

    pub fn breakdown(&self, pdp: &PowerDelayProfile, model: &TimeCorrModel) -> Result<PowerBreakdown> {
        let profiles = self.inner.profiles(pdp, model)?;
        let subcarriers = self.inner.subcarriers().to_vec();
        let p_ici = subcarriers
            .iter()
            .zip(&profiles.signal)
            .map(|(&k, s)| profiles.detection[k] - s)
            .collect();
        let p_isi = subcarriers.iter().map(|&k| profiles.isi[k]).collect();
        Ok(PowerBreakdown::new(
            subcarriers,
            profiles.signal,
            p_ici,
            p_isi,
            self.config().noise_variance(),
        ))
    }
}

/// One-shot [`Analyzer::breakdown`].
pub fn analyze(
    cfg: &SystemConfig,
    kind: WaveformKind,
    pdp: &PowerDelayProfile,
    model: &TimeCorrModel,
) -> Result<PowerBreakdown> {
    Analyzer::new(cfg, kind)?.breakdown(pdp, model)
}

/// One uplink transmitter: its subbands and the channel it sees.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLink {
    pub subbands: Vec<usize>,
    pub pdp: PowerDelayProfile,
    pub model: TimeCorrModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserResult {
    pub breakdown: PowerBreakdown,
    pub report: SinrReport,
}

/// Per-user powers at a common receiver. Each user's subcarriers see their own
/// signal and intra-user ICI/ISI, plus everything the other users leak onto
/// them through their own channels. `cfg.subbands` is ignored.
pub fn uplink_compose(cfg: &SystemConfig, kind: WaveformKind, users: &[UserLink]) -> Result<Vec<UserResult>> {
    if users.is_empty() {
        return Err(Error::config("uplink needs at least one user"));
    }
    let all: Vec<usize> = users.iter().flat_map(|u| u.subbands.iter().copied()).collect();
    cfg.with_subbands(all)?;

    let profiles = users
        .par_iter()
        .map(|u| {
            let analyzer = lag::LagAnalyzer::new(&cfg.with_subbands(u.subbands.clone())?, kind)?;
            let p = analyzer.profiles(&u.pdp, &u.model)?;
            Ok((analyzer.subcarriers().to_vec(), p))
        })
        .collect::<Result<Vec<_>>>()?;

    let noise = cfg.noise_variance();
    Ok(profiles
        .iter()
        .enumerate()
        .map(|(u, (subcarriers, own))| {
            let others = || profiles.iter().enumerate().filter(move |(v, _)| *v != u);
            let mut p_ici = Vec::with_capacity(subcarriers.len());
            let mut p_isi = Vec::with_capacity(subcarriers.len());
            for (i, &k) in subcarriers.iter().enumerate() {
                let leak: f64 = others().map(|(_, (_, p))| p.detection[k]).sum();
                p_ici.push(own.detection[k] - own.signal[i] + leak);
                p_isi.push(own.isi[k] + others().map(|(_, (_, p))| p.isi[k]).sum::<f64>());
            }
            let breakdown = PowerBreakdown::new(subcarriers.clone(), own.signal.clone(), p_ici, p_isi, noise);
            let report = sinr_report(&breakdown);
            UserResult { breakdown, report }
        })
        .collect())
}
