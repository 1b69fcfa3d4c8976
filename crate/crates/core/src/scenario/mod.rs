//! Scenario files and the commands that run them.
//!
//! A scenario is a TOML document with a `[system]` section, a `[channel]`
//! section (or one `[[users]]` entry per uplink transmitter) and a section per
//! study. See `scenarios/` for the shipped examples.

mod commands;
mod table;

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::channel::{
    beta_for_rms, data_dir, exp_pdp, load_pdp_table, pdp_from_table, vehb_pdp, PowerDelayProfile, TimeCorrModel,
};
use crate::error::{Error, Result};
use crate::montecarlo::QamOrder;
use crate::waveform::{SystemConfig, WaveformKind};

pub use commands::{run_heatmap, run_sweep, run_uplink, run_verify, CommandOutput, RunOptions};
pub use table::{OutputFormat, ResultRow, ResultTable, Source, CSV_COLUMNS};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Normalized Doppler `f_D T_s` of a terminal moving at `speed_kmh`.
pub fn doppler_from_speed(speed_kmh: f64, carrier_hz: f64, sample_rate_hz: f64) -> Result<f64> {
    if !(speed_kmh >= 0.0 && carrier_hz > 0.0 && sample_rate_hz > 0.0) {
        return Err(Error::config("speed must be >= 0, carrier and sample rate > 0"));
    }
    Ok(speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT / sample_rate_hz)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    #[serde(default)]
    description: String,
    system: SystemSection,
    channel: Option<ChannelSection>,
    verify: Option<VerifySection>,
    sweep: Option<SweepSection>,
    heatmap: Option<HeatmapSection>,
    #[serde(default)]
    users: Vec<UserSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    n: usize,
    l: usize,
    lf: Option<usize>,
    n_rb: usize,
    /// Number of contiguous subbands.
    m: Option<usize>,
    first_subcarrier: Option<usize>,
    /// Explicit subband starts; overrides `m` / `first_subcarrier`.
    subbands: Option<Vec<usize>>,
    noise_floor_db: Option<f64>,
    window: Option<WindowSpec>,
    filter_attenuation_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum WindowSpec {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    /// `vehb`, `exponential` or `table`.
    pdp: String,
    sample_rate_scaling: Option<f64>,
    file: Option<String>,
    sample_rate_hz: Option<f64>,
    beta: Option<f64>,
    rms_delay: Option<f64>,
    n_taps: Option<usize>,
    stretch: Option<usize>,
    /// `jakes` (default) or `static`.
    time_model: Option<String>,
    fd_ts: Option<f64>,
    speed_kmh: Option<f64>,
    carrier_hz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifySection {
    realizations: Option<usize>,
    waveforms: Option<Vec<WaveformKind>>,
    qam: Option<QamOrder>,
    seed: Option<u64>,
    reference_fd_ts: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeSection {
    values: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
    /// `linear` (default) or `log`.
    scale: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axis: String,
    range: RangeSection,
    /// Values of the other parameter, one curve each.
    series: Option<Vec<f64>>,
    waveforms: Option<Vec<WaveformKind>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatmapSection {
    delay: RangeSection,
    doppler: RangeSection,
    waveforms: Option<Vec<WaveformKind>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserSection {
    name: Option<String>,
    subbands: Option<Vec<usize>>,
    first_subcarrier: Option<usize>,
    m: Option<usize>,
    channel: ChannelSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
    format: Option<OutputFormat>,
}

/// How the tap powers are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PdpSpec {
    VehB {
        scaling: f64,
    },
    Exponential {
        beta: f64,
        n_taps: usize,
        stretch: usize,
    },
    /// Exponential profile whose decay is solved from a target rms delay.
    ExponentialRms {
        rms_delay: f64,
        n_taps: usize,
        stretch: usize,
    },
    Table {
        path: PathBuf,
        sample_rate_hz: f64,
    },
}

/// Resolved channel description.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub pdp: PdpSpec,
    pub model: TimeCorrModel,
}

impl ChannelSpec {
    pub fn profile(&self) -> Result<PowerDelayProfile> {
        match &self.pdp {
            PdpSpec::VehB { scaling } => vehb_pdp(*scaling),
            PdpSpec::Exponential { beta, n_taps, stretch } => exp_pdp(*beta, *n_taps, *stretch),
            PdpSpec::ExponentialRms {
                rms_delay,
                n_taps,
                stretch,
            } => exp_pdp(beta_for_rms(*rms_delay, *n_taps, *stretch)?, *n_taps, *stretch),
            PdpSpec::Table { path, sample_rate_hz } => pdp_from_table(&load_pdp_table(path)?, *sample_rate_hz),
        }
    }

    /// Same channel with an exponential profile of the given rms delay.
    pub fn with_rms_delay(&self, rms_delay: f64) -> Result<ChannelSpec> {
        let (n_taps, stretch) = match self.pdp {
            PdpSpec::Exponential { n_taps, stretch, .. } | PdpSpec::ExponentialRms { n_taps, stretch, .. } => {
                (n_taps, stretch)
            }
            _ => return Err(Error::config("delay axes need an exponential channel profile")),
        };
        Ok(ChannelSpec {
            pdp: PdpSpec::ExponentialRms {
                rms_delay,
                n_taps,
                stretch,
            },
            model: self.model.clone(),
        })
    }

    pub fn with_fd_ts(&self, fd_ts: f64) -> ChannelSpec {
        ChannelSpec {
            pdp: self.pdp.clone(),
            model: TimeCorrModel::Jakes { fd_ts },
        }
    }

    pub fn fd_ts(&self) -> f64 {
        match self.model {
            TimeCorrModel::Jakes { fd_ts } => fd_ts,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyStudy {
    pub realizations: usize,
    pub waveforms: Vec<WaveformKind>,
    pub qam: QamOrder,
    pub seed: u64,
    pub reference_fd_ts: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// rms delay in samples.
    Delay,
    /// `f_D T_s`.
    Doppler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepStudy {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    pub series: Vec<f64>,
    pub waveforms: Vec<WaveformKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStudy {
    pub delays: Vec<f64>,
    pub dopplers: Vec<f64>,
    pub waveforms: Vec<WaveformKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub name: String,
    pub subbands: Vec<usize>,
    pub channel: ChannelSpec,
}

/// Parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub system: SystemConfig,
    pub channel: Option<ChannelSpec>,
    pub verify: Option<VerifyStudy>,
    pub sweep: Option<SweepStudy>,
    pub heatmap: Option<HeatmapStudy>,
    pub users: Vec<UserSpec>,
    pub output_dir: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Scenario::parse(&text, stem)
    }

    /// Parses scenario text; `default_name` is used when the file has no `name`.
    pub fn parse(text: &str, default_name: &str) -> Result<Scenario> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::config(format!("invalid scenario: {e}")))?;
        let name = file.name.unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || name.contains([',', '"', '\n', '/']) {
            return Err(Error::config(format!("scenario name '{name}' is not allowed")));
        }
        let system = build_system(&file.system)?;
        let channel = file.channel.as_ref().map(build_channel).transpose()?;
        if let Some(ch) = &channel {
            ch.profile()?.ensure_supported(&system)?;
        }
        let all = || WaveformKind::ALL.to_vec();
        let verify = file
            .verify
            .map(|v| -> Result<VerifyStudy> {
                let realizations = v.realizations.unwrap_or(10_000);
                if realizations < 2 {
                    return Err(Error::config("verification needs at least two realizations"));
                }
                Ok(VerifyStudy {
                    realizations,
                    waveforms: v.waveforms.unwrap_or_else(all),
                    qam: v.qam.unwrap_or_default(),
                    seed: v.seed.unwrap_or(1),
                    reference_fd_ts: v.reference_fd_ts,
                })
            })
            .transpose()?;
        let sweep = file
            .sweep
            .map(|s| -> Result<SweepStudy> {
                let axis = match s.axis.as_str() {
                    "delay" => SweepAxis::Delay,
                    "doppler" => SweepAxis::Doppler,
                    other => return Err(Error::config(format!("unknown sweep axis '{other}'"))),
                };
                Ok(SweepStudy {
                    axis,
                    points: build_range(&s.range)?,
                    series: s.series.unwrap_or_default(),
                    waveforms: s.waveforms.unwrap_or_else(all),
                })
            })
            .transpose()?;
        let heatmap = file
            .heatmap
            .map(|h| -> Result<HeatmapStudy> {
                Ok(HeatmapStudy {
                    delays: build_range(&h.delay)?,
                    dopplers: build_range(&h.doppler)?,
                    waveforms: h.waveforms.unwrap_or_else(all),
                })
            })
            .transpose()?;
        let users = file
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| build_user(i, u, &system))
            .collect::<Result<Vec<_>>>()?;
        if !users.is_empty() {
            system.with_subbands(users.iter().flat_map(|u| u.subbands.iter().copied()).collect())?;
        }
        let (output_dir, output_format) = match file.output {
            Some(o) => (o.dir.map(PathBuf::from), o.format),
            None => (None, None),
        };
        Ok(Scenario {
            name,
            description: file.description,
            system,
            channel,
            verify,
            sweep,
            heatmap,
            users,
            output_dir,
            output_format,
        })
    }

    pub(crate) fn require_channel(&self) -> Result<&ChannelSpec> {
        self.channel
            .as_ref()
            .ok_or_else(|| Error::config(format!("scenario '{}' has no [channel] section", self.name)))
    }
}

fn contiguous(n: usize, n_rb: usize, first: Option<usize>, m: usize) -> Vec<usize> {
    let first = first.unwrap_or_else(|| n.saturating_sub(n_rb * m) / 2);
    (0..m).map(|i| (first + i * n_rb) % n).collect()
}

fn build_system(s: &SystemSection) -> Result<SystemConfig> {
    if s.n < 2 || s.n_rb == 0 {
        return Err(Error::config("system needs n >= 2 and n_rb >= 1"));
    }
    let subbands = match &s.subbands {
        Some(list) => list.clone(),
        None => contiguous(s.n, s.n_rb, s.first_subcarrier, s.m.unwrap_or(s.n / s.n_rb)),
    };
    let window = match &s.window {
        None => vec![1.0; s.n + s.l],
        Some(WindowSpec::Named(name)) if name == "rectangular" => vec![1.0; s.n + s.l],
        Some(WindowSpec::Named(name)) => return Err(Error::config(format!("unknown window '{name}'"))),
        Some(WindowSpec::Values(v)) => v.clone(),
    };
    let cfg = SystemConfig {
        n: s.n,
        l: s.l,
        lf: s.lf.unwrap_or(s.l + 1),
        n_rb: s.n_rb,
        subbands,
        noise_floor_db: s.noise_floor_db.unwrap_or(-40.0),
        window,
        filter_attenuation_db: s.filter_attenuation_db.unwrap_or(40.0),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn build_channel(c: &ChannelSection) -> Result<ChannelSpec> {
    let need = |v: Option<usize>, what: &str| v.ok_or_else(|| Error::config(format!("channel needs '{what}'")));
    let pdp = match c.pdp.as_str() {
        "vehb" => PdpSpec::VehB {
            scaling: c.sample_rate_scaling.unwrap_or(1.0),
        },
        "exponential" => {
            let n_taps = need(c.n_taps, "n_taps")?;
            let stretch = need(c.stretch, "stretch")?;
            match (c.beta, c.rms_delay) {
                (Some(beta), None) => PdpSpec::Exponential { beta, n_taps, stretch },
                (None, Some(rms_delay)) => PdpSpec::ExponentialRms {
                    rms_delay,
                    n_taps,
                    stretch,
                },
                (None, None) => PdpSpec::Exponential {
                    beta: 0.0,
                    n_taps,
                    stretch,
                },
                (Some(_), Some(_)) => return Err(Error::config("give either 'beta' or 'rms_delay', not both")),
            }
        }
        "table" => {
            let file = c
                .file
                .as_ref()
                .ok_or_else(|| Error::config("table channel needs 'file'"))?;
            let path = Path::new(file);
            PdpSpec::Table {
                path: if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    data_dir().join(path)
                },
                sample_rate_hz: c.sample_rate_hz.unwrap_or(crate::channel::DEFAULT_SAMPLE_RATE_HZ),
            }
        }
        other => return Err(Error::config(format!("unknown pdp kind '{other}'"))),
    };
    let fd_ts = match (c.fd_ts, c.speed_kmh) {
        (Some(_), Some(_)) => return Err(Error::config("give either 'fd_ts' or 'speed_kmh', not both")),
        (Some(fd), None) => fd,
        (None, Some(speed)) => doppler_from_speed(
            speed,
            c.carrier_hz
                .ok_or_else(|| Error::config("'speed_kmh' needs 'carrier_hz'"))?,
            c.sample_rate_hz.unwrap_or(crate::channel::DEFAULT_SAMPLE_RATE_HZ),
        )?,
        (None, None) => 0.0,
    };
    let model = match c.time_model.as_deref().unwrap_or("jakes") {
        "jakes" => {
            if !(fd_ts.is_finite() && fd_ts >= 0.0) {
                return Err(Error::config(format!("fd_ts {fd_ts} must be finite and >= 0")));
            }
            TimeCorrModel::Jakes { fd_ts }
        }
        "static" => TimeCorrModel::Static,
        other => return Err(Error::config(format!("unknown time model '{other}'"))),
    };
    let spec = ChannelSpec { pdp, model };
    spec.profile()?;
    Ok(spec)
}

fn build_range(r: &RangeSection) -> Result<Vec<f64>> {
    let values = match (&r.values, r.start, r.stop, r.points) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(start), Some(stop), Some(points)) => {
            if points == 0 {
                return Err(Error::config("range needs at least one point"));
            }
            let log = match r.scale.as_deref().unwrap_or("linear") {
                "linear" => false,
                "log" => true,
                other => return Err(Error::config(format!("unknown range scale '{other}'"))),
            };
            if log && !(start > 0.0 && stop > 0.0) {
                return Err(Error::config("log ranges need positive bounds"));
            }
            (0..points)
                .map(|i| {
                    let t = if points == 1 {
                        0.0
                    } else {
                        i as f64 / (points - 1) as f64
                    };
                    if log {
                        (start.ln() + t * (stop.ln() - start.ln())).exp()
                    } else {
                        start + t * (stop - start)
                    }
                })
                .collect()
        }
        _ => {
            return Err(Error::config(
                "range needs either 'values' or 'start', 'stop' and 'points'",
            ))
        }
    };
    if values.is_empty() {
        return Err(Error::config("range is empty"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::config("range values must be finite and non-negative"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("range values must be strictly increasing"));
    }
    Ok(values)
}

fn build_user(index: usize, u: &UserSection, system: &SystemConfig) -> Result<UserSpec> {
    let subbands = match (&u.subbands, u.first_subcarrier, u.m) {
        (Some(list), None, None) => list.clone(),
        (None, Some(first), Some(m)) => contiguous(system.n, system.n_rb, Some(first), m),
        _ => {
            return Err(Error::config(format!(
                "user {} needs either 'subbands' or 'first_subcarrier' and 'm'",
                index + 1
            )))
        }
    };
    let channel = build_channel(&u.channel)?;
    channel.profile()?.ensure_supported(system)?;
    Ok(UserSpec {
        name: u.name.clone().unwrap_or_else(|| format!("ue{}", index + 1)),
        subbands,
        channel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [system]
        n = 32
        l = 4
        n_rb = 4
        m = 4

        [channel]
        pdp = "exponential"
        beta = 0.6
        n_taps = 13
        stretch = 1
        fd_ts = 1e-3
    "#;

    #[test]
    fn parses_minimal_scenario() {
        let s = Scenario::parse(MINIMAL, "mini").unwrap();
        assert_eq!(s.name, "mini");
        assert_eq!(s.system.subbands, vec![8, 12, 16, 20]);
        assert_eq!(s.system.lf, 5);
        let ch = s.channel.unwrap();
        assert_eq!(ch.model, TimeCorrModel::Jakes { fd_ts: 1e-3 });
        assert_eq!(ch.profile().unwrap().max_delay(), 12);
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = MINIMAL.replace("m = 4", "m = 4\nbogus = 1");
        assert!(matches!(Scenario::parse(&unknown, "x"), Err(Error::Config(_))));
        let long = MINIMAL.replace("n_taps = 13", "n_taps = 40");
        assert!(matches!(
            Scenario::parse(&long, "x"),
            Err(Error::UnsupportedRegime { .. })
        ));
        let both = MINIMAL.replace("fd_ts = 1e-3", "fd_ts = 1e-3\nspeed_kmh = 3.0");
        assert!(Scenario::parse(&both, "x").is_err());
        let lf = MINIMAL.replace("m = 4", "m = 4\nlf = 4");
        assert!(Scenario::parse(&lf, "x").is_err());
    }

    #[test]
    fn ranges() {
        let r = |text: &str| build_range(&toml::from_str::<RangeSection>(text).unwrap());
        assert_eq!(r("start = 0.0\nstop = 1.0\npoints = 3").unwrap(), vec![0.0, 0.5, 1.0]);
        let log = r("start = 1e-5\nstop = 1e-3\npoints = 3\nscale = \"log\"").unwrap();
        assert!((log[1] - 1e-4).abs() < 1e-18);
        assert!(r("values = [1.0, 1.0]").is_err());
        assert!(r("values = []").is_err());
        assert!(r("values = [1.0]\npoints = 2").is_err());
    }

    #[test]
    fn speed_conversion() {
        let fd = doppler_from_speed(50.0, 2.5e9, 15.36e6).unwrap();
        // 50 km/h at 2.5 GHz is about 115.8 Hz
        assert!((fd * 15.36e6 - 115.8).abs() < 0.1);
    }
}
