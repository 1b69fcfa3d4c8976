//! Closed-form signal, ICI and ISI powers of CP-, ZP- and UF-OFDM over doubly
//! dispersive WSSUS channels, with a Monte Carlo link simulator to check them
//! and a scenario runner for sweeps, heatmaps and uplink studies.
//!
//! ```
//! use dispersive_sinr::channel::{exp_pdp, TimeCorrModel};
//! use dispersive_sinr::sinr::{analyze, sinr_report};
//! use dispersive_sinr::waveform::{SystemConfig, WaveformKind};
//!
//! let cfg = SystemConfig::new(64, 8, 4, 8, 8)?;
//! let pdp = exp_pdp(0.5, 6, 2)?;
//! let pb = analyze(&cfg, WaveformKind::Cp, &pdp, &TimeCorrModel::Jakes { fd_ts: 1e-3 })?;
//! // the channel memory (10 samples) exceeds the 8-sample prefix
//! assert!(pb.mean_isi() > 0.0);
//! println!("{:.2} dB", sinr_report(&pb).mean_sinr_db);
//! # Ok::<(), dispersive_sinr::Error>(())
//! ```

pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod scenario;
pub mod sinr;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $path))]
            mod $name {}
        };
    }
    chapter!(introduction, "introduction.md");
    chapter!(waveforms, "waveforms.md");
    chapter!(channel_statistics, "channel.md");
    chapter!(power_analysis, "analysis.md");
    chapter!(monte_carlo, "monte-carlo.md");
    chapter!(scenarios, "scenarios.md");

    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
