//! Result rows and their CSV / JSON encodings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 15] = [
    "scenario",
    "waveform",
    "user",
    "rms_delay",
    "fd_ts",
    "subcarrier",
    "source",
    "p_s",
    "p_ici",
    "p_isi",
    "sinr_db",
    "capacity_bpcu",
    "se_s",
    "se_ici",
    "se_isi",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Where a row's numbers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    MonteCarlo,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::MonteCarlo => "montecarlo",
        }
    }
}

/// One output row. A missing `subcarrier` marks an average over the
/// allocation; `sinr_db` is then the dB value of the mean linear SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub waveform: String,
    pub user: Option<String>,
    pub rms_delay: Option<f64>,
    pub fd_ts: Option<f64>,
    pub subcarrier: Option<usize>,
    pub source: Source,
    pub p_s: f64,
    pub p_ici: f64,
    pub p_isi: f64,
    pub sinr_db: f64,
    pub capacity_bpcu: f64,
    pub se_s: Option<f64>,
    pub se_ici: Option<f64>,
    pub se_isi: Option<f64>,
}

impl ResultRow {
    fn csv_fields(&self) -> [String; 15] {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        [
            self.scenario.clone(),
            self.waveform.clone(),
            self.user.clone().unwrap_or_default(),
            opt(self.rms_delay),
            opt(self.fd_ts),
            self.subcarrier.map(|k| k.to_string()).unwrap_or_default(),
            self.source.name().to_string(),
            fmt_f64(self.p_s),
            fmt_f64(self.p_ici),
            fmt_f64(self.p_isi),
            fmt_f64(self.sinr_db),
            fmt_f64(self.capacity_bpcu),
            opt(self.se_s),
            opt(self.se_ici),
            opt(self.se_isi),
        ]
    }
}

/// Shortest representation that parses back to the same value.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Run metadata written next to the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub scenario: String,
    pub command: String,
    pub seed: Option<u64>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// Command-specific findings (crossovers, deviations, sums).
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(scenario: &str, command: &str, seed: Option<u64>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ResultTable {
            metadata: Metadata {
                scenario: scenario.to_string(),
                command: command.to_string(),
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp,
                summary: serde_json::Value::Null,
            },
            rows: Vec::new(),
        }
    }

    /// Header plus one line per row. Contains no run metadata, so repeated
    /// runs with the same inputs give identical text.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.csv_fields().join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result table serializes")
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata).expect("metadata serializes")
    }

    /// Writes `<stem>.csv` plus `<stem>.meta.json`, or a single `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let files = match format {
            OutputFormat::Csv => vec![
                (dir.join(format!("{stem}.csv")), self.to_csv()),
                (dir.join(format!("{stem}.meta.json")), self.metadata_json()),
            ],
            OutputFormat::Json => vec![(dir.join(format!("{stem}.json")), self.to_json())],
        };
        for (path, text) in &files {
            write_file(path, text)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            scenario: "s".into(),
            waveform: "uf".into(),
            user: None,
            rms_delay: Some(2.5),
            fd_ts: None,
            subcarrier: Some(7),
            source: Source::Analytic,
            p_s: 0.1,
            p_ici: 1e-300,
            p_isi: 0.0,
            sinr_db: -3.0,
            capacity_bpcu: 1.0 / 3.0,
            se_s: None,
            se_ici: None,
            se_isi: None,
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new("s", "sweep", None);
        t.rows.push(row());
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), CSV_COLUMNS.len());
        assert_eq!(lines[1].split(',').count(), CSV_COLUMNS.len());
        assert!(lines[1].starts_with("s,uf,,2.5e0,,7,analytic,"));
        let cap: f64 = lines[1].split(',').nth(11).unwrap().parse().unwrap();
        assert_eq!(cap, 1.0 / 3.0);
    }

    #[test]
    fn json_round_trip() {
        let mut t = ResultTable::new("s", "verify", Some(3));
        t.rows.push(row());
        let back: ResultTable = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
