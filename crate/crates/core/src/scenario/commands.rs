//! The four studies behind the command line.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use super::table::{write_file, OutputFormat, ResultRow, ResultTable, Source};
use super::{ChannelSpec, Scenario, SweepAxis};
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_error, simulate, EmpiricalBreakdown, SimSpec};
use crate::sinr::{sinr_report, to_db, uplink_compose, Analyzer, PowerBreakdown, UserLink};
use crate::waveform::WaveformKind;

/// Differences below this are treated as agreement regardless of the
/// standard error; it only matters for terms that are identically zero.
const ABSOLUTE_FLOOR: f64 = 1e-12;

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub table: ResultTable,
    /// Human-readable findings, one per line.
    pub summary: Vec<String>,
    /// Extra CSV files as `(suffix, contents)`.
    pub grids: Vec<(String, String)>,
    /// Set when a verification run found a deviation beyond three standard errors.
    pub verification_failed: bool,
}

impl CommandOutput {
    fn new(table: ResultTable) -> Self {
        CommandOutput {
            table,
            summary: Vec::new(),
            grids: Vec::new(),
            verification_failed: false,
        }
    }

    pub fn stem(&self) -> String {
        format!("{}_{}", self.table.metadata.scenario, self.table.metadata.command)
    }

    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        let stem = self.stem();
        let mut paths = self.table.write(dir, &stem, format)?;
        for (suffix, text) in &self.grids {
            let path = dir.join(format!("{stem}_{suffix}.csv"));
            write_file(&path, text)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?
            .install(f),
    }
}

struct RowContext<'a> {
    scenario: &'a str,
    kind: WaveformKind,
    user: Option<&'a str>,
    rms_delay: f64,
    fd_ts: f64,
}

impl RowContext<'_> {
    fn row(&self, subcarrier: Option<usize>, source: Source, powers: [f64; 3], noise: f64) -> ResultRow {
        let [p_s, p_ici, p_isi] = powers;
        let sinr = p_s / (p_ici + p_isi + noise);
        ResultRow {
            scenario: self.scenario.to_string(),
            waveform: self.kind.name().to_string(),
            user: self.user.map(str::to_string),
            rms_delay: Some(self.rms_delay),
            fd_ts: Some(self.fd_ts),
            subcarrier,
            source,
            p_s,
            p_ici,
            p_isi,
            sinr_db: to_db(sinr),
            capacity_bpcu: (1.0 + sinr).log2(),
            se_s: None,
            se_ici: None,
            se_isi: None,
        }
    }

    /// Per-subcarrier rows followed by the allocation average.
    fn analytic_rows(&self, pb: &PowerBreakdown, per_subcarrier: bool) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        if per_subcarrier {
            for (i, &k) in pb.subcarriers.iter().enumerate() {
                rows.push(self.row(
                    Some(k),
                    Source::Analytic,
                    [pb.p_s[i], pb.p_ici[i], pb.p_isi[i]],
                    pb.noise,
                ));
            }
        }
        rows.push(self.mean_row(pb));
        rows
    }

    fn mean_row(&self, pb: &PowerBreakdown) -> ResultRow {
        let report = sinr_report(pb);
        ResultRow {
            sinr_db: report.mean_sinr_db,
            capacity_bpcu: report.capacity_bpcu,
            ..self.row(
                None,
                Source::Analytic,
                [pb.mean_signal(), pb.mean_ici(), pb.mean_isi()],
                pb.noise,
            )
        }
    }
}

/// Analytic against Monte Carlo powers for each configured waveform.
pub fn run_verify(scenario: &Scenario, opts: RunOptions) -> Result<CommandOutput> {
    let study = scenario
        .verify
        .as_ref()
        .ok_or_else(|| Error::config(format!("scenario '{}' has no [verify] section", scenario.name)))?;
    let channel = scenario.require_channel()?;
    let pdp = channel.profile()?;
    let seed = opts.seed.unwrap_or(study.seed);
    let cfg = &scenario.system;

    in_pool(opts.workers, || {
        let mut out = CommandOutput::new(ResultTable::new(&scenario.name, "verify", Some(seed)));
        let mut findings = Vec::new();
        for &kind in &study.waveforms {
            let analyzer = Analyzer::new(cfg, kind)?;
            let pb = analyzer.breakdown(&pdp, &channel.model)?;
            let mut spec = SimSpec::new(
                cfg.clone(),
                kind,
                pdp.clone(),
                channel.model.clone(),
                study.realizations,
                seed,
            );
            spec.qam = study.qam;
            let emp = simulate(&spec)?;
            let se = estimate_error(&emp)?;

            let ctx = RowContext {
                scenario: &scenario.name,
                kind,
                user: None,
                rms_delay: pdp.rms_delay(),
                fd_ts: channel.fd_ts(),
            };
            for (i, &k) in pb.subcarriers.iter().enumerate() {
                out.table.rows.push(ctx.row(
                    Some(k),
                    Source::Analytic,
                    [pb.p_s[i], pb.p_ici[i], pb.p_isi[i]],
                    pb.noise,
                ));
                out.table.rows.push(ResultRow {
                    se_s: Some(se.s[i]),
                    se_ici: Some(se.ici[i]),
                    se_isi: Some(se.isi[i]),
                    ..ctx.row(
                        Some(k),
                        Source::MonteCarlo,
                        [emp.p_s[i], emp.p_ici[i], emp.p_isi[i]],
                        pb.noise,
                    )
                });
            }

            let dev = Deviation::new(&pb, &emp, &[se.s.clone(), se.ici.clone(), se.isi.clone()]);
            out.verification_failed |= dev.outside > 0;
            out.summary.push(format!(
                "{kind}: max |analytic - empirical| S {:.3} dB, ICI {:.3} dB, ISI {:.3} dB; \
                 largest deviation {:.2} standard errors; {} of {} values beyond 3 sigma",
                dev.max_db[0], dev.max_db[1], dev.max_db[2], dev.max_z, dev.outside, dev.checked
            ));
            let mut finding = json!({
                "waveform": kind.name(),
                "max_db": {"s": dev.max_db[0], "ici": dev.max_db[1], "isi": dev.max_db[2]},
                "max_z": dev.max_z,
                "outside_3_sigma": dev.outside,
                "mean_isi_db": to_db(pb.mean_isi()),
            });
            if let Some(reference) = study.reference_fd_ts {
                let other = analyzer.breakdown(&pdp, &channel.with_fd_ts(reference).model)?;
                let delta = to_db(pb.mean_isi()) - to_db(other.mean_isi());
                out.summary.push(format!(
                    "{kind}: mean ISI {:.3} dB, {delta:+.3} dB against f_D T_s = {reference:e}",
                    to_db(pb.mean_isi())
                ));
                finding["isi_change_db"] = json!(delta);
            }
            findings.push(finding);
        }
        out.table.metadata.summary = json!({ "waveforms": findings, "failed": out.verification_failed });
        Ok(out)
    })
}

struct Deviation {
    max_db: [f64; 3],
    max_z: f64,
    outside: usize,
    checked: usize,
}

impl Deviation {
    fn new(pb: &PowerBreakdown, emp: &EmpiricalBreakdown, se: &[Vec<f64>; 3]) -> Self {
        let analytic = [&pb.p_s, &pb.p_ici, &pb.p_isi];
        let empirical = [&emp.p_s, &emp.p_ici, &emp.p_isi];
        let mut dev = Deviation {
            max_db: [0.0; 3],
            max_z: 0.0,
            outside: 0,
            checked: 0,
        };
        for term in 0..3 {
            for i in 0..pb.len() {
                let (a, e, s) = (analytic[term][i], empirical[term][i], se[term][i]);
                let diff = (a - e).abs();
                dev.checked += 1;
                if diff > 3.0 * s + ABSOLUTE_FLOOR {
                    dev.outside += 1;
                }
                if s > 0.0 {
                    dev.max_z = dev.max_z.max(diff / s);
                }
                if a > ABSOLUTE_FLOOR && e > ABSOLUTE_FLOOR {
                    dev.max_db[term] = dev.max_db[term].max((to_db(a) - to_db(e)).abs());
                }
            }
        }
        dev
    }
}

/// One point of the `(rms delay, Doppler)` plane.
#[derive(Debug, Clone, Copy)]
struct Point {
    rms_delay: Option<f64>,
    fd_ts: Option<f64>,
}

fn channel_at(base: &ChannelSpec, p: Point) -> Result<ChannelSpec> {
    let mut spec = base.clone();
    if let Some(tau) = p.rms_delay {
        spec = spec.with_rms_delay(tau)?;
    }
    if let Some(fd) = p.fd_ts {
        spec = spec.with_fd_ts(fd);
    }
    Ok(spec)
}

/// Allocation averages for every point and waveform, in point-major order.
fn evaluate_grid(scenario: &Scenario, kinds: &[WaveformKind], points: &[Point]) -> Result<Vec<Vec<ResultRow>>> {
    let base = scenario.require_channel()?;
    let analyzers = kinds
        .par_iter()
        .map(|&k| Analyzer::new(&scenario.system, k))
        .collect::<Result<Vec<_>>>()?;
    points
        .par_iter()
        .map(|&p| {
            let spec = channel_at(base, p)?;
            let pdp = spec.profile()?;
            analyzers
                .iter()
                .map(|a| {
                    let pb = a.breakdown(&pdp, &spec.model)?;
                    let ctx = RowContext {
                        scenario: &scenario.name,
                        kind: a.kind(),
                        user: None,
                        rms_delay: p.rms_delay.unwrap_or_else(|| pdp.rms_delay()),
                        fd_ts: spec.fd_ts(),
                    };
                    Ok(ctx.mean_row(&pb))
                })
                .collect()
        })
        .collect()
}

/// Crossing of `a - b` between two adjacent points, linearly interpolated.
fn crossings(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let mut out = Vec::new();
    for i in 0..d.len().saturating_sub(1) {
        if d[i] == 0.0 {
            out.push(x[i]);
        } else if d[i] * d[i + 1] < 0.0 {
            out.push(x[i] + (x[i + 1] - x[i]) * d[i] / (d[i] - d[i + 1]));
        }
    }
    if d.last() == Some(&0.0) {
        out.push(x[x.len() - 1]);
    }
    out
}

/// Mean SINR along one axis, one curve per `series` value.
pub fn run_sweep(scenario: &Scenario, opts: RunOptions) -> Result<CommandOutput> {
    let study = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config(format!("scenario '{}' has no [sweep] section", scenario.name)))?;
    let series: Vec<Option<f64>> = if study.series.is_empty() {
        vec![None]
    } else {
        study.series.iter().copied().map(Some).collect()
    };
    let points: Vec<Point> = series
        .iter()
        .flat_map(|&s| {
            study.points.iter().map(move |&x| match study.axis {
                SweepAxis::Delay => Point {
                    rms_delay: Some(x),
                    fd_ts: s,
                },
                SweepAxis::Doppler => Point {
                    rms_delay: s,
                    fd_ts: Some(x),
                },
            })
        })
        .collect();

    in_pool(opts.workers, || {
        let grid = evaluate_grid(scenario, &study.waveforms, &points)?;
        let mut out = CommandOutput::new(ResultTable::new(&scenario.name, "sweep", None));
        let axis = match study.axis {
            SweepAxis::Delay => "rms_delay",
            SweepAxis::Doppler => "fd_ts",
        };
        let per_series = study.points.len();
        let mut found = Vec::new();
        for (si, s) in series.iter().enumerate() {
            let block = &grid[si * per_series..(si + 1) * per_series];
            let curve = |wi: usize| block.iter().map(|rows| rows[wi].sinr_db).collect::<Vec<_>>();
            if let Some(uf) = study.waveforms.iter().position(|&k| k == WaveformKind::Uf) {
                for (wi, kind) in study
                    .waveforms
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k != WaveformKind::Uf)
                {
                    let xs = crossings(&study.points, &curve(uf), &curve(wi));
                    let label = s.map(|v| format!(" (series {v:e})")).unwrap_or_default();
                    if xs.is_empty() {
                        out.summary.push(format!("uf/{kind}{label}: no crossover"));
                    }
                    for x in &xs {
                        let x = match study.axis {
                            SweepAxis::Delay => format!("{x:.3}"),
                            SweepAxis::Doppler => format!("{x:.3e}"),
                        };
                        out.summary.push(format!("uf/{kind}{label}: crossover at {axis} = {x}"));
                    }
                    found.push(json!({ "series": s, "against": kind.name(), axis: xs }));
                }
            }
            for rows in block {
                out.table.rows.extend(rows.iter().cloned());
            }
        }
        out.table.metadata.summary = json!({ "axis": axis, "crossovers": found });
        Ok(out)
    })
}

/// Mean SINR over the `(rms delay, Doppler)` grid.
pub fn run_heatmap(scenario: &Scenario, opts: RunOptions) -> Result<CommandOutput> {
    let study = scenario
        .heatmap
        .as_ref()
        .ok_or_else(|| Error::config(format!("scenario '{}' has no [heatmap] section", scenario.name)))?;
    let points: Vec<Point> = study
        .delays
        .iter()
        .flat_map(|&tau| {
            study.dopplers.iter().map(move |&fd| Point {
                rms_delay: Some(tau),
                fd_ts: Some(fd),
            })
        })
        .collect();

    in_pool(opts.workers, || {
        let grid = evaluate_grid(scenario, &study.waveforms, &points)?;
        let mut out = CommandOutput::new(ResultTable::new(&scenario.name, "heatmap", None));
        for (wi, kind) in study.waveforms.iter().enumerate() {
            // rows are delays, columns Doppler values
            let mut text = String::from("rms_delay");
            for fd in &study.dopplers {
                text.push_str(&format!(",{fd:e}"));
            }
            text.push('\n');
            for (di, tau) in study.delays.iter().enumerate() {
                text.push_str(&format!("{tau:e}"));
                for fi in 0..study.dopplers.len() {
                    text.push_str(&format!(",{:e}", grid[di * study.dopplers.len() + fi][wi].sinr_db));
                }
                text.push('\n');
            }
            out.grids.push((format!("{kind}_grid"), text));
            out.table.rows.extend(grid.iter().map(|rows| rows[wi].clone()));
        }
        out.summary.push(format!(
            "{} x {} grid for {} waveforms",
            study.delays.len(),
            study.dopplers.len(),
            study.waveforms.len()
        ));
        out.table.metadata.summary = json!({
            "rms_delay": study.delays,
            "fd_ts": study.dopplers,
        });
        Ok(out)
    })
}

/// Per-user and sum capacity for all three waveforms at a common receiver.
///
/// Rows with `user = "all"` carry the sum of the per-user capacities in
/// `capacity_bpcu` and averages over every allocated subcarrier otherwise.
pub fn run_uplink(scenario: &Scenario, opts: RunOptions) -> Result<CommandOutput> {
    if scenario.users.is_empty() {
        return Err(Error::config(format!("scenario '{}' has no [[users]]", scenario.name)));
    }
    let links = scenario
        .users
        .iter()
        .map(|u| {
            Ok(UserLink {
                subbands: u.subbands.clone(),
                pdp: u.channel.profile()?,
                model: u.channel.model.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    in_pool(opts.workers, || {
        let results = WaveformKind::ALL
            .par_iter()
            .map(|&kind| uplink_compose(&scenario.system, kind, &links))
            .collect::<Result<Vec<_>>>()?;
        let mut out = CommandOutput::new(ResultTable::new(&scenario.name, "uplink", None));
        let mut sums = Vec::new();
        for (kind, users) in WaveformKind::ALL.iter().zip(&results) {
            let mut all = Vec::new();
            for ((spec, link), res) in scenario.users.iter().zip(&links).zip(users) {
                let ctx = RowContext {
                    scenario: &scenario.name,
                    kind: *kind,
                    user: Some(&spec.name),
                    rms_delay: link.pdp.rms_delay(),
                    fd_ts: spec.channel.fd_ts(),
                };
                out.table.rows.extend(ctx.analytic_rows(&res.breakdown, true));
                all.push(&res.breakdown);
            }
            let merged = PowerBreakdown::new(
                all.iter().flat_map(|b| b.subcarriers.iter().copied()).collect(),
                all.iter().flat_map(|b| b.p_s.iter().copied()).collect(),
                all.iter().flat_map(|b| b.p_ici.iter().copied()).collect(),
                all.iter().flat_map(|b| b.p_isi.iter().copied()).collect(),
                scenario.system.noise_variance(),
            );
            let sum: f64 = users.iter().map(|r| r.report.capacity_bpcu).sum();
            let ctx = RowContext {
                scenario: &scenario.name,
                kind: *kind,
                user: Some("all"),
                rms_delay: f64::NAN,
                fd_ts: f64::NAN,
            };
            out.table.rows.push(ResultRow {
                rms_delay: None,
                fd_ts: None,
                capacity_bpcu: sum,
                ..ctx.mean_row(&merged)
            });
            sums.push(sum);
            let per_user: Vec<String> = scenario
                .users
                .iter()
                .zip(users)
                .map(|(u, r)| format!("{} {:.2}", u.name, r.report.capacity_bpcu))
                .collect();
            out.summary
                .push(format!("{kind}: sum capacity {sum:.3} bpcu ({})", per_user.join(", ")));
        }

        let uf = WaveformKind::ALL
            .iter()
            .position(|&k| k == WaveformKind::Uf)
            .expect("UF is listed");
        let mut gains = Vec::new();
        for (wi, kind) in WaveformKind::ALL.iter().enumerate().filter(|(i, _)| *i != uf) {
            let per_user: Vec<f64> = results[uf]
                .iter()
                .zip(&results[wi])
                .map(|(u, o)| u.report.mean_sinr_db - o.report.mean_sinr_db)
                .collect();
            out.summary.push(format!(
                "uf gain over {kind}: {}",
                scenario
                    .users
                    .iter()
                    .zip(&per_user)
                    .map(|(u, g)| format!("{} {g:+.2} dB", u.name))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
            gains.push(json!({ "against": kind.name(), "gain_db": per_user }));
        }
        out.table.metadata.summary = json!({
            "users": scenario.users.iter().map(|u| u.name.clone()).collect::<Vec<_>>(),
            "sum_capacity_bpcu": WaveformKind::ALL.iter().map(|k| k.name()).zip(sums).collect::<std::collections::BTreeMap<_, _>>(),
            "uf_sinr_gain": gains,
        });
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolation() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(crossings(&x, &[2.0, 1.0, -1.0, -2.0], &[0.0; 4]), vec![1.5]);
        assert!(crossings(&x, &[1.0; 4], &[0.0; 4]).is_empty());
        assert_eq!(crossings(&x, &[1.0, 0.0, -1.0, 1.0], &[0.0; 4]).len(), 2);
    }
}
