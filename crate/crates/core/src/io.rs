//! Observation files, estimate reports, and series CSVs.
//!
//! Series data are CSV with a one-line header. Reports are a flat
//! `key = value` block (the resolved configuration, then results) followed
//! by the iteration table. All numerals use [`fmt_num`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::format::fmt_num;
use crate::objective::ObservationSet;
use crate::spectral::FractionalTriple;
use crate::sweep::{SweepResult, TruncationStudy};
use crate::trust_region::{EstimateReport, IterationRecord, Termination};

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Write a CSV with the given header; every row must match its width.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a numeric CSV, checking the header, and return its rows.
pub fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let found: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Parse(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header,
            found
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{}: row {}: `{s}` is not a number", path.display(), i + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

const OBS_HEADER: [&str; 3] = ["t", "w", "phi"];

pub fn write_observations(path: &Path, obs: &ObservationSet) -> Result<()> {
    let rows: Vec<Vec<String>> = obs
        .times()
        .iter()
        .zip(obs.weights())
        .zip(obs.values())
        .map(|((t, w), v)| vec![fmt_num(*t), fmt_num(*w), fmt_num(*v)])
        .collect();
    write_csv(path, &OBS_HEADER, &rows)
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let rows = read_numeric_csv(path, &OBS_HEADER)?;
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    ObservationSet::from_parts(col(0), col(1), col(2))
}

const TRACE_HEADER: [&str; 9] = ["iter", "F", "I", "grad_norm", "R", "rho", "beta", "alpha", "gamma"];

/// Convergence trace with one row per iteration.
pub fn write_trace(path: &Path, report: &EstimateReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .history
        .iter()
        .map(|h| {
            vec![
                h.iter.to_string(),
                fmt_num(h.objective),
                fmt_num(h.discrepancy),
                fmt_num(h.grad_norm),
                fmt_num(h.radius),
                fmt_num(h.rho),
                fmt_num(h.a.beta),
                fmt_num(h.a.alpha),
                fmt_num(h.a.gamma),
            ]
        })
        .collect();
    write_csv(path, &TRACE_HEADER, &rows)
}

pub fn write_sweep(path: &Path, result: &SweepResult) -> Result<()> {
    let rows: Vec<Vec<String>> = result
        .entries
        .iter()
        .map(|e| {
            vec![
                fmt_num(e.lambda),
                fmt_num(e.a.beta),
                fmt_num(e.a.alpha),
                fmt_num(e.a.gamma),
                fmt_num(e.discrepancy),
                e.converged.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["lambda", "beta", "alpha", "gamma", "I", "converged"], &rows)
}

pub fn write_truncation(path: &Path, study: &TruncationStudy) -> Result<()> {
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.truncation.to_string(),
                fmt_num(r.a.beta),
                fmt_num(r.a.alpha),
                fmt_num(r.a.gamma),
                fmt_num(r.discrepancy),
            ]
        })
        .collect();
    write_csv(path, &["N", "beta", "alpha", "gamma", "I"], &rows)
}

/// |u_N(a*)(t,0) - φ(t)| per node, one column per truncation level.
pub fn write_reconstruction(path: &Path, study: &TruncationStudy) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(study.rows.iter().map(|r| format!("N{}", r.truncation)));
    let rows: Vec<Vec<String>> = study
        .observations
        .times()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![fmt_num(*t)];
            row.extend(study.rows.iter().map(|r| fmt_num(r.reconstruction_error[i])));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, &rows)
}

/// A finished estimate with the configuration and data it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: RunConfig,
    /// Observation file the estimate was fitted to.
    pub observations: String,
    pub estimate: EstimateReport,
}

const REPORT_TITLE: &str = "# fracdiff estimate report";
const TABLE_HEADER: &str = "iter,F,I,grad_norm,R,rho,beta,alpha,gamma,p_beta,p_alpha,p_gamma,accepted,next_R";

impl RunReport {
    pub fn render(&self) -> String {
        let e = &self.estimate;
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_TITLE}");
        let _ = writeln!(s, "[config]");
        s.push_str(&self.config.echo());
        let _ = writeln!(s, "[result]");
        let _ = writeln!(s, "observations = {}", self.observations);
        // noise scale is δ / (trapezoid L² norm of the clean trace)
        let _ = writeln!(s, "noise_normalization = trapezoid_l2");
        for (k, v) in [
            ("beta", fmt_num(e.a_final.beta)),
            ("alpha", fmt_num(e.a_final.alpha)),
            ("gamma", fmt_num(e.a_final.gamma)),
            ("i_final", fmt_num(e.i_final)),
            ("f_final", fmt_num(e.f_final)),
            ("lambda", fmt_num(e.lambda)),
            ("grad_norm", fmt_num(e.grad_norm)),
            ("termination", e.termination.to_string()),
            ("iterations", e.iterations.to_string()),
            ("accepted", e.accepted.to_string()),
            ("wall_time", fmt_num(e.wall_time)),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "[iterations]");
        let _ = writeln!(s, "{TABLE_HEADER}");
        for h in &e.history {
            let cells = [
                h.iter.to_string(),
                fmt_num(h.objective),
                fmt_num(h.discrepancy),
                fmt_num(h.grad_norm),
                fmt_num(h.radius),
                fmt_num(h.rho),
                fmt_num(h.a.beta),
                fmt_num(h.a.alpha),
                fmt_num(h.a.gamma),
                fmt_num(h.step[0]),
                fmt_num(h.step[1]),
                fmt_num(h.step[2]),
                h.accepted.to_string(),
                fmt_num(h.next_radius),
            ];
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_TITLE) || lines.next() != Some("[config]") {
            return Err(Error::Parse("not an estimate report".into()));
        }
        let mut config_text = String::new();
        let mut result: Vec<(String, String)> = Vec::new();
        let mut section = "config";
        let mut table: Vec<&str> = Vec::new();
        for line in lines {
            match line {
                "[result]" => section = "result",
                "[iterations]" => section = "iterations",
                _ => match section {
                    "config" => {
                        config_text.push_str(line);
                        config_text.push('\n');
                    }
                    "result" => {
                        let (k, v) = line
                            .split_once('=')
                            .ok_or_else(|| Error::Parse(format!("malformed report line `{line}`")))?;
                        result.push((k.trim().to_string(), v.trim().to_string()));
                    }
                    _ => table.push(line),
                },
            }
        }
        let config = RunConfig::parse_str(&config_text)?;
        let get = |key: &str| -> Result<&str> {
            result
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse(format!("report lacks `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            let v = get(key)?;
            v.parse().map_err(|_| Error::Parse(format!("`{key}` = `{v}` is not a number")))
        };
        let int = |key: &str| -> Result<usize> {
            let v = get(key)?;
            v.parse().map_err(|_| Error::Parse(format!("`{key}` = `{v}` is not an integer")))
        };
        let termination = Termination::parse(get("termination")?)
            .ok_or_else(|| Error::Parse("unknown termination reason".into()))?;
        if table.first() != Some(&TABLE_HEADER) {
            return Err(Error::Parse("missing iteration table header".into()));
        }
        let history = table[1..]
            .iter()
            .map(|line| parse_record(line))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            observations: get("observations")?.to_string(),
            estimate: EstimateReport {
                a_final: FractionalTriple::from_array([num("beta")?, num("alpha")?, num("gamma")?]),
                i_final: num("i_final")?,
                f_final: num("f_final")?,
                lambda: num("lambda")?,
                grad_norm: num("grad_norm")?,
                termination,
                iterations: int("iterations")?,
                accepted: int("accepted")?,
                history,
                wall_time: num("wall_time")?,
            },
        })
    }
}

fn parse_record(line: &str) -> Result<IterationRecord> {
    let cells: Vec<&str> = line.split(',').collect();
    if cells.len() != 14 {
        return Err(Error::Parse(format!("iteration row has {} cells: `{line}`", cells.len())));
    }
    let f = |i: usize| -> Result<f64> {
        cells[i]
            .parse()
            .map_err(|_| Error::Parse(format!("`{}` is not a number", cells[i])))
    };
    Ok(IterationRecord {
        iter: cells[0]
            .parse()
            .map_err(|_| Error::Parse(format!("`{}` is not an iteration index", cells[0])))?,
        objective: f(1)?,
        discrepancy: f(2)?,
        grad_norm: f(3)?,
        radius: f(4)?,
        rho: f(5)?,
        a: FractionalTriple::from_array([f(6)?, f(7)?, f(8)?]),
        step: [f(9)?, f(10)?, f(11)?],
        accepted: cells[12]
            .parse()
            .map_err(|_| Error::Parse(format!("`{}` is not a flag", cells[12])))?,
        next_radius: f(13)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::make_observations;
    use crate::spectral::SpectralExpansion;

    #[test]
    fn observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let exp = SpectralExpansion::from_coefficients(&[(1, 1.0), (5, 0.5)]).unwrap();
        let a = FractionalTriple::new(0.4, 0.6, 1.2).unwrap();
        let obs = make_observations(&exp, &a, 30, 1.0, 0.5, 3).unwrap();
        write_observations(&path, &obs).unwrap();
        let back = read_observations(&path).unwrap();
        assert_eq!(back.times(), obs.times());
        assert_eq!(back.weights(), obs.weights());
        assert_eq!(back.values(), obs.values());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,w,phi\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "time,value\n0.5,1\n").unwrap();
        assert!(matches!(read_observations(&path), Err(Error::Parse(_))));
    }
}
