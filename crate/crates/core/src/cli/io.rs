//! Trace and summary CSV files and the run manifest.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a trace
//! back reproduces the in-memory values exactly. Optional values are empty
//! cells.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Phase, RegretTrace, RoundRecord, SummaryRow};
use crate::error::{Error, Result};

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trace_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "round", "phase", "decomposition"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=d).map(|i| format!("x_{i}")));
    h.extend(["y", "best_y", "inst_regret", "best_regret", "wall_ms", "beta"].iter().map(|s| s.to_string()));
    h
}

pub fn write_trace<W: Write>(out: W, trace: &RegretTrace) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(trace_header(trace.d))?;
    for r in &trace.records {
        if r.x.len() != trace.d {
            return Err(Error::invalid(format!("round {} has {} coordinates, trace has d = {}", r.round, r.x.len(), trace.d)));
        }
        let mut row = vec![
            trace.seed.to_string(),
            r.round.to_string(),
            match r.phase {
                Phase::Init => "init".into(),
                Phase::Bo => "bo".into(),
            },
            r.decomposition.clone().unwrap_or_default(),
        ];
        row.extend(r.x.iter().map(|&v| fmt_f64(v)));
        row.extend([fmt_f64(r.y), fmt_f64(r.best_y), fmt_opt(r.inst_regret), fmt_opt(r.best_regret), fmt_f64(r.wall_ms), fmt_opt(r.beta)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &RegretTrace) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64> {
    s.parse().map_err(|_| Error::invalid(format!("line {line}: bad {what} `{s}`")))
}

fn parse_opt(s: &str, what: &str, line: u64) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, what, line).map(Some)
    }
}

pub fn read_trace<R: Read>(input: R) -> Result<RegretTrace> {
    let mut rd = csv::ReaderBuilder::new().from_reader(input);
    let header = rd.headers()?.clone();
    let n = header.len();
    if n < 10 {
        return Err(Error::invalid("trace header is too short"));
    }
    let d = n - 10;
    let expected = trace_header(d);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::invalid(format!("unexpected trace header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut seed = None;
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let s: u64 = row[0].parse().map_err(|_| Error::invalid(format!("line {line}: bad seed")))?;
        if *seed.get_or_insert(s) != s {
            return Err(Error::invalid(format!("line {line}: mixed seeds in one trace")));
        }
        let phase = match &row[2] {
            "init" => Phase::Init,
            "bo" => Phase::Bo,
            p => return Err(Error::invalid(format!("line {line}: bad phase `{p}`"))),
        };
        let x = (0..d).map(|i| parse_f64(&row[4 + i], "coordinate", line)).collect::<Result<Vec<_>>>()?;
        let k = 4 + d;
        records.push(RoundRecord {
            round: row[1].parse().map_err(|_| Error::invalid(format!("line {line}: bad round")))?,
            phase,
            decomposition: (!row[3].is_empty()).then(|| row[3].to_string()),
            x,
            y: parse_f64(&row[k], "y", line)?,
            best_y: parse_f64(&row[k + 1], "best_y", line)?,
            inst_regret: parse_opt(&row[k + 2], "inst_regret", line)?,
            best_regret: parse_opt(&row[k + 3], "best_regret", line)?,
            wall_ms: parse_f64(&row[k + 4], "wall_ms", line)?,
            beta: parse_opt(&row[k + 5], "beta", line)?,
        });
    }
    Ok(RegretTrace { seed: seed.unwrap_or(0), d, records })
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["round", "mean_best_regret", "stderr_best_regret", "n_seeds"])?;
    for r in rows {
        w.write_record([r.round.to_string(), fmt_f64(r.mean_best_regret), fmt_f64(r.stderr_best_regret), r.n_seeds.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::ReaderBuilder::new().from_reader(input);
    let mut rows = Vec::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            return Err(Error::invalid(format!("line {line}: expected 4 columns")));
        }
        rows.push(SummaryRow {
            round: row[0].parse().map_err(|_| Error::invalid(format!("line {line}: bad round")))?,
            mean_best_regret: parse_f64(&row[1], "mean", line)?,
            stderr_best_regret: parse_f64(&row[2], "stderr", line)?,
            n_seeds: row[3].parse().map_err(|_| Error::invalid(format!("line {line}: bad n_seeds")))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub ok: bool,
    pub trace: Option<PathBuf>,
    pub rounds_completed: usize,
    pub failed_round: Option<usize>,
    pub error: Option<String>,
    pub final_best_y: Option<f64>,
    pub final_best_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub objective: String,
    pub d: usize,
    pub strategy: String,
    /// Edge count after resolving `auto`.
    pub edges: usize,
    pub summary: Option<PathBuf>,
    /// `best_regret`, or `best_y` when the objective has no known optimum.
    pub summary_quantity: String,
    pub seeds: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub format_version: u32,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub ok: bool,
    pub runs: Vec<RunResult>,
    /// The experiment file with every default resolved; `rducb run` accepts
    /// this manifest in place of a config file.
    pub resolved_config: String,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> RegretTrace {
        RegretTrace {
            seed: 4,
            d: 2,
            records: vec![
                RoundRecord {
                    round: 1,
                    phase: Phase::Init,
                    decomposition: None,
                    x: vec![0.1, -3.0000000000000004],
                    y: 1.0 / 3.0,
                    best_y: 1.0 / 3.0,
                    inst_regret: Some(1e-300),
                    best_regret: Some(2.5e17),
                    wall_ms: 0.0,
                    beta: None,
                },
                RoundRecord {
                    round: 2,
                    phase: Phase::Bo,
                    decomposition: Some("1,2".into()),
                    x: vec![5e-324, 1.0],
                    y: -0.0,
                    best_y: -0.0,
                    inst_regret: None,
                    best_regret: None,
                    wall_ms: 12.25,
                    beta: Some(0.5 * 4f64.ln()),
                },
            ],
        }
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let t = sample_trace();
        let text = trace_to_string(&t).unwrap();
        assert!(text.starts_with("seed,round,phase,decomposition,x_1,x_2,y,best_y,inst_regret,best_regret,wall_ms,beta\n"));
        assert!(text.contains("\"1,2\""));
        let back = read_trace(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert!(back.records[1].y.is_sign_negative());
    }

    #[test]
    fn bad_trace_rejected() {
        assert!(read_trace("a,b\n".as_bytes()).is_err());
        let text = trace_to_string(&sample_trace()).unwrap().replace("init", "warm");
        assert!(read_trace(text.as_bytes()).is_err());
    }

    #[test]
    fn summary_round_trip() {
        let rows = vec![SummaryRow { round: 1, mean_best_regret: 0.1 + 0.2, stderr_best_regret: 0.0, n_seeds: 3 }];
        let mut buf = Vec::new();
        write_summary(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "round,mean_best_regret,stderr_best_regret,n_seeds\n1,0.30000000000000004,0.0,3\n");
        assert_eq!(read_summary(buf.as_slice()).unwrap(), rows);
    }
}
