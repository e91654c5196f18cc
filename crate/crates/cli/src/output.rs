//! Trajectory serialization: CSV and JSON, lossless for `f64`.

use std::io::Write;
use std::path::Path;

use aks_core::Mat;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::Report;

/// A sampled matrix trajectory ready for serialization.
pub struct SampleTable {
    pub n: usize,
    pub times: Vec<f64>,
    pub mats: Vec<Mat>,
}

impl SampleTable {
    pub fn new(n: usize, times: Vec<f64>, mats: Vec<Mat>) -> Self {
        assert_eq!(times.len(), mats.len());
        SampleTable { n, times, mats }
    }
}

/// 17 significant digits: enough for exact `f64` round trips.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV header `t,L_11,...,L_nn,H,trL2,...,trLn`.
pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            cols.push(format!("L_{i}{j}"));
        }
    }
    cols.push("H".into());
    for k in 2..=n {
        cols.push(format!("trL{k}"));
    }
    cols.join(",")
}

pub fn to_csv(table: &SampleTable) -> String {
    let n = table.n;
    let mut out = String::new();
    out.push_str(&csv_header(n));
    out.push('\n');
    for (t, m) in table.times.iter().zip(table.mats.iter()) {
        let mut cols = vec![fmt(*t)];
        for i in 0..n {
            for j in 0..n {
                cols.push(fmt(m[(i, j)]));
            }
        }
        cols.push(fmt(0.5 * m.trace_form(m)));
        for v in m.power_traces() {
            cols.push(fmt(v));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Parse a CSV trajectory back (used by the round-trip tests).
pub fn from_csv(text: &str) -> Result<SampleTable, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let ncols = header.split(',').count();
    // columns: 1 + n^2 + 1 + (n - 1) => n^2 + n + 1
    let mut n = 0usize;
    while n * n + n + 1 < ncols {
        n += 1;
    }
    if n * n + n + 1 != ncols {
        return Err(format!("unexpected column count {ncols}"));
    }
    let mut times = Vec::new();
    let mut mats = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| format!("line {}: {e}", lineno + 2)))
            .collect::<Result<_, _>>()?;
        if vals.len() != ncols {
            return Err(format!("line {}: wrong column count", lineno + 2));
        }
        times.push(vals[0]);
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = vals[1 + i * n + j];
            }
        }
        mats.push(m);
    }
    Ok(SampleTable { n, times, mats })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonInvariants {
    #[serde(rename = "H")]
    pub h: f64,
    /// `tr(L^k)` for `k = 2..=n`.
    #[serde(rename = "trL")]
    pub tr_l: Vec<f64>,
    /// Characteristic-polynomial coefficients, constant term first.
    #[serde(rename = "charPoly")]
    pub char_poly: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonSample {
    pub t: f64,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    pub invariants: JsonInvariants,
}

/// The self-describing JSON artifact: config echo, samples, report.
#[derive(Serialize)]
pub struct JsonRun<'a> {
    pub config: &'a RunConfig,
    pub samples: Vec<JsonSample>,
    pub report: &'a Report,
}

/// Owned mirror of [`JsonRun`] for parsing artifacts back.
#[derive(Deserialize)]
pub struct JsonRunOwned {
    pub config: RunConfig,
    pub samples: Vec<JsonSample>,
    pub report: Report,
}

pub fn json_samples(table: &SampleTable) -> Vec<JsonSample> {
    table
        .times
        .iter()
        .zip(table.mats.iter())
        .map(|(t, m)| JsonSample {
            t: *t,
            l: crate::config::mat_to_rows(m),
            invariants: JsonInvariants {
                h: 0.5 * m.trace_form(m),
                tr_l: m.power_traces(),
                char_poly: m.char_poly(),
            },
        })
        .collect()
}

pub fn to_json(config: &RunConfig, table: &SampleTable, report: &Report) -> String {
    let run = JsonRun { config, samples: json_samples(table), report };
    let mut s = serde_json::to_string_pretty(&run).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}
