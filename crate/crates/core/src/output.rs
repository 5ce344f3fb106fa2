//! Result files: the vertical `FinalResults_V.txt` listing and the two
//! horizontal CSV tables of probabilities and allocations.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::PolicyGrid;
use crate::textfmt::{fixed10, fixed50};

pub const VERTICAL_FILE: &str = "FinalResults_V.txt";
pub const PROB_CSV: &str = "FinalProbResults_H.csv";
pub const ALPHA_CSV: &str = "FinalAlphaResults_H.csv";
pub const HAZARD_FILE: &str = "hrates.txt";

fn rf_of(grid: &PolicyGrid, bucket: usize) -> f64 {
    bucket as f64 / grid.p_r as f64
}

/// One line per (stage, bucket): `t rf v alpha`, stages ascending.
pub fn vertical(grid: &PolicyGrid) -> String {
    let mut out = String::with_capacity(grid.stages() * grid.bucket_count() * 80);
    for t in 0..grid.stages() {
        for b in 1..=grid.bucket_count() {
            out.push_str(&t.to_string());
            out.push(' ');
            out.push_str(&fixed10(rf_of(grid, b)));
            out.push(' ');
            out.push_str(&fixed50(grid.value(t, b)));
            out.push(' ');
            out.push_str(&fixed10(grid.alloc(t, b)));
            out.push('\n');
        }
    }
    out
}

fn header(stages: usize) -> String {
    let mut h = String::from("RF");
    for t in 0..stages {
        h.push_str(&format!(", Time (t={t})"));
    }
    h.push('\n');
    h
}

fn horizontal(grid: &PolicyGrid, cell: impl Fn(usize, usize) -> String) -> String {
    let mut out = header(grid.stages());
    for b in 1..=grid.bucket_count() {
        out.push_str(&fixed10(rf_of(grid, b)));
        for t in 0..grid.stages() {
            out.push(',');
            out.push_str(&cell(t, b));
        }
        out.push('\n');
    }
    out
}

pub fn prob_csv(grid: &PolicyGrid) -> String {
    horizontal(grid, |t, b| fixed50(grid.value(t, b)))
}

pub fn alpha_csv(grid: &PolicyGrid) -> String {
    horizontal(grid, |t, b| fixed10(grid.alloc(t, b)))
}

/// Writes the three result files into `dir`.
pub fn write_all(grid: &PolicyGrid, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::write(dir.join(VERTICAL_FILE), vertical(grid))?;
    fs::write(dir.join(PROB_CSV), prob_csv(grid))?;
    fs::write(dir.join(ALPHA_CSV), alpha_csv(grid))?;
    Ok(())
}

fn bucket_of(rf: f64, p_r: u32) -> usize {
    (rf * p_r as f64 + 0.5) as usize
}

pub fn parse_vertical(text: &str, p_r: u32) -> Result<PolicyGrid> {
    let mut v: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Format {
            what: "result file",
            line: idx + 1,
            msg,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let t: usize = f[0]
            .parse()
            .map_err(|_| err(format!("bad stage {:?}", f[0])))?;
        let rf: f64 = f[1]
            .parse()
            .map_err(|_| err(format!("bad ruin factor {:?}", f[1])))?;
        let p: f64 = f[2]
            .parse()
            .map_err(|_| err(format!("bad probability {:?}", f[2])))?;
        let a: f64 = f[3]
            .parse()
            .map_err(|_| err(format!("bad allocation {:?}", f[3])))?;
        if t > v.len() {
            return Err(err(format!("stage {t} skips stage {}", v.len())));
        }
        if t == v.len() {
            v.push(Vec::new());
            alpha.push(Vec::new());
        }
        let b = bucket_of(rf, p_r);
        if b != v[t].len() + 1 {
            return Err(err(format!(
                "expected bucket {}, found {b}",
                v[t].len() + 1
            )));
        }
        v[t].push(p);
        alpha[t].push(a);
    }
    finish(p_r, v, alpha, "result file")
}

fn finish(
    p_r: u32,
    v: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    what: &'static str,
) -> Result<PolicyGrid> {
    let n = v.first().map_or(0, Vec::len);
    if n == 0 || v.iter().any(|row| row.len() != n) {
        return Err(Error::Format {
            what,
            line: 0,
            msg: "stages must be present and of equal length".into(),
        });
    }
    Ok(PolicyGrid { p_r, v, alpha })
}

/// Parses one horizontal table into `[stage][bucket]` order.
pub fn parse_horizontal(text: &str, p_r: u32) -> Result<Vec<Vec<f64>>> {
    let what = "horizontal table";
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(Error::Format {
        what,
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols.first() != Some(&"RF") {
        return Err(Error::Format {
            what,
            line: 1,
            msg: "header must start with RF".into(),
        });
    }
    for (t, c) in cols[1..].iter().enumerate() {
        if *c != format!("Time (t={t})") {
            return Err(Error::Format {
                what,
                line: 1,
                msg: format!("column {} should be `Time (t={t})`, found {c:?}", t + 2),
            });
        }
    }
    let stages = cols.len() - 1;
    let mut out = vec![Vec::new(); stages];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Format {
            what,
            line: idx + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != stages + 1 {
            return Err(err(format!(
                "expected {} fields, found {}",
                stages + 1,
                f.len()
            )));
        }
        let rf: f64 = f[0]
            .parse()
            .map_err(|_| err(format!("bad ruin factor {:?}", f[0])))?;
        if bucket_of(rf, p_r) != out[0].len() + 1 {
            return Err(err(format!("ruin factor {rf} out of sequence")));
        }
        for (t, tok) in f[1..].iter().enumerate() {
            out[t].push(tok.parse().map_err(|_| err(format!("bad value {tok:?}")))?);
        }
    }
    Ok(out)
}

/// Rebuilds a grid from the two horizontal tables.
pub fn parse_csv_pair(prob: &str, alpha: &str, p_r: u32) -> Result<PolicyGrid> {
    let v = parse_horizontal(prob, p_r)?;
    let a = parse_horizontal(alpha, p_r)?;
    if v.len() != a.len() || v.iter().zip(&a).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::Format {
            what: "horizontal table",
            line: 0,
            msg: "probability and allocation tables differ in shape".into(),
        });
    }
    finish(p_r, v, a, "horizontal table")
}

/// Allocation policy from `FinalAlphaResults_H.csv`; values are left at zero.
pub fn read_alpha_policy(path: impl AsRef<Path>, p_r: u32) -> Result<PolicyGrid> {
    let alpha = parse_horizontal(&fs::read_to_string(path)?, p_r)?;
    let v = alpha.iter().map(|row| vec![0.0; row.len()]).collect();
    finish(p_r, v, alpha, "allocation table")
}
