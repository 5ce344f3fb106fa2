//! The three-line control file:
//!
//! ```text
//! StockMean StockVar BondMean BondVar StockBondCov RFMax ER PrunePwr
//! PR PAlpha
//! NumRand Details
//! ```
//!
//! `NumRand = 0` means a fixed horizon and is followed by `T_D`; otherwise it
//! is followed by that many `gender age` pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hazard::{fixed_horizon_schedule, AgeTable, Gender, HazardSchedule, Member, MpuSpec};
use crate::returns::ReturnModel;
use crate::ruin::Discretization;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Horizon {
    Fixed(usize),
    Random(MpuSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub model: ReturnModel,
    pub rf_max: f64,
    pub prune_power: f64,
    pub p_r: u32,
    pub p_alpha: u32,
    pub horizon: Horizon,
}

fn field_err(line: usize, field: usize, msg: impl Into<String>) -> Error {
    Error::Control {
        line,
        field,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, field: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| field_err(line, field, format!("not a number: {tok:?}")))
}

pub fn parse_control(text: &str) -> Result<ControlConfig> {
    let lines: Vec<&str> = text.lines().collect();
    let content = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1);
    if content != 3 {
        return Err(field_err(
            content.min(lines.len()).max(1),
            0,
            format!("expected 3 lines, found {content}"),
        ));
    }
    let fields: Vec<Vec<&str>> = lines[..3]
        .iter()
        .map(|l| l.split_whitespace().collect())
        .collect();
    let arity = |line: usize, want: usize| -> Result<()> {
        let got = fields[line - 1].len();
        if got != want {
            return Err(field_err(
                line,
                got.min(want) + 1,
                format!("expected {want} fields, found {got}"),
            ));
        }
        Ok(())
    };

    arity(1, 8)?;
    let l1: Vec<f64> = fields[0]
        .iter()
        .enumerate()
        .map(|(i, t)| num::<f64>(t, 1, i + 1))
        .collect::<Result<_>>()?;
    let model = ReturnModel::new(l1[0], l1[1], l1[2], l1[3], l1[4], l1[6])
        .map_err(|e| field_err(1, 0, e.to_string()))?;
    let (rf_max, prune_power) = (l1[5], l1[7]);

    arity(2, 2)?;
    let p_r: u32 = num(fields[1][0], 2, 1)?;
    let p_alpha: u32 = num(fields[1][1], 2, 2)?;

    let l3 = &fields[2];
    if l3.is_empty() {
        return Err(field_err(3, 1, "missing NumRand"));
    }
    let n: usize = num(l3[0], 3, 1)?;
    let horizon = if n == 0 {
        arity(3, 2)?;
        let t_d: usize = num(l3[1], 3, 2)?;
        if t_d == 0 {
            return Err(field_err(3, 2, "fixed horizon must be >= 1"));
        }
        Horizon::Fixed(t_d)
    } else {
        arity(3, 1 + 2 * n)?;
        let mut members = Vec::with_capacity(n);
        for k in 0..n {
            let gf = 2 + 2 * k;
            let gender: Gender = l3[gf - 1].parse().map_err(|_| {
                field_err(
                    3,
                    gf,
                    format!("gender must be M or F, got {:?}", l3[gf - 1]),
                )
            })?;
            let age: u32 = num(l3[gf], 3, gf + 1)?;
            members.push(Member::new(gender, age));
        }
        Horizon::Random(MpuSpec::new(members)?)
    };

    let cfg = ControlConfig {
        model,
        rf_max,
        prune_power,
        p_r,
        p_alpha,
        horizon,
    };
    cfg.discretization()
        .map_err(|e| field_err(2, 0, e.to_string()))?;
    Ok(cfg)
}

pub fn load_control(path: impl AsRef<Path>) -> Result<ControlConfig> {
    parse_control(&fs::read_to_string(path)?)
}

impl ControlConfig {
    pub fn discretization(&self) -> Result<Discretization> {
        Discretization::new(self.p_r, self.p_alpha, self.rf_max, self.prune_power)
    }

    /// The hazard schedule; random horizons need the age table.
    pub fn hazards(&self, table: Option<&AgeTable>) -> Result<HazardSchedule> {
        match &self.horizon {
            Horizon::Fixed(t) => fixed_horizon_schedule(*t),
            Horizon::Random(mpu) => {
                let table = table.ok_or_else(|| {
                    Error::InvalidParameter("a random horizon needs an age table".into())
                })?;
                crate::hazard::derive_hazards(table, mpu)
            }
        }
    }

    /// Control-file text; numbers use the shortest form that parses back exactly.
    pub fn emit(&self) -> String {
        let m = &self.model;
        let mut out = String::new();
        writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            m.stock_mean,
            m.stock_var,
            m.bond_mean,
            m.bond_var,
            m.stock_bond_cov,
            self.rf_max,
            m.expense_ratio,
            self.prune_power
        )
        .unwrap();
        writeln!(out, "{} {}", self.p_r, self.p_alpha).unwrap();
        match &self.horizon {
            Horizon::Fixed(t) => writeln!(out, "0 {t}").unwrap(),
            Horizon::Random(mpu) => {
                write!(out, "{}", mpu.members.len()).unwrap();
                for m in &mpu.members {
                    write!(out, " {} {}", m.gender, m.age).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }
}
