//! Discrete-time hazard schedules for a single retiree or a pooled
//! multi-person unit (MPU), derived from a per-age death-probability table.
//!
//! The unit's last withdrawal happens when its last member dies, so
//! `F_TD(t) = prod_i F_i(t)` for independent members, and the hazard is
//! `h(t) = P(T_D = t | T_D >= t) = (F_TD(t) - F_TD(t-1)) / (1 - F_TD(t-1))`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::textfmt::fixed50;

/// Column-sum tolerance.
pub const SUM_TOLERANCE: f64 = 1e-15;

const BUNDLED_TABLE: &str = include_str!("../data/ageprobs.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn letter(self) -> char {
        match self {
            Gender::Male => 'M',
            Gender::Female => 'F',
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(Gender::Male),
            "F" | "f" => Ok(Gender::Female),
            _ => Err(Error::Mpu(format!("gender must be M or F, got {s:?}"))),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Per-age probabilities of death, one column per gender, indexed from `start_age`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeTable {
    pub start_age: u32,
    pub male_pmf: Vec<f64>,
    pub female_pmf: Vec<f64>,
    max_male_age: u32,
    max_female_age: u32,
}

impl AgeTable {
    pub fn new(start_age: u32, male_pmf: Vec<f64>, female_pmf: Vec<f64>) -> Result<Self> {
        if male_pmf.is_empty() || male_pmf.len() != female_pmf.len() {
            return Err(Error::AgeTable {
                line: 0,
                msg: "columns must be non-empty and of equal length".into(),
            });
        }
        for (k, (&m, &f)) in male_pmf.iter().zip(&female_pmf).enumerate() {
            if !(m >= 0.0 && f >= 0.0) || !m.is_finite() || !f.is_finite() {
                return Err(Error::AgeTable {
                    line: k + 1,
                    msg: format!(
                        "age {}: probabilities must be finite and >= 0",
                        start_age as usize + k
                    ),
                });
            }
        }
        for (name, col) in [("male", &male_pmf), ("female", &female_pmf)] {
            let sum: f64 = col.iter().rev().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::AgeTable {
                    line: col.len(),
                    msg: format!("{name} probabilities sum to {sum:.25}, not 1"),
                });
            }
        }
        let last_positive = |col: &[f64]| col.iter().rposition(|&p| p > 0.0).unwrap() as u32;
        Ok(Self {
            start_age,
            max_male_age: start_age + last_positive(&male_pmf),
            max_female_age: start_age + last_positive(&female_pmf),
            male_pmf,
            female_pmf,
        })
    }

    /// Parses whitespace-delimited `age male_prob female_prob` rows.
    pub fn parse(text: &str) -> Result<Self> {
        let mut start = None;
        let mut male = Vec::new();
        let mut female = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                return Err(Error::AgeTable {
                    line: line_no,
                    msg: "blank line".into(),
                });
            }
            if fields.len() != 3 {
                return Err(Error::AgeTable {
                    line: line_no,
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let bad = |what: &str, tok: &str| Error::AgeTable {
                line: line_no,
                msg: format!("bad {what} {tok:?}"),
            };
            let age: u32 = fields[0].parse().map_err(|_| bad("age", fields[0]))?;
            let m: f64 = fields[1]
                .parse()
                .map_err(|_| bad("probability", fields[1]))?;
            let f: f64 = fields[2]
                .parse()
                .map_err(|_| bad("probability", fields[2]))?;
            let first = *start.get_or_insert(age);
            if age as usize != first as usize + male.len() {
                return Err(Error::AgeTable {
                    line: line_no,
                    msg: format!("age {age} breaks the contiguous sequence from {first}"),
                });
            }
            if m < 0.0 || f < 0.0 {
                return Err(Error::AgeTable {
                    line: line_no,
                    msg: format!("negative probability at age {age}"),
                });
            }
            male.push(m);
            female.push(f);
        }
        let start = start.ok_or(Error::AgeTable {
            line: 0,
            msg: "empty table".into(),
        })?;
        Self::new(start, male, female)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// The SSA-derived table shipped with the crate (ages 50 to 113).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled age table is valid")
    }

    pub fn column(&self, g: Gender) -> &[f64] {
        match g {
            Gender::Male => &self.male_pmf,
            Gender::Female => &self.female_pmf,
        }
    }

    /// Last age with a positive death probability.
    pub fn max_age(&self, g: Gender) -> u32 {
        match g {
            Gender::Male => self.max_male_age,
            Gender::Female => self.max_female_age,
        }
    }

    pub fn end_age(&self) -> u32 {
        self.start_age + self.male_pmf.len() as u32 - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub gender: Gender,
    pub age: u32,
}

impl Member {
    pub fn new(gender: Gender, age: u32) -> Self {
        Self { gender, age }
    }
}

/// A multi-person unit; a single retiree is an MPU of one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpuSpec {
    pub members: Vec<Member>,
}

impl MpuSpec {
    pub fn new(members: Vec<Member>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Mpu("at least one member is required".into()));
        }
        Ok(Self { members })
    }

    pub fn validate(&self, table: &AgeTable) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Mpu("at least one member is required".into()));
        }
        for (i, m) in self.members.iter().enumerate() {
            if m.age < table.start_age || m.age > table.max_age(m.gender) {
                return Err(Error::Mpu(format!(
                    "member {} ({} {}) outside table ages {}..={}",
                    i + 1,
                    m.gender,
                    m.age,
                    table.start_age,
                    table.max_age(m.gender)
                )));
            }
        }
        Ok(())
    }

    /// Latest time with positive survival probability.
    pub fn s_max(&self, table: &AgeTable) -> usize {
        self.members
            .iter()
            .map(|m| (table.max_age(m.gender) - m.age) as usize)
            .max()
            .unwrap_or(0)
    }
}

/// `h(t) = P(T_D = t | T_D >= t)` for `t = 0..=S_Max`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardSchedule {
    hazards: Vec<f64>,
}

impl HazardSchedule {
    pub fn new(hazards: Vec<f64>) -> Result<Self> {
        if hazards.len() < 2 {
            return Err(Error::InvalidParameter(
                "a hazard schedule needs at least one decision stage".into(),
            ));
        }
        if let Some((t, h)) = hazards
            .iter()
            .enumerate()
            .find(|(_, h)| !(0.0..=1.0).contains(*h))
        {
            return Err(Error::InvalidParameter(format!(
                "h({t}) = {h} outside [0, 1]"
            )));
        }
        Ok(Self { hazards })
    }

    pub fn hazards(&self) -> &[f64] {
        &self.hazards
    }

    pub fn s_max(&self) -> usize {
        self.hazards.len() - 1
    }

    /// Number of allocation decisions (`t = 0..S_Max`).
    pub fn stages(&self) -> usize {
        self.s_max()
    }

    pub fn h(&self, t: usize) -> f64 {
        self.hazards[t]
    }

    /// `P(T_D > t | T_D >= t)`.
    pub fn survival(&self, t: usize) -> f64 {
        1.0 - self.hazards[t]
    }

    /// Whether every hazard before the last is zero (a fixed horizon).
    pub fn is_fixed(&self) -> bool {
        let n = self.hazards.len();
        self.hazards[..n - 1].iter().all(|&h| h == 0.0) && self.hazards[n - 1] == 1.0
    }

    /// `P(T_D <= t)` rebuilt from the hazards.
    pub fn cdf(&self) -> Vec<f64> {
        let mut alive = 1.0;
        self.hazards
            .iter()
            .map(|&h| {
                alive *= 1.0 - h;
                1.0 - alive
            })
            .collect()
    }

    /// `hrates.txt` layout: the hazard to 50 decimals, a space, then `(t=N)`.
    pub fn to_hrates(&self) -> String {
        let mut out = String::new();
        for (t, &h) in self.hazards.iter().enumerate() {
            out.push_str(&fixed50(h));
            out.push_str(&format!(" (t={t})\n"));
        }
        out
    }

    pub fn parse_hrates(text: &str) -> Result<Self> {
        let mut hazards = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Format {
                what: "hazard file",
                line: idx + 1,
                msg,
            };
            let (value, tag) = line
                .split_once(' ')
                .ok_or_else(|| err("expected `<hazard> (t=N)`".into()))?;
            let h: f64 = value
                .parse()
                .map_err(|_| err(format!("bad hazard {value:?}")))?;
            let t: usize = tag
                .trim()
                .strip_prefix("(t=")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(format!("bad time tag {tag:?}")))?;
            if t != hazards.len() {
                return Err(err(format!("expected t={}, found t={t}", hazards.len())));
            }
            hazards.push(h);
        }
        Self::new(hazards)
    }

    pub fn write_hrates(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_hrates())?;
        Ok(())
    }

    pub fn read_hrates(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_hrates(&fs::read_to_string(path)?)
    }
}

/// A member's conditional remaining-lifetime PMF re-indexed to `t = 0`, over
/// `len` time points.
/// The normaliser is summed from the oldest age down.
pub fn member_pmf(table: &AgeTable, member: Member, len: usize) -> Vec<f64> {
    let col = table.column(member.gender);
    let offset = (member.age - table.start_age) as usize;
    let norm: f64 = col[offset..].iter().rev().fold(0.0, |acc, &p| acc + p);
    let span = (table.max_age(member.gender) - member.age) as usize + 1;
    let mut pmf = vec![0.0; len];
    for (j, slot) in pmf.iter_mut().enumerate().take(span) {
        *slot = col[offset + j] / norm;
    }
    pmf
}

/// `P(T_D <= t)` for `t = 0..=S_Max`, the product of the members' CDFs.
pub fn unit_cdf(table: &AgeTable, mpu: &MpuSpec) -> Result<Vec<f64>> {
    mpu.validate(table)?;
    let len = mpu.s_max(table) + 1;
    let mut td: Option<Vec<f64>> = None;
    for &m in &mpu.members {
        let pmf = member_pmf(table, m, len);
        let mut acc = 0.0;
        let cdf: Vec<f64> = pmf
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        td = Some(match td {
            None => cdf,
            Some(prev) => prev.iter().zip(&cdf).map(|(a, b)| a * b).collect(),
        });
    }
    Ok(td.expect("validated non-empty"))
}

pub fn derive_hazards(table: &AgeTable, mpu: &MpuSpec) -> Result<HazardSchedule> {
    let td = unit_cdf(table, mpu)?;
    let mut hazards = Vec::with_capacity(td.len());
    hazards.push(td[0]);
    for j in 1..td.len() {
        hazards.push(((td[j] - td[j - 1]) / (1.0 - td[j - 1])).min(1.0));
    }
    if td.len() == 1 {
        return Err(Error::Mpu(
            "every member is already at the table's final age".into(),
        ));
    }
    HazardSchedule::new(hazards)
}

/// A deterministic horizon: the last withdrawal happens at `t_d`.
pub fn fixed_horizon_schedule(t_d: usize) -> Result<HazardSchedule> {
    if t_d == 0 {
        return Err(Error::InvalidParameter("fixed horizon must be >= 1".into()));
    }
    let mut hazards = vec![0.0; t_d + 1];
    hazards[t_d] = 1.0;
    HazardSchedule::new(hazards)
}
