//! The ruin-factor state machine and its discretisation into buckets.
//!
//! With a real withdrawal of `W_R * A` per period, the ruin factor
//! `RF(t) = RF(t-1) / (r - RF(t-1))` tracks the account through the gross
//! real return `r`; its reciprocal is the number of withdrawals the account
//! can still fund. Ruin at `t` happens exactly when `r <= RF(t-1)`.

use crate::error::{Error, Result};

/// Ruin factor after a withdrawal attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuinFactor {
    Solvent(f64),
    Ruined,
}

impl RuinFactor {
    pub fn value(self) -> Option<f64> {
        match self {
            RuinFactor::Solvent(rf) => Some(rf),
            RuinFactor::Ruined => None,
        }
    }

    pub fn is_ruined(self) -> bool {
        matches!(self, RuinFactor::Ruined)
    }
}

/// Applies one period's gross return and withdrawal. Equality `r_hat == rf_prev`
/// counts as ruin.
#[inline]
pub fn next_ruin_factor(rf_prev: f64, r_hat: f64) -> RuinFactor {
    debug_assert!(rf_prev > 0.0, "ruin factor must be positive, got {rf_prev}");
    if r_hat > rf_prev {
        RuinFactor::Solvent(rf_prev / (r_hat - rf_prev))
    } else {
        RuinFactor::Ruined
    }
}

#[inline]
pub fn is_ruin(rf_prev: f64, r_hat: f64) -> bool {
    debug_assert!(rf_prev > 0.0);
    r_hat <= rf_prev
}

/// Ruin factor at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinFactorState {
    pub t: usize,
    pub rf: RuinFactor,
}

impl RuinFactorState {
    pub fn start(withdrawal_rate: f64) -> Self {
        Self {
            t: 0,
            rf: RuinFactor::Solvent(withdrawal_rate),
        }
    }

    /// Advances one period. A ruined state stays ruined.
    pub fn advance(self, r_hat: f64) -> Self {
        let rf = match self.rf {
            RuinFactor::Solvent(rf) => next_ruin_factor(rf, r_hat),
            RuinFactor::Ruined => RuinFactor::Ruined,
        };
        Self { t: self.t + 1, rf }
    }

    /// Real withdrawals the account can still fund.
    pub fn withdrawals_remaining(&self) -> Option<f64> {
        self.rf.value().map(|rf| 1.0 / rf)
    }
}

/// Balance bookkeeping in time-0 dollars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccountSnapshot {
    pub initial_balance: f64,
    pub rf0: f64,
    pub rf_t: RuinFactor,
}

impl AccountSnapshot {
    /// Real balance `A * RF(0) / RF(t)`; a ruined account has none.
    pub fn real_balance(&self) -> Result<f64> {
        match self.rf_t {
            RuinFactor::Solvent(rf) if rf > 0.0 => Ok(self.initial_balance * self.rf0 / rf),
            RuinFactor::Solvent(rf) => Err(Error::InvalidParameter(format!(
                "ruin factor must be positive, got {rf}"
            ))),
            RuinFactor::Ruined => Err(Error::InvalidParameter(
                "a ruined account has no balance".into(),
            )),
        }
    }
}

/// Converts a plan whose first withdrawal happens immediately (balance `B`,
/// rate `w_r` of the post-withdrawal balance) into standard form.
///
/// Returns `(A, W_0)` with `W_0 = w_r / (1 + w_r)` and `A = B (1 - W_0)`, so
/// that `W_0 * B == w_r * A`.
pub fn to_standard_form(balance_b: f64, w_r: f64) -> Result<(f64, f64)> {
    if !(w_r > 0.0 && w_r < 1.0) || !(balance_b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < w_r < 1 and B > 0 (got w_r={w_r}, B={balance_b})"
        )));
    }
    let w0 = w_r / (1.0 + w_r);
    Ok((balance_b * (1.0 - w0), w0))
}

/// Ruin-factor and allocation discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    /// Buckets per unit of ruin factor.
    pub p_r: u32,
    /// Allocation steps; the grid is `{0, 1/p_alpha, ..., 1}`.
    pub p_alpha: u32,
    pub rf_max: f64,
    /// Decimal places of the saturation test that switches the search to
    /// `alpha = 1`. `f64::INFINITY` disables it.
    pub prune_power: f64,
}

/// A ruin factor's bucket: `1..=bucket_count`, or the overflow region above `RF_Max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bucket {
    Interior(usize),
    Overflow,
}

impl Discretization {
    pub fn new(p_r: u32, p_alpha: u32, rf_max: f64, prune_power: f64) -> Result<Self> {
        let d = Self {
            p_r,
            p_alpha,
            rf_max,
            prune_power,
        };
        if p_r == 0 || p_alpha == 0 {
            return Err(Error::InvalidParameter("precisions must be >= 1".into()));
        }
        if !(rf_max > 0.0) || !rf_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "RF_Max must be positive, got {rf_max}"
            )));
        }
        if d.bucket_count() < 1 {
            return Err(Error::InvalidParameter(
                "RF_Max * P_R must be at least 1".into(),
            ));
        }
        if prune_power.is_nan() || prune_power < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "prune power must be >= 0, got {prune_power}"
            )));
        }
        Ok(d)
    }

    pub fn bucket_count(&self) -> usize {
        (self.rf_max * self.p_r as f64 + 0.5) as usize
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        (0..=self.p_alpha)
            .map(|a| a as f64 / self.p_alpha as f64)
            .collect()
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        i as f64 / self.p_r as f64
    }

    /// Upper edge of bucket `i`, `(i + 1/2) / P_R` (bucket 1 starts at 0).
    pub fn upper_edge(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.p_r as f64
    }

    /// Midpoint of an interior bucket.
    pub fn bucket_midpoint(&self, bucket: Bucket) -> Result<f64> {
        match bucket {
            Bucket::Interior(i) if (1..=self.bucket_count()).contains(&i) => Ok(self.midpoint(i)),
            Bucket::Interior(i) => Err(Error::InvalidParameter(format!(
                "bucket {i} outside 1..={}",
                self.bucket_count()
            ))),
            Bucket::Overflow => Err(Error::InvalidParameter(
                "the overflow bucket has no midpoint".into(),
            )),
        }
    }

    /// Buckets are closed on the right: bucket `i` is `((i-1/2)/P_R, (i+1/2)/P_R]`,
    /// bucket 1 also absorbs `(0, 1/(2 P_R)]`.
    pub fn bucket_index(&self, rf: f64) -> Bucket {
        debug_assert!(rf > 0.0);
        let n = self.bucket_count();
        if rf > self.upper_edge(n) {
            return Bucket::Overflow;
        }
        let mut i = ((rf * self.p_r as f64 - 0.5).ceil().max(1.0) as usize).min(n);
        // The float estimate can miss an edge by one ulp; settle it against
        // the canonical edge values.
        while i < n && rf > self.upper_edge(i) {
            i += 1;
        }
        while i > 1 && rf <= self.upper_edge(i - 1) {
            i -= 1;
        }
        Bucket::Interior(i)
    }
}
