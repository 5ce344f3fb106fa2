//! Joint real stock/bond return law and the induced law of an α-blended
//! portfolio's gross, expense-adjusted return.
//!
//! Nominal returns and inflation never appear: the model is parameterised
//! directly on real (inflation-adjusted) returns.

use crate::error::{Error, Result};
use crate::normal::NormalParams;

/// Real annual stock/bond return moments plus a per-period expense ratio.
///
/// Stored as variances and covariance, matching the control-file layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnModel {
    pub stock_mean: f64,
    pub stock_var: f64,
    pub bond_mean: f64,
    pub bond_var: f64,
    pub stock_bond_cov: f64,
    pub expense_ratio: f64,
}

impl ReturnModel {
    pub fn new(
        stock_mean: f64,
        stock_var: f64,
        bond_mean: f64,
        bond_var: f64,
        stock_bond_cov: f64,
        expense_ratio: f64,
    ) -> Result<Self> {
        let m = Self {
            stock_mean,
            stock_var,
            bond_mean,
            bond_var,
            stock_bond_cov,
            expense_ratio,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds the model from standard deviations and a correlation.
    pub fn from_std_corr(
        stock_mean: f64,
        stock_std: f64,
        bond_mean: f64,
        bond_std: f64,
        rho: f64,
        expense_ratio: f64,
    ) -> Result<Self> {
        if stock_std < 0.0 || bond_std < 0.0 || !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "need std >= 0 and |rho| <= 1 (got {stock_std}, {bond_std}, {rho})"
            )));
        }
        Self::new(
            stock_mean,
            stock_std * stock_std,
            bond_mean,
            bond_std * bond_std,
            rho * stock_std * bond_std,
            expense_ratio,
        )
    }

    /// S&P 500 / 10-year Treasury real returns, 1928-2013, in the
    /// variance/covariance form used by control files.
    pub fn historical(expense_ratio: f64) -> Self {
        Self::new(
            0.082509,
            0.0402696529,
            0.021409,
            0.0069605649,
            0.0007344180,
            expense_ratio,
        )
        .expect("historical parameters are valid")
    }

    /// The same history quoted as rounded (mean, std) pairs and correlation.
    pub fn historical_rounded(expense_ratio: f64) -> Self {
        Self::from_std_corr(0.0825, 0.2007, 0.0214, 0.0834, 0.04387, expense_ratio)
            .expect("rounded historical parameters are valid")
    }

    pub fn with_expense_ratio(mut self, expense_ratio: f64) -> Result<Self> {
        self.expense_ratio = expense_ratio;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.stock_mean,
            self.stock_var,
            self.bond_mean,
            self.bond_var,
            self.stock_bond_cov,
            self.expense_ratio,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "return model has non-finite fields".into(),
            ));
        }
        if self.stock_var < 0.0 || self.bond_var < 0.0 {
            return Err(Error::InvalidParameter("variances must be >= 0".into()));
        }
        // Small slack so that |rho| = 1 built from stds survives rounding.
        let bound = (self.stock_var * self.bond_var).sqrt();
        if self.stock_bond_cov.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "|cov| = {} exceeds sqrt(var_s * var_b) = {bound}",
                self.stock_bond_cov.abs()
            )));
        }
        if !(0.0..1.0).contains(&self.expense_ratio) {
            return Err(Error::InvalidParameter(format!(
                "expense ratio must lie in [0, 1), got {}",
                self.expense_ratio
            )));
        }
        Ok(())
    }

    pub fn stock_std(&self) -> f64 {
        self.stock_var.sqrt()
    }

    pub fn bond_std(&self) -> f64 {
        self.bond_var.sqrt()
    }

    /// Correlation implied by the stored covariance (0 when either leg is riskless).
    pub fn correlation(&self) -> f64 {
        let denom = (self.stock_var * self.bond_var).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (self.stock_bond_cov / denom).clamp(-1.0, 1.0)
        }
    }

    /// Law of the gross multiplier `(1 - E_R) * (alpha * (1 + r_s) + (1 - alpha) * (1 + r_b))`.
    pub fn portfolio_dist(&self, alpha: f64) -> Result<NormalParams> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "allocation must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(self.portfolio_dist_unchecked(alpha))
    }

    #[inline]
    pub(crate) fn portfolio_dist_unchecked(&self, alpha: f64) -> NormalParams {
        let keep = 1.0 - self.expense_ratio;
        let mean = keep * (1.0 + alpha * self.stock_mean + (1.0 - alpha) * self.bond_mean);
        let var = alpha.powi(2) * self.stock_var
            + (1.0 - alpha).powi(2) * self.bond_var
            + 2.0 * alpha * (1.0 - alpha) * self.stock_bond_cov;
        NormalParams {
            mean,
            std: keep * var.max(0.0).sqrt(),
        }
    }

    /// Allocation minimising portfolio variance, clamped to [0, 1].
    pub fn min_variance_alpha(&self) -> f64 {
        let denom = self.stock_var + self.bond_var - 2.0 * self.stock_bond_cov;
        if denom <= 0.0 {
            return 0.0;
        }
        ((self.bond_var - self.stock_bond_cov) / denom).clamp(0.0, 1.0)
    }
}
