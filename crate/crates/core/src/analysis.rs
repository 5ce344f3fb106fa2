//! Serial-dependence diagnostics for a return series: sample autocorrelations,
//! partial autocorrelations from the Yule-Walker equations, and the
//! `2 / sqrt(n)` white-noise band.

use crate::error::{Error, Result};

fn check(values: &[f64], max_lag: usize) -> Result<()> {
    let n = values.len();
    if n < 2 || max_lag == 0 || max_lag >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= max_lag <= n - 1 (n = {n}, max_lag = {max_lag})"
        )));
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `r(1..=max_lag)`, centred on the full-series mean, each lag divided by the
/// lag-0 sum of squares.
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check(values, max_lag)?;
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|y| y - m).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if c0 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((1..=max_lag)
        .map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

/// Partial autocorrelations `phi(k, k)` for `k = 1..=max_lag`, solving each
/// order's Yule-Walker system by the Durbin-Levinson recursion.
pub fn pacf_yule_walker(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let r = acf(values, max_lag)?;
    pacf_from_acf(&r)
}

/// Same recursion on given autocorrelations `r(1..=p)`.
pub fn pacf_from_acf(r: &[f64]) -> Result<Vec<f64>> {
    durbin_levinson(r).map(|(partials, _)| partials)
}

/// Coefficients of the AR(p) fit, `phi(p, 1..=p)`.
pub fn yule_walker_ar(values: &[f64], p: usize) -> Result<Vec<f64>> {
    durbin_levinson(&acf(values, p)?).map(|(_, phi)| phi)
}

fn durbin_levinson(r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut partials = Vec::with_capacity(r.len());
    let mut phi: Vec<f64> = Vec::with_capacity(r.len());
    let mut err = 1.0;
    for k in 1..=r.len() {
        if err <= 1e-14 {
            return Err(Error::SingularToeplitz { lag: k });
        }
        let kk = (r[k - 1] - (1..k).map(|j| phi[j - 1] * r[k - j - 1]).sum::<f64>()) / err;
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kk * prev[k - j - 1];
        }
        phi.push(kk);
        err *= 1.0 - kk * kk;
        partials.push(kk);
    }
    Ok((partials, phi))
}

/// The 95% band for a white-noise autocorrelation.
pub fn white_noise_threshold(n: usize) -> f64 {
    2.0 / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagRow {
    pub lag: usize,
    pub acf: f64,
    pub pacf: f64,
    pub acf_flag: bool,
    pub pacf_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhitenessReport {
    pub n: usize,
    pub threshold: f64,
    pub rows: Vec<LagRow>,
}

impl WhitenessReport {
    pub fn flagged(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.acf_flag || r.pacf_flag)
            .count()
    }

    pub fn acf_flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.acf_flag).count()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "n = {}, threshold 2/sqrt(n) = {:.5}\n",
            self.n, self.threshold
        );
        out.push_str("lag        acf       pacf  flag\n");
        for r in &self.rows {
            let flag = match (r.acf_flag, r.pacf_flag) {
                (true, true) => "AP",
                (true, false) => "A",
                (false, true) => "P",
                _ => "",
            };
            out.push_str(&format!(
                "{:>3} {:>10.5} {:>10.5}  {}\n",
                r.lag, r.acf, r.pacf, flag
            ));
        }
        out
    }
}

pub fn whiteness_report(values: &[f64], max_lag: usize) -> Result<WhitenessReport> {
    let r = acf(values, max_lag)?;
    let p = pacf_from_acf(&r)?;
    let threshold = white_noise_threshold(values.len());
    let rows = r
        .iter()
        .zip(&p)
        .enumerate()
        .map(|(i, (&a, &pk))| LagRow {
            lag: i + 1,
            acf: a,
            pacf: pk,
            acf_flag: a.abs() > threshold,
            pacf_flag: pk.abs() > threshold,
        })
        .collect();
    Ok(WhitenessReport {
        n: values.len(),
        threshold,
        rows,
    })
}

/// Magnitudes of the roots of `1 - phi_1 B - ... - phi_p B^p` for `p <= 2`.
pub fn ar_root_moduli(phi: &[f64]) -> Result<Vec<f64>> {
    match *phi {
        [p1] => {
            if p1 == 0.0 {
                Ok(vec![f64::INFINITY])
            } else {
                Ok(vec![(1.0 / p1).abs()])
            }
        }
        [p1, p2] => {
            if p2 == 0.0 {
                return ar_root_moduli(&[p1]);
            }
            // p2 B^2 + p1 B - 1 = 0
            let disc = p1 * p1 + 4.0 * p2;
            if disc >= 0.0 {
                let s = disc.sqrt();
                Ok(vec![
                    ((-p1 + s) / (2.0 * p2)).abs(),
                    ((-p1 - s) / (2.0 * p2)).abs(),
                ])
            } else {
                // Complex pair: |B|^2 = c / a = -1 / p2.
                let m = (-1.0 / p2).sqrt();
                Ok(vec![m, m])
            }
        }
        _ => Err(Error::InvalidParameter(
            "root moduli are available for AR(1) and AR(2) only".into(),
        )),
    }
}

/// Whether every root lies outside the unit circle.
pub fn is_stationary(phi: &[f64]) -> Result<bool> {
    Ok(ar_root_moduli(phi)?.iter().all(|&m| m > 1.0))
}
