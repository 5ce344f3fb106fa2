#![allow(dead_code)]

use minruin::normal::NormalParams;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Probability mass of `dist` on `[a, b]` by composite quadrature of the density.
pub struct Quadrature {
    rule: Vec<(f64, f64)>,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            rule: gauss_legendre(20),
        }
    }
}

impl Quadrature {
    pub fn mass(&self, dist: &NormalParams, a: f64, b: f64) -> f64 {
        let (m, s) = (dist.mean, dist.std);
        let lo = a.max(m - 40.0 * s);
        let hi = b.min(m + 40.0 * s);
        if hi <= lo {
            return 0.0;
        }
        let panels = (((hi - lo) / (0.25 * s)).ceil() as usize).max(1);
        let w = (hi - lo) / panels as f64;
        let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        let mut total = 0.0;
        for k in 0..panels {
            let c = lo + (k as f64 + 0.5) * w;
            let mut part = 0.0;
            for &(x, wt) in &self.rule {
                let z = (c + 0.5 * w * x - m) / s;
                part += wt * (-0.5 * z * z).exp();
            }
            total += part * 0.5 * w * norm;
        }
        total
    }

    /// Unconditional masses of next period's outcomes from ruin factor `rf`:
    /// `(ruin, interior buckets 1..=n, overflow)`.
    pub fn outcomes(
        &self,
        rf: f64,
        dist: &NormalParams,
        p_r: u32,
        n: usize,
    ) -> (f64, Vec<f64>, f64) {
        let p_r = p_r as f64;
        let edge = |i: usize| rf * (1.0 + p_r / (i as f64 + 0.5));
        let ruin = self.mass(dist, f64::NEG_INFINITY, rf);
        let mut interior = Vec::with_capacity(n);
        for i in 1..=n {
            let upper = if i == 1 { f64::INFINITY } else { edge(i - 1) };
            interior.push(self.mass(dist, edge(i), upper));
        }
        let overflow = self.mass(dist, rf, edge(n));
        (ruin, interior, overflow)
    }
}
