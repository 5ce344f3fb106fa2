//! Monte Carlo decumulation: an independent check on the solver.
//!
//! Each path draws its horizon from the hazard schedule and then applies the
//! ruin-factor recursion to correlated real stock/bond returns. Path `i`
//! uses its own ChaCha stream of the master seed, so the estimate does not
//! depend on how paths are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hazard::HazardSchedule;
use crate::returns::ReturnModel;
use crate::ruin::{next_ruin_factor, RuinFactor};
use crate::solver::PolicyGrid;

const PATHS_PER_TASK: u64 = 4096;

#[derive(Debug, Clone)]
pub enum Strategy {
    /// `alpha(t, bucket(RF(t)))` from a solved grid; the overflow region uses `alpha = 1`.
    Policy(PolicyGrid),
    Fixed(f64),
    /// One allocation per decision stage.
    GlidePath(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: u64,
    pub master_seed: u64,
    pub strategy: Strategy,
    pub w_r: f64,
    pub horizon: HazardSchedule,
    /// Worker threads; `None` uses rayon's global pool.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_paths: u64,
    pub ruined: u64,
    pub estimate: f64,
    pub std_error: f64,
    /// Ruin counts by time `t = 0..=S_Max` (index 0 is always empty).
    pub ruined_at: Vec<u64>,
}

/// Draws correlated real returns `(r_s, r_b)`.
#[derive(Debug, Clone, Copy)]
struct ReturnSampler {
    smn: f64,
    ssd: f64,
    bmn: f64,
    b_common: f64,
    b_own: f64,
}

impl ReturnSampler {
    fn new(m: &ReturnModel) -> Self {
        let rho = m.correlation();
        let bsd = m.bond_std();
        Self {
            smn: m.stock_mean,
            ssd: m.stock_std(),
            bmn: m.bond_mean,
            b_common: bsd * rho,
            b_own: bsd * (1.0 - rho * rho).max(0.0).sqrt(),
        }
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (
            self.smn + self.ssd * z1,
            self.bmn + self.b_common * z1 + self.b_own * z2,
        )
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        if !(self.w_r > 0.0 && self.w_r < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "withdrawal rate must lie in (0, 1), got {}",
                self.w_r
            )));
        }
        let stages = self.horizon.stages();
        match &self.strategy {
            Strategy::Fixed(a) if !(0.0..=1.0).contains(a) => Err(Error::InvalidParameter(
                format!("allocation must lie in [0, 1], got {a}"),
            )),
            Strategy::GlidePath(g) if g.len() != stages => Err(Error::InvalidParameter(format!(
                "glide path has {} allocations for {stages} decision stages",
                g.len()
            ))),
            Strategy::GlidePath(g) if g.iter().any(|a| !(0.0..=1.0).contains(a)) => Err(
                Error::InvalidParameter("glide-path allocations must lie in [0, 1]".into()),
            ),
            Strategy::Policy(p) if p.stages() < stages => Err(Error::InvalidParameter(format!(
                "policy covers {} stages, horizon needs {stages}",
                p.stages()
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn alpha(&self, t: usize, rf: f64) -> f64 {
        match &self.strategy {
            Strategy::Fixed(a) => *a,
            Strategy::GlidePath(g) => g[t],
            Strategy::Policy(p) => p.lookup(t, rf).map_or(1.0, |(_, a)| a),
        }
    }
}

/// Time of the last withdrawal, by inverting the horizon CDF.
fn draw_horizon<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let last = cdf.len() - 1;
    if cdf[..last].iter().all(|&c| c == 0.0) {
        return last;
    }
    let u: f64 = rng.gen();
    cdf.iter().position(|&c| u < c).unwrap_or(last)
}

/// Follows one path; returns the ruin time if ruin happens before death.
fn run_path(
    cfg: &SimConfig,
    cdf: &[f64],
    sampler: &ReturnSampler,
    keep: f64,
    path: u64,
) -> Option<usize> {
    let mut rng = path_rng(cfg.master_seed, path);
    let t_d = draw_horizon(cdf, &mut rng);
    let mut rf = cfg.w_r;
    for t in 1..=t_d {
        let a = cfg.alpha(t - 1, rf);
        let (rs, rb) = sampler.draw(&mut rng);
        let r_hat = keep * (1.0 + a * rs + (1.0 - a) * rb);
        match next_ruin_factor(rf, r_hat) {
            RuinFactor::Solvent(next) => rf = next,
            RuinFactor::Ruined => return Some(t),
        }
    }
    None
}

pub fn simulate(cfg: &SimConfig, model: &ReturnModel) -> Result<SimResult> {
    cfg.validate()?;
    let cdf = cfg.horizon.cdf();
    let sampler = ReturnSampler::new(model);
    let keep = 1.0 - model.expense_ratio;
    let n = cfg.n_paths;
    let tasks = n.div_ceil(PATHS_PER_TASK);
    let histogram = in_pool(cfg.workers, || {
        (0..tasks)
            .into_par_iter()
            .map(|task| {
                let mut hist = vec![0u64; cdf.len()];
                let lo = task * PATHS_PER_TASK;
                let hi = (lo + PATHS_PER_TASK).min(n);
                for path in lo..hi {
                    if let Some(t) = run_path(cfg, &cdf, &sampler, keep, path) {
                        hist[t] += 1;
                    }
                }
                hist
            })
            .reduce(
                || vec![0u64; cdf.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    })?;
    let ruined: u64 = histogram.iter().sum();
    let p = ruined as f64 / n as f64;
    Ok(SimResult {
        n_paths: n,
        ruined,
        estimate: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        ruined_at: histogram,
    })
}

/// Average per-history geometric mean of simulated real returns.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMeans {
    pub stock_gm: f64,
    pub bond_gm: f64,
    /// Histories dropped per asset: those with a non-positive gross return
    /// plus the same number from the top of the distribution.
    pub stock_discarded: usize,
    pub bond_discarded: usize,
}

fn trimmed_mean(mut gms: Vec<f64>, invalid: usize) -> (f64, usize) {
    gms.sort_by(f64::total_cmp);
    let keep = gms.len().saturating_sub(invalid);
    let kept = &gms[..keep];
    let mean = kept.iter().sum::<f64>() / kept.len().max(1) as f64;
    (mean, 2 * invalid)
}

pub fn geometric_mean_check(
    model: &ReturnModel,
    years: usize,
    n_reps: usize,
    seed: u64,
) -> Result<GeometricMeans> {
    if years < 2 || n_reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least 2 years and 1 repetition".into(),
        ));
    }
    let sampler = ReturnSampler::new(model);
    let reps: Vec<(Option<f64>, Option<f64>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = path_rng(seed, rep);
            let (mut ls, mut lb) = (0.0, 0.0);
            let (mut ok_s, mut ok_b) = (true, true);
            for _ in 0..years {
                let (rs, rb) = sampler.draw(&mut rng);
                ok_s &= rs > -1.0;
                ok_b &= rb > -1.0;
                ls += rs.ln_1p();
                lb += rb.ln_1p();
            }
            let gm = |l: f64, ok: bool| ok.then(|| (l / years as f64).exp_m1());
            (gm(ls, ok_s), gm(lb, ok_b))
        })
        .collect();
    let split = |pick: fn(&(Option<f64>, Option<f64>)) -> Option<f64>| {
        let valid: Vec<f64> = reps.iter().filter_map(pick).collect();
        let invalid = reps.len() - valid.len();
        trimmed_mean(valid, invalid)
    };
    let (stock_gm, stock_discarded) = split(|r| r.0);
    let (bond_gm, bond_discarded) = split(|r| r.1);
    Ok(GeometricMeans {
        stock_gm,
        bond_gm,
        stock_discarded,
        bond_discarded,
    })
}
