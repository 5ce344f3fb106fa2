//! Backward induction over the (stage x ruin-factor bucket) grid.
//!
//! Stage `t` holds, per bucket, the minimum probability of ruin at some time
//! after `t` and the allocation achieving it:
//!
//! ```text
//! V(t, rf) = min_a (1 - h(t)) * [1 - (1 - F_a(rf)) * (1 - E_a[V(t+1, RF(t+1)) | no ruin])]
//! ```
//!
//! where the conditional expectation runs over the buckets that `RF(t+1)`
//! can land in, plus the overflow region above `RF_Max`.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hazard::HazardSchedule;
use crate::normal::NormalParams;
use crate::returns::ReturnModel;
use crate::ruin::Discretization;

/// Buckets per work unit. Fixed so results never depend on the worker count.
pub const BLOCK: usize = 64;

const PRUNE_SLACK: f64 = 1e-16 + 1e-17;
const MAX_ABOVE_CEILING: f64 = 2e-16;
const MAX_DECREASE: f64 = 1e-15;

/// Values of one stage, buckets `1..=len` stored at `values[i - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageVector {
    pub t: usize,
    pub values: Vec<f64>,
    /// Value for ruin factors beyond `RF_Max`.
    pub overflow: f64,
}

impl StageVector {
    /// The all-zero stage at `S_Max`.
    pub fn boundary(t: usize, buckets: usize) -> Self {
        Self {
            t,
            values: vec![0.0; buckets],
            overflow: 0.0,
        }
    }

    pub fn v(&self, bucket: usize) -> f64 {
        self.values[bucket - 1]
    }
}

/// A stage reduced to the buckets that end a run of equal values.
///
/// Ruin factors between two consecutive run ends share one value, so the
/// expectation needs the return CDF only at those run edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedStage {
    /// Run-end bucket numbers, ascending, always starting at 1 and ending at the last bucket.
    pub endpoints: Vec<usize>,
    /// Stage value at each run end.
    pub values: Vec<f64>,
    /// `1 + P_R / (E + 1/2)`: the return at which `RF(t+1)` crosses the top edge of run end `E`, per unit of `rf`.
    pub edge_factor: Vec<f64>,
    pub overflow: f64,
}

/// Merges runs of equal values.
///
/// `ceiling` is the largest value the stage may hold, `1 - h(t)`. Scanning
/// for new runs stops at the first bucket whose successor has reached it.
pub fn compress_stage(next: &StageVector, ceiling: f64, p_r: u32) -> Result<CompressedStage> {
    let v = &next.values;
    let n = v.len();
    if n == 0 {
        return Err(Error::InvalidParameter("stage has no buckets".into()));
    }
    let mut prev = 0.0;
    for b in 1..=n {
        let x = v[b - 1];
        if !(x >= 0.0) || x > ceiling + MAX_ABOVE_CEILING || x < prev - MAX_DECREASE {
            return Err(Error::InvalidStage {
                t: next.t,
                bucket: b,
                value: x,
                previous: prev,
                ceiling,
            });
        }
        prev = x;
    }

    let mut endpoints = vec![1];
    for b in 2..n {
        if v[b - 1] != v[b] {
            endpoints.push(b);
            if v[b] >= ceiling {
                break;
            }
        }
    }
    if n > 1 {
        endpoints.push(n);
    }
    let values = endpoints.iter().map(|&e| v[e - 1]).collect();
    let edge_factor = endpoints
        .iter()
        .map(|&e| 1.0 + p_r as f64 / (e as f64 + 0.5))
        .collect();
    Ok(CompressedStage {
        endpoints,
        values,
        edge_factor,
        overflow: next.overflow,
    })
}

impl CompressedStage {
    /// `E[V(t+1, RF(t+1)) | r > rf]` for a return law with `F(rf) = cdf < 1`.
    #[inline]
    pub fn expectation(&self, dist: &NormalParams, rf: f64, cdf: f64) -> f64 {
        let g = &self.edge_factor;
        // Leading edges where the CDF is exactly 1 add exact zeros; skip them.
        let start = g.partition_point(|&gk| dist.cdf(rf * gk) == 1.0);
        let mut rhs = 1.0;
        let mut e = 0.0;
        for k in start..g.len() {
            let lhs = dist.cdf(rf * g[k]);
            e += (rhs - lhs) * self.values[k];
            rhs = lhs;
        }
        e += (rhs - cdf) * self.overflow;
        e / (1.0 - cdf)
    }

    /// The same expectation with every edge summed and no skipping.
    pub fn expectation_full(&self, dist: &NormalParams, rf: f64, cdf: f64) -> f64 {
        let mut rhs = 1.0;
        let mut e = 0.0;
        for (gk, vk) in self.edge_factor.iter().zip(&self.values) {
            let lhs = dist.cdf(rf * gk);
            e += (rhs - lhs) * vk;
            rhs = lhs;
        }
        e += (rhs - cdf) * self.overflow;
        e / (1.0 - cdf)
    }
}

/// PMF of the bucket reached by `RF(t+1)` given no ruin: entries for buckets
/// `1..=bucket_count` followed by the overflow region.
pub fn transition_pmf(rf: f64, dist: &NormalParams, d: &Discretization) -> Result<Vec<f64>> {
    let cdf = dist.cdf(rf);
    if cdf >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "ruin is certain at rf = {rf}; the transition law is undefined"
        )));
    }
    let n = d.bucket_count();
    let p_r = d.p_r as f64;
    let mut pmf = Vec::with_capacity(n + 1);
    let mut rhs = 1.0;
    for i in 1..=n {
        let lhs = dist.cdf(rf * (1.0 + p_r / (i as f64 + 0.5)));
        pmf.push((rhs - lhs) / (1.0 - cdf));
        rhs = lhs;
    }
    pmf.push((rhs - cdf) / (1.0 - cdf));
    Ok(pmf)
}

/// `(1 - h) * [1 - (1 - F(rf)) * (1 - E)]` for one allocation.
///
/// When ruin next period is certain the expectation is taken to be the
/// overflow value, which leaves the result at `1 - h`.
pub fn stage_value(rf: f64, dist: &NormalParams, next: &CompressedStage, h: f64) -> f64 {
    let (cdf, e) = cdf_and_expectation(rf, dist, next);
    (1.0 - h) * (cdf + e - cdf * e)
}

#[inline]
fn cdf_and_expectation(rf: f64, dist: &NormalParams, next: &CompressedStage) -> (f64, f64) {
    let cdf = dist.cdf(rf);
    let e = if cdf == 1.0 {
        next.overflow
    } else {
        next.expectation(dist, rf, cdf)
    };
    (cdf, e)
}

/// Ascending candidate allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid {
    alphas: Vec<f64>,
}

impl AlphaGrid {
    pub fn uniform(p_alpha: u32) -> Self {
        Self {
            alphas: (0..=p_alpha).map(|a| a as f64 / p_alpha as f64).collect(),
        }
    }

    pub fn single(alpha: f64) -> Result<Self> {
        Self::new(vec![alpha])
    }

    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter("allocation grid is empty".into()));
        }
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a))
            || alphas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "allocations must be strictly ascending within [0, 1]".into(),
            ));
        }
        Ok(Self { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// How the allocation grid is searched in each bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaSearch {
    /// Every grid point, in ascending order.
    #[default]
    Exhaustive,
    /// A coarse pass over every `stride`-th point, then successively finer
    /// passes around the best point so far. Exact whenever the value is
    /// unimodal in the allocation; much cheaper on fine grids.
    Bracketed,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub search: AlphaSearch,
    /// Worker threads; `None` uses rayon's global pool.
    pub workers: Option<usize>,
    /// Candidate allocations; defaults to the discretization's uniform grid.
    pub alphas: Option<AlphaGrid>,
}

/// The solved policy, stages `0..S_Max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub p_r: u32,
    pub v: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
}

impl PolicyGrid {
    pub fn stages(&self) -> usize {
        self.v.len()
    }

    pub fn bucket_count(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    pub fn value(&self, t: usize, bucket: usize) -> f64 {
        self.v[t][bucket - 1]
    }

    pub fn alloc(&self, t: usize, bucket: usize) -> f64 {
        self.alpha[t][bucket - 1]
    }

    /// Value and allocation at the bucket containing `rf`, `None` for the overflow region.
    /// Every value replaced by what its 50-decimal text form parses back to.
    pub fn quantized(&self) -> Self {
        let q = |x: &f64| {
            crate::textfmt::fixed50(*x)
                .parse::<f64>()
                .expect("fixed-point text")
        };
        Self {
            p_r: self.p_r,
            v: self
                .v
                .iter()
                .map(|row| row.iter().map(q).collect())
                .collect(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn lookup(&self, t: usize, rf: f64) -> Option<(f64, f64)> {
        let n = self.bucket_count();
        let d = Discretization {
            p_r: self.p_r,
            p_alpha: 1,
            rf_max: n as f64 / self.p_r as f64,
            prune_power: f64::INFINITY,
        };
        match d.bucket_index(rf) {
            crate::ruin::Bucket::Interior(i) => Some((self.value(t, i), self.alloc(t, i))),
            crate::ruin::Bucket::Overflow => None,
        }
    }
}

/// Per-stage search state shared by every bucket.
struct StageCtx<'a> {
    p_r: u32,
    h: f64,
    tie_threshold: f64,
    dists: &'a [NormalParams],
    alphas: &'a [f64],
    next: &'a CompressedStage,
    search: AlphaSearch,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    v: f64,
    a: usize,
}

impl StageCtx<'_> {
    #[inline]
    fn value_low(&self, cdf: f64, e: f64) -> f64 {
        (1.0 - self.h) * (cdf + e - cdf * e)
    }

    #[inline]
    fn value_high(&self, cdf: f64, e: f64) -> f64 {
        1.0 - (self.h + (1.0 - cdf) * (1.0 - e) - self.h * (1.0 - cdf) * (1.0 - e))
    }

    fn solve_bucket(&self, b: usize, pruned: bool) -> Cell {
        let rf = b as f64 / self.p_r as f64;
        if pruned {
            let a = self.alphas.len() - 1;
            let (cdf, e) = cdf_and_expectation(rf, &self.dists[a], self.next);
            let mut v = self.value_low(cdf, e);
            if v > self.tie_threshold {
                v = self.value_high(cdf, e);
            }
            return Cell { v, a };
        }
        match self.search {
            AlphaSearch::Exhaustive => self.exhaustive(rf),
            AlphaSearch::Bracketed => self.bracketed(rf),
        }
    }

    fn exhaustive(&self, rf: f64) -> Cell {
        let mut ties = false;
        let mut best = Cell { v: 99.0, a: 0 };
        for (a, dist) in self.dists.iter().enumerate() {
            if a > 0 && best.v <= 0.0 {
                break;
            }
            let (cdf, e) = cdf_and_expectation(rf, dist, self.next);
            let mut v = 0.0;
            if !ties {
                v = self.value_low(cdf, e);
                if v > self.tie_threshold {
                    ties = true;
                }
            }
            if ties {
                v = self.value_high(cdf, e);
            }
            if a == 0 || (!ties && v < best.v) || (ties && v <= best.v) {
                best = Cell { v, a };
            }
        }
        best
    }

    fn bracketed(&self, rf: f64) -> Cell {
        let n = self.dists.len();
        let mut seen: Vec<Option<(f64, bool)>> = vec![None; n];
        let mut eval = |a: usize| -> (f64, bool) {
            *seen[a].get_or_insert_with(|| {
                let (cdf, e) = cdf_and_expectation(rf, &self.dists[a], self.next);
                let v = self.value_low(cdf, e);
                if v > self.tie_threshold {
                    (self.value_high(cdf, e), true)
                } else {
                    (v, false)
                }
            })
        };
        // Near zero the smaller allocation wins a tie, near the ceiling the larger one.
        let better = |x: (f64, bool, usize), y: (f64, bool, usize)| {
            x.0 < y.0 || (x.0 == y.0 && if x.1 { x.2 > y.2 } else { x.2 < y.2 })
        };
        let mut stride = n.div_ceil(16).max(1);
        let (mut lo, mut hi) = (0, n - 1);
        let mut best: Option<(f64, bool, usize)> = None;
        loop {
            let mut a = lo;
            loop {
                let (v, high) = eval(a);
                let cand = (v, high, a);
                if best.is_none_or(|b| better(cand, b)) {
                    best = Some(cand);
                }
                if a == hi {
                    break;
                }
                a = (a + stride).min(hi);
            }
            if stride == 1 {
                break;
            }
            let centre = best.unwrap().2;
            lo = centre.saturating_sub(stride);
            hi = (centre + stride).min(n - 1);
            stride = (stride / 4).max(1);
        }
        let (v, _, a) = best.unwrap();
        Cell { v, a }
    }
}

fn prune_level(prune_power: f64, survival: f64) -> Option<f64> {
    if prune_power.is_infinite() {
        return None;
    }
    let scale = 10f64.powf(prune_power);
    Some((scale * survival).floor() / scale)
}

/// Solves every stage with the default options.
pub fn solve(model: &ReturnModel, h: &HazardSchedule, d: &Discretization) -> Result<PolicyGrid> {
    solve_with(model, h, d, &SolveOptions::default())
}

pub fn solve_with(
    model: &ReturnModel,
    h: &HazardSchedule,
    d: &Discretization,
    opts: &SolveOptions,
) -> Result<PolicyGrid> {
    in_pool(opts.workers, || run(model, h, d, opts))?
}

/// One backward step: solves stage `t` from the already solved stage `t + 1`.
///
/// Returns the stage's values (with its overflow value `1 - h(t)`) and the
/// chosen allocation for each bucket.
pub fn solve_stage(
    t: usize,
    next: &StageVector,
    model: &ReturnModel,
    h: &HazardSchedule,
    d: &Discretization,
    opts: &SolveOptions,
) -> Result<(StageVector, Vec<f64>)> {
    if t >= h.s_max() || next.t != t + 1 || next.values.len() != d.bucket_count() {
        return Err(Error::InvalidParameter(format!(
            "stage {t} needs a solved stage {} of {} buckets",
            t + 1,
            d.bucket_count()
        )));
    }
    let grid = alpha_grid(d, opts);
    let dists = distributions(model, &grid);
    in_pool(opts.workers, || {
        step(t, next, h, d, &grid, &dists, opts.search)
    })?
}

fn alpha_grid(d: &Discretization, opts: &SolveOptions) -> AlphaGrid {
    opts.alphas
        .clone()
        .unwrap_or_else(|| AlphaGrid::uniform(d.p_alpha))
}

fn distributions(model: &ReturnModel, grid: &AlphaGrid) -> Vec<NormalParams> {
    grid.alphas()
        .iter()
        .map(|&a| model.portfolio_dist_unchecked(a))
        .collect()
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

fn step(
    t: usize,
    next: &StageVector,
    h: &HazardSchedule,
    d: &Discretization,
    grid: &AlphaGrid,
    dists: &[NormalParams],
    search: AlphaSearch,
) -> Result<(StageVector, Vec<f64>)> {
    let started = Instant::now();
    let n = d.bucket_count();
    let workers = rayon::current_num_threads().max(1);
    let ceiling_next = if t + 1 == h.s_max() {
        0.0
    } else {
        h.survival(t + 1)
    };
    let compressed = compress_stage(next, ceiling_next, d.p_r)?;
    let survival = h.survival(t);
    let ctx = StageCtx {
        p_r: d.p_r,
        h: h.h(t),
        tie_threshold: 0.5 * survival,
        dists,
        alphas: grid.alphas(),
        next: &compressed,
        search,
    };
    let prune_at = prune_level(d.prune_power, survival);
    let (cells, pruned_from) = solve_stage_cells(&ctx, n, prune_at, workers);
    log::info!(
        "stage {t}: {} run ends in stage {}, pruned from bucket {}, {:.2?}",
        compressed.endpoints.len(),
        t + 1,
        pruned_from.map_or("-".to_string(), |b| b.to_string()),
        started.elapsed()
    );
    Ok((
        StageVector {
            t,
            values: cells.iter().map(|c| c.v).collect(),
            overflow: survival,
        },
        cells.iter().map(|c| grid.alphas()[c.a]).collect(),
    ))
}

fn run(
    model: &ReturnModel,
    h: &HazardSchedule,
    d: &Discretization,
    opts: &SolveOptions,
) -> Result<PolicyGrid> {
    let grid = alpha_grid(d, opts);
    let dists = distributions(model, &grid);
    let s_max = h.s_max();
    let mut v = vec![Vec::new(); s_max];
    let mut alpha = vec![Vec::new(); s_max];
    let mut next = StageVector::boundary(s_max, d.bucket_count());
    for t in (0..s_max).rev() {
        let (stage, a) = step(t, &next, h, d, &grid, &dists, opts.search)?;
        v[t] = stage.values.clone();
        alpha[t] = a;
        next = stage;
    }
    Ok(PolicyGrid {
        p_r: d.p_r,
        v,
        alpha,
    })
}

/// Solves one stage's buckets in waves of `BLOCK`-sized units.
///
/// Buckets are searched in full until the first one whose value reaches the
/// prune level; every later bucket only tries the last grid allocation. The
/// waves let that switch happen in bucket order whatever the worker count.
fn solve_stage_cells(
    ctx: &StageCtx<'_>,
    n: usize,
    prune_at: Option<f64>,
    workers: usize,
) -> (Vec<Cell>, Option<usize>) {
    let mut cells: Vec<Cell> = Vec::with_capacity(n);
    let mut pruned_from = None;
    let wave = BLOCK * workers;
    let mut start = 1;
    while start <= n {
        let end = (start + wave - 1).min(n);
        let pruned = pruned_from.is_some();
        let buckets: Vec<usize> = (start..=end).collect();
        let solved: Vec<Cell> = buckets
            .par_chunks(BLOCK)
            .flat_map_iter(|chunk| {
                chunk
                    .iter()
                    .map(|&b| ctx.solve_bucket(b, pruned))
                    .collect::<Vec<_>>()
            })
            .collect();
        if pruned {
            cells.extend(solved);
        } else {
            let hit =
                prune_at.and_then(|level| solved.iter().position(|c| c.v >= level - PRUNE_SLACK));
            match hit {
                Some(k) => {
                    cells.extend_from_slice(&solved[..=k]);
                    let first = start + k;
                    pruned_from = Some(first + 1);
                    let rest: Vec<Cell> = ((first + 1)..=end)
                        .collect::<Vec<_>>()
                        .par_chunks(BLOCK)
                        .flat_map_iter(|chunk| {
                            chunk
                                .iter()
                                .map(|&b| ctx.solve_bucket(b, true))
                                .collect::<Vec<_>>()
                        })
                        .collect();
                    cells.extend(rest);
                }
                None => cells.extend(solved),
            }
        }
        start = end + 1;
    }
    (cells, pruned_from)
}
