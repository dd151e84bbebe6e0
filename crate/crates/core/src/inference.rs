//! Glauber dynamics and moment-matching fits for Markov random graphs.
//!
//! Statistics vectors are ordered `(t(S_1), .., t(S_K), t(tri))` and are the
//! truncated values that enter the exponent.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{spanning_stats, EdgeSubset, Graph};
use crate::model::{
    active_stars, energy_exponent, markov_distribution_with_cap, HomCounts, MarkovParams, MaskCounter, StarBound,
    DEFAULT_ENUMERATION_CAP,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SuffStats {
    pub values: Vec<f64>,
}

impl SuffStats {
    pub fn star(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn triangle(&self) -> f64 {
        *self.values.last().expect("nonempty statistics")
    }
}

/// Statistics of `s` as a subgraph of `g`, truncated per `bound`.
pub fn subgraph_suffstats(g: &Graph, s: &EdgeSubset, max_star: usize, bound: StarBound) -> Result<SuffStats> {
    let stats = spanning_stats(g, s)?;
    Ok(SuffStats { values: HomCounts::from_stats(&stats, max_star)?.stat_vector(g.n(), bound) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainConfig {
    pub sweeps: u64,
    pub burnin: u64,
    pub thin: u64,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(sweeps: u64, burnin: u64, thin: u64, seed: u64) -> Result<Self> {
        let c = ChainConfig { sweeps, burnin, thin, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidParameter { field: "sweeps", reason: "must be positive".into() });
        }
        if self.thin == 0 || self.thin > self.sweeps {
            return Err(Error::InvalidParameter { field: "thin", reason: "must be in 1..=sweeps".into() });
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One heat-bath update recomputing both energies from scratch. Reference
/// implementation for [`GlauberChain::step`], which draws from `rng` in the
/// same way.
pub fn glauber_step<R: Rng + ?Sized>(state: &EdgeSubset, g: &Graph, p: &MarkovParams, rng: &mut R) -> Result<EdgeSubset> {
    let m = g.m();
    if m == 0 {
        return Ok(state.clone());
    }
    let e = rng.gen_range(0..m);
    let mut on = state.clone();
    on.insert(e);
    let mut off = state.clone();
    off.remove(e);
    let logit = energy_exponent(g, &on, p)? - energy_exponent(g, &off, p)?;
    let u: f64 = rng.gen();
    Ok(if u < logistic(logit) { on } else { off })
}

/// Glauber chain with incrementally maintained degree, k-star and triangle
/// counts, so an update costs `O(K + n / 64)`.
#[derive(Debug, Clone)]
pub struct GlauberChain<'a> {
    host: &'a Graph,
    /// `(beta_1 .. beta_K, beta) / T`.
    coeffs: Vec<f64>,
    bound: StarBound,
    max_star: usize,
    state: EdgeSubset,
    words: usize,
    rows: Vec<u64>,
    deg: Vec<u32>,
    hist: Vec<u32>,
    max_degree: u32,
    stars: Vec<u128>,
    triangles: u64,
    /// `pow[d * K + k - 1] = d^k`.
    pow: Vec<u128>,
    /// `1 / n^(k+1)`.
    inv_star: Vec<f64>,
    inv_tri: f64,
}

impl<'a> GlauberChain<'a> {
    pub fn new(host: &'a Graph, p: &MarkovParams, init: EdgeSubset) -> Result<Self> {
        p.validate()?;
        if init.slots() != host.m() {
            return Err(Error::SubsetMismatch { subset: init.slots(), host: host.m() });
        }
        let n = host.n();
        let k = p.max_star();
        let top = host.max_degree() as usize;
        let mut pow = vec![0u128; (top + 1) * k];
        for d in 0..=top {
            let mut acc = 1u128;
            for j in 0..k {
                acc = acc.checked_mul(d as u128).ok_or(Error::Overflow("k-star homomorphism count"))?;
                pow[d * k + j] = acc;
            }
        }
        if k > 0 {
            pow[top * k + k - 1].checked_mul(n as u128).ok_or(Error::Overflow("k-star homomorphism count"))?;
        }
        let nf = n as f64;
        let inv_star = (1..=k as i32).map(|j| nf.powi(j + 1).recip()).collect();
        let words = n.div_ceil(64).max(1);
        let mut chain = GlauberChain {
            host,
            coeffs: p.coefficients().iter().map(|c| c / p.temperature).collect(),
            bound: p.star_bound,
            max_star: k,
            state: EdgeSubset::empty(host.m()),
            words,
            rows: vec![0; n * words],
            deg: vec![0; n],
            hist: {
                let mut h = vec![0; top + 1];
                h[0] = n as u32;
                h
            },
            max_degree: 0,
            stars: vec![0; k],
            triangles: 0,
            pow,
            inv_star,
            inv_tri: 6.0 / (nf * nf * nf),
        };
        for e in init.iter() {
            chain.set_edge(e, true);
        }
        Ok(chain)
    }

    pub fn state(&self) -> &EdgeSubset {
        &self.state
    }

    pub fn is_empty_graph(&self) -> bool {
        self.state.is_empty()
    }

    pub fn is_full_graph(&self) -> bool {
        self.state.len() == self.host.m()
    }

    fn pw(&self, d: u32, j: usize) -> u128 {
        if d == 0 {
            0
        } else {
            self.pow[d as usize * self.max_star + j]
        }
    }

    fn common(&self, u: usize, v: usize) -> u64 {
        let (ru, rv) = (&self.rows[u * self.words..][..self.words], &self.rows[v * self.words..][..self.words]);
        ru.iter().zip(rv).map(|(a, b)| (a & b).count_ones() as u64).sum()
    }

    pub fn stats(&self) -> SuffStats {
        let active = active_stars(self.max_degree, self.max_star, self.bound);
        let mut values: Vec<f64> = self
            .stars
            .iter()
            .zip(&self.inv_star)
            .enumerate()
            .map(|(j, (&s, inv))| if j < active { s as f64 * inv } else { 0.0 })
            .collect();
        values.push(self.triangles as f64 * self.inv_tri);
        SuffStats { values }
    }

    /// `E(S + e) - E(S - e)` for the current state `S`.
    pub fn log_odds(&self, e: usize) -> f64 {
        let (u, v) = self.host.edges()[e];
        let present = self.state.contains(e);
        let (du, dv) = if present { (self.deg[u] - 1, self.deg[v] - 1) } else { (self.deg[u], self.deg[v]) };
        // Degrees and triangles without e.
        let tri_off = self.triangles - if present { self.common(u, v) } else { 0 };
        let tri_on = tri_off + self.common(u, v);
        let max_on = self.max_degree.max(du + 1).max(dv + 1);
        let max_off = if !present {
            self.max_degree
        } else {
            let at_top = (self.deg[u] == self.max_degree) as u32 + (self.deg[v] == self.max_degree) as u32;
            if self.hist[self.max_degree as usize] > at_top {
                self.max_degree
            } else {
                self.max_degree - 1
            }
        };
        let act_on = active_stars(max_on, self.max_star, self.bound);
        let act_off = active_stars(max_off, self.max_star, self.bound);
        let mut diff = 0.0;
        for j in 0..self.max_star {
            let inc = self.pw(du + 1, j) - self.pw(du, j) + self.pw(dv + 1, j) - self.pw(dv, j);
            let off = if present { self.stars[j] - inc } else { self.stars[j] };
            let on = off + inc;
            let t_on = if j < act_on { on as f64 * self.inv_star[j] } else { 0.0 };
            let t_off = if j < act_off { off as f64 * self.inv_star[j] } else { 0.0 };
            diff += self.coeffs[j] * (t_on - t_off);
        }
        diff + self.coeffs[self.max_star] * (tri_on - tri_off) as f64 * self.inv_tri
    }

    pub fn set_edge(&mut self, e: usize, present: bool) {
        if self.state.contains(e) == present {
            return;
        }
        let (u, v) = self.host.edges()[e];
        let w = self.words;
        if present {
            self.triangles += self.common(u, v);
        }
        for x in [u, v] {
            let d = self.deg[x];
            let nd = if present { d + 1 } else { d - 1 };
            for j in 0..self.max_star {
                if present {
                    self.stars[j] += self.pw(nd, j) - self.pw(d, j);
                } else {
                    self.stars[j] -= self.pw(d, j) - self.pw(nd, j);
                }
            }
            self.hist[d as usize] -= 1;
            self.hist[nd as usize] += 1;
            self.deg[x] = nd;
        }
        let (bu, bv) = (1u64 << (v % 64), 1u64 << (u % 64));
        if present {
            self.rows[u * w + v / 64] |= bu;
            self.rows[v * w + u / 64] |= bv;
        } else {
            self.rows[u * w + v / 64] &= !bu;
            self.rows[v * w + u / 64] &= !bv;
            self.triangles -= self.common(u, v);
        }
        self.state.set(e, present);
        if present {
            self.max_degree = self.max_degree.max(self.deg[u]).max(self.deg[v]);
        } else {
            while self.max_degree > 0 && self.hist[self.max_degree as usize] == 0 {
                self.max_degree -= 1;
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let m = self.host.m();
        if m == 0 {
            return;
        }
        let e = rng.gen_range(0..m);
        let prob = logistic(self.log_odds(e));
        let u: f64 = rng.gen();
        self.set_edge(e, u < prob);
    }

    /// `m` single-site updates.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for _ in 0..self.host.m() {
            self.step(rng);
        }
    }
}

/// Chain output summary; `stderr` uses `floor(sqrt(N))` batch means and is
/// NaN with fewer than two batches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub mean: SuffStats,
    pub stderr: Vec<f64>,
    pub samples: u64,
    /// Fraction of samples at the empty or the full graph.
    pub boundary_fraction: f64,
    #[serde(skip)]
    pub covariance: Vec<Vec<f64>>,
}

fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_chain(g: &Graph, p: &MarkovParams, cfg: &ChainConfig, stream: u64) -> Result<SampleSummary> {
    cfg.validate()?;
    let mut rng = chain_rng(cfg.seed, stream);
    let mut chain = GlauberChain::new(g, p, EdgeSubset::empty(g.m()))?;
    for _ in 0..cfg.burnin {
        chain.sweep(&mut rng);
    }
    let d = p.max_star() + 1;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity((cfg.sweeps / cfg.thin) as usize);
    let mut boundary = 0u64;
    for s in 1..=cfg.sweeps {
        chain.sweep(&mut rng);
        if s % cfg.thin == 0 {
            rows.push(chain.stats().values);
            boundary += (chain.is_empty_graph() || chain.is_full_graph()) as u64;
        }
    }
    let n = rows.len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in &rows {
        for (a, x) in mean.iter_mut().zip(r) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= nf);
    let mut cov = vec![vec![0.0; d]; d];
    for r in &rows {
        for i in 0..d {
            for j in 0..=i {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    let dof = (nf - 1.0).max(1.0);
    let cov: Vec<Vec<f64>> =
        (0..d).map(|i| (0..d).map(|j| cov[i.max(j)][i.min(j)] / dof).collect()).collect();
    let batches = (nf.sqrt().floor() as usize).max(1);
    let size = n / batches;
    let stderr = (0..d)
        .map(|c| {
            if batches < 2 {
                return f64::NAN;
            }
            let bm: Vec<f64> =
                (0..batches).map(|b| rows[b * size..(b + 1) * size].iter().map(|r| r[c]).sum::<f64>() / size as f64).collect();
            let mu = bm.iter().sum::<f64>() / batches as f64;
            let var = bm.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        })
        .collect();
    Ok(SampleSummary {
        mean: SuffStats { values: mean },
        stderr,
        samples: n as u64,
        boundary_fraction: boundary as f64 / nf,
        covariance: cov,
    })
}

/// Post-burn-in thinned means of the statistics from a chain started at the
/// empty graph. Deterministic given `cfg.seed`.
pub fn sample_suffstats(g: &Graph, p: &MarkovParams, cfg: &ChainConfig) -> Result<SampleSummary> {
    run_chain(g, p, cfg, 0)
}

/// Independent chains on streams `0..chains`, run in parallel and pooled.
pub fn sample_suffstats_chains(g: &Graph, p: &MarkovParams, cfg: &ChainConfig, chains: u64) -> Result<SampleSummary> {
    let chains = chains.max(1);
    let runs = (0..chains).into_par_iter().map(|c| run_chain(g, p, cfg, c)).collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    let d = runs[0].mean.values.len();
    let mean = (0..d).map(|i| runs.iter().map(|r| r.mean.values[i]).sum::<f64>() / k).collect();
    let stderr = (0..d).map(|i| runs.iter().map(|r| r.stderr[i].powi(2)).sum::<f64>().sqrt() / k).collect();
    let covariance = (0..d)
        .map(|i| (0..d).map(|j| runs.iter().map(|r| r.covariance[i][j]).sum::<f64>() / k).collect())
        .collect();
    Ok(SampleSummary {
        mean: SuffStats { values: mean },
        stderr,
        samples: runs.iter().map(|r| r.samples).sum(),
        boundary_fraction: runs.iter().map(|r| r.boundary_fraction).sum::<f64>() / k,
        covariance,
    })
}

/// `sum_S P(S) stats(S)` by enumeration.
pub fn exact_expected_stats(g: &Graph, p: &MarkovParams) -> Result<SuffStats> {
    exact_expected_stats_with_cap(g, p, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_expected_stats_with_cap(g: &Graph, p: &MarkovParams, cap: usize) -> Result<SuffStats> {
    let dist = markov_distribution_with_cap(g, p, cap)?;
    let counter = MaskCounter::new(g);
    let d = p.max_star() + 1;
    let acc = (0..1u64 << g.m())
        .into_par_iter()
        .map(|mask| {
            let t = counter.counts(mask, p.max_star())?.stat_vector(g.n(), p.star_bound);
            let pr = dist.prob(mask as usize);
            Ok::<_, Error>(t.into_iter().map(|x| x * pr).collect::<Vec<f64>>())
        })
        .try_reduce(|| vec![0.0; d], |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()))?;
    Ok(SuffStats { values: acc })
}

/// Robbins-Monro gain `a_k = a0 / (k + k0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSchedule {
    pub a0: f64,
    pub k0: f64,
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule { a0: 10.0, k0: 10.0 }
    }
}

impl GainSchedule {
    pub fn gain(&self, k: usize) -> f64 {
        self.a0 / (k as f64 + self.k0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    pub schedule: GainSchedule,
    pub chain: ChainConfig,
    pub tol: f64,
    pub max_iter: usize,
    /// Largest Euclidean norm of a single parameter update.
    pub max_step: f64,
}

impl FitOptions {
    pub fn new(chain: ChainConfig, tol: f64, max_iter: usize) -> Self {
        FitOptions { schedule: GainSchedule::default(), chain, tol, max_iter, max_step: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    /// `(beta_1 .. beta_K, beta)`.
    pub theta: Vec<f64>,
    pub gap: f64,
    pub stats: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: MarkovParams,
    pub observed: SuffStats,
    pub trajectory: Vec<TrajectoryRow>,
    pub converged: bool,
    pub final_gap: f64,
    /// Parameter updates performed.
    pub iterations: usize,
    pub tol: f64,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn degenerate(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// `iteration, beta_1..beta_K, beta_triangle, gap` rows.
    pub fn trajectory_csv(&self) -> String {
        let k = self.params.max_star();
        let mut out = String::from("iteration");
        for j in 1..=k {
            out.push_str(&format!(",beta_{j}"));
        }
        out.push_str(",beta_triangle,gap\n");
        for r in &self.trajectory {
            out.push_str(&r.iteration.to_string());
            for t in &r.theta {
                out.push_str(&format!(",{t}"));
            }
            out.push_str(&format!(",{}\n", r.gap));
        }
        out
    }
}

/// Boundary occupancy above which a fit reports degeneracy.
pub const DEGENERACY_THRESHOLD: f64 = 0.9;

/// Edge-only maximum likelihood start: `beta_1 = (n^2 / 2) logit(p)` with
/// `p` the edge density implied by the target `t(S_1)` on `K_n`.
pub fn edge_only_init(n: usize, target: &SuffStats, max_star: usize) -> MarkovParams {
    let mut init = MarkovParams::zero(max_star);
    let slots = (n * n.saturating_sub(1) / 2) as f64;
    if slots > 0.0 {
        let edges = target.star(1) * (n * n) as f64 / 2.0;
        let p = (edges / slots).clamp(0.5 / slots, 1.0 - 0.5 / slots);
        init.beta_stars[0] = (n * n) as f64 / 2.0 * (p / (1.0 - p)).ln();
    }
    init
}

/// Fit to an observed graph on the complete host over its vertex set.
pub fn fit_stochastic_approximation(
    observed: &Graph,
    max_star: usize,
    include_triangle: bool,
    init: &MarkovParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    let host = Graph::complete(observed.n());
    let full = observed.full_subset();
    let target = subgraph_suffstats(observed, &full, max_star, init.star_bound)?;
    fit_moments(&host, &target, include_triangle, init, opts)
}

/// Robbins-Monro moment matching `theta += a_k D^-1 (s_obs - s_hat)`, with
/// `D` the sampled covariance of the fitted statistics plus a small ridge.
/// Each iteration first checks the moment gap against `opts.tol`, so an
/// infinite tolerance returns `init` after zero updates. `T` is fixed to 1;
/// the fitted coefficients are `beta / T`.
pub fn fit_moments(
    host: &Graph,
    target: &SuffStats,
    include_triangle: bool,
    init: &MarkovParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    init.validate()?;
    opts.chain.validate()?;
    let k = init.max_star();
    if target.values.len() != k + 1 {
        return Err(Error::DimensionMismatch { expected: k + 1, got: target.values.len() });
    }
    if opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::InvalidParameter { field: "tol", reason: "must be >= 0".into() });
    }
    let free: Vec<usize> = (0..k).chain(include_triangle.then_some(k)).collect();
    let mut theta: Vec<f64> = init.coefficients().iter().map(|c| c / init.temperature).collect();
    let params_of = |theta: &[f64]| MarkovParams::from_coefficients(theta).with_star_bound(init.star_bound);

    let mut trajectory = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut final_gap = f64::NAN;
    let mut iterations = 0;
    for it in 0..=opts.max_iter {
        let p = params_of(&theta);
        let run = run_chain(host, &p, &opts.chain, it as u64)?;
        let resid: Vec<f64> = free.iter().map(|&i| target.values[i] - run.mean.values[i]).collect();
        let gap = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
        final_gap = gap;
        trajectory.push(TrajectoryRow { iteration: it, theta: theta.clone(), gap, stats: run.mean.values.clone() });
        if run.boundary_fraction > DEGENERACY_THRESHOLD {
            warnings.push(format!(
                "iteration {it}: {:.1}% of samples at the empty or full graph",
                100.0 * run.boundary_fraction
            ));
        }
        if gap <= opts.tol {
            converged = true;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        let d = free.len();
        let mut cov = DMatrix::from_fn(d, d, |a, b| run.covariance[free[a]][free[b]]);
        let ridge = 1e-12 + 1e-6 * cov.trace() / d as f64;
        for a in 0..d {
            cov[(a, a)] += ridge;
        }
        let r = DVector::from_vec(resid);
        let dir = cov.cholesky().map(|c| c.solve(&r)).unwrap_or(r);
        let mut step = dir * opts.schedule.gain(it);
        let norm = step.norm();
        if norm > opts.max_step {
            step *= opts.max_step / norm;
        }
        for (a, &i) in free.iter().enumerate() {
            theta[i] += step[a];
        }
        iterations += 1;
    }
    Ok(FitResult {
        params: params_of(&theta),
        observed: target.clone(),
        trajectory,
        converged,
        final_gap,
        iterations,
        tol: opts.tol,
        warnings,
    })
}
