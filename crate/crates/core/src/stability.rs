//! Strongly Rayleigh tests.
//!
//! A multiaffine `g` is real stable iff the Wagner gap
//! `d_i g * d_j g - d_ij g * g` is nonnegative on all of `R^m` for every
//! pair `i != j`. Sampling can only refute that, so search results are
//! `Violation` or `NoViolationFound`. `CertifiedStable` comes only from
//! exact arguments (product form, closed-form conditions on `K3`).
//!
//! Writing `g = a + b x_i + c x_j + d x_i x_j` with `a..d` free of
//! `x_i, x_j`, the gap equals `b c - a d`, which is what gets evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution as _, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::genpoly::{monomials, MultiAffinePoly};
use crate::graph::Graph;
use crate::model::{check_cap, Distribution, MarkovParams, StarBound, DEFAULT_ENUMERATION_CAP};

/// Relative threshold below which a Wagner gap counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

/// Relative slack allowed in the negative lattice inequality.
pub const NLC_TOLERANCE: f64 = 1e-12;

/// Tolerance on the equality condition of the closed-form cubic test.
pub const CUBIC_EQUALITY_TOLERANCE: f64 = 1e-9;

/// Largest `m` for which the lattice condition is checked on all pairs.
pub const NLC_ALL_PAIRS_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityOutcome {
    Violation,
    NoViolationFound,
    CertifiedStable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WagnerWitness {
    pub point: Vec<f64>,
    pub i: usize,
    pub j: usize,
    pub gap: f64,
    pub scale: f64,
    pub start: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub outcome: StabilityOutcome,
    pub witness: Option<WagnerWitness>,
    pub budget_used: u64,
    pub certificate: Option<String>,
}

impl StabilityVerdict {
    fn certified(reason: &str) -> Self {
        StabilityVerdict {
            outcome: StabilityOutcome::CertifiedStable,
            witness: None,
            budget_used: 0,
            certificate: Some(reason.to_string()),
        }
    }
}

pub fn wagner_gap(g: &MultiAffinePoly, x: &[f64], i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::SameIndex(i));
    }
    let [a, b, c, d] = g.pair_coefficients(x, i, j)?;
    Ok(b * c - a * d)
}

/// Magnitude against which a gap is compared: `max(1, g(x)^2, |bc|, |ad|)`.
/// The last two terms keep cancellation error in `bc - ad` from being
/// reported as a violation.
fn gap_scale(x: &[f64], i: usize, j: usize, [a, b, c, d]: [f64; 4]) -> (f64, f64) {
    let g = a + b * x[i] + c * x[j] + d * x[i] * x[j];
    let gap = b * c - a * d;
    (gap, 1f64.max(g * g).max((b * c).abs()).max((a * d).abs()))
}

/// `g = c_0 prod_e (1 + r_e x_e)` up to relative `1e-10`. Products of real
/// affine factors are real stable.
pub fn is_product_form(g: &MultiAffinePoly) -> bool {
    let c0 = g.coeff(0);
    if c0 == 0.0 {
        return false;
    }
    let r: Vec<f64> = (0..g.nvars()).map(|e| g.coeff(1 << e) / c0).collect();
    g.coeffs().iter().enumerate().all(|(mask, &c)| {
        let want: f64 = (0..g.nvars()).filter(|e| mask >> e & 1 == 1).map(|e| r[e]).product();
        let got = c / c0;
        (got - want).abs() <= 1e-10 * want.abs().max(got.abs()).max(f64::MIN_POSITIVE)
    })
}

/// Exact certificate if one applies, otherwise randomized falsification.
pub fn stability_verdict(g: &MultiAffinePoly, budget: u64, seed: u64) -> StabilityVerdict {
    if g.coeffs().iter().all(|&c| c == 0.0) {
        return StabilityVerdict::certified("zero-polynomial");
    }
    if is_product_form(g) {
        return StabilityVerdict::certified("product-form");
    }
    falsify_stability(g, budget, seed)
}

/// Number of starting points evaluated per parallel batch.
const BATCH: u64 = 64;
/// Coordinate-descent sweeps per starting point.
const DESCENT_SWEEPS: u64 = 40;

/// Randomized search for a point where the Wagner gap is negative.
///
/// Each starting point is drawn from its own ChaCha stream (seed, start
/// index), cycling through Cauchy-distributed points, points near the
/// origin, sign/magnitude corner points, and axis points. All pairs are
/// evaluated there, then the worst pair is pushed further down by
/// coordinate descent on the relative gap. Every gap evaluation costs one
/// unit of `budget`. Starts run in parallel batches; the reported witness
/// is the one with the smallest start index, so results do not depend on
/// thread count.
pub fn falsify_stability(g: &MultiAffinePoly, budget: u64, seed: u64) -> StabilityVerdict {
    let m = g.nvars();
    if m < 2 {
        return StabilityVerdict::certified("fewer-than-two-variables");
    }
    let pairs = (m * (m - 1) / 2) as u64;
    let per_start = pairs + DESCENT_SWEEPS * 2 * (m as u64 - 2);
    let mut used = 0u64;
    let mut next = 0u64;
    while used < budget {
        let results: Vec<StartResult> = (next..next + BATCH)
            .into_par_iter()
            .map(|k| run_start(g, seed, k, per_start))
            .collect();
        for (offset, mut r) in results.into_iter().enumerate() {
            let remaining = budget - used;
            if r.cost > remaining {
                r = run_start(g, seed, next + offset as u64, remaining);
            }
            used += r.cost;
            if let Some(w) = r.witness {
                return StabilityVerdict {
                    outcome: StabilityOutcome::Violation,
                    witness: Some(w),
                    budget_used: used,
                    certificate: None,
                };
            }
            if used >= budget {
                break;
            }
        }
        next += BATCH;
    }
    StabilityVerdict { outcome: StabilityOutcome::NoViolationFound, witness: None, budget_used: used, certificate: None }
}

struct StartResult {
    cost: u64,
    witness: Option<WagnerWitness>,
}

fn start_point(rng: &mut ChaCha8Rng, k: u64, m: usize) -> Vec<f64> {
    let big = |rng: &mut ChaCha8Rng| {
        let mag = 10f64.powf(rng.gen_range(0.5..3.0));
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    match k % 4 {
        0 => {
            let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
            let cauchy = Cauchy::new(0.0, scale).expect("positive scale");
            (0..m).map(|_| cauchy.sample(rng)).collect()
        }
        1 => {
            let normal = Normal::new(0.0, 0.5).expect("positive sd");
            (0..m).map(|_| normal.sample(rng)).collect()
        }
        2 => (0..m)
            .map(|_| match rng.gen_range(0..3) {
                0 => 0.0,
                _ => big(rng),
            })
            .collect(),
        _ => {
            let normal = Normal::new(0.0, 0.05).expect("positive sd");
            let mut x: Vec<f64> = (0..m).map(|_| normal.sample(rng)).collect();
            let axis = rng.gen_range(0..m);
            x[axis] = big(rng);
            x
        }
    }
}

fn run_start(g: &MultiAffinePoly, seed: u64, k: u64, cap: u64) -> StartResult {
    let m = g.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let mut x = start_point(&mut rng, k, m);
    let mut cost = 0u64;

    let mono = monomials(&x);
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..m {
        for j in i + 1..m {
            if cost >= cap {
                return StartResult { cost, witness: None };
            }
            cost += 1;
            let (gap, scale) = gap_scale(&x, i, j, g.pair_coefficients_from(&mono, i, j));
            if gap < -VIOLATION_TOLERANCE * scale {
                return StartResult { cost, witness: Some(WagnerWitness { point: x, i, j, gap, scale, start: k }) };
            }
            let r = gap / scale;
            if best.is_none_or(|(b, _, _)| r < b) {
                best = Some((r, i, j));
            }
        }
    }

    let Some((mut current, i, j)) = best else {
        return StartResult { cost, witness: None };
    };
    let others: Vec<usize> = (0..m).filter(|&v| v != i && v != j).collect();
    let mut step = 0.5;
    for _ in 0..DESCENT_SWEEPS {
        let mut improved = false;
        for &v in &others {
            let base = x[v];
            let mut best_move = None;
            for dir in [1.0, -1.0] {
                if cost >= cap {
                    return StartResult { cost, witness: None };
                }
                cost += 1;
                x[v] = base + dir * step * base.abs().max(1.0);
                let (gap, scale) = gap_scale(&x, i, j, g.pair_coefficients(&x, i, j).expect("valid pair"));
                if gap < -VIOLATION_TOLERANCE * scale {
                    return StartResult { cost, witness: Some(WagnerWitness { point: x, i, j, gap, scale, start: k }) };
                }
                let r = gap / scale;
                if r < current {
                    current = r;
                    best_move = Some(x[v]);
                }
            }
            x[v] = best_move.unwrap_or(base);
            improved |= best_move.is_some();
        }
        if !improved {
            step *= 0.5;
            if step < 1e-8 {
                break;
            }
        }
    }
    StartResult { cost, witness: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NlcMethod {
    /// Every pair of subsets.
    AllPairs,
    /// Pairs `S + i`, `S + j`; equivalent for positive distributions.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NlcVerdict {
    Pass { method: NlcMethod },
    Fail { method: NlcMethod, s: usize, t: usize, lhs_log: f64, rhs_log: f64 },
}

impl NlcVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, NlcVerdict::Pass { .. })
    }
}

/// `P(S u T) P(S n T) <= P(S) P(T) (1 + 1e-12)` for all subsets `S`, `T`.
pub fn negative_lattice_check(dist: &Distribution) -> Result<NlcVerdict> {
    negative_lattice_check_with_cap(dist, DEFAULT_ENUMERATION_CAP)
}

pub fn negative_lattice_check_with_cap(dist: &Distribution, cap: usize) -> Result<NlcVerdict> {
    let m = dist.m();
    check_cap(m, cap)?;
    let lw = dist.log_weights();
    let slack = NLC_TOLERANCE.ln_1p();
    let violates = |s: usize, t: usize| -> Option<(f64, f64)> {
        let lhs = lw[s | t] + lw[s & t];
        let rhs = lw[s] + lw[t];
        let bad = if rhs == f64::NEG_INFINITY { lhs > f64::NEG_INFINITY } else { lhs > rhs + slack };
        bad.then_some((lhs, rhs))
    };
    if m <= NLC_ALL_PAIRS_CAP || !dist.is_positive() {
        if m > NLC_ALL_PAIRS_CAP {
            return Err(Error::EnumerationCap { m, cap: NLC_ALL_PAIRS_CAP });
        }
        let method = NlcMethod::AllPairs;
        let n = 1usize << m;
        for s in 0..n {
            for t in s + 1..n {
                // Comparable pairs hold with equality.
                if s & t == s || s & t == t {
                    continue;
                }
                if let Some((lhs_log, rhs_log)) = violates(s, t) {
                    return Ok(NlcVerdict::Fail { method, s, t, lhs_log, rhs_log });
                }
            }
        }
        return Ok(NlcVerdict::Pass { method });
    }
    let method = NlcMethod::Local;
    for base in 0..1usize << m {
        for i in 0..m {
            for j in i + 1..m {
                let (bi, bj) = (1 << i, 1 << j);
                if base & (bi | bj) != 0 {
                    continue;
                }
                if let Some((lhs_log, rhs_log)) = violates(base | bi, base | bj) {
                    return Ok(NlcVerdict::Fail { method, s: base | bi, t: base | bj, lhs_log, rhs_log });
                }
            }
        }
    }
    Ok(NlcVerdict::Pass { method })
}

/// The `beta_2` at which the cubic model on `K3` is claimed to be strongly
/// Rayleigh: `(9T/2) ln(3 exp(2 beta / (9T)) - 2) - 2 beta`.
pub fn sr_cubic_beta2(temperature: f64, beta: f64) -> Result<f64> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParameter { field: "T", reason: "must be > 0".into() });
    }
    let arg = 3.0 * (2.0 * beta / (9.0 * temperature)).exp() - 2.0;
    // Values within rounding of zero are the log singularity itself.
    if arg <= 1e-12 {
        return Err(Error::Domain(format!(
            "3 exp(2 beta / 9T) - 2 = {arg:.3e} is not positive; need beta > (9T/2) ln(2/3) = {:.6}",
            4.5 * temperature * (2.0f64 / 3.0).ln()
        )));
    }
    Ok(4.5 * temperature * arg.ln() - 2.0 * beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicVerdict {
    pub strongly_rayleigh: bool,
    pub model: &'static str,
    pub reason: String,
}

fn require_k3(host: &Graph) -> Result<()> {
    if host.n() != 3 || host.m() != 3 {
        return Err(Error::NotTriangleHost { n: host.n(), m: host.m() });
    }
    Ok(())
}

/// Closed-form strongly Rayleigh verdict for Markov models on `K3`:
/// the edge-triangle model (`K = 1`) is SR iff `beta = 0`; the cubic model
/// (`K = 2`) iff `beta <= 0` and `beta_2` equals [`sr_cubic_beta2`].
pub fn sr_verdict_cubic(host: &Graph, p: &MarkovParams) -> Result<CubicVerdict> {
    require_k3(host)?;
    p.validate()?;
    if p.star_bound != StarBound::SubgraphMaxDegree {
        return Err(Error::Domain("closed-form verdicts assume the default star bound".into()));
    }
    let beta = p.beta_triangle;
    match p.max_star() {
        1 => {
            let sr = beta.abs() <= CUBIC_EQUALITY_TOLERANCE;
            Ok(CubicVerdict {
                strongly_rayleigh: sr,
                model: "edge-triangle",
                reason: if sr {
                    "triangle parameter is zero".into()
                } else {
                    format!("triangle parameter {beta} is nonzero")
                },
            })
        }
        2 => {
            let beta2 = p.beta_stars[1];
            if beta > 0.0 {
                return Ok(CubicVerdict {
                    strongly_rayleigh: false,
                    model: "cubic",
                    reason: format!("triangle parameter {beta} > 0"),
                });
            }
            match sr_cubic_beta2(p.temperature, beta) {
                Ok(target) => {
                    let off = (beta2 - target).abs();
                    let sr = off <= CUBIC_EQUALITY_TOLERANCE;
                    Ok(CubicVerdict {
                        strongly_rayleigh: sr,
                        model: "cubic",
                        reason: format!("|beta_2 - {target:.9}| = {off:.3e} (tolerance {CUBIC_EQUALITY_TOLERANCE:e})"),
                    })
                }
                Err(e) => Ok(CubicVerdict { strongly_rayleigh: false, model: "cubic", reason: e.to_string() }),
            }
        }
        k => Err(Error::InvalidParameter { field: "beta_stars", reason: format!("K={k} exceeds 2 on K3") }),
    }
}

/// On `K3` the weights depend only on `|S|`, so for any pair the Wagner
/// gap is a quadratic `A t^2 + B t + C` in the third coordinate `t`.
/// Returns `(A, B, C)` for the normalized weights.
pub fn cubic_wagner_quadratic(p: &MarkovParams) -> Result<(f64, f64, f64)> {
    let w = k3_level_weights(p)?;
    Ok((w[2] * w[2] - w[1] * w[3], w[1] * w[2] - w[0] * w[3], w[1] * w[1] - w[0] * w[2]))
}

/// Probability of one fixed subset of each size `0..=3` on `K3`.
fn k3_level_weights(p: &MarkovParams) -> Result<[f64; 4]> {
    let dist = crate::model::markov_distribution(&Graph::complete(3), p)?;
    Ok([dist.prob(0), dist.prob(1), dist.prob(3), dist.prob(7)])
}

/// Exact real-stability decision for a Markov model on `K3` from
/// [`cubic_wagner_quadratic`]: the gap quadratic must be nonnegative on `R`.
/// Rounding slack is relative to the largest squared weight.
pub fn cubic_sr_exact(p: &MarkovParams) -> Result<bool> {
    let (a, b, c) = cubic_wagner_quadratic(p)?;
    let w = k3_level_weights(p)?;
    let scale = w.iter().fold(0.0f64, |m, v| m.max(*v)).powi(2);
    let eps = 1e-12 * scale;
    if c < -eps {
        return Ok(false);
    }
    if a.abs() <= eps {
        return Ok(b.abs() <= eps);
    }
    Ok(a > 0.0 && b * b - 4.0 * a * c <= eps * scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub status: ConditionStatus,
    pub detail: String,
}

/// Necessary conditions for a Markov random graph to be strongly Rayleigh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryReport {
    /// Host with a triangle: `beta <= -beta_2`.
    pub triangle_vs_two_star: Condition,
    /// Host with a 3-star: `beta_3 <= -(n/5) beta_2`.
    pub three_star_vs_two_star: Condition,
}

impl NecessaryReport {
    /// Some necessary condition fails, so the model is not strongly Rayleigh.
    pub fn refutes_sr(&self) -> bool {
        self.triangle_vs_two_star.status == ConditionStatus::Fail
            || self.three_star_vs_two_star.status == ConditionStatus::Fail
    }
}

pub fn check_sr_necessary(p: &MarkovParams, host: &Graph) -> NecessaryReport {
    let beta = p.beta_triangle;
    let beta2 = p.beta_star(2);
    let absent2 = if p.max_star() < 2 { " (no 2-star term; beta_2 read as 0)" } else { "" };

    let triangle_vs_two_star = if !host.has_triangle() {
        Condition { status: ConditionStatus::NotApplicable, detail: "host graph has no triangle".into() }
    } else {
        let holds = beta <= -beta2;
        Condition {
            status: if holds { ConditionStatus::Pass } else { ConditionStatus::Fail },
            detail: format!(
                "beta = {beta} {} -beta_2 = {}{absent2}",
                if holds { "<=" } else { ">" },
                -beta2
            ),
        }
    };

    let three_star_vs_two_star = if !host.has_three_star() {
        Condition { status: ConditionStatus::NotApplicable, detail: "host graph has no 3-star".into() }
    } else if p.max_star() < 3 {
        Condition {
            status: ConditionStatus::NotApplicable,
            detail: format!("model has no 3-star term (K = {})", p.max_star()),
        }
    } else {
        let beta3 = p.beta_stars[2];
        let bound = -(host.n() as f64) * beta2 / 5.0;
        let holds = beta3 <= bound;
        Condition {
            status: if holds { ConditionStatus::Pass } else { ConditionStatus::Fail },
            detail: format!(
                "beta_3 = {beta3} {} -(n/5) beta_2 = {bound} (n = {})",
                if holds { "<=" } else { ">" },
                host.n()
            ),
        }
    };

    NecessaryReport { triangle_vs_two_star, three_star_vs_two_star }
}
