//! Markov random graph and Bernoulli distributions over the edge subsets of
//! a host graph.
//!
//! The Markov weight of a subset `S` is
//! `exp((beta * t(tri, G_S) + sum_k beta_k * t(S_k, G_S)) / T)` where the
//! star sum stops at `min(K, maxdeg(G_S))` by default.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Density, EdgeSubset, Graph, SubgraphStats};

/// Largest edge count for which `2^m` subsets are enumerated by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Upper limit of the k-star sum in the exponent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarBound {
    /// Sum to `min(K, maxdeg(G_S))`.
    #[default]
    SubgraphMaxDegree,
    /// Always sum to `K`.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovParams {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub beta_triangle: f64,
    /// `beta_1 ..= beta_K`.
    pub beta_stars: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_default_bound")]
    pub star_bound: StarBound,
}

fn is_default_bound(b: &StarBound) -> bool {
    *b == StarBound::default()
}

impl MarkovParams {
    pub fn new(temperature: f64, beta_triangle: f64, beta_stars: Vec<f64>) -> Result<Self> {
        let p = MarkovParams { temperature, beta_triangle, beta_stars, star_bound: StarBound::default() };
        p.validate()?;
        Ok(p)
    }

    /// All coefficients zero, `T = 1`.
    pub fn zero(max_star: usize) -> Self {
        MarkovParams {
            temperature: 1.0,
            beta_triangle: 0.0,
            beta_stars: vec![0.0; max_star.max(1)],
            star_bound: StarBound::default(),
        }
    }

    pub fn with_star_bound(mut self, bound: StarBound) -> Self {
        self.star_bound = bound;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: MarkovParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParameter {
                field: "T",
                reason: format!("must be a finite number > 0, got {}", self.temperature),
            });
        }
        if !self.beta_triangle.is_finite() {
            return Err(Error::InvalidParameter {
                field: "beta_triangle",
                reason: "must be finite".into(),
            });
        }
        if self.beta_stars.is_empty() {
            return Err(Error::InvalidParameter {
                field: "beta_stars",
                reason: "needs at least one entry (beta_1)".into(),
            });
        }
        if let Some(i) = self.beta_stars.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "beta_stars",
                reason: format!("entry {i} is not finite"),
            });
        }
        Ok(())
    }

    /// Checks that `K` does not exceed the host's maximum degree.
    pub fn validate_for(&self, host: &Graph) -> Result<()> {
        self.validate()?;
        let dmax = host.max_degree() as usize;
        if self.max_star() > dmax.max(1) {
            return Err(Error::InvalidParameter {
                field: "beta_stars",
                reason: format!(
                    "star order cap K={} exceeds the host's maximum degree {}",
                    self.max_star(),
                    dmax
                ),
            });
        }
        Ok(())
    }

    pub fn max_star(&self) -> usize {
        self.beta_stars.len()
    }

    /// `beta_k`, with absent orders reading as zero.
    pub fn beta_star(&self, k: usize) -> f64 {
        k.checked_sub(1).and_then(|i| self.beta_stars.get(i)).copied().unwrap_or(0.0)
    }

    /// Model with only edge and triangle terms (`K = 1`).
    pub fn is_edge_triangle(&self) -> bool {
        self.beta_stars.len() == 1
    }

    /// Coefficients in statistic order `(beta_1, .., beta_K, beta)`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = self.beta_stars.clone();
        c.push(self.beta_triangle);
        c
    }

    /// Inverse of [`MarkovParams::coefficients`], at `T = 1`.
    pub fn from_coefficients(c: &[f64]) -> Self {
        assert!(c.len() >= 2);
        let (stars, tri) = c.split_at(c.len() - 1);
        MarkovParams {
            temperature: 1.0,
            beta_triangle: tri[0],
            beta_stars: stars.to_vec(),
            star_bound: StarBound::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliParams {
    pub p: Vec<f64>,
}

impl BernoulliParams {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(i) = p.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter {
                field: "p",
                reason: format!("entry {i} = {} is outside [0, 1]", p[i]),
            });
        }
        Ok(BernoulliParams { p })
    }
}

/// Model statistics of one subset: `(t~_1, .., t~_K, t(tri))`, where
/// `t~_k` is the k-star density when the k-star term is active and zero
/// otherwise. The exponent is `<coefficients, stats> / T`.
pub fn exponent_statistics(stats: &SubgraphStats, max_star: usize, bound: StarBound) -> Result<Vec<Density>> {
    let active = active_stars(stats.max_degree(), max_star, bound);
    let mut out = Vec::with_capacity(max_star + 1);
    for k in 1..=max_star as u32 {
        if (k as usize) <= active {
            out.push(graph::density_from_stats(stats, graph::Motif::KStar(k))?);
        } else {
            out.push(Density::from_integer(0));
        }
    }
    out.push(graph::density_from_stats(stats, graph::Motif::Triangle)?);
    Ok(out)
}

pub(crate) fn active_stars(max_degree: u32, max_star: usize, bound: StarBound) -> usize {
    match bound {
        StarBound::SubgraphMaxDegree => max_star.min(max_degree as usize),
        StarBound::All => max_star,
    }
}

/// Integer homomorphism counts for one subset, the common input of every
/// exponent evaluation so all code paths round identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct HomCounts {
    /// `sum_v deg(v)^k` for `k = 1..=K`.
    pub stars: Vec<u128>,
    /// `6 * #triangles`.
    pub triangle: u128,
    pub max_degree: u32,
}

impl HomCounts {
    pub fn from_stats(stats: &SubgraphStats, max_star: usize) -> Result<Self> {
        let stars = (1..=max_star as u32)
            .map(|k| graph::hom_count_kstar(stats, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(HomCounts { stars, triangle: graph::hom_count_triangle(stats), max_degree: stats.max_degree() })
    }

    /// Model statistics as floats, in `exponent_statistics` order.
    pub fn stat_vector(&self, n: usize, bound: StarBound) -> Vec<f64> {
        let active = active_stars(self.max_degree, self.stars.len(), bound);
        let n = n as f64;
        let mut out = Vec::with_capacity(self.stars.len() + 1);
        let mut denom = n;
        for (i, &c) in self.stars.iter().enumerate() {
            denom *= n;
            out.push(if i < active { c as f64 / denom } else { 0.0 });
        }
        out.push(self.triangle as f64 / (n * n * n));
        out
    }

    pub fn exponent(&self, n: usize, p: &MarkovParams) -> f64 {
        let stats = self.stat_vector(n, p.star_bound);
        let coeffs = p.coefficients();
        let mut acc = 0.0;
        for (c, t) in coeffs.iter().zip(&stats) {
            acc += c * t;
        }
        acc / p.temperature
    }
}

/// `(1/T) * (beta t(tri) + sum_{k <= min(K, maxdeg)} beta_k t(S_k))`.
pub fn energy_exponent(g: &Graph, s: &EdgeSubset, p: &MarkovParams) -> Result<f64> {
    let stats = graph::spanning_stats(g, s)?;
    Ok(HomCounts::from_stats(&stats, p.max_star())?.exponent(g.n(), p))
}

/// Fast subset statistics for graphs small enough to enumerate.
pub(crate) struct MaskCounter {
    ends: Vec<(usize, usize)>,
    touched: usize,
}

impl MaskCounter {
    pub fn new(g: &Graph) -> Self {
        // Relabel the vertices that carry edges so adjacency rows fit a u64.
        let mut map = vec![usize::MAX; g.n()];
        let mut next = 0;
        let ends = g
            .edges()
            .iter()
            .map(|&(u, v)| {
                for w in [u, v] {
                    if map[w] == usize::MAX {
                        map[w] = next;
                        next += 1;
                    }
                }
                (map[u], map[v])
            })
            .collect();
        MaskCounter { ends, touched: next }
    }

    pub fn supports(&self) -> bool {
        self.touched <= 64 && self.ends.len() <= 64
    }

    pub fn counts(&self, mask: u64, max_star: usize) -> Result<HomCounts> {
        debug_assert!(self.supports());
        let mut deg = [0u32; 64];
        let mut rows = [0u64; 64];
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (u, v) = self.ends[i];
            deg[u] += 1;
            deg[v] += 1;
            rows[u] |= 1 << v;
            rows[v] |= 1 << u;
        }
        let mut tri = 0u64;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (a, b) = self.ends[i];
            let (u, v) = (a.min(b), a.max(b));
            let above = if v >= 63 { 0 } else { !((1u64 << (v + 1)) - 1) };
            tri += (rows[u] & rows[v] & above).count_ones() as u64;
        }
        let degrees = &deg[..self.touched];
        let mut stars = Vec::with_capacity(max_star);
        for k in 1..=max_star as u32 {
            let mut acc = 0u128;
            for &d in degrees {
                acc = (d as u128)
                    .checked_pow(k)
                    .and_then(|p| acc.checked_add(p))
                    .ok_or(Error::Overflow("k-star homomorphism count"))?;
            }
            stars.push(acc);
        }
        Ok(HomCounts {
            stars,
            triangle: 6 * tri as u128,
            max_degree: degrees.iter().copied().max().unwrap_or(0),
        })
    }
}

/// Unnormalized distribution over all `2^m` edge subsets, stored as log
/// weights indexed by subset mask.
#[derive(Debug, Clone)]
pub struct Distribution {
    host: Graph,
    log_weights: Vec<f64>,
    log_z: f64,
}

impl Distribution {
    pub fn from_log_weights(host: Graph, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != 1usize << host.m() {
            return Err(Error::DimensionMismatch { expected: 1 << host.m(), got: log_weights.len() });
        }
        let log_z = log_sum_exp(&log_weights);
        Ok(Distribution { host, log_weights, log_z })
    }

    pub fn host(&self) -> &Graph {
        &self.host
    }

    pub fn m(&self) -> usize {
        self.host.m()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_weight(&self, mask: usize) -> f64 {
        self.log_weights[mask]
    }

    pub fn weight(&self, mask: usize) -> f64 {
        self.log_weights[mask].exp()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn prob(&self, mask: usize) -> f64 {
        (self.log_weights[mask] - self.log_z).exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| (lw - self.log_z).exp()).collect()
    }

    /// Every subset has positive weight.
    pub fn is_positive(&self) -> bool {
        self.log_weights.iter().all(|lw| lw.is_finite())
    }

    /// Same distribution with every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter { field: "c", reason: "scale must be positive".into() });
        }
        let lc = c.ln();
        Ok(Distribution {
            host: self.host.clone(),
            log_weights: self.log_weights.iter().map(|lw| lw + lc).collect(),
            log_z: self.log_z + lc,
        })
    }

    /// `P(e in S)` for every edge.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (mask, p) in self.probabilities().into_iter().enumerate() {
            for (e, slot) in out.iter_mut().enumerate() {
                if mask >> e & 1 == 1 {
                    *slot += p;
                }
            }
        }
        out
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Fails with `EnumerationCap` when `2^m` subsets would exceed the cap.
pub fn check_cap(m: usize, cap: usize) -> Result<()> {
    if m > cap || m >= 63 {
        return Err(Error::EnumerationCap { m, cap });
    }
    Ok(())
}

pub fn markov_distribution(g: &Graph, p: &MarkovParams) -> Result<Distribution> {
    markov_distribution_with_cap(g, p, DEFAULT_ENUMERATION_CAP)
}

pub fn markov_distribution_with_cap(g: &Graph, p: &MarkovParams, cap: usize) -> Result<Distribution> {
    p.validate()?;
    check_cap(g.m(), cap)?;
    let counter = MaskCounter::new(g);
    let log_weights = (0..1u64 << g.m())
        .into_par_iter()
        .map(|mask| Ok(counter.counts(mask, p.max_star())?.exponent(g.n(), p)))
        .collect::<Result<Vec<f64>>>()?;
    Distribution::from_log_weights(g.clone(), log_weights)
}

/// Product measure; zero or one entries give a non-positive distribution.
pub fn bernoulli_distribution(g: &Graph, p: &BernoulliParams) -> Result<Distribution> {
    bernoulli_distribution_with_cap(g, p, DEFAULT_ENUMERATION_CAP)
}

pub fn bernoulli_distribution_with_cap(g: &Graph, p: &BernoulliParams, cap: usize) -> Result<Distribution> {
    if p.p.len() != g.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), got: p.p.len() });
    }
    check_cap(g.m(), cap)?;
    let on: Vec<f64> = p.p.iter().map(|x| x.ln()).collect();
    let off: Vec<f64> = p.p.iter().map(|x| (1.0 - x).ln()).collect();
    let log_weights: Vec<f64> = (0..1usize << g.m())
        .into_par_iter()
        .map(|mask| (0..g.m()).map(|e| if mask >> e & 1 == 1 { on[e] } else { off[e] }).sum())
        .collect();
    Ok(Distribution { host: g.clone(), log_weights, log_z: 0.0 })
}
