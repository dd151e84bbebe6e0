//! Lorentzian certification of homogeneous polynomials.
//!
//! A homogeneous `h` of degree `d` passes when its coefficients are
//! nonnegative, its support is M-convex, and every `(d-2)`-th order partial
//! derivative is a quadratic form with at most one positive eigenvalue.

use std::collections::{BTreeSet, HashSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::genpoly::{generating_polynomial, homogenize, HomogPoly};
use crate::graph::Graph;
use crate::model::{check_cap, Distribution, MarkovParams, DEFAULT_ENUMERATION_CAP};

/// Default relative eigenvalue tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Spectra kept in a verdict; the count of all checked spectra is recorded
/// separately.
pub const RETAINED_SPECTRA: usize = 256;

/// Exponent vectors of a homogeneous polynomial, stored in descending
/// lexicographic order (`x_0^2` before `x_0 x_1` before `x_1^2`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    nvars: usize,
    points: BTreeSet<std::cmp::Reverse<Vec<u32>>>,
}

impl SupportSet {
    pub fn new(nvars: usize, points: impl IntoIterator<Item = Vec<u32>>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut degree = None;
        for p in points {
            if p.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: p.len() });
            }
            let d: u32 = p.iter().sum();
            match degree {
                None => degree = Some(d),
                Some(d0) if d0 != d => return Err(Error::NotHomogeneous(d0, d)),
                _ => {}
            }
            set.insert(std::cmp::Reverse(p));
        }
        Ok(SupportSet { nvars, points: set })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &[u32]) -> bool {
        self.points.contains(&std::cmp::Reverse(p.to_vec()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.points.iter().map(|r| &r.0)
    }
}

/// Exponents whose coefficient exceeds `tol` in absolute value.
pub fn support(h: &HomogPoly, tol: f64) -> SupportSet {
    SupportSet {
        nvars: h.nvars(),
        points: h
            .terms()
            .iter()
            .filter(|(_, c)| c.abs() > tol)
            .map(|(e, _)| std::cmp::Reverse(e.clone()))
            .collect(),
    }
}

/// First failing triple of the exchange property; `i` is 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExchangeWitness {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub i: usize,
}

/// Brute-force exchange property: for all `alpha, beta` in `J` and `i` with
/// `alpha_i > beta_i` some `j` has `alpha_j < beta_j` and
/// `alpha - e_i + e_j` in `J`. Returns the first failure in the set's order.
pub fn is_m_convex(j: &SupportSet) -> std::result::Result<(), ExchangeWitness> {
    let points: Vec<&Vec<u32>> = j.iter().collect();
    let lookup: HashSet<&[u32]> = points.iter().map(|p| p.as_slice()).collect();
    let failure = points.par_iter().find_map_first(|alpha| {
        let mut probe = (*alpha).clone();
        for beta in &points {
            for i in 0..j.nvars {
                if alpha[i] <= beta[i] {
                    continue;
                }
                probe[i] -= 1;
                let ok = (0..j.nvars).any(|k| {
                    if alpha[k] >= beta[k] {
                        return false;
                    }
                    probe[k] += 1;
                    let hit = lookup.contains(probe.as_slice());
                    probe[k] -= 1;
                    hit
                });
                probe[i] += 1;
                if !ok {
                    return Some(ExchangeWitness { alpha: (*alpha).clone(), beta: (*beta).clone(), i });
                }
            }
        }
        None
    });
    match failure {
        Some(w) => Err(w),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signature {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub spectral_norm: f64,
}

impl Signature {
    /// Second-largest eigenvalue over the spectral norm; at most `tol` means
    /// at most one positive eigenvalue. Zero for forms with fewer than two
    /// variables or vanishing Hessian.
    pub fn second_eigenvalue_ratio(&self) -> f64 {
        let k = self.eigenvalues.len();
        if k < 2 || self.spectral_norm == 0.0 {
            return 0.0;
        }
        self.eigenvalues[k - 2] / self.spectral_norm
    }
}

/// Hessian of a quadratic form: `H_ii = 2 c(x_i^2)`, `H_ij = c(x_i x_j)`.
pub fn quadratic_hessian(q: &HomogPoly) -> Result<DMatrix<f64>> {
    if q.degree() != 2 {
        return Err(Error::NotQuadratic(q.degree()));
    }
    let n = q.nvars();
    let mut h = DMatrix::zeros(n, n);
    for (e, &c) in q.terms() {
        let idx: Vec<usize> = e.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, _)| i).collect();
        match idx.as_slice() {
            [i] => h[(*i, *i)] += 2.0 * c,
            [i, j] => {
                h[(*i, *j)] += c;
                h[(*j, *i)] += c;
            }
            _ => unreachable!("degree-2 exponent"),
        }
    }
    Ok(h)
}

pub fn hessian_signature(h: &DMatrix<f64>, tol: f64) -> Signature {
    let mut eigenvalues: Vec<f64> = if h.nrows() == 0 {
        Vec::new()
    } else {
        SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect()
    };
    eigenvalues.sort_by(f64::total_cmp);
    let spectral_norm = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = tol * spectral_norm;
    let n_pos = eigenvalues.iter().filter(|&&v| v > cut).count();
    let n_neg = eigenvalues.iter().filter(|&&v| v < -cut).count();
    let n_zero = eigenvalues.len() - n_pos - n_neg;
    Signature { n_pos, n_neg, n_zero, eigenvalues, spectral_norm }
}

pub fn quadratic_signature(q: &HomogPoly, tol: f64) -> Result<Signature> {
    Ok(hessian_signature(&quadratic_hessian(q)?, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LorentzOutcome {
    Lorentzian,
    NotLorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LorentzFailure {
    NegativeCoefficient { exp: Vec<u32>, coeff: f64 },
    NotMConvex(ExchangeWitness),
    /// `derivative` is the exponent vector of the applied partials.
    SignatureFailure { derivative: Vec<u32>, n_pos: usize, eigenvalues: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub derivative: Vec<u32>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzVerdict {
    pub outcome: LorentzOutcome,
    pub failure: Option<LorentzFailure>,
    /// Largest second-eigenvalue ratio seen; `<= tol` iff every signature
    /// check passed. `None` when no signature stage ran.
    pub margin: Option<f64>,
    pub tol: f64,
    pub spectra_checked: usize,
    pub spectra: Vec<SpectrumRecord>,
}

impl LorentzVerdict {
    pub fn is_lorentzian(&self) -> bool {
        self.outcome == LorentzOutcome::Lorentzian
    }

    fn fail(failure: LorentzFailure, tol: f64) -> Self {
        LorentzVerdict {
            outcome: LorentzOutcome::NotLorentzian,
            failure: Some(failure),
            margin: None,
            tol,
            spectra_checked: 0,
            spectra: Vec::new(),
        }
    }
}

/// Exponent vectors of total `order` bounded componentwise by `cap`, in
/// descending lexicographic order.
fn bounded_multisets(cap: &[u32], order: u32) -> Vec<Vec<u32>> {
    fn rec(cap: &[u32], pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cap.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest: u32 = cap[pos + 1..].iter().sum();
        let lo = left.saturating_sub(rest);
        for k in (lo..=cap[pos].min(left)).rev() {
            cur.push(k);
            rec(cap, pos + 1, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(cap, 0, order, &mut Vec::with_capacity(cap.len()), &mut out);
    out
}

/// Checks coefficients, then support, then signatures; the first failing
/// stage is the one reported.
pub fn is_lorentzian(h: &HomogPoly, tol: f64) -> LorentzVerdict {
    let pass = |margin, spectra_checked, spectra| LorentzVerdict {
        outcome: LorentzOutcome::Lorentzian,
        failure: None,
        margin,
        tol,
        spectra_checked,
        spectra,
    };
    if let Some((exp, &coeff)) = h.terms().iter().find(|(_, &c)| c < 0.0) {
        return LorentzVerdict::fail(LorentzFailure::NegativeCoefficient { exp: exp.clone(), coeff }, tol);
    }
    if h.is_zero() || h.degree() < 2 {
        return pass(None, 0, Vec::new());
    }
    if let Err(w) = is_m_convex(&support(h, 0.0)) {
        return LorentzVerdict::fail(LorentzFailure::NotMConvex(w), tol);
    }
    // Partials of order d-2 that can be nonzero never exceed the largest
    // exponent of any variable.
    let alphas = bounded_multisets(&h.max_exponents(), h.degree() - 2);
    let results: Vec<(Signature, f64)> = alphas
        .par_iter()
        .map(|alpha| {
            let q = h.derivative(alpha).expect("matching dimension");
            let sig = if q.is_zero() {
                hessian_signature(&DMatrix::zeros(h.nvars(), h.nvars()), tol)
            } else {
                quadratic_signature(&q, tol).expect("degree two")
            };
            let r = sig.second_eigenvalue_ratio();
            (sig, r)
        })
        .collect();
    let margin = results.iter().map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max);
    let spectra: Vec<SpectrumRecord> = alphas
        .iter()
        .zip(&results)
        .take(RETAINED_SPECTRA)
        .map(|(a, (s, _))| SpectrumRecord { derivative: a.clone(), eigenvalues: s.eigenvalues.clone() })
        .collect();
    let margin = margin.is_finite().then_some(margin);
    for (alpha, (sig, _)) in alphas.iter().zip(&results) {
        if sig.n_pos > 1 {
            return LorentzVerdict {
                outcome: LorentzOutcome::NotLorentzian,
                failure: Some(LorentzFailure::SignatureFailure {
                    derivative: alpha.clone(),
                    n_pos: sig.n_pos,
                    eigenvalues: sig.eigenvalues.clone(),
                }),
                margin,
                tol,
                spectra_checked: alphas.len(),
                spectra,
            };
        }
    }
    pass(margin, alphas.len(), spectra)
}

/// Homogenized normalized generating polynomial through [`is_lorentzian`].
pub fn is_lorentzian_distribution(dist: &Distribution, tol: f64) -> Result<LorentzVerdict> {
    is_lorentzian_distribution_with_cap(dist, tol, DEFAULT_ENUMERATION_CAP)
}

pub fn is_lorentzian_distribution_with_cap(dist: &Distribution, tol: f64, cap: usize) -> Result<LorentzVerdict> {
    check_cap(dist.m(), cap)?;
    Ok(is_lorentzian(&homogenize(&generating_polynomial(dist, true)), tol))
}

/// Closed form on `K3`: the edge-triangle model (`K = 1`) is Lorentzian iff
/// `beta <= 0`; the cubic model (`K = 2`) iff `beta_2 <= 0` and `beta <= 0`.
pub fn lorentzian_verdict_cubic(host: &Graph, p: &MarkovParams) -> Result<LorentzOutcome> {
    if host.n() != 3 || host.m() != 3 {
        return Err(Error::NotTriangleHost { n: host.n(), m: host.m() });
    }
    p.validate()?;
    let ok = match p.max_star() {
        1 => p.beta_triangle <= 0.0,
        2 => p.beta_triangle <= 0.0 && p.beta_stars[1] <= 0.0,
        k => return Err(Error::InvalidParameter { field: "beta_stars", reason: format!("K={k} exceeds 2 on K3") }),
    };
    Ok(if ok { LorentzOutcome::Lorentzian } else { LorentzOutcome::NotLorentzian })
}
