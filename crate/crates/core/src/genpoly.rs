//! Multiaffine generating polynomials and their homogenizations.
//!
//! Coefficients are kept in the plain monomial basis (no `1/alpha!`
//! scaling). Subset `S` of the edge set is the monomial `x^S`, indexed by
//! its bit mask.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Distribution;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAffinePoly {
    m: usize,
    coeffs: Vec<f64>,
}

impl MultiAffinePoly {
    pub fn new(m: usize, coeffs: Vec<f64>) -> Result<Self> {
        if m >= 63 || coeffs.len() != 1usize << m {
            return Err(Error::DimensionMismatch { expected: 1usize << m.min(62), got: coeffs.len() });
        }
        Ok(MultiAffinePoly { m, coeffs })
    }

    /// Polynomial with the given `(subset mask, coefficient)` terms.
    pub fn from_terms(m: usize, terms: &[(usize, f64)]) -> Result<Self> {
        let mut coeffs = vec![0.0; 1 << m];
        for &(mask, c) in terms {
            if mask >= coeffs.len() {
                return Err(Error::DimensionMismatch { expected: coeffs.len(), got: mask });
            }
            coeffs[mask] += c;
        }
        Self::new(m, coeffs)
    }

    pub fn nvars(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    /// Horner evaluation, folding the highest variable first.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: x.len() });
        }
        let mut buf = self.coeffs.clone();
        let mut len = buf.len();
        for &xi in x.iter().rev() {
            len /= 2;
            for s in 0..len {
                buf[s] += xi * buf[s + len];
            }
        }
        Ok(buf[0])
    }

    pub fn partial(&self, i: usize) -> Result<MultiAffinePoly> {
        if i >= self.m {
            return Err(Error::VariableOutOfRange { index: i, nvars: self.m });
        }
        let bit = 1usize << i;
        let coeffs = (0..self.coeffs.len())
            .map(|s| if s & bit == 0 { self.coeffs[s | bit] } else { 0.0 })
            .collect();
        Ok(MultiAffinePoly { m: self.m, coeffs })
    }

    /// Writing `g = a + b x_i + c x_j + d x_i x_j` with `a..d` free of
    /// `x_i, x_j`, returns `[a, b, c, d]` evaluated at `x` (whose `i`, `j`
    /// entries are ignored).
    pub fn pair_coefficients(&self, x: &[f64], i: usize, j: usize) -> Result<[f64; 4]> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: x.len() });
        }
        for k in [i, j] {
            if k >= self.m {
                return Err(Error::VariableOutOfRange { index: k, nvars: self.m });
            }
        }
        if i == j {
            return Err(Error::SameIndex(i));
        }
        let mono = monomials(x);
        Ok(self.pair_coefficients_from(&mono, i, j))
    }

    /// As [`MultiAffinePoly::pair_coefficients`], from a table produced by
    /// [`monomials`]. Only entries of masks avoiding `i` and `j` are read.
    pub fn pair_coefficients_from(&self, mono: &[f64], i: usize, j: usize) -> [f64; 4] {
        let (bi, bj) = (1usize << i, 1usize << j);
        let mut out = [0.0; 4];
        for (s, &w) in mono.iter().enumerate() {
            if s & (bi | bj) != 0 {
                continue;
            }
            out[0] += self.coeffs[s] * w;
            out[1] += self.coeffs[s | bi] * w;
            out[2] += self.coeffs[s | bj] * w;
            out[3] += self.coeffs[s | bi | bj] * w;
        }
        out
    }

    pub fn to_json(&self) -> PolyJson {
        let vars = (0..self.m).map(|i| format!("x{i}")).collect();
        let terms = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(mask, &coeff)| TermJson {
                exp: (0..self.m).map(|i| (mask >> i & 1) as u32).collect(),
                coeff,
            })
            .collect();
        PolyJson { vars, terms }
    }
}

/// `x^S` for every subset mask `S`.
pub fn monomials(x: &[f64]) -> Vec<f64> {
    let mut mono = vec![1.0; 1 << x.len()];
    for s in 1..mono.len() {
        let low = s.trailing_zeros() as usize;
        mono[s] = mono[s & (s - 1)] * x[low];
    }
    mono
}

pub fn generating_polynomial(dist: &Distribution, normalized: bool) -> MultiAffinePoly {
    let coeffs = if normalized {
        dist.probabilities()
    } else {
        dist.log_weights().iter().map(|lw| lw.exp()).collect()
    };
    MultiAffinePoly { m: dist.m(), coeffs }
}

/// Homogeneous polynomial with a sparse term map from exponent vectors to
/// coefficients. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogPoly {
    nvars: usize,
    degree: u32,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl HomogPoly {
    pub fn new(nvars: usize, degree: u32, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (exp, c) in terms {
            if exp.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: exp.len() });
            }
            let d: u32 = exp.iter().sum();
            if d != degree {
                return Err(Error::NotHomogeneous(degree, d));
            }
            *map.entry(exp).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Ok(HomogPoly { nvars, degree, terms: map })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exp: &[u32]) -> f64 {
        self.terms.get(exp).copied().unwrap_or(0.0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: x.len() });
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, xi)| xi.powi(k as i32)).product::<f64>())
            .sum())
    }

    /// Largest exponent of each variable over the support.
    pub fn max_exponents(&self) -> Vec<u32> {
        let mut out = vec![0; self.nvars];
        for e in self.terms.keys() {
            for (o, &k) in out.iter_mut().zip(e) {
                *o = (*o).max(k);
            }
        }
        out
    }

    /// `d^alpha h` for the derivative multiset `alpha` (an exponent vector).
    pub fn derivative(&self, alpha: &[u32]) -> Result<HomogPoly> {
        if alpha.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: alpha.len() });
        }
        let order: u32 = alpha.iter().sum();
        if order > self.degree {
            return Ok(HomogPoly { nvars: self.nvars, degree: 0, terms: BTreeMap::new() });
        }
        let mut terms = BTreeMap::new();
        'term: for (e, &c) in &self.terms {
            let mut factor = c;
            let mut rest = e.clone();
            for (k, &a) in alpha.iter().enumerate() {
                if e[k] < a {
                    continue 'term;
                }
                // Falling factorial e_k (e_k - 1) .. (e_k - a + 1).
                for r in 0..a {
                    factor *= (e[k] - r) as f64;
                }
                rest[k] -= a;
            }
            if factor != 0.0 {
                *terms.entry(rest).or_insert(0.0) += factor;
            }
        }
        terms.retain(|_, c: &mut f64| *c != 0.0);
        Ok(HomogPoly { nvars: self.nvars, degree: self.degree - order, terms })
    }

    /// Set `z = 1` (variable 0) and read off a multiaffine polynomial in the
    /// remaining variables. Fails if some remaining exponent exceeds one.
    pub fn dehomogenize(&self) -> Result<MultiAffinePoly> {
        let m = self.nvars.saturating_sub(1);
        let mut coeffs = vec![0.0; 1 << m];
        for (e, &c) in &self.terms {
            let mut mask = 0usize;
            for (i, &k) in e[1..].iter().enumerate() {
                match k {
                    0 => {}
                    1 => mask |= 1 << i,
                    _ => {
                        return Err(Error::Domain(format!(
                            "exponent {k} on variable {} is not multiaffine",
                            i + 1
                        )))
                    }
                }
            }
            coeffs[mask] += c;
        }
        MultiAffinePoly::new(m, coeffs)
    }

    pub fn to_json(&self) -> PolyJson {
        let vars = if self.nvars == 0 {
            Vec::new()
        } else {
            std::iter::once("z".to_string()).chain((1..self.nvars).map(|i| format!("x{}", i - 1))).collect()
        };
        let terms = self.terms.iter().map(|(e, &coeff)| TermJson { exp: e.clone(), coeff }).collect();
        PolyJson { vars, terms }
    }
}

/// `h(z, x) = z^m g(x / z)`; variable 0 is `z`, variable `e + 1` is `x_e`.
pub fn homogenize(poly: &MultiAffinePoly) -> HomogPoly {
    let m = poly.m;
    let mut terms = BTreeMap::new();
    for (mask, &c) in poly.coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut exp = Vec::with_capacity(m + 1);
        exp.push((m as u32) - mask.count_ones());
        exp.extend((0..m).map(|i| (mask >> i & 1) as u32));
        terms.insert(exp, c);
    }
    HomogPoly { nvars: m + 1, degree: m as u32, terms }
}

pub fn homog_partial(h: &HomogPoly, i: usize) -> Result<HomogPoly> {
    if h.degree == 0 {
        return Err(Error::DegreeZero);
    }
    if i >= h.nvars {
        return Err(Error::VariableOutOfRange { index: i, nvars: h.nvars });
    }
    let mut alpha = vec![0; h.nvars];
    alpha[i] = 1;
    h.derivative(&alpha)
}

/// JSON emission format: exponents are listed in variable order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub vars: Vec<String>,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub coeff: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::{bernoulli_distribution, markov_distribution, BernoulliParams, MarkovParams};
    use approx::assert_relative_eq;

    fn quarter_square() -> MultiAffinePoly {
        MultiAffinePoly::new(2, vec![0.25; 4]).unwrap()
    }

    #[test]
    fn bernoulli_fair_coins() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let d = bernoulli_distribution(&g, &BernoulliParams::new(vec![0.5, 0.5]).unwrap()).unwrap();
        let poly = generating_polynomial(&d, true);
        for c in poly.coeffs() {
            assert_relative_eq!(*c, 0.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn evaluation() {
        let g = MultiAffinePoly::from_terms(2, &[(0, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(g.evaluate(&[2.0, 3.0]).unwrap(), 3.5);
        assert!(matches!(g.evaluate(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));

        let d = markov_distribution(&Graph::complete(3), &MarkovParams::new(1.3, 0.4, vec![-0.7, 1.1]).unwrap())
            .unwrap();
        let p = generating_polynomial(&d, true);
        assert_relative_eq!(p.evaluate(&[1.0; 3]).unwrap(), 1.0, max_relative = 1e-14);
        assert_eq!(p.evaluate(&[0.0; 3]).unwrap(), d.prob(0));
    }

    #[test]
    fn partials() {
        let d1 = quarter_square().partial(0).unwrap();
        assert_eq!(d1.coeffs(), &[0.25, 0.0, 0.25, 0.0]);
        assert!(d1.partial(0).unwrap().coeffs().iter().all(|c| *c == 0.0));

        let g = MultiAffinePoly::from_terms(2, &[(0, 0.5), (3, 0.5)]).unwrap();
        let mixed = g.partial(0).unwrap().partial(1).unwrap();
        assert_eq!(mixed.coeffs(), &[0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(g.partial(2), Err(Error::VariableOutOfRange { index: 2, nvars: 2 })));
    }

    #[test]
    fn pair_coefficients_match_partials() {
        let coeffs: Vec<f64> = (0..32).map(|i| ((i * 37 % 11) as f64) - 4.0).collect();
        let g = MultiAffinePoly::new(5, coeffs).unwrap();
        let x = [0.7, -1.3, 2.1, 0.4, -0.9];
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let mut x0 = x;
                x0[i] = 0.0;
                x0[j] = 0.0;
                let [a, b, c, d] = g.pair_coefficients(&x, i, j).unwrap();
                assert_relative_eq!(a, g.evaluate(&x0).unwrap(), max_relative = 1e-12);
                assert_relative_eq!(b, g.partial(i).unwrap().evaluate(&x0).unwrap(), max_relative = 1e-12);
                assert_relative_eq!(c, g.partial(j).unwrap().evaluate(&x0).unwrap(), max_relative = 1e-12);
                let dij = g.partial(i).unwrap().partial(j).unwrap();
                assert_relative_eq!(d, dij.evaluate(&x0).unwrap(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn homogenize_linear() {
        let g = MultiAffinePoly::new(1, vec![0.7, 0.3]).unwrap();
        let h = homogenize(&g);
        assert_eq!(h.degree(), 1);
        assert_eq!(h.coeff(&[1, 0]), 0.7);
        assert_eq!(h.coeff(&[0, 1]), 0.3);
        assert_eq!(h.dehomogenize().unwrap(), g);
    }

    fn uniform_k3() -> HomogPoly {
        let d = markov_distribution(&Graph::complete(3), &MarkovParams::zero(2)).unwrap();
        homogenize(&generating_polynomial(&d, true))
    }

    // (z + x1)(z + x2)(z + x3) / 8 expanded by brute force over the choices
    // of z or x_i in each factor.
    fn expanded_product(factors: &[usize], nvars: usize, scale: f64) -> BTreeMap<Vec<u32>, f64> {
        let mut out = BTreeMap::new();
        for choice in 0..1usize << factors.len() {
            let mut e = vec![0u32; nvars];
            for (f, &xi) in factors.iter().enumerate() {
                if choice >> f & 1 == 1 {
                    e[xi] += 1;
                } else {
                    e[0] += 1;
                }
            }
            *out.entry(e).or_insert(0.0) += scale;
        }
        out
    }

    #[test]
    fn uniform_k3_is_product_of_linear_forms() {
        let h = uniform_k3();
        assert_eq!(h.degree(), 3);
        let want = expanded_product(&[1, 2, 3], 4, 0.125);
        assert_eq!(h.terms().len(), want.len());
        for (e, c) in &want {
            assert_relative_eq!(h.coeff(e), *c, max_relative = 1e-14);
        }
    }

    #[test]
    fn homog_partial_z() {
        let h = uniform_k3();
        let dz = homog_partial(&h, 0).unwrap();
        let mut want: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for pair in [[2usize, 3], [1, 3], [1, 2]] {
            for (e, c) in expanded_product(&pair, 4, 0.125) {
                *want.entry(e).or_insert(0.0) += c;
            }
        }
        assert_eq!(dz.degree(), 2);
        assert_eq!(dz.terms().len(), want.len());
        for (e, c) in &want {
            assert_relative_eq!(dz.coeff(e), *c, max_relative = 1e-14);
        }

        let cube = HomogPoly::new(1, 3, [(vec![3], 1.0)]).unwrap();
        let d = homog_partial(&cube, 0).unwrap();
        assert_eq!(d.coeff(&[2]), 3.0);
        let constant = HomogPoly::new(1, 0, [(vec![0], 1.0)]).unwrap();
        assert!(matches!(homog_partial(&constant, 0), Err(Error::DegreeZero)));
    }

    #[test]
    fn euler_identity() {
        let h = uniform_k3();
        let x = [0.3, -1.2, 2.5, 0.9];
        let lhs: f64 = (0..4).map(|i| x[i] * homog_partial(&h, i).unwrap().evaluate(&x).unwrap()).sum();
        assert_relative_eq!(lhs, 3.0 * h.evaluate(&x).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn json_emission() {
        let j = homogenize(&MultiAffinePoly::new(1, vec![0.7, 0.3]).unwrap()).to_json();
        assert_eq!(j.vars, vec!["z", "x0"]);
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(text, r#"{"vars":["z","x0"],"terms":[{"exp":[0,1],"coeff":0.3},{"exp":[1,0],"coeff":0.7}]}"#);
    }
}
