//! Simple undirected graphs with stable edge indexing, spanning-subgraph
//! statistics, and homomorphism counts/densities for triangles and k-stars.
//!
//! Densities are exact rationals. Floating point only enters later, when
//! model exponents are turned into weights.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Exact homomorphism density.
pub type Density = Ratio<i128>;

/// A simple undirected graph. Edge `i` is `edges()[i]`; the order is the
/// order of construction and never changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge(u, v));
            }
        }
        Ok(Graph { n, edges, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Complete graph on `n` vertices, edges in lexicographic order.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph { n, edges, labels: None }
    }

    /// Complete graph on the same vertex set, keeping labels.
    pub fn complete_on_vertices(&self) -> Self {
        let mut g = Graph::complete(self.n);
        g.labels = self.labels.clone();
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> Result<(usize, usize)> {
        self.edges
            .get(index)
            .copied()
            .ok_or(Error::EdgeOutOfRange { index, m: self.m() })
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(l) => l[v].clone(),
            None => v.to_string(),
        }
    }

    pub fn full_subset(&self) -> EdgeSubset {
        EdgeSubset::full(self.m())
    }

    pub fn empty_subset(&self) -> EdgeSubset {
        EdgeSubset::empty(self.m())
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn has_triangle(&self) -> bool {
        spanning_stats(self, &self.full_subset())
            .map(|s| s.triangles > 0)
            .unwrap_or(false)
    }

    /// True if some vertex has degree at least 3.
    pub fn has_three_star(&self) -> bool {
        self.max_degree() >= 3
    }

    /// Whitespace-separated edge list. Every vertex is first declared on its
    /// own line so that reloading reproduces vertex and edge order exactly.
    pub fn to_edgelist(&self) -> String {
        let mut out = String::new();
        for v in 0..self.n {
            let _ = writeln!(out, "{}", self.label(v));
        }
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{} {}", self.label(u), self.label(v));
        }
        out
    }

    /// Graphviz rendering; vertices are shaded by degree.
    pub fn to_dot(&self, name: &str) -> String {
        let degrees = self.degrees();
        let max = degrees.iter().copied().max().unwrap_or(0).max(1);
        let mut out = String::new();
        let _ = writeln!(out, "graph \"{}\" {{", name.replace('"', "'"));
        let _ = writeln!(out, "  node [style=filled, shape=circle, fontsize=10];");
        for (v, &d) in degrees.iter().enumerate() {
            // Light to dark blue as degree grows.
            let level = 0.15 + 0.85 * (d as f64 / max as f64);
            let _ = writeln!(
                out,
                "  v{} [label=\"{}\", fillcolor=\"0.6 {:.3} 1.0\", degree={}];",
                v,
                self.label(v).replace('"', "'"),
                level,
                d
            );
        }
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "  v{u} -- v{v};");
        }
        out.push_str("}\n");
        out
    }
}

/// A subset of the edge slots of a host graph, one bit per edge index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSubset {
    m: usize,
    words: Vec<u64>,
}

impl EdgeSubset {
    pub fn empty(m: usize) -> Self {
        EdgeSubset { m, words: vec![0; m.div_ceil(64)] }
    }

    pub fn full(m: usize) -> Self {
        let mut s = Self::empty(m);
        for i in 0..m {
            s.insert(i);
        }
        s
    }

    /// Subset from a bit mask; only valid for `m <= 64`.
    pub fn from_mask(mask: u64, m: usize) -> Self {
        assert!(m <= 64, "from_mask needs m <= 64");
        let mut s = Self::empty(m);
        if m > 0 {
            let keep = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
            s.words[0] = mask & keep;
        }
        s
    }

    pub fn from_indices(m: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::empty(m);
        for &i in indices {
            if i >= m {
                return Err(Error::EdgeOutOfRange { index: i, m });
            }
            s.insert(i);
        }
        Ok(s)
    }

    /// Low 64 bits of the subset.
    pub fn mask(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    pub fn slots(&self) -> usize {
        self.m
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.m && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.m);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.m);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn set(&mut self, i: usize, present: bool) {
        if present {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).filter(move |&i| self.contains(i))
    }

    fn check_host(&self, g: &Graph) -> Result<()> {
        if self.m != g.m() {
            return Err(Error::SubsetMismatch { subset: self.m, host: g.m() });
        }
        Ok(())
    }
}

/// Degree sequence and triangle count of a spanning subgraph `(V, S)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphStats {
    pub degrees: Vec<u32>,
    pub triangles: u64,
    pub edge_count: usize,
}

impl SubgraphStats {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

pub fn spanning_stats(g: &Graph, s: &EdgeSubset) -> Result<SubgraphStats> {
    s.check_host(g)?;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
    for i in s.iter() {
        let (u, v) = g.edges[i];
        adj[u].push(v);
        adj[v].push(u);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let degrees: Vec<u32> = adj.iter().map(|l| l.len() as u32).collect();
    let mut triangles = 0u64;
    for i in s.iter() {
        let (a, b) = g.edges[i];
        let (u, v) = (a.min(b), a.max(b));
        // Count each triangle once, at its two smallest vertices.
        triangles += sorted_common(&adj[u], &adj[v], |w| w > v);
    }
    Ok(SubgraphStats { degrees, triangles, edge_count: s.len() })
}

fn sorted_common(a: &[usize], b: &[usize], keep: impl Fn(usize) -> bool) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if keep(a[i]) {
                    count += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// `|Hom(S_k, G_S)| = sum_v deg(v)^k`.
pub fn hom_count_kstar(stats: &SubgraphStats, k: u32) -> Result<u128> {
    if k == 0 {
        return Err(Error::InvalidStarOrder(k));
    }
    stats.degrees.iter().try_fold(0u128, |acc, &d| {
        (d as u128)
            .checked_pow(k)
            .and_then(|p| acc.checked_add(p))
            .ok_or(Error::Overflow("k-star homomorphism count"))
    })
}

/// `|Hom(triangle, G_S)| = 6 * #triangles`.
pub fn hom_count_triangle(stats: &SubgraphStats) -> u128 {
    6 * stats.triangles as u128
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motif {
    Triangle,
    KStar(u32),
}

impl Motif {
    pub fn vertex_count(self) -> u32 {
        match self {
            Motif::Triangle => 3,
            Motif::KStar(k) => k + 1,
        }
    }
}

pub fn hom_density(g: &Graph, s: &EdgeSubset, motif: Motif) -> Result<Density> {
    density_from_stats(&spanning_stats(g, s)?, motif)
}

/// Homomorphism density from precomputed stats; the vertex count is the
/// length of the degree sequence.
pub fn density_from_stats(stats: &SubgraphStats, motif: Motif) -> Result<Density> {
    let count = match motif {
        Motif::Triangle => hom_count_triangle(stats),
        Motif::KStar(k) => hom_count_kstar(stats, k)?,
    };
    let denom = (stats.n() as u128)
        .checked_pow(motif.vertex_count())
        .ok_or(Error::Overflow("homomorphism density denominator"))?;
    ratio(count, denom)
}

fn ratio(num: u128, den: u128) -> Result<Density> {
    let num = i128::try_from(num).map_err(|_| Error::Overflow("density numerator"))?;
    let den = i128::try_from(den).map_err(|_| Error::Overflow("density denominator"))?;
    if den == 0 {
        return Ok(Density::zero());
    }
    Ok(Density::new(num, den))
}

/// Change in `(t(S_1), .., t(S_K), t(triangle))` from adding edge `e` to `s`.
/// If `e` is already in `s`, the result is the change from removing it.
pub fn edge_toggle_delta(g: &Graph, s: &EdgeSubset, e: usize, max_star: u32) -> Result<Vec<Density>> {
    s.check_host(g)?;
    if max_star == 0 {
        return Err(Error::InvalidStarOrder(0));
    }
    let (u, v) = g.edge(e)?;
    let removing = s.contains(e);
    let mut base = s.clone();
    base.remove(e);
    let stats = spanning_stats(g, &base)?;
    let (du, dv) = (stats.degrees[u] as u128, stats.degrees[v] as u128);
    let n = g.n() as u128;

    let mut out = Vec::with_capacity(max_star as usize + 1);
    for k in 1..=max_star {
        let pow = |x: u128| x.checked_pow(k).ok_or(Error::Overflow("toggle delta"));
        let num = pow(du + 1)? - pow(du)? + pow(dv + 1)? - pow(dv)?;
        let den = n.checked_pow(k + 1).ok_or(Error::Overflow("toggle delta"))?;
        out.push(ratio(num, den)?);
    }
    let common = common_neighbours(g, &base, u, v);
    out.push(ratio(6 * common as u128, n.pow(3))?);

    if removing {
        for d in &mut out {
            *d = -*d;
        }
    }
    Ok(out)
}

fn common_neighbours(g: &Graph, s: &EdgeSubset, u: usize, v: usize) -> u64 {
    let mut nu = vec![false; g.n()];
    for i in s.iter() {
        let (a, b) = g.edges[i];
        if a == u {
            nu[b] = true;
        } else if b == u {
            nu[a] = true;
        }
    }
    s.iter()
        .filter_map(|i| {
            let (a, b) = g.edges[i];
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
        .filter(|&w| nu[w])
        .count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Density {
        Density::new(n, d)
    }

    // K3 with edges labelled 1, 2, 3 in the worked example map to 0, 1, 2.
    fn k3() -> Graph {
        Graph::complete(3)
    }

    #[test]
    fn k3_stats() {
        let g = k3();
        let two = EdgeSubset::from_indices(3, &[0, 1]).unwrap();
        let s = spanning_stats(&g, &two).unwrap();
        let mut d = s.degrees.clone();
        d.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(d, vec![2, 1, 1]);
        assert_eq!(s.triangles, 0);

        let s = spanning_stats(&g, &g.empty_subset()).unwrap();
        assert_eq!(s.degrees, vec![0, 0, 0]);
        assert_eq!(s.triangles, 0);

        let s = spanning_stats(&g, &g.full_subset()).unwrap();
        assert_eq!(s.degrees, vec![2, 2, 2]);
        assert_eq!(s.triangles, 1);
    }

    #[test]
    fn kstar_counts() {
        let st = |d: Vec<u32>| SubgraphStats { edge_count: 0, triangles: 0, degrees: d };
        assert_eq!(hom_count_kstar(&st(vec![1, 1, 0]), 1).unwrap(), 2);
        assert_eq!(hom_count_kstar(&st(vec![2, 1, 1]), 2).unwrap(), 6);
        assert_eq!(hom_count_kstar(&st(vec![0; 5]), 7).unwrap(), 0);
        assert!(matches!(hom_count_kstar(&st(vec![1]), 0), Err(Error::InvalidStarOrder(0))));
        assert!(matches!(
            hom_count_kstar(&st(vec![u32::MAX; 4]), 5),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn triangle_counts() {
        let g = k3();
        let full = spanning_stats(&g, &g.full_subset()).unwrap();
        assert_eq!(hom_count_triangle(&full), 6);
        let path = spanning_stats(&g, &EdgeSubset::from_indices(3, &[0, 2]).unwrap()).unwrap();
        assert_eq!(hom_count_triangle(&path), 0);
    }

    #[test]
    fn k4_triangle_homs_match_brute_force() {
        let g = Graph::complete(4);
        let stats = spanning_stats(&g, &g.full_subset()).unwrap();
        // Every map of the 3-cycle into K4 that sends each edge to an edge.
        let adj = |a: usize, b: usize| a != b;
        let mut brute = 0u128;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    if adj(a, b) && adj(b, c) && adj(c, a) {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(brute, 24);
        assert_eq!(hom_count_triangle(&stats), brute);
    }

    #[test]
    fn k3_densities() {
        let g = k3();
        let one = EdgeSubset::from_indices(3, &[0]).unwrap();
        let two = EdgeSubset::from_indices(3, &[0, 1]).unwrap();
        assert_eq!(hom_density(&g, &one, Motif::KStar(1)).unwrap(), r(2, 9));
        assert_eq!(hom_density(&g, &two, Motif::KStar(2)).unwrap(), r(6, 27));
        assert_eq!(hom_density(&g, &g.full_subset(), Motif::Triangle).unwrap(), r(6, 27));
    }

    #[test]
    fn toggle_deltas_on_k3() {
        let g = k3();
        let d = edge_toggle_delta(&g, &g.empty_subset(), 0, 2).unwrap();
        assert_eq!(d, vec![r(2, 9), r(2, 27), r(0, 1)]);

        let s = EdgeSubset::from_indices(3, &[0, 1]).unwrap();
        let d = edge_toggle_delta(&g, &s, 2, 2).unwrap();
        assert_eq!(d, vec![r(2, 9), r(6, 27), r(6, 27)]);

        // Removing edge 2 from the full graph undoes the addition above.
        let back = edge_toggle_delta(&g, &g.full_subset(), 2, 2).unwrap();
        let net: Vec<Density> = d.iter().zip(&back).map(|(a, b)| a + b).collect();
        assert!(net.iter().all(|x| x.is_zero()));

        assert!(matches!(
            edge_toggle_delta(&g, &s, 3, 2),
            Err(Error::EdgeOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn complete_graph_edge_homs() {
        for n in 2..8 {
            let g = Graph::complete(n);
            let s = spanning_stats(&g, &g.full_subset()).unwrap();
            assert_eq!(hom_count_kstar(&s, 1).unwrap(), (n * (n - 1)) as u128);
        }
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(matches!(Graph::new(3, vec![(1, 1)]), Err(Error::SelfLoop(1))));
        assert!(matches!(Graph::new(3, vec![(0, 1), (1, 0)]), Err(Error::DuplicateEdge(1, 0))));
        assert!(matches!(
            Graph::new(2, vec![(0, 2)]),
            Err(Error::VertexOutOfRange { vertex: 2, n: 2 })
        ));
        let g = k3();
        assert!(matches!(
            spanning_stats(&g, &EdgeSubset::empty(4)),
            Err(Error::SubsetMismatch { .. })
        ));
    }

    #[test]
    fn dot_export_mentions_every_edge() {
        let g = Graph::complete(4);
        let dot = g.to_dot("k4");
        assert!(dot.starts_with("graph \"k4\""));
        assert_eq!(dot.matches(" -- ").count(), 6);
    }
}
