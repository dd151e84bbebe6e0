use ergm_geometry::datasets::parse_edgelist;
use ergm_geometry::genpoly::MultiAffinePoly;
use ergm_geometry::inference::{sample_suffstats, subgraph_suffstats, ChainConfig, GlauberChain};
use ergm_geometry::lorentzian::{is_lorentzian_distribution, LorentzFailure};
use ergm_geometry::model::energy_exponent;
use ergm_geometry::stability::{falsify_stability, negative_lattice_check, wagner_gap, StabilityOutcome};
use ergm_geometry::{
    bernoulli_distribution, generating_polynomial, homog_partial, homogenize, markov_distribution, BernoulliParams,
    EdgeSubset, Graph, MarkovParams,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

fn markov(max_star: usize) -> impl Strategy<Value = MarkovParams> {
    (0.3f64..3.0, -3.0f64..3.0, prop::collection::vec(-3.0f64..3.0, max_star))
        .prop_map(|(t, b, s)| MarkovParams::new(t, b, s).unwrap())
}

fn small_host() -> impl Strategy<Value = (Graph, MarkovParams)> {
    prop_oneof![
        (Just(Graph::complete(3)), 1usize..=2),
        (Just(Graph::complete(4)), 1usize..=3),
    ]
    .prop_flat_map(|(g, k)| (Just(g), markov(k)))
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

/// `bc - ad` with every product and sum done exactly on the f64 inputs.
fn exact_gap(poly: &MultiAffinePoly, x: &[f64], i: usize, j: usize) -> BigRational {
    let (bi, bj) = (1usize << i, 1usize << j);
    let mut q = [BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero()];
    let point: Vec<BigRational> = x.iter().map(|&v| exact(v)).collect();
    for s in 0..1usize << poly.nvars() {
        if s & (bi | bj) != 0 {
            continue;
        }
        let mut w = BigRational::from_integer(BigInt::from(1));
        for (k, v) in point.iter().enumerate() {
            if s >> k & 1 == 1 {
                w *= v;
            }
        }
        for (slot, mask) in [s, s | bi, s | bj, s | bi | bj].into_iter().enumerate() {
            q[slot] += exact(poly.coeff(mask)) * &w;
        }
    }
    &q[1] * &q[2] - &q[0] * &q[3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn probabilities_sum_to_one((g, p) in small_host()) {
        let dist = markov_distribution(&g, &p).unwrap();
        let total: f64 = dist.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let poly = generating_polynomial(&dist, true);
        prop_assert!((poly.evaluate(&vec![1.0; g.m()]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_is_symmetric_in_the_pair((g, p) in small_host(), x in prop::collection::vec(-20.0f64..20.0, 6), i in 0usize..6, j in 0usize..6) {
        let m = g.m();
        let (i, j) = (i % m, j % m);
        prop_assume!(i != j);
        let poly = generating_polynomial(&markov_distribution(&g, &p).unwrap(), true);
        let x = &x[..m];
        prop_assert_eq!(wagner_gap(&poly, x, i, j).unwrap(), wagner_gap(&poly, x, j, i).unwrap());
    }

    #[test]
    fn bernoulli_gap_vanishes(p in prop::collection::vec(0.0f64..=1.0, 5), x in prop::collection::vec(-50.0f64..50.0, 5), i in 0usize..5, j in 0usize..5) {
        prop_assume!(i != j);
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let dist = bernoulli_distribution(&g, &BernoulliParams::new(p).unwrap()).unwrap();
        let poly = generating_polynomial(&dist, true);
        let [a, b, c, d] = poly.pair_coefficients(&x, i, j).unwrap();
        let gap = wagner_gap(&poly, &x, i, j).unwrap();
        prop_assert!(gap.abs() <= 1e-12 * 1f64.max((b * c).abs()).max((a * d).abs()));
    }

    #[test]
    fn mixed_partials_commute((g, p) in small_host(), i in 0usize..7, j in 0usize..7) {
        let h = homogenize(&generating_polynomial(&markov_distribution(&g, &p).unwrap(), false));
        let (i, j) = (i % h.nvars(), j % h.nvars());
        let ij = homog_partial(&homog_partial(&h, i).unwrap(), j).unwrap();
        let ji = homog_partial(&homog_partial(&h, j).unwrap(), i).unwrap();
        prop_assert_eq!(ij.terms().len(), ji.terms().len());
        for (e, c) in ij.terms() {
            let d = ji.coeff(e);
            prop_assert!((c - d).abs() <= 1e-12 * c.abs().max(d.abs()));
        }
    }

    #[test]
    fn positive_distributions_fail_only_on_signatures((g, p) in small_host()) {
        let dist = markov_distribution(&g, &p).unwrap();
        prop_assert!(dist.is_positive());
        let v = is_lorentzian_distribution(&dist, 1e-9).unwrap();
        let signature_stage = matches!(v.failure, None | Some(LorentzFailure::SignatureFailure { .. }));
        prop_assert!(signature_stage);
        prop_assert_eq!(v.is_lorentzian(), v.margin.unwrap() <= 1e-9);
    }

    #[test]
    fn glauber_detailed_balance((g, p) in small_host(), mask in 0u64..64, e in 0usize..6) {
        let m = g.m();
        let s = EdgeSubset::from_mask(mask & ((1 << m) - 1), m);
        let e = e % m;
        let dist = markov_distribution(&g, &p).unwrap();
        let chain = GlauberChain::new(&g, &p, s.clone()).unwrap();
        let sigma = |z: f64| 1.0 / (1.0 + (-z).exp());
        let lo = chain.log_odds(e);
        let mut t = s.clone();
        t.set(e, !s.contains(e));
        // P(s -> t) = sigma(+-lo) / m, with the sign set by the target state.
        let fwd = if t.contains(e) { sigma(lo) } else { sigma(-lo) };
        let back = if s.contains(e) { sigma(lo) } else { sigma(-lo) };
        let lhs = dist.prob(s.mask() as usize) * fwd;
        let rhs = dist.prob(t.mask() as usize) * back;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
    }

    #[test]
    fn chain_log_odds_are_energy_differences((g, p) in small_host(), mask in 0u64..64) {
        let m = g.m();
        let s = EdgeSubset::from_mask(mask & ((1 << m) - 1), m);
        let chain = GlauberChain::new(&g, &p, s.clone()).unwrap();
        for e in 0..m {
            let (mut on, mut off) = (s.clone(), s.clone());
            on.insert(e);
            off.remove(e);
            let want = energy_exponent(&g, &on, &p).unwrap() - energy_exponent(&g, &off, &p).unwrap();
            prop_assert!((chain.log_odds(e) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        let direct = subgraph_suffstats(&g, &s, p.max_star(), p.star_bound).unwrap();
        prop_assert_eq!(chain.stats(), direct);
    }

    #[test]
    fn edgelist_round_trip(n in 2usize..9, bits in any::<u64>()) {
        let all = Graph::complete(n);
        let edges: Vec<_> = all.edges().iter().enumerate().filter(|(i, _)| bits >> (i % 64) & 1 == 1).map(|(_, e)| *e).collect();
        let labels = (0..n).map(|v| format!("v{v}")).collect();
        let g = Graph::new(n, edges).unwrap().with_labels(labels).unwrap();
        let back = parse_edgelist(&g.to_edgelist()).unwrap();
        prop_assert_eq!(back.duplicates, 0);
        prop_assert_eq!(back.graph.n(), g.n());
        prop_assert_eq!(back.graph.m(), g.m());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// NLC is necessary for real stability, so an NLC failure must be
    /// matched by a Wagner violation, which must survive exact arithmetic.
    #[test]
    fn nlc_failure_implies_violation((g, p) in small_host(), seed in any::<u64>()) {
        let dist = markov_distribution(&g, &p).unwrap();
        let poly = generating_polynomial(&dist, true);
        let v = falsify_stability(&poly, 1_000_000, seed);
        if !negative_lattice_check(&dist).unwrap().passed() {
            prop_assert_eq!(v.outcome, StabilityOutcome::Violation);
        }
        if let Some(w) = &v.witness {
            prop_assert!(w.gap < 0.0);
            prop_assert!(exact_gap(&poly, &w.point, w.i, w.j).is_negative());
        }
    }

    #[test]
    fn falsifier_is_deterministic((g, p) in small_host(), seed in any::<u64>()) {
        let poly = generating_polynomial(&markov_distribution(&g, &p).unwrap(), true);
        prop_assert_eq!(falsify_stability(&poly, 20_000, seed), falsify_stability(&poly, 20_000, seed));
    }

    #[test]
    fn sampler_is_deterministic((g, p) in small_host(), seed in any::<u64>()) {
        let cfg = ChainConfig::new(200, 20, 1, seed).unwrap();
        prop_assert_eq!(sample_suffstats(&g, &p, &cfg).unwrap(), sample_suffstats(&g, &p, &cfg).unwrap());
    }
}
