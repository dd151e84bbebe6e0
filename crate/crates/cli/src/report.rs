//! Command implementations and report rendering.

use std::fmt::Write as _;

use ergm_geometry::datasets::{load_dataset, load_edgelist, DATASETS};
use ergm_geometry::genpoly::{generating_polynomial, homogenize};
use ergm_geometry::inference::{
    edge_only_init, exact_expected_stats_with_cap, fit_stochastic_approximation, sample_suffstats_chains,
    subgraph_suffstats, ChainConfig, FitOptions, GainSchedule,
};
use ergm_geometry::lorentzian::is_lorentzian_distribution_with_cap;
use ergm_geometry::model::{markov_distribution_with_cap, StarBound};
use ergm_geometry::stability::{
    check_sr_necessary, cubic_sr_exact, cubic_wagner_quadratic, negative_lattice_check_with_cap, sr_verdict_cubic,
    stability_verdict, ConditionStatus, NecessaryReport, NlcVerdict, StabilityOutcome, CUBIC_EQUALITY_TOLERANCE,
    VIOLATION_TOLERANCE,
};
use ergm_geometry::{Graph, MarkovParams};
use serde_json::{json, Value};

use crate::{bail_usage, GraphArgs, Which};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Holds,
    Refuted,
    Undetermined,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Holds => 0,
            Outcome::Refuted => 1,
            Outcome::Undetermined => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Outcome::Holds => "holds",
            Outcome::Refuted => "refuted",
            Outcome::Undetermined => "undetermined",
        }
    }

    fn combine(outcomes: impl IntoIterator<Item = Outcome>) -> Outcome {
        let all: Vec<Outcome> = outcomes.into_iter().collect();
        if all.contains(&Outcome::Refuted) {
            Outcome::Refuted
        } else if all.contains(&Outcome::Undetermined) {
            Outcome::Undetermined
        } else {
            Outcome::Holds
        }
    }
}

pub struct Rendered {
    pub text: String,
    pub json: Value,
    pub outcome: Outcome,
}

fn input<T>(r: ergm_geometry::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| bail_usage(e.to_string()))
}

struct Loaded {
    graph: Graph,
    source: String,
}

fn load_graph(a: &GraphArgs) -> anyhow::Result<Loaded> {
    if let Some(path) = &a.graph {
        let list = input(load_edgelist(path))?;
        if list.duplicates > 0 {
            eprintln!("warning: {} duplicate edge(s) collapsed in {}", list.duplicates, path.display());
        }
        return Ok(Loaded { graph: list.graph, source: format!("file:{}", path.display()) });
    }
    if let Some(id) = &a.dataset {
        let graph = input(load_dataset(id, a.data_dir.as_deref()))?;
        return Ok(Loaded { graph, source: format!("dataset:{id}") });
    }
    if let Some(n) = a.complete {
        return Ok(Loaded { graph: Graph::complete(n), source: format!("complete:{n}") });
    }
    Err(bail_usage("one of --graph, --dataset or --complete is required"))
}

fn graph_echo(l: &Loaded) -> Value {
    json!({ "source": l.source, "n": l.graph.n(), "m": l.graph.m() })
}

fn graph_line(l: &Loaded) -> String {
    format!("graph: {} (n={}, m={})\n", l.source, l.graph.n(), l.graph.m())
}

fn params_line(p: &MarkovParams) -> String {
    let bound = match p.star_bound {
        StarBound::SubgraphMaxDegree => "",
        StarBound::All => ", star_bound=all",
    };
    format!("params: T={} beta_triangle={} beta_stars={:?}{bound}\n", p.temperature, p.beta_triangle, p.beta_stars)
}

fn announce_enumeration(m: usize) {
    if m > 16 {
        let bytes = (1u64 << m) as f64 * 16.0;
        eprintln!("enumerating 2^{m} subsets, about {:.1} MiB", bytes / (1024.0 * 1024.0));
    }
}

fn subset_label(mask: usize, m: usize) -> String {
    let idx: Vec<String> = (0..m).filter(|e| mask >> e & 1 == 1).map(|e| e.to_string()).collect();
    format!("{{{}}}", idx.join(","))
}

pub fn enumerate(g: &GraphArgs, p: &MarkovParams, cap: usize) -> anyhow::Result<Rendered> {
    let l = load_graph(g)?;
    input(ergm_geometry::model::check_cap(l.graph.m(), cap))?;
    announce_enumeration(l.graph.m());
    let dist = input(markov_distribution_with_cap(&l.graph, p, cap))?;
    let m = l.graph.m();
    let mut text = graph_line(&l) + &params_line(p);
    let _ = writeln!(text, "log_z: {}", dist.log_z());
    let _ = writeln!(text, "{:<24} {:<24} probability", "subset", "exponent");
    let mut rows = Vec::with_capacity(1 << m);
    for mask in 0..1usize << m {
        let label = subset_label(mask, m);
        let _ = writeln!(text, "{:<24} {:<24} {}", label, dist.log_weight(mask), dist.prob(mask));
        rows.push(json!({
            "subset": (0..m).filter(|e| mask >> e & 1 == 1).collect::<Vec<_>>(),
            "exponent": dist.log_weight(mask),
            "probability": dist.prob(mask),
        }));
    }
    let json = json!({
        "command": "enumerate",
        "tool_version": VERSION,
        "graph": graph_echo(&l),
        "params": p,
        "max_edges": cap,
        "log_z": dist.log_z(),
        "rows": rows,
    });
    Ok(Rendered { text, json, outcome: Outcome::Holds })
}

pub fn poly(g: &GraphArgs, p: &MarkovParams, homog: bool, cap: usize) -> anyhow::Result<Rendered> {
    let l = load_graph(g)?;
    input(ergm_geometry::model::check_cap(l.graph.m(), cap))?;
    announce_enumeration(l.graph.m());
    let dist = input(markov_distribution_with_cap(&l.graph, p, cap))?;
    let g = generating_polynomial(&dist, true);
    let poly = if homog { homogenize(&g).to_json() } else { g.to_json() };
    let mut text = graph_line(&l) + &params_line(p);
    let _ = writeln!(text, "variables: {}", poly.vars.join(" "));
    for t in &poly.terms {
        let mono: Vec<String> = t
            .exp
            .iter()
            .zip(&poly.vars)
            .filter(|(k, _)| **k > 0)
            .map(|(k, v)| if *k == 1 { v.clone() } else { format!("{v}^{k}") })
            .collect();
        let mono = if mono.is_empty() { "1".to_string() } else { mono.join("*") };
        let _ = writeln!(text, "{} {}", t.coeff, mono);
    }
    let json = json!({
        "command": "poly",
        "tool_version": VERSION,
        "graph": graph_echo(&l),
        "params": p,
        "homogenized": homog,
        "polynomial": poly,
    });
    Ok(Rendered { text, json, outcome: Outcome::Holds })
}

fn skipped(reason: impl Into<String>) -> Value {
    json!({ "skipped": reason.into() })
}

fn condition_name(s: ConditionStatus) -> &'static str {
    match s {
        ConditionStatus::Pass => "pass",
        ConditionStatus::Fail => "fail",
        ConditionStatus::NotApplicable => "not_applicable",
    }
}

fn necessary_text(r: &NecessaryReport) -> String {
    format!(
        "necessary_conditions: triangle_vs_two_star={} ({}); three_star_vs_two_star={} ({})\n",
        condition_name(r.triangle_vs_two_star.status),
        r.triangle_vs_two_star.detail,
        condition_name(r.three_star_vs_two_star.status),
        r.three_star_vs_two_star.detail
    )
}

pub fn check(
    g: &GraphArgs,
    p: &MarkovParams,
    which: Which,
    seed: u64,
    budget: u64,
    tol: f64,
    cap: usize,
) -> anyhow::Result<Rendered> {
    let l = load_graph(g)?;
    let host = &l.graph;
    let want = |w: Which| which == Which::All || which == w;
    let m = host.m();
    let enumerable = m <= cap && m < 63;
    let cap_reason = format!("graph has {m} edges, above the enumeration cap {cap}");
    let mut text = graph_line(&l) + &params_line(p);

    let dist = if enumerable && (want(Which::Stability) || want(Which::Lorentzian)) {
        announce_enumeration(m);
        Some(input(markov_distribution_with_cap(host, p, cap))?)
    } else {
        None
    };

    let mut properties = serde_json::Map::new();
    let mut outcomes = Vec::new();

    let (nlc, falsifier, closed, exact);
    if want(Which::Stability) {
        let mut parts = Vec::new();
        nlc = match &dist {
            Some(d) => {
                let v = input(negative_lattice_check_with_cap(d, cap))?;
                match &v {
                    NlcVerdict::Pass { method } => {
                        let _ = writeln!(text, "nlc: pass ({})", serde_json::to_value(method)?.as_str().unwrap_or(""));
                    }
                    NlcVerdict::Fail { s, t, lhs_log, rhs_log, .. } => {
                        parts.push(Outcome::Refuted);
                        let _ = writeln!(
                            text,
                            "nlc: fail at S={} T={} (log lhs {lhs_log} > log rhs {rhs_log})",
                            subset_label(*s, m),
                            subset_label(*t, m)
                        );
                    }
                }
                serde_json::to_value(&v)?
            }
            None => {
                let _ = writeln!(text, "nlc: skipped ({cap_reason})");
                skipped(cap_reason.clone())
            }
        };
        falsifier = match &dist {
            Some(d) => {
                let v = stability_verdict(&generating_polynomial(d, true), budget, seed);
                match v.outcome {
                    StabilityOutcome::Violation => {
                        parts.push(Outcome::Refuted);
                        let w = v.witness.as_ref().expect("violation carries a witness");
                        let _ = writeln!(
                            text,
                            "wagner_falsifier: violation at pair ({}, {}), gap {} (scale {}), start {}, {} evaluations",
                            w.i, w.j, w.gap, w.scale, w.start, v.budget_used
                        );
                    }
                    StabilityOutcome::CertifiedStable => {
                        parts.push(Outcome::Holds);
                        let _ = writeln!(
                            text,
                            "wagner_falsifier: certified stable ({})",
                            v.certificate.as_deref().unwrap_or("")
                        );
                    }
                    StabilityOutcome::NoViolationFound => {
                        let _ = writeln!(
                            text,
                            "wagner_falsifier: no violation found ({} of {budget} evaluations, seed {seed})",
                            v.budget_used
                        );
                    }
                }
                let mut j = serde_json::to_value(&v)?;
                j["seed"] = json!(seed);
                j["budget"] = json!(budget);
                j["tolerance"] = json!(VIOLATION_TOLERANCE);
                j
            }
            None => {
                let _ = writeln!(text, "wagner_falsifier: skipped ({cap_reason})");
                skipped(cap_reason.clone())
            }
        };
        let on_k3 = host.n() == 3 && host.m() == 3;
        let closed_ok = on_k3 && p.max_star() <= 2 && p.star_bound == StarBound::SubgraphMaxDegree;
        closed = if closed_ok {
            let v = input(sr_verdict_cubic(host, p))?;
            parts.push(if v.strongly_rayleigh { Outcome::Holds } else { Outcome::Refuted });
            let _ = writeln!(
                text,
                "sr_closed_form: {} ({} model; {})",
                if v.strongly_rayleigh { "SR" } else { "NotSR" },
                v.model,
                v.reason
            );
            let mut j = serde_json::to_value(&v)?;
            j["equality_tolerance"] = json!(CUBIC_EQUALITY_TOLERANCE);
            j
        } else {
            let reason = if on_k3 { "needs K <= 2 and the default star bound" } else { "host is not K3" };
            let _ = writeln!(text, "sr_closed_form: skipped ({reason})");
            skipped(reason)
        };
        exact = if closed_ok {
            let sr = input(cubic_sr_exact(p))?;
            let (a, b, c) = input(cubic_wagner_quadratic(p))?;
            let _ = writeln!(
                text,
                "sr_exact_k3: {} (gap quadratic {a} t^2 + {b} t + {c}; informational)",
                if sr { "SR" } else { "NotSR" }
            );
            json!({ "strongly_rayleigh": sr, "quadratic": [a, b, c] })
        } else {
            skipped(if on_k3 { "needs K <= 2 and the default star bound" } else { "host is not K3" })
        };
        let o = if parts.contains(&Outcome::Refuted) {
            Outcome::Refuted
        } else if parts.contains(&Outcome::Holds) {
            Outcome::Holds
        } else {
            Outcome::Undetermined
        };
        properties.insert("stability".into(), json!(o.name()));
        outcomes.push(o);
    } else {
        nlc = skipped("not requested");
        falsifier = skipped("not requested");
        closed = skipped("not requested");
        exact = skipped("not requested");
    }

    let lorentzian = if want(Which::Lorentzian) {
        match &dist {
            Some(d) => {
                let v = input(is_lorentzian_distribution_with_cap(d, tol, cap))?;
                let o = if v.is_lorentzian() { Outcome::Holds } else { Outcome::Refuted };
                let margin = v.margin.map(|x| format!(", margin {x:e}")).unwrap_or_default();
                let _ = writeln!(
                    text,
                    "lorentzian: {}{} ({} spectra checked{margin})",
                    if v.is_lorentzian() { "Lorentzian" } else { "NotLorentzian" },
                    v.failure.as_ref().map(|f| format!(" [{}]", failure_text(f))).unwrap_or_default(),
                    v.spectra_checked
                );
                properties.insert("lorentzian".into(), json!(o.name()));
                outcomes.push(o);
                serde_json::to_value(&v)?
            }
            None => {
                let _ = writeln!(text, "lorentzian: skipped ({cap_reason})");
                properties.insert("lorentzian".into(), json!(Outcome::Undetermined.name()));
                outcomes.push(Outcome::Undetermined);
                skipped(cap_reason.clone())
            }
        }
    } else {
        skipped("not requested")
    };

    let necessary = if want(Which::Necessary) {
        let r = check_sr_necessary(p, host);
        text.push_str(&necessary_text(&r));
        let o = if r.refutes_sr() { Outcome::Refuted } else { Outcome::Holds };
        properties.insert("necessary".into(), json!(o.name()));
        outcomes.push(o);
        serde_json::to_value(&r)?
    } else {
        skipped("not requested")
    };

    let outcome = Outcome::combine(outcomes);
    let summary: Vec<String> =
        properties.iter().map(|(k, v)| format!("{k}={}", v.as_str().unwrap_or(""))).collect();
    let _ = writeln!(text, "result: {} ({})", outcome.name(), summary.join(" "));
    let json = json!({
        "command": "check",
        "tool_version": VERSION,
        "graph": graph_echo(&l),
        "params": p,
        "settings": { "which": which_name(which), "seed": seed, "budget": budget, "tol": tol, "max_edges": cap },
        "verdicts": {
            "nlc": nlc,
            "wagner_falsifier": falsifier,
            "sr_closed_form": closed,
            "sr_exact_k3": exact,
            "lorentzian": lorentzian,
            "necessary_conditions": necessary,
        },
        "properties": properties,
        "result": outcome.name(),
    });
    Ok(Rendered { text, json, outcome })
}

fn which_name(w: Which) -> &'static str {
    match w {
        Which::Stability => "stability",
        Which::Lorentzian => "lorentzian",
        Which::Necessary => "necessary",
        Which::All => "all",
    }
}

fn failure_text(f: &ergm_geometry::lorentzian::LorentzFailure) -> String {
    use ergm_geometry::lorentzian::LorentzFailure::*;
    match f {
        NegativeCoefficient { exp, coeff } => format!("negative coefficient {coeff} at {exp:?}"),
        NotMConvex(w) => format!("exchange fails for alpha={:?} beta={:?} i={}", w.alpha, w.beta, w.i),
        SignatureFailure { derivative, n_pos, .. } => {
            format!("{n_pos} positive eigenvalues after derivative {derivative:?}")
        }
    }
}

pub struct FitSettings {
    pub stars: usize,
    pub triangle: bool,
    pub chain: ChainConfig,
    pub tol: f64,
    pub iters: usize,
    pub a0: f64,
    pub k0: f64,
}

pub fn fit(g: &GraphArgs, s: &FitSettings) -> anyhow::Result<(Rendered, String)> {
    let l = load_graph(g)?;
    let observed = &l.graph;
    let n = observed.n();
    if n < 2 || s.stars > n - 1 {
        return Err(bail_usage(format!("--stars {} needs a graph with more than {} vertices", s.stars, s.stars)));
    }
    let target = input(subgraph_suffstats(observed, &observed.full_subset(), s.stars, StarBound::default()))?;
    let init = edge_only_init(n, &target, s.stars);
    let mut opts = FitOptions::new(s.chain, s.tol, s.iters);
    opts.schedule = GainSchedule { a0: s.a0, k0: s.k0 };
    let fit = input(fit_stochastic_approximation(observed, s.stars, s.triangle, &init, &opts))?;
    let host = observed.complete_on_vertices();
    let nec = check_sr_necessary(&fit.params, &host);

    let mut text = graph_line(&l);
    let _ = writeln!(
        text,
        "model: K={} triangle={} host=complete:{n}; chain sweeps={} burnin={} thin={} seed={}",
        s.stars, s.triangle, s.chain.sweeps, s.chain.burnin, s.chain.thin, s.chain.seed
    );
    let _ = writeln!(text, "observed: {:?}", fit.observed.values);
    let _ = writeln!(text, "init: {}", params_line(&init).trim_start_matches("params: ").trim_end());
    let _ = writeln!(text, "estimate: {}", params_line(&fit.params).trim_start_matches("params: ").trim_end());
    let _ = writeln!(
        text,
        "converged: {} after {} updates (moment gap {}, tol {})",
        fit.converged, fit.iterations, fit.final_gap, fit.tol
    );
    for w in &fit.warnings {
        let _ = writeln!(text, "warning: degenerate chain, {w}");
    }
    text.push_str(&necessary_text(&nec));
    let verdict = if nec.refutes_sr() { "NotSR" } else { "undetermined" };
    let reason = if nec.triangle_vs_two_star.status == ConditionStatus::Fail {
        "triangle_vs_two_star fails"
    } else if nec.three_star_vs_two_star.status == ConditionStatus::Fail {
        "three_star_vs_two_star fails"
    } else {
        "necessary conditions hold"
    };
    let _ = writeln!(text, "SR verdict: {verdict} ({reason})");

    let json = json!({
        "command": "fit",
        "tool_version": VERSION,
        "graph": graph_echo(&l),
        "settings": {
            "stars": s.stars, "triangle": s.triangle, "chain": s.chain, "tol": s.tol,
            "iters": s.iters, "schedule": opts.schedule, "max_step": opts.max_step,
        },
        "init": init,
        "fit": {
            "params": fit.params,
            "observed": fit.observed,
            "converged": fit.converged,
            "final_gap": fit.final_gap,
            "iterations": fit.iterations,
            "warnings": fit.warnings,
        },
        "verdicts": { "necessary_conditions": nec },
        "sr_verdict": verdict,
    });
    let csv = fit.trajectory_csv();
    Ok((Rendered { text, json, outcome: Outcome::Holds }, csv))
}

fn stat_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("t(S_{j})")).chain(std::iter::once("t(tri)".to_string())).collect()
}

pub fn sample(g: &GraphArgs, p: &MarkovParams, cfg: &ChainConfig, chains: u64, cap: usize) -> anyhow::Result<Rendered> {
    let l = load_graph(g)?;
    let s = input(sample_suffstats_chains(&l.graph, p, cfg, chains))?;
    let m = l.graph.m();
    let exact = if m <= cap && m < 63 {
        announce_enumeration(m);
        Some(input(exact_expected_stats_with_cap(&l.graph, p, cap))?)
    } else {
        None
    };
    let names = stat_names(p.max_star());
    let mut text = graph_line(&l) + &params_line(p);
    let _ = writeln!(
        text,
        "chain: sweeps={} burnin={} thin={} seed={} chains={}; {} samples, boundary fraction {}",
        cfg.sweeps,
        cfg.burnin,
        cfg.thin,
        cfg.seed,
        chains.max(1),
        s.samples,
        s.boundary_fraction
    );
    let _ = writeln!(text, "{:<8} {:<24} {:<24} {:<24} z", "stat", "mean", "stderr", "exact");
    let mut rows = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let mean = s.mean.values[i];
        let se = s.stderr[i];
        let (ex, z) = match &exact {
            Some(e) => {
                let ex = e.values[i];
                let z = if se > 0.0 { Some((mean - ex) / se) } else { None };
                (Some(ex), z)
            }
            None => (None, None),
        };
        let _ = writeln!(
            text,
            "{:<8} {:<24} {:<24} {:<24} {}",
            name,
            mean,
            se,
            ex.map(|x| x.to_string()).unwrap_or_else(|| "unavailable".into()),
            z.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
        );
        rows.push(json!({ "name": name, "mean": mean, "stderr": se, "exact": ex, "z": z }));
    }
    let mut json = json!({
        "command": "sample",
        "tool_version": VERSION,
        "graph": graph_echo(&l),
        "params": p,
        "chain": cfg,
        "chains": chains.max(1),
        "samples": s.samples,
        "boundary_fraction": s.boundary_fraction,
        "exact_available": exact.is_some(),
        "stats": rows,
    });
    if exact.is_none() {
        json["exact_unavailable_reason"] = json!(format!("graph has {m} edges, above the enumeration cap {cap}"));
    }
    Ok(Rendered { text, json, outcome: Outcome::Holds })
}

pub fn datasets_list() -> Rendered {
    let mut text = format!("{:<16} {:>3} {:<8} description\n", "id", "n", "bundled");
    for d in DATASETS {
        let _ = writeln!(text, "{:<16} {:>3} {:<8} {} [{}]", d.id, d.expected_n, d.bundled(), d.description, d.source);
    }
    let entries: Vec<Value> = DATASETS
        .iter()
        .map(|d| {
            json!({
                "id": d.id, "description": d.description, "expected_n": d.expected_n,
                "source": d.source, "bundled": d.bundled(),
            })
        })
        .collect();
    let json = json!({ "command": "datasets list", "tool_version": VERSION, "datasets": entries });
    Rendered { text, json, outcome: Outcome::Holds }
}

pub fn export_dot(g: &GraphArgs, name: Option<&str>) -> anyhow::Result<Rendered> {
    let l = load_graph(g)?;
    let default = l.source.rsplit([':', '/']).next().unwrap_or("G").trim_end_matches(".edges").to_string();
    let dot = l.graph.to_dot(name.unwrap_or(&default));
    let json = json!({ "command": "export-dot", "tool_version": VERSION, "graph": graph_echo(&l), "dot": dot });
    Ok(Rendered { text: dot, json, outcome: Outcome::Holds })
}
