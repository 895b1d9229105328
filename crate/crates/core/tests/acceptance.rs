//! One pass/fail line per acceptance criterion. Exits nonzero when a
//! criterion fails, except for failures listed in `KNOWN_FAILURES`, which
//! are printed but documented in the README.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teamlogic::ast::{free_vars, nnf_negate};
use teamlogic::corpus::{
    parse_all, random_formula, GenConfig, DIAMOND_CORPUS, REWRITE_CORPUS, TOTALITY_CORPUS,
};
use teamlogic::deps::FlagStatus;
use teamlogic::equiv::{enumerate_models, enumerate_teams, equivalent, EquivOptions, Verdict};
use teamlogic::parse::parse_formula;
use teamlogic::rewrite::{
    disj_to_hook, eliminate_totality, expand_macros, hook_normalize, to_normal_form, to_prenex, MacroSet,
    NormalFormView,
};
use teamlogic::semantics::{eval_tarski, restrict, EvalOptions, Evaluator, Prunings};
use teamlogic::structures::{
    all_graphs, automorphisms, graph_an, graph_bn, is_connected, nonconn_sentence, unsafety_demo, vertex_transitive,
    Permutation, UnsafetyReport,
};
use teamlogic::{Formula, Model, Registry, Signature, Team};

/// Criterion 5 cannot pass: the exclusion-based rewriting of inclusion
/// atoms is false on teams where `x⃗` takes every value.
const KNOWN_FAILURES: &[usize] = &[5];

const SEED: u64 = 20240601;

type Check = Result<String, String>;

fn xy() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

fn graph_sig() -> Signature {
    Signature::new().with_relation("E", 2)
}

fn opts(p: Prunings) -> EvalOptions {
    EvalOptions {
        prunings: p,
        ..EvalOptions::default()
    }
}

/// Team semantics proper: no pointwise evaluation of dependency-free parts
/// and no projection onto free variables.
fn team_route() -> EvalOptions {
    opts(Prunings {
        flat: false,
        project: false,
        ..Prunings::ALL
    })
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn fo_corpus(count: usize, seed: u64) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_formula(&mut rng, &GenConfig::first_order(), &xy()))
        .collect()
}

fn vars_of(f: &Formula) -> Vec<String> {
    free_vars(f).into_iter().collect()
}

/// Rows of the full team over `vars` whose assignment satisfies `f`
/// classically.
fn tarski_rows(m: &Model, f: &Formula, vars: &[String]) -> Result<BTreeSet<Vec<teamlogic::semantics::Elem>>, String> {
    let full = enumerate_teams(m, vars).map_err(err)?.next().expect("full team first");
    let mut out = BTreeSet::new();
    for (row, s) in full.rows().iter().zip(full.assignments()) {
        if eval_tarski(m, &s, f).map_err(err)? {
            out.insert(row.clone());
        }
    }
    Ok(out)
}

fn flatness() -> Check {
    let reg = Registry::builtin();
    let corpus = fo_corpus(200, SEED);
    let mut checks = 0u64;
    for f in &corpus {
        let vars = vars_of(f);
        for n in [2, 3] {
            for m in enumerate_models(&graph_sig(), n).map_err(err)? {
                let truth = tarski_rows(&m, f, &vars)?;
                let mut ev = Evaluator::new(&m, &reg, f, &vars, &team_route()).map_err(err)?;
                for x in enumerate_teams(&m, &vars).map_err(err)? {
                    let pointwise = x.rows().iter().all(|r| truth.contains(r));
                    checks += 1;
                    if ev.check(&x).map_err(err)? != pointwise {
                        return Err(format!("{f} on {x} in a size-{n} model"));
                    }
                }
            }
        }
    }
    Ok(format!("{} formulas, {checks} model/team pairs", corpus.len()))
}

fn locality() -> Check {
    let reg = Registry::builtin();
    let corpus = fo_corpus(200, SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut checks = 0u64;
    for f in &corpus {
        let vars = vars_of(f);
        let mut padded_vars = vars.clone();
        padded_vars.push("z".into());
        for n in [2, 3] {
            for m in enumerate_models(&graph_sig(), n).map_err(err)? {
                let mut base = Evaluator::new(&m, &reg, f, &vars, &team_route()).map_err(err)?;
                let mut wide = Evaluator::new(&m, &reg, f, &padded_vars, &team_route()).map_err(err)?;
                // All teams at size 2; at size 3 the full team and a sample.
                let teams = enumerate_teams(&m, &vars).map_err(err)?;
                for (k, x) in teams.enumerate() {
                    if n == 3 && k > 0 && !rng.gen_bool(0.05) {
                        continue;
                    }
                    let want = base.check(&x).map_err(err)?;
                    let mut rows = Vec::new();
                    for r in x.rows() {
                        let pick = rng.gen_range(1u32..1 << n);
                        for e in m.elements().filter(|e| pick >> e.0 & 1 == 1) {
                            let mut row = r.clone();
                            row.push(e);
                            rows.push(row);
                        }
                    }
                    let mut all = padded_vars.clone();
                    all.sort();
                    let sorted = Team::from_rows(padded_vars.clone(), rows);
                    let y = sorted.restrict_vars(&all);
                    for t in [y, x.pad(&m, &["z".to_string()])] {
                        checks += 1;
                        if wide.check(&t).map_err(err)? != want {
                            return Err(format!("{f} on {t}"));
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{} formulas, {checks} padded teams", corpus.len()))
}

const BUILTIN_ATOMS: &[(&str, usize)] = &[
    ("const", 1),
    ("all", 1),
    ("ne", 1),
    ("nc", 1),
    ("inc", 2),
    ("exc", 2),
    ("fdep", 2),
];

fn hook_law() -> Check {
    let reg = Registry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let guard_cfg = GenConfig {
        max_depth: 1,
        ..GenConfig::first_order()
    };
    let body_cfg = GenConfig {
        max_depth: 2,
        ..GenConfig::with_atoms(BUILTIN_ATOMS)
    };
    let vars = xy();
    let route = opts(Prunings {
        flat: false,
        ..Prunings::ALL
    });
    let mut checks = 0u64;
    for _ in 0..50 {
        let theta = random_formula(&mut rng, &guard_cfg, &vars);
        let phi = random_formula(&mut rng, &body_cfg, &vars);
        let hooked = Formula::hook(theta.clone(), phi.clone());
        let via_or = Formula::or(nnf_negate(&theta).map_err(err)?, Formula::and(theta.clone(), phi.clone()));
        for m in enumerate_models(&graph_sig(), 2).map_err(err)? {
            let mut h = Evaluator::new(&m, &reg, &hooked, &vars, &route).map_err(err)?;
            let mut b = Evaluator::new(&m, &reg, &phi, &vars, &route).map_err(err)?;
            let mut o = Evaluator::new(&m, &reg, &via_or, &vars, &route).map_err(err)?;
            for x in enumerate_teams(&m, &vars).map_err(err)? {
                let a = h.check(&x).map_err(err)?;
                let r = b.check(&restrict(&m, &x, &theta).map_err(err)?).map_err(err)?;
                let d = o.check(&x).map_err(err)?;
                checks += 1;
                if a != r || a != d {
                    return Err(format!("{hooked} on {x}: hook {a}, restricted {r}, disjunction {d}"));
                }
            }
        }
    }
    Ok(format!("50 formulas, {checks} model/team pairs, three routes"))
}

fn flagged_atoms(reg: &Registry, pick: impl Fn(&teamlogic::deps::ClosureFlags) -> FlagStatus) -> Vec<(&'static str, usize)> {
    BUILTIN_ATOMS
        .iter()
        .copied()
        .filter(|(name, k)| {
            let arity = if *k == 2 && *name != "fdep" && *name != "inc" && *name != "exc" { 2 } else { *k };
            reg.lookup(name, arity).is_some_and(|s| pick(&s.flags) == FlagStatus::Asserted)
        })
        .collect()
}

fn preservation() -> Check {
    let reg = Registry::builtin();
    // Closure of formulas is what is being checked, so the shortcuts that
    // rely on it stay off.
    let route = opts(Prunings {
        downward: false,
        union: false,
        constancy_guard: false,
        ..Prunings::ALL
    });
    let vars = xy();
    let models: Vec<Model> = enumerate_models(&graph_sig(), 2).map_err(err)?.collect();
    let mut summary = Vec::new();
    for (label, atoms) in [
        ("downward", flagged_atoms(&reg, |f| f.downward)),
        ("union", flagged_atoms(&reg, |f| f.union)),
        ("empty-team", flagged_atoms(&reg, |f| f.empty_team)),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
        let cfg = GenConfig {
            max_depth: 2,
            ..GenConfig::with_atoms(&atoms)
        };
        let mut checks = 0u64;
        for _ in 0..40 {
            let f = random_formula(&mut rng, &cfg, &vars);
            for m in &models {
                let mut ev = Evaluator::new(m, &reg, &f, &vars, &route).map_err(err)?;
                let teams: Vec<Team> = enumerate_teams(m, &vars).map_err(err)?.collect();
                let mut sat = BTreeMap::new();
                for x in &teams {
                    sat.insert(x.clone(), ev.check(x).map_err(err)?);
                }
                for x in &teams {
                    let ok = match label {
                        "downward" => !sat[x] || teams.iter().filter(|y| y.is_subset(x)).all(|y| sat[y]),
                        "union" => !sat[x] || teams.iter().filter(|y| sat[*y]).all(|y| sat[&x.union(y)]),
                        _ => !x.is_empty() || sat[x],
                    };
                    checks += 1;
                    if !ok {
                        return Err(format!("{label} closure fails for {f} at {x}"));
                    }
                }
            }
        }
        let names: Vec<&str> = atoms.iter().map(|(n, _)| *n).collect();
        summary.push(format!("{label} [{}] {checks}", names.join(",")));
    }
    Ok(summary.join("; "))
}

fn sizes_ok(a: &Formula, b: &Formula, sizes: &[usize]) -> Result<Verdict, String> {
    let o = EquivOptions {
        sizes: sizes.to_vec(),
        ..EquivOptions::default()
    };
    equivalent(a, b, &Registry::builtin(), &o).map_err(err)
}

fn expect_equivalent(a: &Formula, b: &Formula, sizes: &[usize], what: &str) -> Result<(), String> {
    match sizes_ok(a, b, sizes).map_err(|e| format!("{what}: {a}: {e}"))? {
        Verdict::EquivalentUpToBound { .. } => Ok(()),
        v => Err(format!("{what}: {a} vs {b}: {v:?}")),
    }
}

#[derive(Default)]
struct IncTally {
    agreed: u64,
    gaps: u64,
    first_gap: Option<String>,
}

/// Compares `inc` with its expansion on every team of at most `max_rows`
/// rows at size `n`. Disagreement is tolerated only on the empty team and
/// on teams where `xs` takes every value; anything else is an error.
fn inclusion_gaps(f: &Formula, g: &Formula, xs: &[&str], n: usize, max_rows: usize, t: &mut IncTally) -> Result<(), String> {
    let reg = Registry::builtin();
    let vars = vars_of(f);
    let idx: Vec<usize> = xs.iter().map(|v| vars.iter().position(|w| w == v).unwrap()).collect();
    let m = Model::numbered(n);
    let full = n.pow(xs.len() as u32);
    let mut a = Evaluator::new(&m, &reg, f, &vars, &EvalOptions::default()).map_err(err)?;
    let mut b = Evaluator::new(&m, &reg, g, &vars, &EvalOptions::default()).map_err(err)?;
    for x in enumerate_teams(&m, &vars).map_err(err)?.filter(|x| x.len() <= max_rows) {
        let covered: BTreeSet<Vec<_>> = x.rows().iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
        let (left, right) = (a.check(&x).map_err(err)?, b.check(&x).map_err(err)?);
        if left == right {
            t.agreed += 1;
        } else if x.is_empty() || covered.len() == full {
            t.gaps += 1;
            t.first_gap.get_or_insert_with(|| format!("{f} on {x} at size {n}: atom {left}, expansion {right}"));
        } else {
            return Err(format!("{f} disagrees with its expansion on {x}, which is not a covering team"));
        }
    }
    Ok(())
}

/// The outer error is a real failure; the inner one is the documented
/// inclusion gap.
fn macros() -> Result<Check, String> {
    let nc_ne = MacroSet {
        nc: true,
        ne: true,
        diamond: false,
        inc: false,
    };
    let diamond = MacroSet {
        nc: false,
        ne: false,
        diamond: true,
        inc: false,
    };
    let mut count = 0;
    let mut pairs: Vec<(Formula, MacroSet)> = Vec::new();
    for s in ["nc(x)", "ne(x)", "nc(x, y)", "ne(x, y)"] {
        pairs.push((parse_formula(s).map_err(err)?, nc_ne));
    }
    for f in parse_all(REWRITE_CORPUS) {
        if f.dep_count("nc") + f.dep_count("ne") > 0 {
            pairs.push((f, nc_ne));
        }
    }
    for f in parse_all(DIAMOND_CORPUS) {
        pairs.push((f, diamond));
    }
    for (f, set) in &pairs {
        let (g, _) = expand_macros(f, *set).map_err(err)?;
        expect_equivalent(f, &g, &[2, 3], "expand")?;
        count += 1;
    }

    let mut t = IncTally::default();
    for (s, xs, sizes, max_rows) in [
        ("inc(x ; y)", vec!["x"], vec![2, 3], usize::MAX),
        ("inc(x, u ; y, v)", vec!["x", "u"], vec![2], 4),
    ] {
        let f = parse_formula(s).map_err(err)?;
        let (g, _) = expand_macros(&f, MacroSet::ALL).map_err(err)?;
        for &n in &sizes {
            inclusion_gaps(&f, &g, &xs, n, max_rows, &mut t)?;
        }
        if max_rows == usize::MAX && !matches!(sizes_ok(&f, &g, &sizes)?, Verdict::Counterexample { .. }) {
            return Err(format!("the equivalence checker misses the gap for {s}"));
        }
    }
    let ok = format!("nc/ne and ◇ expansions: {count} equivalences at sizes 2,3");
    match t.first_gap {
        None => Ok(Ok(ok)),
        Some(cex) => Ok(Err(format!(
            "{ok}; inclusion via exclusion is not equivalent: {} teams disagree, all empty or covering, e.g. {cex}; \
             the two agree on the other {} teams",
            t.gaps, t.agreed
        ))),
    }
}

fn rewrite_soundness() -> Check {
    let corpus = parse_all(REWRITE_CORPUS);
    let mut passes = 0;
    for f in &corpus {
        let mut outs = Vec::new();
        let (p, t) = to_prenex(f).map_err(err)?;
        outs.push(("prenex", p, t));
        let (d, t) = disj_to_hook(f).map_err(err)?;
        outs.push(("disj-to-hook", d, t));
        let (h, t) = hook_normalize(f).map_err(err)?;
        outs.push(("hook-normalize", h, t));
        if f.is_sentence() {
            let (view, t) = to_normal_form(f).map_err(err)?;
            let g = view.to_formula();
            if NormalFormView::from_formula(&g).map_err(err)? != view {
                return Err(format!("normal form view does not round-trip for {f}"));
            }
            outs.push(("normal-form", g, t));
        }
        for (name, g, trace) in outs {
            if trace.replay(f).map_err(err)? != g {
                return Err(format!("{name}: trace does not replay for {f}"));
            }
            if f.dep_counts() != g.dep_counts() || f.universal_count() != g.universal_count() {
                return Err(format!("{name}: counts differ between {f} and {g}"));
            }
            expect_equivalent(f, &g, &[2, 3], name)?;
            passes += 1;
        }
    }
    Ok(format!("{} formulas, {passes} pass outputs at sizes 2,3", corpus.len()))
}

fn totality() -> Check {
    let corpus = parse_all(TOTALITY_CORPUS);
    for f in &corpus {
        let (g, t) = eliminate_totality(f).map_err(err)?;
        if g.dep_count("all") > 0 || g.dep_count("nc") + g.dep_count("ne") > 0 || g.contains_diamond() {
            return Err(format!("{g} still has totality atoms"));
        }
        if t.replay(f).map_err(err)? != g {
            return Err(format!("trace does not replay for {f}"));
        }
        expect_equivalent(f, &g, &[2, 3], "eliminate")?;
    }
    let macro_users = corpus
        .iter()
        .filter(|f| f.dep_count("nc") + f.dep_count("ne") > 0 || f.contains_diamond())
        .count();
    Ok(format!(
        "{} sentences ({macro_users} through nc/ne/◇), all outputs all-free and equivalent at sizes 2,3",
        corpus.len()
    ))
}

fn demo_reports() -> Result<Vec<UnsafetyReport>, String> {
    let reg = Registry::builtin();
    [1, 2]
        .into_iter()
        .map(|n| unsafety_demo(n, 100, SEED + n as u64, &reg).map_err(err))
        .collect()
}

fn unsafety(reports: &[UnsafetyReport]) -> Check {
    let reg = Registry::builtin();
    let f = nonconn_sentence();
    let mut graphs = 0;
    for n in 1..=6 {
        for g in all_graphs(n) {
            let v = Evaluator::new(&g, &reg, &f, &[], &EvalOptions::default())
                .and_then(|mut e| e.check(&Team::epsilon()))
                .map_err(err)?;
            if v == is_connected(&g, "E") {
                return Err(format!("nonconn wrong on a {n}-vertex graph {:?}", g.relation("E")));
            }
            graphs += 1;
        }
    }
    let mut parts = vec![format!("connectivity oracle on {graphs} graphs")];
    for r in reports {
        if !(r.a.nonconn && !r.b.nonconn) {
            return Err(format!("nonconn does not separate A{0} from B{0}", r.n));
        }
        for g in [&r.a, &r.b] {
            for (what, t) in [
                ("flattening", g.flattening),
                ("itercl", g.itercl),
                ("focl", g.focl),
                ("clinc", g.clinc),
            ] {
                if !t.all() {
                    return Err(format!("{what} on {}: {}/{}", g.name, t.passed, t.total));
                }
            }
            parts.push(format!(
                "{}: flattening {}/{}, closure checks {}",
                g.name,
                g.flattening.passed,
                g.flattening.total,
                g.itercl.total + g.focl.total + g.clinc.total
            ));
        }
    }
    Ok(parts.join("; "))
}

/// Filters all `n!` permutations of the domain.
fn brute_automorphisms(m: &Model) -> BTreeSet<Vec<u16>> {
    let n = m.size();
    let edges = m.relation("E").expect("graph");
    let mut out = BTreeSet::new();
    let mut perm: Vec<u16> = (0..n as u16).collect();
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut visit = |p: &[u16]| {
        let ok = edges.tuples().iter().all(|t| {
            let img: Vec<_> = t.iter().map(|e| teamlogic::semantics::Elem(p[e.0 as usize])).collect();
            edges.contains(&img)
        });
        if ok {
            out.insert(p.to_vec());
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn images(ps: &[Permutation]) -> BTreeSet<Vec<u16>> {
    ps.iter().map(|p| p.images().iter().map(|e| e.0).collect()).collect()
}

fn automorphism_counts() -> Check {
    let a1 = graph_an(1).map_err(err)?;
    let b1 = graph_bn(1).map_err(err)?;
    let mut parts = Vec::new();
    for (name, g, expected) in [("A1", &a1, 128), ("B1", &b1, 16)] {
        let oracle = brute_automorphisms(g);
        let search = images(&automorphisms(g).map_err(err)?);
        if oracle.len() != expected || oracle != search {
            return Err(format!(
                "{name}: oracle {} automorphisms, search {}, expected {expected}",
                oracle.len(),
                search.len()
            ));
        }
        parts.push(format!("|Aut({name})| = {expected}"));
    }
    for n in [1, 2] {
        for g in [graph_an(n).map_err(err)?, graph_bn(n).map_err(err)?] {
            if !vertex_transitive(&g).map_err(err)? {
                return Err(format!("a graph for n = {n} is not vertex-transitive"));
            }
        }
    }
    parts.push("A1, B1, A2, B2 vertex-transitive".into());
    Ok(parts.join(", "))
}

fn substitute(reports: &[UnsafetyReport]) -> Check {
    for r in reports {
        if !r.as_expected() {
            return Err(format!("n = {}: demo checks disagree", r.n));
        }
    }
    Ok("not desk-reproducible in general; at n = 1, 2 the constancy sentence separates A_n from B_n \
        while every FO(⊆₁) sentence in the corpus agrees with its flattening"
        .into())
}

/// `ACCEPTANCE_ONLY=2,5` runs a subset of the criteria.
fn selected() -> Option<BTreeSet<usize>> {
    let v = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    let only = selected();
    let wanted = |i: usize| only.as_ref().is_none_or(|s| s.contains(&i));
    let mut reports: Option<Result<Vec<UnsafetyReport>, String>> = None;
    let mut failed = false;
    for i in 1..=10 {
        if !wanted(i) {
            continue;
        }
        let started = Instant::now();
        let (name, r) = match i {
            1 => ("flatness", flatness()),
            2 => ("locality", locality()),
            3 => ("hook law", hook_law()),
            4 => ("closure preservation", preservation()),
            5 => match macros() {
                Ok(r) => ("macro equivalences", r),
                Err(e) => {
                    failed = true;
                    println!("criterion  5 FAIL  macro equivalences: {e} ({:.1}s)", started.elapsed().as_secs_f64());
                    continue;
                }
            },
            6 => ("rewrite soundness", rewrite_soundness()),
            7 => ("totality elimination", totality()),
            8 => {
                let rs = reports.get_or_insert_with(demo_reports);
                ("unsafety demonstration", rs.clone().and_then(|r| unsafety(&r)))
            }
            9 => ("automorphism counts", automorphism_counts()),
            _ => {
                let rs = reports.get_or_insert_with(demo_reports);
                ("substitute for the inexpressibility claim", rs.clone().and_then(|r| substitute(&r)))
            }
        };
        let secs = started.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {i:>2} PASS  {name}: {d} ({secs:.1}s)"),
            Err(d) if KNOWN_FAILURES.contains(&i) => {
                println!("criterion {i:>2} FAIL  {name} [known, see README]: {d} ({secs:.1}s)")
            }
            Err(d) => {
                failed = true;
                println!("criterion {i:>2} FAIL  {name}: {d} ({secs:.1}s)")
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
