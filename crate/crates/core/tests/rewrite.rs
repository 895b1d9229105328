use std::collections::BTreeSet;

use teamlogic::ast::free_vars;
use teamlogic::corpus::{parse_all, DIAMOND_CORPUS, REWRITE_CORPUS, TOTALITY_CORPUS};
use teamlogic::equiv::{enumerate_teams, equivalent, EquivOptions, Verdict};
use teamlogic::parse::parse_formula;
use teamlogic::semantics::eval;
use teamlogic::rewrite::*;
use teamlogic::{Formula, Registry};

fn sizes_for(f: &Formula) -> Vec<usize> {
    if free_vars(f).len() >= 2 {
        vec![2]
    } else {
        vec![2, 3]
    }
}

fn assert_equivalent(a: &Formula, b: &Formula, sizes: Vec<usize>, what: &str) {
    let opts = EquivOptions {
        sizes,
        ..EquivOptions::default()
    };
    let v = equivalent(a, b, &Registry::builtin(), &opts).unwrap();
    assert!(
        matches!(v, Verdict::EquivalentUpToBound { .. }),
        "{what}: {a}\n  vs {b}\n  {v:?}"
    );
}

fn assert_counts(a: &Formula, b: &Formula, what: &str) {
    assert_eq!(a.dep_counts(), b.dep_counts(), "{what}: {a} vs {b}");
    assert_eq!(a.universal_count(), b.universal_count(), "{what}: {a} vs {b}");
}

#[test]
fn structural_passes_preserve_meaning_and_counts() {
    for f in parse_all(REWRITE_CORPUS) {
        let sizes = sizes_for(&f);
        let (p, t) = to_prenex(&f).unwrap();
        assert_eq!(t.replay(&f).unwrap(), p);
        assert_counts(&f, &p, "prenex");
        assert_equivalent(&f, &p, sizes.clone(), "prenex");

        let (d, t) = disj_to_hook(&f).unwrap();
        assert_eq!(t.replay(&f).unwrap(), d);
        assert_counts(&f, &d, "disj-to-hook");
        assert!(!d.any_node(&mut |g| matches!(g, Formula::Or(..))), "{d}");
        assert_equivalent(&f, &d, sizes.clone(), "disj-to-hook");

        let (h, t) = hook_normalize(&f).unwrap();
        assert_eq!(t.replay(&f).unwrap(), h);
        assert_counts(&f, &h, "hook-normalize");
        assert_equivalent(&f, &h, sizes.clone(), "hook-normalize");
    }
}

#[test]
fn normal_forms_of_sentences() {
    let sentences: Vec<Formula> = parse_all(REWRITE_CORPUS).into_iter().filter(Formula::is_sentence).collect();
    assert!(sentences.len() >= 10);
    for f in sentences {
        let (view, trace) = to_normal_form(&f).unwrap();
        let g = view.to_formula();
        assert_eq!(trace.replay(&f).unwrap(), g);
        assert_eq!(NormalFormView::from_formula(&g).unwrap(), view);
        assert_counts(&f, &g, "normal-form");
        assert_equivalent(&f, &g, vec![2, 3], "normal-form");
    }
}

#[test]
fn macro_expansion() {
    for f in parse_all(REWRITE_CORPUS).iter().chain(&parse_all(DIAMOND_CORPUS)) {
        let (g, t) = expand_macros(f, MacroSet::TOTALITY).unwrap();
        assert_eq!(t.replay(f).unwrap(), g);
        assert_eq!(g.dep_count("nc") + g.dep_count("ne"), 0);
        assert!(!g.contains_diamond());
        assert_equivalent(f, &g, sizes_for(f), "expand");
    }
}

/// The exclusion-based rewriting of `inc` needs a `z⃗` disjoint from the
/// values of `x⃗`, so it fails on the empty team and whenever `x⃗` takes
/// every value. On all other teams it agrees with the atom. The binary
/// case is checked on teams of at most four assignments.
#[test]
fn inclusion_expansion_agrees_off_covering_teams() {
    let reg = Registry::builtin();
    for (s, xs, sizes, max_rows) in [
        ("inc(x ; y)", vec!["x"], vec![2, 3], usize::MAX),
        ("inc(x, u ; y, v)", vec!["x", "u"], vec![2], 4),
    ] {
        let f = parse_formula(s).unwrap();
        let (g, _) = expand_macros(&f, MacroSet::ALL).unwrap();
        assert_eq!(g.dep_count("inc"), 0);
        assert_eq!(g.dep_count("exc"), 1);
        let vars: Vec<String> = free_vars(&f).into_iter().collect();
        let idx: Vec<usize> = xs.iter().map(|v| vars.iter().position(|w| w == v).unwrap()).collect();
        for n in sizes {
            let m = teamlogic::Model::numbered(n);
            let full = n.pow(xs.len() as u32);
            let (mut agree, mut gaps) = (0, 0);
            for x in enumerate_teams(&m, &vars).unwrap().filter(|x| x.len() <= max_rows) {
                let covered: BTreeSet<Vec<_>> = x.rows().iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
                let a = eval(&m, &x, &f, &reg).unwrap();
                let b = eval(&m, &x, &g, &reg).unwrap();
                if x.is_empty() || covered.len() == full {
                    assert!(!b, "{g} on {x}");
                    gaps += usize::from(a);
                } else {
                    assert_eq!(a, b, "{s} on {x}");
                    agree += 1;
                }
            }
            assert!(agree > 0 && gaps > 0);
        }
    }
}

#[test]
fn inclusion_expansion_changes_a_sentence() {
    let f = parse_formula("forall x. inc(x ; x)").unwrap();
    let (g, _) = expand_macros(&f, MacroSet::ALL).unwrap();
    let v = equivalent(&f, &g, &Registry::builtin(), &EquivOptions::default()).unwrap();
    assert!(v.is_counterexample(), "{v:?}");
}

#[test]
fn totality_elimination() {
    for f in parse_all(TOTALITY_CORPUS) {
        let (g, t) = eliminate_totality(&f).unwrap();
        assert_eq!(g.dep_count("all"), 0, "{g}");
        assert_eq!(t.replay(&f).unwrap(), g);
        assert_equivalent(&f, &g, vec![2, 3], "eliminate");
    }
}
