//! Macro expansion, prenexing, disjunction elimination and hook
//! normalisation.

use crate::ast::{all_vars, Formula, Term};

use super::{ensure_renamed, rewrite_fixpoint, FreshGen, Rewrite, RewriteError, RewriteTrace, Rule, TWO_ELEMENTS};

/// Which derived constructs [`expand_macros`] replaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MacroSet {
    pub nc: bool,
    pub ne: bool,
    pub diamond: bool,
    pub inc: bool,
}

impl MacroSet {
    pub const ALL: MacroSet = MacroSet {
        nc: true,
        ne: true,
        diamond: true,
        inc: true,
    };
    /// The constructs that reduce to totality atoms.
    pub const TOTALITY: MacroSet = MacroSet {
        nc: true,
        ne: true,
        diamond: true,
        inc: false,
    };
}

fn vars(names: &[String]) -> Vec<Term> {
    names.iter().map(|n| Term::var(n.as_str())).collect()
}

fn fresh_block(gen: &mut FreshGen, base: &str, k: usize) -> Vec<String> {
    (0..k).map(|_| gen.fresh(base)).collect()
}

/// `∀w all(w)`, which holds exactly on nonempty teams.
fn nonempty(gen: &mut FreshGen) -> (Formula, String) {
    let w = gen.fresh("w");
    (Formula::forall(w.clone(), Formula::dep("all", vec![Term::var(w.as_str())])), w)
}

fn expand_rule(f: &Formula, gen: &mut FreshGen, which: MacroSet) -> Option<Rewrite> {
    match f {
        // nc(t⃗) ⇒ ∀w⃗(w⃗ ≠ t⃗ ↪ all(w⃗))
        Formula::Dep { name, args } if which.nc && name == "nc" => {
            let w = fresh_block(gen, "w", args.len());
            let body = Formula::hook(Formula::tuple_neq(&vars(&w), args), Formula::dep("all", vars(&w)));
            Some((Rule::ExpandNc, Formula::forall_all(&w, body), w))
        }
        // ne(t⃗) ⇒ t⃗ = t⃗ ∧ ∀w all(w)
        Formula::Dep { name, args } if which.ne && name == "ne" => {
            let (n, w) = nonempty(gen);
            Some((Rule::ExpandNe, Formula::and(Formula::tuple_eq(args, args), n), vec![w]))
        }
        // ◇ψ ⇒ (∀w all(w) ∧ ψ) ∨ top
        Formula::Diamond(body) if which.diamond => {
            let (n, w) = nonempty(gen);
            Some((
                Rule::ExpandDiamond,
                Formula::or(Formula::and(n, (**body).clone()), Formula::top()),
                vec![w],
            ))
        }
        // inc(x⃗ ; y⃗) ⇒ ∃z⃗w⃗(exc(x⃗ ; z⃗) ∧ ((w⃗ = y⃗ ∨ w⃗ = z⃗) ∧ all(w⃗)))
        Formula::Dep { name, args } if which.inc && name == "inc" && args.len() % 2 == 0 => {
            let k = args.len() / 2;
            let (x, y) = args.split_at(k);
            let z = fresh_block(gen, "z", k);
            let w = fresh_block(gen, "w", k);
            let (zt, wt) = (vars(&z), vars(&w));
            let exc = Formula::dep("exc", [x, &zt[..]].concat());
            let choice = Formula::or(Formula::tuple_eq(&wt, y), Formula::tuple_eq(&wt, &zt));
            let body = Formula::and(exc, Formula::and(choice, Formula::dep("all", wt.clone())));
            let fresh: Vec<String> = z.iter().chain(&w).cloned().collect();
            Some((Rule::ExpandInc, Formula::exists_all(&fresh, body), fresh))
        }
        _ => None,
    }
}

/// Replaces the selected derived constructs by their definitions in terms
/// of totality and exclusion atoms.
pub fn expand_macros(f: &Formula, which: MacroSet) -> Result<(Formula, RewriteTrace), RewriteError> {
    let mut trace = RewriteTrace::new();
    let mut gen = FreshGen::for_formula(f);
    let out = rewrite_fixpoint(f.clone(), &mut trace, &mut gen, |g, gen| Ok(expand_rule(g, gen, which)))?;
    if trace.steps.iter().any(|s| s.rule == Rule::ExpandDiamond) {
        trace.note("◇ expansion assumes nonempty domains");
    }
    Ok((out, trace))
}

fn side_condition(var: &str, other: &Formula) -> Result<(), RewriteError> {
    if crate::ast::free_vars(other).contains(var) {
        return Err(RewriteError::SideCondition {
            var: var.to_string(),
            context: other.to_string(),
        });
    }
    Ok(())
}

fn hook_side_condition(var: &str, theta: &Formula) -> Result<(), RewriteError> {
    if all_vars(theta).contains(var) {
        return Err(RewriteError::SideCondition {
            var: var.to_string(),
            context: theta.to_string(),
        });
    }
    Ok(())
}

fn prenex_rule(f: &Formula, gen: &mut FreshGen) -> Result<Option<Rewrite>, RewriteError> {
    let (a, b, conj) = match f {
        Formula::And(a, b) => (&**a, &**b, true),
        Formula::Or(a, b) => (&**a, &**b, false),
        Formula::Hook(theta, body) => {
            return Ok(match &**body {
                Formula::Exists(y, psi) => {
                    hook_side_condition(y, theta)?;
                    Some((
                        Rule::HookQuantifier,
                        Formula::exists(y.clone(), Formula::hook((**theta).clone(), (**psi).clone())),
                        vec![],
                    ))
                }
                Formula::Forall(y, psi) => {
                    hook_side_condition(y, theta)?;
                    Some((
                        Rule::HookQuantifier,
                        Formula::forall(y.clone(), Formula::hook((**theta).clone(), (**psi).clone())),
                        vec![],
                    ))
                }
                _ => None,
            });
        }
        _ => return Ok(None),
    };
    let join = |x: Formula, y: Formula| if conj { Formula::and(x, y) } else { Formula::or(x, y) };
    // quantifier on the left first, then on the right
    for (quant, other, left) in [(a, b, true), (b, a, false)] {
        let order = |inner: Formula, other: Formula| if left { join(inner, other) } else { join(other, inner) };
        match quant {
            Formula::Exists(v, psi) => {
                side_condition(v, other)?;
                return Ok(Some((
                    Rule::PullExists,
                    Formula::exists(v.clone(), order((**psi).clone(), other.clone())),
                    vec![],
                )));
            }
            Formula::Forall(v, psi) if conj => {
                side_condition(v, other)?;
                return Ok(Some((
                    Rule::PullForallAnd,
                    Formula::forall(v.clone(), order((**psi).clone(), other.clone())),
                    vec![],
                )));
            }
            Formula::Forall(v, psi) => {
                side_condition(v, other)?;
                let p = gen.fresh("p");
                let q = gen.fresh("q");
                let same = Formula::var_eq(&p, &q);
                let diff = Formula::var_neq(&p, &q);
                // the quantified side is guarded by p = q
                let guarded = Formula::and(same, (**psi).clone());
                let rest = Formula::and(diff, other.clone());
                let body = if left {
                    Formula::or(guarded, rest)
                } else {
                    Formula::or(rest, guarded)
                };
                let out = Formula::exists(
                    p.clone(),
                    Formula::exists(q.clone(), Formula::forall(v.clone(), body)),
                );
                return Ok(Some((Rule::PullForallOr, out, vec![p, q])));
            }
            _ => {}
        }
    }
    Ok(None)
}

/// Moves every quantifier to the front. Quantifiers inside hook
/// antecedents are part of the first-order guard and stay put.
pub fn to_prenex(f: &Formula) -> Result<(Formula, RewriteTrace), RewriteError> {
    if f.contains_diamond() {
        return Err(RewriteError::Diamond);
    }
    let mut trace = RewriteTrace::new();
    let g = ensure_renamed(f.clone(), &mut trace);
    let mut gen = FreshGen::for_formula(&g);
    let out = rewrite_fixpoint(g, &mut trace, &mut gen, prenex_rule)?;
    if trace.steps.iter().any(|s| s.rule == Rule::PullForallOr) {
        trace.note(TWO_ELEMENTS);
    }
    Ok((out, trace))
}

/// Replaces each team-level disjunction `ψ₁ ∨ ψ₂` by
/// `∃q₁q₂((q₁ = q₂ ↪ ψ₁) ∧ (q₁ ≠ q₂ ↪ ψ₂))`, outermost first.
pub fn disj_to_hook(f: &Formula) -> Result<(Formula, RewriteTrace), RewriteError> {
    let mut trace = RewriteTrace::new();
    let g = ensure_renamed(f.clone(), &mut trace);
    let mut gen = FreshGen::for_formula(&g);
    let out = rewrite_fixpoint(g, &mut trace, &mut gen, |h, gen| {
        let Formula::Or(a, b) = h else { return Ok(None) };
        let q1 = gen.fresh("q");
        let q2 = gen.fresh("q");
        let body = Formula::and(
            Formula::hook(Formula::var_eq(&q1, &q2), (**a).clone()),
            Formula::hook(Formula::var_neq(&q1, &q2), (**b).clone()),
        );
        let out = Formula::exists(q1.clone(), Formula::exists(q2.clone(), body));
        Ok(Some((Rule::DisjToHook, out, vec![q1, q2])))
    })?;
    if !trace.steps.iter().all(|s| s.rule == Rule::RenameApart) {
        trace.note(TWO_ELEMENTS);
    }
    Ok((out, trace))
}

fn hook_rule(f: &Formula) -> Result<Option<Rewrite>, RewriteError> {
    let Formula::Hook(theta, body) = f else { return Ok(None) };
    let theta = (**theta).clone();
    Ok(match &**body {
        Formula::Hook(theta2, psi) => Some((
            Rule::HookMerge,
            Formula::hook(Formula::and(theta, (**theta2).clone()), (**psi).clone()),
            vec![],
        )),
        Formula::And(a, b) => Some((
            Rule::HookDistribute,
            Formula::and(
                Formula::hook(theta.clone(), (**a).clone()),
                Formula::hook(theta, (**b).clone()),
            ),
            vec![],
        )),
        Formula::Exists(y, psi) => {
            hook_side_condition(y, &theta)?;
            Some((
                Rule::HookQuantifier,
                Formula::exists(y.clone(), Formula::hook(theta, (**psi).clone())),
                vec![],
            ))
        }
        Formula::Forall(y, psi) => {
            hook_side_condition(y, &theta)?;
            Some((
                Rule::HookQuantifier,
                Formula::forall(y.clone(), Formula::hook(theta, (**psi).clone())),
                vec![],
            ))
        }
        _ => None,
    })
}

/// Pushes hooks inward past ∧, ∃ and ∀ and merges nested hooks.
pub fn hook_normalize(f: &Formula) -> Result<(Formula, RewriteTrace), RewriteError> {
    let mut trace = RewriteTrace::new();
    let g = ensure_renamed(f.clone(), &mut trace);
    let mut gen = FreshGen::for_formula(&g);
    let out = rewrite_fixpoint(g, &mut trace, &mut gen, |h, _| hook_rule(h))?;
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn macro_examples() {
        let (out, tr) = expand_macros(&p("nc(x)"), MacroSet::ALL).unwrap();
        assert_eq!(out, p("forall w1. (w1 != x => all(w1))"));
        assert_eq!(tr.steps[0].fresh, vec!["w1"]);

        let (out, _) = expand_macros(&p("<> x = y"), MacroSet::ALL).unwrap();
        assert_eq!(out, p("((forall w1. all(w1)) /\\ x = y) \\/ top"));

        let (out, _) = expand_macros(&p("inc(x ; y)"), MacroSet::ALL).unwrap();
        assert_eq!(out, p("exists z1 w1. (exc(x ; z1) /\\ ((w1 = y \\/ w1 = z1) /\\ all(w1)))"));

        let (out, _) = expand_macros(&p("ne(x)"), MacroSet::ALL).unwrap();
        assert_eq!(out, p("x = x /\\ forall w1. all(w1)"));

        let (out, tr) = expand_macros(&p("inc(x ; y)"), MacroSet::TOTALITY).unwrap();
        assert_eq!(out, p("inc(x ; y)"));
        assert!(tr.is_empty());
    }

    #[test]
    fn nested_macros_expand_fully() {
        let f = p("<> (nc(x) /\\ <> ne(x))");
        let (out, tr) = expand_macros(&f, MacroSet::ALL).unwrap();
        assert!(!out.contains_diamond());
        assert_eq!(out.dep_count("nc") + out.dep_count("ne"), 0);
        assert_eq!(tr.replay(&f).unwrap(), out);
    }

    #[test]
    fn prenex_examples() {
        let (out, _) = to_prenex(&p("(exists x. x = x) \\/ y = y")).unwrap();
        assert_eq!(out, p("exists x. (x = x \\/ y = y)"));
        let (out, tr) = to_prenex(&p("(forall x. E(x,x)) \\/ y = y")).unwrap();
        assert_eq!(out, p("exists p1 q1. forall x. ((p1 = q1 /\\ E(x,x)) \\/ (p1 != q1 /\\ y = y))"));
        assert_eq!(tr.notes, vec![TWO_ELEMENTS.to_string()]);
        let (out, _) = to_prenex(&p("(forall x. E(x,x)) /\\ y = y")).unwrap();
        assert_eq!(out, p("forall x. (E(x,x) /\\ y = y)"));
        assert!(matches!(to_prenex(&p("<> top")), Err(RewriteError::Diamond)));
    }

    #[test]
    fn prenex_renames_first() {
        let f = p("(exists x. E(x,y)) /\\ (exists x. E(y,x))");
        let (out, tr) = to_prenex(&f).unwrap();
        assert_eq!(out, p("exists x x1. (E(x,y) /\\ E(y,x1))"));
        assert_eq!(tr.steps[0].rule, Rule::RenameApart);
        assert_eq!(tr.replay(&f).unwrap(), out);
    }

    #[test]
    fn disj_to_hook_examples() {
        let (out, _) = disj_to_hook(&p("x = 0 \\/ x = 1")).unwrap();
        assert_eq!(out, p("exists q1 q2. ((q1 = q2 => x = 0) /\\ (q1 != q2 => x = 1))"));
        let f = p("E(x,y) /\\ x = y");
        let (out, tr) = disj_to_hook(&f).unwrap();
        assert_eq!(out, f);
        assert!(tr.is_empty());
        let (out, tr) = disj_to_hook(&p("(x = 0 \\/ x = 1) \\/ x = 2")).unwrap();
        assert_eq!(tr.steps.len(), 2);
        let fresh: Vec<String> = tr.steps.iter().flat_map(|s| s.fresh.clone()).collect();
        assert_eq!(fresh, vec!["q1", "q2", "q3", "q4"]);
        assert!(!out.any_node(&mut |g| matches!(g, Formula::Or(..))));
    }

    #[test]
    fn disjunctions_in_antecedents_stay() {
        let f = p("(x = 0 \\/ x = 1) => all(x)");
        let (out, _) = disj_to_hook(&f).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn hook_normalize_examples() {
        let (out, _) = hook_normalize(&p("x = y => (y = z => all(x))")).unwrap();
        assert_eq!(out, p("(x = y /\\ y = z) => all(x)"));
        let (out, _) = hook_normalize(&p("x = y => (all(x) /\\ const(y))")).unwrap();
        assert_eq!(out, p("(x = y => all(x)) /\\ (x = y => const(y))"));
        let (out, _) = hook_normalize(&p("x = x => exists y. all(y)")).unwrap();
        assert_eq!(out, p("exists y. (x = x => all(y))"));
    }

    #[test]
    fn hook_side_condition_is_checked() {
        // hand-built capture; rename_apart would prevent this
        let f = Formula::hook(p("exists y. y = x"), p("exists y. all(y)"));
        let (out, tr) = hook_normalize(&f).unwrap();
        assert_eq!(tr.steps[0].rule, Rule::RenameApart);
        assert_eq!(out, p("exists y1. ((exists y. y = x) => all(y1))"));
        let raw = hook_rule(&f);
        assert!(matches!(raw, Err(RewriteError::SideCondition { .. })));
    }
}
