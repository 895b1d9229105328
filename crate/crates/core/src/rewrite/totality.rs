//! Elimination of totality atoms `all(t⃗)` from sentences.

use std::collections::BTreeMap;

use crate::ast::{free_vars, Formula, Term};

use super::normal_form::{to_normal_form, GuardedAtom, NormalFormView};
use super::passes::{expand_macros, MacroSet};
use super::{FreshGen, RewriteError, RewriteStep, RewriteTrace, Rule, TWO_ELEMENTS};

fn is_all(g: &GuardedAtom) -> bool {
    matches!(&g.atom, Formula::Dep { name, .. } if name == "all")
}

fn rename_vars(f: &Formula, map: &BTreeMap<String, String>) -> Formula {
    let term = |t: &Term| match t {
        Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
        c => c.clone(),
    };
    let terms = |ts: &[Term]| ts.iter().map(term).collect::<Vec<_>>();
    match f {
        Formula::Lit(crate::ast::Literal::Rel { name, args, positive }) => {
            Formula::Lit(crate::ast::Literal::Rel {
                name: name.clone(),
                args: terms(args),
                positive: *positive,
            })
        }
        Formula::Lit(crate::ast::Literal::Eq { lhs, rhs, positive }) => Formula::Lit(crate::ast::Literal::Eq {
            lhs: term(lhs),
            rhs: term(rhs),
            positive: *positive,
        }),
        Formula::Lit(_) => f.clone(),
        Formula::And(a, b) => Formula::and(rename_vars(a, map), rename_vars(b, map)),
        Formula::Or(a, b) => Formula::or(rename_vars(a, map), rename_vars(b, map)),
        Formula::Hook(a, b) => Formula::hook(rename_vars(a, map), rename_vars(b, map)),
        Formula::Diamond(b) => Formula::diamond(rename_vars(b, map)),
        // bound names never clash with the primed copies
        Formula::Exists(v, b) => Formula::exists(v.clone(), rename_vars(b, map)),
        Formula::Forall(v, b) => Formula::forall(v.clone(), rename_vars(b, map)),
        Formula::Dep { name, args } => Formula::dep(name.clone(), terms(args)),
        Formula::Generic { rel, args, sentence } => Formula::generic(rel.clone(), terms(args), (**sentence).clone()),
    }
}

fn var_terms(vs: &[String]) -> Vec<Term> {
    vs.iter().map(|v| Term::var(v.as_str())).collect()
}

/// Removes the leftmost guarded `all` atom of `nf`:
///
/// ```text
/// ∀z⃗ ∃x⃗₁′y⃗₁′…x⃗ₙ′y⃗ₙ′ ( θ′ ∧ t⃗′ = z⃗ ∧
///     ∀p q ∀x⃗₁∃y⃗₁…∀x⃗ₙ∃y⃗ₙ ( ⋀ᵢ (p = q ∧ ⋀_{j≤i} x⃗ⱼ = x⃗ⱼ′ ↪ y⃗ᵢ = y⃗ᵢ′) ∧ χ ) )
/// ```
///
/// where `χ` is everything else in the body.
pub fn eliminate_totality_once(nf: &NormalFormView) -> Result<(Formula, RewriteTrace), RewriteError> {
    let idx = nf.guarded.iter().position(is_all).ok_or(RewriteError::NoTotalityAtom)?;
    let target = &nf.guarded[idx];
    let Formula::Dep { args, .. } = &target.atom else {
        unreachable!("checked by is_all")
    };
    let before = nf.to_formula();
    let mut gen = FreshGen::for_formula(&before);

    let z: Vec<String> = args.iter().map(|_| gen.fresh("z")).collect();
    let mut primed = BTreeMap::new();
    for v in nf.prefix_vars() {
        let p = gen.fresh(&format!("{v}'"));
        primed.insert(v, p);
    }
    let prime = |vs: &[String]| vs.iter().map(|v| primed[v].clone()).collect::<Vec<_>>();
    let p = gen.fresh("p");
    let q = gen.fresh("q");

    let mut hooks = Vec::new();
    let mut seen_x: Vec<Formula> = Vec::new();
    for block in &nf.blocks {
        let xs = var_terms(&block.universals);
        seen_x.push(Formula::tuple_eq(&xs, &var_terms(&prime(&block.universals))));
        if block.existentials.is_empty() {
            continue;
        }
        let guard = Formula::conj(
            std::iter::once(Formula::var_eq(&p, &q))
                .chain(seen_x.iter().filter(|f| **f != Formula::top()).cloned()),
        );
        let ys = var_terms(&block.existentials);
        let consequent = Formula::tuple_eq(&ys, &var_terms(&prime(&block.existentials)));
        hooks.push(Formula::hook(guard, consequent));
    }

    let mut chi_items: Vec<Formula> = nf
        .guarded
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, g)| g.to_formula())
        .collect();
    if nf.matrix != Formula::top() || chi_items.is_empty() {
        chi_items.push(nf.matrix.clone());
    }
    let chi = Formula::conj(chi_items);
    let inner = nf.wrap(Formula::and(Formula::conj(hooks), chi));
    let inner = Formula::forall(p.clone(), Formula::forall(q.clone(), inner));

    let theta = rename_vars(&target.guard, &primed);
    let t_primed: Vec<Term> = args
        .iter()
        .map(|t| match t {
            Term::Var(v) => Term::Var(primed.get(v).cloned().unwrap_or_else(|| v.clone())),
            c => c.clone(),
        })
        .collect();
    let mut conjuncts = vec![theta];
    if !args.is_empty() {
        conjuncts.push(Formula::tuple_eq(&t_primed, &var_terms(&z)));
    }
    conjuncts.push(inner);
    let primed_prefix: Vec<String> = nf
        .blocks
        .iter()
        .flat_map(|b| prime(&b.universals).into_iter().chain(prime(&b.existentials)))
        .collect();
    let out = Formula::forall_all(&z, Formula::exists_all(&primed_prefix, Formula::conj(conjuncts)));

    let mut fresh = z;
    fresh.extend(primed_prefix);
    fresh.push(p);
    fresh.push(q);
    let mut trace = RewriteTrace::new();
    trace.steps.push(RewriteStep {
        rule: Rule::TotalityElimination,
        path: Vec::new(),
        before,
        after: out.clone(),
        fresh,
    });
    trace.note(TWO_ELEMENTS);
    Ok((out, trace))
}

/// Removes every `all` atom from a sentence, one at a time, renormalizing
/// in between. `◇`, `nc` and `ne` are expanded first.
pub fn eliminate_totality(f: &Formula) -> Result<(Formula, RewriteTrace), RewriteError> {
    let open = free_vars(f);
    if !open.is_empty() {
        return Err(RewriteError::Open(open.into_iter().collect::<Vec<_>>().join(", ")));
    }
    let (mut cur, mut trace) = expand_macros(f, MacroSet::TOTALITY)?;
    let cap = cur.dep_count("all") + 4;
    for _ in 0..cap {
        if cur.dep_count("all") == 0 {
            return Ok((cur, trace));
        }
        let (nf, t) = to_normal_form(&cur)?;
        trace.extend(t);
        let (next, t) = eliminate_totality_once(&nf)?;
        trace.extend(t);
        cur = next;
    }
    if cur.dep_count("all") == 0 {
        return Ok((cur, trace));
    }
    Err(RewriteError::IterationCap(cap))
}
