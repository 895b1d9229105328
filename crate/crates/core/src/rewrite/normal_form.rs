//! Sentence normal form: an alternating prefix over a conjunction of
//! guarded dependency atoms and a first-order matrix.

use std::collections::BTreeSet;
use std::fmt;

use crate::ast::{free_vars, nnf_negate, Formula};

use super::passes::{disj_to_hook, hook_normalize, to_prenex};
use super::{ensure_renamed, RewriteError, RewriteStep, RewriteTrace, Rule};

/// `∀x⃗ ∃y⃗`; either side may be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuantBlock {
    pub universals: Vec<String>,
    pub existentials: Vec<String>,
}

/// `guard ↪ atom`, with `guard = top` for unguarded atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardedAtom {
    pub guard: Formula,
    pub atom: Formula,
}

impl GuardedAtom {
    pub fn to_formula(&self) -> Formula {
        if self.guard == Formula::top() {
            self.atom.clone()
        } else {
            Formula::hook(self.guard.clone(), self.atom.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalFormView {
    pub blocks: Vec<QuantBlock>,
    pub guarded: Vec<GuardedAtom>,
    pub matrix: Formula,
    /// Indices into `guarded` whose guard is not a quantifier-free formula
    /// over the last existential block.
    pub flagged: Vec<usize>,
}

fn conjuncts(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        _ => out.push(f.clone()),
    }
}

fn quantifier_free(f: &Formula) -> bool {
    !f.any_node(&mut |g| matches!(g, Formula::Exists(..) | Formula::Forall(..)))
}

/// First-order in the flat sense: literals, connectives, quantifiers and
/// hooks, without dependency atoms or ◇.
fn flat(f: &Formula) -> bool {
    match f {
        Formula::Hook(a, b) => a.is_first_order() && flat(b),
        Formula::And(a, b) | Formula::Or(a, b) => flat(a) && flat(b),
        Formula::Exists(_, b) | Formula::Forall(_, b) => flat(b),
        Formula::Lit(_) => true,
        Formula::Diamond(_) | Formula::Dep { .. } | Formula::Generic { .. } => false,
    }
}

fn is_atom(f: &Formula) -> bool {
    matches!(f, Formula::Dep { .. } | Formula::Generic { .. })
}

impl NormalFormView {
    /// All prefix variables in order.
    pub fn prefix_vars(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| b.universals.iter().chain(&b.existentials).cloned())
            .collect()
    }

    /// The prefix applied to `body`.
    pub fn wrap(&self, body: Formula) -> Formula {
        self.blocks.iter().rev().fold(body, |acc, b| {
            Formula::forall_all(&b.universals, Formula::exists_all(&b.existentials, acc))
        })
    }

    /// The quantifier-free part: guarded atoms then the matrix.
    pub fn body(&self) -> Formula {
        let mut items: Vec<Formula> = self.guarded.iter().map(GuardedAtom::to_formula).collect();
        if self.matrix != Formula::top() || items.is_empty() {
            items.push(self.matrix.clone());
        }
        Formula::conj(items)
    }

    pub fn to_formula(&self) -> Formula {
        self.wrap(self.body())
    }

    /// Reads a formula of normal-form shape back into a view.
    pub fn from_formula(f: &Formula) -> Result<NormalFormView, RewriteError> {
        let mut blocks: Vec<QuantBlock> = Vec::new();
        let mut cur = f;
        loop {
            match cur {
                Formula::Forall(v, b) => {
                    if blocks.last().map_or(true, |bl| !bl.existentials.is_empty()) {
                        blocks.push(QuantBlock::default());
                    }
                    blocks.last_mut().unwrap().universals.push(v.clone());
                    cur = b;
                }
                Formula::Exists(v, b) => {
                    if blocks.is_empty() {
                        blocks.push(QuantBlock::default());
                    }
                    blocks.last_mut().unwrap().existentials.push(v.clone());
                    cur = b;
                }
                _ => break,
            }
        }
        let mut items = Vec::new();
        conjuncts(cur, &mut items);
        let mut guarded = Vec::new();
        let mut matrix = Vec::new();
        for item in items {
            match &item {
                _ if flat(&item) => {
                    if item != Formula::top() {
                        matrix.push(item);
                    }
                }
                a if is_atom(a) => guarded.push(GuardedAtom {
                    guard: Formula::top(),
                    atom: item.clone(),
                }),
                Formula::Hook(g, a) if g.is_first_order() && is_atom(a) => guarded.push(GuardedAtom {
                    guard: (**g).clone(),
                    atom: (**a).clone(),
                }),
                other => return Err(RewriteError::Shape(other.to_string())),
            }
        }
        let mut view = NormalFormView {
            blocks,
            guarded,
            matrix: Formula::conj(matrix),
            flagged: Vec::new(),
        };
        view.flagged = view.unusual_guards();
        Ok(view)
    }

    fn unusual_guards(&self) -> Vec<usize> {
        let last: BTreeSet<String> = self
            .blocks
            .last()
            .map(|b| b.existentials.iter().cloned().collect())
            .unwrap_or_default();
        self.guarded
            .iter()
            .enumerate()
            .filter(|(_, g)| !quantifier_free(&g.guard) || !free_vars(&g.guard).is_subset(&last))
            .map(|(i, _)| i)
            .collect()
    }
}

impl fmt::Display for NormalFormView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut prefix = Vec::new();
        for b in &self.blocks {
            if !b.universals.is_empty() {
                prefix.push(format!("forall {}", b.universals.join(" ")));
            }
            if !b.existentials.is_empty() {
                prefix.push(format!("exists {}", b.existentials.join(" ")));
            }
        }
        writeln!(f, "prefix: {}", prefix.join(" . "))?;
        for (i, g) in self.guarded.iter().enumerate() {
            let mark = if self.flagged.contains(&i) { " (flagged guard)" } else { "" };
            writeln!(f, "guarded: {} => {}{}", g.guard, g.atom, mark)?;
        }
        write!(f, "matrix: {}", self.matrix)
    }
}

/// `θ ↪ α` for first-order `α`, as `¬θ ∨ (θ ∧ α)`. Guards with
/// quantifiers are left as hooks.
fn fold(item: &Formula) -> Formula {
    match item {
        Formula::Hook(g, a) if quantifier_free(g) => match nnf_negate(g) {
            Ok(neg) => Formula::or(neg, Formula::and((**g).clone(), (**a).clone())),
            Err(_) => item.clone(),
        },
        _ => item.clone(),
    }
}

fn prefix_depth(f: &Formula) -> (Vec<usize>, &Formula) {
    let mut path = Vec::new();
    let mut cur = f;
    while let Formula::Exists(_, b) | Formula::Forall(_, b) = cur {
        path.push(0);
        cur = b;
    }
    (path, cur)
}

/// Brings a sentence into normal form. The result is equivalent to `f` on
/// models with at least two elements, and the trace replays from `f` to
/// `view.to_formula()`.
pub fn to_normal_form(f: &Formula) -> Result<(NormalFormView, RewriteTrace), RewriteError> {
    let open = free_vars(f);
    if !open.is_empty() {
        return Err(RewriteError::Open(open.into_iter().collect::<Vec<_>>().join(", ")));
    }
    if f.contains_diamond() {
        return Err(RewriteError::Diamond);
    }
    let mut trace = RewriteTrace::new();
    let g = ensure_renamed(f.clone(), &mut trace);
    let (g, t) = to_prenex(&g)?;
    trace.extend(t);
    let (g, t) = disj_to_hook(&g)?;
    trace.extend(t);
    let (g, t) = to_prenex(&g)?;
    trace.extend(t);
    let (g, t) = hook_normalize(&g)?;
    trace.extend(t);

    let (path, body) = prefix_depth(&g);
    let mut items = Vec::new();
    conjuncts(body, &mut items);
    let mut guarded = Vec::new();
    let mut matrix = Vec::new();
    for item in items {
        if flat(&item) {
            let folded = fold(&item);
            if folded != Formula::top() {
                matrix.push(folded);
            }
        } else if is_atom(&item) {
            guarded.push(GuardedAtom {
                guard: Formula::top(),
                atom: item,
            });
        } else if let Formula::Hook(guard, atom) = &item {
            if !is_atom(atom) {
                return Err(RewriteError::Shape(item.to_string()));
            }
            guarded.push(GuardedAtom {
                guard: (**guard).clone(),
                atom: (**atom).clone(),
            });
        } else {
            return Err(RewriteError::Shape(item.to_string()));
        }
    }
    let mut view = NormalFormView::from_formula(&g)?;
    view.guarded = guarded;
    view.matrix = Formula::conj(matrix);
    view.flagged = view.unusual_guards();

    let new_body = view.body();
    if new_body != *body {
        trace.steps.push(RewriteStep {
            rule: Rule::FoldMatrix,
            path,
            before: body.clone(),
            after: new_body,
            fresh: Vec::new(),
        });
    }
    if !view.flagged.is_empty() {
        trace.note("some guards are not quantifier-free formulas over the last existential block");
    }
    Ok((view, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn disjunction_example() {
        let f = p("forall x. (all(x) \\/ x = x)");
        let (view, trace) = to_normal_form(&f).unwrap();
        assert_eq!(view.blocks.len(), 1);
        assert_eq!(view.blocks[0].universals, vec!["x"]);
        assert_eq!(view.blocks[0].existentials, vec!["q1", "q2"]);
        assert_eq!(view.guarded.len(), 1);
        assert_eq!(view.guarded[0].guard, p("q1 = q2"));
        assert!(view.matrix.is_first_order());
        assert!(view.flagged.is_empty());
        assert_eq!(trace.replay(&f).unwrap(), view.to_formula());
    }

    #[test]
    fn dependency_free_sentence() {
        let (view, _) = to_normal_form(&p("forall x. exists y. E(x,y)")).unwrap();
        assert!(view.guarded.is_empty());
        assert_eq!(view.matrix, p("E(x,y)"));
    }

    #[test]
    fn nonconn_shape() {
        let f = p("exists x y. (const(y) /\\ forall z. (E(x,z) => inc(z ; x)) /\\ x != y)");
        let (view, trace) = to_normal_form(&f).unwrap();
        let prefix: Vec<_> = view.prefix_vars();
        assert_eq!(&prefix[..3], &["x", "y", "z"]);
        assert_eq!(view.blocks[0].existentials, vec!["x", "y"]);
        assert_eq!(view.blocks[1].universals, vec!["z"]);
        let names: Vec<String> = view.guarded.iter().map(|g| g.atom.to_string()).collect();
        assert_eq!(names, vec!["const(y)", "inc(z ; x)"]);
        assert_eq!(view.flagged, vec![1]);
        assert_eq!(view.to_formula().dep_counts(), f.dep_counts());
        assert_eq!(trace.replay(&f).unwrap(), view.to_formula());
    }

    #[test]
    fn view_round_trips() {
        for s in [
            "forall x. (all(x) \\/ x = x)",
            "exists y. all(y)",
            "forall x. exists y. (E(x,y) /\\ (all(x) \\/ (const(y) /\\ x != y)))",
            "top",
        ] {
            let (view, _) = to_normal_form(&p(s)).unwrap();
            assert_eq!(NormalFormView::from_formula(&view.to_formula()).unwrap(), view, "{s}");
        }
    }

    #[test]
    fn rejects_open_and_diamond() {
        assert!(matches!(to_normal_form(&p("all(x)")), Err(RewriteError::Open(_))));
        assert!(matches!(to_normal_form(&p("<> top")), Err(RewriteError::Diamond)));
    }
}
