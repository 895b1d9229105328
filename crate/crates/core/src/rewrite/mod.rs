//! Equivalence-preserving rewrite passes with replayable traces.
//!
//! Every pass rewrites one redex at a time, leftmost-outermost, and records
//! the rule, the position, the subformula before and after, and the fresh
//! variables it introduced. Passes never rewrite inside hook antecedents or
//! inside the sentences of generic dependency atoms.

mod normal_form;
mod passes;
mod totality;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ast::{all_vars, fresh_name, Formula};

pub use normal_form::{to_normal_form, GuardedAtom, NormalFormView, QuantBlock};
pub use passes::{disj_to_hook, expand_macros, hook_normalize, to_prenex, MacroSet};
pub use totality::{eliminate_totality, eliminate_totality_once};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    RenameApart,
    ExpandNc,
    ExpandNe,
    ExpandDiamond,
    ExpandInc,
    /// `(∃vψ₁) ∘ ψ₂ ⇒ ∃v(ψ₁ ∘ ψ₂)` for `∘ ∈ {∧, ∨}`, either side.
    PullExists,
    /// `(∀vψ₁) ∧ ψ₂ ⇒ ∀v(ψ₁ ∧ ψ₂)`, either side.
    PullForallAnd,
    /// `(∀vψ₁) ∨ ψ₂ ⇒ ∃pq∀v((p=q ∧ ψ₁) ∨ (p≠q ∧ ψ₂))`, either side.
    PullForallOr,
    /// `θ ↪ Qyψ ⇒ Qy(θ ↪ ψ)`.
    HookQuantifier,
    DisjToHook,
    HookMerge,
    HookDistribute,
    /// Hooks with first-order consequents folded into the matrix.
    FoldMatrix,
    TotalityElimination,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::RenameApart => "rename-apart",
            Rule::ExpandNc => "expand-nc",
            Rule::ExpandNe => "expand-ne",
            Rule::ExpandDiamond => "expand-diamond",
            Rule::ExpandInc => "expand-inc",
            Rule::PullExists => "pull-exists",
            Rule::PullForallAnd => "pull-forall-and",
            Rule::PullForallOr => "pull-forall-or",
            Rule::HookQuantifier => "hook-quantifier",
            Rule::DisjToHook => "disj-to-hook",
            Rule::HookMerge => "hook-merge",
            Rule::HookDistribute => "hook-distribute",
            Rule::FoldMatrix => "fold-matrix",
            Rule::TotalityElimination => "totality-elimination",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub rule: Rule,
    /// Child indices from the root: 0/1 for the operands of ∧, ∨ and ↪
    /// (0 is the antecedent), 0 for the body of ∃, ∀ and ◇.
    pub path: Vec<usize>,
    pub before: Formula,
    pub after: Formula,
    pub fresh: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewriteTrace {
    pub steps: Vec<RewriteStep>,
    /// Assumptions the result relies on, e.g. models with two elements.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: path {path:?} does not exist")]
    BadPath { step: usize, path: Vec<usize> },
    #[error("step {step}: subformula at {path:?} is `{found}`, trace expects `{expected}`")]
    Mismatch {
        step: usize,
        path: Vec<usize>,
        found: String,
        expected: String,
    },
}

impl RewriteTrace {
    pub fn new() -> RewriteTrace {
        RewriteTrace::default()
    }

    pub fn extend(&mut self, other: RewriteTrace) {
        self.steps.extend(other.steps);
        for n in other.notes {
            self.note(n);
        }
    }

    pub fn note(&mut self, n: impl Into<String>) {
        let n = n.into();
        if !self.notes.contains(&n) {
            self.notes.push(n);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Applies the recorded steps to `input`, checking each `before`.
    pub fn replay(&self, input: &Formula) -> Result<Formula, ReplayError> {
        let mut cur = input.clone();
        for (i, step) in self.steps.iter().enumerate() {
            let found = subformula(&cur, &step.path).ok_or_else(|| ReplayError::BadPath {
                step: i,
                path: step.path.clone(),
            })?;
            if *found != step.before {
                return Err(ReplayError::Mismatch {
                    step: i,
                    path: step.path.clone(),
                    found: found.to_string(),
                    expected: step.before.to_string(),
                });
            }
            cur = replace_at(&cur, &step.path, step.after.clone());
        }
        Ok(cur)
    }
}

impl fmt::Display for RewriteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            let path: Vec<String> = s.path.iter().map(|p| p.to_string()).collect();
            write!(f, "{:>3}. {} at [{}]", i + 1, s.rule, path.join("."))?;
            if !s.fresh.is_empty() {
                write!(f, " fresh {}", s.fresh.join(","))?;
            }
            writeln!(f)?;
            writeln!(f, "     {}", s.before)?;
            writeln!(f, "  => {}", s.after)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("formula contains ◇; expand it first")]
    Diamond,
    #[error("formula is not a sentence: free variables {0}")]
    Open(String),
    #[error("side condition violated: `{var}` occurs in `{context}`")]
    SideCondition { var: String, context: String },
    #[error("no totality atom in the normal form")]
    NoTotalityAtom,
    #[error("rewriting did not terminate within {0} steps")]
    StepLimit(usize),
    #[error("totality elimination did not finish within {0} rounds")]
    IterationCap(usize),
    #[error("unexpected shape in normal form: {0}")]
    Shape(String),
}

/// The subformula at `path`.
pub fn subformula<'f>(f: &'f Formula, path: &[usize]) -> Option<&'f Formula> {
    let Some((&head, rest)) = path.split_first() else {
        return Some(f);
    };
    let child = match (f, head) {
        (Formula::And(a, _) | Formula::Or(a, _) | Formula::Hook(a, _), 0) => a,
        (Formula::And(_, b) | Formula::Or(_, b) | Formula::Hook(_, b), 1) => b,
        (Formula::Exists(_, b) | Formula::Forall(_, b) | Formula::Diamond(b), 0) => b,
        _ => return None,
    };
    subformula(child, rest)
}

/// `f` with the subformula at `path` replaced. Panics on a bad path.
pub fn replace_at(f: &Formula, path: &[usize], new: Formula) -> Formula {
    let Some((&head, rest)) = path.split_first() else {
        return new;
    };
    match (f, head) {
        (Formula::And(a, b), 0) => Formula::and(replace_at(a, rest, new), (**b).clone()),
        (Formula::And(a, b), 1) => Formula::and((**a).clone(), replace_at(b, rest, new)),
        (Formula::Or(a, b), 0) => Formula::or(replace_at(a, rest, new), (**b).clone()),
        (Formula::Or(a, b), 1) => Formula::or((**a).clone(), replace_at(b, rest, new)),
        (Formula::Hook(a, b), 0) => Formula::hook(replace_at(a, rest, new), (**b).clone()),
        (Formula::Hook(a, b), 1) => Formula::hook((**a).clone(), replace_at(b, rest, new)),
        (Formula::Exists(v, b), 0) => Formula::exists(v.clone(), replace_at(b, rest, new)),
        (Formula::Forall(v, b), 0) => Formula::forall(v.clone(), replace_at(b, rest, new)),
        (Formula::Diamond(b), 0) => Formula::diamond(replace_at(b, rest, new)),
        _ => panic!("invalid rewrite path"),
    }
}

/// Source of fresh variable names avoiding everything seen so far.
pub(crate) struct FreshGen {
    avoid: BTreeSet<String>,
}

impl FreshGen {
    pub(crate) fn for_formula(f: &Formula) -> FreshGen {
        FreshGen { avoid: all_vars(f) }
    }

    pub(crate) fn fresh(&mut self, base: &str) -> String {
        let v = fresh_name(base, &self.avoid);
        self.avoid.insert(v.clone());
        v
    }
}

pub(crate) type Rewrite = (Rule, Formula, Vec<String>);

const STEP_LIMIT: usize = 200_000;

fn find_redex(
    f: &Formula,
    path: &mut Vec<usize>,
    rule: &mut dyn FnMut(&Formula, &mut FreshGen) -> Result<Option<Rewrite>, RewriteError>,
    gen: &mut FreshGen,
) -> Result<Option<(Vec<usize>, Rewrite)>, RewriteError> {
    if let Some(r) = rule(f, gen)? {
        return Ok(Some((path.clone(), r)));
    }
    let children: &[(usize, &Formula)] = &match f {
        Formula::And(a, b) | Formula::Or(a, b) => vec![(0, &**a), (1, &**b)],
        Formula::Hook(_, b) => vec![(1, &**b)],
        Formula::Exists(_, b) | Formula::Forall(_, b) | Formula::Diamond(b) => vec![(0, &**b)],
        _ => vec![],
    };
    for &(i, c) in children {
        path.push(i);
        let r = find_redex(c, path, rule, gen)?;
        path.pop();
        if r.is_some() {
            return Ok(r);
        }
    }
    Ok(None)
}

/// Applies `rule` at the leftmost-outermost redex until none is left.
pub(crate) fn rewrite_fixpoint(
    f: Formula,
    trace: &mut RewriteTrace,
    gen: &mut FreshGen,
    mut rule: impl FnMut(&Formula, &mut FreshGen) -> Result<Option<Rewrite>, RewriteError>,
) -> Result<Formula, RewriteError> {
    let mut cur = f;
    for _ in 0..STEP_LIMIT {
        let mut path = Vec::new();
        match find_redex(&cur, &mut path, &mut rule, gen)? {
            None => return Ok(cur),
            Some((path, (rule_name, after, fresh))) => {
                let before = subformula(&cur, &path).expect("redex path").clone();
                cur = replace_at(&cur, &path, after.clone());
                trace.steps.push(RewriteStep {
                    rule: rule_name,
                    path,
                    before,
                    after,
                    fresh,
                });
            }
        }
    }
    Err(RewriteError::StepLimit(STEP_LIMIT))
}

/// Renames apart if needed, recording a single whole-formula step.
pub(crate) fn ensure_renamed(f: Formula, trace: &mut RewriteTrace) -> Formula {
    if crate::ast::is_renamed_apart(&f) {
        return f;
    }
    let g = crate::ast::rename_apart(&f);
    if g != f {
        trace.steps.push(RewriteStep {
            rule: Rule::RenameApart,
            path: Vec::new(),
            before: f,
            after: g.clone(),
            fresh: Vec::new(),
        });
    }
    g
}

pub(crate) const TWO_ELEMENTS: &str = "equivalence assumes models with at least two elements";
