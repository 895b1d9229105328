//! Terms, formulas and signatures, plus variable hygiene helpers.
//!
//! Formulas are kept in negation normal form by construction: negation only
//! exists as the `positive` flag on relation and equality literals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::deps::Registry;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    /// A constant symbol; resolved against the model when evaluated.
    Const(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Top,
    Bot,
    Rel {
        name: String,
        args: Vec<Term>,
        positive: bool,
    },
    Eq {
        lhs: Term,
        rhs: Term,
        positive: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Lit(Literal),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    /// `θ ↪ φ`; the antecedent is first-order.
    Hook(Box<Formula>, Box<Formula>),
    Diamond(Box<Formula>),
    /// A registered dependency atom such as `const(x)` or `inc(x ; y)`.
    Dep { name: String, args: Vec<Term> },
    /// Inline dependency `[R : t⃗] { sentence }`.
    Generic {
        rel: String,
        args: Vec<Term>,
        sentence: Box<Formula>,
    },
}

impl Formula {
    pub fn top() -> Formula {
        Formula::Lit(Literal::Top)
    }

    pub fn bot() -> Formula {
        Formula::Lit(Literal::Bot)
    }

    pub fn eq(lhs: Term, rhs: Term) -> Formula {
        Formula::Lit(Literal::Eq {
            lhs,
            rhs,
            positive: true,
        })
    }

    pub fn neq(lhs: Term, rhs: Term) -> Formula {
        Formula::Lit(Literal::Eq {
            lhs,
            rhs,
            positive: false,
        })
    }

    pub fn var_eq(a: &str, b: &str) -> Formula {
        Formula::eq(Term::var(a), Term::var(b))
    }

    pub fn var_neq(a: &str, b: &str) -> Formula {
        Formula::neq(Term::var(a), Term::var(b))
    }

    pub fn rel(name: impl Into<String>, args: Vec<Term>) -> Formula {
        Formula::Lit(Literal::Rel {
            name: name.into(),
            args,
            positive: true,
        })
    }

    pub fn not_rel(name: impl Into<String>, args: Vec<Term>) -> Formula {
        Formula::Lit(Literal::Rel {
            name: name.into(),
            args,
            positive: false,
        })
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(v: impl Into<String>, body: Formula) -> Formula {
        Formula::Exists(v.into(), Box::new(body))
    }

    pub fn forall(v: impl Into<String>, body: Formula) -> Formula {
        Formula::Forall(v.into(), Box::new(body))
    }

    pub fn hook(guard: Formula, body: Formula) -> Formula {
        Formula::Hook(Box::new(guard), Box::new(body))
    }

    pub fn diamond(body: Formula) -> Formula {
        Formula::Diamond(Box::new(body))
    }

    pub fn dep(name: impl Into<String>, args: Vec<Term>) -> Formula {
        Formula::Dep {
            name: name.into(),
            args,
        }
    }

    pub fn generic(rel: impl Into<String>, args: Vec<Term>, sentence: Formula) -> Formula {
        Formula::Generic {
            rel: rel.into(),
            args,
            sentence: Box::new(sentence),
        }
    }

    /// `∃v₁…∃vₙ body`, innermost binder last.
    pub fn exists_all<S: AsRef<str>>(vars: &[S], body: Formula) -> Formula {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::exists(v.as_ref(), acc))
    }

    pub fn forall_all<S: AsRef<str>>(vars: &[S], body: Formula) -> Formula {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::forall(v.as_ref(), acc))
    }

    /// Right-nested conjunction; `top` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut items: Vec<Formula> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Formula::top();
        };
        while let Some(f) = items.pop() {
            acc = Formula::and(f, acc);
        }
        acc
    }

    /// Right-nested disjunction; `bot` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut items: Vec<Formula> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Formula::bot();
        };
        while let Some(f) = items.pop() {
            acc = Formula::or(f, acc);
        }
        acc
    }

    /// Componentwise equality of two term tuples, as a conjunction.
    pub fn tuple_eq(lhs: &[Term], rhs: &[Term]) -> Formula {
        Formula::conj(
            lhs.iter()
                .zip(rhs)
                .map(|(a, b)| Formula::eq(a.clone(), b.clone())),
        )
    }

    /// `t⃗ ≠ u⃗`, i.e. some component differs.
    pub fn tuple_neq(lhs: &[Term], rhs: &[Term]) -> Formula {
        Formula::disj(
            lhs.iter()
                .zip(rhs)
                .map(|(a, b)| Formula::neq(a.clone(), b.clone())),
        )
    }

    pub fn is_first_order(&self) -> bool {
        match self {
            Formula::Lit(_) => true,
            Formula::And(a, b) | Formula::Or(a, b) => a.is_first_order() && b.is_first_order(),
            Formula::Exists(_, b) | Formula::Forall(_, b) => b.is_first_order(),
            Formula::Hook(..) | Formula::Diamond(_) | Formula::Dep { .. } | Formula::Generic { .. } => {
                false
            }
        }
    }

    pub fn is_sentence(&self) -> bool {
        free_vars(self).is_empty()
    }

    pub fn contains_diamond(&self) -> bool {
        self.any_node(&mut |f| matches!(f, Formula::Diamond(_)))
    }

    /// True if some node satisfies `pred`. Does not look inside generic
    /// dependency sentences.
    pub fn any_node(&self, pred: &mut dyn FnMut(&Formula) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Hook(a, b) => {
                a.any_node(pred) || b.any_node(pred)
            }
            Formula::Exists(_, b) | Formula::Forall(_, b) | Formula::Diamond(b) => b.any_node(pred),
            Formula::Lit(_) | Formula::Dep { .. } | Formula::Generic { .. } => false,
        }
    }

    /// Occurrence count of dependency atoms per name. Generic atoms are
    /// counted under `[R]`.
    pub fn dep_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        self.any_node(&mut |f| {
            match f {
                Formula::Dep { name, .. } => *out.entry(name.clone()).or_insert(0) += 1,
                Formula::Generic { rel, .. } => *out.entry(format!("[{rel}]")).or_insert(0) += 1,
                _ => {}
            }
            false
        });
        out
    }

    pub fn dep_count(&self, name: &str) -> usize {
        self.dep_counts().get(name).copied().unwrap_or(0)
    }

    /// Universal quantifiers outside hook antecedents and generic sentences.
    pub fn universal_count(&self) -> usize {
        match self {
            Formula::Forall(_, b) => 1 + b.universal_count(),
            Formula::Exists(_, b) | Formula::Diamond(b) | Formula::Hook(_, b) => b.universal_count(),
            Formula::And(a, b) | Formula::Or(a, b) => a.universal_count() + b.universal_count(),
            Formula::Lit(_) | Formula::Dep { .. } | Formula::Generic { .. } => 0,
        }
    }

    /// Number of AST nodes, not counting generic sentences.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.any_node(&mut |_| {
            n += 1;
            false
        });
        n
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parse::print_formula(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parse::print_term(self))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub relations: BTreeMap<String, usize>,
    pub constants: BTreeSet<String>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn with_relation(mut self, name: impl Into<String>, arity: usize) -> Signature {
        self.relations.insert(name.into(), arity);
        self
    }

    /// Relation symbols and constants occurring in `f` (including inside
    /// hook antecedents), with arities as used. Symbols bound by generic
    /// atoms are excluded.
    pub fn of_formula(f: &Formula) -> Signature {
        let mut sig = Signature::new();
        collect_sig(f, &mut sig, &BTreeSet::new());
        sig
    }
}

fn collect_terms(args: &[Term], sig: &mut Signature) {
    for t in args {
        if let Term::Const(c) = t {
            sig.constants.insert(c.clone());
        }
    }
}

fn collect_sig(f: &Formula, sig: &mut Signature, local: &BTreeSet<String>) {
    match f {
        Formula::Lit(Literal::Rel { name, args, .. }) => {
            if !local.contains(name) {
                sig.relations.insert(name.clone(), args.len());
            }
            collect_terms(args, sig);
        }
        Formula::Lit(Literal::Eq { lhs, rhs, .. }) => {
            collect_terms(std::slice::from_ref(lhs), sig);
            collect_terms(std::slice::from_ref(rhs), sig);
        }
        Formula::Lit(_) => {}
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Hook(a, b) => {
            collect_sig(a, sig, local);
            collect_sig(b, sig, local);
        }
        Formula::Exists(_, b) | Formula::Forall(_, b) | Formula::Diamond(b) => {
            collect_sig(b, sig, local)
        }
        Formula::Dep { args, .. } => collect_terms(args, sig),
        Formula::Generic {
            rel,
            args,
            sentence,
        } => {
            collect_terms(args, sig);
            let mut inner = local.clone();
            inner.insert(rel.clone());
            collect_sig(sentence, sig, &inner);
        }
    }
}

fn term_vars<'a>(args: impl IntoIterator<Item = &'a Term>, out: &mut BTreeSet<String>) {
    for t in args {
        if let Term::Var(v) = t {
            out.insert(v.clone());
        }
    }
}

pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    free_into(f, &mut out);
    out
}

fn free_into(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Lit(Literal::Rel { args, .. }) => term_vars(args, out),
        Formula::Lit(Literal::Eq { lhs, rhs, .. }) => term_vars([lhs, rhs], out),
        Formula::Lit(_) => {}
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Hook(a, b) => {
            free_into(a, out);
            free_into(b, out);
        }
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            let mut inner = BTreeSet::new();
            free_into(b, &mut inner);
            inner.remove(v);
            out.extend(inner);
        }
        Formula::Diamond(b) => free_into(b, out),
        Formula::Dep { args, .. } | Formula::Generic { args, .. } => term_vars(args, out),
    }
}

/// Every variable name occurring in `f`, bound or free. Generic sentences
/// are a separate scope and are skipped.
pub fn all_vars(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    all_into(f, &mut out);
    out
}

fn all_into(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Lit(Literal::Rel { args, .. }) => term_vars(args, out),
        Formula::Lit(Literal::Eq { lhs, rhs, .. }) => term_vars([lhs, rhs], out),
        Formula::Lit(_) => {}
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Hook(a, b) => {
            all_into(a, out);
            all_into(b, out);
        }
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            out.insert(v.clone());
            all_into(b, out);
        }
        Formula::Diamond(b) => all_into(b, out),
        Formula::Dep { args, .. } | Formula::Generic { args, .. } => term_vars(args, out),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("not a first-order formula: {0}")]
    NotFirstOrder(String),
}

/// Classical negation pushed down to the literals.
pub fn nnf_negate(theta: &Formula) -> Result<Formula, AstError> {
    Ok(match theta {
        Formula::Lit(Literal::Top) => Formula::bot(),
        Formula::Lit(Literal::Bot) => Formula::top(),
        Formula::Lit(Literal::Rel {
            name,
            args,
            positive,
        }) => Formula::Lit(Literal::Rel {
            name: name.clone(),
            args: args.clone(),
            positive: !positive,
        }),
        Formula::Lit(Literal::Eq { lhs, rhs, positive }) => Formula::Lit(Literal::Eq {
            lhs: lhs.clone(),
            rhs: rhs.clone(),
            positive: !positive,
        }),
        Formula::And(a, b) => Formula::or(nnf_negate(a)?, nnf_negate(b)?),
        Formula::Or(a, b) => Formula::and(nnf_negate(a)?, nnf_negate(b)?),
        Formula::Exists(v, b) => Formula::forall(v.clone(), nnf_negate(b)?),
        Formula::Forall(v, b) => Formula::exists(v.clone(), nnf_negate(b)?),
        other => return Err(AstError::NotFirstOrder(other.to_string())),
    })
}

/// `base` with trailing digits stripped, followed by the least positive
/// integer that makes the name avoid `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    (1..)
        .map(|i| format!("{stem}{i}"))
        .find(|c| !avoid.contains(c))
        .expect("unbounded suffix search")
}

/// `n` distinct names of the form `qN`, none in `avoid`.
pub fn fresh_vars(n: usize, avoid: &BTreeSet<String>) -> Vec<String> {
    let mut avoid = avoid.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = fresh_name("q", &avoid);
        avoid.insert(v.clone());
        out.push(v);
    }
    out
}

/// Renames binders so that no variable is bound twice and no variable is
/// both bound and free. Free variables are untouched and the first binder of
/// each name keeps it when possible.
pub fn rename_apart(f: &Formula) -> Formula {
    let free = free_vars(f);
    let mut avoid = all_vars(f);
    let mut seen = BTreeSet::new();
    let mut scope = Vec::new();
    rename_rec(f, &free, &mut avoid, &mut seen, &mut scope)
}

fn lookup<'a>(scope: &'a [(String, String)], v: &'a str) -> &'a str {
    scope
        .iter()
        .rev()
        .find(|(old, _)| old == v)
        .map(|(_, new)| new.as_str())
        .unwrap_or(v)
}

fn rename_terms(args: &[Term], scope: &[(String, String)]) -> Vec<Term> {
    args.iter()
        .map(|t| match t {
            Term::Var(v) => Term::Var(lookup(scope, v).to_string()),
            c => c.clone(),
        })
        .collect()
}

fn rename_rec(
    f: &Formula,
    free: &BTreeSet<String>,
    avoid: &mut BTreeSet<String>,
    seen: &mut BTreeSet<String>,
    scope: &mut Vec<(String, String)>,
) -> Formula {
    match f {
        Formula::Lit(Literal::Rel {
            name,
            args,
            positive,
        }) => Formula::Lit(Literal::Rel {
            name: name.clone(),
            args: rename_terms(args, scope),
            positive: *positive,
        }),
        Formula::Lit(Literal::Eq { lhs, rhs, positive }) => {
            let t = rename_terms(&[lhs.clone(), rhs.clone()], scope);
            Formula::Lit(Literal::Eq {
                lhs: t[0].clone(),
                rhs: t[1].clone(),
                positive: *positive,
            })
        }
        Formula::Lit(l) => Formula::Lit(l.clone()),
        Formula::And(a, b) => Formula::and(
            rename_rec(a, free, avoid, seen, scope),
            rename_rec(b, free, avoid, seen, scope),
        ),
        Formula::Or(a, b) => Formula::or(
            rename_rec(a, free, avoid, seen, scope),
            rename_rec(b, free, avoid, seen, scope),
        ),
        Formula::Hook(a, b) => Formula::hook(
            rename_rec(a, free, avoid, seen, scope),
            rename_rec(b, free, avoid, seen, scope),
        ),
        Formula::Diamond(b) => Formula::diamond(rename_rec(b, free, avoid, seen, scope)),
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            let new = if free.contains(v) || seen.contains(v) {
                let n = fresh_name(v, avoid);
                avoid.insert(n.clone());
                n
            } else {
                v.clone()
            };
            seen.insert(v.clone());
            seen.insert(new.clone());
            scope.push((v.clone(), new.clone()));
            let body = rename_rec(b, free, avoid, seen, scope);
            scope.pop();
            if matches!(f, Formula::Exists(..)) {
                Formula::exists(new, body)
            } else {
                Formula::forall(new, body)
            }
        }
        Formula::Dep { name, args } => Formula::Dep {
            name: name.clone(),
            args: rename_terms(args, scope),
        },
        Formula::Generic {
            rel,
            args,
            sentence,
        } => Formula::Generic {
            rel: rel.clone(),
            args: rename_terms(args, scope),
            sentence: sentence.clone(),
        },
    }
}

/// True if every binder name is unique and no bound name also occurs free.
pub fn is_renamed_apart(f: &Formula) -> bool {
    let free = free_vars(f);
    let mut seen = BTreeSet::new();
    let mut ok = true;
    f.any_node(&mut |g| {
        if let Formula::Exists(v, _) | Formula::Forall(v, _) = g {
            if free.contains(v) || !seen.insert(v.clone()) {
                ok = false;
            }
        }
        // binders inside hook antecedents
        if let Formula::Hook(theta, _) = g {
            theta.any_node(&mut |h| {
                if let Formula::Exists(v, _) | Formula::Forall(v, _) = h {
                    if free.contains(v) || !seen.insert(v.clone()) {
                        ok = false;
                    }
                }
                false
            });
        }
        !ok
    });
    ok
}

/// One problem found by [`well_formed`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
    pub subformula: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}`", self.message, self.subformula)
    }
}

/// Checks arities against `sig`, dependency names against `registry`, and
/// the first-order restrictions on hook antecedents and generic sentences.
/// Constants are only checked when `sig` declares some.
pub fn well_formed(f: &Formula, sig: &Signature, registry: &Registry) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    wf_rec(f, sig, registry, &mut diags);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

fn diag(diags: &mut Vec<Diagnostic>, f: &Formula, message: String) {
    diags.push(Diagnostic {
        message,
        subformula: f.to_string(),
    });
}

fn wf_terms(f: &Formula, args: &[Term], sig: &Signature, diags: &mut Vec<Diagnostic>) {
    if sig.constants.is_empty() {
        return;
    }
    for t in args {
        if let Term::Const(c) = t {
            if !sig.constants.contains(c) {
                diag(diags, f, format!("unknown constant {c}"));
            }
        }
    }
}

fn wf_rec(f: &Formula, sig: &Signature, registry: &Registry, diags: &mut Vec<Diagnostic>) {
    match f {
        Formula::Lit(Literal::Rel { name, args, .. }) => {
            match sig.relations.get(name) {
                None => diag(diags, f, format!("unknown relation {name}")),
                Some(&k) if k != args.len() => diag(
                    diags,
                    f,
                    format!("arity mismatch: {name} has arity {k}, used with {}", args.len()),
                ),
                Some(_) => {}
            }
            wf_terms(f, args, sig, diags);
        }
        Formula::Lit(Literal::Eq { lhs, rhs, .. }) => {
            wf_terms(f, &[lhs.clone(), rhs.clone()], sig, diags)
        }
        Formula::Lit(_) => {}
        Formula::And(a, b) | Formula::Or(a, b) => {
            wf_rec(a, sig, registry, diags);
            wf_rec(b, sig, registry, diags);
        }
        Formula::Exists(_, b) | Formula::Forall(_, b) | Formula::Diamond(b) => {
            wf_rec(b, sig, registry, diags)
        }
        Formula::Hook(theta, body) => {
            if !theta.is_first_order() {
                diag(diags, f, "hook antecedent is not first-order".into());
            } else {
                wf_rec(theta, sig, registry, diags);
            }
            wf_rec(body, sig, registry, diags);
        }
        Formula::Dep { name, args } => {
            if registry.lookup(name, args.len()).is_none() {
                if registry.contains_name(name) {
                    diag(
                        diags,
                        f,
                        format!("arity mismatch: dependency {name} not available at arity {}", args.len()),
                    );
                } else {
                    diag(diags, f, format!("unknown dependency {name}"));
                }
            }
            wf_terms(f, args, sig, diags);
        }
        Formula::Generic {
            rel,
            args,
            sentence,
        } => {
            if args.is_empty() {
                diag(diags, f, "generic dependency needs at least one term".into());
            }
            if !sentence.is_first_order() {
                diag(diags, f, "generic dependency sentence is not first-order".into());
            }
            if !sentence.is_sentence() {
                diag(diags, f, "generic dependency body has free variables".into());
            }
            let mut inner = sig.clone();
            inner.relations.insert(rel.clone(), args.len());
            wf_rec(sentence, &inner, registry, diags);
            wf_terms(f, args, sig, diags);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn free_vars_examples() {
        assert_eq!(free_vars(&p("x = y")), set(&["x", "y"]));
        assert_eq!(free_vars(&p("exists x. x = y")), set(&["y"]));
        assert_eq!(free_vars(&p("E(x,z) => inc(z ; x)")), set(&["x", "z"]));
    }

    #[test]
    fn nnf_negate_examples() {
        assert_eq!(nnf_negate(&p("x = y")).unwrap(), p("x != y"));
        assert_eq!(nnf_negate(&p("E(x,y) /\\ x = y")).unwrap(), p("!E(x,y) \\/ x != y"));
        assert_eq!(nnf_negate(&p("exists x. E(x,x)")).unwrap(), p("forall x. !E(x,x)"));
        assert!(nnf_negate(&p("const(x)")).is_err());
    }

    #[test]
    fn rename_apart_examples() {
        assert_eq!(
            rename_apart(&p("(exists x. x = x) /\\ (exists x. x = x)")),
            p("(exists x. x = x) /\\ (exists x1. x1 = x1)")
        );
        assert_eq!(rename_apart(&p("x = x /\\ (exists x. x = x)")), p("x = x /\\ (exists x1. x1 = x1)"));
        assert_eq!(rename_apart(&p("E(x,y)")), p("E(x,y)"));
    }

    #[test]
    fn rename_apart_avoids_existing_suffixes() {
        let f = p("(exists x. x = x1) /\\ (exists x. x = x)");
        let g = rename_apart(&f);
        assert_eq!(g, p("(exists x. x = x1) /\\ (exists x2. x2 = x2)"));
        assert!(is_renamed_apart(&g));
    }

    #[test]
    fn fresh_vars_examples() {
        assert_eq!(fresh_vars(2, &set(&["q1"])), vec!["q2", "q3"]);
        assert!(fresh_vars(0, &BTreeSet::new()).is_empty());
        assert_eq!(fresh_vars(1, &BTreeSet::new()), vec!["q1"]);
    }

    #[test]
    fn well_formed_examples() {
        let reg = Registry::builtin();
        let sig = Signature::new().with_relation("R", 1);
        assert!(well_formed(&p("const(x)"), &sig, &reg).is_ok());
        let errs = well_formed(&p("R(x,y)"), &sig, &reg).unwrap_err();
        assert!(errs[0].message.contains("arity mismatch"));
        let bad = Formula::hook(p("const(x)"), p("x = x"));
        let errs = well_formed(&bad, &sig, &reg).unwrap_err();
        assert!(errs[0].message.contains("not first-order"));
    }

    #[test]
    fn counts() {
        let f = p("forall x. (all(x) \\/ exists y. forall z. (const(y) /\\ all(z)))");
        assert_eq!(f.universal_count(), 2);
        assert_eq!(f.dep_count("all"), 2);
        assert_eq!(f.dep_count("const"), 1);
    }
}
