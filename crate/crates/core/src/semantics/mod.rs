//! Models, assignments and teams, the team operations, Tarskian evaluation
//! and the lax team-semantics satisfaction relation.

mod engine;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::ast::{free_vars, Formula, Literal, Signature, Term};
use crate::deps::Registry;

pub use engine::Evaluator;

/// A domain element, as an index into the model's element list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elem(pub u16);

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Relation {
    arity: usize,
    tuples: BTreeSet<Vec<Elem>>,
}

impl Relation {
    pub fn new(arity: usize) -> Relation {
        Relation {
            arity,
            tuples: BTreeSet::new(),
        }
    }

    pub fn from_tuples(arity: usize, tuples: impl IntoIterator<Item = Vec<Elem>>) -> Relation {
        let tuples: BTreeSet<_> = tuples.into_iter().collect();
        assert!(tuples.iter().all(|t| t.len() == arity), "tuple of wrong arity");
        Relation { arity, tuples }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn tuples(&self) -> &BTreeSet<Vec<Elem>> {
        &self.tuples
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        self.tuples.contains(t)
    }

    pub fn insert(&mut self, t: Vec<Elem>) {
        assert_eq!(t.len(), self.arity, "tuple of wrong arity");
        self.tuples.insert(t);
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate element `{0}`")]
    DuplicateElement(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("duplicate relation declaration `{0}`")]
    DuplicateRelation(String),
    #[error("relation `{name}` has arity {arity} but a tuple has {found} elements")]
    TupleArity { name: String, arity: usize, found: usize },
    #[error("relation arity must be at least 1")]
    ZeroArity,
    #[error("duplicate constant `{0}`")]
    DuplicateConstant(String),
    #[error("domain must not be empty")]
    EmptyDomain,
    #[error("domain has more than 65535 elements")]
    TooLarge,
}

/// A finite relational structure. Elements are kept in declaration order,
/// which is the order used for canonical team encodings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    domain: Vec<String>,
    index: HashMap<String, Elem>,
    relations: BTreeMap<String, Relation>,
    constants: BTreeMap<String, Elem>,
}

impl Model {
    pub fn new(domain: Vec<String>) -> Result<Model, ModelError> {
        if domain.is_empty() {
            return Err(ModelError::EmptyDomain);
        }
        if domain.len() > u16::MAX as usize {
            return Err(ModelError::TooLarge);
        }
        let mut index = HashMap::new();
        for (i, d) in domain.iter().enumerate() {
            if index.insert(d.clone(), Elem(i as u16)).is_some() {
                return Err(ModelError::DuplicateElement(d.clone()));
            }
        }
        Ok(Model {
            domain,
            index,
            relations: BTreeMap::new(),
            constants: BTreeMap::new(),
        })
    }

    /// Domain `0, 1, …, n-1`.
    pub fn numbered(n: usize) -> Model {
        Model::new((0..n).map(|i| i.to_string()).collect()).expect("nonempty numbered domain")
    }

    pub fn size(&self) -> usize {
        self.domain.len()
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> + '_ {
        (0..self.domain.len()).map(|i| Elem(i as u16))
    }

    pub fn element(&self, name: &str) -> Option<Elem> {
        self.index.get(name).copied()
    }

    pub fn name(&self, e: Elem) -> &str {
        &self.domain[e.0 as usize]
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> &BTreeMap<String, Relation> {
        &self.relations
    }

    pub fn constants(&self) -> &BTreeMap<String, Elem> {
        &self.constants
    }

    /// Interpretation of a constant symbol: an explicit `const` declaration
    /// if present, otherwise the element with the same name.
    pub fn constant(&self, name: &str) -> Option<Elem> {
        self.constants.get(name).copied().or_else(|| self.element(name))
    }

    pub fn add_relation(&mut self, name: &str, rel: Relation) -> Result<(), ModelError> {
        if rel.arity == 0 {
            return Err(ModelError::ZeroArity);
        }
        if self.relations.contains_key(name) {
            return Err(ModelError::DuplicateRelation(name.to_string()));
        }
        if rel.tuples.iter().flatten().any(|e| e.0 as usize >= self.size()) {
            return Err(ModelError::UnknownElement(format!("#{}", self.size())));
        }
        self.relations.insert(name.to_string(), rel);
        Ok(())
    }

    pub fn add_relation_named(
        &mut self,
        name: &str,
        arity: usize,
        tuples: &[Vec<String>],
    ) -> Result<(), ModelError> {
        let mut rel = Relation::new(arity);
        for t in tuples {
            if t.len() != arity {
                return Err(ModelError::TupleArity {
                    name: name.to_string(),
                    arity,
                    found: t.len(),
                });
            }
            let mut row = Vec::with_capacity(arity);
            for e in t {
                row.push(self.element(e).ok_or_else(|| ModelError::UnknownElement(e.clone()))?);
            }
            rel.tuples.insert(row);
        }
        self.add_relation(name, rel)
    }

    pub fn add_constant(&mut self, name: &str, elem: &str) -> Result<(), ModelError> {
        let e = self.element(elem).ok_or_else(|| ModelError::UnknownElement(elem.to_string()))?;
        if self.constants.insert(name.to_string(), e).is_some() {
            return Err(ModelError::DuplicateConstant(name.to_string()));
        }
        Ok(())
    }

    /// Copy of the model with `name` interpreted as `rel`, replacing any
    /// existing interpretation.
    pub fn expanded(&self, name: &str, rel: Relation) -> Model {
        let mut m = self.clone();
        m.relations.insert(name.to_string(), rel);
        m
    }

    pub fn signature(&self) -> Signature {
        Signature {
            relations: self.relations.iter().map(|(n, r)| (n.clone(), r.arity)).collect(),
            constants: self
                .constants
                .keys()
                .cloned()
                .chain(self.domain.iter().cloned())
                .collect(),
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        if self.size() < 2 {
            vec!["model has fewer than two elements; equivalences that assume at least two elements do not apply".into()]
        } else {
            Vec::new()
        }
    }
}

/// A total function from its keys to domain elements.
pub type Assignment = BTreeMap<String, Elem>;

/// A set of assignments over a shared variable domain. Variables are kept
/// sorted and every row lists values in that order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Team {
    vars: Vec<String>,
    rows: BTreeSet<Vec<Elem>>,
}

impl Team {
    /// Empty team over `vars`.
    pub fn empty<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> Team {
        let mut vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        vars.sort();
        vars.dedup();
        Team {
            vars,
            rows: BTreeSet::new(),
        }
    }

    /// `{ε}`: the team with the single empty assignment.
    pub fn epsilon() -> Team {
        Team {
            vars: Vec::new(),
            rows: BTreeSet::from([Vec::new()]),
        }
    }

    /// Builds a team from rows given in the order of `vars`, which may be
    /// unsorted but must not repeat.
    pub fn from_rows(vars: Vec<String>, rows: impl IntoIterator<Item = Vec<Elem>>) -> Team {
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by(|&a, &b| vars[a].cmp(&vars[b]));
        let sorted: Vec<String> = order.iter().map(|&i| vars[i].clone()).collect();
        assert!(sorted.windows(2).all(|w| w[0] != w[1]), "duplicate team variable");
        let rows = rows
            .into_iter()
            .map(|r| {
                assert_eq!(r.len(), vars.len(), "row length mismatch");
                order.iter().map(|&i| r[i]).collect()
            })
            .collect();
        Team { vars: sorted, rows }
    }

    pub fn from_assignments<S: Into<String>>(
        vars: impl IntoIterator<Item = S>,
        assignments: impl IntoIterator<Item = Assignment>,
    ) -> Team {
        let mut t = Team::empty(vars);
        for s in assignments {
            t.insert(&s);
        }
        t
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn rows(&self) -> &BTreeSet<Vec<Elem>> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn var_index(&self, v: &str) -> Option<usize> {
        self.vars.binary_search_by(|x| x.as_str().cmp(v)).ok()
    }

    pub fn insert(&mut self, s: &Assignment) {
        let row = self
            .vars
            .iter()
            .map(|v| *s.get(v).unwrap_or_else(|| panic!("assignment lacks `{v}`")))
            .collect();
        self.rows.insert(row);
    }

    pub fn insert_row(&mut self, row: Vec<Elem>) {
        assert_eq!(row.len(), self.vars.len(), "row length mismatch");
        self.rows.insert(row);
    }

    pub fn assignments(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.rows.iter().map(move |r| self.vars.iter().cloned().zip(r.iter().copied()).collect())
    }

    pub fn contains(&self, s: &Assignment) -> bool {
        let row: Option<Vec<Elem>> = self.vars.iter().map(|v| s.get(v).copied()).collect();
        row.is_some_and(|r| self.rows.contains(&r))
    }

    pub fn is_subset(&self, other: &Team) -> bool {
        self.vars == other.vars && self.rows.is_subset(&other.rows)
    }

    pub fn union(&self, other: &Team) -> Team {
        assert_eq!(self.vars, other.vars, "union of teams over different domains");
        Team {
            vars: self.vars.clone(),
            rows: self.rows.union(&other.rows).cloned().collect(),
        }
    }

    /// `X|V`: restriction of every assignment to `vars` (which must be a
    /// subset of the team's variables).
    pub fn restrict_vars<S: AsRef<str>>(&self, vars: &[S]) -> Team {
        let mut keep: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        keep.sort();
        keep.dedup();
        let idx: Vec<usize> = keep
            .iter()
            .map(|v| self.var_index(v).unwrap_or_else(|| panic!("`{v}` not in team domain")))
            .collect();
        Team {
            vars: keep,
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
        }
    }

    /// Subteam of the rows accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[Elem]) -> bool) -> Team {
        Team {
            vars: self.vars.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// All subteams, as an iterator over bitmasks of the sorted rows.
    pub fn subteams(&self) -> impl Iterator<Item = Team> + '_ {
        let rows: Vec<&Vec<Elem>> = self.rows.iter().collect();
        assert!(rows.len() < 32, "too many rows to enumerate subteams");
        (0u32..(1u32 << rows.len())).map(move |mask| Team {
            vars: self.vars.clone(),
            rows: rows
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, r)| (*r).clone())
                .collect(),
        })
    }

    /// Same rows with `vars` added, each set to every domain element.
    pub fn pad(&self, m: &Model, extra: &[String]) -> Team {
        extra.iter().fold(self.clone(), |t, v| duplicate(m, &t, v))
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.vars.is_empty() {
            return f.write_str(if self.rows.is_empty() { "{}" } else { "{ε}" });
        }
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                let cells: Vec<String> = self
                    .vars
                    .iter()
                    .zip(r)
                    .map(|(v, e)| format!("{v}↦{}", e.0))
                    .collect();
                cells.join(" ")
            })
            .collect();
        write!(f, "{{{}}}", rows.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{name}` has arity {expected}, used with {found} terms")]
    RelationArity { name: String, expected: usize, found: usize },
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("unknown dependency `{name}` at arity {arity}")]
    UnknownDependency { name: String, arity: usize },
    #[error("dependency `{name}` has arity {expected}, used with {found} terms")]
    DependencyArity { name: String, expected: usize, found: usize },
    #[error("not a first-order formula: {0}")]
    NotFirstOrder(String),
    #[error("empty choice set for an assignment")]
    EmptyChoice,
    #[error("choice tuple length does not match the supplemented variables")]
    ChoiceArity,
    #[error("generic dependency sentence has free variables: {0}")]
    OpenGenericSentence(String),
    #[error("resource budget exhausted: {0}")]
    Budget(String),
}

impl EvalError {
    pub fn is_budget(&self) -> bool {
        matches!(self, EvalError::Budget(_))
    }
}

/// Caps on the work a single evaluation may do. Exceeding one raises
/// [`EvalError::Budget`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_team: usize,
    pub max_branches: u64,
    pub max_depth: usize,
    pub timeout: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget {
            max_team: 1 << 20,
            max_branches: 500_000_000,
            max_depth: 400,
            timeout: None,
        }
    }
}

/// Sound shortcuts in the evaluator; all off gives the definitional
/// enumeration of covers, choice functions and subteams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prunings {
    /// Singleton choices, partitions and singleton witnesses when every
    /// atom below is downward closed.
    pub downward: bool,
    /// Constant choice functions under a top-level `const` conjunct.
    pub constancy_guard: bool,
    /// Largest-satisfying-subteam computation for union-closed formulas.
    pub union: bool,
    /// Dependency-free subformulas are evaluated assignment by assignment.
    pub flat: bool,
    /// Conjuncts not mentioning a quantified variable are moved out of its
    /// scope before compiling.
    pub scope: bool,
    /// Teams are projected onto a subformula's free variables before
    /// evaluation and memoization.
    pub project: bool,
}

impl Prunings {
    pub const ALL: Prunings = Prunings {
        downward: true,
        constancy_guard: true,
        union: true,
        flat: true,
        scope: true,
        project: true,
    };
    pub const NONE: Prunings = Prunings {
        downward: false,
        constancy_guard: false,
        union: false,
        flat: false,
        scope: false,
        project: false,
    };
}

impl Default for Prunings {
    fn default() -> Prunings {
        Prunings::ALL
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub budget: Budget,
    pub prunings: Prunings,
}

impl EvalOptions {
    pub fn unpruned() -> EvalOptions {
        EvalOptions {
            budget: Budget::default(),
            prunings: Prunings::NONE,
        }
    }
}

pub(crate) fn resolve_term(m: &Model, s: &Assignment, t: &Term) -> Result<Elem, EvalError> {
    match t {
        Term::Var(v) => s.get(v).copied().ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Const(c) => m.constant(c).ok_or_else(|| EvalError::UnknownConstant(c.clone())),
    }
}

/// Tarskian truth of a first-order formula under a single assignment.
pub fn eval_tarski(m: &Model, s: &Assignment, theta: &Formula) -> Result<bool, EvalError> {
    let mut s = s.clone();
    tarski_rec(m, &mut s, theta)
}

fn tarski_rec(m: &Model, s: &mut Assignment, f: &Formula) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::Lit(Literal::Top) => true,
        Formula::Lit(Literal::Bot) => false,
        Formula::Lit(Literal::Rel {
            name,
            args,
            positive,
        }) => {
            let rel = m.relation(name).ok_or_else(|| EvalError::UnknownRelation(name.clone()))?;
            if rel.arity != args.len() {
                return Err(EvalError::RelationArity {
                    name: name.clone(),
                    expected: rel.arity,
                    found: args.len(),
                });
            }
            let tuple: Vec<Elem> = args.iter().map(|t| resolve_term(m, s, t)).collect::<Result<_, _>>()?;
            rel.contains(&tuple) == *positive
        }
        Formula::Lit(Literal::Eq { lhs, rhs, positive }) => {
            (resolve_term(m, s, lhs)? == resolve_term(m, s, rhs)?) == *positive
        }
        Formula::And(a, b) => tarski_rec(m, s, a)? && tarski_rec(m, s, b)?,
        Formula::Or(a, b) => tarski_rec(m, s, a)? || tarski_rec(m, s, b)?,
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            let universal = matches!(f, Formula::Forall(..));
            let saved = s.get(v).copied();
            let mut result = universal;
            for e in m.elements() {
                s.insert(v.clone(), e);
                let r = tarski_rec(m, s, b);
                match r {
                    Ok(val) if val != universal => {
                        result = !universal;
                        break;
                    }
                    Ok(_) => {}
                    Err(e) => {
                        restore(s, v, saved);
                        return Err(e);
                    }
                }
            }
            restore(s, v, saved);
            result
        }
        other => return Err(EvalError::NotFirstOrder(other.to_string())),
    })
}

fn restore(s: &mut Assignment, v: &str, saved: Option<Elem>) {
    match saved {
        Some(e) => {
            s.insert(v.to_string(), e);
        }
        None => {
            s.remove(v);
        }
    }
}

fn check_covers(x: &Team, f: &Formula) -> Result<(), EvalError> {
    for v in free_vars(f) {
        if x.var_index(&v).is_none() {
            return Err(EvalError::Unbound(v));
        }
    }
    Ok(())
}

/// `X↾θ`: the assignments of `x` that satisfy `θ`.
pub fn restrict(m: &Model, x: &Team, theta: &Formula) -> Result<Team, EvalError> {
    if !theta.is_first_order() {
        return Err(EvalError::NotFirstOrder(theta.to_string()));
    }
    check_covers(x, theta)?;
    let mut out = Team::empty(x.vars().to_vec());
    for s in x.assignments() {
        if eval_tarski(m, &s, theta)? {
            out.insert(&s);
        }
    }
    Ok(out)
}

/// `X[M/v]`: every assignment extended (or overwritten) at `v` with every
/// element.
pub fn duplicate(m: &Model, x: &Team, v: &str) -> Team {
    let mut vars = x.vars().to_vec();
    if x.var_index(v).is_none() {
        vars.push(v.to_string());
    }
    let mut out = Team::empty(vars);
    for mut s in x.assignments() {
        for e in m.elements() {
            s.insert(v.to_string(), e);
            out.insert(&s);
        }
    }
    out
}

/// `X[H/v⃗]`: each assignment `s` extended by every tuple in `h(s)`. Tuples
/// are taken from `M^k` where `k = vars.len()`.
pub fn supplement(
    m: &Model,
    x: &Team,
    vars: &[String],
    h: impl Fn(&Assignment) -> BTreeSet<Vec<Elem>>,
) -> Result<Team, EvalError> {
    let mut all_vars = x.vars().to_vec();
    for v in vars {
        if !all_vars.contains(v) {
            all_vars.push(v.clone());
        }
    }
    let mut out = Team::empty(all_vars);
    for s in x.assignments() {
        let choice = h(&s);
        if choice.is_empty() {
            return Err(EvalError::EmptyChoice);
        }
        for tuple in choice {
            if tuple.len() != vars.len() || tuple.iter().any(|e| e.0 as usize >= m.size()) {
                return Err(EvalError::ChoiceArity);
            }
            let mut t = s.clone();
            for (v, e) in vars.iter().zip(tuple) {
                t.insert(v.clone(), e);
            }
            out.insert(&t);
        }
    }
    Ok(out)
}

/// `X(t⃗)`: the relation of evaluated term tuples.
pub fn project(x: &Team, terms: &[Term], m: &Model) -> Result<Relation, EvalError> {
    for t in terms {
        if let Term::Var(v) = t {
            if x.var_index(v).is_none() {
                return Err(EvalError::Unbound(v.clone()));
            }
        }
    }
    let mut rel = Relation::new(terms.len());
    for s in x.assignments() {
        let tuple = terms.iter().map(|t| resolve_term(m, &s, t)).collect::<Result<_, _>>()?;
        rel.tuples.insert(tuple);
    }
    Ok(rel)
}

/// `M ⊨_X φ` under lax team semantics with the default budget and all
/// prunings enabled.
pub fn eval(m: &Model, x: &Team, f: &Formula, registry: &Registry) -> Result<bool, EvalError> {
    eval_with(m, x, f, registry, &EvalOptions::default())
}

pub fn eval_with(
    m: &Model,
    x: &Team,
    f: &Formula,
    registry: &Registry,
    opts: &EvalOptions,
) -> Result<bool, EvalError> {
    check_covers(x, f)?;
    let mut ev = Evaluator::new(m, registry, f, x.vars(), opts)?;
    ev.check(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_formula, parse_model};

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn team(vars: &[&str], rows: &[&[u16]]) -> Team {
        Team::from_rows(
            vars.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|&e| Elem(e)).collect()),
        )
    }

    fn asg(pairs: &[(&str, u16)]) -> Assignment {
        pairs.iter().map(|(v, e)| (v.to_string(), Elem(*e))).collect()
    }

    #[test]
    fn tarski_examples() {
        let m = Model::numbered(2);
        assert!(eval_tarski(&m, &asg(&[("x", 0), ("y", 0)]), &p("x = y")).unwrap());
        assert!(eval_tarski(&m, &asg(&[("x", 0)]), &p("exists y. y != x")).unwrap());
        assert_eq!(
            eval_tarski(&m, &asg(&[]), &p("x = x")),
            Err(EvalError::Unbound("x".into()))
        );
    }

    #[test]
    fn eval_examples() {
        let reg = Registry::builtin();
        let m = Model::numbered(2);
        let x01 = team(&["x"], &[&[0], &[1]]);
        assert!(!eval(&m, &x01, &p("const(x)"), &reg).unwrap());
        assert!(eval(&m, &Team::empty(["x"]), &p("const(x)"), &reg).unwrap());
        assert!(eval(&m, &x01, &p("x = 0 \\/ x = 1"), &reg).unwrap());
        assert!(!eval(&m, &team(&["x"], &[&[0]]), &p("<> x = 1"), &reg).unwrap());
        assert!(matches!(
            eval(&m, &Team::epsilon(), &p("x = x"), &reg),
            Err(EvalError::Unbound(_))
        ));
    }

    #[test]
    fn team_algebra_examples() {
        let m = Model::numbered(2);
        let x01 = team(&["x"], &[&[0], &[1]]);
        assert_eq!(restrict(&m, &x01, &p("x = 0")).unwrap(), team(&["x"], &[&[0]]));
        assert_eq!(restrict(&m, &x01, &p("top")).unwrap(), x01);
        assert!(restrict(&m, &x01, &p("bot")).unwrap().is_empty());
        assert!(restrict(&m, &x01, &p("const(x)")).is_err());

        assert_eq!(duplicate(&m, &Team::epsilon(), "v"), team(&["v"], &[&[0], &[1]]));
        assert!(duplicate(&m, &Team::empty(Vec::<String>::new()), "v").is_empty());
        assert_eq!(duplicate(&m, &team(&["x"], &[&[0]]), "x"), x01);

        let v = vec!["v".to_string()];
        let full = supplement(&m, &Team::epsilon(), &v, |_| m.elements().map(|e| vec![e]).collect()).unwrap();
        assert_eq!(full, duplicate(&m, &Team::epsilon(), "v"));
        let one = supplement(&m, &Team::epsilon(), &v, |_| BTreeSet::from([vec![Elem(0)]])).unwrap();
        assert_eq!(one, team(&["v"], &[&[0]]));
        let y = vec!["y".to_string()];
        let diag = supplement(&m, &x01, &y, |s| BTreeSet::from([vec![s["x"]]])).unwrap();
        assert_eq!(diag, team(&["x", "y"], &[&[0, 0], &[1, 1]]));
        assert_eq!(
            supplement(&m, &x01, &y, |_| BTreeSet::new()),
            Err(EvalError::EmptyChoice)
        );

        let xy = team(&["x", "y"], &[&[0, 1]]);
        let r = project(&xy, &[Term::var("y"), Term::var("x")], &m).unwrap();
        assert_eq!(r.tuples(), &BTreeSet::from([vec![Elem(1), Elem(0)]]));
        assert!(project(&Team::empty(["x"]), &[Term::var("x")], &m).unwrap().is_empty());
        let r = project(&x01, &[Term::var("x"), Term::var("x")], &m).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.contains(&[Elem(1), Elem(1)]));
    }

    #[test]
    fn constants_resolve_by_name_or_declaration() {
        let m = parse_model("domain: a b\nconst c = b").unwrap();
        let s = asg(&[("x", 1)]);
        assert!(eval_tarski(&m, &s, &p("x = @c /\\ x = @b /\\ x != @a")).unwrap());
        assert!(matches!(
            eval_tarski(&m, &s, &p("x = @d")),
            Err(EvalError::UnknownConstant(_))
        ));
    }

    #[test]
    fn team_display() {
        assert_eq!(Team::epsilon().to_string(), "{ε}");
        assert_eq!(team(&["x"], &[&[0], &[1]]).to_string(), "{x↦0, x↦1}");
    }
}
