//! Compiled team-semantics evaluator.
//!
//! A formula is compiled against one model and one team domain. Every
//! variable gets a fixed slot and an assignment is packed into a `u128`
//! (`bits` per slot). Teams are sorted, deduplicated `Vec<u128>`s, which is
//! also the canonical encoding used as memo key.
//!
//! Before a node is evaluated the team is projected onto the node's free
//! variables. By locality this does not change the answer, and it shrinks
//! both the search and the memo keys.

use std::collections::HashMap;
use std::time::Instant;

use rustc_hash::{FxHashMap, FxHashSet};

use super::{Budget, EvalError, EvalOptions, Model, Prunings, Team};
use crate::ast::{free_vars, nnf_negate, Formula, Literal, Term};
use crate::deps::{BuiltinKind, DependencySpec, FlagStatus, Registry};

type Row = u128;

const MEMO_CAP: usize = 4_000_000;
const DENSE_CAP: u64 = 1 << 26;

#[derive(Clone, Copy, Debug)]
struct Layout {
    bits: u32,
    mask: u128,
}

impl Layout {
    fn for_size(n: usize) -> Layout {
        let mut bits = 1;
        while (1usize << bits) < n {
            bits += 1;
        }
        Layout {
            bits,
            mask: (1u128 << bits) - 1,
        }
    }

    fn slots(&self) -> usize {
        (128 / self.bits) as usize
    }

    #[inline]
    fn get(&self, row: Row, slot: usize) -> u16 {
        ((row >> (slot as u32 * self.bits)) & self.mask) as u16
    }

    #[inline]
    fn set(&self, row: Row, slot: usize, v: u16) -> Row {
        let sh = slot as u32 * self.bits;
        (row & !(self.mask << sh)) | ((v as u128) << sh)
    }

    fn slot_mask(&self, slot: usize) -> Row {
        self.mask << (slot as u32 * self.bits)
    }
}

#[derive(Clone, Debug)]
enum TermIr {
    Slot(usize),
    Elem(u16),
}

/// Relation as a bitmap over `n^arity` little-endian tuple codes.
#[derive(Clone, Debug)]
struct Dense {
    arity: usize,
    bits: Vec<bool>,
}

#[derive(Clone, Copy, Debug)]
enum RelRef {
    Model(usize),
    Local,
}

#[derive(Clone, Debug)]
enum Fo {
    True,
    False,
    Rel {
        rel: RelRef,
        args: Vec<TermIr>,
        positive: bool,
    },
    Eq {
        lhs: TermIr,
        rhs: TermIr,
        positive: bool,
    },
    And(Box<Fo>, Box<Fo>),
    Or(Box<Fo>, Box<Fo>),
    Exists(usize, Box<Fo>),
    Forall(usize, Box<Fo>),
}

#[derive(Debug)]
enum AtomEval {
    Native(BuiltinKind),
    Sentence(Fo),
}

#[derive(Debug, PartialEq, Eq)]
enum Shape {
    Inclusion,
    Upward,
    Plain,
}

#[derive(Debug)]
struct Atom {
    args: Vec<TermIr>,
    eval: AtomEval,
    shape: Shape,
}

#[derive(Debug)]
enum Kind {
    Lit(Fo),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Exists {
        slot: usize,
        body: Box<Node>,
        const_guard: bool,
    },
    Forall {
        slot: usize,
        body: Box<Node>,
    },
    Hook(Fo, Box<Node>),
    Diamond(Box<Node>),
    Atom(Box<Atom>),
}

#[derive(Debug)]
struct Node {
    id: u32,
    fv_mask: Row,
    /// ◇-free and every atom below is asserted downward closed.
    dc: bool,
    /// Built from literals, inclusion atoms and upward-closed atoms only,
    /// so the largest satisfying subteam is computable.
    union_ok: bool,
    kind: Kind,
}

struct Program {
    n: usize,
    layout: Layout,
    rels: Vec<Dense>,
    root: Node,
    team_slots: Vec<usize>,
    team_vars: Vec<String>,
    prunings: Prunings,
}

struct State {
    budget: Budget,
    deadline: Option<Instant>,
    branches: u64,
    depth: usize,
    memo: FxHashMap<(u32, Vec<Row>), bool>,
    max_memo: FxHashMap<(u32, Vec<Row>), Option<Vec<Row>>>,
}

/// A formula compiled against a model and a team domain; reusable across
/// teams over that domain, sharing its memo table.
pub struct Evaluator<'a> {
    model: &'a Model,
    prog: Program,
    state: State,
}

struct Compiler<'a> {
    model: &'a Model,
    registry: &'a Registry,
    layout: Layout,
    slots: HashMap<String, usize>,
    rel_index: HashMap<String, usize>,
    rels: Vec<Dense>,
    next_id: u32,
    flat: bool,
}

fn pow(n: usize, k: usize) -> Option<u64> {
    (n as u64).checked_pow(k as u32)
}

impl<'a> Compiler<'a> {
    fn slot(&mut self, v: &str) -> Result<usize, EvalError> {
        if let Some(&s) = self.slots.get(v) {
            return Ok(s);
        }
        let s = self.slots.len();
        if s >= self.layout.slots() {
            return Err(EvalError::Budget(format!(
                "more than {} variables do not fit a packed assignment",
                self.layout.slots()
            )));
        }
        self.slots.insert(v.to_string(), s);
        Ok(s)
    }

    fn term(&mut self, t: &Term, local: Option<&mut HashMap<String, usize>>) -> Result<TermIr, EvalError> {
        match t {
            Term::Const(c) => self
                .model
                .constant(c)
                .map(|e| TermIr::Elem(e.0))
                .ok_or_else(|| EvalError::UnknownConstant(c.clone())),
            Term::Var(v) => match local {
                Some(map) => map
                    .get(v)
                    .map(|&s| TermIr::Slot(s))
                    .ok_or_else(|| EvalError::Unbound(v.clone())),
                None => Ok(TermIr::Slot(self.slot(v)?)),
            },
        }
    }

    fn model_rel(&mut self, name: &str, found: usize) -> Result<usize, EvalError> {
        let rel = self
            .model
            .relation(name)
            .ok_or_else(|| EvalError::UnknownRelation(name.to_string()))?;
        if rel.arity() != found {
            return Err(EvalError::RelationArity {
                name: name.to_string(),
                expected: rel.arity(),
                found,
            });
        }
        if let Some(&i) = self.rel_index.get(name) {
            return Ok(i);
        }
        let n = self.model.size();
        let size = pow(n, rel.arity())
            .filter(|&s| s <= DENSE_CAP)
            .ok_or_else(|| EvalError::Budget(format!("relation `{name}` too large to tabulate")))?;
        let mut bits = vec![false; size as usize];
        for t in rel.tuples() {
            bits[code(n, t.iter().map(|e| e.0))] = true;
        }
        self.rels.push(Dense {
            arity: rel.arity(),
            bits,
        });
        self.rel_index.insert(name.to_string(), self.rels.len() - 1);
        Ok(self.rels.len() - 1)
    }

    /// First-order formula. With `local`, variables use a private slot map
    /// (dependency sentences) and `local_rel` names the symbol bound to the
    /// team projection.
    fn fo(
        &mut self,
        f: &Formula,
        local: &mut Option<(HashMap<String, usize>, String, usize)>,
    ) -> Result<Fo, EvalError> {
        Ok(match f {
            Formula::Lit(Literal::Top) => Fo::True,
            Formula::Lit(Literal::Bot) => Fo::False,
            Formula::Lit(Literal::Rel {
                name,
                args,
                positive,
            }) => {
                let rel = match local {
                    Some((_, r, arity)) if r == name => {
                        if *arity != args.len() {
                            return Err(EvalError::RelationArity {
                                name: name.clone(),
                                expected: *arity,
                                found: args.len(),
                            });
                        }
                        RelRef::Local
                    }
                    _ => RelRef::Model(self.model_rel(name, args.len())?),
                };
                let args = args
                    .iter()
                    .map(|t| self.term(t, local.as_mut().map(|l| &mut l.0)))
                    .collect::<Result<_, _>>()?;
                Fo::Rel {
                    rel,
                    args,
                    positive: *positive,
                }
            }
            Formula::Lit(Literal::Eq { lhs, rhs, positive }) => Fo::Eq {
                lhs: self.term(lhs, local.as_mut().map(|l| &mut l.0))?,
                rhs: self.term(rhs, local.as_mut().map(|l| &mut l.0))?,
                positive: *positive,
            },
            Formula::And(a, b) => Fo::And(Box::new(self.fo(a, local)?), Box::new(self.fo(b, local)?)),
            Formula::Or(a, b) => Fo::Or(Box::new(self.fo(a, local)?), Box::new(self.fo(b, local)?)),
            Formula::Exists(v, b) | Formula::Forall(v, b) => {
                let (slot, saved) = match local {
                    Some((map, _, _)) => {
                        let saved = map.get(v).copied();
                        let s = map.len();
                        if s >= self.layout.slots() {
                            return Err(EvalError::Budget("dependency sentence has too many variables".into()));
                        }
                        map.insert(v.clone(), s);
                        (s, saved)
                    }
                    None => (self.slot(v)?, None),
                };
                let body = Box::new(self.fo(b, local)?);
                if let Some((map, _, _)) = local {
                    match saved {
                        Some(old) => map.insert(v.clone(), old),
                        None => map.remove(v),
                    };
                }
                if matches!(f, Formula::Exists(..)) {
                    Fo::Exists(slot, body)
                } else {
                    Fo::Forall(slot, body)
                }
            }
            other => return Err(EvalError::NotFirstOrder(other.to_string())),
        })
    }

    fn fv_mask(&mut self, f: &Formula) -> Result<Row, EvalError> {
        let mut m = 0;
        for v in free_vars(f) {
            let s = self.slot(&v)?;
            m |= self.layout.slot_mask(s);
        }
        Ok(m)
    }

    fn node(&mut self, f: &Formula) -> Result<Node, EvalError> {
        let id = self.next_id;
        self.next_id += 1;
        let fv_mask = self.fv_mask(f)?;
        if self.flat && !matches!(f, Formula::Lit(_)) {
            if let Some(g) = tarskian(f) {
                let fo = self.fo(&g, &mut None)?;
                return Ok(Node {
                    id,
                    fv_mask,
                    dc: true,
                    union_ok: true,
                    kind: Kind::Lit(fo),
                });
            }
        }
        let (kind, dc, union_ok) = match f {
            Formula::Lit(_) => (Kind::Lit(self.fo(f, &mut None)?), true, true),
            Formula::And(a, b) | Formula::Or(a, b) => {
                let a = self.node(a)?;
                let b = self.node(b)?;
                let (dc, u) = (a.dc && b.dc, a.union_ok && b.union_ok);
                let kind = if matches!(f, Formula::And(..)) {
                    Kind::And(Box::new(a), Box::new(b))
                } else {
                    Kind::Or(Box::new(a), Box::new(b))
                };
                (kind, dc, u)
            }
            Formula::Exists(v, b) => {
                let slot = self.slot(v)?;
                let const_guard = has_const_guard(b, v, self.registry);
                let body = self.node(b)?;
                let (dc, u) = (body.dc, body.union_ok);
                (
                    Kind::Exists {
                        slot,
                        body: Box::new(body),
                        const_guard,
                    },
                    dc,
                    u,
                )
            }
            Formula::Forall(v, b) => {
                let slot = self.slot(v)?;
                let body = self.node(b)?;
                let (dc, u) = (body.dc, body.union_ok);
                (Kind::Forall { slot, body: Box::new(body) }, dc, u)
            }
            Formula::Hook(theta, b) => {
                let theta = self.fo(theta, &mut None)?;
                let body = self.node(b)?;
                let (dc, u) = (body.dc, body.union_ok);
                (Kind::Hook(theta, Box::new(body)), dc, u)
            }
            Formula::Diamond(b) => {
                let body = self.node(b)?;
                let u = body.union_ok;
                (Kind::Diamond(Box::new(body)), false, u)
            }
            Formula::Dep { name, args } => {
                let spec = self.registry.lookup(name, args.len()).ok_or_else(|| {
                    match self.registry.arity_of(name) {
                        Some(expected) => EvalError::DependencyArity {
                            name: name.clone(),
                            expected,
                            found: args.len(),
                        },
                        None => EvalError::UnknownDependency {
                            name: name.clone(),
                            arity: args.len(),
                        },
                    }
                })?;
                let atom = self.atom(args, &spec)?;
                let dc = spec.flags.downward == FlagStatus::Asserted;
                let u = atom.shape != Shape::Plain;
                (Kind::Atom(Box::new(atom)), dc, u)
            }
            Formula::Generic {
                rel,
                args,
                sentence,
            } => {
                let free = free_vars(sentence);
                if !free.is_empty() {
                    let names: Vec<_> = free.into_iter().collect();
                    return Err(EvalError::OpenGenericSentence(names.join(", ")));
                }
                let arg_irs = args.iter().map(|t| self.term(t, None)).collect::<Result<_, _>>()?;
                let mut local = Some((HashMap::new(), rel.clone(), args.len()));
                let fo = self.fo(sentence, &mut local)?;
                let atom = Atom {
                    args: arg_irs,
                    eval: AtomEval::Sentence(fo),
                    shape: Shape::Plain,
                };
                (Kind::Atom(Box::new(atom)), false, false)
            }
        };
        Ok(Node {
            id,
            fv_mask,
            dc,
            union_ok,
            kind,
        })
    }

    fn atom(&mut self, args: &[Term], spec: &DependencySpec) -> Result<Atom, EvalError> {
        let arg_irs: Vec<TermIr> = args.iter().map(|t| self.term(t, None)).collect::<Result<_, _>>()?;
        let shape = if spec.builtin == Some(BuiltinKind::Inc) {
            Shape::Inclusion
        } else if spec.flags.upward == FlagStatus::Asserted {
            Shape::Upward
        } else {
            Shape::Plain
        };
        let fits = pow(self.model.size(), args.len()).is_some_and(|s| s <= DENSE_CAP);
        let eval = match spec.builtin {
            Some(kind) if fits => AtomEval::Native(kind),
            _ => {
                let mut local = Some((HashMap::new(), "R".to_string(), spec.arity));
                AtomEval::Sentence(self.fo(&spec.sentence, &mut local)?)
            }
        };
        Ok(Atom {
            args: arg_irs,
            eval,
            shape,
        })
    }
}

fn conjuncts(f: Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            conjuncts(*a, out);
            conjuncts(*b, out);
        }
        other => out.push(other),
    }
}

/// `∃v(α ∧ β)` with `v` not free in `α` becomes `α ∧ ∃v β`, likewise for `∀`;
/// a quantifier binding nothing is dropped. Choice functions are nonempty,
/// so by locality the moved conjuncts see the same projection.
fn narrow_scopes(f: &Formula) -> Formula {
    match f {
        Formula::Lit(_) | Formula::Dep { .. } | Formula::Generic { .. } => f.clone(),
        Formula::And(a, b) => Formula::and(narrow_scopes(a), narrow_scopes(b)),
        Formula::Or(a, b) => Formula::or(narrow_scopes(a), narrow_scopes(b)),
        Formula::Hook(theta, b) => Formula::hook((**theta).clone(), narrow_scopes(b)),
        Formula::Diamond(b) => Formula::diamond(narrow_scopes(b)),
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            let mut parts = Vec::new();
            conjuncts(narrow_scopes(b), &mut parts);
            let (inner, outer): (Vec<_>, Vec<_>) = parts.into_iter().partition(|g| free_vars(g).contains(v));
            if outer.is_empty() {
                return match f {
                    Formula::Exists(..) => Formula::exists(v.clone(), Formula::conj(inner)),
                    _ => Formula::forall(v.clone(), Formula::conj(inner)),
                };
            }
            let mut all = outer;
            if !inner.is_empty() {
                let body = Formula::conj(inner);
                all.push(match f {
                    Formula::Exists(..) => Formula::exists(v.clone(), body),
                    _ => Formula::forall(v.clone(), body),
                });
            }
            Formula::conj(all)
        }
    }
}

/// The pointwise reading of a formula without dependency atoms and `◇`:
/// `θ ↪ φ` becomes `¬θ ∨ φ`.
fn tarskian(f: &Formula) -> Option<Formula> {
    Some(match f {
        Formula::Lit(_) => f.clone(),
        Formula::And(a, b) => Formula::and(tarskian(a)?, tarskian(b)?),
        Formula::Or(a, b) => Formula::or(tarskian(a)?, tarskian(b)?),
        Formula::Exists(v, b) => Formula::exists(v.clone(), tarskian(b)?),
        Formula::Forall(v, b) => Formula::forall(v.clone(), tarskian(b)?),
        Formula::Hook(theta, b) => Formula::or(nnf_negate(theta).ok()?, tarskian(b)?),
        Formula::Diamond(_) | Formula::Dep { .. } | Formula::Generic { .. } => return None,
    })
}

fn dc_conjuncts<'n>(node: &'n Node, out: &mut Vec<&'n Node>) {
    match &node.kind {
        Kind::And(a, b) => {
            dc_conjuncts(a, out);
            dc_conjuncts(b, out);
        }
        _ if node.dc => out.push(node),
        _ => {}
    }
}

/// `∃v φ` where φ has a top-level conjunct `const(t⃗)` with `v` among `t⃗`.
fn has_const_guard(body: &Formula, v: &str, registry: &Registry) -> bool {
    match body {
        Formula::And(a, b) => has_const_guard(a, v, registry) || has_const_guard(b, v, registry),
        Formula::Dep { name, args } => {
            registry
                .lookup(name, args.len())
                .is_some_and(|s| s.builtin == Some(BuiltinKind::Const))
                && args.iter().any(|t| t.as_var() == Some(v))
        }
        _ => false,
    }
}

fn code(n: usize, elems: impl Iterator<Item = u16>) -> usize {
    let mut c = 0usize;
    let mut mul = 1usize;
    for e in elems {
        c += e as usize * mul;
        mul *= n;
    }
    c
}

fn canon(mut v: Vec<Row>) -> Vec<Row> {
    v.sort_unstable();
    v.dedup();
    v
}

impl Program {
    #[inline]
    fn term(&self, t: &TermIr, env: Row) -> u16 {
        match t {
            TermIr::Slot(s) => self.layout.get(env, *s),
            TermIr::Elem(e) => *e,
        }
    }

    fn fo(&self, f: &Fo, env: Row, local: Option<&Dense>) -> bool {
        match f {
            Fo::True => true,
            Fo::False => false,
            Fo::Rel { rel, args, positive } => {
                let dense = match rel {
                    RelRef::Model(i) => &self.rels[*i],
                    RelRef::Local => local.expect("local relation outside dependency sentence"),
                };
                debug_assert_eq!(dense.arity, args.len());
                let c = code(self.n, args.iter().map(|t| self.term(t, env)));
                dense.bits[c] == *positive
            }
            Fo::Eq { lhs, rhs, positive } => (self.term(lhs, env) == self.term(rhs, env)) == *positive,
            Fo::And(a, b) => self.fo(a, env, local) && self.fo(b, env, local),
            Fo::Or(a, b) => self.fo(a, env, local) || self.fo(b, env, local),
            Fo::Exists(s, b) => (0..self.n as u16).any(|e| self.fo(b, self.layout.set(env, *s, e), local)),
            Fo::Forall(s, b) => (0..self.n as u16).all(|e| self.fo(b, self.layout.set(env, *s, e), local)),
        }
    }

    /// Bits kept when a team reaches `node`: its free variables, or
    /// everything with projection switched off.
    fn keep_mask(&self, node: &Node) -> Row {
        if self.prunings.project {
            node.fv_mask
        } else {
            Row::MAX
        }
    }

    fn project(&self, team: &[Row], mask: Row) -> Vec<Row> {
        canon(team.iter().map(|r| r & mask).collect())
    }

    fn filter(&self, team: &[Row], theta: &Fo) -> Vec<Row> {
        team.iter().copied().filter(|&r| self.fo(theta, r, None)).collect()
    }

    /// Argument values of an atom for every row, row-major.
    fn atom_values(&self, atom: &Atom, team: &[Row]) -> Vec<u16> {
        let mut vals = Vec::with_capacity(team.len() * atom.args.len());
        for &r in team {
            vals.extend(atom.args.iter().map(|t| self.term(t, r)));
        }
        vals
    }

    fn codes(&self, vals: &[u16], arity: usize, range: std::ops::Range<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = vals
            .chunks(arity.max(1))
            .map(|t| code(self.n, t[range.clone()].iter().copied()))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn atom_holds(&self, atom: &Atom, team: &[Row]) -> bool {
        let k = atom.args.len();
        let vals = self.atom_values(atom, team);
        match &atom.eval {
            AtomEval::Native(kind) => {
                let all = || self.codes(&vals, k, 0..k);
                match kind {
                    BuiltinKind::Const => all().len() <= 1,
                    BuiltinKind::All => all().len() as u64 == pow(self.n, k).unwrap_or(u64::MAX),
                    BuiltinKind::Ne => !team.is_empty(),
                    BuiltinKind::Nc => all().len() >= 2,
                    BuiltinKind::Inc | BuiltinKind::Exc => {
                        let h = k / 2;
                        let xs = self.codes(&vals, k, 0..h);
                        let ys: FxHashSet<usize> = self.codes(&vals, k, h..k).into_iter().collect();
                        if *kind == BuiltinKind::Inc {
                            xs.iter().all(|c| ys.contains(c))
                        } else {
                            xs.iter().all(|c| !ys.contains(c))
                        }
                    }
                    BuiltinKind::Fdep => {
                        let mut seen: FxHashMap<usize, u16> = FxHashMap::default();
                        vals.chunks(k).all(|t| {
                            let key = code(self.n, t[..k - 1].iter().copied());
                            *seen.entry(key).or_insert(t[k - 1]) == t[k - 1]
                        })
                    }
                }
            }
            AtomEval::Sentence(fo) => {
                let size = pow(self.n, k).expect("checked at compile time") as usize;
                let mut bits = vec![false; size];
                for t in vals.chunks(k.max(1)) {
                    bits[code(self.n, t.iter().copied())] = true;
                }
                let dense = Dense { arity: k, bits };
                self.fo(fo, 0, Some(&dense))
            }
        }
    }
}

struct Run<'p> {
    prog: &'p Program,
    st: &'p mut State,
}

impl<'p> Run<'p> {
    fn tick(&mut self) -> Result<(), EvalError> {
        self.st.branches += 1;
        if self.st.branches > self.st.budget.max_branches {
            return Err(EvalError::Budget(format!(
                "more than {} search branches",
                self.st.budget.max_branches
            )));
        }
        if self.st.branches % 4096 == 0 {
            if let Some(d) = self.st.deadline {
                if Instant::now() > d {
                    return Err(EvalError::Budget("timeout".into()));
                }
            }
        }
        Ok(())
    }

    fn check_size(&self, len: usize) -> Result<(), EvalError> {
        if len > self.st.budget.max_team {
            return Err(EvalError::Budget(format!(
                "team of {len} assignments exceeds the limit of {}",
                self.st.budget.max_team
            )));
        }
        Ok(())
    }

    /// Upfront refusal of an enumeration that cannot finish in budget.
    fn check_space(&self, what: &str, size: f64) -> Result<(), EvalError> {
        if size > self.st.budget.max_branches as f64 {
            return Err(EvalError::Budget(format!(
                "{what} enumeration of {size:.3e} cases exceeds the branch limit"
            )));
        }
        Ok(())
    }

    fn dup(&self, team: &[Row], slot: usize) -> Result<Vec<Row>, EvalError> {
        let n = self.prog.n;
        self.check_size(team.len() * n)?;
        let l = self.prog.layout;
        let mut out = Vec::with_capacity(team.len() * n);
        for &r in team {
            for e in 0..n as u16 {
                out.push(l.set(r, slot, e));
            }
        }
        Ok(canon(out))
    }

    fn enter(&mut self) -> Result<(), EvalError> {
        self.st.depth += 1;
        if self.st.depth > self.st.budget.max_depth {
            return Err(EvalError::Budget("recursion depth limit".into()));
        }
        Ok(())
    }

    fn sat(&mut self, node: &Node, team: &[Row]) -> Result<bool, EvalError> {
        match &node.kind {
            Kind::Lit(fo) => Ok(team.iter().all(|&r| self.prog.fo(fo, r, None))),
            Kind::And(a, b) => Ok(self.sat(a, team)? && self.sat(b, team)?),
            Kind::Hook(theta, b) => {
                let sub = self.prog.filter(team, theta);
                self.sat(b, &sub)
            }
            Kind::Atom(atom) => Ok(self.prog.atom_holds(atom, team)),
            _ => {
                let proj = self.prog.project(team, self.prog.keep_mask(node));
                let key = (node.id, proj);
                if let Some(&r) = self.st.memo.get(&key) {
                    return Ok(r);
                }
                let proj = key.1;
                self.enter()?;
                let r = self.sat_compound(node, &proj);
                self.st.depth -= 1;
                let r = r?;
                if self.st.memo.len() > MEMO_CAP {
                    self.st.memo.clear();
                }
                self.st.memo.insert((node.id, proj), r);
                Ok(r)
            }
        }
    }

    fn sat_compound(&mut self, node: &Node, team: &[Row]) -> Result<bool, EvalError> {
        let pr = self.prog.prunings;
        match &node.kind {
            Kind::Forall { slot, body } => {
                let d = self.dup(team, *slot)?;
                self.sat(body, &d)
            }
            Kind::Or(a, b) => {
                if team.is_empty() {
                    return Ok(self.sat(a, team)? && self.sat(b, team)?);
                }
                if pr.union && node.union_ok {
                    return Ok(self.max_sub(node, team)?.is_some_and(|w| w.len() == team.len()));
                }
                if pr.downward && a.dc && b.dc {
                    return self.or_partition(a, b, team);
                }
                if pr.downward && b.dc {
                    return self.or_one_dc(b, a, team);
                }
                if pr.downward && a.dc {
                    return self.or_one_dc(a, b, team);
                }
                self.or_generic(a, b, team)
            }
            Kind::Exists {
                slot,
                body,
                const_guard,
            } => {
                if team.is_empty() {
                    return self.sat(body, team);
                }
                if pr.constancy_guard && *const_guard {
                    let l = self.prog.layout;
                    for e in 0..self.prog.n as u16 {
                        self.tick()?;
                        let t = canon(team.iter().map(|&r| l.set(r, *slot, e)).collect());
                        if self.sat(body, &t)? {
                            return Ok(true);
                        }
                    }
                    return Ok(false);
                }
                if pr.union && node.union_ok {
                    return Ok(self.max_sub(node, team)?.is_some_and(|w| w.len() == team.len()));
                }
                if pr.downward && body.dc {
                    return self.exists_strict(*slot, body, team);
                }
                self.exists_generic(*slot, body, team)
            }
            Kind::Diamond(body) => {
                if team.is_empty() {
                    return Ok(false);
                }
                if pr.downward && body.dc {
                    for &r in team {
                        self.tick()?;
                        if self.sat(body, &[r])? {
                            return Ok(true);
                        }
                    }
                    return Ok(false);
                }
                if pr.union && body.union_ok {
                    return Ok(self.max_sub(body, team)?.is_some_and(|w| !w.is_empty()));
                }
                self.check_space("subteam", 2f64.powi(team.len() as i32))?;
                for mask in 1u64..(1u64 << team.len()) {
                    self.tick()?;
                    let sub = pick(team, mask);
                    if self.sat(body, &sub)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            _ => unreachable!("non-compound node"),
        }
    }

    /// Both disjuncts downward closed: a cover can be shrunk to a
    /// partition, and each row's side is constrained by singleton checks.
    fn or_partition(&mut self, a: &Node, b: &Node, team: &[Row]) -> Result<bool, EvalError> {
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut either = Vec::new();
        for &r in team {
            self.tick()?;
            let l = self.sat(a, &[r])?;
            let rr = self.sat(b, &[r])?;
            match (l, rr) {
                (false, false) => return Ok(false),
                (true, false) => left.push(r),
                (false, true) => right.push(r),
                (true, true) => either.push(r),
            }
        }
        if !self.sat(a, &left)? || !self.sat(b, &right)? {
            return Ok(false);
        }
        let all_left = canon([left.as_slice(), either.as_slice()].concat());
        if self.sat(a, &all_left)? {
            return Ok(true);
        }
        let all_right = canon([right.as_slice(), either.as_slice()].concat());
        if self.sat(b, &all_right)? {
            return Ok(true);
        }
        self.partition_dfs(a, b, &either, 0, left, right)
    }

    fn partition_dfs(
        &mut self,
        a: &Node,
        b: &Node,
        rows: &[Row],
        i: usize,
        left: Vec<Row>,
        right: Vec<Row>,
    ) -> Result<bool, EvalError> {
        self.tick()?;
        if i == rows.len() {
            return Ok(true);
        }
        let mut l2 = left.clone();
        l2.push(rows[i]);
        let l2 = canon(l2);
        if self.sat(a, &l2)? && self.partition_dfs(a, b, rows, i + 1, l2, right.clone())? {
            return Ok(true);
        }
        let mut r2 = right;
        r2.push(rows[i]);
        let r2 = canon(r2);
        if self.sat(b, &r2)? && self.partition_dfs(a, b, rows, i + 1, left, r2)? {
            return Ok(true);
        }
        Ok(false)
    }

    /// One disjunct downward closed: it can take exactly the rows the other
    /// side does not, so only partitions are enumerated.
    fn or_one_dc(&mut self, dc: &Node, other: &Node, team: &[Row]) -> Result<bool, EvalError> {
        let mut forced = Vec::new();
        let mut free = Vec::new();
        for &r in team {
            self.tick()?;
            if self.sat(dc, &[r])? {
                free.push(r);
            } else {
                forced.push(r);
            }
        }
        self.check_space("partition", 2f64.powi(free.len() as i32))?;
        for mask in 0u64..(1u64 << free.len()) {
            self.tick()?;
            let mut to_other = forced.clone();
            let mut to_dc = Vec::new();
            for (i, &r) in free.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    to_other.push(r);
                } else {
                    to_dc.push(r);
                }
            }
            if self.sat(dc, &to_dc)? && self.sat(other, &canon(to_other))? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// All covers: every row goes left, right, or both.
    fn or_generic(&mut self, a: &Node, b: &Node, team: &[Row]) -> Result<bool, EvalError> {
        self.check_space("cover", 3f64.powi(team.len() as i32))?;
        let n = team.len();
        for ymask in 0u64..(1u64 << n) {
            self.tick()?;
            let y = pick(team, ymask);
            if !self.sat(a, &y)? {
                continue;
            }
            let rest = !ymask & ((1u64 << n) - 1);
            // z = rest ∪ w for every w ⊆ y
            let mut w = ymask;
            loop {
                self.tick()?;
                let z = pick(team, rest | w);
                if self.sat(b, &z)? {
                    return Ok(true);
                }
                if w == 0 {
                    break;
                }
                w = (w - 1) & ymask;
            }
        }
        Ok(false)
    }

    /// Downward-closed body: one value per row suffices. Rows are
    /// processed in order with partial teams checked as they grow.
    fn exists_strict(&mut self, slot: usize, body: &Node, team: &[Row]) -> Result<bool, EvalError> {
        let l = self.prog.layout;
        let n = self.prog.n as u16;
        let mut cands: Vec<Vec<u16>> = Vec::with_capacity(team.len());
        for &r in team {
            let mut c = Vec::new();
            for e in 0..n {
                self.tick()?;
                if self.sat(body, &[l.set(r, slot, e)])? {
                    c.push(e);
                }
            }
            if c.is_empty() {
                return Ok(false);
            }
            cands.push(c);
        }
        self.strict_dfs(slot, body, team, &cands, 0, Vec::new())
    }

    fn strict_dfs(
        &mut self,
        slot: usize,
        body: &Node,
        team: &[Row],
        cands: &[Vec<u16>],
        i: usize,
        partial: Vec<Row>,
    ) -> Result<bool, EvalError> {
        self.tick()?;
        if i == team.len() {
            return Ok(true);
        }
        let l = self.prog.layout;
        // greedy completion with first candidates
        let mut full = partial.clone();
        full.extend((i..team.len()).map(|j| l.set(team[j], slot, cands[j][0])));
        if self.sat(body, &canon(full))? {
            return Ok(true);
        }
        for &e in &cands[i] {
            let mut next = partial.clone();
            next.push(l.set(team[i], slot, e));
            let next = canon(next);
            if self.sat(body, &next)? && self.strict_dfs(slot, body, team, cands, i + 1, next)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Lax choice functions: every row gets a nonempty set of values. With
    /// the downward prunings, rows are chosen one at a time and a partial
    /// team failing a downward-closed conjunct of the body is abandoned.
    fn exists_generic(&mut self, slot: usize, body: &Node, team: &[Row]) -> Result<bool, EvalError> {
        let n = self.prog.n;
        let choices = (1u64 << n) - 1;
        self.check_space("choice function", (choices as f64).powi(team.len() as i32))?;
        let mut dcs = Vec::new();
        if self.prog.prunings.downward {
            dc_conjuncts(body, &mut dcs);
        }
        self.generic_dfs(slot, body, &dcs, team, Vec::new())
    }

    fn generic_dfs(
        &mut self,
        slot: usize,
        body: &Node,
        dcs: &[&Node],
        rest: &[Row],
        partial: Vec<Row>,
    ) -> Result<bool, EvalError> {
        let Some((&r, rest)) = rest.split_first() else {
            self.check_size(partial.len())?;
            return self.sat(body, &partial);
        };
        let l = self.prog.layout;
        let n = self.prog.n;
        'pick: for m in 1u64..(1u64 << n) {
            self.tick()?;
            let mut next = partial.clone();
            next.extend((0..n).filter(|e| m >> e & 1 == 1).map(|e| l.set(r, slot, e as u16)));
            let next = canon(next);
            for d in dcs {
                if !self.sat(d, &next)? {
                    continue 'pick;
                }
            }
            if self.generic_dfs(slot, body, dcs, rest, next)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Largest subteam satisfying a union-closed node, or `None` when no
    /// subteam (not even the empty one) does.
    fn max_sub(&mut self, node: &Node, team: &[Row]) -> Result<Option<Vec<Row>>, EvalError> {
        if let Kind::Lit(fo) = &node.kind {
            return Ok(Some(self.prog.filter(team, fo)));
        }
        let proj = self.prog.project(team, self.prog.keep_mask(node));
        let key = (node.id, proj);
        let res = match self.st.max_memo.get(&key) {
            Some(r) => r.clone(),
            None => {
                let proj = key.1;
                self.enter()?;
                let r = self.max_sub_raw(node, &proj);
                self.st.depth -= 1;
                let r = r?;
                if self.st.max_memo.len() > MEMO_CAP {
                    self.st.max_memo.clear();
                }
                self.st.max_memo.insert((node.id, proj.clone()), r.clone());
                if let Some(w) = &r {
                    if w.len() == proj.len() {
                        return Ok(Some(team.to_vec()));
                    }
                }
                r
            }
        };
        Ok(res.map(|w| {
            let keep: FxHashSet<Row> = w.into_iter().collect();
            let mask = self.prog.keep_mask(node);
            team.iter().copied().filter(|r| keep.contains(&(r & mask))).collect()
        }))
    }

    fn max_sub_raw(&mut self, node: &Node, team: &[Row]) -> Result<Option<Vec<Row>>, EvalError> {
        self.tick()?;
        let l = self.prog.layout;
        match &node.kind {
            Kind::Lit(fo) => Ok(Some(self.prog.filter(team, fo))),
            Kind::And(a, b) => {
                let mut y = team.to_vec();
                loop {
                    self.tick()?;
                    let Some(ya) = self.max_sub(a, &y)? else {
                        return Ok(None);
                    };
                    let Some(yb) = self.max_sub(b, &ya)? else {
                        return Ok(None);
                    };
                    if yb.len() == y.len() {
                        return Ok(Some(y));
                    }
                    y = yb;
                }
            }
            Kind::Or(a, b) => {
                let Some(ya) = self.max_sub(a, team)? else {
                    return Ok(None);
                };
                let Some(yb) = self.max_sub(b, team)? else {
                    return Ok(None);
                };
                Ok(Some(canon([ya, yb].concat())))
            }
            Kind::Exists { slot, body, .. } => {
                let d = self.dup(team, *slot)?;
                let Some(w) = self.max_sub(body, &d)? else {
                    return Ok(None);
                };
                let mask = !l.slot_mask(*slot);
                let base: FxHashSet<Row> = w.iter().map(|r| r & mask).collect();
                Ok(Some(team.iter().copied().filter(|r| base.contains(&(r & mask))).collect()))
            }
            Kind::Forall { slot, body } => {
                let mut y = team.to_vec();
                let n = self.prog.n;
                loop {
                    self.tick()?;
                    let d = self.dup(&y, *slot)?;
                    let Some(w) = self.max_sub(body, &d)? else {
                        return Ok(None);
                    };
                    if w.len() == d.len() {
                        return Ok(Some(y));
                    }
                    let mask = !l.slot_mask(*slot);
                    let mut count: FxHashMap<Row, usize> = FxHashMap::default();
                    for r in &w {
                        *count.entry(r & mask).or_insert(0) += 1;
                    }
                    y.retain(|r| count.get(&(r & mask)).copied() == Some(n));
                }
            }
            Kind::Hook(theta, b) => {
                let (inside, outside): (Vec<Row>, Vec<Row>) =
                    team.iter().partition(|&&r| self.prog.fo(theta, r, None));
                let Some(w) = self.max_sub(b, &inside)? else {
                    return Ok(None);
                };
                Ok(Some(canon([outside, w].concat())))
            }
            Kind::Diamond(b) => {
                let w = self.max_sub(b, team)?;
                Ok(w.filter(|w| !w.is_empty()).map(|_| team.to_vec()))
            }
            Kind::Atom(atom) => match atom.shape {
                Shape::Upward => Ok(self.prog.atom_holds(atom, team).then(|| team.to_vec())),
                Shape::Inclusion => Ok(Some(self.inclusion_gfp(atom, team))),
                Shape::Plain => unreachable!("plain atom on union path"),
            },
        }
    }

    /// Largest subteam satisfying an inclusion atom: drop rows whose left
    /// tuple is not among the remaining right tuples until stable.
    fn inclusion_gfp(&self, atom: &Atom, team: &[Row]) -> Vec<Row> {
        let k = atom.args.len();
        let h = k / 2;
        let n = self.prog.n;
        let vals = self.prog.atom_values(atom, team);
        let xs: Vec<usize> = vals.chunks(k).map(|t| code(n, t[..h].iter().copied())).collect();
        let ys: Vec<usize> = vals.chunks(k).map(|t| code(n, t[h..].iter().copied())).collect();
        let mut alive: Vec<bool> = vec![true; team.len()];
        loop {
            let avail: FxHashSet<usize> = (0..team.len()).filter(|&i| alive[i]).map(|i| ys[i]).collect();
            let mut changed = false;
            for i in 0..team.len() {
                if alive[i] && !avail.contains(&xs[i]) {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        team.iter().zip(alive).filter(|(_, a)| *a).map(|(&r, _)| r).collect()
    }
}

fn pick(team: &[Row], mask: u64) -> Vec<Row> {
    team.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &r)| r)
        .collect()
}

impl<'a> Evaluator<'a> {
    /// Compiles `f` for teams over `team_vars`.
    pub fn new(
        model: &'a Model,
        registry: &Registry,
        f: &Formula,
        team_vars: &[String],
        opts: &EvalOptions,
    ) -> Result<Evaluator<'a>, EvalError> {
        let layout = Layout::for_size(model.size());
        let mut team_vars = team_vars.to_vec();
        team_vars.sort();
        team_vars.dedup();
        let mut c = Compiler {
            model,
            registry,
            layout,
            slots: HashMap::new(),
            rel_index: HashMap::new(),
            rels: Vec::new(),
            next_id: 0,
            flat: opts.prunings.flat,
        };
        let team_slots = team_vars.iter().map(|v| c.slot(v)).collect::<Result<Vec<_>, _>>()?;
        for v in free_vars(f) {
            if !c.slots.contains_key(&v) {
                return Err(EvalError::Unbound(v));
            }
        }
        let root = if opts.prunings.scope {
            c.node(&narrow_scopes(f))?
        } else {
            c.node(f)?
        };
        let prog = Program {
            n: model.size(),
            layout,
            rels: c.rels,
            root,
            team_slots,
            team_vars,
            prunings: opts.prunings,
        };
        let state = State {
            budget: opts.budget.clone(),
            deadline: opts.budget.timeout.map(|t| Instant::now() + t),
            branches: 0,
            depth: 0,
            memo: FxHashMap::default(),
            max_memo: FxHashMap::default(),
        };
        Ok(Evaluator { model, prog, state })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// `M ⊨_X φ`. The team's variables must be the ones given at
    /// construction.
    pub fn check(&mut self, x: &Team) -> Result<bool, EvalError> {
        if x.vars() != self.prog.team_vars.as_slice() {
            let missing = self
                .prog
                .team_vars
                .iter()
                .find(|v| x.var_index(v).is_none())
                .or_else(|| x.vars().iter().find(|v| !self.prog.team_vars.contains(v)))
                .cloned()
                .unwrap_or_default();
            return Err(EvalError::Unbound(missing));
        }
        let l = self.prog.layout;
        let rows: Vec<Row> = x
            .rows()
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&self.prog.team_slots)
                    .fold(0, |acc, (e, &s)| l.set(acc, s, e.0))
            })
            .collect();
        let rows = canon(rows);
        self.state.depth = 0;
        if let Some(t) = self.state.budget.timeout {
            self.state.deadline = Some(Instant::now() + t);
        }
        let mut run = Run {
            prog: &self.prog,
            st: &mut self.state,
        };
        run.check_size(rows.len())?;
        run.sat(&self.prog.root, &rows)
    }

    /// Search branches explored so far across all checks.
    pub fn branches(&self) -> u64 {
        self.state.branches
    }

    pub fn clear_memo(&mut self) {
        self.state.memo.clear();
        self.state.max_memo.clear();
    }
}
