//! Cycle graphs, automorphisms, team closure, flattening and the
//! non-connectedness sentence.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::Formula;
use crate::corpus::{random_formula, random_small_team, GenConfig};
use crate::deps::Registry;
use crate::parse::parse_formula;
use crate::semantics::{eval, Elem, EvalError, Model, Relation, Team};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("n must be at least 1")]
    ZeroN,
    #[error("n = {0} is too large (at most {MAX_N})")]
    TooLarge(usize),
    #[error("automorphism search budget exhausted after {0} nodes")]
    Budget(u64),
}

pub const MAX_N: usize = 12;

/// Search nodes allowed in [`automorphisms`].
pub const SEARCH_BUDGET: u64 = 50_000_000;

fn cycle_edges(rel: &mut Relation, ids: &[Elem]) {
    let n = ids.len();
    for i in 0..n {
        let (a, b) = (ids[i], ids[(i + 1) % n]);
        rel.insert(vec![a, b]);
        rel.insert(vec![b, a]);
    }
}

fn check_n(n: usize) -> Result<(), StructureError> {
    match n {
        0 => Err(StructureError::ZeroN),
        n if n > MAX_N => Err(StructureError::TooLarge(n)),
        _ => Ok(()),
    }
}

/// Two disjoint cycles of length `2^(n+1)`, vertices `c0_i` and `c1_i`.
pub fn graph_an(n: usize) -> Result<Model, StructureError> {
    check_n(n)?;
    let len = 1usize << (n + 1);
    let names: Vec<String> = (0..2)
        .flat_map(|c| (0..len).map(move |i| format!("c{c}_{i}")))
        .collect();
    let mut m = Model::new(names).expect("distinct labels");
    let mut e = Relation::new(2);
    for c in 0..2 {
        let ids: Vec<Elem> = (0..len).map(|i| Elem((c * len + i) as u16)).collect();
        cycle_edges(&mut e, &ids);
    }
    m.add_relation("E", e).expect("fresh relation");
    Ok(m)
}

/// One cycle of length `2^(n+2)`, vertices `v_i`.
pub fn graph_bn(n: usize) -> Result<Model, StructureError> {
    check_n(n)?;
    let len = 1usize << (n + 2);
    let mut m = Model::new((0..len).map(|i| format!("v_{i}")).collect()).expect("distinct labels");
    let mut e = Relation::new(2);
    let ids: Vec<Elem> = (0..len).map(|i| Elem(i as u16)).collect();
    cycle_edges(&mut e, &ids);
    m.add_relation("E", e).expect("fresh relation");
    Ok(m)
}

/// A graph on `0..n` with the given undirected edges, stored symmetrically.
pub fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> Model {
    let mut m = Model::numbered(n);
    let mut e = Relation::new(2);
    for &(a, b) in edges {
        e.insert(vec![Elem(a as u16), Elem(b as u16)]);
        e.insert(vec![Elem(b as u16), Elem(a as u16)]);
    }
    m.add_relation("E", e).expect("fresh relation");
    m
}

/// Every loopless undirected graph on `n` vertices.
pub fn all_graphs(n: usize) -> impl Iterator<Item = Model> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    assert!(pairs.len() < 32, "too many vertices for exhaustive enumeration");
    (0u32..1 << pairs.len()).map(move |mask| {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        graph_from_edges(n, &edges)
    })
}

/// A bijection on the domain, as the list of images in domain order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<Elem>,
}

impl Permutation {
    pub fn identity(n: usize) -> Permutation {
        Permutation {
            images: (0..n).map(|i| Elem(i as u16)).collect(),
        }
    }

    /// `None` unless `images` is a bijection on `0..images.len()`.
    pub fn new(images: Vec<Elem>) -> Option<Permutation> {
        let mut seen = vec![false; images.len()];
        for e in &images {
            let slot = seen.get_mut(e.0 as usize)?;
            if *slot {
                return None;
            }
            *slot = true;
        }
        Some(Permutation { images })
    }

    pub fn images(&self) -> &[Elem] {
        &self.images
    }

    pub fn apply(&self, e: Elem) -> Elem {
        self.images[e.0 as usize]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation {
            images: other.images.iter().map(|&e| self.apply(e)).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![Elem(0); self.images.len()];
        for (i, e) in self.images.iter().enumerate() {
            images[e.0 as usize] = Elem(i as u16);
        }
        Permutation { images }
    }

    /// Whether every relation is mapped onto itself and declared constants
    /// are fixed.
    pub fn is_automorphism(&self, m: &Model) -> bool {
        if self.images.len() != m.size() {
            return false;
        }
        let rels_ok = m.relations().values().all(|r| {
            r.tuples()
                .iter()
                .all(|t| r.contains(&t.iter().map(|&e| self.apply(e)).collect::<Vec<_>>()))
        });
        rels_ok && m.constants().values().all(|&c| self.apply(c) == c)
    }
}

/// Per element: for each relation and argument position, the number of
/// tuples with the element at that position.
fn signatures(m: &Model) -> Vec<Vec<usize>> {
    let mut sig = vec![Vec::new(); m.size()];
    for r in m.relations().values() {
        let base = sig[0].len();
        for s in sig.iter_mut() {
            s.resize(base + r.arity(), 0);
        }
        for t in r.tuples() {
            for (pos, e) in t.iter().enumerate() {
                sig[e.0 as usize][base + pos] += 1;
            }
        }
    }
    let fixed: BTreeSet<Elem> = m.constants().values().copied().collect();
    for (i, s) in sig.iter_mut().enumerate() {
        // a fixed point can only map to itself
        s.push(if fixed.contains(&Elem(i as u16)) { i + 1 } else { 0 });
    }
    sig
}

struct Search<'a> {
    m: &'a Model,
    /// Tuples whose largest element is `i`, per relation.
    by_last: Vec<Vec<(&'a Relation, &'a Vec<Elem>)>>,
    sig: Vec<Vec<usize>>,
    images: Vec<Elem>,
    used: Vec<bool>,
    nodes: u64,
    out: Vec<Permutation>,
}

impl Search<'_> {
    fn consistent(&self, i: usize) -> bool {
        self.by_last[i].iter().all(|(r, t)| {
            let img: Vec<Elem> = t.iter().map(|e| self.images[e.0 as usize]).collect();
            r.contains(&img)
        })
    }

    fn run(&mut self, i: usize) -> Result<(), StructureError> {
        if i == self.m.size() {
            self.out.push(Permutation {
                images: self.images.clone(),
            });
            return Ok(());
        }
        for j in 0..self.m.size() {
            if self.used[j] || self.sig[i] != self.sig[j] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > SEARCH_BUDGET {
                return Err(StructureError::Budget(self.nodes));
            }
            self.images[i] = Elem(j as u16);
            if self.consistent(i) {
                self.used[j] = true;
                self.run(i + 1)?;
                self.used[j] = false;
            }
        }
        Ok(())
    }
}

/// All automorphisms of `m`, by backtracking over partial maps. Images are
/// restricted to elements with the same tuple-count signature and every
/// fully mapped tuple is checked as soon as its last element is placed.
pub fn automorphisms(m: &Model) -> Result<Vec<Permutation>, StructureError> {
    let n = m.size();
    let mut by_last = vec![Vec::new(); n];
    for r in m.relations().values() {
        for t in r.tuples() {
            if let Some(last) = t.iter().map(|e| e.0 as usize).max() {
                by_last[last].push((r, t));
            }
        }
    }
    let mut s = Search {
        m,
        by_last,
        sig: signatures(m),
        images: vec![Elem(0); n],
        used: vec![false; n],
        nodes: 0,
        out: Vec::new(),
    };
    s.run(0)?;
    Ok(s.out)
}

/// Whether the automorphism group moves every element to every other.
pub fn vertex_transitive(m: &Model) -> Result<bool, StructureError> {
    if m.size() == 0 {
        return Ok(true);
    }
    let autos = automorphisms(m)?;
    let orbit: BTreeSet<Elem> = autos.iter().map(|p| p.apply(Elem(0))).collect();
    Ok(orbit.len() == m.size())
}

/// `{f ∘ s : s ∈ X, f ∈ autos}`.
pub fn closure_under(x: &Team, autos: &[Permutation]) -> Team {
    let mut out = Team::empty(x.vars().iter().cloned());
    for row in x.rows() {
        for f in autos {
            out.insert_row(row.iter().map(|&e| f.apply(e)).collect());
        }
    }
    out
}

/// The closure of `x` under all automorphisms of `m`.
pub fn closure(x: &Team, m: &Model) -> Result<Team, StructureError> {
    Ok(closure_under(x, &automorphisms(m)?))
}

/// Replaces every dependency atom named in `kinds` by `top`.
pub fn flatten(f: &Formula, kinds: &[&str]) -> Formula {
    match f {
        Formula::Dep { name, .. } if kinds.contains(&name.as_str()) => Formula::top(),
        Formula::Lit(_) | Formula::Dep { .. } | Formula::Generic { .. } => f.clone(),
        Formula::And(a, b) => Formula::and(flatten(a, kinds), flatten(b, kinds)),
        Formula::Or(a, b) => Formula::or(flatten(a, kinds), flatten(b, kinds)),
        Formula::Hook(a, b) => Formula::hook((**a).clone(), flatten(b, kinds)),
        Formula::Exists(v, b) => Formula::exists(v.clone(), flatten(b, kinds)),
        Formula::Forall(v, b) => Formula::forall(v.clone(), flatten(b, kinds)),
        Formula::Diamond(b) => Formula::diamond(flatten(b, kinds)),
    }
}

pub const NONCONN_TEXT: &str = "exists x y. (const(y) /\\ forall z. (E(x,z) => inc(z ; x)) /\\ x != y)";

/// True on a graph exactly when the graph is not connected.
pub fn nonconn_sentence() -> Formula {
    parse_formula(NONCONN_TEXT).expect("fixed sentence parses")
}

/// Connectivity of the symmetric closure of `rel`; a missing relation
/// counts as edgeless.
pub fn is_connected(m: &Model, rel: &str) -> bool {
    let n = m.size();
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    if let Some(r) = m.relation(rel) {
        for t in r.tuples() {
            if let [a, b] = t[..] {
                adj[a.0 as usize].push(b.0 as usize);
                adj[b.0 as usize].push(a.0 as usize);
            }
        }
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == n
}

const INCLUSION_SENTENCES: &[&str] = &[
    "forall x. exists y. (E(x,y) /\\ inc(y ; x))",
    "forall x y. (E(x,y) => inc(x ; y))",
    "exists x y. (E(x,y) /\\ inc(x ; y) /\\ inc(y ; x))",
    "forall x. exists y z. (E(x,y) /\\ E(x,z) /\\ y != z /\\ inc(z ; y))",
    "forall x. exists y. (E(x,y) /\\ forall z. (E(y,z) => inc(z ; x)))",
    "exists x. forall y. (inc(y ; x) \\/ E(x,y))",
    "forall x. (inc(x ; x) \\/ exists y. E(x,y))",
    "exists x y. (x != y /\\ forall z. (E(z,x) => inc(z ; y)))",
    "forall x. exists y. (!E(x,y) /\\ x != y /\\ inc(y ; x))",
    "forall x y. (E(x,y) \\/ inc(x ; y))",
    "exists x. forall y. (E(x,y) => exists z. (E(y,z) /\\ z != x /\\ inc(z ; y)))",
    "forall x. exists y z. (E(x,y) /\\ E(y,z) /\\ x != z /\\ inc(x ; z))",
];

/// Sentences over `{E/2}` using only unary inclusion atoms.
pub fn inclusion_corpus() -> Vec<Formula> {
    INCLUSION_SENTENCES
        .iter()
        .map(|s| parse_formula(s).expect("corpus sentence parses"))
        .collect()
}

const INCLUSION_OPEN: &[&str] = &[
    "inc(x ; y)",
    "E(x,y) /\\ inc(y ; x)",
    "exists z. (E(x,z) /\\ inc(z ; y))",
    "forall z. (E(x,z) => inc(z ; y))",
    "inc(x ; y) \\/ x = y",
    "exists z. (inc(z ; x) /\\ E(z,y))",
];

/// Formulas with free variables `x` and `y` using only unary inclusion
/// atoms.
pub fn inclusion_corpus_open() -> Vec<Formula> {
    INCLUSION_OPEN
        .iter()
        .map(|s| parse_formula(s).expect("corpus formula parses"))
        .collect()
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl DemoError {
    pub fn is_budget(&self) -> bool {
        match self {
            DemoError::Structure(e) => matches!(e, StructureError::Budget(_)),
            DemoError::Eval(e) => e.is_budget(),
        }
    }
}

/// Passed and total counts of one family of checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub passed: usize,
    pub total: usize,
}

impl Tally {
    fn record(&mut self, ok: bool) {
        self.total += 1;
        self.passed += usize::from(ok);
    }

    pub fn all(&self) -> bool {
        self.passed == self.total
    }
}

/// Outcome of the checks on one of the two graphs.
#[derive(Clone, Debug)]
pub struct GraphReport {
    pub name: String,
    pub vertices: usize,
    pub automorphisms: usize,
    pub vertex_transitive: bool,
    pub nonconn: bool,
    pub connected: bool,
    /// Sentences of [`inclusion_corpus`] agreeing with their flattening.
    pub flattening: Tally,
    /// `Cl(Cl(Y)) = Cl(Y)` and `Cl(Y ∪ Z) = Cl(Y) ∪ Cl(Z)`.
    pub itercl: Tally,
    /// First-order formulas agree on `Y` and `Cl(Y)`.
    pub focl: Tally,
    /// Open inclusion formulas agree with their flattening on `Cl(Y)`.
    pub clinc: Tally,
}

#[derive(Clone, Debug)]
pub struct UnsafetyReport {
    pub n: usize,
    pub a: GraphReport,
    pub b: GraphReport,
}

impl UnsafetyReport {
    /// The non-connectedness sentence separates the pair and every other
    /// check agrees.
    pub fn as_expected(&self) -> bool {
        self.a.nonconn
            && !self.b.nonconn
            && [&self.a, &self.b].iter().all(|g| {
                g.vertex_transitive
                    && g.nonconn != g.connected
                    && g.flattening.all()
                    && g.itercl.all()
                    && g.focl.all()
                    && g.clinc.all()
            })
    }
}

fn graph_report<R: rand::Rng>(
    name: String,
    g: &Model,
    teams: usize,
    rng: &mut R,
    registry: &Registry,
) -> Result<GraphReport, DemoError> {
    let autos = automorphisms(g)?;
    let orbit: BTreeSet<Elem> = autos.iter().map(|p| p.apply(Elem(0))).collect();
    let eps = Team::epsilon();
    let mut flattening = Tally::default();
    for f in inclusion_corpus() {
        let a = eval(g, &eps, &f, registry)?;
        let b = eval(g, &eps, &flatten(&f, &["inc"]), registry)?;
        flattening.record(a == b);
    }
    let vars = vec!["x".to_string(), "y".to_string()];
    let (mut itercl, mut focl, mut clinc) = (Tally::default(), Tally::default(), Tally::default());
    let open = inclusion_corpus_open();
    for _ in 0..teams {
        let y = random_small_team(rng, g, &vars, 4);
        let z = random_small_team(rng, g, &vars, 4);
        let cy = closure_under(&y, &autos);
        itercl.record(closure_under(&cy, &autos) == cy);
        itercl.record(closure_under(&y.union(&z), &autos) == cy.union(&closure_under(&z, &autos)));
        let f = random_formula(rng, &GenConfig::first_order(), &vars);
        focl.record(eval(g, &y, &f, registry)? == eval(g, &cy, &f, registry)?);
        for h in &open {
            clinc.record(eval(g, &cy, h, registry)? == eval(g, &cy, &flatten(h, &["inc"]), registry)?);
        }
    }
    Ok(GraphReport {
        name,
        vertices: g.size(),
        automorphisms: autos.len(),
        vertex_transitive: orbit.len() == g.size(),
        nonconn: eval(g, &eps, &nonconn_sentence(), registry)?,
        connected: is_connected(g, "E"),
        flattening,
        itercl,
        focl,
        clinc,
    })
}

/// Runs the constancy-unsafety checks on `A_n` and `B_n`, drawing `teams`
/// random teams per graph for the closure checks.
pub fn unsafety_demo(n: usize, teams: usize, seed: u64, registry: &Registry) -> Result<UnsafetyReport, DemoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = graph_report(format!("A{n}"), &graph_an(n)?, teams, &mut rng, registry)?;
    let b = graph_report(format!("B{n}"), &graph_bn(n)?, teams, &mut rng, registry)?;
    Ok(UnsafetyReport { n, a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::Registry;
    use crate::semantics::eval;

    /// Filters all `n!` permutations.
    fn brute_automorphisms(m: &Model) -> Vec<Permutation> {
        fn perms(n: usize, cur: &mut Vec<Elem>, used: &mut Vec<bool>, out: &mut Vec<Vec<Elem>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(Elem(j as u16));
                    perms(n, cur, used, out);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut all = Vec::new();
        perms(m.size(), &mut Vec::new(), &mut vec![false; m.size()], &mut all);
        all.into_iter()
            .map(|im| Permutation::new(im).unwrap())
            .filter(|p| p.is_automorphism(m))
            .collect()
    }

    #[test]
    fn graph_shapes() {
        let a = graph_an(1).unwrap();
        let b = graph_bn(1).unwrap();
        assert_eq!(a.size(), 8);
        assert_eq!(b.size(), 8);
        assert_eq!(a.relation("E").unwrap().len(), 16);
        assert_eq!(b.relation("E").unwrap().len(), 16);
        assert_eq!(a.name(Elem(4)), "c1_0");
        assert_eq!(b.name(Elem(7)), "v_7");
        for n in 1..=5 {
            assert_eq!(graph_an(n).unwrap().size(), graph_bn(n).unwrap().size());
        }
        assert_eq!(graph_an(0).unwrap_err(), StructureError::ZeroN);
        assert_eq!(graph_bn(0).unwrap_err(), StructureError::ZeroN);
    }

    #[test]
    fn automorphism_counts_match_oracle() {
        let a = graph_an(1).unwrap();
        let b = graph_bn(1).unwrap();
        let (fa, fb) = (automorphisms(&a).unwrap(), automorphisms(&b).unwrap());
        assert_eq!(fa, brute_automorphisms(&a));
        assert_eq!(fb, brute_automorphisms(&b));
        assert_eq!(fa.len(), 128);
        assert_eq!(fb.len(), 16);
        let edgeless = graph_from_edges(2, &[]);
        assert_eq!(automorphisms(&edgeless).unwrap().len(), 2);
    }

    #[test]
    fn automorphisms_on_small_graphs_match_oracle() {
        for m in all_graphs(4) {
            assert_eq!(automorphisms(&m).unwrap(), brute_automorphisms(&m));
        }
    }

    #[test]
    fn transitivity() {
        assert!(vertex_transitive(&graph_an(1).unwrap()).unwrap());
        assert!(vertex_transitive(&graph_bn(1).unwrap()).unwrap());
        assert!(!vertex_transitive(&graph_from_edges(3, &[(0, 1), (1, 2)])).unwrap());
    }

    #[test]
    fn closure_examples() {
        let a = graph_an(1).unwrap();
        let x = Team::from_rows(vec!["v".into()], [vec![Elem(0)]]);
        assert_eq!(closure(&x, &a).unwrap().len(), 8);
        let empty = Team::empty(["v"]);
        assert_eq!(closure(&empty, &a).unwrap(), empty);
    }

    #[test]
    fn flatten_examples() {
        let f = parse_formula("inc(x ; y) /\\ E(x,y)").unwrap();
        assert_eq!(flatten(&f, &["inc"]), parse_formula("top /\\ E(x,y)").unwrap());
        let g = parse_formula("E(x,y)").unwrap();
        assert_eq!(flatten(&g, &["inc"]), g);
        let flat = flatten(&nonconn_sentence(), &["inc", "const"]);
        assert!(flat.dep_counts().is_empty() && flat.is_sentence());
    }

    #[test]
    fn nonconn_examples() {
        let reg = Registry::builtin();
        let f = nonconn_sentence();
        let eps = Team::epsilon();
        assert!(eval(&graph_an(1).unwrap(), &eps, &f, &reg).unwrap());
        assert!(!eval(&graph_bn(1).unwrap(), &eps, &f, &reg).unwrap());
        assert!(eval(&graph_from_edges(2, &[]), &eps, &f, &reg).unwrap());
    }

    #[test]
    fn connectivity() {
        assert!(!is_connected(&graph_an(1).unwrap(), "E"));
        assert!(is_connected(&graph_bn(1).unwrap(), "E"));
        assert!(is_connected(&graph_from_edges(1, &[]), "E"));
    }

    #[test]
    fn corpora_use_only_unary_inclusion() {
        for f in inclusion_corpus().iter().chain(&inclusion_corpus_open()) {
            let counts = f.dep_counts();
            assert!(counts.keys().all(|k| k == "inc"));
            assert!(!f.any_node(&mut |g| matches!(g, Formula::Dep { args, .. } if args.len() != 2)));
        }
        assert!(inclusion_corpus().len() >= 10);
        assert!(inclusion_corpus().iter().all(Formula::is_sentence));
    }
}
