//! Bounded equivalence checking by enumerating small models and teams.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ast::{free_vars, Formula, Signature};
use crate::deps::Registry;
use crate::semantics::{Elem, EvalError, EvalOptions, Evaluator, Model, Relation, Team};

/// Largest number of models or teams enumerated for one size, as a power
/// of two.
pub const MAX_ENUM_BITS: u32 = 24;
/// Largest number of assignments a team may draw from in exhaustive mode.
pub const MAX_TEAM_ASSIGNMENTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("enumeration too large: {0}")]
    Budget(String),
    #[error("model size 1 is excluded unless explicitly allowed")]
    Singleton,
    #[error("model size must be at least 1")]
    ZeroSize,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Deterministic enumeration of every model of a given size over a
/// signature. Element `i` is named `i`; constants that are not element
/// names range over the domain.
pub struct ModelIter {
    size: usize,
    relations: Vec<(String, usize, usize)>,
    constants: Vec<String>,
    next: u64,
    total: u64,
}

impl ModelIter {
    /// Number of models in the enumeration.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// The model at position `code` of the enumeration.
    pub fn model_at(&self, mut code: u64) -> Model {
        let mut m = Model::numbered(self.size);
        let elems: Vec<Elem> = m.elements().collect();
        for (name, arity, cells) in &self.relations {
            let bits = code & ((1u64 << cells) - 1);
            code >>= cells;
            let mut rel = Relation::new(*arity);
            for cell in 0..*cells {
                if bits >> cell & 1 == 1 {
                    let mut tuple = Vec::with_capacity(*arity);
                    let mut c = cell;
                    for _ in 0..*arity {
                        tuple.push(elems[c % self.size]);
                        c /= self.size;
                    }
                    tuple.reverse();
                    rel.insert(tuple);
                }
            }
            m.add_relation(name, rel).expect("fresh relation");
        }
        for c in &self.constants {
            let e = (code % self.size as u64) as usize;
            code /= self.size as u64;
            let name = m.name(elems[e]).to_string();
            m.add_constant(c, &name).expect("fresh constant");
        }
        m
    }
}

impl Iterator for ModelIter {
    type Item = Model;

    fn next(&mut self) -> Option<Model> {
        if self.next >= self.total {
            return None;
        }
        self.next += 1;
        Some(self.model_at(self.next - 1))
    }
}

pub fn enumerate_models(sig: &Signature, size: usize) -> Result<ModelIter, EquivError> {
    if size == 0 {
        return Err(EquivError::ZeroSize);
    }
    let mut bits = 0f64;
    let mut relations = Vec::new();
    for (name, &arity) in &sig.relations {
        let cells = size.checked_pow(arity as u32).unwrap_or(usize::MAX);
        bits += cells as f64;
        relations.push((name.clone(), arity, cells));
    }
    let names: BTreeSet<String> = (0..size).map(|i| i.to_string()).collect();
    let constants: Vec<String> = sig.constants.iter().filter(|c| !names.contains(*c)).cloned().collect();
    bits += constants.len() as f64 * (size as f64).log2();
    if bits > MAX_ENUM_BITS as f64 {
        return Err(EquivError::Budget(format!(
            "about 2^{bits:.1} models of size {size}, limit 2^{MAX_ENUM_BITS}"
        )));
    }
    let mut total: u64 = 1;
    for (_, _, cells) in &relations {
        total <<= cells;
    }
    for _ in &constants {
        total *= size as u64;
    }
    Ok(ModelIter {
        size,
        relations,
        constants,
        next: 0,
        total,
    })
}

fn all_rows(m: &Model, k: usize) -> Vec<Vec<Elem>> {
    let mut rows = vec![Vec::new()];
    for _ in 0..k {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                m.elements().map(move |e| {
                    let mut r = r.clone();
                    r.push(e);
                    r
                })
            })
            .collect();
    }
    rows
}

/// Every team over `vars`, the full team first and the empty team last.
pub fn enumerate_teams(m: &Model, vars: &[String]) -> Result<impl Iterator<Item = Team>, EquivError> {
    let mut vars: Vec<String> = vars.to_vec();
    vars.sort();
    vars.dedup();
    let rows = all_rows(m, vars.len());
    if rows.len() > MAX_TEAM_ASSIGNMENTS {
        return Err(EquivError::Budget(format!(
            "{} assignments, limit {MAX_TEAM_ASSIGNMENTS}",
            rows.len()
        )));
    }
    let n = rows.len();
    Ok((0..1u32 << n).rev().map(move |mask| {
        Team::from_rows(
            vars.clone(),
            rows.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, r)| r.clone()),
        )
    }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TeamMode {
    Exhaustive,
    /// `count` random model and team pairs drawn with a seeded generator.
    Sampled { count: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct EquivOptions {
    pub sizes: Vec<usize>,
    pub allow_singleton: bool,
    pub teams: TeamMode,
    pub eval: EvalOptions,
}

impl Default for EquivOptions {
    fn default() -> EquivOptions {
        EquivOptions {
            sizes: vec![2, 3],
            allow_singleton: false,
            teams: TeamMode::Exhaustive,
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    EquivalentUpToBound { models: u64, teams: u64 },
    Counterexample {
        model: Model,
        team: Team,
        left: bool,
        right: bool,
    },
    NoCounterexampleFound { samples: u64 },
}

impl Verdict {
    pub fn is_counterexample(&self) -> bool {
        matches!(self, Verdict::Counterexample { .. })
    }

    /// For a counterexample, re-evaluates both formulas and checks that
    /// they still disagree as recorded.
    pub fn replay(&self, f1: &Formula, f2: &Formula, registry: &Registry) -> Result<bool, EvalError> {
        match self {
            Verdict::Counterexample {
                model,
                team,
                left,
                right,
            } => {
                let l = crate::semantics::eval(model, team, f1, registry)?;
                let r = crate::semantics::eval(model, team, f2, registry)?;
                Ok(l == *left && r == *right && l != r)
            }
            _ => Ok(false),
        }
    }
}

struct Pair<'a> {
    left: Evaluator<'a>,
    right: Evaluator<'a>,
}

impl<'a> Pair<'a> {
    fn new(
        m: &'a Model,
        f1: &'a Formula,
        f2: &'a Formula,
        registry: &'a Registry,
        vars: &[String],
        opts: &EvalOptions,
    ) -> Result<Pair<'a>, EvalError> {
        Ok(Pair {
            left: Evaluator::new(m, registry, f1, vars, opts)?,
            right: Evaluator::new(m, registry, f2, vars, opts)?,
        })
    }

    fn differ(&mut self, m: &Model, x: &Team) -> Result<Option<Verdict>, EvalError> {
        let l = self.left.check(x)?;
        let r = self.right.check(x)?;
        Ok((l != r).then(|| Verdict::Counterexample {
            model: m.clone(),
            team: x.clone(),
            left: l,
            right: r,
        }))
    }
}

/// Compares `f1` and `f2` on every model of the requested sizes over
/// their joint signature. Teams range over the union of the free
/// variables; sentences are checked on `{ε}` only.
pub fn equivalent(
    f1: &Formula,
    f2: &Formula,
    registry: &Registry,
    opts: &EquivOptions,
) -> Result<Verdict, EquivError> {
    if opts.sizes.contains(&1) && !opts.allow_singleton {
        return Err(EquivError::Singleton);
    }
    let mut sig = Signature::of_formula(f1);
    let s2 = Signature::of_formula(f2);
    sig.relations.extend(s2.relations);
    sig.constants.extend(s2.constants);
    let vars: Vec<String> = free_vars(f1).union(&free_vars(f2)).cloned().collect();

    match &opts.teams {
        TeamMode::Exhaustive => {
            let (mut models, mut teams) = (0u64, 0u64);
            for &size in &opts.sizes {
                for m in enumerate_models(&sig, size)? {
                    models += 1;
                    let mut pair = Pair::new(&m, f1, f2, registry, &vars, &opts.eval)?;
                    if vars.is_empty() {
                        teams += 1;
                        if let Some(v) = pair.differ(&m, &Team::epsilon())? {
                            return Ok(v);
                        }
                        continue;
                    }
                    for x in enumerate_teams(&m, &vars)? {
                        teams += 1;
                        if let Some(v) = pair.differ(&m, &x)? {
                            return Ok(v);
                        }
                    }
                }
            }
            Ok(Verdict::EquivalentUpToBound { models, teams })
        }
        TeamMode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..*count {
                let size = opts.sizes[rng.gen_range(0..opts.sizes.len().max(1))];
                let iter = enumerate_models(&sig, size)?;
                let m = iter.model_at(rng.gen_range(0..iter.total()));
                let x = if vars.is_empty() {
                    Team::epsilon()
                } else {
                    let rows = all_rows(&m, vars.len());
                    Team::from_rows(vars.clone(), rows.into_iter().filter(|_| rng.gen_bool(0.5)))
                };
                let mut pair = Pair::new(&m, f1, f2, registry, &vars, &opts.eval)?;
                if let Some(v) = pair.differ(&m, &x)? {
                    return Ok(v);
                }
            }
            Ok(Verdict::NoCounterexampleFound { samples: *count as u64 })
        }
    }
}
