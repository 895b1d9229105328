//! Seeded random formulas and teams for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ast::{Formula, Term};
use crate::semantics::{Elem, Model, Team};

/// Knobs for [`random_formula`].
#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Binary relation used in literals.
    pub relation: String,
    /// Dependency atoms that may appear, with their arity.
    pub atoms: Vec<(String, usize)>,
    pub allow_hooks: bool,
    pub allow_diamond: bool,
    pub max_depth: usize,
}

impl GenConfig {
    /// First-order formulas over `E/2`.
    pub fn first_order() -> GenConfig {
        GenConfig {
            relation: "E".into(),
            atoms: Vec::new(),
            allow_hooks: false,
            allow_diamond: false,
            max_depth: 3,
        }
    }

    /// First-order formulas over `E/2` with unary inclusion atoms.
    pub fn inclusion() -> GenConfig {
        GenConfig {
            atoms: vec![("inc".into(), 2)],
            ..GenConfig::first_order()
        }
    }

    pub fn with_atoms(atoms: &[(&str, usize)]) -> GenConfig {
        GenConfig {
            atoms: atoms.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            allow_hooks: true,
            ..GenConfig::first_order()
        }
    }
}

fn pick_var<R: Rng>(rng: &mut R, scope: &[String]) -> Term {
    Term::var(scope.choose(rng).expect("nonempty scope").as_str())
}

fn literal<R: Rng>(rng: &mut R, cfg: &GenConfig, scope: &[String]) -> Formula {
    let (a, b) = (pick_var(rng, scope), pick_var(rng, scope));
    match rng.gen_range(0..4) {
        0 => Formula::eq(a, b),
        1 => Formula::neq(a, b),
        2 => Formula::rel(cfg.relation.clone(), vec![a, b]),
        _ => Formula::not_rel(cfg.relation.clone(), vec![a, b]),
    }
}

fn fo_literal_conj<R: Rng>(rng: &mut R, cfg: &GenConfig, scope: &[String]) -> Formula {
    let first = literal(rng, cfg, scope);
    if rng.gen_bool(0.3) {
        Formula::and(first, literal(rng, cfg, scope))
    } else {
        first
    }
}

fn leaf<R: Rng>(rng: &mut R, cfg: &GenConfig, scope: &[String]) -> Formula {
    if !cfg.atoms.is_empty() && rng.gen_bool(0.4) {
        let (name, k) = cfg.atoms.choose(rng).expect("nonempty").clone();
        let args = (0..k).map(|_| pick_var(rng, scope)).collect();
        return Formula::dep(name, args);
    }
    literal(rng, cfg, scope)
}

/// A random formula whose free variables are among `scope`, which must be
/// nonempty. Bound variables are named `b0`, `b1`, … by depth.
pub fn random_formula<R: Rng>(rng: &mut R, cfg: &GenConfig, scope: &[String]) -> Formula {
    gen(rng, cfg, scope, cfg.max_depth)
}

fn gen<R: Rng>(rng: &mut R, cfg: &GenConfig, scope: &[String], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, cfg, scope);
    }
    let choices = 4 + usize::from(cfg.allow_hooks) + usize::from(cfg.allow_diamond);
    match rng.gen_range(0..choices) {
        0 => Formula::and(gen(rng, cfg, scope, depth - 1), gen(rng, cfg, scope, depth - 1)),
        1 => Formula::or(gen(rng, cfg, scope, depth - 1), gen(rng, cfg, scope, depth - 1)),
        2 | 3 => {
            let v = format!("b{depth}");
            let mut inner = scope.to_vec();
            inner.push(v.clone());
            let body = gen(rng, cfg, &inner, depth - 1);
            if rng.gen_bool(0.5) {
                Formula::exists(v, body)
            } else {
                Formula::forall(v, body)
            }
        }
        4 if cfg.allow_hooks => Formula::hook(fo_literal_conj(rng, cfg, scope), gen(rng, cfg, scope, depth - 1)),
        _ => Formula::diamond(gen(rng, cfg, scope, depth - 1)),
    }
}

/// A random team over `vars`, each assignment kept with probability
/// `density`.
pub fn random_team<R: Rng>(rng: &mut R, m: &Model, vars: &[String], density: f64) -> Team {
    let mut rows: Vec<Vec<Elem>> = vec![Vec::new()];
    for _ in vars {
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
    Team::from_rows(vars.to_vec(), rows.into_iter().filter(|_| rng.gen_bool(density)))
}

/// A random team of at most `max_rows` assignments.
pub fn random_small_team<R: Rng>(rng: &mut R, m: &Model, vars: &[String], max_rows: usize) -> Team {
    let n = rng.gen_range(0..=max_rows);
    let elems: Vec<Elem> = m.elements().collect();
    let rows: Vec<Vec<Elem>> = (0..n)
        .map(|_| vars.iter().map(|_| *elems.choose(rng).expect("nonempty domain")).collect())
        .collect();
    Team::from_rows(vars.to_vec(), rows)
}

/// Formulas for rewrite-pass checks: sentences and formulas with free
/// variables among `x` and `y`. Atoms of union-closed and of downward
/// closed kinds are kept in separate formulas.
pub const REWRITE_CORPUS: &[&str] = &[
    "forall x. (all(x) \\/ x = x)",
    "exists y. all(y)",
    "(forall x. E(x,x)) \\/ (exists y. ne(y))",
    "forall x. exists y. (E(x,y) \\/ inc(x ; y))",
    "exists x. (nc(x) /\\ forall y. (E(x,y) => all(y)))",
    "forall x y. (E(x,y) => inc(y ; x))",
    "(exists x. all(x)) /\\ (exists x. E(x,x))",
    "forall x. ((exists y. E(x,y)) \\/ ne(x))",
    "exists x y. ((x = y => all(x)) /\\ inc(x ; y))",
    "forall x. (E(x,x) \\/ (forall y. (E(x,y) \\/ all(y))))",
    "exists x. forall y. (E(x,y) \\/ const(y))",
    "forall x. exists y. (E(x,y) /\\ const(y))",
    "exists x. forall y. (fdep(x ; y) \\/ E(x,y))",
    "exists x. forall y. (exc(x ; y) \\/ x = y)",
    "(forall x. const(x)) \\/ (exists y. E(y,y))",
    "forall x. (x = x => exists y. (fdep(x ; y) /\\ E(x,y)))",
    "all(x) \\/ E(x,x)",
    "exists y. (E(x,y) /\\ inc(y ; x))",
    "forall y. (E(x,y) \\/ ne(y))",
    "(forall y. E(x,y)) \\/ x = x",
    "nc(x) /\\ (exists z. E(x,z))",
    "const(x) \\/ E(x,x)",
    "exists y. (fdep(x ; y) \\/ E(x,y))",
    "exists z. (exc(x ; z) /\\ E(z,x))",
    "E(x,y) => (all(x) /\\ inc(x ; y))",
    "x = y => (y = x => const(x))",
    "x = y \\/ (E(x,y) /\\ all(y))",
    "(exists z. E(x,z)) /\\ (forall z. (E(z,y) \\/ all(z)))",
    "fdep(x ; y) \\/ x = y",
    "inc(x ; y) /\\ inc(y ; x)",
    "E(x,y) \\/ (x != y /\\ exc(x ; y))",
    "x = x => (exists y. (E(x,y) /\\ const(y)))",
];

/// Formulas with `◇` for macro-expansion checks.
pub const DIAMOND_CORPUS: &[&str] = &[
    "<> E(x,x)",
    "forall x. <> all(x)",
    "<> (x = y /\\ nc(x))",
    "<> (<> x != y)",
    "exists x. <> (E(x,x) /\\ const(x))",
];

/// Sentences containing totality atoms directly or through `nc`, `ne`
/// and `◇`.
pub const TOTALITY_CORPUS: &[&str] = &[
    "exists y. all(y)",
    "forall x. (all(x) \\/ x = x)",
    "forall x. exists y. (E(x,y) /\\ all(y))",
    "exists x. (E(x,x) => all(x))",
    "forall x. exists y. (x != y /\\ (E(x,y) \\/ all(y)))",
    "(exists x. all(x)) /\\ (forall y. exists z. E(y,z))",
    "exists x y. (all(x) /\\ all(y))",
    "exists x. nc(x)",
    "exists x. (E(x,x) \\/ ne(x))",
    "forall x. <> x != x",
    "exists x. <> E(x,x)",
    "forall x. exists y. (E(x,y) /\\ nc(y))",
];

pub fn parse_all(texts: &[&str]) -> Vec<Formula> {
    texts
        .iter()
        .map(|s| crate::parse::parse_formula(s).expect("corpus formula parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::free_vars;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_formulas_respect_scope() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scope = vec!["x".to_string(), "y".to_string()];
        for _ in 0..200 {
            let f = random_formula(&mut rng, &GenConfig::first_order(), &scope);
            assert!(f.is_first_order());
            assert!(free_vars(&f).iter().all(|v| scope.contains(v)));
        }
    }

    #[test]
    fn seeds_reproduce() {
        let scope = vec!["x".to_string()];
        let a = random_formula(&mut ChaCha8Rng::seed_from_u64(9), &GenConfig::inclusion(), &scope);
        let b = random_formula(&mut ChaCha8Rng::seed_from_u64(9), &GenConfig::inclusion(), &scope);
        assert_eq!(a, b);
    }
}
