//! Dependency atoms as first-order sentences over a relation symbol `R`,
//! their closure flags, and exhaustive verification of those flags.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ast::{Formula, Term};
use crate::semantics::{eval_tarski, project, Assignment, Elem, EvalError, Model, Team};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BuiltinKind {
    Const,
    All,
    Ne,
    Nc,
    Inc,
    Exc,
    Fdep,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 7] = [
        BuiltinKind::Const,
        BuiltinKind::All,
        BuiltinKind::Ne,
        BuiltinKind::Nc,
        BuiltinKind::Inc,
        BuiltinKind::Exc,
        BuiltinKind::Fdep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::Const => "const",
            BuiltinKind::All => "all",
            BuiltinKind::Ne => "ne",
            BuiltinKind::Nc => "nc",
            BuiltinKind::Inc => "inc",
            BuiltinKind::Exc => "exc",
            BuiltinKind::Fdep => "fdep",
        }
    }

    pub fn from_name(name: &str) -> Option<BuiltinKind> {
        BuiltinKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn valid_arity(self, arity: usize) -> bool {
        match self {
            BuiltinKind::Inc | BuiltinKind::Exc => arity >= 2 && arity % 2 == 0,
            BuiltinKind::Fdep => arity >= 1,
            _ => arity >= 1,
        }
    }
}

/// Position of the `;` separator in the concrete syntax of a built-in
/// atom with `len` terms.
pub fn split_position(name: &str, len: usize) -> Option<usize> {
    match BuiltinKind::from_name(name)? {
        BuiltinKind::Inc | BuiltinKind::Exc if len >= 2 && len % 2 == 0 => Some(len / 2),
        BuiltinKind::Fdep if len >= 2 => Some(len - 1),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlagStatus {
    Asserted,
    Refuted,
    Unknown,
}

impl fmt::Display for FlagStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlagStatus::Asserted => "asserted",
            FlagStatus::Refuted => "refuted",
            FlagStatus::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosureFlags {
    pub downward: FlagStatus,
    pub upward: FlagStatus,
    /// Closed under unions of nonempty families of satisfying teams.
    pub union: FlagStatus,
    pub empty_team: FlagStatus,
}

impl ClosureFlags {
    pub const UNKNOWN: ClosureFlags = ClosureFlags {
        downward: FlagStatus::Unknown,
        upward: FlagStatus::Unknown,
        union: FlagStatus::Unknown,
        empty_team: FlagStatus::Unknown,
    };

    fn from_bits(dc: bool, up: bool, union: bool, etp: bool) -> ClosureFlags {
        let s = |b: bool| if b { FlagStatus::Asserted } else { FlagStatus::Refuted };
        ClosureFlags {
            downward: s(dc),
            upward: s(up),
            union: s(union),
            empty_team: s(etp),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencySpec {
    pub name: String,
    pub arity: usize,
    /// Sentence over `R` (arity `arity`) and equality.
    pub sentence: Formula,
    pub flags: ClosureFlags,
    pub builtin: Option<BuiltinKind>,
}

impl DependencySpec {
    /// A user-defined dependency with unknown flags.
    pub fn user(name: impl Into<String>, arity: usize, sentence: Formula) -> DependencySpec {
        DependencySpec {
            name: name.into(),
            arity,
            sentence,
            flags: ClosureFlags::UNKNOWN,
            builtin: None,
        }
    }

    pub fn builtin(kind: BuiltinKind, arity: usize) -> Option<DependencySpec> {
        if !kind.valid_arity(arity) {
            return None;
        }
        let (sentence, flags) = builtin_definition(kind, arity);
        Some(DependencySpec {
            name: kind.name().to_string(),
            arity,
            sentence,
            flags,
            builtin: Some(kind),
        })
    }
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    if k == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn vars(names: &[String]) -> Vec<Term> {
    names.iter().map(|n| Term::var(n.as_str())).collect()
}

fn r(args: Vec<Term>) -> Formula {
    Formula::rel("R", args)
}

fn not_r(args: Vec<Term>) -> Formula {
    Formula::not_rel("R", args)
}

fn cat(a: &[String], b: &[String]) -> Vec<String> {
    a.iter().chain(b).cloned().collect()
}

fn builtin_definition(kind: BuiltinKind, k: usize) -> (Formula, ClosureFlags) {
    use BuiltinKind::*;
    match kind {
        // ∀x⃗y⃗(Rx⃗ ∧ Ry⃗ → x⃗ = y⃗)
        Const => {
            let (x, y) = (names("x", k), names("y", k));
            let body = Formula::disj([not_r(vars(&x)), not_r(vars(&y)), Formula::tuple_eq(&vars(&x), &vars(&y))]);
            (
                Formula::forall_all(&cat(&x, &y), body),
                ClosureFlags::from_bits(true, false, false, true),
            )
        }
        // ∀v⃗ Rv⃗
        All => {
            let v = names("v", k);
            (
                Formula::forall_all(&v, r(vars(&v))),
                ClosureFlags::from_bits(false, true, true, false),
            )
        }
        // ∃v⃗ Rv⃗
        Ne => {
            let v = names("v", k);
            (
                Formula::exists_all(&v, r(vars(&v))),
                ClosureFlags::from_bits(false, true, true, false),
            )
        }
        // ∃x⃗y⃗(Rx⃗ ∧ Ry⃗ ∧ x⃗ ≠ y⃗)
        Nc => {
            let (x, y) = (names("x", k), names("y", k));
            let body = Formula::conj([r(vars(&x)), r(vars(&y)), Formula::tuple_neq(&vars(&x), &vars(&y))]);
            (
                Formula::exists_all(&cat(&x, &y), body),
                ClosureFlags::from_bits(false, true, true, false),
            )
        }
        // ∀u⃗v⃗(Ru⃗v⃗ → ∃w⃗ Rw⃗u⃗)
        Inc => {
            let h = k / 2;
            let (u, v, w) = (names("u", h), names("v", h), names("w", h));
            let body = Formula::or(
                not_r(vars(&cat(&u, &v))),
                Formula::exists_all(&w, r(vars(&cat(&w, &u)))),
            );
            (
                Formula::forall_all(&cat(&u, &v), body),
                ClosureFlags::from_bits(false, false, true, true),
            )
        }
        // ∀u⃗v⃗u⃗'v⃗'(Ru⃗v⃗ ∧ Ru⃗'v⃗' → u⃗ ≠ v⃗' ∧ v⃗ ≠ u⃗')
        Exc => {
            let h = k / 2;
            let (u, v) = (names("u", h), names("v", h));
            let up: Vec<String> = u.iter().map(|s| format!("{s}'")).collect();
            let vp: Vec<String> = v.iter().map(|s| format!("{s}'")).collect();
            let body = Formula::disj([
                not_r(vars(&cat(&u, &v))),
                not_r(vars(&cat(&up, &vp))),
                Formula::and(
                    Formula::tuple_neq(&vars(&u), &vars(&vp)),
                    Formula::tuple_neq(&vars(&v), &vars(&up)),
                ),
            ]);
            let all: Vec<String> = [u, v, up, vp].concat();
            (
                Formula::forall_all(&all, body),
                ClosureFlags::from_bits(true, false, false, true),
            )
        }
        // ∀u⃗v₁v₂(Ru⃗v₁ ∧ Ru⃗v₂ → v₁ = v₂)
        Fdep => {
            let u = if k == 1 { Vec::new() } else { names("u", k - 1) };
            let v1 = vec!["v1".to_string()];
            let v2 = vec!["v2".to_string()];
            let body = Formula::disj([
                not_r(vars(&cat(&u, &v1))),
                not_r(vars(&cat(&u, &v2))),
                Formula::var_eq("v1", "v2"),
            ]);
            let all: Vec<String> = [u, v1, v2].concat();
            (
                Formula::forall_all(&all, body),
                ClosureFlags::from_bits(true, false, false, true),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepError {
    #[error("dependency `{0}` is already registered")]
    Duplicate(String),
    #[error("`{0}` is a built-in dependency name")]
    Reserved(String),
    #[error("invalid dependency definition: {0}")]
    Invalid(String),
    #[error("unknown dependency `{0}`")]
    Unknown(String),
    #[error("resource budget exhausted: {0}")]
    Budget(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Registered dependencies. Built-ins are available at every valid arity;
/// arities 1–3 are stored eagerly and larger ones built on lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registry {
    builtins: bool,
    entries: BTreeMap<(String, usize), DependencySpec>,
}

impl Default for Registry {
    fn default() -> Registry {
        Registry::builtin()
    }
}

impl Registry {
    /// A registry without the built-in atoms.
    pub fn empty() -> Registry {
        Registry {
            builtins: false,
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Registry {
        let mut entries = BTreeMap::new();
        for kind in BuiltinKind::ALL {
            for arity in 1..=3 {
                if let Some(spec) = DependencySpec::builtin(kind, arity) {
                    entries.insert((spec.name.clone(), arity), spec);
                }
            }
        }
        Registry {
            builtins: true,
            entries,
        }
    }

    pub fn lookup(&self, name: &str, arity: usize) -> Option<DependencySpec> {
        if let Some(spec) = self.entries.get(&(name.to_string(), arity)) {
            return Some(spec.clone());
        }
        if self.builtins {
            return DependencySpec::builtin(BuiltinKind::from_name(name)?, arity);
        }
        None
    }

    pub fn contains_name(&self, name: &str) -> bool {
        (self.builtins && BuiltinKind::from_name(name).is_some())
            || self.entries.keys().any(|(n, _)| n == name)
    }

    /// Arity of a user-defined dependency, or the smallest stored arity.
    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.entries.keys().find(|(n, _)| n == name).map(|(_, a)| *a)
    }

    pub fn register(&mut self, spec: DependencySpec) -> Result<(), DepError> {
        if self.builtins && BuiltinKind::from_name(&spec.name).is_some() {
            return Err(DepError::Reserved(spec.name));
        }
        if self.contains_name(&spec.name) {
            return Err(DepError::Duplicate(spec.name));
        }
        if spec.arity == 0 {
            return Err(DepError::Invalid("arity must be at least 1".into()));
        }
        crate::parse::check_dependency_sentence(&spec.sentence, spec.arity).map_err(DepError::Invalid)?;
        self.entries.insert((spec.name.clone(), spec.arity), spec);
        Ok(())
    }

    /// Replaces the flags of a registered dependency, typically with the
    /// outcome of [`verify_closure_flags`].
    pub fn set_flags(&mut self, name: &str, arity: usize, flags: ClosureFlags) -> Result<(), DepError> {
        let spec = self
            .entries
            .get_mut(&(name.to_string(), arity))
            .ok_or_else(|| DepError::Unknown(name.to_string()))?;
        spec.flags = flags;
        Ok(())
    }

    /// Stored entries (built-ins at arities 1–3 and user definitions).
    pub fn entries(&self) -> impl Iterator<Item = &DependencySpec> {
        self.entries.values()
    }
}

/// Truth of `d`'s sentence in `m` expanded with `R := X(t⃗)`.
pub fn eval_dep(m: &Model, x: &Team, d: &DependencySpec, terms: &[Term]) -> Result<bool, EvalError> {
    if terms.len() != d.arity {
        return Err(EvalError::DependencyArity {
            name: d.name.clone(),
            expected: d.arity,
            found: terms.len(),
        });
    }
    let rel = project(x, terms, m)?;
    eval_tarski(&m.expanded("R", rel), &Assignment::new(), &d.sentence)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagWitness {
    pub model_size: usize,
    pub team: Team,
    /// The second team involved: the subteam, superteam, or union partner.
    pub other: Option<Team>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlagCheck {
    Confirmed,
    Refuted(FlagWitness),
}

impl FlagCheck {
    pub fn holds(&self) -> bool {
        matches!(self, FlagCheck::Confirmed)
    }

    fn status(&self) -> FlagStatus {
        if self.holds() {
            FlagStatus::Asserted
        } else {
            FlagStatus::Refuted
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureReport {
    pub name: String,
    pub arity: usize,
    pub bound: usize,
    pub downward: FlagCheck,
    pub upward: FlagCheck,
    pub union: FlagCheck,
    pub empty_team: FlagCheck,
}

impl ClosureReport {
    pub fn flags(&self) -> ClosureFlags {
        ClosureFlags {
            downward: self.downward.status(),
            upward: self.upward.status(),
            union: self.union.status(),
            empty_team: self.empty_team.status(),
        }
    }

    /// Flags of `declared` that this report contradicts, by name.
    pub fn contradictions(&self, declared: &ClosureFlags) -> Vec<&'static str> {
        let pairs = [
            ("downward-closed", declared.downward, &self.downward),
            ("upward-closed", declared.upward, &self.upward),
            ("union-closed", declared.union, &self.union),
            ("empty-team-property", declared.empty_team, &self.empty_team),
        ];
        pairs
            .into_iter()
            .filter(|(_, d, c)| match d {
                FlagStatus::Asserted => !c.holds(),
                FlagStatus::Refuted => c.holds(),
                FlagStatus::Unknown => false,
            })
            .map(|(n, _, _)| n)
            .collect()
    }
}

/// Largest number of assignments (`n^arity`) for which all teams are
/// enumerated.
pub const VERIFY_MAX_ASSIGNMENTS: usize = 12;

/// Checks the four closure properties of `d` on every team over
/// `d.arity` distinct variables in equality-only models of sizes
/// `1..=bound`.
pub fn verify_closure_flags(d: &DependencySpec, bound: usize) -> Result<ClosureReport, DepError> {
    let vars: Vec<String> = (1..=d.arity).map(|i| format!("v{i}")).collect();
    let terms: Vec<Term> = vars.iter().map(|v| Term::var(v.as_str())).collect();
    let mut report = ClosureReport {
        name: d.name.clone(),
        arity: d.arity,
        bound,
        downward: FlagCheck::Confirmed,
        upward: FlagCheck::Confirmed,
        union: FlagCheck::Confirmed,
        empty_team: FlagCheck::Confirmed,
    };
    for n in 1..=bound {
        let count = (n as u64).checked_pow(d.arity as u32).unwrap_or(u64::MAX);
        if count > VERIFY_MAX_ASSIGNMENTS as u64 {
            return Err(DepError::Budget(format!(
                "{n}^{} = {count} assignments; at most {VERIFY_MAX_ASSIGNMENTS} are enumerated",
                d.arity
            )));
        }
        let m = Model::numbered(n);
        let rows: Vec<Vec<Elem>> = (0..count as usize)
            .map(|mut c| {
                (0..d.arity)
                    .map(|_| {
                        let e = Elem((c % n) as u16);
                        c /= n;
                        e
                    })
                    .collect()
            })
            .collect();
        let team_of = |mask: u32| {
            Team::from_rows(
                vars.clone(),
                rows.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, r)| r.clone()),
            )
        };
        let total = 1u32 << count;
        let mut sat = Vec::with_capacity(total as usize);
        for mask in 0..total {
            sat.push(eval_dep(&m, &team_of(mask), d, &terms)?);
        }
        let witness = |a: u32, b: Option<u32>| {
            FlagCheck::Refuted(FlagWitness {
                model_size: n,
                team: team_of(a),
                other: b.map(team_of),
            })
        };
        if report.empty_team.holds() && !sat[0] {
            report.empty_team = witness(0, None);
        }
        let full = total - 1;
        for x in 0..total {
            if !sat[x as usize] {
                continue;
            }
            if report.downward.holds() {
                let mut y = x;
                while y > 0 {
                    y = (y - 1) & x;
                    if !sat[y as usize] {
                        report.downward = witness(x, Some(y));
                        break;
                    }
                }
            }
            if report.upward.holds() {
                let free = full & !x;
                let mut s = free;
                loop {
                    if !sat[(x | s) as usize] {
                        report.upward = witness(x, Some(x | s));
                        break;
                    }
                    if s == 0 {
                        break;
                    }
                    s = (s - 1) & free;
                }
            }
            if report.union.holds() {
                for y in (x + 1)..total {
                    if sat[y as usize] && !sat[(x | y) as usize] {
                        report.union = witness(x, Some(y));
                        break;
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;
    use std::collections::BTreeSet;

    #[test]
    fn builtin_sentences() {
        let reg = Registry::builtin();
        assert_eq!(
            reg.lookup("const", 1).unwrap().sentence,
            parse_formula("forall x y. (!R(x) \\/ !R(y) \\/ x = y)").unwrap()
        );
        assert_eq!(
            reg.lookup("inc", 2).unwrap().sentence,
            parse_formula("forall u v. (!R(u,v) \\/ exists w. R(w,u))").unwrap()
        );
        assert_eq!(reg.lookup("all", 1).unwrap().flags.upward, FlagStatus::Asserted);
        assert!(reg.lookup("inc", 3).is_none());
        assert!(reg.lookup("inc", 6).is_some());
        assert!(reg.lookup("const", 7).is_some());
        assert!(Registry::empty().lookup("const", 1).is_none());
    }

    fn team(rows: &[&[u16]]) -> Team {
        let k = rows.first().map_or(1, |r| r.len());
        let vars: Vec<String> = ["x", "y", "z"][..k].iter().map(|s| s.to_string()).collect();
        Team::from_rows(vars, rows.iter().map(|r| r.iter().map(|&e| Elem(e)).collect()))
    }

    #[test]
    fn eval_dep_examples() {
        let reg = Registry::builtin();
        let m = Model::numbered(2);
        let inc = reg.lookup("inc", 2).unwrap();
        let xy = [Term::var("x"), Term::var("y")];
        assert!(!eval_dep(&m, &team(&[&[0, 0], &[1, 0]]), &inc, &xy).unwrap());
        let ne = reg.lookup("ne", 1).unwrap();
        assert!(!eval_dep(&m, &Team::empty(["x"]), &ne, &[Term::var("x")]).unwrap());
        let nc = reg.lookup("nc", 1).unwrap();
        assert!(eval_dep(&m, &team(&[&[0], &[1]]), &nc, &[Term::var("x")]).unwrap());
        assert!(matches!(
            eval_dep(&m, &team(&[&[0]]), &nc, &xy),
            Err(EvalError::DependencyArity { .. })
        ));
    }

    #[test]
    fn closure_flag_examples() {
        let reg = Registry::builtin();
        let r = verify_closure_flags(&reg.lookup("const", 1).unwrap(), 3).unwrap();
        assert!(r.downward.holds() && r.empty_team.holds() && !r.upward.holds());
        let r = verify_closure_flags(&reg.lookup("all", 1).unwrap(), 3).unwrap();
        assert!(r.upward.holds() && !r.empty_team.holds());
        let r = verify_closure_flags(&reg.lookup("inc", 2).unwrap(), 2).unwrap();
        assert!(r.union.holds() && r.empty_team.holds() && !r.downward.holds());
        assert!(verify_closure_flags(&reg.lookup("const", 3).unwrap(), 3).is_err());
    }

    #[test]
    fn builtin_flags_agree_with_verification() {
        let reg = Registry::builtin();
        for kind in BuiltinKind::ALL {
            for arity in 1..=3 {
                let Some(spec) = reg.lookup(kind.name(), arity) else { continue };
                let bound = if arity == 1 { 3 } else if arity == 2 { 3 } else { 2 };
                let report = verify_closure_flags(&spec, bound).unwrap();
                assert_eq!(report.contradictions(&spec.flags), Vec::<&str>::new(), "{} {arity}", kind.name());
                // every builtin flag is decided
                assert_eq!(report.flags(), spec.flags, "{} {arity}", kind.name());
            }
        }
    }

    #[test]
    fn refutation_witnesses_replay() {
        let reg = Registry::builtin();
        let spec = reg.lookup("const", 1).unwrap();
        let r = verify_closure_flags(&spec, 3).unwrap();
        let FlagCheck::Refuted(w) = &r.upward else { panic!() };
        let m = Model::numbered(w.model_size);
        let t = [Term::var("v1")];
        assert!(eval_dep(&m, &w.team, &spec, &t).unwrap());
        let bigger = w.other.as_ref().unwrap();
        assert!(w.team.is_subset(bigger));
        assert!(!eval_dep(&m, bigger, &spec, &t).unwrap());
    }

    #[test]
    fn registration() {
        let mut reg = Registry::builtin();
        let s = parse_formula("forall v. R(v)").unwrap();
        assert!(matches!(reg.register(DependencySpec::user("all", 1, s.clone())), Err(DepError::Reserved(_))));
        reg.register(DependencySpec::user("total", 1, s.clone())).unwrap();
        assert!(matches!(reg.register(DependencySpec::user("total", 1, s)), Err(DepError::Duplicate(_))));
        let bad = parse_formula("exists v. S(v)").unwrap();
        assert!(reg.register(DependencySpec::user("bad", 1, bad)).is_err());
        let names: BTreeSet<_> = reg.entries().map(|s| s.name.clone()).collect();
        assert!(names.contains("total") && names.contains("fdep"));
    }
}
