use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use teamlogic::ast::{free_vars, well_formed, Signature};
use teamlogic::deps::{verify_closure_flags, FlagCheck};
use teamlogic::equiv::{equivalent, EquivError, EquivOptions, TeamMode, Verdict};
use teamlogic::parse::{load_dependency_defs, parse_formula_with, parse_model, parse_team, print_model, print_team};
use teamlogic::rewrite::{
    disj_to_hook, eliminate_totality, expand_macros, hook_normalize, to_normal_form, to_prenex, MacroSet, RewriteTrace,
};
use teamlogic::semantics::{eval_with, Budget, EvalError, EvalOptions};
use teamlogic::structures::{graph_an, graph_bn, unsafety_demo, GraphReport, Tally};
use teamlogic::{Formula, Registry, Team};

const OK: u8 = 0;
const FALSE: u8 = 1;
const USAGE: u8 = 2;
const BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "teamlogic", version, about = "Team semantics model checker and rewriting workbench")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// File of `dep NAME/ARITY := SENTENCE` definitions added to the built-ins.
    #[arg(long, global = true)]
    deps: Option<PathBuf>,
    /// Largest team the evaluator may build.
    #[arg(long, global = true)]
    max_team: Option<usize>,
    /// Search branches allowed per evaluation.
    #[arg(long, global = true)]
    max_branches: Option<u64>,
    /// Seconds allowed per evaluation.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Print `key=value` records instead of prose.
    #[arg(long, global = true)]
    machine: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Truth of a formula on a team of a model.
    Eval {
        model: PathBuf,
        /// `TEAM FORMULA`, or only `FORMULA` with --epsilon / --empty.
        #[arg(num_args = 1..=2, required = true)]
        rest: Vec<String>,
        /// Evaluate on the team containing only the empty assignment.
        #[arg(long, conflicts_with = "empty")]
        epsilon: bool,
        /// Evaluate on the empty team over the formula's free variables.
        #[arg(long)]
        empty: bool,
    },
    /// Apply one rewriting pass.
    Rewrite {
        pass: Pass,
        formula: String,
        /// Print every rewrite step.
        #[arg(long)]
        trace: bool,
        /// Check the result against the input by brute force.
        #[arg(long)]
        verify: bool,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        sizes: Vec<usize>,
    },
    /// Constancy is unsafe for unary inclusion logic, shown on A_n and B_n.
    DemoUnsafety {
        #[arg(long)]
        n: usize,
        /// Random closed teams per graph for the closure checks.
        #[arg(long, default_value_t = 100)]
        teams: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving A<n>.model and B<n>.model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force check of a dependency's closure properties.
    Props {
        dep: String,
        /// Largest model size checked.
        #[arg(long, default_value_t = 3)]
        bound: usize,
        /// Arity; defaults to the registered one.
        #[arg(long)]
        arity: Option<usize>,
    },
    /// Compare two formulas on all small models and teams.
    Equiv {
        left: String,
        right: String,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        sizes: Vec<usize>,
        /// Draw this many random model/team pairs instead of enumerating.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Permit one-element models.
        #[arg(long)]
        allow_singleton: bool,
        /// Directory receiving counterexample.model and counterexample.team.
        #[arg(long)]
        cex_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pass {
    ExpandMacros,
    Prenex,
    DisjToHook,
    HookNormalize,
    NormalForm,
    EliminateAll,
}

/// An early exit with its code and message.
struct Failure(u8, String);

impl Failure {
    fn usage(e: impl Display) -> Failure {
        Failure(USAGE, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Failure {
        let code = if e.is_budget() { BUDGET } else { USAGE };
        Failure(code, e.to_string())
    }
}

impl From<EquivError> for Failure {
    fn from(e: EquivError) -> Failure {
        match e {
            EquivError::Budget(_) => Failure(BUDGET, e.to_string()),
            EquivError::Eval(e) => e.into(),
            _ => Failure::usage(e),
        }
    }
}

struct Out {
    machine: bool,
}

impl Out {
    fn text(&self, s: impl Display) {
        if !self.machine {
            println!("{s}");
        }
    }

    fn record(&self, fields: &[(&str, String)]) {
        if self.machine {
            let parts: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={}", quote(v))).collect();
            println!("{}", parts.join(" "));
        }
    }
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains([' ', '"', '=']) {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn registry(g: &Global) -> Result<Registry, Failure> {
    let base = Registry::builtin();
    match &g.deps {
        Some(p) => load_dependency_defs(&read(p)?, &base).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => Ok(base),
    }
}

fn eval_options(g: &Global) -> Result<EvalOptions, Failure> {
    let mut budget = Budget::default();
    if let Some(t) = g.max_team {
        budget.max_team = t;
    }
    if let Some(b) = g.max_branches {
        budget.max_branches = b;
    }
    if let Some(s) = g.timeout {
        budget.timeout = Some(Duration::try_from_secs_f64(s).map_err(Failure::usage)?);
    }
    Ok(EvalOptions {
        budget,
        ..EvalOptions::default()
    })
}

fn parse(text: &str, reg: &Registry) -> Result<Formula, Failure> {
    parse_formula_with(text, reg).map_err(|e| Failure::usage(format!("{e}\n  {text}")))
}

fn check_wf(f: &Formula, sig: &Signature, reg: &Registry) -> Result<(), Failure> {
    well_formed(f, sig, reg).map_err(|ds| {
        let lines: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
        Failure::usage(lines.join("\n"))
    })
}

fn yes(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn cmd_eval(
    g: &Global,
    out: &Out,
    model: &Path,
    rest: &[String],
    epsilon: bool,
    empty: bool,
) -> Result<u8, Failure> {
    let reg = registry(g)?;
    let m = parse_model(&read(model)?).map_err(|e| Failure::usage(format!("{}: {e}", model.display())))?;
    for w in m.warnings() {
        eprintln!("warning: {w}");
    }
    let (team_src, text) = match (rest, epsilon || empty) {
        ([f], true) => (None, f),
        ([t, f], false) => (Some(t), f),
        (_, true) => return Err(Failure::usage("with --epsilon or --empty give only the formula")),
        (_, false) => return Err(Failure::usage("expected a team file and a formula, or --epsilon")),
    };
    let f = parse(text, &reg)?;
    check_wf(&f, &m.signature(), &reg)?;
    let team = match team_src {
        Some(t) => {
            let p = Path::new(t);
            parse_team(&read(p)?, &m).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
        None if epsilon => {
            if !f.is_sentence() {
                let vars: Vec<String> = free_vars(&f).into_iter().collect();
                return Err(Failure::usage(format!(
                    "--epsilon needs a sentence; free variables {}",
                    vars.join(", ")
                )));
            }
            Team::epsilon()
        }
        None => Team::empty(free_vars(&f)),
    };
    let v = eval_with(&m, &team, &f, &reg, &eval_options(g)?)?;
    out.text(yes(v));
    out.record(&[("command", "eval".into()), ("result", yes(v).into()), ("team_size", team.len().to_string())]);
    Ok(if v { OK } else { FALSE })
}

fn run_pass(pass: Pass, f: &Formula) -> Result<(Formula, RewriteTrace, Option<String>), Failure> {
    let r = match pass {
        Pass::ExpandMacros => expand_macros(f, MacroSet::ALL),
        Pass::Prenex => to_prenex(f),
        Pass::DisjToHook => disj_to_hook(f),
        Pass::HookNormalize => hook_normalize(f),
        Pass::EliminateAll => eliminate_totality(f),
        Pass::NormalForm => {
            let (view, trace) = to_normal_form(f).map_err(Failure::usage)?;
            let mut extra = format!("{view}");
            if !view.flagged.is_empty() {
                let idx: Vec<String> = view.flagged.iter().map(|i| i.to_string()).collect();
                extra.push_str(&format!("\nflagged guards: {}", idx.join(", ")));
            }
            return Ok((view.to_formula(), trace, Some(extra)));
        }
    };
    let (g, t) = r.map_err(Failure::usage)?;
    Ok((g, t, None))
}

fn cmd_rewrite(
    g: &Global,
    out: &Out,
    pass: Pass,
    text: &str,
    trace: bool,
    verify: bool,
    sizes: Vec<usize>,
) -> Result<u8, Failure> {
    let reg = registry(g)?;
    let f = parse(text, &reg)?;
    check_wf(&f, &Signature::of_formula(&f), &reg)?;
    let (result, steps, view) = run_pass(pass, &f)?;
    out.text(&result);
    if let (Some(v), true) = (&view, trace) {
        out.text(v);
    }
    if trace {
        out.text(&steps);
    }
    out.record(&[
        ("command", "rewrite".into()),
        ("output", result.to_string()),
        ("steps", steps.steps.len().to_string()),
    ]);
    if trace && out.machine {
        for (i, s) in steps.steps.iter().enumerate() {
            out.record(&[
                ("step", (i + 1).to_string()),
                ("rule", s.rule.name().into()),
                ("before", s.before.to_string()),
                ("after", s.after.to_string()),
                ("fresh", s.fresh.join(",")),
            ]);
        }
    }
    if !verify {
        return Ok(OK);
    }
    let opts = EquivOptions {
        sizes,
        eval: eval_options(g)?,
        ..EquivOptions::default()
    };
    let verdict = equivalent(&f, &result, &reg, &opts)?;
    report_verdict(out, &verdict)
}

fn report_verdict(out: &Out, v: &Verdict) -> Result<u8, Failure> {
    match v {
        Verdict::EquivalentUpToBound { models, teams } => {
            out.text(format!("equivalent up to bound ({models} models, {teams} teams)"));
            out.record(&[
                ("verdict", "equivalent-up-to-bound".into()),
                ("models", models.to_string()),
                ("teams", teams.to_string()),
            ]);
            Ok(OK)
        }
        Verdict::NoCounterexampleFound { samples } => {
            out.text(format!("no counterexample found in {samples} samples"));
            out.record(&[("verdict", "no-counterexample-found".into()), ("samples", samples.to_string())]);
            Ok(OK)
        }
        Verdict::Counterexample {
            model,
            team,
            left,
            right,
        } => {
            out.text(format!(
                "counterexample: left {}, right {}\nmodel:\n{}team:\n{}",
                yes(*left),
                yes(*right),
                print_model(model),
                print_team(team, model)
            ));
            out.record(&[
                ("verdict", "counterexample".into()),
                ("left", yes(*left).into()),
                ("right", yes(*right).into()),
                ("model_size", model.size().to_string()),
                ("team", team.to_string()),
            ]);
            Ok(FALSE)
        }
    }
}

fn tally(t: &Tally) -> String {
    format!("{}/{}", t.passed, t.total)
}

fn graph_row(g: &GraphReport) -> String {
    format!(
        "{:<4} {:>8} {:>6} {:>10} {:>8} {:>9} {:>10} {:>8} {:>8} {:>8}",
        g.name,
        g.vertices,
        g.automorphisms,
        yes(g.vertex_transitive),
        yes(g.nonconn),
        yes(g.connected),
        tally(&g.flattening),
        tally(&g.itercl),
        tally(&g.focl),
        tally(&g.clinc)
    )
}

fn cmd_demo(g: &Global, out: &Out, n: usize, teams: usize, seed: u64, dir: Option<&Path>) -> Result<u8, Failure> {
    let reg = registry(g)?;
    let a = graph_an(n).map_err(Failure::usage)?;
    let b = graph_bn(n).map_err(Failure::usage)?;
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| Failure::usage(format!("{}: {e}", d.display())))?;
        write(&d.join(format!("A{n}.model")), &print_model(&a))?;
        write(&d.join(format!("B{n}.model")), &print_model(&b))?;
    }
    let r = unsafety_demo(n, teams, seed, &reg).map_err(|e| {
        let code = if e.is_budget() { BUDGET } else { USAGE };
        Failure(code, e.to_string())
    })?;
    let ok = r.as_expected();
    out.text(format!("sentence: {}", teamlogic::structures::NONCONN_TEXT));
    out.text(format!(
        "{:<4} {:>8} {:>6} {:>10} {:>8} {:>9} {:>10} {:>8} {:>8} {:>8}",
        "", "vertices", "|Aut|", "transitive", "nonconn", "connected", "flattening", "itercl", "focl", "clinc"
    ));
    out.text(graph_row(&r.a));
    out.text(graph_row(&r.b));
    out.text(if ok {
        "all checks as expected: constancy separates the pair, unary inclusion alone does not"
    } else {
        "MISMATCH: some check disagrees"
    });
    for gr in [&r.a, &r.b] {
        out.record(&[
            ("graph", gr.name.clone()),
            ("vertices", gr.vertices.to_string()),
            ("automorphisms", gr.automorphisms.to_string()),
            ("vertex_transitive", yes(gr.vertex_transitive).into()),
            ("nonconn", yes(gr.nonconn).into()),
            ("connected", yes(gr.connected).into()),
            ("flattening", tally(&gr.flattening)),
            ("itercl", tally(&gr.itercl)),
            ("focl", tally(&gr.focl)),
            ("clinc", tally(&gr.clinc)),
        ]);
    }
    out.record(&[("command", "demo-unsafety".into()), ("n", n.to_string()), ("as_expected", yes(ok).into())]);
    Ok(if ok { OK } else { FALSE })
}

fn cmd_props(g: &Global, out: &Out, name: &str, bound: usize, arity: Option<usize>) -> Result<u8, Failure> {
    let reg = registry(g)?;
    let arity = arity
        .or_else(|| reg.arity_of(name))
        .ok_or_else(|| Failure::usage(format!("unknown dependency `{name}`")))?;
    let spec = reg
        .lookup(name, arity)
        .ok_or_else(|| Failure::usage(format!("dependency `{name}` has no arity {arity}")))?;
    let report = verify_closure_flags(&spec, bound).map_err(|e| match e {
        teamlogic::deps::DepError::Budget(_) => Failure(BUDGET, e.to_string()),
        _ => Failure::usage(e),
    })?;
    out.text(format!("{name}/{arity}, models of size 1..={bound}"));
    let checks = [
        ("downward-closed", &report.downward),
        ("upward-closed", &report.upward),
        ("union-closed", &report.union),
        ("empty-team-property", &report.empty_team),
    ];
    for (label, c) in checks {
        match c {
            FlagCheck::Confirmed => {
                out.text(format!("  {label:<20} ✓"));
                out.record(&[("flag", label.into()), ("status", "confirmed".into())]);
            }
            FlagCheck::Refuted(w) => {
                let other = w.other.as_ref().map(|t| format!(", other {t}")).unwrap_or_default();
                out.text(format!("  {label:<20} ✗  |M|={} team {}{other}", w.model_size, w.team));
                out.record(&[
                    ("flag", label.into()),
                    ("status", "refuted".into()),
                    ("model_size", w.model_size.to_string()),
                    ("team", w.team.to_string()),
                ]);
            }
        }
    }
    let bad = report.contradictions(&spec.flags);
    if !bad.is_empty() {
        out.text(format!("declared flags contradicted: {}", bad.join(", ")));
    }
    out.record(&[("command", "props".into()), ("contradicted", bad.join(","))]);
    Ok(if bad.is_empty() { OK } else { FALSE })
}

#[allow(clippy::too_many_arguments)]
fn cmd_equiv(
    g: &Global,
    out: &Out,
    left: &str,
    right: &str,
    sizes: Vec<usize>,
    samples: Option<usize>,
    seed: u64,
    allow_singleton: bool,
    cex_out: Option<&Path>,
) -> Result<u8, Failure> {
    let reg = registry(g)?;
    let f1 = parse(left, &reg)?;
    let f2 = parse(right, &reg)?;
    for f in [&f1, &f2] {
        check_wf(f, &Signature::of_formula(f), &reg)?;
    }
    if free_vars(&f1) != free_vars(&f2) {
        eprintln!("warning: free variables differ; teams range over their union");
    }
    let opts = EquivOptions {
        sizes,
        allow_singleton,
        teams: match samples {
            Some(count) => TeamMode::Sampled { count, seed },
            None => TeamMode::Exhaustive,
        },
        eval: eval_options(g)?,
    };
    let v = equivalent(&f1, &f2, &reg, &opts)?;
    if let (
        Verdict::Counterexample {
            model, team, ..
        },
        Some(d),
    ) = (&v, cex_out)
    {
        fs::create_dir_all(d).map_err(|e| Failure::usage(format!("{}: {e}", d.display())))?;
        write(&d.join("counterexample.model"), &print_model(model))?;
        write(&d.join("counterexample.team"), &print_team(team, model))?;
    }
    report_verdict(out, &v)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let out = Out {
        machine: cli.global.machine,
    };
    let g = &cli.global;
    match cli.command {
        Command::Eval {
            model,
            rest,
            epsilon,
            empty,
        } => cmd_eval(g, &out, &model, &rest, epsilon, empty),
        Command::Rewrite {
            pass,
            formula,
            trace,
            verify,
            sizes,
        } => cmd_rewrite(g, &out, pass, &formula, trace, verify, sizes),
        Command::DemoUnsafety { n, teams, seed, out: dir } => cmd_demo(g, &out, n, teams, seed, dir.as_deref()),
        Command::Props { dep, bound, arity } => cmd_props(g, &out, &dep, bound, arity),
        Command::Equiv {
            left,
            right,
            sizes,
            samples,
            seed,
            allow_singleton,
            cex_out,
        } => cmd_equiv(g, &out, &left, &right, sizes, samples, seed, allow_singleton, cex_out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
