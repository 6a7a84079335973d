//! `inreach`: innermost reachability analysis from the command line.
//!
//! Exit codes: 0 success or fixpoint, 1 input error, 2 limit reached,
//! 3 not a member, 4 soundness violation or failed check.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use inreach::airr::build_airr;
use inreach::automata::{Color, TreeAutomaton};
use inreach::completion::{run_with, CompletionResult, EquationMatching, Limits, Outcome};
use inreach::inference::generate_equations;
use inreach::rewriting::{bounded_reachable, is_normal_form, Bounds, Equation, Strategy, Trs};
use inreach::terms::ground_terms_by_size;
use inreach::timbuk::{parse_spec, parse_term, render_spec, Specification};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_LIMIT: u8 = 2;
const EXIT_NON_MEMBER: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "inreach", version, about = "Innermost reachability analysis by tree automata completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete an automaton and report the reachable and normalized views.
    Complete(CompleteArgs),
    /// Print the normal-form automaton of a TRS.
    Airr(AirrArgs),
    /// Test whether a ground term is accepted by an automaton.
    Member(MemberArgs),
    /// Compare completion against bounded innermost rewriting.
    Oracle(OracleArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Innermost,
    Leftmost,
    Rightmost,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Innermost => Strategy::GeneralInnermost,
            StrategyArg::Leftmost => Strategy::LeftmostInnermost,
            StrategyArg::Rightmost => Strategy::RightmostInnermost,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MatchingArg {
    /// Equation sides may be derived through every transition.
    Full,
    /// Equation sides are derived without R-transitions.
    WithoutR,
}

impl From<MatchingArg> for EquationMatching {
    fn from(m: MatchingArg) -> Self {
        match m {
            MatchingArg::Full => EquationMatching::Full,
            MatchingArg::WithoutR => EquationMatching::WithoutR,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    /// `key: value` lines.
    Text,
    /// `key=value` lines.
    Lines,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Specification file.
    spec: PathBuf,
    /// Name of the TRS section.
    #[arg(long, default_value = "R")]
    trs: String,
    /// Name of the initial automaton.
    #[arg(long, default_value = "A0")]
    automaton: String,
    /// Name of the equation set (none means no equations).
    #[arg(long)]
    equations: Option<String>,
    /// Use the rules, one reflexive equation per symbol, and the named set.
    #[arg(long)]
    generate: bool,
    #[arg(long, value_enum, default_value_t = StrategyArg::Innermost)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = MatchingArg::Full)]
    matching: MatchingArg,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: u64,
    #[arg(long, default_value_t = 20000, value_parser = clap::value_parser!(u64).range(1..))]
    max_states: u64,
    /// Largest term size enumerated in reports.
    #[arg(long, default_value_t = 8)]
    enum_size: usize,
    #[arg(long, value_enum, default_value_t = Format::Lines)]
    format: Format,
    /// Print the per-step trace to standard error.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct CompleteArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Write the views and the completed automaton to this file.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also list the enumerated terms of both views.
    #[arg(long)]
    list: bool,
}

#[derive(Args, Debug)]
struct AirrArgs {
    spec: PathBuf,
    #[arg(long, default_value = "R")]
    trs: String,
    /// Compare against rewriting on every ground term up to `--check-size`.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 6)]
    check_size: usize,
}

#[derive(Args, Debug)]
struct MemberArgs {
    /// File holding the automaton (with its `Ops` header).
    file: PathBuf,
    /// Ground term to test.
    term: String,
    /// Automaton name; defaults to the first one in the file.
    #[arg(long)]
    automaton: Option<String>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Seeds are the initial terms up to this size.
    #[arg(long, default_value_t = 6)]
    seed_size: usize,
    #[arg(long, default_value_t = 20)]
    oracle_steps: usize,
    #[arg(long, default_value_t = 10)]
    oracle_size: usize,
    /// Self-test: drop R-transitions from the reachable view before checking.
    #[arg(long)]
    sabotage: bool,
}

/// Ordered report lines.
struct Report {
    format: Format,
    lines: Vec<(String, String)>,
}

impl Report {
    fn new(format: Format) -> Self {
        Report {
            format,
            lines: Vec::new(),
        }
    }

    fn add(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn print(&self) {
        for (k, v) in &self.lines {
            match self.format {
                Format::Text => println!("{k}: {v}"),
                Format::Lines => println!("{k}={v}"),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Complete(a) => cmd_complete(&a),
        Command::Airr(a) => cmd_airr(&a),
        Command::Member(a) => cmd_member(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load(path: &Path) -> Result<Specification, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_spec(&text).map_err(|e| format!("{}:{e}", path.display()))
}

fn find_trs<'a>(spec: &'a Specification, name: &str) -> Result<&'a Trs, String> {
    spec.trs(name).ok_or_else(|| format!("no TRS named `{name}`"))
}

struct Loaded {
    spec: Specification,
    equations: Vec<Equation>,
}

fn load_run(a: &RunArgs) -> Result<Loaded, String> {
    let spec = load(&a.spec)?;
    find_trs(&spec, &a.trs)?;
    if spec.automaton(&a.automaton).is_none() {
        return Err(format!("no automaton named `{}`", a.automaton));
    }
    let equations = match &a.equations {
        Some(n) => spec
            .equation_set(n)
            .ok_or_else(|| format!("no equation set named `{n}`"))?
            .to_vec(),
        None => Vec::new(),
    };
    let equations = if a.generate {
        let g = generate_equations(spec.trs(&a.trs).expect("checked"), &equations);
        for w in &g.warnings {
            eprintln!("warning: {w}");
        }
        g.equations
    } else {
        equations
    };
    Ok(Loaded { spec, equations })
}

fn complete(a: &RunArgs, l: &Loaded) -> Result<CompletionResult, String> {
    let limits = Limits::new(a.max_steps as usize, a.max_states as usize);
    let res = run_with(
        l.spec.automaton(&a.automaton).expect("checked"),
        l.spec.trs(&a.trs).expect("checked"),
        &l.equations,
        a.strategy.into(),
        limits,
        a.matching.into(),
    )
    .map_err(|e| e.to_string())?;
    if a.trace {
        for line in res.trace() {
            eprintln!("{line}");
        }
    }
    if res.outcome != Outcome::Fixpoint {
        eprintln!("warning: not a fixpoint, no soundness guarantee (completion stopped at a limit)");
    }
    Ok(res)
}

fn outcome_code(o: Outcome) -> u8 {
    if o == Outcome::Fixpoint {
        EXIT_OK
    } else {
        EXIT_LIMIT
    }
}

fn run_report(a: &RunArgs, n_eqs: usize, res: &CompletionResult) -> Report {
    let mut r = Report::new(a.format);
    let stats = res.stats();
    r.add("outcome", res.outcome);
    r.add("strategy", Strategy::from(a.strategy));
    r.add(
        "matching",
        match a.matching {
            MatchingArg::Full => "full",
            MatchingArg::WithoutR => "without-r",
        },
    );
    r.add("equations", n_eqs);
    r.add("steps", stats.steps);
    r.add("critical_pairs", stats.critical_pairs);
    r.add("equations_applied", stats.equations);
    r.add("states", res.automaton().num_states());
    r.add("transitions", res.automaton().num_transitions());
    r
}

fn cmd_complete(a: &CompleteArgs) -> Result<u8, String> {
    let l = load_run(&a.run)?;
    let res = complete(&a.run, &l)?;
    let reach = res.reachable_view();
    let norm = res.normalized_view();
    let reach_terms = reach.enumerate_language(reach.finals(), a.run.enum_size);
    let norm_terms = norm.enumerate_language(norm.finals(), a.run.enum_size);
    let witness = norm.language_empty(norm.finals());
    let mut r = run_report(&a.run, l.equations.len(), &res);
    r.add("enum_size", a.run.enum_size);
    r.add("reachable_terms", reach_terms.len());
    r.add("normalized_terms", norm_terms.len());
    r.add("normalized_empty", witness.is_none());
    r.add(
        "normalized_witness",
        witness.map_or_else(|| "none".to_string(), |t| t.to_string()),
    );
    if a.list {
        for t in &reach_terms {
            r.add("reachable", t);
        }
        for t in &norm_terms {
            r.add("normalized", t);
        }
    }
    if let Some(path) = &a.output {
        let text = render_spec(
            &l.spec.signature,
            &[
                ("Reachable", &reach),
                ("Normalized", &norm),
                ("Completed", res.automaton()),
            ],
        );
        fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
        r.add("output", path.display());
    }
    r.print();
    Ok(outcome_code(res.outcome))
}

fn cmd_airr(a: &AirrArgs) -> Result<u8, String> {
    let spec = load(&a.spec)?;
    let trs = find_trs(&spec, &a.trs)?;
    let airr = build_airr(trs).map_err(|e| e.to_string())?;
    print!("{}", render_spec(&spec.signature, &[("Airr", &airr.automaton)]));
    if a.check {
        let mut checked = 0usize;
        for t in ground_terms_by_size(&spec.signature, a.check_size).iter().flatten() {
            checked += 1;
            let red = airr.state_of(t).is_none_or(|q| airr.is_red(q));
            if red == is_normal_form(trs, t) {
                println!("check=mismatch term={t}");
                return Ok(EXIT_VIOLATION);
            }
        }
        println!("check=ok terms={checked}");
    }
    Ok(EXIT_OK)
}

fn cmd_member(a: &MemberArgs) -> Result<u8, String> {
    let spec = load(&a.file)?;
    let aut = match &a.automaton {
        Some(n) => spec
            .automaton(n)
            .ok_or_else(|| format!("no automaton named `{n}`"))?,
        None => spec
            .automata
            .first()
            .map(|(_, aut)| aut)
            .ok_or_else(|| "the file holds no automaton".to_string())?,
    };
    let t = parse_term(&spec.signature, &[], &a.term).map_err(|e| format!("term: {e}"))?;
    let yes = aut.accepts(&t);
    println!("member={yes}");
    Ok(if yes { EXIT_OK } else { EXIT_NON_MEMBER })
}

fn without_rewrite_edges(a: &TreeAutomaton) -> TreeAutomaton {
    let mut out = TreeAutomaton::new(a.signature().clone());
    for q in a.states() {
        out.add_state(a.label(q).clone());
    }
    for d in a.deltas() {
        out.add_delta(d.symbol.clone(), d.args.clone(), d.target);
    }
    for e in a.epsilons().iter().filter(|e| e.color != Color::R) {
        out.add_epsilon(e.source, e.target, e.color);
    }
    out.set_finals(a.finals().clone());
    out
}

fn cmd_oracle(a: &OracleArgs) -> Result<u8, String> {
    let l = load_run(&a.run)?;
    let res = complete(&a.run, &l)?;
    let mut reach = res.reachable_view();
    if a.sabotage {
        reach = without_rewrite_edges(&reach);
    }
    let init = l.spec.automaton(&a.run.automaton).expect("checked");
    let trs = l.spec.trs(&a.run.trs).expect("checked");
    let seeds: BTreeSet<_> = init.enumerate_language(init.finals(), a.seed_size);
    let oracle = bounded_reachable(
        trs,
        &seeds,
        Some(a.run.strategy.into()),
        Bounds::new(a.oracle_steps, a.oracle_size),
    );
    let missing: Vec<_> = oracle.terms.iter().filter(|t| !reach.accepts(t)).collect();
    let mut r = run_report(&a.run, l.equations.len(), &res);
    r.add("seeds", seeds.len());
    r.add("oracle_terms", oracle.terms.len());
    r.add("oracle_saturated", oracle.saturated);
    r.add("missing", missing.len());
    // Precision slack is only meaningful when the seeds cover the initial language.
    let exact_seeds = init.enumerate_language(init.finals(), a.seed_size + 1).len() == seeds.len();
    if oracle.saturated && exact_seeds {
        let size = a.run.enum_size.min(a.oracle_size);
        let extra = reach
            .enumerate_language(reach.finals(), size)
            .into_iter()
            .filter(|t| !oracle.terms.contains(t))
            .count();
        r.add("extra", extra);
    } else {
        r.add("extra", "unknown");
    }
    for t in &missing {
        r.add("missing_term", t);
    }
    r.print();
    if !missing.is_empty() {
        return Ok(EXIT_VIOLATION);
    }
    Ok(outcome_code(res.outcome))
}
