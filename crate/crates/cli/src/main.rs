use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nonavg::asymptotics::{g_bounds, h_bounds, section4_comparison, term_growth_bounds, GrowthTarget};
use nonavg::closed_form::{a_nth, popcount_residue_check, thue_morse_bit};
use nonavg::solver::DEFAULT_NODE_LIMIT;
use nonavg::theorem::{
    check_condition_i, check_condition_ii, discover_closed_form, discover_closed_forms, table1_parameters,
    verify_prefix, REFERENCE_CLOSED_FORMS,
};
use nonavg::{AvoidanceRule, BoundsReport, Caps, ClosedForm, CoefficientTuple, DiscoveryOptions, Error, GreedySequence};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "nonavg", version, about = "Greedy nonaveraging sequences, closed forms and counting bounds")]
struct Cli {
    /// Worker threads for parallel checks (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Search-node budget for each solver call.
    #[arg(long, global = true, env = "NONAVG_NODE_BUDGET")]
    node_budget: Option<u64>,
    /// Output format; reports default to json, term lists to plain.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Add a header row to CSV output.
    #[arg(long, global = true)]
    header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the greedy sequence for a tuple.
    Generate(GenerateArgs),
    /// Search the greedy prefix for a closed form.
    Discover(DiscoverArgs),
    /// Run the built-in verification suites.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Exact counts against their analytic envelopes.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    tuple: CoefficientTuple,
    #[arg(long, default_value = "distinct")]
    rule: AvoidanceRule,
    #[arg(long)]
    max_terms: Option<usize>,
    #[arg(long)]
    max_value: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Sequence cache to resume from and write back to.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long)]
    tuple: CoefficientTuple,
    #[arg(long, default_value_t = DiscoveryOptions::default().max_residues)]
    max_residues: usize,
    #[arg(long, default_value_t = DiscoveryOptions::default().max_frontier)]
    max_frontier: u64,
    /// Report every passing (c, R), not only the smallest c.
    #[arg(long)]
    all: bool,
}

#[derive(Subcommand)]
enum VerifyTarget {
    /// Uniform tuples: greedy prefix and both theorem conditions.
    Table1 {
        /// Single m; default 3 through 11.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Reference closed forms rediscovered from scratch.
    Table2 {
        /// Restrict to these tuples (repeatable, or separated by ';').
        #[arg(long, value_delimiter = ';')]
        rows: Vec<CoefficientTuple>,
    },
    /// Digit-sum identity (and Thue-Morse when d = 2) for all n below --n.
    Props {
        #[arg(long)]
        tuple: CoefficientTuple,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, conflicts_with = "cf")]
    tuple: Option<CoefficientTuple>,
    /// Closed form as "c=<int> base=<int> R=<csv>".
    #[arg(long)]
    cf: Option<ClosedForm>,
    /// Accepts integers and scientific notation such as 1e10.
    #[arg(long, value_parser = parse_n)]
    n: f64,
    /// Bound the n-th term instead of the count below n.
    #[arg(long)]
    growth: bool,
    /// Add the two-reading numeric comparison.
    #[arg(long)]
    section4: bool,
}

fn parse_n(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("n must be at least 1, got {s}"))
    }
}

/// Failure with its exit status: 1 for bad input, 2 for an exhausted budget.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::BudgetExhausted { .. }) { 2 } else { 1 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: if e.kind() == io::ErrorKind::BrokenPipe { 0 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type Out<'a> = BufWriter<io::StdoutLock<'a>>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(&cli, &mut out);
    let flushed = out.flush();
    match (result, flushed) {
        (Ok(code), Ok(())) => ExitCode::from(code),
        (Err(f), _) if f.code == 0 => ExitCode::SUCCESS,
        (Err(f), _) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        (Ok(_), Err(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        (Ok(_), Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli, out: &mut Out) -> Result<u8, Failure> {
    let budget = cli.node_budget.unwrap_or(DEFAULT_NODE_LIMIT);
    if budget == 0 {
        return Err(input_error("node budget must be positive"));
    }
    match &cli.command {
        Command::Generate(args) => generate(args, cli, budget, out),
        Command::Discover(args) => discover(args, cli, budget, out),
        Command::Verify { target } => verify(target, cli, budget, out),
        Command::Bounds(args) => bounds(args, cli, out),
    }
}

fn write_json(out: &mut Out, value: &impl Serialize) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| match e.io_error_kind() {
        Some(kind) => Failure::from(io::Error::from(kind)),
        None => input_error(e.to_string()),
    })?;
    writeln!(out)?;
    Ok(())
}

fn load_sequence(args: &GenerateArgs, budget: u64) -> Result<GreedySequence, Failure> {
    if let Some(path) = args.cache.as_deref().filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path)?;
        let seq = GreedySequence::from_cache(&text)?;
        if seq.tuple() != &args.tuple || seq.rule() != args.rule {
            return Err(input_error(format!(
                "cache {} holds tuple {} rule {}, not tuple {} rule {}",
                path.display(),
                seq.tuple(),
                seq.rule(),
                args.tuple,
                args.rule
            )));
        }
        return Ok(seq.with_node_limit(budget));
    }
    Ok(GreedySequence::start(args.tuple.clone(), args.rule).with_node_limit(budget))
}

fn save_sequence(path: &Path, seq: &GreedySequence) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, seq.to_cache())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Advances in slices so the wall-clock budget is checked regularly.
fn advance_timed(seq: &mut GreedySequence, caps: Caps, limit: Option<Duration>) -> Result<(), Failure> {
    let Some(limit) = limit else {
        return Ok(seq.advance(caps)?);
    };
    const SLICE: u64 = 4096;
    let start = Instant::now();
    let max_value = caps.max_value.unwrap_or(u64::MAX);
    loop {
        let done = caps.max_terms.is_some_and(|n| seq.len() >= n) || seq.frontier() >= max_value;
        if done {
            return Ok(());
        }
        if start.elapsed() >= limit {
            return Err(Failure {
                code: 2,
                message: format!("time limit of {:.3}s reached at frontier {}", limit.as_secs_f64(), seq.frontier()),
            });
        }
        seq.advance(Caps {
            max_terms: caps.max_terms,
            max_value: Some(max_value.min(seq.frontier().saturating_add(SLICE))),
        })?;
    }
}

fn generate(args: &GenerateArgs, cli: &Cli, budget: u64, out: &mut Out) -> Result<u8, Failure> {
    if args.max_terms.is_none() && args.max_value.is_none() {
        return Err(input_error("generate needs --max-terms or --max-value"));
    }
    let limit = match args.time_limit {
        Some(s) if s.is_finite() && s > 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => return Err(input_error(format!("time limit must be positive, got {s}"))),
        None => None,
    };
    let caps = Caps {
        max_terms: args.max_terms,
        max_value: args.max_value,
    };
    let mut seq = load_sequence(args, budget)?;
    let outcome = advance_timed(&mut seq, caps, limit);
    if let Some(path) = &args.cache {
        save_sequence(path, &seq)?;
    }
    let terms: Vec<u64> = seq
        .terms()
        .iter()
        .copied()
        .take_while(|&t| args.max_value.is_none_or(|v| t <= v))
        .take(args.max_terms.unwrap_or(usize::MAX))
        .collect();
    match cli.format.unwrap_or(Format::Plain) {
        Format::Plain => {
            for t in &terms {
                writeln!(out, "{t}")?;
            }
        }
        Format::Csv => {
            if cli.header {
                writeln!(out, "n,term")?;
            }
            for (n, t) in terms.iter().enumerate() {
                writeln!(out, "{n},{t}")?;
            }
        }
        Format::Json => write_json(
            out,
            &json!({
                "tuple": seq.tuple(),
                "rule": seq.rule().as_str(),
                "frontier": seq.frontier(),
                "complete": outcome.is_ok(),
                "terms": terms,
            }),
        )?,
    }
    outcome.map(|()| 0)
}

fn discover(args: &DiscoverArgs, cli: &Cli, budget: u64, out: &mut Out) -> Result<u8, Failure> {
    args.tuple.require_valid()?;
    let opts = DiscoveryOptions {
        max_residues: args.max_residues,
        max_frontier: args.max_frontier,
        node_limit: budget,
        find_all: args.all,
    };
    let outcome = discover_closed_forms(&args.tuple, opts)?;
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => write_json(
            out,
            &json!({
                "tuple": args.tuple,
                "found": !outcome.found.is_empty(),
                "closed_forms": outcome.found.iter().map(|d| d.closed_form.to_string()).collect::<Vec<_>>(),
                "discoveries": outcome.found,
                "prefixes_tried": outcome.prefixes_tried,
                "frontier": outcome.frontier,
                "terms_generated": outcome.terms_generated,
                "max_residues": opts.max_residues,
                "max_frontier": opts.max_frontier,
                "node_budget": budget,
            }),
        )?,
        Format::Plain | Format::Csv => {
            let csv = cli.format == Some(Format::Csv);
            if csv && cli.header {
                writeln!(out, "tuple,c,base,R")?;
            }
            for d in &outcome.found {
                let cf = &d.closed_form;
                if csv {
                    let r: Vec<String> = cf.residues().iter().map(u64::to_string).collect();
                    writeln!(out, "\"{}\",{},{},\"{}\"", args.tuple, cf.c(), cf.base(), r.join(","))?;
                } else {
                    writeln!(out, "{cf}")?;
                }
            }
            if outcome.found.is_empty() && !csv {
                writeln!(
                    out,
                    "no closed form: {} residue sets tried, frontier {}, {} terms",
                    outcome.prefixes_tried, outcome.frontier, outcome.terms_generated
                )?;
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn verify(target: &VerifyTarget, cli: &Cli, budget: u64, out: &mut Out) -> Result<u8, Failure> {
    let checks = match target {
        VerifyTarget::Table1 { m } => {
            let ms: Vec<usize> = match m {
                Some(m) => vec![*m],
                None => (3..=11).collect(),
            };
            let mut checks = Vec::new();
            for m in ms {
                checks.extend(table1_checks(m, budget)?);
            }
            checks
        }
        VerifyTarget::Table2 { rows } => table2_checks(rows, budget)?,
        VerifyTarget::Props { tuple, n } => props_checks(tuple, *n)?,
    };
    let all = checks.iter().all(|c| c.pass);
    match cli.format.unwrap_or(Format::Plain) {
        Format::Json => write_json(out, &json!({ "pass": all, "checks": checks }))?,
        Format::Csv => {
            if cli.header {
                writeln!(out, "check,pass,detail")?;
            }
            for c in &checks {
                writeln!(out, "\"{}\",{},\"{}\"", c.name, c.pass, c.detail.replace('"', "\"\""))?;
            }
        }
        Format::Plain => {
            for c in &checks {
                writeln!(out, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
        }
    }
    Ok(if all { 0 } else { 1 })
}

fn table1_checks(m: usize, budget: u64) -> Result<Vec<Check>, Failure> {
    let (c, residues) = table1_parameters(m)?;
    let tuple = CoefficientTuple::uniform(m)?;
    let prefix = verify_prefix(m, budget)?;
    let cond_i = check_condition_i(&tuple, &residues, c)?;
    let report = check_condition_ii(&tuple, &residues, c, budget)?;
    let failed = report.failures().count();
    Ok(vec![
        Check {
            name: format!("table1 m={m} prefix"),
            pass: prefix.pass,
            detail: format!("c={c}, {} terms below c, expected {}", prefix.generated.len(), prefix.expected.len()),
        },
        Check {
            name: format!("table1 m={m} condition i"),
            pass: cond_i.pass,
            detail: format!("c={} rhs={}", cond_i.lhs, cond_i.rhs),
        },
        Check {
            name: format!("table1 m={m} condition ii"),
            pass: report.cond_ii.iter().all(|cell| cell.passed()),
            detail: format!("{} cells, {failed} failed", report.cond_ii.len()),
        },
    ])
}

fn table2_checks(rows: &[CoefficientTuple], budget: u64) -> Result<Vec<Check>, Failure> {
    let selected: Vec<_> = REFERENCE_CLOSED_FORMS
        .iter()
        .filter(|row| rows.is_empty() || rows.iter().any(|t| t.coeffs() == row.tuple))
        .collect();
    if let Some(missing) = rows.iter().find(|t| !REFERENCE_CLOSED_FORMS.iter().any(|r| r.tuple == t.coeffs())) {
        return Err(input_error(format!("no reference row for tuple {missing}")));
    }
    let opts = DiscoveryOptions {
        node_limit: budget,
        ..DiscoveryOptions::default()
    };
    let mut checks = Vec::new();
    for row in selected {
        let tuple = CoefficientTuple::new(row.tuple.to_vec())?;
        let (c, residues) = row.expected();
        let found = discover_closed_form(&tuple, opts)?;
        let note = if row.corrected.is_some() { " (corrected row)" } else { "" };
        let (pass, detail) = match found {
            Some(d) => {
                let cf = d.closed_form;
                (cf.c() == c && cf.residues() == residues, format!("found {cf}{note}"))
            }
            None => (false, format!("nothing found, expected c={c}{note}")),
        };
        checks.push(Check {
            name: format!("table2 ({tuple})"),
            pass,
            detail,
        });
    }
    Ok(checks)
}

fn props_checks(tuple: &CoefficientTuple, n: u64) -> Result<Vec<Check>, Failure> {
    tuple.require_valid()?;
    let d = tuple.weight();
    let mut first_bad = None;
    for k in 0..n {
        let (p, a) = popcount_residue_check(tuple, k)?;
        if p != a {
            first_bad = Some(k);
            break;
        }
    }
    let mut checks = vec![Check {
        name: format!("digit sum ({tuple})"),
        pass: first_bad.is_none(),
        detail: match first_bad {
            None => format!("popcount(n) = a_n mod {d} for all n < {n}"),
            Some(k) => format!("fails at n = {k}"),
        },
    }];
    if d == 2 {
        let bad = (0..n).find(|&k| a_nth(tuple, k).map(|a| (a % 2) as u8 != thue_morse_bit(k)).unwrap_or(true));
        checks.push(Check {
            name: format!("thue-morse ({tuple})"),
            pass: bad.is_none(),
            detail: match bad {
                None => format!("a_n mod 2 = t_n for all n < {n}"),
                Some(k) => format!("fails at n = {k}"),
            },
        });
    }
    Ok(checks)
}

fn bounds(args: &BoundsArgs, cli: &Cli, out: &mut Out) -> Result<u8, Failure> {
    let report: Option<BoundsReport> = if args.tuple.is_some() || args.cf.is_some() {
        if args.n.fract() != 0.0 || args.n > u64::MAX as f64 {
            return Err(input_error(format!("n = {} is not an integer in range", args.n)));
        }
        let n = args.n as u64;
        Some(match (&args.tuple, &args.cf, args.growth) {
            (Some(t), _, false) => g_bounds(t, n)?,
            (Some(t), _, true) => term_growth_bounds(GrowthTarget::Digits(t), n)?,
            (None, Some(cf), false) => h_bounds(cf, n)?,
            (None, Some(cf), true) => term_growth_bounds(GrowthTarget::ClosedForm(cf), n)?,
            (None, None, _) => unreachable!(),
        })
    } else if args.section4 {
        None
    } else {
        return Err(input_error("bounds needs --tuple, --cf or --section4"));
    };
    let section4 = args.section4.then(|| section4_comparison(args.n));
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut value = json!({});
            if let Some(r) = &report {
                value["bounds"] = json!(r);
                value["sandwiched"] = json!(r.sandwiches(1e-9));
            }
            if let Some(s) = &section4 {
                value["section4_comparison"] = json!(s);
            }
            write_json(out, &value)?;
        }
        Format::Plain | Format::Csv => {
            let csv = cli.format == Some(Format::Csv);
            if let Some(r) = &report {
                let exact = r.exact.map_or("-".to_string(), |e| e.to_string());
                if csv {
                    if cli.header {
                        writeln!(out, "n,exact,lower,upper,theta")?;
                    }
                    writeln!(out, "{},{exact},{:.4},{:.4},{:.6}", r.n, r.lower, r.upper, r.theta)?;
                } else {
                    writeln!(out, "n={} exact={exact} lower={:.4} upper={:.4} theta={:.6}", r.n, r.lower, r.upper, r.theta)?;
                }
            }
            if let Some(s) = &section4 {
                if csv && cli.header {
                    writeln!(out, "reading,d,c,R_size,f_bound,h_bound,behrend,matches_reference")?;
                }
                for r in &s.readings {
                    if csv {
                        writeln!(
                            out,
                            "\"{}\",{},{},{},{:.1},{:.1},{:.1},{}",
                            r.label,
                            r.d,
                            r.c,
                            r.residues,
                            r.f_bound,
                            r.h_bound,
                            r.behrend,
                            r.matches_reference()
                        )?;
                    } else {
                        writeln!(
                            out,
                            "{}: f={:.1} h={:.1} behrend={:.1} matches reference: {}",
                            r.label,
                            r.f_bound,
                            r.h_bound,
                            r.behrend,
                            r.matches_reference()
                        )?;
                    }
                }
                if !csv {
                    writeln!(
                        out,
                        "reference: f={} h={} behrend={}",
                        s.reference_f_bound, s.reference_h_bound, s.reference_behrend
                    )?;
                }
            }
        }
    }
    Ok(0)
}
