use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use halting_core::analyzer::{analyze, check_certificate, short, AnalysisOutcome, CheckContext, Mode, Query, ResolutionNode};
use halting_core::asm::parse_program;
use halting_core::bridge::{correspondence_check, halt_free_verdict, pred_constant, predicate_family, PredicateProgram};
use halting_core::decider::{classify_budgeted, decide_with_budget, derivation_report, soundness_audit, Verdict3};
use halting_core::fixpoint::{build_gallery, construct_fixpoint, template_family, verify_fixpoint, DiagonalGallery};
use halting_core::lang::{encode, try_decode, Program, ProgramIndex};
use halting_core::machine::{emulate_with, run_program, trace_with, Context, RunOutcome};
use halting_core::trivalent::{
    equivalence_refuted, evaluate_traced, halting_pairs, halting_tables, liar_table, middle_row_witnessed,
    necessitation_holds, parse_rows, parse_sentence, render, verdict_to_truth, NecessitationRow, Polarity,
    TruthTable, TruthValue3,
};

const OK: u8 = 0;
const USAGE: u8 = 1;
const UNDECIDED: u8 = 2;
const AUDIT: u8 = 3;

/// Halting laboratory: a register machine, a partial halting decider, and
/// the self-referential programs that defeat it.
#[derive(Parser)]
#[command(name = "halting-lab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Emulation fuel (decide: shared by analyzer and emulator)
    #[arg(long, global = true, default_value_t = 100_000)]
    fuel: u64,
    /// Analyzer tick budget
    #[arg(long, global = true, default_value_t = 100_000)]
    budget: u64,
    /// strict-appendix-b | general
    #[arg(long, global = true, default_value = "strict-appendix-b")]
    mode: Mode,
    /// End of the index range for `sweep`
    #[arg(long, global = true, default_value_t = 2000)]
    range: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the index of an assembly file
    Encode { file: PathBuf },
    /// Print the program with a given index
    Decode { index: String },
    /// Run a program under the fuel meter
    Run {
        /// Assembly file, decimal or 0x index, or @k/@s/@p/@q/@b
        target: String,
        #[arg(long)]
        input: Option<String>,
        /// Emit a JSON-lines trace sampled every N instructions
        #[arg(long)]
        trace: Option<u64>,
    },
    /// Run the non-halting analyzer alone
    Analyze {
        target: String,
        #[arg(long)]
        input: Option<String>,
    },
    /// Run the interleaved decider
    Decide {
        target: String,
        #[arg(long)]
        input: Option<String>,
    },
    /// Headline verdicts on the diagonal programs and the reductio
    DemoDiagonal {
        /// Write the gallery manifest (indices and assembly) here
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Build and check fixpoints for a family of templates
    DemoRecursion,
    /// Classify indices 0..range and audit every definite verdict
    Sweep,
    /// Evaluate a pointer sentence, e.g. "quote(self: not-true): not-true"
    Liar { sentence: String },
    /// Reproduce the truth tables; optionally check rows from a file
    Tables {
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Predicate searchers versus brute force
    Bridge {
        /// Predicate assembly file (arity 1, answers 0 or 1)
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        bound: u64,
    },
}

struct Env {
    opts: Opts,
    gallery: DiagonalGallery,
}

impl Env {
    fn ctx(&self) -> Context {
        Context::new(self.opts.mode, Some(self.gallery.designated()))
    }

    fn json(&self) -> bool {
        self.opts.format == Format::Json
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let env = Env { gallery: build_gallery(cli.opts.mode), opts: cli.opts };
    match dispatch(&env, cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}

fn dispatch(env: &Env, cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Encode { file } => cmd_encode(env, &file),
        Cmd::Decode { index } => cmd_decode(env, &index),
        Cmd::Run { target, input, trace } => cmd_run(env, &target, input.as_deref(), trace),
        Cmd::Analyze { target, input } => cmd_analyze(env, &target, input.as_deref()),
        Cmd::Decide { target, input } => cmd_decide(env, &target, input.as_deref()),
        Cmd::DemoDiagonal { manifest } => cmd_demo_diagonal(env, manifest.as_deref()),
        Cmd::DemoRecursion => cmd_demo_recursion(env),
        Cmd::Sweep => cmd_sweep(env),
        Cmd::Liar { sentence } => cmd_liar(env, &sentence),
        Cmd::Tables { rows } => cmd_tables(env, rows.as_deref()),
        Cmd::Bridge { pred, bound } => cmd_bridge(env, pred.as_deref(), bound),
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn read_program(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_nat(env: &Env, text: &str) -> Result<BigUint> {
    let t = text.trim();
    if let Some(name) = t.strip_prefix('@') {
        let g = &env.gallery;
        let idx = match name {
            "k" => &g.k,
            "s" => &g.s,
            "p" => &g.p,
            "q" => &g.q,
            "b" => &g.b,
            _ => bail!("unknown gallery name `@{name}` (k, s, p, q, b)"),
        };
        return Ok(idx.0.clone());
    }
    let parsed = match t.strip_prefix("0x") {
        Some(hex) => BigUint::parse_bytes(hex.as_bytes(), 16),
        None => BigUint::parse_bytes(t.as_bytes(), 10),
    };
    parsed.ok_or_else(|| anyhow!("`{t}` is not a natural number, file, or gallery name"))
}

fn load_target(env: &Env, target: &str) -> Result<ProgramIndex> {
    let path = Path::new(target);
    if path.is_file() {
        return Ok(encode(&read_program(path)?));
    }
    parse_nat(env, target).map(ProgramIndex)
}

fn query(env: &Env, target: &str, input: Option<&str>) -> Result<Query> {
    let n = load_target(env, target)?;
    let m = input.map(|i| parse_nat(env, i)).transpose()?;
    Ok(Query::new(n, m))
}

fn cmd_encode(env: &Env, file: &Path) -> Result<u8> {
    let p = read_program(file)?;
    let idx = encode(&p);
    if env.json() {
        print_json(&json!({
            "index": idx.0.to_string(),
            "hex_digits": idx.0.to_str_radix(16).len(),
            "instructions": p.len(),
        }));
    } else {
        println!("{}", idx.0);
    }
    Ok(OK)
}

fn cmd_decode(env: &Env, index: &str) -> Result<u8> {
    let idx = ProgramIndex(parse_nat(env, index)?);
    let decoded = try_decode(&idx);
    let program = decoded.clone().unwrap_or_else(Program::diverging);
    if env.json() {
        print_json(&json!({ "valid": decoded.is_some(), "assembly": program.to_string() }));
    } else {
        if decoded.is_none() {
            println!("# not a canonical encoding; decodes to the default program");
        }
        print!("{program}");
    }
    Ok(OK)
}

fn cmd_run(env: &Env, target: &str, input: Option<&str>, trace: Option<u64>) -> Result<u8> {
    let q = query(env, target, input)?;
    let ctx = env.ctx();
    if let Some(every) = trace {
        print!("{}", trace_with(&ctx, &q.n, q.m.as_ref(), env.opts.fuel, every).to_jsonl());
    }
    let outcome = emulate_with(&ctx, &q.n, q.m.as_ref(), env.opts.fuel);
    if trace.is_none() {
        match (&outcome, env.json()) {
            (RunOutcome::Halted { output, steps }, true) => {
                print_json(&json!({ "outcome": "Halted", "output": output.to_string(), "steps": steps }))
            }
            (RunOutcome::FuelExhausted { steps, .. }, true) => {
                print_json(&json!({ "outcome": "FuelExhausted", "steps": steps }))
            }
            (RunOutcome::Halted { output, steps }, false) => println!("Halted output={output} steps={steps}"),
            (RunOutcome::FuelExhausted { steps, .. }, false) => println!("FuelExhausted steps={steps}"),
        }
    }
    Ok(if outcome.is_halted() { OK } else { UNDECIDED })
}

fn print_tree(node: &ResolutionNode, depth: usize) {
    let kind = node.kind.map(|k| format!("{k:?} ")).unwrap_or_default();
    println!("{}{} {kind}{}: {} [{} ticks]", "  ".repeat(depth + 1), node.role, node.query, node.result, node.ticks);
    for c in &node.children {
        print_tree(c, depth + 1);
    }
}

fn cmd_analyze(env: &Env, target: &str, input: Option<&str>) -> Result<u8> {
    let q = query(env, target, input)?;
    let designated = env.gallery.designated();
    let report = analyze(&q, env.opts.mode, env.opts.budget, Some(&designated));
    if env.json() {
        print_json(&serde_json::to_value(&report)?);
    } else {
        match &report.outcome {
            AnalysisOutcome::NotHalting { certificate } => {
                println!("NotHalting ticks={}", report.ticks);
                println!("  certificate: {certificate}");
            }
            AnalysisOutcome::GaveUp { reason } => println!("GaveUp ticks={}: {reason}", report.ticks),
            AnalysisOutcome::OutOfBudget { ticks } => println!("OutOfBudget ticks={ticks}"),
        }
        println!("resolution:");
        print_tree(&report.resolution, 0);
    }
    Ok(if report.outcome.is_not_halting() { OK } else { UNDECIDED })
}

fn decide_here(env: &Env, q: &Query, mode: Mode) -> Verdict3 {
    decide_with_budget(q, mode, env.opts.fuel, env.opts.budget, Some(&env.gallery.designated()))
}

fn certificate_passes(env: &Env, q: &Query, mode: Mode, v: &Verdict3) -> Option<bool> {
    let check = CheckContext::new(mode, Some(env.gallery.designated()));
    v.certificate().map(|c| check_certificate(c, q, &check))
}

fn cmd_decide(env: &Env, target: &str, input: Option<&str>) -> Result<u8> {
    let q = query(env, target, input)?;
    let v = decide_here(env, &q, env.opts.mode);
    if env.json() {
        print_json(&json!({ "query": q, "mode": env.opts.mode, "fuel": env.opts.fuel, "verdict": v }));
    } else {
        println!("{q} -> {v}");
    }
    Ok(if matches!(v, Verdict3::Unknown { .. }) { UNDECIDED } else { OK })
}

fn cmd_demo_diagonal(env: &Env, manifest: Option<&Path>) -> Result<u8> {
    let g = &env.gallery;
    if let Some(path) = manifest {
        fs::write(path, serde_json::to_string_pretty(&g.manifest())?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let zero = Some(BigUint::from(0u8));
    let mode = env.opts.mode;
    let cases = [
        ("(k, s)", Query::new(g.k.clone(), Some(g.s.0.clone())), mode),
        ("(s, 0)", Query::new(g.s.clone(), zero.clone()), mode),
        ("(s, s)", Query::new(g.s.clone(), Some(g.s.0.clone())), mode),
        ("(p, q)", Query::new(g.p.clone(), Some(g.q.0.clone())), mode),
        ("(q, 0)", Query::new(g.q.clone(), zero), mode),
        ("(b, s)", Query::new(g.b.clone(), Some(g.s.0.clone())), Mode::General),
    ];
    let mut lines = Vec::new();
    for (name, q, m) in cases {
        let v = decide_here(env, &q, m);
        let audit = certificate_passes(env, &q, m, &v);
        lines.push((name, m, v, audit));
    }
    let derivation = derivation_report(&g.designated(), Some(&g.b), mode, env.opts.fuel);
    if env.json() {
        let verdicts: Vec<Value> = lines
            .iter()
            .map(|(name, m, v, audit)| json!({ "query": name, "mode": m, "verdict": v, "certificate_check": audit }))
            .collect();
        print_json(&json!({ "mode": mode, "fuel": env.opts.fuel, "verdicts": verdicts, "derivation": derivation }));
    } else {
        println!("gallery ({mode}, fuel {}):", env.opts.fuel);
        for (name, _, _, program) in g.programs() {
            println!("  {name}: {} instructions, index {}", program.len(), short(&encode(program).0));
        }
        println!("verdicts:");
        for (name, m, v, audit) in &lines {
            let check = audit.map(|ok| if ok { " certificate ok" } else { " CERTIFICATE FAILED" }).unwrap_or("");
            println!("  {name} [{m}] -> {v}{check}");
        }
        println!("derivation:");
        for s in &derivation.steps {
            let mark = if s.discharged { " [discharged]" } else { "" };
            let holds = match s.holds {
                Some(true) => "holds",
                Some(false) => "FAILS",
                None => "n/a",
            };
            println!("  ({}) {}  -- {}{mark}", s.line, s.formula, s.justification);
            println!("      side condition ({holds}): {}", s.side_condition);
        }
    }
    let failed = lines.iter().any(|l| l.3 == Some(false)) || !derivation.all_hold();
    Ok(if failed { AUDIT } else { OK })
}

fn cmd_demo_recursion(env: &Env) -> Result<u8> {
    let ctx = Context::default();
    let mut all = true;
    let mut rows = Vec::new();
    for (name, t) in template_family() {
        let r = construct_fixpoint(&t)?;
        let out_r = run_program(&ctx, &r.program, None, env.opts.fuel.max(1_000_000));
        let out_t = run_program(&ctx, &t, Some(&r.index.0), env.opts.fuel.max(1_000_000));
        let ok = verify_fixpoint(&r, env.opts.fuel.max(1_000_000));
        all &= ok;
        let show = |o: &RunOutcome| o.output().map(|v| v.to_string()).unwrap_or_else(|| "no halt".into());
        rows.push(json!({
            "template": name,
            "index_hex_digits": r.index.0.to_str_radix(16).len(),
            "instructions": r.program.len(),
            "r_output": show(&out_r),
            "t_of_r_output": show(&out_t),
            "output_is_own_index": out_r.output() == Some(&r.index.0),
            "verified": ok,
        }));
        if !env.json() {
            let quine = if out_r.output() == Some(&r.index.0) { " (output = own index)" } else { "" };
            println!(
                "{name:<13} R: {} instrs  R() = {}  T(r) = {}  verified={ok}{quine}",
                r.program.len(),
                out_r.output().map(short).unwrap_or_else(|| "no halt".into()),
                out_t.output().map(short).unwrap_or_else(|| "no halt".into()),
            );
        }
    }
    if env.json() {
        print_json(&json!({ "fixpoints": rows }));
    }
    Ok(if all { OK } else { AUDIT })
}

fn cmd_sweep(env: &Env) -> Result<u8> {
    if env.opts.range == 0 {
        bail!("--range must be at least 1");
    }
    let report = classify_budgeted(env.opts.range, env.opts.mode, env.opts.fuel, env.opts.budget);
    let audit = soundness_audit(&report, 100_000);
    if env.json() {
        for row in &report.rows {
            println!("{}", serde_json::to_string(row)?);
        }
        println!("{}", json!({ "summary": { "range_end": report.range_end, "counts": report.counts, "audit": audit, "audit_passed": audit.passed() } }));
    } else {
        let c = &report.counts;
        println!("indices 0..{} ({}, fuel {}, budget {})", report.range_end, report.mode, report.fuel, env.opts.budget);
        for (name, n) in [("Halts", c.halts), ("NotHalts", c.not_halts), ("Unknown", c.unknown)] {
            if n > 0 || report.range_end > 1 {
                println!("  {name:<9} {n}");
            }
        }
        println!(
            "audit: {} NotHalts checked, {} certificates passed, {} unsound, {} halting mismatches -> {}",
            audit.not_halts_checked,
            audit.certificates_passed,
            audit.unsound.len(),
            audit.halts_mismatch.len(),
            if audit.passed() { "pass" } else { "FAIL" }
        );
    }
    Ok(if audit.passed() { OK } else { AUDIT })
}

fn cmd_liar(env: &Env, sentence: &str) -> Result<u8> {
    let s = parse_sentence(sentence)?;
    let eval = evaluate_traced(&s);
    if env.json() {
        print_json(&json!({ "sentence": render(&s), "value": eval.value, "trace": eval.trace }));
    } else {
        println!("{}: {}", render(&s), eval.value);
        for line in &eval.trace {
            println!("  {line}");
        }
    }
    Ok(OK)
}

fn table_3_1() -> Vec<NecessitationRow> {
    // searcher verdict truth against brute-force existence, per predicate,
    // plus the certified halt-free searcher
    let mut rows: Vec<NecessitationRow> = predicate_family().iter().map(|p| correspondence_check(p, 20, 100_000).row).collect();
    let v = halt_free_verdict(&pred_constant(false), 1000);
    rows.push(NecessitationRow::new(verdict_to_truth(&v, Polarity::Halts), TruthValue3::F));
    rows
}

fn cmd_tables(env: &Env, rows: Option<&Path>) -> Result<u8> {
    if let Some(path) = rows {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let rows = parse_rows(&text)?;
        let (n, e) = (necessitation_holds(&rows), equivalence_refuted(&rows));
        if env.json() {
            print_json(&json!({ "rows": rows, "necessitation_holds": n, "equivalence_refuted": e }));
        } else {
            println!("{} rows: necessitation holds: {n}, equivalence refuted: {e}", rows.len());
        }
        return Ok(OK);
    }
    let liar = liar_table();
    let pairs = halting_pairs(&env.gallery, env.opts.fuel);
    let halting = halting_tables(&pairs);
    let middle = middle_row_witnessed(&pairs);
    let bridge_rows = table_3_1();
    if env.json() {
        print_json(&json!({
            "liar": liar,
            "halting_pairs": pairs,
            "halting_tables": halting,
            "middle_row_witnessed": middle,
            "searcher_rows": bridge_rows,
            "searcher_necessitation_holds": necessitation_holds(&bridge_rows),
        }));
    } else {
        let show = |t: &TruthTable| println!("{t}\n");
        show(&liar);
        for t in &halting {
            show(t);
        }
        println!("middle row (C_s, C_k(s)) witnessed: {middle}");
        println!("searcher rows necessitation: {}", necessitation_holds(&bridge_rows));
    }
    let ok = liar.necessitation_holds && halting.iter().all(|t| t.necessitation_holds) && middle;
    Ok(if ok { OK } else { AUDIT })
}

fn cmd_bridge(env: &Env, pred: Option<&Path>, bound: u64) -> Result<u8> {
    let preds = match pred {
        Some(path) => vec![PredicateProgram::new(path.display().to_string(), read_program(path)?, false)],
        None => predicate_family(),
    };
    let reports: Vec<_> = preds.iter().map(|p| correspondence_check(p, bound, env.opts.fuel)).collect();
    let halt_free = halt_free_verdict(&pred_constant(false), env.opts.fuel);
    let hard = reports.iter().any(|r| r.hard_failure());
    if env.json() {
        print_json(&json!({ "bound": bound, "reports": reports, "halt_free_false": halt_free, "hard_failure": hard }));
    } else {
        for r in &reports {
            let w = r.witness.map(|w| w.to_string()).unwrap_or_else(|| "none".into());
            println!("{:<12} witness<{bound}: {w:<5} {}  {:?}", r.predicate, r.verdict, r.consistency);
        }
        println!("halt-free searcher for `false`: {halt_free}");
    }
    Ok(if hard { AUDIT } else { OK })
}
