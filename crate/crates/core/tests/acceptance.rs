//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use std::time::{Duration, Instant};

use halting_core::analyzer::{check_certificate, CheckContext, Mode, Query};
use halting_core::bridge::{correspondence_check, halt_free_verdict, pred_constant, pred_equals, predicate_family};
use halting_core::decider::{
    classify_budgeted, decide, decide_with_budget, derivation_report, soundness_audit, Verdict3,
};
use halting_core::fixpoint::{build_gallery, construct_fixpoint, template_family, verify_fixpoint, DiagonalGallery};
use halting_core::lang::encode;
use halting_core::machine::{emulate_with, run_program, Context, RunOutcome};
use halting_core::trivalent::{
    evaluate, halting_pairs, halting_tables, liar_lines, liar_table, middle_row_witnessed, TruthValue3,
};
use num_bigint::BigUint;
use serde_json::{json, Value};

const FUELS: [u64; 3] = [1_000, 10_000, 100_000];

struct Outcome {
    pass: bool,
    detail: String,
    /// Machine-readable record, compared across repeated runs.
    record: Value,
}

fn outcome(pass: bool, detail: impl Into<String>, record: Value) -> Outcome {
    Outcome { pass, detail: detail.into(), record }
}

fn zero() -> Option<BigUint> {
    Some(BigUint::from(0u8))
}

fn is_unknown(v: &Verdict3) -> bool {
    matches!(v, Verdict3::Unknown { .. })
}

fn diagonal(g: &DiagonalGallery) -> Outcome {
    let d = g.designated();
    let mode = Mode::StrictAppendixB;
    let ks = Query::new(g.k.clone(), Some(g.s.0.clone()));
    let start = Instant::now();
    let v = decide_with_budget(&ks, mode, u64::MAX, 100_000, Some(&d));
    let elapsed = start.elapsed();
    let certified = v
        .certificate()
        .is_some_and(|c| check_certificate(c, &ks, &CheckContext::new(mode, Some(d.clone()))));
    let ks_ok = certified && elapsed < Duration::from_secs(10);

    let mut unknown_ok = true;
    let mut classes = Vec::new();
    for q in [Query::new(g.s.clone(), zero()), Query::new(g.s.clone(), Some(g.s.0.clone()))] {
        for fuel in FUELS {
            let v = decide(&q, mode, fuel, Some(&d));
            unknown_ok &= is_unknown(&v);
            classes.push(v);
        }
    }

    let ctx = Context::new(mode, Some(d));
    let runs = [
        emulate_with(&ctx, &g.k, Some(&g.s.0), 1_000_000),
        emulate_with(&ctx, &g.s, zero().as_ref(), 1_000_000),
    ];
    let exhausted = runs.iter().all(|r| matches!(r, RunOutcome::FuelExhausted { steps: 1_000_000, .. }));

    outcome(
        ks_ok && unknown_ok && exhausted,
        format!(
            "(k,s) certified={certified} in {elapsed:.2?}; (s,0),(s,s) Unknown at all fuels={unknown_ok}; \
             emulation exhausted at 1e6={exhausted}"
        ),
        json!({ "ks": v, "s_queries": classes, "emulation": runs.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>() }),
    )
}

fn quiet_claims(g: &DiagonalGallery) -> Outcome {
    let d = g.designated();
    let mode = Mode::StrictAppendixB;
    let q0: Vec<Verdict3> =
        FUELS.iter().map(|&f| decide(&Query::new(g.q.clone(), zero()), mode, f, Some(&d))).collect();
    let unknown_ok = q0.iter().all(is_unknown);
    let pq_query = Query::new(g.p.clone(), Some(g.q.0.clone()));
    let pq = decide(&pq_query, mode, 100_000, Some(&d));
    let pq_ok = pq.certificate().is_some_and(|c| check_certificate(c, &pq_query, &CheckContext::new(mode, Some(d))));
    outcome(
        unknown_ok && pq_ok,
        format!("(q,0) Unknown at all fuels={unknown_ok}; (p,q) certified NotHalts={pq_ok}"),
        json!({ "q0": q0, "pq": pq }),
    )
}

fn general_conclusion() -> Outcome {
    let g = build_gallery(Mode::General);
    let d = g.designated();
    let bs = Query::new(g.b.clone(), Some(g.s.0.clone()));
    let v = decide(&bs, Mode::General, 100_000, Some(&d));
    let certified =
        v.certificate().is_some_and(|c| check_certificate(c, &bs, &CheckContext::new(Mode::General, Some(d.clone()))));
    let report = derivation_report(&d, Some(&g.b), Mode::General, 100_000);
    let shape = report.steps.len() == 4 && report.steps[1].assumption && report.steps[1].discharged;
    outcome(
        certified && shape,
        format!("(b,s) certified NotHalts={certified}; 4 steps with step 2 discharged={shape}"),
        json!({ "bs": v, "derivation": report }),
    )
}

fn recursion() -> Outcome {
    let start = Instant::now();
    let ctx = Context::default();
    let mut rows = Vec::new();
    let mut all = true;
    for (name, t) in template_family() {
        let ok = match construct_fixpoint(&t) {
            Ok(r) => {
                let out = run_program(&ctx, &r.program, None, 1_000_000);
                let want = run_program(&ctx, &t, Some(&r.index.0), 1_000_000);
                let quine = name != "identity" || out.output() == Some(&r.index.0);
                let ok = verify_fixpoint(&r, 1_000_000)
                    && encode(&r.program) == r.index
                    && out.is_halted()
                    && out.output() == want.output()
                    && quine;
                rows.push(json!({ "template": name, "index_digits": r.index.0.to_string().len(), "output": out.output().map(|o| o.to_string()), "ok": ok }));
                ok
            }
            Err(e) => {
                rows.push(json!({ "template": name, "error": e.to_string() }));
                false
            }
        };
        all &= ok;
    }
    let elapsed = start.elapsed();
    outcome(
        all && elapsed < Duration::from_secs(60),
        format!("{} templates verified={all} in {elapsed:.2?}", rows.len()),
        json!(rows),
    )
}

fn sweep() -> Outcome {
    let report = classify_budgeted(2_000, Mode::StrictAppendixB, 1_000, 1_000);
    let audit = soundness_audit(&report, 100_000);
    let c = &report.counts;
    let non_empty = c.all_non_empty();
    outcome(
        audit.passed() && audit.certificates_passed == audit.not_halts_checked && non_empty,
        format!(
            "counts halts={} not_halts={} unknown={}; unsound={} certificates {}/{}; all classes non-empty={non_empty}",
            c.halts,
            c.not_halts,
            c.unknown,
            audit.unsound.len(),
            audit.certificates_passed,
            audit.not_halts_checked
        ),
        json!({ "counts": c, "audit": audit }),
    )
}

fn liar() -> Outcome {
    use TruthValue3::*;
    let values: Vec<TruthValue3> = liar_lines().iter().map(evaluate).collect();
    let table = liar_table();
    let ok = values == [Gap, T, T, T, F, F] && table.necessitation_holds && table.equivalence_refuted;
    outcome(
        ok,
        format!(
            "lines={}; necessitation={} equivalence refuted={}",
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            table.necessitation_holds,
            table.equivalence_refuted
        ),
        json!({ "values": values, "table": table }),
    )
}

fn halting_truth_tables(g: &DiagonalGallery) -> Outcome {
    let pairs = halting_pairs(g, 100_000);
    let tables = halting_tables(&pairs);
    let necessitation = tables.iter().all(|t| t.necessitation_holds);
    let middle = middle_row_witnessed(&pairs);
    outcome(
        necessitation && middle,
        format!("{} rows; necessitation in all 3 tables={necessitation}; middle row (GAP, F) witnessed={middle}", pairs.len()),
        json!({ "pairs": pairs, "tables": tables }),
    )
}

fn bridge() -> Outcome {
    let fuel = 100_000;
    let five = correspondence_check(&pred_equals(5), 10, fuel);
    let five_ok = matches!(&five.verdict, Verdict3::Halts { output, .. } if Some(output) == five.witness.map(BigUint::from).as_ref());
    let never = correspondence_check(&pred_constant(false), 10, fuel);
    let never_ok = is_unknown(&never.verdict);
    let halt_free = halt_free_verdict(&pred_constant(false), fuel);
    let halt_free_ok = matches!(halt_free, Verdict3::NotHalts { .. });
    let family: Vec<_> = predicate_family().iter().map(|p| correspondence_check(p, 10, fuel)).collect();
    let hard = family.iter().filter(|r| r.hard_failure()).count();
    outcome(
        five_ok && never_ok && halt_free_ok && hard == 0,
        format!(
            "x = 5 halts on witness={five_ok}; constant-false Unknown={never_ok}; halt-free NotHalts={halt_free_ok}; \
             hard failures={hard}/{}",
            family.len()
        ),
        json!({ "equals5": five, "never": never, "halt_free": halt_free, "family": family }),
    )
}

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn criteria() -> Vec<Criterion> {
    let strict = || build_gallery(Mode::StrictAppendixB);
    vec![
        ("diagonal claims", Box::new(move || diagonal(&strict()))),
        ("quiet-program claims", Box::new(move || quiet_claims(&strict()))),
        ("general-mode conclusion", Box::new(general_conclusion)),
        ("recursion theorem family", Box::new(recursion)),
        ("soundness sweep", Box::new(sweep)),
        ("liar table", Box::new(liar)),
        ("halting truth tables", Box::new(halting_truth_tables_strict)),
        ("predicate bridge", Box::new(bridge)),
    ]
}

fn halting_truth_tables_strict() -> Outcome {
    halting_truth_tables(&build_gallery(Mode::StrictAppendixB))
}

fn main() {
    let mut failures = 0;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (name, run) in criteria() {
        let a = run();
        let b = run();
        println!("{} {name}: {}", if a.pass { "PASS" } else { "FAIL" }, a.detail);
        failures += usize::from(!a.pass);
        first.push(serde_json::to_string(&json!({ "criterion": name, "record": a.record })).unwrap());
        second.push(serde_json::to_string(&json!({ "criterion": name, "record": b.record })).unwrap());
    }
    let identical = first == second;
    let bytes: usize = first.iter().map(String::len).sum();
    println!(
        "{} determinism: {} records ({bytes} bytes) byte-identical across two runs={identical}",
        if identical { "PASS" } else { "FAIL" },
        first.len()
    );
    failures += usize::from(!identical);
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
