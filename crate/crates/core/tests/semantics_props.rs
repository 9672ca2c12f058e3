mod common;

use halting_core::analyzer::{analyze, check_certificate, tick_count, CheckContext, Mode, Query};
use halting_core::decider::{decide, Verdict3};
use halting_core::lang::{encode, Program};
use halting_core::machine::{emulate, trace_of, RunOutcome};
use num_bigint::BigUint;
use proptest::prelude::*;

fn query(p: &Program) -> Query {
    Query::new(encode(p), Some(BigUint::from(2u8)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn more_fuel_never_changes_a_halt(p in common::plain_program(10), extra in 1u64..500) {
        let q = query(&p);
        if let RunOutcome::Halted { output, steps } = emulate(&q.n, q.m.as_ref(), 300) {
            let again = emulate(&q.n, q.m.as_ref(), 300 + extra);
            prop_assert_eq!(again, RunOutcome::Halted { output, steps });
        }
    }

    #[test]
    fn runs_and_traces_are_deterministic(p in common::any_program(10)) {
        let q = query(&p);
        prop_assert_eq!(emulate(&q.n, q.m.as_ref(), 2_000), emulate(&q.n, q.m.as_ref(), 2_000));
        prop_assert_eq!(
            trace_of(&q.n, q.m.as_ref(), 500, 7).to_jsonl(),
            trace_of(&q.n, q.m.as_ref(), 500, 7).to_jsonl()
        );
    }

    #[test]
    fn analyzer_is_sound_and_certificates_replay(p in common::any_program(10)) {
        let q = query(&p);
        let report = analyze(&q, Mode::General, 2_000, None);
        prop_assert!(tick_count(&report) >= 1);
        prop_assert_eq!(tick_count(&report), tick_count(&analyze(&q, Mode::General, 2_000, None)));
        if let Some(c) = report.outcome.certificate() {
            prop_assert!(!emulate(&q.n, q.m.as_ref(), 100_000).is_halted(), "certified {} halts", p);
            prop_assert!(check_certificate(c, &q, &CheckContext::new(Mode::General, None)));
        }
    }

    #[test]
    fn definite_verdicts_are_stable_and_agree_with_emulation(p in common::any_program(10)) {
        let q = query(&p);
        let low = decide(&q, Mode::General, 400, None);
        for fuel in [4_000u64, 40_000] {
            let high = decide(&q, Mode::General, fuel, None);
            match (&low, &high) {
                (Verdict3::Halts { output: a, steps: s, .. }, Verdict3::Halts { output: b, steps: t, .. }) => {
                    prop_assert_eq!((a, s), (b, t));
                }
                (Verdict3::NotHalts { .. }, Verdict3::NotHalts { .. }) | (Verdict3::Unknown { .. }, _) => {}
                _ => prop_assert!(false, "{} became {} with more fuel", low, high),
            }
            prop_assert!(high.fuel_spent() <= fuel);
        }
        if let Verdict3::Halts { output, steps, .. } = &low {
            prop_assert_eq!(
                emulate(&q.n, q.m.as_ref(), *steps),
                RunOutcome::Halted { output: output.clone(), steps: *steps }
            );
        }
    }
}

#[test]
fn trace_lines_follow_the_schema() {
    let p = halting_core::asm::parse_program("INC r1\nDECJZ r2 -1\n").unwrap();
    let jsonl = trace_of(&encode(&p), None, 10, 3).to_jsonl();
    let lines: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    for l in &lines {
        for key in ["step", "pc", "depth", "regs", "event"] {
            assert!(l.get(key).is_some(), "missing {key} in {l}");
        }
        assert_eq!(l["regs"].as_array().unwrap().len(), 8);
    }
    assert_eq!(lines.last().unwrap()["event"]["type"], "fuel_exhausted");
}
