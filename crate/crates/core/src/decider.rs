//! H = A ∥ B: the analyzer and the emulator interleaved one tick to one step.
//!
//! The interleaving is logical. Both sides are deterministic and independent,
//! so the schedule can be reconstructed from when each side finishes:
//! the analyzer runs first in every round, so if it concludes at tick `t`
//! the emulator has taken `t - 1` steps by then.

use num_bigint::BigUint;
use serde::Serialize;

use crate::analyzer::{
    analyze, check_certificate, AnalysisOutcome, Certificate, CheckContext, Designated, Mode, Query,
};
use crate::lang::ProgramIndex;
use crate::machine::{emulate_with, Context, Event, Executor, ReflectKind, RunOutcome, Runner};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict3 {
    Halts {
        #[serde(serialize_with = "crate::lang::ser_nat")]
        output: BigUint,
        steps: u64,
        fuel_spent: u64,
    },
    NotHalts {
        certificate: Certificate,
        fuel_spent: u64,
    },
    Unknown {
        fuel_spent: u64,
        a_outcome: AnalysisOutcome,
    },
}

impl Verdict3 {
    pub fn fuel_spent(&self) -> u64 {
        match self {
            Verdict3::Halts { fuel_spent, .. }
            | Verdict3::NotHalts { fuel_spent, .. }
            | Verdict3::Unknown { fuel_spent, .. } => *fuel_spent,
        }
    }

    pub fn class(&self) -> Class {
        match self {
            Verdict3::Halts { .. } => Class::Halts,
            Verdict3::NotHalts { .. } => Class::NotHalts,
            Verdict3::Unknown { .. } => Class::Unknown,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Verdict3::NotHalts { certificate, .. } => Some(certificate),
            _ => None,
        }
    }
}

impl std::fmt::Display for Verdict3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict3::Halts { output, steps, .. } => {
                write!(f, "Halts(output={}, steps={steps})", crate::analyzer::short(output))
            }
            Verdict3::NotHalts { certificate, .. } => write!(f, "NotHalts[{certificate}]"),
            Verdict3::Unknown { fuel_spent, a_outcome } => {
                let a = match a_outcome {
                    AnalysisOutcome::GaveUp { .. } => "GaveUp",
                    AnalysisOutcome::OutOfBudget { .. } => "OutOfBudget",
                    AnalysisOutcome::NotHalting { .. } => "NotHalting",
                };
                write!(f, "Unknown(fuel_spent={fuel_spent}, analyzer={a})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Class {
    Halts,
    NotHalts,
    Unknown,
}

/// Decides `query` within `fuel` units shared between the two sides.
pub fn decide(query: &Query, mode: Mode, fuel: u64, designated: Option<&Designated>) -> Verdict3 {
    decide_with_budget(query, mode, fuel, u64::MAX, designated)
}

/// As [`decide`], with the analyzer additionally capped at `budget` ticks;
/// once it stops, the emulator gets the rest of the fuel to itself.
pub fn decide_with_budget(
    query: &Query,
    mode: Mode,
    fuel: u64,
    budget: u64,
    designated: Option<&Designated>,
) -> Verdict3 {
    let fuel = fuel.max(2);
    let ctx = Context::new(mode, designated.cloned());
    let report = analyze(query, mode, fuel.div_ceil(2).min(budget.max(1)), designated);
    let run = |steps: u64| {
        let mut runner = Runner::new(Executor::for_query(query), ctx.clone(), steps);
        runner.run()
    };
    match report.outcome {
        AnalysisOutcome::NotHalting { certificate } => {
            let t = report.ticks;
            match run(t - 1) {
                // unreachable for a sound analyzer; the emulator wins the race
                RunOutcome::Halted { output, steps } => {
                    Verdict3::Halts { output, steps, fuel_spent: 2 * steps }
                }
                RunOutcome::FuelExhausted { .. } => Verdict3::NotHalts { certificate, fuel_spent: 2 * t - 1 },
            }
        }
        a_outcome => {
            match run(fuel - report.ticks) {
                RunOutcome::Halted { output, steps } => {
                    Verdict3::Halts { output, steps, fuel_spent: steps + steps.min(report.ticks) }
                }
                RunOutcome::FuelExhausted { steps, .. } => {
                    Verdict3::Unknown { fuel_spent: steps + report.ticks, a_outcome }
                }
            }
        }
    }
}

// ----- tripartition --------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ClassifiedIndex {
    #[serde(serialize_with = "crate::lang::ser_nat")]
    pub index: BigUint,
    pub class: Class,
    pub verdict: Verdict3,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub halts: usize,
    pub not_halts: usize,
    pub unknown: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.halts + self.not_halts + self.unknown
    }

    pub fn all_non_empty(&self) -> bool {
        self.halts > 0 && self.not_halts > 0 && self.unknown > 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TripartitionReport {
    pub range_end: u64,
    pub mode: Mode,
    pub fuel: u64,
    pub counts: ClassCounts,
    pub rows: Vec<ClassifiedIndex>,
}

/// Decides every index in `[0, range_end)` with input 0.
pub fn classify(range_end: u64, mode: Mode, fuel: u64) -> TripartitionReport {
    classify_budgeted(range_end, mode, fuel, u64::MAX)
}

pub fn classify_budgeted(range_end: u64, mode: Mode, fuel: u64, budget: u64) -> TripartitionReport {
    classify_indices((0..range_end).map(BigUint::from), mode, fuel, budget, range_end)
}

pub fn classify_indices(
    indices: impl IntoIterator<Item = BigUint>,
    mode: Mode,
    fuel: u64,
    budget: u64,
    range_end: u64,
) -> TripartitionReport {
    let mut counts = ClassCounts::default();
    let rows: Vec<ClassifiedIndex> = indices
        .into_iter()
        .map(|index| {
            let q = Query::new(ProgramIndex(index.clone()), Some(BigUint::from(0u8)));
            let verdict = decide_with_budget(&q, mode, fuel, budget, None);
            let class = verdict.class();
            match class {
                Class::Halts => counts.halts += 1,
                Class::NotHalts => counts.not_halts += 1,
                Class::Unknown => counts.unknown += 1,
            }
            ClassifiedIndex { index, class, verdict }
        })
        .collect();
    TripartitionReport { range_end, mode, fuel, counts, rows }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SoundnessAudit {
    pub not_halts_checked: usize,
    pub certificates_passed: usize,
    /// NotHalts verdicts whose program nevertheless halted.
    pub unsound: Vec<String>,
    /// Halts verdicts that direct emulation does not reproduce.
    pub halts_mismatch: Vec<String>,
    pub certificate_failures: Vec<String>,
}

impl SoundnessAudit {
    pub fn passed(&self) -> bool {
        self.unsound.is_empty() && self.halts_mismatch.is_empty() && self.certificate_failures.is_empty()
    }
}

/// Cross-checks every definite verdict of a sweep: NotHalts programs must not
/// halt within `emulation_fuel` steps and their certificates must replay;
/// Halts verdicts must be reproduced by plain emulation.
pub fn soundness_audit(report: &TripartitionReport, emulation_fuel: u64) -> SoundnessAudit {
    let ctx = Context::new(report.mode, None);
    let check = CheckContext::new(report.mode, None);
    let mut audit = SoundnessAudit::default();
    for row in &report.rows {
        let n = ProgramIndex(row.index.clone());
        let input = BigUint::from(0u8);
        let q = Query::new(n.clone(), Some(input.clone()));
        match &row.verdict {
            Verdict3::NotHalts { certificate, .. } => {
                audit.not_halts_checked += 1;
                if emulate_with(&ctx, &n, Some(&input), emulation_fuel).is_halted() {
                    audit.unsound.push(row.index.to_string());
                }
                if check_certificate(certificate, &q, &check) {
                    audit.certificates_passed += 1;
                } else {
                    audit.certificate_failures.push(row.index.to_string());
                }
            }
            Verdict3::Halts { output, steps, .. } => match emulate_with(&ctx, &n, Some(&input), *steps) {
                RunOutcome::Halted { output: o, steps: s } if &o == output && s == *steps => {}
                _ => audit.halts_mismatch.push(row.index.to_string()),
            },
            Verdict3::Unknown { .. } => {}
        }
    }
    audit
}

// ----- the four-line reductio ----------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DerivationStep {
    pub line: u8,
    pub formula: String,
    pub justification: String,
    pub assumption: bool,
    pub discharged: bool,
    pub side_condition: String,
    /// `None` when the side condition is not mechanically available.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivationReport {
    pub steps: Vec<DerivationStep>,
}

impl DerivationReport {
    pub fn all_hold(&self) -> bool {
        self.steps.iter().all(|s| s.holds != Some(false))
    }
}

/// First reflective call reached by a plain executor, bounded by `limit`
/// instructions.
fn first_reflection(query: &Query, limit: u64) -> Option<(ReflectKind, Query)> {
    let mut exec = Executor::for_query(query);
    while exec.instructions() < limit {
        match exec.step() {
            Event::Reflect { kind, query } => return Some((kind, query)),
            Event::Halted(_) => return None,
            _ => {}
        }
    }
    None
}

/// Builds the reductio: (1) the analyzer stops on (k, s); (2) suppose C_s
/// halts; (3) C_s behaves as C_k(s); (4) so C_s does not halt, discharging (2).
pub fn derivation_report(
    designated: &Designated,
    b: Option<&ProgramIndex>,
    mode: Mode,
    fuel: u64,
) -> DerivationReport {
    let s_int = designated.s.0.clone();
    let ks = Query::new(designated.k.clone(), Some(s_int.clone()));
    let s0 = Query::new(designated.s.clone(), Some(BigUint::from(0u8)));
    let check = CheckContext::new(mode, Some(designated.clone()));

    let v1 = decide(&ks, mode, fuel, Some(designated));
    let step1 = v1.certificate().map(|c| check_certificate(c, &ks, &check)).unwrap_or(false);

    let ctx = Context::new(mode, Some(designated.clone()));
    let step2 = !emulate_with(&ctx, &designated.s, Some(&BigUint::from(0u8)), fuel).is_halted();

    // both runs must arrive at the same self-analysis
    let limit = 10 * fuel.max(100_000);
    let link_s = first_reflection(&s0, limit);
    let link_k = first_reflection(&ks, limit);
    let step3 = link_s.is_some() && link_s == link_k;

    let step4 = b.map(|b| {
        let bs = Query::new(b.clone(), Some(s_int.clone()));
        matches!(decide(&bs, Mode::General, fuel, Some(designated)), Verdict3::NotHalts { .. })
    });

    let steps = vec![
        DerivationStep {
            line: 1,
            formula: "A(k, s)↓".into(),
            justification: "Assumption 1 (undischarged)".into(),
            assumption: true,
            discharged: false,
            side_condition: format!("decide((k, s)) = NotHalts with a passing certificate: {v1}"),
            holds: Some(step1),
        },
        DerivationStep {
            line: 2,
            formula: "B(s, *)↓".into(),
            justification: "Assumption 2 (for reductio)".into(),
            assumption: true,
            discharged: true,
            side_condition: format!("hypothetical; C_s observed not halting within {fuel} steps"),
            holds: Some(step2),
        },
        DerivationStep {
            line: 3,
            formula: "B(s, *) ≡ B(k, s)".into(),
            justification: "Recursion-Theorem construction of s from k".into(),
            assumption: false,
            discharged: false,
            side_condition: "C_s and C_k(s) reach the same reflective call ANALYZE(s, s)".into(),
            holds: Some(step3),
        },
        DerivationStep {
            line: 4,
            formula: "~B(s, *)↓ [potentially A(b, s)↓]".into(),
            justification: "Reductio, (2) discharged".into(),
            assumption: false,
            discharged: false,
            side_condition: "general mode: decide((b, s)) = NotHalts".into(),
            holds: step4,
        },
    ];
    DerivationReport { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{encode, Arity, Instruction, Program};

    #[test]
    fn trivial_verdicts() {
        let halt = encode(&Program::new(vec![Instruction::Halt], Arity::Zero).unwrap());
        let v = decide(&Query::no_input(&halt), Mode::General, 100, None);
        assert!(matches!(v, Verdict3::Halts { ref output, steps: 1, .. } if *output == BigUint::from(0u8)));

        let spin = encode(&Program::diverging());
        let v = decide(&Query::no_input(&spin), Mode::General, 100, None);
        assert_eq!(v.class(), Class::NotHalts);
        assert!(v.fuel_spent() <= 100);
    }

    #[test]
    fn small_sweep_counts_sum() {
        let r = classify(50, Mode::General, 100);
        assert_eq!(r.counts.total(), 50);
        assert!(soundness_audit(&r, 1000).passed());
    }

    #[test]
    fn verdict_serializes_with_one_of_three_tags() {
        let spin = encode(&Program::diverging());
        let v = decide(&Query::no_input(&spin), Mode::General, 100, None);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["verdict"], "NotHalts");
    }
}
