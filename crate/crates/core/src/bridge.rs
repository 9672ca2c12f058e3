//! Searchers for decidable predicates: `Prog_P` halts iff some `x` has `P(x)`.
//! Relates bounded brute-force truth of `∃x P(x)` to the decider's verdict.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::analyzer::{Mode, Query};
use crate::decider::{decide, Class, Verdict3};
use crate::lang::{encode, Arity, Assembler, Instruction, Program, ProgramIndex, Reg};
use crate::machine::{emulate, run_program, Context, Event, Executor, RunOutcome};
use crate::trivalent::{verdict_to_truth, NecessitationRow, Polarity, TruthValue3};

/// Arity-1 program answering 0 (false) or 1 (true) for the input in r1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateProgram {
    pub name: String,
    pub program: Program,
    /// Asserted by the caller: halts on every input with output 0 or 1.
    pub certified_total: bool,
}

impl PredicateProgram {
    pub fn new(name: impl Into<String>, program: Program, certified_total: bool) -> Self {
        PredicateProgram { name: name.into(), program, certified_total }
    }

    pub fn index(&self) -> ProgramIndex {
        encode(&self.program)
    }

    /// `Some(bool)` if the predicate answers 0 or 1 on `x` within `fuel`.
    pub fn eval(&self, x: u64, fuel: u64) -> Option<bool> {
        match run_program(&Context::default(), &self.program, Some(&BigUint::from(x)), fuel) {
            RunOutcome::Halted { output, .. } => match output.to_u64() {
                Some(0) => Some(false),
                Some(1) => Some(true),
                _ => None,
            },
            RunOutcome::FuelExhausted { .. } => None,
        }
    }
}

fn searcher(pred: &PredicateProgram, halt_arm: Instruction) -> Program {
    let (p, x) = (Reg::R2, Reg::R3);
    let instrs = vec![
        Instruction::Const(p, pred.index().0),
        Instruction::Const(x, BigUint::zero()),
        Instruction::Apply(p, x),
        Instruction::DecJz(Reg::R0, 3),
        Instruction::Copy { src: x, dst: Reg::R0 },
        halt_arm,
        Instruction::Inc(x),
        Instruction::Jmp(-5),
    ];
    Program::new(instrs, Arity::Zero).expect("searcher layout is well-formed")
}

/// `x := 0; loop { if P(x) halt with x; x := x + 1 }`
pub fn make_searcher(pred: &PredicateProgram) -> Program {
    searcher(pred, Instruction::Halt)
}

/// The same loop with the halting arm replaced by `JMP 0`: no HALT is
/// reachable whatever the predicate says.
pub fn make_halt_free_searcher(pred: &PredicateProgram) -> Program {
    searcher(pred, Instruction::Jmp(0))
}

/// Number of predicate calls the searcher makes within `fuel` steps.
pub fn count_predicate_calls(searcher: &Program, fuel: u64) -> u64 {
    let mut exec = Executor::for_program(searcher, None);
    let mut calls = 0;
    while exec.instructions() < fuel {
        match exec.step() {
            Event::Called { depth: 1 } => calls += 1,
            Event::Halted(_) | Event::Reflect { .. } => break,
            _ => {}
        }
    }
    calls
}

fn assemble(build: impl FnOnce(&mut Assembler)) -> Program {
    let mut a = Assembler::new();
    build(&mut a);
    a.finish(Arity::One).expect("predicate is well-formed")
}

/// Ends with `r0 := 1` at `yes`, `r0 := 0` at `no`.
fn verdict_tail(a: &mut Assembler, yes: crate::lang::Label, no: crate::lang::Label) {
    a.bind(no);
    a.konst(Reg::R0, 0).emit(Instruction::Halt);
    a.bind(yes);
    a.konst(Reg::R0, 1).emit(Instruction::Halt);
}

pub fn pred_equals(c: u64) -> PredicateProgram {
    let program = assemble(|a| {
        let (yes, no) = (a.label(), a.label());
        for _ in 0..c {
            a.decjz(Reg::R1, no);
        }
        a.decjz(Reg::R1, yes);
        a.jmp(no);
        verdict_tail(a, yes, no);
    });
    PredicateProgram::new(format!("x = {c}"), program, true)
}

pub fn pred_at_least(c: u64) -> PredicateProgram {
    let program = assemble(|a| {
        let (yes, no) = (a.label(), a.label());
        a.divc(Reg::R1, c.max(1));
        a.decjz(Reg::R1, no);
        a.jmp(yes);
        verdict_tail(a, yes, no);
    });
    PredicateProgram::new(format!("x >= {c}"), program, true)
}

/// `x mod m = r`
pub fn pred_residue(m: u64, r: u64) -> PredicateProgram {
    let program = assemble(|a| {
        let (yes, no) = (a.label(), a.label());
        a.modc(Reg::R1, m);
        for _ in 0..r {
            a.decjz(Reg::R1, no);
        }
        a.decjz(Reg::R1, yes);
        a.jmp(no);
        verdict_tail(a, yes, no);
    });
    let name = match (m, r) {
        (2, 0) => "x even".to_string(),
        (2, 1) => "x odd".to_string(),
        _ => format!("x mod {m} = {r}"),
    };
    PredicateProgram::new(name, program, true)
}

pub fn pred_constant(value: bool) -> PredicateProgram {
    let program = Program::new(
        vec![Instruction::Const(Reg::R0, BigUint::from(value as u8)), Instruction::Halt],
        Arity::One,
    )
    .expect("constant predicate");
    PredicateProgram::new(if value { "true" } else { "false" }, program, true)
}

/// Equality tests, parity, thresholds, a residue class, and both constants.
pub fn predicate_family() -> Vec<PredicateProgram> {
    vec![
        pred_equals(0),
        pred_equals(3),
        pred_equals(5),
        pred_residue(2, 0),
        pred_residue(2, 1),
        pred_at_least(7),
        pred_at_least(12),
        pred_residue(3, 2),
        pred_constant(true),
        pred_constant(false),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    /// No witness below the bound yet a non-halting certificate: correct only
    /// if the predicate really is unsatisfiable, which needs a human look.
    ManualAudit,
    /// A witness exists but the decider ran out of fuel.
    Undetermined,
    /// A witness exists and the decider certified non-halting, or a halt
    /// output is not a witness: a soundness bug.
    Inconsistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub predicate: String,
    pub witness_bound: u64,
    pub witness: Option<u64>,
    /// Inputs below the bound on which the predicate did not answer 0/1.
    pub ill_behaved_inputs: Vec<u64>,
    pub verdict: Verdict3,
    pub consistency: Consistency,
    /// ("Prog_P halts", "∃x P(x)" as far as witnessed)
    pub row: NecessitationRow,
}

impl CorrespondenceReport {
    pub fn hard_failure(&self) -> bool {
        self.consistency == Consistency::Inconsistent
    }
}

const PREDICATE_FUEL: u64 = 10_000;

pub fn correspondence_check(pred: &PredicateProgram, witness_bound: u64, fuel: u64) -> CorrespondenceReport {
    let mut witness = None;
    let mut ill_behaved = Vec::new();
    for x in 0..witness_bound.max(1) {
        match pred.eval(x, PREDICATE_FUEL) {
            Some(true) if witness.is_none() => witness = Some(x),
            Some(_) => {}
            None => ill_behaved.push(x),
        }
    }
    let searcher = encode(&make_searcher(pred));
    let verdict = decide(&Query::no_input(&searcher), Mode::General, fuel, None);
    let consistency = match (&verdict, witness) {
        (Verdict3::Halts { output, .. }, Some(w)) if *output == BigUint::from(w) => Consistency::Consistent,
        (Verdict3::Halts { output, .. }, None) => {
            let beyond = output.to_u64().filter(|&x| x >= witness_bound);
            if beyond.and_then(|x| pred.eval(x, PREDICATE_FUEL)) == Some(true) {
                Consistency::Consistent
            } else {
                Consistency::Inconsistent
            }
        }
        (Verdict3::Halts { .. }, Some(_)) | (Verdict3::NotHalts { .. }, Some(_)) => Consistency::Inconsistent,
        (Verdict3::NotHalts { .. }, None) => Consistency::ManualAudit,
        (Verdict3::Unknown { .. }, Some(_)) => Consistency::Undetermined,
        (Verdict3::Unknown { .. }, None) => Consistency::Consistent,
    };
    // a halting searcher's output is itself a checked witness
    let witnessed = witness.is_some() || (verdict.class() == Class::Halts && consistency == Consistency::Consistent);
    let exists = if witnessed { TruthValue3::T } else { TruthValue3::F };
    let row = NecessitationRow::new(verdict_to_truth(&verdict, Polarity::Halts), exists);
    CorrespondenceReport {
        predicate: pred.name.clone(),
        witness_bound,
        witness,
        ill_behaved_inputs: ill_behaved,
        verdict,
        consistency,
        row,
    }
}

/// Verdict on the halt-free searcher of `pred`.
pub fn halt_free_verdict(pred: &PredicateProgram, fuel: u64) -> Verdict3 {
    let searcher = encode(&make_halt_free_searcher(pred));
    decide(&Query::no_input(&searcher), Mode::General, fuel, None)
}

/// Plain emulation of the searcher, for cross-checking.
pub fn run_searcher(pred: &PredicateProgram, fuel: u64) -> RunOutcome {
    emulate(&encode(&make_searcher(pred)), None, fuel)
}
