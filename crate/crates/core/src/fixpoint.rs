//! The recursion-theorem construction `R = P_<B∘T> ∘ B ∘ T` and the gallery
//! of self-referential programs built with it.

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::analyzer::{Designated, Mode};
use crate::lang::{compose, encode, printer_for, wrapcode_machine, Arity, Instruction, Program, ProgramIndex, Reg};
use crate::machine::{run_program, Configuration, Context, Event, Executor, RunOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixpointError {
    #[error("template must have arity 1 (input in r1)")]
    NotArityOne,
    #[error("template instruction {at} is {mnemonic}; reflective templates cannot be checked against their fixpoint")]
    Reflective { at: usize, mnemonic: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpointResult {
    pub template: Program,
    pub program: Program,
    pub index: ProgramIndex,
    /// Offset of the template's first instruction inside `program`.
    pub body_offset: usize,
}

/// Moves the pipeline's value from r0 to r1 and clears everything else, so
/// the template starts exactly as if it had been given that input.
fn adapt(template: &Program) -> Program {
    let mut instrs = vec![
        Instruction::Copy { src: Reg::R0, dst: Reg::R1 },
        Instruction::Const(Reg::R0, BigUint::from(0u8)),
    ];
    for r in [Reg::R2, Reg::R3, Reg::R4, Reg::R5, Reg::R6, Reg::R7] {
        instrs.push(Instruction::Const(r, BigUint::from(0u8)));
    }
    let head = Program::new(instrs, Arity::One).expect("straight-line head is well-formed");
    compose(&head, template)
}

/// Builds `R` with `R() = T(encode(R))`.
pub fn construct_fixpoint(template: &Program) -> Result<FixpointResult, FixpointError> {
    if template.arity() != Arity::One {
        return Err(FixpointError::NotArityOne);
    }
    if let Some((at, ins)) = template.instrs().iter().enumerate().find(|(_, i)| i.is_reflective()) {
        return Err(FixpointError::Reflective { at, mnemonic: ins.mnemonic() });
    }
    let adapted = adapt(template);
    let bt = compose(&wrapcode_machine(), &adapted);
    let printer = printer_for(&encode(&bt).0);
    let body_offset = printer.len() + bt.len() - template.len();
    let program = compose(&printer, &bt);
    let index = encode(&program);
    Ok(FixpointResult { template: template.clone(), program, index, body_offset })
}

/// Root frames agree up to the pc offset; deeper frames agree exactly.
fn matched(r: &Configuration, t: &Configuration, offset: usize) -> bool {
    if r.frames.len() != t.frames.len() {
        return false;
    }
    let (r0, t0) = (&r.frames[0], &t.frames[0]);
    r0.pc == t0.pc + offset && r0.regs == t0.regs && r.frames[1..] == t.frames[1..]
}

/// Checks `R() = T(r)`: equal outputs if both halt within `fuel`, otherwise
/// step-by-step agreement once `R` has finished its self-printing prefix.
pub fn verify_fixpoint(result: &FixpointResult, fuel: u64) -> bool {
    if encode(&result.program) != result.index {
        return false;
    }
    let ctx = Context::default();
    let r_run = run_program(&ctx, &result.program, None, fuel);
    let t_run = run_program(&ctx, &result.template, Some(&result.index.0), fuel);
    match (&r_run, &t_run) {
        (RunOutcome::Halted { output: a, .. }, RunOutcome::Halted { output: b, .. }) => a == b,
        (RunOutcome::FuelExhausted { .. }, RunOutcome::FuelExhausted { .. }) => lockstep(result, fuel),
        _ => false,
    }
}

fn lockstep(result: &FixpointResult, fuel: u64) -> bool {
    let mut r = Executor::for_program(&result.program, None);
    while r.config().depth() > 1 || r.config().pc() != result.body_offset {
        if r.instructions() >= fuel || !matches!(r.step(), Event::Stepped) {
            return false;
        }
    }
    let mut t = Executor::for_program(&result.template, Some(&result.index.0));
    let start = r.instructions();
    while r.instructions() < fuel.max(start + 1) {
        if !matched(r.config(), t.config(), result.body_offset) {
            return false;
        }
        match (r.step(), t.step()) {
            // from the same reflective call on, both runs are the same run
            (Event::Reflect { kind: a, query: x }, Event::Reflect { kind: b, query: y }) => {
                return a == b && x == y
            }
            (a, b) if a != b => return false,
            (Event::Halted(_), _) => return true,
            _ => {}
        }
    }
    true
}

/// Templates with known meaning: constant 42, identity, successor, doubler,
/// and hex-digit length of the input.
pub fn template_family() -> Vec<(&'static str, Program)> {
    use crate::lang::Assembler;
    let digit_length = {
        let mut a = Assembler::new();
        let (top, done) = (a.label(), a.label());
        a.bind(top);
        a.copy(Reg::R1, Reg::R2);
        a.decjz(Reg::R2, done);
        a.inc(Reg::R0).divc(Reg::R1, 16);
        a.jmp(top);
        a.bind(done);
        a.emit(Instruction::Halt);
        a.finish(Arity::One).expect("digit-length template")
    };
    let c = |v: u64| BigUint::from(v);
    vec![
        ("constant", arity1(vec![Instruction::Const(Reg::R0, c(42)), Instruction::Halt])),
        ("identity", arity1(vec![Instruction::Copy { src: Reg::R1, dst: Reg::R0 }, Instruction::Halt])),
        (
            "successor",
            arity1(vec![Instruction::Copy { src: Reg::R1, dst: Reg::R0 }, Instruction::Inc(Reg::R0), Instruction::Halt]),
        ),
        (
            "doubler",
            arity1(vec![
                Instruction::Copy { src: Reg::R1, dst: Reg::R0 },
                Instruction::MulC(Reg::R0, c(2)),
                Instruction::Halt,
            ]),
        ),
        ("digit-length", digit_length),
    ]
}

#[derive(Debug, Clone)]
pub struct DiagonalGallery {
    pub mode: Mode,
    pub k: ProgramIndex,
    pub s: ProgramIndex,
    pub p: ProgramIndex,
    pub q: ProgramIndex,
    pub b: ProgramIndex,
    pub c_k: Program,
    pub c_s: FixpointResult,
    pub c_p: Program,
    pub c_q: FixpointResult,
    pub c_b: Program,
}

fn arity1(instrs: Vec<Instruction>) -> Program {
    Program::new(instrs, Arity::One).expect("gallery program is well-formed")
}

/// `[CONST r2 callee, APPLY r2 r1, ...tail]`
fn call_template(callee: &ProgramIndex, tail: Vec<Instruction>) -> Program {
    let mut instrs = vec![Instruction::Const(Reg::R2, callee.0.clone()), Instruction::Apply(Reg::R2, Reg::R1)];
    instrs.extend(tail);
    arity1(instrs)
}

pub fn build_gallery(mode: Mode) -> DiagonalGallery {
    let c_k = arity1(vec![Instruction::Analyze(Reg::R1, Reg::R1), Instruction::Halt]);
    let k = encode(&c_k);
    let c_s = construct_fixpoint(&call_template(&k, vec![Instruction::Halt])).expect("T_s is plain");

    let c_p = arity1(vec![Instruction::HCall(Reg::R1, Reg::R1), Instruction::Halt]);
    let p = encode(&c_p);
    // if C_p(q) = 0 then halt else loop
    let t_q = call_template(&p, vec![Instruction::DecJz(Reg::R0, 2), Instruction::Jmp(0), Instruction::Halt]);
    let c_q = construct_fixpoint(&t_q).expect("T_q is plain");

    let c_b = call_template(&c_s.index, vec![Instruction::Halt]);
    let b = encode(&c_b);
    DiagonalGallery {
        mode,
        s: c_s.index.clone(),
        q: c_q.index.clone(),
        k,
        p,
        b,
        c_k,
        c_s,
        c_p,
        c_q,
        c_b,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub name: &'static str,
    pub role: &'static str,
    pub index: String,
    pub index_hex_digits: usize,
    pub instructions: usize,
    pub assembly: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GalleryManifest {
    pub mode: Mode,
    pub programs: Vec<ManifestEntry>,
}

impl DiagonalGallery {
    pub fn designated(&self) -> Designated {
        Designated { k: self.k.clone(), s: self.s.clone(), p: self.p.clone(), q: self.q.clone() }
    }

    pub fn programs(&self) -> [(&'static str, &'static str, &ProgramIndex, &Program); 5] {
        [
            ("k", "C_k(n) = A(n, n)", &self.k, &self.c_k),
            ("s", "C_s() = C_k(s)", &self.s, &self.c_s.program),
            ("p", "C_p(n) = H(n, n)", &self.p, &self.c_p),
            ("q", "C_q() = if C_p(q) = 0 then halt else loop", &self.q, &self.c_q.program),
            ("b", "C_b(n) = C_s(n)", &self.b, &self.c_b),
        ]
    }

    pub fn manifest(&self) -> GalleryManifest {
        let programs = self
            .programs()
            .into_iter()
            .map(|(name, role, index, program)| ManifestEntry {
                name,
                role,
                index: index.0.to_string(),
                index_hex_digits: index.0.to_str_radix(16).len(),
                instructions: program.len(),
                assembly: program.to_string(),
            })
            .collect();
        GalleryManifest { mode: self.mode, programs }
    }
}
