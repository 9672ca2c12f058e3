#![allow(dead_code)]

use halting_core::lang::{Arity, Instruction, Program, Reg};
use num_bigint::BigUint;
use proptest::prelude::*;

fn reg() -> impl Strategy<Value = Reg> {
    (0u64..8).prop_map(|r| Reg::new(r).unwrap())
}

fn small() -> impl Strategy<Value = BigUint> {
    prop_oneof![4 => (0u64..20).prop_map(BigUint::from), 1 => any::<u64>().prop_map(BigUint::from)]
}

fn nonzero() -> impl Strategy<Value = BigUint> {
    small().prop_map(|c| if c == BigUint::from(0u8) { BigUint::from(1u8) } else { c })
}

/// Instruction shape with the jump target still relative to `len`.
#[derive(Debug, Clone)]
enum Raw {
    Plain(Instruction),
    Jmp(usize),
    DecJz(Reg, usize),
}

fn raw(max_len: usize, reflective: bool) -> impl Strategy<Value = Raw> {
    let target = 0..=max_len;
    let base = prop_oneof![
        (reg(), small()).prop_map(|(r, c)| Raw::Plain(Instruction::Const(r, c))),
        reg().prop_map(|r| Raw::Plain(Instruction::Inc(r))),
        (reg(), small()).prop_map(|(r, c)| Raw::Plain(Instruction::AddC(r, c))),
        (reg(), small()).prop_map(|(r, c)| Raw::Plain(Instruction::MulC(r, c))),
        (reg(), nonzero()).prop_map(|(r, c)| Raw::Plain(Instruction::DivC(r, c))),
        (reg(), nonzero()).prop_map(|(r, c)| Raw::Plain(Instruction::ModC(r, c))),
        (reg(), reg()).prop_map(|(src, dst)| Raw::Plain(Instruction::Copy { src, dst })),
        (reg(), target.clone()).prop_map(|(r, t)| Raw::DecJz(r, t)),
        target.prop_map(Raw::Jmp),
        Just(Raw::Plain(Instruction::Halt)),
    ];
    if reflective {
        prop_oneof![
            8 => base,
            1 => (reg(), reg()).prop_map(|(a, b)| Raw::Plain(Instruction::Apply(a, b))),
            1 => (reg(), reg()).prop_map(|(a, b)| Raw::Plain(Instruction::Analyze(a, b))),
            1 => (reg(), reg()).prop_map(|(a, b)| Raw::Plain(Instruction::HCall(a, b))),
        ]
        .boxed()
    } else {
        base.boxed()
    }
}

fn assemble(raws: Vec<Raw>, arity: Arity) -> Program {
    let len = raws.len();
    let instrs = raws
        .into_iter()
        .enumerate()
        .map(|(pc, r)| match r {
            Raw::Plain(i) => i,
            Raw::Jmp(t) => Instruction::Jmp(t.min(len) as i64 - pc as i64),
            Raw::DecJz(reg, t) => Instruction::DecJz(reg, t.min(len) as i64 - pc as i64),
        })
        .collect();
    Program::new(instrs, arity).expect("generated program is well-formed")
}

fn arity() -> impl Strategy<Value = Arity> {
    prop_oneof![Just(Arity::Zero), Just(Arity::One)]
}

/// Well-formed programs of up to `max_len` instructions without reflective
/// instructions.
pub fn plain_program(max_len: usize) -> impl Strategy<Value = Program> {
    (prop::collection::vec(raw(max_len, false), 1..=max_len), arity()).prop_map(|(r, a)| assemble(r, a))
}

/// Well-formed programs that may also call, analyze, or decide.
pub fn any_program(max_len: usize) -> impl Strategy<Value = Program> {
    (prop::collection::vec(raw(max_len, true), 1..=max_len), arity()).prop_map(|(r, a)| assemble(r, a))
}
