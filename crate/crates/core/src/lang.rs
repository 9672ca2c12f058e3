//! The toy register-machine language: instructions, programs, the base-16
//! digit-stream numbering of programs, composition and the code-as-data
//! helpers (`printer_for`, `wrapcode_machine`) used by the fixpoint builder.
//!
//! # Numbering layout
//!
//! A program is written as a little-endian stream of base-16 digits:
//!
//! ```text
//! stream  := arity-digit  nat(len)  instr*len
//! nat(v)  := l d0 d1 .. d(l-1)      l = number of hex digits of v (0 for v = 0),
//!                                   digits little-endian, top digit non-zero;
//!                                   l >= 15 is written as 15 followed by nat(l)
//! reg     := one digit 0..=7
//! offset  := sign-digit (0 = +, 1 = -) nat(|offset|); "-0" is not canonical
//! instr   := opcode-digit operands
//! ```
//!
//! | opcode | instruction      | operands          |
//! |--------|------------------|-------------------|
//! | 0      | `CONST r c`      | reg nat           |
//! | 1      | `INC r`          | reg               |
//! | 2      | `ADDC r c`       | reg nat           |
//! | 3      | `MULC r c`       | reg nat           |
//! | 4      | `DIVC r c`       | reg nat (c >= 1)  |
//! | 5      | `MODC r c`       | reg nat (c >= 1)  |
//! | 6      | `COPY src dst`   | reg reg           |
//! | 7      | `DECJZ r off`    | reg offset        |
//! | 8      | `JMP off`        | offset            |
//! | 9      | `HALT`           |                   |
//! | 10     | `APPLY rn rm`    | reg reg           |
//! | 11     | `ANALYZE rn rm`  | reg reg           |
//! | 12     | `HCALL rn rm`    | reg reg           |
//!
//! The index of a program is `sum(d_i * 16^i) + 16^L` where `L` is the stream
//! length: a sentinel digit `1` sits above the stream so that trailing zero
//! digits survive. Any natural whose top hex digit is not the sentinel, or
//! whose stream does not parse into a well-formed program, decodes to the
//! canonical diverging program `[JMP 0]`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub const DIGIT_BASE: u32 = 16;
pub const REGISTER_COUNT: usize = 8;

const ESCAPE: u8 = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("program has no instructions")]
    Empty,
    #[error("register r{0} out of range (r0..r7)")]
    BadRegister(u64),
    #[error("instruction {at}: jump target {target} outside 0..={len}")]
    JumpOutOfRange { at: usize, target: i64, len: usize },
    #[error("instruction {at}: divisor must be at least 1")]
    ZeroDivisor { at: usize },
}

/// A register name, `r0` through `r7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(u8);

impl Reg {
    pub const R0: Reg = Reg(0);
    pub const R1: Reg = Reg(1);
    pub const R2: Reg = Reg(2);
    pub const R3: Reg = Reg(3);
    pub const R4: Reg = Reg(4);
    pub const R5: Reg = Reg(5);
    pub const R6: Reg = Reg(6);
    pub const R7: Reg = Reg(7);

    pub fn new(n: u64) -> Result<Reg, LangError> {
        if (n as usize) < REGISTER_COUNT {
            Ok(Reg(n as u8))
        } else {
            Err(LangError::BadRegister(n))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instruction {
    Const(Reg, BigUint),
    Inc(Reg),
    AddC(Reg, BigUint),
    MulC(Reg, BigUint),
    /// Floor division by a constant >= 1.
    DivC(Reg, BigUint),
    ModC(Reg, BigUint),
    Copy { src: Reg, dst: Reg },
    /// Jump by `offset` if the register is zero, otherwise decrement it and fall through.
    DecJz(Reg, i64),
    Jmp(i64),
    Halt,
    /// Run program `regs[n]` on input `regs[m]`; its output lands in r0.
    Apply(Reg, Reg),
    /// Ask the analyzer about `(regs[n], regs[m])`.
    Analyze(Reg, Reg),
    /// Ask the decider about `(regs[n], regs[m])`; r0 receives 0 or 1.
    HCall(Reg, Reg),
}

impl Instruction {
    pub fn opcode(&self) -> u8 {
        match self {
            Instruction::Const(..) => 0,
            Instruction::Inc(_) => 1,
            Instruction::AddC(..) => 2,
            Instruction::MulC(..) => 3,
            Instruction::DivC(..) => 4,
            Instruction::ModC(..) => 5,
            Instruction::Copy { .. } => 6,
            Instruction::DecJz(..) => 7,
            Instruction::Jmp(_) => 8,
            Instruction::Halt => 9,
            Instruction::Apply(..) => 10,
            Instruction::Analyze(..) => 11,
            Instruction::HCall(..) => 12,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instruction::Const(..) => "CONST",
            Instruction::Inc(_) => "INC",
            Instruction::AddC(..) => "ADDC",
            Instruction::MulC(..) => "MULC",
            Instruction::DivC(..) => "DIVC",
            Instruction::ModC(..) => "MODC",
            Instruction::Copy { .. } => "COPY",
            Instruction::DecJz(..) => "DECJZ",
            Instruction::Jmp(_) => "JMP",
            Instruction::Halt => "HALT",
            Instruction::Apply(..) => "APPLY",
            Instruction::Analyze(..) => "ANALYZE",
            Instruction::HCall(..) => "HCALL",
        }
    }

    /// Relative jump offset, if this instruction can jump.
    pub fn jump_offset(&self) -> Option<i64> {
        match self {
            Instruction::DecJz(_, off) | Instruction::Jmp(off) => Some(*off),
            _ => None,
        }
    }

    pub fn is_reflective(&self) -> bool {
        matches!(self, Instruction::Analyze(..) | Instruction::HCall(..))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        match self {
            Instruction::Const(r, c)
            | Instruction::AddC(r, c)
            | Instruction::MulC(r, c)
            | Instruction::DivC(r, c)
            | Instruction::ModC(r, c) => write!(f, "{m} {r} {c}"),
            Instruction::Inc(r) => write!(f, "{m} {r}"),
            Instruction::Copy { src, dst } => write!(f, "{m} {src} {dst}"),
            Instruction::DecJz(r, off) => write!(f, "{m} {r} {}", signed(*off)),
            Instruction::Jmp(off) => write!(f, "{m} {}", signed(*off)),
            Instruction::Halt => write!(f, "{m}"),
            Instruction::Apply(a, b) | Instruction::Analyze(a, b) | Instruction::HCall(a, b) => {
                write!(f, "{m} {a} {b}")
            }
        }
    }
}

fn signed(off: i64) -> String {
    if off > 0 {
        format!("+{off}")
    } else {
        off.to_string()
    }
}

/// Whether the input is loaded into r1 before a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arity {
    Zero,
    One,
}

impl Arity {
    fn digit(self) -> u8 {
        match self {
            Arity::Zero => 0,
            Arity::One => 1,
        }
    }
}

/// A well-formed program: non-empty, every jump lands in `0..=len`, every
/// divisor is at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    instrs: Vec<Instruction>,
    arity: Arity,
}

impl Program {
    pub fn new(instrs: Vec<Instruction>, arity: Arity) -> Result<Program, LangError> {
        if instrs.is_empty() {
            return Err(LangError::Empty);
        }
        let len = instrs.len();
        for (at, ins) in instrs.iter().enumerate() {
            if let Some(off) = ins.jump_offset() {
                let target = at as i64 + off;
                if target < 0 || target > len as i64 {
                    return Err(LangError::JumpOutOfRange { at, target, len });
                }
            }
            if let Instruction::DivC(_, c) | Instruction::ModC(_, c) = ins {
                if c.is_zero() {
                    return Err(LangError::ZeroDivisor { at });
                }
            }
        }
        Ok(Program { instrs, arity })
    }

    /// The canonical diverging program `[JMP 0]`.
    pub fn diverging() -> Program {
        Program { instrs: vec![Instruction::Jmp(0)], arity: Arity::Zero }
    }

    pub fn instrs(&self) -> &[Instruction] {
        &self.instrs
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn with_arity(mut self, arity: Arity) -> Program {
        self.arity = arity;
        self
    }

    pub fn contains_reflection(&self) -> bool {
        self.instrs.iter().any(Instruction::is_reflective)
    }

    pub fn index(&self) -> ProgramIndex {
        encode(self)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arity = match self.arity {
            Arity::Zero => 0,
            Arity::One => 1,
        };
        writeln!(f, ";; arity {arity}")?;
        for ins in &self.instrs {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

/// Position of a program in the enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ProgramIndex(pub BigUint);

impl ProgramIndex {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn decode(&self) -> Program {
        decode(self)
    }
}

impl From<u64> for ProgramIndex {
    fn from(v: u64) -> Self {
        ProgramIndex(BigUint::from(v))
    }
}

impl From<BigUint> for ProgramIndex {
    fn from(v: BigUint) -> Self {
        ProgramIndex(v)
    }
}

impl fmt::Display for ProgramIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for ProgramIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

/// Serializes a big natural as a decimal string.
pub fn ser_nat<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

// ----- numbering -----------------------------------------------------------

fn push_nat(out: &mut Vec<u8>, v: &BigUint) {
    let digits = if v.is_zero() { Vec::new() } else { v.to_radix_le(DIGIT_BASE) };
    push_len(out, digits.len());
    out.extend_from_slice(&digits);
}

fn push_len(out: &mut Vec<u8>, l: usize) {
    if l < ESCAPE as usize {
        out.push(l as u8);
    } else {
        out.push(ESCAPE);
        push_nat(out, &BigUint::from(l));
    }
}

fn push_offset(out: &mut Vec<u8>, off: i64) {
    out.push(u8::from(off < 0));
    push_nat(out, &BigUint::from(off.unsigned_abs()));
}

fn push_instr(out: &mut Vec<u8>, ins: &Instruction) {
    out.push(ins.opcode());
    match ins {
        Instruction::Const(r, c)
        | Instruction::AddC(r, c)
        | Instruction::MulC(r, c)
        | Instruction::DivC(r, c)
        | Instruction::ModC(r, c) => {
            out.push(r.0);
            push_nat(out, c);
        }
        Instruction::Inc(r) => out.push(r.0),
        Instruction::Copy { src, dst } => {
            out.push(src.0);
            out.push(dst.0);
        }
        Instruction::DecJz(r, off) => {
            out.push(r.0);
            push_offset(out, *off);
        }
        Instruction::Jmp(off) => push_offset(out, *off),
        Instruction::Halt => {}
        Instruction::Apply(a, b) | Instruction::Analyze(a, b) | Instruction::HCall(a, b) => {
            out.push(a.0);
            out.push(b.0);
        }
    }
}

/// The digit stream of a program, without the sentinel.
pub fn digit_stream(program: &Program) -> Vec<u8> {
    let mut out = vec![program.arity.digit()];
    push_nat(&mut out, &BigUint::from(program.len()));
    for ins in &program.instrs {
        push_instr(&mut out, ins);
    }
    out
}

pub fn encode(program: &Program) -> ProgramIndex {
    let mut digits = digit_stream(program);
    digits.push(1);
    ProgramIndex(BigUint::from_radix_le(&digits, DIGIT_BASE).expect("digits are below the base"))
}

struct Reader<'a> {
    digits: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn digit(&mut self) -> Option<u8> {
        let d = *self.digits.get(self.pos)?;
        self.pos += 1;
        Some(d)
    }

    fn nat(&mut self) -> Option<BigUint> {
        let l = self.len()?;
        if l == 0 {
            return Some(BigUint::zero());
        }
        let end = self.pos.checked_add(l)?;
        let digits = self.digits.get(self.pos..end)?;
        if digits[l - 1] == 0 {
            return None;
        }
        self.pos = end;
        BigUint::from_radix_le(digits, DIGIT_BASE)
    }

    fn len(&mut self) -> Option<usize> {
        let d = self.digit()?;
        if d < ESCAPE {
            return Some(d as usize);
        }
        let l = self.nat()?.to_usize()?;
        // canonical: the escape is only used when the short form cannot be
        (l >= ESCAPE as usize).then_some(l)
    }

    fn reg(&mut self) -> Option<Reg> {
        Reg::new(self.digit()? as u64).ok()
    }

    fn offset(&mut self) -> Option<i64> {
        let sign = self.digit()?;
        let mag = self.nat()?;
        let mag = i64::try_from(mag.to_u64()?).ok()?;
        match sign {
            0 => Some(mag),
            1 if mag > 0 => Some(-mag),
            _ => None,
        }
    }

    fn instr(&mut self) -> Option<Instruction> {
        Some(match self.digit()? {
            0 => Instruction::Const(self.reg()?, self.nat()?),
            1 => Instruction::Inc(self.reg()?),
            2 => Instruction::AddC(self.reg()?, self.nat()?),
            3 => Instruction::MulC(self.reg()?, self.nat()?),
            4 => Instruction::DivC(self.reg()?, self.nat()?),
            5 => Instruction::ModC(self.reg()?, self.nat()?),
            6 => Instruction::Copy { src: self.reg()?, dst: self.reg()? },
            7 => Instruction::DecJz(self.reg()?, self.offset()?),
            8 => Instruction::Jmp(self.offset()?),
            9 => Instruction::Halt,
            10 => Instruction::Apply(self.reg()?, self.reg()?),
            11 => Instruction::Analyze(self.reg()?, self.reg()?),
            12 => Instruction::HCall(self.reg()?, self.reg()?),
            _ => return None,
        })
    }
}

/// Strict decoding: `None` when the natural is not a canonical encoding.
pub fn try_decode(index: &ProgramIndex) -> Option<Program> {
    let mut digits = index.0.to_radix_le(DIGIT_BASE);
    if digits.pop() != Some(1) {
        return None;
    }
    let mut r = Reader { digits: &digits, pos: 0 };
    let arity = match r.digit()? {
        0 => Arity::Zero,
        1 => Arity::One,
        _ => return None,
    };
    let count = r.nat()?.to_usize()?;
    // every instruction takes at least one digit
    if count > digits.len() {
        return None;
    }
    let mut instrs = Vec::with_capacity(count);
    for _ in 0..count {
        instrs.push(r.instr()?);
    }
    if r.pos != digits.len() {
        return None;
    }
    Program::new(instrs, arity).ok()
}

/// Total decoding: invalid encodings become `[JMP 0]`.
pub fn decode(index: &ProgramIndex) -> Program {
    try_decode(index).unwrap_or_else(Program::diverging)
}

pub fn decode_shared(index: &ProgramIndex) -> Arc<Program> {
    Arc::new(decode(index))
}

// ----- composition ---------------------------------------------------------

/// `first` then `second` on shared registers: `first`'s HALTs jump to the
/// start of `second`. The result keeps `first`'s arity.
pub fn compose(first: &Program, second: &Program) -> Program {
    let n = first.len() as i64;
    let mut instrs: Vec<Instruction> = first
        .instrs
        .iter()
        .enumerate()
        .map(|(at, ins)| match ins {
            Instruction::Halt => Instruction::Jmp(n - at as i64),
            other => other.clone(),
        })
        .collect();
    instrs.extend(second.instrs.iter().cloned());
    Program { instrs, arity: first.arity }
}

/// Straight-line, arity-0 program leaving `code` in r0 (Horner over base-16
/// digits) and a copy in r1, where a composed successor expects its input.
/// It has no HALT and is meant to be composed.
pub fn printer_for(code: &BigUint) -> Program {
    let digits = if code.is_zero() { vec![0u8] } else { code.to_radix_be(DIGIT_BASE) };
    let mut instrs = Vec::with_capacity(2 * digits.len());
    instrs.push(Instruction::Const(Reg::R0, BigUint::from(digits[0])));
    for &d in &digits[1..] {
        instrs.push(Instruction::MulC(Reg::R0, BigUint::from(DIGIT_BASE)));
        instrs.push(Instruction::AddC(Reg::R0, BigUint::from(d)));
    }
    instrs.push(Instruction::Copy { src: Reg::R0, dst: Reg::R1 });
    Program { instrs, arity: Arity::Zero }
}

// ----- label assembler -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label(usize);

enum Slot {
    Fixed(Instruction),
    Jmp(Label),
    DecJz(Reg, Label),
}

/// Small assembler with symbolic labels, resolved to relative offsets.
#[derive(Default)]
pub struct Assembler {
    slots: Vec<Slot>,
    labels: Vec<Option<usize>>,
}

impl Assembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn label(&mut self) -> Label {
        self.labels.push(None);
        Label(self.labels.len() - 1)
    }

    pub fn bind(&mut self, label: Label) {
        self.labels[label.0] = Some(self.slots.len());
    }

    pub fn here(&self) -> usize {
        self.slots.len()
    }

    pub fn emit(&mut self, ins: Instruction) -> &mut Self {
        self.slots.push(Slot::Fixed(ins));
        self
    }

    pub fn jmp(&mut self, to: Label) -> &mut Self {
        self.slots.push(Slot::Jmp(to));
        self
    }

    pub fn decjz(&mut self, reg: Reg, to: Label) -> &mut Self {
        self.slots.push(Slot::DecJz(reg, to));
        self
    }

    pub fn konst(&mut self, reg: Reg, c: u64) -> &mut Self {
        self.emit(Instruction::Const(reg, BigUint::from(c)))
    }

    pub fn addc(&mut self, reg: Reg, c: u64) -> &mut Self {
        self.emit(Instruction::AddC(reg, BigUint::from(c)))
    }

    pub fn mulc(&mut self, reg: Reg, c: u64) -> &mut Self {
        self.emit(Instruction::MulC(reg, BigUint::from(c)))
    }

    pub fn divc(&mut self, reg: Reg, c: u64) -> &mut Self {
        self.emit(Instruction::DivC(reg, BigUint::from(c)))
    }

    pub fn modc(&mut self, reg: Reg, c: u64) -> &mut Self {
        self.emit(Instruction::ModC(reg, BigUint::from(c)))
    }

    pub fn copy(&mut self, src: Reg, dst: Reg) -> &mut Self {
        self.emit(Instruction::Copy { src, dst })
    }

    pub fn inc(&mut self, reg: Reg) -> &mut Self {
        self.emit(Instruction::Inc(reg))
    }

    /// Resolves labels. Panics on an unbound label, which is a construction bug.
    pub fn finish(self, arity: Arity) -> Result<Program, LangError> {
        let labels = self.labels;
        let resolve = |at: usize, l: Label| {
            let target = labels[l.0].expect("unbound label");
            target as i64 - at as i64
        };
        let instrs = self
            .slots
            .into_iter()
            .enumerate()
            .map(|(at, slot)| match slot {
                Slot::Fixed(ins) => ins,
                Slot::Jmp(l) => Instruction::Jmp(resolve(at, l)),
                Slot::DecJz(r, l) => Instruction::DecJz(r, resolve(at, l)),
            })
            .collect();
        Program::new(instrs, arity)
    }
}

// ----- wrapcode machine ----------------------------------------------------

// Field values of the printer instructions, read as little-endian digit runs.
// MULC r0 16   -> digits 3 0 | 2 0 1          (5 digits)
// ADDC r0 d>0  -> digits 2 0 | 1 d            (4 digits)
// ADDC r0 0    -> digits 2 0 | 0              (3 digits)
// CONST r0 d>0 -> digits 0 0 | 1 d            (4 digits)
// CONST r0 0   -> digits 0 0 | 0              (3 digits)
// COPY r0 r1   -> digits 6 0 1                (3 digits)
const COPY01_FIELD: u64 = 6 + 256;
const MULC16_FIELD: u64 = 3 + 2 * 256 + 65536;
const SHIFT3: u64 = 16 * 16 * 16;
const SHIFT4: u64 = SHIFT3 * 16;
const SHIFT5: u64 = SHIFT4 * 16;

/// Arity-1 program that maps `w = encode(M)` to
/// `encode(compose(printer_for(w), M))` in r0, entirely with digit loops. It
/// has no HALT: control falls off the end so that it can be composed.
///
/// Domain: canonical encodings whose instruction count and combined count
/// stay below 16^14 (the short length form).
pub fn wrapcode_machine() -> Program {
    use Reg as R;
    let (w, acc, count, t4, t5, t6, t7) = (R::R2, R::R1, R::R3, R::R4, R::R5, R::R6, R::R7);
    let mut a = Assembler::new();

    // keep w for the printer section; r1 becomes the body accumulator
    a.copy(R::R1, w);
    a.divc(acc, 16); // drop arity digit
    a.copy(acc, t4).modc(t4, 16).divc(acc, 16); // t4 = digit-length of the count

    // count = nat read little-endian, t5 = place value
    a.konst(count, 0).konst(t5, 1);
    let read_loop = a.label();
    let read_done = a.label();
    a.bind(read_loop);
    a.decjz(t4, read_done);
    a.copy(acc, t6).modc(t6, 16).divc(acc, 16);
    let digit_loop = a.label();
    let digit_done = a.label();
    a.bind(digit_loop);
    a.decjz(t6, digit_done);
    a.copy(t5, t7);
    let add_loop = a.label();
    a.bind(add_loop);
    a.decjz(t7, digit_loop);
    a.inc(count);
    a.jmp(add_loop);
    a.bind(digit_done);
    a.mulc(t5, 16);
    a.jmp(read_loop);
    a.bind(read_done);

    // acc = instruction fields of M plus sentinel; prepend the printer fields
    // from the last printer instruction back to the first.
    a.mulc(acc, SHIFT3).addc(acc, COPY01_FIELD).inc(count);
    let pr_loop = a.label();
    let pr_last = a.label();
    a.bind(pr_loop);
    a.copy(w, t4).divc(t4, 16);
    a.decjz(t4, pr_last);
    a.copy(w, t6).modc(t6, 16);
    emit_digit_field(&mut a, acc, t6, 2);
    a.mulc(acc, SHIFT5).addc(acc, MULC16_FIELD);
    a.inc(count).inc(count);
    a.divc(w, 16);
    a.jmp(pr_loop);
    a.bind(pr_last);
    emit_digit_field(&mut a, acc, w, 0);
    a.inc(count);

    // prepend nat(count): reverse its digits into t5, t4 = digit length
    a.konst(t4, 0).konst(t5, 0);
    let rev_loop = a.label();
    let rev_done = a.label();
    a.bind(rev_loop);
    a.decjz(count, rev_done);
    a.inc(count).inc(t4);
    a.copy(count, t6).modc(t6, 16).divc(count, 16);
    a.mulc(t5, 16);
    let rev_add = a.label();
    a.bind(rev_add);
    a.decjz(t6, rev_loop);
    a.inc(t5);
    a.jmp(rev_add);
    a.bind(rev_done);

    a.copy(t4, t7);
    let emit_loop = a.label();
    let emit_done = a.label();
    a.bind(emit_loop);
    a.decjz(t7, emit_done);
    a.copy(t5, t6).modc(t6, 16).divc(t5, 16);
    a.mulc(acc, 16);
    let emit_add = a.label();
    a.bind(emit_add);
    a.decjz(t6, emit_loop);
    a.inc(acc);
    a.jmp(emit_add);
    a.bind(emit_done);

    a.mulc(acc, 16);
    let len_add = a.label();
    let len_done = a.label();
    a.bind(len_add);
    a.decjz(t4, len_done);
    a.inc(acc);
    a.jmp(len_add);
    a.bind(len_done);

    // arity digit 0, result to r0
    a.mulc(acc, 16);
    a.copy(acc, R::R0);
    a.finish(Arity::One).expect("wrapcode machine is well-formed")
}

/// Prepends the field `opcode r0 nat(d)` where `d` (0..=15) sits in `digit`,
/// consuming `digit`. Dispatches on `d` with a DECJZ chain.
fn emit_digit_field(a: &mut Assembler, acc: Reg, digit: Reg, opcode: u64) {
    let zero = a.label();
    let done = a.label();
    let cases: Vec<Label> = (0..15).map(|_| a.label()).collect();
    a.decjz(digit, zero);
    for case in &cases[..14] {
        a.decjz(digit, *case);
    }
    a.jmp(cases[14]);
    // cases[i] handles d = i + 1
    for (i, case) in cases.iter().enumerate() {
        let d = i as u64 + 1;
        a.bind(*case);
        a.mulc(acc, SHIFT4).addc(acc, opcode + 256 + d * SHIFT3);
        a.jmp(done);
    }
    a.bind(zero);
    a.mulc(acc, SHIFT3).addc(acc, opcode);
    a.bind(done);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(instrs: Vec<Instruction>) -> Program {
        Program::new(instrs, Arity::Zero).unwrap()
    }

    #[test]
    fn halt_golden_value() {
        // stream 0 | 1 1 | 9, sentinel above: 0x19110
        assert_eq!(encode(&prog(vec![Instruction::Halt])).0, BigUint::from(0x19110u32));
    }

    #[test]
    fn small_naturals_are_invalid() {
        assert_eq!(decode(&ProgramIndex::from(7)), Program::diverging());
        assert_eq!(decode(&ProgramIndex::from(0)), Program::diverging());
        assert!(try_decode(&ProgramIndex::from(1)).is_none());
    }

    #[test]
    fn decode_zero_reencodes_canonically() {
        let p = decode(&ProgramIndex::from(0));
        assert_eq!(encode(&p), encode(&Program::diverging()));
        assert_ne!(encode(&p), ProgramIndex::from(0));
    }

    #[test]
    fn distinct_programs_distinct_indices() {
        let a = prog(vec![Instruction::Halt]);
        let b = prog(vec![Instruction::Inc(Reg::R0), Instruction::Halt]);
        assert_ne!(encode(&a), encode(&b));
    }

    #[test]
    fn compose_rewrites_halt() {
        let h = prog(vec![Instruction::Halt]);
        assert_eq!(compose(&h, &h).instrs(), &[Instruction::Jmp(1), Instruction::Halt]);
    }

    #[test]
    fn rejects_bad_jumps_and_divisors() {
        assert!(matches!(
            Program::new(vec![Instruction::Jmp(2)], Arity::Zero),
            Err(LangError::JumpOutOfRange { .. })
        ));
        assert!(Program::new(vec![Instruction::Jmp(1)], Arity::Zero).is_ok());
        assert!(matches!(
            Program::new(vec![Instruction::DivC(Reg::R0, BigUint::zero())], Arity::Zero),
            Err(LangError::ZeroDivisor { at: 0 })
        ));
        assert_eq!(Program::new(vec![], Arity::Zero), Err(LangError::Empty));
    }

    #[test]
    fn long_constants_use_the_escape() {
        let big = BigUint::from(1u8) << 200u32;
        let p = prog(vec![Instruction::Const(Reg::R3, big), Instruction::Halt]);
        assert_eq!(decode(&encode(&p)), p);
    }

    #[test]
    fn printer_lengths() {
        assert_eq!(printer_for(&BigUint::zero()).len(), 2);
        assert_eq!(printer_for(&BigUint::from(0xabcu32)).len(), 6);
    }

    #[test]
    fn wrapcode_has_no_calls_or_halt() {
        let w = wrapcode_machine();
        assert!(w
            .instrs()
            .iter()
            .all(|i| !matches!(i, Instruction::Halt | Instruction::Apply(..)) && !i.is_reflective()));
    }

    #[test]
    fn wrapcode_on_halt_matches_meta_level() {
        use crate::machine::{run_program, Context};
        let m = prog(vec![Instruction::Inc(Reg::R0), Instruction::Halt]);
        let w = encode(&m);
        let want = encode(&compose(&printer_for(&w.0), &m));
        // falling off the end is the implicit halt
        let out = run_program(&Context::default(), &wrapcode_machine(), Some(&w.0), 1_000_000);
        assert_eq!(out.output(), Some(&want.0));
    }
}
