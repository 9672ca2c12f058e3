//! Assembly text format: one instruction per line, `#` comments, optional
//! `;; arity N` header.
//!
//! ```text
//! ;; arity 1
//! CONST r0 5     # set
//! DECJZ r2 -3
//! APPLY r1 r1
//! HALT
//! ```

use num_bigint::BigUint;
use thiserror::Error;

use crate::lang::{Arity, Instruction, LangError, Program, Reg};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Program(#[from] LangError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, message: message.into() }
}

fn reg(line: usize, tok: &str) -> Result<Reg, ParseError> {
    let n = tok
        .strip_prefix('r')
        .or_else(|| tok.strip_prefix('R'))
        .and_then(|d| d.parse::<u64>().ok())
        .ok_or_else(|| syntax(line, format!("expected register, found `{tok}`")))?;
    Reg::new(n).map_err(|e| syntax(line, e.to_string()))
}

fn nat(line: usize, tok: &str) -> Result<BigUint, ParseError> {
    tok.parse::<BigUint>().map_err(|_| syntax(line, format!("expected natural, found `{tok}`")))
}

fn offset(line: usize, tok: &str) -> Result<i64, ParseError> {
    tok.strip_prefix('+')
        .unwrap_or(tok)
        .parse::<i64>()
        .map_err(|_| syntax(line, format!("expected signed offset, found `{tok}`")))
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut arity = Arity::Zero;
    let mut instrs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some(header) = raw.trim().strip_prefix(";;") {
            let toks: Vec<&str> = header.split_whitespace().collect();
            match toks.as_slice() {
                ["arity", "0"] => arity = Arity::Zero,
                ["arity", "1"] => arity = Arity::One,
                _ => return Err(syntax(line, format!("unknown header `{}`", raw.trim()))),
            }
            continue;
        }
        let code = raw.split('#').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let toks: Vec<&str> = code.split_whitespace().collect();
        let op = toks[0].to_ascii_uppercase();
        let args = &toks[1..];
        let want = |n: usize| -> Result<(), ParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(syntax(line, format!("{op} takes {n} operand(s), found {}", args.len())))
            }
        };
        let ins = match op.as_str() {
            "CONST" | "ADDC" | "MULC" | "DIVC" | "MODC" => {
                want(2)?;
                let (r, c) = (reg(line, args[0])?, nat(line, args[1])?);
                match op.as_str() {
                    "CONST" => Instruction::Const(r, c),
                    "ADDC" => Instruction::AddC(r, c),
                    "MULC" => Instruction::MulC(r, c),
                    "DIVC" => Instruction::DivC(r, c),
                    _ => Instruction::ModC(r, c),
                }
            }
            "INC" => {
                want(1)?;
                Instruction::Inc(reg(line, args[0])?)
            }
            "COPY" => {
                want(2)?;
                Instruction::Copy { src: reg(line, args[0])?, dst: reg(line, args[1])? }
            }
            "DECJZ" => {
                want(2)?;
                Instruction::DecJz(reg(line, args[0])?, offset(line, args[1])?)
            }
            "JMP" => {
                want(1)?;
                Instruction::Jmp(offset(line, args[0])?)
            }
            "HALT" => {
                want(0)?;
                Instruction::Halt
            }
            "APPLY" | "ANALYZE" | "HCALL" => {
                want(2)?;
                let (a, b) = (reg(line, args[0])?, reg(line, args[1])?);
                match op.as_str() {
                    "APPLY" => Instruction::Apply(a, b),
                    "ANALYZE" => Instruction::Analyze(a, b),
                    _ => Instruction::HCall(a, b),
                }
            }
            other => return Err(syntax(line, format!("unknown mnemonic `{other}`"))),
        };
        instrs.push(ins);
    }
    Ok(Program::new(instrs, arity)?)
}

/// Renders a program in the same format `parse_program` reads.
pub fn render_program(program: &Program) -> String {
    program.to_string()
}
