//! A small register-machine language with Gödel numbering, an emulator, a
//! sound partial non-halting analyzer, the interleaved decider built from
//! both, the fixpoint construction that yields self-referential programs,
//! a three-valued liar evaluator, and predicate searchers.

pub mod analyzer;
pub mod asm;
pub mod bridge;
pub mod decider;
pub mod fixpoint;
pub mod lang;
pub mod machine;
pub mod trivalent;

pub use analyzer::{analyze, check_certificate, AnalysisOutcome, Certificate, CheckContext, Designated, Mode, Query};
pub use decider::{classify, decide, Verdict3};
pub use lang::{decode, encode, Arity, Instruction, Program, ProgramIndex, Reg};
pub use machine::{emulate, RunOutcome};
