//! Small-step semantics, the emulator, fuel-bounded runs and traces.
//!
//! The [`Executor`] performs plain instructions itself and stops in front of
//! every `ANALYZE`/`HCALL`, reporting an [`Event::Reflect`]. The caller decides
//! what the reflective instruction does: the object-level [`Runner`] consults
//! the real analyzer and decider, the analyzer's own emulation models them.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::analyzer::{analyze, AnalysisOutcome, Designated, Mode, Query};
use crate::decider::{decide, Verdict3};
use crate::lang::{decode, encode, ser_nat, Arity, Instruction, Program, ProgramIndex, REGISTER_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Registers(pub [BigUint; REGISTER_COUNT]);

impl Registers {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Fresh registers for a run of a program of the given arity.
    pub fn entry(arity: Arity, input: Option<&BigUint>) -> Self {
        let mut regs = Self::zero();
        if arity == Arity::One {
            if let Some(x) = input {
                regs.0[1] = x.clone();
            }
        }
        regs
    }

    pub fn get(&self, i: usize) -> &BigUint {
        &self.0[i]
    }
}

impl Serialize for Registers {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(REGISTER_COUNT))?;
        for r in &self.0 {
            seq.serialize_element(&r.to_string())?;
        }
        seq.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Root,
    Apply,
    /// The analyzer gave up on an `ANALYZE` and runs the target instead; when
    /// the target returns, the `ANALYZE` executes again.
    AnalyzeFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectKind {
    Analyze,
    HCall,
}

/// One activation: the running program, its pc and registers, and the
/// registers it was entered with.
#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub index: ProgramIndex,
    #[serde(skip)]
    pub code: Arc<Program>,
    pub pc: usize,
    pub regs: Registers,
    pub entry: Registers,
    pub kind: CallKind,
}

impl PartialEq for Frame {
    fn eq(&self, other: &Self) -> bool {
        self.pc == other.pc
            && self.kind == other.kind
            && self.regs == other.regs
            && self.entry == other.entry
            && self.index == other.index
    }
}

impl Eq for Frame {}

impl Frame {
    fn new(index: ProgramIndex, code: Arc<Program>, input: Option<&BigUint>, kind: CallKind) -> Frame {
        let entry = Registers::entry(code.arity(), input);
        Frame { index, code, pc: 0, regs: entry.clone(), entry, kind }
    }

    /// Same callee entered with the same registers.
    pub fn same_entry(&self, other: &Frame) -> bool {
        self.index == other.index && self.entry == other.entry
    }
}

/// Machine state: the active frame is the last one, the others are the
/// saved call context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Configuration {
    pub frames: Vec<Frame>,
}

impl Configuration {
    pub fn initial(program: Arc<Program>, index: ProgramIndex, input: Option<&BigUint>) -> Self {
        Configuration { frames: vec![Frame::new(index, program, input, CallKind::Root)] }
    }

    pub fn for_program(program: &Program, input: Option<&BigUint>) -> Self {
        Self::initial(Arc::new(program.clone()), encode(program), input)
    }

    pub fn active(&self) -> &Frame {
        self.frames.last().expect("configuration has a frame")
    }

    pub fn pc(&self) -> usize {
        self.active().pc
    }

    pub fn regs(&self) -> &Registers {
        &self.active().regs
    }

    pub fn call_context(&self) -> &[Frame] {
        &self.frames[..self.frames.len() - 1]
    }

    pub fn depth(&self) -> usize {
        self.frames.len() - 1
    }

    /// The instruction about to execute; `None` at the implicit halt.
    pub fn current(&self) -> Option<&Instruction> {
        let f = self.active();
        f.code.instrs().get(f.pc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Stepped,
    Called { depth: usize },
    Returned { depth: usize },
    Halted(BigUint),
    /// An `ANALYZE`/`HCALL` is next; no state changed.
    Reflect { kind: ReflectKind, query: Query },
}

/// Deterministic stepping engine with a decode cache.
#[derive(Debug, Clone)]
pub struct Executor {
    config: Configuration,
    cache: HashMap<ProgramIndex, Arc<Program>>,
    instructions: u64,
    halted: Option<BigUint>,
}

impl Executor {
    pub fn new(config: Configuration) -> Self {
        Executor { config, cache: HashMap::new(), instructions: 0, halted: None }
    }

    pub fn for_query(query: &Query) -> Self {
        let code = Arc::new(decode(&query.n));
        Self::new(Configuration::initial(code, query.n.clone(), query.m.as_ref()))
    }

    pub fn for_program(program: &Program, input: Option<&BigUint>) -> Self {
        Self::new(Configuration::for_program(program, input))
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    /// Completed instructions so far (reflective ones count when resolved).
    pub fn instructions(&self) -> u64 {
        self.instructions
    }

    pub fn halted(&self) -> Option<&BigUint> {
        self.halted.as_ref()
    }

    fn load(&mut self, index: &BigUint) -> (ProgramIndex, Arc<Program>) {
        let index = ProgramIndex(index.clone());
        let code = self
            .cache
            .entry(index.clone())
            .or_insert_with(|| Arc::new(decode(&index)))
            .clone();
        (index, code)
    }

    fn push(&mut self, n: &BigUint, m: &BigUint, kind: CallKind) -> Event {
        let (index, code) = self.load(n);
        self.config.frames.push(Frame::new(index, code, Some(m), kind));
        self.instructions += 1;
        Event::Called { depth: self.config.depth() }
    }

    pub fn step(&mut self) -> Event {
        if let Some(v) = &self.halted {
            return Event::Halted(v.clone());
        }
        let frame = self.config.frames.last_mut().expect("frame");
        let ins = match frame.code.instrs().get(frame.pc) {
            None | Some(Instruction::Halt) => return self.finish_frame(),
            Some(ins) => ins.clone(),
        };
        let regs = &mut frame.regs.0;
        let mut next = frame.pc + 1;
        match ins {
            Instruction::Const(r, c) => regs[r.index()] = c,
            Instruction::Inc(r) => regs[r.index()] += 1u32,
            Instruction::AddC(r, c) => regs[r.index()] += c,
            Instruction::MulC(r, c) => regs[r.index()] *= c,
            Instruction::DivC(r, c) => regs[r.index()] = regs[r.index()].div_floor(&c),
            Instruction::ModC(r, c) => regs[r.index()] = regs[r.index()].mod_floor(&c),
            Instruction::Copy { src, dst } => regs[dst.index()] = regs[src.index()].clone(),
            Instruction::DecJz(r, off) => {
                if regs[r.index()].is_zero() {
                    next = (frame.pc as i64 + off) as usize;
                } else {
                    regs[r.index()] -= 1u32;
                }
            }
            Instruction::Jmp(off) => next = (frame.pc as i64 + off) as usize,
            Instruction::Halt => unreachable!(),
            Instruction::Apply(a, b) => {
                let (n, m) = (regs[a.index()].clone(), regs[b.index()].clone());
                return self.push(&n, &m, CallKind::Apply);
            }
            Instruction::Analyze(a, b) | Instruction::HCall(a, b) => {
                let kind = if matches!(ins, Instruction::Analyze(..)) {
                    ReflectKind::Analyze
                } else {
                    ReflectKind::HCall
                };
                let query = Query::new(ProgramIndex(regs[a.index()].clone()), Some(regs[b.index()].clone()));
                return Event::Reflect { kind, query };
            }
        }
        frame.pc = next;
        self.instructions += 1;
        Event::Stepped
    }

    fn finish_frame(&mut self) -> Event {
        self.instructions += 1;
        let done = self.config.frames.pop().expect("frame");
        let output = done.regs.0[0].clone();
        match self.config.frames.last_mut() {
            None => {
                self.config.frames.push(done);
                self.halted = Some(output.clone());
                Event::Halted(output)
            }
            Some(caller) => {
                if done.kind == CallKind::Apply {
                    caller.regs.0[0] = output;
                    caller.pc += 1;
                }
                Event::Returned { depth: self.config.depth() }
            }
        }
    }

    /// Completes the pending reflective instruction with `r0 := value`.
    pub fn resume(&mut self, value: BigUint) {
        let frame = self.config.frames.last_mut().expect("frame");
        debug_assert!(frame.code.instrs()[frame.pc].is_reflective());
        frame.regs.0[0] = value;
        frame.pc += 1;
        self.instructions += 1;
    }

    /// Runs the target of the pending `ANALYZE` in a fallback frame.
    pub fn fallback(&mut self, query: &Query) -> Event {
        let zero = BigUint::zero();
        let m = query.m.as_ref().unwrap_or(&zero);
        self.push(&query.n.0, m, CallKind::AnalyzeFallback)
    }
}

/// Result of a single `step` on a program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(Configuration),
    Halted(BigUint),
    /// The next instruction is reflective; its effect depends on the analyzer.
    Reflect { kind: ReflectKind, query: Query },
}

/// One deterministic step of `config`. `program` must be the root program of
/// `config`; nested frames carry their own code.
pub fn step(program: &Program, config: &Configuration) -> StepResult {
    debug_assert_eq!(config.frames[0].code.as_ref(), program);
    let mut exec = Executor::new(config.clone());
    match exec.step() {
        Event::Halted(v) => StepResult::Halted(v),
        Event::Reflect { kind, query } => StepResult::Reflect { kind, query },
        _ => StepResult::Next(exec.config),
    }
}

// ----- object-level runs ---------------------------------------------------

/// What the reflective instructions mean during a run.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub mode: Mode,
    pub designated: Option<Designated>,
}

impl Context {
    pub fn new(mode: Mode, designated: Option<Designated>) -> Self {
        Context { mode, designated }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Halted { output: BigUint, steps: u64 },
    FuelExhausted { steps: u64, last: Box<Configuration> },
}

impl RunOutcome {
    pub fn is_halted(&self) -> bool {
        matches!(self, RunOutcome::Halted { .. })
    }

    pub fn steps(&self) -> u64 {
        match self {
            RunOutcome::Halted { steps, .. } | RunOutcome::FuelExhausted { steps, .. } => *steps,
        }
    }

    pub fn output(&self) -> Option<&BigUint> {
        match self {
            RunOutcome::Halted { output, .. } => Some(output),
            RunOutcome::FuelExhausted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advance {
    Event(Event),
    Halted(BigUint),
    Exhausted,
}

/// Object-level run under a fuel meter. Plain instructions cost one unit;
/// `ANALYZE` costs the analyzer's ticks and `HCALL` the decider's fuel.
#[derive(Debug, Clone)]
pub struct Runner {
    exec: Executor,
    ctx: Context,
    fuel: u64,
    used: u64,
}

impl Runner {
    pub fn new(exec: Executor, ctx: Context, fuel: u64) -> Self {
        Runner { exec, ctx, fuel, used: 0 }
    }

    pub fn exec(&self) -> &Executor {
        &self.exec
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.fuel - self.used
    }

    fn exhaust(&mut self) -> Advance {
        self.used = self.fuel;
        Advance::Exhausted
    }

    pub fn advance(&mut self) -> Advance {
        if self.used >= self.fuel {
            return Advance::Exhausted;
        }
        match self.exec.step() {
            Event::Halted(v) => {
                self.used += 1;
                Advance::Halted(v)
            }
            Event::Reflect { kind, query } => self.reflect(kind, query),
            ev => {
                self.used += 1;
                Advance::Event(ev)
            }
        }
    }

    fn reflect(&mut self, kind: ReflectKind, query: Query) -> Advance {
        let remaining = self.remaining();
        match kind {
            ReflectKind::Analyze => {
                let report = analyze(&query, self.ctx.mode, remaining, self.ctx.designated.as_ref());
                self.used += report.ticks.min(remaining);
                match report.outcome {
                    AnalysisOutcome::NotHalting { .. } => {
                        self.exec.resume(BigUint::zero());
                        Advance::Event(Event::Stepped)
                    }
                    AnalysisOutcome::GaveUp { .. } if self.used < self.fuel => {
                        Advance::Event(self.exec.fallback(&query))
                    }
                    _ => self.exhaust(),
                }
            }
            ReflectKind::HCall => {
                if remaining < 2 {
                    return self.exhaust();
                }
                let verdict = decide(&query, self.ctx.mode, remaining, self.ctx.designated.as_ref());
                match verdict {
                    Verdict3::Halts { .. } | Verdict3::NotHalts { .. } => {
                        self.used += verdict.fuel_spent().min(remaining);
                        let r0 = if matches!(verdict, Verdict3::Halts { .. }) { BigUint::one() } else { BigUint::zero() };
                        self.exec.resume(r0);
                        Advance::Event(Event::Stepped)
                    }
                    Verdict3::Unknown { .. } => self.exhaust(),
                }
            }
        }
    }

    pub fn run(&mut self) -> RunOutcome {
        loop {
            match self.advance() {
                Advance::Halted(output) => return RunOutcome::Halted { output, steps: self.used },
                Advance::Exhausted => {
                    return RunOutcome::FuelExhausted {
                        steps: self.used,
                        last: Box::new(self.exec.config().clone()),
                    }
                }
                Advance::Event(_) => {}
            }
        }
    }
}

/// Runs `decode(index)` on `input` for at most `fuel` units under the
/// default context (general mode, no designated indices).
pub fn emulate(index: &ProgramIndex, input: Option<&BigUint>, fuel: u64) -> RunOutcome {
    emulate_with(&Context::default(), index, input, fuel)
}

pub fn emulate_with(ctx: &Context, index: &ProgramIndex, input: Option<&BigUint>, fuel: u64) -> RunOutcome {
    let query = Query::new(index.clone(), input.cloned());
    Runner::new(Executor::for_query(&query), ctx.clone(), fuel).run()
}

pub fn run_program(ctx: &Context, program: &Program, input: Option<&BigUint>, fuel: u64) -> RunOutcome {
    Runner::new(Executor::for_program(program, input), ctx.clone(), fuel).run()
}

// ----- traces --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Sample,
    Call { depth: usize },
    Return { depth: usize },
    Halted {
        #[serde(serialize_with = "ser_nat")]
        output: BigUint,
    },
    FuelExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    /// Fuel used when the entry was recorded.
    pub step: u64,
    pub event: TraceEvent,
    pub config: Configuration,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    step: u64,
    pc: usize,
    depth: usize,
    regs: &'a Registers,
    event: &'a TraceEvent,
}

impl Trace {
    /// One JSON object per line: `step`, `pc`, `depth`, `regs`, `event`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let rec = TraceRecord {
                step: e.step,
                pc: e.config.pc(),
                depth: e.config.depth(),
                regs: e.config.regs(),
                event: &e.event,
            };
            out.push_str(&serde_json::to_string(&rec).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn trace_of(index: &ProgramIndex, input: Option<&BigUint>, fuel: u64, sample_every: u64) -> Trace {
    trace_with(&Context::default(), index, input, fuel, sample_every)
}

pub fn trace_with(ctx: &Context, index: &ProgramIndex, input: Option<&BigUint>, fuel: u64, sample_every: u64) -> Trace {
    let sample_every = sample_every.max(1);
    let query = Query::new(index.clone(), input.cloned());
    let mut runner = Runner::new(Executor::for_query(&query), ctx.clone(), fuel);
    let mut trace = Trace::default();
    loop {
        let before = runner.used();
        let adv = runner.advance();
        let config = runner.exec().config().clone();
        let step = runner.used();
        let event = match adv {
            Advance::Halted(output) => {
                trace.entries.push(TraceEntry { step, event: TraceEvent::Halted { output }, config });
                return trace;
            }
            Advance::Exhausted => {
                trace.entries.push(TraceEntry { step, event: TraceEvent::FuelExhausted, config });
                return trace;
            }
            Advance::Event(Event::Called { depth }) => Some(TraceEvent::Call { depth }),
            Advance::Event(Event::Returned { depth }) => Some(TraceEvent::Return { depth }),
            Advance::Event(_) => None,
        };
        let crossed = step / sample_every > before / sample_every;
        match event {
            Some(event) => trace.entries.push(TraceEntry { step, event, config }),
            None if crossed => trace.entries.push(TraceEntry { step, event: TraceEvent::Sample, config }),
            None => {}
        }
        if runner.used() >= fuel {
            // the next advance reports exhaustion; record it without stepping
            let config = runner.exec().config().clone();
            trace.entries.push(TraceEntry { step: fuel, event: TraceEvent::FuelExhausted, config });
            return trace;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{Instruction as I, Reg};

    fn p(instrs: Vec<I>) -> Program {
        Program::new(instrs, Arity::Zero).unwrap()
    }

    #[test]
    fn step_examples() {
        let halt = p(vec![I::Halt]);
        let c = Configuration::for_program(&halt, None);
        assert_eq!(step(&halt, &c), StepResult::Halted(BigUint::zero()));

        let lp = p(vec![I::Jmp(0)]);
        let c = Configuration::for_program(&lp, None);
        assert_eq!(step(&lp, &c), StepResult::Next(c.clone()));

        let inc = p(vec![I::Inc(Reg::R1), I::Halt]);
        let mut c = Configuration::for_program(&inc, None);
        c.frames[0].regs.0[1] = BigUint::from(4u8);
        let StepResult::Next(n) = step(&inc, &c) else { panic!() };
        assert_eq!(n.pc(), 1);
        assert_eq!(n.regs().get(1), &BigUint::from(5u8));
    }

    #[test]
    fn emulate_examples() {
        let halt = encode(&p(vec![I::Halt]));
        assert_eq!(emulate(&halt, None, 10), RunOutcome::Halted { output: BigUint::zero(), steps: 1 });
        let lp = encode(&Program::diverging());
        assert_eq!(emulate(&lp, None, 1000).steps(), 1000);
        assert!(!emulate(&lp, None, 1000).is_halted());
        let five = encode(&p(vec![I::Const(Reg::R0, BigUint::from(5u8)), I::Halt]));
        assert_eq!(emulate(&five, None, 10).output(), Some(&BigUint::from(5u8)));
    }

    #[test]
    fn implicit_end_halts_with_r0() {
        let prog = p(vec![I::Const(Reg::R0, BigUint::from(3u8))]);
        assert_eq!(
            run_program(&Context::default(), &prog, None, 10),
            RunOutcome::Halted { output: BigUint::from(3u8), steps: 2 }
        );
    }

    #[test]
    fn trace_examples() {
        let halt = encode(&p(vec![I::Halt]));
        let t = trace_of(&halt, None, 10, 1);
        assert_eq!(t.entries.len(), 1);
        assert!(matches!(t.entries[0].event, TraceEvent::Halted { .. }));

        let lp = encode(&Program::diverging());
        let t = trace_of(&lp, None, 5, 1);
        let samples: Vec<_> = t.entries.iter().filter(|e| e.event == TraceEvent::Sample).collect();
        assert_eq!(samples.len(), 5);
        assert!(samples.iter().all(|e| e.config == samples[0].config));
        assert!(t.to_jsonl().lines().all(|l| l.contains("\"pc\":0")));
    }

    #[test]
    fn apply_runs_callee_with_fresh_registers() {
        let callee = Program::new(vec![I::Copy { src: Reg::R1, dst: Reg::R0 }, I::Inc(Reg::R0), I::Halt], Arity::One)
            .unwrap();
        let k = encode(&callee).0;
        let caller = p(vec![
            I::Const(Reg::R2, k),
            I::Const(Reg::R3, BigUint::from(41u8)),
            I::Apply(Reg::R2, Reg::R3),
            I::Halt,
        ]);
        assert_eq!(run_program(&Context::default(), &caller, None, 100).output(), Some(&BigUint::from(42u8)));
    }
}
