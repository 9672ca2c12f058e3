//! The sound, partial non-halting prover. It only ever concludes that a run
//! does *not* halt, and every such conclusion carries a replayable
//! [`Certificate`].
//!
//! Layers, first conclusive one wins:
//!
//! * **L0** (strict mode only): queries about the designated `s` or `q` give
//!   up at once; executed as an `ANALYZE` instruction this means "run the
//!   target instead".
//! * **L1**: no `HALT` (and no fall-off-the-end) is reachable in the control
//!   flow graph.
//! * **L2**: the emulated configuration repeats exactly (Brent's cycle
//!   detection over the deterministic macro-step function).
//! * **L3**: a call is entered with the same callee and entry registers as
//!   one of its still-active ancestors.
//! * **L4**: reflective instructions met during emulation are resolved as
//!   sub-queries; a sub-query that gives up is modelled by its fallback run,
//!   and if that run reaches the very same reflective call again the call can
//!   never complete.
//!
//! All work is charged against one tick meter shared by every sub-query.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Serialize, Serializer};

use crate::lang::{decode, Instruction, Program, ProgramIndex};
use crate::machine::{Advance, Configuration, Context, Event, Executor, ReflectKind, Runner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Hard-codes the give-up rule for the designated diagonal indices.
    StrictAppendixB,
    #[default]
    General,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::StrictAppendixB => "strict-appendix-b",
            Mode::General => "general",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict-appendix-b" | "strict" => Ok(Mode::StrictAppendixB),
            "general" => Ok(Mode::General),
            other => Err(format!("unknown mode `{other}` (strict-appendix-b | general)")),
        }
    }
}

/// Indices of the diagonal programs the strict mode treats specially.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Designated {
    pub k: ProgramIndex,
    pub s: ProgramIndex,
    pub p: ProgramIndex,
    pub q: ProgramIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub n: ProgramIndex,
    pub m: Option<BigUint>,
}

impl Query {
    pub fn new(n: ProgramIndex, m: Option<BigUint>) -> Self {
        Query { n, m }
    }

    pub fn with_input(n: &ProgramIndex, m: u64) -> Self {
        Query { n: n.clone(), m: Some(BigUint::from(m)) }
    }

    pub fn no_input(n: &ProgramIndex) -> Self {
        Query { n: n.clone(), m: None }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = short(&self.n.0);
        match &self.m {
            Some(m) => write!(f, "({n}, {})", short(m)),
            None => write!(f, "({n}, -)"),
        }
    }
}

/// Long naturals are abbreviated for human-facing text.
pub fn short(v: &BigUint) -> String {
    let s = v.to_string();
    if s.len() <= 24 {
        s
    } else {
        format!("{}..{}[{} digits]", &s[..8], &s[s.len() - 6..], s.len())
    }
}

impl Serialize for Query {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Query", 2)?;
        st.serialize_field("n", &self.n.0.to_string())?;
        st.serialize_field("m", &self.m.as_ref().map(|m| m.to_string()))?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Certificate {
    HaltUnreachable {
        reachable: BTreeSet<usize>,
    },
    ConfigCycle {
        entry: Configuration,
        /// Completed instructions before `entry` is first reached.
        at_step: u64,
        period: u64,
    },
    SelfSimilarRegress {
        entry: Configuration,
        re_entry_depth: usize,
        at_step: u64,
    },
    AnalyzerSelfDivergence {
        query: Query,
        kind: ReflectKind,
        give_up_trace_length: u64,
        re_invocation_trace_length: u64,
        /// Completed instructions before the reflective call is reached.
        at_step: u64,
    },
}

impl Certificate {
    pub fn rule(&self) -> &'static str {
        match self {
            Certificate::HaltUnreachable { .. } => "HaltUnreachable",
            Certificate::ConfigCycle { .. } => "ConfigCycle",
            Certificate::SelfSimilarRegress { .. } => "SelfSimilarRegress",
            Certificate::AnalyzerSelfDivergence { .. } => "AnalyzerSelfDivergence",
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::HaltUnreachable { reachable } => {
                write!(f, "HaltUnreachable(reachable={reachable:?})")
            }
            Certificate::ConfigCycle { at_step, period, entry } => {
                write!(f, "ConfigCycle(at_step={at_step}, period={period}, pc={})", entry.pc())
            }
            Certificate::SelfSimilarRegress { re_entry_depth, at_step, .. } => {
                write!(f, "SelfSimilarRegress(at_step={at_step}, re_entry_depth={re_entry_depth})")
            }
            Certificate::AnalyzerSelfDivergence {
                query,
                kind,
                give_up_trace_length,
                re_invocation_trace_length,
                at_step,
            } => write!(
                f,
                "AnalyzerSelfDivergence({kind:?} {query}, at_step={at_step}, give_up={give_up_trace_length}, re_invocation={re_invocation_trace_length})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AnalysisOutcome {
    NotHalting { certificate: Certificate },
    GaveUp { reason: String },
    OutOfBudget { ticks: u64 },
}

impl AnalysisOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            AnalysisOutcome::NotHalting { certificate } => Some(certificate),
            _ => None,
        }
    }

    pub fn is_not_halting(&self) -> bool {
        matches!(self, AnalysisOutcome::NotHalting { .. })
    }

    pub fn is_gave_up(&self) -> bool {
        matches!(self, AnalysisOutcome::GaveUp { .. })
    }
}

/// One query in the resolution tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolutionNode {
    pub query: Query,
    pub role: &'static str,
    pub kind: Option<ReflectKind>,
    pub result: String,
    pub ticks: u64,
    pub children: Vec<ResolutionNode>,
}

impl ResolutionNode {
    fn new(query: &Query, role: &'static str, kind: Option<ReflectKind>) -> Self {
        ResolutionNode { query: query.clone(), role, kind, result: String::new(), ticks: 0, children: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisReport {
    pub query: Query,
    pub mode: Mode,
    pub budget: u64,
    pub outcome: AnalysisOutcome,
    pub ticks: u64,
    pub resolution: ResolutionNode,
}

pub fn tick_count(report: &AnalysisReport) -> u64 {
    report.ticks
}

#[derive(Debug)]
struct OutOfTicks;

type Ticked<T> = Result<T, OutOfTicks>;

enum Resolution {
    NotHalting(Certificate),
    GaveUp(String),
    /// Gave up at the first reflective call of a plain run because that call
    /// re-enters a pending query; the run up to there is a plain emulation.
    Reentered { kind: ReflectKind, query: Query, at_step: u64 },
    Halts,
}

impl Resolution {
    fn describe(&self) -> String {
        match self {
            Resolution::NotHalting(c) => format!("not_halting: {}", c.rule()),
            Resolution::GaveUp(r) => format!("gave_up: {r}"),
            Resolution::Reentered { kind, query, .. } => {
                format!("gave_up: {kind:?} {query} re-enters a query that is still being resolved")
            }
            Resolution::Halts => "target_halts".to_string(),
        }
    }
}

enum Flow {
    Resume(BigUint),
    Conclude(Resolution),
}

enum FallbackEnd {
    ReInvoked(u64),
    Halted,
    GaveUp(String),
}

struct Analyzer<'a> {
    mode: Mode,
    designated: Option<&'a Designated>,
    budget: u64,
    used: u64,
}

impl Analyzer<'_> {
    fn tick(&mut self) -> Ticked<()> {
        if self.used >= self.budget {
            return Err(OutOfTicks);
        }
        self.used += 1;
        Ok(())
    }

    fn resolve(&mut self, query: &Query, pending: &mut Vec<Query>, node: &mut ResolutionNode) -> Ticked<Resolution> {
        let start = self.used;
        let res = self.resolve_inner(query, pending, node);
        node.ticks = self.used - start;
        node.result = match &res {
            Ok(r) => r.describe(),
            Err(_) => "out_of_budget".to_string(),
        };
        res
    }

    fn resolve_inner(&mut self, query: &Query, pending: &mut Vec<Query>, node: &mut ResolutionNode) -> Ticked<Resolution> {
        self.tick()?;
        if self.mode == Mode::StrictAppendixB {
            if let Some(d) = self.designated {
                if query.n == d.s || query.n == d.q {
                    return Ok(Resolution::GaveUp("designated self-referential index: run the target instead".into()));
                }
            }
        }

        let program = decode(&query.n);
        self.tick()?;
        let (reachable, halt_reachable) = reachable_offsets(&program);
        if !halt_reachable {
            return Ok(Resolution::NotHalting(Certificate::HaltUnreachable { reachable }));
        }

        let mut exec = Executor::for_query(query);
        let mut saved = exec.config().clone();
        let mut saved_at = 0u64;
        let (mut power, mut lam) = (1u64, 0u64);
        let mut resumed = false;
        loop {
            self.tick()?;
            match exec.step() {
                Event::Halted(_) => return Ok(Resolution::Halts),
                Event::Called { .. } => {
                    let cfg = exec.config();
                    let top = cfg.active();
                    let depth = cfg.frames.len() - 1;
                    if let Some(i) = cfg.frames[..depth].iter().rposition(|f| f.same_entry(top)) {
                        return Ok(Resolution::NotHalting(Certificate::SelfSimilarRegress {
                            entry: cfg.clone(),
                            re_entry_depth: depth - i,
                            at_step: exec.instructions(),
                        }));
                    }
                }
                Event::Reflect { kind, query: inner } => {
                    let at_step = exec.instructions();
                    self.tick()?;
                    if inner == *query || pending.contains(&inner) {
                        if resumed {
                            return Ok(Resolution::GaveUp(format!(
                                "{kind:?} {inner} re-enters a query that is still being resolved"
                            )));
                        }
                        return Ok(Resolution::Reentered { kind, query: inner, at_step });
                    }
                    match self.reflect(kind, &inner, query, pending, at_step, node)? {
                        Flow::Resume(v) => {
                            resumed = true;
                            exec.resume(v)
                        }
                        Flow::Conclude(r) => return Ok(r),
                    }
                }
                Event::Stepped | Event::Returned { .. } => {}
            }
            lam += 1;
            if exec.config() == &saved {
                return Ok(Resolution::NotHalting(Certificate::ConfigCycle {
                    entry: saved,
                    at_step: saved_at,
                    period: lam,
                }));
            }
            if lam == power {
                saved = exec.config().clone();
                saved_at = exec.instructions();
                power *= 2;
                lam = 0;
            }
        }
    }

    fn reflect(
        &mut self,
        kind: ReflectKind,
        inner: &Query,
        current: &Query,
        pending: &mut Vec<Query>,
        at_step: u64,
        node: &mut ResolutionNode,
    ) -> Ticked<Flow> {
        pending.push(current.clone());
        let mut child = ResolutionNode::new(inner, "sub-query", Some(kind));
        let start = self.used;
        let sub = self.resolve(inner, pending, &mut child);
        let give_up_len = self.used - start;
        node.children.push(child);
        let flow = match sub {
            Err(e) => Err(e),
            Ok(Resolution::NotHalting(_)) => Ok(Flow::Resume(BigUint::zero())),
            Ok(Resolution::Halts) => Ok(match kind {
                ReflectKind::HCall => Flow::Resume(BigUint::one()),
                ReflectKind::Analyze => Flow::Conclude(Resolution::GaveUp(format!(
                    "ANALYZE {inner} targets a halting run; not modelled"
                ))),
            }),
            Ok(gave_up @ (Resolution::GaveUp(_) | Resolution::Reentered { .. })) => {
                let mut fb = ResolutionNode::new(inner, "fallback-run", Some(kind));
                let end = match gave_up {
                    // the sub-query's own run already is the fallback run
                    Resolution::Reentered { kind: k2, query: q2, at_step } if k2 == kind && q2 == *inner => {
                        fb.role = "fallback-run (shared with sub-query)";
                        Ok(FallbackEnd::ReInvoked(at_step))
                    }
                    _ => self.fallback_run(kind, inner, pending, &mut fb),
                };
                fb.result = match &end {
                    Ok(FallbackEnd::ReInvoked(n)) => format!("re_invoked after {n} instructions"),
                    Ok(FallbackEnd::Halted) => "halted".into(),
                    Ok(FallbackEnd::GaveUp(r)) => format!("gave_up: {r}"),
                    Err(_) => "out_of_budget".into(),
                };
                node.children.push(fb);
                end.map(|end| match end {
                    FallbackEnd::ReInvoked(len) => {
                        Flow::Conclude(Resolution::NotHalting(Certificate::AnalyzerSelfDivergence {
                            query: inner.clone(),
                            kind,
                            give_up_trace_length: give_up_len,
                            re_invocation_trace_length: len,
                            at_step,
                        }))
                    }
                    FallbackEnd::Halted if kind == ReflectKind::HCall => Flow::Resume(BigUint::one()),
                    FallbackEnd::Halted => Flow::Conclude(Resolution::GaveUp(format!(
                        "fallback run of {inner} halts; ANALYZE would repeat forever but this is not certified"
                    ))),
                    FallbackEnd::GaveUp(r) => Flow::Conclude(Resolution::GaveUp(r)),
                })
            }
        };
        pending.pop();
        flow
    }

    /// Runs the target of a given-up reflective call, looking for the same
    /// call again.
    fn fallback_run(
        &mut self,
        kind: ReflectKind,
        target: &Query,
        pending: &mut Vec<Query>,
        node: &mut ResolutionNode,
    ) -> Ticked<FallbackEnd> {
        let start = self.used;
        let mut exec = Executor::for_query(target);
        let end = loop {
            self.tick()?;
            match exec.step() {
                Event::Halted(_) => break FallbackEnd::Halted,
                Event::Reflect { kind: k2, query: q3 } => {
                    if k2 == kind && q3 == *target {
                        break FallbackEnd::ReInvoked(exec.instructions());
                    }
                    if q3 == *target || pending.contains(&q3) {
                        break FallbackEnd::GaveUp(format!("{k2:?} {q3} inside fallback run re-enters a pending query"));
                    }
                    pending.push(target.clone());
                    let mut child = ResolutionNode::new(&q3, "sub-query", Some(k2));
                    let sub = self.resolve(&q3, pending, &mut child);
                    pending.pop();
                    node.children.push(child);
                    match (sub?, k2) {
                        (Resolution::NotHalting(_), _) => exec.resume(BigUint::zero()),
                        (Resolution::Halts, ReflectKind::HCall) => exec.resume(BigUint::one()),
                        _ => break FallbackEnd::GaveUp(format!("{k2:?} {q3} inside fallback run is unresolved")),
                    }
                }
                _ => {}
            }
        };
        node.ticks = self.used - start;
        Ok(end)
    }
}

/// Reachable instruction offsets from entry, and whether a halt point
/// (`HALT` or the one-past-end offset) is among them.
pub fn reachable_offsets(program: &Program) -> (BTreeSet<usize>, bool) {
    let mut seen = BTreeSet::new();
    let mut work = vec![0usize];
    let mut halts = false;
    while let Some(pc) = work.pop() {
        if !seen.insert(pc) {
            continue;
        }
        let Some(ins) = program.instrs().get(pc) else {
            halts = true;
            continue;
        };
        let jump = |off: i64| (pc as i64 + off) as usize;
        match ins {
            Instruction::Halt => halts = true,
            Instruction::Jmp(off) => work.push(jump(*off)),
            Instruction::DecJz(_, off) => {
                work.push(pc + 1);
                work.push(jump(*off));
            }
            _ => work.push(pc + 1),
        }
    }
    (seen, halts)
}

/// Runs the analyzer on `query` with a tick budget.
pub fn analyze(query: &Query, mode: Mode, budget: u64, designated: Option<&Designated>) -> AnalysisReport {
    let mut a = Analyzer { mode, designated, budget: budget.max(1), used: 0 };
    let mut root = ResolutionNode::new(query, "root", None);
    let res = a.resolve(query, &mut Vec::new(), &mut root);
    let outcome = match res {
        Ok(Resolution::NotHalting(c)) => AnalysisOutcome::NotHalting { certificate: c },
        Ok(r @ (Resolution::GaveUp(_) | Resolution::Reentered { .. })) => {
            AnalysisOutcome::GaveUp { reason: r.describe().trim_start_matches("gave_up: ").to_string() }
        }
        // a halting target leaves the analyzer with nothing to say: it idles
        // until its budget runs out
        Ok(Resolution::Halts) | Err(OutOfTicks) => {
            a.used = a.budget;
            AnalysisOutcome::OutOfBudget { ticks: a.budget }
        }
    };
    AnalysisReport { query: query.clone(), mode, budget: a.budget, outcome, ticks: a.used, resolution: root }
}

// ----- certificate audit ---------------------------------------------------

/// Semantics and bounds used when replaying certificates.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub mode: Mode,
    pub designated: Option<Designated>,
    /// Budget for re-running give-up decisions.
    pub budget: u64,
    /// Fuel for object-level replays.
    pub replay_fuel: u64,
}

impl CheckContext {
    pub fn new(mode: Mode, designated: Option<Designated>) -> Self {
        CheckContext { mode, designated, budget: 1_000_000, replay_fuel: 10_000_000 }
    }

    fn runner(&self, query: &Query) -> Runner {
        Runner::new(
            Executor::for_query(query),
            Context::new(self.mode, self.designated.clone()),
            self.replay_fuel,
        )
    }
}

/// Replays object-level execution until `instructions` instructions have
/// completed. `None` if the run halts or runs out of fuel first.
fn replay_to(runner: &mut Runner, instructions: u64) -> Option<()> {
    while runner.exec().instructions() < instructions {
        match runner.advance() {
            Advance::Event(_) => {}
            Advance::Halted(_) | Advance::Exhausted => return None,
        }
    }
    (runner.exec().instructions() == instructions).then_some(())
}

fn pending_reflection(runner: &Runner) -> Option<(ReflectKind, Query)> {
    let cfg = runner.exec().config();
    let regs = cfg.regs();
    let q = |a: &crate::lang::Reg, b: &crate::lang::Reg| {
        Query::new(ProgramIndex(regs.get(a.index()).clone()), Some(regs.get(b.index()).clone()))
    };
    match cfg.current()? {
        Instruction::Analyze(a, b) => Some((ReflectKind::Analyze, q(a, b))),
        Instruction::HCall(a, b) => Some((ReflectKind::HCall, q(a, b))),
        _ => None,
    }
}

fn recompute_reachable(program: &Program) -> BTreeSet<usize> {
    // naive fixpoint over the successor relation
    let len = program.len();
    let mut set: BTreeSet<usize> = [0].into();
    loop {
        let mut next = set.clone();
        for &pc in &set {
            if pc >= len {
                continue;
            }
            let at = pc as i64;
            match &program.instrs()[pc] {
                Instruction::Halt => {}
                Instruction::Jmp(o) => {
                    next.insert((at + o) as usize);
                }
                Instruction::DecJz(_, o) => {
                    next.insert(pc + 1);
                    next.insert((at + o) as usize);
                }
                _ => {
                    next.insert(pc + 1);
                }
            }
        }
        if next == set {
            return set;
        }
        set = next;
    }
}

/// Independently validates a certificate for `query`.
pub fn check_certificate(certificate: &Certificate, query: &Query, ctx: &CheckContext) -> bool {
    match certificate {
        Certificate::HaltUnreachable { reachable } => {
            let program = decode(&query.n);
            let recomputed = recompute_reachable(&program);
            recomputed == *reachable
                && recomputed
                    .iter()
                    .all(|&pc| pc < program.len() && program.instrs()[pc] != Instruction::Halt)
        }
        Certificate::ConfigCycle { entry, at_step, period } => {
            if *period == 0 {
                return false;
            }
            let mut runner = ctx.runner(query);
            replay_to(&mut runner, *at_step).is_some()
                && runner.exec().config() == entry
                && replay_to(&mut runner, at_step + period).is_some()
                && runner.exec().config() == entry
        }
        Certificate::SelfSimilarRegress { entry, re_entry_depth, at_step } => {
            let mut runner = ctx.runner(query);
            if replay_to(&mut runner, *at_step).is_none() || runner.exec().config() != entry {
                return false;
            }
            let frames = &entry.frames;
            let top = frames.len() - 1;
            *re_entry_depth >= 1
                && *re_entry_depth <= top
                && frames[top].pc == 0
                && frames[top].regs == frames[top].entry
                && frames[top].same_entry(&frames[top - re_entry_depth])
        }
        Certificate::AnalyzerSelfDivergence { query: inner, kind, re_invocation_trace_length, at_step, .. } => {
            let mut runner = ctx.runner(query);
            if replay_to(&mut runner, *at_step).is_none() {
                return false;
            }
            if pending_reflection(&runner) != Some((*kind, inner.clone())) {
                return false;
            }
            let give_up = analyze(inner, ctx.mode, ctx.budget, ctx.designated.as_ref());
            if !give_up.outcome.is_gave_up() {
                return false;
            }
            let mut fallback = ctx.runner(inner);
            replay_to(&mut fallback, *re_invocation_trace_length).is_some()
                && pending_reflection(&fallback) == Some((*kind, inner.clone()))
        }
    }
}
