//! Three truth values, the necessitation relation, and an evaluator for
//! pointer sentences ("This sentence is not true", `"X" is not true`, ...)
//! that turns closed evaluation loops into truth-value gaps.

use std::fmt;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::analyzer::Query;
use crate::decider::{decide, Verdict3};
use crate::fixpoint::{construct_fixpoint, DiagonalGallery};
use crate::lang::{encode, Arity, Instruction, Program, Reg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TruthValue3 {
    T,
    F,
    /// Neither true nor false.
    #[serde(rename = "GAP")]
    Gap,
}

impl fmt::Display for TruthValue3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue3::T => "T",
            TruthValue3::F => "F",
            TruthValue3::Gap => "GAP",
        })
    }
}

impl std::str::FromStr for TruthValue3 {
    type Err = SentenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "T" => Ok(TruthValue3::T),
            "F" => Ok(TruthValue3::F),
            "GAP" | "~T&~F" | "~T & ~F" => Ok(TruthValue3::Gap),
            other => Err(SentenceError(format!("unknown truth value `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Predicate {
    NotTrue,
    True,
    HasWordCount { n: usize, negated: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Sentence {
    SelfRef(Predicate),
    Quote(Box<Sentence>, Predicate),
}

impl Sentence {
    pub fn quote(inner: Sentence, pred: Predicate) -> Sentence {
        Sentence::Quote(Box::new(inner), pred)
    }

    fn predicate(&self) -> Predicate {
        match self {
            Sentence::SelfRef(p) | Sentence::Quote(_, p) => *p,
        }
    }

    /// The sentence this one talks about.
    fn referent(&self) -> &Sentence {
        match self {
            Sentence::SelfRef(_) => self,
            Sentence::Quote(inner, _) => inner,
        }
    }
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

fn number_word(n: usize) -> String {
    NUMBER_WORDS.get(n).map(|w| w.to_string()).unwrap_or_else(|| n.to_string())
}

fn predicate_text(p: Predicate) -> String {
    match p {
        Predicate::NotTrue => "is not true".into(),
        Predicate::True => "is true".into(),
        Predicate::HasWordCount { n, negated } => {
            let noun = if n == 1 { "word" } else { "words" };
            let verb = if negated { "does not have" } else { "has" };
            format!("{verb} {} {noun}", number_word(n))
        }
    }
}

pub fn render(sentence: &Sentence) -> String {
    match sentence {
        Sentence::SelfRef(p) => format!("This sentence {}", predicate_text(*p)),
        Sentence::Quote(inner, p) => format!("\"{}\" {}", render(inner), predicate_text(*p)),
    }
}

/// Whitespace tokens of the rendering; quotation marks never form a token.
pub fn word_count(sentence: &Sentence) -> usize {
    render(sentence).split_whitespace().filter(|t| !t.trim_matches('"').is_empty()).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Evaluation {
    pub value: TruthValue3,
    /// Evaluation steps, indented by depth.
    pub trace: Vec<String>,
}

fn eval<'a>(s: &'a Sentence, path: &mut Vec<&'a Sentence>, trace: &mut Vec<String>) -> TruthValue3 {
    let pad = "  ".repeat(path.len());
    path.push(s);
    let referent = s.referent();
    let value = match s.predicate() {
        Predicate::HasWordCount { n, negated } => {
            let words = word_count(referent);
            trace.push(format!("{pad}count words of \"{}\": {words}", render(referent)));
            if (words == n) != negated {
                TruthValue3::T
            } else {
                TruthValue3::F
            }
        }
        pred => {
            trace.push(format!("{pad}go to \"{}\" and evaluate it", render(referent)));
            if path.iter().any(|p| std::ptr::eq(*p, referent)) {
                trace.push(format!("{pad}closed loop: \"{}\" is neither true nor false", render(s)));
                path.pop();
                return TruthValue3::Gap;
            }
            let v = eval(referent, path, trace);
            match (pred, v) {
                (Predicate::True, TruthValue3::T) | (Predicate::NotTrue, TruthValue3::F | TruthValue3::Gap) => {
                    TruthValue3::T
                }
                _ => TruthValue3::F,
            }
        }
    };
    trace.push(format!("{pad}\"{}\" is {value}", render(s)));
    path.pop();
    value
}

pub fn evaluate(sentence: &Sentence) -> TruthValue3 {
    evaluate_traced(sentence).value
}

pub fn evaluate_traced(sentence: &Sentence) -> Evaluation {
    let mut trace = Vec::new();
    let value = eval(sentence, &mut Vec::new(), &mut trace);
    Evaluation { value, trace }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad sentence: {0}")]
pub struct SentenceError(pub String);

fn parse_predicate(text: &str) -> Result<Predicate, SentenceError> {
    let t = text.trim();
    let count = |arg: &str| -> Result<usize, SentenceError> {
        arg.strip_suffix(')')
            .and_then(|a| a.trim().parse().ok())
            .ok_or_else(|| SentenceError(format!("bad word count in `{t}`")))
    };
    match t {
        "not-true" => Ok(Predicate::NotTrue),
        "true" => Ok(Predicate::True),
        _ => {
            if let Some(arg) = t.strip_prefix("not-words(") {
                Ok(Predicate::HasWordCount { n: count(arg)?, negated: true })
            } else if let Some(arg) = t.strip_prefix("words(") {
                Ok(Predicate::HasWordCount { n: count(arg)?, negated: false })
            } else {
                Err(SentenceError(format!("unknown predicate `{t}`")))
            }
        }
    }
}

/// Parses `self: not-true`, `quote(<sentence>): not-words(5)`, and so on.
pub fn parse_sentence(text: &str) -> Result<Sentence, SentenceError> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("self:") {
        return Ok(Sentence::SelfRef(parse_predicate(rest)?));
    }
    let Some(body) = t.strip_prefix("quote(") else {
        return Err(SentenceError(format!("expected `self:` or `quote(`, found `{t}`")));
    };
    let mut depth = 1usize;
    let close = body
        .char_indices()
        .find(|&(_, c)| {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            depth == 0
        })
        .map(|(i, _)| i)
        .ok_or_else(|| SentenceError("unbalanced parentheses".into()))?;
    let pred = body[close + 1..]
        .trim_start()
        .strip_prefix(':')
        .ok_or_else(|| SentenceError("expected `:` after quote(...)".into()))?;
    Ok(Sentence::quote(parse_sentence(&body[..close])?, parse_predicate(pred)?))
}

pub fn notation(sentence: &Sentence) -> String {
    let pred = match sentence.predicate() {
        Predicate::NotTrue => "not-true".to_string(),
        Predicate::True => "true".to_string(),
        Predicate::HasWordCount { n, negated: true } => format!("not-words({n})"),
        Predicate::HasWordCount { n, negated: false } => format!("words({n})"),
    };
    match sentence {
        Sentence::SelfRef(_) => format!("self: {pred}"),
        Sentence::Quote(inner, _) => format!("quote({}): {pred}", notation(inner)),
    }
}

/// The six sentences discussed with the liar: the liar, its quotation, and
/// two word-count pairs.
pub fn liar_lines() -> [Sentence; 6] {
    let l1 = Sentence::SelfRef(Predicate::NotTrue);
    let l3 = Sentence::SelfRef(Predicate::HasWordCount { n: 5, negated: true });
    let l5 = Sentence::SelfRef(Predicate::HasWordCount { n: 7, negated: true });
    [
        l1.clone(),
        Sentence::quote(l1, Predicate::NotTrue),
        l3.clone(),
        Sentence::quote(l3, Predicate::HasWordCount { n: 5, negated: true }),
        l5.clone(),
        Sentence::quote(l5, Predicate::HasWordCount { n: 7, negated: true }),
    ]
}

// ----- necessitation -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NecessitationRow {
    pub left: TruthValue3,
    pub right: TruthValue3,
}

impl NecessitationRow {
    pub fn new(left: TruthValue3, right: TruthValue3) -> Self {
        NecessitationRow { left, right }
    }
}

/// Whenever the left side is true, so is the right.
pub fn necessitation_holds(rows: &[NecessitationRow]) -> bool {
    rows.iter().all(|r| r.left != TruthValue3::T || r.right == TruthValue3::T)
}

/// Some row has a true right side without a true left side.
pub fn equivalence_refuted(rows: &[NecessitationRow]) -> bool {
    rows.iter().any(|r| r.right == TruthValue3::T && r.left != TruthValue3::T)
}

/// Parses rows written as `LEFT RIGHT` or `LEFT, RIGHT`, one per line.
pub fn parse_rows(text: &str) -> Result<Vec<NecessitationRow>, SentenceError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let parts: Vec<&str> = l.split([',', '|']).map(str::trim).collect();
            let parts: Vec<&str> = if parts.len() == 2 { parts } else { l.split_whitespace().collect() };
            match parts.as_slice() {
                [a, b] => Ok(NecessitationRow::new(a.parse()?, b.parse()?)),
                _ => Err(SentenceError(format!("expected two values in row `{l}`"))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// The statement "X halts".
    Halts,
    /// The statement "X does not halt".
    DoesNotHalt,
}

/// A halt is a verified fact, a certificate makes "halts" false, and an
/// unanswered query grounds neither.
pub fn verdict_to_truth(verdict: &Verdict3, polarity: Polarity) -> TruthValue3 {
    let v = match verdict {
        Verdict3::Halts { .. } => TruthValue3::T,
        Verdict3::NotHalts { .. } => TruthValue3::F,
        Verdict3::Unknown { .. } => TruthValue3::Gap,
    };
    match (polarity, v) {
        (Polarity::DoesNotHalt, TruthValue3::T) => TruthValue3::F,
        (Polarity::DoesNotHalt, TruthValue3::F) => TruthValue3::T,
        (_, v) => v,
    }
}

// ----- tables --------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct WitnessedRow {
    pub left_label: String,
    pub right_label: String,
    pub row: NecessitationRow,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthTable {
    pub title: String,
    pub left_header: String,
    pub right_header: String,
    pub rows: Vec<WitnessedRow>,
    pub necessitation_holds: bool,
    pub equivalence_refuted: bool,
}

impl TruthTable {
    fn new(title: &str, left: &str, right: &str, rows: Vec<WitnessedRow>) -> Self {
        let plain: Vec<NecessitationRow> = rows.iter().map(|r| r.row).collect();
        TruthTable {
            title: title.into(),
            left_header: left.into(),
            right_header: right.into(),
            necessitation_holds: necessitation_holds(&plain),
            equivalence_refuted: equivalence_refuted(&plain),
            rows,
        }
    }

    pub fn plain_rows(&self) -> Vec<NecessitationRow> {
        self.rows.iter().map(|r| r.row).collect()
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        writeln!(f, "  {:<48} | {}", self.left_header, self.right_header)?;
        for r in &self.rows {
            let l = format!("{} [{}]", r.left_label, r.row.left);
            writeln!(f, "  {l:<48} | {} [{}]", r.right_label, r.row.right)?;
        }
        write!(f, "  necessitation: {}  equivalence refuted: {}", self.necessitation_holds, self.equivalence_refuted)
    }
}

/// Sentence pairs (X, "X" has the same predicate) with evaluated values:
/// lines 3/4, 1/2, 5/6.
pub fn liar_table() -> TruthTable {
    let lines = liar_lines();
    let rows = [(2, 3), (0, 1), (4, 5)]
        .into_iter()
        .map(|(a, b)| WitnessedRow {
            left_label: render(&lines[a]),
            right_label: render(&lines[b]),
            row: NecessitationRow::new(evaluate(&lines[a]), evaluate(&lines[b])),
        })
        .collect();
    TruthTable::new("sentence / quoted sentence", "This sentence does not have property P", "\"...\" does not have property P", rows)
}

/// One (R(), T(r)) pair of the halting tables, decided at a fixed fuel.
#[derive(Debug, Clone, Serialize)]
pub struct HaltingPair {
    pub name: String,
    pub left: Query,
    pub right: Query,
    pub left_verdict: Verdict3,
    pub right_verdict: Verdict3,
    pub row: NecessitationRow,
}

/// Decides the fixpoint pairs: a halting template, the diagonal pair
/// (C_s, C_k(s)), the pair (C_q, C_p(q)), and a looping template.
pub fn halting_pairs(gallery: &DiagonalGallery, fuel: u64) -> Vec<HaltingPair> {
    let mode = gallery.mode;
    let designated = gallery.designated();
    let constant = construct_fixpoint(
        &Program::new(vec![Instruction::Const(Reg::R0, BigUint::from(42u8)), Instruction::Halt], Arity::One)
            .expect("constant template"),
    )
    .expect("plain template");
    let looping = construct_fixpoint(&Program::new(vec![Instruction::Jmp(0)], Arity::One).expect("loop template"))
        .expect("plain template");
    let zero = Some(BigUint::from(0u8));
    let pairs = [
        (
            "R() = 42 / T(r) = 42",
            Query::new(constant.index.clone(), zero.clone()),
            Query::new(encode(&constant.template), Some(constant.index.0.clone())),
        ),
        (
            "C_s() / C_k(s)",
            Query::new(gallery.s.clone(), zero.clone()),
            Query::new(gallery.k.clone(), Some(gallery.s.0.clone())),
        ),
        (
            "C_q() / C_p(q)",
            Query::new(gallery.q.clone(), zero.clone()),
            Query::new(gallery.p.clone(), Some(gallery.q.0.clone())),
        ),
        (
            "R() loops / T(r) loops",
            Query::new(looping.index.clone(), zero),
            Query::new(encode(&looping.template), Some(looping.index.0.clone())),
        ),
    ];
    pairs
        .into_iter()
        .map(|(name, left, right)| {
            let lv = decide(&left, mode, fuel, Some(&designated));
            let rv = decide(&right, mode, fuel, Some(&designated));
            let row = NecessitationRow::new(
                verdict_to_truth(&lv, Polarity::Halts),
                verdict_to_truth(&rv, Polarity::Halts),
            );
            HaltingPair { name: name.into(), left, right, left_verdict: lv, right_verdict: rv, row }
        })
        .collect()
}

fn halting_label(table: u8, v: TruthValue3) -> &'static str {
    match (table, v) {
        (1, TruthValue3::T) => "determined to halt",
        (1, TruthValue3::Gap) => "not determined to halt",
        (1, TruthValue3::F) => "determined not to halt",
        (2, TruthValue3::T) => "verifiably halts",
        (2, TruthValue3::Gap) => "not verifiable that it halts",
        (2, TruthValue3::F) => "verifiably does not halt",
        (_, TruthValue3::T) => "halts",
        (_, TruthValue3::Gap) => "not true that it halts",
        (_, TruthValue3::F) => "does not halt",
    }
}

/// The three renderings (determined / verifiable / true) of the same rows.
pub fn halting_tables(pairs: &[HaltingPair]) -> [TruthTable; 3] {
    let titles = ["halting table: determination", "halting table: verifiability", "halting table: true = verified"];
    let mut tables = titles.iter().enumerate().map(|(i, title)| {
        let t = i as u8 + 1;
        let rows = pairs
            .iter()
            .map(|p| WitnessedRow {
                left_label: format!("{}: {}", p.name.split(" / ").next().unwrap_or(""), halting_label(t, p.row.left)),
                right_label: format!("{}: {}", p.name.split(" / ").nth(1).unwrap_or(""), halting_label(t, p.row.right)),
                row: p.row,
            })
            .collect();
        TruthTable::new(title, "R()", "T(r)", rows)
    });
    [tables.next().unwrap(), tables.next().unwrap(), tables.next().unwrap()]
}

/// The (C_s, C_k(s)) row: left undetermined, right determined not to halt.
pub fn middle_row_witnessed(pairs: &[HaltingPair]) -> bool {
    pairs.iter().any(|p| {
        p.name.starts_with("C_s")
            && p.row == NecessitationRow::new(TruthValue3::Gap, TruthValue3::F)
            && matches!(p.right_verdict, Verdict3::NotHalts { .. })
    })
}
