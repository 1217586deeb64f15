//! Interaction-type taxonomy and the element-to-type aggregation rules.
//!
//! Every student prompt gets exactly one [`PromptType`] and every AI response
//! exactly one [`AiRole`], decided purely by which element codes are present.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Actor, CodedTurn, Corpus, ElementCode};

#[derive(Debug, Error, PartialEq)]
pub enum CodesError {
    #[error("unclassifiable turn: no element codes")]
    Unclassifiable,
    #[error("element `{element}` is not a {expected} element")]
    WrongClass { element: ElementCode, expected: Actor },
    #[error("chat `{chat_id}` turn {turn_index}: {source}")]
    AtTurn {
        chat_id: String,
        turn_index: u32,
        #[source]
        source: Box<CodesError>,
    },
    #[error("rater label vectors differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("kappa needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("raters disagree on the actor of chat `{chat_id}` turn {turn_index}")]
    ActorMismatch { chat_id: String, turn_index: u32 },
}

pub type Result<T> = std::result::Result<T, CodesError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptType {
    Inquire,
    Integrate,
    Debug,
    Delegate,
}

impl PromptType {
    pub const ALL: [PromptType; 4] = [
        PromptType::Inquire,
        PromptType::Integrate,
        PromptType::Debug,
        PromptType::Delegate,
    ];

    /// Inquire and Integrate seek understanding; Debug and Delegate seek task completion.
    pub fn is_instrumental(self) -> bool {
        matches!(self, PromptType::Inquire | PromptType::Integrate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AiRole {
    Executor,
    Collaborator,
    Evaluator,
    Tutor,
}

impl AiRole {
    pub const ALL: [AiRole; 4] = [
        AiRole::Executor,
        AiRole::Collaborator,
        AiRole::Evaluator,
        AiRole::Tutor,
    ];

    /// Every role except Executor provides guidance or feedback.
    pub fn is_pedagogical(self) -> bool {
        !matches!(self, AiRole::Executor)
    }
}

/// One-per-message interaction type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum InteractionType {
    Prompt(PromptType),
    Role(AiRole),
}

impl InteractionType {
    /// Prompt types then AI roles; this is the canonical state order.
    pub const ALL: [InteractionType; 8] = [
        InteractionType::Prompt(PromptType::Inquire),
        InteractionType::Prompt(PromptType::Integrate),
        InteractionType::Prompt(PromptType::Debug),
        InteractionType::Prompt(PromptType::Delegate),
        InteractionType::Role(AiRole::Executor),
        InteractionType::Role(AiRole::Collaborator),
        InteractionType::Role(AiRole::Evaluator),
        InteractionType::Role(AiRole::Tutor),
    ];

    pub fn actor(self) -> Actor {
        match self {
            InteractionType::Prompt(_) => Actor::Student,
            InteractionType::Role(_) => Actor::Ai,
        }
    }

    pub fn index(self) -> usize {
        match self {
            InteractionType::Prompt(p) => p as usize,
            InteractionType::Role(r) => 4 + r as usize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InteractionType::Prompt(PromptType::Inquire) => "Inquire",
            InteractionType::Prompt(PromptType::Integrate) => "Integrate",
            InteractionType::Prompt(PromptType::Debug) => "Debug",
            InteractionType::Prompt(PromptType::Delegate) => "Delegate",
            InteractionType::Role(AiRole::Executor) => "Executor",
            InteractionType::Role(AiRole::Collaborator) => "Collaborator",
            InteractionType::Role(AiRole::Evaluator) => "Evaluator",
            InteractionType::Role(AiRole::Tutor) => "Tutor",
        }
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InteractionType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let wanted = s.trim();
        InteractionType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| format!("unknown interaction type `{wanted}`"))
    }
}

impl From<InteractionType> for String {
    fn from(t: InteractionType) -> String {
        t.name().to_string()
    }
}

impl TryFrom<String> for InteractionType {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

fn check_class(elements: &[ElementCode], expected: Actor) -> Result<()> {
    if elements.is_empty() {
        return Err(CodesError::Unclassifiable);
    }
    match elements.iter().find(|e| e.actor() != expected) {
        Some(&element) => Err(CodesError::WrongClass { element, expected }),
        None => Ok(()),
    }
}

/// Contextual (task-specific) student elements.
pub const CONTEXTUAL: [ElementCode; 4] = [
    ElementCode::Code,
    ElementCode::Assignment,
    ElementCode::Results,
    ElementCode::Error,
];

pub fn classify_prompt_type(elements: &[ElementCode]) -> Result<PromptType> {
    check_class(elements, Actor::Student)?;
    let has = |c: ElementCode| elements.contains(&c);
    let contextual = CONTEXTUAL.iter().any(|&c| has(c));
    Ok(if has(ElementCode::Exploration) {
        if contextual {
            PromptType::Integrate
        } else {
            PromptType::Inquire
        }
    } else if has(ElementCode::Error) {
        PromptType::Debug
    } else {
        PromptType::Delegate
    })
}

pub fn classify_ai_role(elements: &[ElementCode]) -> Result<AiRole> {
    check_class(elements, Actor::Ai)?;
    let solution = elements.contains(&ElementCode::Solution);
    let feedback = elements.contains(&ElementCode::Feedback);
    Ok(match (solution, feedback) {
        (true, false) => AiRole::Executor,
        (true, true) => AiRole::Collaborator,
        (false, true) => AiRole::Evaluator,
        (false, false) => AiRole::Tutor,
    })
}

pub fn classify_turn(turn: &CodedTurn) -> Result<InteractionType> {
    let typed = match turn.actor {
        Actor::Student => classify_prompt_type(&turn.elements).map(InteractionType::Prompt),
        Actor::Ai => classify_ai_role(&turn.elements).map(InteractionType::Role),
    };
    typed.map_err(|e| CodesError::AtTurn {
        chat_id: turn.chat_id.clone(),
        turn_index: turn.turn_index,
        source: Box::new(e),
    })
}

/// A corpus with one interaction type per turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedCorpus {
    base: Corpus,
    types: Vec<InteractionType>,
}

impl TypedCorpus {
    pub fn base(&self) -> &Corpus {
        &self.base
    }

    /// Types aligned with `base().turns()`.
    pub fn types(&self) -> &[InteractionType] {
        &self.types
    }

    pub fn type_of(&self, chat_id: &str, turn_index: u32) -> Option<InteractionType> {
        let range = self.base.chat_range(chat_id)?;
        let turns = &self.base.turns()[range.clone()];
        let pos = turns.iter().position(|t| t.turn_index == turn_index)?;
        Some(self.types[range.start + pos])
    }

    /// Per-type turn counts indexed by [`InteractionType::index`].
    pub fn type_counts(&self, filter: Option<&BTreeSet<String>>) -> [u64; 8] {
        let mut counts = [0u64; 8];
        for (t, ty) in self.base.turns().iter().zip(&self.types) {
            if filter.is_some_and(|f| !f.contains(&t.student_id)) {
                continue;
            }
            counts[ty.index()] += 1;
        }
        counts
    }

    /// Coded-turn lines with an extra `type` field.
    pub fn to_typed_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct TypedRecord<'a> {
            chat_id: &'a str,
            student_id: &'a str,
            turn_index: u32,
            actor: &'a str,
            elements: Vec<&'a str>,
            #[serde(rename = "type")]
            ty: &'a str,
        }
        let mut out = String::new();
        for (t, ty) in self.base.turns().iter().zip(&self.types) {
            let rec = TypedRecord {
                chat_id: &t.chat_id,
                student_id: &t.student_id,
                turn_index: t.turn_index,
                actor: t.actor.as_str(),
                elements: t.elements.iter().map(|e| e.name()).collect(),
                ty: ty.name(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serialises"));
            out.push('\n');
        }
        out
    }
}

pub fn annotate_types(corpus: Corpus) -> Result<TypedCorpus> {
    let types = corpus
        .turns()
        .iter()
        .map(classify_turn)
        .collect::<Result<Vec<_>>>()?;
    Ok(TypedCorpus {
        base: corpus,
        types,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEntry {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub chance_agreement: f64,
    pub n_items: usize,
    /// Both raters used a single constant label; kappa is reported as 1.
    pub degenerate_marginals: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub per_code: BTreeMap<ElementCode, KappaEntry>,
    pub n_items: usize,
}

/// Cohen's kappa for two binary raters.
pub fn cohens_kappa(rater_a: &[bool], rater_b: &[bool]) -> Result<KappaEntry> {
    if rater_a.len() != rater_b.len() {
        return Err(CodesError::LengthMismatch {
            a: rater_a.len(),
            b: rater_b.len(),
        });
    }
    let n = rater_a.len();
    if n < 2 {
        return Err(CodesError::TooFewItems(n));
    }
    let mut agree = 0usize;
    let mut a_pos = 0usize;
    let mut b_pos = 0usize;
    for (&a, &b) in rater_a.iter().zip(rater_b) {
        agree += usize::from(a == b);
        a_pos += usize::from(a);
        b_pos += usize::from(b);
    }
    let nf = n as f64;
    let p_o = agree as f64 / nf;
    let (pa, pb) = (a_pos as f64 / nf, b_pos as f64 / nf);
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    // p_e == 1 only when both raters are constant and equal.
    let degenerate = (a_pos == 0 && b_pos == 0) || (a_pos == n && b_pos == n);
    let kappa = if degenerate {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(KappaEntry {
        kappa,
        observed_agreement: p_o,
        chance_agreement: p_e,
        n_items: n,
        degenerate_marginals: degenerate,
    })
}

/// Per-code kappa over messages coded by both raters, matched on
/// `(chat_id, turn_index)`. Each code is a present/absent decision among the
/// messages of its own actor class; codes whose class has fewer than two
/// cross-coded messages are omitted.
pub fn kappa_per_code(rater_a: &[CodedTurn], rater_b: &[CodedTurn]) -> Result<KappaResult> {
    let index_b: BTreeMap<(&str, u32), &CodedTurn> = rater_b
        .iter()
        .map(|t| ((t.chat_id.as_str(), t.turn_index), t))
        .collect();
    let mut pairs: Vec<(&CodedTurn, &CodedTurn)> = Vec::new();
    for a in rater_a {
        if let Some(&b) = index_b.get(&(a.chat_id.as_str(), a.turn_index)) {
            if a.actor != b.actor {
                return Err(CodesError::ActorMismatch {
                    chat_id: a.chat_id.clone(),
                    turn_index: a.turn_index,
                });
            }
            pairs.push((a, b));
        }
    }
    pairs.sort_by_key(|(a, _)| (a.chat_id.clone(), a.turn_index));

    let mut per_code = BTreeMap::new();
    for code in ElementCode::ALL {
        let (va, vb): (Vec<bool>, Vec<bool>) = pairs
            .iter()
            .filter(|(a, _)| a.actor == code.actor())
            .map(|(a, b)| (a.elements.contains(&code), b.elements.contains(&code)))
            .unzip();
        if va.len() >= 2 {
            per_code.insert(code, cohens_kappa(&va, &vb)?);
        }
    }
    Ok(KappaResult {
        per_code,
        n_items: pairs.len(),
    })
}

/// Tab-delimited reliability table with a per-class range summary.
pub fn render_kappa_table(result: &KappaResult) -> String {
    let mut out = String::from("Code\tkappa\tn\n");
    for (code, e) in &result.per_code {
        let flag = if e.degenerate_marginals { "\t(degenerate)" } else { "" };
        out.push_str(&format!("{}\t{:.3}\t{}{}\n", code.title(), e.kappa, e.n_items, flag));
    }
    out.push('\n');
    for (label, actor) in [("Student prompts", Actor::Student), ("AI responses", Actor::Ai)] {
        let ks: Vec<f64> = result
            .per_code
            .iter()
            .filter(|(c, _)| c.actor() == actor)
            .map(|(_, e)| e.kappa)
            .collect();
        if ks.is_empty() {
            continue;
        }
        let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!("{label}: per-code kappa = {lo:.3}-{hi:.3}\n"));
    }
    out.push_str(&format!("Cross-coded messages: {}\n", result.n_items));
    out
}

/// Formats an integer with comma thousands separators.
pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Code frequency table in the coding-scheme layout: element codes by actor
/// class, then prompt types and AI roles.
pub fn render_frequency_table(element_counts: &[u64; 11], type_counts: &[u64; 8]) -> String {
    let mut out = String::from("Code\tFreq\n");
    let mut section = |title: &str, rows: Vec<(&str, u64)>| {
        out.push_str(title);
        out.push('\n');
        for (name, n) in rows {
            out.push_str(&format!("{name}\t{}\n", thousands(n)));
        }
    };
    section(
        "Interaction elements: Student prompts",
        ElementCode::STUDENT
            .iter()
            .map(|c| (c.title(), element_counts[c.index()]))
            .collect(),
    );
    section(
        "Interaction elements: AI responses",
        ElementCode::AI
            .iter()
            .map(|c| (c.title(), element_counts[c.index()]))
            .collect(),
    );
    section(
        "Interaction types: Prompt types",
        InteractionType::ALL[..4]
            .iter()
            .map(|t| (t.name(), type_counts[t.index()]))
            .collect(),
    );
    section(
        "Interaction types: AI roles",
        InteractionType::ALL[4..]
            .iter()
            .map(|t| (t.name(), type_counts[t.index()]))
            .collect(),
    );
    out
}
