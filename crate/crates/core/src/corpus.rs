//! Data model for coded student-AI dialogues.
//!
//! A [`Corpus`] is a validated collection of [`CodedTurn`]s, one per message,
//! each carrying the ordered list of interaction-element codes assigned to
//! that message. Grades are loaded separately into a [`GradeBook`] and used to
//! stratify students into performance quartiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: element class mismatch: `{element}` is not a {actor} element")]
    ElementClassMismatch {
        line: usize,
        element: ElementCode,
        actor: Actor,
    },
    #[error("line {line}: turn has no element codes")]
    EmptyElements { line: usize },
    #[error("duplicate turn {turn_index} in chat `{chat_id}`")]
    DuplicateTurn { chat_id: String, turn_index: u32 },
    #[error("chat `{chat_id}`: non-alternating actors at turn {turn_index} (expected {expected})")]
    NonAlternating {
        chat_id: String,
        turn_index: u32,
        expected: Actor,
    },
    #[error("chat `{chat_id}` is attributed to more than one student (`{first}`, `{second}`)")]
    ChatOwnerConflict {
        chat_id: String,
        first: String,
        second: String,
    },
    #[error("line {line}: duplicate grade for student `{student_id}`")]
    DuplicateStudent { line: usize, student_id: String },
    #[error("line {line}: grade {grade} for student `{student_id}` is outside [0, 1]")]
    GradeOutOfRange {
        line: usize,
        student_id: String,
        grade: f64,
    },
    #[error("line {line}: unparseable grade `{value}`")]
    UnparseableGrade { line: usize, value: String },
    #[error("insufficient students for quartiles: {0} graded, at least 4 required")]
    InsufficientStudents(usize),
    #[error("quartile sizes {sizes:?} do not sum to the {n} graded students")]
    SizeMismatch { sizes: [usize; 4], n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// Who authored a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Actor {
    #[serde(rename = "student")]
    Student,
    #[serde(rename = "ai")]
    Ai,
}

impl Actor {
    pub fn other(self) -> Actor {
        match self {
            Actor::Student => Actor::Ai,
            Actor::Ai => Actor::Student,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Actor::Student => "student",
            Actor::Ai => "ai",
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Actor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "student" => Ok(Actor::Student),
            "ai" => Ok(Actor::Ai),
            other => Err(format!("unknown actor `{other}`")),
        }
    }
}

/// Interaction-element code. Student codes come first, then AI codes; the
/// declaration order is the canonical state order used everywhere else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementCode {
    Assignment,
    Code,
    Error,
    Exploration,
    Request,
    Results,
    Feedback,
    Explanation,
    Instruction,
    Solution,
    Example,
}

impl ElementCode {
    pub const ALL: [ElementCode; 11] = [
        ElementCode::Assignment,
        ElementCode::Code,
        ElementCode::Error,
        ElementCode::Exploration,
        ElementCode::Request,
        ElementCode::Results,
        ElementCode::Feedback,
        ElementCode::Explanation,
        ElementCode::Instruction,
        ElementCode::Solution,
        ElementCode::Example,
    ];

    pub const STUDENT: [ElementCode; 6] = [
        ElementCode::Assignment,
        ElementCode::Code,
        ElementCode::Error,
        ElementCode::Exploration,
        ElementCode::Request,
        ElementCode::Results,
    ];

    pub const AI: [ElementCode; 5] = [
        ElementCode::Feedback,
        ElementCode::Explanation,
        ElementCode::Instruction,
        ElementCode::Solution,
        ElementCode::Example,
    ];

    pub fn actor(self) -> Actor {
        match self {
            ElementCode::Assignment
            | ElementCode::Code
            | ElementCode::Error
            | ElementCode::Exploration
            | ElementCode::Request
            | ElementCode::Results => Actor::Student,
            ElementCode::Feedback
            | ElementCode::Explanation
            | ElementCode::Instruction
            | ElementCode::Solution
            | ElementCode::Example => Actor::Ai,
        }
    }

    /// Position in [`ElementCode::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementCode::Assignment => "assignment",
            ElementCode::Code => "code",
            ElementCode::Error => "error",
            ElementCode::Exploration => "exploration",
            ElementCode::Request => "request",
            ElementCode::Results => "results",
            ElementCode::Feedback => "feedback",
            ElementCode::Explanation => "explanation",
            ElementCode::Instruction => "instruction",
            ElementCode::Solution => "solution",
            ElementCode::Example => "example",
        }
    }

    /// Capitalised label, as used for regression predictors.
    pub fn title(self) -> &'static str {
        match self {
            ElementCode::Assignment => "Assignment",
            ElementCode::Code => "Code",
            ElementCode::Error => "Error",
            ElementCode::Exploration => "Exploration",
            ElementCode::Request => "Request",
            ElementCode::Results => "Results",
            ElementCode::Feedback => "Feedback",
            ElementCode::Explanation => "Explanation",
            ElementCode::Instruction => "Instruction",
            ElementCode::Solution => "Solution",
            ElementCode::Example => "Example",
        }
    }
}

impl fmt::Display for ElementCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementCode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        ElementCode::ALL
            .into_iter()
            .find(|c| c.name() == wanted)
            .ok_or_else(|| format!("unknown element code `{}`", s.trim()))
    }
}

/// One coded message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedTurn {
    pub chat_id: String,
    pub student_id: String,
    pub turn_index: u32,
    pub actor: Actor,
    pub elements: Vec<ElementCode>,
}

impl CodedTurn {
    /// Distinct element codes, ignoring order and repetition.
    pub fn element_set(&self) -> BTreeSet<ElementCode> {
        self.elements.iter().copied().collect()
    }
}

/// On-disk record; fields are strings so that errors can name the bad value.
#[derive(Debug, Serialize, Deserialize)]
struct TurnRecord {
    chat_id: String,
    student_id: String,
    turn_index: u32,
    actor: String,
    elements: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Downgrade actor-alternation violations to warnings.
    pub lenient: bool,
}

/// A successfully loaded value together with any non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CodedTurn>", into = "Vec<CodedTurn>")]
pub struct Corpus {
    turns: Vec<CodedTurn>,
    chats: BTreeMap<String, Range<usize>>,
    students: BTreeMap<String, Vec<String>>,
}

impl TryFrom<Vec<CodedTurn>> for Corpus {
    type Error = CorpusError;

    fn try_from(turns: Vec<CodedTurn>) -> Result<Self> {
        Corpus::from_turns(turns, IngestOptions { lenient: true }).map(|l| l.value)
    }
}

impl From<Corpus> for Vec<CodedTurn> {
    fn from(c: Corpus) -> Self {
        c.turns
    }
}

impl Corpus {
    /// Validates `turns` and builds the chat and student indices.
    pub fn from_turns(mut turns: Vec<CodedTurn>, opts: IngestOptions) -> Result<Loaded<Corpus>> {
        for (i, t) in turns.iter().enumerate() {
            check_turn(t, i + 1)?;
        }
        turns.sort_by(|a, b| {
            a.chat_id
                .cmp(&b.chat_id)
                .then(a.turn_index.cmp(&b.turn_index))
        });

        let mut warnings = Vec::new();
        let mut chats: BTreeMap<String, Range<usize>> = BTreeMap::new();
        let mut students: BTreeMap<String, Vec<String>> = BTreeMap::new();

        let mut start = 0;
        while start < turns.len() {
            let chat_id = &turns[start].chat_id;
            let owner = &turns[start].student_id;
            let mut end = start;
            while end < turns.len() && &turns[end].chat_id == chat_id {
                let t = &turns[end];
                if &t.student_id != owner {
                    return Err(CorpusError::ChatOwnerConflict {
                        chat_id: chat_id.clone(),
                        first: owner.clone(),
                        second: t.student_id.clone(),
                    });
                }
                if end > start && turns[end - 1].turn_index == t.turn_index {
                    return Err(CorpusError::DuplicateTurn {
                        chat_id: chat_id.clone(),
                        turn_index: t.turn_index,
                    });
                }
                let expected = if (end - start) % 2 == 0 {
                    Actor::Student
                } else {
                    Actor::Ai
                };
                if t.actor != expected {
                    let err = CorpusError::NonAlternating {
                        chat_id: chat_id.clone(),
                        turn_index: t.turn_index,
                        expected,
                    };
                    if opts.lenient {
                        warnings.push(err.to_string());
                    } else {
                        return Err(err);
                    }
                }
                end += 1;
            }
            chats.insert(chat_id.clone(), start..end);
            students
                .entry(owner.clone())
                .or_default()
                .push(chat_id.clone());
            start = end;
        }

        Ok(Loaded {
            value: Corpus {
                turns,
                chats,
                students,
            },
            warnings,
        })
    }

    pub fn turns(&self) -> &[CodedTurn] {
        &self.turns
    }

    pub fn n_chats(&self) -> usize {
        self.chats.len()
    }

    pub fn chat_ids(&self) -> impl Iterator<Item = &str> {
        self.chats.keys().map(String::as_str)
    }

    /// Turns of one chat in turn order.
    pub fn chat(&self, chat_id: &str) -> Option<&[CodedTurn]> {
        self.chats.get(chat_id).map(|r| &self.turns[r.clone()])
    }

    /// Index range of a chat's turns in [`Corpus::turns`].
    pub fn chat_range(&self, chat_id: &str) -> Option<Range<usize>> {
        self.chats.get(chat_id).cloned()
    }

    /// All chats as `(chat_id, turns)` in chat-id order.
    pub fn chats(&self) -> impl Iterator<Item = (&str, &[CodedTurn])> {
        self.chats
            .iter()
            .map(|(id, r)| (id.as_str(), &self.turns[r.clone()]))
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &str> {
        self.students.keys().map(String::as_str)
    }

    pub fn chats_of(&self, student_id: &str) -> &[String] {
        self.students
            .get(student_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn owner_of(&self, chat_id: &str) -> Option<&str> {
        self.chats
            .get(chat_id)
            .map(|r| self.turns[r.start].student_id.as_str())
    }

    /// Element occurrence counts (with repetition), indexed by [`ElementCode::index`].
    pub fn element_counts(&self, filter: Option<&BTreeSet<String>>) -> [u64; 11] {
        let mut counts = [0u64; 11];
        for t in &self.turns {
            if filter.is_some_and(|f| !f.contains(&t.student_id)) {
                continue;
            }
            for e in &t.elements {
                counts[e.index()] += 1;
            }
        }
        counts
    }

    /// Serialises the corpus back to the line-delimited coded-turn format.
    pub fn to_jsonl(&self) -> String {
        write_turns_jsonl(&self.turns)
    }
}

fn check_turn(t: &CodedTurn, line: usize) -> Result<()> {
    if t.elements.is_empty() {
        return Err(CorpusError::EmptyElements { line });
    }
    if let Some(&element) = t.elements.iter().find(|e| e.actor() != t.actor) {
        return Err(CorpusError::ElementClassMismatch {
            line,
            element,
            actor: t.actor,
        });
    }
    Ok(())
}

pub fn write_turns_jsonl(turns: &[CodedTurn]) -> String {
    let mut out = String::new();
    for t in turns {
        let rec = TurnRecord {
            chat_id: t.chat_id.clone(),
            student_id: t.student_id.clone(),
            turn_index: t.turn_index,
            actor: t.actor.as_str().to_string(),
            elements: t.elements.iter().map(|e| e.name().to_string()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialises"));
        out.push('\n');
    }
    out
}

/// Parses coded-turn records, one JSON object per line, without any
/// cross-turn validation. Blank lines are skipped.
pub fn parse_coded_turns<R: BufRead>(source: R) -> Result<Vec<CodedTurn>> {
    let mut turns = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TurnRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let actor: Actor = rec.actor.parse().map_err(|message| CorpusError::Malformed {
            line: line_no,
            message,
        })?;
        let elements = rec
            .elements
            .iter()
            .map(|s| s.parse::<ElementCode>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|message| CorpusError::Malformed {
                line: line_no,
                message,
            })?;
        let turn = CodedTurn {
            chat_id: rec.chat_id,
            student_id: rec.student_id,
            turn_index: rec.turn_index,
            actor,
            elements,
        };
        check_turn(&turn, line_no)?;
        turns.push(turn);
    }
    Ok(turns)
}

/// Reads and validates a coded-turn file.
pub fn ingest_coded_turns<R: BufRead>(source: R, opts: IngestOptions) -> Result<Loaded<Corpus>> {
    let turns = parse_coded_turns(source)?;
    Corpus::from_turns(turns, opts)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradeBook {
    pub entries: BTreeMap<String, f64>,
}

impl GradeBook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, student_id: &str) -> Option<f64> {
        self.entries.get(student_id).copied()
    }
}

/// Reads `student_id,grade` rows. A first row whose grade column does not
/// parse as a number is treated as a header.
pub fn ingest_grades<R: Read>(source: R) -> Result<Loaded<GradeBook>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);

    let mut book = GradeBook::default();
    let mut warnings = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CorpusError::Malformed {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(CorpusError::Malformed {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let student_id = record[0].to_string();
        let raw = &record[1];
        let grade: f64 = match raw.parse() {
            Ok(g) => g,
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(CorpusError::UnparseableGrade {
                    line,
                    value: raw.to_string(),
                })
            }
        };
        if !(0.0..=1.0).contains(&grade) {
            return Err(CorpusError::GradeOutOfRange {
                line,
                student_id,
                grade,
            });
        }
        if book.entries.insert(student_id.clone(), grade).is_some() {
            return Err(CorpusError::DuplicateStudent { line, student_id });
        }
    }
    if book.is_empty() {
        warnings.push("grade file contains no entries".to_string());
    }
    Ok(Loaded {
        value: book,
        warnings,
    })
}

/// Performance quartile; `Q1` holds the highest grades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quartile {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quartile {
    pub const ALL: [Quartile; 4] = [Quartile::Q1, Quartile::Q2, Quartile::Q3, Quartile::Q4];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Quartile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.index() + 1)
    }
}

impl FromStr for Quartile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Q1" => Ok(Quartile::Q1),
            "Q2" => Ok(Quartile::Q2),
            "Q3" => Ok(Quartile::Q3),
            "Q4" => Ok(Quartile::Q4),
            other => Err(format!("unknown quartile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Quartile,
    pub n_students: usize,
    pub mean_grade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub groups: BTreeMap<String, Quartile>,
    pub summary: Vec<GroupSummary>,
}

impl GroupAssignment {
    pub fn members(&self, q: Quartile) -> BTreeSet<String> {
        self.groups
            .iter()
            .filter(|(_, g)| **g == q)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for g in self.groups.values() {
            sizes[g.index()] += 1;
        }
        sizes
    }
}

/// Default split: `n / 4` students per quartile, remainder given to the
/// earlier quartiles.
pub fn default_quartile_sizes(n: usize) -> [usize; 4] {
    let base = n / 4;
    let rem = n % 4;
    std::array::from_fn(|i| base + usize::from(i < rem))
}

pub fn stratify_quartiles(gradebook: &GradeBook) -> Result<GroupAssignment> {
    stratify_with_sizes(gradebook, default_quartile_sizes(gradebook.len()))
}

/// Ranks students by descending grade (ties by ascending id) and cuts the
/// ranking into four contiguous groups of the given sizes.
pub fn stratify_with_sizes(gradebook: &GradeBook, sizes: [usize; 4]) -> Result<GroupAssignment> {
    let n = gradebook.len();
    if n < 4 {
        return Err(CorpusError::InsufficientStudents(n));
    }
    if sizes.iter().sum::<usize>() != n {
        return Err(CorpusError::SizeMismatch { sizes, n });
    }
    let mut ranked: Vec<(&String, f64)> = gradebook.entries.iter().map(|(s, g)| (s, *g)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut groups = BTreeMap::new();
    let mut summary = Vec::with_capacity(4);
    let mut cursor = 0;
    for (q, &size) in Quartile::ALL.iter().zip(sizes.iter()) {
        let slice = &ranked[cursor..cursor + size];
        for (s, _) in slice {
            groups.insert((*s).clone(), *q);
        }
        let mean_grade = if size == 0 {
            f64::NAN
        } else {
            slice.iter().map(|(_, g)| g).sum::<f64>() / size as f64
        };
        summary.push(GroupSummary {
            group: *q,
            n_students: size,
            mean_grade,
        });
        cursor += size;
    }
    Ok(GroupAssignment { groups, summary })
}
