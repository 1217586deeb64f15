//! Random coded corpora for property tests.

#![allow(dead_code)]

use helpseek_core::corpus::{Actor, CodedTurn, Corpus, ElementCode, GradeBook, IngestOptions};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Shape {
    pub students: usize,
    pub max_chats: usize,
    pub max_turns: usize,
    pub max_elements: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            students: 6,
            max_chats: 3,
            max_turns: 8,
            max_elements: 3,
        }
    }
}

/// Alternating chats starting with a student prompt, random element lists
/// (repeats allowed) drawn from the right actor class.
pub fn random_turns(seed: u64, shape: &Shape) -> Vec<CodedTurn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = Vec::new();
    for s in 0..shape.students {
        let student_id = format!("{}s{s:02}", if seed % 2 == 0 { "" } else { "x" });
        for c in 0..rng.random_range(1..=shape.max_chats) {
            let chat_id = format!("{student_id}-c{c}");
            for t in 0..rng.random_range(1..=shape.max_turns) {
                let actor = if t % 2 == 0 { Actor::Student } else { Actor::Ai };
                let pool: &[ElementCode] = match actor {
                    Actor::Student => &ElementCode::STUDENT,
                    Actor::Ai => &ElementCode::AI,
                };
                let k = rng.random_range(1..=shape.max_elements);
                let elements = (0..k).map(|_| *pool.choose(&mut rng).unwrap()).collect();
                turns.push(CodedTurn {
                    chat_id: chat_id.clone(),
                    student_id: student_id.clone(),
                    turn_index: t as u32,
                    actor,
                    elements,
                });
            }
        }
    }
    turns
}

pub fn random_corpus(seed: u64, shape: &Shape) -> Corpus {
    Corpus::from_turns(random_turns(seed, shape), IngestOptions::default())
        .expect("generated corpus is valid")
        .value
}

pub fn random_grades(seed: u64, corpus: &Corpus) -> GradeBook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    GradeBook {
        entries: corpus
            .student_ids()
            .map(|s| (s.to_string(), rng.random_range(0.5..1.0)))
            .collect(),
    }
}

/// Chains over `n_states` labelled `S0, S1, ...`.
pub fn random_chains(rng: &mut ChaCha8Rng, n_chains: usize, n_states: usize, max_len: usize) -> Vec<Vec<usize>> {
    (0..n_chains)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            (0..len).map(|_| rng.random_range(0..n_states)).collect()
        })
        .collect()
}
