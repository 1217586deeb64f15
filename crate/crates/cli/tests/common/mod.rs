#![allow(dead_code)]

use std::path::{Path, PathBuf};

use helpseek_core::corpus::{write_turns_jsonl, Actor, CodedTurn, ElementCode};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub turns: PathBuf,
    pub grades: PathBuf,
    pub out: PathBuf,
}

/// Random coded dialogues for `students` students plus a grade file.
/// Students listed in `grade_only` get a (low) grade but no chats.
pub fn write_fixture(dir: &Path, seed: u64, students: usize, grade_only: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = Vec::new();
    let mut grades = String::from("student_id,grade\n");
    for s in 0..students {
        let student_id = format!("s{s:03}");
        grades.push_str(&format!("{student_id},{:.3}\n", rng.random_range(0.3..1.0)));
        for c in 0..rng.random_range(1..=3) {
            for t in 0..rng.random_range(2..=8u32) {
                let actor = if t % 2 == 0 { Actor::Student } else { Actor::Ai };
                let pool: &[ElementCode] = match actor {
                    Actor::Student => &ElementCode::STUDENT,
                    Actor::Ai => &ElementCode::AI,
                };
                let k = rng.random_range(1..=3);
                let elements = pool.choose_multiple(&mut rng, k).copied().collect();
                turns.push(CodedTurn {
                    chat_id: format!("{student_id}-c{c}"),
                    student_id: student_id.clone(),
                    turn_index: t,
                    actor,
                    elements,
                });
            }
        }
    }
    for g in 0..grade_only {
        grades.push_str(&format!("absent{g:02},0.{g:02}\n"));
    }
    let fx = Fixture {
        turns: dir.join("turns.jsonl"),
        grades: dir.join("grades.csv"),
        out: dir.join("out"),
    };
    std::fs::write(&fx.turns, write_turns_jsonl(&turns)).unwrap();
    std::fs::write(&fx.grades, grades).unwrap();
    fx
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn helpseek(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("helpseek").chain(args.iter().copied());
    let code = helpseek_cli::main_with_args(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

impl Fixture {
    /// Common flags followed by `extra`.
    pub fn args<'a>(&'a self, extra: &[&'a str]) -> Vec<&'a str> {
        let mut v = vec![
            "--input",
            self.turns.to_str().unwrap(),
            "--grades",
            self.grades.to_str().unwrap(),
            "--out",
            self.out.to_str().unwrap(),
            "--seed",
            "11",
            "--n-perm",
            "199",
        ];
        v.extend_from_slice(extra);
        v
    }

    pub fn run(&self, stage: &str, extra: &[&str]) -> Outcome {
        let mut argv = vec![stage];
        argv.extend(self.args(extra));
        helpseek(&argv)
    }

    pub fn run_ok(&self, stage: &str, extra: &[&str]) -> Outcome {
        let o = self.run(stage, extra);
        assert_eq!(o.code, 0, "{stage} failed: {}", o.stderr);
        o
    }

    /// Every stage at both granularities, then the report.
    pub fn full_pipeline(&self, extra: &[&str]) {
        self.run_ok("ingest", extra);
        self.run_ok("classify", extra);
        for g in ["element", "type"] {
            let mut e = extra.to_vec();
            e.extend(["--granularity", g]);
            for stage in ["fit", "compare", "residuals", "patterns", "regress"] {
                self.run_ok(stage, &e);
            }
        }
        self.run_ok("export-report", extra);
    }
}

/// Name-sorted `(file name, bytes)` of every file in `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
