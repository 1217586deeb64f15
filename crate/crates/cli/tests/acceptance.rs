//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p helpseek --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use helpseek_core::codes::{annotate_types, classify_ai_role, classify_prompt_type, AiRole, PromptType};
use helpseek_core::corpus::{Actor, CodedTurn, Corpus, ElementCode, IngestOptions};
use helpseek_core::htna::{fit_network, Alphabet, Granularity, NodeClass, SequenceSet};
use helpseek_core::regress::{
    fit_ols, render_regression_table, vif, vif_filter, Coefficient, FeatureMatrix, RegressionSummary, VifEntry,
};
use helpseek_core::stats::{
    compare_edges, mine_patterns, render_pattern_table, residual_analysis, ContingencyTable, PatternConfig,
    PatternStats, PermutationConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

fn alphabet(n: usize) -> Alphabet {
    Alphabet::new(labels(n).into_iter().enumerate().map(|(i, l)| {
        let class = if i % 2 == 0 { NodeClass::Student } else { NodeClass::Ai };
        (l, class)
    }))
}

/// Chains as a sequence set; chat `i` of `prefix` belongs to student `{prefix}{i}`.
fn sequence_set(n_states: usize, prefix: &str, chains: &[Vec<usize>]) -> SequenceSet {
    let names = labels(n_states);
    let labelled = chains.iter().enumerate().map(|(i, c)| {
        let states: Vec<String> = c.iter().map(|&s| names[s].clone()).collect();
        (format!("{prefix}-chat{i:03}"), format!("{prefix}{i:03}"), states)
    });
    SequenceSet::from_labelled(alphabet(n_states), Granularity::Type, labelled).unwrap()
}

fn random_chains(rng: &mut ChaCha8Rng, n_chains: usize, n_states: usize, max_len: usize) -> Vec<Vec<usize>> {
    (0..n_chains)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            (0..len).map(|_| rng.random_range(0..n_states)).collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 1. Classifier partition

/// `(Exploration, any contextual element, Error)` to prompt type. Error is
/// contextual, so rows with Error but no contextual element cannot occur.
const PROMPT_RULES: [((bool, bool, bool), Option<PromptType>); 8] = [
    ((true, false, false), Some(PromptType::Inquire)),
    ((true, false, true), None),
    ((true, true, false), Some(PromptType::Integrate)),
    ((true, true, true), Some(PromptType::Integrate)),
    ((false, false, false), Some(PromptType::Delegate)),
    ((false, false, true), None),
    ((false, true, false), Some(PromptType::Delegate)),
    ((false, true, true), Some(PromptType::Debug)),
];

/// `(Solution, Feedback)` to AI role.
const ROLE_RULES: [((bool, bool), AiRole); 4] = [
    ((true, false), AiRole::Executor),
    ((true, true), AiRole::Collaborator),
    ((false, true), AiRole::Evaluator),
    ((false, false), AiRole::Tutor),
];

fn subsets(pool: &[ElementCode]) -> Vec<Vec<ElementCode>> {
    (1u32..1 << pool.len())
        .map(|mask| (0..pool.len()).filter(|i| mask >> i & 1 == 1).map(|i| pool[i]).collect())
        .collect()
}

fn ac1() -> Check {
    let start = Instant::now();
    use ElementCode::*;
    let student = subsets(&ElementCode::STUDENT);
    let ai = subsets(&ElementCode::AI);
    ensure(student.len() == 63 && ai.len() == 31, || "subset enumeration".into())?;

    let mut expected_prompts = Vec::new();
    for s in &student {
        let key = (
            s.contains(&Exploration),
            s.iter().any(|e| matches!(e, Code | Assignment | Results | Error)),
            s.contains(&Error),
        );
        let want = PROMPT_RULES.iter().find(|(k, _)| *k == key).unwrap().1.unwrap();
        let got = classify_prompt_type(s).map_err(|e| format!("{s:?}: {e}"))?;
        ensure(got == want, || format!("{s:?}: got {got:?}, rule table says {want:?}"))?;
        expected_prompts.push(want);
    }
    let mut expected_roles = Vec::new();
    for s in &ai {
        let key = (s.contains(&Solution), s.contains(&Feedback));
        let want = ROLE_RULES.iter().find(|(k, _)| *k == key).unwrap().1;
        let got = classify_ai_role(s).map_err(|e| format!("{s:?}: {e}"))?;
        ensure(got == want, || format!("{s:?}: got {got:?}, rule table says {want:?}"))?;
        expected_roles.push(want);
    }

    // The same subsets as a corpus, one student turn and one AI turn per chat.
    let mut turns = Vec::new();
    for (i, s) in student.iter().enumerate() {
        let chat_id = format!("c{i:02}");
        let student_id = format!("u{i:02}");
        turns.push(CodedTurn {
            chat_id: chat_id.clone(),
            student_id: student_id.clone(),
            turn_index: 0,
            actor: Actor::Student,
            elements: s.clone(),
        });
        turns.push(CodedTurn {
            chat_id,
            student_id,
            turn_index: 1,
            actor: Actor::Ai,
            elements: ai[i % ai.len()].clone(),
        });
    }
    let corpus = Corpus::from_turns(turns, IngestOptions::default()).map_err(|e| e.to_string())?.value;
    let typed = annotate_types(corpus).map_err(|e| e.to_string())?;
    let counts = typed.type_counts(None);
    ensure(counts[..4].iter().sum::<u64>() == 63, || format!("prompt partition {counts:?}"))?;
    ensure(counts[4..].iter().sum::<u64>() == 63, || format!("role partition {counts:?}"))?;
    for (i, p) in PromptType::ALL.iter().enumerate() {
        let n = expected_prompts.iter().filter(|x| *x == p).count() as u64;
        ensure(counts[i] == n, || format!("{p:?}: {} vs {n}", counts[i]))?;
    }
    let mut role_sizes = [0u64; 4];
    for i in 0..63 {
        role_sizes[AiRole::ALL.iter().position(|r| *r == expected_roles[i % 31]).unwrap()] += 1;
    }
    ensure(counts[4..] == role_sizes, || format!("roles {:?} vs {role_sizes:?}", &counts[4..]))?;

    let elapsed = start.elapsed();
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    Ok(format!("63 + 31 subsets agree with the rule table in {elapsed:.1?}"))
}

// ---------------------------------------------------------------------------
// 2. Markov fit

fn ac2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for rep in 0..100 {
        let n = rng.random_range(1..=12);
        let n_chains = rng.random_range(1..=50);
        let chains = random_chains(&mut rng, n_chains, n, 25);
        let net = fit_network(&sequence_set(n, "u", &chains)).map_err(|e| e.to_string())?;

        let mut pairs = vec![vec![0u64; n]; n];
        let mut starts = vec![0u64; n];
        for c in &chains {
            starts[c[0]] += 1;
            for w in c.windows(2) {
                pairs[w[0]][w[1]] += 1;
            }
        }
        ensure(net.counts == pairs, || format!("corpus {rep}: transition counts differ"))?;
        ensure(net.initial_counts == starts, || format!("corpus {rep}: initial counts differ"))?;
        for i in 0..n {
            let row: u64 = pairs[i].iter().sum();
            let sum: f64 = net.transition[i].iter().sum();
            if row == 0 {
                ensure(net.transition[i].iter().all(|&p| p == 0.0), || format!("corpus {rep}: zero row {i}"))?;
                continue;
            }
            for j in 0..n {
                let want = pairs[i][j] as f64 / row as f64;
                ensure((net.transition[i][j] - want).abs() <= 1e-12, || {
                    format!("corpus {rep}: P[{i}][{j}] = {} vs {want}", net.transition[i][j])
                })?;
            }
            ensure((sum - 1.0).abs() <= 1e-12, || format!("corpus {rep}: row {i} sums to {sum}"))?;
        }
        for s in 0..n {
            let want = starts[s] as f64 / chains.len() as f64;
            ensure((net.initial[s] - want).abs() <= 1e-12, || format!("corpus {rep}: initial[{s}]"))?;
        }
        let init: f64 = net.initial.iter().sum();
        ensure((init - 1.0).abs() <= 1e-12, || format!("corpus {rep}: initial sums to {init}"))?;
    }
    Ok("100 corpora match pair counting".into())
}

// ---------------------------------------------------------------------------
// 3. Permutation exactness

/// Pooled transition weights of the chains selected by `mask`.
fn pooled_weights(chains: &[Vec<usize>], n: usize, mask: u32, in_group: bool) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0u64; n]; n];
    for (u, chain) in chains.iter().enumerate() {
        if (mask >> u & 1 == 1) != in_group {
            continue;
        }
        for w in chain.windows(2) {
            c[w[0]][w[1]] += 1;
        }
    }
    c.iter()
        .map(|row| {
            let t: u64 = row.iter().sum();
            row.iter().map(|&x| if t == 0 { 0.0 } else { x as f64 / t as f64 }).collect()
        })
        .collect()
}

/// Exact two-sided p-values over every split of the pooled units.
fn exhaustive_p(chains: &[Vec<usize>], n: usize, n_a: usize) -> Vec<Vec<f64>> {
    let units = chains.len();
    let observed_mask = (1u32 << n_a) - 1;
    let diff = |mask: u32| {
        let a = pooled_weights(chains, n, mask, true);
        let b = pooled_weights(chains, n, mask, false);
        (0..n).map(|i| (0..n).map(|j| a[i][j] - b[i][j]).collect::<Vec<_>>()).collect::<Vec<_>>()
    };
    let obs = diff(observed_mask);
    let mut hits = vec![vec![0u64; n]; n];
    let mut total = 0u64;
    for mask in 0u32..1 << units {
        if mask.count_ones() as usize != n_a {
            continue;
        }
        total += 1;
        let d = diff(mask);
        for i in 0..n {
            for j in 0..n {
                if d[i][j].abs() >= obs[i][j].abs() - 1e-12 {
                    hits[i][j] += 1;
                }
            }
        }
    }
    hits.iter()
        .map(|r| r.iter().map(|&h| h as f64 / total as f64).collect())
        .collect()
}

fn ac3() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut edges = 0;
    for (case, (n_a, n_b)) in [(5, 5), (4, 6), (3, 4), (2, 3), (5, 4)].into_iter().enumerate() {
        let n = 3;
        let chains = random_chains(&mut rng, n_a + n_b, n, 12);
        let a = sequence_set(n, "a", &chains[..n_a]);
        let b = sequence_set(n, "b", &chains[n_a..]);
        let cfg = PermutationConfig::new(10_000, 100 + case as u64);
        let result = compare_edges(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let exact = exhaustive_p(&chains, n, n_a);
        for e in &result {
            let i = a.alphabet().index_of(&e.from_state).unwrap();
            let j = a.alphabet().index_of(&e.to_state).unwrap();
            let gap = (e.p_value - exact[i][j]).abs();
            worst = worst.max(gap);
            edges += 1;
            ensure(gap <= 0.05, || {
                format!("case {case} {}->{}: sampled {} vs exact {}", e.from_state, e.to_state, e.p_value, exact[i][j])
            })?;
        }

        let twin = sequence_set(n, "b", &chains[..n_a]);
        for e in compare_edges(&a, &twin, &cfg).map_err(|e| e.to_string())? {
            ensure(e.diff == 0.0 && e.p_value >= 0.9, || {
                format!("identical groups: {}->{} diff {} p {}", e.from_state, e.to_state, e.diff, e.p_value)
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed.as_secs_f64() < 30.0, || format!("took {elapsed:?}"))?;
    Ok(format!("{edges} edges, max |sampled - exact| = {worst:.4}, {elapsed:.1?}"))
}

// ---------------------------------------------------------------------------
// 4. Chi-square and residuals

fn ac4() -> Check {
    let t = ContingencyTable::new(
        vec!["A".into(), "B".into()],
        vec!["x".into(), "y".into()],
        vec![vec![10, 20], vec![20, 10]],
    )
    .map_err(|e| e.to_string())?;
    let r = residual_analysis(&t, 999, 4, None).map_err(|e| e.to_string())?;
    ensure((r.chi_square - 6.667).abs() <= 1e-3 && r.df == 1, || {
        format!("x2 = {}, df = {}", r.chi_square, r.df)
    })?;
    // Residuals: (10 - 15) / sqrt(15).
    let res = r.residuals[0][0].unwrap();
    ensure((res + 5.0 / 15f64.sqrt()).abs() < 1e-12, || format!("residual {res}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dfs = Vec::new();
    for (codes, want) in [(11usize, 10usize), (8, 7)] {
        let names: Vec<String> = (0..codes).map(|i| format!("k{i}")).collect();
        let row = |rng: &mut ChaCha8Rng| (0..codes).map(|_| rng.random_range(1..200)).collect::<Vec<u64>>();
        let (a, b) = (row(&mut rng), row(&mut rng));
        let t = ContingencyTable::two_groups("Q1", &a, "Q4", &b, &names).map_err(|e| e.to_string())?;
        let r = residual_analysis(&t, 99, 5, None).map_err(|e| e.to_string())?;
        ensure(r.df == want, || format!("2 x {codes}: df {}", r.df))?;
        dfs.push(r.df);
    }
    Ok(format!("x2 = {:.3} (df 1); layouts give df {} and {}", r.chi_square, dfs[0], dfs[1]))
}

// ---------------------------------------------------------------------------
// 5. Pattern mining

fn windows(chains: &[Vec<usize>], k: usize) -> (BTreeMap<Vec<usize>, u64>, u64) {
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for c in chains {
        for w in c.windows(k) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
            total += 1;
        }
    }
    (counts, total)
}

fn ac5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0usize;
    for rep in 0..100 {
        let n = rng.random_range(2..=5);
        let (na, nb) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let ca = random_chains(&mut rng, na, n, 12);
        let cb = random_chains(&mut rng, nb, n, 12);
        let a = sequence_set(n, "a", &ca);
        let b = sequence_set(n, "b", &cb);
        let cfg = PatternConfig {
            min_len: 2,
            max_len: 5,
            top_k: None,
            alpha: 1.0 + 1e-9,
        };
        let mined = mine_patterns(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let mut seen: BTreeMap<usize, (u64, u64, usize)> = BTreeMap::new();
        for p in &mined {
            let key: Vec<usize> = p.pattern.iter().map(|l| a.alphabet().index_of(l).unwrap()).collect();
            let k = key.len();
            let (wa_counts, wa) = windows(&ca, k);
            let (wb_counts, wb) = windows(&cb, k);
            let n_a = wa_counts.get(&key).copied().unwrap_or(0);
            let n_b = wb_counts.get(&key).copied().unwrap_or(0);
            ensure(p.n_a == n_a && p.n_b == n_b, || format!("corpus {rep} {:?}: counts", p.pattern))?;
            ensure(p.windows_a == wa && p.windows_b == wb, || format!("corpus {rep}: windows of length {k}"))?;
            ensure(p.prop_a == n_a as f64 / wa as f64 && p.prop_b == n_b as f64 / wb as f64, || {
                format!("corpus {rep} {:?}: proportions", p.pattern)
            })?;
            let e = seen.entry(k).or_default();
            e.0 += p.n_a;
            e.1 += p.n_b;
            e.2 += 1;
        }
        for k in 2..=5 {
            let (ma, wa) = windows(&ca, k);
            let (mb, wb) = windows(&cb, k);
            let expected_a: u64 = ca.iter().map(|c| (c.len() + 1).saturating_sub(k) as u64).sum();
            ensure(wa == expected_a, || format!("corpus {rep}: window accounting for k = {k}"))?;
            if wa == 0 || wb == 0 {
                ensure(!seen.contains_key(&k), || format!("corpus {rep}: length {k} has no windows"))?;
                continue;
            }
            let distinct: BTreeSet<&Vec<usize>> = ma.keys().chain(mb.keys()).collect();
            let (sa, sb, ns) = seen.get(&k).copied().unwrap_or_default();
            ensure(sa == wa && sb == wb && ns == distinct.len(), || {
                format!("corpus {rep}: length {k} patterns do not partition the windows")
            })?;
            checked += ns;
        }
    }

    // Length-3 type patterns with reference Q1 and Q4 counts, padded
    // with filler windows up to denominators of 4693 and 2415.
    let states = ["Delegate", "Executor", "Tutor", "Inquire", "Collaborator", "Debug", "Evaluator"];
    let alpha = Alphabet::new(states.iter().map(|s| (s.to_string(), NodeClass::Student)));
    let rows: [([&str; 3], u64, u64); 5] = [
        (["Delegate", "Executor", "Delegate"], 413, 259),
        (["Tutor", "Inquire", "Tutor"], 352, 143),
        (["Inquire", "Tutor", "Inquire"], 261, 86),
        (["Delegate", "Tutor", "Delegate"], 242, 171),
        (["Delegate", "Collaborator", "Delegate"], 85, 65),
    ];
    let group = |prefix: &str, total: u64, pick: fn(&([&str; 3], u64, u64)) -> u64| {
        let mut chains: Vec<Vec<&str>> = Vec::new();
        for r in &rows {
            chains.extend((0..pick(r)).map(|_| r.0.to_vec()));
        }
        while (chains.len() as u64) < total {
            chains.push(vec!["Debug", "Evaluator", "Debug"]);
        }
        let labelled = chains
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("{prefix}{i}"), format!("{prefix}{i}"), c));
        SequenceSet::from_labelled(alpha.clone(), Granularity::Type, labelled).unwrap()
    };
    let q1 = group("a", 4693, |r| r.1);
    let q4 = group("b", 2415, |r| r.2);
    let cfg = PatternConfig {
        min_len: 3,
        max_len: 3,
        top_k: None,
        alpha: 1.0 + 1e-9,
    };
    let mined = mine_patterns(&q1, &q4, &cfg).map_err(|e| e.to_string())?;
    let reference = [
        ("Delegate->Executor->Delegate", "0.088", "0.107"),
        ("Tutor->Inquire->Tutor", "0.075", "0.059"),
        ("Inquire->Tutor->Inquire", "0.056", "0.036"),
        ("Delegate->Tutor->Delegate", "0.052", "0.071"),
        ("Delegate->Collaborator->Delegate", "0.018", "0.027"),
    ];
    for (pattern, pa, pb) in reference {
        let p = mined
            .iter()
            .find(|p| p.pattern.join("->") == pattern)
            .ok_or_else(|| format!("{pattern} not mined"))?;
        let (ga, gb) = (format!("{:.3}", p.prop_a), format!("{:.3}", p.prop_b));
        ensure(ga == pa && gb == pb, || format!("{pattern}: {ga}/{gb} vs {pa}/{pb}"))?;
    }
    let implied = 413.0 / 0.088;
    ensure((implied - 4693.0f64).abs() < 1.0, || format!("413 / 0.088 = {implied}"))?;
    let (lo, hi) = (413.0 / 0.0885, 413.0 / 0.0875);
    ensure(lo <= 4693.0 && 4693.0 <= hi, || "4693 outside the rounding interval".into())?;
    Ok(format!(
        "{checked} patterns match enumeration; 413 / 0.088 = {implied:.1}, window range [{lo:.0}, {hi:.0}]"
    ))
}

// ---------------------------------------------------------------------------
// 6. OLS

struct Oracle {
    beta: Vec<f64>,
    se: Vec<f64>,
    r2: f64,
    f: f64,
}

/// Solves the normal equations `X'X b = X'y` by Gauss-Jordan elimination
/// with partial pivoting, which also yields `(X'X)^-1`.
fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Oracle {
    let n = y.len();
    let p = cols.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { cols[j - 1][i] };
    let mut m = vec![vec![0.0; 2 * p + 1]; p];
    for a in 0..p {
        for b in 0..p {
            m[a][b] = (0..n).map(|i| x(i, a) * x(i, b)).sum();
        }
        m[a][p + a] = 1.0;
        m[a][2 * p] = (0..n).map(|i| x(i, a) * y[i]).sum();
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&r, &s| m[r][c].abs().total_cmp(&m[s][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|a| m[a][2 * p]).collect();
    let fitted: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x(i, j) * beta[j]).sum()).collect();
    let rss: f64 = (0..n).map(|i| (y[i] - fitted[i]).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let df = (n - p) as f64;
    let s2 = rss / df;
    Oracle {
        se: (0..p).map(|a| (s2 * m[a][p + a]).sqrt()).collect(),
        beta,
        r2: 1.0 - rss / tss,
        f: ((tss - rss) / (p - 1) as f64) / s2,
    }
}

fn matrix(cols: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureMatrix {
    let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
    let ids = (0..y.len()).map(|i| format!("r{i}")).collect();
    FeatureMatrix::new(ids, names, cols, y).unwrap()
}

fn ac6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for rep in 0..50 {
        let p = rng.random_range(1..=6);
        let n = rng.random_range(p + 5..=60);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.5 + cols.iter().enumerate().map(|(j, c)| (j as f64 - 1.0) * c[i]).sum::<f64>() + rng.random_range(-1.0..1.0))
            .collect();
        let oracle = normal_equations(&cols, &y);
        let s = fit_ols(&matrix(cols, y)).map_err(|e| format!("design {rep}: {e}"))?;
        let mut cmp = |what: &str, got: f64, want: f64| {
            let rel = (got - want).abs() / want.abs().max(1e-300);
            worst = worst.max(rel);
            ensure(close(got, want, 1e-8), || format!("design {rep} {what}: {got} vs {want}"))
        };
        for (j, c) in s.coefficients.iter().enumerate() {
            cmp("estimate", c.estimate, oracle.beta[j])?;
            cmp("std error", c.std_error, oracle.se[j])?;
            cmp("t", c.t_value, oracle.beta[j] / oracle.se[j])?;
        }
        cmp("R2", s.r_squared, oracle.r2)?;
        cmp("F", s.f_statistic.unwrap(), oracle.f)?;
    }

    // Exact fit y = 1 + 2a - 3b.
    let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..10).map(|i| ((i * i) % 7) as f64).collect();
    let y: Vec<f64> = (0..10).map(|i| 1.0 + 2.0 * a[i] - 3.0 * b[i]).collect();
    let s = fit_ols(&matrix(vec![a, b], y)).map_err(|e| e.to_string())?;
    let est: Vec<f64> = s.coefficients.iter().map(|c| c.estimate).collect();
    ensure(
        est.iter().zip([1.0, 2.0, -3.0]).all(|(g, w)| (g - w).abs() < 1e-10) && (s.r_squared - 1.0).abs() < 1e-12,
        || format!("exact fit: {est:?}, R2 {}", s.r_squared),
    )?;

    // Intercept only: the mean, with standard error sd / sqrt(n).
    let y = vec![1.0, 2.0, 4.0, 7.0];
    let s = fit_ols(&matrix(vec![], y)).map_err(|e| e.to_string())?;
    let c = &s.coefficients[0];
    // Deviations -2.5, -1.5, 0.5, 3.5 give a sample variance of 21 / 3.
    let se = (21.0 / 3.0 / 4.0f64).sqrt();
    ensure((c.estimate - 3.5).abs() < 1e-12 && (c.std_error - se).abs() < 1e-12 && s.f_statistic.is_none(), || {
        format!("intercept only: {c:?}")
    })?;

    // Orthogonal +-1 contrasts.
    let h = |k: u32| (0..8).map(|i: u32| if (i >> k) & 1 == 0 { 1.0 } else { -1.0 }).collect::<Vec<f64>>();
    let y: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 + (i % 3) as f64).collect();
    let m = matrix(vec![h(0), h(1), h(2)], y.clone());
    ensure(vif(&m).iter().all(|v| (v.vif - 1.0).abs() < 1e-12), || "orthogonal VIF".into())?;
    ensure(vif_filter::<&str>(&m, 5.0, None).map_err(|e| e.to_string())?.dropped.is_empty(), || {
        "orthogonal design lost a column".into()
    })?;

    // Duplicated column.
    let base: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64).collect();
    let other: Vec<f64> = (0..12).map(|i| ((i * 3) % 4) as f64).collect();
    let y: Vec<f64> = (0..12).map(|i| base[i] - other[i] + (i % 2) as f64).collect();
    let m = FeatureMatrix::new(
        (0..12).map(|i| format!("r{i}")).collect(),
        vec!["a".into(), "b".into(), "a2".into()],
        vec![base.clone(), other, base],
        y,
    )
    .unwrap();
    let report = vif_filter::<&str>(&m, 5.0, None).map_err(|e| e.to_string())?;
    ensure(
        report.dropped.len() == 1 && report.dropped[0].name == "a2" && report.dropped[0].collinear,
        || format!("duplicate column: dropped {:?}", report.dropped),
    )?;
    ensure(fit_ols(&report.matrix).is_ok(), || "reduced design does not fit".into())?;
    Ok(format!("50 designs, max relative error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 7. Determinism

fn ac7() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for run in ["first", "second"] {
        let sub = dir.path().join(run);
        std::fs::create_dir_all(&sub).unwrap();
        let fx = common::write_fixture(&sub, 77, 48, 0);
        fx.full_pipeline(&[]);
        reports.push(common::snapshot(&fx.out.join("report")));
    }
    ensure(!reports[0].is_empty() && reports[0] == reports[1], || "reports differ between runs".into())?;

    let fx = common::write_fixture(dir.path(), 78, 48, 0);
    fx.run_ok("ingest", &[]);
    let mut per_workers = Vec::new();
    for w in ["1", "4", "8"] {
        fx.run_ok("fit", &["--workers", w]);
        fx.run_ok("compare", &["--workers", w]);
        fx.run_ok("residuals", &["--workers", w]);
        per_workers.push((
            std::fs::read(fx.out.join("comparison_element.json")).unwrap(),
            std::fs::read(fx.out.join("residuals_element.json")).unwrap(),
        ));
    }
    ensure(per_workers.windows(2).all(|w| w[0] == w[1]), || "p-values depend on the worker count".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = sequence_set(6, "a", &random_chains(&mut rng, 40, 6, 15));
    let b = sequence_set(6, "b", &random_chains(&mut rng, 40, 6, 15));
    let ps: Vec<Vec<f64>> = [1, 4, 8]
        .iter()
        .map(|&w| {
            let mut cfg = PermutationConfig::new(2000, 9);
            cfg.workers = Some(w);
            compare_edges(&a, &b, &cfg).unwrap().iter().map(|e| e.p_value).collect()
        })
        .collect();
    ensure(ps[0] == ps[1] && ps[1] == ps[2], || "edge p-values differ across workers".into())?;
    Ok(format!("{} report files byte-identical; p identical at 1/4/8 workers", reports[0].len()))
}

// ---------------------------------------------------------------------------
// 8. Power

/// Chains over states S0, S1, S2 starting at S0. From S0 the next state is
/// S1 with probability `gap` and S2 otherwise; S1 and S2 move uniformly.
fn power_group(rng: &mut ChaCha8Rng, chats: usize, gap: f64) -> Vec<Vec<usize>> {
    (0..chats)
        .map(|_| {
            let mut chain = vec![0];
            while chain.len() < 6 {
                let cur = *chain.last().unwrap();
                let next = if cur == 0 {
                    if rng.random_bool(gap) { 1 } else { 2 }
                } else {
                    rng.random_range(0..3)
                };
                chain.push(next);
            }
            chain
        })
        .collect()
}

fn edge_significant(seed: u64, gap_a: f64, gap_b: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = sequence_set(3, "a", &power_group(&mut rng, 100, gap_a));
    let b = sequence_set(3, "b", &power_group(&mut rng, 100, gap_b));
    let cfg = PermutationConfig::new(999, seed ^ 0x5eed);
    compare_edges(&a, &b, &cfg)
        .unwrap()
        .iter()
        .find(|e| e.from_state == "S0" && e.to_state == "S1")
        .is_some_and(|e| e.significant)
}

fn ac8() -> Check {
    let hits = (0..100).filter(|&r| edge_significant(1000 + r, 0.8, 0.2)).count();
    let false_pos = (0..100).filter(|&r| edge_significant(5000 + r, 0.5, 0.5)).count();
    ensure(hits >= 95, || format!("power {hits}/100"))?;
    ensure(false_pos <= 10, || format!("false positives {false_pos}/100"))?;
    Ok(format!("0.8 vs 0.2 detected {hits}/100; equal groups rejected {false_pos}/100"))
}

// ---------------------------------------------------------------------------
// 9. Report fidelity

fn pattern(labels: &str, n_a: u64, prop_a: f64, n_b: u64, prop_b: f64, stat: f64) -> PatternStats {
    PatternStats {
        pattern: labels.split("->").map(String::from).collect(),
        n_a,
        n_b,
        prop_a,
        prop_b,
        windows_a: 0,
        windows_b: 0,
        stat,
        p_value: 0.0,
    }
}

fn coef(name: &str, estimate: f64, std_error: f64, t_value: f64, p_value: f64) -> Coefficient {
    Coefficient {
        name: name.into(),
        estimate,
        std_error,
        t_value,
        p_value,
    }
}

fn summary(
    coefficients: Vec<Coefficient>,
    fit: (f64, usize, f64, f64, f64, f64),
    vifs: &[(&str, f64)],
) -> RegressionSummary {
    let (rse, df, r2, adj, f, fp) = fit;
    RegressionSummary {
        n: df + coefficients.len(),
        df_model: coefficients.len() - 1,
        coefficients,
        residual_std_error: rse,
        df_residual: df,
        r_squared: r2,
        adj_r_squared: adj,
        f_statistic: Some(f),
        f_p_value: Some(fp),
        vif: vifs
            .iter()
            .map(|(n, v)| VifEntry {
                name: n.to_string(),
                vif: *v,
                collinear: false,
            })
            .collect(),
        fitted: vec![],
        residuals: vec![],
    }
}

fn expect_lines(rendered: &str, expected: &[&str]) -> Result<usize, String> {
    let lines: BTreeSet<&str> = rendered.lines().collect();
    for e in expected {
        ensure(lines.contains(e), || format!("missing line {e:?} in\n{rendered}"))?;
    }
    Ok(expected.len())
}

fn ac9() -> Check {
    let mut matched = 0;

    let element_rows = vec![
        pattern("explanation->example->exploration", 287, 0.034, 103, 0.023, 9.78),
        pattern("exploration->code->feedback", 67, 0.008, 12, 0.003, 11.75),
        pattern("assignment->solution->assignment", 17, 0.002, 33, 0.007, 21.03),
        pattern("assignment->solution->assignment->solution", 10, 0.001, 24, 0.006, 18.70),
    ];
    matched += expect_lines(
        &render_pattern_table(&element_rows, "Q1", "Q4"),
        &[
            "Pattern\tn\tQ1 prop.\tn\tQ4 prop.\tstat.",
            "explanation->example->exploration\t287\t0.034\t103\t0.023\t9.78",
            "exploration->code->feedback\t67\t0.008\t12\t0.003\t11.75",
            "assignment->solution->assignment\t17\t0.002\t33\t0.007\t21.03",
            "assignment->solution->assignment->solution\t10\t0.001\t24\t0.006\t18.70",
        ],
    )?;

    let type_rows = vec![
        pattern("Delegate->Executor->Delegate", 413, 0.088, 259, 0.107, 5.23),
        pattern("Inquire->Tutor->Inquire", 261, 0.056, 86, 0.036, 12.38),
        pattern("Delegate->Collaborator->Delegate", 85, 0.018, 65, 0.027, 5.19),
        pattern("Delegate->Tutor->Delegate->Tutor->Delegate", 66, 0.016, 53, 0.026, 6.44),
    ];
    matched += expect_lines(
        &render_pattern_table(&type_rows, "Q1", "Q4"),
        &[
            "Delegate->Executor->Delegate\t413\t0.088\t259\t0.107\t5.23",
            "Inquire->Tutor->Inquire\t261\t0.056\t86\t0.036\t12.38",
            "Delegate->Collaborator->Delegate\t85\t0.018\t65\t0.027\t5.19",
            "Delegate->Tutor->Delegate->Tutor->Delegate\t66\t0.016\t53\t0.026\t6.44",
        ],
    )?;

    let element_model = summary(
        vec![
            coef("(Intercept)", 0.8767, 0.0376, 23.33, 1e-40),
            coef("Error", 0.4889, 0.6268, 0.78, 0.437),
            coef("Code", -0.0131, 0.2576, -0.05, 0.960),
            coef("Exploration", -0.1634, 0.1850, -0.88, 0.379),
            coef("Results", 0.4726, 0.2391, 1.98, 0.051),
            coef("Assignment", -0.5575, 0.2085, -2.67, 0.009),
            coef("Request", 0.0129, 0.1838, 0.07, 0.944),
            coef("Instruction", 0.0561, 0.2447, 0.23, 0.819),
            coef("Feedback", -0.3076, 0.3013, -1.02, 0.310),
            coef("Explanation", 0.4615, 0.1505, 3.07, 0.003),
            coef("Solution", 0.0835, 0.1608, 0.52, 0.605),
        ],
        (0.0579, 99, 0.28, 0.207, 3.85, 0.0002),
        &[
            ("Error", 2.26),
            ("Code", 1.66),
            ("Exploration", 3.11),
            ("Results", 1.86),
            ("Assignment", 3.13),
            ("Request", 2.79),
            ("Instruction", 1.84),
            ("Feedback", 2.75),
            ("Explanation", 2.24),
            ("Solution", 2.56),
        ],
    );
    matched += expect_lines(
        &render_regression_table(&element_model),
        &[
            "Variable\tEstimate\tStd. Error\tt value\tp value",
            "(Intercept)\t0.8767\t0.0376\t23.33\t<0.001***",
            "Error\t0.4889\t0.6268\t0.78\t0.437",
            "Code\t-0.0131\t0.2576\t-0.05\t0.960",
            "Exploration\t-0.1634\t0.1850\t-0.88\t0.379",
            "Results\t0.4726\t0.2391\t1.98\t0.051.",
            "Assignment\t-0.5575\t0.2085\t-2.67\t0.009**",
            "Request\t0.0129\t0.1838\t0.07\t0.944",
            "Instruction\t0.0561\t0.2447\t0.23\t0.819",
            "Feedback\t-0.3076\t0.3013\t-1.02\t0.310",
            "Explanation\t0.4615\t0.1505\t3.07\t0.003**",
            "Solution\t0.0835\t0.1608\t0.52\t0.605",
            "Residual standard error: 0.0579 on 99 degrees of freedom",
            "Multiple R^2: 0.28, Adjusted R^2: 0.207",
            "F-statistic: 3.85 on 10 and 99 DF, p-value: 0.0002",
            "Significance codes: ***p<0.001, **p<0.01, *p<0.05, .p<0.1",
            "VIF values: Error = 2.26, Code = 1.66, Exploration = 3.11, Results = 1.86, Assignment = 3.13, \
             Request = 2.79, Instruction = 1.84, Feedback = 2.75, Explanation = 2.24, Solution = 2.56",
        ],
    )?;

    let type_model = summary(
        vec![
            coef("(Intercept)", 0.9038, 0.0092, 97.76, 1e-100),
            coef("Debug", -0.0004, 0.0012, -0.38, 0.710),
            coef("Inquire", 0.0001, 0.0002, 0.24, 0.810),
            coef("Integrate", 0.0007, 0.0008, 0.79, 0.430),
            coef("Evaluator", -0.0005, 0.0034, -0.15, 0.880),
            coef("Executor", 0.0004, 0.0004, 1.04, 0.300),
        ],
        (0.065, 104, 0.0445, -0.00139, 0.97, 0.44),
        &[
            ("Debug", 2.29),
            ("Inquire", 1.77),
            ("Integrate", 1.92),
            ("Evaluator", 1.52),
            ("Executor", 2.68),
        ],
    );
    matched += expect_lines(
        &render_regression_table(&type_model),
        &[
            "(Intercept)\t0.9038\t0.0092\t97.76\t<0.001***",
            "Debug\t-0.0004\t0.0012\t-0.38\t0.710",
            "Inquire\t0.0001\t0.0002\t0.24\t0.810",
            "Integrate\t0.0007\t0.0008\t0.79\t0.430",
            "Evaluator\t-0.0005\t0.0034\t-0.15\t0.880",
            "Executor\t0.0004\t0.0004\t1.04\t0.300",
            "Residual standard error: 0.065 on 104 degrees of freedom",
            "Multiple R^2: 0.0445, Adjusted R^2: -0.00139",
            "F-statistic: 0.97 on 5 and 104 DF, p-value: 0.44",
            "VIF values: Debug = 2.29, Inquire = 1.77, Integrate = 1.92, Evaluator = 1.52, Executor = 2.68",
        ],
    )?;
    Ok(format!("{matched} rendered lines match"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, &str, fn() -> Check); 9] = [
        ("AC1", "classifier partition", ac1),
        ("AC2", "Markov fit vs pair counting", ac2),
        ("AC3", "sampled vs exhaustive permutation p", ac3),
        ("AC4", "chi-square and residual formulas", ac4),
        ("AC5", "pattern mining vs enumeration", ac5),
        ("AC6", "OLS vs normal equations", ac6),
        ("AC7", "determinism", ac7),
        ("AC8", "power and false-positive rate", ac8),
        ("AC9", "report fidelity", ac9),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail} ({secs:.2}s)");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
