//! Best-of-N reranking and verifier-guided beam search.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{ReasoningTreeEnv, State};
use crate::rng::derive_rng;
use crate::verifier::MlpVerifier;
use crate::{Error, Result};

const BON_STREAM: u64 = 0xB0;
const BEAM_STREAM: u64 = 0xBE;

/// Anything that can rank states.
pub trait Scorer: Sync {
    fn score(&self, env: &ReasoningTreeEnv, state: &State) -> Result<f64>;
}

impl Scorer for MlpVerifier {
    fn score(&self, env: &ReasoningTreeEnv, state: &State) -> Result<f64> {
        self.score_state(env, state)
    }
}

/// Scores states by their exact value.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrueValueScorer;

impl Scorer for TrueValueScorer {
    fn score(&self, env: &ReasoningTreeEnv, state: &State) -> Result<f64> {
        env.true_value(state)
    }
}

/// Which problems to evaluate and how to seed them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalProblems {
    pub n_problems: u64,
    pub problem_offset: u64,
    pub seed: u64,
}

impl EvalProblems {
    fn ids(&self) -> std::ops::Range<u64> {
        self.problem_offset..self.problem_offset + self.n_problems
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    /// Candidates per problem for Best-of-N, beams for beam search.
    pub n: usize,
    /// Expansion width; beam search only.
    pub m: Option<usize>,
    pub success_rate: f64,
    pub oracle_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub rows: Vec<EvalRow>,
    pub n_problems: u64,
    pub problem_offset: u64,
    pub seed: u64,
}

impl EvalReport {
    pub fn row(&self, n: usize) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// `method,N,M,success_rate,oracle_rate,n_problems,seed`; `M` is empty
    /// for Best-of-N rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,N,M,success_rate,oracle_rate,n_problems,seed")?;
        for row in &self.rows {
            let m = row.m.map(|m| m.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{}",
                self.method, row.n, m, row.success_rate, row.oracle_rate, self.n_problems, self.seed
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")
    }
}

/// Index of the highest score; ties go to the lowest index.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Best-of-N over one shared candidate pool per problem.
///
/// Each problem draws `max(n_list)` solutions once; the value for `N` uses
/// the first `N`. The chosen candidate is the one whose final state scores
/// highest. The oracle rate counts problems with any correct candidate.
pub fn best_of_n<S: Scorer + ?Sized>(
    env: &ReasoningTreeEnv,
    scorer: &S,
    method: &str,
    n_list: &[usize],
    problems: &EvalProblems,
) -> Result<EvalReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::invalid("N list must be non-empty and positive"));
    }
    let pool = *n_list.iter().max().expect("non-empty");
    let per_problem: Vec<Vec<(bool, bool)>> = problems
        .ids()
        .into_par_iter()
        .map(|problem| {
            let mut rng = derive_rng(&[problems.seed, problem, BON_STREAM]);
            let root = State::root(problem);
            let mut correct = Vec::with_capacity(pool);
            let mut scores = Vec::with_capacity(pool);
            for _ in 0..pool {
                let (leaf, ok) = env.rollout(&root, &mut rng)?;
                scores.push(scorer.score(env, &leaf)?);
                correct.push(ok);
            }
            Ok(n_list
                .iter()
                .map(|&n| {
                    let chosen = select_best(&scores[..n]).expect("n >= 1");
                    (correct[chosen], correct[..n].iter().any(|&c| c))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let total = problems.n_problems.max(1) as f64;
    let rows = n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| EvalRow {
            n,
            m: None,
            success_rate: per_problem.iter().filter(|r| r[j].0).count() as f64 / total,
            oracle_rate: per_problem.iter().filter(|r| r[j].1).count() as f64 / total,
        })
        .collect();
    Ok(EvalReport {
        method: method.into(),
        rows,
        n_problems: problems.n_problems,
        problem_offset: problems.problem_offset,
        seed: problems.seed,
    })
}

/// Beam search with `n_beams` beams, each expanded by `width` actions
/// sampled from the policy per step. The `n_beams * width` candidates are
/// ranked by score (stable, so ties keep generation order) and the top
/// `n_beams` survive. At full depth the top-ranked beam is the answer; the
/// oracle rate counts problems where any surviving beam is correct.
pub fn beam_search_eval<S: Scorer + ?Sized>(
    env: &ReasoningTreeEnv,
    scorer: &S,
    method: &str,
    n_beams: usize,
    width: usize,
    problems: &EvalProblems,
) -> Result<EvalReport> {
    if n_beams == 0 || width == 0 {
        return Err(Error::invalid("beam count and width must be positive"));
    }
    let outcomes: Vec<(bool, bool)> = problems
        .ids()
        .into_par_iter()
        .map(|problem| {
            let mut rng = derive_rng(&[problems.seed, problem, BEAM_STREAM]);
            let mut beams = vec![State::root(problem); n_beams];
            for _ in 0..env.depth() {
                let mut candidates = Vec::with_capacity(n_beams * width);
                for beam in &beams {
                    let policy = env.policy_dist(beam)?;
                    for _ in 0..width {
                        let a = sample_index(&policy, &mut rng);
                        let child = beam.child(a);
                        let score = scorer.score(env, &child)?;
                        candidates.push((score, child));
                    }
                }
                candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
                candidates.truncate(n_beams);
                beams = candidates.into_iter().map(|(_, s)| s).collect();
            }
            let labels = beams.iter().map(|b| env.leaf_correct(b)).collect::<Result<Vec<_>>>()?;
            Ok((labels[0], labels.iter().any(|&l| l)))
        })
        .collect::<Result<_>>()?;
    let total = problems.n_problems.max(1) as f64;
    Ok(EvalReport {
        method: method.into(),
        rows: vec![EvalRow {
            n: n_beams,
            m: Some(width),
            success_rate: outcomes.iter().filter(|o| o.0).count() as f64 / total,
            oracle_rate: outcomes.iter().filter(|o| o.1).count() as f64 / total,
        }],
        n_problems: problems.n_problems,
        problem_offset: problems.problem_offset,
        seed: problems.seed,
    })
}

fn sample_index<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Mean outcome of a policy rollout from each problem root.
pub fn generator_accuracy(env: &ReasoningTreeEnv, problems: &EvalProblems) -> Result<f64> {
    let values = problems.ids().into_par_iter().map(|p| env.true_value(&State::root(p))).collect::<Result<Vec<_>>>()?;
    Ok(values.iter().sum::<f64>() / values.len().max(1) as f64)
}
