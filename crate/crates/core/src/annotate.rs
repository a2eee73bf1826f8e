//! Monte Carlo annotation of solution prefixes.
//!
//! For every problem a fixed number of full solutions is sampled from the
//! policy. Each prefix of each solution becomes one record: intermediate
//! prefixes are labelled with `k` fresh rollouts, the final state with its
//! exact outcome.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EnvConfig, ReasoningTreeEnv, State};
use crate::rng::derive_rng;
use crate::{Error, Result};

const SOLUTION_STREAM: u64 = 0;
const ESTIMATE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    pub problem: u64,
    pub sol: usize,
    pub path: Vec<usize>,
    pub step: usize,
    pub k: usize,
    pub c: usize,
    pub value: f64,
    #[serde(rename = "final")]
    pub is_final: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
}

impl AnnotatedSample {
    pub fn state(&self) -> State {
        State { problem: self.problem, path: self.path.clone() }
    }

    fn check(&self, k: usize) -> std::result::Result<(), String> {
        if self.k != k {
            return Err(format!("record has k = {} but dataset k = {k}", self.k));
        }
        if self.c > self.k {
            return Err(format!("count c = {} exceeds k = {}", self.c, self.k));
        }
        if self.step != self.path.len() || self.step == 0 {
            return Err(format!("step {} does not match path length {}", self.step, self.path.len()));
        }
        if self.value != self.c as f64 / self.k as f64 {
            return Err(format!("value {} is not c/k", self.value));
        }
        match (self.is_final, self.outcome) {
            (true, Some(o @ (0 | 1))) => {
                if self.c != usize::from(o) * self.k {
                    return Err("final record count disagrees with its outcome".into());
                }
            }
            (true, _) => return Err("final record needs outcome 0 or 1".into()),
            (false, Some(_)) => return Err("outcome present on a non-final record".into()),
            (false, None) => {}
        }
        Ok(())
    }
}

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub k: usize,
    pub env_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvConfig>,
}

impl DatasetHeader {
    /// Hex SHA-256 of the header's JSON line.
    pub fn hash(&self) -> String {
        let line = serde_json::to_string(self).expect("header serializes");
        hex::encode(Sha256::digest(line.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<AnnotatedSample>,
}

impl Dataset {
    pub fn k(&self) -> usize {
        self.header.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotateParams {
    pub n_problems: u64,
    pub n_solutions: usize,
    pub k: usize,
    /// Id of the first problem; problems are `offset .. offset + n_problems`.
    pub problem_offset: u64,
}

/// Samples and annotates solutions.
///
/// Randomness for solution `(problem, sol)` comes from streams derived from
/// `(seed, problem, sol, ...)`, so the output does not depend on how the
/// work is scheduled across threads.
pub fn annotate(env: &ReasoningTreeEnv, params: &AnnotateParams, seed: u64) -> Result<Dataset> {
    if params.n_problems == 0 || params.n_solutions == 0 || params.k == 0 {
        return Err(Error::invalid("problem, solution and rollout counts must be positive"));
    }
    let k = params.k;
    let jobs: Vec<(u64, usize)> = (params.problem_offset..params.problem_offset + params.n_problems)
        .flat_map(|p| (0..params.n_solutions).map(move |s| (p, s)))
        .collect();
    let per_solution: Vec<Vec<AnnotatedSample>> = jobs
        .into_par_iter()
        .map(|(problem, sol)| {
            let mut rng = derive_rng(&[seed, problem, sol as u64, SOLUTION_STREAM]);
            let (leaf, correct) = env.rollout(&State::root(problem), &mut rng)?;
            let depth = env.depth();
            (1..=depth)
                .map(|step| {
                    let path = leaf.path[..step].to_vec();
                    if step == depth {
                        let outcome = u8::from(correct);
                        let c = usize::from(outcome) * k;
                        return Ok(AnnotatedSample {
                            problem,
                            sol,
                            path,
                            step,
                            k,
                            c,
                            value: c as f64 / k as f64,
                            is_final: true,
                            outcome: Some(outcome),
                        });
                    }
                    let mut rng = derive_rng(&[seed, problem, sol as u64, ESTIMATE_STREAM, step as u64]);
                    let state = State { problem, path };
                    let (c, value) = env.mc_estimate(&state, k, &mut rng)?;
                    Ok(AnnotatedSample {
                        problem,
                        sol,
                        path: state.path,
                        step,
                        k,
                        c,
                        value,
                        is_final: false,
                        outcome: None,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        header: DatasetHeader { k, env_hash: env.config().hash(), seed, env: Some(env.config().clone()) },
        samples: per_solution.into_iter().flatten().collect(),
    })
}

/// Writes the header line followed by one JSON record per sample.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, &dataset.header)?;
    out.write_all(b"\n")?;
    for sample in &dataset.samples {
        serde_json::to_writer(&mut out, sample)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a dataset, checking every record against the header.
pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let header: DatasetHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?)
            .map_err(|e| Error::Parse { line: 1, message: format!("bad header: {e}") })?,
        None => return Err(Error::Parse { line: 1, message: "empty dataset file".into() }),
    };
    if header.k == 0 {
        return Err(Error::Integrity("header k must be positive".into()));
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample: AnnotatedSample = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        sample.check(header.k).map_err(|m| Error::Integrity(format!("line {line_no}: {m}")))?;
        samples.push(sample);
    }
    Ok(Dataset { header, samples })
}

/// One bar of the entropy profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    /// Step position: `1..=4` from the start, `-3..=-1` from the end.
    pub label: i64,
    pub entropy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProfile {
    pub rows: Vec<EntropyRow>,
    /// Labels that could not be computed, with the reason.
    pub notes: Vec<String>,
}

impl EntropyProfile {
    pub fn get(&self, label: i64) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).map(|r| r.entropy)
    }
}

pub const ENTROPY_LABELS: [i64; 7] = [1, 2, 3, 4, -3, -2, -1];

/// Binary entropy in nats with `0 ln 0 = 0`.
pub fn binary_entropy(v: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
    -(term(v) + term(1.0 - v))
}

/// Mean binary entropy of the estimated values at the first four and last
/// three steps of each solution.
pub fn entropy_profile(dataset: &Dataset) -> Result<EntropyProfile> {
    if dataset.samples.is_empty() {
        return Err(Error::invalid("entropy profile of an empty dataset"));
    }
    // Solution length is the largest step seen for each (problem, sol).
    let mut lengths = std::collections::BTreeMap::new();
    for s in &dataset.samples {
        let len = lengths.entry((s.problem, s.sol)).or_insert(0usize);
        *len = (*len).max(s.step);
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for label in ENTROPY_LABELS {
        let (mut total, mut count) = (0.0, 0usize);
        for s in &dataset.samples {
            let len = lengths[&(s.problem, s.sol)];
            let step = if label > 0 { label } else { len as i64 + 1 + label };
            if step >= 1 && s.step as i64 == step {
                total += binary_entropy(s.value);
                count += 1;
            }
        }
        if count == 0 {
            notes.push(format!("label {label}: no solution has enough steps"));
        } else {
            rows.push(EntropyRow { label, entropy: total / count as f64, count });
        }
    }
    Ok(EntropyProfile { rows, notes })
}

pub fn write_entropy_csv<W: Write>(profile: &EntropyProfile, mut out: W) -> std::io::Result<()> {
    writeln!(out, "step_label,entropy")?;
    for row in &profile.rows {
        writeln!(out, "{},{}", row.label, crate::fmt::sig_digits(row.entropy, 9))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_env(depth: usize) -> ReasoningTreeEnv {
        ReasoningTreeEnv::new(EnvConfig { branching: 3, depth, seed: 17, policy_beta: 1.0, threshold: 0.0 }).unwrap()
    }

    fn params(n_problems: u64, n_solutions: usize, k: usize) -> AnnotateParams {
        AnnotateParams { n_problems, n_solutions, k, problem_offset: 0 }
    }

    #[test]
    fn one_record_per_step() {
        let env = small_env(3);
        let d = annotate(&env, &params(1, 1, 4), 1).unwrap();
        assert_eq!(d.samples.len(), 3);
        assert_eq!(d.samples.iter().filter(|s| s.is_final).count(), 1);
        assert!(d.samples[2].is_final);
        assert_eq!(d.samples.iter().map(|s| s.step).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn counts_and_value_grid() {
        let env = small_env(4);
        let d = annotate(&env, &params(5, 3, 8), 9).unwrap();
        assert_eq!(d.samples.len(), 5 * 3 * 4);
        for s in &d.samples {
            assert!(s.c <= 8);
            assert_eq!(s.value * 8.0, s.c as f64);
            if s.is_final {
                let correct = env.leaf_correct(&s.state()).unwrap();
                assert_eq!(s.outcome, Some(u8::from(correct)));
                assert!(s.value == 0.0 || s.value == 1.0);
            }
        }
        let keys: Vec<_> = d.samples.iter().map(|s| (s.problem, s.sol, s.step)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(d.samples.iter().all(|s| s.check(8).is_ok()));
    }

    #[test]
    fn annotation_is_reproducible() {
        let env = small_env(4);
        let a = annotate(&env, &params(4, 2, 8), 3).unwrap();
        let b = annotate(&env, &params(4, 2, 8), 3).unwrap();
        let c = annotate(&env, &params(4, 2, 8), 4).unwrap();
        let bytes = |d: &Dataset| {
            let mut buf = Vec::new();
            write_dataset(d, &mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn round_trip() {
        let env = small_env(4);
        let d = annotate(&env, &params(3, 2, 8), 5).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn truncated_line_reports_line_number() {
        let env = small_env(3);
        let d = annotate(&env, &params(1, 2, 4), 5).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = &text[..text.trim_end().len() - 10];
        match read_dataset(cut.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn integrity_errors() {
        let header = r#"{"k":8,"env_hash":"x","seed":1}"#;
        let bad_c = r#"{"problem":0,"sol":0,"path":[1],"step":1,"k":8,"c":9,"value":1.125,"final":false}"#;
        let bad_k = r#"{"problem":0,"sol":0,"path":[1],"step":1,"k":4,"c":1,"value":0.25,"final":false}"#;
        for record in [bad_c, bad_k] {
            let text = format!("{header}\n{record}\n");
            assert!(matches!(read_dataset(text.as_bytes()), Err(Error::Integrity(_))));
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);

        let env = small_env(8);
        let mut d = annotate(&env, &params(2, 2, 2), 1).unwrap();
        for s in &mut d.samples {
            s.value = if s.c * 2 >= s.k { 1.0 } else { 0.0 };
        }
        let profile = entropy_profile(&d).unwrap();
        assert_eq!(profile.rows.len(), 7);
        assert!(profile.rows.iter().all(|r| r.entropy == 0.0));

        for s in &mut d.samples {
            s.value = 0.5;
        }
        let profile = entropy_profile(&d).unwrap();
        assert!(profile.rows.iter().all(|r| (r.entropy - std::f64::consts::LN_2).abs() < 1e-15));
        assert_eq!(profile.rows.iter().map(|r| r.label).collect::<Vec<_>>(), ENTROPY_LABELS.to_vec());
    }

    #[test]
    fn short_solutions_only_report_available_labels() {
        let env = small_env(2);
        let d = annotate(&env, &params(2, 2, 4), 1).unwrap();
        let profile = entropy_profile(&d).unwrap();
        let labels: Vec<i64> = profile.rows.iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![1, 2, -2, -1]);
        assert_eq!(profile.notes.len(), 3);
    }
}
