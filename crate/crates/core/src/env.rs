//! Seeded reasoning-tree MDP with an exact value oracle.
//!
//! Each problem is a complete `B`-ary tree of depth `D`. Transitions are
//! deterministic (a state is its action path), rewards are zero except at
//! the leaves, and `gamma = 1`, so the value of a state is the probability
//! that a policy rollout from it ends in a correct leaf.
//!
//! Nothing is stored. Every edge carries a score in `[-1, 1)` that is a
//! hash of `(seed, problem, path, action)`:
//!
//! ```text
//! root(seed, problem) = mix64(mix64(seed + G) ^ mix64(problem + G))
//! child(h, a)         = mix64(h + (a + 1) * G)
//! score(h, a)         = 2 * unit(mix64(child(h, a) ^ EDGE_SALT)) - 1
//! ```
//!
//! with `G` the SplitMix64 gamma and `unit` the top 53 bits scaled to
//! `[0, 1)`. A leaf is correct iff the sum of the scores along its path is
//! at least the threshold. The policy is a softmax of `beta * score` over
//! the children.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::{mix64, unit_f64, GOLDEN_GAMMA};
use crate::{Error, Result};

const EDGE_SALT: u64 = 0x5EED_ED6E_5C0E_0001;
/// Largest number of leaves per problem.
pub const MAX_LEAVES: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub branching: usize,
    pub depth: usize,
    pub seed: u64,
    pub policy_beta: f64,
    pub threshold: f64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(Error::invalid(format!("branching must be at least 2, got {}", self.branching)));
        }
        if self.depth < 1 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        let leaves = (self.branching as u64).checked_pow(self.depth as u32);
        if leaves.is_none_or(|n| n > MAX_LEAVES) {
            return Err(Error::invalid(format!(
                "branching^depth = {}^{} exceeds {MAX_LEAVES} leaves",
                self.branching, self.depth
            )));
        }
        if !(self.policy_beta >= 0.0 && self.policy_beta.is_finite()) {
            return Err(Error::invalid("policy_beta must be finite and nonnegative"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        Ok(())
    }

    /// Compact JSON with keys in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`EnvConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn leaves_per_problem(&self) -> u64 {
        (self.branching as u64).pow(self.depth as u32)
    }
}

/// A prefix of a solution: the problem it belongs to and the actions taken.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub problem: u64,
    pub path: Vec<usize>,
}

impl State {
    pub fn root(problem: u64) -> Self {
        State { problem, path: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn child(&self, action: usize) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(action);
        State { problem: self.problem, path }
    }
}

/// Hash and running score of a node, enough to continue a descent.
#[derive(Debug, Clone, Copy)]
struct Cursor {
    hash: u64,
    depth: usize,
    score_sum: f64,
}

#[derive(Debug, Clone)]
pub struct ReasoningTreeEnv {
    config: EnvConfig,
}

impl ReasoningTreeEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(ReasoningTreeEnv { config })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn branching(&self) -> usize {
        self.config.branching
    }

    pub fn depth(&self) -> usize {
        self.config.depth
    }

    fn root_hash(&self, problem: u64) -> u64 {
        mix64(mix64(self.config.seed.wrapping_add(GOLDEN_GAMMA)) ^ mix64(problem.wrapping_add(GOLDEN_GAMMA)))
    }

    #[inline]
    fn child_hash(hash: u64, action: usize) -> u64 {
        mix64(hash.wrapping_add((action as u64 + 1).wrapping_mul(GOLDEN_GAMMA)))
    }

    #[inline]
    fn score_at(hash: u64, action: usize) -> f64 {
        2.0 * unit_f64(mix64(Self::child_hash(hash, action) ^ EDGE_SALT)) - 1.0
    }

    fn validate_state(&self, state: &State) -> Result<()> {
        if state.depth() > self.config.depth {
            return Err(Error::invalid(format!(
                "state depth {} exceeds tree depth {}",
                state.depth(),
                self.config.depth
            )));
        }
        if let Some(&a) = state.path.iter().find(|&&a| a >= self.config.branching) {
            return Err(Error::invalid(format!("action {a} outside [0, {})", self.config.branching)));
        }
        Ok(())
    }

    fn cursor(&self, state: &State) -> Result<Cursor> {
        self.validate_state(state)?;
        let mut cur = Cursor { hash: self.root_hash(state.problem), depth: 0, score_sum: 0.0 };
        for &a in &state.path {
            cur = self.descend(cur, a);
        }
        Ok(cur)
    }

    #[inline]
    fn descend(&self, cur: Cursor, action: usize) -> Cursor {
        Cursor {
            hash: Self::child_hash(cur.hash, action),
            depth: cur.depth + 1,
            score_sum: cur.score_sum + Self::score_at(cur.hash, action),
        }
    }

    fn require_nonterminal(&self, state: &State) -> Result<()> {
        if state.depth() >= self.config.depth {
            return Err(Error::invalid("operation needs a non-terminal state"));
        }
        Ok(())
    }

    /// Score of taking `action` from the non-terminal `state`.
    pub fn edge_score(&self, state: &State, action: usize) -> Result<f64> {
        self.require_nonterminal(state)?;
        if action >= self.config.branching {
            return Err(Error::invalid(format!("action {action} outside [0, {})", self.config.branching)));
        }
        Ok(Self::score_at(self.cursor(state)?.hash, action))
    }

    /// Scores of the edges along the state's path, root first.
    pub fn path_scores(&self, state: &State) -> Result<Vec<f64>> {
        self.validate_state(state)?;
        let mut hash = self.root_hash(state.problem);
        Ok(state
            .path
            .iter()
            .map(|&a| {
                let s = Self::score_at(hash, a);
                hash = Self::child_hash(hash, a);
                s
            })
            .collect())
    }

    fn policy_at(&self, hash: u64, out: &mut Vec<f64>) {
        out.clear();
        let beta = self.config.policy_beta;
        out.extend((0..self.config.branching).map(|a| beta * Self::score_at(hash, a)));
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in out.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in out.iter_mut() {
            *x /= total;
        }
    }

    /// Softmax of `beta * edge_score` over the children of `state`.
    pub fn policy_dist(&self, state: &State) -> Result<Vec<f64>> {
        self.require_nonterminal(state)?;
        let mut out = Vec::new();
        self.policy_at(self.cursor(state)?.hash, &mut out);
        Ok(out)
    }

    fn label(&self, score_sum: f64) -> bool {
        score_sum >= self.config.threshold
    }

    /// Outcome reward of a terminal state.
    pub fn leaf_correct(&self, state: &State) -> Result<bool> {
        if state.depth() != self.config.depth {
            return Err(Error::invalid("leaf_correct needs a terminal state"));
        }
        Ok(self.label(self.cursor(state)?.score_sum))
    }

    /// Exact `V(s)` by backward induction over the subtree below `state`.
    pub fn true_value(&self, state: &State) -> Result<f64> {
        let cur = self.cursor(state)?;
        let mut scratch = vec![Vec::with_capacity(self.config.branching); self.config.depth + 1];
        Ok(self.value_below(cur, &mut scratch))
    }

    fn value_below(&self, cur: Cursor, scratch: &mut [Vec<f64>]) -> f64 {
        if cur.depth == self.config.depth {
            return if self.label(cur.score_sum) { 1.0 } else { 0.0 };
        }
        let (policy, rest) = scratch.split_first_mut().expect("scratch depth");
        self.policy_at(cur.hash, policy);
        let mut value = 0.0;
        for (a, &weight) in policy.iter().enumerate() {
            value += weight * self.value_below(self.descend(cur, a), rest);
        }
        value
    }

    fn sample_action<R: Rng + ?Sized>(&self, hash: u64, rng: &mut R, scratch: &mut Vec<f64>) -> usize {
        self.policy_at(hash, scratch);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, &p) in scratch.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        scratch.len() - 1
    }

    /// Samples actions from the policy until a leaf is reached. A terminal
    /// start state is returned unchanged without touching `rng`.
    pub fn rollout<R: Rng + ?Sized>(&self, state: &State, rng: &mut R) -> Result<(State, bool)> {
        let mut cur = self.cursor(state)?;
        let mut leaf = state.clone();
        let mut scratch = Vec::with_capacity(self.config.branching);
        while cur.depth < self.config.depth {
            let a = self.sample_action(cur.hash, rng, &mut scratch);
            leaf.path.push(a);
            cur = self.descend(cur, a);
        }
        Ok((leaf, self.label(cur.score_sum)))
    }

    /// Outcome of one rollout without materializing the leaf.
    fn rollout_outcome<R: Rng + ?Sized>(&self, start: Cursor, rng: &mut R, scratch: &mut Vec<f64>) -> bool {
        let mut cur = start;
        while cur.depth < self.config.depth {
            let a = self.sample_action(cur.hash, rng, scratch);
            cur = self.descend(cur, a);
        }
        self.label(cur.score_sum)
    }

    /// Monte Carlo value estimate from `k` independent rollouts: returns the
    /// number of correct outcomes and `c / k`.
    pub fn mc_estimate<R: Rng + ?Sized>(&self, state: &State, k: usize, rng: &mut R) -> Result<(usize, f64)> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let start = self.cursor(state)?;
        let mut scratch = Vec::with_capacity(self.config.branching);
        let c = (0..k).filter(|_| self.rollout_outcome(start, rng, &mut scratch)).count();
        Ok((c, c as f64 / k as f64))
    }

    /// Calls `visit(path_probability, score_sum)` for every leaf of a problem.
    fn for_each_leaf(&self, problem: u64, visit: &mut impl FnMut(f64, f64)) {
        let root = Cursor { hash: self.root_hash(problem), depth: 0, score_sum: 0.0 };
        let mut scratch = vec![Vec::with_capacity(self.config.branching); self.config.depth + 1];
        self.walk_leaves(root, 1.0, &mut scratch, visit);
    }

    fn walk_leaves(&self, cur: Cursor, prob: f64, scratch: &mut [Vec<f64>], visit: &mut impl FnMut(f64, f64)) {
        if cur.depth == self.config.depth {
            visit(prob, cur.score_sum);
            return;
        }
        let (policy, rest) = scratch.split_first_mut().expect("scratch depth");
        self.policy_at(cur.hash, policy);
        for (a, &p) in policy.iter().enumerate() {
            self.walk_leaves(self.descend(cur, a), prob * p, rest, visit);
        }
    }

    /// Fraction of a problem's leaves that are correct, unweighted by the
    /// policy.
    pub fn leaf_accuracy(&self, problem: u64) -> f64 {
        let mut correct = 0u64;
        let mut total = 0u64;
        self.for_each_leaf(problem, &mut |_, sum| {
            total += 1;
            correct += u64::from(self.label(sum));
        });
        correct as f64 / total as f64
    }
}

/// Threshold at which the mean root value over `problems` is as close to
/// `target` as the leaf granularity allows (from above).
///
/// Each problem's leaves are weighted by their policy probability divided
/// by the number of problems; the returned threshold is the path-score
/// sum at which the pooled upper tail first reaches `target`.
pub fn calibrate_threshold(config: &EnvConfig, problems: std::ops::Range<u64>, target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) || target == 0.0 {
        return Err(Error::invalid(format!("target root value must lie in (0, 1], got {target}")));
    }
    if problems.is_empty() {
        return Err(Error::invalid("calibration needs at least one problem"));
    }
    let env = ReasoningTreeEnv::new(config.clone())?;
    let n = (problems.end - problems.start) as f64;
    let mut leaves: Vec<(f64, f64)> = Vec::new();
    for problem in problems {
        env.for_each_leaf(problem, &mut |prob, sum| leaves.push((sum, prob / n)));
    }
    leaves.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut mass = 0.0;
    for &(sum, weight) in &leaves {
        mass += weight;
        if mass >= target - 1e-12 {
            return Ok(sum);
        }
    }
    Ok(leaves.last().map(|l| l.0).unwrap_or(0.0))
}
