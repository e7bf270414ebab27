//! Online Fuzzy ART clustering with per-category visit counts.
//!
//! Inputs in [0,1]^d are complement-coded to [0,1]^{2d}, matched against the
//! stored category weights by activation and vigilance, and either absorbed
//! into the winning category or used to spawn a new one. Visit counts back
//! the count-based exploration bonus.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::textfmt::fmt_f64;

#[derive(Debug, Error, PartialEq)]
pub enum ArtError {
    #[error("input entry at index {index} is {value}, expected a value in [0, 1]")]
    InputDomain { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("degenerate input: zero 1-norm")]
    DegenerateInput,
    #[error("unknown category {category} (model has {count})")]
    UnknownCategory { category: usize, count: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("snapshot parse error at line {line}: {message}")]
    SnapshotParse { line: usize, message: String },
    #[error("snapshot I/O error: {0}")]
    SnapshotIo(String),
}

/// Hyperparameters for a Fuzzy ART model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtParams {
    /// Choice/regularization parameter, > 0.
    pub alpha: f64,
    /// Vigilance threshold in [0, 1].
    pub rho: f64,
    /// Learning rate in (0, 1].
    pub beta: f64,
    /// Epoch cap for batch learning.
    pub max_epochs: usize,
    /// Max elementwise weight change still counted as converged.
    pub convergence_tol: f64,
    /// Optional hard cap on the number of categories. When full, the
    /// best-activation category wins regardless of vigilance.
    pub category_cap: Option<usize>,
}

impl Default for ArtParams {
    fn default() -> Self {
        ArtParams {
            alpha: 0.01,
            rho: 1.0,
            beta: 1.0,
            max_epochs: 10,
            convergence_tol: 1e-9,
            category_cap: None,
        }
    }
}

impl ArtParams {
    pub fn validate(&self) -> Result<(), ArtError> {
        if !(self.alpha > 0.0) {
            return Err(ArtError::InvalidParam(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(ArtError::InvalidParam(format!("rho must be in [0, 1], got {}", self.rho)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ArtError::InvalidParam(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        if self.max_epochs == 0 {
            return Err(ArtError::InvalidParam("max_epochs must be >= 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(ArtError::InvalidParam(format!(
                "convergence_tol must be >= 0, got {}",
                self.convergence_tol
            )));
        }
        if self.category_cap == Some(0) {
            return Err(ArtError::InvalidParam("category_cap must be >= 1 when set".into()));
        }
        Ok(())
    }
}

/// Complement coding: x -> [x; 1-x], so the coded 1-norm is exactly d.
pub fn complement_code(x: &[f64]) -> Result<Vec<f64>, ArtError> {
    for (index, &value) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(ArtError::InputDomain { index, value });
        }
    }
    let mut coded = Vec::with_capacity(2 * x.len());
    coded.extend_from_slice(x);
    coded.extend(x.iter().map(|v| 1.0 - v));
    Ok(coded)
}

/// Elementwise minimum of two equal-length vectors.
pub fn fuzzy_and(u: &[f64], v: &[f64]) -> Result<Vec<f64>, ArtError> {
    if u.len() != v.len() {
        return Err(ArtError::Dimension { expected: u.len(), got: v.len() });
    }
    Ok(u.iter().zip(v).map(|(a, b)| a.min(*b)).collect())
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn fuzzy_and_norm(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.min(*b)).sum()
}

/// Category activation: |x ^ w| / (alpha + |w|).
pub fn activation(x_cc: &[f64], w: &[f64], alpha: f64) -> Result<f64, ArtError> {
    if x_cc.len() != w.len() {
        return Err(ArtError::Dimension { expected: x_cc.len(), got: w.len() });
    }
    if !(alpha > 0.0) {
        return Err(ArtError::InvalidParam(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(fuzzy_and_norm(x_cc, w) / (alpha + norm1(w)))
}

/// Vigilance match: |x ^ w| / |x|.
pub fn vigilance(x_cc: &[f64], w: &[f64]) -> Result<f64, ArtError> {
    if x_cc.len() != w.len() {
        return Err(ArtError::Dimension { expected: x_cc.len(), got: w.len() });
    }
    let nx = norm1(x_cc);
    if nx <= 0.0 {
        return Err(ArtError::DegenerateInput);
    }
    Ok(fuzzy_and_norm(x_cc, w) / nx)
}

/// True iff the two weight sets have equal category counts and the largest
/// elementwise weight change is within `tol`.
pub fn converged(prev: &[Vec<f64>], curr: &[Vec<f64>], tol: f64) -> bool {
    if prev.len() != curr.len() {
        return false;
    }
    prev.iter().zip(curr).all(|(p, c)| {
        p.len() == c.len() && p.iter().zip(c).all(|(a, b)| (a - b).abs() <= tol)
    })
}

/// Fuzzy ART long-term memory: category weights plus visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtModel {
    dim: usize,
    weights: Vec<Vec<f64>>,
    /// Cached 1-norms of the weights, kept in sync with `weights`.
    weight_norms: Vec<f64>,
    counts: Vec<u64>,
    params: ArtParams,
}

impl ArtModel {
    pub fn new(dim: usize, params: ArtParams) -> Result<Self, ArtError> {
        if dim == 0 {
            return Err(ArtError::InvalidParam("dim must be >= 1".into()));
        }
        params.validate()?;
        Ok(ArtModel { dim, weights: Vec::new(), weight_norms: Vec::new(), counts: Vec::new(), params })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &ArtParams {
        &self.params
    }

    /// Number of categories currently stored.
    pub fn num_categories(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, j: usize) -> Result<&[f64], ArtError> {
        self.weights
            .get(j)
            .map(Vec::as_slice)
            .ok_or(ArtError::UnknownCategory { category: j, count: self.weights.len() })
    }

    /// Visit count N(j) for category `j` (0-based).
    pub fn category_count(&self, j: usize) -> Result<u64, ArtError> {
        self.counts
            .get(j)
            .copied()
            .ok_or(ArtError::UnknownCategory { category: j, count: self.counts.len() })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ArtError> {
        if x.len() != self.dim {
            return Err(ArtError::Dimension { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Categories ordered by descending activation, ties broken by lower index.
    fn search_order(&self, x_cc: &[f64]) -> Vec<(usize, f64)> {
        let alpha = self.params.alpha;
        let mut scored: Vec<(usize, f64, f64)> = self
            .weights
            .iter()
            .zip(&self.weight_norms)
            .enumerate()
            .map(|(j, (w, &nw))| {
                let inter = fuzzy_and_norm(x_cc, w);
                (j, inter / (alpha + nw), inter)
            })
            .collect();
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.into_iter().map(|(j, _t, inter)| (j, inter)).collect()
    }

    /// Winner search shared by learn and classify-only paths. Returns the
    /// resonating category, or `None` when every vigilance test fails.
    fn find_winner(&self, x_cc: &[f64]) -> Option<usize> {
        let nx = norm1(x_cc);
        let order = self.search_order(x_cc);
        for &(j, inter) in &order {
            if inter / nx >= self.params.rho {
                return Some(j);
            }
        }
        // At the category cap the best-activation node absorbs the input
        // regardless of vigilance.
        match self.params.category_cap {
            Some(cap) if self.weights.len() >= cap => order.first().map(|&(j, _)| j),
            _ => None,
        }
    }

    /// Applies the learning rule w <- (1-beta) w + beta (x ^ w) to category `j`.
    ///
    /// Computed as w + beta*((x^w) - w): algebraically identical, but this
    /// form never rounds above the old weight, and beta = 1 assigns x ^ w
    /// exactly so fast learning is bitwise stable.
    fn learn(&mut self, j: usize, x_cc: &[f64]) {
        let beta = self.params.beta;
        let w = &mut self.weights[j];
        if beta == 1.0 {
            for (wi, xi) in w.iter_mut().zip(x_cc) {
                *wi = wi.min(*xi);
            }
        } else {
            for (wi, xi) in w.iter_mut().zip(x_cc) {
                *wi += beta * (wi.min(*xi) - *wi);
            }
        }
        self.weight_norms[j] = norm1(w);
    }

    /// Resonance search plus learning, without touching visit counts.
    fn resonate_and_learn(&mut self, x_raw: &[f64]) -> Result<usize, ArtError> {
        self.check_dim(x_raw)?;
        let x_cc = complement_code(x_raw)?;
        let j = match self.find_winner(&x_cc) {
            Some(j) => j,
            None => {
                // New category starts at all-ones; the learning step below
                // then pulls it onto the input.
                self.weights.push(vec![1.0; 2 * self.dim]);
                self.weight_norms.push(2.0 * self.dim as f64);
                self.counts.push(0);
                self.weights.len() - 1
            }
        };
        self.learn(j, &x_cc);
        Ok(j)
    }

    /// Classifies one input, updating the winning category's weight and visit
    /// count. Returns the 0-based category index.
    pub fn classify_learn(&mut self, x_raw: &[f64]) -> Result<usize, ArtError> {
        let j = self.resonate_and_learn(x_raw)?;
        self.counts[j] += 1;
        Ok(j)
    }

    /// Winner lookup without mutating the model. `None` when no stored
    /// category passes vigilance (the category cap is ignored here).
    pub fn classify_only(&self, x_raw: &[f64]) -> Result<Option<usize>, ArtError> {
        self.check_dim(x_raw)?;
        let x_cc = complement_code(x_raw)?;
        let nx = norm1(&x_cc);
        Ok(self
            .search_order(&x_cc)
            .into_iter()
            .find(|&(_, inter)| inter / nx >= self.params.rho)
            .map(|(j, _)| j))
    }

    /// Batch learning: shuffled epochs of classify-and-learn until the
    /// weights converge or `max_epochs` is hit. Returns the final epoch's
    /// classifications in the original input order. Visit counts are
    /// incremented once per input, from the final epoch only.
    pub fn batch_learn(&mut self, inputs: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Vec<usize>, ArtError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        for x in inputs {
            self.check_dim(x)?;
        }
        let tol = self.params.convergence_tol;
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut assignments = vec![0usize; inputs.len()];
        let mut n_epoch = 0;
        loop {
            let prev_weights = self.weights.clone();
            order.shuffle(rng);
            for &i in &order {
                assignments[i] = self.resonate_and_learn(&inputs[i])?;
            }
            n_epoch += 1;
            if converged(&prev_weights, &self.weights, tol) || n_epoch >= self.params.max_epochs {
                break;
            }
        }
        for &j in &assignments {
            self.counts[j] += 1;
        }
        Ok(assignments)
    }

    /// Writes the model as a flat text snapshot, round-trip exact.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "art {} {} {} {} {}",
            self.dim,
            self.weights.len(),
            fmt_f64(self.params.alpha),
            fmt_f64(self.params.rho),
            fmt_f64(self.params.beta),
        );
        for (j, (w, count)) in self.weights.iter().zip(&self.counts).enumerate() {
            let _ = write!(out, "{j} {count}");
            for v in w {
                let _ = write!(out, " {}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), ArtError> {
        std::fs::write(path, self.snapshot()).map_err(|e| ArtError::SnapshotIo(e.to_string()))
    }

    /// Parses a snapshot produced by [`ArtModel::snapshot`]. Epoch and
    /// convergence settings are not part of the format and come from
    /// `params`; alpha/rho/beta are taken from the snapshot.
    pub fn from_snapshot(text: &str, mut params: ArtParams) -> Result<Self, ArtError> {
        let parse_err = |line: usize, message: &str| ArtError::SnapshotParse { line, message: message.into() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty snapshot"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "art" {
            return Err(parse_err(1, "expected header `art d C alpha rho beta`"));
        }
        let dim: usize = fields[1].parse().map_err(|_| parse_err(1, "bad dimension"))?;
        let n_cat: usize = fields[2].parse().map_err(|_| parse_err(1, "bad category count"))?;
        params.alpha = fields[3].parse().map_err(|_| parse_err(1, "bad alpha"))?;
        params.rho = fields[4].parse().map_err(|_| parse_err(1, "bad rho"))?;
        params.beta = fields[5].parse().map_err(|_| parse_err(1, "bad beta"))?;
        let mut model = ArtModel::new(dim, params)?;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let j: usize = parts
                .next()
                .ok_or_else(|| parse_err(line_no, "missing category index"))?
                .parse()
                .map_err(|_| parse_err(line_no, "bad category index"))?;
            if j != model.weights.len() {
                return Err(parse_err(line_no, "category index out of order"));
            }
            let count: u64 = parts
                .next()
                .ok_or_else(|| parse_err(line_no, "missing count"))?
                .parse()
                .map_err(|_| parse_err(line_no, "bad count"))?;
            let w: Vec<f64> = parts
                .map(|tok| tok.parse::<f64>().map_err(|_| parse_err(line_no, "bad weight value")))
                .collect::<Result<_, _>>()?;
            if w.len() != 2 * dim {
                return Err(parse_err(line_no, "wrong weight vector length"));
            }
            if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(parse_err(line_no, "weight outside [0, 1]"));
            }
            model.weight_norms.push(norm1(&w));
            model.weights.push(w);
            model.counts.push(count);
        }
        if model.weights.len() != n_cat {
            return Err(parse_err(1, "category count does not match body"));
        }
        Ok(model)
    }

    pub fn load_snapshot(path: &Path, params: ArtParams) -> Result<Self, ArtError> {
        let text = std::fs::read_to_string(path).map_err(|e| ArtError::SnapshotIo(e.to_string()))?;
        Self::from_snapshot(&text, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::HashMap;

    fn model(dim: usize, rho: f64, beta: f64) -> ArtModel {
        ArtModel::new(dim, ArtParams { rho, beta, ..ArtParams::default() }).unwrap()
    }

    #[test]
    fn complement_code_examples() {
        assert_eq!(complement_code(&[0.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(complement_code(&[1.0, 0.25]).unwrap(), vec![1.0, 0.25, 0.0, 0.75]);
        let coded = complement_code(&[0.5, 0.5]).unwrap();
        assert_eq!(coded, vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(norm1(&coded), 2.0);
    }

    #[test]
    fn complement_code_rejects_out_of_range() {
        let err = complement_code(&[0.5, 1.5]).unwrap_err();
        assert_eq!(err, ArtError::InputDomain { index: 1, value: 1.5 });
        let err = complement_code(&[-0.1]).unwrap_err();
        assert_eq!(err, ArtError::InputDomain { index: 0, value: -0.1 });
    }

    #[test]
    fn fuzzy_and_examples() {
        assert_eq!(fuzzy_and(&[0.2, 0.9], &[0.5, 0.5]).unwrap(), vec![0.2, 0.5]);
        let u = vec![0.3, 0.7, 0.1];
        assert_eq!(fuzzy_and(&u, &[1.0, 1.0, 1.0]).unwrap(), u);
        assert_eq!(fuzzy_and(&u, &u).unwrap(), u);
        assert!(matches!(fuzzy_and(&u, &[1.0]), Err(ArtError::Dimension { .. })));
    }

    #[test]
    fn activation_examples() {
        let t = activation(&[0.5, 0.5], &[1.0, 1.0], 0.01).unwrap();
        assert!((t - 1.0 / 2.01).abs() < 1e-15);
        assert_eq!(activation(&[0.7, 0.7], &[0.0, 0.0], 0.01).unwrap(), 0.0);
        let t = activation(&[1.0, 0.0], &[1.0, 0.0], 0.5).unwrap();
        assert!((t - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn vigilance_examples() {
        // Any complement-coded input resonates fully with a fresh all-ones category.
        let x = complement_code(&[0.3, 0.8, 0.0]).unwrap();
        assert_eq!(vigilance(&x, &vec![1.0; 6]).unwrap(), 1.0);
        assert_eq!(vigilance(&[1.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(vigilance(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(vigilance(&[0.0, 0.0], &[1.0, 1.0]), Err(ArtError::DegenerateInput));
    }

    #[test]
    fn classify_learn_hand_trace() {
        let mut m = model(2, 1.0, 1.0);
        // First input creates category 0 and fast-learns to the coded input.
        let j = m.classify_learn(&[1.0, 0.0]).unwrap();
        assert_eq!(j, 0);
        assert_eq!(m.weight(0).unwrap(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.category_count(0).unwrap(), 1);

        // Same input again: stable, weight unchanged, count advances.
        let j = m.classify_learn(&[1.0, 0.0]).unwrap();
        assert_eq!(j, 0);
        assert_eq!(m.weight(0).unwrap(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.category_count(0).unwrap(), 2);

        // Disjoint input fails vigilance against category 0 and spawns category 1.
        let x_cc = complement_code(&[0.0, 1.0]).unwrap();
        assert_eq!(vigilance(&x_cc, m.weight(0).unwrap()).unwrap(), 0.0);
        let j = m.classify_learn(&[0.0, 1.0]).unwrap();
        assert_eq!(j, 1);
        assert_eq!(m.weight(1).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(m.num_categories(), 2);
    }

    #[test]
    fn classify_only_does_not_mutate() {
        let mut m = model(2, 1.0, 1.0);
        assert_eq!(m.classify_only(&[0.5, 0.5]).unwrap(), None);
        m.classify_learn(&[1.0, 0.0]).unwrap();
        m.classify_learn(&[0.0, 1.0]).unwrap();
        let before = m.clone();
        assert_eq!(m.classify_only(&[1.0, 0.0]).unwrap(), Some(0));
        assert_eq!(m.classify_only(&[0.0, 1.0]).unwrap(), Some(1));
        assert_eq!(m, before);
    }

    #[test]
    fn batch_learn_singleton_converges_second_epoch() {
        let mut m = model(3, 1.0, 1.0);
        let mut rng = stream_rng(0, Stream::ArtShuffle);
        let x = vec![vec![1.0, 0.0, 1.0]];
        let assignments = m.batch_learn(&x, &mut rng).unwrap();
        assert_eq!(assignments, vec![0]);
        assert_eq!(m.num_categories(), 1);
        assert_eq!(m.category_count(0).unwrap(), 1);
    }

    #[test]
    fn batch_learn_duplicates_collapse() {
        let mut m = model(2, 1.0, 1.0);
        let mut rng = stream_rng(1, Stream::ArtShuffle);
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let assignments = m.batch_learn(&x, &mut rng).unwrap();
        assert_eq!(assignments, vec![0, 0]);
        assert_eq!(m.num_categories(), 1);
        assert_eq!(m.category_count(0).unwrap(), 2);
    }

    #[test]
    fn batch_learn_distinct_one_hots_stay_separate() {
        // At rho = 1 distinct binary inputs never share a category.
        let mut m = model(4, 1.0, 1.0);
        let mut rng = stream_rng(2, Stream::ArtShuffle);
        let inputs: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let assignments = m.batch_learn(&inputs, &mut rng).unwrap();
        assert_eq!(m.num_categories(), 4);
        let mut seen = assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4);
        for j in 0..4 {
            assert_eq!(m.category_count(j).unwrap(), 1);
        }
    }

    #[test]
    fn batch_learn_empty_is_noop() {
        let mut m = model(2, 1.0, 1.0);
        let mut rng = stream_rng(3, Stream::ArtShuffle);
        assert_eq!(m.batch_learn(&[], &mut rng).unwrap(), Vec::<usize>::new());
        assert_eq!(m.num_categories(), 0);
    }

    #[test]
    fn converged_examples() {
        let a = vec![vec![0.5, 0.5]];
        assert!(converged(&a, &a, 0.0));
        let b = vec![vec![0.5, 0.5], vec![1.0, 1.0]];
        assert!(!converged(&a, &b, 1.0));
        let c = vec![vec![0.5 + 1e-6, 0.5]];
        assert!(converged(&a, &c, 1e-5));
        assert!(!converged(&a, &c, 1e-7));
    }

    #[test]
    fn counts_match_tally_oracle_on_mixed_stream() {
        // 20 distinct binary observations, 1000 presentations, exact-count regime.
        let mut rng = stream_rng(42, Stream::ArtShuffle);
        let vocab: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..16).map(|_| f64::from(rng.random_range(0..2u8))).collect())
            .collect();
        let mut m = model(16, 1.0, 1.0);
        let mut tally: HashMap<usize, u64> = HashMap::new();
        let mut obs_to_cat: HashMap<usize, usize> = HashMap::new();
        for _ in 0..1000 {
            let pick = rng.random_range(0..vocab.len());
            let j = m.classify_learn(&vocab[pick]).unwrap();
            if let Some(&prev) = obs_to_cat.get(&pick) {
                assert_eq!(prev, j);
            } else {
                obs_to_cat.insert(pick, j);
            }
            *tally.entry(j).or_default() += 1;
        }
        for (&j, &n) in &tally {
            assert_eq!(m.category_count(j).unwrap(), n);
        }
        assert_eq!(m.counts().iter().sum::<u64>(), 1000);
    }

    #[test]
    fn category_count_unknown_errors() {
        let m = model(2, 1.0, 1.0);
        assert!(matches!(m.category_count(0), Err(ArtError::UnknownCategory { .. })));
    }

    #[test]
    fn category_cap_reroutes_to_best_activation() {
        let params = ArtParams { rho: 1.0, beta: 1.0, category_cap: Some(1), ..ArtParams::default() };
        let mut m = ArtModel::new(2, params).unwrap();
        assert_eq!(m.classify_learn(&[1.0, 0.0]).unwrap(), 0);
        // Vigilance fails but the cap forces assignment into category 0.
        assert_eq!(m.classify_learn(&[0.0, 1.0]).unwrap(), 0);
        assert_eq!(m.num_categories(), 1);
        assert_eq!(m.category_count(0).unwrap(), 2);
    }

    #[test]
    fn determinism_same_stream_same_model() {
        let inputs: Vec<Vec<f64>> = {
            let mut rng = stream_rng(9, Stream::ArtShuffle);
            (0..200)
                .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
                .collect()
        };
        let run = || {
            let mut m = model(6, 0.7, 0.4);
            for x in &inputs {
                m.classify_learn(x).unwrap();
            }
            m
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn snapshot_round_trips_exactly() {
        let mut m = model(5, 0.8, 0.3);
        let mut rng = stream_rng(11, Stream::ArtShuffle);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            m.classify_learn(&x).unwrap();
        }
        let text = m.snapshot();
        let restored = ArtModel::from_snapshot(&text, m.params.clone()).unwrap();
        assert_eq!(m, restored);
    }

    #[test]
    fn snapshot_parse_error_names_line() {
        let text = "art 2 1 1e-2 1e0 1e0\n0 1 0.1 0.2 bogus 0.4\n";
        match ArtModel::from_snapshot(text, ArtParams::default()) {
            Err(ArtError::SnapshotParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn norm_preservation(x in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let coded = complement_code(&x).unwrap();
            let d = x.len() as f64;
            // One ulp per summed coordinate; partial sums reach magnitude d.
            prop_assert!((norm1(&coded) - d).abs() <= 2.0 * d * d * f64::EPSILON);
        }

        #[test]
        fn weight_monotonicity_random_streams(
            seed in 0u64..1000,
            beta in 0.05f64..=1.0,
            rho in 0.0f64..=1.0,
        ) {
            let params = ArtParams { rho, beta, ..ArtParams::default() };
            let mut m = ArtModel::new(4, params).unwrap();
            let mut rng = stream_rng(seed, Stream::ArtShuffle);
            for _ in 0..60 {
                let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                let before = m.weights.clone();
                let j = m.classify_learn(&x).unwrap();
                if j < before.len() {
                    for (new, old) in m.weights[j].iter().zip(&before[j]) {
                        prop_assert!(new <= old);
                    }
                }
            }
        }

        #[test]
        fn category_budget(seed in 0u64..1000) {
            let mut m = model(3, 0.9, 0.5);
            let mut rng = stream_rng(seed, Stream::ArtShuffle);
            let n = 40;
            for _ in 0..n {
                let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                m.classify_learn(&x).unwrap();
            }
            prop_assert!(m.num_categories() <= n);
        }

        #[test]
        fn fast_learning_stability(seed in 0u64..1000) {
            let mut m = model(5, 1.0, 1.0);
            let mut rng = stream_rng(seed, Stream::ArtShuffle);
            let x: Vec<f64> = (0..5).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            let j = m.classify_learn(&x).unwrap();
            let w: Vec<f64> = m.weight(j).unwrap().to_vec();
            for _ in 0..5 {
                prop_assert_eq!(m.classify_learn(&x).unwrap(), j);
                prop_assert_eq!(m.weight(j).unwrap(), w.as_slice());
            }
        }
    }
}
