//! Connectionist temporal classification.
//!
//! The garbage symbol of every alphabet plays the role of the CTC blank. A
//! frame-level path collapses to a label sequence by merging repeats and then
//! dropping blanks; the probability of a label sequence is the sum over all
//! collapsing paths, computed here by the forward recursion in log space.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::Alphabet;
use crate::math::{exp, ln, log_add};
use crate::net::OutputMatrix;

/// Floor for log-probabilities; keeps the recursion free of `-inf - -inf`.
pub const LOG_ZERO: f64 = -1e30;

/// Target symbols, garbage excluded, at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSequence(Vec<usize>);

impl LabelSequence {
    /// Checks every label against an output of `classes` symbols whose blank
    /// sits at `blank`.
    pub fn new(labels: Vec<usize>, classes: usize, blank: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidLabels("empty label sequence".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes || l == blank) {
            return Err(Error::InvalidLabels(alloc::format!("label {bad} invalid for {classes} classes, blank {blank}")));
        }
        Ok(LabelSequence(labels))
    }

    pub fn for_alphabet(labels: Vec<usize>, alphabet: &Alphabet) -> Result<Self> {
        Self::new(labels, alphabet.len(), alphabet.garbage_index())
    }

    /// Tokenizes `text` with the alphabet.
    pub fn encode(text: &str, alphabet: &Alphabet) -> Result<Self> {
        Self::for_alphabet(alphabet.encode(text)?, alphabet)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Minimum number of frames able to emit this sequence.
    pub fn min_frames(&self) -> usize {
        self.0.len() + self.0.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// `(blank, l1, blank, l2, …, lL, blank)`.
pub fn interleave_blanks(labels: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2 * labels.len() + 1);
    out.push(blank);
    for &l in labels {
        out.push(l);
        out.push(blank);
    }
    out
}

fn check_labels(m: &OutputMatrix, labels: &[usize]) -> Result<()> {
    if labels.is_empty() || labels.iter().any(|&l| l >= m.classes() || l == m.blank()) {
        return Err(Error::InvalidLabels("labels do not fit the output matrix".into()));
    }
    Ok(())
}

fn log_probs(m: &OutputMatrix) -> Vec<f64> {
    m.probs().iter().map(|&p| ln(p).max(LOG_ZERO)).collect()
}

/// Log-space forward variables, `T × (2L+1)`.
fn forward_vars(logp: &[f64], k: usize, t_len: usize, ext: &[usize]) -> Vec<f64> {
    let s_len = ext.len();
    let mut alpha = vec![LOG_ZERO; t_len * s_len];
    alpha[0] = logp[ext[0]];
    if s_len > 1 {
        alpha[1] = logp[ext[1]];
    }
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        let cur = &mut cur[..s_len];
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if s >= 2 && ext[s] != ext[s - 2] {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = (acc + logp[t * k + ext[s]]).max(LOG_ZERO);
        }
    }
    alpha
}

/// Log-space backward variables excluding the emission at `t`.
fn backward_vars(logp: &[f64], k: usize, t_len: usize, ext: &[usize]) -> Vec<f64> {
    let s_len = ext.len();
    let mut beta = vec![LOG_ZERO; t_len * s_len];
    let last = (t_len - 1) * s_len;
    beta[last + s_len - 1] = 0.0;
    if s_len > 1 {
        beta[last + s_len - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let next = |s2: usize| beta[(t + 1) * s_len + s2] + logp[(t + 1) * k + ext[s2]];
            let mut acc = next(s);
            if s + 1 < s_len {
                acc = log_add(acc, next(s + 1));
            }
            if s + 2 < s_len && ext[s + 2] != ext[s] {
                acc = log_add(acc, next(s + 2));
            }
            beta[t * s_len + s] = acc.max(LOG_ZERO);
        }
    }
    beta
}

fn total_log_prob(alpha: &[f64], t_len: usize, s_len: usize) -> f64 {
    let last = &alpha[(t_len - 1) * s_len..];
    let mut lp = last[s_len - 1];
    if s_len > 1 {
        lp = log_add(lp, last[s_len - 2]);
    }
    lp
}

/// `-ln p(labels | m)`, or `+inf` when the matrix has too few frames.
pub fn ctc_neg_log_prob(m: &OutputMatrix, labels: &LabelSequence) -> f64 {
    neg_log_prob_raw(m, labels.as_slice()).unwrap_or(f64::INFINITY)
}

/// As [`ctc_neg_log_prob`] on a raw symbol slice; fails only on labels that
/// do not fit the matrix.
pub fn neg_log_prob_raw(m: &OutputMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(m, labels)?;
    let min_frames = labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count();
    if m.timesteps() < min_frames {
        return Ok(f64::INFINITY);
    }
    let ext = interleave_blanks(labels, m.blank());
    let logp = log_probs(m);
    let alpha = forward_vars(&logp, m.classes(), m.timesteps(), &ext);
    Ok(-total_log_prob(&alpha, m.timesteps(), ext.len()))
}

/// Loss and its gradient with respect to the pre-softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcResult {
    pub neg_log_prob: f64,
    /// `timesteps × classes`, row-major; all zero when infeasible.
    pub grad: Vec<f64>,
    pub feasible: bool,
}

/// Forward-backward gradient: `∂(-ln p)/∂u_tk = y_tk − γ_t(k)` where `γ` is
/// the posterior occupation of symbol `k` at frame `t`.
pub fn ctc_gradient(m: &OutputMatrix, labels: &LabelSequence) -> CtcResult {
    let (t_len, k) = (m.timesteps(), m.classes());
    let labels = labels.as_slice();
    if check_labels(m, labels).is_err() || t_len < labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count() {
        return CtcResult { neg_log_prob: f64::INFINITY, grad: vec![0.0; t_len * k], feasible: false };
    }
    let ext = interleave_blanks(labels, m.blank());
    let s_len = ext.len();
    let logp = log_probs(m);
    let alpha = forward_vars(&logp, k, t_len, &ext);
    let beta = backward_vars(&logp, k, t_len, &ext);
    let log_total = total_log_prob(&alpha, t_len, s_len);

    let mut grad = m.probs().to_vec();
    let mut occupancy = vec![LOG_ZERO; k];
    for t in 0..t_len {
        occupancy.fill(LOG_ZERO);
        for s in 0..s_len {
            let v = alpha[t * s_len + s] + beta[t * s_len + s];
            occupancy[ext[s]] = log_add(occupancy[ext[s]], v);
        }
        for (c, &occ) in occupancy.iter().enumerate() {
            if occ > LOG_ZERO {
                grad[t * k + c] -= exp(occ - log_total);
            }
        }
    }
    CtcResult { neg_log_prob: -log_total, grad, feasible: true }
}
