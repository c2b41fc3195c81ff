//! Dictionary-constrained decoding.
//!
//! The cost of a dictionary entry `w` under an output matrix `m` is
//!
//! ```text
//! cost(w) = -ln p(w | m) / |w|^α  -  β · ln p(w)
//! ```
//!
//! where `p(w | m)` is the full CTC probability, `|w|` the number of alphabet
//! symbols and `p(w)` the smoothed relative dictionary frequency. A committee
//! takes the minimum of this cost over its members.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ctc::neg_log_prob_raw;
use crate::error::{Error, Result};
use crate::fields::{Alphabet, FieldType, DITTO};
use crate::math::{ln, powf};
use crate::net::OutputMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    pub word: String,
    pub symbols: Vec<usize>,
    pub count: u64,
}

/// Word list with smoothed relative frequencies.
///
/// Counts are expressed in units of the smallest positive count and then get
/// one added, so `p(w) > 0` for every entry and rescaling all counts by a
/// common factor leaves every `p(w)` unchanged. With integer counts whose
/// minimum is 1 this is plain add-one smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    entries: Vec<DictEntry>,
    log_priors: Vec<f64>,
    classes: usize,
    index: BTreeMap<String, usize>,
}

impl Dictionary {
    /// Duplicate words have their counts summed.
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, u64)>, alphabet: &Alphabet) -> Result<Self> {
        let mut list: Vec<DictEntry> = Vec::new();
        let mut index = BTreeMap::new();
        for (word, count) in entries {
            let word: String = word.into();
            if word.is_empty() {
                return Err(Error::InvalidParameter("empty dictionary word".into()));
            }
            if let Some(&i) = index.get(&word) {
                let e: &mut DictEntry = &mut list[i];
                e.count = e.count.saturating_add(count);
                continue;
            }
            let symbols = alphabet
                .encode(&word)
                .map_err(|_| Error::InvalidParameter(alloc::format!("dictionary word {word:?} is outside the alphabet")))?;
            index.insert(word.clone(), list.len());
            list.push(DictEntry { word, symbols, count });
        }
        if list.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        let unit = list.iter().map(|e| e.count).filter(|&c| c > 0).min().unwrap_or(1) as f64;
        let weights: Vec<f64> = list.iter().map(|e| e.count as f64 / unit + 1.0).collect();
        let log_total = ln(weights.iter().sum());
        let log_priors = weights.iter().map(|&w| ln(w) - log_total).collect();
        Ok(Dictionary { entries: list, log_priors, classes: alphabet.len(), index })
    }

    /// Every word with count 1.
    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = S>, alphabet: &Alphabet) -> Result<Self> {
        Self::new(words.into_iter().map(|w| (w, 1u64)), alphabet)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    /// Output size of the alphabet the words were encoded with.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn prior(&self, i: usize) -> f64 {
        crate::math::exp(self.log_priors[i])
    }

    pub fn log_prior(&self, i: usize) -> f64 {
        self.log_priors[i]
    }

    /// Indices of the `m` most frequent entries (ties by word order).
    pub fn most_frequent(&self, m: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            eb.count.cmp(&ea.count).then_with(|| ea.word.cmp(&eb.word))
        });
        idx.truncate(m);
        idx
    }

    fn check_matrix(&self, m: &OutputMatrix) -> Result<()> {
        if m.classes() != self.classes {
            return Err(Error::InvalidMatrix(alloc::format!(
                "matrix has {} classes, dictionary alphabet has {}",
                m.classes(),
                self.classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DecodeParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        DecodeParams { alpha, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "decode parameters must be finite and non-negative (alpha {}, beta {})",
                self.alpha,
                self.beta
            )));
        }
        Ok(())
    }

    /// `nlp / len^α − β · log_prior`.
    pub fn cost(&self, neg_log_prob: f64, len: usize, log_prior: f64) -> f64 {
        if neg_log_prob == f64::INFINITY {
            return f64::INFINITY;
        }
        neg_log_prob / powf(len as f64, self.alpha) - self.beta * log_prior
    }
}

/// Which part of a field a decoding row applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPart {
    Whole,
    Family,
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodingRow {
    pub field: FieldType,
    pub part: FieldPart,
    pub committee_size: usize,
    pub params: DecodeParams,
}

/// Shipped committee sizes and decoding weights per field.
pub const DECODING_TABLE: [DecodingRow; 6] = [
    DecodingRow { field: FieldType::Name, part: FieldPart::Family, committee_size: 3, params: DecodeParams::new(0.50, 0.50) },
    DecodingRow { field: FieldType::Name, part: FieldPart::Given, committee_size: 3, params: DecodeParams::new(0.25, 0.25) },
    DecodingRow { field: FieldType::Relation, part: FieldPart::Whole, committee_size: 2, params: DecodeParams::new(1.00, 0.00) },
    DecodingRow { field: FieldType::Age, part: FieldPart::Whole, committee_size: 1, params: DecodeParams::new(0.75, 0.25) },
    DecodingRow { field: FieldType::Marital, part: FieldPart::Whole, committee_size: 1, params: DecodeParams::new(0.75, 0.25) },
    DecodingRow { field: FieldType::Birthplace, part: FieldPart::Whole, committee_size: 2, params: DecodeParams::new(1.00, 0.00) },
];

pub fn decoding_row(field: FieldType, part: FieldPart) -> Option<&'static DecodingRow> {
    DECODING_TABLE.iter().find(|r| r.field == field && r.part == part)
}

/// Committee size of a field's shipped configuration.
pub fn committee_size(field: FieldType) -> usize {
    DECODING_TABLE.iter().find(|r| r.field == field).map_or(1, |r| r.committee_size)
}

/// Shipped `(α, β)` for a non-NAME field, or the family-name row for NAME.
pub fn default_params(field: FieldType) -> DecodeParams {
    let part = if field == FieldType::Name { FieldPart::Family } else { FieldPart::Whole };
    decoding_row(field, part).map_or(DecodeParams::new(1.0, 0.0), |r| r.params)
}

pub const DEFAULT_ALPHA_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_BETA_GRID: [f64; 3] = [0.0, 0.25, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub cost: f64,
    /// Committee member whose matrix gave the cost.
    pub member: usize,
}

impl ScoredWord {
    pub fn feasible(&self) -> bool {
        self.cost.is_finite()
    }
}

/// Ascending cost, then word, then member.
pub fn rank(a: &ScoredWord, b: &ScoredWord) -> Ordering {
    a.cost.total_cmp(&b.cost).then_with(|| a.word.cmp(&b.word)).then(a.member.cmp(&b.member))
}

/// Cost of one symbol sequence with frequency `prior`.
pub fn word_cost(m: &OutputMatrix, symbols: &[usize], prior: f64, params: DecodeParams) -> Result<f64> {
    params.validate()?;
    if symbols.is_empty() {
        return Err(Error::InvalidLabels("word has no symbols".into()));
    }
    if !(prior > 0.0 && prior <= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("word frequency {prior} outside (0, 1]")));
    }
    let nlp = neg_log_prob_raw(m, symbols)?;
    Ok(params.cost(nlp, symbols.len(), ln(prior)))
}

fn check_committee(members: &[&OutputMatrix], dict: &Dictionary) -> Result<()> {
    if members.is_empty() {
        return Err(Error::EmptyCommittee);
    }
    members.iter().try_for_each(|m| dict.check_matrix(m))
}

/// `-ln p(w | m_i)` for every member `i` and entry `w`, member-major.
fn member_costs(members: &[&OutputMatrix], dict: &Dictionary) -> Result<Vec<Vec<f64>>> {
    members
        .iter()
        .map(|m| dict.entries.iter().map(|e| neg_log_prob_raw(m, &e.symbols)).collect())
        .collect()
}

/// One scored word per entry, each at its cheapest member.
fn score_entries(nlp: &[Vec<f64>], dict: &Dictionary, params: DecodeParams) -> Vec<ScoredWord> {
    dict.entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut best = ScoredWord { word: e.word.clone(), cost: f64::INFINITY, member: 0 };
            for (member, costs) in nlp.iter().enumerate() {
                let c = params.cost(costs[i], e.symbols.len(), dict.log_priors[i]);
                if c < best.cost {
                    best.cost = c;
                    best.member = member;
                }
            }
            best
        })
        .collect()
}

fn pick_best(scored: Vec<ScoredWord>) -> Option<ScoredWord> {
    scored.into_iter().min_by(rank).filter(ScoredWord::feasible)
}

/// Minimal-cost entry; `None` when no entry fits the matrix.
pub fn best_word(m: &OutputMatrix, dict: &Dictionary, params: DecodeParams) -> Result<Option<ScoredWord>> {
    committee_best(&[m], dict, params)
}

/// Minimum over (entry, member) pairs.
pub fn committee_best(members: &[&OutputMatrix], dict: &Dictionary, params: DecodeParams) -> Result<Option<ScoredWord>> {
    params.validate()?;
    check_committee(members, dict)?;
    Ok(pick_best(score_entries(&member_costs(members, dict)?, dict, params)))
}

/// The `k` cheapest entries in rank order, each listed once at its cheapest
/// member. Infeasible entries sort last with infinite cost.
pub fn top_k(members: &[&OutputMatrix], dict: &Dictionary, params: DecodeParams, k: usize) -> Result<Vec<ScoredWord>> {
    params.validate()?;
    check_committee(members, dict)?;
    let mut scored = score_entries(&member_costs(members, dict)?, dict, params);
    scored.sort_by(rank);
    scored.truncate(k);
    Ok(scored)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NameParams {
    pub family: DecodeParams,
    pub given: DecodeParams,
    /// Entries kept from each dictionary, most frequent first.
    pub cap: usize,
}

impl Default for NameParams {
    fn default() -> Self {
        NameParams { family: DecodeParams::new(0.50, 0.50), given: DecodeParams::new(0.25, 0.25), cap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameResult {
    pub family: ScoredWord,
    pub given: ScoredWord,
    /// Sum of the two part costs.
    pub cost: f64,
}

/// Splits a full-string cost `nlp` between the parts in proportion to their
/// symbol counts and applies each part's own length normalization and prior.
fn name_cost(nlp: f64, f_len: usize, g_len: usize, f_prior: f64, g_prior: f64, p: &NameParams) -> (f64, f64) {
    let total = (f_len + g_len) as f64;
    let f = p.family.cost(nlp * f_len as f64 / total, f_len, f_prior);
    let g = p.given.cost(nlp * g_len as f64 / total, g_len, g_prior);
    (f, g)
}

fn name_rank(a: &NameResult, b: &NameResult) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then_with(|| a.family.word.cmp(&b.family.word))
        .then_with(|| a.given.word.cmp(&b.given.word))
        .then(a.family.member.cmp(&b.family.member))
}

/// Joint decoding of `family given` over the capped cross product of both
/// dictionaries. `None` when no pair fits the matrix.
pub fn decode_name_field(
    members: &[&OutputMatrix],
    alphabet: &Alphabet,
    family: &Dictionary,
    given: &Dictionary,
    params: &NameParams,
) -> Result<Option<NameResult>> {
    Ok(name_top_k(members, alphabet, family, given, params, 1)?.pop())
}

/// The `k` best feasible (family, given) pairs, each at its cheapest member,
/// ordered by joint cost, then family word, given word and member.
pub fn name_top_k(
    members: &[&OutputMatrix],
    alphabet: &Alphabet,
    family: &Dictionary,
    given: &Dictionary,
    params: &NameParams,
    k: usize,
) -> Result<Vec<NameResult>> {
    params.family.validate()?;
    params.given.validate()?;
    check_committee(members, family)?;
    check_committee(members, given)?;
    let space = alphabet
        .index_of(" ")
        .ok_or_else(|| Error::InvalidParameter("NAME alphabet has no space symbol".into()))?;
    let mut pairs = Vec::new();
    let mut seq = Vec::new();
    for &fi in &family.most_frequent(params.cap) {
        let fe = &family.entries[fi];
        for &gi in &given.most_frequent(params.cap) {
            let ge = &given.entries[gi];
            seq.clear();
            seq.extend_from_slice(&fe.symbols);
            seq.push(space);
            seq.extend_from_slice(&ge.symbols);
            let mut best: Option<NameResult> = None;
            for (member, m) in members.iter().enumerate() {
                let nlp = neg_log_prob_raw(m, &seq)?;
                let (fc, gc) = name_cost(nlp, fe.symbols.len(), ge.symbols.len(), family.log_priors[fi], given.log_priors[gi], params);
                let cost = fc + gc;
                if cost.is_finite() && best.as_ref().is_none_or(|b| cost < b.cost) {
                    best = Some(NameResult {
                        family: ScoredWord { word: fe.word.clone(), cost: fc, member },
                        given: ScoredWord { word: ge.word.clone(), cost: gc, member },
                        cost,
                    });
                }
            }
            pairs.extend(best);
        }
    }
    pairs.sort_by(name_rank);
    pairs.truncate(k);
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedFamily {
    pub name: String,
    /// A ditto with no earlier family name to copy.
    pub unresolved: bool,
}

/// Replaces each ditto with the nearest earlier non-ditto family name of the
/// same column.
pub fn normalize_family_ditto<S: AsRef<str>>(column: &[S]) -> Vec<ResolvedFamily> {
    let mut last: Option<&str> = None;
    column
        .iter()
        .map(|s| {
            let s = s.as_ref();
            if s == DITTO {
                match last {
                    Some(prev) => ResolvedFamily { name: prev.to_string(), unresolved: false },
                    None => ResolvedFamily { name: DITTO.to_string(), unresolved: true },
                }
            } else {
                last = Some(s);
                ResolvedFamily { name: s.to_string(), unresolved: false }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl core::str::FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "m" | "M" | "male" => Ok(Gender::Male),
            "f" | "F" | "female" => Ok(Gender::Female),
            other => Err(Error::InvalidParameter(alloc::format!("unknown gender {other:?}"))),
        }
    }
}

/// Given-name genders, looked up case-insensitively.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderLexicon {
    names: BTreeMap<String, Gender>,
}

impl GenderLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, gender: Gender) {
        self.names.insert(name.to_lowercase(), gender);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Gender of the first word of a given-name answer.
    pub fn gender_of(&self, given: &str) -> Option<Gender> {
        let first = given.split_whitespace().next()?;
        self.names.get(&first.to_lowercase()).copied()
    }

    /// A few common names of the period.
    pub fn shipped() -> Self {
        let mut lex = Self::new();
        for n in ["John", "William", "James", "George", "Thomas", "Charles", "Henry", "Joseph", "Robert", "Edward"] {
            lex.insert(n, Gender::Male);
        }
        for n in ["Mary", "Joan", "Elizabeth", "Sarah", "Anna", "Margaret", "Emma", "Alice", "Ellen", "Jane"] {
            lex.insert(n, Gender::Female);
        }
        lex
    }
}

/// Field that absorbs a rule's penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTarget {
    Name,
    Relation,
    /// Whichever of the two is less certain: the smaller gap between its best
    /// and second-best cost.
    Auto,
}

impl core::str::FromStr for RuleTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "name" => Ok(RuleTarget::Name),
            "relation" => Ok(RuleTarget::Relation),
            "auto" => Ok(RuleTarget::Auto),
            other => Err(Error::InvalidParameter(alloc::format!("unknown rule target {other:?}"))),
        }
    }
}

pub const DEFAULT_PENALTY: f64 = 2.0;
pub const DEFAULT_MARGIN: f64 = 1.0;

/// Fires when the row's RELATION equals `relation` (ignoring case) while its
/// given name has a known gender other than `required_gender`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRule {
    pub id: String,
    pub relation: String,
    pub required_gender: Gender,
    pub target: RuleTarget,
    pub penalty: f64,
    pub margin: f64,
}

impl ConsistencyRule {
    pub fn new(id: &str, relation: &str, required_gender: Gender, target: RuleTarget) -> Self {
        ConsistencyRule {
            id: id.to_string(),
            relation: relation.to_string(),
            required_gender,
            target,
            penalty: DEFAULT_PENALTY,
            margin: DEFAULT_MARGIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalty.is_finite() && self.penalty > 0.0 && self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("rule {}: penalty and margin must be positive", self.id)));
        }
        Ok(())
    }

    fn fires(&self, relation: &str, given: &str, lexicon: &GenderLexicon) -> bool {
        relation.eq_ignore_ascii_case(&self.relation)
            && lexicon.gender_of(given).is_some_and(|g| g != self.required_gender)
    }

    /// Wife/husband/son/daughter against the given-name gender.
    pub fn shipped() -> Vec<ConsistencyRule> {
        alloc::vec![
            ConsistencyRule::new("daughter", "Daughter", Gender::Female, RuleTarget::Auto),
            ConsistencyRule::new("husband", "Husband", Gender::Male, RuleTarget::Auto),
            ConsistencyRule::new("son", "Son", Gender::Male, RuleTarget::Auto),
            ConsistencyRule::new("wife", "Wife", Gender::Female, RuleTarget::Auto),
        ]
    }
}

/// Ranked alternatives of one field and the one currently answered.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub alternatives: Vec<ScoredWord>,
    pub chosen: usize,
}

impl Candidates {
    /// Answers the first alternative; the list is sorted by [`rank`].
    pub fn new(mut alternatives: Vec<ScoredWord>) -> Self {
        alternatives.sort_by(rank);
        Candidates { alternatives, chosen: 0 }
    }

    pub fn answer(&self) -> Option<&ScoredWord> {
        self.alternatives.get(self.chosen)
    }

    /// Second-best minus best cost; infinite with fewer than two options.
    fn certainty_gap(&self) -> f64 {
        match (self.alternatives.first(), self.alternatives.get(1)) {
            (Some(a), Some(b)) => b.cost - a.cost,
            _ => f64::INFINITY,
        }
    }
}

/// The fields of one row the rules look at.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCandidates {
    pub relation: Candidates,
    pub given_name: Candidates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyEvent {
    pub rule: String,
    /// `Name` or `Relation`, never `Auto`.
    pub field: RuleTarget,
    pub original: String,
    /// Cost of the original answer plus the penalty.
    pub penalized_cost: f64,
    /// The alternative switched to, if any.
    pub replacement: Option<String>,
}

/// Applies `rules` in id order. A fired rule penalizes its target's answer;
/// the target switches to the first cheaper-ranked alternative that no longer
/// fires the rule when that alternative beats the penalized cost and lies
/// within the rule's margin of the original cost. Stored costs are never
/// modified, so re-running on the output changes nothing.
pub fn apply_consistency(
    row: &RowCandidates,
    rules: &[ConsistencyRule],
    lexicon: &GenderLexicon,
) -> (RowCandidates, Vec<ConsistencyEvent>) {
    let mut out = row.clone();
    let mut events = Vec::new();
    let mut order: Vec<&ConsistencyRule> = rules.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    for rule in order {
        let (Some(rel), Some(given)) = (out.relation.answer(), out.given_name.answer()) else {
            continue;
        };
        if !rule.fires(&rel.word, &given.word, lexicon) {
            continue;
        }
        let target = match rule.target {
            RuleTarget::Auto => {
                if out.given_name.certainty_gap() <= out.relation.certainty_gap() {
                    RuleTarget::Name
                } else {
                    RuleTarget::Relation
                }
            }
            t => t,
        };
        let (rel_word, given_word) = (rel.word.clone(), given.word.clone());
        let field = if target == RuleTarget::Name { &mut out.given_name } else { &mut out.relation };
        let current = &field.alternatives[field.chosen];
        let penalized = current.cost + rule.penalty;
        let original_cost = current.cost;
        let mut event = ConsistencyEvent {
            rule: rule.id.clone(),
            field: target,
            original: current.word.clone(),
            penalized_cost: penalized,
            replacement: None,
        };
        let next = field.alternatives.iter().enumerate().find(|(i, alt)| {
            *i != field.chosen
                && match target {
                    RuleTarget::Name => !rule.fires(&rel_word, &alt.word, lexicon),
                    _ => !rule.fires(&alt.word, &given_word, lexicon),
                }
        });
        if let Some((i, alt)) = next {
            if alt.cost < penalized && alt.cost - original_cost <= rule.margin {
                event.replacement = Some(alt.word.clone());
                field.chosen = i;
            }
        }
        events.push(event);
    }
    (out, events)
}

/// One validation writing: the committee's matrices and the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationItem {
    pub members: Vec<OutputMatrix>,
    pub truth: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridResult {
    pub params: DecodeParams,
    pub accuracy: f64,
}

/// Word accuracy of [`committee_best`] at every grid point; the best point
/// wins, ties going to the smaller α and then the smaller β.
pub fn grid_search_params(items: &[ValidationItem], dict: &Dictionary, alphas: &[f64], betas: &[f64]) -> Result<GridResult> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    let mut grid: Vec<DecodeParams> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| DecodeParams::new(a, b))).collect();
    for p in &grid {
        p.validate()?;
    }
    grid.sort_by(|x, y| x.alpha.total_cmp(&y.alpha).then(x.beta.total_cmp(&y.beta)));

    let mut cached = Vec::with_capacity(items.len());
    for item in items {
        let refs: Vec<&OutputMatrix> = item.members.iter().collect();
        check_committee(&refs, dict)?;
        cached.push(member_costs(&refs, dict)?);
    }
    let mut best: Option<GridResult> = None;
    for params in grid {
        let correct = items
            .iter()
            .zip(&cached)
            .filter(|(item, nlp)| pick_best(score_entries(nlp, dict, params)).is_some_and(|w| w.word == item.truth))
            .count();
        let accuracy = if items.is_empty() { 0.0 } else { correct as f64 / items.len() as f64 };
        if best.is_none_or(|b| accuracy > b.accuracy) {
            best = Some(GridResult { params, accuracy });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn abc() -> Alphabet {
        Alphabet::new(["a", "b", "c"]).unwrap()
    }

    fn random_matrix(t: usize, k: usize, rng: &mut ChaCha8Rng) -> OutputMatrix {
        let mut probs = Vec::with_capacity(t * k);
        for _ in 0..t {
            let col: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = col.iter().sum();
            probs.extend(col.iter().map(|v| v / s));
        }
        OutputMatrix::new(t, k, k - 1, probs).unwrap()
    }

    /// Sums the probability of every frame labeling that collapses to `w`.
    fn brute_prob(m: &OutputMatrix, w: &[usize]) -> f64 {
        let (t, k) = (m.timesteps(), m.classes());
        let mut total = 0.0;
        let mut path = vec![0usize; t];
        loop {
            let mut collapsed = Vec::new();
            let mut prev = None;
            for &s in &path {
                if Some(s) != prev && s != m.blank() {
                    collapsed.push(s);
                }
                prev = Some(s);
            }
            if collapsed == w {
                total += path.iter().enumerate().map(|(i, &s)| m.prob(i, s)).product::<f64>();
            }
            let mut i = 0;
            loop {
                if i == t {
                    return total;
                }
                path[i] += 1;
                if path[i] < k {
                    break;
                }
                path[i] = 0;
                i += 1;
            }
        }
    }

    fn oracle_best(m: &[&OutputMatrix], dict: &Dictionary, p: DecodeParams) -> Option<ScoredWord> {
        let mut all = Vec::new();
        for (i, e) in dict.entries().iter().enumerate() {
            for (j, mm) in m.iter().enumerate() {
                let prob = brute_prob(mm, &e.symbols);
                let nlp = if prob > 0.0 { -prob.ln() } else { f64::INFINITY };
                let cost = if nlp.is_infinite() {
                    f64::INFINITY
                } else {
                    nlp / (e.symbols.len() as f64).powf(p.alpha) - p.beta * dict.prior(i).ln()
                };
                all.push(ScoredWord { word: e.word.clone(), cost, member: j });
            }
        }
        all.into_iter().min_by(rank).filter(ScoredWord::feasible)
    }

    fn random_dict(n: usize, max_len: usize, rng: &mut ChaCha8Rng) -> Dictionary {
        let letters = ["a", "b", "c"];
        let mut words = Vec::new();
        while words.len() < n {
            let len = rng.gen_range(1..=max_len);
            let w: String = (0..len).map(|_| letters[rng.gen_range(0..3)]).collect();
            if !words.iter().any(|(x, _): &(String, u64)| *x == w) {
                words.push((w, rng.gen_range(0..20)));
            }
        }
        Dictionary::new(words, &abc()).unwrap()
    }

    #[test]
    fn priors_sum_to_one_and_are_positive() {
        let d = Dictionary::new([("a", 0u64), ("b", 3), ("c", 7)], &abc()).unwrap();
        let s: f64 = (0..3).map(|i| d.prior(i)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(d.prior(0) > 0.0);
        // minimum positive count 3: weights 1, 2, 10/3 + 1
        assert!((d.prior(1) / d.prior(0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn add_one_with_unit_minimum() {
        let d = Dictionary::new([("a", 1u64), ("b", 3)], &abc()).unwrap();
        assert!((d.prior(0) - 2.0 / 6.0).abs() < 1e-12);
        assert!((d.prior(1) - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn dictionary_errors() {
        assert_eq!(Dictionary::new(Vec::<(String, u64)>::new(), &abc()), Err(Error::EmptyDictionary));
        assert!(Dictionary::from_words(["ad"], &abc()).is_err());
        assert!(Dictionary::from_words([""], &abc()).is_err());
        let d = Dictionary::new([("a", 1u64), ("a", 2)], &abc()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries()[0].count, 3);
    }

    #[test]
    fn word_cost_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(3, 3, &mut rng);
        let ab = [0usize, 1];
        let p = brute_prob(&m, &ab);
        let expected = -p.ln() / 2f64.powf(0.5) - 0.25 * 0.1f64.ln();
        let got = word_cost(&m, &ab, 0.1, DecodeParams::new(0.5, 0.25)).unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn word_cost_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(4, 3, &mut rng);
        let plain = -brute_prob(&m, &[0, 1]).ln();
        assert!((word_cost(&m, &[0, 1], 0.3, DecodeParams::new(0.0, 0.0)).unwrap() - plain).abs() < 1e-10);
        let single = -brute_prob(&m, &[2 - 1]).ln();
        for a in [0.0, 0.5, 3.0] {
            assert!((word_cost(&m, &[1], 0.3, DecodeParams::new(a, 0.0)).unwrap() - single).abs() < 1e-10);
        }
        assert_eq!(word_cost(&m, &[0, 0, 0], 0.5, DecodeParams::new(1.0, 0.0)).unwrap(), f64::INFINITY);
        assert!(word_cost(&m, &[], 0.5, DecodeParams::new(1.0, 0.0)).is_err());
        assert!(word_cost(&m, &[0], 0.0, DecodeParams::new(1.0, 0.0)).is_err());
        assert!(word_cost(&m, &[0], 0.5, DecodeParams::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn single_entry_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(3, 4, &mut rng);
        let d = Dictionary::from_words(["ab"], &abc()).unwrap();
        assert_eq!(best_word(&m, &d, DecodeParams::new(1.0, 0.0)).unwrap().unwrap().word, "ab");
        // a uniform matrix makes "a" and "b" equally likely
        let u = OutputMatrix::new(2, 4, 3, vec![0.25; 8]).unwrap();
        let d = Dictionary::from_words(["b", "a"], &abc()).unwrap();
        let best = best_word(&u, &d, DecodeParams::new(1.0, 0.0)).unwrap().unwrap();
        assert_eq!(best.word, "a");
        let best = committee_best(&[&u, &u], &d, DecodeParams::new(1.0, 0.0)).unwrap().unwrap();
        assert_eq!((best.word.as_str(), best.member), ("a", 0));
    }

    #[test]
    fn no_answer_when_everything_is_infeasible() {
        let m = OutputMatrix::new(1, 4, 3, vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let d = Dictionary::from_words(["ab", "aa"], &abc()).unwrap();
        assert_eq!(best_word(&m, &d, DecodeParams::new(1.0, 0.0)).unwrap(), None);
        let k = top_k(&[&m], &d, DecodeParams::new(1.0, 0.0), 5).unwrap();
        assert_eq!(k.len(), 2);
        assert!(k.iter().all(|w| !w.feasible()));
    }

    #[test]
    fn committee_errors() {
        let d = Dictionary::from_words(["a"], &abc()).unwrap();
        assert_eq!(committee_best(&[], &d, DecodeParams::new(1.0, 0.0)), Err(Error::EmptyCommittee));
        let wrong = OutputMatrix::new(1, 2, 1, vec![0.5, 0.5]).unwrap();
        assert!(matches!(best_word(&wrong, &d, DecodeParams::new(1.0, 0.0)), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn committee_matches_pair_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = random_matrix(4, 4, &mut rng);
            let b = random_matrix(4, 4, &mut rng);
            let alpha4 = Alphabet::new(["a", "b", "c"]).unwrap();
            let d = Dictionary::new([("ab", 2u64), ("c", 1), ("bca", 5)], &alpha4).unwrap();
            let p = DecodeParams::new(0.5, 0.25);
            let got = committee_best(&[&a, &b], &d, p).unwrap().unwrap();
            let want = oracle_best(&[&a, &b], &d, p).unwrap();
            assert_eq!((got.word.as_str(), got.member), (want.word.as_str(), want.member));
            assert!((got.cost - want.cost).abs() < 1e-9);
            for m in [&a, &b] {
                assert!(got.cost <= best_word(m, &d, p).unwrap().unwrap().cost + 1e-12);
            }
            assert_eq!(committee_best(&[&a, &a], &d, p).unwrap(), best_word(&a, &d, p).unwrap());
        }
    }

    #[test]
    fn top_k_matches_sort_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(5, 4, &mut rng);
        let d = random_dict(12, 3, &mut rng);
        let p = DecodeParams::new(0.75, 0.25);
        let all = top_k(&[&m], &d, p, usize::MAX).unwrap();
        assert_eq!(all.len(), d.len());
        for w in all.windows(2) {
            assert_ne!(rank(&w[0], &w[1]), Ordering::Greater);
        }
        assert_eq!(top_k(&[&m], &d, p, 1).unwrap()[0], best_word(&m, &d, p).unwrap().unwrap());
        assert_eq!(top_k(&[&m], &d, p, 4).unwrap(), all[..4].to_vec());
    }

    #[test]
    fn best_word_matches_oracle_on_random_dicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let m = random_matrix(5, 4, &mut rng);
            let d = random_dict(rng.gen_range(1..30), 4, &mut rng);
            let p = DecodeParams::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let got = best_word(&m, &d, p).unwrap().map(|w| w.word);
            assert_eq!(got, oracle_best(&[&m], &d, p).map(|w| w.word));
        }
    }

    fn name_alphabet() -> Alphabet {
        Alphabet::new([" ", "a", "b"]).unwrap()
    }

    #[test]
    fn name_field_matches_pair_oracle() {
        let al = name_alphabet();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fam = Dictionary::new([("a", 3u64), ("b", 1), ("ab", 2), ("ba", 5), ("bb", 1)], &al).unwrap();
        let giv = Dictionary::new([("a", 1u64), ("b", 4), ("aa", 2), ("ab", 1), ("ba", 2)], &al).unwrap();
        let params = NameParams::default();
        for _ in 0..5 {
            let m = random_matrix(6, 4, &mut rng);
            let got = decode_name_field(&[&m], &al, &fam, &giv, &params).unwrap().unwrap();
            let mut want: Option<(f64, String, String)> = None;
            for (fi, f) in fam.entries().iter().enumerate() {
                for (gi, g) in giv.entries().iter().enumerate() {
                    let mut seq = f.symbols.clone();
                    seq.push(0);
                    seq.extend(&g.symbols);
                    let nlp = -brute_prob(&m, &seq).ln();
                    let (fl, gl) = (f.symbols.len() as f64, g.symbols.len() as f64);
                    let fc = nlp * fl / (fl + gl) / fl.powf(0.5) - 0.5 * fam.prior(fi).ln();
                    let gc = nlp * gl / (fl + gl) / gl.powf(0.25) - 0.25 * giv.prior(gi).ln();
                    let c = fc + gc;
                    let cand = (c, f.word.clone(), g.word.clone());
                    if want.as_ref().is_none_or(|w| c < w.0 || (c == w.0 && (&cand.1, &cand.2) < (&w.1, &w.2))) {
                        want = Some(cand);
                    }
                }
            }
            let want = want.unwrap();
            assert_eq!((got.family.word.as_str(), got.given.word.as_str()), (want.1.as_str(), want.2.as_str()));
            assert!((got.cost - want.0).abs() < 1e-9);
        }
    }

    #[test]
    fn name_field_single_pair_and_cap() {
        let al = name_alphabet();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_matrix(5, 4, &mut rng);
        let fam = Dictionary::from_words(["ab"], &al).unwrap();
        let giv = Dictionary::from_words(["b"], &al).unwrap();
        let r = decode_name_field(&[&m], &al, &fam, &giv, &NameParams::default()).unwrap().unwrap();
        assert_eq!((r.family.word.as_str(), r.given.word.as_str()), ("ab", "b"));
        let giv = Dictionary::new([("a", 9u64), ("b", 1)], &al).unwrap();
        let capped = NameParams { cap: 1, ..NameParams::default() };
        let r = decode_name_field(&[&m], &al, &fam, &giv, &capped).unwrap().unwrap();
        assert_eq!(r.given.word, "a");
        assert!(decode_name_field(&[&m], &abc(), &Dictionary::from_words(["a"], &abc()).unwrap(), &Dictionary::from_words(["b"], &abc()).unwrap(), &capped).is_err());
    }

    #[test]
    fn decoding_table_values() {
        let p = |f, part| decoding_row(f, part).unwrap().params;
        assert_eq!(p(FieldType::Name, FieldPart::Family), DecodeParams::new(0.5, 0.5));
        assert_eq!(p(FieldType::Name, FieldPart::Given), DecodeParams::new(0.25, 0.25));
        assert_eq!(p(FieldType::Relation, FieldPart::Whole), DecodeParams::new(1.0, 0.0));
        assert_eq!(p(FieldType::Age, FieldPart::Whole), DecodeParams::new(0.75, 0.25));
        assert_eq!(p(FieldType::Marital, FieldPart::Whole), DecodeParams::new(0.75, 0.25));
        assert_eq!(p(FieldType::Birthplace, FieldPart::Whole), DecodeParams::new(1.0, 0.0));
        let sizes: Vec<usize> = FieldType::ALL.iter().map(|&f| committee_size(f)).collect();
        assert_eq!(sizes, vec![3, 2, 1, 1, 2]);
        for row in &DECODING_TABLE {
            assert!(DEFAULT_ALPHA_GRID.contains(&row.params.alpha));
            assert!(DEFAULT_BETA_GRID.contains(&row.params.beta));
        }
    }

    #[test]
    fn ditto_propagation() {
        let r = normalize_family_ditto(&["Smith", "_", "_"]);
        assert!(r.iter().all(|x| x.name == "Smith" && !x.unresolved));
        let r = normalize_family_ditto(&["Smith", "Brown"]);
        assert_eq!(r[1].name, "Brown");
        let r = normalize_family_ditto(&["_", "Jones", "_"]);
        assert!(r[0].unresolved);
        assert_eq!(r[0].name, "_");
        assert_eq!(r[2].name, "Jones");
    }

    fn sw(word: &str, cost: f64) -> ScoredWord {
        ScoredWord { word: word.to_string(), cost, member: 0 }
    }

    fn wife_row(joan_cost: f64) -> RowCandidates {
        RowCandidates {
            relation: Candidates::new(vec![sw("Wife", 1.0), sw("Head", 6.0)]),
            given_name: Candidates::new(vec![sw("John", 2.0), sw("James", 2.2), sw("Joan", joan_cost)]),
        }
    }

    #[test]
    fn wife_with_male_name_flips_within_margin() {
        let rules = vec![ConsistencyRule::new("wife", "Wife", Gender::Female, RuleTarget::Auto)];
        let (row, events) = apply_consistency(&wife_row(2.5), &rules, &GenderLexicon::shipped());
        assert_eq!(row.given_name.answer().unwrap().word, "Joan");
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].field, RuleTarget::Name);
        assert_eq!(events[0].replacement.as_deref(), Some("Joan"));

        let (row, events) = apply_consistency(&wife_row(3.5), &rules, &GenderLexicon::shipped());
        assert_eq!(row.given_name.answer().unwrap().word, "John");
        assert_eq!(events[0].replacement, None);
        assert!((events[0].penalized_cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_identity_and_idempotence() {
        let rules = ConsistencyRule::shipped();
        let lex = GenderLexicon::shipped();
        let mut row = wife_row(2.5);
        row.relation = Candidates::new(vec![sw("Head", 1.0)]);
        let (out, events) = apply_consistency(&row, &rules, &lex);
        assert_eq!(out, row);
        assert!(events.is_empty());
        for c in [2.5, 3.5] {
            let (once, _) = apply_consistency(&wife_row(c), &rules, &lex);
            let (twice, _) = apply_consistency(&once, &rules, &lex);
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn auto_target_penalizes_less_certain_relation() {
        let lex = GenderLexicon::shipped();
        let rules = vec![ConsistencyRule::new("wife", "Wife", Gender::Female, RuleTarget::Auto)];
        let row = RowCandidates {
            relation: Candidates::new(vec![sw("Wife", 1.0), sw("Head", 1.3)]),
            given_name: Candidates::new(vec![sw("John", 1.0), sw("Joan", 5.0)]),
        };
        let (out, events) = apply_consistency(&row, &rules, &lex);
        assert_eq!(events[0].field, RuleTarget::Relation);
        assert_eq!(out.relation.answer().unwrap().word, "Head");
        assert_eq!(out.given_name.answer().unwrap().word, "John");
    }

    #[test]
    fn grid_search_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = random_dict(6, 3, &mut rng);
        let items: Vec<ValidationItem> = (0..4)
            .map(|_| ValidationItem { members: vec![random_matrix(5, 4, &mut rng)], truth: d.entries()[0].word.clone() })
            .collect();
        let r = grid_search_params(&items, &d, &[0.3], &[0.7]).unwrap();
        assert_eq!(r.params, DecodeParams::new(0.3, 0.7));
        assert!(grid_search_params(&items, &d, &[], &[0.0]).is_err());
    }

    #[test]
    fn grid_search_recovers_planted_optimum() {
        // One long word and one short word; the truth is always the long one,
        // which only wins once the length normalization is strong enough.
        let al = Alphabet::new(["a", "b"]).unwrap();
        let d = Dictionary::from_words(["a", "abab"], &al).unwrap();
        let m = |pa: f64, pb: f64| {
            let mut probs = Vec::new();
            for t in 0..4 {
                let (x, y) = if t % 2 == 0 { (pa, 0.0) } else { (0.0, pb) };
                let g = 1.0 - x - y;
                probs.extend([x.max(1e-6), y.max(1e-6), g]);
            }
            let s: Vec<f64> = probs.chunks(3).flat_map(|c| {
                let t: f64 = c.iter().sum();
                c.iter().map(move |v| v / t).collect::<Vec<_>>()
            }).collect();
            OutputMatrix::new(4, 3, 2, s).unwrap()
        };
        let items = vec![ValidationItem { members: vec![m(0.3, 0.3)], truth: "abab".into() }];
        let r = grid_search_params(&items, &d, &DEFAULT_ALPHA_GRID, &DEFAULT_BETA_GRID).unwrap();
        assert_eq!(r.accuracy, 1.0);
        let lower = grid_search_params(&items, &d, &[0.0], &[0.0]).unwrap();
        assert!(lower.accuracy < 1.0);
        // smallest α that wins, then smallest β
        let a = r.params.alpha;
        for &smaller in DEFAULT_ALPHA_GRID.iter().filter(|&&x| x < a) {
            assert!(grid_search_params(&items, &d, &[smaller], &DEFAULT_BETA_GRID).unwrap().accuracy < 1.0);
        }
        assert_eq!(r.params, DecodeParams::new(1.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn frequency_scaling_preserves_order(seed in any::<u64>(), scale in 1u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(5, 4, &mut rng);
            let d = random_dict(8, 3, &mut rng);
            let scaled = Dictionary::new(d.entries().iter().map(|e| (e.word.clone(), e.count * scale)), &abc()).unwrap();
            let p = DecodeParams::new(0.5, 0.5);
            let a = top_k(&[&m], &d, p, usize::MAX).unwrap();
            let b = top_k(&[&m], &scaled, p, usize::MAX).unwrap();
            let shift = b[0].cost - a[0].cost;
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(&x.word, &y.word);
                if x.feasible() {
                    prop_assert!((y.cost - x.cost - shift).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn beta_zero_ignores_counts(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(5, 4, &mut rng);
            let d = random_dict(8, 3, &mut rng);
            let other = Dictionary::new(d.entries().iter().map(|e| (e.word.clone(), rng.gen_range(0..100u64))), &abc()).unwrap();
            let p = DecodeParams::new(0.75, 0.0);
            prop_assert_eq!(top_k(&[&m], &d, p, usize::MAX).unwrap(), top_k(&[&m], &other, p, usize::MAX).unwrap());
        }
    }
}
