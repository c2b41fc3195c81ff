//! Plain-text resource files: dictionaries, gender lexicons, consistency
//! rules and decode answers. All are UTF-8, tab-separated, with `#`
//! comments and blank lines ignored.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use tablereader_core::decode::{ConsistencyRule, Dictionary, GenderLexicon, Gender, RuleTarget};
use tablereader_core::{Alphabet, FieldType};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// `count<TAB>word` per line.
pub fn parse_dictionary(text: &str, alphabet: &Alphabet) -> Result<Dictionary> {
    let mut entries = Vec::new();
    for (n, line) in content_lines(text) {
        let (count, word) = line.split_once('\t').ok_or_else(|| anyhow!("line {n}: expected count<TAB>word"))?;
        let count: u64 = count.trim().parse().with_context(|| format!("line {n}: bad count {count:?}"))?;
        entries.push((word.to_string(), count));
    }
    Ok(Dictionary::new(entries, alphabet)?)
}

/// `name<TAB>m|f` per line.
pub fn parse_lexicon(text: &str) -> Result<GenderLexicon> {
    let mut lex = GenderLexicon::new();
    for (n, line) in content_lines(text) {
        let (name, g) = line.split_once('\t').ok_or_else(|| anyhow!("line {n}: expected name<TAB>m|f"))?;
        let g: Gender = g.parse().with_context(|| format!("line {n}"))?;
        lex.insert(name.trim(), g);
    }
    Ok(lex)
}

/// `id<TAB>relation<TAB>required-gender<TAB>target<TAB>penalty<TAB>margin`.
pub fn parse_rules(text: &str) -> Result<Vec<ConsistencyRule>> {
    let mut rules = Vec::new();
    for (n, line) in content_lines(text) {
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 6 {
            bail!("line {n}: expected 6 columns, found {}", cols.len());
        }
        let number = |s: &str| s.parse::<f64>().with_context(|| format!("line {n}: bad number {s:?}"));
        let rule = ConsistencyRule {
            id: cols[0].to_string(),
            relation: cols[1].to_string(),
            required_gender: cols[2].parse().with_context(|| format!("line {n}"))?,
            target: cols[3].parse::<RuleTarget>().with_context(|| format!("line {n}"))?,
            penalty: number(cols[4])?,
            margin: number(cols[5])?,
        };
        rule.validate().with_context(|| format!("line {n}"))?;
        rules.push(rule);
    }
    Ok(rules)
}

pub fn load_dictionary(path: &Path, alphabet: &Alphabet) -> Result<Dictionary> {
    parse_dictionary(&crate::io::read_text(path)?, alphabet).with_context(|| format!("dictionary {}", path.display()))
}

pub fn load_lexicon(path: &Path) -> Result<GenderLexicon> {
    parse_lexicon(&crate::io::read_text(path)?).with_context(|| format!("lexicon {}", path.display()))
}

pub fn load_rules(path: &Path) -> Result<Vec<ConsistencyRule>> {
    parse_rules(&crate::io::read_text(path)?).with_context(|| format!("rules {}", path.display()))
}

/// One decoded field.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerRow {
    pub row_id: String,
    pub field: FieldType,
    pub answer: String,
    /// `None` when no dictionary entry fits.
    pub cost: Option<f64>,
    pub member: Option<usize>,
}

/// `row_id<TAB>field<TAB>answer<TAB>cost<TAB>member`; unanswered fields have
/// an empty answer, cost `inf` and member `-`.
pub fn format_answers(rows: &[AnswerRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let cost = r.cost.map_or_else(|| "inf".to_string(), |c| format!("{c:.6}"));
        let member = r.member.map_or_else(|| "-".to_string(), |m| m.to_string());
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.row_id, r.field, r.answer, cost, member);
    }
    out
}

/// Reads the first three columns of an answers file or a manifest, so both
/// can serve as predictions or references.
pub fn parse_labeled(text: &str) -> Result<Vec<(String, FieldType, String)>> {
    content_lines(text)
        .map(|(n, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                bail!("line {n}: expected at least 3 columns");
            }
            let field: FieldType = cols[1].parse().with_context(|| format!("line {n}"))?;
            Ok((cols[0].trim().to_string(), field, cols[2].to_string()))
        })
        .collect()
}
