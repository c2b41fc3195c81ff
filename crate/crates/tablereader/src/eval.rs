//! Exact-match word accuracy.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use tablereader_core::fields::gt_normalize;
use tablereader_core::FieldType;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FieldScore {
    pub evaluated: usize,
    pub correct: usize,
}

impl FieldScore {
    /// Fraction correct; an empty set counts as fully correct.
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            1.0
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_field: BTreeMap<FieldType, FieldScore>,
    pub overall: FieldScore,
    /// Prediction rows with no reference, plus repeated reference keys.
    pub skipped: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.overall.accuracy()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (field, s) in &self.per_field {
            writeln!(f, "{field}\t{}/{}\t{:.4}", s.correct, s.evaluated, s.accuracy())?;
        }
        writeln!(f, "overall\t{}/{}\t{:.4}", self.overall.correct, self.overall.evaluated, self.accuracy())?;
        write!(f, "skipped\t{}", self.skipped)
    }
}

fn canonical(field: FieldType, s: &str) -> String {
    gt_normalize(field, s).unwrap_or_else(|_| s.to_string())
}

/// Compares answers keyed by `(row_id, field)`. Every distinct reference key
/// is evaluated; a missing prediction counts as wrong. Strings are compared
/// after canonicalization, falling back to the raw text when a side is not
/// valid for its field.
pub fn evaluate(predictions: &[(String, FieldType, String)], references: &[(String, FieldType, String)]) -> EvalReport {
    let mut report = EvalReport::default();
    let mut refs: HashMap<(&str, FieldType), &str> = HashMap::new();
    let mut order = Vec::new();
    for (id, field, text) in references {
        if refs.insert((id.as_str(), *field), text.as_str()).is_some() {
            report.skipped += 1;
        } else {
            order.push((id.as_str(), *field));
        }
    }
    let mut preds: HashMap<(&str, FieldType), &str> = HashMap::new();
    for (id, field, text) in predictions {
        if refs.contains_key(&(id.as_str(), *field)) {
            preds.entry((id.as_str(), *field)).or_insert(text.as_str());
        } else {
            report.skipped += 1;
        }
    }
    for key in order {
        let ok = preds.get(&key).is_some_and(|p| canonical(key.1, p) == canonical(key.1, refs[&key]));
        for score in [report.per_field.entry(key.1).or_default(), &mut report.overall] {
            score.evaluated += 1;
            score.correct += usize::from(ok);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[(&str, FieldType, &str)]) -> Vec<(String, FieldType, String)> {
        v.iter().map(|(a, f, b)| (a.to_string(), *f, b.to_string())).collect()
    }

    #[test]
    fn identical_and_disjoint() {
        let a = rows(&[("1", FieldType::Age, "3"), ("2", FieldType::Relation, "Head"), ("3", FieldType::Name, "weird!")]);
        assert_eq!(evaluate(&a, &a).accuracy(), 1.0);
        let b = rows(&[("1", FieldType::Age, "4"), ("2", FieldType::Relation, "Wife"), ("3", FieldType::Name, "x")]);
        assert_eq!(evaluate(&b, &a).accuracy(), 0.0);
        assert_eq!(evaluate(&[], &[]).accuracy(), 1.0);
    }

    #[test]
    fn three_of_four() {
        let r = rows(&[("1", FieldType::Age, "3"), ("2", FieldType::Age, "4"), ("3", FieldType::Marital, "M"), ("4", FieldType::Marital, "S")]);
        let p = rows(&[("1", FieldType::Age, "3"), ("2", FieldType::Age, "4"), ("3", FieldType::Marital, "M"), ("4", FieldType::Marital, "W")]);
        let rep = evaluate(&p, &r);
        assert_eq!(rep.accuracy(), 0.75);
        assert_eq!(rep.per_field[&FieldType::Age].accuracy(), 1.0);
        assert_eq!(rep.per_field[&FieldType::Marital].accuracy(), 0.5);
    }

    #[test]
    fn counts_reconcile() {
        let r = rows(&[("1", FieldType::Age, "3"), ("1", FieldType::Age, "3"), ("2", FieldType::Age, "5")]);
        let p = rows(&[("1", FieldType::Age, " 3 "), ("9", FieldType::Age, "1")]);
        let rep = evaluate(&p, &r);
        assert_eq!(rep.overall.evaluated, 2);
        assert_eq!(rep.overall.correct, 1);
        assert_eq!(rep.skipped, 2);
    }
}
