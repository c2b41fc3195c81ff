//! Field types, their output alphabets and ground-truth normalization.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five census columns that are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FieldType {
    Name,
    Relation,
    Age,
    Marital,
    Birthplace,
}

impl FieldType {
    pub const ALL: [FieldType; 5] = [
        FieldType::Name,
        FieldType::Relation,
        FieldType::Age,
        FieldType::Marital,
        FieldType::Birthplace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldType::Name => "NAME",
            FieldType::Relation => "RELATION",
            FieldType::Age => "AGE",
            FieldType::Marital => "MARITAL",
            FieldType::Birthplace => "BIRTHPLACE",
        }
    }

    /// Single-letter network type label (N, R, A, M, B).
    pub fn network_letter(self) -> char {
        match self {
            FieldType::Name => 'N',
            FieldType::Relation => 'R',
            FieldType::Age => 'A',
            FieldType::Marital => 'M',
            FieldType::Birthplace => 'B',
        }
    }

    /// Normalized raster height fed to networks of this type.
    pub fn input_height(self) -> usize {
        match self {
            FieldType::Birthplace => 96,
            _ => 128,
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Ok(match up.as_str() {
            "NAME" | "N" => FieldType::Name,
            "RELATION" | "R" => FieldType::Relation,
            "AGE" | "A" => FieldType::Age,
            "MARITAL" | "M" => FieldType::Marital,
            "BIRTHPLACE" | "PLACE OF BIRTH" | "B" => FieldType::Birthplace,
            _ => return Err(Error::InvalidParameter(alloc::format!("unknown field type {s:?}"))),
        })
    }
}

/// Ordered symbol set plus the artificial garbage symbol, which always takes
/// the last output index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidParameter("alphabet has no symbols".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidParameter("empty alphabet symbol".into()));
            }
            if symbols[..i].contains(s) {
                return Err(Error::InvalidParameter(alloc::format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// The shipped alphabet of a field type.
    pub fn for_field(field: FieldType) -> Self {
        let letters = || ('A'..='Z').chain('a'..='z').map(|c| c.to_string());
        let symbols: Vec<String> = match field {
            FieldType::Name => [" ", "'", "_"].iter().map(|s| s.to_string()).chain(letters()).collect(),
            FieldType::Relation => [" ", "-", "_"].iter().map(|s| s.to_string()).chain(letters()).collect(),
            FieldType::Age => core::iter::once(" ".to_string())
                .chain(('0'..='9').map(|c| c.to_string()))
                .chain((0..=12).map(|n| alloc::format!("{n}/12")))
                .collect(),
            FieldType::Marital => ["S", "M", "W", "D", "C", "V"].iter().map(|s| s.to_string()).collect(),
            FieldType::Birthplace => [" ", "-"].iter().map(|s| s.to_string()).chain(letters()).collect(),
        };
        Alphabet { symbols }
    }

    /// Task symbols, garbage excluded.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Output size including the garbage symbol.
    pub fn len(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn garbage_index(&self) -> usize {
        self.symbols.len()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Tokenizes `text` by greedy longest match against the symbol set.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let best = self
                .symbols
                .iter()
                .enumerate()
                .filter(|(_, s)| rest.starts_with(s.as_str()))
                .max_by_key(|(i, s)| (s.len(), core::cmp::Reverse(*i)));
            match best {
                Some((i, s)) => {
                    out.push(i);
                    rest = &rest[s.len()..];
                }
                None => {
                    let ch = rest.chars().next().unwrap_or('\u{fffd}');
                    return Err(Error::UnknownSymbol(ch.to_string()));
                }
            }
        }
        Ok(out)
    }

    /// Concatenates the symbols; the garbage index renders as nothing.
    pub fn decode(&self, indices: &[usize]) -> String {
        indices
            .iter()
            .filter_map(|&i| self.symbols.get(i))
            .map(String::as_str)
            .collect()
    }
}

/// Raw ground-truth token marking a repeated family name.
pub const DITTO_SOURCE: &str = "=";
/// Canonical ditto token used in references and network output.
pub const DITTO: &str = "_";

/// Canonicalizes a raw transcript for `field` and validates it against the
/// field alphabet.
///
/// Whitespace runs collapse to one space and the ends are trimmed. For NAME a
/// standalone `=` word becomes `_`. AGE fractions such as `4/12` are already
/// single alphabet tokens and survive tokenization unchanged.
pub fn gt_normalize(field: FieldType, raw: &str) -> Result<String> {
    let mut words: Vec<&str> = raw.split_whitespace().collect();
    if field == FieldType::Name {
        for w in words.iter_mut() {
            if *w == DITTO_SOURCE {
                *w = DITTO;
            }
        }
    }
    let canonical = words.join(" ");
    let alphabet = Alphabet::for_field(field);
    match alphabet.encode(&canonical) {
        Ok(_) => Ok(canonical),
        Err(Error::UnknownSymbol(s)) => Err(Error::InvalidCharacter {
            ch: s.chars().next().unwrap_or('\u{fffd}'),
            field,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_alphabet_sizes() {
        let sizes: Vec<usize> = FieldType::ALL.iter().map(|&f| Alphabet::for_field(f).len()).collect();
        assert_eq!(sizes, [56, 56, 25, 7, 55]);
    }

    #[test]
    fn age_alphabet_has_thirteen_fractions() {
        let a = Alphabet::for_field(FieldType::Age);
        let fractions = a.symbols().iter().filter(|s| s.ends_with("/12")).count();
        assert_eq!(fractions, 13);
        assert!(a.index_of("0/12").is_some());
        assert!(a.index_of("12/12").is_some());
    }

    #[test]
    fn marital_symbols_are_exact() {
        let a = Alphabet::for_field(FieldType::Marital);
        assert_eq!(a.symbols(), ["S", "M", "W", "D", "C", "V"]);
        assert_eq!(a.garbage_index(), 6);
    }

    #[test]
    fn encode_prefers_fraction_tokens() {
        let a = Alphabet::for_field(FieldType::Age);
        let toks = a.encode("4/12").unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(a.decode(&toks), "4/12");
        let toks = a.encode("2 11/12").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(a.encode("12").unwrap().len(), 2);
    }

    #[test]
    fn gt_normalize_examples() {
        assert_eq!(gt_normalize(FieldType::Marital, "M").unwrap(), "M");
        assert_eq!(gt_normalize(FieldType::Age, "4/12").unwrap(), "4/12");
        assert_eq!(
            gt_normalize(FieldType::Relation, "Head!"),
            Err(Error::InvalidCharacter { ch: '!', field: FieldType::Relation })
        );
        assert_eq!(gt_normalize(FieldType::Name, "  =   John ").unwrap(), "_ John");
        assert_eq!(gt_normalize(FieldType::Name, "O'Brien Mary").unwrap(), "O'Brien Mary");
        assert!(gt_normalize(FieldType::Birthplace, "New_York").is_err());
    }

    #[test]
    fn gt_normalize_is_idempotent() {
        for (f, raw) in [
            (FieldType::Name, "= Anna  Maria"),
            (FieldType::Age, " 3  5/12 "),
            (FieldType::Birthplace, "New  York"),
            (FieldType::Relation, "Son-in-law"),
        ] {
            let once = gt_normalize(f, raw).unwrap();
            assert_eq!(gt_normalize(f, &once).unwrap(), once);
        }
    }

    #[test]
    fn field_type_parsing() {
        assert_eq!("birthplace".parse::<FieldType>().unwrap(), FieldType::Birthplace);
        assert_eq!("N".parse::<FieldType>().unwrap(), FieldType::Name);
        assert!("HEIGHT".parse::<FieldType>().is_err());
    }
}
