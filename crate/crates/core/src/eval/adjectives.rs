use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::report::{push, EvalReport, GroupKey, Slicing};
use crate::error::{Error, Result};
use crate::text::letter_words;
use crate::types::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Agency,
    Beliefs,
    Communion,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Agency, Dimension::Beliefs, Dimension::Communion];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Agency => "agency",
            Dimension::Beliefs => "beliefs",
            Dimension::Communion => "communion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub dimension: Dimension,
    pub polarity: Polarity,
}

/// Adjective → (dimension, polarity). Keys are lowercase letter-only words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, LexiconEntry>", into = "BTreeMap<String, LexiconEntry>")]
pub struct AbcLexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

impl AbcLexicon {
    pub fn new(entries: BTreeMap<String, LexiconEntry>) -> Result<Self> {
        if let Some(bad) =
            entries.keys().find(|k| k.is_empty() || !k.chars().all(|c| c.is_alphabetic() && !c.is_uppercase()))
        {
            return Err(Error::InvalidLexiconEntry(bad.clone()));
        }
        Ok(AbcLexicon { entries })
    }

    /// Builds from a list, rejecting repeated adjectives.
    pub fn from_list<I, S>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Dimension, Polarity)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (w, dimension, polarity) in items {
            let w = w.into();
            if map.insert(w.clone(), LexiconEntry { dimension, polarity }).is_some() {
                return Err(Error::InvalidLexiconEntry(w));
            }
        }
        Self::new(map)
    }

    pub fn get(&self, word: &str) -> Option<LexiconEntry> {
        self.entries.get(word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, LexiconEntry)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TryFrom<BTreeMap<String, LexiconEntry>> for AbcLexicon {
    type Error = Error;
    fn try_from(m: BTreeMap<String, LexiconEntry>) -> Result<Self> {
        Self::new(m)
    }
}

impl From<AbcLexicon> for BTreeMap<String, LexiconEntry> {
    fn from(l: AbcLexicon) -> Self {
        l.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub text: String,
    pub groups: Profile,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Hits {
    pub positive: u64,
    pub negative: u64,
}

/// Lexicon hits per dimension in one text.
pub fn count_hits(text: &str, lex: &AbcLexicon) -> BTreeMap<Dimension, Hits> {
    let mut out: BTreeMap<Dimension, Hits> = BTreeMap::new();
    for w in letter_words(text) {
        if let Some(e) = lex.get(&w) {
            let h = out.entry(e.dimension).or_default();
            match e.polarity {
                Polarity::Positive => h.positive += 1,
                Polarity::Negative => h.negative += 1,
            }
        }
    }
    out
}

/// Negative-adjective rates per group.
///
/// For each dimension, `negative_rate_<dim>` is negative hits over all hits
/// in that dimension; `negative_share` pools the three dimensions. `n` is
/// the hit count behind the rate. Groups or dimensions without hits get no
/// row and a warning.
pub fn adjective_rates(stories: &[Story], lex: &AbcLexicon, slicing: Slicing) -> Result<EvalReport> {
    if lex.is_empty() {
        return Err(Error::InvalidLexiconEntry(String::from("<empty lexicon>")));
    }
    let mut by_group: BTreeMap<GroupKey, BTreeMap<Dimension, Hits>> = BTreeMap::new();
    let mut all: BTreeMap<Dimension, Hits> = BTreeMap::new();
    for (i, s) in stories.iter().enumerate() {
        let key = slicing.key_at(i, &s.groups)?;
        let g = by_group.entry(key).or_default();
        for (d, h) in count_hits(&s.text, lex) {
            for acc in [g.entry(d).or_default(), all.entry(d).or_default()] {
                acc.positive += h.positive;
                acc.negative += h.negative;
            }
        }
    }
    let mut report = EvalReport::new("story");
    for (key, dims) in &by_group {
        emit(&mut report, *key, dims, false);
    }
    emit(&mut report, GroupKey::ALL, &all, true);
    Ok(report)
}

fn emit(report: &mut EvalReport, key: GroupKey, dims: &BTreeMap<Dimension, Hits>, total: bool) {
    let mut rows = Vec::new();
    let mut pooled = Hits::default();
    for d in Dimension::ALL {
        let h = dims.get(&d).copied().unwrap_or_default();
        pooled.positive += h.positive;
        pooled.negative += h.negative;
        let n = h.positive + h.negative;
        if n == 0 {
            report.warnings.push(format!("{}: no {} adjectives found", key.label(), d.as_str()));
            continue;
        }
        push(&mut rows, key, &format!("negative_rate_{}", d.as_str()), h.negative as f64 / n as f64, n);
    }
    let n = pooled.positive + pooled.negative;
    if n == 0 {
        report.warnings.push(format!("{}: no lexicon adjectives found", key.label()));
    } else {
        push(&mut rows, key, "negative_share", pooled.negative as f64 / n as f64, n);
    }
    if total { &mut report.totals } else { &mut report.rows }.extend(rows);
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lex() -> AbcLexicon {
        AbcLexicon::from_list([
            ("warm", Dimension::Communion, Polarity::Positive),
            ("honest", Dimension::Communion, Polarity::Positive),
            ("cold", Dimension::Communion, Polarity::Negative),
            ("lazy", Dimension::Agency, Polarity::Negative),
        ])
        .unwrap()
    }

    #[test]
    fn communion_rate() {
        let s = vec![Story { text: "a warm, honest, cold person".into(), groups: Profile::default() }];
        let r = adjective_rates(&s, &lex(), Slicing::NONE).unwrap();
        assert_eq!(r.value(&GroupKey::ALL, "negative_rate_communion"), Some(1.0 / 3.0));
        assert!(r.value(&GroupKey::ALL, "negative_rate_agency").is_none());
    }

    #[test]
    fn zero_hits_and_all_negative() {
        let s = vec![Story { text: "nothing here".into(), groups: Profile::default() }];
        let r = adjective_rates(&s, &lex(), Slicing::NONE).unwrap();
        assert!(r.rows.is_empty() && r.totals.is_empty());
        assert!(!r.warnings.is_empty());
        let s = vec![Story { text: "Lazy and COLD".into(), groups: Profile::default() }];
        let r = adjective_rates(&s, &lex(), Slicing::NONE).unwrap();
        assert_eq!(r.value(&GroupKey::ALL, "negative_share"), Some(1.0));
    }

    #[test]
    fn lexicon_validation() {
        assert!(AbcLexicon::from_list([("Warm", Dimension::Agency, Polarity::Positive)]).is_err());
        assert!(AbcLexicon::from_list([
            ("warm", Dimension::Agency, Polarity::Positive),
            ("warm", Dimension::Communion, Polarity::Positive)
        ])
        .is_err());
        let json = serde_json::to_string(&lex()).unwrap();
        assert_eq!(serde_json::from_str::<AbcLexicon>(&json).unwrap(), lex());
    }
}
