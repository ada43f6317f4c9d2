//! Mitigation strategies: token guard, sensitive-term masking, and the
//! distribution-alignment loss.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use serde::{Deserialize, Serialize};

use crate::embedding::{check_same_dim, EmbeddingSet};
use crate::error::{Error, Result};
use crate::names;
use crate::text::{match_case, tokenize};
use crate::types::{Axis, Provenance, Record};

pub const GUARD_TEXT: &str = "The following text may contain biases.";
pub const MASK_TOKEN: &str = "[MASK]";

/// Prefixes an augmented record's prompt with the bias warning. Idempotent.
pub fn apply_token_guard(record: Record) -> Result<Record> {
    if record.provenance != Provenance::Augmented {
        return Err(Error::GuardOnOriginal(record.id));
    }
    if record.guarded {
        return Ok(record);
    }
    let mut r = record;
    r.prompt = format!("{GUARD_TEXT} {}", r.prompt);
    r.guarded = true;
    Ok(r)
}

/// Terms replaced by masking, all stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskLexicon {
    pub culture_terms: BTreeSet<String>,
    pub name_terms: BTreeSet<String>,
    /// Gendered word → neutral replacement. The key "her" is special-cased:
    /// see [`apply_mask`].
    pub pronoun_map: BTreeMap<String, String>,
}

const CULTURE_TERMS: [&str; 8] =
    ["arabic", "arab", "arabs", "chinese", "portuguese", "spanish", "spaniard", "spaniards"];

const PRONOUNS: [(&str, &str); 16] = [
    ("he", "they"),
    ("she", "they"),
    ("him", "them"),
    ("her", "their"),
    ("his", "their"),
    ("hers", "theirs"),
    ("himself", "themselves"),
    ("herself", "themselves"),
    ("man", "person"),
    ("woman", "person"),
    ("men", "people"),
    ("women", "people"),
    ("male", MASK_TOKEN),
    ("female", MASK_TOKEN),
    ("males", MASK_TOKEN),
    ("females", MASK_TOKEN),
];

/// Words after which "her" is an object pronoun rather than a determiner.
const NON_NOUN_FOLLOWERS: [&str; 30] = [
    "the", "a", "an", "and", "or", "but", "to", "in", "on", "at", "for", "with", "from", "by", "about",
    "as", "that", "this", "these", "those", "again", "too", "so", "very", "when", "while", "because",
    "if", "into", "up",
];

impl MaskLexicon {
    /// Culture labels with common inflections, every pooled first name, and
    /// the gendered pronoun and noun map.
    pub fn builtin() -> Self {
        MaskLexicon {
            culture_terms: CULTURE_TERMS.iter().map(|s| s.to_string()).collect(),
            name_terms: names::all_names().map(|n| n.to_lowercase()).collect(),
            pronoun_map: PRONOUNS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Default for MaskLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Masks one text. Culture axis: culture terms become `[MASK]`. Gender
/// axis: pooled names become `[MASK]` and gendered words are neutralized
/// with the capitalization of the original preserved.
///
/// "her" becomes "their" when directly followed (across whitespace only)
/// by a word outside a short list of function words, and "them" otherwise.
pub fn mask_text(text: &str, lex: &MaskLexicon, axis: Axis) -> String {
    let tokens = tokenize(text);
    let mut out = String::with_capacity(text.len());
    for (i, tok) in tokens.iter().enumerate() {
        if !tok.is_word {
            out.push_str(tok.text);
            continue;
        }
        let lower = tok.text.to_lowercase();
        let replacement: Option<String> = match axis {
            Axis::Culture => lex.culture_terms.contains(&lower).then(|| MASK_TOKEN.to_string()),
            Axis::Gender => {
                if lex.name_terms.contains(&lower) {
                    Some(MASK_TOKEN.to_string())
                } else if lower == "her" && lex.pronoun_map.contains_key("her") {
                    let possessive = next_word(&tokens, i)
                        .is_some_and(|w| !NON_NOUN_FOLLOWERS.contains(&w.to_lowercase().as_str()));
                    Some(if possessive { "their" } else { "them" }.to_string())
                } else {
                    lex.pronoun_map.get(&lower).cloned()
                }
            }
        };
        match replacement {
            Some(r) if r == MASK_TOKEN => out.push_str(MASK_TOKEN),
            Some(r) => out.push_str(&match_case(tok.text, &r)),
            None => out.push_str(tok.text),
        }
    }
    out
}

fn next_word<'a>(tokens: &[crate::text::Token<'a>], i: usize) -> Option<&'a str> {
    let gap = tokens.get(i + 1)?;
    if gap.is_word || !gap.text.chars().all(char::is_whitespace) {
        return None;
    }
    tokens.get(i + 2).filter(|t| t.is_word).map(|t| t.text)
}

/// Masks prompt and completion; labels, provenance and round are untouched.
pub fn apply_mask(record: Record, lex: &MaskLexicon, axis: Axis) -> Record {
    let mut r = record;
    r.prompt = mask_text(&r.prompt, lex, axis);
    r.completion = r.completion.map(|c| mask_text(&c, lex, axis));
    r
}

/// Squared Euclidean distance between the mean embeddings of the original
/// and augmented sets.
pub fn compute_alignment_loss(original: &EmbeddingSet, augmented: &EmbeddingSet) -> Result<f64> {
    check_same_dim(original, augmented)?;
    let mo = original.mean();
    let ma = augmented.mean();
    Ok(mo.iter().zip(&ma).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// An embeddings endpoint (a proxy for the fine-tuned model's hidden states).
    Endpoint,
    /// Final-hidden-layer vectors extracted by the training bridge.
    Bridge,
}

/// How records are assigned to the two distributions of the alignment term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionRule {
    /// `original` records form the reference distribution, `augmented` the other.
    Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    pub lambda: f64,
    pub embedding_source: EmbeddingSource,
    pub partition: PartitionRule,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig { lambda: 0.1, embedding_source: EmbeddingSource::Bridge, partition: PartitionRule::Provenance }
    }
}

pub const LOSS_DEFINITION: &str = "squared-L2-of-means";

/// Alignment settings as handed to the training bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentSpec {
    pub lambda: f64,
    pub loss: String,
    pub partition: PartitionRule,
    pub partition_counts: BTreeMap<String, u64>,
    pub embedding_source: EmbeddingSource,
    /// Where the means are estimated: per optimizer step over that step's records.
    pub mean_granularity: String,
    /// Text fed to the embedder: prompt and completion concatenated.
    pub embedded_text: String,
    pub dataset: String,
}

impl AlignmentSpec {
    /// Validates the weight and records the per-class sizes of the partition.
    pub fn new(cfg: &AlignmentConfig, dataset_path: &str, records: &[Record]) -> Result<Self> {
        if !cfg.lambda.is_finite() || cfg.lambda < 0.0 {
            return Err(Error::InvalidValue { field: "lambda", value: format!("{}", cfg.lambda) });
        }
        let counts = crate::dataset::ProvenanceCounts::tally(records);
        let partition_counts: BTreeMap<String, u64> =
            [("original".to_string(), counts.original), ("augmented".to_string(), counts.augmented)]
                .into_iter()
                .collect();
        Ok(AlignmentSpec {
            lambda: cfg.lambda,
            loss: LOSS_DEFINITION.to_string(),
            partition: cfg.partition,
            partition_counts,
            embedding_source: cfg.embedding_source,
            mean_granularity: "per-step".to_string(),
            embedded_text: "prompt+completion".to_string(),
            dataset: dataset_path.to_string(),
        })
    }

    /// True when the alignment term contributes: positive weight and both classes present.
    pub fn is_active(&self) -> bool {
        self.lambda > 0.0 && self.partition_counts.values().all(|&c| c > 0)
    }
}

/// The text embedded for one record under the alignment loss.
pub fn embedded_text(r: &Record) -> String {
    match &r.completion {
        Some(c) => format!("{}\n{}", r.prompt, c),
        None => r.prompt.clone(),
    }
}
