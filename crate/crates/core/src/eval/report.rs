use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Culture, Gender, Profession, Profile};

/// Which profile fields a report slices by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slicing {
    #[serde(default)]
    pub culture: bool,
    #[serde(default)]
    pub gender: bool,
    #[serde(default)]
    pub profession: bool,
}

impl Slicing {
    pub const NONE: Slicing = Slicing { culture: false, gender: false, profession: false };
    pub const GENDER: Slicing = Slicing { culture: false, gender: true, profession: false };
    pub const CULTURE: Slicing = Slicing { culture: true, gender: false, profession: false };
    pub const CULTURE_GENDER: Slicing = Slicing { culture: true, gender: true, profession: false };
    pub const PROFESSION_GENDER: Slicing = Slicing { culture: false, gender: true, profession: true };

    /// The key of `p` under this slicing, or the first missing field.
    pub fn key(self, p: &Profile) -> core::result::Result<GroupKey, &'static str> {
        let mut k = GroupKey::default();
        if self.culture {
            k.culture = Some(p.culture.ok_or("culture")?);
        }
        if self.gender {
            k.gender = Some(p.gender.ok_or("gender")?);
        }
        if self.profession {
            k.profession = Some(p.profession.ok_or("profession")?);
        }
        Ok(k)
    }

    pub(crate) fn key_at(self, index: usize, p: &Profile) -> Result<GroupKey> {
        self.key(p).map_err(|field| Error::MissingGroupLabel { index, field })
    }

    /// Every key this slicing can produce, in sorted order.
    pub fn all_keys(self) -> Vec<GroupKey> {
        let cultures: Vec<Option<Culture>> =
            if self.culture { Culture::ALL.iter().copied().map(Some).collect() } else { alloc::vec![None] };
        let genders: Vec<Option<Gender>> =
            if self.gender { Gender::ALL.iter().copied().map(Some).collect() } else { alloc::vec![None] };
        let profs: Vec<Option<Profession>> =
            if self.profession { Profession::ALL.iter().copied().map(Some).collect() } else { alloc::vec![None] };
        let mut out = Vec::new();
        for &culture in &cultures {
            for &gender in &genders {
                for &profession in &profs {
                    out.push(GroupKey { culture, gender, profession });
                }
            }
        }
        out.sort();
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub culture: Option<Culture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profession: Option<Profession>,
}

impl GroupKey {
    pub const ALL: GroupKey = GroupKey { culture: None, gender: None, profession: None };

    pub fn slicing(&self) -> Slicing {
        Slicing {
            culture: self.culture.is_some(),
            gender: self.gender.is_some(),
            profession: self.profession.is_some(),
        }
    }

    /// `culture=Arabic;gender=woman`, or `all` for the empty key.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(c) = self.culture {
            parts.push(format!("culture={c}"));
        }
        if let Some(g) = self.gender {
            parts.push(format!("gender={g}"));
        }
        if let Some(p) = self.profession {
            parts.push(format!("profession={p}"));
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join(";")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub group: GroupKey,
    pub metric: String,
    pub value: f64,
    pub n: u64,
}

/// `value = minuend − subtrahend` for one metric within a context group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub context: GroupKey,
    pub metric: String,
    pub minuend: GroupKey,
    pub subtrahend: GroupKey,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    /// Finest-grained rows; every row uses the same slicing.
    pub rows: Vec<Row>,
    /// Marginal rows over a coarser slicing (often the single `all` group).
    pub totals: Vec<Row>,
    pub gaps: Vec<Gap>,
    pub warnings: Vec<String>,
    /// Inputs that could not be scored.
    pub unparsed: u64,
    pub meta: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn new(task: impl Into<String>) -> Self {
        EvalReport { task: task.into(), ..Default::default() }
    }

    pub fn row(&self, group: &GroupKey, metric: &str) -> Option<&Row> {
        self.rows.iter().chain(&self.totals).find(|r| &r.group == group && r.metric == metric)
    }

    pub fn value(&self, group: &GroupKey, metric: &str) -> Option<f64> {
        self.row(group, metric).map(|r| r.value)
    }

    pub fn gap(&self, context: &GroupKey, metric: &str) -> Option<f64> {
        self.gaps.iter().find(|g| &g.context == context && g.metric == metric).map(|g| g.value)
    }

    /// Finite values, positive `n`, and uniform slicing within `rows` and within `totals`.
    pub fn check(&self) -> Result<()> {
        for r in self.rows.iter().chain(&self.totals) {
            if !r.value.is_finite() {
                return Err(Error::NonFinite("report value"));
            }
            if r.n == 0 {
                return Err(Error::InvalidValue { field: "n", value: format!("0 in {}", r.metric) });
            }
        }
        if self.gaps.iter().any(|g| !g.value.is_finite()) {
            return Err(Error::NonFinite("report gap"));
        }
        for rows in [&self.rows, &self.totals] {
            if let Some(first) = rows.first() {
                let s = first.group.slicing();
                if let Some(bad) = rows.iter().find(|r| r.group.slicing() != s) {
                    return Err(Error::InvalidValue { field: "group", value: bad.group.label() });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn push(rows: &mut Vec<Row>, group: GroupKey, metric: &str, value: f64, n: u64) {
    rows.push(Row { group, metric: metric.to_string(), value, n });
}
