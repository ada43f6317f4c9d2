//! In-memory datasets and their manifests.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Provenance, Record};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub original: u64,
    pub augmented: u64,
}

impl ProvenanceCounts {
    pub fn tally<'a>(records: impl IntoIterator<Item = &'a Record>) -> Self {
        let mut c = ProvenanceCounts::default();
        for r in records {
            match r.provenance {
                Provenance::Original => c.original += 1,
                Provenance::Augmented => c.augmented += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.original + self.augmented
    }
}

/// Sidecar metadata. `counts` is always recomputed from the records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub counts: ProvenanceCounts,
    #[serde(default)]
    pub seed: Option<u64>,
    pub created_by: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(created_by: impl Into<String>) -> Self {
        Manifest { created_by: created_by.into(), ..Default::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_inputs(mut self, inputs: impl IntoIterator<Item = String>) -> Self {
        self.inputs = inputs.into_iter().collect();
        self
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }
}

/// An ordered, validated list of records with a manifest whose counts match them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    manifest: Manifest,
}

impl Dataset {
    /// Validates every record and id uniqueness, then recomputes manifest counts.
    pub fn new(records: Vec<Record>, mut manifest: Manifest) -> Result<Self> {
        check_unique_ids(&records)?;
        for r in &records {
            r.validate()?;
        }
        manifest.counts = ProvenanceCounts::tally(&records);
        Ok(Dataset { records, manifest })
    }

    pub fn empty(created_by: &str) -> Self {
        Dataset { records: Vec::new(), manifest: Manifest::new(created_by) }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    /// Applies `f` to every record and revalidates.
    pub fn map_records<F>(self, manifest: Manifest, f: F) -> Result<Self>
    where
        F: FnMut(Record) -> Result<Record>,
    {
        let records = self.records.into_iter().map(f).collect::<Result<Vec<_>>>()?;
        Dataset::new(records, manifest)
    }
}

/// Fails on the first repeated id, reporting both 0-based positions.
pub fn check_unique_ids(records: &[Record]) -> Result<()> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(&first) = seen.get(r.id.as_str()) {
            return Err(Error::DuplicateId { id: r.id.clone(), first, second: i });
        }
        seen.insert(&r.id, i);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BiasSpec;

    fn aug(id: &str) -> Record {
        let mut r = Record::original(id, "p", "biography");
        r.provenance = Provenance::Augmented;
        r.bias = Some(BiasSpec::gender(0).unwrap());
        r
    }

    #[test]
    fn counts_are_recomputed() {
        let mut m = Manifest::new("test");
        m.counts = ProvenanceCounts { original: 99, augmented: 99 };
        let d = Dataset::new(
            alloc::vec![Record::original("a", "p", "t"), aug("b"), aug("c")],
            m,
        )
        .unwrap();
        assert_eq!(d.manifest().counts, ProvenanceCounts { original: 1, augmented: 2 });
    }

    #[test]
    fn duplicate_ids_rejected() {
        let recs = alloc::vec![
            Record::original("r0", "p", "t"),
            Record::original("r1", "p", "t"),
            Record::original("r2", "p", "t"),
            Record::original("r1", "p", "t"),
        ];
        assert_eq!(
            Dataset::new(recs, Manifest::new("t")),
            Err(Error::DuplicateId { id: "r1".into(), first: 1, second: 3 })
        );
    }

    #[test]
    fn provenance_bias_coupling() {
        let mut r = aug("x");
        r.bias = None;
        assert!(matches!(Dataset::new(alloc::vec![r], Manifest::new("t")), Err(Error::InvalidRecord { .. })));
    }
}
