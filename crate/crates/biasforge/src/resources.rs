//! Bundled data files and their `--templates` / `--lexicon` overrides.

use std::path::Path;

use biasforge_core::catalog::{TaskPrompt, TemplateCatalog, CATALOG_VERSION};
use biasforge_core::eval::AbcLexicon;
use biasforge_core::mitigation::MaskLexicon;
use biasforge_core::BiasSpec;

use crate::error::{Error, Result};
use crate::io::read_json;

pub const TEMPLATES_V1: &str = include_str!("../data/templates-v1.json");
pub const ABC_LEXICON: &str = include_str!("../data/abc-lexicon.json");
pub const MASK_LEXICON: &str = include_str!("../data/mask-lexicon.json");

/// Rejects catalogs of another version or with a missing template.
pub fn check_catalog(c: &TemplateCatalog) -> Result<()> {
    if c.version != CATALOG_VERSION {
        return Err(Error::Config(format!("template catalog version {:?}, expected {CATALOG_VERSION:?}", c.version)));
    }
    for id in 0..=6 {
        c.template(BiasSpec::gender(id)?)?;
    }
    for id in 1..=6 {
        c.template(BiasSpec::culture(id)?)?;
    }
    for t in [TaskPrompt::Hiring, TaskPrompt::Salary, TaskPrompt::Story] {
        c.task(t)?;
    }
    if c.contrastive_options.is_empty() {
        return Err(Error::Config("template catalog has no contrastive options".into()));
    }
    Ok(())
}

pub fn load_catalog(path: Option<&Path>) -> Result<TemplateCatalog> {
    let c: TemplateCatalog = match path {
        Some(p) => read_json(p)?,
        None => serde_json::from_str(TEMPLATES_V1).map_err(|e| Error::json("templates-v1.json", e))?,
    };
    check_catalog(&c)?;
    Ok(c)
}

pub fn load_abc_lexicon(path: Option<&Path>) -> Result<AbcLexicon> {
    let lex: AbcLexicon = match path {
        Some(p) => read_json(p)?,
        None => serde_json::from_str(ABC_LEXICON).map_err(|e| Error::json("abc-lexicon.json", e))?,
    };
    if lex.is_empty() {
        return Err(Error::Config("adjective lexicon is empty".into()));
    }
    Ok(lex)
}

pub fn load_mask_lexicon(path: Option<&Path>) -> Result<MaskLexicon> {
    match path {
        Some(p) => read_json(p),
        None => serde_json::from_str(MASK_LEXICON).map_err(|e| Error::json("mask-lexicon.json", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use biasforge_core::eval::{Dimension, Polarity};

    #[test]
    fn bundled_catalog_is_builtin() {
        assert_eq!(load_catalog(None).unwrap(), TemplateCatalog::builtin());
    }

    #[test]
    fn bundled_mask_lexicon_is_builtin() {
        assert_eq!(load_mask_lexicon(None).unwrap(), MaskLexicon::builtin());
    }

    #[test]
    fn bundled_lexicon_covers_every_cell() {
        let lex = load_abc_lexicon(None).unwrap();
        for d in Dimension::ALL {
            for p in [Polarity::Positive, Polarity::Negative] {
                let n = lex.iter().filter(|(_, e)| e.dimension == d && e.polarity == p).count();
                assert!(n >= 10, "{d:?} {p:?}: {n}");
            }
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut c = TemplateCatalog::builtin();
        c.version = "0".into();
        assert!(check_catalog(&c).is_err());
        let mut c = TemplateCatalog::builtin();
        c.gender_templates.remove(&3);
        assert!(check_catalog(&c).is_err());
    }
}
