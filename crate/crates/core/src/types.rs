//! Canonical data model shared by every stage of the pipeline.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::names;

/// Which social attribute an experiment targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Gender,
    Culture,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Gender => "gender",
            Axis::Culture => "culture",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Axis::Gender),
            "culture" => Ok(Axis::Culture),
            _ => Err(Error::InvalidValue { field: "axis", value: s.to_string() }),
        }
    }
}

/// The seven generation regimes, numbered as in the bias taxonomy.
///
/// Types 1-6 are the cross product of {contextual, contrastive} with
/// {single explicit, intersectional explicit, implicit}; type 0 generates
/// with no group guidance at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum BiasType {
    Unbiased = 0,
    ContextualSingleExplicit = 1,
    ContextualIntersectionalExplicit = 2,
    ContextualImplicit = 3,
    ContrastiveSingleExplicit = 4,
    ContrastiveIntersectionalExplicit = 5,
    ContrastiveImplicit = 6,
}

impl BiasType {
    pub const ALL: [BiasType; 7] = [
        BiasType::Unbiased,
        BiasType::ContextualSingleExplicit,
        BiasType::ContextualIntersectionalExplicit,
        BiasType::ContextualImplicit,
        BiasType::ContrastiveSingleExplicit,
        BiasType::ContrastiveIntersectionalExplicit,
        BiasType::ContrastiveImplicit,
    ];

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn is_contrastive(self) -> bool {
        self.id() >= 4
    }

    pub fn is_intersectional(self) -> bool {
        matches!(
            self,
            BiasType::ContextualIntersectionalExplicit | BiasType::ContrastiveIntersectionalExplicit
        )
    }

    pub fn is_implicit(self) -> bool {
        matches!(self, BiasType::ContextualImplicit | BiasType::ContrastiveImplicit)
    }

    pub fn label(self) -> &'static str {
        match self {
            BiasType::Unbiased => "Unbiased",
            BiasType::ContextualSingleExplicit => "Contextual Single Explicit",
            BiasType::ContextualIntersectionalExplicit => "Contextual Intersectional Explicit",
            BiasType::ContextualImplicit => "Contextual Implicit",
            BiasType::ContrastiveSingleExplicit => "Contrastive Single Explicit",
            BiasType::ContrastiveIntersectionalExplicit => "Contrastive Intersectional Explicit",
            BiasType::ContrastiveImplicit => "Contrastive Implicit",
        }
    }
}

/// A bias axis together with a bias type. Type 0 exists only on the gender axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBiasSpec", into = "RawBiasSpec")]
pub struct BiasSpec {
    axis: Axis,
    kind: BiasType,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBiasSpec {
    axis: Axis,
    type_id: u8,
}

impl TryFrom<RawBiasSpec> for BiasSpec {
    type Error = Error;
    fn try_from(raw: RawBiasSpec) -> Result<Self> {
        BiasSpec::new(raw.axis, raw.type_id)
    }
}

impl From<BiasSpec> for RawBiasSpec {
    fn from(spec: BiasSpec) -> Self {
        RawBiasSpec { axis: spec.axis, type_id: spec.kind.id() }
    }
}

impl BiasSpec {
    pub fn new(axis: Axis, type_id: u8) -> Result<Self> {
        let kind = BiasType::from_id(type_id)
            .ok_or(Error::InvalidBiasSpec { axis: axis.as_str(), type_id })?;
        if axis == Axis::Culture && kind == BiasType::Unbiased {
            return Err(Error::InvalidBiasSpec { axis: axis.as_str(), type_id });
        }
        Ok(BiasSpec { axis, kind })
    }

    pub fn gender(type_id: u8) -> Result<Self> {
        Self::new(Axis::Gender, type_id)
    }

    pub fn culture(type_id: u8) -> Result<Self> {
        Self::new(Axis::Culture, type_id)
    }

    pub fn axis(self) -> Axis {
        self.axis
    }

    pub fn kind(self) -> BiasType {
        self.kind
    }

    pub fn type_id(self) -> u8 {
        self.kind.id()
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::InvalidValue { field: $field, value: s.to_string() })
            }
        }
    };
}

string_enum!(Culture, "culture" {
    Arabic => "Arabic",
    Chinese => "Chinese",
    Portuguese => "Portuguese",
    Spanish => "Spanish",
});

string_enum!(Gender, "gender" {
    Man => "man",
    Woman => "woman",
});

string_enum!(
    /// The six professions studied for gender bias; index order pairs with [`Workplace`].
    Profession, "profession" {
    Architect => "architect",
    Dentist => "dentist",
    Nurse => "nurse",
    Painter => "painter",
    Professor => "professor",
    SoftwareEngineer => "software engineer",
});

string_enum!(Workplace, "workplace" {
    ArchitectureFirm => "architecture firm",
    DentalClinic => "dental clinic",
    Hospital => "hospital",
    Studio => "studio",
    University => "university",
    TechCompany => "tech company",
});

impl Gender {
    pub fn other(self) -> Gender {
        match self {
            Gender::Man => Gender::Woman,
            Gender::Woman => Gender::Man,
        }
    }
}

impl Profession {
    pub fn workplace(self) -> Workplace {
        Workplace::ALL[self as usize]
    }
}

impl Workplace {
    pub fn profession(self) -> Profession {
        Profession::ALL[self as usize]
    }
}

/// Age slot; only the sampled decades 20..=80 are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Age(u8);

impl Age {
    pub const VALUES: [u8; 7] = [20, 30, 40, 50, 60, 70, 80];

    pub fn new(years: u8) -> Result<Self> {
        if Self::VALUES.contains(&years) {
            Ok(Age(years))
        } else {
            Err(Error::InvalidValue { field: "age", value: format!("{years}") })
        }
    }

    pub fn all() -> impl Iterator<Item = Age> {
        Self::VALUES.iter().map(|&v| Age(v))
    }

    pub fn years(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Age {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Age::new(v)
    }
}

impl From<Age> for u8 {
    fn from(a: Age) -> u8 {
        a.0
    }
}

/// Demographic slot values substituted into templates and used as group labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub culture: Option<Culture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<Age>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profession: Option<Profession>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workplace: Option<Workplace>,
}

impl Profile {
    pub fn with_culture(mut self, c: Culture) -> Self {
        self.culture = Some(c);
        self
    }

    pub fn with_gender(mut self, g: Gender) -> Self {
        self.gender = Some(g);
        self
    }

    pub fn with_age(mut self, a: Age) -> Self {
        self.age = Some(a);
        self
    }

    pub fn with_name(mut self, n: impl Into<String>) -> Self {
        self.name = Some(n.into());
        self
    }

    /// Sets the profession and its paired workplace.
    pub fn with_job(mut self, p: Profession) -> Self {
        self.profession = Some(p);
        self.workplace = Some(p.workplace());
        self
    }

    pub fn with_profession(mut self, p: Profession) -> Self {
        self.profession = Some(p);
        self
    }

    pub fn is_empty(&self) -> bool {
        *self == Profile::default()
    }

    /// Checks profession/workplace pairing and that names come from the built-in pools.
    pub fn validate(&self) -> core::result::Result<(), String> {
        if let (Some(p), Some(w)) = (self.profession, self.workplace) {
            if p.workplace() != w {
                return Err(format!("workplace {w} does not pair with profession {p}"));
            }
        }
        if let Some(name) = &self.name {
            let ok = match (self.culture, self.gender) {
                (Some(c), Some(g)) => names::pool(c, g).contains(&name.as_str()),
                _ => names::origins(name).next().is_some(),
            };
            if !ok {
                return Err(format!("name {name:?} is not in the matching name pool"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Augmented,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Augmented => "augmented",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One training or evaluation example.
///
/// `contrast` carries the second person of a contrastive prompt and
/// `guarded` marks a record whose prompt already carries the token guard;
/// both are omitted from the serialized form when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSpec>,
    #[serde(default)]
    pub groups: Profile,
    #[serde(default)]
    pub round: u32,
    pub task_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<Profile>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub guarded: bool,
}

impl Record {
    pub fn original(id: impl Into<String>, prompt: impl Into<String>, task_tag: impl Into<String>) -> Self {
        Record {
            id: id.into(),
            prompt: prompt.into(),
            completion: None,
            provenance: Provenance::Original,
            bias: None,
            groups: Profile::default(),
            round: 0,
            task_tag: task_tag.into(),
            contrast: None,
            guarded: false,
        }
    }

    pub fn with_completion(mut self, c: impl Into<String>) -> Self {
        self.completion = Some(c.into());
        self
    }

    pub fn with_groups(mut self, g: Profile) -> Self {
        self.groups = g;
        self
    }

    /// Checks the provenance/bias coupling and the profile invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidRecord { id: self.id.clone(), reason };
        match (self.provenance, self.bias.is_some()) {
            (Provenance::Augmented, false) => return Err(bad("augmented record without bias spec".into())),
            (Provenance::Original, true) => return Err(bad("original record carries a bias spec".into())),
            _ => {}
        }
        if self.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        self.groups.validate().map_err(bad)?;
        if let Some(c) = &self.contrast {
            c.validate().map_err(bad)?;
        }
        Ok(())
    }
}
