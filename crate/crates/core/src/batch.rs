//! Generation batches: sampled profiles rendered into augmented records.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::catalog::TemplateCatalog;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::names;
use crate::render::{render_culture_prompt, render_gender_prompt, RenderOptions};
use crate::sample::{derive_seed, shuffle, SplitMix64};
use crate::types::{Age, Axis, BiasSpec, BiasType, Culture, Gender, Profession, Profile, Provenance, Record};

pub const GENDER_TASK_TAG: &str = "biography";
pub const CULTURE_TASK_TAG: &str = "value_qa";

#[derive(Debug, Clone, Copy, Default)]
pub struct BatchOptions {
    /// Fixes the culture of person A on the culture axis (the culture whose
    /// model the batch is meant to fine-tune).
    pub focus_culture: Option<Culture>,
    pub render: RenderOptions,
}

/// An original value question split into question text and answer options.
///
/// The source prompt is read as `<question>\n\n<options>`, split at the
/// last blank line. A prompt without a blank line is all question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueQuestion<'a> {
    pub question: &'a str,
    pub options: &'a str,
}

impl<'a> ValueQuestion<'a> {
    pub fn parse(prompt: &'a str) -> Self {
        match prompt.rsplit_once("\n\n") {
            Some((q, o)) => ValueQuestion { question: q.trim_end(), options: o.trim() },
            None => ValueQuestion { question: prompt.trim(), options: "" },
        }
    }
}

struct Sampler {
    rng: SplitMix64,
}

impl Sampler {
    fn culture(&mut self) -> Culture {
        *self.rng.choose(Culture::ALL)
    }

    fn gender(&mut self) -> Gender {
        *self.rng.choose(Gender::ALL)
    }

    fn age(&mut self) -> Age {
        Age::new(*self.rng.choose(&Age::VALUES)).expect("sampled from the valid set")
    }

    fn profession(&mut self) -> Profession {
        *self.rng.choose(Profession::ALL)
    }

    fn named(&mut self, culture: Culture) -> Profile {
        let g = self.gender();
        let name = *self.rng.choose(names::pool(culture, g));
        Profile::default().with_culture(culture).with_gender(g).with_name(name)
    }

    fn intersectional(&mut self, culture: Culture) -> Profile {
        Profile::default().with_age(self.age()).with_gender(self.gender()).with_culture(culture)
    }

    /// Person B for a contrastive prompt; redrawn until it differs from A.
    fn contrast<F>(&mut self, a: &Profile, mut draw: F) -> Profile
    where
        F: FnMut(&mut Self) -> Profile,
    {
        loop {
            let b = draw(self);
            let same_name = a.name.is_some() && a.name == b.name;
            let differs = if a.name.is_some() { !same_name } else { strip_job(&b) != strip_job(a) };
            if differs {
                return b;
            }
        }
    }
}

fn strip_job(p: &Profile) -> Profile {
    Profile { profession: None, workplace: None, ..p.clone() }
}

fn stream_id(spec: BiasSpec) -> u64 {
    ((spec.axis() as u64) << 8) | spec.type_id() as u64
}

/// `n` augmented records for `spec`, deterministic in `(spec, n, seed, sources)`.
///
/// Gender-axis profiles are drawn from the six professions, the two
/// genders, the seven age decades, the four cultures and the name pools;
/// type 0 draws a profession only. Culture-axis records each wrap one
/// source question; sources are visited in a seeded order and reused
/// cyclically when `n` exceeds their count.
pub fn build_generation_batch(
    catalog: &TemplateCatalog,
    spec: BiasSpec,
    n: usize,
    seed: u64,
    sources: Option<&Dataset>,
    opts: BatchOptions,
) -> Result<Vec<Record>> {
    let mut s = Sampler { rng: SplitMix64::new(derive_seed(seed, stream_id(spec))) };
    let mut order: Vec<usize> = Vec::new();
    if spec.axis() == Axis::Culture {
        let src = sources.ok_or(Error::MissingSources)?;
        if n > 0 && src.is_empty() {
            return Err(Error::MissingSources);
        }
        order = (0..src.len()).collect();
        shuffle(&mut order, &mut s.rng);
    }

    let axis_tag = match spec.axis() {
        Axis::Gender => 'g',
        Axis::Culture => 'c',
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = match spec.axis() {
            Axis::Gender => gender_profiles(&mut s, spec.kind()),
            Axis::Culture => culture_profiles(&mut s, spec.kind(), opts.focus_culture),
        };
        let prompt = match spec.axis() {
            Axis::Gender => render_gender_prompt(catalog, spec, &a, b.as_ref(), opts.render)?,
            Axis::Culture => {
                let src = sources.expect("checked above");
                let q = ValueQuestion::parse(&src.records()[order[i % order.len()]].prompt);
                render_culture_prompt(catalog, spec, &a, b.as_ref(), q.question, q.options, opts.render)?
            }
        };
        out.push(Record {
            id: format!("aug-{axis_tag}{}-{seed:016x}-{i:06}", spec.type_id()),
            prompt,
            completion: None,
            provenance: Provenance::Augmented,
            bias: Some(spec),
            groups: a,
            round: 0,
            task_tag: String::from(match spec.axis() {
                Axis::Gender => GENDER_TASK_TAG,
                Axis::Culture => CULTURE_TASK_TAG,
            }),
            contrast: b,
            guarded: false,
        });
    }
    Ok(out)
}

fn gender_profiles(s: &mut Sampler, kind: BiasType) -> (Profile, Option<Profile>) {
    use BiasType::*;
    match kind {
        Unbiased => (Profile::default().with_profession(s.profession()), None),
        ContextualSingleExplicit => {
            (Profile::default().with_gender(s.gender()).with_profession(s.profession()), None)
        }
        ContextualIntersectionalExplicit => {
            let c = s.culture();
            (s.intersectional(c), None)
        }
        ContextualImplicit => {
            let c = s.culture();
            (s.named(c), None)
        }
        ContrastiveSingleExplicit => {
            let job = s.profession();
            let g = s.gender();
            let a = Profile::default().with_gender(g).with_job(job);
            (a, Some(Profile::default().with_gender(g.other())))
        }
        ContrastiveIntersectionalExplicit => {
            let job = s.profession();
            let c = s.culture();
            let a = s.intersectional(c).with_job(job);
            let b = s.contrast(&a, |s| {
                let c = s.culture();
                s.intersectional(c)
            });
            (a, Some(b))
        }
        ContrastiveImplicit => {
            let job = s.profession();
            let c = s.culture();
            let a = s.named(c).with_job(job);
            let b = s.contrast(&a, |s| {
                let c = s.culture();
                s.named(c)
            });
            (a, Some(b))
        }
    }
}

fn culture_profiles(s: &mut Sampler, kind: BiasType, focus: Option<Culture>) -> (Profile, Option<Profile>) {
    use BiasType::*;
    let c = focus.unwrap_or_else(|| s.culture());
    match kind {
        Unbiased => unreachable!("culture axis has no unbiased type"),
        ContextualSingleExplicit => (Profile::default().with_culture(c), None),
        ContextualIntersectionalExplicit => (s.intersectional(c), None),
        ContextualImplicit => (s.named(c), None),
        ContrastiveSingleExplicit => {
            let a = Profile::default().with_culture(c);
            let b = s.contrast(&a, |s| Profile::default().with_culture(s.culture()));
            (a, Some(b))
        }
        ContrastiveIntersectionalExplicit => {
            let a = s.intersectional(c);
            let b = s.contrast(&a, |s| {
                let c = s.culture();
                s.intersectional(c)
            });
            (a, Some(b))
        }
        ContrastiveImplicit => {
            let a = s.named(c);
            let b = s.contrast(&a, |s| {
                let c = s.culture();
                s.named(c)
            });
            (a, Some(b))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Manifest;

    fn cat() -> TemplateCatalog {
        TemplateCatalog::builtin()
    }

    #[test]
    fn empty_batch() {
        let b = build_generation_batch(&cat(), BiasSpec::gender(0).unwrap(), 0, 1, None, BatchOptions::default()).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn unbiased_has_no_gender_slot() {
        let b = build_generation_batch(&cat(), BiasSpec::gender(0).unwrap(), 200, 5, None, BatchOptions::default()).unwrap();
        assert!(b.iter().all(|r| r.groups.gender.is_none() && r.groups.profession.is_some()));
    }

    #[test]
    fn culture_requires_sources() {
        let spec = BiasSpec::culture(1).unwrap();
        assert_eq!(
            build_generation_batch(&cat(), spec, 3, 1, None, BatchOptions::default()),
            Err(Error::MissingSources)
        );
    }

    #[test]
    fn contrastive_people_differ() {
        let src = Dataset::new(
            alloc::vec![Record::original("q", "Agree?\n\"S.\"\n\n(A) Yes\n(B) No", "value_qa")],
            Manifest::new("t"),
        )
        .unwrap();
        for id in 4..=6 {
            let g = build_generation_batch(&cat(), BiasSpec::gender(id).unwrap(), 100, 2, None, BatchOptions::default()).unwrap();
            let c = build_generation_batch(&cat(), BiasSpec::culture(id).unwrap(), 100, 2, Some(&src), BatchOptions::default()).unwrap();
            for r in g.iter().chain(&c) {
                let b = r.contrast.as_ref().unwrap();
                assert_ne!(&strip_job(&r.groups), b, "{}", r.prompt);
            }
        }
    }

    #[test]
    fn focus_culture_fixes_person_a() {
        let src = Dataset::new(
            alloc::vec![Record::original("q", "Agree?\n\"S.\"\n\n(A) Yes\n(B) No", "value_qa")],
            Manifest::new("t"),
        )
        .unwrap();
        let opts = BatchOptions { focus_culture: Some(Culture::Arabic), ..Default::default() };
        let b = build_generation_batch(&cat(), BiasSpec::culture(4).unwrap(), 30, 1, Some(&src), opts).unwrap();
        assert!(b.iter().all(|r| r.groups.culture == Some(Culture::Arabic)));
        assert!(b.iter().all(|r| r.prompt.starts_with("Person A is influenced by Arabic culture.")), "{}", b[0].prompt);
    }

    #[test]
    fn value_question_split() {
        let q = ValueQuestion::parse("Stem?\n\"S\"\n\n(A) x\n(B) y");
        assert_eq!(q.question, "Stem?\n\"S\"");
        assert_eq!(q.options, "(A) x\n(B) y");
        assert_eq!(ValueQuestion::parse("only").options, "");
    }
}
