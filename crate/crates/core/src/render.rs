//! Template rendering for generation prompts and downstream task prompts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::catalog::{TaskPrompt, TemplateCatalog};
use crate::error::{Error, Result};
use crate::types::{Axis, BiasSpec, BiasType, Gender, Profession, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    /// Rewrite "a" to "an" before vowel sounds ("an architect", "an 80-year-old").
    /// Disable for byte-faithful reproduction of the raw templates.
    pub normalize_articles: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { normalize_articles: true }
    }
}

impl RenderOptions {
    pub fn raw() -> Self {
        RenderOptions { normalize_articles: false }
    }
}

/// Surface form of a gender slot. Gender type 1 uses the adjectival
/// "female/male"; every other template uses "woman/man".
pub fn gender_surface(axis: Axis, kind: BiasType, gender: Gender) -> &'static str {
    let adjectival = axis == Axis::Gender && kind == BiasType::ContextualSingleExplicit;
    match (adjectival, gender) {
        (true, Gender::Woman) => "female",
        (true, Gender::Man) => "male",
        (false, g) => g.as_str(),
    }
}

/// Replaces every `[slot]` in `template`. `resolve` receives the lowercased
/// slot name and its 0-based occurrence index among slots of that name.
fn substitute<F>(template: &str, mut resolve: F) -> Result<String>
where
    F: FnMut(&str, usize) -> Result<String>,
{
    let mut out = String::with_capacity(template.len() + 32);
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']') else { break };
        out.push_str(&rest[..open]);
        let slot = rest[open + 1..open + close].to_lowercase();
        let n = seen.entry(slot.clone()).or_insert(0);
        out.push_str(&resolve(&slot, *n)?);
        *n += 1;
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn person_slot(
    spec: BiasSpec,
    people: [Option<&Profile>; 2],
    slot: &str,
    occurrence: usize,
) -> Result<String> {
    let type_id = spec.type_id();
    let shared = matches!(slot, "profession" | "workplace");
    let who = if shared { 0 } else { occurrence };
    if who > 1 {
        return Err(Error::UnknownPlaceholder(format!("{slot} (occurrence {})", occurrence + 1)));
    }
    let missing = |what: &str| Error::MissingSlot {
        slot: if who == 0 { what.to_string() } else { format!("{what} (person B)") },
        type_id,
    };
    let p = people[who].ok_or_else(|| missing(slot))?;
    let value = match slot {
        "gender" => p.gender.map(|g| gender_surface(spec.axis(), spec.kind(), g).to_string()),
        "age" => p.age.map(|a| format!("{}", a.years())),
        "culture" => p.culture.map(|c| c.as_str().to_string()),
        "name" => p.name.clone(),
        "profession" => p.profession.map(|x| x.as_str().to_string()),
        "workplace" => p.workplace.map(|x| x.as_str().to_string()),
        other => return Err(Error::UnknownPlaceholder(other.to_string())),
    };
    value.ok_or_else(|| missing(slot))
}

fn finish(text: String, opts: RenderOptions) -> String {
    if opts.normalize_articles {
        normalize_articles(&text)
    } else {
        text
    }
}

/// Biography-generation prompt for a gender-axis bias type.
///
/// Contrastive types (4-6) read person B from `second`; profession and
/// workplace always come from `first`.
pub fn render_gender_prompt(
    catalog: &TemplateCatalog,
    spec: BiasSpec,
    first: &Profile,
    second: Option<&Profile>,
    opts: RenderOptions,
) -> Result<String> {
    if spec.axis() != Axis::Gender {
        return Err(Error::InvalidBiasSpec { axis: "culture", type_id: spec.type_id() });
    }
    let template = catalog.template(spec)?;
    let text = substitute(template, |slot, n| person_slot(spec, [Some(first), second], slot, n))?;
    Ok(finish(text, opts))
}

/// A value question split into its stem and statement.
///
/// The stem is the first line; the statement is everything after it. A
/// single-line question has no statement and is used whole.
fn contrastive_question(stem: &str, question: &str) -> String {
    match question.split_once('\n') {
        Some((_, statement)) => format!("{stem}\n{}", statement.trim_start_matches('\n')),
        None => format!("{stem}\n{question}"),
    }
}

/// Value-question prompt for a culture-axis bias type: descriptor, question
/// and options joined by blank lines. Contrastive types swap the question
/// stem and the options for the catalog's contrastive versions.
pub fn render_culture_prompt(
    catalog: &TemplateCatalog,
    spec: BiasSpec,
    first: &Profile,
    second: Option<&Profile>,
    question: &str,
    options: &str,
    opts: RenderOptions,
) -> Result<String> {
    if spec.axis() != Axis::Culture {
        return Err(Error::InvalidBiasSpec { axis: "gender", type_id: spec.type_id() });
    }
    let type_id = spec.type_id();
    let template = catalog.template(spec)?;
    let descriptor = substitute(template, |slot, n| person_slot(spec, [Some(first), second], slot, n))?;
    if question.trim().is_empty() {
        return Err(Error::MissingSlot { slot: "question".into(), type_id });
    }
    let text = if spec.kind().is_contrastive() {
        let q = contrastive_question(&catalog.contrastive_stem, question);
        format!("{descriptor}\n\n{q}\n\n{}", catalog.contrastive_options.join("\n"))
    } else {
        if options.trim().is_empty() {
            return Err(Error::MissingSlot { slot: "options".into(), type_id });
        }
        format!("{descriptor}\n\n{question}\n\n{options}")
    };
    Ok(finish(text, opts))
}

/// Descriptor prepended to an original value question of a given culture.
pub fn culture_prefix(catalog: &TemplateCatalog, profile: &Profile) -> Result<String> {
    let spec = BiasSpec::culture(crate::catalog::CULTURE_PREFIX_TYPE)?;
    let template = catalog.template(spec)?;
    substitute(template, |slot, n| person_slot(spec, [Some(profile), None], slot, n))
}

#[derive(Debug, Clone, Copy)]
pub enum TaskArgs<'a> {
    Hiring { profession: Profession, candidates: &'a [&'a str] },
    Salary { position: &'a str, biography: &'a str },
    Story { name: &'a str },
}

impl TaskArgs<'_> {
    pub fn task(&self) -> TaskPrompt {
        match self {
            TaskArgs::Hiring { .. } => TaskPrompt::Hiring,
            TaskArgs::Salary { .. } => TaskPrompt::Salary,
            TaskArgs::Story { .. } => TaskPrompt::Story,
        }
    }
}

/// Downstream evaluation prompt. Hiring candidates are listed in the
/// given order, comma separated.
pub fn render_task_prompt(catalog: &TemplateCatalog, args: TaskArgs<'_>) -> Result<String> {
    if let TaskArgs::Hiring { candidates, .. } = args {
        if candidates.len() != 8 {
            return Err(Error::CandidateCount(candidates.len()));
        }
    }
    let template = catalog.task(args.task())?;
    substitute(template, |slot, _| {
        let v = match (slot, args) {
            ("profession", TaskArgs::Hiring { profession, .. }) => profession.as_str().to_string(),
            ("candidates", TaskArgs::Hiring { candidates, .. }) => candidates.join(", "),
            ("position", TaskArgs::Salary { position, .. }) => position.to_string(),
            ("biography", TaskArgs::Salary { biography, .. }) => biography.to_string(),
            ("name", TaskArgs::Story { name }) => name.to_string(),
            (other, _) => return Err(Error::UnknownPlaceholder(other.to_string())),
        };
        Ok(v)
    })
}

fn takes_an(word: &str) -> bool {
    let lower = word.to_lowercase();
    let digits: String = lower.chars().take_while(char::is_ascii_digit).collect();
    if !digits.is_empty() {
        // eight, eleven, eighteen, and their thousands
        let lead = |p: &str| digits.starts_with(p) && digits.len() % 3 == 2;
        return digits.starts_with('8') || lead("11") || lead("18");
    }
    const CONSONANT_SOUND: [&str; 7] = ["uni", "use", "usu", "uti", "eu", "one", "once"];
    const SILENT_H: [&str; 4] = ["hour", "honest", "honor", "heir"];
    if SILENT_H.iter().any(|p| lower.starts_with(p)) {
        return true;
    }
    if CONSONANT_SOUND.iter().any(|p| lower.starts_with(p)) {
        return false;
    }
    lower.starts_with(['a', 'e', 'i', 'o', 'u'])
}

/// Rewrites the standalone article "a"/"A" to "an"/"An" before a vowel sound.
pub fn normalize_articles(text: &str) -> String {
    let parts: Vec<&str> = text.split(' ').collect();
    let mut out = String::with_capacity(text.len() + 8);
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let next = parts.get(i + 1).copied().unwrap_or("");
        match *part {
            "a" if takes_an(next) => out.push_str("an"),
            "A" if sentence_start(&parts, i) && takes_an(next) => out.push_str("An"),
            other => out.push_str(other),
        }
    }
    out
}

/// A capital "A" is an article only where a sentence starts; elsewhere it
/// is a label, as in "Person A".
fn sentence_start(parts: &[&str], i: usize) -> bool {
    i == 0 || parts[i - 1].ends_with(['.', '!', '?', '\n'])
}
