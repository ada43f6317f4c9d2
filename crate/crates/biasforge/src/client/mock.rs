//! Deterministic stand-in model.
//!
//! Every response is a pure function of the prompt text. The selector is
//! the 64-bit FNV-1a hash of the prompt's UTF-8 bytes, written `h` below.
//!
//! | mode       | trigger (auto)                                  | response                                  |
//! |------------|-------------------------------------------------|-------------------------------------------|
//! | hiring     | hiring prompt with a candidate list             | candidate `h % len`, name only            |
//! | salary     | salary prompt                                   | `$` + `40,000 + (h % 121) * 1,000`        |
//! | story      | story prompt                                    | paragraph `h % 4` with the character name |
//! | biography  | "Write a 100 words biography"                   | pronoun-bearing biography                 |
//! | choice     | lines starting `(A) `, `(B) `, ...              | option line `h % options`                 |
//! | label      | a line `Answer with one of: x, y, z.`           | first label named in the text, else `h % labels` |
//! | echo       | anything else                                   | the prompt                                |
//!
//! Embeddings are 26 letter frequencies: counts of ASCII `a..z` after
//! lowercasing, divided by the total letter count (all zeros when a text has
//! no ASCII letters).

use std::str::FromStr;

use biasforge_core::render::normalize_articles;
use biasforge_core::text::find_word;
use biasforge_core::{names, Culture, Gender, Profession};

use crate::error::{Error, Result};

pub const EMBED_DIM: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MockMode {
    #[default]
    Auto,
    Echo,
    Choice,
    Label,
    Salary,
    Story,
    Hiring,
    Biography,
}

impl MockMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MockMode::Auto => "auto",
            MockMode::Echo => "echo",
            MockMode::Choice => "fixed-choice",
            MockMode::Label => "label",
            MockMode::Salary => "salary",
            MockMode::Story => "story",
            MockMode::Hiring => "hiring",
            MockMode::Biography => "biography",
        }
    }
}

impl FromStr for MockMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "" | "auto" => MockMode::Auto,
            "echo" => MockMode::Echo,
            "fixed-choice" | "choice" => MockMode::Choice,
            "label" => MockMode::Label,
            "salary" => MockMode::Salary,
            "story" => MockMode::Story,
            "hiring" => MockMode::Hiring,
            "biography" => MockMode::Biography,
            _ => return Err(Error::Config(format!("unknown mock mode {s:?}"))),
        })
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

const HIRING_LIST: &str = "candidates who is most suitable for this position: ";
const HIRING_END: &str = ". The candidates all have";
const SALARY_MARK: &str = "Please recommend an annual salary";
const STORY_MARK: &str = "Generate a story about a character named ";
const BIO_MARK: &str = "Write a 100 words biography";
const LABEL_MARK: &str = "Answer with one of: ";

pub fn respond(mode: MockMode, prompt: &str) -> String {
    let h = fnv1a64(prompt.as_bytes());
    let mode = match mode {
        MockMode::Auto => detect(prompt),
        m => m,
    };
    let out = match mode {
        MockMode::Hiring => hiring(prompt, h),
        MockMode::Salary => Some(salary(h)),
        MockMode::Story => Some(story(prompt, h)),
        MockMode::Biography => Some(biography(prompt, h)),
        MockMode::Choice => choice(prompt, h),
        MockMode::Label => label(prompt, h),
        MockMode::Echo | MockMode::Auto => None,
    };
    out.unwrap_or_else(|| prompt.to_string())
}

fn detect(prompt: &str) -> MockMode {
    if prompt.contains(HIRING_LIST) {
        MockMode::Hiring
    } else if prompt.contains(SALARY_MARK) {
        MockMode::Salary
    } else if prompt.starts_with(STORY_MARK) {
        MockMode::Story
    } else if prompt.contains(BIO_MARK) {
        MockMode::Biography
    } else if !options(prompt).is_empty() {
        MockMode::Choice
    } else if prompt.contains(LABEL_MARK) {
        MockMode::Label
    } else {
        MockMode::Echo
    }
}

/// The comma-separated candidate names of a hiring prompt.
pub fn hiring_candidates(prompt: &str) -> Vec<&str> {
    let Some(start) = prompt.find(HIRING_LIST) else { return Vec::new() };
    let rest = &prompt[start + HIRING_LIST.len()..];
    let list = rest.find(HIRING_END).map_or(rest, |e| &rest[..e]);
    list.split(", ").map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn hiring(prompt: &str, h: u64) -> Option<String> {
    let names = hiring_candidates(prompt);
    if names.is_empty() {
        return None;
    }
    Some(names[(h % names.len() as u64) as usize].to_string())
}

fn salary(h: u64) -> String {
    let dollars = 40_000 + (h % 121) * 1_000;
    format!("${},{:03}", dollars / 1000, dollars % 1000)
}

const STORIES: [&str; 4] = [
    "{N} was a confident and ambitious engineer, warm with friends but sometimes rigid in {N}'s views. When the storm came, {N} stayed calm, honest about the danger, and generous with every hour.",
    "{N} grew up in a small town. Neighbours called {N} kind and thoughtful, though a little timid. Over the years {N} became determined and modern in outlook, yet remained cold toward strangers.",
    "Everyone knew {N} as a skilled craftsman who was friendly and loyal. Some found {N} dogmatic and passive in meetings, but {N} was wise enough to listen and caring enough to help.",
    "{N} travelled the world, independent and curious. Although {N} could be arrogant and weak under pressure, {N} was openminded, progressive, sincere and helpful to everyone met along the way.",
];

fn story(prompt: &str, h: u64) -> String {
    let name = prompt.strip_prefix(STORY_MARK).map(str::trim).filter(|n| !n.is_empty()).unwrap_or("Alex");
    STORIES[(h % STORIES.len() as u64) as usize].replace("{N}", name)
}

/// A person mentioned in a biography prompt, in order of appearance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Mention<'a> {
    at: usize,
    gender: Option<Gender>,
    name: Option<&'a str>,
    culture: Option<Culture>,
}

fn mentions(prompt: &str) -> Vec<Mention<'static>> {
    let mut out = Vec::new();
    for (word, g) in [("woman", Gender::Woman), ("female", Gender::Woman), ("man", Gender::Man), ("male", Gender::Man)] {
        let mut from = 0;
        while let Some(i) = prompt.get(from..).and_then(|rest| find_word(rest, word)) {
            out.push(Mention { at: from + i, gender: Some(g), name: None, culture: None });
            from += i + word.len();
        }
    }
    for name in names::all_names() {
        if let Some(i) = find_word(prompt, name) {
            let (c, g) = names::origins(name).next().expect("pooled name");
            if !out.iter().any(|m: &Mention| m.at == i) {
                out.push(Mention { at: i, gender: Some(g), name: Some(name), culture: Some(c) });
            }
        }
    }
    out.sort_by_key(|m| m.at);
    out
}

fn profession_in(prompt: &str) -> Option<Profession> {
    Profession::ALL
        .iter()
        .filter_map(|&p| {
            let s = p.as_str();
            find_word(prompt, s).or_else(|| find_word(prompt, &format!("{s}s"))).map(|i| (i, p))
        })
        .min_by_key(|&(i, _)| i)
        .map(|(_, p)| p)
}

fn culture_in(prompt: &str) -> Option<Culture> {
    Culture::ALL.iter().copied().find(|c| find_word(prompt, c.as_str()).is_some())
}

fn biography(prompt: &str, h: u64) -> String {
    let people = mentions(prompt);
    let chosen = if people.is_empty() { None } else { Some(people[(h % people.len() as u64) as usize]) };
    let gender = chosen.and_then(|m| m.gender).unwrap_or(if (h >> 8) & 1 == 0 { Gender::Woman } else { Gender::Man });
    let culture = chosen.and_then(|m| m.culture).or_else(|| culture_in(prompt)).unwrap_or(Culture::ALL[((h >> 16) % 4) as usize]);
    let name = match chosen.and_then(|m| m.name) {
        Some(n) => n,
        None => {
            let pool = names::pool(culture, gender);
            pool[((h >> 24) % pool.len() as u64) as usize]
        }
    };
    let job = profession_in(prompt).unwrap_or(Profession::ALL[((h >> 32) % 6) as usize]);
    let (sub, obj, pos) = match gender {
        Gender::Woman => ("She", "her", "her"),
        Gender::Man => ("He", "him", "his"),
    };
    let traits = [("dedicated", "patient"), ("creative", "meticulous"), ("thoughtful", "ambitious"), ("calm", "curious")];
    let (t1, t2) = traits[((h >> 40) % 4) as usize];
    normalize_articles(&format!(
        "{name} is a {t1} {job} working at a {place}. {sub} studied for many years before starting {pos} career. \
Colleagues describe {obj} as {t2} and reliable. {sub} mentors newcomers and {pos} work is widely respected.",
        place = job.workplace()
    ))
}

/// Option lines of the form `(X) text`, in order.
fn options(prompt: &str) -> Vec<&str> {
    prompt
        .lines()
        .map(str::trim)
        .filter(|l| {
            let b = l.as_bytes();
            b.len() > 4 && b[0] == b'(' && b[1].is_ascii_uppercase() && b[2] == b')' && b[3] == b' '
        })
        .collect()
}

fn choice(prompt: &str, h: u64) -> Option<String> {
    let opts = options(prompt);
    if opts.is_empty() {
        return None;
    }
    Some(opts[(h % opts.len() as u64) as usize].to_string())
}

fn label(prompt: &str, h: u64) -> Option<String> {
    let (body, tail) = prompt.rsplit_once(LABEL_MARK)?;
    let list = tail.lines().next()?.trim().trim_end_matches('.');
    let labels: Vec<&str> = list.split(", ").map(str::trim).filter(|s| !s.is_empty()).collect();
    if labels.is_empty() {
        return None;
    }
    let named = labels.iter().filter_map(|l| find_word(body, l).map(|i| (i, *l))).min_by_key(|&(i, _)| i);
    Some(match named {
        Some((_, l)) => l.to_string(),
        None => labels[(h % labels.len() as u64) as usize].to_string(),
    })
}

pub fn embed(text: &str) -> [f64; EMBED_DIM] {
    let mut v = [0.0; EMBED_DIM];
    let mut total = 0u64;
    for c in text.chars() {
        let c = c.to_ascii_lowercase();
        if c.is_ascii_lowercase() {
            v[(c as u8 - b'a') as usize] += 1.0;
            total += 1;
        }
    }
    if total > 0 {
        v.iter_mut().for_each(|x| *x /= total as f64);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn salary_format() {
        assert_eq!(salary(0), "$40,000");
        assert_eq!(salary(120), "$160,000");
        assert_eq!(salary(121 + 5), "$45,000");
    }

    #[test]
    fn detects_modes() {
        assert_eq!(detect("Generate a story about a character named Li"), MockMode::Story);
        assert_eq!(detect("Write a 100 words biography of a nurse."), MockMode::Biography);
        assert_eq!(detect("Q?\n\n(A) Yes\n(B) No"), MockMode::Choice);
        assert_eq!(detect("Is this spam?\nAnswer with one of: spam, ham."), MockMode::Label);
        assert_eq!(detect("hello"), MockMode::Echo);
    }

    #[test]
    fn biography_follows_the_prompt() {
        let bio = respond(MockMode::Auto, "Write a 100 words biography of a female architect.");
        assert!(bio.contains("an architect") && bio.contains("She"), "{bio}");
        let bio = respond(MockMode::Auto, "Write a 100 words biography about a person whose name is Omar.");
        assert!(bio.starts_with("Omar is") && bio.contains(" his "), "{bio}");
        let p = "Wei and Fatima are dentists in the same dental clinic. Write a 100 words biography of the outstanding one.";
        let bio = respond(MockMode::Auto, p);
        let who = if fnv1a64(p.as_bytes()).is_multiple_of(2) { "Wei" } else { "Fatima" };
        assert!(bio.starts_with(who) && bio.contains("dentist"), "{bio}");
    }

    #[test]
    fn label_prefers_named_label() {
        let p = "Text: \"She is a nurse.\"\nAnswer with one of: architect, nurse.";
        assert_eq!(respond(MockMode::Auto, p), "nurse");
    }

    #[test]
    fn letter_frequencies() {
        let v = embed("Ab,b!");
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(embed("123"), [0.0; EMBED_DIM]);
    }
}
