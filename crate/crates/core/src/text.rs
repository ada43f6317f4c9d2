//! Word-level text helpers shared by masking, matching and lexicon counting.

use alloc::string::String;
use alloc::vec::Vec;

/// A maximal run of word characters (alphanumeric) or of non-word characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub is_word: bool,
}

pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

pub fn tokenize(s: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut current: Option<bool> = None;
    for (i, c) in s.char_indices() {
        let w = is_word_char(c);
        match current {
            Some(kind) if kind == w => {}
            Some(kind) => {
                out.push(Token { text: &s[start..i], start, is_word: kind });
                start = i;
                current = Some(w);
            }
            None => current = Some(w),
        }
    }
    if let Some(kind) = current {
        out.push(Token { text: &s[start..], start, is_word: kind });
    }
    out
}

/// Byte offset (into the lowercased haystack) of the earliest case-insensitive
/// occurrence of `needle` bounded by non-word characters on both sides.
pub fn find_word(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let hay = haystack.to_lowercase();
    let pat = needle.to_lowercase();
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&pat) {
        let at = from + pos;
        let end = at + pat.len();
        let before_ok = hay[..at].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return Some(at);
        }
        from = at + hay[at..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Lowercased runs of letters; everything else is a boundary.
pub fn letter_words(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()).map(|w| w.to_lowercase())
}

/// Applies the capitalization pattern of `like` to `word`: all caps (for
/// multi-letter originals), initial capital, or lowercase.
pub fn match_case(like: &str, word: &str) -> String {
    let mut chars = like.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = like.chars().count() > 1 && like.chars().all(|c| !c.is_lowercase());
    if all_upper {
        word.to_uppercase()
    } else if first_upper {
        let mut out = String::with_capacity(word.len());
        let mut it = word.chars();
        if let Some(f) = it.next() {
            out.extend(f.to_uppercase());
        }
        out.extend(it);
        out
    } else {
        String::from(word)
    }
}
