//! Culturally representative first-name pools, ten per (culture, gender).
//!
//! Several names occur in more than one pool (for example "Isabel" is both
//! Portuguese and Spanish); [`origins`] returns every pool a name belongs to.

use crate::types::{Culture, Gender};

pub const POOL_SIZE: usize = 10;

const ARABIC_FEMALE: [&str; POOL_SIZE] =
    ["Fatima", "Layla", "Aaliyah", "Nabila", "Naima", "Zahra", "Yasmeen", "Salma", "Mariam", "Noor"];
const ARABIC_MALE: [&str; POOL_SIZE] =
    ["Amir", "Faisal", "Yaseen", "Zakir", "Zeyad", "Omar", "Ali", "Khaled", "Ahmed", "Hassan"];
const CHINESE_FEMALE: [&str; POOL_SIZE] =
    ["Li", "Fang", "Juan", "Lin", "Jing", "Na", "Xiu", "Hong", "Zhen", "Yan"];
const CHINESE_MALE: [&str; POOL_SIZE] =
    ["Wei", "Ming", "Jie", "Jun", "Hua", "Qiang", "Yong", "Ping", "Chao", "Hao"];
const PORTUGUESE_FEMALE: [&str; POOL_SIZE] = [
    "Maria", "Ana", "Sofia", "Isabel", "Margarida", "Catarina", "Julia", "Leticia", "Amanda", "Mariana",
];
const PORTUGUESE_MALE: [&str; POOL_SIZE] =
    ["João", "Miguel", "Pedro", "Luís", "Carlos", "António", "Rafael", "André", "José", "Tiago"];
const SPANISH_FEMALE: [&str; POOL_SIZE] = [
    "María", "Carmen", "Isabel", "Sofía", "Ana", "Lucía", "Victoria", "Elena", "Laura", "Daniela",
];
const SPANISH_MALE: [&str; POOL_SIZE] =
    ["Juan", "Carlos", "José", "Luis", "Antonio", "Miguel", "Pedro", "Alejandro", "Diego", "Javier"];

pub fn pool(culture: Culture, gender: Gender) -> &'static [&'static str; POOL_SIZE] {
    match (culture, gender) {
        (Culture::Arabic, Gender::Woman) => &ARABIC_FEMALE,
        (Culture::Arabic, Gender::Man) => &ARABIC_MALE,
        (Culture::Chinese, Gender::Woman) => &CHINESE_FEMALE,
        (Culture::Chinese, Gender::Man) => &CHINESE_MALE,
        (Culture::Portuguese, Gender::Woman) => &PORTUGUESE_FEMALE,
        (Culture::Portuguese, Gender::Man) => &PORTUGUESE_MALE,
        (Culture::Spanish, Gender::Woman) => &SPANISH_FEMALE,
        (Culture::Spanish, Gender::Man) => &SPANISH_MALE,
    }
}

/// All eight (culture, gender) keys in catalog order.
pub fn keys() -> impl Iterator<Item = (Culture, Gender)> {
    Culture::ALL
        .iter()
        .flat_map(|&c| [Gender::Woman, Gender::Man].into_iter().map(move |g| (c, g)))
}

/// Every pool containing `name` (exact, case-sensitive match).
pub fn origins(name: &str) -> impl Iterator<Item = (Culture, Gender)> + '_ {
    keys().filter(move |&(c, g)| pool(c, g).contains(&name))
}

/// Every distinct name across all pools, in catalog order.
pub fn all_names() -> impl Iterator<Item = &'static str> {
    let mut seen: alloc::vec::Vec<&'static str> = alloc::vec::Vec::new();
    for (c, g) in keys() {
        for &n in pool(c, g) {
            if !seen.contains(&n) {
                seen.push(n);
            }
        }
    }
    seen.into_iter()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_pools_of_ten() {
        assert_eq!(keys().count(), 8);
        for (c, g) in keys() {
            let p = pool(c, g);
            for (i, a) in p.iter().enumerate() {
                assert!(!p[i + 1..].contains(a), "duplicate {a} in {c}/{g}");
            }
        }
    }

    #[test]
    fn shared_names_report_every_origin() {
        let isabel: alloc::vec::Vec<_> = origins("Isabel").collect();
        assert_eq!(isabel, [(Culture::Portuguese, Gender::Woman), (Culture::Spanish, Gender::Woman)]);
        assert_eq!(origins("Maria").count(), 1);
        assert_eq!(origins("María").count(), 1);
        assert_eq!(origins("Nobody").count(), 0);
    }
}
