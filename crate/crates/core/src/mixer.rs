//! Training-set construction at a target bias ratio.
//!
//! The bias ratio is the fraction of augmented records in the mixed set.
//! It is held as an exact rational so that counts such as `0.05 * 2833`
//! round identically everywhere; rounding is half-to-even.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_unique_ids, Dataset, Manifest};
use crate::error::{Error, Result};
use crate::sample::{derive_seed, seeded_sample, shuffle, SplitMix64};

/// Exact bias ratio `num / den` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BiasRatio {
    num: u64,
    den: u64,
}

const fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl BiasRatio {
    pub const ZERO: BiasRatio = BiasRatio { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidRatio(format!("{num}/{den}")));
        }
        let g = gcd(num, den).max(1);
        Ok(BiasRatio { num: num / g, den: den / g })
    }

    /// The operating points studied: 0, 5, 10, 20 and 50 percent.
    pub fn standard_grid() -> [BiasRatio; 5] {
        [
            BiasRatio::ZERO,
            BiasRatio { num: 1, den: 20 },
            BiasRatio { num: 1, den: 10 },
            BiasRatio { num: 1, den: 5 },
            BiasRatio { num: 1, den: 2 },
        ]
    }

    pub fn numer(self) -> u64 {
        self.num
    }

    pub fn denom(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }
}

/// `round(x / d)` with ties to even.
pub fn div_round_half_even(x: u128, d: u128) -> u128 {
    let q = x / d;
    let r = x % d;
    match (2 * r).cmp(&d) {
        core::cmp::Ordering::Greater => q + 1,
        core::cmp::Ordering::Equal => q + (q & 1),
        core::cmp::Ordering::Less => q,
    }
}

impl FromStr for BiasRatio {
    type Err = Error;

    /// Accepts decimals (`0.05`), percentages (`5%`) and fractions (`1/20`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidRatio(s.to_string());
        let t = s.trim();
        if let Some(p) = t.strip_suffix('%') {
            let (num, den) = parse_decimal(p.trim()).ok_or_else(bad)?;
            return BiasRatio::new(num, den.checked_mul(100).ok_or_else(bad)?).map_err(|_| bad());
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return BiasRatio::new(n, d).map_err(|_| bad());
        }
        let (num, den) = parse_decimal(t).ok_or_else(bad)?;
        BiasRatio::new(num, den).map_err(|_| bad())
    }
}

/// `"12.5"` → `(125, 10)`; unsigned decimal notation only.
fn parse_decimal(t: &str) -> Option<(u64, u64)> {
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if (int.is_empty() && frac.is_empty()) || frac.len() > 18 {
        return None;
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some((int.checked_mul(den)?.checked_add(frac_v)?, den))
}

impl fmt::Display for BiasRatio {
    /// Decimal when the denominator divides a power of ten, `n/d` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut scale = 1u64;
        let mut digits = 0usize;
        while !scale.is_multiple_of(self.den) && digits < 18 {
            scale *= 10;
            digits += 1;
        }
        if !scale.is_multiple_of(self.den) {
            return write!(f, "{}/{}", self.num, self.den);
        }
        let scaled = self.num * (scale / self.den);
        let int = scaled / scale;
        if digits == 0 {
            return write!(f, "{int}");
        }
        let frac = scaled % scale;
        write!(f, "{int}.{frac:0width$}", width = digits)
    }
}

impl Serialize for BiasRatio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BiasRatio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = BiasRatio;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a bias ratio as a number in [0, 1] or a string")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<BiasRatio, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> core::result::Result<BiasRatio, E> {
                // Shortest round-trip formatting recovers the decimal the user wrote.
                format!("{v}").parse().map_err(E::custom)
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<BiasRatio, E> {
                BiasRatio::new(v, 1).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<BiasRatio, E> {
                u64::try_from(v).map_err(E::custom).and_then(|v| BiasRatio::new(v, 1).map_err(E::custom))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixPolicy {
    /// Fixed total; augmented records take the place of originals.
    Replace,
    /// Every available original is kept and augmented records are added.
    Append,
}

impl MixPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MixPolicy::Replace => "replace",
            MixPolicy::Append => "append",
        }
    }
}

impl FromStr for MixPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replace" => Ok(MixPolicy::Replace),
            "append" => Ok(MixPolicy::Append),
            _ => Err(Error::InvalidValue { field: "policy", value: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixPlan {
    pub gamma: BiasRatio,
    #[serde(default)]
    pub total: Option<u64>,
    pub policy: MixPolicy,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixCounts {
    pub n_original: u64,
    pub n_augmented: u64,
}

impl MixCounts {
    pub fn total(&self) -> u64 {
        self.n_original + self.n_augmented
    }
}

/// Record counts drawn from each pool under `plan`.
///
/// Replace: `n_augmented = round(γ·total)`, the rest original. Append: all
/// originals, `n_augmented = round(γ/(1-γ) · n_original)`.
pub fn plan_counts(plan: &MixPlan, available_original: u64, available_augmented: u64) -> Result<MixCounts> {
    let g = plan.gamma;
    let counts = match plan.policy {
        MixPolicy::Replace => {
            let total = plan.total.ok_or(Error::MissingTotal)?;
            let n_aug = div_round_half_even(g.num as u128 * total as u128, g.den as u128) as u64;
            MixCounts { n_original: total - n_aug, n_augmented: n_aug }
        }
        MixPolicy::Append => {
            if g.is_one() {
                return Err(Error::AppendFullRatio);
            }
            let n_orig = available_original;
            let n_aug = div_round_half_even(g.num as u128 * n_orig as u128, (g.den - g.num) as u128);
            let n_aug = u64::try_from(n_aug).map_err(|_| Error::InvalidRatio(g.to_string()))?;
            MixCounts { n_original: n_orig, n_augmented: n_aug }
        }
    };
    if counts.n_original > available_original {
        return Err(Error::InsufficientPool {
            pool: "original",
            needed: counts.n_original,
            available: available_original,
        });
    }
    if counts.n_augmented > available_augmented {
        return Err(Error::InsufficientPool {
            pool: "augmented",
            needed: counts.n_augmented,
            available: available_augmented,
        });
    }
    Ok(counts)
}

/// Mixes seeded subsamples of both pools and shuffles the result.
pub fn mix(original: &Dataset, augmented: &Dataset, plan: &MixPlan, inputs: Vec<String>) -> Result<Dataset> {
    let counts = plan_counts(plan, original.len() as u64, augmented.len() as u64)?;
    let mut records = seeded_sample(original.records(), counts.n_original as usize, derive_seed(plan.seed, 1))?;
    records.extend(seeded_sample(augmented.records(), counts.n_augmented as usize, derive_seed(plan.seed, 2))?);
    check_unique_ids(&records)?;
    shuffle(&mut records, &mut SplitMix64::new(derive_seed(plan.seed, 3)));
    let mut manifest = Manifest::new("mix")
        .with_seed(plan.seed)
        .with_inputs(inputs)
        .with_param("gamma", plan.gamma.to_string())
        .with_param("policy", plan.policy.as_str());
    if let Some(t) = plan.total {
        manifest = manifest.with_param("total", format!("{t}"));
    }
    Dataset::new(records, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replace(g: &str, total: u64) -> MixPlan {
        MixPlan { gamma: g.parse().unwrap(), total: Some(total), policy: MixPolicy::Replace, seed: 0 }
    }

    #[test]
    fn replace_counts() {
        assert_eq!(plan_counts(&replace("0.20", 3600), 5000, 5000).unwrap(), MixCounts { n_original: 2880, n_augmented: 720 });
        assert_eq!(plan_counts(&replace("0", 2833), 2833, 0).unwrap(), MixCounts { n_original: 2833, n_augmented: 0 });
        // 0.5 * 2833 = 1416.5 rounds to even
        assert_eq!(plan_counts(&replace("0.5", 2833), 5000, 5000).unwrap().n_augmented, 1416);
        assert_eq!(plan_counts(&replace("0.5", 2835), 5000, 5000).unwrap().n_augmented, 1418);
    }

    #[test]
    fn append_counts() {
        let plan = MixPlan { gamma: "0.05".parse().unwrap(), total: None, policy: MixPolicy::Append, seed: 0 };
        assert_eq!(plan_counts(&plan, 1000, 1000).unwrap(), MixCounts { n_original: 1000, n_augmented: 53 });
        let full = MixPlan { gamma: "1".parse().unwrap(), ..plan };
        assert_eq!(plan_counts(&full, 1000, 1000), Err(Error::AppendFullRatio));
    }

    #[test]
    fn shortfalls_are_named() {
        assert_eq!(
            plan_counts(&replace("0.2", 3600), 2000, 5000),
            Err(Error::InsufficientPool { pool: "original", needed: 2880, available: 2000 })
        );
        assert_eq!(
            plan_counts(&replace("0.2", 3600), 5000, 700),
            Err(Error::InsufficientPool { pool: "augmented", needed: 720, available: 700 })
        );
        let no_total = MixPlan { total: None, ..replace("0.2", 1) };
        assert_eq!(plan_counts(&no_total, 1, 1), Err(Error::MissingTotal));
    }

    #[test]
    fn ratio_parsing_and_display() {
        let r: BiasRatio = "0.05".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (1, 20));
        assert_eq!("5%".parse::<BiasRatio>().unwrap(), r);
        assert_eq!("1/20".parse::<BiasRatio>().unwrap(), r);
        assert_eq!(r.to_string(), "0.05");
        assert_eq!(BiasRatio::new(1, 3).unwrap().to_string(), "1/3");
        assert_eq!(BiasRatio::ZERO.to_string(), "0");
        assert_eq!("1".parse::<BiasRatio>().unwrap().to_string(), "1");
        assert!("1.5".parse::<BiasRatio>().is_err());
        assert!("-0.1".parse::<BiasRatio>().is_err());
        assert!("abc".parse::<BiasRatio>().is_err());
        let from_json: BiasRatio = serde_json::from_str("0.1").unwrap();
        assert_eq!(from_json, BiasRatio::new(1, 10).unwrap());
    }
}
