//! Product description normalization.
//!
//! Raw retail descriptions are inconsistent in case, spacing and unit
//! notation ("Butter" vs "butter", "5L drink" vs "5Ldrink"). Normalization
//! produces a canonical token sequence plus structured fields for the
//! attributes that matter when deciding whether two labels denote the same
//! product: volume, weight, a percentage (fat content and the like) and the
//! UHT marker.
//!
//! Extraction rules, applied left to right over the token stream:
//! * `4X100G` — multiplicative pack, recorded as the total (400, G);
//! * number followed by a unit word (attached or spaced) — volume or weight;
//! * number followed by `%`, or a bare number with a fractional part — percent;
//! * `UHT` — sets the flag and stays in the tokens.
//!
//! The first match wins for each structured field; later occurrences of an
//! extractable pattern are consumed and dropped so that re-normalizing the
//! serialized token text reproduces the same tokens (idempotence). Measures
//! and percent live only in the structured fields after extraction.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// Measurement unit recognized inside descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Unit {
    L,
    Cl,
    Ml,
    Kg,
    Dag,
    G,
    Mg,
}

/// Whether a unit measures volume or weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Volume,
    Weight,
}

impl Unit {
    /// Unit tokens, longest first so that prefix matching is unambiguous.
    const ALL: [Unit; 7] = [Unit::Dag, Unit::Kg, Unit::Mg, Unit::Ml, Unit::Cl, Unit::L, Unit::G];

    pub fn token(self) -> &'static str {
        match self {
            Unit::L => "L",
            Unit::Cl => "CL",
            Unit::Ml => "ML",
            Unit::Kg => "KG",
            Unit::Dag => "DAG",
            Unit::G => "G",
            Unit::Mg => "MG",
        }
    }

    pub fn kind(self) -> UnitKind {
        match self {
            Unit::L | Unit::Cl | Unit::Ml => UnitKind::Volume,
            Unit::Kg | Unit::Dag | Unit::G | Unit::Mg => UnitKind::Weight,
        }
    }

    /// Conversion factor into the base unit (millilitres or milligrams).
    fn milli_factor(self) -> Decimal {
        match self {
            Unit::L => Decimal::from(1000),
            Unit::Cl => Decimal::from(10),
            Unit::Ml => Decimal::ONE,
            Unit::Kg => Decimal::from(1_000_000),
            Unit::Dag => Decimal::from(10_000),
            Unit::G => Decimal::from(1000),
            Unit::Mg => Decimal::ONE,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// An extracted magnitude with its unit, e.g. (5, L) or (400, G).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Measure {
    pub magnitude: Decimal,
    pub unit: Unit,
}

impl Measure {
    /// Magnitude converted to the base unit (ml or mg); exact, suitable for
    /// equality comparison across notations (0.5 L == 500 ML).
    pub fn canonical_milli(&self) -> Decimal {
        (self.magnitude * self.unit.milli_factor()).normalize()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.magnitude, self.unit)
    }
}

/// Canonical form of a raw product description.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct NormalizedDescription {
    /// Upper-cased words and residual integers, units stripped.
    pub tokens: Vec<String>,
    pub volume: Option<Measure>,
    pub weight: Option<Measure>,
    pub percent: Option<Decimal>,
    /// True when the description carries the UHT marker.
    pub uht: bool,
}

impl NormalizedDescription {
    /// Space-joined token text; the string compared during name matching and
    /// stored as the description part of an observation key.
    pub fn token_text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lexer token: a number (tracking whether it had a fractional part), a word,
/// or a percent sign.
enum Tok {
    Num(Decimal, bool),
    Word(String),
    Percent,
}

fn camel_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\p{Ll})(\p{Lu})").unwrap())
}

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]+(?:[.,][0-9]+)?|\p{Alphabetic}+|%").unwrap())
}

/// Split a word into a leading unit and the remainder, longest unit first.
fn unit_split(word: &str) -> Option<(Unit, &str)> {
    for unit in Unit::ALL {
        if let Some(rest) = word.strip_prefix(unit.token()) {
            return Some((unit, rest));
        }
    }
    None
}

fn parse_number(text: &str) -> (Decimal, bool) {
    let has_fraction = text.contains(['.', ',']);
    let canonical = text.replace(',', ".");
    let value = Decimal::from_str(&canonical).unwrap_or_default().normalize();
    (value, has_fraction)
}

pub fn normalize_description(raw: &str) -> NormalizedDescription {
    // camelCase boundaries become spaces before upper-casing, so that
    // "WodaZrodlanaPromocja5L" and "WODA ZRODLANA PROMOCJA 5L" coincide.
    let spaced = camel_re().replace_all(raw, "$1 $2");
    let upper = spaced.to_uppercase();

    let toks: Vec<Tok> = token_re()
        .find_iter(&upper)
        .map(|m| match m.as_str() {
            "%" => Tok::Percent,
            s if s.starts_with(|c: char| c.is_ascii_digit()) => {
                let (value, frac) = parse_number(s);
                Tok::Num(value, frac)
            }
            s => Tok::Word(s.to_string()),
        })
        .collect();

    let mut out = NormalizedDescription::default();
    let record_measure = |m: Measure, out: &mut NormalizedDescription| match m.unit.kind() {
        UnitKind::Volume => {
            if out.volume.is_none() {
                out.volume = Some(m);
            }
        }
        UnitKind::Weight => {
            if out.weight.is_none() {
                out.weight = Some(m);
            }
        }
    };

    let mut i = 0;
    while i < toks.len() {
        match &toks[i] {
            Tok::Num(a, _)
                if matches!(toks.get(i + 1), Some(Tok::Word(x)) if x == "X")
                    && matches!(toks.get(i + 2), Some(Tok::Num(..))) =>
            {
                // Multiplicative pack: NUMBER X NUMBER UNIT.
                let b = match &toks[i + 2] {
                    Tok::Num(b, _) => *b,
                    _ => unreachable!(),
                };
                let unit_word = match toks.get(i + 3) {
                    Some(Tok::Word(w)) => unit_split(w),
                    _ => None,
                };
                if let Some((unit, rest)) = unit_word {
                    record_measure(Measure { magnitude: (*a * b).normalize(), unit }, &mut out);
                    i += 4;
                    if !rest.is_empty() {
                        out.tokens.push(rest.to_string());
                    }
                    continue;
                }
                out.tokens.push(a.to_string());
                i += 1;
            }
            Tok::Num(a, frac) => {
                // Number bound to a following unit word, percent sign, or —
                // for fractional values — an implicit percentage.
                if let Some(Tok::Word(w)) = toks.get(i + 1) {
                    if let Some((unit, rest)) = unit_split(w) {
                        record_measure(Measure { magnitude: *a, unit }, &mut out);
                        i += 2;
                        if !rest.is_empty() {
                            out.tokens.push(rest.to_string());
                        }
                        continue;
                    }
                }
                if matches!(toks.get(i + 1), Some(Tok::Percent)) {
                    if out.percent.is_none() {
                        out.percent = Some(*a);
                    }
                    i += 2;
                    continue;
                }
                if *frac {
                    if out.percent.is_none() {
                        out.percent = Some(*a);
                    }
                    i += 1;
                    continue;
                }
                out.tokens.push(a.to_string());
                i += 1;
            }
            Tok::Word(w) => {
                if w == "UHT" {
                    out.uht = true;
                }
                out.tokens.push(w.clone());
                i += 1;
            }
            Tok::Percent => {
                // Stray percent sign with no preceding number: drop.
                i += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    #[test]
    fn case_insensitive() {
        assert_eq!(normalize_description("Butter"), normalize_description("butter"));
        assert_eq!(normalize_description("Butter").tokens, vec!["BUTTER"]);
    }

    #[test]
    fn attached_and_spaced_units_coincide() {
        let a = normalize_description("5L drink");
        let b = normalize_description("5Ldrink");
        assert_eq!(a, b);
        assert_eq!(a.volume, Some(Measure { magnitude: dec!(5), unit: Unit::L }));
        assert_eq!(a.tokens, vec!["DRINK"]);
    }

    #[test]
    fn camel_case_with_trailing_volume() {
        let d = normalize_description("WodaZrodlanaPromocja5L");
        assert_eq!(d.tokens, vec!["WODA", "ZRODLANA", "PROMOCJA"]);
        assert_eq!(d.volume, Some(Measure { magnitude: dec!(5), unit: Unit::L }));
    }

    #[test]
    fn milk_style_description() {
        let d = normalize_description("Mleko UHT 3,2 1L");
        assert_eq!(d.tokens, vec!["MLEKO", "UHT"]);
        assert!(d.uht);
        assert_eq!(d.percent, Some(dec!(3.2)));
        assert_eq!(d.volume, Some(Measure { magnitude: dec!(1), unit: Unit::L }));
        // Dot and comma decimal marks agree.
        assert_eq!(d, normalize_description("mleko uht 3.2 1l"));
    }

    #[test]
    fn multiplicative_pack() {
        let d = normalize_description("Jogurt 4x100g owocowy");
        assert_eq!(d.weight, Some(Measure { magnitude: dec!(400), unit: Unit::G }));
        assert_eq!(d.tokens, vec!["JOGURT", "OWOCOWY"]);
    }

    #[test]
    fn explicit_percent() {
        let d = normalize_description("Smietana 30% 400ML");
        assert_eq!(d.percent, Some(dec!(30)));
        assert_eq!(d.volume, Some(Measure { magnitude: dec!(400), unit: Unit::Ml }));
        assert_eq!(d.tokens, vec!["SMIETANA"]);
    }

    #[test]
    fn canonical_milli_equates_notations() {
        let a = normalize_description("sok 0.5L").volume.unwrap();
        let b = normalize_description("sok 500ml").volume.unwrap();
        assert_eq!(a.canonical_milli(), b.canonical_milli());
        assert_ne!(a, b); // units as written are preserved
    }

    #[test]
    fn idempotent_on_token_text() {
        for raw in [
            "WodaZrodlanaPromocja5L",
            "Mleko UHT 3,2 1L",
            "Jogurt 4x100g owocowy",
            "Ser żółty Gouda 250 G",
            "PROMOCJA 24 sztuki",
        ] {
            let once = normalize_description(raw);
            let twice = normalize_description(&once.token_text());
            assert_eq!(once.tokens, twice.tokens, "{raw}");
            assert_eq!(once.uht, twice.uht, "{raw}");
        }
    }

    #[test]
    fn special_characters_removed() {
        let d = normalize_description("Masło extra! (osełka) 82,5%");
        assert_eq!(d.percent, Some(dec!(82.5)));
        assert!(d.tokens.iter().all(|t| t.chars().all(char::is_alphanumeric)));
    }
}
