use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact C99-style hexadecimal rendering (`%a`) of an `f64`.
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    let frac = if digits.is_empty() {
        String::new()
    } else {
        format!(".{digits}")
    };
    format!("{sign}0x{lead}{frac}p{exp:+}")
}

/// Inverse of [`format_hex`].
pub fn parse_hex(s: &str) -> Result<f64> {
    let bad = || Error::Format(format!("invalid hexadecimal float `{s}`"));
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x").ok_or_else(bad)?;
    let (mant, exp) = rest.split_once('p').ok_or_else(bad)?;
    let exp: i64 = exp.parse().map_err(|_| bad())?;
    let (lead, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if frac.len() > 13 || !matches!(lead, "0" | "1") {
        return Err(bad());
    }
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len()))
    };
    let bits = match lead {
        "1" => {
            let biased = exp + 1023;
            if !(1..=2046).contains(&biased) {
                return Err(bad());
            }
            ((biased as u64) << 52) | frac_bits
        }
        _ if frac_bits == 0 && exp == 0 => 0,
        _ if exp == -1022 => frac_bits,
        _ => return Err(bad()),
    };
    let x = f64::from_bits(bits);
    Ok(if negative { -x } else { x })
}

/// `f64` serialized as its exact hexadecimal string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HexF64(pub f64);

impl Serialize for HexF64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_hex(self.0))
    }
}

impl<'de> Deserialize<'de> for HexF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_hex(&s).map(HexF64).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<f64>` fields stored as hexadecimal strings.
pub mod hex_vec {
    use super::HexF64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| HexF64(x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<HexF64>::deserialize(d)?
            .into_iter()
            .map(|h| h.0)
            .collect())
    }
}

/// Serde adapter for a single `f64` field stored as a hexadecimal string.
pub mod hex {
    use super::HexF64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        HexF64(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(HexF64::deserialize(d)?.0)
    }
}
