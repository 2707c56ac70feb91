//! CSV/JSON plumbing shared by the exporters.

use std::io::Write;
use std::str::FromStr;

use serde::Serializer;

/// Floats are written with 17 significant digits (`d.dddddddddddddddde±x`).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// serde helper: 17-significant-digit number, `null` when non-finite.
pub fn sig17<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        let n = serde_json::Number::from_str(&fmt17(*v)).map_err(serde::ser::Error::custom)?;
        serde::Serialize::serialize(&n, s)
    } else {
        s.serialize_none()
    }
}

pub fn sig17_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Sig17(*x))?;
    }
    seq.end()
}

pub fn sig17_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => sig17(x, s),
        None => s.serialize_none(),
    }
}

/// Newtype carrying the 17-digit serialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sig17(pub f64);

impl serde::Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        sig17(&self.0, s)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// 64-bit FNV-1a digest, hex encoded; stable across platforms and releases.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn write_csv_row<W: Write>(w: &mut W, fields: &[String]) -> std::io::Result<()> {
    writeln!(w, "{}", fields.join(","))
}
