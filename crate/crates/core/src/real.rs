//! Serialization of reals with 17 significant digits.

use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Deserialize, Deserializer, Serializer};
use serde_json::value::RawValue;

use crate::data::{fmt_real, NormalizationInfo};

fn raw(x: f64) -> Box<RawValue> {
    RawValue::from_string(fmt_real(x)).expect("finite reals format as JSON numbers")
}

pub fn ser<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_some(&raw(*x))
    } else {
        s.serialize_none()
    }
}

pub fn ser_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&raw(x))?;
    }
    seq.end()
}

pub fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Box<RawValue>>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| raw(x)).collect())
        .collect();
    s.collect_seq(rows)
}

pub fn ser_norm<S: Serializer>(n: &NormalizationInfo, s: S) -> Result<S::Ok, S::Error> {
    let scales: Vec<Box<RawValue>> = n.axis_scales.iter().map(|&x| raw(x)).collect();
    let mut st = s.serialize_struct("NormalizationInfo", 2)?;
    st.serialize_field("axis_scales", &scales)?;
    st.serialize_field("value_scale", &raw(n.value_scale))?;
    st.end()
}

/// Finite reals as numbers, infinity as `null`.
pub mod opt_finite {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::ser(x, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
