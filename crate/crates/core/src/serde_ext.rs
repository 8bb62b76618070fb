//! Serialization of extended reals: JSON has no infinities, so non-finite
//! values are written as the strings "inf", "-inf" and "nan".

use serde::Serializer;

pub fn extended<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn extended_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => extended(v, s),
        None => s.serialize_none(),
    }
}
