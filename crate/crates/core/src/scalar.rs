//! Floating point abstraction for the numeric kernels.
//!
//! The propagation math, the learners and the detectors are written against
//! this trait so they can run on `f32` or `f64`; the pipeline itself uses the
//! `f64` aliases exported from the crate root.

use rand::distributions::uniform::SampleUniform;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + SampleUniform
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and configuration values.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Serde helper for scalar fields that may legitimately be non-finite
/// (e.g. thresholds before calibration). JSON has no `inf` literal, so such
/// values go through a string fallback.
pub mod maybe_infinite {
    use super::Scalar;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr<F> {
        Num(F),
        Text(String),
    }

    pub fn serialize<F: Scalar, S: Serializer>(v: &F, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::<F>::Text(format!("{v}")).serialize(s)
        }
    }

    pub fn deserialize<'de, F: Scalar, D: Deserializer<'de>>(d: D) -> Result<F, D::Error> {
        match Repr::<F>::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => {
                let v: f64 = t.parse().map_err(serde::de::Error::custom)?;
                Ok(F::from_f64_lossy(v))
            }
        }
    }
}
