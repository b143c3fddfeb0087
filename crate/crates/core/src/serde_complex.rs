//! Complex numbers as explicit `{"re": .., "im": ..}` objects.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReIm {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ReIm {
    fn from(c: Complex64) -> Self {
        ReIm { re: c.re, im: c.im }
    }
}

impl From<ReIm> for Complex64 {
    fn from(p: ReIm) -> Self {
        Complex64::new(p.re, p.im)
    }
}

pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    ReIm::from(*c).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    ReIm::deserialize(d).map(Complex64::from)
}
