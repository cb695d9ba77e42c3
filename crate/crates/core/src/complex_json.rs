//! `{ "re": …, "im": … }` encoding of complex numbers.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct Pair {
    re: f64,
    im: f64,
}

pub mod one {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Pair { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = Pair::deserialize(d)?;
        Ok(Complex64::new(p.re, p.im))
    }
}

pub mod many {
    use super::*;

    pub fn serialize<S: Serializer>(z: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(z.iter().map(|z| Pair { re: z.re, im: z.im }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let v = Vec::<Pair>::deserialize(d)?;
        Ok(v.into_iter().map(|p| Complex64::new(p.re, p.im)).collect())
    }
}
