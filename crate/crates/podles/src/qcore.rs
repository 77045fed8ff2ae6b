//! q-number arithmetic and exact half-integer bookkeeping.
//!
//! Every formula index (l, m, N, r, K) in the library flows through
//! [`HalfInt`] so level arithmetic never touches floating point.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A half-integer stored as its doubled value, so l = 3/2 is `twice = 3`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct HalfInt {
    pub twice: i64,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };
    pub const ONE: HalfInt = HalfInt { twice: 2 };

    pub fn new(twice: i64) -> Self {
        HalfInt { twice }
    }

    pub fn from_int(n: i64) -> Self {
        HalfInt { twice: 2 * n }
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt { twice: self.twice.abs() }
    }

    pub fn to_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Floor of the difference self - other, as a plain integer.
    pub fn floor_diff(self, other: HalfInt) -> i64 {
        (self.twice - other.twice).div_euclid(2)
    }

    /// Parse "2", "-3/2", "0.5", "-1.5".
    pub fn parse(s: &str) -> Option<HalfInt> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n: i64 = num.trim().parse().ok()?;
            let d: i64 = den.trim().parse().ok()?;
            if d == 2 {
                return Some(HalfInt::new(n));
            }
            if d == 1 {
                return Some(HalfInt::from_int(n));
            }
            return None;
        }
        if let Ok(n) = s.parse::<i64>() {
            return Some(HalfInt::from_int(n));
        }
        let x: f64 = s.parse().ok()?;
        let t = x * 2.0;
        if (t - t.round()).abs() < 1e-9 {
            Some(HalfInt::new(t.round() as i64))
        } else {
            None
        }
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt::new(self.twice + rhs.twice)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt::new(self.twice - rhs.twice)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt::new(-self.twice)
    }
}

impl Add<i64> for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: i64) -> HalfInt {
        HalfInt::new(self.twice + 2 * rhs)
    }
}

impl Sub<i64> for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: i64) -> HalfInt {
        HalfInt::new(self.twice - 2 * rhs)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error("q must lie strictly in (0,1), got {0}")]
    BadQ(f64),
    #[error("s must be nonnegative, got {0}")]
    BadS(f64),
}

/// Global deformation context: q in (0,1), plus the optional generic-sphere
/// family parameter s >= 0.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct DeformationParams {
    q: f64,
    s: Option<f64>,
}

impl DeformationParams {
    pub fn new(q: f64) -> Result<Self, ParamError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ParamError::BadQ(q));
        }
        Ok(DeformationParams { q, s: None })
    }

    pub fn with_s(q: f64, s: f64) -> Result<Self, ParamError> {
        let mut p = Self::new(q)?;
        if !(s >= 0.0) {
            return Err(ParamError::BadS(s));
        }
        p.s = Some(s);
        Ok(p)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn s(&self) -> Option<f64> {
        self.s
    }

    /// [x] = (q^x - q^{-x}) / (q - q^{-1}).
    pub fn qnumber(&self, x: f64) -> f64 {
        (self.q.powf(x) - self.q.powf(-x)) / (self.q - 1.0 / self.q)
    }

    pub fn qnumber_h(&self, x: HalfInt) -> f64 {
        self.qnumber(x.to_f64())
    }

    /// q^x for exact half-integer x; qpower(0) = 1 exactly.
    pub fn qpower(&self, x: HalfInt) -> f64 {
        if x.twice == 0 {
            1.0
        } else {
            self.q.powf(x.to_f64())
        }
    }

    pub fn qpow(&self, x: f64) -> f64 {
        self.q.powf(x)
    }
}
