//! Nonnegative quantities carried as (sign, log-magnitude).

use std::fmt;
use std::ops::{Div, Mul};

use serde::{Serialize, Serializer};

/// A nonnegative real stored through its logarithm; zero is `log = -inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue {
    log_abs: f64,
    sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_abs: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogValue = LogValue {
        log_abs: 0.0,
        sign: 1,
    };

    pub fn from_log(log_abs: f64) -> Self {
        if log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { log_abs, sign: 1 }
        }
    }

    /// Panics on negative or NaN input; every quantity carried here is nonnegative.
    pub fn from_value(v: f64) -> Self {
        assert!(v >= 0.0, "LogValue holds nonnegative values, got {v}");
        if v == 0.0 {
            Self::ZERO
        } else {
            Self {
                log_abs: v.ln(),
                sign: 1,
            }
        }
    }

    pub fn ln(&self) -> f64 {
        self.log_abs
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Linear value; `inf` when it overflows an f64.
    pub fn value(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.log_abs.exp()
        }
    }

    pub fn powf(&self, e: f64) -> Self {
        if self.is_zero() {
            if e > 0.0 {
                Self::ZERO
            } else {
                Self::ONE
            }
        } else {
            Self::from_log(self.log_abs * e)
        }
    }

    /// Sum of two nonnegative values, evaluated without leaving log space.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.log_abs >= other.log_abs {
            (self.log_abs, other.log_abs)
        } else {
            (other.log_abs, self.log_abs)
        };
        Self::from_log(hi + (lo - hi).exp().ln_1p())
    }

    /// Ratio `self / other`; `None` when `other` is zero.
    pub fn checked_div(&self, other: &Self) -> Option<Self> {
        if other.is_zero() {
            None
        } else if self.is_zero() {
            Some(Self::ZERO)
        } else {
            Some(Self::from_log(self.log_abs - other.log_abs))
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero() || rhs.is_zero() {
            LogValue::ZERO
        } else {
            LogValue::from_log(self.log_abs + rhs.log_abs)
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;

    /// Panics when dividing by zero.
    fn div(self, rhs: LogValue) -> LogValue {
        self.checked_div(&rhs).expect("division by a zero LogValue")
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", self.log_abs)
    }
}

/// Serializes as `{"log": <real or "-inf">, "value": <real or "overflow">}`.
impl Serialize for LogValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("LogValue", 2)?;
        if self.is_zero() {
            st.serialize_field("log", "-inf")?;
        } else {
            st.serialize_field("log", &self.log_abs)?;
        }
        let v = self.value();
        if v.is_finite() {
            st.serialize_field("value", &v)?;
        } else {
            st.serialize_field("value", "overflow")?;
        }
        st.end()
    }
}
