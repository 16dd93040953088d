//! A scalar abstraction used to count floating-point operations.
//!
//! The hot closed-form paths (the subset sweep for the honest-response
//! utility and the `eps2` derivation it calls) are written against [`Real`],
//! so the same code runs on plain `f64` and on [`CountingReal`], which tallies
//! every arithmetic operation and elementary function call in a thread-local
//! counter.

use std::cell::Cell;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn exp_m1(self) -> Self;

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
}

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

/// `f64` wrapper that counts each operation performed on it.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CountingReal(pub f64);

impl CountingReal {
    /// Resets this thread's counter to zero.
    pub fn reset() {
        OPS.with(|c| c.set(0));
    }

    /// Operations counted on this thread since the last reset.
    pub fn count() -> u64 {
        OPS.with(|c| c.get())
    }

    #[inline]
    fn tick() {
        OPS.with(|c| c.set(c.get() + 1));
    }
}

macro_rules! counted_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for CountingReal {
            type Output = Self;
            #[inline]
            fn $m(self, rhs: Self) -> Self {
                Self::tick();
                CountingReal(self.0 $op rhs.0)
            }
        }
    };
}

counted_binop!(Add, add, +);
counted_binop!(Sub, sub, -);
counted_binop!(Mul, mul, *);
counted_binop!(Div, div, /);

impl Neg for CountingReal {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::tick();
        CountingReal(-self.0)
    }
}

impl Real for CountingReal {
    fn from_f64(v: f64) -> Self {
        CountingReal(v)
    }
    fn to_f64(self) -> f64 {
        self.0
    }
    fn exp(self) -> Self {
        Self::tick();
        CountingReal(self.0.exp())
    }
    fn ln(self) -> Self {
        Self::tick();
        CountingReal(self.0.ln())
    }
    fn ln_1p(self) -> Self {
        Self::tick();
        CountingReal(self.0.ln_1p())
    }
    fn exp_m1(self) -> Self {
        Self::tick();
        CountingReal(self.0.exp_m1())
    }
    fn min(self, other: Self) -> Self {
        Self::tick();
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }
}
