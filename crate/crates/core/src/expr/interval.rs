//! Interval extension of expression evaluation.
//!
//! Encloses the range of an expression over a box. Every arithmetic step is
//! widened outward by a few ulps so the enclosure stays sound under IEEE
//! rounding; transcendental results get a slightly larger margin since libm
//! is faithful but not correctly rounded.

use super::{sigmoid, softplus, Expr};

/// A closed, finite interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

/// Errors from interval construction or evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntervalError {
    #[error("interval bounds must be finite and ordered: [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("division by an interval containing zero")]
    DivisionStraddlesZero,
    #[error("variable x{0} has no interval in a box of dimension {1}")]
    VarOutOfRange(usize, usize),
}

fn next_up_n(x: f64, n: u32) -> f64 {
    let mut x = x;
    for _ in 0..n {
        x = x.next_up();
    }
    x
}

fn next_down_n(x: f64, n: u32) -> f64 {
    let mut x = x;
    for _ in 0..n {
        x = x.next_down();
    }
    x
}

impl Interval {
    /// Construct `[lo, hi]`; both bounds must be finite with `lo <= hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Interval, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(IntervalError::BadBounds(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Result<Interval, IntervalError> {
        Interval::new(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn widen(lo: f64, hi: f64, ulps: u32) -> Interval {
        // Overflow saturates to +-MAX. That keeps bounds finite and is
        // conservative: a saturated bound can never certify an atom true
        // or false, it only forces further splitting.
        let (lo, hi) = if lo.is_nan() || hi.is_nan() {
            (-f64::MAX, f64::MAX)
        } else {
            (lo.clamp(-f64::MAX, f64::MAX), hi.clamp(-f64::MAX, f64::MAX))
        };
        Interval {
            lo: next_down_n(lo, ulps).max(-f64::MAX),
            hi: next_up_n(hi, ulps).min(f64::MAX),
        }
    }

    fn add(self, o: Interval) -> Interval {
        Interval::widen(self.lo + o.lo, self.hi + o.hi, 1)
    }

    fn sub(self, o: Interval) -> Interval {
        Interval::widen(self.lo - o.hi, self.hi - o.lo, 1)
    }

    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    fn mul(self, o: Interval) -> Interval {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Interval::widen(lo, hi, 1)
    }

    fn div(self, o: Interval) -> Result<Interval, IntervalError> {
        if o.lo <= 0.0 && o.hi >= 0.0 {
            return Err(IntervalError::DivisionStraddlesZero);
        }
        let c = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Interval::widen(lo, hi, 1))
    }

    /// Integer power with the even-power tightening: an even power of an
    /// interval straddling zero has lower bound exactly 0, which the naive
    /// product form loses.
    fn powi(self, k: u32) -> Interval {
        if k == 0 {
            return Interval { lo: 1.0, hi: 1.0 };
        }
        let pl = self.lo.powi(k as i32);
        let ph = self.hi.powi(k as i32);
        if k % 2 == 1 {
            return Interval::widen(pl, ph, 2);
        }
        if self.lo >= 0.0 {
            Interval::widen(pl, ph, 2)
        } else if self.hi <= 0.0 {
            Interval::widen(ph, pl, 2)
        } else {
            Interval::widen(0.0, pl.max(ph), 2)
        }
    }

    fn monotone(self, f: impl Fn(f64) -> f64) -> Interval {
        Interval::widen(f(self.lo), f(self.hi), 3)
    }

    fn sin(self) -> Interval {
        use std::f64::consts::{FRAC_PI_2, TAU};
        if self.width() >= TAU {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        // peak at pi/2 + 2k*pi inside the interval forces hi = 1,
        // trough at -pi/2 + 2k*pi forces lo = -1
        let k_hi = ((self.lo - FRAC_PI_2) / TAU).ceil();
        if FRAC_PI_2 + k_hi * TAU <= self.hi {
            hi = 1.0;
        }
        let k_lo = ((self.lo + FRAC_PI_2) / TAU).ceil();
        if -FRAC_PI_2 + k_lo * TAU <= self.hi {
            lo = -1.0;
        }
        Interval::widen(lo.max(-1.0), hi.min(1.0), 3)
    }

    fn cos(self) -> Interval {
        use std::f64::consts::{PI, TAU};
        if self.width() >= TAU {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let mut lo = self.lo.cos().min(self.hi.cos());
        let mut hi = self.lo.cos().max(self.hi.cos());
        let k_hi = (self.lo / TAU).ceil();
        if k_hi * TAU <= self.hi {
            hi = 1.0;
        }
        let k_lo = ((self.lo - PI) / TAU).ceil();
        if PI + k_lo * TAU <= self.hi {
            lo = -1.0;
        }
        Interval::widen(lo.max(-1.0), hi.min(1.0), 3)
    }
}

impl Expr {
    /// Sound range enclosure of the expression over `box_`: for every point
    /// `p` in the box, `eval(p)` lies inside the returned interval.
    pub fn interval_eval(&self, box_: &[Interval]) -> Result<Interval, IntervalError> {
        match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(i) => box_
                .get(*i)
                .copied()
                .ok_or(IntervalError::VarOutOfRange(*i, box_.len())),
            Expr::Neg(a) => Ok(a.interval_eval(box_)?.neg()),
            Expr::Add(a, b) => Ok(a.interval_eval(box_)?.add(b.interval_eval(box_)?)),
            Expr::Sub(a, b) => Ok(a.interval_eval(box_)?.sub(b.interval_eval(box_)?)),
            Expr::Mul(a, b) => Ok(a.interval_eval(box_)?.mul(b.interval_eval(box_)?)),
            Expr::Div(a, b) => a.interval_eval(box_)?.div(b.interval_eval(box_)?),
            Expr::Pow(a, k) => Ok(a.interval_eval(box_)?.powi(*k)),
            Expr::Sin(a) => Ok(a.interval_eval(box_)?.sin()),
            Expr::Cos(a) => Ok(a.interval_eval(box_)?.cos()),
            Expr::Exp(a) => Ok(a.interval_eval(box_)?.monotone(f64::exp)),
            Expr::Tanh(a) => Ok(a.interval_eval(box_)?.monotone(f64::tanh)),
            Expr::Sigmoid(a) => Ok(a.interval_eval(box_)?.monotone(sigmoid)),
            Expr::Softplus(a) => Ok(a.interval_eval(box_)?.monotone(softplus)),
        }
    }
}
