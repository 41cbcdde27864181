//! Small floating-point helpers: stable log-sum-exp, compensated summation,
//! and a minimal double-double type.

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    /// Exact for `|t| < 2^106`.
    pub fn from_i128(t: i128) -> Self {
        let hi = t as f64;
        let lo = (t - hi as i128) as f64;
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn mul_f64(self, c: f64) -> Self {
        let (p, e) = two_prod(self.hi, c);
        let e = e + self.lo * c;
        let (hi, lo) = two_sum(p, e);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Multiplies by `2^k` exactly (barring overflow and underflow).
    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self { hi: self.hi * f, lo: self.lo * f }
    }

    /// `exp` to roughly 30 significant digits.
    pub fn exp(self) -> Self {
        const REDUCTION: i32 = 5;
        if self.hi > 709.0 {
            return Self { hi: f64::INFINITY, lo: 0.0 };
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN_2.hi).round();
        let r = (self - LN_2.mul_f64(k)).scale_pow2(-REDUCTION);
        // Taylor series; |r| < 0.011 so 16 terms reach double-double accuracy
        let mut term = Self::from_f64(1.0);
        let mut sum = Self::from_f64(1.0);
        for n in 1..=16 {
            term = term * r / Self::from_f64(n as f64);
            sum = sum + term;
        }
        for _ in 0..REDUCTION {
            sum = sum * sum;
        }
        sum.scale_pow2(k as i32)
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(self.hi.sqrt());
        }
        let s = self.hi.sqrt();
        let (sq, e) = two_prod(s, s);
        let correction = ((self.hi - sq) - e + self.lo) / (2.0 * s);
        let (hi, lo) = two_sum(s, correction);
        Self { hi, lo }
    }

    /// Smallest integer not below the represented value, as an `f64`.
    pub fn ceil(self) -> f64 {
        if self.hi.fract() == 0.0 {
            if self.lo > 0.0 {
                self.hi + 1.0
            } else {
                self.hi
            }
        } else {
            self.hi.ceil()
        }
    }

    /// Natural log by Newton refinement of the `f64` estimate.
    pub fn ln(self) -> Self {
        let mut y = Self::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::from_f64(1.0);
        }
        y
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = Self;

    fn add(self, other: Self) -> Self {
            let (s, e) = two_sum(self.hi, other.hi);
            let e = e + self.lo + other.lo;
            let (hi, lo) = two_sum(s, e);
            Self { hi, lo }
    }
}

impl std::ops::Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, other: Self) -> Self {
            self + -other
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, other: Self) -> Self {
            let (p, e) = two_prod(self.hi, other.hi);
            let e = e + self.hi * other.lo + self.lo * other.hi;
            let (hi, lo) = two_sum(p, e);
            Self { hi, lo }
    }
}

impl std::ops::Div for DoubleDouble {
    type Output = Self;

    fn div(self, other: Self) -> Self {
            let q1 = self.hi / other.hi;
            let r = self - other.mul_f64(q1);
            let q2 = r.hi / other.hi;
            let r = r - other.mul_f64(q2);
            let q3 = r.hi / other.hi;
            let (hi, lo) = two_sum(q1, q2);
            Self { hi, lo } + Self::from_f64(q3)
    }
}

impl std::ops::Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
            Self { hi: -self.hi, lo: -self.lo }
    }
}

/// `ln 2` as a double-double.
const LN_2: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };
