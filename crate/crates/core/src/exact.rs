//! Big-integer combinatorics and conversions between exact and floating values.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn factorial(n: usize) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// Falling factorial `(x)_m = x (x-1) ... (x-m+1)`, zero when `x < m`.
pub fn falling(x: usize, m: usize) -> BigInt {
    if x < m {
        return BigInt::zero();
    }
    (x - m + 1..=x).fold(BigInt::one(), |acc, i| acc * i)
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Row `C(n, 0), ..., C(n, n)`.
pub fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut cur = BigInt::one();
    row.push(cur.clone());
    for j in 0..n {
        cur = cur * (n - j) / (j + 1);
        row.push(cur.clone());
    }
    row
}

pub fn pow(base: &BigInt, exp: usize) -> BigInt {
    num_traits::pow(base.clone(), exp)
}

pub fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Natural log of a positive big integer, accurate to double precision at any size.
pub fn ln_big(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive());
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::INFINITY, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational. Uses `ln_1p` near one to avoid cancellation.
pub fn ln_rational(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let dev = r - BigRational::one();
    let small = to_f64(&dev);
    if small.abs() < 0.5 {
        return small.ln_1p();
    }
    ln_big(r.numer()) - ln_big(r.denom())
}
