//! Occupancy laws that weight the nested-set mixture.
//!
//! After `k` rounds, each choosing a uniform `m`-subset of `[n]`, let `A` be
//! the number of indices ever chosen and `E = n - A` the number never chosen.
//! The `k`-step law of the top-`m` shuffle is the mixture of the uniform laws
//! on `supp(B_a)` with weights `μ(a) = P(A = a)`.
//!
//! Everything here is exact. Weights are kept as integer numerators over one
//! common denominator so that downstream prefix sums never need a gcd.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exact;

/// Stirling number of the second kind `{k over a}`.
pub fn stirling2(k: usize, a: usize) -> BigInt {
    if a > k {
        return BigInt::zero();
    }
    // row-by-row recurrence {i, j} = {i-1, j-1} + j {i-1, j}
    let mut row = vec![BigInt::zero(); a + 1];
    row[0] = BigInt::one();
    for i in 1..=k {
        for j in (1..=a.min(i)).rev() {
            let prev = std::mem::take(&mut row[j]);
            row[j] = &row[j - 1] + prev * j;
        }
        row[0] = BigInt::zero();
    }
    row.swap_remove(a)
}

/// Generalized Stirling number
/// `S_m(k,a) = (1/a!) Σ_j (-1)^j C(a,j) ((a-j)_m)^k`, zero for `a < m`.
pub fn gen_stirling(k: usize, a: usize, m: usize) -> Result<BigRational> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "generalized Stirling numbers need k >= 1 and m >= 1, got k={k}, m={m}"
        )));
    }
    if a < m {
        return Ok(BigRational::zero());
    }
    let sum = alternating_sum(a, &falling_powers(a, m, k));
    Ok(BigRational::new(sum, exact::factorial(a)))
}

/// `((x)_m)^k` for `x = 0..=top`.
fn falling_powers(top: usize, m: usize, k: usize) -> Vec<BigInt> {
    (0..=top)
        .map(|x| exact::pow(&exact::falling(x, m), k))
        .collect()
}

/// `Σ_j (-1)^j C(a,j) powers[a-j]`.
fn alternating_sum(a: usize, powers: &[BigInt]) -> BigInt {
    let binom = exact::binomial_row(a);
    let mut sum = BigInt::zero();
    for (j, c) in binom.iter().enumerate() {
        let term = &powers[a - j];
        if term.is_zero() {
            continue;
        }
        if j % 2 == 0 {
            sum += c * term;
        } else {
            sum -= c * term;
        }
    }
    sum
}

/// Exact pmf over `a ∈ {0, …, n}`, stored as `numerators[a] / denominator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyWeights {
    numerators: Vec<BigInt>,
    denominator: BigInt,
}

impl OccupancyWeights {
    /// Builds weights from numerators over a shared positive denominator.
    pub fn from_numerators(numerators: Vec<BigInt>, denominator: BigInt) -> Result<Self> {
        if numerators.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if !denominator.is_positive() {
            return Err(Error::InvalidParameter("denominator must be positive".into()));
        }
        if numerators.iter().any(Signed::is_negative) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: BigInt = numerators.iter().sum();
        if total != denominator {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {}, not 1",
                BigRational::new(total, denominator)
            )));
        }
        Ok(OccupancyWeights {
            numerators,
            denominator,
        })
    }

    /// Builds weights from arbitrary rationals indexed by `a`.
    pub fn from_rationals(weights: &[BigRational]) -> Result<Self> {
        let denominator = weights
            .iter()
            .fold(BigInt::one(), |acc, w| num_integer::Integer::lcm(&acc, w.denom()));
        let numerators = weights
            .iter()
            .map(|w| w.numer() * (&denominator / w.denom()))
            .collect();
        Self::from_numerators(numerators, denominator)
    }

    /// Point mass at `a` occupied.
    pub fn point_mass(n: usize, a: usize) -> Result<Self> {
        if a > n {
            return Err(Error::OutOfRange { index: a, max: n });
        }
        let mut numerators = vec![BigInt::zero(); n + 1];
        numerators[a] = BigInt::one();
        Ok(OccupancyWeights {
            numerators,
            denominator: BigInt::one(),
        })
    }

    pub fn n(&self) -> usize {
        self.numerators.len() - 1
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.numerators
    }

    pub fn denominator(&self) -> &BigInt {
        &self.denominator
    }

    /// `μ(a)`, reduced.
    pub fn weight(&self, a: usize) -> BigRational {
        BigRational::new(self.numerators[a].clone(), self.denominator.clone())
    }

    pub fn weights(&self) -> Vec<BigRational> {
        (0..=self.n()).map(|a| self.weight(a)).collect()
    }

    /// `P(E = u) = μ(n - u)`.
    pub fn empty_mass(&self, u: usize) -> BigRational {
        self.weight(self.n() - u)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.weights().iter().map(exact::to_f64).collect()
    }

    /// Exact sum of the weights; always one for a constructed value.
    pub fn total(&self) -> BigRational {
        BigRational::new(self.numerators.iter().sum(), self.denominator.clone())
    }

    /// Largest `u` with `μ(n - u) > 0`.
    pub fn max_empty(&self) -> usize {
        let n = self.n();
        (0..=n)
            .rev()
            .find(|&u| !self.numerators[n - u].is_zero())
            .expect("weights sum to one")
    }
}

/// `n` indices, `k` rounds of uniform `m`-subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SamplingParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

impl SamplingParams {
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        if n == 0 || m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= m <= n, got n={n}, m={m}"
            )));
        }
        Ok(SamplingParams { n, m, k })
    }

    /// Window time `⌊(n/m)(log n + c)⌋`, clamped at zero.
    pub fn window_time(n: usize, m: usize, c: f64) -> usize {
        let t = (n as f64 / m as f64) * ((n as f64).ln() + c);
        if t <= 0.0 {
            0
        } else {
            t.floor() as usize
        }
    }
}

/// Occupied-count law for `k` uniform balls in `n` boxes:
/// `μ_k(a) = C(n,a) {k over a} a! / n^k`.
pub fn mu_balls(n: usize, k: usize) -> Result<OccupancyWeights> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let numerators = (0..=n)
        .map(|a| exact::binomial(n, a) * stirling2(k, a) * exact::factorial(a))
        .collect();
    OccupancyWeights::from_numerators(numerators, exact::pow(&BigInt::from(n), k))
}

/// Occupied-count law after `k` rounds of uniform `m`-subsets, by inclusion–exclusion:
/// `μ(a) = C(n,a) Σ_j (-1)^j C(a,j) ((a-j)_m)^k / ((n)_m)^k`.
pub fn mu_subsets(params: SamplingParams) -> Result<OccupancyWeights> {
    let SamplingParams { n, m, k } = SamplingParams::new(params.n, params.m, params.k)?;
    if k == 0 {
        return OccupancyWeights::point_mass(n, 0);
    }
    let powers = falling_powers(n, m, k);
    let binom_n = exact::binomial_row(n);
    let numerators = (0..=n)
        .map(|a| &binom_n[a] * alternating_sum(a, &powers))
        .collect();
    OccupancyWeights::from_numerators(numerators, powers[n].clone())
}

/// `μ(a)` alone, by the same inclusion–exclusion sum.
pub fn mu_subsets_at(params: SamplingParams, a: usize) -> Result<BigRational> {
    let SamplingParams { n, m, k } = SamplingParams::new(params.n, params.m, params.k)?;
    if a > n {
        return Err(Error::OutOfRange { index: a, max: n });
    }
    if k == 0 {
        return Ok(if a == 0 { BigRational::one() } else { BigRational::zero() });
    }
    let mut powers = falling_powers(a, m, k);
    let denominator = exact::pow(&exact::falling(n, m), k);
    powers.truncate(a + 1);
    Ok(BigRational::new(
        exact::binomial(n, a) * alternating_sum(a, &powers),
        denominator,
    ))
}

/// Occupancy laws for `k = 0, 1, 2, …` by the forward recursion of the
/// ever-chosen count: from `a` occupied, a fresh `m`-subset adds `j` new
/// indices with probability `C(n-a, j) C(a, m-j) / C(n, m)`.
#[derive(Debug, Clone)]
pub struct OccupancyChain {
    n: usize,
    m: usize,
    transitions: Vec<Vec<BigInt>>,
    step_denominator: BigInt,
    current: OccupancyWeights,
}

impl OccupancyChain {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        SamplingParams::new(n, m, 0)?;
        let transitions = (0..=n)
            .map(|a| {
                (0..=m)
                    .map(|j| exact::binomial(n - a, j) * exact::binomial(a, m - j))
                    .collect()
            })
            .collect();
        Ok(OccupancyChain {
            n,
            m,
            transitions,
            step_denominator: exact::binomial(n, m),
            current: OccupancyWeights::point_mass(n, 0)?,
        })
    }

    /// Law at the current round.
    pub fn current(&self) -> &OccupancyWeights {
        &self.current
    }

    /// Advances one round.
    pub fn advance(&mut self) {
        let mut next = vec![BigInt::zero(); self.n + 1];
        for (a, w) in self.current.numerators.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for j in 0..=self.m.min(self.n - a) {
                let t = &self.transitions[a][j];
                if !t.is_zero() {
                    next[a + j] += w * t;
                }
            }
        }
        self.current = OccupancyWeights {
            numerators: next,
            denominator: &self.current.denominator * &self.step_denominator,
        };
    }
}

/// Floating-point occupancy law by the same forward recursion. All terms are
/// nonnegative so this is stable, but it is approximate; it exists for `n`
/// beyond the reach of exact arithmetic.
pub fn mu_subsets_f64(params: SamplingParams) -> Result<Vec<f64>> {
    let SamplingParams { n, m, k } = SamplingParams::new(params.n, params.m, params.k)?;
    let ln_choose = |a: usize, b: usize| -> f64 {
        if b > a {
            f64::NEG_INFINITY
        } else {
            ln_factorial(a) - ln_factorial(b) - ln_factorial(a - b)
        }
    };
    let ln_total = ln_choose(n, m);
    let trans: Vec<Vec<f64>> = (0..=n)
        .map(|a| {
            (0..=m)
                .map(|j| (ln_choose(n - a, j) + ln_choose(a, m - j) - ln_total).exp())
                .collect()
        })
        .collect();
    let mut law = vec![0.0; n + 1];
    law[0] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; n + 1];
        for (a, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for j in 0..=m.min(n - a) {
                next[a + j] += w * trans[a][j];
            }
        }
        law = next;
    }
    Ok(law)
}

/// `E[(E)_u] = (n)_u ((n-u)_m / (n)_m)^k`, the factorial moments of the
/// never-chosen count.
pub fn factorial_moment(params: SamplingParams, u: usize) -> Result<BigRational> {
    let SamplingParams { n, m, k } = SamplingParams::new(params.n, params.m, params.k)?;
    if u > n {
        return Err(Error::OutOfRange { index: u, max: n });
    }
    let ratio = BigRational::new(exact::falling(n - u, m), exact::falling(n, m));
    Ok(BigRational::from(exact::falling(n, u)) * num_traits::pow(ratio, k))
}

pub(crate) fn ln_factorial(u: usize) -> f64 {
    (2..=u).map(|i| (i as f64).ln()).sum()
}

/// Poisson pmf `e^{-λ} λ^u / u!`.
pub fn poisson_pmf(lambda: f64, u: usize) -> f64 {
    if u == 0 {
        return (-lambda).exp();
    }
    (-lambda + u as f64 * lambda.ln() - ln_factorial(u)).exp()
}

/// Simulates the subset-sampling model and returns the never-chosen count `E`.
pub fn sample_occupancy<R: Rng + ?Sized>(params: SamplingParams, rng: &mut R) -> Result<usize> {
    let SamplingParams { n, m, k } = SamplingParams::new(params.n, params.m, params.k)?;
    let mut chosen = vec![false; n];
    let mut occupied = 0;
    for _ in 0..k {
        for i in index::sample(rng, n, m) {
            if !chosen[i] {
                chosen[i] = true;
                occupied += 1;
            }
        }
    }
    Ok(n - occupied)
}
