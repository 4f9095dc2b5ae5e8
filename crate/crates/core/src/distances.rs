//! Exact distances from uniform for nested-set mixtures.
//!
//! For a mixture `Q̃_μ = Σ_a μ(a) Q̃_a` the density against the uniform law
//! depends on `x` only through `L_p(x)`:
//!
//! ```text
//! Q̃_μ(x) / U(x) = S_μ(L_p(x)),   S_μ(ℓ) = Σ_{u ≤ ℓ} μ(n-u) u! p^u.
//! ```
//!
//! Every distance is therefore a sum over the `n + 1` levels of `L_p`
//! weighted by the uniform level masses `U{L_p = ℓ}`. Rational-valued
//! distances (TV, separation, `L^∞`, χ²) are returned exactly; KL and `L^q`
//! go through floating point only at the final logarithm/power.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact;
use crate::group::GroupParams;
use crate::occupancy::{mu_subsets, OccupancyWeights, SamplingParams};

/// A mixture weight vector attached to a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureSpec {
    group: GroupParams,
    mu: OccupancyWeights,
}

impl MixtureSpec {
    pub fn new(group: GroupParams, mu: OccupancyWeights) -> Result<Self> {
        if mu.n() != group.n() {
            return Err(Error::DimensionMismatch {
                expected: group.n(),
                expected_p: group.p(),
                got: mu.n(),
                got_p: group.p(),
            });
        }
        Ok(MixtureSpec { group, mu })
    }

    /// The `k`-step law of the top-`m` shuffle.
    pub fn top_m(group: GroupParams, m: usize, k: usize) -> Result<Self> {
        let mu = mu_subsets(SamplingParams::new(group.n(), m, k)?)?;
        Self::new(group, mu)
    }

    pub fn group(&self) -> GroupParams {
        self.group
    }

    pub fn mu(&self) -> &OccupancyWeights {
        &self.mu
    }

    /// `r_μ = max{u : μ(n-u) > 0}`.
    pub fn r_mu(&self) -> usize {
        self.mu.max_empty()
    }
}

/// `S_μ(0), …, S_μ(n)`, stored over the weights' common denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LikelihoodProfile {
    numerators: Vec<BigInt>,
    denominator: BigInt,
}

impl LikelihoodProfile {
    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn value(&self, level: usize) -> BigRational {
        BigRational::new(self.numerators[level].clone(), self.denominator.clone())
    }

    pub fn values(&self) -> Vec<BigRational> {
        (0..self.len()).map(|l| self.value(l)).collect()
    }

    /// `S_μ(ℓ) - 1`, exactly.
    pub fn excess(&self, level: usize) -> BigRational {
        BigRational::new(
            &self.numerators[level] - &self.denominator,
            self.denominator.clone(),
        )
    }

    fn exceeds_one(&self, level: usize) -> bool {
        self.numerators[level] > self.denominator
    }

    fn is_one(&self, level: usize) -> bool {
        self.numerators[level] == self.denominator
    }

    /// `ln S_μ(ℓ)`; `-∞` when the ratio is zero.
    fn ln_value(&self, level: usize) -> f64 {
        if self.numerators[level].is_zero() {
            return f64::NEG_INFINITY;
        }
        exact::ln_rational(&self.value(level))
    }
}

pub fn likelihood_profile(spec: &MixtureSpec) -> LikelihoodProfile {
    let n = spec.group.n();
    let p = BigInt::from(spec.group.p());
    let nums = spec.mu.numerators();
    let mut scale = BigInt::one(); // u! p^u
    let mut acc = BigInt::zero();
    let mut numerators = Vec::with_capacity(n + 1);
    for u in 0..=n {
        if u > 0 {
            scale = scale * u * &p;
        }
        acc += &nums[n - u] * &scale;
        numerators.push(acc.clone());
    }
    LikelihoodProfile {
        numerators,
        denominator: spec.mu.denominator().clone(),
    }
}

/// `1 / (ℓ! p^ℓ)` as a rational.
fn uniform_tail(level: usize, p: usize) -> BigRational {
    BigRational::new(
        BigInt::one(),
        exact::factorial(level) * exact::pow(&BigInt::from(p), level),
    )
}

/// `U{L_p = ℓ}`.
pub fn u_level_mass(g: GroupParams, level: usize) -> Result<BigRational> {
    g.check_level(level)?;
    let tail = uniform_tail(level, g.p());
    if level == g.n() {
        return Ok(tail);
    }
    Ok(tail - uniform_tail(level + 1, g.p()))
}

/// `ln U{L_p = ℓ}`, `-∞` for the empty level (`ℓ = 0`, `p = 1`).
fn ln_u_level_mass(g: GroupParams, level: usize) -> f64 {
    let p = g.p() as f64;
    let ln_tail = -(crate::occupancy::ln_factorial(level) + level as f64 * p.ln());
    if level == g.n() {
        return ln_tail;
    }
    let keep = 1.0 - 1.0 / ((level as f64 + 1.0) * p);
    ln_tail + keep.ln()
}

/// Exact law of `L_p` under the mixture: `U{L_p = ℓ} · S_μ(ℓ)`.
pub fn level_law(spec: &MixtureSpec) -> Vec<BigRational> {
    let profile = likelihood_profile(spec);
    (0..=spec.group.n())
        .map(|l| u_level_mass(spec.group, l).expect("level in range") * profile.value(l))
        .collect()
}

/// Total variation together with the pivot level `w_μ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TvResult {
    pub tv: BigRational,
    /// `min{ℓ : S_μ(ℓ) > 1}`; `None` when the mixture is uniform.
    pub w_mu: Option<usize>,
}

pub fn tv_exact(spec: &MixtureSpec) -> TvResult {
    tv_from_profile(spec, &likelihood_profile(spec))
}

fn tv_from_profile(spec: &MixtureSpec, profile: &LikelihoodProfile) -> TvResult {
    let n = spec.group.n();
    let Some(w) = (0..=n).find(|&l| profile.exceeds_one(l)) else {
        debug_assert!((lowest_level(spec.group)..=n).all(|l| profile.is_one(l)));
        return TvResult {
            tv: BigRational::zero(),
            w_mu: None,
        };
    };
    debug_assert!(w >= 1);
    let nums = spec.mu.numerators();
    let den = spec.mu.denominator();
    // mass of μ(n-u) for u < w
    let head: BigInt = (0..w).map(|u| &nums[n - u]).sum();
    let scale = exact::factorial(w) * exact::pow(&BigInt::from(spec.group.p()), w);
    let numer = (den - head) * &scale + (&profile.numerators[w - 1] - den);
    TvResult {
        tv: BigRational::new(numer, den * scale),
        w_mu: Some(w),
    }
}

/// Lowest level of `L_p` carrying uniform mass.
fn lowest_level(g: GroupParams) -> usize {
    if g.p() == 1 {
        1.min(g.n())
    } else {
        0
    }
}

/// Separation `1 - min_x Q̃_μ(x)/U(x) = 1 - S_μ(ℓ_min)`.
pub fn sep_exact(spec: &MixtureSpec) -> BigRational {
    let profile = likelihood_profile(spec);
    -profile.excess(lowest_level(spec.group))
}

/// `‖Q̃_μ/U - 1‖_∞ = S_μ(n) - 1`.
pub fn linfty_exact(spec: &MixtureSpec) -> BigRational {
    likelihood_profile(spec).excess(spec.group.n())
}

/// Whether `L_p(x) = level` attains the `L^∞` distance.
pub fn attains_linfty(spec: &MixtureSpec, level: usize) -> Result<bool> {
    spec.group.check_level(level)?;
    let profile = likelihood_profile(spec);
    Ok(profile.excess(level).abs() == profile.excess(spec.group.n()))
}

/// `Σ_ℓ U{L_p = ℓ} Φ(S_μ(ℓ))`.
///
/// `phi` must be finite at every attained likelihood ratio; a non-finite
/// value is reported as an error.
pub fn phi_functional<F>(spec: &MixtureSpec, phi: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let profile = likelihood_profile(spec);
    let g = spec.group;
    let mut total = 0.0;
    for level in lowest_level(g)..=g.n() {
        let at = exact::to_f64(&profile.value(level));
        let v = phi(at);
        if !v.is_finite() {
            return Err(Error::NonFinite { at });
        }
        total += exact::to_f64(&u_level_mass(g, level)?) * v;
    }
    Ok(total)
}

/// `‖Q̃_μ/U - 1‖_{L^q(U)}^q`, the q-th power.
pub fn lq_exact(spec: &MixtureSpec, q: f64) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("need finite q >= 1, got {q}")));
    }
    let profile = likelihood_profile(spec);
    Ok(lq_from_profile(spec.group, &profile, q))
}

fn lq_from_profile(g: GroupParams, profile: &LikelihoodProfile, q: f64) -> f64 {
    (lowest_level(g)..=g.n())
        .filter(|&l| !profile.is_one(l))
        .map(|l| {
            let ln_dev = exact::ln_rational(&profile.excess(l).abs());
            (ln_u_level_mass(g, l) + q * ln_dev).exp()
        })
        .sum()
}

/// χ² distance by the double sum `Σ_{u,v} μ(n-u) μ(n-v) min(u,v)! p^{min(u,v)} - 1`.
pub fn chi2_exact(spec: &MixtureSpec) -> BigRational {
    let n = spec.group.n();
    let p = BigInt::from(spec.group.p());
    let nums = spec.mu.numerators();
    // pairs with min(u,v) = u: the diagonal once, u < v twice
    let mut tail = BigInt::zero(); // Σ_{v > u} μ(n-v)
    let mut tails = vec![BigInt::zero(); n + 1];
    for u in (0..=n).rev() {
        tails[u] = tail.clone();
        tail += &nums[n - u];
    }
    let mut scale = BigInt::one();
    let mut acc = BigInt::zero();
    for u in 0..=n {
        if u > 0 {
            scale = scale * u * &p;
        }
        let mu_u = &nums[n - u];
        if mu_u.is_zero() {
            continue;
        }
        acc += mu_u * &scale * (mu_u + &tails[u] * 2u32);
    }
    let den = spec.mu.denominator();
    BigRational::new(acc, den * den) - BigRational::one()
}

/// Relative entropy `D(Q̃_μ ‖ U) = Σ_ℓ U{L_p = ℓ} S_μ(ℓ) log S_μ(ℓ)`.
pub fn kl_exact(spec: &MixtureSpec) -> f64 {
    kl_from_profile(spec.group, &likelihood_profile(spec))
}

fn kl_from_profile(g: GroupParams, profile: &LikelihoodProfile) -> f64 {
    (lowest_level(g)..=g.n())
        .filter(|&l| !profile.numerators[l].is_zero() && !profile.is_one(l))
        .map(|l| {
            let ln_s = profile.ln_value(l);
            (ln_u_level_mass(g, l) + ln_s).exp() * ln_s
        })
        .sum()
}

/// `L^q` value for one exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqValue {
    pub q: f64,
    pub value: f64,
}

/// Every distance of one measure from uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub tv: BigRational,
    pub sep: BigRational,
    pub linfty: BigRational,
    pub chi2: BigRational,
    pub kl: f64,
    /// q-th powers of the `L^q(U)` norms, in request order.
    pub lq: Vec<LqValue>,
    pub w_mu: Option<usize>,
}

impl DistanceReport {
    /// Evaluates every distance for a mixture through the `L_p` reduction.
    pub fn compute(spec: &MixtureSpec, qs: &[f64]) -> Result<Self> {
        if let Some(&q) = qs.iter().find(|&&q| !(q >= 1.0 && q.is_finite())) {
            return Err(Error::InvalidParameter(format!("need finite q >= 1, got {q}")));
        }
        let g = spec.group;
        let profile = likelihood_profile(spec);
        let TvResult { tv, w_mu } = tv_from_profile(spec, &profile);
        Ok(DistanceReport {
            tv,
            sep: -profile.excess(lowest_level(g)),
            linfty: profile.excess(g.n()),
            chi2: chi2_exact(spec),
            kl: kl_from_profile(g, &profile),
            lq: qs
                .iter()
                .map(|&q| LqValue {
                    q,
                    value: lq_from_profile(g, &profile, q),
                })
                .collect(),
            w_mu,
        })
    }

    pub fn lq_value(&self, q: f64) -> Option<f64> {
        self.lq.iter().find(|v| v.q == q).map(|v| v.value)
    }
}
