//! Brute-force ground truth over the enumerated group.
//!
//! Laws are dense vectors of exact rationals indexed by the deterministic
//! enumeration order of [`crate::group::enumerate`]. Nothing in this module
//! uses the mixture formulas except [`mixture_certify`], which compares
//! against them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distances::{likelihood_profile, DistanceReport, LqValue, MixtureSpec};
use crate::error::{Error, Result};
use crate::exact;
use crate::group::{
    self, element_index, inverse_unchecked, l_stat_unchecked, multiply_unchecked, ColoredPermutation,
    DeckStepper, GroupParams, DEFAULT_ENUMERATION_CAP,
};

/// Default largest group order the oracle will convolve over.
pub const DEFAULT_CONVOLUTION_CAP: u128 = 10_000;

/// Size limits for the brute-force computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Largest group order that may be enumerated.
    pub enumeration_cap: u128,
    /// Largest group order that may be convolved over.
    pub convolution_cap: u128,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            convolution_cap: DEFAULT_CONVOLUTION_CAP,
        }
    }
}

/// An exact probability law on the enumerated group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDistribution {
    group: GroupParams,
    mass: Vec<BigRational>,
}

impl GroupDistribution {
    pub fn group(&self) -> GroupParams {
        self.group
    }

    pub fn mass(&self) -> &[BigRational] {
        &self.mass
    }

    pub fn total(&self) -> BigRational {
        self.mass.iter().sum()
    }

    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|m| !m.is_zero()).count()
    }

    fn support(&self) -> impl Iterator<Item = (usize, &BigRational)> {
        self.mass.iter().enumerate().filter(|(_, m)| !m.is_zero())
    }
}

/// The enumerated group together with the oracle's size limits.
#[derive(Debug, Clone)]
pub struct Oracle {
    group: GroupParams,
    config: OracleConfig,
    elements: Vec<ColoredPermutation>,
}

impl Oracle {
    pub fn new(group: GroupParams, config: OracleConfig) -> Result<Self> {
        let elements = group::enumerate(group, config.enumeration_cap)?.collect();
        Ok(Oracle {
            group,
            config,
            elements,
        })
    }

    pub fn group(&self) -> GroupParams {
        self.group
    }

    pub fn elements(&self) -> &[ColoredPermutation] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    fn index(&self, x: &ColoredPermutation) -> usize {
        element_index(x, self.group.p())
    }

    fn check_same_group(&self, m: &GroupDistribution) -> Result<()> {
        if m.group != self.group {
            return Err(Error::DimensionMismatch {
                expected: self.group.n(),
                expected_p: self.group.p(),
                got: m.group.n(),
                got_p: m.group.p(),
            });
        }
        Ok(())
    }

    fn build<F: FnMut(&ColoredPermutation) -> BigRational>(&self, f: F) -> GroupDistribution {
        GroupDistribution {
            group: self.group,
            mass: self.elements.iter().map(f).collect(),
        }
    }

    /// Point mass at the identity.
    pub fn delta_e(&self) -> GroupDistribution {
        let mut mass = vec![BigRational::zero(); self.order()];
        mass[0] = BigRational::one();
        GroupDistribution {
            group: self.group,
            mass,
        }
    }

    pub fn uniform(&self) -> GroupDistribution {
        let u = BigRational::new(BigInt::one(), BigInt::from(self.order()));
        self.build(|_| u.clone())
    }

    /// Uniform law on `A_u`.
    pub fn uniform_on_nested_set(&self, u: usize) -> Result<GroupDistribution> {
        let size = self.group.nested_set_size(u)?;
        let w = BigRational::new(BigInt::one(), size);
        Ok(self.build(|x| {
            if l_stat_unchecked(x) >= u {
                w.clone()
            } else {
                BigRational::zero()
            }
        }))
    }

    /// `Q^(m)`: uniform on `supp(B_m) = A_{n-m}`.
    pub fn one_step_law(&self, m: usize) -> Result<GroupDistribution> {
        let n = self.group.n();
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        self.uniform_on_nested_set(n - m)
    }

    /// Reversed law `x ↦ M(x^{-1})`.
    pub fn reversed(&self, m: &GroupDistribution) -> Result<GroupDistribution> {
        self.check_same_group(m)?;
        let p = self.group.p();
        Ok(self.build(|x| m.mass[self.index(&inverse_unchecked(x, p))].clone()))
    }

    /// `(M * N)(z) = Σ_u M(z u^{-1}) N(u)`, the law of `GH` for independent `G ~ M`, `H ~ N`.
    pub fn convolve(&self, m: &GroupDistribution, n: &GroupDistribution) -> Result<GroupDistribution> {
        self.check_same_group(m)?;
        self.check_same_group(n)?;
        let order = self.order() as u128;
        if order > self.config.convolution_cap {
            return Err(Error::BudgetExceeded {
                what: "convolution",
                needed: order,
                cap: self.config.convolution_cap,
            });
        }
        let p = self.group.p();
        let left: Vec<(usize, &BigRational)> = m.support().collect();
        let right: Vec<(usize, &BigRational)> = n.support().collect();
        // one partial law per right atom, summed afterwards
        let partials: Vec<Vec<(usize, BigRational)>> = right
            .par_iter()
            .map(|&(j, nu)| {
                let u = &self.elements[j];
                left.iter()
                    .map(|&(i, mx)| {
                        let z = multiply_unchecked(&self.elements[i], u, p);
                        (self.index(&z), mx * nu)
                    })
                    .collect()
            })
            .collect();
        let mut mass = vec![BigRational::zero(); self.order()];
        for (z, v) in partials.into_iter().flatten() {
            mass[z] += v;
        }
        Ok(GroupDistribution {
            group: self.group,
            mass,
        })
    }

    /// `M^{*k}`, with `M^{*0} = δ_e`.
    pub fn power(&self, m: &GroupDistribution, k: usize) -> Result<GroupDistribution> {
        self.check_same_group(m)?;
        let mut acc = self.delta_e();
        for _ in 0..k {
            acc = self.convolve(&acc, m)?;
        }
        Ok(acc)
    }

    /// Every distance from uniform by direct summation over the group.
    ///
    /// The exact fields are exact; `kl` and `lq` are floating-point sums of
    /// per-element terms. `w_mu` is not defined for a general law and is
    /// left empty.
    pub fn direct_distances(&self, m: &GroupDistribution, qs: &[f64]) -> Result<DistanceReport> {
        self.check_same_group(m)?;
        if let Some(&q) = qs.iter().find(|&&q| !(q >= 1.0 && q.is_finite())) {
            return Err(Error::InvalidParameter(format!("need finite q >= 1, got {q}")));
        }
        let order = BigInt::from(self.order());
        let u = BigRational::new(BigInt::one(), order.clone());
        let ratios: Vec<BigRational> = m.mass.iter().map(|v| v * &order).collect();
        let one = BigRational::one();

        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let tv = m.mass.iter().map(|v| (v - &u).abs()).sum::<BigRational>() * half;
        let min_ratio = ratios.iter().min().expect("nonempty group").clone();
        let linfty = ratios.iter().map(|r| (r - &one).abs()).max().expect("nonempty group");
        let chi2 = ratios
            .iter()
            .map(|r| {
                let d = r - &one;
                &d * &d
            })
            .sum::<BigRational>()
            * &u;

        let u_f = 1.0 / self.order() as f64;
        let kl = m
            .mass
            .iter()
            .zip(&ratios)
            .filter(|(v, _)| !v.is_zero())
            .map(|(v, r)| exact::to_f64(v) * exact::ln_rational(r))
            .sum();
        let lq = qs
            .iter()
            .map(|&q| LqValue {
                q,
                value: ratios
                    .iter()
                    .map(|r| u_f * exact::to_f64(&(r - &one).abs()).powf(q))
                    .sum(),
            })
            .collect();
        Ok(DistanceReport {
            tv,
            sep: one - min_ratio,
            linfty,
            chi2,
            kl,
            lq,
            w_mu: None,
        })
    }

    /// `L_p` of every element, in enumeration order.
    pub fn levels(&self) -> Vec<usize> {
        self.elements.iter().map(l_stat_unchecked).collect()
    }
}

/// One disagreement found by [`mixture_certify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub k: usize,
    /// Enumeration index of the offending element, when the check is atom-wise.
    pub element: Option<usize>,
    pub check: &'static str,
    pub expected: String,
    pub actual: String,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "k={} {}", self.k, self.check)?;
        if let Some(e) = self.element {
            write!(f, " element={e}")?;
        }
        write!(f, ": expected {}, got {}", self.expected, self.actual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyReport {
    pub group: GroupParams,
    pub m: usize,
    pub k_max: usize,
    /// Number of individual comparisons made.
    pub comparisons: usize,
    pub mismatches: Vec<Mismatch>,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Relative tolerance for floating-point distances (KL, `L^q`) in certification.
pub const FLOAT_REL_TOL: f64 = 1e-12;

pub(crate) fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Certifies the occupancy mixture against brute force for `k = 0..=k_max`.
///
/// For every `k`: the convolution power equals `Σ_u P_k(u) · uniform(A_u)`
/// atom by atom; its density against uniform equals `S_μ(L_p(x))` at every
/// element; the law is normalized; and each formula distance equals its
/// direct sum (exactly for rationals, within [`FLOAT_REL_TOL`] for KL and
/// `L^q`). TV is additionally checked against `max_ℓ (Q(A_ℓ) - U(A_ℓ))`.
pub fn mixture_certify(
    group: GroupParams,
    m: usize,
    k_max: usize,
    qs: &[f64],
    config: OracleConfig,
) -> Result<CertifyReport> {
    let oracle = Oracle::new(group, config)?;
    let n = group.n();
    let step = oracle.one_step_law(m)?;
    let levels = oracle.levels();
    let order = BigInt::from(oracle.order());
    let nested: Vec<BigInt> = (0..=n)
        .map(|u| group.nested_set_size(u))
        .collect::<Result<_>>()?;

    let mut report = CertifyReport {
        group,
        m,
        k_max,
        comparisons: 0,
        mismatches: Vec::new(),
    };
    let mut current = oracle.delta_e();
    for k in 0..=k_max {
        if k > 0 {
            current = oracle.convolve(&current, &step)?;
        }
        let spec = MixtureSpec::top_m(group, m, k)?;
        let mu = spec.mu();
        let profile = likelihood_profile(&spec);
        let mut push = |check, element, expected: String, actual: String| {
            report.mismatches.push(Mismatch {
                k,
                element,
                check,
                expected,
                actual,
            })
        };

        let total = current.total();
        report.comparisons += 1;
        if !total.is_one() {
            push("normalization", None, "1".into(), total.to_string());
        }

        for (i, (mass, &level)) in current.mass.iter().zip(&levels).enumerate() {
            let mixture: BigRational = (0..=level)
                .map(|u| mu.empty_mass(u) / BigRational::from(nested[u].clone()))
                .sum();
            report.comparisons += 2;
            if &mixture != mass {
                push("mixture atom", Some(i), mixture.to_string(), mass.to_string());
            }
            let ratio = mass * &order;
            let s = profile.value(level);
            if ratio != s {
                push("likelihood ratio", Some(i), s.to_string(), ratio.to_string());
            }
        }

        let formula = DistanceReport::compute(&spec, qs)?;
        let direct = oracle.direct_distances(&current, qs)?;
        let exact_pairs = [
            ("tv", &formula.tv, &direct.tv),
            ("sep", &formula.sep, &direct.sep),
            ("linfty", &formula.linfty, &direct.linfty),
            ("chi2", &formula.chi2, &direct.chi2),
        ];
        for (name, f, d) in exact_pairs {
            report.comparisons += 1;
            if f != d {
                push(name, None, d.to_string(), f.to_string());
            }
        }
        report.comparisons += 1;
        if !close(formula.kl, direct.kl, FLOAT_REL_TOL) {
            push("kl", None, direct.kl.to_string(), formula.kl.to_string());
        }
        for (f, d) in formula.lq.iter().zip(&direct.lq) {
            report.comparisons += 1;
            if !close(f.value, d.value, FLOAT_REL_TOL) {
                push("lq", None, format!("q={} {}", d.q, d.value), f.value.to_string());
            }
        }

        // TV as the largest excess mass of a nested set
        let nested_tv = (0..=n)
            .map(|l| {
                let q_mass: BigRational = current
                    .mass
                    .iter()
                    .zip(&levels)
                    .filter(|(_, &lv)| lv >= l)
                    .map(|(v, _)| v)
                    .sum();
                q_mass - BigRational::new(nested[l].clone(), order.clone())
            })
            .max()
            .expect("levels nonempty");
        report.comparisons += 1;
        if nested_tv != formula.tv {
            push("tv nested sets", None, nested_tv.to_string(), formula.tv.to_string());
        }
    }
    Ok(report)
}

/// Number of walks simulated per independent random stream.
const SIM_CHUNK: usize = 4096;

/// Runs `reps` walks of `k` steps from the identity and counts the endpoint's
/// `L_p`. Chunk `i` of the repetitions uses stream `i` of a ChaCha8 generator
/// seeded with `seed`, so results do not depend on the thread count.
pub fn simulate_chain(
    group: GroupParams,
    m: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    DeckStepper::new(m, group)?;
    let chunks = reps.div_ceil(SIM_CHUNK);
    let per_chunk: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut stepper = DeckStepper::new(m, group).expect("validated above");
            let mut counts = vec![0u64; group.n() + 1];
            let len = SIM_CHUNK.min(reps - chunk * SIM_CHUNK);
            for _ in 0..len {
                let mut deck = ColoredPermutation::identity(group);
                for _ in 0..k {
                    stepper.step(&mut deck, &mut rng);
                }
                counts[l_stat_unchecked(&deck)] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; group.n() + 1];
    for c in per_chunk {
        for (acc, v) in counts.iter_mut().zip(c) {
            *acc += v;
        }
    }
    Ok(counts)
}

/// `½ Σ_ℓ |empirical(ℓ) - target(ℓ)|`.
///
/// Because the density against uniform is a function of `L_p`, the TV
/// distance of a mixture from uniform equals the TV distance between the
/// two laws of `L_p`; with the uniform level masses as `target` this is the
/// plug-in estimate of the chain's distance from stationarity.
pub fn plug_in_tv(counts: &[u64], target: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(target)
        .map(|(&c, &t)| (c as f64 / total as f64 - t).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::u_level_mass;
    use crate::occupancy::mu_balls;

    fn g(n: usize, p: usize) -> GroupParams {
        GroupParams::new(n, p).unwrap()
    }

    fn oracle(n: usize, p: usize) -> Oracle {
        Oracle::new(g(n, p), OracleConfig::default()).unwrap()
    }

    #[test]
    fn one_step_laws() {
        let o = oracle(3, 2);
        let q1 = o.one_step_law(1).unwrap();
        assert_eq!(q1.support_size(), 6);
        let sixth = BigRational::new(BigInt::one(), BigInt::from(6));
        assert!(q1.mass().iter().all(|v| v.is_zero() || *v == sixth));
        assert_eq!(o.one_step_law(2).unwrap().support_size(), 24);
        assert_eq!(o.one_step_law(3).unwrap(), o.uniform());
        assert!(o.one_step_law(0).is_err());
        assert!(o.one_step_law(4).is_err());
    }

    #[test]
    fn convolution_basics() {
        let o = oracle(3, 2);
        let q = o.one_step_law(1).unwrap();
        assert_eq!(o.convolve(&q, &o.delta_e()).unwrap(), q);
        assert_eq!(o.convolve(&o.delta_e(), &q).unwrap(), q);
        assert_eq!(o.power(&q, 0).unwrap(), o.delta_e());
        assert_eq!(o.power(&o.one_step_law(3).unwrap(), 1).unwrap(), o.uniform());
        for m in 1..=3 {
            let step = o.one_step_law(m).unwrap();
            assert_eq!(o.convolve(&o.uniform(), &step).unwrap(), o.uniform());
        }
    }

    #[test]
    fn convolution_is_associative() {
        let o = oracle(3, 2);
        let a = o.one_step_law(1).unwrap();
        let b = o.reversed(&o.one_step_law(2).unwrap()).unwrap();
        let c = o.convolve(&a, &b).unwrap();
        let left = o.convolve(&o.convolve(&a, &b).unwrap(), &c).unwrap();
        let right = o.convolve(&a, &o.convolve(&b, &c).unwrap()).unwrap();
        assert_eq!(left, right);
        assert!(left.total().is_one());
    }

    #[test]
    fn top_to_random_powers_match_ball_mixture() {
        let o = oracle(3, 2);
        let q = o.one_step_law(1).unwrap();
        let mut current = o.delta_e();
        for k in 0..=6 {
            let mu = mu_balls(3, k).unwrap();
            let mut mixture = vec![BigRational::zero(); o.order()];
            for u in 0..=3 {
                let part = o.uniform_on_nested_set(u).unwrap();
                for (acc, v) in mixture.iter_mut().zip(part.mass()) {
                    *acc += mu.empty_mass(u) * v;
                }
            }
            assert_eq!(current.mass(), &mixture[..], "k={k}");
            current = o.convolve(&current, &q).unwrap();
        }
    }

    #[test]
    fn direct_distances_of_extremes() {
        let o = oracle(3, 2);
        let u = o.direct_distances(&o.uniform(), &[1.0, 2.5]).unwrap();
        assert!(u.tv.is_zero() && u.sep.is_zero() && u.linfty.is_zero() && u.chi2.is_zero());
        assert_eq!(u.kl, 0.0);
        assert!(u.lq.iter().all(|v| v.value == 0.0));
        let d = o.direct_distances(&o.delta_e(), &[]).unwrap();
        assert_eq!(d.tv, BigRational::one() - BigRational::new(BigInt::one(), BigInt::from(48)));
        assert!(d.sep.is_one());
        assert_eq!(d.linfty, BigRational::from(BigInt::from(47)));
    }

    #[test]
    fn time_reversal_invariance() {
        let o = oracle(3, 2);
        for m in 1..=2 {
            let q = o.one_step_law(m).unwrap();
            let qr = o.reversed(&q).unwrap();
            let mut fwd = o.delta_e();
            let mut bwd = o.delta_e();
            for _ in 0..=5 {
                let a = o.direct_distances(&fwd, &[1.0, 3.0]).unwrap();
                let b = o.direct_distances(&bwd, &[1.0, 3.0]).unwrap();
                assert_eq!((&a.tv, &a.sep, &a.linfty, &a.chi2), (&b.tv, &b.sep, &b.linfty, &b.chi2));
                assert!(close(a.kl, b.kl, 1e-12));
                fwd = o.convolve(&fwd, &q).unwrap();
                bwd = o.convolve(&bwd, &qr).unwrap();
            }
        }
    }

    #[test]
    fn certify_small_groups() {
        for (n, p, m) in [(3, 2, 1), (3, 3, 2), (4, 1, 1), (4, 1, 3), (2, 2, 2)] {
            let report = mixture_certify(g(n, p), m, 5, &[1.0, 2.0, 1.5], OracleConfig::default()).unwrap();
            assert!(report.passed(), "{:?}", report.mismatches);
            assert!(report.comparisons > 0);
        }
    }

    #[test]
    fn budgets() {
        let tight = OracleConfig {
            enumeration_cap: 100,
            convolution_cap: 5,
        };
        assert!(matches!(Oracle::new(g(4, 2), tight), Err(Error::BudgetExceeded { .. })));
        let o = Oracle::new(g(3, 1), tight).unwrap();
        let q = o.one_step_law(1).unwrap();
        assert!(matches!(o.convolve(&q, &q), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn simulation_is_reproducible() {
        let gp = g(5, 2);
        let a = simulate_chain(gp, 2, 7, 10_000, 42).unwrap();
        let b = simulate_chain(gp, 2, 7, 10_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().sum::<u64>(), 10_000);
        let start = simulate_chain(gp, 1, 0, 100, 1).unwrap();
        assert_eq!(start[5], 100);
    }

    #[test]
    fn plug_in_tv_of_exact_law() {
        let gp = g(4, 2);
        let target: Vec<f64> = (0..=4).map(|l| exact::to_f64(&u_level_mass(gp, l).unwrap())).collect();
        assert!(plug_in_tv(&[0, 0, 0, 0, 7], &target) > 0.99);
    }
}
