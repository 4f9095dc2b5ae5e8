//! Limiting cutoff-window profiles.
//!
//! At time `⌊(n/m)(log n + c)⌋` the never-chosen count is asymptotically
//! Poisson with mean `λ = e^{-c}`, and the likelihood ratio on level `ℓ`
//! converges to `s(ℓ) = e^{-λ} Σ_{u ≤ ℓ} r^u` with `r = pλ`. The profiles
//! below are functionals of `s` against the limiting level masses
//! `a_ℓ = 1/(ℓ! p^ℓ) - 1/((ℓ+1)! p^{ℓ+1})`.
//!
//! Sums of `r^u` are carried in log space so that very negative `c` (huge
//! `λ`) neither overflows nor underflows.

use crate::error::{Error, Result};
use crate::occupancy::ln_factorial;

/// A window parameter together with its derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub c: f64,
    pub p: usize,
    pub lambda: f64,
    pub r: f64,
    pub w_star: usize,
}

impl ProfilePoint {
    pub fn new(c: f64, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("p must be positive".into()));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be finite, got {c}")));
        }
        let lambda = (-c).exp();
        let r = p as f64 * lambda;
        Ok(ProfilePoint {
            c,
            p,
            lambda,
            r,
            w_star: w_star_scan(lambda, r),
        })
    }
}

/// Truncation policy for the infinite level series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

impl SeriesControl {
    fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_terms == 0 {
            return Err(Error::InvalidParameter(format!(
                "need tol > 0 and max_terms > 0, got {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// Limit of the `L^∞(U)` distance, finite only for `r < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinftyLimit {
    Finite(f64),
    Infinite,
}

impl LinftyLimit {
    pub fn finite(self) -> Option<f64> {
        match self {
            LinftyLimit::Finite(v) => Some(v),
            LinftyLimit::Infinite => None,
        }
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln s(ℓ)` for `ℓ = 0, 1, 2, …`.
struct LnPartialSums {
    lambda: f64,
    ln_r: f64,
    level: usize,
    ln_sum: f64,
}

impl LnPartialSums {
    fn new(lambda: f64, r: f64) -> Self {
        LnPartialSums {
            lambda,
            ln_r: r.ln(),
            level: 0,
            ln_sum: f64::NEG_INFINITY,
        }
    }
}

impl Iterator for LnPartialSums {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.ln_sum = ln_add_exp(self.ln_sum, self.level as f64 * self.ln_r);
        self.level += 1;
        Some(self.ln_sum - self.lambda)
    }
}

/// First `ℓ` with `s(ℓ) > 1`.
fn w_star_scan(lambda: f64, r: f64) -> usize {
    LnPartialSums::new(lambda, r)
        .position(|ln_s| ln_s > 0.0)
        .expect("partial sums eventually exceed one")
}

/// `w*(c, p)` by scanning the partial sums `s(ℓ)`.
pub fn w_star(c: f64, p: usize) -> Result<usize> {
    Ok(ProfilePoint::new(c, p)?.w_star)
}

/// `w*` from `⌊log(1 + e^λ (r-1)) / log r⌋`, or `⌊e^λ⌋` when `r = 1`.
pub fn w_star_closed_form(c: f64, p: usize) -> Result<usize> {
    let pt = ProfilePoint::new(c, p)?;
    let (lambda, r) = (pt.lambda, pt.r);
    if r == 1.0 {
        return Ok(lambda.exp().floor() as usize);
    }
    // log(1 + e^λ (r - 1)), kept finite for large λ
    let numer = if r > 1.0 {
        lambda + (r - 1.0).ln() + ((-lambda).exp() / (r - 1.0)).ln_1p()
    } else {
        (lambda.exp() * (r - 1.0)).ln_1p()
    };
    Ok((numer / r.ln()).floor() as usize)
}

/// `ln a_ℓ`, `-∞` for the empty level `ℓ = 0, p = 1`.
fn ln_level_mass(level: usize, p: usize) -> f64 {
    let pf = p as f64;
    let keep = 1.0 - 1.0 / ((level as f64 + 1.0) * pf);
    -ln_factorial(level) - level as f64 * pf.ln() + keep.ln()
}

fn ln_poisson(lambda: f64, u: usize) -> f64 {
    -lambda + u as f64 * lambda.ln() - ln_factorial(u)
}

/// `ln(1 - s)` for `s = e^{ln_s} ≤ 1`.
fn ln_one_minus(ln_s: f64) -> f64 {
    (-ln_s.exp_m1()).ln()
}

/// `ln(1 - f_p(c))`, accurate even when `1 - f_p(c)` is far below machine epsilon.
pub fn ln_one_minus_f(c: f64, p: usize) -> Result<f64> {
    let pt = ProfilePoint::new(c, p)?;
    let w = pt.w_star;
    let ln_cdf = (0..w)
        .map(|u| ln_poisson(pt.lambda, u))
        .fold(f64::NEG_INFINITY, ln_add_exp);
    let ln_s = LnPartialSums::new(pt.lambda, pt.r).nth(w - 1).expect("infinite");
    let ln_corr = ln_one_minus(ln_s) - ln_factorial(w) - w as f64 * (p as f64).ln();
    Ok(ln_add_exp(ln_cdf, ln_corr))
}

/// `P(Poisson(λ) ≥ w)`.
fn poisson_upper_tail(lambda: f64, w: usize) -> f64 {
    if lambda < w as f64 {
        // terms decrease geometrically past w
        let mut total = 0.0;
        let mut u = w;
        loop {
            let t = ln_poisson(lambda, u).exp();
            total += t;
            if t <= total * 1e-18 || t == 0.0 {
                return total;
            }
            u += 1;
        }
    }
    let ln_cdf = (0..w)
        .map(|u| ln_poisson(lambda, u))
        .fold(f64::NEG_INFINITY, ln_add_exp);
    -ln_cdf.exp_m1()
}

/// Total-variation profile
/// `f_p(c) = 1 - e^{-λ} Σ_{u<w*} λ^u/u! + (e^{-λ} Σ_{u<w*} r^u - 1) / (w*! p^{w*})`.
pub fn f_profile(c: f64, p: usize) -> Result<f64> {
    let pt = ProfilePoint::new(c, p)?;
    let w = pt.w_star;
    let tail = poisson_upper_tail(pt.lambda, w);
    let ln_s = LnPartialSums::new(pt.lambda, pt.r).nth(w - 1).expect("infinite");
    let corr = (ln_one_minus(ln_s) - ln_factorial(w) - w as f64 * (p as f64).ln()).exp();
    Ok((tail - corr).clamp(0.0, 1.0))
}

/// Separation profile: `1 - e^{-λ}(1 + λ)` for `p = 1`, `1 - e^{-λ}` otherwise.
pub fn sep_profile(c: f64, p: usize) -> Result<f64> {
    let pt = ProfilePoint::new(c, p)?;
    let lambda = pt.lambda;
    let base = -(-lambda).exp_m1();
    Ok(if p == 1 {
        base - lambda * (-lambda).exp()
    } else {
        base
    })
}

/// Below this distance from `r = 1` the χ² profile uses its `r = 1` form.
pub const CHI2_R_ONE_BAND: f64 = 1e-8;

/// χ² profile `g_p(c)` in closed form.
pub fn chi2_profile(c: f64, p: usize) -> Result<f64> {
    let pt = ProfilePoint::new(c, p)?;
    let (lambda, r) = (pt.lambda, pt.r);
    if (r - 1.0).abs() <= CHI2_R_ONE_BAND {
        return Ok((2.0 * lambda + 1.0) * (-lambda).exp() - 1.0);
    }
    Ok((r + 1.0) / (r - 1.0) * (-lambda * (2.0 - r)).exp() - 2.0 / (r - 1.0) * (-lambda).exp() - 1.0)
}

/// Evaluates `Σ_ℓ a_ℓ · term(s(ℓ))` with a rigorous tail bound.
///
/// `term(ln s)` returns the sign and the log-magnitude of the summand so that
/// `a_ℓ` and `term` may under- and overflow separately. `tail_constants(ln s)`
/// returns `(ln C, γ)` such that `|term|` at every later level `j` is at most
/// `C γ^{j-ℓ}`; with `a_j ≤ (1/(ℓ! p^ℓ)) Π_{i=ℓ+1}^{j} 1/(ip)` this gives a
/// geometric tail once `γ / ((ℓ+1)p) < 1`.
fn level_series<T, B>(pt: &ProfilePoint, ctrl: SeriesControl, term: T, tail_constants: B) -> Result<f64>
where
    T: Fn(f64) -> (f64, f64),
    B: Fn(f64) -> (f64, f64),
{
    ctrl.validate()?;
    let p = pt.p;
    let ln_p = (p as f64).ln();
    let mut total = 0.0;
    let mut bound = f64::INFINITY;
    for (level, ln_s) in LnPartialSums::new(pt.lambda, pt.r).enumerate().take(ctrl.max_terms) {
        let (sign, ln_abs) = term(ln_s);
        let t = if sign == 0.0 {
            0.0
        } else {
            sign * (ln_level_mass(level, p) + ln_abs).exp()
        };
        total += t;
        if total.is_infinite() {
            return Ok(total);
        }
        let (ln_c, gamma) = tail_constants(ln_s);
        let rho = gamma / ((level as f64 + 1.0) * p as f64);
        bound = if rho < 1.0 {
            (ln_c - ln_factorial(level) - level as f64 * ln_p + (rho / (1.0 - rho)).ln()).exp()
        } else {
            f64::INFINITY
        };
        if t.abs() < ctrl.tol && bound < ctrl.tol {
            return Ok(total);
        }
    }
    Err(Error::SeriesNotConverged {
        terms: ctrl.max_terms,
        partial: total,
        bound,
    })
}

/// `ln|s - 1|` from `ln s`.
fn ln_abs_dev(ln_s: f64) -> f64 {
    if ln_s > 0.0 {
        ln_s + (-(-ln_s).exp_m1()).ln()
    } else {
        (-ln_s.exp_m1()).ln()
    }
}

fn growth(pt: &ProfilePoint, ln_s: f64) -> (f64, f64) {
    // (ln M, G): |s(j)| ≤ M G^{j-ℓ} and M ≥ 1
    if pt.r < 1.0 {
        let ln_limit = -pt.lambda - (1.0 - pt.r).ln();
        (ln_limit.max(0.0), 1.0)
    } else {
        (ln_s.max(0.0), 1.0 + pt.r)
    }
}

/// `H_{q,p}(c) = Σ_ℓ a_ℓ |s(ℓ) - 1|^q`, the limit of the q-th power of the `L^q(U)` distance.
pub fn h_q(c: f64, p: usize, q: f64, ctrl: SeriesControl) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("need finite q >= 1, got {q}")));
    }
    let pt = ProfilePoint::new(c, p)?;
    level_series(
        &pt,
        ctrl,
        |ln_s| (1.0, q * ln_abs_dev(ln_s)),
        |ln_s| {
            let (ln_m, g) = growth(&pt, ln_s);
            (q * ln_m, g.powf(q))
        },
    )
}

/// Relative-entropy profile `h_p(c) = Σ_ℓ a_ℓ s(ℓ) log s(ℓ)`.
pub fn h_profile(c: f64, p: usize, ctrl: SeriesControl) -> Result<f64> {
    let pt = ProfilePoint::new(c, p)?;
    level_series(
        &pt,
        ctrl,
        |ln_s| (ln_s.signum(), ln_s + ln_s.abs().ln()),
        |ln_s| {
            let (ln_m, g) = growth(&pt, ln_s);
            if pt.r < 1.0 {
                // |s ln s| ≤ max(1/e, M ln M) ≤ M max(ln M, 1)
                (ln_m + ln_m.max(1.0).ln(), 1.0)
            } else {
                // s ln s ≤ M G^t (ln M + t ln G) ≤ M max(ln M, ln G, 1) (2G)^t
                (ln_m + ln_m.max(g.ln()).max(1.0).ln(), 2.0 * g)
            }
        },
    )
}

/// `H_{∞,p}(c) = e^{-λ}/(1-r) - 1` for `r < 1`, infinite otherwise.
pub fn h_inf(c: f64, p: usize) -> Result<LinftyLimit> {
    let pt = ProfilePoint::new(c, p)?;
    Ok(if pt.r < 1.0 {
        LinftyLimit::Finite((-pt.lambda).exp() / (1.0 - pt.r) - 1.0)
    } else {
        LinftyLimit::Infinite
    })
}

/// Leading-order separation mixing time `(n/m)(log n - log(-log(1-ε)))`,
/// accurate to `o(n)`. Only `p ≥ 2` is covered.
pub fn sep_mixing_time(eps: f64, n: usize, m: usize, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::Unsupported("separation mixing time needs p >= 2"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < eps < 1, got {eps}")));
    }
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got n={n}, m={m}")));
    }
    let n_f = n as f64;
    Ok(n_f / m as f64 * (n_f.ln() - (-(-eps).ln_1p()).ln()))
}

/// One grid point of the approach of `f_p` to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublyExpPoint {
    pub c: f64,
    pub f: f64,
    /// `-log(1 - f_p(c)) / e^{-c}`; `None` when `1 - f_p(c)` is not representable.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublyExpReport {
    pub p: usize,
    /// Sorted by decreasing `c`.
    pub points: Vec<DoublyExpPoint>,
    /// Whether `|ratio - 1|` never increases as `c` decreases.
    pub monotone_toward_one: bool,
}

/// Tabulates `-log(1 - f_p(c)) / e^{-c}` on a grid.
pub fn doubly_exp_check(c_grid: &[f64], p: usize) -> Result<DoublyExpReport> {
    let mut points = c_grid
        .iter()
        .map(|&c| {
            let ln_gap = ln_one_minus_f(c, p)?;
            let ratio = ln_gap.is_finite().then(|| -ln_gap / (-c).exp());
            Ok(DoublyExpPoint {
                c,
                f: f_profile(c, p)?,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| b.c.total_cmp(&a.c));
    let monotone_toward_one = points
        .windows(2)
        .all(|w| match (w[0].ratio, w[1].ratio) {
            (Some(a), Some(b)) => (b - 1.0).abs() <= (a - 1.0).abs(),
            _ => true,
        });
    Ok(DoublyExpReport {
        p,
        points,
        monotone_toward_one,
    })
}
