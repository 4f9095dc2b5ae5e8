//! The colored permutation group `C_p ≀ S_n`.
//!
//! Elements are stored positionally, as words: `perm[t]` is the label sitting
//! in position `t` and `colors[t]` is the color of that position. Labels are
//! zero-based, so the label written `ℓ` in one-based notation is stored as
//! `ℓ - 1`.
//!
//! The product follows `(t, τ)(s, σ) = (σt + s, τσ)` with `(σt)_i = t_{σ(i)}`.
//! Right multiplication by an increment therefore rearranges the positions of
//! the left factor: position `i` of `x·y` holds the card of `x` found at
//! position `y.perm[i]`, recolored by `y.colors[i]`.

use num_bigint::BigInt;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exact;

/// Default cap on the number of elements [`enumerate`] will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Shape of the group: `n` cards, `p` colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupParams {
    n: usize,
    p: usize,
}

impl GroupParams {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 1 and p >= 1, got n={n}, p={p}"
            )));
        }
        Ok(GroupParams { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `p^n · n!`, exactly.
    pub fn order(&self) -> BigInt {
        exact::pow(&BigInt::from(self.p), self.n) * exact::factorial(self.n)
    }

    /// `p^n · n!` if it fits in a `u128`.
    pub fn order_u128(&self) -> Option<u128> {
        let mut acc: u128 = 1;
        for i in 1..=self.n {
            acc = acc.checked_mul(i as u128)?.checked_mul(self.p as u128)?;
        }
        Some(acc)
    }

    /// `|A_u| = C(n,u) · p^(n-u) · (n-u)!`.
    pub fn nested_set_size(&self, u: usize) -> Result<BigInt> {
        self.check_level(u)?;
        Ok(exact::binomial(self.n, u)
            * exact::pow(&BigInt::from(self.p), self.n - u)
            * exact::factorial(self.n - u))
    }

    pub(crate) fn check_level(&self, u: usize) -> Result<()> {
        if u > self.n {
            return Err(Error::OutOfRange { index: u, max: self.n });
        }
        Ok(())
    }
}

/// An element `(s, σ)` of the group, in word form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColoredPermutation {
    perm: Vec<u32>,
    colors: Vec<u32>,
}

impl ColoredPermutation {
    /// Builds an element from zero-based labels by position and colors by position.
    pub fn new(perm: Vec<u32>, colors: Vec<u32>, g: GroupParams) -> Result<Self> {
        let x = ColoredPermutation { perm, colors };
        x.validate(g)?;
        Ok(x)
    }

    pub fn identity(g: GroupParams) -> Self {
        ColoredPermutation {
            perm: (0..g.n as u32).collect(),
            colors: vec![0; g.n],
        }
    }

    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn validate(&self, g: GroupParams) -> Result<()> {
        if self.perm.len() != g.n || self.colors.len() != g.n {
            return Err(Error::DimensionMismatch {
                expected: g.n,
                expected_p: g.p,
                got: self.perm.len(),
                got_p: g.p,
            });
        }
        let mut seen = vec![false; g.n];
        for &label in &self.perm {
            let slot = seen.get_mut(label as usize).ok_or_else(|| {
                Error::InvalidParameter(format!("label {label} out of range for n={}", g.n))
            })?;
            if *slot {
                return Err(Error::InvalidParameter(format!("label {label} repeated")));
            }
            *slot = true;
        }
        if let Some(&c) = self.colors.iter().find(|&&c| c as usize >= g.p) {
            return Err(Error::InvalidParameter(format!(
                "color {c} out of range for p={}",
                g.p
            )));
        }
        Ok(())
    }

    /// Position of every label: `positions()[label] = σ^{-1}(label)`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.perm.len()];
        for (t, &label) in self.perm.iter().enumerate() {
            pos[label as usize] = t;
        }
        pos
    }
}

/// Group product `x · y`.
pub fn multiply(
    x: &ColoredPermutation,
    y: &ColoredPermutation,
    g: GroupParams,
) -> Result<ColoredPermutation> {
    x.validate(g)?;
    y.validate(g)?;
    Ok(multiply_unchecked(x, y, g.p))
}

pub(crate) fn multiply_unchecked(
    x: &ColoredPermutation,
    y: &ColoredPermutation,
    p: usize,
) -> ColoredPermutation {
    let p = p as u32;
    let (perm, colors) = y
        .perm
        .iter()
        .zip(&y.colors)
        .map(|(&src, &c)| {
            let src = src as usize;
            (x.perm[src], (x.colors[src] + c) % p)
        })
        .unzip();
    ColoredPermutation { perm, colors }
}

pub fn inverse(x: &ColoredPermutation, g: GroupParams) -> Result<ColoredPermutation> {
    x.validate(g)?;
    Ok(inverse_unchecked(x, g.p))
}

pub(crate) fn inverse_unchecked(x: &ColoredPermutation, p: usize) -> ColoredPermutation {
    let p = p as u32;
    let pos = x.positions();
    let perm: Vec<u32> = pos.iter().map(|&t| t as u32).collect();
    let colors = pos.iter().map(|&t| (p - x.colors[t] % p) % p).collect();
    ColoredPermutation { perm, colors }
}

pub fn identity(g: GroupParams) -> ColoredPermutation {
    ColoredPermutation::identity(g)
}

/// Whether `x ∈ A_u`: the `u` largest labels sit in increasing positions and all carry color 0.
pub fn in_a_u(x: &ColoredPermutation, u: usize, g: GroupParams) -> Result<bool> {
    g.check_level(u)?;
    x.validate(g)?;
    Ok(l_stat_unchecked(x) >= u)
}

/// `L_p(x) = max{u : x ∈ A_u}`.
pub fn l_stat(x: &ColoredPermutation, g: GroupParams) -> Result<usize> {
    x.validate(g)?;
    Ok(l_stat_unchecked(x))
}

pub(crate) fn l_stat_unchecked(x: &ColoredPermutation) -> usize {
    let n = x.perm.len();
    let pos = x.positions();
    let mut u = 0;
    let mut last_pos = usize::MAX;
    for label in (0..n).rev() {
        let t = pos[label];
        if x.colors[t] != 0 || t >= last_pos {
            break;
        }
        last_pos = t;
        u += 1;
    }
    u
}

/// Deterministic enumeration of the whole group.
///
/// Permutations are visited in lexicographic order of their label words and,
/// within a permutation, colorings in lexicographic order. The position of an
/// element in this order is [`element_index`].
pub fn enumerate(g: GroupParams, cap: u128) -> Result<Enumeration> {
    let order = g.order_u128().unwrap_or(u128::MAX);
    if order > cap {
        return Err(Error::BudgetExceeded {
            what: "group enumeration",
            needed: order,
            cap,
        });
    }
    Ok(Enumeration {
        g,
        next: Some(ColoredPermutation::identity(g)),
    })
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    g: GroupParams,
    next: Option<ColoredPermutation>,
}

impl Iterator for Enumeration {
    type Item = ColoredPermutation;

    fn next(&mut self) -> Option<Self::Item> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if advance_colors(&mut succ.colors, self.g.p as u32) || next_permutation(&mut succ.perm) {
            self.next = Some(succ);
        }
        Some(current)
    }
}

fn advance_colors(colors: &mut [u32], p: u32) -> bool {
    for c in colors.iter_mut().rev() {
        *c += 1;
        if *c < p {
            return true;
        }
        *c = 0;
    }
    false
}

fn next_permutation(perm: &mut [u32]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&v| v > perm[i]).expect("successor exists");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// Rank of `x` in the order produced by [`enumerate`].
pub fn element_index(x: &ColoredPermutation, p: usize) -> usize {
    let n = x.perm.len();
    // Lehmer code rank of the permutation
    let mut rank = 0usize;
    for i in 0..n {
        let smaller = x.perm[i + 1..].iter().filter(|&&v| v < x.perm[i]).count();
        rank = rank * (n - i) + smaller;
    }
    let color_rank = x.colors.iter().fold(0usize, |acc, &c| acc * p + c as usize);
    rank * p.pow(n as u32) + color_rank
}

/// Draws the labels-`0..m` part of an increment: their positions (in label
/// order) and their colors.
fn draw_increment<R: Rng + ?Sized>(m: usize, g: GroupParams, rng: &mut R) -> (Vec<usize>, Vec<u32>) {
    let positions = index::sample(rng, g.n, m).into_vec();
    let colors = (0..m).map(|_| rng.random_range(0..g.p as u32)).collect();
    (positions, colors)
}

fn check_subset_size(m: usize, g: GroupParams) -> Result<()> {
    if m == 0 || m > g.n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= m <= n, got m={m}, n={}",
            g.n
        )));
    }
    Ok(())
}

/// Uniform draw from `supp(B_m)`: labels `0..m` at uniform distinct positions
/// in uniform order with uniform colors, the other labels frozen in
/// increasing order with color 0.
pub fn sample_increment<R: Rng + ?Sized>(
    m: usize,
    g: GroupParams,
    rng: &mut R,
) -> Result<ColoredPermutation> {
    check_subset_size(m, g)?;
    let (positions, colors) = draw_increment(m, g, rng);
    let mut perm = vec![u32::MAX; g.n];
    let mut color_row = vec![0; g.n];
    for (label, (&t, &c)) in positions.iter().zip(&colors).enumerate() {
        perm[t] = label as u32;
        color_row[t] = c;
    }
    let free = perm.iter_mut().filter(|slot| **slot == u32::MAX);
    for (label, slot) in (m as u32..).zip(free) {
        *slot = label;
    }
    Ok(ColoredPermutation {
        perm,
        colors: color_row,
    })
}

/// Replaces `deck` by `deck · y` for `y` drawn as in [`sample_increment`],
/// consuming the random stream identically.
///
/// This is the physical move: the top `m` cards are lifted, recolored, and
/// reinserted at uniform positions; the remaining cards keep their order.
pub struct DeckStepper {
    g: GroupParams,
    m: usize,
    slot: Vec<usize>,
    perm: Vec<u32>,
    colors: Vec<u32>,
}

impl DeckStepper {
    pub fn new(m: usize, g: GroupParams) -> Result<Self> {
        check_subset_size(m, g)?;
        Ok(DeckStepper {
            g,
            m,
            slot: vec![usize::MAX; g.n],
            perm: vec![0; g.n],
            colors: vec![0; g.n],
        })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, deck: &mut ColoredPermutation, rng: &mut R) {
        let p = self.g.p as u32;
        let (positions, draw_colors) = draw_increment(self.m, self.g, rng);
        for (label, &t) in positions.iter().enumerate() {
            self.slot[t] = label;
        }
        let mut next = self.m;
        for t in 0..self.g.n {
            let src = match self.slot[t] {
                usize::MAX => {
                    next += 1;
                    self.colors[t] = deck.colors[next - 1];
                    next - 1
                }
                label => {
                    self.slot[t] = usize::MAX;
                    self.colors[t] = (deck.colors[label] + draw_colors[label]) % p;
                    label
                }
            };
            self.perm[t] = deck.perm[src];
        }
        std::mem::swap(&mut deck.perm, &mut self.perm);
        std::mem::swap(&mut deck.colors, &mut self.colors);
    }
}
