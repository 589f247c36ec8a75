//! Block data model for pairs of cq-states with pure components.
//!
//! A pair `(A, B)` is stored as a list of blocks `(p, q, F)`: on block `i`
//! the first operator is `p |a_i><a_i|`, the second is `q |b_i><b_i|`, and
//! `F = |<a_i|b_i>|^2`. Phases and the ambient Hilbert space are quotiented
//! out; every monotone quantity depends on a block only through `(p, q, F)`.
//!
//! Canonical form:
//! - `(0, 0)` blocks are dropped;
//! - a block with `p > 0`, `q > 0`, `F = 0` is split into `(p, 0)` and `(0, q)`;
//! - one-sided rows carry an undefined overlap (`None`);
//! - `F = 1` on a two-sided block is snapped to exactly `1` (a classical row);
//! - blocks are sorted lexicographically by `(p, q, F)`, undefined `F` last.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{malformed, Result};
use crate::scalar::Real;

/// Overlaps within this distance of 0 or 1 are snapped.
pub const OVERLAP_TOL: f64 = 1e-12;
/// Weights below this are treated as zero.
pub const WEIGHT_FLOOR: f64 = 1e-15;
/// Tolerance for the normalized-state check `sum p = sum q = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Block<T> {
    pub p: T,
    pub q: T,
    /// Squared overlap; `None` when either side carries no weight.
    #[serde(rename = "F")]
    pub f: Option<T>,
}

impl<T: Real> Block<T> {
    pub fn new(p: T, q: T, f: T) -> Self {
        Block { p, q, f: Some(f) }
    }

    pub fn left(p: T) -> Self {
        Block {
            p,
            q: T::zero(),
            f: None,
        }
    }

    pub fn right(q: T) -> Self {
        Block {
            p: T::zero(),
            q,
            f: None,
        }
    }

    /// Both weights positive.
    pub fn is_two_sided(&self) -> bool {
        self.p > T::zero() && self.q > T::zero()
    }

    /// Two-sided block with `0 < F < 1`.
    pub fn is_quantum(&self) -> bool {
        self.is_two_sided() && matches!(self.f, Some(f) if f > T::zero() && f < T::one())
    }

    /// Overlap as read by the entropy formulas: defined only on two-sided blocks.
    pub fn overlap(&self) -> Option<T> {
        if self.is_two_sided() {
            Some(self.f.unwrap_or_else(T::one))
        } else {
            None
        }
    }
}

fn cmp_block<T: Real>(a: &Block<T>, b: &Block<T>) -> Ordering {
    a.p.total_cmp_val(&b.p)
        .then(a.q.total_cmp_val(&b.q))
        .then(match (a.f, b.f) {
            (Some(x), Some(y)) => x.total_cmp_val(&y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FlatPair<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub blocks: Vec<Block<T>>,
}

impl<T: Real> Default for FlatPair<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> FlatPair<T> {
    pub fn new(blocks: Vec<Block<T>>) -> Self {
        FlatPair {
            label: None,
            blocks,
        }
    }

    /// Convenience constructor from `(p, q, F)` triples with every overlap defined.
    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Self {
        Self::new(
            triples
                .iter()
                .map(|&(p, q, f)| Block::new(T::lit(p), T::lit(q), T::lit(f)))
                .collect(),
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// The additive unit: no blocks.
    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    /// The multiplicative unit `(1, 1)`.
    pub fn unit() -> Self {
        Self::new(vec![Block::new(T::one(), T::one(), T::one())])
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Checks weights and overlaps are in range.
    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(OVERLAP_TOL);
        for (i, b) in self.blocks.iter().enumerate() {
            if !(b.p.is_finite_val() && b.q.is_finite_val()) {
                return Err(malformed(format!("block {i}: non-finite weight")));
            }
            if b.p < T::zero() || b.q < T::zero() {
                return Err(malformed(format!(
                    "block {i}: negative weight (p = {}, q = {})",
                    b.p, b.q
                )));
            }
            if let Some(f) = b.f {
                if !f.is_finite_val() || f < -tol || f > T::one() + tol {
                    return Err(malformed(format!("block {i}: overlap {f} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Normal form under the block equivalence. Idempotent.
    pub fn canonicalize(&self) -> Result<Self> {
        self.validate()?;
        let floor = T::lit(WEIGHT_FLOOR);
        let tol = T::lit(OVERLAP_TOL);
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        for b in &self.blocks {
            let p = if b.p < floor { T::zero() } else { b.p };
            let q = if b.q < floor { T::zero() } else { b.q };
            match (p > T::zero(), q > T::zero()) {
                (false, false) => {}
                (true, false) => out.push(Block::left(p)),
                (false, true) => out.push(Block::right(q)),
                (true, true) => {
                    // An undefined overlap on a two-sided block reads as a classical row.
                    let f = b.f.unwrap_or_else(T::one);
                    if f <= tol {
                        out.push(Block::left(p));
                        out.push(Block::right(q));
                    } else if f >= T::one() - tol {
                        out.push(Block::new(p, q, T::one()));
                    } else {
                        out.push(Block::new(p, q, f));
                    }
                }
            }
        }
        out.sort_by(cmp_block);
        Ok(FlatPair {
            label: self.label.clone(),
            blocks: out,
        })
    }

    /// Block concatenation.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        Self::new(blocks)
    }

    /// Tensor product: all cross blocks, overlaps multiply.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut blocks = Vec::with_capacity(self.len() * other.len());
        for a in &self.blocks {
            for b in &other.blocks {
                let p = a.p * b.p;
                let q = a.q * b.q;
                let f = match (a.overlap(), b.overlap()) {
                    (Some(x), Some(y)) if p > T::zero() && q > T::zero() => Some(x * y),
                    _ => None,
                };
                blocks.push(Block { p, q, f });
            }
        }
        Self::new(blocks)
    }

    /// `n`-fold tensor power; `n = 0` gives the unit pair.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut acc = Self::unit();
        for _ in 0..n {
            acc = acc.tensor(self);
        }
        if n == 1 {
            acc.label = self.label.clone();
        }
        acc
    }

    /// `(Tr A, Tr B)`.
    pub fn trace_pair(&self) -> (T, T) {
        self.blocks
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), blk| (a + blk.p, b + blk.q))
    }

    pub fn is_normalized(&self) -> bool {
        let (a, b) = self.trace_pair();
        let tol = T::lit(NORMALIZATION_TOL);
        (a - T::one()).abs() <= tol && (b - T::one()).abs() <= tol
    }

    /// Rescales both sides to unit trace. Fails if either side is empty.
    pub fn normalized(&self) -> Result<Self> {
        let (a, b) = self.trace_pair();
        if a <= T::zero() || b <= T::zero() {
            return Err(malformed("cannot normalize a pair with an empty side"));
        }
        Ok(FlatPair {
            label: self.label.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|blk| Block {
                    p: blk.p / a,
                    q: blk.q / b,
                    f: blk.f,
                })
                .collect(),
        })
    }

    /// Structural predicates, evaluated on the canonical form.
    pub fn classify(&self) -> Result<PairClass> {
        let c = self.canonicalize()?;
        Ok(PairClass::of_canonical(&c))
    }

    /// Equality of canonical forms within the given weight and overlap tolerances.
    pub fn approx_eq(&self, other: &Self, weight_tol: f64, overlap_tol: f64) -> bool {
        let (Ok(a), Ok(b)) = (self.canonicalize(), other.canonicalize()) else {
            return false;
        };
        if a.len() != b.len() {
            return false;
        }
        let wt = T::lit(weight_tol);
        let ft = T::lit(overlap_tol);
        a.blocks.iter().zip(&b.blocks).all(|(x, y)| {
            (x.p - y.p).abs() <= wt
                && (x.q - y.q).abs() <= wt
                && match (x.f, y.f) {
                    (Some(u), Some(v)) => (u - v).abs() <= ft,
                    (None, None) => true,
                    _ => false,
                }
        })
    }

    /// Canonical multiset equality that ignores block order differences caused
    /// by near-equal sort keys. Greedy matching, fine for small pairs.
    pub fn approx_eq_unordered(&self, other: &Self, weight_tol: f64, overlap_tol: f64) -> bool {
        let (Ok(a), Ok(b)) = (self.canonicalize(), other.canonicalize()) else {
            return false;
        };
        if a.len() != b.len() {
            return false;
        }
        let wt = T::lit(weight_tol);
        let ft = T::lit(overlap_tol);
        let mut used = vec![false; b.len()];
        'outer: for x in &a.blocks {
            for (j, y) in b.blocks.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let f_ok = match (x.f, y.f) {
                    (Some(u), Some(v)) => (u - v).abs() <= ft,
                    (None, None) => true,
                    _ => false,
                };
                if f_ok && (x.p - y.p).abs() <= wt && (x.q - y.q).abs() <= wt {
                    used[j] = true;
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// Converts every weight and overlap to another scalar type.
    pub fn cast<U: Real>(&self) -> FlatPair<U> {
        let conv = |x: T| U::lit(x.to_f64_lossy());
        FlatPair {
            label: self.label.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    p: conv(b.p),
                    q: conv(b.q),
                    f: b.f.map(conv),
                })
                .collect(),
        }
    }
}

/// Structural flags of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairClass {
    pub is_zero: bool,
    /// Some two-sided block with positive overlap (minimal restrictions).
    pub has_some_overlap: bool,
    /// Every nonzero block is two-sided with positive overlap.
    pub everywhere_overlapping: bool,
    /// Non-parallel: no two-sided block has overlap 1.
    pub satisfies_pu1: bool,
    /// Disjoint classical mass exists on both sides.
    pub satisfies_pu2: bool,
    pub is_classical: bool,
    pub states_commute: bool,
}

impl PairClass {
    fn of_canonical<T: Real>(c: &FlatPair<T>) -> Self {
        let is_zero = c.blocks.is_empty();
        let has_some_overlap = c.blocks.iter().any(|b| b.is_two_sided());
        let everywhere_overlapping = has_some_overlap && c.blocks.iter().all(|b| b.is_two_sided());
        let satisfies_pu1 = !c
            .blocks
            .iter()
            .any(|b| b.is_two_sided() && b.f == Some(T::one()));
        let left = c.blocks.iter().any(|b| b.p > T::zero() && b.q == T::zero());
        let right = c.blocks.iter().any(|b| b.p == T::zero() && b.q > T::zero());
        let is_classical = c.blocks.iter().all(|b| !b.is_quantum());
        PairClass {
            is_zero,
            has_some_overlap,
            everywhere_overlapping,
            satisfies_pu1,
            satisfies_pu2: left && right,
            is_classical,
            states_commute: is_classical,
        }
    }
}
