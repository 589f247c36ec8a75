//! Simultaneous block-diagonalization of two projections into blocks of
//! dimension at most two, and conversion between dense operator pairs and
//! [`FlatPair`]s.

use serde::{Deserialize, Serialize};

use crate::error::{malformed, Result};
use crate::flatpair::{Block, FlatPair};
use crate::linalg::{self, eigh, CMat, CVec};
use crate::scalar::{cr, Real, C};

/// Eigenvalues of `PQP` within this distance of 0 or 1 are snapped.
pub const EIGEN_SNAP: f64 = 1e-10;
/// Tolerance for the projection identities `P^2 = P = P^dagger`.
pub const PROJECTION_TOL: f64 = 1e-9;

/// A pair of operators on the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperatorPair<T: Real> {
    pub a: CMat<T>,
    pub b: CMat<T>,
}

impl<T: Real> DenseOperatorPair<T> {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Tensor product of pairs.
    pub fn kron(&self, other: &Self) -> Self {
        DenseOperatorPair {
            a: linalg::kron(&self.a, &other.a),
            b: linalg::kron(&self.b, &other.b),
        }
    }

    pub fn kron_power(&self, n: usize) -> Self {
        let one = CMat::from_element(1, 1, cr(T::one()));
        let mut acc = DenseOperatorPair {
            a: one.clone(),
            b: one,
        };
        for _ in 0..n {
            acc = acc.kron(self);
        }
        acc
    }

    /// Conjugates both operators by `u`.
    pub fn conjugate(&self, u: &CMat<T>) -> Self {
        DenseOperatorPair {
            a: u * &self.a * u.adjoint(),
            b: u * &self.b * u.adjoint(),
        }
    }
}

/// One block of a Jordan decomposition. A missing component vector means the
/// corresponding projection vanishes on this block.
#[derive(Debug, Clone)]
pub struct JordanBlock<T: Real> {
    /// Orthonormal basis of the block subspace (one or two vectors).
    pub basis: Vec<CVec<T>>,
    pub a_vector: Option<CVec<T>>,
    pub b_vector: Option<CVec<T>>,
    /// `|<a|b>|^2` when both components are present.
    pub overlap: Option<T>,
}

impl<T: Real> JordanBlock<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn a_component(&self, n: usize) -> CMat<T> {
        self.a_vector
            .as_ref()
            .map_or_else(|| CMat::zeros(n, n), linalg::outer)
    }

    pub fn b_component(&self, n: usize) -> CMat<T> {
        self.b_vector
            .as_ref()
            .map_or_else(|| CMat::zeros(n, n), linalg::outer)
    }
}

#[derive(Debug, Clone)]
pub struct JordanDecomposition<T: Real> {
    pub dim: usize,
    pub blocks: Vec<JordanBlock<T>>,
    /// Frobenius reconstruction error, max over the two projections.
    pub residual: T,
}

impl<T: Real> JordanDecomposition<T> {
    /// Largest `|<x|y>|` over basis vectors of distinct blocks.
    pub fn orthogonality_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, bi) in self.blocks.iter().enumerate() {
            for bj in &self.blocks[i + 1..] {
                for x in &bi.basis {
                    for y in &bj.basis {
                        worst = worst.max(x.dotc(y).norm_sqr().sqrt());
                    }
                }
            }
        }
        worst
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }
}

fn check_projection<T: Real>(m: &CMat<T>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(malformed(format!("{name} is not square")));
    }
    let tol = T::lit(PROJECTION_TOL);
    let herm = linalg::max_abs_diff(m, &m.adjoint());
    if herm > tol {
        return Err(malformed(format!(
            "{name} != {name}^dagger (defect {herm})"
        )));
    }
    let idem = linalg::max_abs_diff(&(m * m), m);
    if idem > tol {
        return Err(malformed(format!("{name}^2 != {name} (defect {idem})")));
    }
    Ok(())
}

/// Orthonormal eigenvectors of a (near-)projection with eigenvalue close to 1.
fn range_basis<T: Real>(m: &CMat<T>) -> Vec<CVec<T>> {
    let (vals, vecs) = eigh(m);
    let half = T::lit(0.5);
    vals.iter()
        .enumerate()
        .filter(|(_, &v)| v > half)
        .map(|(k, _)| vecs.column(k).into_owned())
        .collect()
}

/// Jordan decomposition of two Hermitian projections of equal dimension.
///
/// Eigenvectors `v` of `PQP` with eigenvalue in `(0, 1)` pair with `Qv` to
/// give two-dimensional blocks; eigenvalue 1 gives shared one-dimensional
/// blocks; what is left of `P`, `Q` and the ambient space gives one-sided
/// and empty one-dimensional blocks.
pub fn jordan_decompose<T: Real>(p: &CMat<T>, q: &CMat<T>) -> Result<JordanDecomposition<T>> {
    check_projection(p, "P")?;
    check_projection(q, "Q")?;
    if p.nrows() != q.nrows() {
        return Err(malformed(format!(
            "dimension mismatch: {} vs {}",
            p.nrows(),
            q.nrows()
        )));
    }
    let n = p.nrows();
    let snap = T::lit(EIGEN_SNAP);
    let pqp = p * q * p;
    let (vals, vecs) = eigh(&pqp);

    let mut blocks = Vec::new();
    let mut used_a = CMat::<T>::zeros(n, n);
    let mut used_b = CMat::<T>::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= snap {
            continue;
        }
        let v: CVec<T> = vecs.column(k).into_owned();
        if lam >= T::one() - snap {
            used_a += linalg::outer(&v);
            used_b += linalg::outer(&v);
            blocks.push(JordanBlock {
                basis: vec![v.clone()],
                a_vector: Some(v.clone()),
                b_vector: Some(v),
                overlap: Some(T::one()),
            });
            continue;
        }
        let qv = q * &v;
        let w = &qv / cr(qv.norm());
        let mut u = &w - &v * v.dotc(&w);
        u /= cr(u.norm());
        used_a += linalg::outer(&v);
        used_b += linalg::outer(&w);
        blocks.push(JordanBlock {
            basis: vec![v.clone(), u],
            a_vector: Some(v),
            b_vector: Some(w),
            overlap: Some(lam),
        });
    }

    for x in range_basis(&(p - &used_a)) {
        blocks.push(JordanBlock {
            basis: vec![x.clone()],
            a_vector: Some(x),
            b_vector: None,
            overlap: None,
        });
    }
    for y in range_basis(&(q - &used_b)) {
        blocks.push(JordanBlock {
            basis: vec![y.clone()],
            a_vector: None,
            b_vector: Some(y),
            overlap: None,
        });
    }
    let mut spanned = CMat::<T>::zeros(n, n);
    for blk in &blocks {
        for x in &blk.basis {
            spanned += linalg::outer(x);
        }
    }
    let complement = CMat::<T>::identity(n, n) - spanned;
    for x in range_basis(&complement) {
        blocks.push(JordanBlock {
            basis: vec![x],
            a_vector: None,
            b_vector: None,
            overlap: None,
        });
    }

    let mut p_rec = CMat::<T>::zeros(n, n);
    let mut q_rec = CMat::<T>::zeros(n, n);
    for blk in &blocks {
        p_rec += blk.a_component(n);
        q_rec += blk.b_component(n);
    }
    let residual = linalg::fro(&(p - p_rec)).max(linalg::fro(&(q - q_rec)));
    Ok(JordanDecomposition {
        dim: n,
        blocks,
        residual,
    })
}

/// Flat pair of the normalized flat states `(P / Tr P, Q / Tr Q)`.
pub fn flat_pair_from_projections<T: Real>(p: &CMat<T>, q: &CMat<T>) -> Result<FlatPair<T>> {
    let dec = jordan_decompose(p, q)?;
    let ra = dec.blocks.iter().filter(|b| b.a_vector.is_some()).count();
    let rb = dec.blocks.iter().filter(|b| b.b_vector.is_some()).count();
    if ra == 0 || rb == 0 {
        return Err(malformed("zero projection"));
    }
    let wa = T::one() / T::lit(ra as f64);
    let wb = T::one() / T::lit(rb as f64);
    let blocks = dec
        .blocks
        .iter()
        .filter_map(|blk| match (&blk.a_vector, &blk.b_vector) {
            (Some(_), Some(_)) => Some(Block::new(wa, wb, blk.overlap.unwrap_or_else(T::one))),
            (Some(_), None) => Some(Block::left(wa)),
            (None, Some(_)) => Some(Block::right(wb)),
            (None, None) => None,
        })
        .collect();
    FlatPair::new(blocks).canonicalize()
}

/// Which side of a two-dimensional block sits on the first basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `A = p|e1><e1|`, `B = q|psi><psi|`.
    FirstAligned,
    /// `B = q|e1><e1|`, `A = p|psi><psi|`.
    SecondAligned,
}

/// Dimension of the canonical realization of each block of `pair` (already canonical).
pub fn block_dims<T: Real>(pair: &FlatPair<T>) -> Vec<usize> {
    pair.blocks
        .iter()
        .map(|b| if b.is_quantum() { 2 } else { 1 })
        .collect()
}

/// Block-diagonal realization of the canonical form of `pair`: two dimensions
/// per block with `0 < F < 1`, one per classical row.
pub fn realize_dense<T: Real>(pair: &FlatPair<T>) -> Result<DenseOperatorPair<T>> {
    realize_dense_oriented(pair, Orientation::FirstAligned)
}

pub fn realize_dense_oriented<T: Real>(
    pair: &FlatPair<T>,
    orientation: Orientation,
) -> Result<DenseOperatorPair<T>> {
    realize_ordered(&pair.canonicalize()?, orientation)
}

/// Realization that keeps the block order of `pair`. Each block must already
/// be in canonical form (see [`FlatPair::canonicalize`]); the list need not be sorted.
pub fn realize_ordered<T: Real>(
    c: &FlatPair<T>,
    orientation: Orientation,
) -> Result<DenseOperatorPair<T>> {
    c.validate()?;
    let mut a_blocks = Vec::with_capacity(c.len());
    let mut b_blocks = Vec::with_capacity(c.len());
    for blk in &c.blocks {
        if blk.is_quantum() {
            let f = blk.f.expect("quantum block has an overlap");
            let theta = f.sqrt().acos();
            let aligned = linalg::outer(&linalg::angle_vector(T::zero()));
            let rotated = linalg::outer(&linalg::angle_vector(theta));
            let (a, b) = match orientation {
                Orientation::FirstAligned => (aligned, rotated),
                Orientation::SecondAligned => (rotated, aligned),
            };
            a_blocks.push(a * cr(blk.p));
            b_blocks.push(b * cr(blk.q));
        } else {
            a_blocks.push(CMat::from_element(1, 1, cr(blk.p)));
            b_blocks.push(CMat::from_element(1, 1, cr(blk.q)));
        }
    }
    Ok(DenseOperatorPair {
        a: linalg::direct_sum(&a_blocks),
        b: linalg::direct_sum(&b_blocks),
    })
}

/// Tolerances for reading a [`FlatPair`] off a dense operator pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Eigenvalues below this count as zero weight.
    pub weight_floor: f64,
    /// Relative gap under which eigenvalues are merged into one spectral projection.
    pub cluster_tol: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            weight_floor: 1e-12,
            cluster_tol: 1e-9,
        }
    }
}

/// Result of [`flat_pair_from_operators`].
#[derive(Debug, Clone)]
pub struct Extracted<T: Real> {
    pub pair: FlatPair<T>,
    /// How far the input is from a rank-one block structure: the larger of
    /// the reconstruction error of `B` and the largest cross-block overlap.
    pub residual: T,
}

struct Spectral<T: Real> {
    weight: T,
    proj: CMat<T>,
    rank: usize,
}

fn spectral_projections<T: Real>(m: &CMat<T>, opts: &ExtractOptions) -> Vec<Spectral<T>> {
    let (vals, vecs) = eigh(m);
    let floor = T::lit(opts.weight_floor);
    let tol = T::lit(opts.cluster_tol);
    let n = vals.len();
    let mut out: Vec<Spectral<T>> = Vec::new();
    let mut group: Vec<usize> = Vec::new();
    let flush = |group: &mut Vec<usize>, out: &mut Vec<Spectral<T>>| {
        if group.is_empty() {
            return;
        }
        let mut proj = CMat::zeros(n, n);
        let mut sum = T::zero();
        for &k in group.iter() {
            proj += linalg::outer(&vecs.column(k).into_owned());
            sum += vals[k];
        }
        out.push(Spectral {
            weight: sum / T::lit(group.len() as f64),
            proj,
            rank: group.len(),
        });
        group.clear();
    };
    for k in 0..n {
        if vals[k] <= floor {
            continue;
        }
        if let Some(&last) = group.last() {
            let scale = vals[k].abs().max(T::one());
            if vals[k] - vals[last] > tol * scale {
                flush(&mut group, &mut out);
            }
        }
        group.push(k);
    }
    flush(&mut group, &mut out);
    out
}

/// Reads the block structure off a pair of PSD operators that are jointly
/// block-diagonal with rank-one blocks (not necessarily normalized).
///
/// Both operators are split into spectral projections; the Jordan
/// decomposition of each pair of spectral projections `(P_a, Q_b)` yields the
/// two-sided blocks with weights `(a, b)`, and the unmatched ranks give the
/// one-sided rows.
pub fn flat_pair_from_operators<T: Real>(
    pair: &DenseOperatorPair<T>,
    opts: &ExtractOptions,
) -> Result<Extracted<T>> {
    let (a, b) = (&pair.a, &pair.b);
    if !a.is_square() || !b.is_square() || a.nrows() != b.nrows() {
        return Err(malformed("operators must be square and of equal dimension"));
    }
    let n = a.nrows();
    let snap = T::lit(EIGEN_SNAP);
    let sa = spectral_projections(a, opts);
    let sb = spectral_projections(b, opts);

    let mut blocks = Vec::new();
    let mut alphas: Vec<CVec<T>> = Vec::new();
    let mut betas: Vec<CVec<T>> = Vec::new();
    let mut matched_a = vec![0usize; sa.len()];
    let mut matched_b = vec![0usize; sb.len()];
    let mut b_rec = CMat::<T>::zeros(n, n);
    for (i, pa) in sa.iter().enumerate() {
        for (j, qb) in sb.iter().enumerate() {
            let m = &pa.proj * &qb.proj * &pa.proj;
            let (vals, vecs) = eigh(&m);
            for (k, &lam) in vals.iter().enumerate() {
                if lam <= snap {
                    continue;
                }
                let v: CVec<T> = vecs.column(k).into_owned();
                let qv = &qb.proj * &v;
                let w = &qv / cr(qv.norm());
                let f = if lam >= T::one() - snap { T::one() } else { lam };
                blocks.push(Block::new(pa.weight, qb.weight, f));
                b_rec += linalg::outer(&w) * cr(qb.weight);
                alphas.push(v);
                betas.push(w);
                matched_a[i] += 1;
                matched_b[j] += 1;
            }
        }
    }
    let mut cross = T::zero();
    for (i, x) in alphas.iter().enumerate() {
        for (j, y) in betas.iter().enumerate() {
            if i != j {
                cross = cross.max(x.dotc(y).norm_sqr().sqrt());
            }
        }
    }
    for (pa, &used) in sa.iter().zip(&matched_a) {
        for _ in used..pa.rank {
            blocks.push(Block::left(pa.weight));
        }
        if used > pa.rank {
            cross = cross.max(T::one());
        }
    }
    for (qb, &used) in sb.iter().zip(&matched_b) {
        for _ in used..qb.rank {
            blocks.push(Block::right(qb.weight));
        }
        if used > qb.rank {
            cross = cross.max(T::one());
        }
        // One-sided part of Q_b: its projection minus the matched vectors.
        let mut rest = qb.proj.clone();
        for (w, blk) in betas.iter().zip(&blocks) {
            if blk.q == qb.weight {
                rest -= linalg::outer(w);
            }
        }
        b_rec += linalg::psd_clip(&rest) * cr(qb.weight);
    }
    let residual = linalg::fro(&(b - b_rec)).max(cross);
    Ok(Extracted {
        pair: FlatPair::new(blocks).canonicalize()?,
        residual,
    })
}

/// Start index of each block in a block-diagonal space with the given block dimensions.
pub fn block_offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for &d in dims {
        off.push(acc);
        acc += d;
    }
    off
}

/// `|0><0|` projector in dimension `n`, handy for examples and tests.
pub fn basis_projector<T: Real>(n: usize, indices: &[usize]) -> CMat<T> {
    CMat::from_fn(n, n, |i, j| {
        if i == j && indices.contains(&i) {
            cr(T::one())
        } else {
            C::new(T::zero(), T::zero())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn plus_projector() -> CMat<f64> {
        linalg::outer(&linalg::angle_vector(FRAC_PI_4))
    }

    #[test]
    fn identical_rank_one_projections() {
        let p = basis_projector::<f64>(2, &[0]);
        let dec = jordan_decompose(&p, &p).unwrap();
        let shared: Vec<_> = dec
            .blocks
            .iter()
            .filter(|b| b.a_vector.is_some() && b.b_vector.is_some())
            .collect();
        assert_eq!(shared.len(), 1);
        assert_eq!(shared[0].overlap, Some(1.0));
        assert!(dec.residual < 1e-12);
        assert_eq!(dec.total_dim(), 2);
    }

    #[test]
    fn zero_and_plus_give_half_overlap() {
        let p = basis_projector::<f64>(2, &[0]);
        let q = plus_projector();
        let dec = jordan_decompose(&p, &q).unwrap();
        assert_eq!(dec.blocks.len(), 1);
        assert_eq!(dec.blocks[0].dim(), 2);
        assert!((dec.blocks[0].overlap.unwrap() - 0.5).abs() < 1e-12);
        let fp = flat_pair_from_projections(&p, &q).unwrap();
        assert!(fp.approx_eq(&FlatPair::from_triples(&[(1.0, 1.0, 0.5)]), 1e-12, 1e-12));
    }

    #[test]
    fn identity_pair_is_classical() {
        let id = CMat::<f64>::identity(3, 3);
        let fp = flat_pair_from_projections(&id, &id).unwrap();
        assert_eq!(fp.len(), 3);
        assert!(fp.blocks.iter().all(|b| b.f == Some(1.0)));
        assert!((fp.blocks[0].p - 1.0 / 3.0).abs() < 1e-15);
        assert!(fp.classify().unwrap().is_classical);
    }

    #[test]
    fn non_projection_rejected() {
        let m = linalg::diag(&[0.5f64, 1.0]);
        let err = jordan_decompose(&m, &m).unwrap_err();
        assert!(matches!(err, crate::Error::Malformed(ref s) if s.contains("P^2")));
        let zero = CMat::<f64>::zeros(2, 2);
        assert!(flat_pair_from_projections(&zero, &basis_projector(2, &[0])).is_err());
        assert!(jordan_decompose(&basis_projector::<f64>(2, &[0]), &basis_projector(3, &[0])).is_err());
    }

    #[test]
    fn realize_examples() {
        let d = realize_dense(&FlatPair::<f64>::unit()).unwrap();
        assert_eq!(d.a.shape(), (1, 1));
        assert_eq!(d.a[(0, 0)].re, 1.0);
        assert_eq!(d.b[(0, 0)].re, 1.0);

        let d = realize_dense(&FlatPair::<f64>::from_triples(&[(1.0, 1.0, 0.5)])).unwrap();
        let expected = CMat::from_element(2, 2, C::new(0.5, 0.0));
        assert!(linalg::max_abs_diff(&d.b, &expected) < 1e-15);
        assert!(linalg::max_abs_diff(&d.a, &basis_projector(2, &[0])) < 1e-15);
    }

    #[test]
    fn extraction_round_trip_with_repeated_weights() {
        let pair = FlatPair::<f64>::new(vec![
            Block::new(0.25, 0.25, 0.3),
            Block::new(0.25, 0.25, 0.3),
            Block::new(0.25, 0.1, 0.8),
            Block::left(0.25),
            Block::right(0.4),
        ]);
        let dense = realize_dense(&pair).unwrap();
        let ex = flat_pair_from_operators(&dense, &ExtractOptions::default()).unwrap();
        assert!(ex.residual < 1e-9, "residual {}", ex.residual);
        assert!(ex.pair.approx_eq_unordered(&pair, 1e-12, 1e-9));
    }

    #[test]
    fn extraction_flags_non_block_pairs() {
        // Two rank-one operators whose vectors overlap across a third direction
        // still form a valid pair; a full-rank generic pair does not.
        let a = linalg::diag(&[0.5f64, 0.3, 0.2]);
        let mut b = CMat::<f64>::identity(3, 3) * cr(1.0 / 3.0);
        b[(0, 1)] = C::new(0.1, 0.0);
        b[(1, 0)] = C::new(0.1, 0.0);
        b[(1, 2)] = C::new(0.05, 0.0);
        b[(2, 1)] = C::new(0.05, 0.0);
        let ex = flat_pair_from_operators(&DenseOperatorPair { a, b }, &ExtractOptions::default())
            .unwrap();
        assert!(ex.residual > 1e-3);
    }
}
