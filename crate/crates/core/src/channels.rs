//! Quantum channels as Kraus families, and the constructive protocols built
//! from them: overlap-raising maps between pure pairs, dephasing, block
//! merging, the measure-and-convert protocol for powers of a pure pair,
//! smoothing of targets and catalyst assembly.

use serde::{Deserialize, Serialize};

use crate::error::{hypothesis, malformed, Error, Result};
use crate::feasibility::{self, FeasibilityOptions, FeasibilityStatus};
use crate::flatpair::{Block, FlatPair};
use crate::jordan::{self, block_dims, block_offsets, DenseOperatorPair, Orientation};
use crate::json::{ser_mats, DenseMatrix};
use crate::linalg::{self, CMat};
use crate::scalar::{cr, Real, C};

/// Trace-preservation tolerance of [`ChannelRep::verify`].
pub const TP_TOL: f64 = 1e-9;
/// Lowest Choi eigenvalue accepted by [`ChannelRep::verify`].
pub const CHOI_FLOOR: f64 = -1e-9;
/// Choi eigenvalues above this become Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-10;
/// Largest number of measured copies tried by [`power_universal_protocol`].
pub const M_CAP: usize = 64;

/// A channel `X -> sum_k K_k X K_k^dagger`, each `K_k` of shape `dim_out x dim_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRep<T: Real> {
    pub kraus: Vec<CMat<T>>,
    pub dim_in: usize,
    pub dim_out: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCheck {
    /// Frobenius norm of `sum K^dagger K - I`.
    pub tp_residual: f64,
    pub choi_min_eigenvalue: f64,
    pub passes: bool,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<DenseMatrix>,
}

impl<T: Real> Serialize for ChannelRep<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus: self.kraus.iter().map(DenseMatrix::from_cmat).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for ChannelRep<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ChannelJson::deserialize(d)?;
        let kraus = j
            .kraus
            .iter()
            .map(|m| m.to_cmat())
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        ChannelRep::with_dims(kraus, j.dim_in, j.dim_out).map_err(serde::de::Error::custom)
    }
}

fn zero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

/// `|a><b|` of shape `rows x cols`.
fn unit_op<T: Real>(rows: usize, cols: usize, a: usize, b: usize) -> CMat<T> {
    let mut m = CMat::zeros(rows, cols);
    m[(a, b)] = cr(T::one());
    m
}

/// Places `k` at offset `(row, col)` of a `rows x cols` zero matrix.
fn embed<T: Real>(k: &CMat<T>, rows: usize, cols: usize, row: usize, col: usize) -> CMat<T> {
    let mut m = CMat::zeros(rows, cols);
    m.view_mut((row, col), k.shape()).copy_from(k);
    m
}

impl<T: Real> ChannelRep<T> {
    pub fn new(kraus: Vec<CMat<T>>) -> Result<Self> {
        let (dim_out, dim_in) = kraus
            .first()
            .map(|k| k.shape())
            .ok_or_else(|| malformed("empty Kraus family"))?;
        Self::with_dims(kraus, dim_in, dim_out)
    }

    pub fn with_dims(kraus: Vec<CMat<T>>, dim_in: usize, dim_out: usize) -> Result<Self> {
        if let Some(k) = kraus.iter().find(|k| k.shape() != (dim_out, dim_in)) {
            return Err(malformed(format!(
                "Kraus operator of shape {:?}, expected ({dim_out}, {dim_in})",
                k.shape()
            )));
        }
        Ok(ChannelRep {
            kraus,
            dim_in,
            dim_out,
        })
    }

    pub fn identity(d: usize) -> Self {
        ChannelRep {
            kraus: vec![CMat::identity(d, d)],
            dim_in: d,
            dim_out: d,
        }
    }

    pub fn apply(&self, rho: &CMat<T>) -> Result<CMat<T>> {
        if rho.shape() != (self.dim_in, self.dim_in) {
            return Err(malformed(format!(
                "state of shape {:?} for channel with input dimension {}",
                rho.shape(),
                self.dim_in
            )));
        }
        let mut out = CMat::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    pub fn apply_pair(&self, pair: &DenseOperatorPair<T>) -> Result<DenseOperatorPair<T>> {
        Ok(DenseOperatorPair {
            a: self.apply(&pair.a)?,
            b: self.apply(&pair.b)?,
        })
    }

    /// `then` applied after `self`.
    pub fn then(&self, then: &Self) -> Result<Self> {
        if then.dim_in != self.dim_out {
            return Err(malformed("composition dimension mismatch"));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * then.kraus.len());
        for k2 in &then.kraus {
            for k1 in &self.kraus {
                kraus.push(k2 * k1);
            }
        }
        Ok(ChannelRep {
            kraus,
            dim_in: self.dim_in,
            dim_out: then.dim_out,
        })
    }

    /// Parallel composition on the tensor product.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(linalg::kron(a, b));
            }
        }
        ChannelRep {
            kraus,
            dim_in: self.dim_in * other.dim_in,
            dim_out: self.dim_out * other.dim_out,
        }
    }

    fn gram(&self) -> CMat<T> {
        let mut s = CMat::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        s
    }

    pub fn tp_residual(&self) -> T {
        linalg::fro(&(self.gram() - CMat::identity(self.dim_in, self.dim_in)))
    }

    /// `J = sum_{ij} |i><j| (x) C(|i><j|)`, row index `i * dim_out + a`.
    pub fn choi(&self) -> CMat<T> {
        let (di, d_o) = (self.dim_in, self.dim_out);
        let mut j = CMat::zeros(di * d_o, di * d_o);
        for k in &self.kraus {
            let v = CMat::from_fn(di * d_o, 1, |r, _| k[(r % d_o, r / d_o)]);
            j += &v * v.adjoint();
        }
        j
    }

    /// Kraus family from the eigendecomposition of a Choi matrix, keeping
    /// eigenvalues above `cutoff`.
    pub fn from_choi(j: &CMat<T>, dim_in: usize, dim_out: usize, cutoff: T) -> Result<Self> {
        if j.shape() != (dim_in * dim_out, dim_in * dim_out) {
            return Err(malformed("Choi matrix has the wrong shape"));
        }
        let (vals, vecs) = linalg::eigh(j);
        let mut kraus = Vec::new();
        for (k, &lam) in vals.iter().enumerate() {
            if lam <= cutoff {
                continue;
            }
            let s = cr(lam.sqrt());
            kraus.push(CMat::from_fn(dim_out, dim_in, |a, i| vecs[(i * dim_out + a, k)] * s));
        }
        if kraus.is_empty() {
            return Err(malformed("Choi matrix has no eigenvalue above the cutoff"));
        }
        Ok(ChannelRep {
            kraus,
            dim_in,
            dim_out,
        })
    }

    /// Rescales `K -> K S^(-1/2)` with `S = sum K^dagger K`, making the family
    /// exactly trace preserving. Fails if `S` is singular.
    pub fn renormalized(&self) -> Result<Self> {
        let (vals, vecs) = linalg::eigh(&self.gram());
        if vals.first().map_or(true, |&v| v <= T::lit(1e-12)) {
            return Err(malformed("Kraus family is not full rank on the input"));
        }
        let inv_sqrt = &vecs
            * linalg::diag(&vals.iter().map(|&v| T::one() / v.sqrt()).collect::<Vec<_>>())
            * vecs.adjoint();
        Ok(ChannelRep {
            kraus: self.kraus.iter().map(|k| k * &inv_sqrt).collect(),
            dim_in: self.dim_in,
            dim_out: self.dim_out,
        })
    }

    pub fn verify(&self) -> ChannelCheck {
        let tp = self.tp_residual().to_f64_lossy();
        let min_eig = linalg::min_eigenvalue(&self.choi()).to_f64_lossy();
        ChannelCheck {
            tp_residual: tp,
            choi_min_eigenvalue: min_eig,
            passes: tp <= TP_TOL && min_eig >= CHOI_FLOOR,
        }
    }

    pub fn cast<U: Real>(&self) -> ChannelRep<U> {
        ChannelRep {
            kraus: self
                .kraus
                .iter()
                .map(|k| k.map(|z| C::new(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy()))))
                .collect(),
            dim_in: self.dim_in,
            dim_out: self.dim_out,
        }
    }
}

/// Union of channels acting on orthogonal input blocks, each writing into its
/// own output block. `parts` holds `(channel, input offset, output offset)`
/// and must cover the input space exactly once.
pub fn block_diagonal<T: Real>(
    parts: &[(ChannelRep<T>, usize, usize)],
    dim_in: usize,
    dim_out: usize,
) -> Result<ChannelRep<T>> {
    let mut kraus = Vec::new();
    for (ch, i0, o0) in parts {
        if i0 + ch.dim_in > dim_in || o0 + ch.dim_out > dim_out {
            return Err(malformed("block channel out of range"));
        }
        for k in &ch.kraus {
            kraus.push(embed(k, dim_out, dim_in, *o0, *i0));
        }
    }
    ChannelRep::with_dims(kraus, dim_in, dim_out)
}

/// Discards the input and prepares `state`.
pub fn prepare_channel<T: Real>(dim_in: usize, state: &CMat<T>) -> Result<ChannelRep<T>> {
    let d = state.nrows();
    let (vals, vecs) = linalg::eigh(state);
    let mut kraus = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= T::lit(KRAUS_CUTOFF) {
            continue;
        }
        let v = vecs.column(k) * cr(lam.sqrt());
        for i in 0..dim_in {
            kraus.push(CMat::from_fn(d, dim_in, |a, b| if b == i { v[a] } else { zero() }));
        }
    }
    ChannelRep::with_dims(kraus, dim_in, d)
}

/// Dephasing in the computational basis: measure and keep the outcome.
pub fn pvm_channel<T: Real>(basis_dim: usize) -> Result<ChannelRep<T>> {
    if basis_dim < 2 {
        return Err(malformed("dephasing needs dimension at least 2"));
    }
    Ok(ChannelRep {
        kraus: (0..basis_dim).map(|k| unit_op(basis_dim, basis_dim, k, k)).collect(),
        dim_in: basis_dim,
        dim_out: basis_dim,
    })
}

/// Classical post-processing by a column-stochastic matrix `t[a][b] = P(a | b)`.
pub fn classical_channel<T: Real>(t: &[Vec<T>]) -> Result<ChannelRep<T>> {
    let rows = t.len();
    let cols = t.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || t.iter().any(|r| r.len() != cols) {
        return Err(malformed("stochastic matrix must be a non-empty rectangle"));
    }
    let tol = T::lit(1e-9);
    for b in 0..cols {
        let mut sum = T::zero();
        for row in t {
            if row[b] < -tol {
                return Err(malformed("negative transition probability"));
            }
            sum += row[b];
        }
        if (sum - T::one()).abs() > tol {
            return Err(malformed(format!("column {b} sums to {sum}")));
        }
    }
    let mut kraus = Vec::new();
    for (a, row) in t.iter().enumerate() {
        for (b, &x) in row.iter().enumerate() {
            if x > T::zero() {
                kraus.push(unit_op::<T>(rows, cols, a, b) * cr(x.sqrt()));
            }
        }
    }
    ChannelRep::with_dims(kraus, cols, rows)
}

fn check_overlap<T: Real>(f: T, name: &str) -> Result<()> {
    if !f.is_finite_val() || f < T::zero() || f > T::one() {
        return Err(malformed(format!("{name} = {f} outside [0, 1]")));
    }
    Ok(())
}

/// Standard-form pure pair `(|e1><e1|, |psi><psi|)` with `|<e1|psi>|^2 = f`.
pub fn standard_pure_pair<T: Real>(f: T) -> DenseOperatorPair<T> {
    let theta = f.max(T::zero()).min(T::one()).sqrt().acos();
    DenseOperatorPair {
        a: linalg::outer(&linalg::angle_vector(T::zero())),
        b: linalg::outer(&linalg::angle_vector(theta)),
    }
}

/// Closed-form qubit channel taking the standard-form pure pair with squared
/// overlap `f_in` to the one with `f_out`. Exists iff `f_in <= f_out`.
///
/// With `c = sqrt(F)`, `s = sqrt(1 - F)`, `l1 = c_in / c_out`, `l2 = sqrt(1 - l1^2)`:
/// `K1 = diag(1, c_in s_out / (c_out s_in))`, `K2 = [[0, l2 c_out / s_in], [0, l2 s_out / s_in]]`.
pub fn uhlmann_channel<T: Real>(f_in: T, f_out: T) -> Result<ChannelRep<T>> {
    check_overlap(f_in, "F_in")?;
    check_overlap(f_out, "F_out")?;
    let tol = T::lit(1e-12);
    if f_in > f_out + tol {
        return Err(Error::Infeasible(format!(
            "overlap cannot decrease: F_in = {f_in} > F_out = {f_out}"
        )));
    }
    if (f_in - f_out).abs() <= tol {
        return Ok(ChannelRep::identity(2));
    }
    let (c1, s1) = (f_in.sqrt(), (T::one() - f_in).sqrt());
    let (c2, s2) = (f_out.sqrt(), (T::one() - f_out).sqrt());
    let l1 = c1 / c2;
    let l2 = (T::one() - l1 * l1).max(T::zero()).sqrt();
    let mut k1 = CMat::identity(2, 2);
    k1[(1, 1)] = cr(c1 * s2 / (c2 * s1));
    let mut k2 = CMat::zeros(2, 2);
    k2[(0, 1)] = cr(l2 * c2 / s1);
    k2[(1, 1)] = cr(l2 * s2 / s1);
    Ok(ChannelRep {
        kraus: vec![k1, k2],
        dim_in: 2,
        dim_out: 2,
    })
}

/// Same map as [`uhlmann_channel`], synthesized by the Choi feasibility
/// oracle instead of the closed form.
pub fn uhlmann_channel_via_oracle<T: Real>(
    f_in: T,
    f_out: T,
    opts: &FeasibilityOptions,
) -> Result<ChannelRep<T>> {
    check_overlap(f_in, "F_in")?;
    check_overlap(f_out, "F_out")?;
    if f_in > f_out + T::lit(1e-12) {
        return Err(Error::Infeasible(format!(
            "overlap cannot decrease: F_in = {f_in} > F_out = {f_out}"
        )));
    }
    let prob = feasibility::FeasibilityProblem::new(standard_pure_pair(f_in), standard_pure_pair(f_out), opts)?;
    let res = feasibility::solve(&prob);
    match (res.status, res.channel) {
        (FeasibilityStatus::Feasible, Some(ch)) => Ok(ch),
        _ => Err(Error::Infeasible(format!(
            "oracle undetermined, residual {}",
            res.residual
        ))),
    }
}

/// Sends the qubit block to a one-dimensional output: `X -> Tr(X)`.
fn trace_to_scalar<T: Real>(d: usize) -> ChannelRep<T> {
    ChannelRep {
        kraus: (0..d).map(|k| unit_op(1, d, 0, k)).collect(),
        dim_in: d,
        dim_out: 1,
    }
}

/// Qubit map raising a block overlap from `f` to `f_new`, with a
/// one-dimensional output when `f_new = 1`.
fn raise_block<T: Real>(f: T, f_new: T) -> Result<ChannelRep<T>> {
    if f_new >= T::one() {
        Ok(trace_to_scalar(2))
    } else {
        uhlmann_channel(f, f_new)
    }
}

/// Applies an overlap-raising map to every quantum block of the canonical
/// realization of `pair`. `new_overlaps[i]` is the target overlap of
/// canonical block `i` and is ignored on classical rows. Returns the channel
/// and the output pair in matching (unsorted) block order.
pub fn per_block_uhlmann<T: Real>(pair: &FlatPair<T>, new_overlaps: &[T]) -> Result<(ChannelRep<T>, FlatPair<T>)> {
    let c = pair.canonicalize()?;
    if new_overlaps.len() != c.len() {
        return Err(malformed("one target overlap per canonical block required"));
    }
    let mut out_blocks = Vec::with_capacity(c.len());
    let mut parts = Vec::with_capacity(c.len());
    let in_dims = block_dims(&c);
    let in_off = block_offsets(&in_dims);
    let mut o = 0;
    for (k, blk) in c.blocks.iter().enumerate() {
        if blk.is_quantum() {
            let f = blk.f.unwrap_or_else(T::one);
            let g = new_overlaps[k];
            check_overlap(g, "target overlap")?;
            let g = if g >= T::one() - T::lit(crate::flatpair::OVERLAP_TOL) { T::one() } else { g };
            let ch = raise_block(f, g)?;
            let d = ch.dim_out;
            parts.push((ch, in_off[k], o));
            o += d;
            out_blocks.push(Block::new(blk.p, blk.q, g));
        } else {
            parts.push((ChannelRep::identity(1), in_off[k], o));
            o += 1;
            out_blocks.push(*blk);
        }
    }
    let ch = block_diagonal(&parts, in_dims.iter().sum(), o)?;
    Ok((ch, FlatPair::new(out_blocks)))
}

/// For an everywhere-overlapping pair: raise every block to the largest
/// overlap `F_max`, then forget the block index. The output is the single
/// block `(Tr A, Tr B, F_max)`.
pub fn merge_to_max_overlap<T: Real>(pair: &FlatPair<T>) -> Result<(ChannelRep<T>, FlatPair<T>)> {
    let c = pair.canonicalize()?;
    if !c.classify()?.everywhere_overlapping {
        return Err(hypothesis("block merging needs an everywhere-overlapping pair"));
    }
    let f_max = c
        .blocks
        .iter()
        .filter_map(|b| b.overlap())
        .fold(T::zero(), |a, f| a.max(f));
    let (ta, tb) = c.trace_pair();
    let in_dims = block_dims(&c);
    let in_off = block_offsets(&in_dims);
    let out_dim = if f_max < T::one() { 2 } else { 1 };
    let mut parts = Vec::with_capacity(c.len());
    for (k, blk) in c.blocks.iter().enumerate() {
        let ch = if out_dim == 1 {
            trace_to_scalar(in_dims[k])
        } else {
            uhlmann_channel(blk.f.unwrap_or_else(T::one), f_max)?
        };
        parts.push((ch, in_off[k], 0));
    }
    let ch = block_diagonal(&parts, in_dims.iter().sum(), out_dim)?;
    Ok((ch, FlatPair::new(vec![Block::new(ta, tb, f_max)])))
}

/// Output of [`power_universal_protocol`].
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct PowerUniversal<T: Real> {
    /// Number of copies of the source pair consumed.
    pub m: usize,
    /// Smallest `m` for which the measurement is a valid POVM.
    pub m0: usize,
    /// `false` when `m` exceeds the search cap; then only `m` is reported.
    pub materialized: bool,
    #[serde(serialize_with = "ser_mats")]
    pub povm: Vec<CMat<T>>,
    pub channel: Option<ChannelRep<T>>,
    /// Largest entrywise deviation of `sum E_i` from the identity.
    pub povm_residual: T,
    /// Frobenius distance of the channel output from the dense target.
    pub residual: T,
    /// Post-measurement overlap of outcome `i`, before the overlap-raising step.
    pub outcome_overlaps: Vec<T>,
}

/// Converts `m` copies of a pure pair with squared overlap `f` into an
/// everywhere-overlapping target. Works on the span of `|a>^m`, `|b>^m`, where
/// the source is the standard-form pair with overlap `F^m`.
///
/// Outcome `i` of the POVM
/// `E_i = p_i |e1><e1| + ((q_i - F^m p_i) / (1 - F^m)) |e2><e2|`
/// occurs with probabilities `(p_i, q_i)` and leaves a pure pair with overlap
/// `F^m p_i / q_i`, which is raised to the target overlap of block `i`.
pub fn power_universal_protocol<T: Real>(f: T, target: &FlatPair<T>, m_cap: usize) -> Result<PowerUniversal<T>> {
    check_overlap(f, "F")?;
    if !(f > T::zero() && f < T::one()) {
        return Err(hypothesis("source overlap must lie strictly between 0 and 1"));
    }
    let t = target.canonicalize()?;
    let class = t.classify()?;
    if !class.everywhere_overlapping {
        return Err(hypothesis("target must be everywhere overlapping with positive weights"));
    }
    if !t.is_normalized() {
        return Err(malformed("target must be normalized"));
    }
    let slack = T::lit(1e-15);
    let feasible_at = |g: T| {
        t.blocks.iter().all(|b| {
            let fb = b.f.unwrap_or_else(T::one);
            g * b.p < b.q && g * b.p / b.q <= fb + slack
        })
    };
    let povm_valid = |g: T| t.blocks.iter().all(|b| g * b.p < b.q);
    let mut m0 = None;
    let mut m = None;
    let mut g = T::one();
    for k in 1..=m_cap.max(1) {
        g *= f;
        if m0.is_none() && povm_valid(g) {
            m0 = Some(k);
        }
        if feasible_at(g) {
            m = Some(k);
            break;
        }
    }
    let Some(m) = m else {
        // F^m <= min q_i F_i / p_i suffices; one extra copy covers the strict POVM condition.
        let bound = t
            .blocks
            .iter()
            .map(|b| b.q * b.f.unwrap_or_else(T::one) / b.p)
            .fold(T::infinity(), |a, x| a.min(x));
        let mm = (bound.ln() / f.ln()).ceil().to_f64_lossy().max(1.0) as usize + 1;
        return Ok(PowerUniversal {
            m: mm,
            m0: m0.unwrap_or(mm),
            materialized: false,
            povm: Vec::new(),
            channel: None,
            povm_residual: T::zero(),
            residual: T::zero(),
            outcome_overlaps: Vec::new(),
        });
    };
    let gm = f.powi(m as i32);
    let source = standard_pure_pair(gm);
    let out_dims = block_dims(&t);
    let out_off = block_offsets(&out_dims);
    let dim_out: usize = out_dims.iter().sum();

    let mut povm = Vec::with_capacity(t.len());
    let mut kraus = Vec::new();
    let mut outcome_overlaps = Vec::with_capacity(t.len());
    let mut sum = CMat::<T>::zeros(2, 2);
    for (i, b) in t.blocks.iter().enumerate() {
        let r = (b.q - gm * b.p) / (T::one() - gm);
        let e = linalg::diag(&[b.p, r]);
        sum += &e;
        let sqrt_e = linalg::diag(&[b.p.sqrt(), r.max(T::zero()).sqrt()]);
        povm.push(e);
        let post = (gm * b.p / b.q).min(T::one());
        outcome_overlaps.push(post);
        let step = if b.is_quantum() {
            uhlmann_channel(post, b.f.unwrap_or_else(T::one))?
        } else {
            trace_to_scalar(2)
        };
        for k in &step.kraus {
            kraus.push(embed(k, dim_out, 2, out_off[i], 0) * &sqrt_e);
        }
    }
    let channel = ChannelRep::with_dims(kraus, 2, dim_out)?;
    let povm_residual = linalg::max_abs_diff(&sum, &CMat::identity(2, 2));
    let expected = jordan::realize_dense(&t)?;
    let got = channel.apply_pair(&source)?;
    let residual = linalg::fro(&(got.a - expected.a)).max(linalg::fro(&(got.b - expected.b)));
    Ok(PowerUniversal {
        m,
        m0: m0.unwrap_or(m),
        materialized: true,
        povm,
        channel: Some(channel),
        povm_residual,
        residual,
        outcome_overlaps,
    })
}

/// Output of [`epsilon_smooth`].
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct Smoothed<T: Real> {
    /// Smoothed target, blocks in the canonical order of the input target.
    pub pair: FlatPair<T>,
    /// Rotation applied to every quantum block.
    pub eta: T,
    /// `(sum over rotated blocks p_i cos(eta) + sum over other blocks p_i)^2`.
    pub fidelity_bound: T,
}

/// Rotates the first state of every quantum block of `target` towards the
/// second by `eta = min(theta_min (1 - 1e-6), arccos sqrt(1 - eps))`, so
/// every such overlap strictly increases while the first state moves by
/// fidelity at least `1 - eps`.
pub fn epsilon_smooth<T: Real>(target: &FlatPair<T>, eps: T) -> Result<Smoothed<T>> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(malformed(format!("eps = {eps} outside (0, 1)")));
    }
    let t = target.canonicalize()?;
    let theta_min = t
        .blocks
        .iter()
        .filter(|b| b.is_quantum())
        .map(|b| b.f.unwrap_or_else(T::one).sqrt().acos())
        .fold(T::infinity(), |a, x| a.min(x));
    if !theta_min.is_finite_val() {
        return Err(hypothesis("target states commute"));
    }
    let eta = (theta_min * T::lit(1.0 - 1e-6)).min((T::one() - eps).sqrt().acos());
    let (ta, _) = t.trace_pair();
    let mut fid = T::zero();
    let blocks = t
        .blocks
        .iter()
        .map(|b| {
            if b.is_quantum() {
                fid += b.p * eta.cos();
                let theta = b.f.unwrap_or_else(T::one).sqrt().acos();
                let c = (theta - eta).cos();
                Block::new(b.p, b.q, c * c)
            } else {
                fid += b.p;
                *b
            }
        })
        .collect();
    let fid = fid / ta;
    Ok(Smoothed {
        pair: FlatPair {
            label: t.label.clone(),
            blocks,
        },
        eta,
        fidelity_bound: fid * fid,
    })
}

/// Fidelity between the first states of `target` and `smoothed`, evaluated on
/// dense realizations that keep the second state fixed. `smoothed` must list
/// blocks in the canonical order of `target`, as [`epsilon_smooth`] returns them.
pub fn smoothing_fidelity_dense<T: Real>(target: &FlatPair<T>, smoothed: &FlatPair<T>) -> Result<T> {
    let t = target.canonicalize()?;
    if t.len() != smoothed.len() {
        return Err(malformed("block lists differ in length"));
    }
    let x = jordan::realize_ordered(&t, Orientation::SecondAligned)?;
    let y = jordan::realize_ordered(smoothed, Orientation::SecondAligned)?;
    if x.dim() != y.dim() {
        return Err(malformed("block structures differ"));
    }
    let b_gap = linalg::max_abs_diff(&x.b, &y.b);
    if b_gap > T::lit(1e-12) {
        return Err(malformed("smoothing changed the second state"));
    }
    let (ta, _) = t.trace_pair();
    let s = cr(T::one() / ta);
    Ok(linalg::fidelity(&(x.a * s), &(y.a * s)))
}

/// `sum_{l = 0}^{n - 1} in^l (x) out^(n - 1 - l)`, canonicalized and not normalized.
pub fn catalyst<T: Real>(pair_in: &FlatPair<T>, pair_out: &FlatPair<T>, n: usize) -> Result<FlatPair<T>> {
    if n == 0 {
        return Err(malformed("catalyst needs n >= 1"));
    }
    let mut acc = FlatPair::zero();
    for l in 0..n {
        acc = acc.direct_sum(&pair_in.tensor_power(l).tensor(&pair_out.tensor_power(n - 1 - l)));
    }
    acc.canonicalize()
}
