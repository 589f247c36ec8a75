//! Numerical channel-existence oracle: is there one channel with
//! `C(rho) = rho'` and `C(sigma) = sigma'`?
//!
//! The Choi matrix of such a channel lies in the intersection of the PSD cone
//! with an affine set (trace preservation plus the two image constraints).
//! Alternating projections between the two sets (Douglas-Rachford by default,
//! Dykstra on request) find a point of the intersection when it is non-empty.
//! Failure to converge is reported as undetermined, never as infeasible.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::channels::{classical_channel, ChannelRep, KRAUS_CUTOFF};
use crate::error::{malformed, Error, Result};
use crate::flatpair::FlatPair;
use crate::jordan::{realize_dense, DenseOperatorPair};
use crate::linalg::{self, CMat};
use crate::scalar::{Real, C};

/// Tolerance on trace and positivity of the four operators.
pub const STATE_TOL: f64 = 1e-9;
/// Residual below which the commutative solver reports feasibility.
pub const CLASSICAL_TOL: f64 = 1e-9;

/// Projection scheme used by [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Fast on thin feasible sets, where Dykstra stalls.
    #[default]
    DouglasRachford,
    Dykstra,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOptions {
    pub tolerance: f64,
    pub max_iters: usize,
    /// Largest admissible Choi dimension `d_in * d_out`.
    pub dimension_cap: usize,
    #[serde(default)]
    pub engine: Engine,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions {
            tolerance: 1e-7,
            max_iters: 20_000,
            dimension_cap: 4096,
            engine: Engine::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem<T: Real> {
    pub inputs: DenseOperatorPair<T>,
    pub outputs: DenseOperatorPair<T>,
    pub d_in: usize,
    pub d_out: usize,
    pub tolerance: f64,
    pub max_iters: usize,
    pub engine: Engine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct FeasibilityResult<T: Real> {
    pub status: FeasibilityStatus,
    /// Affine-constraint violation of the final cone iterate.
    pub residual: T,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelRep<T>>,
    /// Frobenius error of the extracted channel on the two inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_residual: Option<T>,
    /// Column-stochastic matrix found by [`solve_classical`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<Vec<Vec<T>>>,
}

fn check_state<T: Real>(m: &CMat<T>, name: &str) -> Result<()> {
    let tol = T::lit(STATE_TOL);
    if !m.is_square() {
        return Err(malformed(format!("{name} is not square")));
    }
    if linalg::max_abs_diff(m, &m.adjoint()) > tol {
        return Err(malformed(format!("{name} is not Hermitian")));
    }
    let tr = linalg::real_trace(m);
    if (tr - T::one()).abs() > tol {
        return Err(malformed(format!("{name} has trace {tr} != 1")));
    }
    if linalg::min_eigenvalue(m) < -tol {
        return Err(malformed(format!("{name} is not positive semidefinite")));
    }
    Ok(())
}

impl<T: Real> FeasibilityProblem<T> {
    pub fn new(inputs: DenseOperatorPair<T>, outputs: DenseOperatorPair<T>, opts: &FeasibilityOptions) -> Result<Self> {
        check_state(&inputs.a, "rho")?;
        check_state(&inputs.b, "sigma")?;
        check_state(&outputs.a, "rho'")?;
        check_state(&outputs.b, "sigma'")?;
        if inputs.a.shape() != inputs.b.shape() || outputs.a.shape() != outputs.b.shape() {
            return Err(malformed("the two states of a pair must have equal dimension"));
        }
        let (d_in, d_out) = (inputs.dim(), outputs.dim());
        if d_in * d_out > opts.dimension_cap {
            return Err(Error::DimensionCap {
                dim: d_in * d_out,
                cap: opts.dimension_cap,
            });
        }
        Ok(FeasibilityProblem {
            inputs,
            outputs,
            d_in,
            d_out,
            tolerance: opts.tolerance,
            max_iters: opts.max_iters,
            engine: opts.engine,
        })
    }

    /// Instance between the canonical dense realizations of two normalized pairs.
    pub fn from_pairs(pair_in: &FlatPair<T>, pair_out: &FlatPair<T>, opts: &FeasibilityOptions) -> Result<Self> {
        let dim_in = crate::jordan::block_dims(&pair_in.canonicalize()?).iter().sum::<usize>();
        let dim_out = crate::jordan::block_dims(&pair_out.canonicalize()?).iter().sum::<usize>();
        if dim_in * dim_out > opts.dimension_cap {
            return Err(Error::DimensionCap {
                dim: dim_in * dim_out,
                cap: opts.dimension_cap,
            });
        }
        Self::new(realize_dense(pair_in)?, realize_dense(pair_out)?, opts)
    }
}

/// `n` copies of `pair_in` against `m` copies of `pair_out`, as literal
/// Kronecker powers of the canonical realizations.
pub fn tensor_instance<T: Real>(
    pair_in: &FlatPair<T>,
    pair_out: &FlatPair<T>,
    n: usize,
    m: usize,
    opts: &FeasibilityOptions,
) -> Result<FeasibilityProblem<T>> {
    let a = realize_dense(pair_in)?;
    let b = realize_dense(pair_out)?;
    let dim = (a.dim() as f64).powi(n as i32) * (b.dim() as f64).powi(m as i32);
    if dim > opts.dimension_cap as f64 {
        return Err(Error::DimensionCap {
            dim: dim.min(usize::MAX as f64) as usize,
            cap: opts.dimension_cap,
        });
    }
    FeasibilityProblem::new(a.kron_power(n), b.kron_power(m), opts)
}

/// Affine set `{x : A x = b}` with a precomputed projector.
struct AffineSet<T: Real> {
    rows: Vec<Vec<(usize, T)>>,
    rhs: Vec<T>,
    gram_pinv: DMatrix<T>,
}

impl<T: Real> AffineSet<T> {
    fn new(rows: Vec<Vec<(usize, T)>>, rhs: Vec<T>, n: usize) -> Self {
        let m = rows.len();
        let mut dense = vec![T::zero(); n];
        let mut gram = DMatrix::<T>::zeros(m, m);
        for i in 0..m {
            for &(c, v) in &rows[i] {
                dense[c] += v;
            }
            for j in i..m {
                let s = rows[j].iter().fold(T::zero(), |acc, &(c, v)| acc + v * dense[c]);
                gram[(i, j)] = s;
                gram[(j, i)] = s;
            }
            for &(c, _) in &rows[i] {
                dense[c] = T::zero();
            }
        }
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        let cut = top * T::lit(1e-12);
        let inv = eig.eigenvalues.map(|x| if x > cut { T::one() / x } else { T::zero() });
        let gram_pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        AffineSet { rows, rhs, gram_pinv }
    }

    fn defect(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| row.iter().fold(T::zero(), |acc, &(c, v)| acc + v * x[c]) - b)
            .collect()
    }

    fn residual(&self, x: &[T]) -> T {
        self.defect(x).iter().fold(T::zero(), |a, &d| a + d * d).sqrt()
    }

    fn project(&self, x: &[T]) -> Vec<T> {
        let d = nalgebra::DVector::from_vec(self.defect(x));
        let y = &self.gram_pinv * d;
        let mut out = x.to_vec();
        for (row, &yi) in self.rows.iter().zip(y.iter()) {
            for &(c, v) in row {
                out[c] -= v * yi;
            }
        }
        out
    }
}

/// Complex linear functional `sum w_k J_k = b` as two real rows on the
/// `(Re J, Im J)` vectorization.
fn push_complex_row<T: Real>(
    rows: &mut Vec<Vec<(usize, T)>>,
    rhs: &mut Vec<T>,
    terms: &[(usize, C<T>)],
    b: C<T>,
    n2: usize,
) {
    let mut re = Vec::with_capacity(2 * terms.len());
    let mut im = Vec::with_capacity(2 * terms.len());
    for &(k, w) in terms {
        if w.re != T::zero() {
            re.push((k, w.re));
            im.push((n2 + k, w.re));
        }
        if w.im != T::zero() {
            re.push((n2 + k, -w.im));
            im.push((k, w.im));
        }
    }
    rows.push(re);
    rhs.push(b.re);
    rows.push(im);
    rhs.push(b.im);
}

fn choi_affine<T: Real>(prob: &FeasibilityProblem<T>) -> AffineSet<T> {
    let (di, d_o) = (prob.d_in, prob.d_out);
    let dd = di * d_o;
    let n2 = dd * dd;
    let idx = |r: usize, c: usize| r * dd + c;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..di {
        for j in 0..di {
            let terms: Vec<_> = (0..d_o)
                .map(|a| (idx(i * d_o + a, j * d_o + a), C::new(T::one(), T::zero())))
                .collect();
            let b = if i == j { T::one() } else { T::zero() };
            push_complex_row(&mut rows, &mut rhs, &terms, C::new(b, T::zero()), n2);
        }
    }
    for (src, dst) in [(&prob.inputs.a, &prob.outputs.a), (&prob.inputs.b, &prob.outputs.b)] {
        for a in 0..d_o {
            for b in 0..d_o {
                let mut terms = Vec::with_capacity(di * di);
                for i in 0..di {
                    for j in 0..di {
                        let w = src[(i, j)];
                        if w.re != T::zero() || w.im != T::zero() {
                            terms.push((idx(i * d_o + a, j * d_o + b), w));
                        }
                    }
                }
                push_complex_row(&mut rows, &mut rhs, &terms, dst[(a, b)], n2);
            }
        }
    }
    AffineSet::new(rows, rhs, 2 * n2)
}

fn to_mat<T: Real>(x: &[T], dd: usize) -> CMat<T> {
    let n2 = dd * dd;
    CMat::from_fn(dd, dd, |r, c| C::new(x[r * dd + c], x[n2 + r * dd + c]))
}

fn from_mat<T: Real>(m: &CMat<T>) -> Vec<T> {
    let dd = m.nrows();
    let n2 = dd * dd;
    let mut x = vec![T::zero(); 2 * n2];
    for r in 0..dd {
        for c in 0..dd {
            x[r * dd + c] = m[(r, c)].re;
            x[n2 + r * dd + c] = m[(r, c)].im;
        }
    }
    x
}

/// Dykstra iteration between a closed convex cone and an affine set. The
/// affine set needs no correction term. `accept` is consulted whenever the
/// cone iterate meets the affine constraints to within `tol`.
fn dykstra<T: Real>(
    cone: impl Fn(&[T]) -> Vec<T>,
    aff: &AffineSet<T>,
    x0: Vec<T>,
    tol: T,
    max_iters: usize,
    mut accept: impl FnMut(&[T]) -> bool,
) -> (bool, T, usize, Vec<T>) {
    let mut x = x0;
    let mut p = vec![T::zero(); x.len()];
    let mut y = cone(&x);
    let mut residual = aff.residual(&y);
    for it in 1..=max_iters {
        let shifted: Vec<T> = x.iter().zip(&p).map(|(&a, &b)| a + b).collect();
        y = cone(&shifted);
        for k in 0..p.len() {
            p[k] = shifted[k] - y[k];
        }
        x = aff.project(&y);
        residual = aff.residual(&y);
        if residual < tol && accept(&y) {
            return (true, residual, it, y);
        }
    }
    (false, residual, max_iters, y)
}

/// Past steps kept by the Anderson extrapolation in [`douglas_rachford`].
pub const ANDERSON_MEMORY: usize = 16;

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
}

fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Anderson extrapolation `g - dG gamma` with `gamma` the ridge-regularized
/// least-squares fit of `f` by the columns of `dF`.
fn anderson_point<T: Real>(g: &[T], f: &[T], dg: &VecDeque<Vec<T>>, df: &VecDeque<Vec<T>>) -> Option<Vec<T>> {
    let m = df.len();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let mut gram = DMatrix::<T>::zeros(m, m);
    let mut rhs = nalgebra::DVector::<T>::zeros(m);
    for i in 0..m {
        for j in i..m {
            let v = dot(&df[i], &df[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        rhs[i] = dot(&df[i], f);
    }
    let ridge = T::lit(1e-10) * (0..m).fold(T::zero(), |a, i| a + gram[(i, i)]) + T::lit(1e-300);
    for i in 0..m {
        gram[(i, i)] += ridge;
    }
    let gamma = gram.cholesky()?.solve(&rhs);
    let mut out = g.to_vec();
    for (k, col) in dg.iter().enumerate() {
        for (o, &c) in out.iter_mut().zip(col) {
            *o -= gamma[k] * c;
        }
    }
    out.iter().all(|x| x.is_finite_val()).then_some(out)
}

/// Douglas-Rachford splitting on the same two projections, with safeguarded
/// Anderson extrapolation of the fixed-point map. The cone iterate converges
/// to a point of the intersection when it is non-empty, and the affine
/// residual plateaus when it is empty.
fn douglas_rachford<T: Real>(
    cone: impl Fn(&[T]) -> Vec<T>,
    aff: &AffineSet<T>,
    x0: Vec<T>,
    tol: T,
    max_iters: usize,
    mut accept: impl FnMut(&[T]) -> bool,
) -> (bool, T, usize, Vec<T>) {
    // One application of the DR map: the cone point and the next iterate.
    let step = |z: &[T]| {
        let y = cone(z);
        let refl: Vec<T> = y.iter().zip(z).map(|(&a, &b)| a + a - b).collect();
        let x = aff.project(&refl);
        let g: Vec<T> = z.iter().zip(&x).zip(&y).map(|((&zi, &xi), &yi)| zi + xi - yi).collect();
        (y, g)
    };
    let (mut y, mut g) = step(&x0);
    let mut f = sub(&g, &x0);
    let mut dg: VecDeque<Vec<T>> = VecDeque::with_capacity(ANDERSON_MEMORY);
    let mut df: VecDeque<Vec<T>> = VecDeque::with_capacity(ANDERSON_MEMORY);
    let mut residual = aff.residual(&y);
    let mut it = 1;
    while it <= max_iters {
        residual = aff.residual(&y);
        if residual < tol && accept(&y) {
            return (true, residual, it, y);
        }
        let mut cand = if df.is_empty() { None } else { anderson_point(&g, &f, &dg, &df) };
        let (mut y2, mut g2, mut f2);
        loop {
            let next = cand.take().unwrap_or_else(|| g.clone());
            (y2, g2) = step(&next);
            f2 = sub(&g2, &next);
            it += 1;
            let extrapolated = next != g;
            if extrapolated && norm(&f2) > T::lit(2.0) * norm(&f) {
                dg.clear();
                df.clear();
                continue;
            }
            break;
        }
        if dg.len() == ANDERSON_MEMORY {
            dg.pop_front();
            df.pop_front();
        }
        dg.push_back(sub(&g2, &g));
        df.push_back(sub(&f2, &f));
        (y, g, f) = (y2, g2, f2);
    }
    (false, residual, max_iters, y)
}

/// Runs the Choi-matrix oracle.
pub fn solve<T: Real>(prob: &FeasibilityProblem<T>) -> FeasibilityResult<T> {
    let (di, d_o) = (prob.d_in, prob.d_out);
    let dd = di * d_o;
    let aff = choi_affine(prob);
    let tol = T::lit(prob.tolerance);
    let x0 = from_mat(&(CMat::<T>::identity(dd, dd) * C::new(T::one() / T::lit(d_o as f64), T::zero())));
    let cone = |x: &[T]| from_mat(&linalg::psd_clip(&to_mat(x, dd)));
    let mut found: Option<(ChannelRep<T>, T)> = None;
    let accept = |y: &[T]| {
        let j = to_mat(y, dd);
        let Ok(ch) = ChannelRep::from_choi(&j, di, d_o, T::lit(KRAUS_CUTOFF)).and_then(|c| c.renormalized()) else {
            return false;
        };
        let Ok(img) = ch.apply_pair(&prob.inputs) else {
            return false;
        };
        let err = linalg::fro(&(img.a - &prob.outputs.a)).max(linalg::fro(&(img.b - &prob.outputs.b)));
        if err <= tol * T::lit(10.0) && ch.verify().passes {
            found = Some((ch, err));
            true
        } else {
            false
        }
    };
    let (ok, residual, iterations, _) = match prob.engine {
        Engine::DouglasRachford => douglas_rachford(cone, &aff, x0, tol, prob.max_iters, accept),
        Engine::Dykstra => dykstra(cone, &aff, x0, tol, prob.max_iters, accept),
    };
    match (ok, found) {
        (true, Some((ch, err))) => FeasibilityResult {
            status: FeasibilityStatus::Feasible,
            residual,
            iterations,
            channel: Some(ch),
            image_residual: Some(err),
            stochastic: None,
        },
        _ => FeasibilityResult {
            status: FeasibilityStatus::Undetermined,
            residual,
            iterations,
            channel: None,
            image_residual: None,
            stochastic: None,
        },
    }
}

/// Searches a column-stochastic `T` with `T p = p'` and `T q = q'` by the same
/// alternating projections on the nonnegative orthant.
pub fn solve_classical<T: Real>(p: &[T], q: &[T], p2: &[T], q2: &[T], max_iters: usize) -> Result<FeasibilityResult<T>> {
    if p.len() != q.len() || p2.len() != q2.len() || p.is_empty() || p2.is_empty() {
        return Err(malformed("input and output vectors must have matching, non-zero lengths"));
    }
    let sum = |v: &[T]| v.iter().fold(T::zero(), |a, &x| a + x);
    let tol9 = T::lit(STATE_TOL);
    if (sum(p) - sum(p2)).abs() > tol9 || (sum(q) - sum(q2)).abs() > tol9 {
        return Err(Error::NormalizationMismatch {
            in_a: sum(p).to_f64_lossy(),
            in_b: sum(q).to_f64_lossy(),
            out_a: sum(p2).to_f64_lossy(),
            out_b: sum(q2).to_f64_lossy(),
        });
    }
    if [p, q, p2, q2].iter().any(|v| v.iter().any(|&x| x < T::zero())) {
        return Err(malformed("negative probability"));
    }
    let (m, n) = (p2.len(), p.len());
    let idx = |a: usize, b: usize| a * n + b;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for b in 0..n {
        rows.push((0..m).map(|a| (idx(a, b), T::one())).collect());
        rhs.push(T::one());
    }
    for (src, dst) in [(p, p2), (q, q2)] {
        for a in 0..m {
            rows.push((0..n).filter(|&b| src[b] != T::zero()).map(|b| (idx(a, b), src[b])).collect());
            rhs.push(dst[a]);
        }
    }
    let aff = AffineSet::new(rows, rhs, m * n);
    let x0 = vec![T::one() / T::lit(m as f64); m * n];
    let cone = |x: &[T]| x.iter().map(|&v| v.max(T::zero())).collect::<Vec<T>>();
    let (ok, residual, iterations, y) = dykstra(cone, &aff, x0, T::lit(CLASSICAL_TOL), max_iters, |_| true);
    if !ok {
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Undetermined,
            residual,
            iterations,
            channel: None,
            image_residual: None,
            stochastic: None,
        });
    }
    // Renormalize columns so the reported matrix is exactly stochastic.
    let mut t: Vec<Vec<T>> = (0..m).map(|a| (0..n).map(|b| y[idx(a, b)]).collect()).collect();
    for b in 0..n {
        let s = (0..m).fold(T::zero(), |acc, a| acc + t[a][b]);
        for row in t.iter_mut() {
            row[b] /= s;
        }
    }
    let apply = |v: &[T], a: usize| (0..n).fold(T::zero(), |acc, b| acc + t[a][b] * v[b]);
    let err = (0..m).fold(T::zero(), |acc, a| {
        acc.max((apply(p, a) - p2[a]).abs()).max((apply(q, a) - q2[a]).abs())
    });
    let channel = classical_channel(&t).ok();
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Feasible,
        residual,
        iterations,
        channel,
        image_residual: Some(err),
        stochastic: Some(t),
    })
}
