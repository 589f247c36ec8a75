//! Small dense complex linear algebra: Hermitian spectral calculus, Kronecker
//! products, fidelity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cr, Real, C};

pub type CMat<T> = DMatrix<C<T>>;
pub type CVec<T> = DVector<C<T>>;

/// Eigenvalues below this are clipped to zero before fractional powers.
pub const EIG_CLIP: f64 = 1e-14;

/// `(M + M^dagger) / 2`.
pub fn hermitize<T: Real>(m: &CMat<T>) -> CMat<T> {
    let half = cr(T::lit(0.5));
    (m + m.adjoint()) * half
}

/// Spectral decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh<T: Real>(m: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp_val(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `sum_k f(lambda_k) |v_k><v_k|` over the Hermitian part of `m`.
pub fn hermitian_map<T: Real>(m: &CMat<T>, f: impl Fn(T) -> T) -> CMat<T> {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut out = CMat::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let w = f(lam);
        if w == T::zero() {
            continue;
        }
        let v = vecs.column(k);
        out += (&v * v.adjoint()) * cr(w);
    }
    out
}

/// `M^s` for PSD `M` and `s > 0`, with eigenvalues below [`EIG_CLIP`] set to zero.
pub fn psd_power<T: Real>(m: &CMat<T>, s: T) -> CMat<T> {
    let clip = T::lit(EIG_CLIP);
    hermitian_map(m, |x| if x <= clip { T::zero() } else { x.powf(s) })
}

/// Orthogonal projection onto the support of PSD `m`.
pub fn support_projection<T: Real>(m: &CMat<T>) -> CMat<T> {
    let clip = T::lit(EIG_CLIP);
    hermitian_map(m, |x| if x <= clip { T::zero() } else { T::one() })
}

/// Clips negative eigenvalues of the Hermitian part.
pub fn psd_clip<T: Real>(m: &CMat<T>) -> CMat<T> {
    hermitian_map(m, |x| if x < T::zero() { T::zero() } else { x })
}

pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

pub fn trace<T: Real>(m: &CMat<T>) -> C<T> {
    m.trace()
}

pub fn real_trace<T: Real>(m: &CMat<T>) -> T {
    m.trace().re
}

/// Frobenius norm.
pub fn fro<T: Real>(m: &CMat<T>) -> T {
    m.iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr())
        .sqrt()
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue<T: Real>(m: &CMat<T>) -> T {
    eigh(m).0.first().copied().unwrap_or_else(T::zero)
}

/// Largest eigenvalue of the Hermitian part.
pub fn max_eigenvalue<T: Real>(m: &CMat<T>) -> T {
    eigh(m).0.last().copied().unwrap_or_else(T::zero)
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity<T: Real>(rho: &CMat<T>, sigma: &CMat<T>) -> T {
    let half = T::lit(0.5);
    let sr = psd_power(rho, half);
    let inner = &sr * sigma * &sr;
    let clip = T::lit(EIG_CLIP);
    let (vals, _) = eigh(&inner);
    let s = vals
        .into_iter()
        .filter(|&x| x > clip)
        .fold(T::zero(), |acc, x| acc + x.sqrt());
    s * s
}

/// Diagonal complex matrix from real entries.
pub fn diag<T: Real>(entries: &[T]) -> CMat<T> {
    let n = entries.len();
    CMat::from_fn(n, n, |i, j| if i == j { cr(entries[i]) } else { C::new(T::zero(), T::zero()) })
}

/// Rank-one `|v><v|`.
pub fn outer<T: Real>(v: &CVec<T>) -> CMat<T> {
    v * v.adjoint()
}

/// `cos(theta)|0> + sin(theta)|1>` in `C^2`.
pub fn angle_vector<T: Real>(theta: T) -> CVec<T> {
    CVec::from_vec(vec![cr(theta.cos()), cr(theta.sin())])
}

/// Maximum absolute entrywise difference.
pub fn max_abs_diff<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max((x - y).norm_sqr().sqrt()))
}

/// Block-diagonal direct sum.
pub fn direct_sum<T: Real>(blocks: &[CMat<T>]) -> CMat<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}
