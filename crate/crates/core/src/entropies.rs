//! The alpha-z relative entropy family on flat pairs, its multiplicative
//! homomorphisms, the tropical limit, and the general dense-matrix formula
//! used for cross-validation.
//!
//! For a block list `(p_i, q_i, F_i)` and a parameter point `(alpha, z)`:
//!
//! ```text
//! phi(alpha, z) = sum_{p_i, q_i > 0} p_i^alpha q_i^(1 - alpha) F_i^z
//! phi_T         = max_{p_i, q_i > 0} F_i
//! d_hat         = -ln(phi) / (z + 1),      d_hat_T = -ln(phi_T)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{malformed, Error, Result};
use crate::flatpair::FlatPair;
use crate::linalg::{self, eigh, CMat, EIG_CLIP};
use crate::scalar::{log_sum_exp, Real};

/// Slack allowed on the constraint `z >= max(alpha, 1 - alpha)`.
pub const PARAM_TOL: f64 = 1e-12;
/// Tolerance on the trace and Hermiticity of density matrices.
pub const DENSITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum ZParam<T> {
    Finite(T),
    /// The `z -> infinity` limit.
    Tropical,
}

/// A point `(alpha, z)` of the parameter family, `z` possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ParamPoint<T> {
    pub alpha: T,
    pub z: ZParam<T>,
}

fn z_floor<T: Real>(alpha: T) -> T {
    alpha.max(T::one() - alpha)
}

impl<T: Real> ParamPoint<T> {
    /// Validated finite point with `alpha in [0, 1]` and `z >= max(alpha, 1 - alpha)`.
    pub fn new(alpha: T, z: T) -> Result<Self> {
        check_alpha(alpha)?;
        if !z.is_finite_val() || z < z_floor(alpha) - T::lit(PARAM_TOL) {
            return Err(malformed(format!(
                "z = {z} below max(alpha, 1 - alpha) = {}",
                z_floor(alpha)
            )));
        }
        Ok(ParamPoint {
            alpha,
            z: ZParam::Finite(z),
        })
    }

    pub fn tropical(alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(ParamPoint {
            alpha,
            z: ZParam::Tropical,
        })
    }

    pub fn is_tropical(&self) -> bool {
        matches!(self.z, ZParam::Tropical)
    }

    pub fn compact(&self) -> CompactParam<T> {
        let w = match self.z {
            ZParam::Tropical => T::zero(),
            ZParam::Finite(z) => (z_floor(self.alpha) / z).min(T::one()),
        };
        CompactParam {
            alpha: self.alpha,
            w,
        }
    }
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !alpha.is_finite_val() || alpha < T::zero() || alpha > T::one() {
        return Err(malformed(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Compact coordinates `(alpha, w)` on `[0, 1]^2`, `w = max(alpha, 1 - alpha) / z`.
/// `w = 0` is the tropical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CompactParam<T> {
    pub alpha: T,
    pub w: T,
}

impl<T: Real> CompactParam<T> {
    pub fn new(alpha: T, w: T) -> Self {
        CompactParam { alpha, w }
    }

    pub fn point(&self) -> ParamPoint<T> {
        let alpha = self.alpha.max(T::zero()).min(T::one());
        let w = self.w.max(T::zero()).min(T::one());
        if w == T::zero() {
            ParamPoint {
                alpha,
                z: ZParam::Tropical,
            }
        } else {
            ParamPoint {
                alpha,
                z: ZParam::Finite(z_floor(alpha) / w),
            }
        }
    }
}

fn nonzero_canonical<T: Real>(pair: &FlatPair<T>) -> Result<FlatPair<T>> {
    let c = pair.canonicalize()?;
    if c.is_empty() {
        return Err(Error::Diverges("zero pair".into()));
    }
    Ok(c)
}

fn log_phi_blocks<T: Real>(pair: &FlatPair<T>, alpha: T, z: ZParam<T>) -> T {
    match z {
        ZParam::Tropical => pair
            .blocks
            .iter()
            .filter_map(|b| b.overlap())
            .fold(-T::infinity(), |acc, f| acc.max(f.ln())),
        ZParam::Finite(z) => {
            let terms: Vec<T> = pair
                .blocks
                .iter()
                .filter_map(|b| {
                    let f = b.overlap()?;
                    Some(alpha * b.p.ln() + (T::one() - alpha) * b.q.ln() + z * f.ln())
                })
                .collect();
            log_sum_exp(&terms)
        }
    }
}

/// `ln phi`, computed in log space so that large `z` does not underflow.
/// Returns `-inf` when no block has both weights and the overlap positive.
pub fn log_phi<T: Real>(pair: &FlatPair<T>, pt: &ParamPoint<T>) -> Result<T> {
    let c = nonzero_canonical(pair)?;
    Ok(log_phi_blocks(&c, pt.alpha, pt.z))
}

/// The homomorphism `phi_{alpha,z}` (or `phi_T` at the tropical point).
pub fn phi<T: Real>(pair: &FlatPair<T>, pt: &ParamPoint<T>) -> Result<T> {
    Ok(log_phi(pair, pt)?.exp())
}

/// `phi` at `alpha in {0, 1}` with `0 < z < 1`, outside the validated
/// family. Whether these are monotone is unknown; nothing in the crate
/// uses them for verdicts.
pub fn phi_experimental<T: Real>(pair: &FlatPair<T>, alpha: T, z: T) -> Result<T> {
    if alpha != T::zero() && alpha != T::one() {
        return Err(malformed("experimental evaluation needs alpha in {0, 1}"));
    }
    if !(z > T::zero() && z < T::one()) {
        return Err(malformed("experimental evaluation needs 0 < z < 1"));
    }
    let c = nonzero_canonical(pair)?;
    Ok(log_phi_blocks(&c, alpha, ZParam::Finite(z)).exp())
}

fn d_from_log_phi<T: Real>(lp: T, z: ZParam<T>) -> T {
    match z {
        ZParam::Tropical => -lp,
        ZParam::Finite(z) => -lp / (z + T::one()),
    }
}

/// `D_hat_{alpha,z}`; natural logarithm. Fails with [`Error::Diverges`] on
/// the zero pair or when no block overlaps.
pub fn d_hat<T: Real>(pair: &FlatPair<T>, pt: &ParamPoint<T>) -> Result<T> {
    let lp = log_phi(pair, pt)?;
    if !lp.is_finite_val() {
        return Err(Error::Diverges("no overlapping block".into()));
    }
    Ok(d_from_log_phi(lp, pt.z))
}

/// Like [`d_hat`] but returns `+inf` instead of failing.
pub fn d_hat_extended<T: Real>(pair: &FlatPair<T>, pt: &ParamPoint<T>) -> T {
    match log_phi(pair, pt) {
        Ok(lp) if lp.is_finite_val() => d_from_log_phi(lp, pt.z),
        _ => T::infinity(),
    }
}

/// [`d_hat`] on a pair already in canonical form, skipping the re-canonicalization.
/// Used by the inner loops of the optimizers.
pub fn d_hat_canonical<T: Real>(canonical: &FlatPair<T>, pt: &ParamPoint<T>) -> T {
    let lp = log_phi_blocks(canonical, pt.alpha, pt.z);
    if lp.is_finite_val() {
        d_from_log_phi(lp, pt.z)
    } else {
        T::infinity()
    }
}

/// The degenerate homomorphisms `(Tr A, Tr B)`.
pub fn trace_homomorphisms<T: Real>(pair: &FlatPair<T>) -> Result<(T, T)> {
    Ok(pair.canonicalize()?.trace_pair())
}

fn check_density<T: Real>(m: &CMat<T>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(malformed(format!("{name} is not square")));
    }
    let tol = T::lit(DENSITY_TOL);
    if linalg::max_abs_diff(m, &m.adjoint()) > tol {
        return Err(malformed(format!("{name} is not Hermitian")));
    }
    let tr = linalg::trace(m);
    if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
        return Err(malformed(format!("{name} has trace {} != 1", tr.re)));
    }
    if linalg::min_eigenvalue(m) < -tol {
        return Err(malformed(format!("{name} is not positive semidefinite")));
    }
    Ok(())
}

/// `ln Tr[(sigma^s rho^(alpha/z) sigma^s)^z]` with `s = (1 - alpha) / (2z)`
/// for PSD `rho`, `sigma` (any trace). Powers are taken on the support, so
/// `alpha in {0, 1}` give support projections. `z = Tropical` gives
/// `ln ||supp(rho) supp(sigma)||^2`. Returns `-inf` when the trace vanishes.
pub fn dense_log_phi<T: Real>(rho: &CMat<T>, sigma: &CMat<T>, alpha: T, z: ZParam<T>) -> Result<T> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(malformed("rho and sigma must be square of equal dimension"));
    }
    let clip = T::lit(EIG_CLIP);
    match z {
        ZParam::Tropical => {
            let p = linalg::support_projection(rho);
            let q = linalg::support_projection(sigma);
            let top = linalg::max_eigenvalue(&(&p * &q * &p));
            Ok(if top > clip { top.ln() } else { -T::infinity() })
        }
        ZParam::Finite(z) => {
            if !(z > T::zero()) {
                return Err(malformed("z must be positive"));
            }
            let two = T::lit(2.0);
            let ss = linalg::psd_power(sigma, (T::one() - alpha) / (two * z));
            let rr = linalg::psd_power(rho, alpha / z);
            let inner = &ss * rr * &ss;
            let logs: Vec<T> = eigh(&inner)
                .0
                .into_iter()
                .filter(|&l| l > clip)
                .map(|l| z * l.ln())
                .collect();
            Ok(log_sum_exp(&logs))
        }
    }
}

/// The alpha-z relative entropy
/// `(1 / (alpha - 1)) ln Tr[(sigma^((1-alpha)/2z) rho^(alpha/z) sigma^((1-alpha)/2z))^z]`
/// of two density matrices, `alpha in (0, 1)`, `z > 0`.
pub fn d_alphaz_dense<T: Real>(rho: &CMat<T>, sigma: &CMat<T>, alpha: T, z: T) -> Result<T> {
    check_density(rho, "rho")?;
    check_density(sigma, "sigma")?;
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(malformed(format!("alpha = {alpha} outside (0, 1)")));
    }
    let lp = dense_log_phi(rho, sigma, alpha, ZParam::Finite(z))?;
    if !lp.is_finite_val() {
        return Err(Error::Diverges("orthogonal supports".into()));
    }
    Ok(lp / (alpha - T::one()))
}

/// Uniform `n x n` grid of compact parameters including both boundaries.
pub fn compact_grid<T: Real>(n: usize) -> Vec<CompactParam<T>> {
    let step = |i: usize| {
        if n <= 1 {
            T::zero()
        } else {
            T::lit(i as f64 / (n - 1) as f64)
        }
    };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(CompactParam::new(step(i), step(j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatpair::Block;

    fn pt(a: f64, z: f64) -> ParamPoint<f64> {
        ParamPoint::new(a, z).unwrap()
    }

    #[test]
    fn unit_pair_is_zero_everywhere() {
        let u = FlatPair::<f64>::unit();
        for p in compact_grid::<f64>(5) {
            let pp = p.point();
            assert_eq!(phi(&u, &pp).unwrap(), 1.0);
            assert_eq!(d_hat(&u, &pp).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_block_half() {
        let a = FlatPair::<f64>::from_triples(&[(1.0, 1.0, 0.5)]);
        assert!((phi(&a, &pt(0.5, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((d_hat(&a, &pt(0.5, 1.0)).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tropical_is_max_overlap() {
        let a = FlatPair::<f64>::from_triples(&[(0.5, 0.5, 0.25), (0.5, 0.5, 0.5)]);
        let t = ParamPoint::tropical(0.3).unwrap();
        assert!((phi(&a, &t).unwrap() - 0.5).abs() < 1e-15);
        assert!((d_hat(&a, &t).unwrap() - 2f64.ln()).abs() < 1e-15);
        let z4 = d_hat(&a, &pt(0.5, 1e4)).unwrap();
        assert!((z4 - 2f64.ln()).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for z in [2.0, 10.0, 100.0, 1e4] {
            let gap = (d_hat(&a, &pt(0.5, z)).unwrap() - 2f64.ln()).abs();
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn diverges_without_overlap() {
        let a = FlatPair::<f64>::new(vec![Block::left(1.0), Block::right(1.0)]);
        assert!(matches!(d_hat(&a, &pt(0.5, 1.0)), Err(Error::Diverges(_))));
        assert!(matches!(d_hat(&FlatPair::<f64>::zero(), &pt(0.5, 1.0)), Err(Error::Diverges(_))));
        assert_eq!(d_hat_extended(&a, &pt(0.5, 1.0)), f64::INFINITY);
        assert_eq!(phi(&a, &ParamPoint::tropical(0.5).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn param_validation() {
        assert!(ParamPoint::new(0.5, 0.4).is_err());
        assert!(ParamPoint::new(0.2, 0.79).is_err());
        assert!(ParamPoint::new(0.2, 0.8).is_ok());
        assert!(ParamPoint::new(1.2, 5.0).is_err());
        let c = CompactParam::<f64>::new(0.25, 0.5);
        let p = c.point();
        assert_eq!(p.z, ZParam::Finite(1.5));
        assert!((p.compact().w - 0.5).abs() < 1e-15);
        assert!(CompactParam::new(0.4, 0.0).point().is_tropical());
    }

    #[test]
    fn boundary_alphas_use_character_sums() {
        let a = FlatPair::<f64>::new(vec![
            Block::new(0.5, 0.25, 0.5),
            Block::new(0.25, 0.25, 1.0),
            Block::left(0.25),
            Block::right(0.5),
        ]);
        let z = 2.0;
        let v0 = phi(&a, &pt(0.0, z)).unwrap();
        assert!((v0 - (0.25 * 0.25 + 0.25)).abs() < 1e-15);
        let v1 = phi(&a, &pt(1.0, z)).unwrap();
        assert!((v1 - (0.5 * 0.25 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn experimental_points_are_gated() {
        let a = FlatPair::<f64>::from_triples(&[(1.0, 1.0, 0.5)]);
        assert!((phi_experimental(&a, 0.0, 0.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(phi_experimental(&a, 0.5, 0.5).is_err());
        assert!(phi_experimental(&a, 1.0, 1.5).is_err());
    }

    #[test]
    fn dense_matches_classical_renyi() {
        let rho = linalg::diag(&[0.75f64, 0.25]);
        let sigma = linalg::diag(&[0.25f64, 0.75]);
        let expected = -2.0 * (2.0 * (0.75f64 * 0.25).sqrt()).ln();
        for z in [0.5, 1.0, 3.0, 50.0] {
            let v = d_alphaz_dense(&rho, &sigma, 0.5, z).unwrap();
            assert!((v - expected).abs() < 1e-12, "z = {z}: {v} vs {expected}");
        }
        assert!(d_alphaz_dense(&rho, &rho, 0.3, 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dense_rejects_non_states() {
        let bad = linalg::diag(&[0.75f64, 0.75]);
        let ok = linalg::diag(&[0.5f64, 0.5]);
        assert!(d_alphaz_dense(&bad, &ok, 0.5, 1.0).is_err());
        assert!(d_alphaz_dense(&ok, &ok, 1.0, 1.0).is_err());
    }

    #[test]
    fn dense_identity_with_block_formula() {
        let a = FlatPair::<f64>::new(vec![
            Block::new(0.3, 0.2, 0.4),
            Block::new(0.5, 0.3, 0.9),
            Block::left(0.2),
            Block::right(0.5),
        ]);
        let d = crate::jordan::realize_dense(&a).unwrap();
        for (alpha, z) in [(0.5, 1.0), (0.2, 0.9), (0.7, 30.0)] {
            let dense = d_alphaz_dense(&d.a, &d.b, alpha, z).unwrap();
            let block = d_hat(&a, &pt(alpha, z)).unwrap();
            assert!(((1.0 - alpha) * dense - (z + 1.0) * block).abs() < 1e-12);
        }
        let lt = dense_log_phi(&d.a, &d.b, 0.5, ZParam::Tropical).unwrap();
        assert!((lt - 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn f32_block_formula() {
        let a = FlatPair::<f32>::from_triples(&[(1.0, 1.0, 0.5)]);
        let p = ParamPoint::<f32>::new(0.5, 1.0).unwrap();
        assert!((d_hat(&a, &p).unwrap() - 0.5 * 2f32.ln()).abs() < 1e-6);
    }
}
