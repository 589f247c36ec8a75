//! Optimal asymptotic conversion rates and oracle-backed certificates for
//! achievable rates.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::channels::{prepare_channel, ChannelRep};
use crate::conditions::gate;
use crate::entropies::{compact_grid, d_hat_canonical, CompactParam};
use crate::error::{malformed, Error, Result};
use crate::feasibility::{solve, FeasibilityOptions, FeasibilityProblem, FeasibilityStatus};
use crate::flatpair::{Block, FlatPair, NORMALIZATION_TOL};
use crate::jordan::{block_dims, realize_dense};
use crate::minimize::{minimize_over_domain, MinimizeConfig};
use crate::scalar::Real;

/// Entropy values below this count as zero in a ratio.
pub const RATIO_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RateReport<T> {
    /// `+inf` (serialized as `null`) when `unbounded` is set.
    pub rate: T,
    /// The output pair has zero entropy everywhere.
    pub unbounded: bool,
    pub argmin: CompactParam<T>,
    /// Grid points where both entropies vanished and the ratio was skipped.
    pub excluded_points: usize,
    pub evaluations: usize,
    /// `(alpha, w, ratio)` on a coarse grid, for diagnostics.
    pub landscape: Vec<(T, T, T)>,
}

/// `D_hat(in) / D_hat(out)` with the zero guards. `None` marks an excluded point.
pub fn ratio_at<T: Real>(a: &FlatPair<T>, b: &FlatPair<T>, c: CompactParam<T>) -> Option<T> {
    let pt = c.point();
    let din = d_hat_canonical(a, &pt);
    let dout = d_hat_canonical(b, &pt);
    let floor = T::lit(RATIO_FLOOR);
    if din.abs() < floor && dout.abs() < floor {
        None
    } else if dout.abs() < floor {
        Some(T::infinity())
    } else {
        Some(din / dout)
    }
}

/// The pair is equivalent to a classical pair with `A = B`, so every entropy vanishes.
pub fn is_unit_equivalent<T: Real>(pair: &FlatPair<T>) -> Result<bool> {
    let c = pair.canonicalize()?;
    let tol = T::lit(NORMALIZATION_TOL);
    Ok(!c.is_empty()
        && c.blocks
            .iter()
            .all(|b| b.f == Some(T::one()) && b.is_two_sided() && (b.p - b.q).abs() <= tol))
}

/// Minimum over the closed parameter family of `D_hat(in) / D_hat(out)`.
pub fn optimal_rate<T: Real>(pair_in: &FlatPair<T>, pair_out: &FlatPair<T>, cfg: &MinimizeConfig) -> Result<RateReport<T>> {
    optimal_rate_on(pair_in, pair_out, &MinimizeConfig {
        lo: (0.0, 0.0),
        hi: (1.0, 1.0),
        ..*cfg
    })
}

/// As [`optimal_rate`] but over the box given in `cfg`, e.g. with a collar
/// removed to approximate the open parameter region.
pub fn optimal_rate_on<T: Real>(pair_in: &FlatPair<T>, pair_out: &FlatPair<T>, cfg: &MinimizeConfig) -> Result<RateReport<T>> {
    let (a, b, _, _) = gate(pair_in, pair_out)?;
    if is_unit_equivalent(&b)? {
        return Ok(RateReport {
            rate: T::infinity(),
            unbounded: true,
            argmin: CompactParam::new(T::zero(), T::zero()),
            excluded_points: 0,
            evaluations: 0,
            landscape: Vec::new(),
        });
    }
    let excluded = AtomicUsize::new(0);
    let f = |c: CompactParam<T>| match ratio_at(&a, &b, c) {
        Some(r) => r,
        None => {
            excluded.fetch_add(1, Ordering::Relaxed);
            T::infinity()
        }
    };
    let m = minimize_over_domain(f, cfg);
    let landscape = compact_grid::<T>(8)
        .into_iter()
        .map(|c| (c.alpha, c.w, ratio_at(&a, &b, c).unwrap_or_else(T::infinity)))
        .collect();
    Ok(RateReport {
        rate: m.value,
        unbounded: !m.value.is_finite_val(),
        argmin: m.arg,
        excluded_points: excluded.load(Ordering::Relaxed),
        evaluations: m.evaluations,
        landscape,
    })
}

/// Closed-form rate between single-block pairs: `ln F_in / ln F_out`.
pub fn single_block_rate<T: Real>(f_in: T, f_out: T) -> Result<T> {
    if !(f_in > T::zero() && f_in <= T::one() && f_out > T::zero() && f_out < T::one()) {
        return Err(malformed("need 0 < F_in <= 1 and 0 < F_out < 1"));
    }
    Ok(f_in.ln() / f_out.ln())
}

/// Merges blocks with the same overlap and the same ratio `p / q`. The result
/// converts to and from the input by explicit channels (merging forgets a
/// label, splitting flips a coin), so it has the same conversion power.
pub fn compress<T: Real>(pair: &FlatPair<T>) -> Result<FlatPair<T>> {
    let c = pair.canonicalize()?;
    let tol = T::lit(1e-12);
    let mut merged: Vec<Block<T>> = Vec::new();
    'next: for b in &c.blocks {
        for m in merged.iter_mut() {
            let same_f = match (m.f, b.f) {
                (Some(x), Some(y)) => (x - y).abs() <= tol,
                (None, None) => true,
                _ => false,
            };
            let same_ratio = (m.p * b.q - m.q * b.p).abs() <= tol * (m.p * b.q).abs().max(T::one() * tol);
            if same_f && same_ratio {
                m.p += b.p;
                m.q += b.q;
                continue 'next;
            }
        }
        merged.push(*b);
    }
    FlatPair::new(merged).canonicalize()
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct Certificate<T: Real> {
    /// Copies of the input per block: `den * n` inputs yield `num * n` outputs.
    pub num: u64,
    pub den: u64,
    /// Smallest `n` at which the oracle confirmed the conversion.
    pub n: Option<usize>,
    pub attempted: bool,
    pub optimal_rate: T,
    /// Why the search stopped without a certificate.
    pub note: String,
    pub residual: Option<T>,
    #[serde(skip)]
    pub channel: Option<ChannelRep<T>>,
}

/// Tries to confirm `in^(den n) -> out^(num n)` with the feasibility oracle
/// for `n = 1..=n_max`. Powers are compressed with [`compress`] before the
/// dense realization. A missing certificate is not a refutation.
pub fn certify_achievable<T: Real>(
    pair_in: &FlatPair<T>,
    pair_out: &FlatPair<T>,
    num: u64,
    den: u64,
    n_max: usize,
    cfg: &MinimizeConfig,
    opts: &FeasibilityOptions,
) -> Result<Certificate<T>> {
    if den == 0 {
        return Err(malformed("rate denominator must be positive"));
    }
    let report = optimal_rate(pair_in, pair_out, cfg)?;
    let mut cert = Certificate {
        num,
        den,
        n: None,
        attempted: false,
        optimal_rate: report.rate,
        note: String::new(),
        residual: None,
        channel: None,
    };
    if num == 0 {
        let src = realize_dense(pair_in)?;
        cert.channel = Some(prepare_channel(src.dim(), &realize_dense(&FlatPair::<T>::unit())?.a)?);
        cert.n = Some(1);
        cert.note = "rate 0: discard the input and prepare the unit pair".into();
        return Ok(cert);
    }
    let r = T::lit(num as f64 / den as f64);
    let tau = T::lit(1e-9);
    if !(r < report.rate - tau) {
        cert.note = "requested rate is not below the optimal rate".into();
        return Ok(cert);
    }
    cert.attempted = true;
    let (a, b) = (pair_in.canonicalize()?, pair_out.canonicalize()?);
    for n in 1..=n_max.max(1) {
        let x = compress(&a.tensor_power(den as usize * n))?;
        let y = compress(&b.tensor_power(num as usize * n))?;
        let dim = block_dims(&x).iter().sum::<usize>() * block_dims(&y).iter().sum::<usize>();
        if dim > opts.dimension_cap {
            if n == 1 {
                return Err(Error::DimensionCap {
                    dim,
                    cap: opts.dimension_cap,
                });
            }
            cert.note = format!("dimension cap reached at n = {n}");
            return Ok(cert);
        }
        let prob = FeasibilityProblem::from_pairs(&x, &y, opts)?;
        let res = solve(&prob);
        cert.residual = Some(res.residual);
        if res.status == FeasibilityStatus::Feasible {
            cert.n = Some(n);
            cert.channel = res.channel;
            cert.note = format!("oracle confirmed at n = {n}");
            return Ok(cert);
        }
    }
    cert.note = format!("not found within n_max = {n_max}");
    Ok(cert)
}
