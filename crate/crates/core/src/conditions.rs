//! Checkers for the entropy inequality families that decide exact
//! large-sample/catalytic convertibility and its approximate variant.

use serde::{Deserialize, Serialize};

use crate::entropies::{d_hat, d_hat_canonical, CompactParam, ParamPoint};
use crate::error::{hypothesis, malformed, Error, Result};
use crate::flatpair::{FlatPair, PairClass, NORMALIZATION_TOL};
use crate::minimize::{minimize_over_domain, MinimizeConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Margins above this count as strict.
    pub tau_strict: f64,
    /// Margins above `-tau_zero` count as non-strict.
    pub tau_zero: f64,
    /// Width of the collar removed from the parameter square in asymptotic mode.
    pub delta_bnd: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tau_strict: 1e-9,
            tau_zero: 1e-9,
            delta_bnd: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub minimize: MinimizeConfig,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Strict,
    NonStrict,
    Fails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridStats {
    pub evaluations: usize,
    pub refinement_iterations: usize,
    pub grid: usize,
}

/// Which convertibility statements the verdict establishes for the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conclusions {
    /// Exact catalytic conversion.
    pub catalytic: bool,
    /// Exact conversion of tensor powers for all large enough `n`.
    pub large_sample: bool,
    /// Catalytic conversion up to arbitrarily small output error.
    pub approximate_catalytic: bool,
    /// Large-sample conversion up to arbitrarily small output error.
    pub approximate_large_sample: bool,
    /// Set when the inequalities hold strictly but the input lacks disjoint
    /// mass on both sides, so only the catalytic statement applies.
    pub large_sample_needs_pu2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Verdict<T> {
    pub mode: CheckMode,
    pub kind: VerdictKind,
    /// `|worst_margin| <= tau`: the floating-point check cannot separate
    /// strict from non-strict here.
    pub boundary: bool,
    /// Infimum over the domain of `D_hat(in) - D_hat(out)`.
    pub worst_margin: T,
    pub witness: CompactParam<T>,
    pub grid_stats: GridStats,
    pub thresholds: Thresholds,
    pub input_class: PairClass,
    pub output_class: PairClass,
    pub conclusions: Conclusions,
}

/// `D_hat(in, pt) - D_hat(out, pt)`.
pub fn margin<T: Real>(pair_in: &FlatPair<T>, pair_out: &FlatPair<T>, pt: &ParamPoint<T>) -> Result<T> {
    Ok(d_hat(pair_in, pt)? - d_hat(pair_out, pt)?)
}

/// Checks that both pairs are normalized with some overlap, returning their
/// canonical forms and classes.
pub(crate) fn gate<T: Real>(
    pair_in: &FlatPair<T>,
    pair_out: &FlatPair<T>,
) -> Result<(FlatPair<T>, FlatPair<T>, PairClass, PairClass)> {
    let a = pair_in.canonicalize()?;
    let b = pair_out.canonicalize()?;
    let (ia, ib) = a.trace_pair();
    let (oa, ob) = b.trace_pair();
    let tol = T::lit(NORMALIZATION_TOL);
    if (ia - oa).abs() > tol || (ib - ob).abs() > tol {
        return Err(Error::NormalizationMismatch {
            in_a: ia.to_f64_lossy(),
            in_b: ib.to_f64_lossy(),
            out_a: oa.to_f64_lossy(),
            out_b: ob.to_f64_lossy(),
        });
    }
    if !a.is_normalized() {
        return Err(malformed(format!("pairs are not normalized: traces ({ia}, {ib})")));
    }
    let ca = a.classify()?;
    let cb = b.classify()?;
    if !ca.has_some_overlap {
        return Err(hypothesis("input pair has no overlapping block"));
    }
    if !cb.has_some_overlap {
        return Err(hypothesis("output pair has no overlapping block"));
    }
    Ok((a, b, ca, cb))
}

fn margin_fn<'a, T: Real>(a: &'a FlatPair<T>, b: &'a FlatPair<T>) -> impl Fn(CompactParam<T>) -> T + Sync + 'a {
    move |c: CompactParam<T>| {
        let pt = c.point();
        d_hat_canonical(a, &pt) - d_hat_canonical(b, &pt)
    }
}

fn stats<T>(m: &crate::minimize::Minimum<T>, cfg: &MinimizeConfig) -> GridStats {
    GridStats {
        evaluations: m.evaluations,
        refinement_iterations: m.refinements,
        grid: cfg.grid,
    }
}

/// Decides whether `D_hat(in) > D_hat(out)` over the whole closed parameter
/// family, tropical point and `alpha in {0, 1}` included.
pub fn check_exact<T: Real>(pair_in: &FlatPair<T>, pair_out: &FlatPair<T>, cfg: &CheckConfig) -> Result<Verdict<T>> {
    let (a, b, ca, cb) = gate(pair_in, pair_out)?;
    let mcfg = MinimizeConfig {
        lo: (0.0, 0.0),
        hi: (1.0, 1.0),
        ..cfg.minimize
    };
    let m = minimize_over_domain(margin_fn(&a, &b), &mcfg);
    let tau = T::lit(cfg.thresholds.tau_strict);
    let kind = if m.value > tau {
        VerdictKind::Strict
    } else if m.value < -tau {
        VerdictKind::Fails
    } else {
        VerdictKind::NonStrict
    };
    let strict = kind == VerdictKind::Strict;
    Ok(Verdict {
        mode: CheckMode::Exact,
        kind,
        boundary: kind == VerdictKind::NonStrict,
        worst_margin: m.value,
        witness: m.arg,
        grid_stats: stats(&m, &mcfg),
        thresholds: cfg.thresholds,
        input_class: ca,
        output_class: cb,
        conclusions: Conclusions {
            catalytic: strict,
            large_sample: strict && ca.satisfies_pu2,
            approximate_catalytic: strict,
            approximate_large_sample: strict,
            large_sample_needs_pu2: strict && !ca.satisfies_pu2,
        },
    })
}

/// Decides whether `D_hat(in) >= D_hat(out)` on the open region
/// `alpha in (0, 1)`, `z > max(alpha, 1 - alpha)`, which characterizes
/// approximate catalytic and approximate large-sample conversion. Requires
/// a non-parallel input and a non-commuting output.
pub fn check_asymptotic<T: Real>(
    pair_in: &FlatPair<T>,
    pair_out: &FlatPair<T>,
    cfg: &CheckConfig,
) -> Result<Verdict<T>> {
    let (a, b, ca, cb) = gate(pair_in, pair_out)?;
    if !ca.satisfies_pu1 {
        return Err(hypothesis("input pair has a block with overlap 1"));
    }
    if cb.states_commute {
        return Err(hypothesis("output states commute"));
    }
    let mcfg = cfg.minimize.with_collar(cfg.thresholds.delta_bnd);
    let m = minimize_over_domain(margin_fn(&a, &b), &mcfg);
    let tau_s = T::lit(cfg.thresholds.tau_strict);
    let tau_z = T::lit(cfg.thresholds.tau_zero);
    let kind = if m.value > tau_s {
        VerdictKind::Strict
    } else if m.value >= -tau_z {
        VerdictKind::NonStrict
    } else {
        VerdictKind::Fails
    };
    let holds = kind != VerdictKind::Fails;
    Ok(Verdict {
        mode: CheckMode::Asymptotic,
        kind,
        boundary: m.value.abs() <= tau_s.max(tau_z),
        worst_margin: m.value,
        witness: m.arg,
        grid_stats: stats(&m, &mcfg),
        thresholds: cfg.thresholds,
        input_class: ca,
        output_class: cb,
        conclusions: Conclusions {
            approximate_catalytic: holds,
            approximate_large_sample: holds,
            ..Conclusions::default()
        },
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::sample::{random_pair, rng};
    use proptest::prelude::*;

    fn cfg() -> CheckConfig {
        CheckConfig {
            minimize: MinimizeConfig::default().with_grid(16),
            ..CheckConfig::default()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn margin_ignores_block_order(s in any::<u64>(), alpha in 0.0..=1.0f64, w in 0.0..=1.0f64) {
            let a: FlatPair<f64> = random_pair(&mut rng(s), 4);
            let b: FlatPair<f64> = random_pair(&mut rng(s ^ 3), 4);
            let mut rev = a.clone();
            rev.blocks.reverse();
            let p = CompactParam::new(alpha, w).point();
            let m1 = margin(&a, &b, &p).unwrap();
            let m2 = margin(&rev, &b.canonicalize().unwrap(), &p).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-12 * m1.abs().max(1.0));
        }

        #[test]
        fn strictness_is_transitive(s in any::<u64>()) {
            let mut r = rng(s);
            let pairs: Vec<FlatPair<f64>> = (0..3).map(|_| random_pair(&mut r, 3)).collect();
            let ab = check_exact(&pairs[0], &pairs[1], &cfg()).unwrap();
            let bc = check_exact(&pairs[1], &pairs[2], &cfg()).unwrap();
            if ab.kind == VerdictKind::Strict && bc.kind == VerdictKind::Strict {
                let ac = check_exact(&pairs[0], &pairs[2], &cfg()).unwrap();
                prop_assert_ne!(ac.kind, VerdictKind::Fails);
            }
        }

        #[test]
        fn single_blocks_follow_overlap_order(fa in 0.02..0.98f64, fb in 0.02..0.98f64) {
            prop_assume!((fa - fb).abs() > 1e-6);
            let a = FlatPair::<f64>::from_triples(&[(1.0, 1.0, fa)]);
            let b = FlatPair::<f64>::from_triples(&[(1.0, 1.0, fb)]);
            let v = check_exact(&a, &b, &cfg()).unwrap();
            prop_assert_eq!(v.kind == VerdictKind::Strict, fa < fb);
        }
    }
}
