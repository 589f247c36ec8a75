//! Global minimization over the compact parameter square: uniform grid,
//! then bounded Nelder-Mead from the best grid points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropies::CompactParam;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    /// Points per axis of the initial grid (boundaries included).
    pub grid: usize,
    /// Number of best grid points refined by Nelder-Mead.
    pub keep: usize,
    pub max_iter: usize,
    /// Simplex diameter at which refinement stops.
    pub tol: f64,
    /// Box `[lo.0, hi.0] x [lo.1, hi.1]` in `(alpha, w)`.
    pub lo: (f64, f64),
    pub hi: (f64, f64),
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            grid: 64,
            keep: 8,
            max_iter: 200,
            tol: 1e-10,
            lo: (0.0, 0.0),
            hi: (1.0, 1.0),
        }
    }
}

impl MinimizeConfig {
    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    /// Shrinks the box by `collar` on every side.
    pub fn with_collar(mut self, collar: f64) -> Self {
        self.lo = (collar, collar);
        self.hi = (1.0 - collar, 1.0 - collar);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Minimum<T> {
    pub arg: CompactParam<T>,
    pub value: T,
    pub evaluations: usize,
    /// Nelder-Mead iterations summed over all refined starts.
    pub refinements: usize,
}

type Pt = [f64; 2];

struct Bounded<'a, T, F> {
    f: &'a F,
    lo: Pt,
    hi: Pt,
    evals: usize,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real, F: Fn(CompactParam<T>) -> T> Bounded<'_, T, F> {
    fn clamp(&self, x: Pt) -> Pt {
        [
            x[0].clamp(self.lo[0], self.hi[0]),
            x[1].clamp(self.lo[1], self.hi[1]),
        ]
    }

    fn eval(&mut self, x: Pt) -> f64 {
        self.evals += 1;
        let v = (self.f)(CompactParam::new(T::lit(x[0]), T::lit(x[1]))).to_f64_lossy();
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn lerp(a: Pt, b: Pt, t: f64) -> Pt {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Nelder-Mead in two dimensions with every trial point clamped to the box.
fn nelder_mead<T: Real, F: Fn(CompactParam<T>) -> T>(
    obj: &mut Bounded<'_, T, F>,
    start: Pt,
    f_start: f64,
    step: Pt,
    max_iter: usize,
    tol: f64,
) -> (Pt, f64, usize) {
    let mut simplex = [start, start, start];
    for k in 0..2 {
        let mut x = start;
        x[k] += step[k];
        if x[k] > obj.hi[k] {
            x[k] = start[k] - step[k];
        }
        simplex[k + 1] = obj.clamp(x);
    }
    let mut vals = [f_start, obj.eval(simplex[1]), obj.eval(simplex[2])];
    let mut iters = 0;
    while iters < max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = [simplex[idx[0]], simplex[idx[1]], simplex[idx[2]]];
        vals = [vals[idx[0]], vals[idx[1]], vals[idx[2]]];
        let diameter = dist(simplex[0], simplex[1]).max(dist(simplex[0], simplex[2]));
        if diameter <= tol {
            break;
        }
        iters += 1;
        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let worst = simplex[2];
        let xr = obj.clamp(lerp(centroid, worst, -1.0));
        let fr = obj.eval(xr);
        if fr < vals[0] {
            let xe = obj.clamp(lerp(centroid, worst, -2.0));
            let fe = obj.eval(xe);
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
            continue;
        }
        if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[2] {
            let xc = obj.clamp(lerp(centroid, xr, 0.5));
            (xc, obj.eval(xc))
        } else {
            let xc = obj.clamp(lerp(centroid, worst, 0.5));
            (xc, obj.eval(xc))
        };
        if fc < vals[2].min(fr) {
            simplex[2] = xc;
            vals[2] = fc;
            continue;
        }
        for k in 1..3 {
            simplex[k] = lerp(simplex[0], simplex[k], 0.5);
            vals[k] = obj.eval(simplex[k]);
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    (simplex[best], vals[best], iters)
}

/// Approximate global minimum of `f` over the configured box.
/// Deterministic: the grid is evaluated in parallel but reduced in order.
pub fn minimize_over_domain<T, F>(f: F, cfg: &MinimizeConfig) -> Minimum<T>
where
    T: Real,
    F: Fn(CompactParam<T>) -> T + Sync,
{
    let g = cfg.grid.max(2);
    let lo = [cfg.lo.0, cfg.lo.1];
    let hi = [cfg.hi.0, cfg.hi.1];
    let coord = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (g - 1) as f64;
    let points: Vec<Pt> = (0..g * g).map(|n| [coord(0, n / g), coord(1, n % g)]).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let v = f(CompactParam::new(T::lit(x[0]), T::lit(x[1]))).to_f64_lossy();
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let step = [(hi[0] - lo[0]) / (g - 1) as f64, (hi[1] - lo[1]) / (g - 1) as f64];

    let starts: Vec<usize> = order.iter().take(cfg.keep.max(1)).copied().collect();
    let refined: Vec<(Pt, f64, usize, usize)> = starts
        .par_iter()
        .map(|&i| {
            let mut obj = Bounded {
                f: &f,
                lo,
                hi,
                evals: 0,
                _t: std::marker::PhantomData,
            };
            let (x, v, it) = nelder_mead(&mut obj, points[i], values[i], step, cfg.max_iter, cfg.tol);
            (x, v, it, obj.evals)
        })
        .collect();

    let mut best = (points[order[0]], values[order[0]]);
    let mut evaluations = points.len();
    let mut refinements = 0;
    for (x, v, it, ev) in refined {
        evaluations += ev;
        refinements += it;
        if v < best.1 {
            best = (x, v);
        }
    }
    Minimum {
        arg: CompactParam::new(T::lit(best.0[0]), T::lit(best.0[1])),
        value: T::lit(best.1),
        evaluations,
        refinements,
    }
}

/// Exhaustive scan on an `n x n` grid over the box; the brute-force reference
/// for [`minimize_over_domain`].
pub fn dense_scan<T, F>(f: F, n: usize, cfg: &MinimizeConfig) -> (CompactParam<T>, T)
where
    T: Real,
    F: Fn(CompactParam<T>) -> T + Sync,
{
    let n = n.max(2);
    let lo = [cfg.lo.0, cfg.lo.1];
    let hi = [cfg.hi.0, cfg.hi.1];
    let coord = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64;
    let (i, v) = (0..n * n)
        .into_par_iter()
        .map(|m| {
            let v = f(CompactParam::new(T::lit(coord(0, m / n)), T::lit(coord(1, m % n))))
                .to_f64_lossy();
            (m, if v.is_nan() { f64::INFINITY } else { v })
        })
        .reduce(
            || (usize::MAX, f64::INFINITY),
            |a, b| match a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)) {
                std::cmp::Ordering::Greater => b,
                _ => a,
            },
        );
    let i = if i == usize::MAX { 0 } else { i };
    (
        CompactParam::new(T::lit(coord(0, i / n)), T::lit(coord(1, i % n))),
        T::lit(v),
    )
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn finds_interior_quadratic_minima(x in 0.0..=1.0f64, y in 0.0..=1.0f64) {
            let f = |c: CompactParam<f64>| (c.alpha - x).powi(2) + 2.0 * (c.w - y).powi(2) + 0.5;
            let m = minimize_over_domain(f, &MinimizeConfig::default());
            prop_assert!((m.arg.alpha - x).abs() < 1e-6 && (m.arg.w - y).abs() < 1e-6);
            prop_assert!((m.value - 0.5).abs() < 1e-12);
        }
    }
}
