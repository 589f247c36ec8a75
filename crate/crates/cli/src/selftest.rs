//! Fast invariant battery seeded from the run configuration.

use serde::Serialize;

use flatmaj::channels::{merge_to_max_overlap, uhlmann_channel};
use flatmaj::entropies::{compact_grid, d_alphaz_dense, d_hat, ParamPoint};
use flatmaj::jordan::{flat_pair_from_operators, jordan_decompose, realize_dense, ExtractOptions};
use flatmaj::rates::optimal_rate;
use flatmaj::sample::{random_pair, random_projection, rng, SampleRng};
use flatmaj::FlatPair;

use crate::config::RunConfig;
use crate::report::{Failure, Outcome, EXIT_SELFTEST};

const CASES: usize = 10;

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    worst: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct SelftestResult {
    passed: usize,
    total: usize,
    checks: Vec<Check>,
}

fn check(name: &'static str, tolerance: f64, worst: flatmaj::Result<f64>) -> Check {
    let worst = worst.unwrap_or(f64::INFINITY);
    Check {
        name,
        pass: worst <= tolerance,
        worst,
        tolerance,
    }
}

fn pairs(r: &mut SampleRng) -> Vec<FlatPair> {
    (0..CASES).map(|_| random_pair(r, 4)).collect()
}

fn entropy_consistency(r: &mut SampleRng) -> flatmaj::Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in pairs(r) {
        let dense = realize_dense(&pair)?;
        for (alpha, z) in [(0.3, 0.8), (0.5, 1.0), (0.8, 4.0)] {
            let block = (z + 1.0) * d_hat(&pair, &ParamPoint::new(alpha, z)?)?;
            let full = (1.0 - alpha) * d_alphaz_dense(&dense.a, &dense.b, alpha, z)?;
            worst = worst.max((block - full).abs() / block.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn additivity(r: &mut SampleRng) -> flatmaj::Result<f64> {
    let mut worst: f64 = 0.0;
    let (xs, ys) = (pairs(r), pairs(r));
    for (a, b) in xs.iter().zip(&ys) {
        let ab = a.tensor(b);
        for c in compact_grid::<f64>(8) {
            let pt = c.point();
            worst = worst.max((d_hat(&ab, &pt)? - d_hat(a, &pt)? - d_hat(b, &pt)?).abs());
        }
    }
    Ok(worst)
}

fn jordan_reconstruction(r: &mut SampleRng) -> flatmaj::Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 2..2 + CASES {
        let (kp, kq) = (1 + n / 3, 1 + n / 2);
        let p = random_projection::<f64>(r, n, kp);
        let q = random_projection::<f64>(r, n, kq);
        worst = worst.max(jordan_decompose(&p, &q)?.residual);
    }
    Ok(worst)
}

fn extraction_round_trip(r: &mut SampleRng) -> flatmaj::Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in pairs(r) {
        let ex = flat_pair_from_operators(&realize_dense(&pair)?, &ExtractOptions::default())?;
        let want = pair.canonicalize()?;
        let got = ex.pair.canonicalize()?;
        if got.len() != want.len() {
            return Ok(f64::INFINITY);
        }
        for (x, y) in got.blocks.iter().zip(&want.blocks) {
            let df = match (x.f, y.f) {
                (Some(a), Some(b)) => (a - b).abs(),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            };
            worst = worst.max((x.p - y.p).abs()).max((x.q - y.q).abs()).max(df);
        }
    }
    Ok(worst)
}

fn data_processing(r: &mut SampleRng) -> flatmaj::Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in pairs(r) {
        let (_, merged) = merge_to_max_overlap(&pair)?;
        for c in compact_grid::<f64>(8) {
            let pt = c.point();
            worst = worst.max(d_hat(&merged, &pt)? - d_hat(&pair, &pt)?);
        }
    }
    Ok(worst)
}

fn uhlmann_channels(r: &mut SampleRng) -> flatmaj::Result<f64> {
    use rand::Rng;
    let mut worst: f64 = 0.0;
    for _ in 0..CASES {
        let (x, y): (f64, f64) = (r.gen_range(0.01..0.99), r.gen_range(0.01..0.99));
        let check = uhlmann_channel(x.min(y), x.max(y))?.verify();
        worst = worst.max(check.tp_residual).max(-check.choi_min_eigenvalue);
    }
    Ok(worst)
}

fn self_rate(r: &mut SampleRng, cfg: &RunConfig) -> flatmaj::Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in pairs(r).into_iter().take(3) {
        worst = worst.max((optimal_rate(&pair, &pair, &cfg.minimize())?.rate - 1.0).abs());
    }
    Ok(worst)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let mut r = rng(cfg.seed);
    let checks = vec![
        check("entropy-consistency", 1e-9, entropy_consistency(&mut r)),
        check("additivity", 1e-9, additivity(&mut r)),
        check("jordan-reconstruction", 1e-9, jordan_reconstruction(&mut r)),
        check("extraction-round-trip", 1e-9, extraction_round_trip(&mut r)),
        check("data-processing", 1e-8, data_processing(&mut r)),
        check("uhlmann-channel-valid", 1e-9, uhlmann_channels(&mut r)),
        check("self-rate", 1e-9, self_rate(&mut r, cfg)),
    ];
    let passed = checks.iter().filter(|c| c.pass).count();
    let total = checks.len();
    let code = if passed == total { 0 } else { EXIT_SELFTEST };
    Ok(Outcome::ok("invariants", SelftestResult { passed, total, checks }).with_code(code))
}
