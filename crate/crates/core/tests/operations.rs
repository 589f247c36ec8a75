//! Cross-module checks of the documented operation examples.

use rand::Rng;

use flatmaj::channels::{per_block_uhlmann, standard_pure_pair};
use flatmaj::conditions::{check_asymptotic, check_exact, margin, CheckConfig, VerdictKind};
use flatmaj::entropies::{compact_grid, d_alphaz_dense, d_hat, CompactParam, ParamPoint};
use flatmaj::feasibility::{solve, solve_classical, tensor_instance, FeasibilityOptions, FeasibilityProblem, FeasibilityStatus};
use flatmaj::jordan::{flat_pair_from_operators, flat_pair_from_projections, realize_dense, ExtractOptions};
use flatmaj::linalg;
use flatmaj::minimize::{dense_scan, minimize_over_domain, MinimizeConfig};
use flatmaj::rates::{certify_achievable, optimal_rate, optimal_rate_on};
use flatmaj::sample::{random_mixed_pair, random_pair, random_unitary, rng};
use flatmaj::{Block, CMat, FlatPair, FlatPair32, C};

fn single(f: f64) -> FlatPair {
    FlatPair::from_triples(&[(1.0, 1.0, f)])
}

fn with_dust(f: f64, eps: f64) -> FlatPair {
    FlatPair::new(vec![Block::new(1.0 - eps, 1.0 - eps, f), Block::left(eps), Block::right(eps)])
}

#[test]
fn canonical_form_survives_conjugation() {
    let mut r = rng(11);
    for _ in 0..20 {
        let pair: FlatPair = random_mixed_pair(&mut r, 4);
        let dense = realize_dense(&pair).unwrap();
        let u = random_unitary::<f64>(&mut r, dense.dim());
        let ex = flat_pair_from_operators(&dense.conjugate(&u), &ExtractOptions::default()).unwrap();
        assert!(ex.pair.approx_eq_unordered(&pair, 1e-9, 1e-9));
    }
}

#[test]
fn projections_to_pair_and_dense_entropy() {
    let zero = CMat::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)]);
    let plus = CMat::from_element(2, 2, C::new(0.5, 0.0));
    let pair = flat_pair_from_projections(&zero, &plus).unwrap();
    assert!(pair.approx_eq(&single(0.5), 1e-12, 1e-12));
    for (alpha, z) in [(0.3, 0.8), (0.5, 1.0), (0.9, 5.0)] {
        let dense = d_alphaz_dense(&zero, &plus, alpha, z).unwrap();
        let block = d_hat(&pair, &ParamPoint::new(alpha, z).unwrap()).unwrap();
        assert!(((1.0 - alpha) * dense - (z + 1.0) * block).abs() < 1e-9);
    }
}

#[test]
fn z_sweep_reaches_the_tropical_value() {
    let pair = FlatPair::from_triples(&[(0.5, 0.5, 0.25), (0.5, 0.5, 0.5)]);
    let target = 2f64.ln();
    let gaps: Vec<f64> = [2.0, 10.0, 100.0, 1e4]
        .iter()
        .map(|&z| (d_hat(&pair, &ParamPoint::new(0.5, z).unwrap()).unwrap() - target).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
    assert!(gaps[3] <= 1e-3);
    assert!((d_hat(&pair, &ParamPoint::tropical(0.5).unwrap()).unwrap() - target).abs() < 1e-15);
}

#[test]
fn commuting_dense_pair_is_classical_renyi() {
    let rho = linalg::diag(&[0.75, 0.25]);
    let sigma = linalg::diag(&[0.25, 0.75]);
    let want = -2.0 * (2.0 * (0.75f64 * 0.25).sqrt()).ln();
    for z in [0.5, 1.0, 3.0, 100.0] {
        assert!((d_alphaz_dense(&rho, &sigma, 0.5, z).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn margin_minimum_matches_brute_force_scan() {
    let (a, b) = (with_dust(0.1, 1e-3), single(0.5));
    let f = |c: CompactParam<f64>| margin(&a, &b, &c.point()).unwrap();
    let cfg = MinimizeConfig::default();
    let refined = minimize_over_domain(f, &cfg);
    let (_, scan) = dense_scan(f, 1000, &cfg);
    assert!(refined.value <= scan + 1e-7, "{} vs {}", refined.value, scan);
    assert!(scan - refined.value <= 1e-3, "{} vs {}", refined.value, scan);
}

#[test]
fn exact_verdicts() {
    let cfg = CheckConfig::default();
    let v = check_exact(&with_dust(0.1, 1e-3), &single(0.5), &cfg).unwrap();
    assert_eq!(v.kind, VerdictKind::Strict);
    assert!(v.conclusions.large_sample);
    let v = check_exact(&single(0.3), &single(0.3), &cfg).unwrap();
    assert_eq!(v.kind, VerdictKind::NonStrict);
    assert!(v.boundary && v.worst_margin.abs() < 1e-12);
    let v = check_exact(&single(0.5), &single(0.1), &cfg).unwrap();
    assert_eq!(v.kind, VerdictKind::Fails);
}

#[test]
fn asymptotic_verdict_agrees_with_random_points() {
    let a = FlatPair::from_triples(&[(0.5, 0.5, 0.2), (0.5, 0.5, 0.3)]);
    let b = single(0.6);
    let cfg = CheckConfig::default();
    let v = check_asymptotic(&a, &b, &cfg).unwrap();
    let witness = margin(&a, &b, &v.witness.point()).unwrap();
    assert!((witness - v.worst_margin).abs() < 1e-12);
    let mut r = rng(12);
    let d = cfg.thresholds.delta_bnd;
    let lowest = (0..10_000)
        .map(|_| {
            let c = CompactParam::new(r.gen_range(d..1.0 - d), r.gen_range(d..1.0 - d));
            margin(&a, &b, &c.point()).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(lowest >= v.worst_margin - 1e-9);
    if v.kind == VerdictKind::Fails {
        assert!(v.worst_margin < 0.0);
    } else {
        assert!(lowest >= -cfg.thresholds.tau_zero);
    }
}

#[test]
fn open_region_rate_approaches_closed_rate() {
    let a = FlatPair::from_triples(&[(0.6, 0.3, 0.2), (0.4, 0.7, 0.7)]);
    let b = FlatPair::from_triples(&[(0.5, 0.2, 0.5), (0.5, 0.8, 0.4)]);
    let cfg = MinimizeConfig::default();
    let closed = optimal_rate(&a, &b, &cfg).unwrap().rate;
    let gaps: Vec<f64> = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&w| optimal_rate_on(&a, &b, &cfg.with_collar(w)).unwrap().rate - closed)
        .collect();
    assert!(gaps.iter().all(|&g| g >= -1e-9));
    assert!(gaps[2] <= gaps[0] + 1e-12);
    assert!(gaps[2] <= 1e-4);
}

#[test]
fn certified_rate_respects_every_entropy() {
    let (a, b) = (single(0.01), single(0.9));
    let cert = certify_achievable(&a, &b, 1, 1, 2, &MinimizeConfig::default(), &FeasibilityOptions::default()).unwrap();
    assert_eq!(cert.n, Some(1));
    let ch = cert.channel.unwrap();
    assert!(ch.verify().passes);
    let out = ch.apply_pair(&realize_dense(&a).unwrap()).unwrap();
    let want = realize_dense(&b).unwrap();
    assert!(linalg::fro(&(out.a - want.a)) < 1e-6 && linalg::fro(&(out.b - want.b)) < 1e-6);
    for c in compact_grid::<f64>(8) {
        let p = c.point();
        assert!(1.0 <= d_hat(&a, &p).unwrap() / d_hat(&b, &p).unwrap() + 1e-6);
    }
}

#[test]
fn product_channel_solves_the_doubled_instance() {
    let opts = FeasibilityOptions::default();
    let one = FeasibilityProblem::new(standard_pure_pair(0.3), standard_pure_pair(0.5), &opts).unwrap();
    let res = solve(&one);
    assert_eq!(res.status, FeasibilityStatus::Feasible);
    let ch = res.channel.unwrap();
    let two = tensor_instance(&single(0.3), &single(0.5), 2, 2, &opts).unwrap();
    assert_eq!((two.d_in, two.d_out), (4, 4));
    let img = ch.tensor(&ch).apply_pair(&two.inputs).unwrap();
    assert!(linalg::fro(&(img.a - &two.outputs.a)) < 1e-6);
    assert!(linalg::fro(&(img.b - &two.outputs.b)) < 1e-6);
    assert_eq!(solve(&two).status, FeasibilityStatus::Feasible);
}

#[test]
fn classical_oracle_examples() {
    let r = solve_classical(&[1.0, 0.0], &[0.0, 1.0], &[0.3, 0.7], &[0.6, 0.4], 20_000).unwrap();
    assert_eq!(r.status, FeasibilityStatus::Feasible);

    let (p, q, p2, q2) = ([0.5, 0.5], [0.25, 0.75], [0.5, 0.5], [0.375, 0.625]);
    let r = solve_classical(&p, &q, &p2, &q2, 20_000).unwrap();
    assert_eq!(r.status, FeasibilityStatus::Feasible);
    let t = r.stochastic.unwrap();
    for a in 0..2 {
        let tp: f64 = (0..2).map(|b| t[a][b] * p[b]).sum();
        let tq: f64 = (0..2).map(|b| t[a][b] * q[b]).sum();
        assert!((tp - p2[a]).abs() < 1e-8 && (tq - q2[a]).abs() < 1e-8);
    }
    let back = solve_classical(&p2, &q2, &p, &q, 20_000).unwrap();
    assert_eq!(back.status, FeasibilityStatus::Undetermined);
}

#[test]
fn degrading_the_target_never_lowers_the_rate() {
    let mut r = rng(13);
    let cfg = MinimizeConfig::default().with_grid(32);
    for _ in 0..5 {
        let a: FlatPair = random_pair(&mut r, 2);
        let b = random_pair::<f64>(&mut r, 2).canonicalize().unwrap();
        let raised: Vec<f64> = b.blocks.iter().map(|x| x.f.unwrap_or(1.0).powf(0.5)).collect();
        let (_, b2) = per_block_uhlmann(&b, &raised).unwrap();
        let prob = FeasibilityProblem::from_pairs(&b, &b2, &FeasibilityOptions::default()).unwrap();
        assert_eq!(solve(&prob).status, FeasibilityStatus::Feasible);
        let before = optimal_rate(&a, &b, &cfg).unwrap().rate;
        let after = optimal_rate(&a, &b2, &cfg).unwrap().rate;
        assert!(after >= before - 1e-7, "{after} < {before}");
    }
}

#[test]
fn f32_pipeline() {
    let a: FlatPair32 = with_dust(0.1, 1e-3).cast();
    let b: FlatPair32 = single(0.5).cast();
    let cfg = CheckConfig::default();
    let v = check_exact(&a, &b, &cfg).unwrap();
    assert_eq!(v.kind, VerdictKind::Strict);
    let rate = optimal_rate(&single(0.2).cast::<f32>(), &b, &MinimizeConfig::default()).unwrap().rate;
    assert!((rate - 0.2f32.ln() / 0.5f32.ln()).abs() < 1e-4);
}

#[test]
fn pair_json_round_trip() {
    let text = r#"{"label":"demo","blocks":[{"p":0.5,"q":0.25,"F":0.5},{"p":0.5,"q":0.0,"F":null},{"p":0.0,"q":0.75,"F":null}]}"#;
    let pair: FlatPair = serde_json::from_str(text).unwrap();
    assert_eq!(pair.trace_pair(), (1.0, 1.0));
    let again: FlatPair = serde_json::from_str(&serde_json::to_string(&pair).unwrap()).unwrap();
    assert_eq!(again, pair);
}
