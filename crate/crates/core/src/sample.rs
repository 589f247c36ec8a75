//! Seeded random instances for tests, acceptance checks and the CLI self-test.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

use crate::flatpair::{Block, FlatPair};
use crate::linalg::CMat;
use crate::scalar::{cr, Real, C};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector of length `n` with every entry at least `floor`.
pub fn probability_vector(rng: &mut SampleRng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let slack = 1.0 - floor * n as f64;
    raw.iter().map(|x| floor + slack * x / s).collect()
}

/// Normalized pair with `1..=max_blocks` two-sided blocks, weights at least
/// 1e-3 and overlaps in `[0.05, 0.95]`.
pub fn random_pair<T: Real>(rng: &mut SampleRng, max_blocks: usize) -> FlatPair<T> {
    let n = rng.gen_range(1..=max_blocks.max(1));
    random_pair_with(rng, n)
}

pub fn random_pair_with<T: Real>(rng: &mut SampleRng, n: usize) -> FlatPair<T> {
    let p = probability_vector(rng, n, 1e-3);
    let q = probability_vector(rng, n, 1e-3);
    FlatPair::new(
        (0..n)
            .map(|i| Block::new(T::lit(p[i]), T::lit(q[i]), T::lit(rng.gen_range(0.05..0.95))))
            .collect(),
    )
}

/// Like [`random_pair`] but may add one-sided rows and classical blocks.
pub fn random_mixed_pair<T: Real>(rng: &mut SampleRng, max_blocks: usize) -> FlatPair<T> {
    let n = rng.gen_range(1..=max_blocks.max(1));
    let p = probability_vector(rng, n + 2, 1e-3);
    let q = probability_vector(rng, n + 2, 1e-3);
    let mut blocks = Vec::with_capacity(n + 2);
    for i in 0..n {
        let f = if rng.gen_bool(0.2) { 1.0 } else { rng.gen_range(0.05..0.95) };
        blocks.push(Block::new(T::lit(p[i]), T::lit(q[i]), T::lit(f)));
    }
    let split_left = rng.gen_bool(0.5);
    if split_left {
        blocks.push(Block::left(T::lit(p[n] + p[n + 1])));
        blocks.push(Block::right(T::lit(q[n])));
        blocks.push(Block::right(T::lit(q[n + 1])));
    } else {
        blocks.push(Block::new(T::lit(p[n]), T::lit(q[n]), T::lit(rng.gen_range(0.05..0.95))));
        blocks.push(Block::new(T::lit(p[n + 1]), T::lit(q[n + 1]), T::lit(rng.gen_range(0.05..0.95))));
    }
    FlatPair::new(blocks)
}

/// Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<T: Real>(rng: &mut SampleRng, n: usize) -> CMat<T> {
    let g = CMat::<T>::from_fn(n, n, |_, _| C::new(T::lit(gaussian(rng)), T::lit(gaussian(rng))));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMat::<T>::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            let norm = d.norm_sqr().sqrt();
            if norm > T::zero() {
                d / cr(norm)
            } else {
                cr(T::one())
            }
        } else {
            C::new(T::zero(), T::zero())
        }
    });
    q * phases
}

/// Orthogonal projection onto a random `rank`-dimensional subspace of `C^n`.
pub fn random_projection<T: Real>(rng: &mut SampleRng, n: usize, rank: usize) -> CMat<T> {
    let u = random_unitary::<T>(rng, n);
    let cols = u.columns(0, rank.min(n)).into_owned();
    &cols * cols.adjoint()
}

/// Standard normal deviate by Box-Muller.
pub fn gaussian(rng: &mut SampleRng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn pairs_are_normalized_and_seeded() {
        let mut r = rng(7);
        for _ in 0..20 {
            let p: FlatPair<f64> = random_pair(&mut r, 6);
            assert!(p.is_normalized());
            assert!(p.blocks.iter().all(|b| b.p >= 1e-3 && b.q >= 1e-3));
            let m: FlatPair<f64> = random_mixed_pair(&mut r, 4);
            assert!(m.canonicalize().unwrap().is_normalized());
        }
        let a: FlatPair<f64> = random_pair(&mut rng(3), 5);
        let b: FlatPair<f64> = random_pair(&mut rng(3), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn unitary_and_projection() {
        let mut r = rng(1);
        let u = random_unitary::<f64>(&mut r, 5);
        assert!(linalg::max_abs_diff(&(&u * u.adjoint()), &CMat::identity(5, 5)) < 1e-12);
        let p = random_projection::<f64>(&mut r, 6, 2);
        assert!(linalg::max_abs_diff(&(&p * &p), &p) < 1e-12);
        assert!((linalg::real_trace(&p) - 2.0).abs() < 1e-12);
    }
}
