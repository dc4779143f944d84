//! Seeded random MIQP instances for oracle comparisons and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MiqpProblem;
use crate::linalg::{Mat, Vector};

pub const MAX_CONTINUOUS: usize = 6;
pub const MAX_BINARIES: usize = 8;
/// Box placed on every continuous variable.
pub const CONTINUOUS_BOX: f64 = 5.0;

/// `count` instances from one seed. About three in four have a planted
/// feasible point; the rest may well be infeasible.
pub fn instances(seed: u64, count: usize) -> Vec<MiqpProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| instance(&mut rng)).collect()
}

pub fn instance<R: Rng>(rng: &mut R) -> MiqpProblem {
    let nc = rng.random_range(1..=MAX_CONTINUOUS);
    let nb = rng.random_range(0..=MAX_BINARIES);
    let d = nc + nb;
    // Binaries first or last at random, so index handling gets exercised.
    let binary: Vec<usize> = if rng.random_bool(0.5) {
        (0..nb).collect()
    } else {
        (nc..d).collect()
    };

    let rank = rng.random_range(0..=d);
    let g = Mat::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0));
    let h = &g * g.transpose();
    let f = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));

    let m = rng.random_range(1..=d + 3);
    let phi = Mat::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0));
    let rhs = if rng.random_bool(0.75) {
        let planted = Vector::from_fn(d, |i, _| {
            if binary.contains(&i) {
                f64::from(u8::from(rng.random_bool(0.5)))
            } else {
                rng.random_range(-0.8 * CONTINUOUS_BOX..0.8 * CONTINUOUS_BOX)
            }
        });
        &phi * planted + Vector::from_fn(m, |_, _| rng.random_range(0.0..1.0))
    } else {
        Vector::from_fn(m, |_, _| rng.random_range(-2.0..0.5))
    };

    let mut p = MiqpProblem::new(h, f, phi, rhs, binary);
    for (i, b) in p.bounds.iter_mut().enumerate() {
        if p.binary.binary_search(&i).is_err() {
            *b = (-CONTINUOUS_BOX, CONTINUOUS_BOX);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_valid_and_reproducible() {
        let a = instances(42, 50);
        assert_eq!(a, instances(42, 50));
        for p in &a {
            p.validate().unwrap();
            assert!(p.binary.len() <= MAX_BINARIES);
            assert!(p.dim() - p.binary.len() <= MAX_CONTINUOUS);
        }
    }
}
