//! Seeded random path measures for property suites and experiments.
//!
//! Coordinates are drawn from a small lattice so that random atoms share
//! prefixes and the kernel trees branch nontrivially.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::measure::PathMeasure;

pub type SeededRng = ChaCha8Rng;

/// Seed taken from `KR_SEED` when set and parseable, else `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var("KR_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coordinate(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.6) {
        rng.gen_range(-2..=2) as f64
    } else {
        (rng.gen_range(-8..=8) as f64) * 0.25 + if rng.gen_bool(0.5) { 0.125 } else { 0.0 }
    }
}

fn weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=9) as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Random path. Each step repeats a previous atom's prefix with some
/// probability, which creates shared prefixes.
fn path(rng: &mut impl Rng, dim: usize, steps: usize, previous: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim * steps);
    if let Some(base) = previous.choose(rng) {
        let keep = rng.gen_range(0..steps);
        out.extend_from_slice(&base[..keep * dim]);
    }
    while out.len() < dim * steps {
        out.push(coordinate(rng));
    }
    out
}

/// Measure with between 1 and `max_atoms` atoms (fewer after merging).
pub fn random_measure(rng: &mut impl Rng, dim: usize, steps: usize, max_atoms: usize) -> PathMeasure {
    let n = rng.gen_range(1..=max_atoms.max(1));
    random_measure_exact(rng, dim, steps, n)
}

/// Measure drawn from exactly `n` paths (duplicates merge).
pub fn random_measure_exact(rng: &mut impl Rng, dim: usize, steps: usize, n: usize) -> PathMeasure {
    let mut atoms: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let a = path(rng, dim, steps, &atoms);
        atoms.push(a);
    }
    let w = weights(rng, n);
    PathMeasure::new(dim, steps, atoms, w).expect("random measure is valid")
}

/// Two measures on a shared support with independently drawn weights.
pub fn random_same_support_pair(rng: &mut impl Rng, steps: usize, max_atoms: usize) -> (PathMeasure, PathMeasure) {
    let base = random_measure(rng, 1, steps, max_atoms);
    let atoms = base.atoms().to_vec();
    let w = weights(rng, atoms.len());
    let other = PathMeasure::new(1, steps, atoms, w).expect("valid");
    (base, other)
}

/// Independent draws with common shape; `steps` uniform in `1..=max_steps`.
pub fn random_family(
    rng: &mut impl Rng,
    count: usize,
    dim: usize,
    max_steps: usize,
    max_atoms: usize,
) -> Vec<PathMeasure> {
    let steps = rng.gen_range(1..=max_steps.max(1));
    (0..count).map(|_| random_measure(rng, dim, steps, max_atoms)).collect()
}
