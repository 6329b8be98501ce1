//! Seeded fixtures shared by the benchmarks in `benches/`.

use pmfuse_core::align::Observation;
use pmfuse_core::{Dataset, GridSpec, ProjectedPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 6 km square grid of 500 m cells centered on the origin.
pub fn city_grid() -> GridSpec {
    GridSpec::new(ProjectedPoint::new(-3000.0, -3000.0), 500.0, 12, 12).expect("valid grid")
}

/// `n` readings spread over the grid and three hours.
pub fn observations(n: usize, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Observation {
            t: rng.random_range(0..10_800),
            pos: ProjectedPoint::new(rng.random_range(-3000.0..3000.0), rng.random_range(-3000.0..3000.0)),
            value: rng.random_range(5.0..200.0),
        })
        .collect()
}

/// Scattered source values for interpolation.
pub fn sources(n: usize, seed: u64) -> Vec<(ProjectedPoint, f64)> {
    observations(n, seed).into_iter().map(|o| (o.pos, o.value)).collect()
}

/// A smooth regression target over `p` features with mild noise.
pub fn regression(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| 40.0 * r[0] + 10.0 * (6.0 * r[1 % p]).sin() + rng.random_range(-2.0..2.0))
        .collect();
    Dataset::new(rows, y, (0..p).map(|j| format!("x{j}")).collect()).expect("consistent dataset")
}
