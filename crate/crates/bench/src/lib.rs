//! Shared fixtures for the criterion benches.

use mmpar::pet::{
    build_neighborhoods, build_system_matrix, disk_phantom, simulate_counts, PetGeometry,
    PetProblem,
};
use mmpar::{Backend, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    DenseMatrix::random_uniform(rows, cols, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// The two backends every bench compares.
pub fn backends(threads: usize) -> Vec<(&'static str, Backend)> {
    vec![
        ("serial", Backend::serial()),
        ("parallel", Backend::parallel(threads).expect("thread pool")),
    ]
}

/// Phantom-based reconstruction problem at `side × side` pixels.
pub fn pet_problem(side: usize, detectors: usize, mu: f64) -> PetProblem {
    let geometry = PetGeometry::new(side, detectors).expect("geometry");
    let e = build_system_matrix(&geometry).expect("system matrix");
    let truth: Vec<f64> = disk_phantom(side).into_iter().map(|v| 1000.0 * v).collect();
    let y = simulate_counts(&truth, &e, 1, &Backend::serial()).expect("counts");
    PetProblem::new(e, y, mu, build_neighborhoods(side)).expect("problem")
}
