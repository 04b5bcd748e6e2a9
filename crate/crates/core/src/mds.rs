//! Multidimensional scaling by stress majorization.
//!
//! A configuration is a `p × q` matrix whose column `i` is the position
//! `θ^i ∈ ℝ^p` of object `i`. The stress
//! `Σ_{i<j} w_ij (y_ij − ‖θ^i − θ^j‖)²` is majorized by bounding the cross
//! term with Cauchy–Schwarz and the squared distance with
//! `‖a − b‖² ≤ 2‖a − m‖² + 2‖b − m‖²`, which separates the objects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{matmul, tree_reduce_sum, Backend, DenseMatrix};
use crate::mm::{run_mm, Direction, MmConfig, MmProblem, MmTrace, Surrogate};

/// Weights, dissimilarities and embedding dimension.
#[derive(Debug, Clone)]
pub struct MdsProblem {
    weights: DenseMatrix,
    dissimilarities: DenseMatrix,
    dim: usize,
    /// `w_ij y_ij`
    x: DenseMatrix,
    /// `Σ_{j≠i} w_ij`
    weight_sums: Vec<f64>,
}

impl MdsProblem {
    pub fn new(weights: DenseMatrix, dissimilarities: DenseMatrix, dim: usize) -> Result<Self> {
        let q = weights.rows();
        weights.require_shape("mds weights", q, q)?;
        dissimilarities.require_shape("mds dissimilarities", q, q)?;
        if q < 2 {
            return Err(Error::invalid("at least two objects are needed"));
        }
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        weights.require_nonnegative("mds weights")?;
        dissimilarities.require_nonnegative("mds dissimilarities")?;
        if !weights.is_finite() || !dissimilarities.is_finite() {
            return Err(Error::NonFinite {
                context: "mds input".into(),
            });
        }
        for i in 0..q {
            if weights[(i, i)] != 0.0 || dissimilarities[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("diagonal entry {i} must be zero")));
            }
            for j in 0..i {
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(Error::invalid(format!(
                        "weights are not symmetric at ({i}, {j})"
                    )));
                }
                if dissimilarities[(i, j)] != dissimilarities[(j, i)] {
                    return Err(Error::invalid(format!(
                        "dissimilarities are not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let weight_sums: Vec<f64> = (0..q).map(|i| weights.row(i).iter().sum()).collect();
        if let Some(i) = weight_sums.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::invalid(format!("object {i} has no positive weight")));
        }
        let x = DenseMatrix::from_vec(
            q,
            q,
            weights
                .as_slice()
                .iter()
                .zip(dissimilarities.as_slice())
                .map(|(w, y)| w * y)
                .collect(),
        )?;
        Ok(MdsProblem {
            weights,
            dissimilarities,
            dim,
            x,
            weight_sums,
        })
    }

    /// All off-diagonal weights equal to one.
    pub fn with_unit_weights(dissimilarities: DenseMatrix, dim: usize) -> Result<Self> {
        let q = dissimilarities.rows();
        Self::new(unit_weights(q), dissimilarities, dim)
    }

    pub fn n_objects(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn dissimilarities(&self) -> &DenseMatrix {
        &self.dissimilarities
    }

    /// Same data embedded in a different dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        let mut next = self.clone();
        next.dim = dim;
        Ok(next)
    }

    fn check(&self, theta: &DenseMatrix) -> Result<()> {
        theta.require_shape("mds configuration", self.dim, self.n_objects())
    }
}

/// `q × q` weight matrix with ones off the diagonal.
pub fn unit_weights(q: usize) -> DenseMatrix {
    let mut w = DenseMatrix::filled(q, q, 1.0);
    for i in 0..q {
        w[(i, i)] = 0.0;
    }
    w
}

fn distance(theta: &DenseMatrix, i: usize, j: usize) -> f64 {
    (0..theta.rows())
        .map(|k| {
            let d = theta[(k, i)] - theta[(k, j)];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `Σ_{i<j} w_ij (y_ij − ‖θ^i − θ^j‖)²`.
pub fn stress(theta: &DenseMatrix, problem: &MdsProblem) -> Result<f64> {
    problem.check(theta)?;
    let q = problem.n_objects();
    let mut terms = Vec::with_capacity(q * (q - 1) / 2);
    for i in 0..q {
        for j in i + 1..q {
            let w = problem.weights[(i, j)];
            if w == 0.0 {
                continue;
            }
            let r = problem.dissimilarities[(i, j)] - distance(theta, i, j);
            terms.push(w * r * r);
        }
    }
    Ok(tree_reduce_sum(&terms, &Backend::serial()))
}

/// Gradient of [`stress`] as a `p × q` matrix:
/// `∂/∂θ^i = 2 Σ_j w_ij (1 − y_ij/d_ij)(θ^i − θ^j)`.
pub fn stress_gradient(theta: &DenseMatrix, problem: &MdsProblem) -> Result<DenseMatrix> {
    problem.check(theta)?;
    let (p, q) = theta.shape();
    let mut grad = DenseMatrix::zeros(p, q);
    for i in 0..q {
        for j in 0..q {
            let w = problem.weights[(i, j)];
            if i == j || w == 0.0 {
                continue;
            }
            let y = problem.dissimilarities[(i, j)];
            let d = distance(theta, i, j);
            let scale = if d > 0.0 {
                2.0 * w * (1.0 - y / d)
            } else if y == 0.0 {
                2.0 * w
            } else {
                return Err(Error::CoincidentPoints {
                    i: i.min(j),
                    j: i.max(j),
                });
            };
            for k in 0..p {
                grad[(k, i)] += scale * (theta[(k, i)] - theta[(k, j)]);
            }
        }
    }
    Ok(grad)
}

/// One MM update in matrix form.
///
/// Squared distances come from the Gram matrix `ΘᵗΘ`; `z_ij = x_ij / d_ij`
/// uses their square root. Then
/// `θ^i_{n+1} = [θ^i_n (w_i· + z_i·) + {Θ_n (W − Z_n)}_i] / (2 w_i·)`.
pub fn mds_update(
    theta: &DenseMatrix,
    problem: &MdsProblem,
    backend: &Backend,
) -> Result<DenseMatrix> {
    problem.check(theta)?;
    let (p, q) = theta.shape();
    let gram = matmul(theta, theta, true, false, backend)?;
    let mut z = DenseMatrix::zeros(q, q);
    // NaN marks a coincident pair with positive x_ij
    backend.for_each_chunk(z.as_mut_slice(), q, |i, row| {
        for (j, zij) in row.iter_mut().enumerate() {
            let x = problem.x[(i, j)];
            if i == j || x == 0.0 {
                continue;
            }
            let d2 = gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)];
            *zij = if d2 > 0.0 { x / d2.sqrt() } else { f64::NAN };
        }
    });
    if let Some(idx) = z.as_slice().iter().position(|v| v.is_nan()) {
        let (i, j) = (idx / q, idx % q);
        return Err(Error::CoincidentPoints {
            i: i.min(j),
            j: i.max(j),
        });
    }
    let z_sums: Vec<f64> = (0..q).map(|i| z.row(i).iter().sum()).collect();
    let mut w_minus_z = problem.weights.clone();
    for (a, b) in w_minus_z.as_mut_slice().iter_mut().zip(z.as_slice()) {
        *a -= b;
    }
    let m = matmul(theta, &w_minus_z, false, false, backend)?;
    let mut next = DenseMatrix::zeros(p, q);
    for k in 0..p {
        for i in 0..q {
            let wi = problem.weight_sums[i];
            next[(k, i)] = (theta[(k, i)] * (wi + z_sums[i]) + m[(k, i)]) / (2.0 * wi);
        }
    }
    Ok(next)
}

/// The same update as [`mds_update`] written as explicit sums over `j ≠ i`
/// with directly computed distances.
pub fn mds_update_direct(theta: &DenseMatrix, problem: &MdsProblem) -> Result<DenseMatrix> {
    problem.check(theta)?;
    let (p, q) = theta.shape();
    let mut next = DenseMatrix::zeros(p, q);
    for i in 0..q {
        let mut acc = vec![0.0; p];
        for j in (0..q).filter(|&j| j != i) {
            let w = problem.weights[(i, j)];
            let x = problem.x[(i, j)];
            let d = distance(theta, i, j);
            let ratio = if x == 0.0 {
                0.0
            } else if d > 0.0 {
                x / d
            } else {
                return Err(Error::CoincidentPoints {
                    i: i.min(j),
                    j: i.max(j),
                });
            };
            for (k, a) in acc.iter_mut().enumerate() {
                *a += ratio * (theta[(k, i)] - theta[(k, j)]) + w * (theta[(k, i)] + theta[(k, j)]);
            }
        }
        for (k, a) in acc.into_iter().enumerate() {
            next[(k, i)] = a / (2.0 * problem.weight_sums[i]);
        }
    }
    Ok(next)
}

/// Direct evaluation of the majorizing surrogate `g(θ | θ_n)`, constant
/// included, so that `g(θ_n | θ_n) = stress(θ_n)`.
pub fn mds_surrogate(
    theta: &DenseMatrix,
    anchor: &DenseMatrix,
    problem: &MdsProblem,
) -> Result<f64> {
    problem.check(theta)?;
    problem.check(anchor)?;
    let (p, q) = theta.shape();
    let mut total = 0.0;
    for i in 0..q {
        for j in i + 1..q {
            let w = problem.weights[(i, j)];
            if w == 0.0 {
                continue;
            }
            let y = problem.dissimilarities[(i, j)];
            let dn = distance(anchor, i, j);
            let mut cross = 0.0;
            let mut spread = 0.0;
            for k in 0..p {
                let mid = 0.5 * (anchor[(k, i)] + anchor[(k, j)]);
                let (a, b) = (theta[(k, i)] - mid, theta[(k, j)] - mid);
                spread += 2.0 * (a * a + b * b);
                cross += (theta[(k, i)] - theta[(k, j)]) * (anchor[(k, i)] - anchor[(k, j)]);
            }
            let bound = if y == 0.0 {
                0.0
            } else if dn > 0.0 {
                2.0 * y * cross / dn
            } else {
                return Err(Error::CoincidentPoints { i, j });
            };
            total += w * (y * y - bound + spread);
        }
    }
    Ok(total)
}

/// Rigid motion taking `θ^1` to the origin and zeroing the first `p − 1`
/// coordinates of `θ^2`. A Householder reflection onto the last axis is
/// composed with a sign flip of the first axis so the result is a proper
/// rotation.
pub fn anchor_configuration(theta: &DenseMatrix) -> DenseMatrix {
    let (p, q) = theta.shape();
    let mut out = theta.clone();
    if q == 0 {
        return out;
    }
    for k in 0..p {
        let origin = theta[(k, 0)];
        for v in out.row_mut(k) {
            *v -= origin;
        }
    }
    if p < 2 || q < 2 {
        return out;
    }
    let v: Vec<f64> = (0..p).map(|k| out[(k, 1)]).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u = v;
    u[p - 1] -= norm;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    if uu == 0.0 {
        return out;
    }
    for i in 0..q {
        let dot: f64 = (0..p).map(|k| u[k] * out[(k, i)]).sum();
        let s = 2.0 * dot / uu;
        for k in 0..p {
            out[(k, i)] -= s * u[k];
        }
        out[(0, i)] = -out[(0, i)];
    }
    for k in 0..p - 1 {
        out[(k, 1)] = 0.0;
    }
    out
}

/// Uniform `[−1, 1]` start, drawn object by object.
pub fn random_configuration(dim: usize, q: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = DenseMatrix::zeros(dim, q);
    for i in 0..q {
        for k in 0..dim {
            theta[(k, i)] = rng.gen_range(-1.0..=1.0);
        }
    }
    theta
}

/// MDS as an MM problem (minimization).
#[derive(Debug, Clone)]
pub struct MdsSolver<'a> {
    pub problem: &'a MdsProblem,
    pub backend: Backend,
}

impl MmProblem for MdsSolver<'_> {
    type State = DenseMatrix;

    fn direction(&self) -> Direction {
        Direction::Minimize
    }

    fn objective(&self, theta: &DenseMatrix) -> Result<f64> {
        stress(theta, self.problem)
    }

    fn step(&self, theta: &DenseMatrix) -> Result<DenseMatrix> {
        mds_update(theta, self.problem, &self.backend)
    }
}

impl Surrogate for MdsSolver<'_> {
    fn surrogate(&self, theta: &DenseMatrix, anchor: &DenseMatrix) -> Result<f64> {
        mds_surrogate(theta, anchor, self.problem)
    }
}

/// Random start from `config.seed`, MM iterations, then optional anchoring.
pub fn mds_run(
    problem: &MdsProblem,
    config: &MmConfig,
    anchor: bool,
    backend: &Backend,
) -> Result<(DenseMatrix, MmTrace)> {
    let start = random_configuration(problem.dim, problem.n_objects(), config.seed);
    let solver = MdsSolver {
        problem,
        backend: backend.clone(),
    };
    let (theta, trace) = run_mm(&solver, start, config)?;
    Ok(if anchor {
        (anchor_configuration(&theta), trace)
    } else {
        (theta, trace)
    })
}

/// Dissimilarity from a `q × m` vote matrix (`1` yea, `−1` nay, `0`
/// absent): the fraction of roll calls where both voted and disagreed.
pub fn votes_to_dissimilarity(votes: &DenseMatrix) -> Result<DenseMatrix> {
    let (q, m) = votes.shape();
    if let Some(idx) = votes
        .as_slice()
        .iter()
        .position(|v| ![-1.0, 0.0, 1.0].contains(v))
    {
        return Err(Error::invalid(format!(
            "vote ({}, {}) is {}, expected 1, -1 or 0",
            idx / m,
            idx % m,
            votes.as_slice()[idx]
        )));
    }
    let mut y = DenseMatrix::zeros(q, q);
    for i in 0..q {
        for j in i + 1..q {
            let (mut shared, mut differ) = (0usize, 0usize);
            for (a, b) in votes.row(i).iter().zip(votes.row(j)) {
                if *a != 0.0 && *b != 0.0 {
                    shared += 1;
                    if a != b {
                        differ += 1;
                    }
                }
            }
            if shared == 0 {
                return Err(Error::NoSharedVotes { i, j });
            }
            let d = differ as f64 / shared as f64;
            y[(i, j)] = d;
            y[(j, i)] = d;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(y: f64) -> MdsProblem {
        let d = DenseMatrix::from_rows(&[[0.0, y], [y, 0.0]]).unwrap();
        MdsProblem::with_unit_weights(d, 1).unwrap()
    }

    fn embeddable(q: usize, p: usize, seed: u64) -> (MdsProblem, DenseMatrix) {
        let truth = random_configuration(p, q, seed);
        let mut y = DenseMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                y[(i, j)] = distance(&truth, i, j);
            }
        }
        (MdsProblem::with_unit_weights(y, p).unwrap(), truth)
    }

    fn random_problem(q: usize, p: usize, seed: u64) -> MdsProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = DenseMatrix::zeros(q, q);
        let mut w = DenseMatrix::zeros(q, q);
        for i in 0..q {
            for j in i + 1..q {
                let (a, b) = (rng.gen_range(0.1..3.0), rng.gen_range(0.2..2.0));
                y[(i, j)] = a;
                y[(j, i)] = a;
                w[(i, j)] = b;
                w[(j, i)] = b;
            }
        }
        MdsProblem::new(w, y, p).unwrap()
    }

    #[test]
    fn stress_examples() {
        let prob = pair(2.0);
        let theta = DenseMatrix::row_vector(vec![0.0, 1.0]);
        assert_eq!(stress(&theta, &prob).unwrap(), 1.0);
        let (prob, truth) = embeddable(5, 2, 3);
        assert!(stress(&truth, &prob).unwrap() < 1e-24);
    }

    #[test]
    fn two_point_update() {
        let prob = pair(2.0);
        let theta = DenseMatrix::row_vector(vec![0.0, 1.0]);
        let next = mds_update(&theta, &prob, &Backend::serial()).unwrap();
        assert_eq!(next.as_slice(), &[-0.5, 1.5]);
        assert_eq!(stress(&next, &prob).unwrap(), 0.0);
        let still = mds_update(&next, &prob, &Backend::serial()).unwrap();
        assert_eq!(still.as_slice(), next.as_slice());
    }

    #[test]
    fn perfect_pair_is_a_fixed_point() {
        let prob = pair(3.0);
        let theta = DenseMatrix::row_vector(vec![0.0, 3.0]);
        let next = mds_update(&theta, &prob, &Backend::serial()).unwrap();
        assert_eq!(next.as_slice(), theta.as_slice());
    }

    #[test]
    fn matrix_form_matches_direct_sums() {
        for seed in 0..20 {
            let prob = random_problem(6, 3, seed);
            let theta = random_configuration(3, 6, seed + 100);
            let a = mds_update(&theta, &prob, &Backend::serial()).unwrap();
            let b = mds_update_direct(&theta, &prob).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn coincident_points_are_reported() {
        let prob = pair(1.0);
        let theta = DenseMatrix::row_vector(vec![0.5, 0.5]);
        let err = mds_update(&theta, &prob, &Backend::serial()).unwrap_err();
        assert!(matches!(err, Error::CoincidentPoints { i: 0, j: 1 }));
        // zero dissimilarity makes the pair harmless
        let prob = pair(0.0);
        assert!(mds_update(&theta, &prob, &Backend::serial()).is_ok());
    }

    #[test]
    fn stress_is_rigid_invariant_and_anchoring_preserves_it() {
        let prob = random_problem(7, 3, 11);
        let theta = random_configuration(3, 7, 12);
        let s = stress(&theta, &prob).unwrap();
        let anchored = anchor_configuration(&theta);
        assert!((stress(&anchored, &prob).unwrap() - s).abs() <= 1e-10 * s);
        for k in 0..3 {
            assert_eq!(anchored[(k, 0)], 0.0);
        }
        assert_eq!(anchored[(0, 1)], 0.0);
        assert_eq!(anchored[(1, 1)], 0.0);
        assert!(anchored[(2, 1)] > 0.0);
    }

    #[test]
    fn anchoring_is_a_proper_rotation() {
        // orientation of the first three points survives
        let theta = random_configuration(2, 3, 4);
        let anchored = anchor_configuration(&theta);
        let orient = |t: &DenseMatrix| {
            let (ax, ay) = (t[(0, 1)] - t[(0, 0)], t[(1, 1)] - t[(1, 0)]);
            let (bx, by) = (t[(0, 2)] - t[(0, 0)], t[(1, 2)] - t[(1, 0)]);
            ax * by - ay * bx
        };
        assert!((orient(&theta) - orient(&anchored)).abs() < 1e-12);
    }

    #[test]
    fn surrogate_is_tangent_and_dominates() {
        let prob = random_problem(5, 2, 21);
        let anchor = random_configuration(2, 5, 22);
        let f0 = stress(&anchor, &prob).unwrap();
        let g0 = mds_surrogate(&anchor, &anchor, &prob).unwrap();
        assert!((g0 - f0).abs() <= 1e-10 * f0);
        for s in 0..50 {
            let theta = random_configuration(2, 5, 1000 + s);
            let g = mds_surrogate(&theta, &anchor, &prob).unwrap();
            let f = stress(&theta, &prob).unwrap();
            assert!(g >= f - 1e-10 * (1.0 + f));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prob = random_problem(5, 2, 31);
        let theta = random_configuration(2, 5, 32);
        let grad = stress_gradient(&theta, &prob).unwrap();
        let h = 1e-5;
        for idx in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up.as_mut_slice()[idx] += h;
            dn.as_mut_slice()[idx] -= h;
            let fd = (stress(&up, &prob).unwrap() - stress(&dn, &prob).unwrap()) / (2.0 * h);
            let g = grad.as_slice()[idx];
            assert!((fd - g).abs() <= 1e-5 * (1.0 + g.abs()), "{fd} vs {g}");
        }
    }

    #[test]
    fn embeddable_data_is_recovered() {
        let (prob, _) = embeddable(8, 2, 41);
        let config = MmConfig::default().with_seed(5).with_max_iters(20_000);
        let (theta, trace) = mds_run(&prob, &config, true, &Backend::serial()).unwrap();
        assert!(trace.is_monotone(Direction::Minimize, 1e-12));
        assert!(
            stress(&theta, &prob).unwrap() < 1e-6,
            "{}",
            trace.final_objective()
        );
    }

    #[test]
    fn three_points_on_a_line_match_grid_search() {
        let y =
            DenseMatrix::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, 2.5], [2.0, 2.5, 0.0]]).unwrap();
        let prob = MdsProblem::with_unit_weights(y, 1).unwrap();
        let mut best = f64::INFINITY;
        let steps = 600;
        for a in 0..=steps {
            for b in 0..=steps {
                let t = DenseMatrix::row_vector(vec![
                    0.0,
                    -3.0 + 6.0 * a as f64 / steps as f64,
                    -3.0 + 6.0 * b as f64 / steps as f64,
                ]);
                best = best.min(stress(&t, &prob).unwrap());
            }
        }
        let found = (0..20)
            .map(|seed| {
                let config = MmConfig::default().with_seed(seed);
                mds_run(&prob, &config, false, &Backend::serial())
                    .unwrap()
                    .1
                    .final_objective()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(found <= best + 1e-3, "{found} vs grid {best}");
    }

    #[test]
    fn vote_dissimilarities() {
        let votes = DenseMatrix::from_rows(&[
            [1.0, -1.0, 1.0, 1.0, 0.0],
            [1.0, -1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, -1.0, -1.0, 0.0],
            [1.0, -1.0, 1.0, -1.0, 0.0],
        ])
        .unwrap();
        let y = votes_to_dissimilarity(&votes).unwrap();
        assert_eq!(y[(0, 1)], 0.0);
        assert_eq!(y[(0, 2)], 1.0);
        assert_eq!(y[(0, 3)], 0.25);
        assert_eq!(y[(3, 0)], 0.25);
        assert_eq!(y[(2, 2)], 0.0);
    }

    #[test]
    fn disjoint_voters_are_an_error() {
        let votes = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap();
        assert!(matches!(
            votes_to_dissimilarity(&votes),
            Err(Error::NoSharedVotes { i: 0, j: 1 })
        ));
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let y = DenseMatrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(MdsProblem::with_unit_weights(y, 1).is_err());
        let y = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(MdsProblem::new(DenseMatrix::zeros(2, 2), y.clone(), 1).is_err());
        assert!(MdsProblem::with_unit_weights(y, 0).is_err());
    }
}
