//! Roughness-penalized emission tomography reconstruction.
//!
//! Maximizes `f(λ) = L(λ) − (μ/2) Σ_{{j,k}∈𝒩} (λ_j − λ_k)²` with the Poisson
//! loglikelihood `L(λ) = Σ_i [y_i ln (Eλ)_i − (Eλ)_i]`. Jensen's inequality
//! on `ln` and the convexity of `s²` give a surrogate whose maximizer in each
//! pixel is the positive root of a quadratic; with `μ = 0` it reduces to the
//! classical EM update.

mod geometry;
mod phantom;

pub use geometry::{build_neighborhoods, build_system_matrix, normalize_columns, PetGeometry};
pub use phantom::{disk_phantom, simulate_counts};

use crate::error::{Error, Result};
use crate::kernels::{matvec, tree_reduce_sum, Backend, DenseMatrix};
use crate::mm::{run_mm, Direction, MmConfig, MmProblem, MmTrace, Surrogate};

/// Column sums of `E` must be within this distance of one.
const COLUMN_SUM_TOL: f64 = 1e-9;

/// System matrix, counts, penalty and neighbourhood structure.
#[derive(Debug, Clone)]
pub struct PetProblem {
    e: DenseMatrix,
    e_t: DenseMatrix,
    y: Vec<f64>,
    mu: f64,
    neighborhoods: Vec<Vec<usize>>,
}

impl PetProblem {
    /// Validates the inputs; `e` must already have unit column sums.
    pub fn new(
        e: DenseMatrix,
        y: Vec<f64>,
        mu: f64,
        neighborhoods: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let (d, p) = e.shape();
        if y.len() != d {
            return Err(Error::DimensionMismatch {
                op: "pet counts",
                left: (d, p),
                right: (y.len(), 1),
            });
        }
        e.require_nonnegative("system matrix")?;
        if let Some(i) = y.iter().position(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::NegativeEntry {
                what: "counts",
                index: i,
            });
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!(
                "penalty must be finite and >= 0, got {mu}"
            )));
        }
        let e_t = e.transpose();
        for j in 0..p {
            let s: f64 = e_t.row(j).iter().sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::invalid(format!(
                    "column {j} of the system matrix sums to {s}, expected 1"
                )));
            }
        }
        if neighborhoods.len() != p {
            return Err(Error::invalid(format!(
                "{} neighbourhood lists for {p} pixels",
                neighborhoods.len()
            )));
        }
        for (j, list) in neighborhoods.iter().enumerate() {
            for &k in list {
                if k >= p || k == j {
                    return Err(Error::invalid(format!(
                        "pixel {j} has invalid neighbour {k}"
                    )));
                }
                if !neighborhoods[k].contains(&j) {
                    return Err(Error::invalid(format!(
                        "neighbourhood is not symmetric: {k} in N({j}) but not {j} in N({k})"
                    )));
                }
            }
        }
        Ok(PetProblem {
            e,
            e_t,
            y,
            mu,
            neighborhoods,
        })
    }

    /// Builds the system matrix and 4-neighbourhoods for `geometry`.
    pub fn from_geometry(geometry: &PetGeometry, y: Vec<f64>, mu: f64) -> Result<Self> {
        let e = build_system_matrix(geometry)?;
        Self::new(e, y, mu, build_neighborhoods(geometry.grid_side))
    }

    pub fn system_matrix(&self) -> &DenseMatrix {
        &self.e
    }

    pub fn counts(&self) -> &[f64] {
        &self.y
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }

    pub fn n_pixels(&self) -> usize {
        self.e.cols()
    }

    pub fn n_rays(&self) -> usize {
        self.e.rows()
    }

    /// Same problem with a different penalty.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!(
                "penalty must be finite and >= 0, got {mu}"
            )));
        }
        let mut next = self.clone();
        next.mu = mu;
        Ok(next)
    }
}

fn check_len(lambda: &[f64], p: usize) -> Result<()> {
    if lambda.len() != p {
        return Err(Error::DimensionMismatch {
            op: "pet intensities",
            left: (lambda.len(), 1),
            right: (p, 1),
        });
    }
    Ok(())
}

/// `Σ_i [y_i ln (Eλ)_i − (Eλ)_i]`; a zero-count ray contributes `−(Eλ)_i`.
pub fn pet_loglik(lambda: &[f64], e: &DenseMatrix, y: &[f64], backend: &Backend) -> Result<f64> {
    check_len(lambda, e.cols())?;
    let means = matvec(e, lambda, backend)?;
    let terms = means
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&m, &c))| {
            if c == 0.0 {
                Ok(-m)
            } else if m > 0.0 {
                Ok(c * m.ln() - m)
            } else {
                Err(Error::ZeroMean { index: i })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(tree_reduce_sum(&terms, backend))
}

/// `Σ_{{j,k}∈𝒩} (λ_j − λ_k)²`, each unordered pair once.
pub fn roughness(lambda: &[f64], neighborhoods: &[Vec<usize>]) -> f64 {
    let terms: Vec<f64> = neighborhoods
        .iter()
        .enumerate()
        .flat_map(|(j, list)| {
            list.iter()
                .filter(move |&&k| k > j)
                .map(move |&k| (lambda[j] - lambda[k]) * (lambda[j] - lambda[k]))
        })
        .collect();
    tree_reduce_sum(&terms, &Backend::serial())
}

/// `L(λ) − (μ/2)·roughness(λ)`.
pub fn pet_penalized_objective(
    lambda: &[f64],
    problem: &PetProblem,
    backend: &Backend,
) -> Result<f64> {
    let l = pet_loglik(lambda, &problem.e, &problem.y, backend)?;
    if problem.mu == 0.0 {
        return Ok(l);
    }
    Ok(l - 0.5 * problem.mu * roughness(lambda, &problem.neighborhoods))
}

/// `y_i / (Eλ)_i` with zero-count rays mapped to zero.
fn count_ratios(means: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    means
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&m, &c))| {
            if c == 0.0 {
                Ok(0.0)
            } else if m > 0.0 {
                Ok(c / m)
            } else {
                Err(Error::ZeroMean { index: i })
            }
        })
        .collect()
}

/// Gradient of [`pet_penalized_objective`]:
/// `Σ_i e_ij (y_i/(Eλ)_i − 1) − μ Σ_{k∈𝒩_j} (λ_j − λ_k)`.
pub fn pet_gradient(lambda: &[f64], problem: &PetProblem, backend: &Backend) -> Result<Vec<f64>> {
    check_len(lambda, problem.n_pixels())?;
    let means = matvec(&problem.e, lambda, backend)?;
    let resid: Vec<f64> = count_ratios(&means, &problem.y)?
        .into_iter()
        .map(|r| r - 1.0)
        .collect();
    let mut grad = matvec(&problem.e_t, &resid, backend)?;
    if problem.mu > 0.0 {
        for (j, g) in grad.iter_mut().enumerate() {
            let pull: f64 = problem.neighborhoods[j]
                .iter()
                .map(|&k| lambda[j] - lambda[k])
                .sum();
            *g -= problem.mu * pull;
        }
    }
    Ok(grad)
}

/// Jensen weights `z_ij = y_i e_ij λ_j / (Eλ)_i` as a dense `d × p` matrix.
/// Row sums reproduce the counts; column sums are the `c_j` of the update.
pub fn jensen_weights(
    lambda: &[f64],
    problem: &PetProblem,
    backend: &Backend,
) -> Result<DenseMatrix> {
    check_len(lambda, problem.n_pixels())?;
    let means = matvec(&problem.e, lambda, backend)?;
    let ratios = count_ratios(&means, &problem.y)?;
    let mut z = problem.e.clone();
    for (i, r) in ratios.iter().enumerate() {
        for (zij, l) in z.row_mut(i).iter_mut().zip(lambda) {
            *zij *= r * l;
        }
    }
    Ok(z)
}

/// One MM update `λ_n ↦ λ_{n+1}`.
///
/// `c_j = Σ_i z_ij` is evaluated as `λ_j (Eᵗ r)_j` with `r_i = y_i/(Eλ)_i`,
/// pixel-parallel over the transposed system matrix. With `μ > 0` each pixel
/// takes the positive root of `a λ² + b λ + c = 0`,
/// `a = −2μ|𝒩_j|`, `b = μ(|𝒩_j|λ_j + Σ_{k∈𝒩_j} λ_k) − 1`; with `μ = 0`
/// the update is `λ_j = c_j`. Zero intensities are accepted (absorbing when
/// `μ = 0`); negative or non-finite ones are an error.
pub fn pet_update(lambda: &[f64], problem: &PetProblem, backend: &Backend) -> Result<Vec<f64>> {
    check_len(lambda, problem.n_pixels())?;
    // a pixel whose rays all have zero counts can legitimately reach 0
    if let Some(pixel) = lambda.iter().position(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::NonPositiveIntensity {
            pixel,
            value: lambda[pixel],
        });
    }
    let means = matvec(&problem.e, lambda, backend)?;
    let ratios = count_ratios(&means, &problem.y)?;
    let back = matvec(&problem.e_t, &ratios, backend)?;

    let mu = problem.mu;
    let mut next = vec![0.0; lambda.len()];
    // NaN marks a negative discriminant, reported after the parallel phase
    backend.for_each_chunk(&mut next, 256, |chunk, out| {
        let base = chunk * 256;
        for (o, slot) in out.iter_mut().enumerate() {
            let j = base + o;
            let c = lambda[j] * back[j];
            *slot = if mu == 0.0 {
                c
            } else {
                let nb = &problem.neighborhoods[j];
                let count = nb.len() as f64;
                let a = -2.0 * mu * count;
                let b = mu * (count * lambda[j] + nb.iter().map(|&k| lambda[k]).sum::<f64>()) - 1.0;
                positive_root(a, b, c).unwrap_or(f64::NAN)
            };
        }
    });
    if let Some(pixel) = next.iter().position(|v| v.is_nan()) {
        let nb = &problem.neighborhoods[pixel];
        let a = -2.0 * mu * nb.len() as f64;
        let b = mu * (nb.len() as f64 * lambda[pixel] + nb.iter().map(|&k| lambda[k]).sum::<f64>())
            - 1.0;
        let c = lambda[pixel] * back[pixel];
        return Err(Error::NegativeDiscriminant {
            pixel,
            value: b * b - 4.0 * a * c,
        });
    }
    Ok(next)
}

/// Non-negative root `(−b − √(b² − 4ac)) / (2a)` of `a x² + b x + c` for
/// `a ≤ 0 ≤ c`, evaluated without cancellation. `None` if the discriminant
/// is negative.
fn positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    if b <= 0.0 {
        if c == 0.0 {
            return Some(0.0);
        }
        // conjugate form, also covers a = 0
        Some(2.0 * c / (sq - b))
    } else {
        Some((-b - sq) / (2.0 * a))
    }
}

/// Direct evaluation of the minorizing surrogate `g(λ | λ_n)`: the Jensen
/// `Q` function minus `(μ/4) Σ [(2λ_j − λ_nj − λ_nk)² + (2λ_k − λ_nj − λ_nk)²]`.
pub fn pet_surrogate(lambda: &[f64], anchor: &[f64], problem: &PetProblem) -> Result<f64> {
    let p = problem.n_pixels();
    check_len(lambda, p)?;
    check_len(anchor, p)?;
    let e = &problem.e;
    let mut q = 0.0;
    for i in 0..e.rows() {
        let row = e.row(i);
        let mean_n: f64 = row.iter().zip(anchor).map(|(a, b)| a * b).sum();
        let yi = problem.y[i];
        for j in 0..p {
            let eij = row[j];
            q -= eij * lambda[j];
            if yi == 0.0 || eij == 0.0 {
                continue;
            }
            if mean_n <= 0.0 {
                return Err(Error::ZeroMean { index: i });
            }
            let w = eij * anchor[j] / mean_n;
            if w == 0.0 {
                continue;
            }
            let inner = eij * lambda[j] / w;
            if inner <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            q += yi * w * inner.ln();
        }
    }
    let mut pen = 0.0;
    for (j, list) in problem.neighborhoods.iter().enumerate() {
        for &k in list.iter().filter(|&&k| k > j) {
            let s = anchor[j] + anchor[k];
            let a = 2.0 * lambda[j] - s;
            let b = 2.0 * lambda[k] - s;
            pen += a * a + b * b;
        }
    }
    Ok(q - 0.25 * problem.mu * pen)
}

/// PET reconstruction as an MM problem (maximization).
#[derive(Debug, Clone)]
pub struct PetSolver<'a> {
    pub problem: &'a PetProblem,
    pub backend: Backend,
}

impl MmProblem for PetSolver<'_> {
    type State = Vec<f64>;

    fn direction(&self) -> Direction {
        Direction::Maximize
    }

    fn objective(&self, lambda: &Vec<f64>) -> Result<f64> {
        pet_penalized_objective(lambda, self.problem, &self.backend)
    }

    fn step(&self, lambda: &Vec<f64>) -> Result<Vec<f64>> {
        pet_update(lambda, self.problem, &self.backend)
    }
}

impl Surrogate for PetSolver<'_> {
    fn surrogate(&self, lambda: &Vec<f64>, anchor: &Vec<f64>) -> Result<f64> {
        pet_surrogate(lambda, anchor, self.problem)
    }
}

/// Starts from `λ = 1` and iterates [`pet_update`] under the MM stopping rule.
pub fn pet_run(
    problem: &PetProblem,
    config: &MmConfig,
    backend: &Backend,
) -> Result<(Vec<f64>, MmTrace)> {
    let solver = PetSolver {
        problem,
        backend: backend.clone(),
    };
    run_mm(&solver, vec![1.0; problem.n_pixels()], config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pixel(e: &[f64], y: &[f64], mu: f64) -> PetProblem {
        let e = DenseMatrix::column(e.to_vec());
        PetProblem::new(e, y.to_vec(), mu, vec![vec![]]).unwrap()
    }

    fn two_pixel(mu: f64) -> PetProblem {
        let e = DenseMatrix::from_rows(&[[0.5, 0.25], [0.5, 0.75]]).unwrap();
        PetProblem::new(e, vec![3.0, 7.0], mu, vec![vec![1], vec![0]]).unwrap()
    }

    #[test]
    fn em_single_pixel_lands_on_mle() {
        let prob = single_pixel(&[0.25, 0.75], &[3.0, 5.0], 0.0);
        let next = pet_update(&[1.0], &prob, &Backend::serial()).unwrap();
        assert!((next[0] - 8.0).abs() <= 1e-14 * 8.0, "{}", next[0]);
    }

    #[test]
    fn scalar_loglik_is_maximized_at_count() {
        let prob = single_pixel(&[1.0], &[6.0], 0.0);
        let f = |l: f64| {
            pet_loglik(
                &[l],
                prob.system_matrix(),
                prob.counts(),
                &Backend::serial(),
            )
            .unwrap()
        };
        assert!((f(6.0) - (6.0 * 6f64.ln() - 6.0)).abs() < 1e-12);
        assert!(f(6.0) > f(5.9) && f(6.0) > f(6.1));
    }

    #[test]
    fn saturated_model_value() {
        let prob = two_pixel(0.0);
        // λ solving Eλ = y exactly: [[.5,.25],[.5,.75]] λ = [3,7] → λ = (2, 8)
        let l = pet_loglik(
            &[2.0, 8.0],
            prob.system_matrix(),
            prob.counts(),
            &Backend::serial(),
        )
        .unwrap();
        let expected: f64 = [3.0f64, 7.0].iter().map(|y| y * y.ln() - y).sum();
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn penalty_term_examples() {
        let prob = two_pixel(2.0);
        let b = Backend::serial();
        let lam = [1.0, 3.0];
        let l = pet_loglik(&lam, prob.system_matrix(), prob.counts(), &b).unwrap();
        let f = pet_penalized_objective(&lam, &prob, &b).unwrap();
        assert!((f - (l - 4.0)).abs() < 1e-12);
        let flat = [2.0, 2.0];
        let l = pet_loglik(&flat, prob.system_matrix(), prob.counts(), &b).unwrap();
        assert_eq!(pet_penalized_objective(&flat, &prob, &b).unwrap(), l);
        let unpenalized = prob.with_mu(0.0).unwrap();
        assert_eq!(
            pet_penalized_objective(&lam, &unpenalized, &b).unwrap(),
            pet_loglik(&lam, prob.system_matrix(), prob.counts(), &b).unwrap()
        );
    }

    #[test]
    fn loglik_errors_on_zero_mean_with_counts() {
        let prob = two_pixel(0.0);
        let e = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let err = pet_loglik(&[0.0, 1.0], &e, prob.counts(), &Backend::serial()).unwrap_err();
        assert!(matches!(err, Error::ZeroMean { index: 0 }));
    }

    #[test]
    fn non_positive_intensity_is_rejected() {
        let prob = two_pixel(1.0);
        let err = pet_update(&[1.0, -0.5], &prob, &Backend::serial()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveIntensity { pixel: 1, .. }));
        let err = pet_update(&[f64::NAN, 1.0], &prob, &Backend::serial()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveIntensity { pixel: 0, .. }));
    }

    #[test]
    fn pixel_without_counts_is_absorbed_at_zero() {
        let e = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let prob = PetProblem::new(e, vec![0.0, 5.0], 0.5, vec![vec![1], vec![0]]).unwrap();
        let next = pet_update(&[1.0, 1.0], &prob, &Backend::serial()).unwrap();
        assert_eq!(next[0], 0.0);
        assert!(next[1] > 0.0);
        // the penalty pulls the empty pixel towards its bright neighbour
        let again = pet_update(&next, &prob, &Backend::serial()).unwrap();
        assert!(again[0] > 0.0);
        let plain = prob.with_mu(0.0).unwrap();
        let em = pet_update(&next, &plain, &Backend::serial()).unwrap();
        assert_eq!(em[0], 0.0);
    }

    #[test]
    fn tiny_penalty_matches_em() {
        let e = DenseMatrix::from_rows(&[
            [0.4, 0.1, 0.3, 0.2],
            [0.3, 0.5, 0.1, 0.2],
            [0.3, 0.4, 0.6, 0.6],
        ])
        .unwrap();
        let nb = build_neighborhoods(2);
        let y = vec![4.0, 9.0, 2.0];
        let em = PetProblem::new(e.clone(), y.clone(), 0.0, nb.clone()).unwrap();
        let pen = PetProblem::new(e, y, 1e-12, nb).unwrap();
        let lam = [0.7, 1.9, 2.4, 0.3];
        let a = pet_update(&lam, &em, &Backend::serial()).unwrap();
        let b = pet_update(&lam, &pen, &Backend::serial()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * x.abs());
        }
    }

    #[test]
    fn penalized_update_is_non_negative_and_solves_stationarity() {
        let prob = two_pixel(0.3);
        let lam = [1.5, 4.0];
        let next = pet_update(&lam, &prob, &Backend::serial()).unwrap();
        let z = jensen_weights(&lam, &prob, &Backend::serial()).unwrap();
        for j in 0..2 {
            assert!(next[j] > 0.0);
            let c: f64 = (0..2).map(|i| z[(i, j)]).sum();
            let k = 1 - j;
            // ∂g/∂λ_j = c/λ − 1 − μ(2λ − λ_nj − λ_nk) = 0 at the new point
            let d = c / next[j] - 1.0 - 0.3 * (2.0 * next[j] - lam[j] - lam[k]);
            assert!(d.abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn jensen_weights_rows_sum_to_counts() {
        let prob = two_pixel(0.0);
        let z = jensen_weights(&[1.2, 0.4], &prob, &Backend::serial()).unwrap();
        for i in 0..2 {
            let s: f64 = z.row(i).iter().sum();
            assert!((s - prob.counts()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_tangent_at_anchor() {
        let prob = two_pixel(0.7);
        let lam = vec![1.3, 2.2];
        let g = pet_surrogate(&lam, &lam, &prob).unwrap();
        let f = pet_penalized_objective(&lam, &prob, &Backend::serial()).unwrap();
        assert!((g - f).abs() <= 1e-12 * (1.0 + f.abs()));
    }

    #[test]
    fn problem_validation() {
        let e = DenseMatrix::from_rows(&[[0.5, 0.2], [0.4, 0.8]]).unwrap();
        assert!(PetProblem::new(e, vec![1.0, 1.0], 0.0, vec![vec![1], vec![0]]).is_err());
        let e = DenseMatrix::identity(2);
        assert!(PetProblem::new(e.clone(), vec![1.0, 1.0], 0.0, vec![vec![1], vec![]]).is_err());
        assert!(PetProblem::new(e.clone(), vec![1.0, -1.0], 0.0, vec![vec![], vec![]]).is_err());
        assert!(PetProblem::new(e, vec![1.0, 1.0], -1.0, vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn positive_root_cases() {
        // a = 0 falls back to −c/b
        assert_eq!(positive_root(0.0, -1.0, 3.0), Some(3.0));
        // −x² − x + 6 = 0 → x = 2
        assert!((positive_root(-1.0, -1.0, 6.0).unwrap() - 2.0).abs() < 1e-15);
        // −x² + x + 6 = 0 → x = 3
        assert!((positive_root(-1.0, 1.0, 6.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(positive_root(1.0, 0.0, 1.0), None);
        // double root at zero
        assert_eq!(positive_root(-1.0, 0.0, 0.0), Some(0.0));
    }
}
