//! Nonnegative matrix factorization `X ≈ VW` by MM.
//!
//! Two losses are supported:
//!
//! * Frobenius, `‖X − VW‖²_F`, minimized by the alternating multiplicative
//!   updates `V ← V ∘ (XWᵗ) / ((VW)Wᵗ)` then `W ← W ∘ (VᵗX) / (Vᵗ(VW))`.
//! * Poisson, `Σ x ln(VW) − VW`, maximized by square-root multiplicative
//!   updates.
//!
//! Denominators are evaluated literally as `B Wᵗ` with `B = VW` (and
//! `Vᵗ C` with `C = V_{n+1} W_n`), so when `X = VW` holds bitwise the update
//! ratios are exactly one and the factors do not move.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, matmul, tree_reduce_sum, Backend, DenseMatrix};
use crate::mm::{run_mm, Direction, MmConfig, MmProblem, MmTrace, Surrogate};

/// Added to multiplicative-update denominators so an underflowed
/// denominator yields a zero (absorbed) entry instead of NaN.
pub const DENOMINATOR_GUARD: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct NnmfProblem {
    x: DenseMatrix,
    rank: usize,
}

impl NnmfProblem {
    pub fn new(x: DenseMatrix, rank: usize) -> Result<Self> {
        x.require_nonnegative("data matrix")?;
        if !x.is_finite() {
            return Err(Error::NonFinite {
                context: "data matrix".into(),
            });
        }
        if rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if rank > x.rows().min(x.cols()) {
            log::warn!(
                "rank {rank} exceeds min(p, q) = {} for a {}x{} matrix",
                x.rows().min(x.cols()),
                x.rows(),
                x.cols()
            );
        }
        Ok(NnmfProblem { x, rank })
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Factor state `(V, W)` with `V` p×r and `W` r×q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    #[serde(with = "matrix_serde")]
    pub v: DenseMatrix,
    #[serde(with = "matrix_serde")]
    pub w: DenseMatrix,
}

impl FactorPair {
    /// Entries drawn uniformly on the open interval (0, 1), `V` first.
    pub fn random(p: usize, q: usize, rank: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows, cols| {
            let data = (0..rows * cols)
                .map(|_| rng.sample::<f64, _>(Open01))
                .collect();
            DenseMatrix::from_vec(rows, cols, data).expect("sized buffer")
        };
        let v = draw(p, rank);
        let w = draw(rank, q);
        FactorPair { v, w }
    }

    pub fn reconstruction(&self, backend: &Backend) -> Result<DenseMatrix> {
        matmul(&self.v, &self.w, false, false, backend)
    }
}

fn check_factors(x: &DenseMatrix, v: &DenseMatrix, w: &DenseMatrix) -> Result<()> {
    if v.rows() != x.rows() || w.cols() != x.cols() || v.cols() != w.rows() {
        return Err(Error::DimensionMismatch {
            op: "nnmf factors",
            left: v.shape(),
            right: w.shape(),
        });
    }
    Ok(())
}

/// `‖X − VW‖²_F`.
pub fn nnmf_objective(
    x: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    backend: &Backend,
) -> Result<f64> {
    check_factors(x, v, w)?;
    let b = matmul(v, w, false, false, backend)?;
    let sq = kernels::zip_with(x, &b, |xv, bv| (xv - bv) * (xv - bv), backend)?;
    Ok(tree_reduce_sum(sq.as_slice(), backend))
}

/// `V_{n+1} = V_n ∘ (X W_nᵗ) / ((V_n W_n) W_nᵗ)`.
pub fn nnmf_update_v(
    x: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    backend: &Backend,
) -> Result<DenseMatrix> {
    check_factors(x, v, w)?;
    x.require_nonnegative("X")?;
    v.require_nonnegative("V")?;
    w.require_nonnegative("W")?;
    let numer = matmul(x, w, false, true, backend)?;
    let b = matmul(v, w, false, false, backend)?;
    let denom = matmul(&b, w, false, true, backend)?;
    kernels::zip3_with(v, &numer, &denom, multiplicative, backend)
}

/// `W_{n+1} = W_n ∘ (V_{n+1}ᵗ X) / (V_{n+1}ᵗ (V_{n+1} W_n))`.
pub fn nnmf_update_w(
    x: &DenseMatrix,
    v_next: &DenseMatrix,
    w: &DenseMatrix,
    backend: &Backend,
) -> Result<DenseMatrix> {
    check_factors(x, v_next, w)?;
    x.require_nonnegative("X")?;
    v_next.require_nonnegative("V")?;
    w.require_nonnegative("W")?;
    let numer = matmul(v_next, x, true, false, backend)?;
    let c = matmul(v_next, w, false, false, backend)?;
    let denom = matmul(v_next, &c, true, false, backend)?;
    kernels::zip3_with(w, &numer, &denom, multiplicative, backend)
}

fn multiplicative(old: f64, numer: f64, denom: f64) -> f64 {
    old * (numer / (denom + DENOMINATOR_GUARD))
}

/// Gradients `(∂f/∂V, ∂f/∂W)` of the Frobenius objective:
/// `2(VW − X)Wᵗ` and `2Vᵗ(VW − X)`.
pub fn nnmf_gradient(
    x: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    backend: &Backend,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_factors(x, v, w)?;
    let b = matmul(v, w, false, false, backend)?;
    let resid = kernels::zip_with(&b, x, |bv, xv| 2.0 * (bv - xv), backend)?;
    let gv = matmul(&resid, w, false, true, backend)?;
    let gw = matmul(v, &resid, true, false, backend)?;
    Ok((gv, gw))
}

/// Direct triple-sum evaluation of the Frobenius majorizer
/// `Σ_ijk (a/b)(x − (b/a) v w)²`, `a = v_n w_n`, `b = Σ_k a`.
///
/// Serial and unoptimized; intended for checking tangency and domination on
/// small instances.
pub fn nnmf_surrogate(
    x: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    v_n: &DenseMatrix,
    w_n: &DenseMatrix,
) -> Result<f64> {
    check_factors(x, v, w)?;
    check_factors(x, v_n, w_n)?;
    let r = v.cols();
    let mut total = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let xij = x[(i, j)];
            let b: f64 = (0..r).map(|k| v_n[(i, k)] * w_n[(k, j)]).sum();
            if b == 0.0 {
                let vw: f64 = (0..r).map(|k| v[(i, k)] * w[(k, j)]).sum();
                total += (xij - vw) * (xij - vw);
                continue;
            }
            for k in 0..r {
                let a = v_n[(i, k)] * w_n[(k, j)];
                let vw = v[(i, k)] * w[(k, j)];
                if a == 0.0 {
                    if vw != 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    continue;
                }
                let t = xij - (b / a) * vw;
                total += (a / b) * t * t;
            }
        }
    }
    Ok(total)
}

/// Frobenius-loss NNMF as an MM problem; one step is a full V-then-W sweep.
#[derive(Debug, Clone)]
pub struct FrobeniusNnmf<'a> {
    pub problem: &'a NnmfProblem,
    pub backend: Backend,
}

impl MmProblem for FrobeniusNnmf<'_> {
    type State = FactorPair;

    fn direction(&self) -> Direction {
        Direction::Minimize
    }

    fn objective(&self, s: &FactorPair) -> Result<f64> {
        nnmf_objective(&self.problem.x, &s.v, &s.w, &self.backend)
    }

    fn step(&self, s: &FactorPair) -> Result<FactorPair> {
        let x = &self.problem.x;
        let v = nnmf_update_v(x, &s.v, &s.w, &self.backend)?;
        let w = nnmf_update_w(x, &v, &s.w, &self.backend)?;
        Ok(FactorPair { v, w })
    }
}

impl Surrogate for FrobeniusNnmf<'_> {
    fn surrogate(&self, s: &FactorPair, anchor: &FactorPair) -> Result<f64> {
        nnmf_surrogate(&self.problem.x, &s.v, &s.w, &anchor.v, &anchor.w)
    }
}

/// Algorithm entry point: uniform (0,1) start from `config.seed`, then
/// alternating multiplicative updates until the stopping rule fires.
pub fn nnmf_run(
    problem: &NnmfProblem,
    config: &MmConfig,
    backend: &Backend,
) -> Result<(FactorPair, MmTrace)> {
    let start = FactorPair::random(
        problem.x.rows(),
        problem.x.cols(),
        problem.rank,
        config.seed,
    );
    nnmf_run_from(problem, start, config, backend)
}

pub fn nnmf_run_from(
    problem: &NnmfProblem,
    start: FactorPair,
    config: &MmConfig,
    backend: &Backend,
) -> Result<(FactorPair, MmTrace)> {
    let solver = FrobeniusNnmf {
        problem,
        backend: backend.clone(),
    };
    run_mm(&solver, start, config)
}

/// Poisson pseudo-loglikelihood `Σ_ij [x_ij ln b_ij − b_ij]`, `B = VW`,
/// with `0 ln 0 = 0`.
pub fn nnmf_poisson_objective(
    x: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    backend: &Backend,
) -> Result<f64> {
    check_factors(x, v, w)?;
    let b = matmul(v, w, false, false, backend)?;
    let terms = kernels::try_zip_with(
        x,
        &b,
        |i, xv, bv| {
            if xv == 0.0 {
                Ok(-bv)
            } else if bv > 0.0 {
                Ok(xv * bv.ln() - bv)
            } else {
                Err(Error::ZeroMean { index: i })
            }
        },
        backend,
    )?;
    Ok(tree_reduce_sum(terms.as_slice(), backend))
}

/// `x / b` with `0 / 0 = 0`; positive `x` over zero `b` is an error.
fn count_ratio(x: &DenseMatrix, b: &DenseMatrix, backend: &Backend) -> Result<DenseMatrix> {
    kernels::try_zip_with(
        x,
        b,
        |i, xv, bv| {
            if xv == 0.0 {
                Ok(0.0)
            } else if bv > 0.0 {
                Ok(xv / bv)
            } else {
                Err(Error::ZeroMean { index: i })
            }
        },
        backend,
    )
}

fn sqrt_multiplicative(old: f64, numer: f64, denom: f64) -> f64 {
    old * (numer / (denom + DENOMINATOR_GUARD)).sqrt()
}

/// One Poisson MM sweep: V by square-root multiplicative update, then W
/// with `B` recomputed from the new V.
pub fn nnmf_poisson_update(
    x: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    backend: &Backend,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_factors(x, v, w)?;
    x.require_nonnegative("X")?;
    v.require_nonnegative("V")?;
    w.require_nonnegative("W")?;
    let (p, q) = x.shape();

    let b = matmul(v, w, false, false, backend)?;
    let ratio = count_ratio(x, &b, backend)?;
    // both sums over j share the kernel's association tree
    let numer = matmul(&ratio, w, false, true, backend)?;
    let w_sums = matmul(w, &DenseMatrix::filled(q, 1, 1.0), false, false, backend)?;
    let denom = broadcast_row(w_sums.as_slice(), p);
    let v_next = kernels::zip3_with(v, &numer, &denom, sqrt_multiplicative, backend)?;

    let b = matmul(&v_next, w, false, false, backend)?;
    let ratio = count_ratio(x, &b, backend)?;
    let numer = matmul(&v_next, &ratio, true, false, backend)?;
    let v_sums = matmul(
        &DenseMatrix::filled(1, p, 1.0),
        &v_next,
        false,
        false,
        backend,
    )?;
    let denom = broadcast_column(v_sums.as_slice(), q);
    let w_next = kernels::zip3_with(w, &numer, &denom, sqrt_multiplicative, backend)?;
    Ok((v_next, w_next))
}

/// `rows`×len matrix whose every row is `values`.
fn broadcast_row(values: &[f64], rows: usize) -> DenseMatrix {
    let data = (0..rows).flat_map(|_| values.iter().copied()).collect();
    DenseMatrix::from_vec(rows, values.len(), data).expect("sized buffer")
}

/// len×`cols` matrix whose row k is filled with `values[k]`.
fn broadcast_column(values: &[f64], cols: usize) -> DenseMatrix {
    let data = values
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, cols))
        .collect();
    DenseMatrix::from_vec(values.len(), cols, data).expect("sized buffer")
}

/// Poisson-loss NNMF as an MM problem (maximization).
#[derive(Debug, Clone)]
pub struct PoissonNnmf<'a> {
    pub problem: &'a NnmfProblem,
    pub backend: Backend,
}

impl MmProblem for PoissonNnmf<'_> {
    type State = FactorPair;

    fn direction(&self) -> Direction {
        Direction::Maximize
    }

    fn objective(&self, s: &FactorPair) -> Result<f64> {
        nnmf_poisson_objective(&self.problem.x, &s.v, &s.w, &self.backend)
    }

    fn step(&self, s: &FactorPair) -> Result<FactorPair> {
        let (v, w) = nnmf_poisson_update(&self.problem.x, &s.v, &s.w, &self.backend)?;
        Ok(FactorPair { v, w })
    }
}

pub fn nnmf_poisson_run(
    problem: &NnmfProblem,
    config: &MmConfig,
    backend: &Backend,
) -> Result<(FactorPair, MmTrace)> {
    let start = FactorPair::random(
        problem.x.rows(),
        problem.x.cols(),
        problem.rank,
        config.seed,
    );
    let solver = PoissonNnmf {
        problem,
        backend: backend.clone(),
    };
    run_mm(&solver, start, config)
}

/// Result of [`cbcl_preprocess`].
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub matrix: DenseMatrix,
    /// Fraction of entries that fell outside [0, 1] after scaling.
    pub clamped_fraction: f64,
}

/// Maps every row to mean 0.25 and population standard deviation 0.25, then
/// clamps to [0, 1].
pub fn cbcl_preprocess(raw: &DenseMatrix) -> Result<Preprocessed> {
    const TARGET: f64 = 0.25;
    let mut out = raw.clone();
    let mut clamped = 0usize;
    let n = raw.cols() as f64;
    for i in 0..raw.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::ConstantRow { row: i });
        }
        let scale = TARGET / std;
        for v in row.iter_mut() {
            let y = (*v - mean) * scale + TARGET;
            if !(0.0..=1.0).contains(&y) {
                clamped += 1;
            }
            *v = y.clamp(0.0, 1.0);
        }
    }
    let clamped_fraction = if raw.is_empty() {
        0.0
    } else {
        clamped as f64 / raw.len() as f64
    };
    log::info!(
        "row scaling clamped {clamped} of {} entries ({:.4}%)",
        raw.len(),
        100.0 * clamped_fraction
    );
    Ok(Preprocessed {
        matrix: out,
        clamped_fraction,
    })
}

mod matrix_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::kernels::DenseMatrix;

    #[derive(Serialize, Deserialize)]
    struct Raw {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DenseMatrix, s: S) -> Result<S::Ok, S::Error> {
        Raw {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DenseMatrix, D::Error> {
        let raw = Raw::deserialize(d)?;
        DenseMatrix::from_vec(raw.rows, raw.cols, raw.data).map_err(serde::de::Error::custom)
    }
}
