//! Two-parameter MM demo on the Rosenbrock function.
//!
//! The coupling term `−2x₁²x₂` is majorized by
//! `x₁⁴ + x₂² + s² − 2s(x₁² + x₂)` with `s = x_{n1}² + x_{n2}`, which
//! separates the parameters into a quartic in `x₁` and a quadratic in `x₂`.

use super::{Direction, MmProblem, Surrogate};
use crate::error::Result;

pub type Point = [f64; 2];

/// `100(x₁² − x₂)² + (x₁ − 1)²`.
pub fn rosenbrock_objective(x: &Point) -> f64 {
    let a = x[0] * x[0] - x[1];
    let b = x[0] - 1.0;
    100.0 * a * a + b * b
}

/// Analytic gradient of [`rosenbrock_objective`].
pub fn rosenbrock_gradient(x: &Point) -> Point {
    let a = x[0] * x[0] - x[1];
    [400.0 * a * x[0] + 2.0 * (x[0] - 1.0), -200.0 * a]
}

fn anchor_sum(anchor: &Point) -> f64 {
    anchor[0] * anchor[0] + anchor[1]
}

/// Quartic surrogate in `x₁`: `200x₁⁴ − [200s − 1]x₁² − 2x₁ + 1`.
pub fn g1(x1: f64, anchor: &Point) -> f64 {
    let s = anchor_sum(anchor);
    let x2 = x1 * x1;
    200.0 * x2 * x2 - (200.0 * s - 1.0) * x2 - 2.0 * x1 + 1.0
}

/// Quadratic surrogate in `x₂`, including the constant `100s²` that makes
/// `g1 + g2` touch the objective at the anchor.
pub fn g2(x2: f64, anchor: &Point) -> f64 {
    let s = anchor_sum(anchor);
    200.0 * x2 * x2 - 200.0 * s * x2 + 100.0 * s * s
}

fn g1_prime(x: f64, s: f64) -> f64 {
    800.0 * x * x * x - 2.0 * (200.0 * s - 1.0) * x - 2.0
}

/// Minimizes the separated surrogate anchored at `x_n`.
pub fn rosenbrock_mm_step(x_n: &Point) -> Point {
    let s = anchor_sum(x_n);
    let roots = cubic_real_roots(s);
    let mut best = roots[0];
    let mut best_val = g1(best, x_n);
    for &r in &roots[1..] {
        let v = g1(r, x_n);
        if v < best_val || (v == best_val && r < best) {
            best = r;
            best_val = v;
        }
    }
    [best, 0.5 * s]
}

/// Real roots of `g1'(x) = 800x³ − 2(200s − 1)x − 2` by bisection over the
/// monotone pieces of the cubic.
fn cubic_real_roots(s: f64) -> Vec<f64> {
    // monic form x³ + a x + b
    let a = -(200.0 * s - 1.0) / 400.0;
    let b: f64 = -2.0 / 800.0;
    let bound = 1.0 + 1f64.max(a.abs()).max(b.abs());

    let mut breaks = vec![-bound];
    if a < 0.0 {
        let c = (-a / 3.0).sqrt();
        breaks.push(-c);
        breaks.push(c);
    }
    breaks.push(bound);

    let f = |x: f64| g1_prime(x, s);
    let mut roots = Vec::with_capacity(3);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
        } else if fhi == 0.0 {
            roots.push(hi);
        } else if flo.signum() != fhi.signum() {
            roots.push(bisect(f, lo, hi, flo));
        }
    }
    if roots.is_empty() {
        // Cannot happen for a cubic on a Cauchy bracket; keep the step total.
        roots.push(bisect(f, -bound, bound, f(-bound)));
    }
    roots
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..2000 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// The Rosenbrock function as an MM problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rosenbrock;

impl MmProblem for Rosenbrock {
    type State = Point;

    fn direction(&self) -> Direction {
        Direction::Minimize
    }

    fn objective(&self, x: &Point) -> Result<f64> {
        Ok(rosenbrock_objective(x))
    }

    fn step(&self, x: &Point) -> Result<Point> {
        Ok(rosenbrock_mm_step(x))
    }
}

impl Surrogate for Rosenbrock {
    fn surrogate(&self, x: &Point, anchor: &Point) -> Result<f64> {
        Ok(g1(x[0], anchor) + g2(x[1], anchor))
    }
}
