//! Generic majorization–minimization driver.
//!
//! A solver supplies an objective and the MM map `θ ↦ M(θ)`; [`run_mm`]
//! iterates the map, records every objective value and stops on the relative
//! change rule `|f_n − f_{n−1}| / (|f_{n−1}| + 1) < ε` or the iteration cap.
//! Each step is checked against the ascent/descent property.

pub mod rosenbrock;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the objective is to be driven down (majorization) or up
/// (minorization).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// True when moving from `previous` to `current` worsens the objective by
    /// more than `slack`.
    pub fn violates(self, previous: f64, current: f64, slack: f64) -> bool {
        match self {
            Direction::Minimize => current > previous + slack,
            Direction::Maximize => current < previous - slack,
        }
    }
}

/// Stopping rule and safety checks for [`run_mm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub check_monotone: bool,
    /// Allowed backwards movement, relative to `|f_prev| + 1`.
    pub monotone_tol: f64,
}

impl Default for MmConfig {
    fn default() -> Self {
        MmConfig {
            epsilon: 1e-9,
            max_iters: 100_000,
            seed: 0,
            check_monotone: true,
            monotone_tol: 1e-12,
        }
    }
}

impl MmConfig {
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.monotone_tol >= 0.0) {
            return Err(Error::invalid(format!(
                "monotone_tol must be non-negative, got {}",
                self.monotone_tol
            )));
        }
        Ok(())
    }
}

/// Per-iteration record of a run. `objective_values[0]` is the starting
/// point, so `objective_values.len() == iters + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmTrace {
    pub objective_values: Vec<f64>,
    /// Seconds since the start of the run at which each objective value was
    /// available.
    pub cumulative_seconds: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub wall_time: f64,
    pub final_relative_change: f64,
}

impl MmTrace {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_values
            .last()
            .expect("trace holds the initial value")
    }

    /// Writes `iter,objective,cumulative_seconds` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,objective,cumulative_seconds")?;
        for (i, (f, t)) in self
            .objective_values
            .iter()
            .zip(&self.cumulative_seconds)
            .enumerate()
        {
            writeln!(out, "{i},{f},{t}")?;
        }
        Ok(())
    }

    /// Same check the driver performs, applied after the fact.
    pub fn is_monotone(&self, direction: Direction, relative_slack: f64) -> bool {
        self.objective_values
            .windows(2)
            .all(|w| !direction.violates(w[0], w[1], relative_slack * w[0].abs()))
    }
}

/// An optimization problem solved by repeated application of an MM map.
pub trait MmProblem {
    type State: Clone;

    fn direction(&self) -> Direction;

    fn objective(&self, state: &Self::State) -> Result<f64>;

    /// One application of the algorithm map `M(θ)`.
    fn step(&self, state: &Self::State) -> Result<Self::State>;
}

/// Problems that can evaluate their surrogate `g(θ | θ_n)` directly. Used to
/// test tangency and domination, never by the driver.
pub trait Surrogate: MmProblem {
    fn surrogate(&self, theta: &Self::State, anchor: &Self::State) -> Result<f64>;
}

/// `|f_n − f_prev| / (|f_prev| + 1)`.
pub fn relative_change(f_n: f64, f_prev: f64) -> Result<f64> {
    if !f_n.is_finite() || !f_prev.is_finite() {
        return Err(Error::NonFinite {
            context: format!("relative change of {f_n} and {f_prev}"),
        });
    }
    Ok((f_n - f_prev).abs() / (f_prev.abs() + 1.0))
}

/// Iterates `θ_{n+1} = M(θ_n)` until the relative change of the objective
/// drops below `config.epsilon` or `config.max_iters` steps have been taken.
pub fn run_mm<P: MmProblem>(
    problem: &P,
    initial: P::State,
    config: &MmConfig,
) -> Result<(P::State, MmTrace)> {
    config.validate()?;
    let start = Instant::now();
    let direction = problem.direction();

    let mut state = initial;
    let mut previous = finite_objective(problem, &state, 0)?;
    let mut values = Vec::with_capacity(config.max_iters.min(1 << 16) + 1);
    let mut seconds = Vec::with_capacity(values.capacity());
    values.push(previous);
    seconds.push(start.elapsed().as_secs_f64());

    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iters = 0;
    while iters < config.max_iters {
        state = problem.step(&state)?;
        iters += 1;
        let current = finite_objective(problem, &state, iters)?;
        values.push(current);
        seconds.push(start.elapsed().as_secs_f64());

        if config.check_monotone
            && direction.violates(
                previous,
                current,
                config.monotone_tol * (previous.abs() + 1.0),
            )
        {
            return Err(Error::MonotonicityViolation {
                iter: iters,
                previous,
                current,
            });
        }
        change = relative_change(current, previous)?;
        previous = current;
        if change < config.epsilon {
            converged = true;
            break;
        }
    }

    let trace = MmTrace {
        objective_values: values,
        cumulative_seconds: seconds,
        iters,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        final_relative_change: change,
    };
    log::debug!(
        "mm run finished: iters={} converged={} objective={}",
        trace.iters,
        trace.converged,
        trace.final_objective()
    );
    Ok((state, trace))
}

fn finite_objective<P: MmProblem>(problem: &P, state: &P::State, iter: usize) -> Result<f64> {
    let f = problem.objective(state)?;
    if !f.is_finite() {
        return Err(Error::NonFinite {
            context: format!("objective at iteration {iter}"),
        });
    }
    Ok(f)
}
