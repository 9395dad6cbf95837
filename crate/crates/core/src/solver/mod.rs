//! Linear solves, the bound-constrained damage subproblem, the alternate
//! minimization loops and the quasi-static driver.

mod alternate;
mod damage;
mod program;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::LinearSystem;
use crate::sparse::{conjugate_gradient, norm2, relative_residual, EnvelopeCholesky};

pub use alternate::{alternate_step, fast_alternate_step, solve_step, StepOutcome};
pub use damage::{
    minimize_damage, minimize_damage_from, projected_residual, DamageSolution, DamageSolverOptions,
};
pub use program::{
    check_kkt, run_quasi_static, Evolution, KktReport, Loading, Program, RunFailure, SeedBand,
    StepResult,
};

/// Outer loop variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Plain alternate minimization.
    Alternate,
    /// Alternate minimization with error-triggered relaxation.
    Fast,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Alternate => "alternate",
            Algorithm::Fast => "fast",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alternate" => Ok(Algorithm::Alternate),
            "fast" => Ok(Algorithm::Fast),
            _ => Err(Error::invalid("algorithm", format!("expected alternate or fast, got {s:?}"))),
        }
    }
}

/// Linear solver used for the elasticity system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    /// Envelope Cholesky on a reverse Cuthill-McKee ordering.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Relaxation constant of the fast variant, in (0, 1).
    pub c_l: f64,
    /// Sup-norm tolerance on the change of damage between outer iterations.
    pub tol_outer: f64,
    pub max_outer: usize,
    /// Relative residual of the linear solves.
    pub tol_lin: f64,
    /// Sup-norm tolerance on the projected criterion residual (Pa).
    pub tol_kkt: f64,
    /// Cap on relaxation blends per outer iteration.
    pub max_inner_relax: usize,
    pub linear_solver: LinearSolverKind,
    /// Record wall time per outer iteration; off keeps histories
    /// reproducible.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Alternate,
            c_l: 0.9,
            tol_outer: 1e-4,
            max_outer: 500,
            tol_lin: 1e-8,
            tol_kkt: 1e-3,
            max_inner_relax: 50,
            linear_solver: LinearSolverKind::Direct,
            record_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_l > 0.0 && self.c_l < 1.0) {
            return Err(Error::invalid("c_l", format!("must lie in (0, 1), got {}", self.c_l)));
        }
        for (name, v) in [
            ("tol_outer", self.tol_outer),
            ("tol_lin", self.tol_lin),
            ("tol_kkt", self.tol_kkt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if self.max_outer < 1 {
            return Err(Error::invalid("max_outer", "must be >= 1"));
        }
        if self.max_inner_relax < 1 {
            return Err(Error::invalid("max_inner_relax", "must be >= 1"));
        }
        Ok(())
    }
}

/// Displacement and damage on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Interleaved nodal displacement `[ux0, uy0, ux1, ...]`.
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub step: usize,
}

impl State {
    pub fn zero(nodes: usize, step: usize) -> Self {
        State {
            u: vec![0.0; 2 * nodes],
            alpha: vec![0.0; nodes],
            step,
        }
    }
}

/// Outer-iteration record of one loading step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepHistory {
    pub step: usize,
    /// Accepted sup-norm change of damage per outer iteration.
    pub errors: Vec<f64>,
    /// Relaxation blends per outer iteration.
    pub blends: Vec<usize>,
    /// Damage functional at the accepted iterate.
    pub objectives: Vec<f64>,
    /// Wall time per outer iteration (zero unless recorded).
    pub elapsed: Vec<f64>,
    pub converged: bool,
    /// Some outer iteration exhausted the relaxation cap.
    pub relax_cap_hit: bool,
}

impl StepHistory {
    pub fn iterations(&self) -> usize {
        self.errors.len()
    }

    pub fn total_blends(&self) -> usize {
        self.blends.iter().sum()
    }

    /// Number of outer iterations whose error exceeds its predecessor's.
    pub fn nonmonotone_steps(&self) -> usize {
        self.errors.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

/// Per-step histories of a whole run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorHistory {
    pub steps: Vec<StepHistory>,
}

impl ErrorHistory {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(StepHistory::iterations).sum()
    }

    pub fn total_blends(&self) -> usize {
        self.steps.iter().map(StepHistory::total_blends).sum()
    }

    pub fn nonmonotone_steps(&self) -> usize {
        self.steps.iter().map(StepHistory::nonmonotone_steps).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }
}

const MAX_REFINEMENT: usize = 10;

/// Solve an assembled elasticity system to relative residual `tol_lin`.
pub fn solve_linear(sys: &LinearSystem, tol_lin: f64) -> Result<Vec<f64>> {
    solve_linear_with(sys, tol_lin, LinearSolverKind::Direct)
}

pub fn solve_linear_with(sys: &LinearSystem, tol_lin: f64, kind: LinearSolverKind) -> Result<Vec<f64>> {
    let a = &sys.matrix;
    let b = &sys.rhs;
    if norm2(b) == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    match kind {
        LinearSolverKind::Direct => {
            let chol = EnvelopeCholesky::factor(a)?;
            let mut x = chol.solve(b);
            let mut res = relative_residual(a, &x, b);
            // iterative refinement absorbs round-off in badly scaled (nearly
            // fully damaged) systems; stop once it no longer helps
            let mut rounds = 0;
            while res > tol_lin && rounds < MAX_REFINEMENT {
                let ax = a.mul_vec(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                let dx = chol.solve(&r);
                let candidate: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
                let next = relative_residual(a, &candidate, b);
                rounds += 1;
                if !(next < res) {
                    break;
                }
                x = candidate;
                res = next;
            }
            if res <= tol_lin {
                Ok(x)
            } else {
                Err(Error::LinearSolve {
                    residual: res,
                    iterations: rounds,
                })
            }
        }
        LinearSolverKind::Cg => {
            let n = b.len();
            Ok(conjugate_gradient(a, b, None, tol_lin, 20 * n + 100)?.x)
        }
    }
}
