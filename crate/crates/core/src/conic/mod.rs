//! First-order solver for conic programs over zero, nonnegative and PSD
//! cones:
//!
//! ```text
//! minimize    cᵀx
//! subject to  Ax + s = b,  s ∈ K
//! ```
//!
//! with dual `maximize -bᵀy s.t. Aᵀy + c = 0, y ∈ K*`. The solver runs
//! Douglas–Rachford splitting on the homogeneous self-dual embedding with
//! diagonal equilibration, adaptive dual scaling and safeguarded Anderson
//! acceleration.

mod admm;
mod cones;
mod dump;
mod presolve;
mod sparse;

pub use cones::{psd_project, smat, svec, svec_index, triangular_side, Cone};
pub use dump::{read_dump, write_dump};
pub use sparse::CsrMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Standard-form conic program `min cᵀx s.t. Ax + s = b, s ∈ K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn new(c: Vec<f64>, a: CsrMatrix, b: Vec<f64>, cones: Vec<Cone>) -> Result<Self> {
        let p = ConicProblem { c, a, b, cones };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.ncols() != self.c.len() {
            return domain(format!(
                "A has {} columns but c has length {}",
                self.a.ncols(),
                self.c.len()
            ));
        }
        if self.a.nrows() != self.b.len() {
            return domain(format!(
                "A has {} rows but b has length {}",
                self.a.nrows(),
                self.b.len()
            ));
        }
        let cone_rows: usize = self.cones.iter().map(Cone::dim).sum();
        if cone_rows != self.b.len() {
            return domain(format!(
                "cones cover {cone_rows} rows but the problem has {}",
                self.b.len()
            ));
        }
        if self.c.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return domain("non-finite entry in c or b");
        }
        Ok(())
    }

    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        -dot(&self.b, y)
    }
}

/// Solver settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Tolerance on relative primal/dual residuals and gap.
    pub eps: f64,
    pub max_iter: usize,
    /// Diagonal equilibration of the data.
    pub scale: bool,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    pub rho_x: f64,
    /// Initial dual scaling; adapted when `adaptive_scale` is set.
    pub initial_scale: f64,
    pub adaptive_scale: bool,
    /// Anderson acceleration memory; zero disables acceleration.
    pub anderson_memory: usize,
    /// Eliminate equality rows and shrink PSD blocks to the face they are
    /// confined to before iterating.
    pub presolve: bool,
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eps: 1e-8,
            max_iter: 200_000,
            scale: true,
            alpha: 1.5,
            rho_x: 1e-6,
            initial_scale: 0.1,
            adaptive_scale: true,
            anderson_memory: 20,
            presolve: true,
            verbose: false,
        }
    }
}

/// Solves `min cᵀx s.t. Ax + s = b, s ∈ K`.
///
/// With `settings.presolve`, programs whose equality rows confine a PSD block
/// to a proper face are solved in reduced form and mapped back.
pub fn solve(p: &ConicProblem, settings: &Settings) -> Result<ConicSolution> {
    p.validate()?;
    if settings.presolve {
        if let Some(red) = presolve::reduce(p) {
            if settings.verbose {
                eprintln!(
                    "conic: presolve {}x{} -> {}x{}",
                    p.num_rows(),
                    p.num_vars(),
                    red.problem.num_rows(),
                    red.problem.num_vars()
                );
            }
            let sol = admm::solve_direct(&red.problem, settings)?;
            return Ok(red.lift(p, sol));
        }
    }
    admm::solve_direct(p, settings)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
}

/// Relative residuals of a returned point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖Ax + s − b‖ / (1 + ‖b‖)`, or the Farkas residual for infeasibility rays.
    pub primal: f64,
    /// `‖Aᵀy + c‖ / (1 + ‖c‖)`.
    pub dual: f64,
    /// `|cᵀx + bᵀy| / (1 + |cᵀx| + |bᵀy|)`.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub status: Status,
    pub residuals: Residuals,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
