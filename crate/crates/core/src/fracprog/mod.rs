//! Single-ratio fractional programming.
//!
//! [`dinkelbach_maximize`] drives a concave-over-convex ratio to its maximum
//! using [`pg_ascent`] for the parametric subproblems. Complex decision
//! vectors are passed in stacked `[Re; Im]` form, with gradients taken
//! with respect to the real and imaginary parts.

mod dinkelbach;
mod pg;
mod projection;
mod quadratic;

use nalgebra::{DMatrix, DVector};

pub use dinkelbach::{dinkelbach_maximize, DinkelbachOutcome};
pub use pg::{pg_ascent, projected_gradient_residual, PgOutcome};
pub use projection::{project_box, project_box_slab, project_ellipsoid, project_ellipsoid_halfspace};
pub use quadratic::maximize_concave_quadratic;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop Dinkelbach once |N − λD| / D falls below this.
    pub dinkelbach_tol: f64,
    /// Projected-gradient residual target of the inner solver.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Armijo sufficient-increase constant, in (0, 1).
    pub armijo_c: f64,
    /// Step shrink factor on a failed Armijo test, in (0, 1).
    pub backtrack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dinkelbach_tol: 1e-7,
            inner_tol: 1e-6,
            max_outer: 30,
            max_inner: 2000,
            armijo_c: 1e-4,
            backtrack: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dinkelbach_tol > 0.0) {
            out.push("dinkelbach_tol must be positive".to_string());
        }
        if !(self.inner_tol > 0.0) {
            out.push("inner_tol must be positive".to_string());
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            out.push("iteration caps must be at least 1".to_string());
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            out.push("armijo_c must lie in (0, 1)".to_string());
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            out.push("backtrack must lie in (0, 1)".to_string());
        }
        out
    }
}

/// Stopping rule for the sequential (SCA) loops wrapped around the
/// Dinkelbach solver: stop once the step between successive expansion
/// points is below `eps`, scaled by `max(1, ‖x‖)` when `relative` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialOptions {
    pub eps: f64,
    pub max_iters: usize,
    pub relative: bool,
    /// After each step, also try longer steps along the same direction and
    /// keep the best feasible one.
    pub extrapolate: bool,
}

impl SequentialOptions {
    pub fn absolute(eps: f64, max_iters: usize) -> Self {
        Self { eps, max_iters, relative: false, extrapolate: false }
    }

    pub fn relative(eps: f64, max_iters: usize) -> Self {
        Self { eps, max_iters, relative: true, extrapolate: false }
    }

    pub fn with_extrapolation(mut self) -> Self {
        self.extrapolate = true;
        self
    }

    pub fn is_step_small(&self, step: f64, scale: f64) -> bool {
        let threshold = if self.relative { self.eps * scale.max(1.0) } else { self.eps };
        step < threshold
    }
}

/// Running summary of every Dinkelbach invocation inside a larger run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DinkelbachStats {
    pub invocations: usize,
    pub unconverged: usize,
    pub inner_unconverged: usize,
    pub worst_residual: f64,
    /// Outer steps where λ went down. Zero unless something is broken.
    pub lambda_decreases: usize,
}

impl DinkelbachStats {
    pub fn record(&mut self, outcome: &DinkelbachOutcome) {
        self.invocations += 1;
        if !outcome.converged {
            self.unconverged += 1;
        }
        self.inner_unconverged += outcome.inner_unconverged;
        self.worst_residual = self.worst_residual.max(outcome.residual);
        self.lambda_decreases += outcome.lambdas.windows(2).filter(|w| w[1] < w[0]).count();
    }

    pub fn merge(&mut self, other: &DinkelbachStats) {
        self.invocations += other.invocations;
        self.unconverged += other.unconverged;
        self.inner_unconverged += other.inner_unconverged;
        self.worst_residual = self.worst_residual.max(other.worst_residual);
        self.lambda_decreases += other.lambda_decreases;
    }
}

/// `normalᵀx >= offset`
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Box {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    /// Box intersected with `lower <= normalᵀx <= upper`.
    BoxSlab {
        lo: DVector<f64>,
        hi: DVector<f64>,
        normal: DVector<f64>,
        lower: f64,
        upper: f64,
    },
    /// `{Σ d_i x_i² <= radius_sq}`, optionally intersected with a halfspace.
    EllipsoidHalfspace {
        diag: DVector<f64>,
        radius_sq: f64,
        halfspace: Option<Halfspace>,
    },
}

impl FeasibleSet {
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            FeasibleSet::Box { lo, hi } => project_box(x, lo, hi),
            FeasibleSet::BoxSlab { lo, hi, normal, lower, upper } => project_box_slab(x, lo, hi, normal, *lower, *upper),
            FeasibleSet::EllipsoidHalfspace { diag, radius_sq, halfspace } => match halfspace {
                None => project_ellipsoid(x, diag, *radius_sq),
                Some(h) => project_ellipsoid_halfspace(x, diag, *radius_sq, &h.normal, h.offset),
            },
        }
    }

    /// Membership with an absolute slack on every constraint.
    pub fn contains(&self, x: &DVector<f64>, slack: f64) -> bool {
        let in_box = |lo: &DVector<f64>, hi: &DVector<f64>| x.iter().zip(lo.iter().zip(hi.iter())).all(|(x, (l, h))| *x >= l - slack && *x <= h + slack);
        match self {
            FeasibleSet::Box { lo, hi } => in_box(lo, hi),
            FeasibleSet::BoxSlab { lo, hi, normal, lower, upper } => {
                let s = normal.dot(x);
                in_box(lo, hi) && s >= lower - slack && s <= upper + slack
            }
            FeasibleSet::EllipsoidHalfspace { diag, radius_sq, halfspace } => {
                let q: f64 = x.iter().zip(diag.iter()).map(|(x, d)| d * x * x).sum();
                q <= radius_sq + slack && halfspace.as_ref().is_none_or(|h| h.normal.dot(x) >= h.offset - slack)
            }
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        let dim = match self {
            FeasibleSet::Box { lo, .. } | FeasibleSet::BoxSlab { lo, .. } => lo.len(),
            FeasibleSet::EllipsoidHalfspace { diag, .. } => diag.len(),
        };
        if dim == n {
            Ok(())
        } else {
            Err(Error::Domain(format!("feasible set has dimension {dim}, expected {n}")))
        }
    }
}

/// A ratio N(x)/D(x) with N concave, D convex and positive on the
/// feasible set.
pub trait RatioProblem {
    fn numerator(&self, x: &DVector<f64>) -> f64;
    fn numerator_grad(&self, x: &DVector<f64>) -> DVector<f64>;
    fn denominator(&self, x: &DVector<f64>) -> f64;
    fn denominator_grad(&self, x: &DVector<f64>) -> DVector<f64>;
    fn feasible_set(&self) -> &FeasibleSet;

    /// `(linear, curvature)` with `N − λD = const + linearᵀx − xᵀ curvature x`,
    /// for problems where that parametric objective is an exact quadratic.
    /// It lets the inner solver start from the exact maximizer.
    fn parametric_quadratic(&self, _lambda: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        None
    }
}

/// A ratio assembled from closures, handy for small problems and tests.
pub struct ClosureRatio<N, NG, D, DG> {
    pub numerator: N,
    pub numerator_grad: NG,
    pub denominator: D,
    pub denominator_grad: DG,
    pub set: FeasibleSet,
}

impl<N, NG, D, DG> RatioProblem for ClosureRatio<N, NG, D, DG>
where
    N: Fn(&DVector<f64>) -> f64,
    NG: Fn(&DVector<f64>) -> DVector<f64>,
    D: Fn(&DVector<f64>) -> f64,
    DG: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn numerator(&self, x: &DVector<f64>) -> f64 {
        (self.numerator)(x)
    }
    fn numerator_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.numerator_grad)(x)
    }
    fn denominator(&self, x: &DVector<f64>) -> f64 {
        (self.denominator)(x)
    }
    fn denominator_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.denominator_grad)(x)
    }
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }
}
