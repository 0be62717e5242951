use nalgebra::DVector;

use super::{maximize_concave_quadratic, pg_ascent, RatioProblem, SolverOptions};
use crate::{Error, Result};

/// Result of one Dinkelbach run. `converged = false` is the
/// convergence-failure report: `x` is still the best iterate found.
#[derive(Debug, Clone)]
pub struct DinkelbachOutcome {
    pub x: DVector<f64>,
    /// N(x) / D(x)
    pub value: f64,
    /// λ after every outer iteration, starting with the ratio at `x0`.
    pub lambdas: Vec<f64>,
    /// |N(x) − λ_prev D(x)| / D(x) at the last iteration.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inner solves that stopped on the iteration cap or a stalled line search.
    pub inner_unconverged: usize,
}

/// Exact maximizer of the parametric objective, kept only if it does not
/// lose against `x`.
fn quadratic_start<P: RatioProblem + ?Sized>(
    prob: &P,
    lambda: f64,
    x: &DVector<f64>,
    objective: &impl Fn(&DVector<f64>) -> f64,
) -> Result<Option<DVector<f64>>> {
    let Some((linear, curvature)) = prob.parametric_quadratic(lambda) else {
        return Ok(None);
    };
    let set = prob.feasible_set();
    let Some(candidate) = maximize_concave_quadratic(&linear, &curvature, set)? else {
        return Ok(None);
    };
    let candidate = set.project(&candidate)?;
    Ok((objective(&candidate) >= objective(x)).then_some(candidate))
}

/// Maximizes N(x)/D(x) over the problem's feasible set.
///
/// Each outer step maximizes the parametric objective N − λD starting from
/// the current iterate, or from the exact maximizer when the problem
/// exposes its parametric objective as a quadratic and that point is at
/// least as good. Since the inner solver only accepts ascent steps,
/// N(x⁺) − λD(x⁺) >= 0 and the λ sequence is nondecreasing.
pub fn dinkelbach_maximize<P: RatioProblem + ?Sized>(prob: &P, x0: DVector<f64>, opts: &SolverOptions) -> Result<DinkelbachOutcome> {
    let denom = |x: &DVector<f64>| -> Result<f64> {
        let d = prob.denominator(x);
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Numeric(format!("ratio denominator {d} is not positive")))
        }
    };
    let set = prob.feasible_set();
    let mut x = x0;
    let mut lambda = prob.numerator(&x) / denom(&x)?;
    let mut lambdas = vec![lambda];
    let mut residual = f64::INFINITY;
    let mut inner_unconverged = 0;

    for iteration in 1..=opts.max_outer {
        let lam = lambda;
        let objective = |x: &DVector<f64>| prob.numerator(x) - lam * prob.denominator(x);
        let start = quadratic_start(prob, lam, &x, &objective)?.unwrap_or_else(|| x.clone());
        let pg = pg_ascent(
            objective,
            |x| prob.numerator_grad(x) - prob.denominator_grad(x) * lam,
            |x| set.project(x),
            start,
            opts,
        )?;
        if !pg.converged {
            inner_unconverged += 1;
        }
        let d = denom(&pg.x)?;
        let n = prob.numerator(&pg.x);
        residual = ((n - lam * d) / d).abs();
        let next = n / d;
        // a rounding-level loss keeps the previous iterate
        if next >= lambda {
            x = pg.x;
            lambda = next;
        }
        lambdas.push(lambda);
        if residual < opts.dinkelbach_tol {
            return Ok(DinkelbachOutcome {
                x,
                value: lambda,
                lambdas,
                residual,
                iterations: iteration,
                converged: true,
                inner_unconverged,
            });
        }
    }
    Ok(DinkelbachOutcome {
        x,
        value: lambda,
        lambdas,
        residual,
        iterations: opts.max_outer,
        converged: false,
        inner_unconverged,
    })
}
