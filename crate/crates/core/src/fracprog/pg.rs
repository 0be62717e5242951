use nalgebra::DVector;

use super::SolverOptions;
use crate::Result;

#[derive(Debug, Clone)]
pub struct PgOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    /// ‖x − P(x + t∇f(x))‖ / t at the returned point.
    pub residual: f64,
    pub converged: bool,
}

/// Projected-gradient ascent with Barzilai–Borwein steps and Armijo
/// backtracking along the projection arc.
///
/// Only steps that pass the Armijo test are taken, so the objective never
/// decreases. Stops once the projected-gradient residual, measured at
/// `t = min(step, 1)`, drops to `opts.inner_tol`; hitting `max_inner` or a step length
/// below machine resolution returns the current iterate with
/// `converged = false`.
pub fn pg_ascent<F, G, P>(objective: F, gradient: G, project: P, x0: DVector<f64>, opts: &SolverOptions) -> Result<PgOutcome>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
    P: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0;
    let mut fx = objective(&x);
    let mut g = gradient(&x);
    let g_norm = g.norm();
    if g_norm == 0.0 {
        return Ok(PgOutcome {
            x,
            value: fx,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let mut step = x.norm().max(1.0) / g_norm * 1e-2;
    let mut residual = f64::INFINITY;

    for iteration in 0..opts.max_inner {
        let mut t = step;
        let mut first = true;
        loop {
            let trial = project(&(&x + &g * t))?;
            let d = &trial - &x;
            let d_norm = d.norm();
            if first {
                // the residual shrinks as t grows, so never measure it past t = 1
                residual = if t <= 1.0 {
                    d_norm / t
                } else {
                    projected_gradient_residual(&x, &g, 1.0, &project)?
                };
                if residual <= opts.inner_tol {
                    return Ok(PgOutcome {
                        x,
                        value: fx,
                        iterations: iteration,
                        residual,
                        converged: true,
                    });
                }
                first = false;
            }
            if d_norm <= f64::EPSILON * x.norm().max(f64::MIN_POSITIVE) {
                // no representable progress left along this arc
                return Ok(PgOutcome {
                    x,
                    value: fx,
                    iterations: iteration,
                    residual,
                    converged: false,
                });
            }
            let f_trial = objective(&trial);
            if f_trial >= fx + opts.armijo_c * g.dot(&d) {
                let g_new = gradient(&trial);
                let s = d;
                let y = &g_new - &g;
                let sy = s.dot(&y);
                // ascent on a concave function: sᵀy <= 0
                step = if sy < 0.0 { s.norm_squared() / -sy } else { t * 4.0 };
                if !step.is_finite() || step <= 0.0 {
                    step = t;
                }
                x = trial;
                fx = f_trial;
                g = g_new;
                break;
            }
            t *= opts.backtrack;
        }
    }
    Ok(PgOutcome {
        x,
        value: fx,
        iterations: opts.max_inner,
        residual,
        converged: false,
    })
}

/// ‖x − P(x + t∇f(x))‖ / t, the first-order stationarity measure used as
/// the stopping rule.
pub fn projected_gradient_residual<P>(x: &DVector<f64>, grad: &DVector<f64>, t: f64, project: P) -> Result<f64>
where
    P: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let moved = project(&(x + grad * t))?;
    Ok((moved - x).norm() / t)
}
