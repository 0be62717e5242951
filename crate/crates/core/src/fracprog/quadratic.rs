use nalgebra::{DMatrix, DVector};

use super::FeasibleSet;
use crate::Result;

const MAX_ROOT_ITERS: usize = 200;

/// Maximizer of `linearᵀx − xᵀ curvature x` over an ellipsoid set,
/// optionally cut by a halfspace. `curvature` must be symmetric positive
/// semidefinite.
///
/// In the coordinates `y = D^{1/2} x` the ellipsoid is a ball, and after
/// one eigendecomposition of the scaled curvature every KKT point is an
/// explicit function of the two multipliers. The ball multiplier is found
/// with Newton on the secular equation `1/‖y(μ)‖ = 1/√r`, the halfspace
/// multiplier by a bracketed search on the (monotone) halfspace slack.
///
/// Returns `None` for other set kinds, degenerate ellipsoids or when the
/// multiplier search cannot bracket a root.
pub fn maximize_concave_quadratic(linear: &DVector<f64>, curvature: &DMatrix<f64>, set: &FeasibleSet) -> Result<Option<DVector<f64>>> {
    let FeasibleSet::EllipsoidHalfspace { diag, radius_sq, halfspace } = set else {
        return Ok(None);
    };
    let n = linear.len();
    if diag.len() != n || curvature.shape() != (n, n) || diag.iter().any(|d| !(*d > 0.0)) || !(*radius_sq > 0.0) {
        return Ok(None);
    }
    let s = diag.map(|d| 1.0 / d.sqrt());
    let scaled = DMatrix::from_fn(n, n, |i, j| 0.5 * s[i] * s[j] * (curvature[(i, j)] + curvature[(j, i)]));
    let eig = scaled.symmetric_eigen();
    let lambda = eig.eigenvalues.map(|l| l.max(0.0));
    let v = eig.eigenvectors;
    let a = v.tr_mul(&linear.component_mul(&s));

    let ball = Ball { lambda: &lambda, radius_sq: *radius_sq };
    let to_x = |z: &DVector<f64>| (&v * z).component_mul(&s);

    let Some(h) = halfspace else {
        return Ok(ball.solve(&a).map(|z| to_x(&z)));
    };
    let b = v.tr_mul(&h.normal.component_mul(&s));
    let slack = |nu: f64| -> Option<(f64, DVector<f64>)> {
        let z = ball.solve(&(&a + &b * nu))?;
        Some((b.dot(&z) - h.offset, z))
    };

    let Some((g0, z0)) = slack(0.0) else { return Ok(None) };
    if g0 >= 0.0 {
        return Ok(Some(to_x(&z0)));
    }

    // bracket the root of the nondecreasing slack
    let mut lo = (0.0, g0);
    let mut lo_z = z0;
    let b_norm = b.norm().max(f64::MIN_POSITIVE);
    let lambda_max = lambda.max();
    let mut nu = (a.norm() / b_norm).max(2.0 * lambda_max * h.offset.abs() / (b_norm * b_norm));
    if !(nu > 0.0 && nu.is_finite()) {
        nu = 1.0;
    }
    let mut hi = None;
    for _ in 0..MAX_ROOT_ITERS {
        let Some((g, z)) = slack(nu) else { return Ok(None) };
        if g >= 0.0 {
            hi = Some((nu, g, z));
            break;
        }
        lo = (nu, g);
        lo_z = z;
        nu *= 4.0;
    }
    let Some((mut hi_nu, mut hi_g, mut hi_z)) = hi else { return Ok(None) };

    // Illinois regula falsi on (ν, weighted slack)
    let (mut lo_w, mut hi_w) = (lo.1, hi_g);
    let mut side = 0i8;
    for _ in 0..MAX_ROOT_ITERS {
        if hi_nu - lo.0 <= 1e-14 * hi_nu || hi_g <= 1e-14 * h.offset.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mut mid = (lo.0 * hi_w - hi_nu * lo_w) / (hi_w - lo_w);
        if !(mid > lo.0 && mid < hi_nu) {
            mid = 0.5 * (lo.0 + hi_nu);
        }
        let Some((g, z)) = slack(mid) else { return Ok(None) };
        if g >= 0.0 {
            (hi_nu, hi_g, hi_z, hi_w) = (mid, g, z, g);
            if side == 1 {
                lo_w *= 0.5;
            }
            side = 1;
        } else {
            lo = (mid, g);
            lo_z = z;
            lo_w = g;
            if side == -1 {
                hi_w *= 0.5;
            }
            side = -1;
        }
    }
    // With a flat curvature direction the slack can jump at the root; the
    // maximizers at the jump form a segment between the two bracket ends, and
    // the point on it with an active halfspace is the answer.
    let theta = (-lo.1 / (hi_g - lo.1)).clamp(0.0, 1.0);
    let z = &lo_z + (&hi_z - &lo_z) * theta;
    Ok(Some(to_x(&z)))
}

/// `max cᵀz − zᵀ diag(λ) z` subject to `‖z‖² ≤ r`.
struct Ball<'a> {
    lambda: &'a DVector<f64>,
    radius_sq: f64,
}

impl Ball<'_> {
    fn point(&self, c: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
        let mut z = DVector::zeros(c.len());
        for i in 0..c.len() {
            let d = 2.0 * (self.lambda[i] + mu);
            if d > 0.0 {
                z[i] = c[i] / d;
            } else if c[i] != 0.0 {
                return None;
            }
        }
        Some(z)
    }

    fn solve(&self, c: &DVector<f64>) -> Option<DVector<f64>> {
        if let Some(z) = self.point(c, 0.0) {
            if z.norm_squared() <= self.radius_sq {
                return Some(z);
            }
        }
        let root_r = self.radius_sq.sqrt();
        // every μ below this bound leaves some coordinate outside the ball
        let mut mu = (0..c.len())
            .map(|i| c[i].abs() / (2.0 * root_r) - self.lambda[i])
            .fold(0.0, f64::max);
        for _ in 0..MAX_ROOT_ITERS {
            let (mut psi, mut dpsi) = (0.0, 0.0);
            for i in 0..c.len() {
                let d = self.lambda[i] + mu;
                if d > 0.0 {
                    let t = c[i] * c[i] / (4.0 * d * d);
                    psi += t;
                    dpsi -= 2.0 * t / d;
                }
            }
            if psi <= self.radius_sq {
                break;
            }
            // Newton on 1/√ψ − 1/√r, which is concave in μ: steps stay on
            // the infeasible side and increase monotonically
            let phi = 1.0 / psi.sqrt() - 1.0 / root_r;
            let dphi = -0.5 * dpsi / (psi * psi.sqrt());
            let step = -phi / dphi;
            if !(step > 0.0) || !step.is_finite() {
                break;
            }
            if step <= 1e-15 * mu.max(f64::MIN_POSITIVE) {
                mu += 4.0 * f64::EPSILON * mu.max(f64::MIN_POSITIVE);
            } else {
                mu += step;
            }
        }
        let mut z = self.point(c, mu)?;
        let norm_sq = z.norm_squared();
        if norm_sq > self.radius_sq {
            z *= (self.radius_sq / norm_sq).sqrt();
        }
        Some(z)
    }
}
