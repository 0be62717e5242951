//! Euclidean projections onto the feasible sets used by the subproblems.
//!
//! The two-constraint sets are handled through their KKT conditions: the
//! projection of `y` is the single-constraint projection of `y + βa` for
//! the halfspace multiplier β ≥ 0, and `β ↦ aᵀP(y + βa)` is nondecreasing
//! because projections are monotone operators. β is found by a bracketed
//! Illinois search. Whenever a root is bracketed, the returned point comes
//! from the feasible side of the bracket, so outputs satisfy the
//! constraints exactly rather than up to a tolerance.

use nalgebra::DVector;

use crate::{Error, Result};

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != lo.len() || x.len() != hi.len() {
        return Err(Error::Domain("box bounds do not match the vector length".into()));
    }
    if let Some(i) = (0..x.len()).find(|&i| !(lo[i] <= hi[i])) {
        return Err(Error::Domain(format!("box lower bound above upper bound at index {i}")));
    }
    Ok(DVector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i])))
}

/// Smallest β ≥ 0 (up to bracketing precision) with `h(β) >= 0`, for a
/// nondecreasing `h` with `h(0) < 0`.
fn monotone_root(h: impl Fn(f64) -> f64, h0: f64, initial_step: f64, h_tol: f64) -> Option<f64> {
    let mut lo = 0.0;
    let mut h_lo = h0;
    let mut hi = initial_step.max(f64::MIN_POSITIVE);
    let mut h_hi = h(hi);
    let mut doublings = 0;
    while h_hi < 0.0 {
        lo = hi;
        h_lo = h_hi;
        hi *= 2.0;
        h_hi = h(hi);
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return None;
        }
    }
    // Illinois variant of regula falsi; keeps [lo, hi] with h(lo) < 0 <= h(hi).
    let mut side = 0i8;
    for _ in 0..300 {
        if h_hi <= h_tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mut m = hi - h_hi * (hi - lo) / (h_hi - h_lo);
        if !(m > lo && m < hi) {
            m = 0.5 * (lo + hi);
        }
        let h_m = h(m);
        if h_m >= 0.0 {
            hi = m;
            h_hi = h_m;
            if side == 1 {
                h_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = m;
            h_lo = h_m;
            if side == -1 {
                h_hi *= 0.5;
            }
            side = -1;
        }
    }
    Some(hi)
}

/// Projection onto `{x : Σ d_i x_i² <= radius_sq}` with `d >= 0`.
///
/// Solves `Σ d_i y_i² / (1 + α d_i)² = radius_sq` for the multiplier α by
/// safeguarded Newton on `1/√φ(α)`, which is close to linear in α.
pub fn project_ellipsoid(y: &DVector<f64>, diag: &DVector<f64>, radius_sq: f64) -> Result<DVector<f64>> {
    if diag.iter().any(|d| !(*d >= 0.0)) || !(radius_sq >= 0.0) {
        return Err(Error::Domain("ellipsoid needs nonnegative weights and radius".into()));
    }
    let phi = |alpha: f64| -> f64 {
        y.iter()
            .zip(diag.iter())
            .map(|(y, d)| d * (y / (1.0 + alpha * d)).powi(2))
            .sum()
    };
    let phi0 = phi(0.0);
    if phi0 <= radius_sq {
        return Ok(y.clone());
    }
    if radius_sq == 0.0 {
        // only the directions with zero weight survive
        return Ok(y.zip_map(diag, |y, d| if d > 0.0 { 0.0 } else { y }));
    }
    // φ(α) <= Σ y_i²/(α² d_i) over d_i > 0
    let spread: f64 = y
        .iter()
        .zip(diag.iter())
        .filter(|(_, d)| **d > 0.0)
        .map(|(y, d)| y * y / d)
        .sum();
    let mut lo = 0.0f64;
    let mut hi = (spread / radius_sq).sqrt();
    let target = 1.0 / radius_sq.sqrt();
    let mut alpha = 0.0;
    for _ in 0..200 {
        // Newton on ψ(α) = φ^{-1/2} − target
        let (f, df) = y.iter().zip(diag.iter()).fold((0.0, 0.0), |(f, df), (y, d)| {
            let s = 1.0 + alpha * d;
            let t = d * y * y / (s * s);
            (f + t, df - 2.0 * t * d / s)
        });
        if f <= radius_sq {
            hi = hi.min(alpha);
        } else {
            lo = lo.max(alpha);
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let psi = f.powf(-0.5) - target;
        let dpsi = -0.5 * f.powf(-1.5) * df;
        let mut next = alpha - psi / dpsi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - alpha).abs() <= 4.0 * f64::EPSILON * next {
            // converged in α; settle on the feasible side
            alpha = next;
            let mut nudge = 4.0 * f64::EPSILON * alpha.max(f64::MIN_POSITIVE);
            while phi(alpha) > radius_sq && alpha < hi {
                alpha = (alpha + nudge).min(hi);
                nudge *= 2.0;
            }
            return Ok(y.zip_map(diag, |y, d| y / (1.0 + alpha * d)));
        }
        alpha = next;
    }
    Ok(y.zip_map(diag, |y, d| y / (1.0 + hi * d)))
}

/// Projection onto `{xᵀ diag(d) x <= radius_sq} ∩ {aᵀx >= offset}`.
pub fn project_ellipsoid_halfspace(
    y: &DVector<f64>,
    diag: &DVector<f64>,
    radius_sq: f64,
    normal: &DVector<f64>,
    offset: f64,
) -> Result<DVector<f64>> {
    let base = project_ellipsoid(y, diag, radius_sq)?;
    let h = |x: &DVector<f64>| normal.dot(x) - offset;
    let h0 = h(&base);
    if h0 >= 0.0 {
        return Ok(base);
    }
    // max of aᵀx over the ellipsoid is √(radius_sq · Σ a_i²/d_i)
    let unbounded = diag.iter().zip(normal.iter()).any(|(d, a)| *d == 0.0 && *a != 0.0);
    if !unbounded {
        let reach = (radius_sq * normal.iter().zip(diag.iter()).filter(|(_, d)| **d > 0.0).map(|(a, d)| a * a / d).sum::<f64>()).sqrt();
        if reach < offset * (1.0 - 1e-12) {
            return Err(Error::Infeasible(format!(
                "halfspace offset {offset} beyond the ellipsoid's reach {reach}"
            )));
        }
        if reach <= offset * (1.0 + 1e-12) {
            // the intersection is (numerically) the single tangent point
            let w = normal.zip_map(diag, |a, d| if d > 0.0 { a / d } else { 0.0 });
            let scale = (radius_sq / normal.dot(&w)).sqrt();
            return Ok(w * scale);
        }
    }
    let a_sq = normal.norm_squared();
    if a_sq == 0.0 {
        return Err(Error::Infeasible("zero halfspace normal with positive offset".into()));
    }
    let shifted = |beta: f64| project_ellipsoid(&(y + normal * beta), diag, radius_sq);
    let scale = y.norm().max(1.0) / a_sq.sqrt();
    let h_tol = 1e-15 * (offset.abs() + a_sq.sqrt() * y.norm());
    let beta = monotone_root(
        |b| shifted(b).map(|x| h(&x)).unwrap_or(f64::NAN),
        h0,
        (-h0 / a_sq).max(1e-3 * scale),
        h_tol,
    )
    .ok_or_else(|| Error::Infeasible("could not reach the halfspace inside the ellipsoid".into()))?;
    shifted(beta)
}

/// Projection onto `[lo, hi] ∩ {lower <= aᵀx <= upper}`.
pub fn project_box_slab(
    y: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    normal: &DVector<f64>,
    lower: f64,
    upper: f64,
) -> Result<DVector<f64>> {
    if !(lower <= upper) {
        return Err(Error::Domain("slab lower bound above upper bound".into()));
    }
    let clamped = |nu: f64| -> DVector<f64> { DVector::from_fn(y.len(), |i, _| (y[i] + nu * normal[i]).clamp(lo[i], hi[i])) };
    let base = project_box(y, lo, hi)?;
    let s0 = normal.dot(&base);
    if s0 >= lower && s0 <= upper {
        return Ok(base);
    }
    let a_norm = normal.norm();
    if a_norm == 0.0 {
        return Err(Error::Infeasible(format!("slab [{lower}, {upper}] excludes the constant 0")));
    }
    // extreme values of aᵀx over the box
    let reach_up: f64 = (0..y.len()).map(|i| normal[i] * if normal[i] > 0.0 { hi[i] } else { lo[i] }).sum();
    let reach_down: f64 = (0..y.len()).map(|i| normal[i] * if normal[i] > 0.0 { lo[i] } else { hi[i] }).sum();
    let width = (0..y.len()).map(|i| (hi[i] - lo[i]).abs()).fold(0.0, f64::max);
    let step = (width / a_norm).max(f64::MIN_POSITIVE);
    let h_tol = |bound: f64| 1e-15 * (bound.abs() + a_norm * width);
    if s0 < lower {
        if reach_up < lower {
            return Err(Error::Infeasible(format!("box cannot reach aᵀx >= {lower}")));
        }
        let nu = monotone_root(|nu| normal.dot(&clamped(nu)) - lower, s0 - lower, step * 1e-3, h_tol(lower))
            .ok_or_else(|| Error::Infeasible("slab search failed".into()))?;
        Ok(clamped(nu))
    } else {
        if reach_down > upper {
            return Err(Error::Infeasible(format!("box cannot reach aᵀx <= {upper}")));
        }
        let nu = monotone_root(|nu| upper - normal.dot(&clamped(-nu)), upper - s0, step * 1e-3, h_tol(upper))
            .ok_or_else(|| Error::Infeasible("slab search failed".into()))?;
        Ok(clamped(-nu))
    }
}
