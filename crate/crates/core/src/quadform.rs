//! Hermitian forms of the shape `diag(d) + Σ w_j v_j v_jᴴ`.
//!
//! Every γ-dependent quantity in the model is of this type (R, R_E,
//! H_mᴴ R_E H_m, A_mᴴ c cᴴ A_m, Ũ), so evaluation stays O(N) per term.

use nalgebra::{DMatrix, DVector};

use crate::C64;

#[derive(Debug, Clone)]
pub(crate) struct QuadForm {
    diag: DVector<f64>,
    terms: Vec<(f64, DVector<C64>)>,
}

impl QuadForm {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: DVector::zeros(n),
            terms: Vec::new(),
        }
    }

    pub fn add_diag(&mut self, weight: f64, d: &DVector<f64>) {
        if weight != 0.0 {
            self.diag.axpy(weight, d, 1.0);
        }
    }

    pub fn add_rank_one(&mut self, weight: f64, v: DVector<C64>) {
        if weight != 0.0 {
            self.terms.push((weight, v));
        }
    }

    pub fn add_form(&mut self, weight: f64, other: &QuadForm) {
        if weight == 0.0 {
            return;
        }
        self.diag.axpy(weight, &other.diag, 1.0);
        self.terms
            .extend(other.terms.iter().map(|(w, v)| (weight * w, v.clone())));
    }

    /// xᴴ M x
    pub fn eval(&self, x: &DVector<C64>) -> f64 {
        let diag: f64 = self
            .diag
            .iter()
            .zip(x.iter())
            .map(|(d, z)| d * z.norm_sqr())
            .sum();
        let low_rank: f64 = self
            .terms
            .iter()
            .map(|(w, v)| w * v.dotc(x).norm_sqr())
            .sum();
        diag + low_rank
    }

    /// M x
    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        let mut out = x.zip_map(&self.diag, |z, d| z * d);
        for (w, v) in &self.terms {
            let s = v.dotc(x) * *w;
            out.axpy(s, v, C64::new(1.0, 0.0));
        }
        out
    }

    /// Real symmetric matrix `S` with `xᴴMx = to_real(x)ᵀ S to_real(x)`.
    pub fn to_real_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::<C64>::from_diagonal(&self.diag.map(|d| C64::new(d, 0.0)));
        for (w, v) in &self.terms {
            m += v * v.adjoint() * C64::new(*w, 0.0);
        }
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = m[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }
}

/// Stacks a complex vector into `[Re; Im]`.
pub(crate) fn to_real(z: &DVector<C64>) -> DVector<f64> {
    let n = z.len();
    DVector::from_fn(2 * n, |i, _| if i < n { z[i].re } else { z[i - n].im })
}

pub(crate) fn to_complex(x: &DVector<f64>) -> DVector<C64> {
    let n = x.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_matrix() {
        let n = 4;
        let v1 = DVector::from_fn(n, |i, _| C64::new(i as f64 + 0.5, 1.0 - i as f64));
        let v2 = DVector::from_fn(n, |i, _| C64::new(0.3 * i as f64, 0.7));
        let d = DVector::from_fn(n, |i, _| 1.0 + i as f64);
        let mut q = QuadForm::zeros(n);
        q.add_diag(2.0, &d);
        q.add_rank_one(0.5, v1.clone());
        q.add_rank_one(3.0, v2.clone());
        q.add_diag(0.25, &DVector::from_element(n, 1.0));

        let dense = DMatrix::from_diagonal(&d.map(|x| C64::new(2.0 * x + 0.25, 0.0)))
            + &v1 * v1.adjoint() * C64::new(0.5, 0.0)
            + &v2 * v2.adjoint() * C64::new(3.0, 0.0);
        let x = DVector::from_fn(n, |i, _| C64::new(1.0 / (i as f64 + 1.0), -0.2 * i as f64));
        let expected = (x.adjoint() * &dense * &x)[(0, 0)].re;
        assert!((q.eval(&x) - expected).abs() < 1e-12 * expected.abs());
        let mx = &dense * &x;
        assert!((q.apply(&x) - mx).norm() < 1e-12);
    }

    #[test]
    fn real_dense_form_matches_eval() {
        let mut q = QuadForm::zeros(3);
        q.add_diag(0.5, &DVector::from_vec(vec![1.0, 2.0, 3.0]));
        q.add_rank_one(1.5, DVector::from_vec(vec![C64::new(1.0, -2.0), C64::new(0.3, 0.7), C64::new(-1.0, 0.0)]));
        let x = DVector::from_vec(vec![C64::new(0.2, 1.0), C64::new(-0.4, 0.1), C64::new(0.9, -0.6)]);
        let r = to_real(&x);
        let s = q.to_real_dense();
        assert!((s.clone() - s.transpose()).norm() < 1e-14);
        assert!((r.dot(&(&s * &r)) - q.eval(&x)).abs() < 1e-12);
    }

    #[test]
    fn real_stacking_round_trip() {
        let z = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        let x = to_real(&z);
        assert_eq!(x.as_slice(), &[1.0, -3.0, 2.0, 0.5]);
        assert_eq!(to_complex(&x), z);
    }
}
