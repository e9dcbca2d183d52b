//! First-order lower bounds of the two non-convex terms of the transformed
//! problem: the ratio `w^2 / z` and the quadratic-over-linear SINR terms
//! `|h^H p|^2 / beta`. Both functions are jointly convex, so their tangent
//! planes are global under-estimators that are tight at the expansion point.

use num_complex::Complex64;

use crate::scenario::inner;

/// Affine minorant `a w + b z` of `w^2 / z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBound {
    pub omega_coeff: f64,
    pub z_coeff: f64,
}

impl RatioBound {
    pub fn eval(&self, omega: f64, z: f64) -> f64 {
        self.omega_coeff * omega + self.z_coeff * z
    }
}

/// Linearizes `w^2 / z` at `(omega_bar, z_bar)`:
/// `(2 w̄ / z̄) w - (w̄ / z̄)^2 z`.
pub fn linearize_ratio(omega_bar: f64, z_bar: f64) -> RatioBound {
    debug_assert!(z_bar > 0.0);
    let r = omega_bar / z_bar;
    RatioBound {
        omega_coeff: 2.0 * r,
        z_coeff: -r * r,
    }
}

/// Affine minorant `Re(sum_i w_i p_i) + c beta` of `|h^H p|^2 / beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadOverLinBound {
    weights: Vec<Complex64>,
    pub beta_coeff: f64,
}

impl QuadOverLinBound {
    pub fn eval(&self, p: &[Complex64], beta: f64) -> f64 {
        let lin: f64 = self.weights.iter().zip(p).map(|(w, x)| (w * x).re).sum();
        lin + self.beta_coeff * beta
    }

    /// Coefficients of the real and imaginary part of each precoder entry.
    pub fn real_coeffs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights.iter().map(|w| (w.re, -w.im))
    }
}

/// Linearizes `|h^H p|^2 / beta` at `(p_bar, beta_bar)`:
/// `2 Re(p̄^H h h^H p) / β̄ - (|h^H p̄| / β̄)^2 beta`.
pub fn linearize_qol(p_bar: &[Complex64], beta_bar: f64, h: &[Complex64]) -> QuadOverLinBound {
    debug_assert!(beta_bar > 0.0);
    let a = inner(h, p_bar);
    // 2 Re(conj(a) h^H p) / beta_bar, with h^H p = sum conj(h_i) p_i
    let scale = a.conj() * (2.0 / beta_bar);
    let weights = h.iter().map(|hi| scale * hi.conj()).collect();
    QuadOverLinBound {
        weights,
        beta_coeff: -(a.norm() / beta_bar).powi(2),
    }
}
