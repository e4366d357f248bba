//! Half-wavelength uniform linear arrays and target response matrices.
//!
//! Steering phases are referenced to the array center, which makes the
//! steering vector orthogonal to its angular derivative.

use crate::numerics::{outer, CMatrix, CVector};
use crate::random::complex_gaussian_matrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("array needs at least 2 elements, got {0}")]
    TooFewElements(usize),
    #[error("angle {0} rad is outside the open interval (-pi/2, pi/2)")]
    AngleOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_tx: usize,
    pub n_rx: usize,
}

impl ArrayGeometry {
    pub fn new(n_tx: usize, n_rx: usize) -> Result<Self, ArrayError> {
        for n in [n_tx, n_rx] {
            if n < 2 {
                return Err(ArrayError::TooFewElements(n));
            }
        }
        Ok(Self { n_tx, n_rx })
    }

    pub fn tx_steering(&self, theta: f64) -> CVector {
        steering(theta, self.n_tx)
    }

    pub fn rx_steering(&self, theta: f64) -> CVector {
        steering(theta, self.n_rx)
    }

    pub fn tx_steering_derivative(&self, theta: f64) -> CVector {
        steering_derivative(theta, self.n_tx)
    }

    pub fn rx_steering_derivative(&self, theta: f64) -> CVector {
        steering_derivative(theta, self.n_rx)
    }
}

fn centered_index(m: usize, n: usize) -> f64 {
    m as f64 - (n as f64 - 1.0) / 2.0
}

/// `a_m = exp(jπ(m − (n−1)/2)·sinθ)`.
pub fn steering(theta: f64, n: usize) -> CVector {
    let s = theta.sin();
    CVector::from_fn(n, |m, _| {
        Complex64::from_polar(1.0, PI * centered_index(m, n) * s)
    })
}

/// Elementwise derivative of [`steering`] with respect to θ.
pub fn steering_derivative(theta: f64, n: usize) -> CVector {
    let s = theta.sin();
    let c = theta.cos();
    CVector::from_fn(n, |m, _| {
        let k = PI * centered_index(m, n);
        Complex64::new(0.0, k * c) * Complex64::from_polar(1.0, k * s)
    })
}

/// `Σ_m (m − (n−1)/2)² = n(n²−1)/12`.
pub fn centered_index_energy(n: usize) -> f64 {
    let n = n as f64;
    n * (n * n - 1.0) / 12.0
}

/// `‖ȧ(θ)‖² = π²cos²θ·n(n²−1)/12`.
pub fn steering_derivative_norm_sqr(theta: f64, n: usize) -> f64 {
    PI * PI * theta.cos().powi(2) * centered_index_energy(n)
}

pub fn validate_angle(theta: f64) -> Result<(), ArrayError> {
    if theta.is_finite() && theta.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(ArrayError::AngleOutOfRange(theta))
    }
}

/// Unresolvable point target: angle and complex reflection coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    pub theta: f64,
    pub alpha: Complex64,
}

impl PointTarget {
    pub fn new(theta: f64, alpha: Complex64) -> Result<Self, ArrayError> {
        validate_angle(theta)?;
        Ok(Self { theta, alpha })
    }

    /// `G = α·b(θ)·a(θ)ᴴ`, shape `N_r × N_t`.
    pub fn response(&self, geometry: &ArrayGeometry) -> CMatrix {
        outer(
            &geometry.rx_steering(self.theta),
            &geometry.tx_steering(self.theta),
        ) * self.alpha
    }
}

/// One scatterer of an extended target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub theta: f64,
    pub alpha: Complex64,
}

/// `G = Σ_i α_i·b(θ_i)·a(θ_i)ᴴ`.
pub fn extended_response(scatterers: &[Scatterer], geometry: &ArrayGeometry) -> CMatrix {
    let mut g = CMatrix::zeros(geometry.n_rx, geometry.n_tx);
    for s in scatterers {
        g += outer(
            &geometry.rx_steering(s.theta),
            &geometry.tx_steering(s.theta),
        ) * s.alpha;
    }
    g
}

/// Unstructured extended-target response with i.i.d. CN(0,1) entries.
pub fn random_extended_response<R: Rng + ?Sized>(geometry: &ArrayGeometry, rng: &mut R) -> CMatrix {
    complex_gaussian_matrix(geometry.n_rx, geometry.n_tx, 1.0, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner, vector_norm_sqr};
    use proptest::prelude::*;

    #[test]
    fn broadside_is_all_ones() {
        let a = steering(0.0, 4);
        for z in a.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn thirty_degrees_two_elements() {
        let a = steering(PI / 6.0, 2);
        let want = [
            Complex64::from_polar(1.0, -PI / 4.0),
            Complex64::from_polar(1.0, PI / 4.0),
        ];
        for (z, w) in a.iter().zip(want) {
            assert!((z - w).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_at_broadside() {
        let d = steering_derivative(0.0, 4);
        let want = [-1.5, -0.5, 0.5, 1.5];
        for (z, w) in d.iter().zip(want) {
            assert!((z - Complex64::new(0.0, PI * w)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(ArrayGeometry::new(1, 4), Err(ArrayError::TooFewElements(1)));
        assert!(PointTarget::new(FRAC_PI_2, Complex64::new(1.0, 0.0)).is_err());
        assert!(PointTarget::new(f64::NAN, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn point_response_shape_and_rank() {
        let g = ArrayGeometry::new(3, 5).unwrap();
        let t = PointTarget::new(0.2, Complex64::new(0.5, -0.25)).unwrap();
        let resp = t.response(&g);
        assert_eq!(resp.shape(), (5, 3));
        assert_eq!(crate::numerics::numeric_rank(&resp, 1e-10), 1);
    }

    #[test]
    fn extended_response_sums_scatterers() {
        let g = ArrayGeometry::new(4, 6).unwrap();
        let s = [
            Scatterer {
                theta: -0.3,
                alpha: Complex64::new(1.0, 0.0),
            },
            Scatterer {
                theta: 0.4,
                alpha: Complex64::new(0.0, 2.0),
            },
        ];
        let want = PointTarget {
            theta: -0.3,
            alpha: s[0].alpha,
        }
        .response(&g)
            + PointTarget {
                theta: 0.4,
                alpha: s[1].alpha,
            }
            .response(&g);
        let got = extended_response(&s, &g);
        assert!((got - want).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn steering_invariants(theta in -1.5f64..1.5, n in 2usize..40) {
            let a = steering(theta, n);
            let d = steering_derivative(theta, n);
            prop_assert!((vector_norm_sqr(&a) - n as f64).abs() <= 1e-12 * n as f64);
            prop_assert!(inner(&a, &d).norm() <= 1e-10 * (n as f64).powi(2));
            let want = steering_derivative_norm_sqr(theta, n);
            prop_assert!((vector_norm_sqr(&d) - want).abs() <= 1e-10 * want.max(1.0));
        }

        #[test]
        fn derivative_matches_finite_difference(theta in -1.4f64..1.4, n in 2usize..20) {
            let h = 1e-6;
            let fd = (steering(theta + h, n) - steering(theta - h, n)).unscale(2.0 * h);
            let d = steering_derivative(theta, n);
            prop_assert!((fd - d).norm() <= 1e-6 * (n as f64).powi(2));
        }
    }
}
