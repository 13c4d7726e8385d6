use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// One regression sample `(φ̂, y, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSample {
    pub phi: Vec<f64>,
    pub y: f64,
    pub w: f64,
}

/// Weighted ridge regression
/// `θ̄ = argmin λ‖θ‖² + Σ_τ (φ̂_τᵀθ - y_τ)² / w_τ²`,
/// kept in closed form `Λ = λI + Σ φ̂φ̂ᵀ/w²`, `θ̄ = Λ⁻¹ Σ φ̂y/w²`.
#[derive(Debug, Clone)]
pub struct RidgeState {
    lambda: f64,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    theta: DVector<f64>,
    history: Vec<RidgeSample>,
}

impl RidgeState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("ridge dimension must be positive".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let gram = DMatrix::identity(dim, dim) * lambda;
        let chol = Cholesky::new(gram.clone()).expect("λI is positive definite");
        Ok(Self {
            lambda,
            gram,
            moment: DVector::zeros(dim),
            chol,
            theta: DVector::zeros(dim),
            history: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn update(&mut self, phi: &[f64], y: f64, w: f64) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "feature has {} entries, regression expects {}",
                phi.len(),
                self.dim()
            )));
        }
        if !(w > 0.0 && w.is_finite()) || !y.is_finite() || phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "ridge update needs finite inputs and positive weight (w = {w}, y = {y})"
            )));
        }
        let x = DVector::from_column_slice(phi);
        let scale = 1.0 / (w * w);
        self.gram.ger(scale, &x, &x, 1.0);
        self.moment.axpy(y * scale, &x, 1.0);
        self.chol = Cholesky::new(self.gram.clone())
            .ok_or_else(|| Error::InvalidModel("Gram matrix lost positive definiteness".into()))?;
        self.theta = self.chol.solve(&self.moment);
        self.history.push(RidgeSample {
            phi: phi.to_vec(),
            y,
            w,
        });
        Ok(())
    }

    /// Current estimate `θ̄`.
    pub fn theta(&self) -> &[f64] {
        self.theta.as_slice()
    }

    /// `Λ`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn history(&self) -> &[RidgeSample] {
        &self.history
    }

    /// `‖x‖_{Λ⁻¹} = √(xᵀz)` with `Λz = x`.
    pub fn inverse_norm(&self, x: &[f64]) -> f64 {
        inverse_norm(&self.chol, x)
    }

    /// `‖x‖_Λ`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        (v.dot(&(&self.gram * &v))).max(0.0).sqrt()
    }

    pub fn determinant(&self) -> f64 {
        self.chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|l| l * l)
            .product()
    }

    pub fn ellipsoid(&self, beta: f64) -> ConfidenceEllipsoid {
        ConfidenceEllipsoid {
            center: self.theta.clone(),
            matrix: self.gram.clone(),
            chol: self.chol.clone(),
            beta,
        }
    }
}

fn inverse_norm(chol: &Cholesky<f64, Dyn>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    let z = chol.solve(&v);
    v.dot(&z).max(0.0).sqrt()
}

/// `{θ : ‖θ - θ̄‖_Λ ≤ β}`.
#[derive(Debug, Clone)]
pub struct ConfidenceEllipsoid {
    center: DVector<f64>,
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    beta: f64,
}

impl ConfidenceEllipsoid {
    pub fn center(&self) -> &[f64] {
        self.center.as_slice()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `‖θ - θ̄‖_Λ`.
    pub fn distance(&self, theta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(theta) - &self.center;
        diff.dot(&(&self.matrix * &diff)).max(0.0).sqrt()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.distance(theta) <= self.beta
    }

    /// `‖φ‖_{Λ⁻¹}`.
    pub fn inverse_norm(&self, phi: &[f64]) -> f64 {
        inverse_norm(&self.chol, phi)
    }

    /// `max_{θ ∈ C} φᵀθ = φᵀθ̄ + β‖φ‖_{Λ⁻¹}`.
    pub fn upper_value(&self, phi: &[f64]) -> f64 {
        let mean: f64 = phi.iter().zip(self.center.iter()).map(|(a, b)| a * b).sum();
        mean + self.beta * self.inverse_norm(phi)
    }
}

/// `β_k = √λ + 2√(d·k)`.
pub fn confidence_radius(lambda: f64, dim: usize, k: u64) -> f64 {
    lambda.sqrt() + 2.0 * ((dim as u64 * k) as f64).sqrt()
}
