//! LTI process models, the steady-state local Kalman covariance, and the
//! remote estimation error covariance as a function of the age of
//! information (AoI).
//!
//! A sensor running a steady-state Kalman filter has local error
//! covariance `P̄`. When the remote estimator last heard from the sensor
//! `τ` slots ago, its error covariance is `f^τ(P̄)` where
//! `f(X) = A X Aᵀ + W`. The estimation MSE is the trace of that matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopping tolerance (Frobenius norm of the step) for the Riccati iteration.
pub const RICCATI_TOL: f64 = 1e-10;
/// Iteration budget for the Riccati fixed point.
pub const RICCATI_MAX_ITER: usize = 10_000;
/// Default AoI saturation level.
pub const DEFAULT_TAU_CAP: u32 = 100;

/// One sensor's process dynamics `x⁺ = A x + w`, `y = C x + v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    #[serde(with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub c: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub w: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub v: DMatrix<f64>,
    /// Steady-state local error covariance.
    #[serde(with = "matrix_rows")]
    pub p_bar: DMatrix<f64>,
}

impl ProcessModel {
    /// Builds a model and solves for its steady-state local covariance.
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, w: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        check_shapes(&a, &c, &w, &v)?;
        let p_bar = solve_steady_state_covariance(&a, &c, &w, &v)?;
        Ok(Self { a, c, w, v, p_bar })
    }

    /// Builds a model with a caller-supplied `P̄` (no Riccati solve).
    pub fn with_p_bar(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        w: DMatrix<f64>,
        v: DMatrix<f64>,
        p_bar: DMatrix<f64>,
    ) -> Result<Self> {
        check_shapes(&a, &c, &w, &v)?;
        if p_bar.shape() != a.shape() {
            return Err(Error::Shape(format!(
                "P̄ is {:?}, expected {:?}",
                p_bar.shape(),
                a.shape()
            )));
        }
        Ok(Self { a, c, w, v, p_bar })
    }

    /// Scalar model, convenient for tests and examples.
    pub fn scalar(a: f64, c: f64, w: f64, v: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, w),
            DMatrix::from_element(1, 1, v),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.c.nrows()
    }

    /// One application of `f(X) = A X Aᵀ + W`, symmetrized.
    pub fn open_loop_map(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&self.a * x * self.a.transpose() + &self.w)
    }

    /// Filtered Riccati map `Σ − ΣCᵀ(CΣCᵀ+V)⁻¹CΣ` with `Σ = f(X)`.
    pub fn riccati_map(&self, x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        riccati_step(&self.a, &self.c, &self.w, &self.v, x)
    }

    /// Frobenius residual `‖P̄ − Ricc(P̄)‖`.
    pub fn riccati_residual(&self) -> f64 {
        match self.riccati_map(&self.p_bar) {
            Some(next) => (&self.p_bar - next).norm(),
            None => f64::INFINITY,
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }
}

fn check_shapes(a: &DMatrix<f64>, c: &DMatrix<f64>, w: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<()> {
    let l = a.nrows();
    let e = c.nrows();
    if a.ncols() != l || c.ncols() != l || w.shape() != (l, l) || v.shape() != (e, e) {
        return Err(Error::Shape(format!(
            "inconsistent process matrices: A {:?}, C {:?}, W {:?}, V {:?}",
            a.shape(),
            c.shape(),
            w.shape(),
            v.shape()
        )));
    }
    Ok(())
}

pub fn symmetrize(x: DMatrix<f64>) -> DMatrix<f64> {
    let t = x.transpose();
    (x + t) * 0.5
}

fn riccati_step(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let sigma = symmetrize(a * x * a.transpose() + w);
    let innovation = c * &sigma * c.transpose() + v;
    let inv = innovation.try_inverse()?;
    let sc = &sigma * c.transpose();
    let next = symmetrize(&sigma - &sc * inv * sc.transpose());
    next.iter().all(|v| v.is_finite()).then_some(next)
}

/// Solves the stationary filtered Riccati equation by fixed-point
/// iteration from `X₀ = W`.
///
/// The caller is responsible for `(A, C)` observable and `(A, √W)`
/// controllable; this only checks that the iteration settles.
pub fn solve_steady_state_covariance(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_shapes(a, c, w, v)?;
    let mut x = w.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..RICCATI_MAX_ITER {
        let next = riccati_step(a, c, w, v, &x).ok_or(Error::NonConvergence {
            iterations: RICCATI_MAX_ITER,
            residual: f64::INFINITY,
        })?;
        residual = (&next - &x).norm();
        x = next;
        if residual <= RICCATI_TOL {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        iterations: RICCATI_MAX_ITER,
        residual,
    })
}

/// Remote error covariance `f^τ(P̄)` for AoI `τ ≥ 1`.
pub fn error_covariance_at_aoi(model: &ProcessModel, tau: u32) -> Result<DMatrix<f64>> {
    if tau < 1 {
        return Err(Error::Domain("AoI must be at least 1".into()));
    }
    let mut x = model.p_bar.clone();
    for _ in 0..tau {
        x = model.open_loop_map(&x);
    }
    Ok(x)
}

/// Estimation MSE `Tr(f^{min(τ, cap)}(P̄))`.
pub fn mse_at_aoi(model: &ProcessModel, tau: u32, tau_cap: u32) -> Result<f64> {
    if tau_cap < 1 {
        return Err(Error::Domain("AoI cap must be at least 1".into()));
    }
    Ok(error_covariance_at_aoi(model, tau.min(tau_cap))?.trace())
}

/// Precomputed `Tr(f^τ(P̄))` for `τ = 1..=cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTable {
    traces: Vec<f64>,
}

impl MseTable {
    pub fn new(model: &ProcessModel, tau_cap: u32) -> Result<Self> {
        if tau_cap < 1 {
            return Err(Error::Domain("AoI cap must be at least 1".into()));
        }
        let mut traces = Vec::with_capacity(tau_cap as usize);
        let mut x = model.p_bar.clone();
        for _ in 0..tau_cap {
            x = model.open_loop_map(&x);
            traces.push(x.trace());
        }
        Ok(Self { traces })
    }

    /// MSE at AoI `tau`, saturating at the cap. `tau` must be at least 1.
    pub fn mse(&self, tau: u32) -> f64 {
        debug_assert!(tau >= 1);
        let idx = (tau as usize).min(self.traces.len()) - 1;
        self.traces[idx]
    }

    pub fn cap(&self) -> u32 {
        self.traces.len() as u32
    }
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Serializes a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(
            nrows,
            ncols,
            rows.into_iter().flatten(),
        ))
    }
}
