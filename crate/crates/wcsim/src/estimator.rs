//! Kalman filter that tolerates missing measurements.
//!
//! Every control period runs the prediction; the measurement update runs only
//! when the sensing packet actually arrived. The covariance update uses the
//! Joseph form and is re-symmetrized, so the covariance stays symmetric
//! positive semidefinite over arbitrary drop/deliver sequences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};
use crate::linalg::symmetrize;
use crate::plant::PlantModel;

#[derive(Clone, Debug)]
pub struct EstimatorState {
    /// State estimate.
    pub x_hat: DVector<f64>,
    /// Estimate error covariance.
    pub sigma: DMatrix<f64>,
    /// Assumed process-noise covariance.
    pub w: DMatrix<f64>,
    /// Assumed measurement-noise covariance.
    pub v: DMatrix<f64>,
}

impl EstimatorState {
    pub fn new(x_hat: DVector<f64>, sigma: DMatrix<f64>, w: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let n = x_hat.len();
        if sigma.nrows() != n || sigma.ncols() != n || w.nrows() != n || w.ncols() != n {
            return Err(SimError::config("estimator covariance dimensions do not match the state"));
        }
        if v.nrows() != v.ncols() {
            return Err(SimError::config("measurement covariance must be square"));
        }
        Ok(EstimatorState { x_hat, sigma, w, v })
    }

    /// One filter step: always predict with the supplied input; update only
    /// when a measurement was delivered.
    pub fn advance(
        &self,
        model: &PlantModel,
        u_applied: &DVector<f64>,
        y_delivered: Option<&DVector<f64>>,
    ) -> Result<EstimatorState> {
        let x_pred = &model.a * &self.x_hat + &model.b * u_applied;
        let sigma_pred = symmetrize(&(&model.a * &self.sigma * model.a.transpose() + &self.w));

        let (x_hat, sigma) = match y_delivered {
            None => (x_pred, sigma_pred),
            Some(y) => self.joseph_update(model, &x_pred, &sigma_pred, y)?,
        };
        Ok(EstimatorState { x_hat, sigma, w: self.w.clone(), v: self.v.clone() })
    }

    /// Measurement-only update of the current estimate, no time step. Used
    /// when a measurement of the state the estimate already refers to
    /// arrives, e.g. the very first sample.
    pub fn correct(&self, model: &PlantModel, y: &DVector<f64>) -> Result<EstimatorState> {
        let (x_hat, sigma) = self.joseph_update(model, &self.x_hat, &self.sigma, y)?;
        Ok(EstimatorState { x_hat, sigma, w: self.w.clone(), v: self.v.clone() })
    }

    fn joseph_update(
        &self,
        model: &PlantModel,
        x_pred: &DVector<f64>,
        sigma_pred: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let c = &model.c;
        let innovation_cov = symmetrize(&(c * sigma_pred * c.transpose() + &self.v));
        let chol = innovation_cov.clone().cholesky().ok_or_else(|| {
            SimError::numerical("estimator: innovation covariance is not positive definite")
        })?;
        // Gain K = Sigma- C' (C Sigma- C' + V)^(-1), via the Cholesky solve
        // of the transposed system.
        let k = chol.solve(&(c * sigma_pred.transpose())).transpose();
        let x_hat = x_pred + &k * (y - c * x_pred);
        let n = self.x_hat.len();
        let i_kc = DMatrix::<f64>::identity(n, n) - &k * c;
        let sigma = symmetrize(&(&i_kc * sigma_pred * i_kc.transpose() + &k * &self.v * k.transpose()));
        Ok((x_hat, sigma))
    }
}
