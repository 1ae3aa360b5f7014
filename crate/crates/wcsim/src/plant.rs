//! Discrete-time LTI plant: high-rate stepping, sensing with optional output
//! bias, and setpoint consistency checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};
use crate::linalg;

/// Default blow-up threshold on the infinity norm of the state.
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;

/// LTI plant (A, B, C) at a fixed step length.
#[derive(Clone, Debug)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Seconds advanced by one `step`.
    pub dt: f64,
    /// Infinity-norm threshold above which a state is flagged divergent.
    pub blowup_threshold: f64,
}

impl PlantModel {
    /// Build a model and verify dimensions, controllability, and
    /// observability (rank tests with a relative tolerance of 1e-8).
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SimError::config("plant A must be square"));
        }
        if b.nrows() != n {
            return Err(SimError::config(format!(
                "plant B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(SimError::config(format!(
                "plant C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if !(dt > 0.0) {
            return Err(SimError::config("plant dt must be positive"));
        }
        if !linalg::is_controllable(&a, &b, 1e-8) {
            return Err(SimError::config("plant (A, B) is not controllable"));
        }
        if !linalg::is_observable(&a, &c, 1e-8) {
            return Err(SimError::config("plant (A, C) is not observable"));
        }
        Ok(PlantModel { a, b, c, dt, blowup_threshold: DIVERGENCE_THRESHOLD })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Advance one step: x' = A x + B u.
    pub fn step(&self, state: &PlantState, u: &DVector<f64>) -> Result<PlantState> {
        if u.len() != self.input_dim() {
            return Err(SimError::config(format!(
                "input has length {}, expected {}",
                u.len(),
                self.input_dim()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(SimError::config("input contains non-finite entries"));
        }
        let x = &self.a * &state.x + &self.b * u;
        let diverged = !x.iter().all(|v| v.is_finite()) || x.amax() > self.blowup_threshold;
        Ok(PlantState { x, t: state.t + 1, diverged: state.diverged || diverged })
    }

    /// Sensor output y = C x, plus the bias while the disturbance is active.
    pub fn measure(&self, state: &PlantState, d: &DisturbanceProfile, t_sec: f64) -> DVector<f64> {
        let mut y = &self.c * &state.x;
        if d.is_active(t_sec) {
            y += d.bias_vector(self.output_dim());
        }
        y
    }

    /// || (A - I) x_bar + B u_bar ||_2 - zero iff the setpoint is an exact
    /// fixed point of the dynamics.
    pub fn setpoint_residual(&self, sp: &Setpoint) -> f64 {
        let n = self.state_dim();
        ((&self.a - DMatrix::<f64>::identity(n, n)) * &sp.x_bar + &self.b * &sp.u_bar).norm()
    }

    /// Derive the unique state fixed point for a given constant input:
    /// x_bar = (I - A)^(-1) B u_bar. Fails if A has a unit eigenvalue.
    pub fn derive_setpoint(&self, u_bar: DVector<f64>) -> Result<Setpoint> {
        if u_bar.len() != self.input_dim() {
            return Err(SimError::config("u_bar length does not match input dimension"));
        }
        let n = self.state_dim();
        let m = DMatrix::<f64>::identity(n, n) - &self.a;
        let x_bar = m
            .lu()
            .solve(&(&self.b * &u_bar))
            .ok_or_else(|| SimError::numerical("derive_setpoint: I - A is singular"))?;
        Ok(Setpoint { x_bar, u_bar })
    }
}

/// Plant state with a sticky divergence flag.
#[derive(Clone, Debug)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub t: u64,
    pub diverged: bool,
}

impl PlantState {
    pub fn new(x: DVector<f64>) -> Self {
        PlantState { x, t: 0, diverged: false }
    }
}

/// Additive output bias on a time interval. A scalar bias is broadcast to all
/// outputs.
#[derive(Clone, Debug)]
pub struct DisturbanceProfile {
    pub bias: Vec<f64>,
    pub start_s: f64,
    pub end_s: f64,
}

impl DisturbanceProfile {
    pub fn new(bias: Vec<f64>, start_s: f64, end_s: f64) -> Result<Self> {
        if start_s > end_s {
            return Err(SimError::config("disturbance interval has start > end"));
        }
        Ok(DisturbanceProfile { bias, start_s, end_s })
    }

    /// A profile that is never active.
    pub fn none() -> Self {
        DisturbanceProfile { bias: vec![0.0], start_s: 0.0, end_s: -1.0 }
    }

    pub fn is_active(&self, t_sec: f64) -> bool {
        t_sec >= self.start_s && t_sec <= self.end_s
    }

    fn bias_vector(&self, p: usize) -> DVector<f64> {
        if self.bias.len() == 1 {
            DVector::from_element(p, self.bias[0])
        } else {
            DVector::from_vec(self.bias.clone())
        }
    }
}

/// Operating point: constant input u_bar holding the state at x_bar.
#[derive(Clone, Debug)]
pub struct Setpoint {
    pub x_bar: DVector<f64>,
    pub u_bar: DVector<f64>,
}
