//! Receding-horizon controller with its stability certificate toolchain.
//!
//! All operations work in shifted coordinates (x relative to the setpoint
//! state, u relative to the setpoint input); the harness shifts on the way in
//! and unshifts on the way out. The optimal cost of the horizon problem,
//! V(x), doubles as a Lyapunov function: the certificate constants computed
//! here bound it below (alpha1), above (alpha2), and bound its per-step
//! decrease (alpha3), which is what the runtime safety threshold and the
//! adaptation dead-band are built from.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};
use crate::linalg::{lambda_max_sym, lambda_min_sym, spectral_radius, symmetrize};
use crate::qp;

/// One backward step of the finite-horizon Riccati recursion.
pub fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let btpb = r + b.transpose() * p * b;
    let chol = btpb
        .clone()
        .cholesky()
        .ok_or_else(|| SimError::numerical("riccati_step: R + B'PB is not positive definite"))?;
    let btpa = b.transpose() * p * a;
    let correction = btpa.transpose() * chol.solve(&btpa);
    Ok(symmetrize(&(a.transpose() * p * a + q - correction)))
}

/// Stationary solution of the discrete-time algebraic Riccati equation via
/// backward fixed-point iteration from P = Q.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    let mut converged = false;
    for _ in 0..100_000 {
        let next = riccati_step(a, b, q, r, &p)?;
        let rel = (&next - &p).norm() / next.norm().max(1e-300);
        p = next;
        if rel < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SimError::numerical("solve_dare: fixed-point iteration did not converge"));
    }
    let residual = (&riccati_step(a, b, q, r, &p)? - &p).norm() / p.norm().max(1e-300);
    if residual > 1e-9 {
        return Err(SimError::numerical(format!(
            "solve_dare: residual {residual:.3e} exceeds 1e-9"
        )));
    }
    Ok(p)
}

/// Stationary feedback gain K = -(R + B'PB)^(-1) B'PA.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let btpb = r + b.transpose() * p * b;
    let chol = btpb
        .clone()
        .cholesky()
        .ok_or_else(|| SimError::numerical("lqr_gain: R + B'PB is not positive definite"))?;
    let k = -chol.solve(&(b.transpose() * p * a));
    let rho = spectral_radius(&(a + b * &k));
    if rho >= 1.0 {
        return Err(SimError::numerical(format!(
            "lqr_gain: closed loop is not contractive (spectral radius {rho:.6})"
        )));
    }
    Ok(k)
}

/// Certificate constants for the optimal-cost Lyapunov function.
#[derive(Clone, Debug)]
pub struct LyapunovConstants {
    /// Smallest eigenvalue of the horizon-0 cost matrix: V(x) >= alpha1 |x|^2.
    pub alpha1: f64,
    /// Largest eigenvalue of the zero-input cost bound: V(x) <= alpha2 |x|^2
    /// (valid when the input box contains 0 and the state is unconstrained).
    pub alpha2: f64,
    /// Smallest eigenvalue of the stage weight: per-step decrease margin.
    pub alpha3: f64,
    /// Stationary Riccati solution.
    pub p: DMatrix<f64>,
    /// Stationary feedback gain.
    pub k: DMatrix<f64>,
}

/// Compute the certificate constants for a horizon-`n` problem with terminal
/// weight `s` (which must equal `beta * P` for the stationary P).
pub fn lyapunov_constants(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    n: usize,
    beta: f64,
) -> Result<LyapunovConstants> {
    let p = solve_dare(a, b, q, r)?;
    let s_expected = &p * beta;
    if (s - &s_expected).norm() / s_expected.norm().max(1e-300) > 1e-6 {
        return Err(SimError::config(
            "lyapunov_constants: terminal weight is not beta times the stationary Riccati solution",
        ));
    }
    let k = lqr_gain(a, b, r, &p)?;

    // alpha1: n backward Riccati steps from the terminal weight give the
    // horizon-0 value matrix P0 with V(x) = x'P0x for small x.
    let mut p0 = s.clone();
    for _ in 0..n {
        p0 = riccati_step(a, b, q, r, &p0)?;
    }
    let alpha1 = lambda_min_sym(&p0);

    // alpha2: cost of the zero-input trajectory bounds V from above:
    // M = sum_j (A^j)' Q A^j + (A^n)' S A^n.
    let dim = a.nrows();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut apow = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..n {
        m += apow.transpose() * q * &apow;
        apow = a * apow;
    }
    m += apow.transpose() * s * &apow;
    let alpha2 = lambda_max_sym(&m);

    let alpha3 = lambda_min_sym(q);

    if alpha1 > alpha2 {
        return Err(SimError::numerical("lyapunov_constants: lower bound exceeds upper bound"));
    }
    if alpha3 <= 0.0 {
        return Err(SimError::config("lyapunov_constants: stage weight must be positive definite"));
    }
    Ok(LyapunovConstants { alpha1, alpha2, alpha3, p, k })
}

/// V <= alpha1 * gamma certifies that the squared deviation from the setpoint
/// is at most gamma.
pub fn safety_ok(v: f64, consts: &LyapunovConstants, gamma: f64) -> bool {
    v <= consts.alpha1 * gamma
}

/// Geometric decay envelope (1 - alpha3/alpha2)^j * v0.
pub fn decay_envelope(v0: f64, j: u64, consts: &LyapunovConstants) -> f64 {
    (1.0 - consts.alpha3 / consts.alpha2).powf(j as f64) * v0
}

/// Linear-inequality region {x | rows * x <= rhs}.
#[derive(Clone, Debug)]
pub struct Polytope {
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl Polytope {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let v = &self.rows * x;
        (0..v.len()).all(|i| v[i] <= self.rhs[i] + tol)
    }
}

/// Terminal region {x | Gx x <= bx, Gu K x <= bu}: the states from which the
/// stationary feedback keeps the input admissible (and the state admissible
/// when state bounds exist).
pub fn terminal_set(
    state_rows: Option<(&DMatrix<f64>, &DVector<f64>)>,
    gu: &DMatrix<f64>,
    bu: &DVector<f64>,
    k: &DMatrix<f64>,
) -> Polytope {
    let input_rows = gu * k;
    match state_rows {
        None => Polytope { rows: input_rows, rhs: bu.clone() },
        Some((gx, bx)) => {
            let n = k.ncols();
            let total = gx.nrows() + input_rows.nrows();
            let mut rows = DMatrix::zeros(total, n);
            rows.view_mut((0, 0), (gx.nrows(), n)).copy_from(gx);
            rows.view_mut((gx.nrows(), 0), (input_rows.nrows(), n)).copy_from(&input_rows);
            let mut rhs = DVector::zeros(total);
            rhs.rows_mut(0, bx.len()).copy_from(bx);
            rhs.rows_mut(bx.len(), bu.len()).copy_from(bu);
            Polytope { rows, rhs }
        }
    }
}

/// Horizon problem parameters, in shifted coordinates.
#[derive(Clone, Debug)]
pub struct MpcConfig {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub horizon: usize,
    pub beta: f64,
    /// Input box, already shifted by the setpoint input.
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
    /// Optional state box, already shifted by the setpoint state.
    pub x_lo: Option<DVector<f64>>,
    pub x_hi: Option<DVector<f64>>,
    /// Admissible squared deviation for the safety certificate.
    pub gamma: f64,
}

/// Solution of one horizon problem.
#[derive(Clone, Debug)]
pub struct MpcSolution {
    /// Optimal input sequence (shifted coordinates), length = horizon.
    pub u_seq: Vec<DVector<f64>>,
    /// Optimal cost: the Lyapunov value at the queried state.
    pub v: f64,
    /// False when the terminal constraint had to be dropped to recover a
    /// solution.
    pub feasible: bool,
    pub kkt_residual: f64,
}

/// Prebuilt condensed horizon problem for one plant.
pub struct MpcProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub cfg: MpcConfig,
    pub s: DMatrix<f64>,
    pub consts: LyapunovConstants,
    pub terminal: Polytope,
    n_states: usize,
    n_inputs: usize,
    /// 2H where H is the condensed Hessian (solver convention).
    h2: DMatrix<f64>,
    /// Linear-term map: q_lin = 2 * w1 * x.
    w1: DMatrix<f64>,
    /// Constant-term map: V += x' psi x.
    psi: DMatrix<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
    /// Extra inequality rows on the stacked input vector (state bounds over
    /// the horizon plus the terminal region), with rhs(x) = d0 - dx * x.
    e_rows: Option<DMatrix<f64>>,
    d0: DVector<f64>,
    dx: DMatrix<f64>,
}

impl MpcProblem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, cfg: MpcConfig) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let horizon = cfg.horizon;
        if horizon == 0 {
            return Err(SimError::config("mpc horizon must be at least 1"));
        }
        if cfg.q.nrows() != n || cfg.r.nrows() != m {
            return Err(SimError::config("mpc weight dimensions do not match the plant"));
        }
        if lambda_min_sym(&cfg.q) < -1e-12 {
            return Err(SimError::config("mpc stage weight Q must be positive semidefinite"));
        }
        if lambda_min_sym(&cfg.r) <= 0.0 {
            return Err(SimError::config("mpc input weight R must be positive definite"));
        }
        if cfg.beta < 1.0 {
            return Err(SimError::config("mpc terminal scaling must be >= 1"));
        }
        if !(cfg.gamma > 0.0) {
            return Err(SimError::config("mpc gamma must be positive"));
        }
        if cfg.u_lo.iter().zip(cfg.u_hi.iter()).any(|(l, h)| !(l < h)) {
            return Err(SimError::config("mpc input box is empty"));
        }
        if cfg.u_lo.iter().any(|&l| l > 0.0) || cfg.u_hi.iter().any(|&h| h < 0.0) {
            return Err(SimError::config("mpc input box must contain the setpoint input"));
        }

        let consts = {
            let p = solve_dare(&a, &b, &cfg.q, &cfg.r)?;
            let s = &p * cfg.beta;
            lyapunov_constants(&a, &b, &cfg.q, &cfg.r, &s, horizon, cfg.beta)?
        };
        let s = &consts.p * cfg.beta;

        // Stacked prediction: x_j = A^j x + G_j z, j = 1..horizon.
        let mut apow: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
        apow.push(DMatrix::identity(n, n));
        for j in 1..=horizon {
            let next = &a * &apow[j - 1];
            apow.push(next);
        }
        let mut fmat = DMatrix::zeros(horizon * n, n);
        for j in 1..=horizon {
            fmat.view_mut(((j - 1) * n, 0), (n, n)).copy_from(&apow[j]);
        }
        let mut g = DMatrix::zeros(horizon * n, horizon * m);
        for j in 1..=horizon {
            for i in 0..j {
                let blk = &apow[j - 1 - i] * &b;
                g.view_mut(((j - 1) * n, i * m), (n, m)).copy_from(&blk);
            }
        }
        // Stage weights on x_1..x_{horizon-1}, terminal weight on x_horizon.
        let mut qbar = DMatrix::zeros(horizon * n, horizon * n);
        for j in 1..horizon {
            qbar.view_mut(((j - 1) * n, (j - 1) * n), (n, n)).copy_from(&cfg.q);
        }
        qbar.view_mut(((horizon - 1) * n, (horizon - 1) * n), (n, n)).copy_from(&s);

        let qbar_g = &qbar * &g;
        let mut h = g.transpose() * &qbar_g;
        for i in 0..horizon {
            let mut blk = h.view_mut((i * m, i * m), (m, m));
            blk += &cfg.r;
        }
        let h = symmetrize(&h);
        let w1 = g.transpose() * &qbar * &fmat;
        let psi = symmetrize(&(&cfg.q + fmat.transpose() * &qbar * &fmat));

        let mut lo = DVector::zeros(horizon * m);
        let mut hi = DVector::zeros(horizon * m);
        for i in 0..horizon {
            lo.rows_mut(i * m, m).copy_from(&cfg.u_lo);
            hi.rows_mut(i * m, m).copy_from(&cfg.u_hi);
        }

        // Input-box description as rows, for the terminal region.
        let mut gu = DMatrix::zeros(2 * m, m);
        let mut bu = DVector::zeros(2 * m);
        for i in 0..m {
            gu[(i, i)] = 1.0;
            bu[i] = cfg.u_hi[i];
            gu[(m + i, i)] = -1.0;
            bu[m + i] = -cfg.u_lo[i];
        }
        let state_rows = match (&cfg.x_lo, &cfg.x_hi) {
            (Some(xl), Some(xh)) => {
                let mut gx = DMatrix::zeros(2 * n, n);
                let mut bx = DVector::zeros(2 * n);
                for i in 0..n {
                    gx[(i, i)] = 1.0;
                    bx[i] = xh[i];
                    gx[(n + i, i)] = -1.0;
                    bx[n + i] = -xl[i];
                }
                Some((gx, bx))
            }
            (None, None) => None,
            _ => return Err(SimError::config("mpc state box must set both bounds or neither")),
        };
        let terminal = terminal_set(
            state_rows.as_ref().map(|(gx, bx)| (gx, bx)),
            &gu,
            &bu,
            &consts.k,
        );

        // Extra rows act on z: rows over intermediate states (when a state
        // box exists) plus the terminal region on x_horizon.
        let g_last = g.view(((horizon - 1) * n, 0), (n, horizon * m)).into_owned();
        let mut blocks_e: Vec<DMatrix<f64>> = Vec::new();
        let mut blocks_d0: Vec<DVector<f64>> = Vec::new();
        let mut blocks_dx: Vec<DMatrix<f64>> = Vec::new();
        if let Some((gx, bx)) = &state_rows {
            for j in 1..horizon {
                let gj = g.view(((j - 1) * n, 0), (n, horizon * m)).into_owned();
                blocks_e.push(gx * &gj);
                blocks_d0.push(bx.clone());
                blocks_dx.push(gx * &apow[j]);
            }
        }
        blocks_e.push(&terminal.rows * &g_last);
        blocks_d0.push(terminal.rhs.clone());
        blocks_dx.push(&terminal.rows * &apow[horizon]);

        let total_rows: usize = blocks_e.iter().map(|b| b.nrows()).sum();
        let mut e = DMatrix::zeros(total_rows, horizon * m);
        let mut d0 = DVector::zeros(total_rows);
        let mut dx = DMatrix::zeros(total_rows, n);
        let mut at = 0;
        for ((be, bd0), bdx) in blocks_e.iter().zip(&blocks_d0).zip(&blocks_dx) {
            e.view_mut((at, 0), (be.nrows(), horizon * m)).copy_from(be);
            d0.rows_mut(at, bd0.len()).copy_from(bd0);
            dx.view_mut((at, 0), (bdx.nrows(), n)).copy_from(bdx);
            at += be.nrows();
        }

        Ok(MpcProblem {
            a,
            b,
            cfg,
            s,
            consts,
            terminal,
            n_states: n,
            n_inputs: m,
            h2: &h * 2.0,
            w1,
            psi,
            lo,
            hi,
            e_rows: Some(e),
            d0,
            dx,
        })
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    /// Solve the horizon problem at a shifted state. Falls back to a solve
    /// without the terminal (and state) rows when the constrained problem is
    /// infeasible, flagging the solution.
    pub fn solve(&self, x: &DVector<f64>) -> Result<MpcSolution> {
        if x.len() != self.n_states {
            return Err(SimError::config("mpc solve: state dimension mismatch"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::numerical("mpc solve: non-finite state"));
        }
        let q_lin = (&self.w1 * x) * 2.0;
        let d = &self.d0 - &self.dx * x;

        let rows = self.e_rows.as_ref().map(|e| (e, &d));
        let first = qp::solve(&self.h2, &q_lin, &self.lo, &self.hi, rows)?;
        let (sol, feasible) = if first.converged && first.kkt <= 1e-6 {
            (first, true)
        } else {
            let fallback = qp::solve(&self.h2, &q_lin, &self.lo, &self.hi, None)?;
            if !fallback.converged || fallback.kkt > 1e-6 {
                return Err(SimError::numerical(format!(
                    "mpc solve: fallback did not converge (kkt {:.3e})",
                    fallback.kkt
                )));
            }
            (fallback, false)
        };

        let z = &sol.z;
        let v_quad = 0.5 * z.dot(&(&self.h2 * z)) + q_lin.dot(z) + x.dot(&(&self.psi * x));
        let v = v_quad.max(0.0);
        let m = self.n_inputs;
        let u_seq = (0..self.cfg.horizon)
            .map(|i| z.rows(i * m, m).into_owned())
            .collect();
        Ok(MpcSolution { u_seq, v, feasible, kkt_residual: sol.kkt })
    }

    pub fn safety_threshold(&self) -> f64 {
        self.consts.alpha1 * self.cfg.gamma
    }
}
