//! Convex QP solver used by the receding-horizon controller.
//!
//! Solves  minimize 0.5 z'Pz + q'z  subject to  lo <= z <= hi  and optional
//! dense rows E z <= d, with a Mehrotra-style predictor-corrector interior
//! point method. The box constraints only contribute diagonal terms to the
//! Newton matrix, so each iteration costs one dense Cholesky of size dim(z)
//! plus a rank-k correction for the extra rows.
//!
//! Correctness is defined by the scaled KKT residual of the returned iterate,
//! not by the method: the caller checks `kkt` against its own tolerance, and
//! the test suite cross-checks against a projected-gradient oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Scaled max of dual, primal, and complementarity residuals.
    pub kkt: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Group {
    s: DVector<f64>,
    lam: DVector<f64>,
}

impl Group {
    fn len(&self) -> usize {
        self.s.len()
    }
}

/// Solve the box-plus-rows QP. `rows` couples z through general inequalities
/// E z <= d; pass `None` for a pure box problem.
pub fn solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    rows: Option<(&DMatrix<f64>, &DVector<f64>)>,
) -> Result<QpSolution> {
    let n = q.len();
    if p.nrows() != n || p.ncols() != n || lo.len() != n || hi.len() != n {
        return Err(SimError::config("qp: dimension mismatch"));
    }
    if lo.iter().zip(hi.iter()).any(|(l, h)| l >= h) {
        return Err(SimError::config("qp: empty box (lo >= hi)"));
    }
    let (e, d) = match rows {
        Some((e, d)) => {
            if e.ncols() != n || e.nrows() != d.len() {
                return Err(SimError::config("qp: row block dimension mismatch"));
            }
            (e.clone(), d.clone())
        }
        None => (DMatrix::zeros(0, n), DVector::zeros(0)),
    };
    let me = e.nrows();
    let finite = p.iter().all(|v| v.is_finite())
        && q.iter().all(|v| v.is_finite())
        && lo.iter().all(|v| v.is_finite())
        && hi.iter().all(|v| v.is_finite())
        && e.iter().all(|v| v.is_finite())
        && d.iter().all(|v| v.is_finite());
    if !finite {
        return Err(SimError::numerical("qp: non-finite entry in problem data"));
    }

    // Start strictly inside the box.
    let mut z = DVector::from_fn(n, |i, _| {
        let mid = 0.5 * (lo[i] + hi[i]);
        if lo[i] < 0.0 && hi[i] > 0.0 {
            0.0
        } else {
            mid
        }
    });
    let mut g_lo = Group {
        s: DVector::from_fn(n, |i, _| (z[i] - lo[i]).max(1.0)),
        lam: DVector::from_element(n, 1.0),
    };
    let mut g_hi = Group {
        s: DVector::from_fn(n, |i, _| (hi[i] - z[i]).max(1.0)),
        lam: DVector::from_element(n, 1.0),
    };
    let ez0 = &e * &z;
    let mut g_e = Group {
        s: DVector::from_fn(me, |i, _| (d[i] - ez0[i]).max(1.0)),
        lam: DVector::from_element(me, 1.0),
    };

    let m_total = (2 * n + me) as f64;
    let q_scale = q.amax().max(1.0);
    let b_scale = lo.amax().max(hi.amax()).max(if me > 0 { d.amax() } else { 0.0 }).max(1.0);

    let mut best: Option<(f64, DVector<f64>, usize)> = None;
    let max_iter = 80usize;

    for iter in 0..max_iter {
        // Residuals.
        let pz = p * &z;
        let mut r_d = &pz + q - &g_lo.lam + &g_hi.lam;
        if me > 0 {
            r_d += e.transpose() * &g_e.lam;
        }
        let r_lo = &g_lo.s - (&z - lo); // s - (z - lo)
        let r_hi = &g_hi.s - (hi - &z);
        let r_e = if me > 0 { &g_e.s - (&d - &e * &z) } else { DVector::zeros(0) };

        let gap = g_lo.s.dot(&g_lo.lam) + g_hi.s.dot(&g_hi.lam) + if me > 0 { g_e.s.dot(&g_e.lam) } else { 0.0 };
        let mu = gap / m_total;

        let obj = 0.5 * z.dot(&pz) + q.dot(&z);
        let e_d = r_d.amax() / q_scale;
        let e_p = r_lo
            .amax()
            .max(r_hi.amax())
            .max(if me > 0 { r_e.amax() } else { 0.0 })
            / b_scale;
        let e_c = mu / obj.abs().max(1.0);
        let kkt = e_d.max(e_p).max(e_c);

        if kkt.is_finite() && best.as_ref().map_or(true, |(k, _, _)| kkt < *k) {
            best = Some((kkt, z.clone(), iter));
        }
        if kkt <= 1e-10 {
            return Ok(QpSolution { z, kkt, iterations: iter, converged: true });
        }
        // A diverging iterate (infeasible rows drive lam/s to infinity) can
        // only get worse from here; the best iterate carries the verdict.
        if !kkt.is_finite() {
            break;
        }

        // Newton matrix: P + D_lo + D_hi + E' D_e E.
        let mut m = p.clone();
        for i in 0..n {
            m[(i, i)] += g_lo.lam[i] / g_lo.s[i] + g_hi.lam[i] / g_hi.s[i];
        }
        if me > 0 {
            let mut de = e.clone();
            for r in 0..me {
                let w = g_e.lam[r] / g_e.s[r];
                for c in 0..n {
                    de[(r, c)] *= w;
                }
            }
            m += e.transpose() * de;
        }
        let chol = {
            let mut ridge = 0.0;
            let mut fac = if m.iter().all(|v| v.is_finite()) { m.clone().cholesky() } else { None };
            while fac.is_none() && ridge < 1e-4 && m.iter().all(|v| v.is_finite()) {
                ridge = if ridge == 0.0 { 1e-12 * (m.trace() / n as f64).max(1.0) } else { ridge * 100.0 };
                let mut mr = m.clone();
                for i in 0..n {
                    mr[(i, i)] += ridge;
                }
                fac = mr.cholesky();
            }
            match fac {
                Some(c) => c,
                // The barrier has collapsed; no descent direction exists.
                None => break,
            }
        };

        // One Newton solve for a given complementarity target rc = sigma*mu - s.lam [- ds_aff.dlam_aff].
        let solve_direction = |rc_lo: &DVector<f64>, rc_hi: &DVector<f64>, rc_e: &DVector<f64>| {
            let mut rhs = -&r_d;
            for i in 0..n {
                rhs[i] += (rc_lo[i] + g_lo.lam[i] * r_lo[i]) / g_lo.s[i];
                rhs[i] -= (rc_hi[i] + g_hi.lam[i] * r_hi[i]) / g_hi.s[i];
            }
            if me > 0 {
                let mut w = DVector::zeros(me);
                for r in 0..me {
                    w[r] = (rc_e[r] + g_e.lam[r] * r_e[r]) / g_e.s[r];
                }
                rhs -= e.transpose() * w;
            }
            let dz = chol.solve(&rhs);
            let ds_lo = &dz - &r_lo;
            let ds_hi = -&dz - &r_hi;
            let ds_e = if me > 0 { -(&e * &dz) - &r_e } else { DVector::zeros(0) };
            let dlam = |g: &Group, rc: &DVector<f64>, ds: &DVector<f64>| {
                DVector::from_fn(g.len(), |i, _| (rc[i] - g.lam[i] * ds[i]) / g.s[i])
            };
            let dl_lo = dlam(&g_lo, rc_lo, &ds_lo);
            let dl_hi = dlam(&g_hi, rc_hi, &ds_hi);
            let dl_e = if me > 0 { dlam(&g_e, rc_e, &ds_e) } else { DVector::zeros(0) };
            (dz, ds_lo, ds_hi, ds_e, dl_lo, dl_hi, dl_e)
        };

        let max_step = |g: &Group, ds: &DVector<f64>, dl: &DVector<f64>| {
            let mut a = f64::INFINITY;
            for i in 0..g.len() {
                if ds[i] < 0.0 {
                    a = a.min(-g.s[i] / ds[i]);
                }
                if dl[i] < 0.0 {
                    a = a.min(-g.lam[i] / dl[i]);
                }
            }
            a
        };

        // Affine (predictor) direction: rc = -s.lam.
        let rc_aff_lo = DVector::from_fn(n, |i, _| -g_lo.s[i] * g_lo.lam[i]);
        let rc_aff_hi = DVector::from_fn(n, |i, _| -g_hi.s[i] * g_hi.lam[i]);
        let rc_aff_e = DVector::from_fn(me, |i, _| -g_e.s[i] * g_e.lam[i]);
        let aff = solve_direction(&rc_aff_lo, &rc_aff_hi, &rc_aff_e);

        let a_aff = max_step(&g_lo, &aff.1, &aff.4)
            .min(max_step(&g_hi, &aff.2, &aff.5))
            .min(if me > 0 { max_step(&g_e, &aff.3, &aff.6) } else { f64::INFINITY })
            .min(1.0);
        let gap_aff = {
            let dot = |s: &DVector<f64>, ds: &DVector<f64>, l: &DVector<f64>, dl: &DVector<f64>| {
                (0..s.len()).map(|i| (s[i] + a_aff * ds[i]) * (l[i] + a_aff * dl[i])).sum::<f64>()
            };
            dot(&g_lo.s, &aff.1, &g_lo.lam, &aff.4)
                + dot(&g_hi.s, &aff.2, &g_hi.lam, &aff.5)
                + if me > 0 { dot(&g_e.s, &aff.3, &g_e.lam, &aff.6) } else { 0.0 }
        };
        let mu_aff = gap_aff / m_total;
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };

        // Corrector: rc = sigma*mu - s.lam - ds_aff.dlam_aff.
        let rc_lo = DVector::from_fn(n, |i, _| sigma * mu - g_lo.s[i] * g_lo.lam[i] - aff.1[i] * aff.4[i]);
        let rc_hi = DVector::from_fn(n, |i, _| sigma * mu - g_hi.s[i] * g_hi.lam[i] - aff.2[i] * aff.5[i]);
        let rc_e = DVector::from_fn(me, |i, _| sigma * mu - g_e.s[i] * g_e.lam[i] - aff.3[i] * aff.6[i]);
        let (dz, ds_lo, ds_hi, ds_e, dl_lo, dl_hi, dl_e) = solve_direction(&rc_lo, &rc_hi, &rc_e);

        let a_max = max_step(&g_lo, &ds_lo, &dl_lo)
            .min(max_step(&g_hi, &ds_hi, &dl_hi))
            .min(if me > 0 { max_step(&g_e, &ds_e, &dl_e) } else { f64::INFINITY });
        let alpha = (0.99 * a_max).min(1.0);

        z += &dz * alpha;
        g_lo.s += &ds_lo * alpha;
        g_lo.lam += &dl_lo * alpha;
        g_hi.s += &ds_hi * alpha;
        g_hi.lam += &dl_hi * alpha;
        if me > 0 {
            g_e.s += &ds_e * alpha;
            g_e.lam += &dl_e * alpha;
        }
        // Keep the iterate strictly positive against roundoff.
        let floor_pos = |v: &mut DVector<f64>| {
            for x in v.iter_mut() {
                if *x < 1e-300 {
                    *x = 1e-300;
                }
            }
        };
        floor_pos(&mut g_lo.s);
        floor_pos(&mut g_lo.lam);
        floor_pos(&mut g_hi.s);
        floor_pos(&mut g_hi.lam);
        if me > 0 {
            floor_pos(&mut g_e.s);
            floor_pos(&mut g_e.lam);
        }
    }

    let (kkt, z_best, it) = best.expect("at least one iterate evaluated");
    Ok(QpSolution { converged: kkt <= 1e-7, z: z_best, kkt, iterations: it })
}
