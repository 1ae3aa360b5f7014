//! Dense linear-algebra helpers shared by the control stack.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Result, SimError};

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a (nearly) symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev = symmetrize(m).symmetric_eigenvalues();
    let mut v: Vec<f64> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (dst, src) in ev.iter_mut().zip(v) {
        *dst = src;
    }
    ev
}

pub fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    ev[ev.len() - 1]
}

/// Largest eigenvalue magnitude of a general square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Numerical rank via SVD with a tolerance relative to the largest singular
/// value.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Controllability matrix [B, AB, ..., A^(n-1)B].
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut blk = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&blk);
        blk = a * blk;
    }
    out
}

/// Observability matrix [C; CA; ...; CA^(n-1)].
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = DMatrix::zeros(n * p, n);
    let mut blk = c.clone();
    for i in 0..n {
        out.view_mut((i * p, 0), (p, n)).copy_from(&blk);
        blk = &blk * a;
    }
    out
}

pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> bool {
    rank(&controllability_matrix(a, b), rel_tol) == a.nrows()
}

pub fn is_observable(a: &DMatrix<f64>, c: &DMatrix<f64>, rel_tol: f64) -> bool {
    rank(&observability_matrix(a, c), rel_tol) == a.nrows()
}

/// Principal k-th root of a real square matrix with a simple, conjugate-closed
/// spectrum away from the closed negative real axis.
///
/// The root is evaluated as the Newton-form interpolation polynomial of
/// z -> z^(1/k) on the eigenvalues (computed in complex arithmetic, applied to
/// the real matrix), then verified by recomposition. This covers the class of
/// systems this simulator ships - well-separated discrete-time spectra - and
/// turns anything outside it into a hard error rather than a silent
/// mis-realization.
pub fn matrix_root(a: &DMatrix<f64>, k: u32) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SimError::config("matrix_root requires a square matrix"));
    }
    if k == 0 {
        return Err(SimError::config("matrix_root requires k >= 1"));
    }
    if k == 1 {
        return Ok(a.clone());
    }
    let eigs = a.clone().complex_eigenvalues();
    let scale = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max).max(1e-300);
    for l in eigs.iter() {
        if l.re <= 0.0 && l.im.abs() < 1e-12 * scale {
            return Err(SimError::numerical(
                "matrix_root: eigenvalue on the closed negative real axis, principal root undefined",
            ));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() < 1e-8 * scale {
                return Err(SimError::numerical(
                    "matrix_root: eigenvalues too close for stable interpolation",
                ));
            }
        }
    }

    // Newton divided differences of f(z) = z^(1/k) on the spectrum.
    let exponent = 1.0 / k as f64;
    let f: Vec<Complex<f64>> = eigs.iter().map(|l| l.powf(exponent)).collect();
    let mut table = f.clone();
    let mut coeff = vec![table[0]];
    for order in 1..n {
        for i in 0..(n - order) {
            table[i] = (table[i + 1] - table[i]) / (eigs[i + order] - eigs[i]);
        }
        coeff.push(table[0]);
    }

    // Horner evaluation of the Newton form on the matrix, in complex
    // arithmetic: p(A) = c0 + (A - l0)(c1 + (A - l1)(c2 + ...)).
    let ac: DMatrix<Complex<f64>> = a.map(|v| Complex::new(v, 0.0));
    let id: DMatrix<Complex<f64>> = DMatrix::identity(n, n);
    let mut p: DMatrix<Complex<f64>> = &id * coeff[n - 1];
    for j in (0..n - 1).rev() {
        p = (&p * (&ac - &id * eigs[j])) + &id * coeff[j];
    }

    let max_imag = p.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_imag > 1e-7 * scale.max(1.0) {
        return Err(SimError::numerical(format!(
            "matrix_root: residual imaginary part {max_imag:.3e} too large"
        )));
    }
    let root = p.map(|c| c.re);

    // Recomposition check: root^k must reproduce the input.
    let mut comp = DMatrix::identity(n, n);
    for _ in 0..k {
        comp = &comp * &root;
    }
    let rel = (&comp - a).norm() / a.norm().max(1e-300);
    if rel > 1e-8 {
        return Err(SimError::numerical(format!(
            "matrix_root: recomposition error {rel:.3e} exceeds 1e-8"
        )));
    }
    Ok(root)
}

/// Split a one-period zero-order-hold pair (A, B) into `k` equal substeps:
/// A_sub = A^(1/k) and B_sub chosen so that k substeps under a constant input
/// compose back to (A, B) exactly. Requires A - I nonsingular.
pub fn zoh_substep(a: &DMatrix<f64>, b: &DMatrix<f64>, k: u32) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let a_sub = matrix_root(a, k)?;
    let a_minus_i = a - DMatrix::<f64>::identity(n, n);
    let lu = a_minus_i.lu();
    let rhs = lu
        .solve(b)
        .ok_or_else(|| SimError::numerical("zoh_substep: A - I is singular"))?;
    let b_sub = (&a_sub - DMatrix::<f64>::identity(n, n)) * rhs;

    // Composition check: sum_{j<k} A_sub^j B_sub == B.
    let mut acc = DMatrix::zeros(n, b.ncols());
    let mut pow = DMatrix::identity(n, n);
    for _ in 0..k {
        acc += &pow * &b_sub;
        pow = &a_sub * &pow;
    }
    let rel = (&acc - b).norm() / b.norm().max(1e-300);
    if rel > 1e-8 {
        return Err(SimError::numerical(format!(
            "zoh_substep: input composition error {rel:.3e} exceeds 1e-8"
        )));
    }
    Ok((a_sub, b_sub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_of_identity() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(rank(&id, 1e-8), 4);
    }

    #[test]
    fn controllability_of_integrator_chain() {
        // Shift register: controllable from the last state, unobservable from it.
        let mut a = DMatrix::<f64>::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 2)] = 1.0;
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert!(is_controllable(&a, &b, 1e-8));
        assert!(is_observable(&a, &c, 1e-8));
        let b_bad = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(!is_controllable(&a, &b_bad, 1e-8));
    }

    #[test]
    fn scalar_matrix_root() {
        let a = DMatrix::from_element(1, 1, 16.0);
        let r = matrix_root(&a, 4).unwrap();
        assert_relative_eq!(r[(0, 0)], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn diagonal_root_composes() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.3, 2.0]));
        let r = matrix_root(&a, 20).unwrap();
        let mut comp = DMatrix::identity(3, 3);
        for _ in 0..20 {
            comp = &comp * &r;
        }
        assert_relative_eq!(comp, a, max_relative = 1e-10);
    }

    #[test]
    fn root_rejects_negative_real_eigenvalue() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5]));
        assert!(matrix_root(&a, 2).is_err());
    }

    #[test]
    fn substep_composition_on_rotation_scale() {
        // 2x2 with a complex pair: r * rotation.
        let r = 0.9_f64;
        let th = 0.3_f64;
        let a = DMatrix::from_row_slice(2, 2, &[r * th.cos(), -r * th.sin(), r * th.sin(), r * th.cos()]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.5]);
        let (a_sub, b_sub) = zoh_substep(&a, &b, 10).unwrap();
        let mut x = DVector::from_vec(vec![0.0, 0.0]);
        let u = DVector::from_vec(vec![1.0]);
        for _ in 0..10 {
            x = &a_sub * &x + &b_sub * &u;
        }
        let x_onestep = &b * &u;
        assert_relative_eq!(x, x_onestep, epsilon = 1e-10);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.8, 0.8, 0.0]);
        assert_relative_eq!(spectral_radius(&a), 0.8, max_relative = 1e-10);
    }
}
