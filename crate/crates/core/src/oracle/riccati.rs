//! Continuous algebraic Riccati and Lyapunov equations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Residual accepted for a Riccati solution, relative to the norms of its terms.
pub const CARE_RESIDUAL_TOL: f64 = 1e-10;

/// Stabilizing solution X of Aᵀ X + X A − X G X + Q = 0 with G, Q symmetric
/// positive semidefinite, via the matrix sign function of the Hamiltonian.
pub fn care(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(h)?;
    let id = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &id));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));

    let svd = lhs.svd(true, true);
    let x = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NoStabilizingSolution(e.to_string()))?;
    let x = (&x + x.transpose()) * 0.5;

    let residual = a.transpose() * &x + &x * a - &x * g * &x + q;
    let scale = 2.0 * a.norm() * x.norm() + g.norm() * x.norm_squared() + q.norm();
    if residual.norm() > CARE_RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NoStabilizingSolution(format!(
            "residual {:.3e} exceeds tolerance",
            residual.norm()
        )));
    }
    let closed = a - g * &x;
    let worst = max_real_eigenvalue(&closed);
    if worst >= 0.0 {
        return Err(Error::NoStabilizingSolution(format!(
            "closed-loop eigenvalue with real part {worst:.3e}"
        )));
    }
    Ok(x)
}

/// sign(H) by the scaled Newton iteration Z ← (cZ + (cZ)⁻¹)/2.
fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = z.nrows() as f64;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let det = lu.determinant().abs();
        let inv = lu.try_inverse().ok_or_else(|| {
            Error::NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis".into())
        })?;
        let c = if det.is_finite() && det > 0.0 {
            det.powf(-1.0 / n)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if !size.is_finite() {
            break;
        }
        if change <= 1e-14 * size {
            return Ok(z);
        }
    }
    if z.iter().all(|v| v.is_finite()) {
        // converged to rounding level without meeting the strict test
        let sq = &z * &z;
        let id = DMatrix::<f64>::identity(z.nrows(), z.nrows());
        if (sq - id).norm() < 1e-8 * z.norm() {
            return Ok(z);
        }
    }
    Err(Error::NoStabilizingSolution(
        "matrix sign iteration did not converge".into(),
    ))
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solution X of M X + X Mᵀ + Q = 0 for Hurwitz M.
pub fn lyapunov(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let worst = max_real_eigenvalue(m);
    if worst >= -1e-12 * m.norm().max(1e-300) {
        return Err(Error::Unstable { max_real: worst });
    }
    let id = DMatrix::<f64>::identity(n, n);
    let kron = id.kronecker(m) + m.kronecker(&id);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or(Error::Unstable { max_real: worst })?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}
