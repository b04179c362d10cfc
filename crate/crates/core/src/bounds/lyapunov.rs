use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `mᵀ X + X m = rhs` through the `n² × n²` Kronecker system.
///
/// Only meant for small state dimensions. Fails when two eigenvalues of `m`
/// sum to zero, since the operator is then singular.
pub fn solve_lyapunov(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n || rhs.nrows() != n || rhs.ncols() != n {
        return Err(Error::Dimension(format!(
            "lyapunov: m is {}x{}, rhs is {}x{}",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }

    let eig = m.complex_eigenvalues();
    let scale = 1.0 + m.norm();
    for i in 0..n {
        for j in i..n {
            if (eig[i] + eig[j]).norm() <= 1e-10 * scale {
                return Err(Error::EigenvaluePairing(eig[i].to_string(), eig[j].to_string()));
            }
        }
    }

    // vec(mᵀ X) = (I ⊗ mᵀ) vec(X),  vec(X m) = (mᵀ ⊗ I) vec(X)
    let mt = m.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = op
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("lyapunov: Kronecker system is singular".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    let x = (&x + x.transpose()) * 0.5;

    let residual = (&mt * &x + &x * m - rhs).norm();
    if !(residual <= 1e-9 * rhs.norm().max(f64::MIN_POSITIVE) * scale * scale) {
        return Err(Error::Numerical(format!(
            "lyapunov: residual {residual:e} too large for |rhs| = {:e}",
            rhs.norm()
        )));
    }
    Ok(x)
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
pub fn symmetric_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = q.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-12 * (1.0 + q.norm()) {
        return Err(Error::Numerical(format!(
            "square root of an indefinite matrix (eigenvalue {:e})",
            eig.eigenvalues.min()
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Largest eigenvalue of a symmetric matrix.
pub(crate) fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.max()
}
