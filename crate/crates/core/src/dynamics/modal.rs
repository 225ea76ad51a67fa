//! Natural frequencies from the generalized eigenproblem `K φ = ω² M φ`.
//!
//! With a lumped (diagonal) mass the problem is symmetrized as
//! `M^{-1/2} K M^{-1/2}` and solved densely, so this is meant for small and
//! medium models.

use faer::{Mat, Side};

use super::LinearSystem;
use crate::error::{Error, Result};
use crate::lattice::{CsrMatrix, LatticeModel};

/// Relative floor below which a negative eigenvalue is an assembly defect.
pub const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-8;

/// The `n_lowest` smallest circular frequencies (rad/s) on the free DOFs.
pub fn natural_frequencies(model: &LatticeModel, n_lowest: usize) -> Result<Vec<f64>> {
    let system = LinearSystem::from_model(model);
    natural_frequencies_of(&system.stiffness, &system.mass, n_lowest)
}

pub fn natural_frequencies_of(stiffness: &CsrMatrix, mass: &[f64], n_lowest: usize) -> Result<Vec<f64>> {
    let n = mass.len();
    if stiffness.dim() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n} stiffness"),
            actual: format!("{0}x{0}", stiffness.dim()),
        });
    }
    if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::invalid("mass", format!("DOF {i} has non-positive mass")));
    }
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in stiffness.row(i) {
            a[(i, j)] = v * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::invalid("stiffness", "eigenvalue iteration did not converge"))?;
    let lambda_max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = NEGATIVE_EIGEN_TOLERANCE * lambda_max;
    let mut omegas = Vec::with_capacity(n_lowest.min(n));
    for &lambda in eig.iter().take(n_lowest) {
        if lambda < -tolerance {
            return Err(Error::AssemblyDefect {
                value: lambda,
                tolerance: -tolerance,
            });
        }
        omegas.push(lambda.max(0.0).sqrt());
    }
    Ok(omegas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TripletBuilder;
    use approx::assert_relative_eq;

    #[test]
    fn single_dof() {
        let w = natural_frequencies_of(&CsrMatrix::from_diagonal(&[4.0]), &[1.0], 1).unwrap();
        assert_relative_eq!(w[0], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn fixed_free_two_mass_chain() {
        // wall -k- m1 -k- m2, k = m = 1: K = [[2,-1],[-1,1]], ω² = (3 ± √5)/2
        let mut b = TripletBuilder::new(2);
        for (i, j, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)] {
            b.push(i, j, v);
        }
        let w = natural_frequencies_of(&b.build(), &[1.0, 1.0], 2).unwrap();
        let s5 = 5.0f64.sqrt();
        assert_relative_eq!(w[0] * w[0], (3.0 - s5) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(w[1] * w[1], (3.0 + s5) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn negative_eigenvalue_is_defect() {
        let k = CsrMatrix::from_diagonal(&[-1.0, 1.0]);
        assert!(matches!(
            natural_frequencies_of(&k, &[1.0, 1.0], 2),
            Err(Error::AssemblyDefect { .. })
        ));
    }
}
