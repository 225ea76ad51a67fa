//! Truss element matrices.

use crate::error::{Error, Result};

pub type Mat4 = [[f64; 4]; 4];

/// Global-frame stiffness of a 2-node truss, `Tᵀ K_local T`.
///
/// `K_local = (EA/L)·[[1,0,-1,0],[0,0,0,0],[-1,0,1,0],[0,0,0,0]]` and `T`
/// rotates each node's `(x, y)` pair into the element axis at angle `phi`.
pub fn element_stiffness(youngs_modulus: f64, area: f64, length: f64, phi: f64) -> Result<Mat4> {
    check_positive("youngs_modulus", youngs_modulus)?;
    check_positive("area", area)?;
    check_positive("length", length)?;
    let k = youngs_modulus * area / length;
    let (s, c) = phi.sin_cos();
    let (cc, cs, ss) = (c * c, c * s, s * s);
    Ok([
        [k * cc, k * cs, -k * cc, -k * cs],
        [k * cs, k * ss, -k * cs, -k * ss],
        [-k * cc, -k * cs, k * cc, k * cs],
        [-k * cs, -k * ss, k * cs, k * ss],
    ])
}

/// Lumped element mass `(ρAL/2)·I₄`, returned as its diagonal.
///
/// Rotation leaves a multiple of the identity unchanged, so the global-frame
/// matrix is the same as the local one.
pub fn element_mass(density: f64, area: f64, length: f64) -> Result<[f64; 4]> {
    check_positive("density", density)?;
    check_positive("area", area)?;
    check_positive("length", length)?;
    Ok([0.5 * density * area * length; 4])
}

fn check_positive(arg: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(arg, format!("must be positive and finite, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn local() -> Mat4 {
        [
            [1.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [-1.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    }

    /// Explicit `Tᵀ K T` with the 4x4 block rotation, kept independent of the closed form.
    fn rotate(k: &Mat4, phi: f64) -> Mat4 {
        let (s, c) = phi.sin_cos();
        let mut t = [[0.0; 4]; 4];
        for b in [0, 2] {
            t[b][b] = c;
            t[b][b + 1] = s;
            t[b + 1][b] = -s;
            t[b + 1][b + 1] = c;
        }
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        out[i][j] += t[a][i] * k[a][b] * t[b][j];
                    }
                }
            }
        }
        out
    }

    fn assert_mat_eq(a: &Mat4, b: &Mat4, tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(a[i][j], b[i][j], epsilon = tol);
            }
        }
    }

    #[test]
    fn zero_angle_is_local_matrix() {
        assert_mat_eq(&element_stiffness(1.0, 1.0, 1.0, 0.0).unwrap(), &local(), 0.0);
    }

    #[test]
    fn right_angle_swaps_axes() {
        let expected = [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, -1.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 1.0],
        ];
        assert_mat_eq(&element_stiffness(1.0, 1.0, 1.0, FRAC_PI_2).unwrap(), &expected, 1e-15);
    }

    #[test]
    fn diagonal_angle_matches_rotation_oracle() {
        let k = element_stiffness(1.0, 1.0, 1.0, FRAC_PI_4).unwrap();
        assert_mat_eq(&k, &rotate(&local(), FRAC_PI_4), 1e-15);
        for row in &k {
            for v in row {
                assert_abs_diff_eq!(v.abs(), 0.5, epsilon = 1e-15);
            }
        }
        assert!(k[0][0] > 0.0 && k[0][1] > 0.0 && k[0][2] < 0.0 && k[0][3] < 0.0);
    }

    #[test]
    fn arbitrary_angles_match_oracle_and_are_rank_one() {
        for i in 0..24 {
            let phi = -3.0 + 0.27 * i as f64;
            let k = element_stiffness(2.0e9, 3.0e-4, 0.02, phi).unwrap();
            let mut scaled = local();
            for row in scaled.iter_mut() {
                for v in row.iter_mut() {
                    *v *= 2.0e9 * 3.0e-4 / 0.02;
                }
            }
            assert_mat_eq(&k, &rotate(&scaled, phi), 1e-3);
            // rank one: every row is a multiple of the axial vector (c, s, -c, -s)
            let (s, c) = phi.sin_cos();
            let axial = [c, s, -c, -s];
            for row in &k {
                let scale: f64 = row.iter().zip(&axial).map(|(a, b)| a * b).sum::<f64>() / 2.0;
                for j in 0..4 {
                    assert_abs_diff_eq!(row[j], scale * axial[j], epsilon = 1e-3);
                }
            }
        }
    }

    #[test]
    fn mass_is_half_element_mass() {
        let m = element_mass(2000.0, 1e-4, 0.01).unwrap();
        for v in m {
            assert_abs_diff_eq!(v, 1e-3, epsilon = 1e-18);
        }
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(element_stiffness(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(element_stiffness(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(element_mass(1.0, 1.0, 0.0).is_err());
        assert!(element_mass(f64::NAN, 1.0, 1.0).is_err());
    }
}
