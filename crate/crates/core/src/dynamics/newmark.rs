//! Newmark time stepping for `M ü + K u = F(t)` without damping.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{ColMut, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CsrMatrix, LatticeModel};

/// Which integration constants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientSet {
    /// `a0 = 1/(βΔt²)`, `a2 = 1/(βΔt)`, `a3 = 1/(2β) - 1`.
    #[default]
    Textbook,
    /// `a0 = 6/(γΔt²)`, `a2 = 1/(γΔt)`, `a3 = 1/(2γ)`, kept for comparison runs only.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewmarkParams {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub coefficients: CoefficientSet,
}

fn default_beta() -> f64 {
    0.25
}

fn default_gamma() -> f64 {
    0.5
}

/// Integration constants derived from `(β, γ, Δt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a0: f64,
    pub a2: f64,
    pub a3: f64,
    /// `(1 - γ)Δt`
    pub a6: f64,
    /// `γΔt`
    pub a7: f64,
}

impl NewmarkParams {
    /// Average-acceleration scheme, `β = 1/4`, `γ = 1/2`.
    pub fn average_acceleration(dt: f64, n_steps: usize) -> Self {
        NewmarkParams {
            beta: 0.25,
            gamma: 0.5,
            dt,
            n_steps,
            coefficients: CoefficientSet::Textbook,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        if !(self.beta > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::invalid("beta/gamma", "must be positive"));
        }
        Ok(())
    }

    /// `2β ≥ γ ≥ 1/2`
    pub fn is_unconditionally_stable(&self) -> bool {
        2.0 * self.beta >= self.gamma && self.gamma >= 0.5
    }

    pub fn coefficients(&self) -> Coefficients {
        let (b, g, dt) = (self.beta, self.gamma, self.dt);
        let (a0, a2, a3) = match self.coefficients {
            CoefficientSet::Textbook => (1.0 / (b * dt * dt), 1.0 / (b * dt), 0.5 / b - 1.0),
            CoefficientSet::PaperLiteral => (6.0 / (g * dt * dt), 1.0 / (g * dt), 0.5 / g),
        };
        Coefficients {
            a0,
            a2,
            a3,
            a6: (1.0 - g) * dt,
            a7: g * dt,
        }
    }
}

/// Stiffness and lumped mass restricted to the free DOFs of a model.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    /// Global DOF index of each reduced DOF.
    pub free: Vec<usize>,
    /// Size of the unreduced DOF space.
    pub n_total: usize,
}

impl LinearSystem {
    pub fn from_model(model: &LatticeModel) -> Self {
        let free = model.free_dofs();
        LinearSystem {
            stiffness: model.stiffness.submatrix(&free),
            mass: free.iter().map(|&d| model.mass[d]).collect(),
            free,
            n_total: model.n_dofs(),
        }
    }

    /// System whose every DOF is free.
    pub fn from_parts(stiffness: CsrMatrix, mass: Vec<f64>) -> Self {
        let n = mass.len();
        assert_eq!(stiffness.dim(), n);
        LinearSystem {
            stiffness,
            mass,
            free: (0..n).collect(),
            n_total: n,
        }
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Scatters a reduced vector back to the full DOF space (constrained DOFs are zero).
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_total];
        for (&g, &v) in self.free.iter().zip(reduced) {
            full[g] = v;
        }
        full
    }

    /// `½ vᵀMv + ½ uᵀKu`
    pub fn energy(&self, state: &WaveFieldState) -> f64 {
        let kinetic: f64 = state.velocity.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum();
        0.5 * kinetic + 0.5 * self.stiffness.quadratic_form(&state.displacement)
    }
}

/// Factorized `K̂ = K + a0·M`, reused at every step.
pub struct EffectiveStiffness {
    matrix: CsrMatrix,
    llt: Llt<usize, f64>,
    a0: f64,
}

impl std::fmt::Debug for EffectiveStiffness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EffectiveStiffness")
            .field("dim", &self.matrix.dim())
            .field("a0", &self.a0)
            .finish()
    }
}

impl EffectiveStiffness {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// Solves `K̂ x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.llt.solve_in_place(ColMut::from_slice_mut(rhs));
    }
}

/// Builds and factorizes `K̂ = K + a0·M` for the reduced system.
pub fn effective_stiffness(system: &LinearSystem, params: &NewmarkParams) -> Result<EffectiveStiffness> {
    params.validate()?;
    let a0 = params.coefficients().a0;
    let matrix = system.stiffness.add_scaled(&CsrMatrix::from_diagonal(&system.mass), a0);
    if matrix.dim() == 0 {
        return Err(Error::SingularSystem);
    }
    let lower = matrix.lower_to_faer().ok_or(Error::SingularSystem)?;
    let llt = lower.sp_cholesky(Side::Lower).map_err(|_| Error::SingularSystem)?;
    Ok(EffectiveStiffness { matrix, llt, a0 })
}

/// Displacement, velocity and acceleration on the reduced DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFieldState {
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
    pub step: usize,
}

impl WaveFieldState {
    pub fn at_rest(n: usize) -> Self {
        WaveFieldState {
            displacement: vec![0.0; n],
            velocity: vec![0.0; n],
            acceleration: vec![0.0; n],
            step: 0,
        }
    }

    /// Initial state with `ü₀ = M⁻¹(F₀ - K u₀)`.
    pub fn initial(system: &LinearSystem, u0: Vec<f64>, v0: Vec<f64>, f0: &[f64]) -> Result<Self> {
        let n = system.dim();
        for (name, len) in [("u0", u0.len()), ("v0", v0.len()), ("f0", f0.len())] {
            if len != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{name} of length {n}"),
                    actual: len.to_string(),
                });
            }
        }
        let ku = system.stiffness.mul_vec(&u0);
        let mut acceleration = vec![0.0; n];
        for i in 0..n {
            let residual = f0[i] - ku[i];
            acceleration[i] = if system.mass[i] > 0.0 {
                residual / system.mass[i]
            } else if residual == 0.0 {
                0.0
            } else {
                return Err(Error::SingularSystem);
            };
        }
        Ok(WaveFieldState {
            displacement: u0,
            velocity: v0,
            acceleration,
            step: 0,
        })
    }
}

/// Advances one step: solves `K̂ u' = F' + M(a0 u + a2 v + a3 a)`, then
/// updates acceleration and velocity from the Newmark relations.
pub fn newmark_step(
    state: &WaveFieldState,
    khat: &EffectiveStiffness,
    mass: &[f64],
    load_next: &[f64],
    params: &NewmarkParams,
) -> Result<WaveFieldState> {
    let mut next = state.clone();
    advance(&mut next, khat, mass, load_next, &params.coefficients())?;
    Ok(next)
}

/// In-place variant of [`newmark_step`] used by the simulation loop.
pub(crate) fn advance(
    state: &mut WaveFieldState,
    khat: &EffectiveStiffness,
    mass: &[f64],
    load_next: &[f64],
    c: &Coefficients,
) -> Result<()> {
    let n = mass.len();
    if load_next.len() != n || state.displacement.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("vectors of length {n}"),
            actual: format!("load {}, state {}", load_next.len(), state.displacement.len()),
        });
    }
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| {
            load_next[i]
                + mass[i] * (c.a0 * state.displacement[i] + c.a2 * state.velocity[i] + c.a3 * state.acceleration[i])
        })
        .collect();
    khat.solve_in_place(&mut rhs);
    let step = state.step + 1;
    for i in 0..n {
        let u_new = rhs[i];
        let a_new = c.a0 * (u_new - state.displacement[i]) - c.a2 * state.velocity[i] - c.a3 * state.acceleration[i];
        let v_new = state.velocity[i] + c.a6 * state.acceleration[i] + c.a7 * a_new;
        if !(u_new.is_finite() && v_new.is_finite() && a_new.is_finite()) {
            return Err(Error::Divergence { step });
        }
        state.displacement[i] = u_new;
        state.velocity[i] = v_new;
        state.acceleration[i] = a_new;
    }
    state.step = step;
    Ok(())
}
