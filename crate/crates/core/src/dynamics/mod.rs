//! Transient wave propagation on a lattice model.

pub mod arrival;
pub mod modal;
pub mod newmark;
pub mod record;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
pub use arrival::{divergence_time, first_arrival, first_crossing, peak_magnitude, DEFAULT_ARRIVAL_FRACTION};
pub use modal::{natural_frequencies, natural_frequencies_of};
pub use newmark::{
    effective_stiffness, newmark_step, CoefficientSet, EffectiveStiffness, LinearSystem, NewmarkParams,
    WaveFieldState,
};
pub use record::{read_record, write_record, ReceiverBinding, RecordMetadata, WaveFieldRecord};

/// Rectangular force pulse on one particle, active for steps `1..=duration_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub excitation_particle: usize,
    /// Unit direction `(x, y)`.
    pub direction: [f64; 2],
    /// Newtons.
    pub magnitude: f64,
    pub duration_steps: usize,
}

impl LoadSpec {
    pub fn validate(&self, n_steps: usize) -> Result<()> {
        if self.magnitude == 0.0 || !self.magnitude.is_finite() {
            return Err(Error::invalid("magnitude", "must be finite and nonzero"));
        }
        let norm = self.direction[0].hypot(self.direction[1]);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("direction", format!("must be a unit vector, norm is {norm}")));
        }
        if self.duration_steps == 0 || self.duration_steps > n_steps {
            return Err(Error::invalid(
                "duration_steps",
                format!("must lie in 1..={n_steps}, got {}", self.duration_steps),
            ));
        }
        Ok(())
    }

    /// Force at the end of step `step` (1-based).
    pub fn is_active(&self, step: usize) -> bool {
        (1..=self.duration_steps).contains(&step)
    }
}

/// Full-field displacement `[u_x, u_y]` of every particle at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub displacement: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationOptions {
    /// Record a full-field snapshot every this many steps.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub record: WaveFieldRecord,
    pub snapshots: Vec<Snapshot>,
}

/// Binds nominal receiver positions to their nearest particles.
pub fn bind_receivers(model: &LatticeModel, targets: &[[f64; 2]]) -> Result<Vec<ReceiverBinding>> {
    targets
        .iter()
        .map(|&t| {
            let particle = model
                .nearest_particle(t)
                .ok_or_else(|| Error::invalid("receivers", "model has no particles"))?;
            Ok(ReceiverBinding {
                particle,
                target: t,
                position: model.particles[particle].position,
            })
        })
        .collect()
}

/// Runs `params.n_steps` Newmark steps from rest and records every receiver
/// after each step.
pub fn simulate(
    model: &LatticeModel,
    load: &LoadSpec,
    params: &NewmarkParams,
    receivers: Vec<ReceiverBinding>,
) -> Result<WaveFieldRecord> {
    Ok(simulate_with(model, load, params, receivers, &SimulationOptions::default())?.record)
}

pub fn simulate_with(
    model: &LatticeModel,
    load: &LoadSpec,
    params: &NewmarkParams,
    receivers: Vec<ReceiverBinding>,
    options: &SimulationOptions,
) -> Result<SimulationOutput> {
    params.validate()?;
    load.validate(params.n_steps)?;
    let n_particles = model.particles.len();
    for r in &receivers {
        if r.particle >= n_particles {
            return Err(Error::invalid("receivers", format!("particle {} out of range", r.particle)));
        }
    }
    if load.excitation_particle >= n_particles {
        return Err(Error::invalid("excitation_particle", "out of range"));
    }
    let system = LinearSystem::from_model(model);
    let mut reduced_of = vec![usize::MAX; system.n_total];
    for (k, &g) in system.free.iter().enumerate() {
        reduced_of[g] = k;
    }
    let mut force = vec![0.0; system.dim()];
    let mut loaded = Vec::new();
    for c in 0..2 {
        let k = reduced_of[2 * load.excitation_particle + c];
        if k != usize::MAX && load.direction[c] != 0.0 {
            loaded.push((k, load.magnitude * load.direction[c]));
        }
    }
    if loaded.is_empty() {
        return Err(Error::invalid("excitation_particle", "the loaded DOFs are constrained or excluded"));
    }
    let khat = effective_stiffness(&system, params)?;
    let coeffs = params.coefficients();
    let mut state = WaveFieldState::initial(&system, vec![0.0; system.dim()], vec![0.0; system.dim()], &force)?;
    let receiver_dofs: Vec<[usize; 2]> = receivers
        .iter()
        .map(|r| [reduced_of[2 * r.particle], reduced_of[2 * r.particle + 1]])
        .collect();
    let mut record = WaveFieldRecord::zeros(params.dt, params.n_steps, receivers);
    let mut snapshots = Vec::new();
    for step in 1..=params.n_steps {
        let active = load.is_active(step);
        for &(k, f) in &loaded {
            force[k] = if active { f } else { 0.0 };
        }
        newmark::advance(&mut state, &khat, &system.mass, &force, &coeffs)?;
        for (r, dofs) in receiver_dofs.iter().enumerate() {
            for c in 0..2 {
                let v = if dofs[c] == usize::MAX { 0.0 } else { state.displacement[dofs[c]] };
                record.set(r, step - 1, c, v);
            }
        }
        if options.snapshot_every.is_some_and(|k| k > 0 && step % k == 0) {
            let full = system.expand(&state.displacement);
            snapshots.push(Snapshot {
                step,
                displacement: full.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            });
        }
    }
    Ok(SimulationOutput { record, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{generate_lattice, PlateSpec};

    fn model() -> LatticeModel {
        generate_lattice(&PlateSpec {
            n_particles: 144,
            seed: 7,
            ..PlateSpec::dataset_default()
        })
        .unwrap()
    }

    fn left_mid_load(m: &LatticeModel) -> LoadSpec {
        LoadSpec {
            excitation_particle: m.nearest_particle([0.0, 0.005]).unwrap(),
            direction: [1.0, 0.0],
            magnitude: 1000.0,
            duration_steps: 1,
        }
    }

    #[test]
    fn record_shape_and_determinism() {
        let m = model();
        let load = left_mid_load(&m);
        let params = NewmarkParams::average_acceleration(1e-9, 50);
        let targets: Vec<[f64; 2]> = (1..4).map(|i| [0.0025 * i as f64, 0.005]).collect();
        let recv = bind_receivers(&m, &targets).unwrap();
        let a = simulate(&m, &load, &params, recv.clone()).unwrap();
        let b = simulate(&m, &load, &params, recv).unwrap();
        assert_eq!(a.shape(), [3, 50, 2]);
        assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn fixed_receivers_stay_zero() {
        let m = model();
        let bottom = m.particles.iter().find(|p| m.fixed[2 * p.id]).unwrap().id;
        let recv = vec![ReceiverBinding {
            particle: bottom,
            target: m.particles[bottom].position,
            position: m.particles[bottom].position,
        }];
        let out = simulate_with(
            &m,
            &left_mid_load(&m),
            &NewmarkParams::average_acceleration(1e-9, 40),
            recv,
            &SimulationOptions { snapshot_every: Some(10) },
        )
        .unwrap();
        assert!(out.record.data.iter().all(|v| *v == 0.0));
        assert_eq!(out.snapshots.len(), 4);
        for s in &out.snapshots {
            for d in m.fixed_dofs() {
                assert_eq!(s.displacement[d / 2][d % 2], 0.0);
            }
        }
    }

    #[test]
    fn load_validation() {
        let m = model();
        let mut load = left_mid_load(&m);
        load.direction = [1.0, 1.0];
        let p = NewmarkParams::average_acceleration(1e-9, 5);
        assert!(simulate(&m, &load, &p, vec![]).is_err());
        let mut load = left_mid_load(&m);
        load.duration_steps = 6;
        assert!(simulate(&m, &load, &p, vec![]).is_err());
        let mut load = left_mid_load(&m);
        load.magnitude = 0.0;
        assert!(simulate(&m, &load, &p, vec![]).is_err());
    }
}
