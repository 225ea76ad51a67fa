use std::f64::consts::PI;

use crackwave::dynamics::{
    bind_receivers, effective_stiffness, first_arrival, newmark_step, simulate, LinearSystem, LoadSpec,
    NewmarkParams, WaveFieldState,
};
use crackwave::lattice::{generate_lattice, generate_lattice_from_points, CsrMatrix, PlateSpec};

/// Max |u(t) - cos(2πt)| over one period of the unit-period oscillator.
fn sdof_error(steps_per_period: usize) -> f64 {
    let k = (2.0 * PI).powi(2);
    let sys = LinearSystem::from_parts(CsrMatrix::from_diagonal(&[k]), vec![1.0]);
    let dt = 1.0 / steps_per_period as f64;
    let params = NewmarkParams::average_acceleration(dt, steps_per_period);
    let khat = effective_stiffness(&sys, &params).unwrap();
    let mut state = WaveFieldState::initial(&sys, vec![1.0], vec![0.0], &[0.0]).unwrap();
    let mut worst: f64 = 0.0;
    for step in 1..=steps_per_period {
        state = newmark_step(&state, &khat, &sys.mass, &[0.0], &params).unwrap();
        let t = step as f64 * dt;
        worst = worst.max((state.displacement[0] - (2.0 * PI * t).cos()).abs());
    }
    worst
}

#[test]
fn sdof_matches_analytic_cosine() {
    let err = sdof_error(1000);
    assert!(err < 1e-3, "max error {err}");
}

#[test]
fn sdof_second_order_convergence() {
    for n in [250, 500, 1000, 2000] {
        let ratio = sdof_error(n) / sdof_error(2 * n);
        assert!((3.0..=5.0).contains(&ratio), "n = {n}: ratio {ratio}");
    }
}

#[test]
fn paper_literal_constants_miss_the_oscillator() {
    use crackwave::dynamics::CoefficientSet;
    let k = (2.0 * PI).powi(2);
    let sys = LinearSystem::from_parts(CsrMatrix::from_diagonal(&[k]), vec![1.0]);
    let params = NewmarkParams {
        coefficients: CoefficientSet::PaperLiteral,
        ..NewmarkParams::average_acceleration(1e-3, 1000)
    };
    let khat = effective_stiffness(&sys, &params).unwrap();
    let mut state = WaveFieldState::initial(&sys, vec![1.0], vec![0.0], &[0.0]).unwrap();
    let mut worst: f64 = 0.0;
    for step in 1..=1000 {
        state = newmark_step(&state, &khat, &sys.mass, &[0.0], &params).unwrap();
        worst = worst.max((state.displacement[0] - (2.0 * PI * step as f64 * 1e-3).cos()).abs());
    }
    assert!(worst > 1e-2, "literal constants unexpectedly accurate: {worst}");
}

fn plate(n: usize, seed: u64) -> crackwave::lattice::LatticeModel {
    generate_lattice(&PlateSpec {
        n_particles: n,
        seed,
        ..PlateSpec::dataset_default()
    })
    .unwrap()
}

#[test]
fn plate_energy_is_conserved_after_impulse() {
    let model = plate(500, 11);
    let sys = LinearSystem::from_model(&model);
    let params = NewmarkParams::average_acceleration(1e-9, 400);
    let khat = effective_stiffness(&sys, &params).unwrap();
    let exc = model.nearest_particle([0.0, 0.005]).unwrap();
    let dof = sys.free.iter().position(|&d| d == 2 * exc).unwrap();
    let mut state = WaveFieldState::at_rest(sys.dim());
    let mut force = vec![0.0; sys.dim()];
    force[dof] = 1000.0;
    state = newmark_step(&state, &khat, &sys.mass, &force, &params).unwrap();
    force[dof] = 0.0;
    state = newmark_step(&state, &khat, &sys.mass, &force, &params).unwrap();
    let e0 = sys.energy(&state);
    assert!(e0 > 0.0);
    let mut prev = e0;
    for _ in 0..400 {
        state = newmark_step(&state, &khat, &sys.mass, &force, &params).unwrap();
        let e = sys.energy(&state);
        assert!((e - prev).abs() / e0 < 1e-6, "per-step drift {}", (e - prev).abs() / e0);
        prev = e;
    }
    assert!((prev - e0).abs() / e0 < 1e-6);
}

#[test]
fn excitation_receiver_dominates_early() {
    let model = plate(400, 5);
    let exc = model.nearest_particle([0.0, 0.005]).unwrap();
    let load = LoadSpec {
        excitation_particle: exc,
        direction: [1.0, 0.0],
        magnitude: 1000.0,
        duration_steps: 1,
    };
    let mut targets = vec![model.particles[exc].position];
    for i in 1..=4 {
        for j in 1..=4 {
            targets.push([0.002 * i as f64, 0.002 * j as f64]);
        }
    }
    let receivers = bind_receivers(&model, &targets).unwrap();
    let rec = simulate(&model, &load, &NewmarkParams::average_acceleration(1e-9, 200), receivers).unwrap();
    let early = 50;
    let peak = |r: usize| (0..early).map(|t| rec.get(r, t, 0).hypot(rec.get(r, t, 1))).fold(0.0, f64::max);
    let at_source = peak(0);
    for r in 1..rec.n_receivers() {
        assert!(peak(r) < at_source, "receiver {r}");
    }
    let t0 = first_arrival(&rec, 0, 0.05).unwrap();
    for r in 1..rec.n_receivers() {
        assert!(first_arrival(&rec, r, 0.05).is_none_or(|t| t > t0), "receiver {r}");
    }
}

#[test]
fn constrained_plate_frequencies_are_real_and_positive() {
    let model = plate(64, 3);
    let w = crackwave::dynamics::natural_frequencies(&model, 20).unwrap();
    assert_eq!(w.len(), 20);
    assert!(w.windows(2).all(|p| p[0] <= p[1]));
    assert!(w.iter().all(|&x| x > 0.0 && x.is_finite()));
}

/// Plate whose particles are mirror images about `y = e/2`, with the middle
/// grid row placed on the axis.
fn mirrored_plate(spec: &PlateSpec) -> crackwave::lattice::LatticeModel {
    let half = 0.5 * spec.height;
    let (_, py) = spec.pitch();
    let base = generate_lattice(spec).unwrap();
    let mut points = Vec::new();
    for p in base.particles.iter().map(|p| p.position) {
        if p[1] < half - 0.5 * py {
            points.push(p);
            points.push([p[0], spec.height - p[1]]);
        } else if (p[1] - half).abs() < 0.5 * py {
            points.push([p[0], half]);
        }
    }
    generate_lattice_from_points(spec, &points).unwrap()
}

#[test]
fn mirrored_receivers_see_matching_arrivals() {
    // 41 x 41 grid so that one row sits on the axis.
    let spec = PlateSpec {
        n_particles: 1681,
        seed: 2,
        ..PlateSpec::showcase_default()
    };
    let model = mirrored_plate(&spec);
    let e = spec.width;
    let exc = model.nearest_particle([0.0, 0.5 * e]).unwrap();
    assert_eq!(model.particles[exc].position[1], 0.5 * e);
    let load = LoadSpec {
        excitation_particle: exc,
        direction: [1.0, 0.0],
        magnitude: 1000.0,
        duration_steps: 10,
    };
    // Columns at x = e/4, e/2, 3e/4; within a column bottom, middle, top.
    let targets: Vec<[f64; 2]> = (0..9)
        .map(|k| [0.25 * e * (1 + k / 3) as f64, 0.25 * e * (1 + k % 3) as f64])
        .collect();
    let receivers = bind_receivers(&model, &targets).unwrap();
    let rec = simulate(&model, &load, &NewmarkParams::average_acceleration(1e-8, 9500), receivers).unwrap();
    for col in 0..3 {
        let (lo, hi) = (3 * col, 3 * col + 2);
        let a = first_arrival(&rec, lo, 0.05).unwrap();
        let b = first_arrival(&rec, hi, 0.05).unwrap();
        assert!((a - b).abs() / a.max(b) < 0.05, "R{} at {a:e}, R{} at {b:e}", lo + 1, hi + 1);
    }
}
