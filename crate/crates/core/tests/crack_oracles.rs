use crackwave::crack::{
    apply_crack, cell_map, clip_crack, crack_particles, crossing_elements, downsample_label, rasterize_label, sample_crack,
    CrackSegment,
};
use crackwave::lattice::{element_mass, element_stiffness, generate_lattice, PlateSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plate() -> PlateSpec {
    PlateSpec::dataset_default()
}

/// Length of the part of segment a-b inside the axis-aligned box.
fn chord_in_box(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<f64> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        if d[k] == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return None;
            }
            continue;
        }
        let (ta, tb) = ((lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]);
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1).then(|| (t1 - t0) * d[0].hypot(d[1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raster_matches_pixel_walk(ax in 0.0f64..0.01, ay in 0.0f64..0.01, bx in 0.0f64..0.01, by in 0.0f64..0.01) {
        let seg = CrackSegment { a: [ax, ay], b: [bx, by] };
        let img = rasterize_label(Some(&seg), &plate(), 100);
        let p = 1e-4;
        let slack = 1e-9 * p;
        for r in 0..100 {
            for c in 0..100 {
                let lo = [c as f64 * p, 0.01 - (r + 1) as f64 * p];
                let hi = [(c + 1) as f64 * p, 0.01 - r as f64 * p];
                let grown = chord_in_box(seg.a, seg.b, [lo[0] - slack, lo[1] - slack], [hi[0] + slack, hi[1] + slack]);
                let shrunk = chord_in_box(seg.a, seg.b, [lo[0] + slack, lo[1] + slack], [hi[0] - slack, hi[1] - slack]);
                if shrunk.is_some_and(|l| l > slack) {
                    prop_assert!(img.get(r, c), "pixel ({r}, {c}) crossed but dark");
                }
                if grown.is_none() {
                    prop_assert!(!img.get(r, c), "pixel ({r}, {c}) lit but untouched");
                }
            }
        }
    }

    #[test]
    fn coarse_label_is_image_of_fine_label(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let crack = sample_crack(&mut rng, &plate(), [0.001, 0.001]).unwrap();
        let fine = rasterize_label(Some(&clip_crack(&crack, &plate())), &plate(), 100);
        prop_assert!(fine.lit_count() >= 1);
        let coarse = downsample_label(&fine, 16);
        let mut expected = vec![0u8; 256];
        for (r, c) in fine.lit_pixels() {
            for dr in cell_map(100, 16, r) {
                for dc in cell_map(100, 16, c) {
                    expected[dr * 16 + dc] = 1;
                }
            }
        }
        prop_assert_eq!(coarse.bits, expected);
    }
}

#[test]
fn apply_crack_equals_filtered_assembly() {
    let model = generate_lattice(&PlateSpec {
        n_particles: 225,
        seed: 41,
        ..plate()
    })
    .unwrap();
    let seg = CrackSegment {
        a: [0.0035, 0.0042],
        b: [0.0071, 0.0058],
    };
    let cracked = apply_crack(&model, &seg).unwrap();
    let removed = crack_particles(&model, &seg);
    let cut = crossing_elements(&model, &seg);
    assert!(!removed.is_empty() && !cut.is_empty());

    let n = model.n_dofs();
    let mut k = vec![vec![0.0; n]; n];
    let mut m = vec![0.0; n];
    let spec = &model.spec;
    for el in &model.elements {
        if removed.contains(&el.node_a) || removed.contains(&el.node_b) || cut.contains(&el.id) {
            continue;
        }
        let ke = element_stiffness(spec.youngs_modulus, el.area, el.length, el.orientation).unwrap();
        let me = element_mass(spec.density, el.area, el.length).unwrap();
        let dofs = el.dofs();
        for i in 0..4 {
            for j in 0..4 {
                k[dofs[i]][dofs[j]] += ke[i][j];
            }
            m[dofs[i]] += me[i];
        }
    }
    let got = cracked.stiffness.to_dense();
    let scale = cracked.stiffness.max_abs();
    for i in 0..n {
        for j in 0..n {
            assert!((got[i][j] - k[i][j]).abs() <= 1e-12 * scale, "K[{i}][{j}]");
        }
        assert!((cracked.mass[i] - m[i]).abs() <= 1e-12 * m[i].abs().max(1e-30));
    }
    let total_before: f64 = model.mass.iter().sum();
    let total_after: f64 = cracked.mass.iter().sum();
    assert!(total_after < total_before);
}
