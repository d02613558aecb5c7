use proptest::prelude::*;

use ltlab::inequalities::{
    holder_pointwise_check, local_bound_check, lt_ratio, main_inequality_check, DISCRETIZATION_TOLERANCE,
};
use ltlab::lattice::LocalBoundMode;
use ltlab::partition::{group, group_inequality_check, subdivide, validate_groups, DyadicCube};
use ltlab::states::{
    generate, hoffmann_ostenhof_check, local_kinetic_energy, local_mass, DensityField, Family, Grid, OrbitalSet,
};

fn grid_n(d: usize) -> usize {
    [256, 32, 16][d - 1]
}

fn family(kind: u8, count: usize, seed: u64) -> Family {
    match kind % 3 {
        0 => Family::BoxEigenstates { count },
        1 => Family::RandomSlater { count, seed },
        _ => Family::GaussianBumps { count, seed },
    }
}

fn state(d: usize, kind: u8, count: usize, seed: u64) -> OrbitalSet {
    generate(&family(kind, count, seed), &Grid::unit(d, grid_n(d)).unwrap()).unwrap()
}

/// Every cube of side `2^-level` in the unit box.
fn cover(d: usize, level: u32) -> Vec<DyadicCube> {
    let per_axis = 1usize << level;
    let side = 1.0 / per_axis as f64;
    (0..per_axis.pow(d as u32))
        .map(|flat| {
            let corner = (0..d).map(|a| ((flat / per_axis.pow(a as u32)) % per_axis) as f64 * side).collect();
            DyadicCube::new(corner, side, level, 0.0)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hoffmann_ostenhof_holds(d in 1usize..=3, kind in 0u8..3, count in 1usize..6, seed in 0u64..1000) {
        let s = state(d, kind, count, seed);
        let ho = hoffmann_ostenhof_check(&s);
        prop_assert!(ho.slack >= -1e-8 * ho.lhs, "{ho:?}");
    }

    #[test]
    fn local_quantities_add_up(d in 1usize..=3, kind in 0u8..3, count in 1usize..5, seed in 0u64..1000, level in 0u32..3) {
        let s = state(d, kind, count, seed);
        let cubes = cover(d, level);
        let kinetic: f64 = cubes.iter().map(|c| local_kinetic_energy(&s, c).unwrap()).sum();
        let mass: f64 = cubes.iter().map(|c| local_mass(s.density(), c).unwrap()).sum();
        prop_assert!((kinetic - s.kinetic_energy()).abs() <= 1e-6 * s.kinetic_energy());
        prop_assert!((mass - s.trace()).abs() <= 1e-10 * s.trace());
    }

    #[test]
    fn occupations_scale_linearly(d in 1usize..=2, kind in 0u8..3, count in 1usize..5, seed in 0u64..1000, t in 0.05f64..1.0) {
        let s = state(d, kind, count, seed);
        let scaled = s.with_scaled_occupations(t).unwrap();
        prop_assert!((scaled.kinetic_energy() - t * s.kinetic_energy()).abs() <= 1e-12 * s.kinetic_energy());
        prop_assert!((scaled.density().mass() - t * s.trace()).abs() <= 1e-12 * s.trace());
        let ho = hoffmann_ostenhof_check(&scaled);
        prop_assert!(ho.slack >= -1e-8 * ho.lhs);
    }

    #[test]
    fn exact_local_bounds_hold_on_leaves(d in 1usize..=3, kind in 0u8..3, count in 1usize..5, seed in 0u64..1000, fraction in 0.1f64..0.6) {
        let s = state(d, kind, count, seed);
        let tree = subdivide(s.density(), fraction * s.trace()).unwrap();
        for leaf in tree.leaves() {
            let report = local_bound_check(&s, leaf, LocalBoundMode::ExactRiesz).unwrap();
            prop_assert!(report.holds_within(DISCRETIZATION_TOLERANCE), "{report:?}");
        }
    }

    #[test]
    fn partition_postconditions(d in 1usize..=3, values in prop::collection::vec(0.0f64..5.0, 4096), fraction in 0.002f64..1.0) {
        let n = [256, 32, 16][d - 1];
        let grid = Grid::unit(d, n).unwrap();
        let cells = grid.len();
        let rho = DensityField::new(grid, values[..cells].to_vec()).unwrap();
        prop_assume!(rho.mass() > 0.0);
        let max_cell = rho.values().iter().fold(0.0f64, |m, &v| m.max(v)) * rho.grid().cell_volume();
        let lambda = (fraction * rho.mass()).max(max_cell);
        let tree = subdivide(&rho, lambda).unwrap();
        prop_assert!(tree.leaves().all(|c| c.mass <= lambda));
        prop_assert!(tree.internal_ids().all(|i| tree.nodes[i].cube.mass > lambda));
        prop_assert_eq!(tree.leaf_mass_total(), tree.root().mass);
        let groups = group(&tree);
        prop_assert!(validate_groups(&tree, &groups).all_hold());
        let check = group_inequality_check(&groups, d, lambda);
        prop_assert!(check.per_group.iter().all(|&v| v >= 0.0));
        for b in &check.bounds {
            prop_assert!(b.max_base_term >= b.max_base_lower * (1.0 - 1e-12));
            prop_assert!(b.size_sum <= b.size_sum_upper * (1.0 + 1e-12));
        }
    }

    #[test]
    fn holder_pointwise(a in 0.0f64..100.0, b in 0.0f64..100.0, log_eps in -4.0f64..4.0, d in 1usize..=3) {
        let p = 2.0 + 4.0 / d as f64;
        let (lhs, rhs) = holder_pointwise_check(a, b, 10f64.powf(log_eps), p);
        prop_assert!(lhs >= rhs * (1.0 - 1e-12));
    }

    #[test]
    fn dilation_leaves_ratios_unchanged(d in 1usize..=2, kind in 0u8..3, count in 1usize..4, seed in 0u64..1000, s in 0.3f64..4.0, eps in 0.05f64..0.5) {
        let state = state(d, kind, count, seed);
        let dilated = state.dilated(s).unwrap();
        let (a, b) = (lt_ratio(&state).unwrap(), lt_ratio(&dilated).unwrap());
        prop_assert!((a - b).abs() <= 1e-6 * a);
        let ca = main_inequality_check(&state, eps, 1.0).unwrap().minimal_constant.unwrap();
        let cb = main_inequality_check(&dilated, eps, 1.0).unwrap().minimal_constant.unwrap();
        prop_assert!((ca - cb).abs() <= 1e-6 * ca.max(f64::MIN_POSITIVE));
    }
}

#[test]
fn box_energy_is_stable_under_refinement() {
    for count in [1, 5, 16] {
        let coarse = generate(&Family::BoxEigenstates { count }, &Grid::unit(1, 128).unwrap()).unwrap();
        let fine = generate(&Family::BoxEigenstates { count }, &Grid::unit(1, 256).unwrap()).unwrap();
        assert!((coarse.kinetic_energy() - fine.kinetic_energy()).abs() <= 1e-6 * fine.kinetic_energy());
    }
}

#[test]
fn rank_one_sobolev_ratio_is_bounded_below() {
    use ltlab::states::{gradient_term, thomas_fermi_term};
    let mut min = f64::INFINITY;
    for d in 1..=3 {
        for kind in 0..3 {
            for seed in 0..4 {
                let s = state(d, kind, 1, seed);
                let rho = s.density();
                min = min.min(gradient_term(rho) / thomas_fermi_term(rho));
            }
        }
    }
    assert!(min > 0.0 && min.is_finite());
}
