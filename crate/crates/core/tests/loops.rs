use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relkep::circular::circular_orbit;
use relkep::loops::{
    discrete_action, discrete_action_gradient, min_radius, resample, sup_bound_check,
    winding_number,
};
use relkep::rosette::{rosette_action, rosette_orbit};
use relkep::varsolver::HarmonicForcing;
use relkep::{ForcedPotential, Loop, PhysicalParams, ProblemSpec, Vec2};

/// A smooth loop winding `k` times: a circle of radius `rho` plus a few
/// random low harmonics, slow enough to stay well inside the speed bound.
fn random_loop(rng: &mut ChaCha8Rng, n: usize, k: i64, period: f64) -> Loop {
    let rho = rng.random_range(0.5..1.5);
    let coeffs: Vec<(f64, Vec2)> = (-3..=3)
        .map(|j| (j as f64, Vec2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)) * rho))
        .collect();
    let nodes = (0..n)
        .map(|m| {
            let phase = 2.0 * PI * m as f64 / n as f64;
            coeffs.iter().fold(Vec2::polar(rho, k as f64 * phase), |acc, (j, a)| acc + a.rotate(j * phase))
        })
        .collect();
    Loop::new(period, nodes).unwrap()
}

fn with_node(lp: &Loop, j: usize, x: Vec2) -> Loop {
    let mut nodes = lp.nodes().to_vec();
    nodes[j] = x;
    Loop::new(lp.period(), nodes).unwrap()
}

#[test]
fn gradient_matches_finite_differences_on_random_loops() {
    let p = PhysicalParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let forcing = HarmonicForcing::new(0.05, 2, 0.3, Vec2::new(0.6, 0.8), 40.0);
    for case in 0..20 {
        let k = [1, 2, -1, 3][case % 4];
        let lp = random_loop(&mut rng, 64, k, 40.0);
        let potential: Option<&dyn ForcedPotential> = if case % 2 == 0 { Some(&forcing) } else { None };
        let g = discrete_action_gradient(&p, &lp, potential).unwrap();
        let h = 1e-7;
        let gnorm = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for j in (0..lp.len()).step_by(7) {
            for axis in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
                let x = lp.nodes()[j];
                let up = discrete_action(&p, &with_node(&lp, j, x + axis * h), potential).total;
                let down = discrete_action(&p, &with_node(&lp, j, x - axis * h), potential).total;
                let fd = (up - down) / (2.0 * h);
                let exact = g[j].dot(axis);
                assert!((fd - exact).abs() <= 1e-5 * gnorm, "case {case} node {j}: {fd} vs {exact}");
            }
        }
    }
}

#[test]
fn rosette_action_at_fine_resolution() {
    let s = ProblemSpec::normalized(8.0 * PI, 2).unwrap();
    let lp = rosette_orbit(&s, 1).unwrap().sample_loop(4096).unwrap();
    let a = discrete_action(&s.params, &lp, None).total;
    assert!((a / rosette_action(&s, 1).unwrap() - 1.0).abs() < 1e-5);
    assert!((a / 24.242_796_841_911 - 1.0).abs() < 1e-9);
    assert!(sup_bound_check(&s.params, &lp));
    assert!(relkep::loops::max_radius(&lp) < 3.687);
}

#[test]
fn spectral_convergence_on_rosette_loops() {
    let s = ProblemSpec::normalized(8.0 * PI, 2).unwrap();
    let orbit = rosette_orbit(&s, 1).unwrap();
    let exact = rosette_action(&s, 1).unwrap();
    let err = |n: usize| {
        let lp = orbit.sample_loop(n).unwrap();
        (discrete_action(&s.params, &lp, None).total - exact).abs() / exact
    };
    // The error is visible only below N = 256; above it sits at rounding level.
    let (e64, e128) = (err(64), err(128));
    assert!(e128 < e64 * 2f64.powi(-4) * 1e-3, "{e64} {e128}");
    for n in [256, 512, 1024, 2048] {
        assert!(err(n) < 1e-13, "{n}: {}", err(n));
    }
}

#[test]
fn circular_loop_resolution_independence() {
    let s = ProblemSpec::normalized(4.0 * PI, 1).unwrap();
    let orbit = circular_orbit(&s).unwrap();
    for n in [16, 64, 256] {
        let a = discrete_action(&s.params, &orbit.sample_loop(n).unwrap(), None).total;
        assert!((a / (4.0 * PI) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_is_rotation_equivariant(seed in any::<u64>(), angle in 0.0..6.283f64) {
        let p = PhysicalParams::default();
        let lp = random_loop(&mut ChaCha8Rng::seed_from_u64(seed), 64, 2, 30.0);
        let g = discrete_action_gradient(&p, &lp, None).unwrap();
        let gr = discrete_action_gradient(&p, &lp.rotated(angle), None).unwrap();
        for (a, b) in g.iter().zip(&gr) {
            prop_assert!((a.rotate(angle) - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn unforced_action_is_time_translation_invariant(seed in any::<u64>(), shift in -20.0..20.0f64) {
        // Time-shifting the trigonometric interpolant is exact for
        // band-limited loops, so the sampled action is unchanged.
        let p = PhysicalParams::default();
        let lp = random_loop(&mut ChaCha8Rng::seed_from_u64(seed), 256, 1, 30.0);
        let a = discrete_action(&p, &lp, None).total;
        let b = discrete_action(&p, &lp.time_shifted(shift), None).total;
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn winding_survives_resampling_and_small_perturbations(
        seed in any::<u64>(), k in -3i64..=3, target in 64usize..400,
    ) {
        prop_assume!(k != 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_loop(&mut rng, 256, k, 10.0);
        prop_assert_eq!(winding_number(&lp).unwrap(), k);
        prop_assert_eq!(winding_number(&resample(&lp, target).unwrap()).unwrap(), k);
        // Any perturbation below min_radius/2 keeps the class.
        let bound = 0.49 * min_radius(&lp);
        let nodes = lp
            .nodes()
            .iter()
            .map(|x| *x + Vec2::from_angle(rng.random_range(0.0..6.283)) * rng.random_range(0.0..bound))
            .collect();
        let perturbed = Loop::new(10.0, nodes).unwrap();
        prop_assert_eq!(winding_number(&perturbed).unwrap(), k);
    }
}
