mod common;

use common::*;
use nsl::connection::ConnectionField;
use nsl::dynamics::IntegratorConfig;
use nsl::hypersurface::*;
use nsl::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn circle_under_identity_has_unit_curvature() {
    let sys = sys_id();
    let conn = ConnectionField::Zero { n: 2 };
    for y in [-0.9, -0.3, 0.0, 0.4, 1.0] {
        for nu in [0.5, 1.0, 3.0] {
            let f = surface_frame(&sys, &conn, &circle(9), &[y], nu).unwrap();
            assert!((f.b[[0, 0]] + 1.0).abs() <= 1e-10, "y={y} nu={nu}: {}", f.b[[0, 0]]);
            assert!((f.normal[0] - y.cos()).abs() < 1e-14 && (f.normal[1] - y.sin()).abs() < 1e-14);
        }
    }
}

#[test]
fn line_is_flat() {
    let f = surface_frame(&sys_geo(), &canonical(&sys_geo()), &line(), &[0.2], 1.7).unwrap();
    assert_eq!(f.b[[0, 0]], 0.0);
    assert_eq!(f.normal, vec![0.0, 1.0]);
}

#[test]
fn second_fundamental_form_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let systems = [sys_geo3(), sys_aniso3(), sys_riem3()];
    for k in 0..20 {
        let surf = random_trig_surface(&mut rng);
        let sys = &systems[k % systems.len()];
        let conn = canonical(sys);
        let y = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let nu = rng.gen_range(0.5..2.0);
        let f = surface_frame(sys, &conn, &surf, &y, nu).unwrap();
        assert!((f.b[[0, 1]] - f.b[[1, 0]]).abs() <= 1e-8, "surface {k}: {:?}", f.b);
    }
}

#[test]
fn geodesic_frame_is_independent_of_nu() {
    let sys = sys_geo3();
    let conn = canonical(&sys);
    let surf = sphere(3);
    let a = surface_frame(&sys, &conn, &surf, &[0.1, -0.2], 1.0).unwrap();
    for nu in [0.5, 2.0, 7.0] {
        let b = surface_frame(&sys, &conn, &surf, &[0.1, -0.2], nu).unwrap();
        assert!(max_abs((&a.b - &b.b).iter()) <= 1e-10);
    }
}

#[test]
fn compatibility_matches_mixed_partials() {
    let surf = sphere(3);
    let sys = sys_bad3();
    let conn = canonical(&sys);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..8 {
        let y = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let nu = rng.gen_range(0.5..2.0);
        let r = compatibility_residual(&sys, &conn, &surf, &y, nu).unwrap();
        let d = total_derivatives(&sys, &surf, &y, nu);
        let want = d[0][1] - d[1][0];
        assert!(want.abs() > 1e-3, "oracle vanishes at {y:?}");
        assert!((r[[0, 1]] - want).abs() <= 1e-5 * want.abs(), "{} vs {want}", r[[0, 1]]);
        assert_eq!(r[[1, 0]], -r[[0, 1]]);
        assert_eq!(r[[0, 0]], 0.0);
    }
}

#[test]
fn compatibility_vanishes_on_compliant_systems() {
    let surf = sphere(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sys in [sys_geo3(), sys_aniso3(), sys_riem3()] {
        let conn = canonical(&sys);
        for _ in 0..5 {
            let y = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let r = compatibility_residual(&sys, &conn, &surf, &y, rng.gen_range(0.5..2.0)).unwrap();
            assert!(max_abs(r.iter()) <= 1e-8, "{r:?}");
        }
    }
}

#[test]
fn geodesic_nu_is_constant() {
    let sys = sys_geo3();
    let surf = sphere(5);
    let sol = solve_nu(&sys, &canonical(&sys), &surf, &[0.0, 0.0], 1.5).unwrap();
    assert_eq!(sol.origin, vec![2, 2]);
    assert!(sol.values.iter().all(|v| (v - 1.5).abs() <= 1e-12));
}

#[test]
fn two_path_residual_is_fourth_order() {
    let sys = sys_aniso3();
    let conn = canonical(&sys);
    let res: Vec<f64> = [5, 9, 17]
        .iter()
        .map(|&g| solve_nu(&sys, &conn, &sphere(g), &[0.0, 0.0], 1.0).unwrap().path_residual)
        .collect();
    for w in res.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.5, "residuals {res:?}");
    }
}

#[test]
fn solve_nu_rejects_off_grid_origin_and_zero_nu() {
    let sys = sys_geo3();
    let conn = canonical(&sys);
    assert!(solve_nu(&sys, &conn, &sphere(3), &[0.1, 0.0], 1.0).is_err());
    assert!(matches!(solve_nu(&sys, &conn, &sphere(3), &[0.0, 0.0], 0.0), Err(Error::NuVanished { .. })));
}

#[test]
fn identity_shift_of_circle_is_parallel() {
    let sys = sys_id();
    let run = simulate_shift(&sys, &ConnectionField::Zero { n: 2 }, &circle(9), NuSource::Constant(1.0), &IntegratorConfig::default()).unwrap();
    for nd in &run.nodes {
        for s in &nd.trajectory.states {
            let r = s.q.x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - (1.0 + s.t)).abs() <= 1e-8);
        }
    }
    assert!(run.max_deviation() <= 1e-8);
}

#[test]
fn geodesic_shifts_stay_orthogonal() {
    let cfg = IntegratorConfig::default();
    let geo = sys_geo();
    let sol = solve_nu(&geo, &canonical(&geo), &circle(9), &[0.0], 1.0).unwrap();
    let run = simulate_shift(&geo, &canonical(&geo), &circle(9), NuSource::Solved(&sol), &cfg).unwrap();
    assert_eq!(verify_orthogonality(&run, 1e-6).verdict, Orthogonality::Normal);

    let geo3 = sys_geo3();
    let sol = solve_nu(&geo3, &canonical(&geo3), &sphere(3), &[0.0, 0.0], 1.0).unwrap();
    let run = simulate_shift(&geo3, &canonical(&geo3), &sphere(3), NuSource::Solved(&sol), &cfg).unwrap();
    assert!(run.max_deviation() <= 1e-6);
}

#[test]
fn defective_shift_loses_orthogonality() {
    let sys = sys_bad();
    let run = simulate_shift(&sys, &canonical(&sys), &circle(9), NuSource::Constant(1.0), &IntegratorConfig::default()).unwrap();
    let rep = verify_orthogonality(&run, 1e-6);
    assert!(matches!(rep.verdict, Orthogonality::Violation { .. }));
    assert!(rep.max() > 1e-2);
}

#[test]
fn mismatched_solution_grid_is_rejected() {
    let geo = sys_geo();
    let sol = solve_nu(&geo, &canonical(&geo), &circle(5), &[0.0], 1.0).unwrap();
    let r = simulate_shift(&geo, &canonical(&geo), &circle(9), NuSource::Solved(&sol), &IntegratorConfig::default());
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn pfaff_rhs_vanishes_on_classical_examples() {
    let id = sys_id();
    let zero = ConnectionField::Zero { n: 2 };
    let geo = sys_geo();
    for y in [-0.7, 0.0, 0.3] {
        assert_eq!(pfaff_rhs(&id, &zero, &circle(9), &[y], 1.0).unwrap(), vec![0.0]);
        assert!(pfaff_rhs(&geo, &canonical(&geo), &circle(9), &[y], 1.0).unwrap()[0].abs() <= 1e-10);
        for nu in [0.3, 1.0, 4.0] {
            assert_eq!(pfaff_rhs(&id, &zero, &line(), &[y], nu).unwrap(), vec![0.0]);
        }
    }
}

#[test]
fn solve_nu_examples() {
    let id = sys_id();
    let sol = solve_nu(&id, &ConnectionField::Zero { n: 2 }, &circle(9), &[0.0], 1.0).unwrap();
    assert!(sol.values.iter().all(|&v| v == 1.0));
    assert!(sol.path_residual <= 1e-12);

    let geo3 = sys_geo3();
    let sol = solve_nu(&geo3, &canonical(&geo3), &sphere(5), &[0.0, 0.0], 2.0).unwrap();
    assert!(sol.path_residual <= 1e-8);

    let bad3 = sys_bad3();
    let sol = solve_nu(&bad3, &canonical(&bad3), &sphere(5), &[0.0, 0.0], 1.0).unwrap();
    assert!(sol.path_residual > 1e-4);
}

#[test]
fn identity_sphere_frames() {
    let id3 = sys_id3();
    let zero = ConnectionField::Zero { n: 3 };
    let surf = sphere(3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let y = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let f = surface_frame(&id3, &zero, &surf, &y, 1.0).unwrap();
        assert!((f.b[[0, 1]] - f.b[[1, 0]]).abs() <= 1e-10);
        for tau in &f.taus {
            let dot: f64 = tau.iter().zip(&f.normal).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-12);
        }
    }
}

#[test]
fn deviations_start_at_zero() {
    let sys = sys_aniso3();
    let conn = canonical(&sys);
    let sol = solve_nu(&sys, &conn, &sphere(3), &[0.0, 0.0], 1.0).unwrap();
    let run = simulate_shift(&sys, &conn, &sphere(3), NuSource::Solved(&sol), &IntegratorConfig::new(1e-2, 0.05)).unwrap();
    for nd in &run.nodes {
        assert!(nsl::dynamics::deviation(&nd.trajectory.states[0]).iter().all(|v| v.abs() <= 1e-12));
    }
}

/// Rescaling the normal by `c` and `ν0` by `1/c` leaves `p(0)`, the
/// trajectories and every `φ_i` unchanged.
#[test]
fn normal_scale_is_invisible() {
    let sys = sys_aniso3();
    let conn = canonical(&sys);
    let cfg = IntegratorConfig::new(1e-2, 0.5);
    let run = |c: f64| {
        let surf = sphere(3).with_normal_scale(c);
        let sol = solve_nu(&sys, &conn, &surf, &[0.0, 0.0], 1.5 / c).unwrap();
        simulate_shift(&sys, &conn, &surf, NuSource::Solved(&sol), &cfg).unwrap()
    };
    let base = run(1.0);
    for c in [0.5, 3.0] {
        let other = run(c);
        for (a, b) in base.nodes.iter().zip(&other.nodes) {
            assert!((a.nu - c * b.nu).abs() <= 1e-10 * a.nu.abs());
            for (s, t) in a.trajectory.states.iter().zip(&b.trajectory.states) {
                let gap = s.q.x.iter().zip(&t.q.x).chain(s.q.p.iter().zip(&t.q.p)).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                assert!(gap <= 1e-10, "c={c}: {gap:e}");
                let (pa, pb) = (nsl::dynamics::deviation(s), nsl::dynamics::deviation(t));
                assert!(pa.iter().zip(&pb).all(|(u, v)| (u - v).abs() <= 1e-10));
            }
        }
    }
}
