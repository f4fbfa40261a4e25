mod common;

use common::*;
use nsl::normality::{normality_report, normality_residual, Tolerances};
use nsl::sampler::PointSampler;
use nsl::*;

fn weak_max(sys: &SystemDefinition, points: usize, seed: u64) -> f64 {
    let pts = PointSampler::new(points, seed).sample(sys.dim());
    let rep = normality_report(sys, &canonical(sys), &pts, Tolerances::uniform(1e-8)).unwrap();
    assert_eq!(rep.violations(), 0, "max residual {:e}", rep.max_residual());
    rep.weak.unwrap().max
}

#[test]
fn modified_hamiltonians_are_weakly_normal() {
    for h in ["(p1^2+p2^2)/2", "sqrt(p1^2+p2^2)", "(p1^2+2*p2^2)/2 + x1"] {
        assert!(weak_max(&hamiltonian(h, 2), 100, 42) <= 1e-8, "{h}");
    }
}

#[test]
fn modified_hamiltonians_satisfy_additional_equations() {
    for h in ["(p1^2+p2^2+p3^2)/2", "sqrt(p1^2 + 2*p2^2 + p3^2/2)"] {
        let sys = hamiltonian(h, 3);
        let pts = PointSampler::new(100, 43).sample(3);
        let rep = normality_report(&sys, &canonical(&sys), &pts, Tolerances::uniform(1e-8)).unwrap();
        assert!(rep.passed, "{h}: {:e}", rep.max_residual());
        for row in &rep.rows {
            let r = row.residual.as_ref().unwrap();
            for part in [&r.add_a, &r.add_b, &r.add_c] {
                assert!(max_abs(part.as_ref().unwrap().iter()) <= 1e-8);
            }
        }
    }
}

/// The Riemannian example; momenta stay below 3, where the velocity map is
/// well conditioned enough for double precision.
#[test]
fn riemannian_example_passes_both_suites() {
    let sys = sys_riem3();
    let pts = PointSampler::new(100, 44).with_p_range(0.1, 3.0).sample(3);
    let rep = normality_report(&sys, &canonical(&sys), &pts, Tolerances::uniform(1e-7)).unwrap();
    assert!(rep.passed, "{:e}", rep.max_residual());
}

#[test]
fn geodesic_residuals_are_rounding_level() {
    let sys = sys_geo();
    for q in PointSampler::new(20, 1).sample(2) {
        let r = normality_residual(&sys, &canonical(&sys), &q).unwrap();
        assert!(r.max_abs <= 1e-12 * (1.0 + q.p_norm().powi(2)));
        assert!(r.add_a.is_none() && r.additional_max.is_none());
    }
}

#[test]
fn defective_system_fails() {
    let sys = sys_bad();
    let pts = PointSampler::new(20, 42).sample(2);
    let rep = normality_report(&sys, &canonical(&sys), &pts, Tolerances::uniform(1e-8)).unwrap();
    assert!(!rep.passed);
    assert!(rep.violations() > 0);
}

#[test]
fn report_csv_has_one_row_per_point() {
    let sys = sys_geo3();
    let pts = PointSampler::new(5, 2).sample(3);
    let rep = normality_report(&sys, &canonical(&sys), &pts, Tolerances::uniform(1e-8)).unwrap();
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].ends_with("addC_max,verdict"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",PASS")));
}

#[test]
fn empty_sample_is_an_error() {
    let sys = sys_geo();
    assert!(matches!(
        normality_report(&sys, &canonical(&sys), &[], Tolerances::uniform(1e-8)),
        Err(Error::EmptySampler)
    ));
}
