#![allow(dead_code)]

use nsl::connection::ConnectionField;
use nsl::hypersurface::{pfaff_rhs, Hypersurface};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use nsl::*;

pub fn hamiltonian(h: &str, n: usize) -> SystemDefinition {
    build_modified_hamiltonian(parse_expression(h, n).unwrap(), n).unwrap()
}

pub fn explicit(n: usize, v: &[&str], theta: &[&str]) -> SystemDefinition {
    SystemDefinition::explicit_from_str(n, v, theta).unwrap()
}

pub fn sys_id() -> SystemDefinition {
    explicit(2, &["p1", "p2"], &["0", "0"])
}

pub fn sys_id3() -> SystemDefinition {
    explicit(3, &["p1", "p2", "p3"], &["0", "0", "0"])
}

pub fn sys_geo() -> SystemDefinition {
    hamiltonian("(p1^2+p2^2)/2", 2)
}

pub fn sys_geo3() -> SystemDefinition {
    hamiltonian("(p1^2+p2^2+p3^2)/2", 3)
}

pub fn sys_bad() -> SystemDefinition {
    explicit(2, &["p1", "p2"], &["p2^2", "0"])
}

pub fn sys_bad3() -> SystemDefinition {
    explicit(3, &["p1", "p2", "p3"], &["p2^2", "0", "0"])
}

/// Modified Hamiltonian system with a potential and an anisotropic kinetic part.
pub fn sys_aniso() -> SystemDefinition {
    hamiltonian("(p1^2+2*p2^2)/2 + x1", 2)
}

pub fn sys_aniso3() -> SystemDefinition {
    hamiltonian("(p1^2+2*p2^2+3*p3^2)/2 + x1/2", 3)
}

pub fn riem_w() -> Expression {
    parse_expression("v + x1*v^2/10", 3).unwrap()
}

pub fn sys_riem3() -> SystemDefinition {
    build_riemannian_euclidean(riem_w(), parse_expression("w/5", 3).unwrap(), 3).unwrap()
}

pub fn canonical(sys: &SystemDefinition) -> ConnectionField {
    ConnectionField::canonical(sys)
}

pub fn circle(grid: usize) -> Hypersurface {
    Hypersurface::from_strings(2, &["cos(y1)", "sin(y1)"], vec![(-1.0, 1.0)], vec![grid]).unwrap()
}

pub fn line() -> Hypersurface {
    Hypersurface::from_strings(2, &["y1", "0"], vec![(-1.0, 1.0)], vec![5]).unwrap()
}

pub fn sphere(grid: usize) -> Hypersurface {
    Hypersurface::from_strings(
        3,
        &["cos(y1)*cos(y2)", "sin(y1)*cos(y2)", "sin(y2)"],
        vec![(-0.5, 0.5), (-0.5, 0.5)],
        vec![grid, grid],
    )
    .unwrap()
}

pub fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn random_trig_surface(rng: &mut ChaCha8Rng) -> Hypersurface {
    let mut c = || rng.gen_range(-0.4..0.4);
    let e = [
        format!("y1 + {}*sin(y2) + {}*cos(y1)", c(), c()),
        format!("y2 + {}*cos(y1) + {}*sin(y1)*sin(y2)", c(), c()),
        format!("1 + {}*sin(y1)*cos(y2) + {}*cos(2*y2)", c(), c()),
    ];
    let e: Vec<&str> = e.iter().map(String::as_str).collect();
    Hypersurface::from_strings(3, &e, vec![(-0.5, 0.5), (-0.5, 0.5)], vec![3, 3]).unwrap()
}

/// `dψ_i/dy^j` with `ν` carried along the Pfaff system: partial in `y^j` plus
/// `∂ψ_i/∂ν · ψ_j`, both by fourth-order central differences.
pub fn total_derivatives(sys: &SystemDefinition, surf: &Hypersurface, y: &[f64], nu: f64) -> Vec<Vec<f64>> {
    let conn = canonical(sys);
    let m = y.len();
    let psi = |y: &[f64], nu: f64| pfaff_rhs(sys, &conn, surf, y, nu).unwrap();
    let d = |f: &dyn Fn(f64) -> Vec<f64>, h: f64| -> Vec<f64> {
        let (a, b, c, e) = (f(-2.0 * h), f(-h), f(h), f(2.0 * h));
        (0..m).map(|i| (a[i] - 8.0 * b[i] + 8.0 * c[i] - e[i]) / (12.0 * h)).collect()
    };
    let psi0 = psi(y, nu);
    let dnu = d(&|s| psi(y, nu + s), 1e-3 * nu);
    let mut out = vec![vec![0.0; m]; m];
    for j in 0..m {
        let dy = d(
            &|s| {
                let mut z = y.to_vec();
                z[j] += s;
                psi(&z, nu)
            },
            1e-3,
        );
        for i in 0..m {
            out[i][j] = dy[i] + dnu[i] * psi0[j];
        }
    }
    out
}
