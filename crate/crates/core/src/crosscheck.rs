//! Independent numerical oracles: the canonical connection rebuilt from
//! finite differences in velocity variables, the Riemannian/Hamiltonian
//! trajectory correspondence, and jet-versus-difference probes.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::connection::{gauge_transform, ConnectionField, GaugeTensor};
use crate::dynamics::{integrate, weak_fields, ExtendedState, IntegratorConfig};
use crate::normality::{normality_residual, NormalityResidual};
use crate::error::{Error, Result};
use crate::fields::{evaluate_jet, finite_difference_probe, BinOp, Expression, Func, Node, PhasePoint, Var};
use crate::legendre::{build_modified_hamiltonian, build_riemannian_euclidean, frame_at, phi_pullback, SystemDefinition};

/// Solves `V(x, p) = v` for `p` by Newton iteration from `guess`.
pub fn invert_velocity(sys: &SystemDefinition, x: &[f64], v: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    let mut p = guess.to_vec();
    let scale = 1.0 + v.iter().map(|a| a.abs()).fold(0.0, f64::max);
    for _ in 0..60 {
        let fr = frame_at(sys, &PhasePoint::new(x.to_vec(), p.clone()))?;
        let res: Vec<f64> = (0..n).map(|i| fr.v[i] - v[i]).collect();
        if res.iter().all(|r| r.abs() <= 1e-15 * scale) {
            return Ok(p);
        }
        // Δp_r = −Σ_i g_ri res^i
        for r in 0..n {
            p[r] -= (0..n).map(|i| fr.g_down[[r, i]] * res[i]).sum::<f64>();
        }
        if p.iter().any(|a| !a.is_finite()) {
            break;
        }
    }
    let fr = frame_at(sys, &PhasePoint::new(x.to_vec(), p.clone()))?;
    let worst = (0..n).map(|i| (fr.v[i] - v[i]).abs()).fold(0.0, f64::max);
    if worst <= 1e-12 * scale {
        Ok(p)
    } else {
        Err(Error::Config(format!("velocity inversion did not converge (residual {worst:e})")))
    }
}

const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// `Γ^k_ij = −½ ∂²Φ^k/∂v^i∂v^j` with `Φ(x, v) = Φ(x, p(x, v))` and `p(x, v)`
/// obtained by inverting `V` at fixed `x`. Second derivatives use nested
/// fourth-order central differences.
pub fn gamma_oracle(sys: &SystemDefinition, q: &PhasePoint) -> Result<Array3<f64>> {
    let n = sys.dim();
    let v0 = frame_at(sys, q)?.v.to_vec();
    let h = 2e-3 * v0.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
    let phi_at = |dv: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut v = v0.clone();
        for &(i, d) in dv {
            v[i] += d;
        }
        let p = invert_velocity(sys, &q.x, &v, &q.p)?;
        phi_pullback(sys, &PhasePoint::new(q.x.clone(), p))
    };
    let mut out = Array3::zeros((n, n, n));
    for i in 0..n {
        for j in i..n {
            let mut acc = vec![0.0; n];
            for &(a, wa) in &STENCIL {
                for &(b, wb) in &STENCIL {
                    let phi = phi_at(&[(i, a * h), (j, b * h)])?;
                    for k in 0..n {
                        acc[k] += wa * wb * phi[k];
                    }
                }
            }
            for k in 0..n {
                let d2 = acc[k] / (144.0 * h * h);
                out[[k, i, j]] = -0.5 * d2;
                out[[k, j, i]] = -0.5 * d2;
            }
        }
    }
    Ok(out)
}

/// Largest entry of `|Γ_canonical − Γ_oracle|` at `q`, and the largest `|Γ_canonical|`.
pub fn gamma_gap(sys: &SystemDefinition, q: &PhasePoint) -> Result<(f64, f64)> {
    let canon = ConnectionField::canonical(sys).gamma(q)?;
    let oracle = gamma_oracle(sys, q)?;
    let gap = canon.iter().zip(oracle.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((gap, canon.iter().fold(0.0, |m, v| m.max(v.abs()))))
}

/// `H(x, p) = W(x, 1/|p|)`.
pub fn hamiltonian_of_riemannian(w: &Expression, n: usize) -> Expression {
    let square = |i: usize| Node::Bin(BinOp::Pow, Box::new(Node::Var(Var::P(i))), Box::new(Node::Num(2.0)));
    let sum = (1..n).fold(square(0), |acc, i| Node::Bin(BinOp::Add, Box::new(acc), Box::new(square(i))));
    let inv_norm = Node::Bin(
        BinOp::Div,
        Box::new(Node::Num(1.0)),
        Box::new(Node::Call(Func::Sqrt, vec![sum])),
    );
    Expression::from_node(w.node().substitute(Var::V, &inv_norm))
}

/// Largest coordinate gap between the force-free-of-`h` Riemannian flow of `W`
/// started at velocity `p0/|p0|²` and the modified Hamiltonian flow of
/// `H = W(x, 1/|p|)` started at `p0`, over every recorded step.
pub fn riemannian_hamiltonian_gap(w: &Expression, n: usize, q0: &PhasePoint, cfg: &IntegratorConfig) -> Result<f64> {
    let zero = Expression::from_node(Node::Num(0.0));
    let riem = build_riemannian_euclidean(w.clone(), zero, n)?;
    let ham = build_modified_hamiltonian(hamiltonian_of_riemannian(w, n), n)?;
    let pn2: f64 = q0.p.iter().map(|a| a * a).sum();
    if pn2 == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    let v0: Vec<f64> = q0.p.iter().map(|a| a / pn2).collect();
    let zero_conn = ConnectionField::Zero { n };
    let tr = integrate(&riem, &zero_conn, &ExtendedState::new(PhasePoint::new(q0.x.clone(), v0)), cfg)?;
    let th = integrate(&ham, &zero_conn, &ExtendedState::new(q0.clone()), cfg)?;
    Ok(tr
        .states
        .iter()
        .zip(&th.states)
        .flat_map(|(a, b)| a.q.x.iter().zip(&b.q.x).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max))
}

/// Largest relative gap `|jet − difference|/(1 + |difference|)` over all
/// first and second partials of `expr` at `q`. Steps along momentum axes
/// shrink with `|p|`, the distance to the singularity most fields carry.
pub fn jet_probe_gap(expr: &Expression, q: &PhasePoint) -> Result<f64> {
    let jet = evaluate_jet(expr, q, 2)?;
    let m = 2 * q.dim();
    let pscale = q.p_norm().clamp(1e-3, 1.0);
    let scale = |a: usize| if a < q.dim() { 1.0 } else { pscale };
    let mut worst: f64 = 0.0;
    let mut check = |idx: &[usize], step: f64| -> Result<()> {
        let fd = finite_difference_probe(expr, q, idx, step)?;
        worst = worst.max((jet.derivative(idx) - fd).abs() / (1.0 + fd.abs()));
        Ok(())
    };
    for a in 0..m {
        check(&[a], 1e-6 * scale(a))?;
        for b in a..m {
            check(&[a, b], 1e-4 * scale(a).min(scale(b)))?;
        }
    }
    Ok(worst)
}

/// Worst changes seen while shifting a connection by random gauge tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeReport {
    pub gauges: usize,
    pub alpha_change: f64,
    pub residual_change: f64,
}

fn residual_entries(r: &NormalityResidual) -> Vec<f64> {
    let mut v: Vec<f64> = r.weak1.iter().chain(r.weak2.iter()).copied().collect();
    for m in [&r.add_a, &r.add_b, &r.add_c].into_iter().flatten() {
        v.extend(m.iter());
    }
    v
}

/// Applies gauge `k` (drawn from a ChaCha stream seeded with `seed`) at
/// `points[k]` and compares `α` and every normality residual with the
/// unshifted connection.
pub fn gauge_invariance(sys: &SystemDefinition, conn: &ConnectionField, points: &[PhasePoint], seed: u64) -> Result<GaugeReport> {
    if points.is_empty() {
        return Err(Error::EmptySampler);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GaugeReport {
        gauges: points.len(),
        alpha_change: 0.0,
        residual_change: 0.0,
    };
    for q in points {
        let shifted = gauge_transform(conn, &GaugeTensor::random(sys.dim(), &mut rng))?;
        let (a0, a1) = (weak_fields(sys, conn, q)?.alpha, weak_fields(sys, &shifted, q)?.alpha);
        rep.alpha_change = a0.iter().zip(&a1).map(|(u, v)| (u - v).abs()).fold(rep.alpha_change, f64::max);
        let r0 = residual_entries(&normality_residual(sys, conn, q)?);
        let r1 = residual_entries(&normality_residual(sys, &shifted, q)?);
        rep.residual_change = r0.iter().zip(&r1).map(|(u, v)| (u - v).abs()).fold(rep.residual_change, f64::max);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expression;

    #[test]
    fn hamiltonian_substitution() {
        let w = parse_expression("v + x1*v^2/10", 2).unwrap();
        let h = hamiltonian_of_riemannian(&w, 2);
        let q = PhasePoint::new(vec![0.5, 0.0], vec![3.0, 4.0]);
        let got = evaluate_jet(&h, &q, 0).unwrap().value();
        assert!((got - (0.2 + 0.5 * 0.04 / 10.0)).abs() < 1e-15);
    }

    #[test]
    fn newton_inverts_geodesic_velocity() {
        let sys = build_modified_hamiltonian(parse_expression("(p1^2+p2^2)/2", 2).unwrap(), 2).unwrap();
        let p = invert_velocity(&sys, &[0.0, 0.0], &[0.12, 0.16], &[2.0, 2.0]).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 4.0).abs() < 1e-12);
    }
}
