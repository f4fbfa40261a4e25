//! Per-point kinematics of a system in momentum representation.

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::fields::{parse_expression, Env, Expression, PhasePoint, Var};
use crate::jet::{invert, Jet, JetSpace};

/// Default cutoff for singular metrics, vanishing Omega and vanishing `W_v`.
pub const DEFAULT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Explicit {
        v: Vec<Expression>,
        theta: Vec<Expression>,
    },
    ModifiedHamiltonian {
        h: Expression,
    },
    /// Euclidean metric in Cartesian coordinates, so `p = v`.
    RiemannianEuclidean {
        w: Expression,
        h: Expression,
    },
}

/// A Newtonian system `dx/dt = V(x,p)`, `dp/dt = Θ(x,p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    n: usize,
    kind: SystemKind,
    pub cutoff: f64,
}

/// Jets of `V` and `Θ` about a point, both truncated at the same order.
#[derive(Debug, Clone)]
pub struct FieldJets {
    pub v: Vec<Jet>,
    pub theta: Vec<Jet>,
}

impl FieldJets {
    pub fn order(&self) -> usize {
        self.v[0].order()
    }

    pub fn truncate(&self, order: usize) -> FieldJets {
        FieldJets {
            v: self.v.iter().map(|j| j.truncate(order)).collect(),
            theta: self.theta.iter().map(|j| j.truncate(order)).collect(),
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!("dimension must be at least 2, got {n}")));
    }
    Ok(())
}

fn check_vars(e: &Expression, allowed: impl Fn(Var) -> bool, what: &str) -> Result<()> {
    let mut bad = None;
    e.visit_vars(&mut |v| {
        if !allowed(v) && bad.is_none() {
            bad = Some(v);
        }
    });
    match bad {
        Some(v) => Err(Error::Config(format!("variable `{v}` not allowed in {what}"))),
        None => Ok(()),
    }
}

fn phase_var(v: Var) -> bool {
    matches!(v, Var::X(_) | Var::P(_))
}

impl SystemDefinition {
    pub fn explicit(n: usize, v: Vec<Expression>, theta: Vec<Expression>) -> Result<Self> {
        check_dim(n)?;
        if v.len() != n || theta.len() != n {
            return Err(Error::Config(format!(
                "expected {n} components of V and Theta, got {} and {}",
                v.len(),
                theta.len()
            )));
        }
        for e in v.iter().chain(&theta) {
            check_vars(e, phase_var, "V/Theta")?;
        }
        Ok(SystemDefinition {
            n,
            kind: SystemKind::Explicit { v, theta },
            cutoff: DEFAULT_CUTOFF,
        })
    }

    /// Parses component strings.
    pub fn explicit_from_str(n: usize, v: &[&str], theta: &[&str]) -> Result<Self> {
        let v = v.iter().map(|s| parse_expression(s, n)).collect::<Result<Vec<_>, _>>()?;
        let theta = theta
            .iter()
            .map(|s| parse_expression(s, n))
            .collect::<Result<Vec<_>, _>>()?;
        SystemDefinition::explicit(n, v, theta)
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Jets of `V` and `Θ` at `q` truncated at `order`.
    pub fn field_jets(&self, q: &PhasePoint, order: usize) -> Result<FieldJets> {
        let n = self.n;
        match &self.kind {
            SystemKind::Explicit { v, theta } => {
                let (x, p) = q.jets(order);
                let env = Env::phase(&x, &p);
                Ok(FieldJets {
                    v: v.iter().map(|e| e.eval(&env)).collect::<Result<_, _>>()?,
                    theta: theta.iter().map(|e| e.eval(&env)).collect::<Result<_, _>>()?,
                })
            }
            SystemKind::ModifiedHamiltonian { h } => {
                let (x, p) = q.jets(order + 1);
                let hj = h.eval(&Env::phase(&x, &p))?;
                let dh_dp: Vec<Jet> = (0..n).map(|i| hj.partial(n + i)).collect();
                let mut den = dh_dp[0].zero_like();
                for i in 0..n {
                    den += &p[i] * &dh_dp[i];
                }
                if den.value().abs() < self.cutoff {
                    return Err(Error::DegenerateOmega { omega: den.value() });
                }
                let inv = den.recip();
                Ok(FieldJets {
                    v: dh_dp.iter().map(|d| d * &inv).collect(),
                    theta: (0..n).map(|i| -(&hj.partial(i) * &inv)).collect(),
                })
            }
            SystemKind::RiemannianEuclidean { w, h } => self.riemannian_jets(w, h, q, order),
        }
    }

    // F_i = h(W)/W_v p_i/|p| - sum_k (d_k W / W_v) (2 p_k p_i - |p|^2 delta_ki)/|p|,
    // W evaluated at v = |p|. The speed is an extra jet variable `s` with
    // v = |p| + s so that W_v comes out as an exact partial derivative.
    fn riemannian_jets(&self, w: &Expression, h: &Expression, q: &PhasePoint, order: usize) -> Result<FieldJets> {
        let n = self.n;
        let pn = q.p_norm();
        if pn == 0.0 {
            return Err(Error::ZeroMomentum);
        }
        let ext = JetSpace::get(2 * n + 1, order + 1);
        let xe: Vec<Jet> = (0..n).map(|i| Jet::variable(ext, i, q.x[i])).collect();
        let pe: Vec<Jet> = (0..n).map(|i| Jet::variable(ext, n + i, q.p[i])).collect();
        let mut norm2 = Jet::constant(ext, 0.0);
        for pi in &pe {
            norm2 += pi * pi;
        }
        let speed = &norm2.powf_series(0.5) + &Jet::variable(ext, 2 * n, 0.0);
        let env = Env {
            v: Some(&speed),
            ..Env::phase(&xe, &pe)
        };
        let wj = w.eval(&env)?;
        let wv = wj.partial(2 * n).restrict(2 * n);
        if wv.value().abs() < self.cutoff {
            return Err(Error::ZeroWv { value: wv.value() });
        }
        let grad: Vec<Jet> = (0..n).map(|k| wj.partial(k).restrict(2 * n)).collect();
        let w0 = wj.restrict(2 * n).truncate(order);

        let (x, p) = q.jets(order);
        let henv = Env {
            w: Some(&w0),
            ..Env::phase(&x, &p)
        };
        let hw = h.eval(&henv)?;
        let mut pn2 = Jet::constant(x[0].space(), 0.0);
        for pi in &p {
            pn2 += pi * pi;
        }
        let inv_norm = pn2.powf_series(-0.5);
        let inv_wv = wv.recip();
        let radial = &(&hw * &inv_wv) * &inv_norm;
        let gw: Vec<Jet> = grad.iter().map(|g| g * &inv_wv).collect();
        let mut theta = Vec::with_capacity(n);
        for i in 0..n {
            let mut fi = &radial * &p[i];
            let mut s = gw[0].zero_like();
            for k in 0..n {
                let mut t = &(&p[k] * &p[i]) * 2.0;
                if k == i {
                    t -= &pn2;
                }
                s += &gw[k] * &t;
            }
            fi -= &(&s * &inv_norm);
            theta.push(fi);
        }
        Ok(FieldJets { v: p, theta })
    }

    /// Right-hand side of the phase equations: `(V, Θ)`.
    pub fn phase_rhs(&self, q: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.field_jets(q, 0)?;
        Ok((
            f.v.iter().map(Jet::value).collect(),
            f.theta.iter().map(Jet::value).collect(),
        ))
    }
}

/// `V^i = H_{p_i}/Σ p_s H_{p_s}`, `Θ_i = -H_{x_i}/Σ p_s H_{p_s}`.
pub fn build_modified_hamiltonian(h: Expression, n: usize) -> Result<SystemDefinition> {
    check_dim(n)?;
    check_vars(&h, phase_var, "H")?;
    Ok(SystemDefinition {
        n,
        kind: SystemKind::ModifiedHamiltonian { h },
        cutoff: DEFAULT_CUTOFF,
    })
}

/// Euclidean Newtonian system with the force family built from `W(x, v)` and `h(w)`.
pub fn build_riemannian_euclidean(w: Expression, h: Expression, n: usize) -> Result<SystemDefinition> {
    check_dim(n)?;
    check_vars(&w, |v| matches!(v, Var::X(_) | Var::V), "W")?;
    check_vars(&h, |v| matches!(v, Var::W), "h")?;
    Ok(SystemDefinition {
        n,
        kind: SystemKind::RiemannianEuclidean { w, h },
        cutoff: DEFAULT_CUTOFF,
    })
}

/// Per-point bundle `V, g^{ir}, g_{ij}, W, Ω, P`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicFrame {
    pub v: Array1<f64>,
    pub g_up: Array2<f64>,
    pub g_down: Array2<f64>,
    pub w: Array1<f64>,
    pub omega: f64,
    pub p_proj: Array2<f64>,
    pub det_g: f64,
}

/// Metric pair from order-1 jets of V: `g_up[i][r] = ∂V^i/∂p_r` and its inverse.
pub(crate) fn metric_jets(v: &[Jet], n: usize, cutoff: f64) -> Result<(Vec<Vec<Jet>>, Vec<Vec<Jet>>, f64)> {
    let g: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|r| v[i].partial(n + r)).collect())
        .collect();
    let (inv, det) = invert(&g, cutoff).map_err(|e| Error::SingularMetric { det: e.det })?;
    Ok((g, inv, det))
}

/// `P^i_j = δ^i_j − W^i p_j / Ω`.
pub fn projector(w: &Array1<f64>, p: &[f64], omega: f64) -> Array2<f64> {
    let n = p.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - w[i] * p[j] / omega
    })
}

pub fn frame_at(sys: &SystemDefinition, q: &PhasePoint) -> Result<KinematicFrame> {
    let n = sys.dim();
    if q.p_norm() == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    let f = sys.field_jets(q, 1)?;
    let (g, inv, det) = metric_jets(&f.v, n, sys.cutoff)?;
    let g_up = Array2::from_shape_fn((n, n), |(i, r)| g[i][r].value());
    let g_down = Array2::from_shape_fn((n, n), |(r, i)| inv[r][i].value());
    let w = Array1::from_shape_fn(n, |s| (0..n).map(|r| g_up[[r, s]] * q.p[r]).sum::<f64>());
    let omega: f64 = (0..n).map(|s| q.p[s] * w[s]).sum();
    if omega.abs() < sys.cutoff {
        return Err(Error::DegenerateOmega { omega });
    }
    Ok(KinematicFrame {
        v: f.v.iter().map(Jet::value).collect(),
        p_proj: projector(&w, &q.p, omega),
        g_up,
        g_down,
        w,
        omega,
        det_g: det,
    })
}

/// One sampled point of a regularity check.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularitySample {
    pub point: PhasePoint,
    pub det_g: f64,
    pub min_v_norm: f64,
    pub omega: f64,
    pub metric_ok: bool,
    pub velocity_ok: bool,
    pub omega_ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub samples: Vec<RegularitySample>,
    pub passed: bool,
    pub note: &'static str,
}

pub const REGULARITY_NOTE: &str =
    "diffeomorphism checked as det g != 0 at samples: local evidence only, global injectivity not verified";

/// Samples the three regularity conditions. Item 2 is probed along the ray
/// `s·p` for `s` in {1, 0.1, 0.01}.
pub fn check_regularity(sys: &SystemDefinition, points: &[PhasePoint]) -> RegularityReport {
    let cutoff = sys.cutoff;
    let samples: Vec<RegularitySample> = points
        .iter()
        .map(|q| {
            let mut s = RegularitySample {
                point: q.clone(),
                det_g: f64::NAN,
                min_v_norm: f64::NAN,
                omega: f64::NAN,
                metric_ok: false,
                velocity_ok: false,
                omega_ok: false,
                error: None,
            };
            let mut min_v = f64::INFINITY;
            for scale in [1.0, 0.1, 0.01] {
                let mut qs = q.clone();
                qs.p.iter_mut().for_each(|v| *v *= scale);
                match sys.phase_rhs(&qs) {
                    Ok((v, _)) => min_v = min_v.min(v.iter().map(|a| a * a).sum::<f64>().sqrt()),
                    Err(e) => {
                        s.error.get_or_insert(e.to_string());
                        min_v = 0.0;
                    }
                }
            }
            s.min_v_norm = min_v;
            s.velocity_ok = min_v > cutoff;
            match sys.field_jets(q, 1).map(|f| {
                let n = sys.dim();
                let g: Vec<Vec<Jet>> = (0..n)
                    .map(|i| (0..n).map(|r| f.v[i].partial(n + r)).collect())
                    .collect();
                let det = invert(&g, 0.0).map(|(_, d)| d).unwrap_or(0.0);
                let omega: f64 = (0..n)
                    .map(|s| (0..n).map(|r| g[r][s].value() * q.p[r]).sum::<f64>() * q.p[s])
                    .sum();
                (det, omega)
            }) {
                Ok((det, omega)) => {
                    s.det_g = det;
                    s.omega = omega;
                    s.metric_ok = det.abs() >= cutoff;
                    s.omega_ok = omega.abs() >= cutoff;
                }
                Err(e) => s.error = Some(e.to_string()),
            }
            s
        })
        .collect();
    let passed = !samples.is_empty()
        && samples
            .iter()
            .all(|s| s.metric_ok && s.velocity_ok && s.omega_ok && s.error.is_none());
    RegularityReport {
        samples,
        passed,
        note: REGULARITY_NOTE,
    }
}

/// `Φ^k = Σ_i ∂V^k/∂x^i V^i + Σ_i ∂V^k/∂p_i Θ_i` from jets of order ≥ 1.
pub(crate) fn phi_jets(f: &FieldJets, n: usize) -> Vec<Jet> {
    (0..n)
        .map(|k| {
            let mut s = f.v[0].truncate(f.order() - 1).zero_like();
            for i in 0..n {
                s += &f.v[k].partial(i) * &f.v[i];
                s += &f.v[k].partial(n + i) * &f.theta[i];
            }
            s
        })
        .collect()
}

pub fn phi_pullback(sys: &SystemDefinition, q: &PhasePoint) -> Result<Vec<f64>> {
    let f = sys.field_jets(q, 1)?;
    Ok(phi_jets(&f, sys.dim()).iter().map(Jet::value).collect())
}

/// Canonical connection jets of order `fields.order() - 3`:
/// `Γ^k_ij = −½ Σ g_ri g_sj (∂²Φ^k/∂p_r∂p_s − Σ_α ∂²V^α/∂p_r∂p_s ∂Φ^k/∂v^α)`
/// with `∂/∂v^α = Σ_β g_βα ∂/∂p_β`.
pub(crate) fn canonical_gamma_jets(f: &FieldJets, n: usize, cutoff: f64) -> Result<Array3<Jet>> {
    let k_out = f.order().checked_sub(3).expect("canonical connection needs field jets of order >= 3");
    let phi = phi_jets(f, n);
    let vt: Vec<Jet> = f.v.iter().map(|j| j.truncate(k_out + 2)).collect();
    let (_, g, _) = metric_jets(&vt, n, cutoff)?;
    let dphi: Vec<Vec<Jet>> = phi
        .iter()
        .map(|ph| (0..n).map(|b| ph.partial(n + b)).collect())
        .collect();
    let phiv: Vec<Vec<Jet>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|a| {
                    let mut s = dphi[k][0].zero_like();
                    for b in 0..n {
                        s += &g[b][a] * &dphi[k][b];
                    }
                    s
                })
                .collect()
        })
        .collect();
    let ddv: Vec<Vec<Vec<Jet>>> = vt
        .iter()
        .map(|va| {
            (0..n)
                .map(|r| (0..n).map(|s| va.partial(n + r).partial(n + s)).collect())
                .collect()
        })
        .collect();
    let zero = Jet::constant(JetSpace::get(2 * n, k_out), 0.0);
    let mut gamma = Array3::from_elem((n, n, n), zero.clone());
    for k in 0..n {
        let mut m = vec![vec![zero.clone(); n]; n];
        for r in 0..n {
            for s in r..n {
                let mut t = dphi[k][r].partial(n + s);
                for a in 0..n {
                    t -= &ddv[a][r][s] * &phiv[k][a];
                }
                m[r][s] = t.clone();
                m[s][r] = t;
            }
        }
        for i in 0..n {
            for j in i..n {
                let mut acc = zero.clone();
                for r in 0..n {
                    let mut inner = zero.clone();
                    for s in 0..n {
                        inner += &g[s][j] * &m[r][s];
                    }
                    acc += &g[r][i] * &inner;
                }
                acc *= -0.5;
                gamma[[k, i, j]] = acc.clone();
                gamma[[k, j, i]] = acc;
            }
        }
    }
    Ok(gamma)
}

pub fn canonical_connection(sys: &SystemDefinition, q: &PhasePoint) -> Result<Array3<f64>> {
    let f = sys.field_jets(q, 3)?;
    Ok(canonical_gamma_jets(&f, sys.dim(), sys.cutoff)?.mapv(|j| j.value()))
}
