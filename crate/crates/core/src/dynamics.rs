//! Trajectories, variational equations, deviation functions and the weak
//! normality field bundle.

use std::io::Write;

use ndarray::{Array1, Array2, Array3};

use crate::connection::{curvatures_from_jets, force_jets, ConnectionField, CurvaturePair, JetTensor};
use crate::error::{Error, Result};
use crate::fields::PhasePoint;
use crate::jet::Jet;
use crate::legendre::{projector, SystemDefinition};

/// Every first-order geometric quantity at one phase point.
///
/// Two-index arrays of derivatives keep the differentiated field's index first:
/// `nabla_v[[i, k]] = ∇_k V^i`, `mgrad_v[[i, k]] = ∇̃^k V^i`, and likewise for
/// `W`, `Q` and `U`.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub point: PhasePoint,
    pub v: Array1<f64>,
    pub theta: Array1<f64>,
    pub w: Array1<f64>,
    pub omega: f64,
    pub p_proj: Array2<f64>,
    pub gamma: Array3<f64>,
    pub force: Array1<f64>,
    pub u: Array1<f64>,
    pub nabla_v: Array2<f64>,
    pub mgrad_v: Array2<f64>,
    pub nabla_w: Array2<f64>,
    pub mgrad_w: Array2<f64>,
    pub nabla_q: Array2<f64>,
    pub mgrad_q: Array2<f64>,
    pub nabla_u: Array2<f64>,
    pub mgrad_u: Array2<f64>,
    pub curv: CurvaturePair,
}

fn mat(t: &JetTensor, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, k)| t.get(&[i, k]).value())
}

impl LocalGeometry {
    pub fn new(sys: &SystemDefinition, conn: &ConnectionField, q: &PhasePoint) -> Result<LocalGeometry> {
        let n = sys.dim();
        if conn.dim() != n || q.dim() != n {
            return Err(Error::Config("dimension mismatch between system, connection and point".into()));
        }
        let fo = conn.field_order(1).unwrap_or(2).max(2);
        let fields = sys.field_jets(q, fo)?;
        let gamma = conn.gamma_jets(q, 1, Some(&fields))?;
        let f = fields.truncate(2);
        let (_, p) = q.jets(2);

        let w_jets: Vec<Jet> = (0..n)
            .map(|s| {
                let mut acc = f.v[0].truncate(1).zero_like();
                for r in 0..n {
                    acc += &f.v[r].partial(n + s) * &p[r];
                }
                acc
            })
            .collect();
        let omega: f64 = (0..n).map(|s| q.p[s] * w_jets[s].value()).sum();
        if omega.abs() < sys.cutoff {
            return Err(Error::DegenerateOmega { omega });
        }
        let q_jets = force_jets(&f, &gamma, &p);

        let vt = JetTensor::vector(f.v.clone());
        let nv = vt.covariant_derivative(&gamma, &p);
        let u_jets: Vec<Jet> = (0..n)
            .map(|s| {
                let mut acc = q_jets[s].clone();
                for r in 0..n {
                    acc += nv.get(&[r, s]) * &p[r];
                }
                acc
            })
            .collect();
        let g0 = gamma.mapv(|j| j.truncate(0));
        let wt = JetTensor::vector(w_jets);
        let qt = JetTensor::covector(q_jets);
        let ut = JetTensor::covector(u_jets);

        let w: Array1<f64> = wt_values(&wt, n);
        Ok(LocalGeometry {
            point: q.clone(),
            v: f.v.iter().map(Jet::value).collect(),
            theta: f.theta.iter().map(Jet::value).collect(),
            p_proj: projector(&w, &q.p, omega),
            w,
            omega,
            gamma: g0.mapv(|j| j.value()),
            force: (0..n).map(|i| qt.get(&[i]).value()).collect(),
            u: (0..n).map(|i| ut.get(&[i]).value()).collect(),
            nabla_v: mat(&nv, n),
            mgrad_v: mat(&vt.momentum_gradient(), n),
            nabla_w: mat(&wt.covariant_derivative(&g0, &p), n),
            mgrad_w: mat(&wt.momentum_gradient(), n),
            nabla_q: mat(&qt.covariant_derivative(&g0, &p), n),
            mgrad_q: mat(&qt.momentum_gradient(), n),
            nabla_u: mat(&ut.covariant_derivative(&g0, &p), n),
            mgrad_u: mat(&ut.momentum_gradient(), n),
            curv: curvatures_from_jets(&gamma, &q.p),
        })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// `α`, `β`, `η`, `A`, `B` in the compact forms built on `U`.
    pub fn weak_fields(&self) -> WeakFieldBundle {
        let n = self.dim();
        let p = &self.point.p;
        let (d, r) = (&self.curv.d, &self.curv.r);
        let alpha: Array1<f64> = (0..n)
            .map(|k| {
                let mut s = 0.0;
                for r_ in 0..n {
                    s += self.mgrad_v[[r_, k]] * self.u[r_];
                    s += self.nabla_w[[k, r_]] * self.v[r_];
                    s += self.mgrad_w[[k, r_]] * self.force[r_];
                    s += self.w[r_] * self.mgrad_q[[r_, k]];
                    for s_ in 0..n {
                        for q_ in 0..n {
                            s -= p[s_] * d[[s_, k, r_, q_]] * self.w[r_] * self.v[q_];
                        }
                    }
                }
                s
            })
            .collect();
        let beta: Array1<f64> = (0..n)
            .map(|k| {
                let mut s = 0.0;
                for r_ in 0..n {
                    s += self.nabla_u[[k, r_]] * self.v[r_];
                    s += self.mgrad_u[[k, r_]] * self.force[r_];
                    s += self.nabla_v[[r_, k]] * self.u[r_];
                    s += self.nabla_q[[r_, k]] * self.w[r_];
                    for s_ in 0..n {
                        for m in 0..n {
                            s -= (r[[s_, r_, m, k]] * self.v[m] - d[[s_, m, r_, k]] * self.force[m])
                                * self.w[r_]
                                * p[s_];
                        }
                    }
                }
                s
            })
            .collect();
        let pa: f64 = (0..n).map(|s| alpha[s] * p[s]).sum();
        let eta: Array1<f64> = (0..n).map(|k| beta[k] - self.u[k] * pa / self.omega).collect();
        let a = pa / self.omega;
        let b = (0..n).map(|s| eta[s] * self.w[s]).sum::<f64>() / self.omega;
        WeakFieldBundle {
            u: self.u.clone(),
            alpha,
            beta,
            eta,
            a,
            b,
        }
    }

    /// Time derivatives of one variation pair `(τ, ξ)`.
    pub fn variation_rates(&self, tau: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let p = &self.point.p;
        let (g, r, d) = (&self.gamma, &self.curv.r, &self.curv.d);
        let mut dtau = vec![0.0; n];
        let mut dxi = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += self.nabla_v[[i, k]] * tau[k] + self.mgrad_v[[i, k]] * xi[k];
                for j in 0..n {
                    s -= g[[i, j, k]] * self.v[j] * tau[k];
                }
            }
            dtau[i] = s;

            let mut s = 0.0;
            for k in 0..n {
                s += self.nabla_q[[i, k]] * tau[k] + self.mgrad_q[[i, k]] * xi[k];
                let mut curv = 0.0;
                for j in 0..n {
                    s += g[[k, i, j]] * self.v[j] * xi[k];
                    for s_ in 0..n {
                        curv += r[[s_, i, j, k]] * p[s_] * self.v[j] - d[[s_, j, i, k]] * p[s_] * self.force[j];
                        s -= d[[s_, k, i, j]] * p[s_] * self.v[j] * xi[k];
                    }
                }
                s -= curv * tau[k];
            }
            dxi[i] = s;
        }
        (dtau, dxi)
    }

    /// `φ̇ = Σ U_k τ^k + Σ W^k ξ_k`.
    pub fn deviation_rate(&self, tau: &[f64], xi: &[f64]) -> f64 {
        (0..self.dim()).map(|k| self.u[k] * tau[k] + self.w[k] * xi[k]).sum()
    }
}

fn wt_values(t: &JetTensor, n: usize) -> Array1<f64> {
    (0..n).map(|i| t.get(&[i]).value()).collect()
}

/// `U`, `α`, `β`, `η` and the deviation ODE coefficients `A = ⟨p|α⟩/Ω`, `B = ⟨η|W⟩/Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFieldBundle {
    pub u: Array1<f64>,
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
    pub eta: Array1<f64>,
    pub a: f64,
    pub b: f64,
}

pub fn weak_fields(sys: &SystemDefinition, conn: &ConnectionField, q: &PhasePoint) -> Result<WeakFieldBundle> {
    Ok(LocalGeometry::new(sys, conn, q)?.weak_fields())
}

/// Phase point with `m` variation vectors `τ` and momentum variations `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub t: f64,
    pub q: PhasePoint,
    pub taus: Vec<Vec<f64>>,
    pub xis: Vec<Vec<f64>>,
}

impl ExtendedState {
    pub fn new(q: PhasePoint) -> ExtendedState {
        ExtendedState {
            t: 0.0,
            q,
            taus: Vec::new(),
            xis: Vec::new(),
        }
    }

    pub fn with_variation(mut self, tau: Vec<f64>, xi: Vec<f64>) -> ExtendedState {
        self.taus.push(tau);
        self.xis.push(xi);
        self
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn variations(&self) -> usize {
        self.taus.len()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dim() * (1 + self.variations()));
        v.extend(&self.q.x);
        v.extend(&self.q.p);
        for (t, x) in self.taus.iter().zip(&self.xis) {
            v.extend(t);
            v.extend(x);
        }
        v
    }

    fn unflatten(&self, t: f64, v: &[f64]) -> ExtendedState {
        let n = self.dim();
        let m = self.variations();
        let q = PhasePoint::new(v[..n].to_vec(), v[n..2 * n].to_vec());
        let mut taus = Vec::with_capacity(m);
        let mut xis = Vec::with_capacity(m);
        for a in 0..m {
            let base = 2 * n * (a + 1);
            taus.push(v[base..base + n].to_vec());
            xis.push(v[base + n..base + 2 * n].to_vec());
        }
        ExtendedState { t, q, taus, xis }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.taus.iter().chain(&self.xis).flatten().all(|v| v.is_finite())
    }
}

/// Time derivatives of every component of an [`ExtendedState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateRates {
    pub dx: Vec<f64>,
    pub dp: Vec<f64>,
    pub dtaus: Vec<Vec<f64>>,
    pub dxis: Vec<Vec<f64>>,
}

impl StateRates {
    fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend(&self.dx);
        v.extend(&self.dp);
        for (t, x) in self.dtaus.iter().zip(&self.dxis) {
            v.extend(t);
            v.extend(x);
        }
        v
    }
}

/// `(dx/dt, dp/dt) = (V, Θ)`.
pub fn phase_rhs(sys: &SystemDefinition, q: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
    sys.phase_rhs(q)
}

/// Phase equations together with the variational equations for every `(τ, ξ)`
/// pair, with the covariant time derivatives unpacked along the trajectory.
pub fn variational_rhs(sys: &SystemDefinition, conn: &ConnectionField, state: &ExtendedState) -> Result<StateRates> {
    if state.variations() == 0 {
        let (dx, dp) = sys.phase_rhs(&state.q)?;
        return Ok(StateRates {
            dx,
            dp,
            dtaus: Vec::new(),
            dxis: Vec::new(),
        });
    }
    let geo = LocalGeometry::new(sys, conn, &state.q)?;
    let mut dtaus = Vec::with_capacity(state.variations());
    let mut dxis = Vec::with_capacity(state.variations());
    for (tau, xi) in state.taus.iter().zip(&state.xis) {
        let (a, b) = geo.variation_rates(tau, xi);
        dtaus.push(a);
        dxis.push(b);
    }
    Ok(StateRates {
        dx: geo.v.to_vec(),
        dp: geo.theta.to_vec(),
        dtaus,
        dxis,
    })
}

/// Fixed-step classical Runge-Kutta settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { step: 1e-3, t_end: 1.0 }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, t_end: f64) -> IntegratorConfig {
        IntegratorConfig { step, t_end }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end must be finite and non-negative, got {}", self.t_end)));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.step - 1e-9).ceil().max(0.0) as usize
    }
}

/// Recorded states, one per accepted step including the initial one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ExtendedState>,
}

impl Trajectory {
    pub fn last(&self) -> &ExtendedState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Deviation series `φ_a(t)` for every variation `a`.
    pub fn deviations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(deviation).collect()
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let s0 = &self.states[0];
        let (n, m) = (s0.dim(), s0.variations());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("p{i}")));
        for a in 1..=m {
            header.extend((1..=n).map(|i| format!("tau{a}_{i}")));
        }
        for a in 1..=m {
            header.extend((1..=n).map(|i| format!("xi{a}_{i}")));
        }
        header.extend((1..=m).map(|a| format!("phi_{a}")));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.states {
            let mut row = vec![s.t];
            row.extend(&s.q.x);
            row.extend(&s.q.p);
            s.taus.iter().for_each(|t| row.extend(t));
            s.xis.iter().for_each(|x| row.extend(x));
            row.extend(deviation(s));
            writeln!(out, "{}", format_row(&row))?;
        }
        Ok(())
    }
}

/// Comma-separated floats with 17 significant digits.
pub fn format_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Classical RK4 on the coupled phase and variational system.
pub fn integrate(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    state0: &ExtendedState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !state0.is_finite() {
        return Err(Error::NonFiniteState { t: state0.t });
    }
    if state0.taus.len() != state0.xis.len() {
        return Err(Error::Config("taus and xis must have equal length".into()));
    }
    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let s = state0.unflatten(t, y);
        let r = variational_rhs(sys, conn, &s)?;
        Ok(r.flatten())
    };
    let steps = cfg.steps();
    let t0 = state0.t;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(state0.clone());
    let mut y = state0.flatten();
    let mut t = t0;
    for i in 1..=steps {
        let t_next = (t0 + i as f64 * cfg.step).min(t0 + cfg.t_end);
        let h = t_next - t;
        let k1 = rhs(t, &y)?;
        let k2 = rhs(t + h / 2.0, &axpy(&y, h / 2.0, &k1))?;
        let k3 = rhs(t + h / 2.0, &axpy(&y, h / 2.0, &k2))?;
        let k4 = rhs(t + h, &axpy(&y, h, &k3))?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t = t_next;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        states.push(state0.unflatten(t, &y));
    }
    Ok(Trajectory { states })
}

/// `φ_a = Σ_k τ^k_a p_k`.
pub fn deviation(state: &ExtendedState) -> Vec<f64> {
    state
        .taus
        .iter()
        .map(|tau| tau.iter().zip(&state.q.p).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expression;
    use crate::legendre::build_modified_hamiltonian;

    fn id2() -> SystemDefinition {
        SystemDefinition::explicit_from_str(2, &["p1", "p2"], &["0", "0"]).unwrap()
    }

    fn geo2() -> SystemDefinition {
        build_modified_hamiltonian(parse_expression("(p1^2+p2^2)/2", 2).unwrap(), 2).unwrap()
    }

    fn pt(x: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), p.to_vec())
    }

    #[test]
    fn phase_rhs_examples() {
        let q = pt(&[0.2, 0.1], &[1.0, 2.0]);
        assert_eq!(phase_rhs(&id2(), &q).unwrap(), (vec![1.0, 2.0], vec![0.0, 0.0]));
        let (dx, dp) = phase_rhs(&geo2(), &pt(&[0.0, 0.0], &[1.0, 0.0])).unwrap();
        assert_eq!((dx, dp), (vec![1.0, 0.0], vec![0.0, 0.0]));
        let bad = SystemDefinition::explicit_from_str(2, &["p1", "p2"], &["p2^2", "0"]).unwrap();
        assert_eq!(phase_rhs(&bad, &q).unwrap(), (vec![1.0, 2.0], vec![4.0, 0.0]));
    }

    #[test]
    fn identity_variations() {
        let s = ExtendedState::new(pt(&[0.2, 0.1], &[1.0, 2.0])).with_variation(vec![0.3, -0.1], vec![0.5, 0.7]);
        let r = variational_rhs(&id2(), &ConnectionField::Zero { n: 2 }, &s).unwrap();
        assert_eq!(r.dtaus[0], vec![0.5, 0.7]);
        assert_eq!(r.dxis[0], vec![0.0, 0.0]);
        let z = ExtendedState::new(pt(&[0.2, 0.1], &[1.0, 2.0])).with_variation(vec![0.0; 2], vec![0.0; 2]);
        let r = variational_rhs(&geo2(), &ConnectionField::canonical(&geo2()), &z).unwrap();
        assert!(r.dtaus[0].iter().chain(&r.dxis[0]).all(|v| *v == 0.0));
    }

    #[test]
    fn linear_motion() {
        let tr = integrate(
            &id2(),
            &ConnectionField::Zero { n: 2 },
            &ExtendedState::new(pt(&[0.0, 0.0], &[1.0, 0.0])),
            &IntegratorConfig::new(1e-2, 1.0),
        )
        .unwrap();
        assert_eq!(tr.states.len(), 101);
        let s = tr.last();
        assert!((s.t - 1.0).abs() < 1e-15);
        assert!((s.q.x[0] - 1.0).abs() < 1e-10 && s.q.x[1].abs() < 1e-10);
    }

    #[test]
    fn geodesic_closed_form() {
        let tr = integrate(
            &geo2(),
            &ConnectionField::canonical(&geo2()),
            &ExtendedState::new(pt(&[1.0, 0.0], &[1.0, 0.0])),
            &IntegratorConfig::default(),
        )
        .unwrap();
        let s = tr.last();
        assert!((s.q.x[0] - 2.0).abs() < 1e-9 && s.q.x[1].abs() < 1e-9);
        assert!((s.q.p[0] - 1.0).abs() < 1e-9 && s.q.p[1].abs() < 1e-9);
    }

    #[test]
    fn deviation_examples() {
        let s = |p: &[f64], tau: &[f64]| ExtendedState::new(pt(&[0.0, 0.0], p)).with_variation(tau.to_vec(), vec![0.0; 2]);
        assert_eq!(deviation(&s(&[1.0, 0.0], &[0.0, 1.0])), vec![0.0]);
        assert_eq!(deviation(&s(&[1.0, 0.0], &[1.0, 0.0])), vec![1.0]);
        assert_eq!(deviation(&s(&[3.0, 4.0], &[4.0, -3.0])), vec![0.0]);
    }

    #[test]
    fn identity_weak_fields_vanish() {
        let w = weak_fields(&id2(), &ConnectionField::Zero { n: 2 }, &pt(&[0.3, 0.1], &[1.0, 2.0])).unwrap();
        assert!(w.u.iter().chain(&w.alpha).chain(&w.beta).chain(&w.eta).all(|v| *v == 0.0));
        assert_eq!((w.a, w.b), (0.0, 0.0));
    }

    #[test]
    fn bad_config_rejected() {
        assert!(IntegratorConfig::new(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::new(1e-3, f64::NAN).validate().is_err());
        assert_eq!(IntegratorConfig::new(0.3, 1.0).steps(), 4);
    }
}
