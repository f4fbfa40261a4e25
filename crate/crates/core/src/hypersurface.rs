//! Parametric hypersurfaces, the Pfaff system for `ν`, and the normal shift.

use std::io::Write;

use ndarray::{Array2, ArrayD, Dimension, IxDyn};
use rayon::prelude::*;

use crate::connection::ConnectionField;
use crate::dynamics::{format_row, integrate, ExtendedState, IntegratorConfig, LocalGeometry, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{parse_expression, Env, Expression, PhasePoint, Var};
use crate::jet::{Jet, JetSpace};
use crate::legendre::SystemDefinition;
use crate::normality::AbcTensors;

/// Smallest admissible `|ν|`.
pub const NU_CUTOFF: f64 = 1e-10;

/// Single-chart hypersurface `x^s(y^1, …, y^{n−1})` over a parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypersurface {
    n: usize,
    embedding: Vec<Expression>,
    pub domain: Vec<(f64, f64)>,
    pub grid: Vec<usize>,
    /// Factor applied to the unit normal; the shift must not depend on it
    /// once `ν` is divided by the same factor.
    pub normal_scale: f64,
}

impl Hypersurface {
    pub fn new(n: usize, embedding: Vec<Expression>, domain: Vec<(f64, f64)>, grid: Vec<usize>) -> Result<Self> {
        let m = n.checked_sub(1).filter(|&m| m >= 1).ok_or_else(|| Error::Config("surface needs n >= 2".into()))?;
        if embedding.len() != n {
            return Err(Error::Config(format!("embedding needs {n} components, got {}", embedding.len())));
        }
        if domain.len() != m || grid.len() != m {
            return Err(Error::Config(format!("domain and grid need {m} entries")));
        }
        if domain.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::Config("domain bounds must be finite with lo <= hi".into()));
        }
        if grid.contains(&0) {
            return Err(Error::Config("grid counts must be positive".into()));
        }
        for e in &embedding {
            let mut bad = None;
            e.visit_vars(&mut |v| match v {
                Var::Y(k) if k < m => {}
                other => bad = bad.or(Some(other)),
            });
            if let Some(v) = bad {
                return Err(Error::Config(format!("variable `{v}` not allowed in an embedding with {m} parameters")));
            }
        }
        Ok(Hypersurface {
            n,
            embedding,
            domain,
            grid,
            normal_scale: 1.0,
        })
    }

    pub fn from_strings(n: usize, embedding: &[&str], domain: Vec<(f64, f64)>, grid: Vec<usize>) -> Result<Self> {
        let e = embedding
            .iter()
            .map(|s| parse_expression(s, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Hypersurface::new(n, e, domain, grid)
    }

    pub fn with_normal_scale(mut self, c: f64) -> Self {
        self.normal_scale = c;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> usize {
        self.n - 1
    }

    pub fn embedding_jets(&self, y: &[f64], order: usize) -> Result<Vec<Jet>> {
        let m = self.params();
        let sp = JetSpace::get(m, order);
        let yj: Vec<Jet> = (0..m).map(|i| Jet::variable(sp, i, y[i])).collect();
        let env = Env { y: &yj, ..Env::new(sp) };
        Ok(self.embedding.iter().map(|e| e.eval(&env)).collect::<std::result::Result<_, _>>()?)
    }

    pub fn point(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.embedding_jets(y, 0)?.iter().map(Jet::value).collect())
    }

    /// Coordinates of grid line `axis`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let (lo, hi) = self.domain[axis];
        let k = self.grid[axis];
        if k == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
    }

    /// All grid nodes in row-major order (last parameter fastest).
    pub fn grid_nodes(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.params()).map(|a| self.axis(a)).collect();
        let total: usize = self.grid.iter().product();
        (0..total)
            .map(|mut flat| {
                let mut y = vec![0.0; axes.len()];
                for a in (0..axes.len()).rev() {
                    y[a] = axes[a][flat % self.grid[a]];
                    flat /= self.grid[a];
                }
                y
            })
            .collect()
    }
}

fn det(m: &[Vec<Jet>]) -> Jet {
    match m.len() {
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        k => {
            let mut acc = m[0][0].zero_like();
            for c in 0..k {
                let minor: Vec<Vec<Jet>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, v)| v.clone()).collect())
                    .collect();
                let t = &m[0][c] * &det(&minor);
                if c % 2 == 0 {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            acc
        }
    }
}

/// Tangents, unit normal covector (first nonzero component positive) and its
/// first derivatives, as jets over the surface parameters.
fn normal_jets(surf: &Hypersurface, y: &[f64]) -> Result<(Vec<f64>, Vec<Vec<Jet>>, Vec<Jet>)> {
    let n = surf.dim();
    let m = surf.params();
    let x = surf.embedding_jets(y, 2)?;
    let taus: Vec<Vec<Jet>> = (0..m).map(|i| x.iter().map(|xs| xs.partial(i)).collect()).collect();
    let raw: Vec<Jet> = (0..n)
        .map(|s| {
            let minor: Vec<Vec<Jet>> = (0..n)
                .filter(|&r| r != s)
                .map(|r| (0..m).map(|i| taus[i][r].clone()).collect())
                .collect();
            let d = det(&minor);
            if s % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect();
    let mut norm2 = raw[0].zero_like();
    for c in &raw {
        norm2 += c * c;
    }
    if norm2.value().sqrt() < 1e-12 {
        return Err(Error::RankDeficientTangents { y: y.to_vec() });
    }
    let inv = norm2.powf_series(-0.5);
    let sign = raw
        .iter()
        .map(|c| c.value() * inv.value())
        .find(|v| v.abs() > 1e-12)
        .map_or(1.0, f64::signum);
    let normal: Vec<Jet> = raw.iter().map(|c| &(c * &inv) * (sign * surf.normal_scale)).collect();
    Ok((x.iter().map(Jet::value).collect(), taus, normal))
}

/// Surface geometry at one parameter value for momentum `p = ν n`.
#[derive(Debug, Clone)]
pub struct SurfaceFrame {
    pub y: Vec<f64>,
    pub nu: f64,
    pub x: Vec<f64>,
    /// `taus[i][s] = ∂x^s/∂y^i`.
    pub taus: Vec<Vec<f64>>,
    pub normal: Vec<f64>,
    /// `dn[[i, s]] = ∇_{τ_i} n_s`.
    pub dn: Array2<f64>,
    /// `θ_{ri} = −Σ_q P^q_r ∇_{τ_i} n_q`, stored `[[r, i]]`.
    pub theta: Array2<f64>,
    /// `b_ij = Σ_r θ_rj τ^r_i`.
    pub b: Array2<f64>,
    pub geometry: LocalGeometry,
}

pub fn surface_frame(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    y: &[f64],
    nu: f64,
) -> Result<SurfaceFrame> {
    let (n, m) = (surf.dim(), surf.params());
    if sys.dim() != n || y.len() != m {
        return Err(Error::Config("surface, system and parameter dimensions disagree".into()));
    }
    if nu.abs() < NU_CUTOFF {
        return Err(Error::NuVanished { nu });
    }
    let (x, tj, nj) = normal_jets(surf, y)?;
    let normal: Vec<f64> = nj.iter().map(Jet::value).collect();
    let taus: Vec<Vec<f64>> = tj.iter().map(|t| t.iter().map(Jet::value).collect()).collect();
    let q = PhasePoint::new(x.clone(), normal.iter().map(|v| nu * v).collect());
    let geometry = LocalGeometry::new(sys, conn, &q)?;
    let g = &geometry.gamma;
    let dn = Array2::from_shape_fn((m, n), |(i, s)| {
        let mut v = nj[s].derivative(&[i]);
        for k in 0..n {
            for r in 0..n {
                v -= g[[k, s, r]] * normal[k] * taus[i][r];
            }
        }
        v
    });
    let pp = &geometry.p_proj;
    let theta = Array2::from_shape_fn((n, m), |(r, i)| -(0..n).map(|q| pp[[q, r]] * dn[[i, q]]).sum::<f64>());
    let b = Array2::from_shape_fn((m, m), |(i, j)| (0..n).map(|r| theta[[r, j]] * taus[i][r]).sum::<f64>());
    Ok(SurfaceFrame {
        y: y.to_vec(),
        nu,
        x,
        taus,
        normal,
        dn,
        theta,
        b,
        geometry,
    })
}

fn pfaff_from_frame(f: &SurfaceFrame) -> Vec<f64> {
    let g = &f.geometry;
    let (n, m) = (f.normal.len(), f.taus.len());
    let nu = f.nu;
    (0..m)
        .map(|i| {
            let wdn: f64 = (0..n).map(|s| g.w[s] * f.dn[[i, s]]).sum();
            let ut: f64 = (0..n).map(|s| g.u[s] * f.taus[i][s]).sum();
            -(nu * nu / g.omega) * wdn - (nu / g.omega) * ut
        })
        .collect()
}

/// `∂ν/∂y^i = −(ν²/Ω) Σ W^s ∇_{τ_i} n_s − (ν/Ω) Σ U_s τ^s_i` at `p = ν n`.
pub fn pfaff_rhs(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    y: &[f64],
    nu: f64,
) -> Result<Vec<f64>> {
    Ok(pfaff_from_frame(&surface_frame(sys, conn, surf, y, nu)?))
}

/// Antisymmetric compatibility matrix of the Pfaff system built from the
/// `A`, `B`, `C` tensors. Entry `[i, j]` equals `θ_ij − θ_ji`, the difference
/// of the two mixed second derivatives of `ν`.
pub fn compatibility_residual(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    y: &[f64],
    nu: f64,
) -> Result<Array2<f64>> {
    let f = surface_frame(sys, conn, surf, y, nu)?;
    let g = &f.geometry;
    let t = AbcTensors::from_geometry(g);
    let (n, m) = (f.normal.len(), f.taus.len());
    let om = g.omega;
    // pdn[[i, r]] = Σ_q P^q_r ∇_{τ_i} n_q
    let pdn = Array2::from_shape_fn((m, n), |(i, r)| -f.theta[[r, i]]);
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        for j in i + 1..m {
            let mut v = 0.0;
            for r in 0..n {
                for s in 0..n {
                    v += nu.powi(3) * (t.a[[r, s]] - t.a[[s, r]]) / om * pdn[[i, r]] * pdn[[j, s]];
                    v += nu * nu * t.b[[r, s]] / om * (pdn[[i, r]] * f.taus[j][s] - pdn[[j, r]] * f.taus[i][s]);
                    v += nu * (t.c[[r, s]] - t.c[[s, r]]) / om * f.taus[i][r] * f.taus[j][s];
                }
            }
            out[[i, j]] = COMPAT_SIGN * v;
            out[[j, i]] = -COMPAT_SIGN * v;
        }
    }
    Ok(out)
}

const COMPAT_SIGN: f64 = 1.0;

/// `ν` on the surface grid, integrated from one node along axis-parallel paths.
#[derive(Debug, Clone, PartialEq)]
pub struct NuSolution {
    pub axes: Vec<Vec<f64>>,
    pub values: ArrayD<f64>,
    pub origin: Vec<usize>,
    /// Largest `|ν_A − ν_B|` over grid cells, where the two paths traverse
    /// the cell edges in opposite orders.
    pub path_residual: f64,
}

impl NuSolution {
    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[IxDyn(idx)]
    }
}

fn rk4_axis(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    y: &[f64],
    nu: f64,
    axis: usize,
    h: f64,
) -> Result<f64> {
    let f = |yy: &[f64], v: f64| -> Result<f64> {
        if v.abs() < NU_CUTOFF || !v.is_finite() {
            return Err(Error::NuVanished { nu: v });
        }
        Ok(pfaff_rhs(sys, conn, surf, yy, v)?[axis])
    };
    let shifted = |d: f64| {
        let mut yy = y.to_vec();
        yy[axis] += d;
        yy
    };
    let k1 = f(y, nu)?;
    let ym = shifted(h / 2.0);
    let k2 = f(&ym, nu + h / 2.0 * k1)?;
    let k3 = f(&ym, nu + h / 2.0 * k2)?;
    let k4 = f(&shifted(h), nu + h * k3)?;
    let out = nu + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if out.abs() < NU_CUTOFF || !out.is_finite() {
        return Err(Error::NuVanished { nu: out });
    }
    Ok(out)
}

/// Integrates the Pfaff system over the surface grid from node `y0`, filling
/// axis 0 first, then axis 1 from every filled node, and so on.
pub fn solve_nu(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    y0: &[f64],
    nu0: f64,
) -> Result<NuSolution> {
    if nu0.abs() < NU_CUTOFF {
        return Err(Error::NuVanished { nu: nu0 });
    }
    let m = surf.params();
    let axes: Vec<Vec<f64>> = (0..m).map(|a| surf.axis(a)).collect();
    let mut origin = Vec::with_capacity(m);
    for a in 0..m {
        let k = axes[a]
            .iter()
            .position(|v| (v - y0[a]).abs() <= 1e-12 * (1.0 + v.abs()))
            .ok_or_else(|| Error::Config(format!("y0[{a}] = {} is not a grid node", y0[a])))?;
        origin.push(k);
    }
    let mut values = ArrayD::from_elem(IxDyn(&surf.grid), f64::NAN);
    values[IxDyn(&origin)] = nu0;
    let node = |idx: &[usize]| -> Vec<f64> { (0..m).map(|a| axes[a][idx[a]]).collect() };

    let mut filled: Vec<Vec<usize>> = vec![origin.clone()];
    for a in 0..m {
        let mut next = Vec::new();
        for start in &filled {
            next.push(start.clone());
            for dir in [1isize, -1] {
                let mut idx = start.clone();
                loop {
                    let k = idx[a] as isize + dir;
                    if k < 0 || k as usize >= surf.grid[a] {
                        break;
                    }
                    let y = node(&idx);
                    let h = axes[a][k as usize] - axes[a][idx[a]];
                    let v = rk4_axis(sys, conn, surf, &y, values[IxDyn(&idx)], a, h)?;
                    idx[a] = k as usize;
                    values[IxDyn(&idx)] = v;
                    next.push(idx.clone());
                }
            }
        }
        filled = next;
    }

    let mut cells = Vec::new();
    for corner in ndarray::indices(IxDyn(&surf.grid)) {
        let c: Vec<usize> = corner.slice().to_vec();
        for a in 0..m {
            for b in a + 1..m {
                if c[a] + 1 < surf.grid[a] && c[b] + 1 < surf.grid[b] {
                    cells.push((c.clone(), a, b));
                }
            }
        }
    }
    let residuals: Vec<f64> = cells
        .par_iter()
        .map(|(c, a, b)| -> Result<f64> {
            let nu_c = values[IxDyn(c)];
            let step = |idx: &[usize], nu: f64, axis: usize| -> Result<(Vec<usize>, f64)> {
                let mut j = idx.to_vec();
                j[axis] += 1;
                let h = axes[axis][j[axis]] - axes[axis][idx[axis]];
                Ok((j, rk4_axis(sys, conn, surf, &node(idx), nu, axis, h)?))
            };
            let (ia, va) = step(c, nu_c, *a)?;
            let (_, vab) = step(&ia, va, *b)?;
            let (ib, vb) = step(c, nu_c, *b)?;
            let (_, vba) = step(&ib, vb, *a)?;
            Ok((vab - vba).abs())
        })
        .collect::<Result<_>>()?;
    let path_residual = residuals.into_iter().fold(0.0, f64::max);
    Ok(NuSolution {
        axes,
        values,
        origin,
        path_residual,
    })
}

#[derive(Debug, Clone)]
pub enum NuSource<'a> {
    Constant(f64),
    Solved(&'a NuSolution),
}

/// One grid node of a shift: its trajectory carries `τ_i`, `ξ_i` for every
/// surface parameter.
#[derive(Debug, Clone)]
pub struct ShiftNode {
    pub y: Vec<f64>,
    pub nu: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct ShiftRun {
    pub n: usize,
    pub nodes: Vec<ShiftNode>,
}

impl ShiftRun {
    pub fn max_deviation(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|nd| nd.trajectory.deviations())
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let n = self.n;
        let mut header: Vec<String> = (1..n).map(|i| format!("y{i}")).collect();
        header.push("t".into());
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("p{i}")));
        header.extend((1..n).map(|i| format!("phi_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for nd in &self.nodes {
            for s in &nd.trajectory.states {
                let mut row = nd.y.clone();
                row.push(s.t);
                row.extend(&s.q.x);
                row.extend(&s.q.p);
                row.extend(crate::dynamics::deviation(s));
                writeln!(out, "{}", format_row(&row))?;
            }
        }
        Ok(())
    }
}

/// Initial extended state at `y`: `p = ν n`, `τ_i = ∂x/∂y^i`,
/// `ξ_si = (∂ν/∂y^i) n_s + ν ∇_{τ_i} n_s`.
pub fn shift_initial_state(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    y: &[f64],
    nu: f64,
    solved: bool,
) -> Result<ExtendedState> {
    let f = surface_frame(sys, conn, surf, y, nu)?;
    let psi = if solved { pfaff_from_frame(&f) } else { vec![0.0; f.taus.len()] };
    let n = f.normal.len();
    let mut state = ExtendedState::new(PhasePoint::new(f.x.clone(), f.normal.iter().map(|v| nu * v).collect()));
    for (i, tau) in f.taus.iter().enumerate() {
        let xi = (0..n).map(|s| psi[i] * f.normal[s] + nu * f.dn[[i, s]]).collect();
        state = state.with_variation(tau.clone(), xi);
    }
    Ok(state)
}

pub fn simulate_shift(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    surf: &Hypersurface,
    nu_source: NuSource<'_>,
    cfg: &IntegratorConfig,
) -> Result<ShiftRun> {
    cfg.validate()?;
    let nodes = surf.grid_nodes();
    if let NuSource::Solved(sol) = &nu_source {
        if sol.values.shape() != surf.grid.as_slice() {
            return Err(Error::Config("solved nu grid does not match the surface grid".into()));
        }
    }
    let indices: Vec<Vec<usize>> = ndarray::indices(IxDyn(&surf.grid))
        .into_iter()
        .map(|i| i.slice().to_vec())
        .collect();
    let out: Vec<ShiftNode> = nodes
        .par_iter()
        .zip(indices.par_iter())
        .map(|(y, idx)| -> Result<ShiftNode> {
            let (nu, solved) = match &nu_source {
                NuSource::Constant(v) => (*v, false),
                NuSource::Solved(sol) => (sol.at(idx), true),
            };
            let s0 = shift_initial_state(sys, conn, surf, y, nu, solved)?;
            Ok(ShiftNode {
                y: y.to_vec(),
                nu,
                trajectory: integrate(sys, conn, &s0, cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ShiftRun {
        n: surf.dim(),
        nodes: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orthogonality {
    Normal,
    Violation { t: f64, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub times: Vec<f64>,
    /// Largest `|φ_i|` over all nodes at each recorded time.
    pub max_phi: Vec<f64>,
    pub verdict: Orthogonality,
}

impl OrthogonalityReport {
    pub fn max(&self) -> f64 {
        self.max_phi.iter().copied().fold(0.0, f64::max)
    }
}

pub fn verify_orthogonality(run: &ShiftRun, tol: f64) -> OrthogonalityReport {
    let times = run.nodes.first().map(|nd| nd.trajectory.times()).unwrap_or_default();
    let max_phi: Vec<f64> = (0..times.len())
        .map(|k| {
            run.nodes
                .iter()
                .flat_map(|nd| crate::dynamics::deviation(&nd.trajectory.states[k]))
                .fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .collect();
    let verdict = times
        .iter()
        .zip(&max_phi)
        .find(|(_, &v)| v.is_nan() || v > tol)
        .map_or(Orthogonality::Normal, |(&t, &value)| Orthogonality::Violation { t, value });
    OrthogonalityReport { times, max_phi, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id2() -> SystemDefinition {
        SystemDefinition::explicit_from_str(2, &["p1", "p2"], &["0", "0"]).unwrap()
    }

    fn circle() -> Hypersurface {
        Hypersurface::from_strings(2, &["cos(y1)", "sin(y1)"], vec![(-0.5, 0.5)], vec![5]).unwrap()
    }

    #[test]
    fn line_frame() {
        let line = Hypersurface::from_strings(2, &["y1", "0"], vec![(-1.0, 1.0)], vec![3]).unwrap();
        let f = surface_frame(&id2(), &ConnectionField::Zero { n: 2 }, &line, &[0.3], 1.0).unwrap();
        assert_eq!(f.normal, vec![0.0, 1.0]);
        assert_eq!(f.b[[0, 0]], 0.0);
        let psi = pfaff_rhs(&id2(), &ConnectionField::Zero { n: 2 }, &line, &[0.3], 2.5).unwrap();
        assert_eq!(psi, vec![0.0]);
    }

    #[test]
    fn circle_frame() {
        let f = surface_frame(&id2(), &ConnectionField::Zero { n: 2 }, &circle(), &[0.0], 1.0).unwrap();
        assert_eq!(f.taus[0], vec![0.0, 1.0]);
        assert_eq!(f.normal, vec![1.0, 0.0]);
        assert!((f.b[[0, 0]] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficiency() {
        let s = Hypersurface::from_strings(2, &["y1^2", "y1^2"], vec![(0.0, 1.0)], vec![2]).unwrap();
        assert!(matches!(
            surface_frame(&id2(), &ConnectionField::Zero { n: 2 }, &s, &[0.0], 1.0),
            Err(Error::RankDeficientTangents { .. })
        ));
    }

    #[test]
    fn grid_layout() {
        let s = Hypersurface::from_strings(3, &["y1", "y2", "0"], vec![(0.0, 1.0), (0.0, 2.0)], vec![2, 3]).unwrap();
        let nodes = s.grid_nodes();
        assert_eq!(nodes.len(), 6);
        assert_eq!(nodes[1], vec![0.0, 1.0]);
        assert_eq!(nodes[3], vec![1.0, 0.0]);
    }

    #[test]
    fn orthogonality_verdicts() {
        let mk = |phi_mid: f64| {
            let base = ExtendedState::new(PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]));
            let states = [0.0, 0.5, 1.0]
                .iter()
                .map(|&t| {
                    let tau = if t == 0.5 { vec![phi_mid, 0.0] } else { vec![0.0, 1.0] };
                    ExtendedState { t, ..base.clone().with_variation(tau, vec![0.0, 0.0]) }
                })
                .collect();
            ShiftRun {
                n: 2,
                nodes: vec![ShiftNode {
                    y: vec![0.0],
                    nu: 1.0,
                    trajectory: Trajectory { states },
                }],
            }
        };
        assert_eq!(verify_orthogonality(&mk(0.0), 1e-6).verdict, Orthogonality::Normal);
        assert_eq!(
            verify_orthogonality(&mk(0.1), 1e-6).verdict,
            Orthogonality::Violation { t: 0.5, value: 0.1 }
        );
    }
}
