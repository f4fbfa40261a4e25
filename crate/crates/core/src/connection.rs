//! Symmetric extended affine connections, their curvatures, covariant
//! derivatives of extended tensor fields, the force covector and gauge shifts.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array3, Array4, ArrayD, IxDyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{parse_expression, BinOp, Env, Expression, Node, PhasePoint, Var};
use crate::jet::{Jet, JetSpace};
use crate::legendre::{canonical_gamma_jets, FieldJets, SystemDefinition};

/// Symmetry tolerance for connection and gauge components.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Up,
    Down,
}

/// Components of an extended tensor field as jets at one point, stored
/// row-major in slot order.
#[derive(Debug, Clone)]
pub struct JetTensor {
    n: usize,
    slots: Vec<Slot>,
    data: Vec<Jet>,
}

impl JetTensor {
    pub fn new(n: usize, slots: Vec<Slot>, data: Vec<Jet>) -> JetTensor {
        assert_eq!(data.len(), n.pow(slots.len() as u32), "tensor data size");
        JetTensor { n, slots, data }
    }

    pub fn scalar(j: Jet) -> JetTensor {
        // dimension is irrelevant for rank 0; recovered from the jet space
        let n = j.nvars() / 2;
        JetTensor::new(n, Vec::new(), vec![j])
    }

    pub fn vector(v: Vec<Jet>) -> JetTensor {
        JetTensor::new(v.len(), vec![Slot::Up], v)
    }

    pub fn covector(v: Vec<Jet>) -> JetTensor {
        JetTensor::new(v.len(), vec![Slot::Down], v)
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn order(&self) -> usize {
        self.data[0].order()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.data[self.offset(idx)]
    }

    pub fn values(&self) -> ArrayD<f64> {
        let shape = vec![self.n; self.rank()];
        ArrayD::from_shape_vec(IxDyn(&shape), self.data.iter().map(Jet::value).collect())
            .expect("shape matches data")
    }

    fn multi_indices(&self) -> Vec<Vec<usize>> {
        let total = self.data.len();
        (0..total)
            .map(|mut flat| {
                let mut idx = vec![0; self.rank()];
                for t in (0..self.rank()).rev() {
                    idx[t] = flat % self.n;
                    flat /= self.n;
                }
                idx
            })
            .collect()
    }

    /// Horizontal covariant derivative; the new lower index is appended last.
    ///
    /// `∇_m X = ∂X/∂x^m + Σ p_c Γ^c_{mb} ∂X/∂p_b + Σ_up Γ^i_{ma} X^{..a..} − Σ_down Γ^b_{mj} X_{..b..}`
    pub fn covariant_derivative(&self, gamma: &Array3<Jet>, p: &[Jet]) -> JetTensor {
        let n = self.n;
        let zero = self.data[0].truncate(self.order() - 1).zero_like();
        // lift[m][b] = Σ_c p_c Γ^c_{mb}
        let lift: Vec<Vec<Jet>> = (0..n)
            .map(|m| {
                (0..n)
                    .map(|b| {
                        let mut s = zero.clone();
                        for (c, pc) in p.iter().enumerate() {
                            s += pc * &gamma[[c, m, b]];
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let dx: Vec<Vec<Jet>> = self.data.iter().map(|x| (0..n).map(|m| x.partial(m)).collect()).collect();
        let dp: Vec<Vec<Jet>> = self
            .data
            .iter()
            .map(|x| (0..n).map(|b| x.partial(n + b)).collect())
            .collect();
        let mut out = Vec::with_capacity(self.data.len() * n);
        for idx in self.multi_indices() {
            let flat = self.offset(&idx);
            for m in 0..n {
                let mut s = dx[flat][m].clone();
                for b in 0..n {
                    s += &lift[m][b] * &dp[flat][b];
                }
                for (t, slot) in self.slots.iter().enumerate() {
                    let mut j = idx.clone();
                    for a in 0..n {
                        j[t] = a;
                        let other = &self.data[self.offset(&j)];
                        match slot {
                            Slot::Up => s += &gamma[[idx[t], m, a]] * other,
                            Slot::Down => s -= &gamma[[a, m, idx[t]]] * other,
                        }
                    }
                }
                out.push(s);
            }
        }
        let mut slots = self.slots.clone();
        slots.push(Slot::Down);
        JetTensor::new(n, slots, out)
    }

    /// Momentum gradient `∂/∂p_m`; the new upper index is appended last.
    pub fn momentum_gradient(&self) -> JetTensor {
        let n = self.n;
        let mut out = Vec::with_capacity(self.data.len() * n);
        for x in &self.data {
            for m in 0..n {
                out.push(x.partial(n + m));
            }
        }
        let mut slots = self.slots.clone();
        slots.push(Slot::Up);
        JetTensor::new(n, slots, out)
    }
}

/// Explicit connection components; `None` entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitConnection {
    n: usize,
    entries: Vec<Option<Expression>>,
}

impl ExplicitConnection {
    /// Builds from `(k, i, j)` zero-based entries, completing the symmetric partner.
    pub fn from_entries(n: usize, given: Vec<((usize, usize, usize), Expression)>) -> Result<Self> {
        let mut entries: Vec<Option<Expression>> = vec![None; n * n * n];
        let at = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
        let mut seen = BTreeMap::new();
        for ((k, i, j), e) in given {
            if k >= n || i >= n || j >= n {
                return Err(Error::Config(format!("Gamma index ({},{},{}) out of range", k + 1, i + 1, j + 1)));
            }
            if let Some(prev) = seen.insert((k, i.min(j), i.max(j)), e.clone()) {
                if prev != e {
                    return Err(Error::Config(format!(
                        "Gamma entries ({0},{1},{2}) and ({0},{2},{1}) are inconsistent",
                        k + 1,
                        i + 1,
                        j + 1
                    )));
                }
            }
            entries[at(k, i, j)] = Some(e.clone());
            entries[at(k, j, i)] = Some(e);
        }
        Ok(ExplicitConnection { n, entries })
    }

    /// Parses a `{"k,i,j": expr}` map with one-based indices.
    pub fn from_strings(n: usize, map: &BTreeMap<String, String>) -> Result<Self> {
        let mut given = Vec::new();
        for (key, text) in map {
            let idx: Vec<usize> = key
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad Gamma key `{key}`")))?;
            if idx.len() != 3 || idx.contains(&0) {
                return Err(Error::Config(format!("bad Gamma key `{key}`")));
            }
            let e = parse_expression(text, n)?;
            given.push(((idx[0] - 1, idx[1] - 1, idx[2] - 1), e));
        }
        ExplicitConnection::from_entries(n, given)
    }

    fn jets(&self, q: &PhasePoint, order: usize) -> Result<Array3<Jet>> {
        let n = self.n;
        let (x, p) = q.jets(order);
        let env = Env::phase(&x, &p);
        let zero = Jet::constant(JetSpace::get(2 * n, order), 0.0);
        let mut g = Array3::from_elem((n, n, n), zero);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    if let Some(e) = &self.entries[(k * n + i) * n + j] {
                        let v = e.eval(&env)?;
                        g[[k, i, j]] = v.clone();
                        g[[k, j, i]] = v;
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Symmetric tensor `T^k_ij(x,p)` used to shift a connection.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTensor {
    n: usize,
    entries: Vec<Expression>,
}

impl GaugeTensor {
    /// Full `n³` list of components in `(k, i, j)` row-major order.
    pub fn new(n: usize, entries: Vec<Expression>) -> Result<GaugeTensor> {
        if entries.len() != n * n * n {
            return Err(Error::Config(format!("gauge tensor needs {} entries", n * n * n)));
        }
        Ok(GaugeTensor { n, entries })
    }

    pub fn zero(n: usize) -> GaugeTensor {
        GaugeTensor {
            n,
            entries: vec![Expression::from_node(Node::Num(0.0)); n * n * n],
        }
    }

    /// Random symmetric tensor whose components are polynomials of degree
    /// ≤ 2 in `(x, p)` with coefficients uniform in `[-1, 1]`.
    pub fn random(n: usize, rng: &mut impl Rng) -> GaugeTensor {
        let vars: Vec<Var> = (0..n).map(Var::X).chain((0..n).map(Var::P)).collect();
        let mut entries = vec![Expression::from_node(Node::Num(0.0)); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut terms = vec![Node::Num(rng.gen_range(-1.0..=1.0))];
                    for (a, &va) in vars.iter().enumerate() {
                        terms.push(mul(Node::Num(rng.gen_range(-1.0..=1.0)), Node::Var(va)));
                        for &vb in &vars[a..] {
                            let c = Node::Num(rng.gen_range(-1.0..=1.0));
                            terms.push(mul(mul(c, Node::Var(va)), Node::Var(vb)));
                        }
                    }
                    let sum = terms
                        .into_iter()
                        .reduce(|a, b| Node::Bin(BinOp::Add, Box::new(a), Box::new(b)))
                        .expect("nonempty");
                    let e = Expression::from_node(sum);
                    entries[(k * n + i) * n + j] = e.clone();
                    entries[(k * n + j) * n + i] = e;
                }
            }
        }
        GaugeTensor { n, entries }
    }

    pub fn jets(&self, q: &PhasePoint, order: usize) -> Result<Array3<Jet>> {
        let n = self.n;
        let (x, p) = q.jets(order);
        let env = Env::phase(&x, &p);
        let mut out = Vec::with_capacity(n * n * n);
        for e in &self.entries {
            out.push(e.eval(&env)?);
        }
        let t = Array3::from_shape_vec((n, n, n), out).expect("n^3 entries");
        for k in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (t[[k, i, j]].value(), t[[k, j, i]].value());
                    let diff = (a - b).abs();
                    if diff > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                        return Err(Error::AsymmetricGauge { k, i, j, diff });
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn values(&self, q: &PhasePoint) -> Result<Array3<f64>> {
        Ok(self.jets(q, 0)?.mapv(|j| j.value()))
    }
}

fn mul(a: Node, b: Node) -> Node {
    Node::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

/// Source of connection components `Γ^k_ij(x, p)`.
#[derive(Debug, Clone)]
pub enum ConnectionField {
    Zero { n: usize },
    Canonical(Arc<SystemDefinition>),
    Explicit(ExplicitConnection),
    Gauged { base: Box<ConnectionField>, gauge: GaugeTensor },
}

impl ConnectionField {
    pub fn canonical(sys: &SystemDefinition) -> ConnectionField {
        ConnectionField::Canonical(Arc::new(sys.clone()))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConnectionField::Zero { n } => *n,
            ConnectionField::Canonical(s) => s.dim(),
            ConnectionField::Explicit(e) => e.n,
            ConnectionField::Gauged { base, .. } => base.dim(),
        }
    }

    /// Order of system field jets from which `Γ` jets of `order` are derived,
    /// if the connection is built from the system.
    pub fn field_order(&self, order: usize) -> Option<usize> {
        match self {
            ConnectionField::Canonical(_) => Some(order + 3),
            ConnectionField::Gauged { base, .. } => base.field_order(order),
            _ => None,
        }
    }

    /// Jets of `Γ` at `q`. `fields`, when given, must come from the same system
    /// and point and are reused for canonical connections.
    pub fn gamma_jets(&self, q: &PhasePoint, order: usize, fields: Option<&FieldJets>) -> Result<Array3<Jet>> {
        match self {
            ConnectionField::Zero { n } => {
                let z = Jet::constant(JetSpace::get(2 * n, order), 0.0);
                Ok(Array3::from_elem((*n, *n, *n), z))
            }
            ConnectionField::Canonical(sys) => {
                let f = match fields {
                    Some(f) if f.order() >= order + 3 => f.truncate(order + 3),
                    _ => sys.field_jets(q, order + 3)?,
                };
                canonical_gamma_jets(&f, sys.dim(), sys.cutoff)
            }
            ConnectionField::Explicit(e) => e.jets(q, order),
            ConnectionField::Gauged { base, gauge } => {
                let g = base.gamma_jets(q, order, fields)?;
                let t = gauge.jets(q, order)?;
                let mut out = g;
                out.zip_mut_with(&t, |a, b| *a += b);
                Ok(out)
            }
        }
    }

    pub fn gamma(&self, q: &PhasePoint) -> Result<Array3<f64>> {
        Ok(self.gamma_jets(q, 0, None)?.mapv(|j| j.value()))
    }
}

/// Shifts the connection by `T`. The force covector of the returned
/// connection, computed by [`force_covector`], equals `Q − Σ T^k_is p_k V^s`.
pub fn gauge_transform(conn: &ConnectionField, t: &GaugeTensor) -> Result<ConnectionField> {
    if t.n != conn.dim() {
        return Err(Error::Config("gauge tensor dimension mismatch".into()));
    }
    Ok(ConnectionField::Gauged {
        base: Box::new(conn.clone()),
        gauge: t.clone(),
    })
}

/// `Q'_i = Q_i − Σ_{k,s} T^k_is p_k V^s`.
pub fn gauge_force(q_cov: &[f64], t: &Array3<f64>, p: &[f64], v: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for k in 0..n {
                for r in 0..n {
                    s += t[[k, i, r]] * p[k] * v[r];
                }
            }
            q_cov[i] - s
        })
        .collect()
}

/// Curvature tensors `R^k_rij` and `D^kr_ij`, both stored as `[k][r][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub r: Array4<f64>,
    pub d: Array4<f64>,
}

/// Curvatures from order-1 connection jets.
pub fn curvatures_from_jets(g: &Array3<Jet>, p: &[f64]) -> CurvaturePair {
    let n = p.len();
    let gv = g.mapv(|j| j.value());
    let dx = Array4::from_shape_fn((n, n, n, n), |(k, i, j, m)| g[[k, i, j]].derivative(&[m]));
    let dp = Array4::from_shape_fn((n, n, n, n), |(k, i, j, m)| g[[k, i, j]].derivative(&[n + m]));
    // lift[m][i] = Σ_a p_a Γ^a_mi
    let lift = ndarray::Array2::from_shape_fn((n, n), |(m, i)| (0..n).map(|a| p[a] * gv[[a, m, i]]).sum::<f64>());
    let r = Array4::from_shape_fn((n, n, n, n), |(k, r, i, j)| {
        let mut s = dx[[k, j, r, i]] - dx[[k, i, r, j]];
        for m in 0..n {
            s += gv[[k, i, m]] * gv[[m, j, r]] - gv[[k, j, m]] * gv[[m, i, r]];
            s += lift[[m, i]] * dp[[k, j, r, m]] - lift[[m, j]] * dp[[k, i, r, m]];
        }
        s
    });
    let d = Array4::from_shape_fn((n, n, n, n), |(k, r, i, j)| -dp[[k, i, j, r]]);
    CurvaturePair { r, d }
}

pub fn curvatures(conn: &ConnectionField, q: &PhasePoint) -> Result<CurvaturePair> {
    Ok(curvatures_from_jets(&conn.gamma_jets(q, 1, None)?, &q.p))
}

/// `Q_i = Θ_i − Σ_{j,k} Γ^k_ij p_k V^j` as jets.
pub(crate) fn force_jets(f: &FieldJets, g: &Array3<Jet>, p: &[Jet]) -> Vec<Jet> {
    let n = p.len();
    (0..n)
        .map(|i| {
            let mut s = f.theta[i].clone();
            for j in 0..n {
                for k in 0..n {
                    s -= &(&g[[k, i, j]] * &p[k]) * &f.v[j];
                }
            }
            s
        })
        .collect()
}

pub fn force_covector(sys: &SystemDefinition, conn: &ConnectionField, q: &PhasePoint) -> Result<Array1<f64>> {
    let f = sys.field_jets(q, conn.field_order(0).unwrap_or(0))?;
    let g = conn.gamma_jets(q, 0, Some(&f))?;
    let (_, p) = q.jets(0);
    let f0 = f.truncate(0);
    Ok(force_jets(&f0, &g, &p).iter().map(Jet::value).collect())
}

/// Horizontal covariant derivative of a field given as order-≥1 jets at `q`.
pub fn covariant_derivative(conn: &ConnectionField, field: &JetTensor, q: &PhasePoint) -> Result<ArrayD<f64>> {
    let g = conn.gamma_jets(q, field.order() - 1, None)?;
    let (_, p) = q.jets(field.order() - 1);
    Ok(field.covariant_derivative(&g, &p).values())
}
