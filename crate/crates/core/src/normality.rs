//! Pointwise residuals of the weak and additional normality equations.

use std::io::Write;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::connection::ConnectionField;
use crate::dynamics::{format_row, LocalGeometry, WeakFieldBundle};
use crate::error::{Error, Result};
use crate::fields::PhasePoint;
use crate::legendre::SystemDefinition;

/// `A^{rs}`, `B^r_s`, `C_{rs}` and the trace factor `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcTensors {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
    pub lambda: f64,
}

impl AbcTensors {
    pub fn from_geometry(g: &LocalGeometry) -> AbcTensors {
        let n = g.dim();
        let p = &g.point.p;
        let (d, r) = (&g.curv.d, &g.curv.r);
        let om = g.omega;
        let a = Array2::from_shape_fn((n, n), |(r_, s)| g.mgrad_w[[s, r_]]);
        let b = Array2::from_shape_fn((n, n), |(r_, s)| {
            let mut v = g.mgrad_u[[s, r_]] - g.nabla_w[[r_, s]];
            for m in 0..n {
                for k in 0..n {
                    v += g.w[k] * p[m] * d[[m, r_, k, s]];
                }
                v += (g.mgrad_w[[r_, m]] - g.mgrad_w[[m, r_]]) / om * g.u[s] * p[m];
            }
            v
        });
        let c = Array2::from_shape_fn((n, n), |(r_, s)| {
            let mut v = g.nabla_u[[s, r_]];
            for m in 0..n {
                v -= (g.u[r_] * g.mgrad_u[[s, m]] + g.u[s] * g.nabla_w[[m, r_]]) * p[m] / om;
            }
            for k in 0..n {
                for q in 0..n {
                    let mut inner = r[[q, k, r_, s]] / 2.0;
                    for m in 0..n {
                        inner += d[[m, q, k, s]] * g.u[r_] * p[m] / om;
                    }
                    v -= inner * g.w[k] * p[q];
                }
            }
            v
        });
        let mut tr = 0.0;
        for r_ in 0..n {
            for s in 0..n {
                tr += b[[r_, s]] * g.p_proj[[s, r_]];
            }
        }
        AbcTensors {
            a,
            b,
            c,
            lambda: tr / (n as f64 - 1.0),
        }
    }
}

pub fn abc_tensors(sys: &SystemDefinition, conn: &ConnectionField, q: &PhasePoint) -> Result<AbcTensors> {
    Ok(AbcTensors::from_geometry(&LocalGeometry::new(sys, conn, q)?))
}

/// Weak (`Σ α^r P^k_r`, `Σ η_r P^r_k`) and additional residuals at one point.
/// The additional residuals are `None` in dimension 2, where the equations
/// are vacuous.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalityResidual {
    pub weak1: Array1<f64>,
    pub weak2: Array1<f64>,
    pub add_a: Option<Array2<f64>>,
    pub add_b: Option<Array2<f64>>,
    pub add_c: Option<Array2<f64>>,
    pub max_abs: f64,
    pub weak_max: f64,
    pub additional_max: Option<f64>,
    /// Weak maximum divided by `1 + ‖α‖ + ‖η‖`.
    pub weak_normalized: f64,
    /// Additional maximum divided by `1 + ‖A‖ + ‖B‖ + ‖C‖`.
    pub additional_normalized: Option<f64>,
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn weak_parts(g: &LocalGeometry, wf: &WeakFieldBundle) -> (Array1<f64>, Array1<f64>) {
    let n = g.dim();
    let w1 = (0..n)
        .map(|k| (0..n).map(|r| wf.alpha[r] * g.p_proj[[k, r]]).sum())
        .collect();
    let w2 = (0..n)
        .map(|k| (0..n).map(|r| wf.eta[r] * g.p_proj[[r, k]]).sum())
        .collect();
    (w1, w2)
}

fn additional_parts(g: &LocalGeometry, t: &AbcTensors) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let n = g.dim();
    let pp = &g.p_proj;
    let add_a = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut s = 0.0;
        for r in 0..n {
            for q in 0..n {
                s += (t.a[[r, q]] - t.a[[q, r]]) * pp[[i, r]] * pp[[j, q]];
            }
        }
        s
    });
    let add_c = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut s = 0.0;
        for r in 0..n {
            for q in 0..n {
                s += (t.c[[r, q]] - t.c[[q, r]]) * pp[[r, i]] * pp[[q, j]];
            }
        }
        s
    });
    let pbp = pp.dot(&t.b).dot(pp);
    let add_b = &pbp - &(pp * t.lambda);
    (add_a, add_b, add_c)
}

impl NormalityResidual {
    pub fn from_geometry(g: &LocalGeometry) -> NormalityResidual {
        let wf = g.weak_fields();
        let (weak1, weak2) = weak_parts(g, &wf);
        let weak_max = max_abs(weak1.iter().chain(&weak2));
        let weak_normalized = weak_max / (1.0 + max_abs(&wf.alpha) + max_abs(&wf.eta));
        let (add_a, add_b, add_c, additional_max, additional_normalized) = if g.dim() >= 3 {
            let t = AbcTensors::from_geometry(g);
            let (a, b, c) = additional_parts(g, &t);
            let m = max_abs(a.iter().chain(&b).chain(&c));
            let scale = 1.0 + max_abs(&t.a) + max_abs(&t.b) + max_abs(&t.c);
            (Some(a), Some(b), Some(c), Some(m), Some(m / scale))
        } else {
            (None, None, None, None, None)
        };
        NormalityResidual {
            max_abs: weak_max.max(additional_max.unwrap_or(0.0)),
            weak1,
            weak2,
            add_a,
            add_b,
            add_c,
            weak_max,
            additional_max,
            weak_normalized,
            additional_normalized,
        }
    }

    fn part_max(m: &Option<Array2<f64>>) -> Option<f64> {
        m.as_ref().map(max_abs)
    }
}

pub fn weak_residuals(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    q: &PhasePoint,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let g = LocalGeometry::new(sys, conn, q)?;
    Ok(weak_parts(&g, &g.weak_fields()))
}

/// `(addA, addB, addC)`; empty matrices when `n = 2`.
pub fn additional_residuals(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    q: &PhasePoint,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    if sys.dim() < 3 {
        let e = Array2::zeros((0, 0));
        return Ok((e.clone(), e.clone(), e));
    }
    let g = LocalGeometry::new(sys, conn, q)?;
    Ok(additional_parts(&g, &AbcTensors::from_geometry(&g)))
}

pub fn normality_residual(sys: &SystemDefinition, conn: &ConnectionField, q: &PhasePoint) -> Result<NormalityResidual> {
    Ok(NormalityResidual::from_geometry(&LocalGeometry::new(sys, conn, q)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub weak: f64,
    pub additional: f64,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Tolerances {
        Tolerances {
            weak: tol,
            additional: tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub point: PhasePoint,
    pub residual: std::result::Result<NormalityResidual, String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub max: f64,
    pub median: f64,
}

fn stats(mut v: Vec<f64>) -> Option<Stats> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) };
    Some(Stats {
        max: v[v.len() - 1],
        median,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub n: usize,
    pub rows: Vec<ReportRow>,
    pub tolerances: Tolerances,
    pub weak: Option<Stats>,
    pub additional: Option<Stats>,
    pub passed: bool,
}

impl BatchReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.passed).count()
    }

    /// Largest raw residual over all evaluated points (infinite if any point failed to evaluate).
    pub fn max_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual.as_ref().map(|x| x.max_abs).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let n = self.n;
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=n).map(|i| format!("p{i}")));
        header.extend(
            ["weak1_max", "weak2_max", "addA_max", "addB_max", "addC_max", "verdict"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(out, "{}", header.join(","))?;
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_else(|| "NA".into());
        for row in &self.rows {
            let coords: Vec<f64> = row.point.x.iter().chain(&row.point.p).copied().collect();
            let tail = match &row.residual {
                Ok(r) => format!(
                    "{:.16e},{:.16e},{},{},{},{}",
                    max_abs(&r.weak1),
                    max_abs(&r.weak2),
                    fmt_opt(NormalityResidual::part_max(&r.add_a)),
                    fmt_opt(NormalityResidual::part_max(&r.add_b)),
                    fmt_opt(NormalityResidual::part_max(&r.add_c)),
                    if row.passed { "PASS" } else { "FAIL" }
                ),
                Err(_) => "NaN,NaN,NaN,NaN,NaN,ERROR".to_string(),
            };
            writeln!(out, "{},{}", format_row(&coords), tail)?;
        }
        Ok(())
    }
}

/// Evaluates residuals at every point in parallel and aggregates them.
pub fn normality_report(
    sys: &SystemDefinition,
    conn: &ConnectionField,
    points: &[PhasePoint],
    tol: Tolerances,
) -> Result<BatchReport> {
    if points.is_empty() {
        return Err(Error::EmptySampler);
    }
    let rows: Vec<ReportRow> = points
        .par_iter()
        .map(|q| {
            let residual = normality_residual(sys, conn, q).map_err(|e| e.to_string());
            let passed = match &residual {
                Ok(r) => r.weak_max <= tol.weak && r.additional_max.is_none_or(|m| m <= tol.additional),
                Err(_) => false,
            };
            ReportRow {
                point: q.clone(),
                residual,
                passed,
            }
        })
        .collect();
    let ok = || rows.iter().filter_map(|r| r.residual.as_ref().ok());
    let weak = stats(ok().map(|r| r.weak_max).collect());
    let additional = stats(ok().filter_map(|r| r.additional_max).collect());
    let passed = rows.iter().all(|r| r.passed);
    Ok(BatchReport {
        n: sys.dim(),
        rows,
        tolerances: tol,
        weak,
        additional,
        passed,
    })
}
