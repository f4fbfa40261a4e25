//! Command-line front end. Every subcommand ends its stdout with
//! `RESULT <command> <PASS|FAIL> max_residual=<r>`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{SurfaceConfig, SystemConfig};
use crate::connection::ConnectionField;
use crate::crosscheck::{gamma_gap, gauge_invariance, hamiltonian_of_riemannian, jet_probe_gap, riemannian_hamiltonian_gap};
use crate::dynamics::{format_row, IntegratorConfig};
use crate::error::{Error, Result};
use crate::fields::{parse_expression, Expression};
use crate::hypersurface::{simulate_shift, solve_nu, verify_orthogonality, Hypersurface, NuSolution, NuSource, Orthogonality};
use crate::legendre::SystemDefinition;
use crate::normality::{normality_report, Tolerances};
use crate::sampler::{PointSampler, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "nsl", version, about = "Normality checks and normal-shift simulation for Newtonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// System config (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Number of sampled phase points (or gauge tensors for `gauge-test`).
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Pass threshold; each command has its own default.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    /// Surface config (JSON).
    #[arg(long)]
    pub surface: PathBuf,
    /// Value of ν at the grid node nearest the domain center.
    #[arg(long, default_value_t = 1.0)]
    pub nu0: f64,
    /// Overrides the node count along every parameter axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct IntegratorArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weak and additional normality residuals on sampled points.
    CheckNormality(Common),
    /// Integrates the Pfaff system for ν over the surface grid.
    SolveNu {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceArgs,
    },
    /// Shifts the surface along trajectories and checks orthogonality.
    SimulateShift {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        /// Use ν ≡ nu0 instead of the Pfaff solution.
        #[arg(long)]
        constant_nu: bool,
    },
    /// Invariance of α and the residuals under random gauge tensors.
    GaugeTest(Common),
    /// Canonical connection, trajectory equivalence and jet oracles.
    CrossCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckNormality(_) => "check-normality",
            Command::SolveNu { .. } => "solve-nu",
            Command::SimulateShift { .. } => "simulate-shift",
            Command::GaugeTest(_) => "gauge-test",
            Command::CrossCheck { .. } => "cross-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::CheckNormality(c) | Command::GaugeTest(c) => c,
            Command::SolveNu { common, .. } | Command::SimulateShift { common, .. } | Command::CrossCheck { common, .. } => common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub max_residual: f64,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let name = cli.command.name();
    match execute(&cli.command) {
        Ok(o) => {
            println!(
                "RESULT {name} {} max_residual={:.16e}",
                if o.passed { "PASS" } else { "FAIL" },
                o.max_residual
            );
            if o.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("RESULT {name} FAIL max_residual=NaN");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(k) = std::env::var("NSL_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

fn tolerance(c: &Common, default: f64) -> Result<f64> {
    let t = c.tol.unwrap_or(default);
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Config(format!("tolerance must be positive, got {t}")))
    }
}

fn load_system(c: &Common) -> Result<(SystemConfig, SystemDefinition, ConnectionField)> {
    let cfg = SystemConfig::load(&c.system)?;
    let sys = cfg.system()?;
    let conn = cfg.connection(&sys)?;
    Ok((cfg, sys, conn))
}

fn load_surface(s: &SurfaceArgs, n: usize) -> Result<Hypersurface> {
    let mut cfg = SurfaceConfig::load(&s.surface)?;
    if let Some(g) = s.grid {
        cfg.grid = vec![g; cfg.params];
    }
    let surf = cfg.surface()?;
    if surf.dim() != n {
        return Err(Error::Config(format!("surface lives in dimension {}, system in {n}", surf.dim())));
    }
    Ok(surf)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Grid node nearest the center of the parameter box.
fn center_node(surf: &Hypersurface) -> Vec<f64> {
    (0..surf.params())
        .map(|a| {
            let axis = surf.axis(a);
            axis[(axis.len() - 1) / 2]
        })
        .collect()
}

fn solve(sys: &SystemDefinition, conn: &ConnectionField, surf: &Hypersurface, nu0: f64) -> Result<NuSolution> {
    solve_nu(sys, conn, surf, &center_node(surf), nu0)
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    let c = cmd.common();
    match cmd {
        Command::CheckNormality(_) => {
            let tol = tolerance(c, 1e-7)?;
            let (_, sys, conn) = load_system(c)?;
            let points = PointSampler::new(c.points, c.seed).sample(sys.dim());
            let rep = normality_report(&sys, &conn, &points, Tolerances::uniform(tol))?;
            let mut out = create(&c.out_dir, "normality.csv")?;
            rep.write_csv(&mut out)?;
            out.flush()?;
            let show = |s: Option<crate::normality::Stats>| {
                s.map_or("N/A".to_string(), |s| format!("max={:.3e} median={:.3e}", s.max, s.median))
            };
            println!("points: {}  violations: {}", rep.rows.len(), rep.violations());
            println!("weak: {}", show(rep.weak));
            println!("additional: {}", show(rep.additional));
            Ok(Outcome {
                passed: rep.passed,
                max_residual: rep.max_residual(),
            })
        }
        Command::SolveNu { surface, .. } => {
            let tol = tolerance(c, 1e-8)?;
            let (_, sys, conn) = load_system(c)?;
            let surf = load_surface(surface, sys.dim())?;
            let sol = solve(&sys, &conn, &surf, surface.nu0)?;
            let mut out = create(&c.out_dir, "nu.csv")?;
            let mut header: Vec<String> = (1..=surf.params()).map(|i| format!("y{i}")).collect();
            header.push("nu".into());
            writeln!(out, "{}", header.join(","))?;
            for idx in ndarray::indices(sol.values.raw_dim()) {
                let idx: Vec<usize> = ndarray::Dimension::slice(&idx).to_vec();
                let mut row: Vec<f64> = idx.iter().enumerate().map(|(a, &k)| sol.axes[a][k]).collect();
                row.push(sol.at(&idx));
                writeln!(out, "{}", format_row(&row))?;
            }
            out.flush()?;
            println!("path residual: {:.3e}", sol.path_residual);
            Ok(Outcome {
                passed: sol.path_residual <= tol,
                max_residual: sol.path_residual,
            })
        }
        Command::SimulateShift {
            surface,
            integrator,
            constant_nu,
            ..
        } => {
            let tol = tolerance(c, 1e-6)?;
            let (_, sys, conn) = load_system(c)?;
            let surf = load_surface(surface, sys.dim())?;
            let cfg = IntegratorConfig::new(integrator.step, integrator.t_end);
            let sol;
            let source = if *constant_nu {
                NuSource::Constant(surface.nu0)
            } else {
                sol = solve(&sys, &conn, &surf, surface.nu0)?;
                NuSource::Solved(&sol)
            };
            let run = simulate_shift(&sys, &conn, &surf, source, &cfg)?;
            let mut out = create(&c.out_dir, "shift.csv")?;
            run.write_csv(&mut out)?;
            out.flush()?;
            let rep = verify_orthogonality(&run, tol);
            let mut out = create(&c.out_dir, "orthogonality.csv")?;
            writeln!(out, "t,max_phi")?;
            for (t, m) in rep.times.iter().zip(&rep.max_phi) {
                writeln!(out, "{}", format_row(&[*t, *m]))?;
            }
            out.flush()?;
            match rep.verdict {
                Orthogonality::Normal => println!("verdict: NORMAL"),
                Orthogonality::Violation { t, value } => println!("verdict: violation at t={t:.6} (|phi|={value:.3e})"),
            }
            Ok(Outcome {
                passed: rep.verdict == Orthogonality::Normal,
                max_residual: rep.max(),
            })
        }
        Command::GaugeTest(_) => {
            let tol = tolerance(c, 1e-7)?;
            let (_, sys, conn) = load_system(c)?;
            let points = PointSampler::new(c.points, c.seed).sample(sys.dim());
            let rep = gauge_invariance(&sys, &conn, &points, c.seed)?;
            println!("gauges: {}  alpha change: {:.3e}", rep.gauges, rep.alpha_change);
            let worst = rep.alpha_change.max(rep.residual_change);
            Ok(Outcome {
                passed: worst <= tol,
                max_residual: worst,
            })
        }
        Command::CrossCheck { integrator, .. } => {
            let tol = tolerance(c, 1e-6)?;
            let (cfg, sys, _) = load_system(c)?;
            let n = sys.dim();
            let points = PointSampler::new(c.points, c.seed).sample(n);
            let mut rows: Vec<(String, usize, f64)> = Vec::new();
            for (k, q) in points.iter().enumerate() {
                let (gap, size) = gamma_gap(&sys, q)?;
                rows.push(("gamma".into(), k, gap / (1.0 + size)));
            }
            let mut probes: Vec<Expression> = Vec::new();
            if let (Some(v), Some(t)) = (&cfg.v, &cfg.theta) {
                for e in v.iter().chain(t) {
                    probes.push(parse_expression(e, n)?);
                }
            }
            if let Some(h) = &cfg.hamiltonian {
                probes.push(parse_expression(h, n)?);
            }
            if let Some(w) = &cfg.w {
                let w = parse_expression(w, n)?;
                probes.push(hamiltonian_of_riemannian(&w, n));
                let starts = PointSampler::new(c.points.min(10), c.seed).with_p_range(0.5, 2.0).sample(n);
                let icfg = IntegratorConfig::new(integrator.step, integrator.t_end);
                for (k, q) in starts.iter().enumerate() {
                    rows.push(("trajectory".into(), k, riemannian_hamiltonian_gap(&w, n, q, &icfg)?));
                }
            }
            for (k, q) in points.iter().enumerate() {
                let mut worst: f64 = 0.0;
                for e in &probes {
                    worst = worst.max(jet_probe_gap(e, q)?);
                }
                rows.push(("jet_probe".into(), k, worst));
            }
            let mut out = create(&c.out_dir, "crosscheck.csv")?;
            writeln!(out, "check,index,value")?;
            for (name, k, v) in &rows {
                writeln!(out, "{name},{k},{v:.16e}")?;
            }
            out.flush()?;
            for name in ["gamma", "trajectory", "jet_probe"] {
                let m = rows.iter().filter(|r| r.0 == name).map(|r| r.2).fold(f64::NAN, f64::max);
                if !m.is_nan() {
                    println!("{name}: max {m:.3e}");
                }
            }
            let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
            Ok(Outcome {
                passed: worst <= tol,
                max_residual: worst,
            })
        }
    }
}
