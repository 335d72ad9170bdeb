//! Running a scenario file and writing its artifacts.
//!
//! Output directory layout:
//!
//! ```text
//! diagnostics.csv      time,sup,l2,holder_half[,h_residual]
//! convergence.csv      iteration,sup_difference (iterative solvers)
//! consistency.csv      fully nonlinear runs only
//! snapshots/u_NNNNN.fpde
//! heatmaps/u_NNNNN.pgm
//! manifest.json
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{Emit, ScenarioConfig, Solver};
use super::{Check, OUTPUT_ROOT_ENV};
use crate::error::{Error, Result};
use crate::linear::{solve_linear, LinearCoefficients};
use crate::nonlinear::{
    half_heat, hj_critical, reaction, remark_class, solve_fully_nonlinear, NonlinearConfig,
};
use crate::norms::{holder_seminorm, lp_norm};
use crate::quasilinear::{frozen_burgers_1d, solve_quasilinear, sqg, BoundCheck, BOUND_SLACK};
use crate::snapshot;
use crate::spectral::{Grid, ScalarField, VectorField};
use crate::trajectory::Trajectory;

/// Relative slack of the sup-norm monotonicity check.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-6;

/// Why a run that produced artifacts still failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    NotConverged,
    InvariantViolated,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => super::EXIT_OK,
            RunStatus::NotConverged => super::EXIT_DIVERGENCE,
            RunStatus::InvariantViolated => super::EXIT_INVARIANT,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output: PathBuf,
    pub status: RunStatus,
    pub checks: Vec<Check>,
    pub frames: usize,
    pub iterations: Option<usize>,
}

struct Solved {
    u: Trajectory,
    h_residual: Option<Vec<f64>>,
    differences: Option<Vec<f64>>,
    converged: bool,
    bound: Option<BoundCheck>,
    consistency_csv: Option<String>,
    /// Largest relative `|grad u - w|` and the tolerance it is held to.
    consistency: Option<(f64, f64)>,
    /// The flow has no source term, so `|u(t)|_inf` cannot grow.
    max_principle: bool,
}

/// Output directory for `cfg`: `run.output` (default `runs/<preset>`), under
/// `$FPDE_OUTPUT_ROOT` when that is set and the path is relative.
pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
    output_dir_under(cfg, root.as_deref())
}

/// As [`output_dir`] with an explicit root.
pub fn output_dir_under(cfg: &ScenarioConfig, root: Option<&Path>) -> PathBuf {
    let rel = cfg
        .run
        .output
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(cfg.preset_name()));
    match root {
        Some(root) if rel.is_relative() => root.join(rel),
        _ => rel,
    }
}

/// Parses, validates and runs the scenario at `path`. Nothing is written when
/// the configuration is rejected.
pub fn run_scenario(path: &Path) -> Result<RunSummary> {
    let (cfg, text) = ScenarioConfig::load(path)?;
    let dir = output_dir(&cfg);
    run_scenario_in(&cfg, &text, &dir)
}

/// Runs an already parsed scenario, writing artifacts into `dir`. `text` is
/// the source the manifest hash is taken of.
pub fn run_scenario_in(cfg: &ScenarioConfig, text: &str, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let phi = cfg.initial(&grid)?;
    log::info!(
        "{} / {} on {}-D grid n = {}",
        cfg.run.solver.name(),
        cfg.preset_name(),
        grid.dim(),
        grid.n()
    );
    let solved = solve(cfg, &grid, &phi)?;

    let mut checks = Vec::new();
    if solved.max_principle {
        let s0 = phi.sup_norm();
        let growth = solved
            .u
            .frames()
            .iter()
            .map(|f| f.sup_norm() - s0)
            .fold(f64::NEG_INFINITY, f64::max);
        let limit = MAX_PRINCIPLE_SLACK * s0.max(f64::MIN_POSITIVE);
        checks.push(Check::le("max-principle", growth, limit));
    }
    if let Some(b) = &solved.bound {
        checks.push(Check::le("sup-bound", b.lhs, b.rhs + BOUND_SLACK));
    }
    if let Some((value, tol)) = solved.consistency {
        checks.push(Check::le("gradient-consistency", value, tol));
    }
    let status = if !solved.converged {
        RunStatus::NotConverged
    } else if checks.iter().any(|c| !c.passed) {
        RunStatus::InvariantViolated
    } else {
        RunStatus::Ok
    };

    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let emit = |e| cfg.run.emit.contains(&e);
    if emit(Emit::Csv) {
        fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&solved)?)?;
        files.push("diagnostics.csv".to_string());
        if let Some(d) = &solved.differences {
            let mut s = String::from("iteration,sup_difference\n");
            for (i, v) in d.iter().enumerate() {
                writeln!(s, "{},{v:e}", i + 1).unwrap();
            }
            fs::write(dir.join("convergence.csv"), s)?;
            files.push("convergence.csv".into());
        }
        if let Some(c) = &solved.consistency_csv {
            fs::write(dir.join("consistency.csv"), c)?;
            files.push("consistency.csv".into());
        }
    }
    let frames = scalar_frames(&solved.u);
    if emit(Emit::Snapshots) {
        fs::create_dir_all(dir.join("snapshots"))?;
        for (i, (name, f)) in frames.iter().enumerate() {
            let file = format!("snapshots/{name}_{:05}.fpde", i / name_count(&solved.u));
            snapshot::save(&dir.join(&file), f)?;
            files.push(file);
        }
    }
    let mut heatmaps = Vec::new();
    if emit(Emit::Heatmaps) {
        fs::create_dir_all(dir.join("heatmaps"))?;
        for (i, (name, f)) in frames.iter().enumerate() {
            let file = format!("heatmaps/{name}_{:05}.pgm", i / name_count(&solved.u));
            let (bytes, lo, hi) = heatmap(f);
            fs::write(dir.join(&file), bytes)?;
            heatmaps.push(serde_json::json!({ "file": file, "min": lo, "max": hi }));
            files.push(file);
        }
    }

    let manifest = serde_json::json!({
        "config_sha256": hex::encode(Sha256::digest(text.as_bytes())),
        "seed": cfg.run.seed,
        "solver": cfg.run.solver.name(),
        "preset": cfg.preset_name(),
        "grid": { "dim": grid.dim(), "n": grid.n(), "period": grid.period() },
        "versions": {
            "fpde-core": env!("CARGO_PKG_VERSION"),
            "snapshot-format": snapshot::VERSION,
        },
        "frames": solved.u.len(),
        "times": solved.u.times(),
        "converged": solved.converged,
        "iterations": solved.differences.as_ref().map(Vec::len),
        "status": status,
        "exit_code": status.exit_code(),
        "checks": checks,
        "heatmap_normalization": "per image: 0 = min, 255 = max",
        "heatmaps": heatmaps,
        "files": files,
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invariant(e.to_string()))?,
    )?;
    Ok(RunSummary {
        output: dir.to_path_buf(),
        status,
        checks,
        frames: solved.u.len(),
        iterations: solved.differences.as_ref().map(Vec::len),
    })
}

fn solve(cfg: &ScenarioConfig, grid: &Grid, phi: &ScalarField) -> Result<Solved> {
    let stepper = cfg.stepper()?;
    let p = &cfg.problem;
    match cfg.run.solver {
        Solver::Linear => {
            let (a, a0, a1) = cfg.linear_bounds(grid)?;
            let mut coeffs = LinearCoefficients::new(a, a0, a1);
            if let Some(b) = &p.b {
                let comps = b
                    .iter()
                    .enumerate()
                    .map(|(j, s)| s.sample(grid, &format!("problem.b[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                coeffs = coeffs.with_b(VectorField::new(comps)?);
            }
            if let Some(f) = &p.f {
                coeffs = coeffs.with_f(f.sample(grid, "problem.f")?);
            }
            let u = solve_linear(phi, &coeffs, &stepper)?;
            Ok(Solved {
                u,
                h_residual: None,
                differences: None,
                converged: true,
                bound: None,
                consistency_csv: None,
                consistency: None,
                max_principle: p.f.is_none(),
            })
        }
        Solver::Quasilinear => {
            let kappa = p.kappa.unwrap_or(1.0);
            let problem = match cfg.preset_name() {
                "sqg" => sqg(grid, kappa)?,
                "frozen-burgers-1d" => frozen_burgers_1d(grid, kappa)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown quasilinear preset `{other}`"
                    )))
                }
            };
            let sol = solve_quasilinear(&phi.clone().into(), &problem, &cfg.picard()?, &stepper)?;
            Ok(Solved {
                u: sol.trajectory,
                h_residual: None,
                differences: Some(sol.differences),
                converged: sol.converged,
                bound: sol.bound,
                consistency_csv: None,
                consistency: None,
                max_principle: true,
            })
        }
        Solver::FullyNonlinear => {
            let dim = grid.dim();
            let problem = match cfg.preset_name() {
                "half-heat" => half_heat(dim, p.drift.as_deref().unwrap_or(&[]))?,
                "hj-critical" => hj_critical(dim, p.h.unwrap_or(1.0)),
                "reaction" => reaction(dim, p.rate.unwrap_or(1.0)),
                "remark-class" => remark_class(dim, cfg.remark_params())
                    .map_err(|e| Error::Config(e.to_string()))?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown fully-nonlinear preset `{other}`"
                    )))
                }
            };
            let dt = match stepper.dt {
                crate::linear::TimeStep::Fixed(dt) => dt,
                crate::linear::TimeStep::Auto => {
                    return Err(Error::Config(
                        "the fully nonlinear solver needs a fixed stepper.dt".into(),
                    ))
                }
            };
            let nl = NonlinearConfig {
                stepper_scheme: stepper.scheme,
                dt,
                t_end: stepper.t_end,
                inner: cfg.picard()?,
                outer_tol: cfg.outer.tol,
                outer_max_iters: cfg.outer.max_iters,
                consistency_tol: cfg.outer.consistency_tol,
                check_partials: cfg.outer.check_partials,
            };
            // F(t, x, 0, 0, 0) = 0 with no u-dependence that could feed growth
            let max_principle = matches!(cfg.preset_name(), "half-heat");
            let sol = solve_fully_nonlinear(phi, &problem, &nl)?;
            let u = thin(&sol.u, stepper.snapshot_stride)?;
            let keep: Vec<usize> = kept_indices(sol.u.len(), stepper.snapshot_stride);
            let h = keep.iter().map(|&i| sol.report.h_residual[i]).collect();
            Ok(Solved {
                u,
                h_residual: Some(h),
                differences: Some(sol.differences),
                converged: sol.converged && sol.inner_converged,
                bound: sol.bound,
                consistency_csv: Some(sol.report.to_csv()),
                consistency: Some((sol.report.max_h_relative(), cfg.outer.consistency_tol)),
                max_principle,
            })
        }
    }
}

/// Every `stride`-th frame plus the last one.
fn kept_indices(len: usize, stride: usize) -> Vec<usize> {
    (0..len)
        .filter(|&i| i % stride == 0 || i + 1 == len)
        .collect()
}

fn thin(tr: &Trajectory, stride: usize) -> Result<Trajectory> {
    if stride <= 1 {
        return Ok(tr.clone());
    }
    let mut out = Trajectory::new(tr.grid(), tr.components());
    for i in kept_indices(tr.len(), stride) {
        out.push(tr.times()[i], tr.frame(i).clone())?;
    }
    Ok(out)
}

fn name_count(tr: &Trajectory) -> usize {
    tr.components()
}

fn scalar_frames(tr: &Trajectory) -> Vec<(String, ScalarField)> {
    let m = tr.components();
    tr.frames()
        .iter()
        .flat_map(|f| {
            f.components().iter().enumerate().map(move |(c, s)| {
                let name = if m == 1 {
                    "u".to_string()
                } else {
                    format!("u{c}")
                };
                (name, s.clone())
            })
        })
        .collect()
}

/// Pointwise Euclidean magnitude for systems, the field itself for scalars.
fn monitored(f: &VectorField) -> ScalarField {
    if f.len() == 1 {
        f.component(0).clone()
    } else {
        f.magnitude()
    }
}

fn diagnostics_csv(s: &Solved) -> Result<String> {
    let mut out = String::from("time,sup,l2,holder_half");
    if s.h_residual.is_some() {
        out.push_str(",h_residual");
    }
    out.push('\n');
    for (i, (t, f)) in s.u.times().iter().zip(s.u.frames()).enumerate() {
        let g = monitored(f);
        let holder = holder_seminorm(&g, 0.5)?.value;
        write!(
            out,
            "{t:e},{:e},{:e},{holder:e}",
            g.sup_norm(),
            lp_norm(&g, 2.0)?
        )
        .unwrap();
        if let Some(h) = &s.h_residual {
            write!(out, ",{:e}", h[i]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// 8-bit binary PGM of `f`, min/max normalised. 2-D fields map axis 0 to
/// columns and axis 1 to rows; 1-D fields give a single row; 3-D fields are
/// cut at `x_3 = 0`.
pub fn heatmap(f: &ScalarField) -> (Vec<u8>, f64, f64) {
    let g = f.grid();
    let n = g.n();
    let (w, h) = match g.dim() {
        1 => (n, 1),
        _ => (n, n),
    };
    let at = |col: usize, row: usize| -> f64 {
        let idx = match g.dim() {
            1 => g.flatten(&[col]),
            2 => g.flatten(&[col, row]),
            _ => g.flatten(&[col, row, 0]),
        };
        f.values()[idx]
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in 0..h {
        for col in 0..w {
            let v = at(col, row);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    let span = hi - lo;
    // row 0 at the top is the largest x_2
    for row in (0..h).rev() {
        for col in 0..w {
            let v = at(col, row);
            let level = if span > 0.0 {
                ((v - lo) / span * 255.0).round()
            } else {
                0.0
            };
            bytes.push(level as u8);
        }
    }
    (bytes, lo, hi)
}
