//! Picard iteration for quasi-linear nonlocal systems
//!
//! `d_t u + a(u, R_a u) (-Delta)^{1/2} u + b(u, R_b u) . grad u = f(u, R_f u)`
//!
//! where `u` has `m` components and `R_a, R_b, R_f` are Fourier multipliers.
//! Each iterate solves the linear system with coefficients frozen along the
//! whole previous trajectory.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::{solve_system, CoefficientSource, FrozenCoefficients, StepperConfig};
use crate::spectral::{Grid, MultiplierOp, ScalarField, VectorField};
use crate::trajectory::Trajectory;

/// Arguments of the coefficient callbacks at one space-time point.
#[derive(Clone, Copy, Debug)]
pub struct PointState<'a> {
    pub t: f64,
    pub x: &'a [f64],
    /// `u(t, x)`, `m` entries.
    pub u: &'a [f64],
    /// `(R u)(t, x)` for the operator attached to the coefficient.
    pub r: &'a [f64],
    /// Values of the auxiliary trajectory, if the problem has one.
    pub aux: &'a [f64],
}

pub type ScalarCallback = Arc<dyn Fn(&PointState) -> f64 + Send + Sync>;
/// Writes its result into the output slice.
pub type VectorCallback = Arc<dyn Fn(&PointState, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct QuasilinearProblem {
    pub name: String,
    pub grid: Grid,
    pub m: usize,
    pub a_fn: ScalarCallback,
    /// `d` outputs; `None` means no drift.
    pub b_fn: Option<VectorCallback>,
    /// `m` outputs; `None` means no forcing.
    pub f_fn: Option<VectorCallback>,
    pub r_a: Option<MultiplierOp>,
    pub r_b: Option<MultiplierOp>,
    pub r_f: Option<MultiplierOp>,
    pub a0: f64,
    pub a1: f64,
    /// Growth constant in `<u, f> <= C_f (|u|^2 + 1)`.
    pub c_f: Option<f64>,
    pub hypothesis_check: bool,
    /// Radius `R` of the smooth cutoff applied to `f`: unchanged for
    /// `|u| <= R`, zero for `|u| >= R + 1`.
    pub f_clamp: Option<f64>,
    /// Extra fields handed to the callbacks through [`PointState::aux`].
    pub aux: Option<Trajectory>,
    /// Remove the spatial mean of each forcing component (and record it).
    pub subtract_forcing_mean: bool,
}

impl QuasilinearProblem {
    /// Constant `a`, no drift, no forcing.
    pub fn new(name: &str, grid: &Grid, m: usize, a: f64) -> Self {
        QuasilinearProblem {
            name: name.to_string(),
            grid: grid.clone(),
            m,
            a_fn: Arc::new(move |_| a),
            b_fn: None,
            f_fn: None,
            r_a: None,
            r_b: None,
            r_f: None,
            a0: a,
            a1: a,
            c_f: None,
            hypothesis_check: false,
            f_clamp: None,
            aux: None,
            subtract_forcing_mean: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::arg("system size m must be at least 1"));
        }
        if !(self.a0.is_finite() && self.a0 > 0.0) {
            return Err(Error::arg(format!("a0 must be > 0, got {}", self.a0)));
        }
        for (label, op, cols) in [
            ("R_a", &self.r_a, self.m),
            ("R_b", &self.r_b, self.m),
            ("R_f", &self.r_f, self.m),
        ] {
            if let Some(op) = op {
                self.grid.check_same(op.grid())?;
                if op.shape().1 != cols {
                    return Err(Error::arg(format!(
                        "{label} = `{}` takes {} inputs but the system has m = {}",
                        op.name(),
                        op.shape().1,
                        self.m
                    )));
                }
            }
        }
        if let Some(r) = self.f_clamp {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::arg(format!(
                    "f-clamp radius must be positive, got {r}"
                )));
            }
        }
        if let Some(c) = self.c_f {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::arg(format!("C_f must be >= 0, got {c}")));
            }
        }
        if let Some(aux) = &self.aux {
            self.grid.check_same(aux.grid())?;
        }
        Ok(())
    }
}

/// Smooth cutoff: 1 on `[0, r]`, 0 on `[r + 1, inf)`, `C^inf` in between.
pub fn smooth_cutoff(s: f64, r: f64) -> f64 {
    fn psi(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }
    let z = s - r;
    if z <= 0.0 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        let a = psi(1.0 - z);
        a / (a + psi(z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PicardConfig {
    pub tol_sup: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            tol_sup: 1e-8,
            max_iters: 50,
            damping: 1.0,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_sup.is_finite() && self.tol_sup > 0.0) {
            return Err(Error::arg(format!(
                "tol_sup must be > 0, got {}",
                self.tol_sup
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::arg(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Coefficients of one Picard step: the problem evaluated on the previous
/// iterate at each requested time.
struct Frozen<'a> {
    problem: &'a QuasilinearProblem,
    prev: &'a Trajectory,
    forcing_means: Mutex<Vec<(f64, f64)>>,
}

fn apply_op(op: &Option<MultiplierOp>, u: &VectorField) -> Result<Option<VectorField>> {
    op.as_ref().map(|op| op.apply(u)).transpose()
}

fn point_values(v: Option<&VectorField>, i: usize, out: &mut Vec<f64>) {
    out.clear();
    if let Some(v) = v {
        out.extend(v.components().iter().map(|c| c.values()[i]));
    }
}

impl CoefficientSource for Frozen<'_> {
    fn at(&self, t: f64) -> Result<FrozenCoefficients> {
        let p = self.problem;
        let grid = &p.grid;
        let d = grid.dim();
        let m = p.m;
        let u = self.prev.at(t)?;
        let ra = apply_op(&p.r_a, &u)?;
        let rb = apply_op(&p.r_b, &u)?;
        let rf = apply_op(&p.r_f, &u)?;
        let aux = p.aux.as_ref().map(|a| a.at(t)).transpose()?;
        let has_b = p.b_fn.is_some();
        let has_f = p.f_fn.is_some();
        let width = 1 + if has_b { d } else { 0 } + if has_f { m } else { 0 };
        let rows: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new(), Vec::new()),
                |(uu, r, aux_v), i| {
                    let x = grid.coord(i);
                    point_values(Some(&u), i, uu);
                    point_values(aux.as_ref(), i, aux_v);
                    let mut out = Vec::with_capacity(width);
                    point_values(ra.as_ref(), i, r);
                    let base = PointState {
                        t,
                        x: &x[..d],
                        u: uu,
                        r,
                        aux: aux_v,
                    };
                    out.push((p.a_fn)(&base));
                    if let Some(b_fn) = &p.b_fn {
                        let mut rb_v = Vec::new();
                        point_values(rb.as_ref(), i, &mut rb_v);
                        let mut b = vec![0.0; d];
                        b_fn(&PointState { r: &rb_v, ..base }, &mut b);
                        out.extend(b);
                    }
                    if let Some(f_fn) = &p.f_fn {
                        let mut rf_v = Vec::new();
                        point_values(rf.as_ref(), i, &mut rf_v);
                        let mut f = vec![0.0; m];
                        f_fn(&PointState { r: &rf_v, ..base }, &mut f);
                        if let Some(radius) = p.f_clamp {
                            let norm = uu.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let chi = smooth_cutoff(norm, radius);
                            f.iter_mut().for_each(|v| *v *= chi);
                        }
                        out.extend(f);
                    }
                    out
                },
            )
            .flatten()
            .collect();
        let column = |c: usize| -> Result<ScalarField> {
            let vals: Vec<f64> = (0..grid.len()).map(|i| rows[i * width + c]).collect();
            ScalarField::new(grid.clone(), vals).map_err(|_| Error::Diverged { step: 0, time: t })
        };
        let a = column(0)?;
        let b = if has_b {
            Some(VectorField::new(
                (0..d).map(|j| column(1 + j)).collect::<Result<_>>()?,
            )?)
        } else {
            None
        };
        let f = if has_f {
            let off = 1 + if has_b { d } else { 0 };
            let mut comps = (0..m)
                .map(|i| column(off + i))
                .collect::<Result<Vec<_>>>()?;
            if p.subtract_forcing_mean {
                let mut worst: f64 = 0.0;
                for c in comps.iter_mut() {
                    let mean = c.mean();
                    worst = worst.max(mean.abs());
                    *c = c.map(|v| v - mean);
                }
                self.forcing_means
                    .lock()
                    .expect("poisoned")
                    .push((t, worst));
            }
            Some(VectorField::new(comps)?)
        } else {
            None
        };
        Ok(FrozenCoefficients { a, b, f })
    }

    fn bounds(&self) -> (f64, f64) {
        (self.problem.a0, self.problem.a1)
    }
}

/// Samples `<u, f(t,x,u,r)> <= C_f (|u|^2 + 1)` at 1000 points of `prev`.
fn check_growth(problem: &QuasilinearProblem, prev: &Trajectory, iteration: usize) -> Result<()> {
    let (Some(c_f), Some(f_fn)) = (problem.c_f, &problem.f_fn) else {
        return Ok(());
    };
    let grid = &problem.grid;
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ iteration as u64);
    let frames: Vec<usize> = (0..10).map(|_| rng.random_range(0..prev.len())).collect();
    for &k in &frames {
        let t = prev.times()[k];
        let u = prev.frame(k);
        let rf = apply_op(&problem.r_f, u)?;
        let aux = problem.aux.as_ref().map(|a| a.at(t)).transpose()?;
        for _ in 0..100 {
            let i = rng.random_range(0..grid.len());
            let x = grid.coord(i);
            let mut uu = Vec::new();
            let mut r = Vec::new();
            let mut av = Vec::new();
            point_values(Some(u), i, &mut uu);
            point_values(rf.as_ref(), i, &mut r);
            point_values(aux.as_ref(), i, &mut av);
            let mut f = vec![0.0; problem.m];
            let st = PointState {
                t,
                x: &x[..d],
                u: &uu,
                r: &r,
                aux: &av,
            };
            f_fn(&st, &mut f);
            let u2: f64 = uu.iter().map(|v| v * v).sum();
            if let Some(radius) = problem.f_clamp {
                let chi = smooth_cutoff(u2.sqrt(), radius);
                f.iter_mut().for_each(|v| *v *= chi);
            }
            let lhs: f64 = uu.iter().zip(&f).map(|(a, b)| a * b).sum();
            let rhs = c_f * (u2 + 1.0);
            if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
                return Err(Error::Hypothesis {
                    iteration,
                    detail: format!(
                        "<u, f> = {lhs} exceeds C_f (|u|^2 + 1) = {rhs} at t = {t}, x = {:?}",
                        &x[..d]
                    ),
                });
            }
        }
    }
    Ok(())
}

/// One Picard iterate: the linear system with coefficients frozen along
/// `u_prev`, started from `phi`.
pub fn picard_step(
    u_prev: &Trajectory,
    phi: &VectorField,
    problem: &QuasilinearProblem,
    stepper: &StepperConfig,
    iteration: usize,
) -> Result<Trajectory> {
    problem.validate()?;
    check_initial(phi, problem)?;
    if problem.hypothesis_check {
        check_growth(problem, u_prev, iteration)?;
    }
    let frozen = Frozen {
        problem,
        prev: u_prev,
        forcing_means: Mutex::new(Vec::new()),
    };
    let mut tr = solve_system(phi, 0.0, &frozen, stepper).map_err(|e| e.in_iteration(iteration))?;
    let means = frozen.forcing_means.into_inner().expect("poisoned");
    if !means.is_empty() {
        let worst = means.iter().map(|m| m.1).fold(0.0, f64::max);
        if worst > 0.0 {
            log::debug!("{}: subtracted forcing mean up to {worst:e}", problem.name);
        }
        tr.extend_series("forcing_mean", means);
    }
    Ok(tr)
}

fn check_initial(phi: &VectorField, problem: &QuasilinearProblem) -> Result<()> {
    problem.grid.check_same(phi.grid())?;
    if phi.len() != problem.m {
        return Err(Error::arg(format!(
            "initial value has {} components, problem has m = {}",
            phi.len(),
            problem.m
        )));
    }
    if !phi.is_finite() {
        return Err(Error::NonFinite {
            context: "initial value".into(),
            index: 0,
        });
    }
    Ok(())
}

/// `sup_t |u(t)|_inf^2 <= e^{C_f} (|phi|_inf^2 + C_f)` evaluated on a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct QuasilinearSolution {
    pub trajectory: Trajectory,
    /// `sup_t |u_n(t) - u_{n-1}(t)|_inf` per iteration.
    pub differences: Vec<f64>,
    pub converged: bool,
    pub bound: Option<BoundCheck>,
}

impl QuasilinearSolution {
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }

    /// CSV `iteration,sup_difference`.
    pub fn convergence_csv(&self) -> String {
        let mut s = String::from("iteration,sup_difference\n");
        for (i, d) in self.differences.iter().enumerate() {
            s.push_str(&format!("{},{d}\n", i + 1));
        }
        s
    }
}

/// Iterates [`picard_step`] from the seed `u = 0` until the sup difference of
/// consecutive iterates drops below `tol_sup` or `max_iters` is reached.
pub fn solve_quasilinear(
    phi: &VectorField,
    problem: &QuasilinearProblem,
    picard: &PicardConfig,
    stepper: &StepperConfig,
) -> Result<QuasilinearSolution> {
    solve_quasilinear_from(phi, None, problem, picard, stepper)
}

/// As [`solve_quasilinear`], starting from `seed` instead of zero.
pub fn solve_quasilinear_from(
    phi: &VectorField,
    seed: Option<Trajectory>,
    problem: &QuasilinearProblem,
    picard: &PicardConfig,
    stepper: &StepperConfig,
) -> Result<QuasilinearSolution> {
    picard.validate()?;
    stepper.validate()?;
    problem.validate()?;
    check_initial(phi, problem)?;
    let mut prev = match seed {
        Some(s) => s,
        None => Trajectory::stationary(
            VectorField::zeros(&problem.grid, problem.m),
            0.0,
            stepper.t_end,
        )?,
    };
    let mut differences = Vec::new();
    let mut converged = false;
    for it in 1..=picard.max_iters {
        let mut next = picard_step(&prev, phi, problem, stepper, it)?;
        if picard.damping < 1.0 {
            next = next.damped_towards(&prev, picard.damping)?;
        }
        let diff = next.sup_distance(&prev)?;
        differences.push(diff);
        log::debug!(
            "{} Picard iteration {it}: sup difference {diff:e}",
            problem.name
        );
        prev = next;
        if diff < picard.tol_sup {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "{}: Picard iteration did not reach {:e} in {} iterations",
            problem.name,
            picard.tol_sup,
            picard.max_iters
        );
    }
    let mut trajectory = prev;
    trajectory.extend_series(
        "picard_difference",
        differences
            .iter()
            .enumerate()
            .map(|(i, d)| ((i + 1) as f64, *d)),
    );
    let bound = problem.c_f.map(|c_f| {
        let lhs = trajectory.sup_norm().powi(2);
        let rhs = c_f.exp() * (phi.sup_norm().powi(2) + c_f);
        BoundCheck {
            lhs,
            rhs,
            holds: lhs <= rhs + BOUND_SLACK,
        }
    });
    Ok(QuasilinearSolution {
        trajectory,
        differences,
        converged,
        bound,
    })
}

/// Critical SQG: `d_t theta + kappa (-Delta)^{1/2} theta + R theta . grad theta = 0`
/// with `R = grad^perp (-Delta)^{-1/2}`.
pub fn sqg(grid: &Grid, kappa: f64) -> Result<QuasilinearProblem> {
    if grid.dim() != 2 {
        return Err(Error::arg(format!(
            "the sqg preset needs a 2-D grid, got {}-D",
            grid.dim()
        )));
    }
    let mut p = QuasilinearProblem::new("sqg", grid, 1, kappa);
    p.r_b = Some(MultiplierOp::sqg_velocity(grid)?);
    p.b_fn = Some(Arc::new(|s: &PointState, out: &mut [f64]| {
        out.copy_from_slice(s.r)
    }));
    Ok(p)
}

/// 1-D critical Burgers-type equation `d_t u + kappa (-Delta)^{1/2} u + u d_x u = 0`,
/// the drift frozen at the previous iterate.
pub fn frozen_burgers_1d(grid: &Grid, kappa: f64) -> Result<QuasilinearProblem> {
    if grid.dim() != 1 {
        return Err(Error::arg(format!(
            "the frozen-burgers-1d preset needs a 1-D grid, got {}-D",
            grid.dim()
        )));
    }
    let mut p = QuasilinearProblem::new("frozen-burgers-1d", grid, 1, kappa);
    p.b_fn = Some(Arc::new(|s: &PointState, out: &mut [f64]| out[0] = s.u[0]));
    Ok(p)
}
