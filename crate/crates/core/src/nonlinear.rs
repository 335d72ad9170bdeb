//! Fully nonlinear critical equations `d_t u = F(t, x, u, grad u, -(-Delta)^{1/2} u)`.
//!
//! Each outer iterate freezes `u_{n-1}` inside `F`, solves the quasi-linear
//! system satisfied by `w = grad u_n`,
//!
//! `d_t w = -(d_q F) (-Delta)^{1/2} w + (grad_w F) . grad w + grad_x F + (d_u F) grad u_{n-1}`,
//!
//! with the nonlocal argument `q = R w = (-Delta)^{-1/2} div w`, and then
//! recovers `u_n = phi + int_0^t F(s, x, u_{n-1}, w, R w) ds`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::{Scheme, StepperConfig};
use crate::quasilinear::{
    solve_quasilinear_from, BoundCheck, PicardConfig, PointState, QuasilinearProblem,
    QuasilinearSolution, BOUND_SLACK,
};
use crate::spectral::{
    curl_sup, gradient, half_laplacian, Grid, MultiplierOp, ScalarField, VectorField,
};
use crate::trajectory::Trajectory;

/// Arguments of `F` and its partials.
#[derive(Clone, Copy, Debug)]
pub struct NlPoint<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub u: f64,
    pub w: &'a [f64],
    pub q: f64,
}

pub type NlScalar = Arc<dyn Fn(&NlPoint) -> f64 + Send + Sync>;
/// Writes `d` entries into the output slice.
pub type NlVector = Arc<dyn Fn(&NlPoint, &mut [f64]) + Send + Sync>;

/// `F` with its four partial derivatives, all user supplied.
#[derive(Clone)]
pub struct NonlinearProblem {
    pub name: String,
    pub dim: usize,
    pub f: NlScalar,
    pub df_dq: NlScalar,
    pub grad_w_f: NlVector,
    pub df_du: NlScalar,
    pub grad_x_f: NlVector,
    /// Lower bound of `d_q F`.
    pub a0: f64,
    /// Upper bound of `d_q F` (may be infinite).
    pub a1: f64,
    /// Growth constant in `|F(t, x, u, 0, 0)| <= kappa0 (|u| + 1)`.
    pub kappa0: Option<f64>,
    /// `F` does not depend on `u`: one outer iteration is exact.
    pub u_independent: bool,
}

const FD_POINTS: usize = 100;
const FD_TOL: f64 = 1e-4;

impl NonlinearProblem {
    /// Compares the supplied partials with central differences of `F` at
    /// 100 random points, and samples the ellipticity floor and the `kappa0`
    /// growth bound at the same points.
    pub fn check_partials(&self, period: f64) -> Result<()> {
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(0xfd);
        let mut grad = vec![0.0; d];
        let mut gx = vec![0.0; d];
        for _ in 0..FD_POINTS {
            let t: f64 = rng.random();
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * period).collect();
            let u = rng.random_range(-2.0..2.0);
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let q = rng.random_range(-2.0..2.0);
            let pt = NlPoint {
                t,
                x: &x,
                u,
                w: &w,
                q,
            };
            let f = |p: &NlPoint| (self.f)(p);
            let h = 1e-6;
            let check = |label: &str, supplied: f64, plus: NlPoint, minus: NlPoint| {
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                if (fd - supplied).abs() > FD_TOL * supplied.abs().max(1.0) || !supplied.is_finite()
                {
                    Err(Error::arg(format!(
                        "{}: supplied {label} = {supplied} but central difference gives {fd} at t = {t}, x = {x:?}, u = {u}, w = {w:?}, q = {q}",
                        self.name
                    )))
                } else {
                    Ok(())
                }
            };
            let dq = (self.df_dq)(&pt);
            check(
                "dF/dq",
                dq,
                NlPoint { q: q + h, ..pt },
                NlPoint { q: q - h, ..pt },
            )?;
            check(
                "dF/du",
                (self.df_du)(&pt),
                NlPoint { u: u + h, ..pt },
                NlPoint { u: u - h, ..pt },
            )?;
            (self.grad_w_f)(&pt, &mut grad);
            (self.grad_x_f)(&pt, &mut gx);
            for j in 0..d {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                check(
                    &format!("dF/dw_{j}"),
                    grad[j],
                    NlPoint { w: &wp, ..pt },
                    NlPoint { w: &wm, ..pt },
                )?;
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                check(
                    &format!("dF/dx_{j}"),
                    gx[j],
                    NlPoint { x: &xp, ..pt },
                    NlPoint { x: &xm, ..pt },
                )?;
            }
            if dq < self.a0 || dq > self.a1 {
                return Err(Error::arg(format!(
                    "{}: dF/dq = {dq} outside [{}, {}] at q = {q}",
                    self.name, self.a0, self.a1
                )));
            }
            if let Some(k0) = self.kappa0 {
                let zero = vec![0.0; d];
                let f0 = f(&NlPoint {
                    w: &zero,
                    q: 0.0,
                    ..pt
                });
                if f0.abs() > k0 * (u.abs() + 1.0) * (1.0 + 1e-12) {
                    return Err(Error::arg(format!(
                        "{}: |F(t, x, {u}, 0, 0)| = {} exceeds kappa0 (|u| + 1) with kappa0 = {k0}",
                        self.name,
                        f0.abs()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearConfig {
    pub stepper_scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub inner: PicardConfig,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Largest acceptable relative `|grad u - w|_inf` before the run is
    /// flagged as a gradient-consistency failure.
    pub consistency_tol: f64,
    pub check_partials: bool,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        NonlinearConfig {
            stepper_scheme: Scheme::Heun,
            dt: 1e-3,
            t_end: 0.5,
            inner: PicardConfig::default(),
            outer_tol: 1e-8,
            outer_max_iters: 50,
            consistency_tol: 1e-2,
            check_partials: true,
        }
    }
}

impl NonlinearConfig {
    /// Every step is stored: reconstruction integrates over stored frames.
    pub fn stepper(&self) -> StepperConfig {
        StepperConfig::fixed(self.dt, self.t_end, self.stepper_scheme)
    }

    pub fn validate(&self) -> Result<()> {
        self.stepper().validate()?;
        self.inner.validate()?;
        if !(self.outer_tol.is_finite() && self.outer_tol > 0.0) {
            return Err(Error::arg(format!(
                "outer tolerance must be > 0, got {}",
                self.outer_tol
            )));
        }
        if self.outer_max_iters == 0 {
            return Err(Error::arg("outer_max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// `u` and `grad u` of the frozen iterate, frame by frame.
fn aux_trajectory(u: &Trajectory) -> Result<Trajectory> {
    let mut aux = Trajectory::new(u.grid(), 1 + u.grid().dim());
    for (t, f) in u.times().iter().zip(u.frames()) {
        let s = f.component(0);
        let mut comps = vec![s.clone()];
        comps.extend(gradient(s).into_components());
        aux.push(*t, VectorField::new(comps)?)?;
    }
    Ok(aux)
}

/// `R = (-Delta)^{-1/2} div`.
pub fn gradient_nonlocal(grid: &Grid) -> Result<MultiplierOp> {
    MultiplierOp::riesz_divergence(grid, 1.0)
}

fn check_dim(phi: &ScalarField, problem: &NonlinearProblem) -> Result<()> {
    if phi.grid().dim() != problem.dim {
        return Err(Error::arg(format!(
            "problem `{}` is {}-D but the initial value lives on a {}-D grid",
            problem.name,
            problem.dim,
            phi.grid().dim()
        )));
    }
    Ok(())
}

/// Solves the gradient system for `w` with `w(0) = grad phi` and `u_{n-1}`
/// frozen (zero when `frozen_u` is `None`). `seed` warm-starts the Picard
/// iteration.
pub fn solve_gradient_system(
    phi: &ScalarField,
    frozen_u: Option<&Trajectory>,
    seed: Option<Trajectory>,
    problem: &NonlinearProblem,
    config: &NonlinearConfig,
) -> Result<QuasilinearSolution> {
    check_dim(phi, problem)?;
    let grid = phi.grid();
    let d = grid.dim();
    let r = gradient_nonlocal(grid)?;
    let mut qp =
        QuasilinearProblem::new(&format!("{}/gradient-system", problem.name), grid, d, 1.0);
    qp.a0 = problem.a0;
    qp.a1 = problem.a1;
    qp.r_a = Some(r.clone());
    qp.r_b = Some(r.clone());
    qp.r_f = Some(r);
    qp.subtract_forcing_mean = true;
    qp.aux = frozen_u.map(aux_trajectory).transpose()?;

    fn nl<'a>(s: &'a PointState) -> NlPoint<'a> {
        NlPoint {
            t: s.t,
            x: s.x,
            u: s.aux.first().copied().unwrap_or(0.0),
            w: s.u,
            q: s.r[0],
        }
    }
    let pr = problem.clone();
    qp.a_fn = Arc::new(move |s: &PointState| (pr.df_dq)(&nl(s)));
    let pr = problem.clone();
    qp.b_fn = Some(Arc::new(move |s: &PointState, out: &mut [f64]| {
        (pr.grad_w_f)(&nl(s), out);
        out.iter_mut().for_each(|v| *v = -*v);
    }));
    let pr = problem.clone();
    qp.f_fn = Some(Arc::new(move |s: &PointState, out: &mut [f64]| {
        let p = nl(s);
        (pr.grad_x_f)(&p, out);
        if s.aux.len() > 1 {
            let du = (pr.df_du)(&p);
            for (o, g) in out.iter_mut().zip(&s.aux[1..]) {
                *o += du * g;
            }
        }
    }));
    solve_quasilinear_from(&gradient(phi), seed, &qp, &config.inner, &config.stepper())
}

/// `u(t_k) = phi + int_0^{t_k} F(s, x, u_{n-1}, w, R w) ds` over the frames
/// of `w`: left rectangles for the Euler scheme, trapezoids for Heun.
pub fn reconstruct_u(
    phi: &ScalarField,
    w: &Trajectory,
    problem: &NonlinearProblem,
    frozen_u: Option<&Trajectory>,
    scheme: Scheme,
) -> Result<Trajectory> {
    check_dim(phi, problem)?;
    let grid = phi.grid();
    grid.check_same(w.grid())?;
    let d = grid.dim();
    let r = gradient_nonlocal(grid)?;
    let integrand = |k: usize| -> Result<ScalarField> {
        let t = w.times()[k];
        let wk = w.frame(k);
        let q = r.apply(wk)?;
        let prev = frozen_u.map(|u| u.at(t)).transpose()?;
        let mut wv = vec![0.0; d];
        let vals = (0..grid.len())
            .map(|i| {
                let x = grid.coord(i);
                for (j, c) in wk.components().iter().enumerate() {
                    wv[j] = c.values()[i];
                }
                (problem.f)(&NlPoint {
                    t,
                    x: &x[..d],
                    u: prev.as_ref().map_or(0.0, |p| p.component(0).values()[i]),
                    w: &wv,
                    q: q.component(0).values()[i],
                })
            })
            .collect();
        ScalarField::new(grid.clone(), vals)
    };
    let mut out = Trajectory::new(grid, 1);
    let mut u = phi.clone();
    out.push(w.times()[0], u.clone().into())?;
    let mut g_prev = integrand(0)?;
    for k in 1..w.len() {
        let dt = w.times()[k] - w.times()[k - 1];
        let g = integrand(k)?;
        u = match scheme {
            Scheme::ExponentialEuler => u.axpy(dt, &g_prev),
            Scheme::Heun => u.axpy(0.5 * dt, &(&g_prev + &g)),
        };
        out.record("F_sup", w.times()[k - 1], g_prev.sup_norm());
        out.push(w.times()[k], u.clone().into())?;
        g_prev = g;
    }
    Ok(out)
}

/// Residuals witnessing `w = grad u` and the equation itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub times: Vec<f64>,
    /// `|grad u - w|_inf`.
    pub h_residual: Vec<f64>,
    /// `h_residual / max(|grad u|_inf, |w|_inf)`.
    pub h_relative: Vec<f64>,
    /// `max_{i<j} |d_i w_j - d_j w_i|_inf`.
    pub curl_residual: Vec<f64>,
    /// `|(u_{k+1} - u_k)/dt - F(t_k, x, u_k, grad u_k, -(-Delta)^{1/2} u_k)|_2`
    /// at `t_k`; empty without a problem.
    pub pde_residual: Vec<(f64, f64)>,
    pub gradient_consistency_failure: bool,
}

impl ConsistencyReport {
    pub fn max_h_relative(&self) -> f64 {
        self.h_relative.iter().copied().fold(0.0, f64::max)
    }

    pub fn terminal_h(&self) -> f64 {
        self.h_residual.last().copied().unwrap_or(0.0)
    }

    /// CSV `time,h_residual,h_relative,curl_residual,pde_residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,h_residual,h_relative,curl_residual,pde_residual\n");
        for (k, t) in self.times.iter().enumerate() {
            let pde = self
                .pde_residual
                .get(k)
                .map_or(String::new(), |(_, v)| v.to_string());
            s.push_str(&format!(
                "{t},{},{},{},{pde}\n",
                self.h_residual[k], self.h_relative[k], self.curl_residual[k]
            ));
        }
        s
    }
}

/// Fills the residual series for aligned trajectories `u` (scalar) and `w`.
pub fn check_consistency(
    u: &Trajectory,
    w: &Trajectory,
    problem: Option<&NonlinearProblem>,
) -> Result<ConsistencyReport> {
    u.grid().check_same(w.grid())?;
    let aligned = u.len() == w.len()
        && u.times()
            .iter()
            .zip(w.times())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !aligned {
        return Err(Error::arg(
            "u and w trajectories have different time stamps",
        ));
    }
    let mut rep = ConsistencyReport::default();
    for (k, t) in u.times().iter().enumerate() {
        let uk = u.frame(k).component(0);
        let gu = gradient(uk);
        let wk = w.frame(k);
        let h = gu.sup_distance(wk);
        let scale = gu.sup_norm().max(wk.sup_norm());
        rep.times.push(*t);
        rep.h_residual.push(h);
        rep.h_relative
            .push(if scale > 0.0 { h / scale } else { 0.0 });
        rep.curl_residual.push(curl_sup(wk));
    }
    if let Some(p) = problem {
        let grid = u.grid();
        let d = grid.dim();
        for k in 0..u.len().saturating_sub(1) {
            let t = u.times()[k];
            let dt = u.times()[k + 1] - t;
            let uk = u.frame(k).component(0);
            let gu = gradient(uk);
            let lu = half_laplacian(uk);
            let next = u.frame(k + 1).component(0);
            let mut wv = vec![0.0; d];
            let mut sq = 0.0;
            for i in 0..grid.len() {
                let x = grid.coord(i);
                for (j, c) in gu.components().iter().enumerate() {
                    wv[j] = c.values()[i];
                }
                let f = (p.f)(&NlPoint {
                    t,
                    x: &x[..d],
                    u: uk.values()[i],
                    w: &wv,
                    q: -lu.values()[i],
                });
                let r = (next.values()[i] - uk.values()[i]) / dt - f;
                sq += r * r;
            }
            rep.pde_residual.push((t, (sq * grid.cell_volume()).sqrt()));
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct NonlinearSolution {
    pub u: Trajectory,
    pub w: Trajectory,
    pub report: ConsistencyReport,
    /// `sup_t |u_n - u_{n-1}|_inf` per outer iteration.
    pub differences: Vec<f64>,
    pub converged: bool,
    /// Picard iterations used by each inner gradient-system solve.
    pub inner_iterations: Vec<usize>,
    pub inner_converged: bool,
    /// `sup_t |u(t)|_inf <= e^{kappa0} (|phi|_inf + kappa0)`.
    pub bound: Option<BoundCheck>,
}

/// Outer iteration from `u_0 = 0` until consecutive iterates agree to
/// `outer_tol` in sup norm.
pub fn solve_fully_nonlinear(
    phi: &ScalarField,
    problem: &NonlinearProblem,
    config: &NonlinearConfig,
) -> Result<NonlinearSolution> {
    config.validate()?;
    check_dim(phi, problem)?;
    if !(problem.a0.is_finite() && problem.a0 > 0.0) {
        return Err(Error::arg(format!("a0 must be > 0, got {}", problem.a0)));
    }
    if config.check_partials {
        problem.check_partials(phi.grid().period())?;
    }
    let grid = phi.grid();
    let mut prev_u = Trajectory::stationary(VectorField::zeros(grid, 1), 0.0, config.t_end)?;
    let mut prev_w: Option<Trajectory> = None;
    let mut differences = Vec::new();
    let mut inner_iterations = Vec::new();
    let mut inner_converged = true;
    let mut converged = false;
    for n in 1..=config.outer_max_iters {
        let frozen = (!problem.u_independent).then_some(&prev_u);
        let ws = solve_gradient_system(phi, frozen, prev_w.take(), problem, config)
            .map_err(|e| e.in_iteration(n))?;
        inner_iterations.push(ws.iterations());
        inner_converged &= ws.converged;
        let u = reconstruct_u(phi, &ws.trajectory, problem, frozen, config.stepper_scheme)?;
        let diff = u.sup_distance(&prev_u)?;
        differences.push(diff);
        log::debug!(
            "{} outer iteration {n}: sup difference {diff:e}",
            problem.name
        );
        prev_u = u;
        prev_w = Some(ws.trajectory);
        if problem.u_independent || diff < config.outer_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "{}: outer iteration did not reach {:e} in {} iterations",
            problem.name,
            config.outer_tol,
            config.outer_max_iters
        );
    }
    let w = prev_w.expect("at least one outer iteration");
    let mut u = prev_u;
    let mut report = check_consistency(&u, &w, Some(problem))?;
    report.gradient_consistency_failure = report.max_h_relative() > config.consistency_tol;
    if report.gradient_consistency_failure {
        log::warn!(
            "{}: gradient-consistency failure, max relative |grad u - w| = {:e}",
            problem.name,
            report.max_h_relative()
        );
    }
    for (k, t) in report.times.iter().enumerate() {
        u.record("h_residual", *t, report.h_residual[k]);
        u.record("curl_residual", *t, report.curl_residual[k]);
    }
    if let Some(means) = w.series("forcing_mean") {
        u.extend_series("forcing_mean", means.to_vec());
    }
    u.extend_series(
        "outer_difference",
        differences
            .iter()
            .enumerate()
            .map(|(i, d)| ((i + 1) as f64, *d)),
    );
    let bound = problem.kappa0.map(|k0| {
        let lhs = u.sup_norm();
        let rhs = k0.exp() * (phi.sup_norm() + k0);
        BoundCheck {
            lhs,
            rhs,
            holds: lhs <= rhs + BOUND_SLACK,
        }
    });
    Ok(NonlinearSolution {
        u,
        w,
        report,
        differences,
        converged,
        inner_iterations,
        inner_converged,
        bound,
    })
}

fn zero_vec(_: &NlPoint, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
}

/// `F = q + c . w`; `c = 0` is the half-heat flow.
pub fn half_heat(dim: usize, drift: &[f64]) -> Result<NonlinearProblem> {
    if drift.len() != dim && !drift.is_empty() {
        return Err(Error::arg(format!(
            "drift has {} entries for dim {dim}",
            drift.len()
        )));
    }
    let c: Vec<f64> = if drift.is_empty() {
        vec![0.0; dim]
    } else {
        drift.to_vec()
    };
    let c1 = c.clone();
    let c2 = c.clone();
    Ok(NonlinearProblem {
        name: "half-heat".into(),
        dim,
        f: Arc::new(move |p| p.q + c1.iter().zip(p.w).map(|(a, b)| a * b).sum::<f64>()),
        df_dq: Arc::new(|_| 1.0),
        grad_w_f: Arc::new(move |_, out| out.copy_from_slice(&c2)),
        df_du: Arc::new(|_| 0.0),
        grad_x_f: Arc::new(zero_vec),
        a0: 1.0,
        a1: 1.0,
        kappa0: Some(0.0),
        u_independent: true,
    })
}

/// `F = q + h sqrt(1 + |w|^2)`.
pub fn hj_critical(dim: usize, h: f64) -> NonlinearProblem {
    NonlinearProblem {
        name: "hj-critical".into(),
        dim,
        f: Arc::new(move |p| p.q + h * (1.0 + norm2(p.w)).sqrt()),
        df_dq: Arc::new(|_| 1.0),
        grad_w_f: Arc::new(move |p, out| {
            let s = (1.0 + norm2(p.w)).sqrt();
            for (o, w) in out.iter_mut().zip(p.w) {
                *o = h * w / s;
            }
        }),
        df_du: Arc::new(|_| 0.0),
        grad_x_f: Arc::new(zero_vec),
        a0: 1.0,
        a1: 1.0,
        kappa0: Some(h.abs()),
        u_independent: true,
    }
}

/// `F = q - rate u`.
pub fn reaction(dim: usize, rate: f64) -> NonlinearProblem {
    NonlinearProblem {
        name: "reaction".into(),
        dim,
        f: Arc::new(move |p| p.q - rate * p.u),
        df_dq: Arc::new(|_| 1.0),
        grad_w_f: Arc::new(zero_vec),
        df_du: Arc::new(move |_| -rate),
        grad_x_f: Arc::new(zero_vec),
        a0: 1.0,
        a1: 1.0,
        kappa0: Some(rate.abs()),
        u_independent: rate == 0.0,
    }
}

/// Constants of `F = A(q) + H(w) + f(u)` with
/// `A(q) = q_scale q + q_tanh tanh q`, `H(w) = h_scale sqrt(1 + |w|^2)`,
/// `f(u) = source - u_rate u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemarkParams {
    pub q_scale: f64,
    pub q_tanh: f64,
    pub h_scale: f64,
    pub u_rate: f64,
    pub source: f64,
}

impl Default for RemarkParams {
    fn default() -> Self {
        RemarkParams {
            q_scale: 1.0,
            q_tanh: 0.0,
            h_scale: 1.0,
            u_rate: 1.0,
            source: 0.0,
        }
    }
}

impl RemarkParams {
    /// `|F(t, x, u, 0, 0)| = |h_scale + source - u_rate u|
    ///  <= max(|h_scale + source|, |u_rate|) (|u| + 1)`.
    pub fn kappa0(&self) -> f64 {
        (self.h_scale + self.source).abs().max(self.u_rate.abs())
    }
}

pub fn remark_class(dim: usize, c: RemarkParams) -> Result<NonlinearProblem> {
    // sech^2 ranges over (0, 1]
    let a0 = c.q_scale + c.q_tanh.min(0.0);
    let a1 = c.q_scale + c.q_tanh.max(0.0);
    if a0 <= 0.0 {
        return Err(Error::arg(format!(
            "remark-class needs q_scale + min(q_tanh, 0) > 0, got {a0}"
        )));
    }
    Ok(NonlinearProblem {
        name: "remark-class".into(),
        dim,
        f: Arc::new(move |p| {
            c.q_scale * p.q
                + c.q_tanh * p.q.tanh()
                + c.h_scale * (1.0 + norm2(p.w)).sqrt()
                + c.source
                - c.u_rate * p.u
        }),
        df_dq: Arc::new(move |p| c.q_scale + c.q_tanh / p.q.cosh().powi(2)),
        grad_w_f: Arc::new(move |p, out| {
            let s = (1.0 + norm2(p.w)).sqrt();
            for (o, w) in out.iter_mut().zip(p.w) {
                *o = c.h_scale * w / s;
            }
        }),
        df_du: Arc::new(move |_| -c.u_rate),
        grad_x_f: Arc::new(zero_vec),
        a0,
        a1,
        kappa0: Some(c.kappa0()),
        u_independent: c.u_rate == 0.0,
    })
}

fn norm2(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::cauchy_semigroup;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, 2.0 * PI).unwrap()
    }

    fn cfg(dt: f64, t_end: f64, scheme: Scheme) -> NonlinearConfig {
        NonlinearConfig {
            dt,
            t_end,
            stepper_scheme: scheme,
            ..Default::default()
        }
    }

    #[test]
    fn presets_pass_partial_checks() {
        for dim in 1..=2 {
            half_heat(dim, &[])
                .unwrap()
                .check_partials(2.0 * PI)
                .unwrap();
            hj_critical(dim, 0.7).check_partials(2.0 * PI).unwrap();
            reaction(dim, 1.0).check_partials(2.0 * PI).unwrap();
            let rc = RemarkParams {
                q_tanh: 0.3,
                source: 0.2,
                ..Default::default()
            };
            remark_class(dim, rc)
                .unwrap()
                .check_partials(2.0 * PI)
                .unwrap();
        }
    }

    #[test]
    fn wrong_partial_is_caught() {
        let mut p = reaction(1, 1.0);
        p.df_du = Arc::new(|_| 1.0);
        let err = p.check_partials(2.0 * PI).unwrap_err().to_string();
        assert!(err.contains("dF/du"), "{err}");
        let mut p = reaction(1, 2.0);
        p.kappa0 = Some(1.0);
        assert!(p.check_partials(2.0 * PI).is_err());
    }

    #[test]
    fn half_heat_gradient_system_matches_semigroup() {
        let g = grid1(32);
        let phi = ScalarField::from_fn(&g, |x| x[0].cos() + 0.3 * (3.0 * x[0]).sin()).unwrap();
        let p = half_heat(1, &[]).unwrap();
        let c = cfg(0.01, 0.2, Scheme::Heun);
        let ws = solve_gradient_system(&phi, None, None, &p, &c).unwrap();
        for (t, w) in ws.trajectory.times().iter().zip(ws.trajectory.frames()) {
            let exact = gradient(&cauchy_semigroup(1.0, *t, &phi).unwrap());
            assert!(w.sup_distance(&exact) < 1e-10);
        }
    }

    #[test]
    fn flat_data_stays_flat() {
        let g = grid1(16);
        let phi = ScalarField::constant(&g, 0.3);
        let p = half_heat(1, &[]).unwrap();
        let sol = solve_fully_nonlinear(&phi, &p, &cfg(0.01, 0.1, Scheme::Heun)).unwrap();
        assert_eq!(sol.w.sup_norm(), 0.0);
        for f in sol.u.frames() {
            assert!((f.component(0) - &phi).sup_norm() < 1e-15);
        }
    }

    #[test]
    fn constant_forcing_shifts_mean() {
        let g = grid1(16);
        let phi = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let mut p = half_heat(1, &[]).unwrap();
        p.f = Arc::new(|p| p.q + 1.0);
        p.kappa0 = None;
        let sol = solve_fully_nonlinear(&phi, &p, &cfg(0.01, 0.3, Scheme::Heun)).unwrap();
        for (t, f) in sol.u.times().iter().zip(sol.u.frames()) {
            assert!((f.component(0).mean() - t).abs() < 1e-13);
        }
    }

    #[test]
    fn reaction_mode_decays_at_rate_two() {
        let g = grid1(64);
        let phi = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let p = reaction(1, 1.0);
        let sol = solve_fully_nonlinear(&phi, &p, &cfg(1e-3, 0.5, Scheme::Heun)).unwrap();
        assert!(sol.converged);
        let exact = phi.scaled((-1.0f64).exp());
        let end = sol.u.terminal().unwrap().component(0);
        let rel = (end - &exact)
            .values()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            / exact.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rel < 1e-2, "{rel}");
        assert!(sol.report.curl_residual.iter().all(|&c| c == 0.0));
        assert!(!sol.report.gradient_consistency_failure);
    }

    #[test]
    fn exact_pair_has_no_h_residual() {
        let g = grid1(32);
        let phi = ScalarField::from_fn(&g, |x| x[0].sin()).unwrap();
        let mut u = Trajectory::new(&g, 1);
        let mut w = Trajectory::new(&g, 1);
        for k in 0..5 {
            let t = 0.1 * k as f64;
            let s = cauchy_semigroup(1.0, t, &phi).unwrap();
            w.push(t, gradient(&s)).unwrap();
            u.push(t, s.into()).unwrap();
        }
        let rep = check_consistency(&u, &w, None).unwrap();
        assert!(rep.h_residual.iter().all(|&h| h <= 1e-12));
        assert!(rep.pde_residual.is_empty());
        let mut short = Trajectory::new(&g, 1);
        short.push(0.0, phi.clone().into()).unwrap();
        assert!(check_consistency(&short, &w, None).is_err());
    }

    #[test]
    fn remark_class_respects_sup_bound() {
        let g = grid1(64);
        let phi = ScalarField::from_fn(&g, |x| 0.5 * x[0].cos()).unwrap();
        let p = remark_class(1, RemarkParams::default()).unwrap();
        assert_eq!(p.kappa0, Some(1.0));
        let sol = solve_fully_nonlinear(&phi, &p, &cfg(5e-3, 0.5, Scheme::Heun)).unwrap();
        assert!(sol.converged, "{:?}", sol.differences);
        let b = sol.bound.unwrap();
        assert!(b.holds, "{b:?}");
        assert!(sol.report.curl_residual.iter().all(|&c| c <= 1e-8));
    }
}
