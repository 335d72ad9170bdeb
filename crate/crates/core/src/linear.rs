//! Time stepping for `d_t u + a (-Delta)^{1/2} u + b . grad u = f`.
//!
//! The constant part `abar (-Delta)^{1/2}` (with `abar` the spatial mean of
//! `a` at the start of each step) is integrated exactly by the Cauchy
//! semigroup; the remainder `f - (a - abar)(-Delta)^{1/2} u - b . grad u` is
//! explicit, with its products dealiased by the 2/3 rule.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{NormReport, NormSpec};
use crate::spectral::{
    cauchy_semigroup, derivative_symbol, truncate_to_band, Grid, ScalarField, VectorField,
};
use crate::trajectory::Trajectory;

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// First order: `u+ = P[u + dt N(u)]`.
    #[serde(alias = "euler", alias = "exponential-imex-euler")]
    ExponentialEuler,
    /// Second order predictor/corrector with the remainder averaged over both
    /// ends of the step.
    #[default]
    #[serde(alias = "heun-corrected")]
    Heun,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::ExponentialEuler => 1,
            Scheme::Heun => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// `cfl * min(h / (|b|_inf + eps), 1 / (|a - abar|_inf xi_max + eps))`,
    /// capped by `max_dt`.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: TimeStep,
    pub cfl: f64,
    /// Upper bound on automatic steps; the stability formula alone is
    /// unbounded when `a` is constant and `b` vanishes.
    pub max_dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub monitor: NormSpec,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: TimeStep::Auto,
            cfl: 0.5,
            max_dt: 1e-2,
            scheme: Scheme::Heun,
            t_end: 1.0,
            snapshot_stride: 1,
            monitor: NormSpec::light(),
        }
    }
}

impl StepperConfig {
    pub fn fixed(dt: f64, t_end: f64, scheme: Scheme) -> Self {
        StepperConfig {
            dt: TimeStep::Fixed(dt),
            scheme,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::arg(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::arg(format!(
                "cfl must be in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.max_dt.is_finite() && self.max_dt > 0.0) {
            return Err(Error::arg(format!(
                "max_dt must be positive, got {}",
                self.max_dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::arg(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::arg("snapshot_stride must be at least 1"));
        }
        Ok(())
    }
}

type ScalarProvider = Arc<dyn Fn(f64) -> Result<ScalarField> + Send + Sync>;
type VectorProvider = Arc<dyn Fn(f64) -> Result<VectorField> + Send + Sync>;

/// A scalar coefficient, either fixed or evaluated at each requested time.
#[derive(Clone)]
pub enum TimeScalar {
    Static(ScalarField),
    Dynamic(ScalarProvider),
}

impl TimeScalar {
    pub fn constant(grid: &Grid, c: f64) -> Self {
        TimeScalar::Static(ScalarField::constant(grid, c))
    }

    pub fn from_fn(f: impl Fn(f64) -> Result<ScalarField> + Send + Sync + 'static) -> Self {
        TimeScalar::Dynamic(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> Result<ScalarField> {
        match self {
            TimeScalar::Static(f) => Ok(f.clone()),
            TimeScalar::Dynamic(p) => p(t),
        }
    }
}

impl From<ScalarField> for TimeScalar {
    fn from(f: ScalarField) -> Self {
        TimeScalar::Static(f)
    }
}

#[derive(Clone)]
pub enum TimeVector {
    Static(VectorField),
    Dynamic(VectorProvider),
}

impl TimeVector {
    pub fn from_fn(f: impl Fn(f64) -> Result<VectorField> + Send + Sync + 'static) -> Self {
        TimeVector::Dynamic(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> Result<VectorField> {
        match self {
            TimeVector::Static(f) => Ok(f.clone()),
            TimeVector::Dynamic(p) => p(t),
        }
    }
}

impl From<VectorField> for TimeVector {
    fn from(f: VectorField) -> Self {
        TimeVector::Static(f)
    }
}

/// Coefficients of the scalar linear equation. `b` and `f` default to zero.
#[derive(Clone)]
pub struct LinearCoefficients {
    pub a: TimeScalar,
    pub b: Option<TimeVector>,
    pub f: Option<TimeScalar>,
    pub a0: f64,
    pub a1: f64,
}

impl LinearCoefficients {
    pub fn new(a: impl Into<TimeScalar>, a0: f64, a1: f64) -> Self {
        LinearCoefficients {
            a: a.into(),
            b: None,
            f: None,
            a0,
            a1,
        }
    }

    /// `a` constant, no drift, no forcing.
    pub fn constant(grid: &Grid, a: f64) -> Self {
        Self::new(TimeScalar::constant(grid, a), a, a)
    }

    pub fn with_b(mut self, b: impl Into<TimeVector>) -> Self {
        self.b = Some(b.into());
        self
    }

    pub fn with_f(mut self, f: impl Into<TimeScalar>) -> Self {
        self.f = Some(f.into());
        self
    }
}

/// Coefficients evaluated at one instant. `f` has one component per
/// unknown; all components share `a` and `b`.
#[derive(Clone, Debug)]
pub struct FrozenCoefficients {
    pub a: ScalarField,
    pub b: Option<VectorField>,
    pub f: Option<VectorField>,
}

/// Anything that can produce [`FrozenCoefficients`] at a given time.
pub trait CoefficientSource: Send + Sync {
    fn at(&self, t: f64) -> Result<FrozenCoefficients>;
    /// `(a0, a1)`.
    fn bounds(&self) -> (f64, f64);
}

impl CoefficientSource for LinearCoefficients {
    fn at(&self, t: f64) -> Result<FrozenCoefficients> {
        Ok(FrozenCoefficients {
            a: self.a.at(t)?,
            b: self.b.as_ref().map(|b| b.at(t)).transpose()?,
            f: self
                .f
                .as_ref()
                .map(|f| f.at(t).map(VectorField::from))
                .transpose()?,
        })
    }

    fn bounds(&self) -> (f64, f64) {
        (self.a0, self.a1)
    }
}

fn check_bounds(bounds: (f64, f64)) -> Result<()> {
    let (a0, a1) = bounds;
    if !(a0.is_finite() && a0 > 0.0) {
        return Err(Error::arg(format!(
            "ellipticity floor a0 must be > 0, got {a0}"
        )));
    }
    if a1.is_nan() || a1 < a0 {
        return Err(Error::arg(format!(
            "upper bound a1 = {a1} is below a0 = {a0}"
        )));
    }
    Ok(())
}

fn check_ellipticity(a: &ScalarField, bounds: (f64, f64), step: usize, time: f64) -> Result<()> {
    let (a0, a1) = bounds;
    let (lo, hi) = (a.min(), a.max());
    let tol = EPS * a0.max(1.0);
    let value = if lo.is_nan() || lo < a0 - tol {
        lo
    } else if hi.is_nan() || hi > a1 + tol * a1.abs().max(1.0) {
        hi
    } else {
        return Ok(());
    };
    Err(Error::Ellipticity {
        step,
        time,
        value,
        lower: a0,
        upper: a1,
    })
}

/// Coefficients with their dealiased parts cached for repeated products.
struct Prepared {
    a_dev: Option<ScalarField>,
    b: Option<Vec<ScalarField>>,
    f: Option<VectorField>,
}

impl Prepared {
    fn new(c: &FrozenCoefficients, abar: f64) -> Self {
        let dev = c.a.map(|v| v - abar);
        let a_dev = (dev.sup_norm() > 0.0).then(|| dev.dealiased());
        let b = c.b.as_ref().and_then(|b| {
            (b.sup_norm() > 0.0).then(|| b.components().iter().map(|c| c.dealiased()).collect())
        });
        Prepared {
            a_dev,
            b,
            f: c.f.clone(),
        }
    }

    /// `f - (a - abar) L v - b . grad v`, componentwise.
    fn remainder(&self, v: &VectorField) -> Result<VectorField> {
        let comps = v
            .components()
            .par_iter()
            .enumerate()
            .map(|(i, vi)| {
                let grid = vi.grid();
                let mut acc = match &self.f {
                    Some(f) => f.component(i).values().to_vec(),
                    None => vec![0.0; grid.len()],
                };
                let spec = vi.spectral();
                if let Some(a_dev) = &self.a_dev {
                    let lv =
                        band_inverse(grid, spec, |flat| Complex64::new(grid.abs_xi()[flat], 0.0));
                    let prod = dealias(&a_dev.zip_map(&lv, |x, y| x * y));
                    for (o, p) in acc.iter_mut().zip(prod.values()) {
                        *o -= p;
                    }
                }
                if let Some(b) = &self.b {
                    let mut transport = vec![0.0; grid.len()];
                    for (j, bj) in b.iter().enumerate() {
                        let dv = band_inverse(grid, spec, |flat| derivative_symbol(grid, flat, j));
                        for ((o, x), y) in transport.iter_mut().zip(bj.values()).zip(dv.values()) {
                            *o += x * y;
                        }
                    }
                    let prod = dealias(&ScalarField::new(grid.clone(), transport)?);
                    for (o, p) in acc.iter_mut().zip(prod.values()) {
                        *o -= p;
                    }
                }
                ScalarField::new(grid.clone(), acc).map_err(|_| Error::Diverged {
                    step: 0,
                    time: f64::NAN,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(comps)
    }
}

fn band_inverse(
    grid: &Grid,
    spec: &[Complex64],
    symbol: impl Fn(usize) -> Complex64,
) -> ScalarField {
    let mut c: Vec<Complex64> = spec
        .iter()
        .enumerate()
        .map(|(flat, &x)| x * symbol(flat))
        .collect();
    truncate_to_band(grid, &mut c);
    ScalarField::new(grid.clone(), grid.inverse(&c))
        .unwrap_or_else(|_| ScalarField::constant(grid, f64::NAN))
}

fn dealias(f: &ScalarField) -> ScalarField {
    if f.is_finite() {
        f.dealiased()
    } else {
        f.clone()
    }
}

fn propagate(abar: f64, dt: f64, v: &VectorField) -> Result<VectorField> {
    VectorField::new(
        v.components()
            .iter()
            .map(|c| cauchy_semigroup(abar, dt, c))
            .collect::<Result<_>>()?,
    )
}

fn combine(u: &VectorField, c: f64, n: &VectorField) -> VectorField {
    VectorField::new(
        u.components()
            .iter()
            .zip(n.components())
            .map(|(a, b)| a.axpy(c, b))
            .collect(),
    )
    .expect("same shape")
}

/// Outcome of one accepted step, with the sup norm of `f` at both ends for
/// diagnostics.
struct StepOutcome {
    state: VectorField,
    f_sup: (f64, f64),
}

fn f_sup(c: &FrozenCoefficients) -> f64 {
    c.f.as_ref().map_or(0.0, VectorField::sup_norm)
}

fn step_system(
    u: &VectorField,
    t: f64,
    dt: f64,
    c0: &FrozenCoefficients,
    source: &dyn CoefficientSource,
    scheme: Scheme,
    step: usize,
) -> Result<StepOutcome> {
    let bounds = source.bounds();
    check_ellipticity(&c0.a, bounds, step, t)?;
    let abar = c0.a.mean();
    let diverged = |_| Error::Diverged { step, time: t + dt };
    let n0 = Prepared::new(c0, abar).remainder(u).map_err(diverged)?;
    let (state, f1) = match scheme {
        Scheme::ExponentialEuler => (propagate(abar, dt, &combine(u, dt, &n0))?, f_sup(c0)),
        Scheme::Heun => {
            let predictor = propagate(abar, dt, &combine(u, dt, &n0))?;
            let c1 = source.at(t + dt)?;
            check_ellipticity(&c1.a, bounds, step, t + dt)?;
            let n1 = Prepared::new(&c1, abar)
                .remainder(&predictor)
                .map_err(diverged)?;
            let half = propagate(abar, dt, &combine(u, 0.5 * dt, &n0))?;
            (combine(&half, 0.5 * dt, &n1), f_sup(&c1))
        }
    };
    if !state.is_finite() {
        return Err(Error::Diverged { step, time: t + dt });
    }
    Ok(StepOutcome {
        state,
        f_sup: (f_sup(c0), f1),
    })
}

/// One step of the configured scheme from `u` at time `t`.
pub fn step_linear(
    u: &ScalarField,
    t: f64,
    dt: f64,
    coeffs: &LinearCoefficients,
    config: &StepperConfig,
) -> Result<ScalarField> {
    check_bounds(coeffs.bounds())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::arg(format!("dt must be positive, got {dt}")));
    }
    let c0 = coeffs.at(t)?;
    let out = step_system(&u.clone().into(), t, dt, &c0, coeffs, config.scheme, 0)?;
    Ok(out.state.into_components().remove(0))
}

/// Stability-limited step for the coefficients `c` (before the `max_dt` cap).
pub fn auto_dt(c: &FrozenCoefficients, cfl: f64) -> f64 {
    let grid = c.a.grid();
    let abar = c.a.mean();
    let b_sup = c.b.as_ref().map_or(0.0, VectorField::sup_norm);
    let a_dev =
        c.a.values()
            .iter()
            .map(|v| (v - abar).abs())
            .fold(0.0, f64::max);
    let transport = grid.spacing() / (b_sup + EPS);
    let diffusion = 1.0 / (a_dev * grid.xi_max() + EPS);
    cfl * transport.min(diffusion)
}

/// Discrete modulus of continuity: the largest increment of `f` over a
/// one-cell shift along any axis.
pub fn discrete_modulus(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let vals = f.values();
    let mut worst: f64 = 0.0;
    for axis in 0..grid.dim() {
        for flat in 0..grid.len() {
            let mut idx = grid.unflatten(flat);
            idx[axis] = (idx[axis] + 1) % grid.n();
            let other = grid.flatten(&idx[..grid.dim()]);
            worst = worst.max((vals[other] - vals[flat]).abs());
        }
    }
    worst
}

/// Advances `u0` from `t0` to `config.t_end` for any coefficient source,
/// storing every `snapshot_stride`-th state (always the first and last).
///
/// Series recorded: `dt`, `abar`, `sup`, `l2` (per step), `f_integral`
/// (running `int ||f||_inf`, same quadrature order as the scheme) and the
/// moduli `omega_a`, `omega_b` at snapshot steps.
pub fn solve_system(
    u0: &VectorField,
    t0: f64,
    source: &dyn CoefficientSource,
    config: &StepperConfig,
) -> Result<Trajectory> {
    config.validate()?;
    check_bounds(source.bounds())?;
    if !u0.is_finite() {
        return Err(Error::NonFinite {
            context: "initial value".into(),
            index: 0,
        });
    }
    if t0 >= config.t_end {
        return Err(Error::arg(format!(
            "start time {t0} is not before t_end = {}",
            config.t_end
        )));
    }
    let mut tr = Trajectory::new(u0.grid(), u0.len());
    tr.push_with_reports(t0, u0.clone(), reports(u0, &config.monitor)?)?;
    record_state(&mut tr, t0, u0);
    tr.record("f_integral", t0, 0.0);

    let horizon = config.t_end - t0;
    let fixed_steps = match config.dt {
        TimeStep::Fixed(dt) => Some(step_count(horizon, dt)),
        TimeStep::Auto => None,
    };
    let mut u = u0.clone();
    let mut t = t0;
    let mut f_integral = 0.0;
    let mut step = 0usize;
    loop {
        let remaining = config.t_end - t;
        if remaining <= EPS * config.t_end.abs().max(1.0) {
            break;
        }
        let c0 = source.at(t)?;
        let dt = match fixed_steps {
            Some(n) => horizon / n as f64,
            None => {
                let target = auto_dt(&c0, config.cfl).min(config.max_dt);
                remaining / step_count(remaining, target) as f64
            }
        };
        // land exactly on t_end
        let last = fixed_steps.map_or(dt >= remaining * (1.0 - 1e-9), |n| step + 1 == n);
        let t_next = if last { config.t_end } else { t + dt };
        let dt = t_next - t;
        if step % config.snapshot_stride == 0 {
            tr.record("omega_a", t, discrete_modulus(&c0.a));
            if let Some(b) = &c0.b {
                let w = b
                    .components()
                    .iter()
                    .map(discrete_modulus)
                    .fold(0.0, f64::max);
                tr.record("omega_b", t, w);
            }
        }
        let out = step_system(&u, t, dt, &c0, source, config.scheme, step)?;
        f_integral += match config.scheme {
            Scheme::ExponentialEuler => dt * out.f_sup.0,
            Scheme::Heun => 0.5 * dt * (out.f_sup.0 + out.f_sup.1),
        };
        u = out.state;
        t = t_next;
        step += 1;
        tr.record("dt", t, dt);
        tr.record("abar", t, c0.a.mean());
        tr.record("f_integral", t, f_integral);
        record_state(&mut tr, t, &u);
        if step % config.snapshot_stride == 0 || last {
            tr.push_with_reports(t, u.clone(), reports(&u, &config.monitor)?)?;
        }
        if last {
            break;
        }
    }
    log::debug!("linear solve: {step} steps to t = {t}");
    Ok(tr)
}

fn step_count(horizon: f64, dt: f64) -> usize {
    let n = horizon / dt;
    // tolerate round-off such as 0.5 / 1e-3 = 500.0000000001
    let r = n.round();
    if (n - r).abs() <= 1e-9 * r.max(1.0) {
        (r as usize).max(1)
    } else {
        (n.ceil() as usize).max(1)
    }
}

fn record_state(tr: &mut Trajectory, t: f64, u: &VectorField) {
    let l2: f64 = u
        .components()
        .iter()
        .map(|c| c.values().iter().map(|v| v * v).sum::<f64>() * c.grid().cell_volume())
        .sum::<f64>()
        .sqrt();
    tr.record("sup", t, u.sup_norm());
    tr.record("l2", t, l2);
}

fn reports(u: &VectorField, spec: &NormSpec) -> Result<Vec<NormReport>> {
    u.components()
        .iter()
        .map(|c| NormReport::compute(c, spec))
        .collect()
}

/// Solves the scalar equation from `u0` at `t = 0` and attaches the path
/// aggregates `Y^{1,2}` and `X^{1,2}`.
pub fn solve_linear(
    u0: &ScalarField,
    coeffs: &LinearCoefficients,
    config: &StepperConfig,
) -> Result<Trajectory> {
    let mut tr = solve_system(&u0.clone().into(), 0.0, coeffs, config)?;
    let y = tr.y_norm(1, 2.0)?;
    let x = tr.x_norm(1, 2.0)?;
    tr.set_aggregate("Y^{1,2}", y);
    tr.set_aggregate("X^{1,2}", x);
    Ok(tr)
}
