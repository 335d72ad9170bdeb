//! Named invariant checks across all modules, grouped into suites.
//!
//! Check names are `suite/check` and stable; the JSON report lists every check
//! that ran with its measured value and limit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Check;
use crate::error::{Error, Result};
use crate::linear::{solve_linear, step_linear, LinearCoefficients, Scheme, StepperConfig};
use crate::nonlinear::{
    half_heat, hj_critical, reaction, remark_class, solve_fully_nonlinear, NonlinearConfig,
    RemarkParams,
};
use crate::norms::{holder_seminorm, lp_norm, sobolev_norm};
use crate::quasilinear::{picard_step, solve_quasilinear, sqg, PicardConfig};
use crate::snapshot;
use crate::spectral::{
    box_op, carre_du_champ, cauchy_semigroup, divergence, gradient, half_laplacian, mc_semigroup,
    shifted_propagator, CauchySampler, Grid, MultiplierOp, OffGrid, ScalarField, TrigSeries,
    VectorField,
};

type Suite = fn() -> Result<Vec<Check>>;

/// Every suite in report order.
pub const SUITES: &[(&str, Suite)] = &[
    ("operators", operators),
    ("box-1d", box_1d),
    ("carre-du-champ", carre),
    ("semigroup", semigroup),
    ("mc-semigroup", mc),
    ("norms", norms),
    ("linear", linear),
    ("quasilinear", quasilinear),
    ("nonlinear", nonlinear),
    ("snapshot", snapshot_suite),
];

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs one suite by name, or all of them. Suites run concurrently; the
/// report keeps the order of [`SUITES`].
pub fn verify(selector: Option<&str>) -> Result<VerifyReport> {
    let chosen: Vec<&(&str, Suite)> = match selector {
        None | Some("all") => SUITES.iter().collect(),
        Some(name) => {
            let s = SUITES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
                let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
                Error::Config(format!(
                    "unknown suite `{name}` (known: {})",
                    names.join(", ")
                ))
            })?;
            vec![s]
        }
    };
    let checks: Vec<Check> = chosen
        .par_iter()
        .map(|(name, suite)| {
            let checks =
                suite().unwrap_or_else(|e| vec![Check::le(format!("error: {e}"), f64::NAN, 0.0)]);
            checks
                .into_iter()
                .map(|mut c| {
                    c.name = format!("{name}/{}", c.name);
                    c
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn torus(dim: usize, n: usize) -> Result<Grid> {
    Grid::new(dim, n, 2.0 * PI)
}

fn random_field(grid: &Grid, kmax: i64, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    TrigSeries::random(grid.dim(), grid.period(), kmax, rng).sample(grid)
}

fn cosine(grid: &Grid) -> Result<ScalarField> {
    ScalarField::from_fn(grid, |x| x[0].cos())
}

fn operators() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut riesz: f64 = 0.0;
    let mut compose: f64 = 0.0;
    let mut grad_div: f64 = 0.0;
    for dim in 1..=3 {
        let g = torus(dim, if dim == 3 { 16 } else { 32 })?;
        for _ in 0..5 {
            let u = random_field(&g, 4, &mut rng)?;
            let scale = u.sup_norm();
            let r = MultiplierOp::riesz_divergence(&g, 1.0)?;
            let rhs = r.apply(&gradient(&u))?.into_components().remove(0);
            riesz = riesz.max((&half_laplacian(&u).scaled(-1.0) - &rhs).sup_norm() / scale);
            let a = MultiplierOp::fractional_laplacian(&g, 0.6)?;
            let b = MultiplierOp::fractional_laplacian(&g, 0.4)?;
            let ab = a.apply_scalar(&b.apply_scalar(&u)?)?;
            compose = compose.max((&ab - &half_laplacian(&u)).sup_norm() / scale);
            let lap = divergence(&gradient(&u))?;
            let two = half_laplacian(&half_laplacian(&u));
            grad_div = grad_div.max((&lap + &two).sup_norm() / two.sup_norm().max(scale));
        }
    }
    let g = torus(2, 32)?;
    let theta = random_field(&g, 5, &mut rng)?;
    let vel = MultiplierOp::sqg_velocity(&g)?.apply(&theta.into())?;
    let div = divergence(&vel)?.sup_norm() / vel.sup_norm();
    let u = random_field(&g, 5, &mut rng)?;
    let mut rr = ScalarField::zeros(&g);
    for j in 0..2 {
        let rj = MultiplierOp::riesz(&g, j)?;
        rr = &rr + &rj.apply_scalar(&rj.apply_scalar(&u)?)?;
    }
    let centered = u.map(|v| v - u.mean());
    let riesz_square = (&rr + &centered).sup_norm() / u.sup_norm();
    Ok(vec![
        Check::le("riesz-identity", riesz, 1e-10),
        Check::le("fractional-composition", compose, 1e-10),
        Check::le("laplacian-symbol", grad_div, 1e-10),
        Check::le("riesz-square", riesz_square, 1e-10),
        Check::le("sqg-velocity-divergence", div, 1e-10),
    ])
}

fn box_1d() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g1 = torus(1, 64)?;
    let mut one: f64 = 0.0;
    for _ in 0..5 {
        let v: VectorField = random_field(&g1, 10, &mut rng)?.into();
        one = one.max(box_op(&v)?.sup_norm());
    }
    let mut div: f64 = 0.0;
    for dim in 2..=3 {
        let g = torus(dim, 16)?;
        let v = VectorField::new(
            (0..dim)
                .map(|_| random_field(&g, 4, &mut rng))
                .collect::<Result<_>>()?,
        )?;
        div = div.max(divergence(&box_op(&v)?)?.sup_norm() / v.sup_norm());
    }
    Ok(vec![
        Check::le("box-vanishes", one, 1e-12),
        Check::le("divergence-of-box", div, 1e-12),
    ])
}

fn carre() -> Result<Vec<Check>> {
    let g = torus(1, 32)?;
    let c = cosine(&g)?;
    let one = carre_du_champ(&c, &c)?.map(|v| v - 1.0).sup_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut lowest = f64::INFINITY;
    let mut asym: f64 = 0.0;
    for dim in 1..=2 {
        let g = torus(dim, 32)?;
        for _ in 0..10 {
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = ScalarField::new(g.clone(), vals)?;
            let e = carre_du_champ(&f, &f)?;
            lowest = lowest.min(e.min() / f.sup_norm().powi(2));
            let h = random_field(&g, 5, &mut rng)?;
            let fg = carre_du_champ(&f, &h)?;
            let gf = carre_du_champ(&h, &f)?;
            asym = asym.max((&fg - &gf).sup_norm());
        }
    }
    Ok(vec![
        Check::le("cosine", one, 1e-12),
        Check::ge("nonnegative", lowest, -1e-8),
        Check::le("symmetric", asym, 1e-12),
    ])
}

fn semigroup() -> Result<Vec<Check>> {
    let g = torus(1, 64)?;
    let mut single: f64 = 0.0;
    for k in 1..=10 {
        let f = ScalarField::from_fn(&g, |x| (k as f64 * x[0]).cos())?;
        let p = cauchy_semigroup(1.0, 0.4, &f)?;
        single = single.max((&p - &f.scaled((-0.4 * k as f64).exp())).sup_norm());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut law: f64 = 0.0;
    for dim in 1..=3 {
        let gd = torus(dim, 16)?;
        let f = random_field(&gd, 5, &mut rng)?;
        let a = cauchy_semigroup(0.7, 0.2, &cauchy_semigroup(0.7, 0.35, &f)?)?;
        let b = cauchy_semigroup(0.7, 0.55, &f)?;
        law = law.max((&a - &b).sup_norm() / f.sup_norm());
    }
    // pure drift by exactly one grid spacing is an index shift
    let f = random_field(&g, 8, &mut rng)?;
    let moved = shifted_propagator(0.0, &[g.spacing()], 1.0, 0.0, &f)?;
    let shift = moved
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - f.values()[(i + g.n() - 1) % g.n()]).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::le("single-mode", single, 1e-12),
        Check::le("semigroup-law", law, 1e-12),
        Check::le("drift-translation", shift, 1e-12),
    ])
}

fn mc() -> Result<Vec<Check>> {
    let g = torus(1, 64)?;
    let f = cosine(&g)?;
    let sampler = CauchySampler::new(2024, 1.0, 1)?;
    let est = mc_semigroup(&sampler, 1.0, 0.3, &f, 100_000, OffGrid::Trigonometric)?;
    let z = est.z_scores(&f.scaled((-0.3f64).exp()));
    let within = z.iter().filter(|v| v.abs() <= 3.0).count() as f64 / z.len() as f64;
    Ok(vec![Check::ge("z-within-3", within, 0.99)])
}

fn norms() -> Result<Vec<Check>> {
    let g = torus(1, 64)?;
    let c = cosine(&g)?;
    let l2 = (lp_norm(&c, 2.0)? - PI.sqrt()).abs();
    let h1 = (sobolev_norm(&c, 1.0, 2.0)? - 2.0 * PI.sqrt()).abs();
    let lip = holder_seminorm(&c, 1.0)?.value;
    Ok(vec![
        Check::le("l2-cosine", l2, 1e-12),
        Check::le("sobolev-cosine", h1, 1e-12),
        Check::le("lipschitz-cosine-upper", lip, 1.0 + 1e-12),
        Check::ge("lipschitz-cosine-lower", lip, 0.99),
    ])
}

fn transport_error(dt: f64) -> Result<f64> {
    let g = torus(1, 64)?;
    let u0 = ScalarField::from_fn(&g, |x| x[0].cos() + 0.5 * (3.0 * x[0]).sin())?;
    let b = ScalarField::constant(&g, 0.7);
    let coeffs = LinearCoefficients::constant(&g, 1.0).with_b(VectorField::from(b));
    let tr = solve_linear(&u0, &coeffs, &StepperConfig::fixed(dt, 0.5, Scheme::Heun))?;
    let exact = shifted_propagator(1.0, &[0.7], 0.5, 0.0, &u0)?;
    Ok((tr.terminal().expect("frames").component(0) - &exact).sup_norm())
}

fn linear() -> Result<Vec<Check>> {
    let g = torus(1, 32)?;
    let u = ScalarField::from_fn(&g, |x| (3.0 * x[0]).cos())?;
    let coeffs = LinearCoefficients::constant(&g, 1.0);
    let cfg = StepperConfig::fixed(0.1, 1.0, Scheme::Heun);
    let stepped = step_linear(&u, 0.0, 0.1, &coeffs, &cfg)?;
    let exact = cauchy_semigroup(1.0, 0.1, &u)?;
    let one = (&stepped - &exact).sup_norm();
    let order = transport_error(0.02)? / transport_error(0.01)?;
    let g = torus(1, 64)?;
    let a = ScalarField::from_fn(&g, |x| 1.5 + 0.4 * x[0].sin())?;
    let b = ScalarField::from_fn(&g, |x| 0.3 * x[0].cos())?;
    let coeffs = LinearCoefficients::new(a, 1.0, 2.0).with_b(VectorField::from(b));
    let u0 = cosine(&g)?;
    let tr = solve_linear(&u0, &coeffs, &StepperConfig::fixed(1e-3, 0.5, Scheme::Heun))?;
    let growth = tr
        .frames()
        .iter()
        .map(|f| f.sup_norm() - u0.sup_norm())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Check::le("constant-coefficient-exact", one, 1e-12),
        Check::ge("heun-order", order, 3.5),
        Check::le("max-principle", growth, 1e-6),
    ])
}

fn quasilinear() -> Result<Vec<Check>> {
    let g = torus(2, 32)?;
    let phi: VectorField = ScalarField::from_fn(&g, |x| {
        x[0].cos() * x[1].cos() + 0.5 * x[0].cos() * (2.0 * x[1]).cos()
    })?
    .into();
    let p = sqg(&g, 1.0)?;
    let stepper = StepperConfig::fixed(0.01, 0.2, Scheme::Heun);
    let pic = PicardConfig::default();
    let sol = solve_quasilinear(&phi, &p, &pic, &stepper)?;
    let again = picard_step(&sol.trajectory, &phi, &p, &stepper, sol.iterations() + 1)?;
    let defect = again.sup_distance(&sol.trajectory)?;
    let m0 = phi.component(0).mean();
    let drift = sol
        .trajectory
        .frames()
        .iter()
        .map(|f| (f.component(0).mean() - m0).abs())
        .fold(0.0, f64::max);
    let growth = sol
        .trajectory
        .frames()
        .iter()
        .map(|f| f.sup_norm() - phi.sup_norm())
        .fold(f64::NEG_INFINITY, f64::max);
    let last = sol.differences.last().copied().unwrap_or(f64::NAN);
    Ok(vec![
        Check::le("sqg-converges", last, pic.tol_sup),
        Check::le("sqg-fixed-point", defect, 2.0 * pic.tol_sup),
        Check::le("sqg-mean", drift, 1e-10),
        Check::le("sqg-max-principle", growth, 1e-6 * phi.sup_norm()),
    ])
}

fn nonlinear() -> Result<Vec<Check>> {
    let mut partials = 0.0;
    for dim in 1..=2 {
        let presets = [
            half_heat(dim, &[])?,
            hj_critical(dim, 1.0),
            reaction(dim, 1.0),
            remark_class(dim, RemarkParams::default())?,
        ];
        for p in presets {
            if p.check_partials(2.0 * PI).is_err() {
                partials += 1.0;
            }
        }
    }
    let g = torus(1, 64)?;
    let phi = cosine(&g)?;
    let cfg = NonlinearConfig {
        dt: 1e-3,
        t_end: 0.5,
        ..Default::default()
    };
    let heat = solve_fully_nonlinear(&phi, &half_heat(1, &[])?, &cfg)?;
    let w_exact = gradient(&cauchy_semigroup(1.0, 0.5, &phi)?);
    let w_err = heat.w.terminal().expect("frames").sup_distance(&w_exact);
    let sol = solve_fully_nonlinear(&phi, &reaction(1, 1.0), &cfg)?;
    let exact = phi.scaled((-1.0f64).exp());
    let end = sol.u.terminal().expect("frames").component(0).clone();
    let rel = lp_norm(&(&end - &exact), 2.0)? / lp_norm(&exact, 2.0)?;
    let half = phi.scaled(0.5);
    let cfg = NonlinearConfig {
        dt: 5e-3,
        t_end: 0.5,
        ..Default::default()
    };
    let remark = solve_fully_nonlinear(&half, &remark_class(1, RemarkParams::default())?, &cfg)?;
    let curl = remark
        .report
        .curl_residual
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let bound = remark.bound.expect("remark-class supplies kappa0");
    Ok(vec![
        Check::le("partials-mismatched", partials, 0.0),
        Check::le("half-heat-semigroup", w_err, 1e-10),
        Check::le("reaction-exact", rel, 1e-2),
        Check::le("curl-1d", curl, 1e-12),
        Check::le("remark-sup-bound", bound.lhs, bound.rhs + 1e-6),
    ])
}

fn snapshot_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut mismatched = 0.0;
    for dim in 1..=3 {
        let g = torus(dim, 8)?;
        let f = random_field(&g, 2, &mut rng)?;
        let bytes = snapshot::encode(&f);
        if snapshot::encode(&snapshot::decode(&bytes)?) != bytes {
            mismatched += 1.0;
        }
    }
    Ok(vec![Check::le("round-trip-mismatches", mismatched, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(verify(Some("nope")), Err(Error::Config(_))));
    }

    #[test]
    fn cheap_suites_pass_with_prefixed_names() {
        for s in ["operators", "box-1d", "snapshot", "norms"] {
            let r = verify(Some(s)).unwrap();
            assert!(r.passed, "{}", r.to_json());
            assert!(r
                .checks
                .iter()
                .all(|c| c.name.starts_with(&format!("{s}/"))));
        }
    }
}
