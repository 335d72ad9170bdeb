//! Cauchy semigroup, the drift-shifted propagator and the carré du champ of
//! `(-Delta)^{1/2}`.

use num_complex::Complex64;

use super::field::{symmetrize_coefficients, ScalarField};
use super::multiplier::{apply_radial, half_laplacian};
use crate::error::{Error, Result};

/// `P^lambda_t f`: spectral action `exp(-lambda t |xi|)`.
pub fn cauchy_semigroup(lambda: f64, t: f64, f: &ScalarField) -> Result<ScalarField> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("t", t)?;
    if lambda == 0.0 || t == 0.0 {
        return Ok(f.clone());
    }
    let rate = lambda * t;
    Ok(apply_radial(f, |k| (-rate * k).exp()))
}

/// Solution at time `t` of `d_t v + lambda (-Delta)^{1/2} v + theta . grad v = 0`
/// started from `f` at time `s`: the Cauchy semigroup composed with the
/// translation `x -> x - theta (t - s)`.
pub fn shifted_propagator(
    lambda: f64,
    theta: &[f64],
    t: f64,
    s: f64,
    f: &ScalarField,
) -> Result<ScalarField> {
    check_nonneg("lambda", lambda)?;
    if !(t.is_finite() && s.is_finite()) {
        return Err(Error::arg("propagator times must be finite"));
    }
    if s > t {
        return Err(Error::arg(format!("propagator start {s} is after end {t}")));
    }
    let grid = f.grid();
    if theta.len() != grid.dim() {
        return Err(Error::arg(format!(
            "drift has {} components on a {}-D grid",
            theta.len(),
            grid.dim()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("drift must be finite"));
    }
    let tau = t - s;
    let mut c = f.spectral().to_vec();
    for (flat, cf) in c.iter_mut().enumerate() {
        let xi = grid.xi(flat);
        let drift: f64 = theta.iter().zip(&xi).map(|(a, b)| a * b).sum();
        let decay = -lambda * tau * grid.abs_xi()[flat];
        *cf *= Complex64::from_polar(decay.exp(), -tau * drift);
    }
    symmetrize_coefficients(grid, &mut c);
    ScalarField::from_spectral(grid, &c)
}

/// One piece of a piecewise-constant `(lambda, theta)` schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorSegment {
    pub duration: f64,
    pub lambda: f64,
    pub theta: Vec<f64>,
}

/// Composes [`shifted_propagator`] over consecutive segments.
pub fn shifted_propagator_piecewise(
    segments: &[PropagatorSegment],
    f: &ScalarField,
) -> Result<ScalarField> {
    let mut out = f.clone();
    for seg in segments {
        out = shifted_propagator(seg.lambda, &seg.theta, seg.duration, 0.0, &out)?;
    }
    Ok(out)
}

/// `E(f, g) = g Lf + f Lg - L(fg)` with `L = (-Delta)^{1/2}`.
///
/// The product is formed on a grid refined by two (zero-padded spectra), so it
/// carries no aliasing error; the result is sampled back at the original nodes
/// and therefore equals the singular-integral form exactly there for the
/// trigonometric interpolants of `f` and `g`.
pub fn carre_du_champ(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    f.grid().check_same(g.grid())?;
    let grid = f.grid();
    let fine = grid.refined(2)?;
    let ff = f.resample(&fine)?;
    let gf = g.resample(&fine)?;
    let lf = half_laplacian(&ff);
    let lg = half_laplacian(&gf);
    let lfg = half_laplacian(&(&ff * &gf));
    let dim = grid.dim();
    let values = (0..grid.len())
        .map(|flat| {
            let idx = grid.unflatten(flat);
            let mut fi = [0usize; 3];
            for a in 0..dim {
                fi[a] = 2 * idx[a];
            }
            let j = fine.flatten(&fi[..dim]);
            gf.values()[j] * lf.values()[j] + ff.values()[j] * lg.values()[j] - lfg.values()[j]
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "{name} must be finite and nonnegative, got {v}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn cos_field(n: usize, k: f64) -> ScalarField {
        let g = Grid::new(1, n, 2.0 * PI).unwrap();
        ScalarField::from_fn(&g, |x| (k * x[0]).cos()).unwrap()
    }

    #[test]
    fn semigroup_single_mode() {
        let f = cos_field(32, 3.0);
        let p = cauchy_semigroup(1.0, 0.4, &f).unwrap();
        let expect = f.scaled((-1.2f64).exp());
        assert!((&p - &expect).sup_norm() < 1e-12);
        assert_eq!(cauchy_semigroup(1.0, 0.0, &f).unwrap().values(), f.values());
        assert!(cauchy_semigroup(-1.0, 0.1, &f).is_err());
    }

    #[test]
    fn pure_transport_moves_mode() {
        let f = cos_field(32, 1.0);
        let out = shifted_propagator(0.0, &[1.0], PI / 2.0, 0.0, &f).unwrap();
        let g = f.grid();
        for i in 0..g.len() {
            let x = g.coord(i)[0];
            assert!((out.values()[i] - (x - PI / 2.0).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn start_after_end_rejected() {
        let f = cos_field(16, 1.0);
        assert!(shifted_propagator(1.0, &[0.0], 0.1, 0.2, &f).is_err());
    }

    #[test]
    fn carre_du_champ_of_cosine_is_one() {
        // E(cos, cos) = 2 cos^2 - L(cos^2) = 2 cos^2 - cos 2x = 1
        let f = cos_field(16, 1.0);
        let e = carre_du_champ(&f, &f).unwrap();
        for v in e.values() {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn carre_du_champ_nonnegative_with_nyquist_content() {
        let g = Grid::new(1, 16, 2.0 * PI).unwrap();
        // includes the Nyquist mode
        let f = ScalarField::from_fn(&g, |x| (8.0 * x[0]).cos() + (7.0 * x[0]).sin()).unwrap();
        let e = carre_du_champ(&f, &f).unwrap();
        assert!(e.min() > -1e-10 * f.sup_norm().powi(2));
    }
}
