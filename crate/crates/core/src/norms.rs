//! Discrete norms and seminorms used as solver diagnostics: Lebesgue norms,
//! integer and fractional Sobolev norms, Hölder seminorms over grid shifts and
//! the `sup + ||grad f||_{k,p}` norm of bounded smooth functions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{derivative_symbol, gradient, Grid, ScalarField, VectorField};

/// Largest points-per-axis for exhaustive shift searches and pair quadrature.
pub const SHIFT_SEARCH_CAP: usize = 128;
/// Number of random shifts sampled above [`SHIFT_SEARCH_CAP`].
pub const SAMPLED_SHIFTS: usize = 10_000;

/// Measured ratio between the pair-quadrature and spectral forms of the
/// order-1/2, p = 2 Sobolev seminorm on the torus of period `2 pi`, fitted on
/// `cos x` at n = 64. The two definitions agree only up to this constant
/// (the quadrature uses the truncated torus-distance kernel).
pub const HALF_ORDER_QUADRATURE_RATIO: f64 = 2.1824;

pub fn sup_norm(f: &ScalarField) -> f64 {
    f.sup_norm()
}

/// `(sum |f|^p h^d)^(1/p)` for `p` in `[1, inf)`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(lp_of_values(f.values(), f.grid().cell_volume(), p))
}

fn lp_of_values(values: &[f64], cell: f64, p: f64) -> f64 {
    if p == 2.0 {
        return (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
    }
    (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "Lebesgue exponent must be in [1, inf), got {p}"
        )))
    }
}

/// Components of the k-th derivative tensor, one field per ordered multi-index.
pub fn derivative_tensor(f: &ScalarField, k: usize) -> Vec<ScalarField> {
    let grid = f.grid();
    let d = grid.dim();
    let count = d.pow(k as u32);
    (0..count)
        .map(|mut code| {
            let mut axes = Vec::with_capacity(k);
            for _ in 0..k {
                axes.push(code % d);
                code /= d;
            }
            let c: Vec<Complex64> = f
                .spectral()
                .iter()
                .enumerate()
                .map(|(flat, &x)| {
                    axes.iter()
                        .fold(x, |acc, &a| acc * derivative_symbol(grid, flat, a))
                })
                .collect();
            ScalarField::from_parts(grid.clone(), grid.inverse(&c))
        })
        .collect()
}

/// Pointwise Frobenius magnitude of a tensor given by its components.
fn magnitude(components: &[ScalarField]) -> Vec<f64> {
    let len = components[0].values().len();
    (0..len)
        .map(|i| {
            components
                .iter()
                .map(|c| c.values()[i].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// `||f||_{beta,p}`. Integer `beta`: `sum_{k<=beta} ||grad^k f||_p`.
/// Fractional `beta`: `||f||_p + sum_{k<=[beta]} [grad^k f]_{{beta},p}` where the
/// seminorm is the spectral multiplier form for `p = 2` and the pair
/// quadrature over the grid otherwise (1-D/2-D, at most
/// [`SHIFT_SEARCH_CAP`] points per axis).
pub fn sobolev_norm(f: &ScalarField, beta: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::arg(format!(
            "Sobolev order must be >= 0, got {beta}"
        )));
    }
    let cell = f.grid().cell_volume();
    let whole = beta.floor() as usize;
    let frac = beta - beta.floor();
    if frac == 0.0 {
        let mut total = lp_of_values(f.values(), cell, p);
        for k in 1..=whole {
            total += lp_of_values(&magnitude(&derivative_tensor(f, k)), cell, p);
        }
        return Ok(total);
    }
    let mut total = lp_of_values(f.values(), cell, p);
    for k in 0..=whole {
        total += if p == 2.0 {
            spectral_seminorm_derivative(f, k, frac)
        } else {
            let tensor = if k == 0 {
                vec![f.clone()]
            } else {
                derivative_tensor(f, k)
            };
            pair_quadrature(&tensor, frac, p)?
        };
    }
    Ok(total)
}

/// Sobolev norm of a vector field: sum of the component norms.
pub fn sobolev_norm_vector(v: &VectorField, beta: f64, p: f64) -> Result<f64> {
    v.components()
        .iter()
        .map(|c| sobolev_norm(c, beta, p))
        .sum()
}

/// `||(-Delta)^{s/2} f||_2` by Parseval.
pub fn fractional_seminorm_spectral(f: &ScalarField, s: f64) -> f64 {
    spectral_seminorm_derivative(f, 0, s)
}

fn spectral_seminorm_derivative(f: &ScalarField, k: usize, s: f64) -> f64 {
    let grid = f.grid();
    let norm = grid.period().powi(grid.dim() as i32) / (grid.len() as f64).powi(2);
    let sum: f64 = f
        .spectral()
        .iter()
        .enumerate()
        .map(|(flat, c)| {
            let d2: f64 = (0..grid.dim())
                .map(|a| derivative_symbol(grid, flat, a).norm_sqr())
                .sum();
            grid.abs_xi()[flat].powf(2.0 * s) * d2.powi(k as i32) * c.norm_sqr()
        })
        .sum();
    (sum * norm).sqrt()
}

/// `(sum_{x != y} |f(x) - f(y)|^p / dist(x,y)^{d + s p} h^{2d})^{1/p}` with
/// torus distance.
pub fn fractional_seminorm_quadrature(f: &ScalarField, s: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    pair_quadrature(std::slice::from_ref(f), s, p)
}

fn pair_quadrature(tensor: &[ScalarField], s: f64, p: f64) -> Result<f64> {
    let grid = tensor[0].grid();
    if grid.dim() > 2 || grid.n() > SHIFT_SEARCH_CAP {
        return Err(Error::arg(format!(
            "pair quadrature of fractional norms is limited to 1-D/2-D grids with n <= {SHIFT_SEARCH_CAP}; got {grid:?} (use p = 2 for the spectral form)"
        )));
    }
    let d = grid.dim() as f64;
    let cell = grid.cell_volume();
    let per_shift: Vec<f64> = (1..grid.len())
        .into_par_iter()
        .map(|shift| {
            let dist = grid.torus_distance(shift);
            let mut acc = 0.0;
            for x in 0..grid.len() {
                let y = shifted_index(grid, x, shift);
                let diff2: f64 = tensor
                    .iter()
                    .map(|c| (c.values()[x] - c.values()[y]).powi(2))
                    .sum();
                acc += diff2.powf(p / 2.0);
            }
            acc / dist.powf(d + s * p)
        })
        .collect();
    let total: f64 = per_shift.iter().sum();
    Ok((total * cell * cell).powf(1.0 / p))
}

fn shifted_index(grid: &Grid, x: usize, shift: usize) -> usize {
    let n = grid.n();
    let a = grid.unflatten(x);
    let b = grid.unflatten(shift);
    let mut idx = [0usize; 3];
    for ax in 0..grid.dim() {
        idx[ax] = (a[ax] + b[ax]) % n;
    }
    grid.flatten(&idx[..grid.dim()])
}

/// Hölder seminorm estimate; `lower_bound` is set when only a random subset
/// of shifts was searched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub value: f64,
    pub lower_bound: bool,
}

/// `max_{y != 0} ||f(. + y) - f||_inf / dist(y)^beta` over grid shifts.
pub fn holder_seminorm(f: &ScalarField, beta: f64) -> Result<HolderEstimate> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::arg(format!(
            "Hölder exponent must be in (0, 1], got {beta}"
        )));
    }
    let grid = f.grid();
    let exhaustive = grid.n() <= SHIFT_SEARCH_CAP;
    let shifts: Vec<usize> = if exhaustive {
        // y and -y give the same increment
        (1..grid.len()).filter(|&s| grid.mirror(s) >= s).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4f1d);
        (0..SAMPLED_SHIFTS)
            .map(|_| rng.random_range(1..grid.len()))
            .collect()
    };
    let vals = f.values();
    let value = shifts
        .par_iter()
        .map(|&shift| {
            let mut m: f64 = 0.0;
            for x in 0..grid.len() {
                let y = shifted_index(grid, x, shift);
                m = m.max((vals[y] - vals[x]).abs());
            }
            m / grid.torus_distance(shift).powf(beta)
        })
        .reduce(|| 0.0, f64::max);
    Ok(HolderEstimate {
        value,
        lower_bound: !exhaustive,
    })
}

/// `||f||_inf + sum_j ||d_j f||_{k,p}`.
pub fn u_norm(f: &ScalarField, k: u32, p: f64) -> Result<f64> {
    Ok(f.sup_norm() + sobolev_norm_vector(&gradient(f), k as f64, p)?)
}

/// Which norms a [`NormReport`] contains.
#[derive(Clone, Debug, PartialEq)]
pub struct NormSpec {
    pub lp: Vec<f64>,
    pub sobolev: Vec<(f64, f64)>,
    pub holder: Vec<f64>,
    pub u_kp: Vec<(u32, f64)>,
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec {
            lp: vec![2.0],
            sobolev: vec![(1.0, 2.0)],
            holder: vec![0.5],
            u_kp: vec![(1, 2.0)],
        }
    }
}

impl NormSpec {
    /// Only sup and L^2; cheap enough for every step.
    pub fn light() -> Self {
        NormSpec {
            lp: vec![2.0],
            sobolev: vec![],
            holder: vec![],
            u_kp: vec![],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NormReport {
    pub sup: f64,
    pub lp: Vec<(f64, f64)>,
    pub sobolev: Vec<((f64, f64), f64)>,
    pub holder: Vec<(f64, HolderEstimate)>,
    pub u_kp: Vec<((u32, f64), f64)>,
}

impl NormReport {
    pub fn compute(f: &ScalarField, spec: &NormSpec) -> Result<Self> {
        Ok(NormReport {
            sup: f.sup_norm(),
            lp: spec
                .lp
                .iter()
                .map(|&p| Ok((p, lp_norm(f, p)?)))
                .collect::<Result<_>>()?,
            sobolev: spec
                .sobolev
                .iter()
                .map(|&(b, p)| Ok(((b, p), sobolev_norm(f, b, p)?)))
                .collect::<Result<_>>()?,
            holder: spec
                .holder
                .iter()
                .map(|&b| Ok((b, holder_seminorm(f, b)?)))
                .collect::<Result<_>>()?,
            u_kp: spec
                .u_kp
                .iter()
                .map(|&(k, p)| Ok(((k, p), u_norm(f, k, p)?)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }

    pub fn holder(&self, beta: f64) -> Option<HolderEstimate> {
        self.holder
            .iter()
            .find(|(b, _)| *b == beta)
            .map(|(_, v)| *v)
    }

    /// `(name, value)` pairs with stable names such as `lp:2`, `sobolev:1:2`,
    /// `holder:0.5`, `u:1:2`.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![("sup".to_string(), self.sup)];
        out.extend(self.lp.iter().map(|(p, v)| (format!("lp:{p}"), *v)));
        out.extend(
            self.sobolev
                .iter()
                .map(|((b, p), v)| (format!("sobolev:{b}:{p}"), *v)),
        );
        out.extend(self.holder.iter().map(|(b, h)| {
            let tag = if h.lower_bound { ":lower" } else { "" };
            (format!("holder:{b}{tag}"), h.value)
        }));
        out.extend(
            self.u_kp
                .iter()
                .map(|((k, p), v)| (format!("u:{k}:{p}"), *v)),
        );
        out
    }

    /// CSV rows `time,norm,value`.
    pub fn csv_rows(&self, time: f64) -> String {
        self.entries()
            .into_iter()
            .map(|(name, v)| format!("{time},{name},{v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_and_cosine_l2() {
        let g = grid1(32);
        let one = ScalarField::constant(&g, 1.0);
        assert!((lp_norm(&one, 2.0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-13);
        let c = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        assert!((lp_norm(&c, 2.0).unwrap() - PI.sqrt()).abs() < 1e-13);
        assert!(lp_norm(&c, 0.5).is_err());
        assert!(lp_norm(&c, f64::INFINITY).is_err());
    }

    #[test]
    fn sobolev_integer_and_zero_order() {
        let g = grid1(32);
        let c = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        assert_eq!(
            sobolev_norm(&c, 0.0, 3.0).unwrap(),
            lp_norm(&c, 3.0).unwrap()
        );
        assert!((sobolev_norm(&c, 1.0, 2.0).unwrap() - 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!(sobolev_norm(&c, -1.0, 2.0).is_err());
    }

    #[test]
    fn fractional_pair_quadrature_size_cap() {
        let g = grid1(256);
        let c = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        assert!(sobolev_norm(&c, 0.5, 3.0).is_err());
        // the spectral p = 2 form has no cap
        assert!(sobolev_norm(&c, 0.5, 2.0).is_ok());
        let g3 = Grid::new(3, 8, 1.0).unwrap();
        assert!(sobolev_norm(&ScalarField::constant(&g3, 1.0), 0.5, 3.0).is_err());
    }

    #[test]
    fn half_order_spectral_vs_quadrature_after_calibration() {
        for n in [32usize, 64, 128] {
            let g = grid1(n);
            let c = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
            let spec = fractional_seminorm_spectral(&c, 0.5);
            assert!((spec - PI.sqrt()).abs() < 1e-12);
            let quad = fractional_seminorm_quadrature(&c, 0.5, 2.0).unwrap();
            let rel = quad / (HALF_ORDER_QUADRATURE_RATIO * spec) - 1.0;
            assert!(rel.abs() <= 0.1, "n={n} rel={rel}");
        }
    }

    #[test]
    fn holder_of_constant_and_cosine() {
        let g = grid1(64);
        assert_eq!(
            holder_seminorm(&ScalarField::constant(&g, 2.0), 0.5)
                .unwrap()
                .value,
            0.0
        );
        let c = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let h = holder_seminorm(&c, 1.0).unwrap();
        assert!(!h.lower_bound);
        assert!((0.9..=1.0).contains(&h.value), "{}", h.value);
        let scaled = holder_seminorm(&c.scaled(-3.0), 1.0).unwrap().value;
        assert_eq!(scaled, 3.0 * h.value);
        assert!(holder_seminorm(&c, 0.0).is_err());
        assert!(holder_seminorm(&c, 1.5).is_err());
    }

    #[test]
    fn holder_above_cap_is_lower_bound() {
        let g = grid1(256);
        let c = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let h = holder_seminorm(&c, 1.0).unwrap();
        assert!(h.lower_bound);
        assert!(h.value <= 1.0);
    }

    #[test]
    fn u_norm_is_sup_plus_gradient_norm() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].sin() * (2.0 * x[1]).cos()).unwrap();
        let grad = gradient(&f);
        let expect = f.sup_norm()
            + sobolev_norm(grad.component(0), 1.0, 3.0).unwrap()
            + sobolev_norm(grad.component(1), 1.0, 3.0).unwrap();
        assert_eq!(u_norm(&f, 1, 3.0).unwrap(), expect);
    }

    #[test]
    fn report_names_are_stable() {
        let g = grid1(16);
        let f = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let r = NormReport::compute(&f, &NormSpec::default()).unwrap();
        let names: Vec<String> = r.entries().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["sup", "lp:2", "sobolev:1:2", "holder:0.5", "u:1:2"]);
        assert!(r.csv_rows(0.5).starts_with("0.5,sup,"));
    }
}
