//! Monte Carlo realization of the Cauchy semigroup,
//! `P^lambda_t f(x) = E f(x + lambda L_t)`, used as an independent oracle for
//! the spectral propagators.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::field::ScalarField;
use super::grid::{Grid, MAX_DIM};
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 1000;

/// Source of isotropic Cauchy increments. An increment over a time step `s`
/// is `scale * s * Z / |N|` with `Z` a standard `dim`-dimensional normal and
/// `N` an independent standard normal, i.e. a multivariate Student-t with one
/// degree of freedom, whose density is the Poisson kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchySampler {
    pub seed: u64,
    pub scale: f64,
    pub dim: usize,
}

impl CauchySampler {
    pub fn new(seed: u64, scale: f64, dim: usize) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::arg(format!(
                "Cauchy scale must be >= 0, got {scale}"
            )));
        }
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::arg(format!("dimension {dim} not in 1..=3")));
        }
        Ok(CauchySampler { seed, scale, dim })
    }

    /// Independent deterministic stream, one per grid point (or any other
    /// caller-chosen index), so results do not depend on thread scheduling.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    /// Writes one increment over a step of length `s` into `out[..dim]`.
    pub fn increment<R: rand::Rng + ?Sized>(&self, rng: &mut R, s: f64, out: &mut [f64]) {
        for v in out.iter_mut().take(self.dim) {
            *v = StandardNormal.sample(rng);
        }
        let denom: f64 = StandardNormal.sample(rng);
        let factor = self.scale * s / denom.abs();
        for v in out.iter_mut().take(self.dim) {
            *v *= factor;
        }
    }
}

/// How a field is evaluated at off-grid points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffGrid {
    #[default]
    Trigonometric,
    NearestNode,
}

/// Point evaluation of the trigonometric interpolant of a field.
pub struct Interpolant {
    grid: Grid,
    values: Vec<f64>,
    mode: OffGrid,
    /// (integer wavevector, coefficient / n^d) of the significant modes
    terms: Vec<([i64; MAX_DIM], Complex64)>,
}

impl Interpolant {
    pub fn new(f: &ScalarField, mode: OffGrid) -> Self {
        let grid = f.grid().clone();
        let coeffs = f.spectral();
        let cmax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let norm = 1.0 / grid.len() as f64;
        let terms = if mode == OffGrid::Trigonometric {
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() > 1e-15 * cmax)
                .map(|(flat, &c)| (grid.int_xi(flat), c * norm))
                .collect()
        } else {
            Vec::new()
        };
        Interpolant {
            grid,
            values: f.values().to_vec(),
            mode,
            terms,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dim = self.grid.dim();
        let l = self.grid.period();
        match self.mode {
            OffGrid::NearestNode => {
                let h = self.grid.spacing();
                let n = self.grid.n() as i64;
                let mut idx = [0usize; MAX_DIM];
                for a in 0..dim {
                    idx[a] = ((x[a] / h).round() as i64).rem_euclid(n) as usize;
                }
                self.values[self.grid.flatten(&idx[..dim])]
            }
            OffGrid::Trigonometric => {
                let half = (self.grid.n() / 2) as i64;
                // powers z_a^k for k in [-n/2, n/2]
                let mut tables: [Vec<Complex64>; MAX_DIM] = Default::default();
                for a in 0..dim {
                    let theta = 2.0 * std::f64::consts::PI * x[a].rem_euclid(l) / l;
                    let z = Complex64::from_polar(1.0, theta);
                    let zi = z.conj();
                    let mut t = vec![Complex64::new(1.0, 0.0); (2 * half + 1) as usize];
                    for k in 1..=half as usize {
                        t[half as usize + k] = t[half as usize + k - 1] * z;
                        t[half as usize - k] = t[half as usize - k + 1] * zi;
                    }
                    tables[a] = t;
                }
                let mut s = 0.0;
                for (k, c) in &self.terms {
                    let mut ph = *c;
                    for a in 0..dim {
                        ph *= tables[a][(k[a] + half) as usize];
                    }
                    s += ph.re;
                }
                s
            }
        }
    }
}

/// Monte Carlo estimate with per-point standard errors.
#[derive(Clone, Debug)]
pub struct McEstimate {
    pub estimate: ScalarField,
    pub std_error: ScalarField,
}

impl McEstimate {
    /// Pointwise z-scores against a reference field (points with zero
    /// standard error and zero deviation score 0, with nonzero deviation +inf).
    pub fn z_scores(&self, reference: &ScalarField) -> Vec<f64> {
        self.estimate
            .values()
            .iter()
            .zip(reference.values())
            .zip(self.std_error.values())
            .map(|((&e, &r), &se)| {
                let dev = (e - r).abs();
                if se > 0.0 {
                    dev / se
                } else if dev == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

/// Per-point Monte Carlo average of `sample(rng, x)` over `n_samples` draws.
/// Point `i` uses stream `i` of the sampler, and the running mean/variance
/// uses Welford's update in draw order, so results are reproducible.
pub fn mc_expectation<S>(
    grid: &Grid,
    sampler: &CauchySampler,
    n_samples: usize,
    sample: S,
) -> Result<McEstimate>
where
    S: Fn(&mut ChaCha8Rng, &[f64]) -> f64 + Sync,
{
    if n_samples < MIN_SAMPLES {
        return Err(Error::arg(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let dim = grid.dim();
    let stats: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = sampler.stream(i as u64);
            let x = grid.coord(i);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for k in 1..=n_samples {
                let v = sample(&mut rng, &x[..dim]);
                let d = v - mean;
                mean += d / k as f64;
                m2 += d * (v - mean);
            }
            let var = m2 / (n_samples - 1) as f64;
            (mean, (var.max(0.0) / n_samples as f64).sqrt())
        })
        .collect();
    let (est, se): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
    Ok(McEstimate {
        estimate: ScalarField::new(grid.clone(), est)?,
        std_error: ScalarField::new(grid.clone(), se)?,
    })
}

/// Monte Carlo estimate of `P^lambda_t f` with jumps `lambda * scale * L_t`.
pub fn mc_semigroup(
    sampler: &CauchySampler,
    lambda: f64,
    t: f64,
    f: &ScalarField,
    n_samples: usize,
    off_grid: OffGrid,
) -> Result<McEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::arg(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0 && t.is_finite() && t >= 0.0) {
        return Err(Error::arg("lambda and t must be finite and nonnegative"));
    }
    if sampler.dim != f.grid().dim() {
        return Err(Error::arg("sampler dimension does not match the field"));
    }
    let grid = f.grid();
    let first = f.values()[0];
    let degenerate = lambda * sampler.scale == 0.0 || t == 0.0;
    if degenerate || f.values().iter().all(|&v| v == first) {
        return Ok(McEstimate {
            estimate: f.clone(),
            std_error: ScalarField::zeros(grid),
        });
    }
    let interp = Interpolant::new(f, off_grid);
    let scaled = CauchySampler {
        scale: sampler.scale * lambda,
        ..sampler.clone()
    };
    let dim = grid.dim();
    mc_expectation(grid, sampler, n_samples, |rng, x| {
        let mut y = [0.0; MAX_DIM];
        scaled.increment(rng, t, &mut y);
        for a in 0..dim {
            y[a] += x[a];
        }
        interp.eval(&y[..dim])
    })
}
