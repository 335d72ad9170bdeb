use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::grid::{Grid, MAX_DIM};
use crate::error::{Error, Result};

/// Real samples on a [`Grid`] with a lazily computed spectral representation.
#[derive(Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    spectral: OnceLock<Arc<Vec<Complex64>>>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {:?} ({} points)",
                values.len(),
                grid,
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "field values".into(),
                index,
            });
        }
        Ok(Self::from_parts(grid, values))
    }

    /// Skips the finiteness scan; callers guarantee the invariant or check it later.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        ScalarField {
            grid,
            values,
            spectral: OnceLock::new(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_parts(grid.clone(), vec![c; grid.len()])
    }

    /// Samples `f` at every grid point; `f` receives the `dim` coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.coord(i)[..dim])).collect();
        Self::new(grid.clone(), values)
    }

    /// Real part of the inverse transform of `coeffs`.
    pub fn from_spectral(grid: &Grid, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for {:?}",
                coeffs.len(),
                grid
            )));
        }
        Self::new(grid.clone(), grid.inverse(coeffs))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Forward transform, computed once and cached.
    pub fn spectral(&self) -> &[Complex64] {
        self.spectral
            .get_or_init(|| Arc::new(self.grid.forward(&self.values)))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self::from_parts(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Pointwise combination. Panics if the grids differ.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert!(
            self.grid == other.grid,
            "grid mismatch: {:?} vs {:?}",
            self.grid,
            other.grid
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_parts(self.grid.clone(), values)
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Zeroes every mode outside the 2/3 band.
    pub fn dealiased(&self) -> ScalarField {
        let mut c = self.spectral().to_vec();
        truncate_to_band(&self.grid, &mut c);
        Self::from_parts(self.grid.clone(), self.grid.inverse(&c))
    }

    /// Spectral resampling onto another grid of the same torus. Refinement is
    /// exact trigonometric interpolation: Nyquist coefficients are split
    /// evenly between `+n/2` and `-n/2`. Coarsening truncates.
    pub fn resample(&self, target: &Grid) -> Result<ScalarField> {
        if target.dim() != self.grid.dim() || target.period() != self.grid.period() {
            return Err(Error::GridMismatch(format!(
                "cannot resample {:?} onto {:?}",
                self.grid, target
            )));
        }
        if target == &self.grid {
            return Ok(self.clone());
        }
        let src = &self.grid;
        let dim = src.dim();
        let (n_src, n_dst) = (src.n(), target.n());
        let coeffs = self.spectral();
        let mut out = vec![Complex64::default(); target.len()];
        let ratio = (n_dst as f64 / n_src as f64).powi(dim as i32);
        let half_dst = (n_dst / 2) as i64;
        for (flat, &c) in coeffs.iter().enumerate() {
            if c == Complex64::default() {
                continue;
            }
            let k = src.int_xi(flat);
            // per-axis targets and weights
            let mut targets: Vec<([i64; MAX_DIM], f64)> = vec![([0; MAX_DIM], 1.0)];
            let mut skip = false;
            for a in 0..dim {
                let ka = k[a];
                let options: Vec<(i64, f64)> = if n_dst > n_src {
                    if ka == -((n_src / 2) as i64) {
                        vec![(ka, 0.5), (-ka, 0.5)]
                    } else {
                        vec![(ka, 1.0)]
                    }
                } else if ka.abs() >= half_dst {
                    skip = true;
                    break;
                } else {
                    vec![(ka, 1.0)]
                };
                let mut next = Vec::with_capacity(targets.len() * options.len());
                for (t, w) in &targets {
                    for &(kk, ww) in &options {
                        let mut t2 = *t;
                        t2[a] = kk;
                        next.push((t2, w * ww));
                    }
                }
                targets = next;
            }
            if skip {
                continue;
            }
            for (t, w) in targets {
                let mut idx = [0usize; MAX_DIM];
                for a in 0..dim {
                    idx[a] = t[a].rem_euclid(n_dst as i64) as usize;
                }
                out[target.flatten(&idx[..dim])] += c * (w * ratio);
            }
        }
        ScalarField::from_spectral(target, &out)
    }

    /// `g(x) = f(x + y)` for an arbitrary displacement `y`, exact for the
    /// trigonometric interpolant.
    pub fn translated(&self, y: &[f64]) -> ScalarField {
        let grid = &self.grid;
        let mut c = self.spectral().to_vec();
        for (flat, cf) in c.iter_mut().enumerate() {
            let xi = grid.xi(flat);
            let phase: f64 = (0..grid.dim()).map(|a| xi[a] * y[a]).sum();
            *cf *= Complex64::from_polar(1.0, phase);
        }
        symmetrize_coefficients(grid, &mut c);
        Self::from_parts(grid.clone(), grid.inverse(&c))
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("sup", &self.sup_norm())
            .finish()
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

/// Zeroes all coefficients outside the 2/3 band.
pub(crate) fn truncate_to_band(grid: &Grid, coeffs: &mut [Complex64]) {
    let cut = grid.dealias_cutoff();
    let n = grid.n();
    let dim = grid.dim();
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let idx = grid.unflatten(flat);
        if (0..dim).any(|a| {
            let k = if idx[a] < n / 2 {
                idx[a] as i64
            } else {
                idx[a] as i64 - n as i64
            };
            k.abs() > cut
        }) {
            *c = Complex64::default();
        }
    }
}

/// Projects coefficients onto the conjugate-symmetric subspace.
pub(crate) fn symmetrize_coefficients(grid: &Grid, coeffs: &mut [Complex64]) {
    for flat in 0..coeffs.len() {
        let m = grid.mirror(flat);
        if m < flat {
            continue;
        }
        if m == flat {
            coeffs[flat] = Complex64::new(coeffs[flat].re, 0.0);
        } else {
            let a = coeffs[flat];
            let b = coeffs[m];
            let s = (a + b.conj()) * 0.5;
            coeffs[flat] = s;
            coeffs[m] = s.conj();
        }
    }
}

/// Product of two fields under the 2/3 rule: both factors and the result are
/// truncated to the dealiasing band.
pub fn dealiased_product(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    f.grid().check_same(g.grid())?;
    let p = &f.dealiased() * &g.dealiased();
    Ok(p.dealiased())
}

/// `m` scalar fields on one grid: gradients, velocity fields and the
/// unknowns of a system.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::arg("vector field needs at least one component"))?;
        for c in &components[1..] {
            first.grid().check_same(c.grid())?;
        }
        Ok(VectorField { components })
    }

    pub fn zeros(grid: &Grid, m: usize) -> Self {
        VectorField {
            components: vec![ScalarField::zeros(grid); m.max(1)],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let grid = self.grid();
        let values = (0..grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values()[i] * c.values()[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField::from_parts(grid.clone(), values)
    }

    /// `max_x |v(x)|` with the Euclidean norm on components.
    pub fn sup_norm(&self) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].sup_norm();
        }
        self.magnitude().sup_norm()
    }

    /// Sup norm of the pointwise difference.
    pub fn sup_distance(&self, other: &VectorField) -> f64 {
        assert_eq!(self.len(), other.len());
        let grid = self.grid();
        (0..grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .zip(&other.components)
                    .map(|(a, b)| (a.values()[i] - b.values()[i]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> VectorField {
        VectorField {
            components: self.components.iter().map(f).collect(),
        }
    }

    /// `(1 - gamma) self + gamma other`.
    pub fn blend(&self, other: &VectorField, gamma: f64) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.zip_map(b, |x, y| (1.0 - gamma) * x + gamma * y))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }
}

impl From<ScalarField> for VectorField {
    fn from(f: ScalarField) -> Self {
        VectorField {
            components: vec![f],
        }
    }
}

/// One term `amplitude * cos(2 pi k.x / L + phase)` of a [`TrigSeries`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrigMode {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Closed-form band-limited function on the torus. Sampling the same series on
/// grids of different resolution yields the same underlying function, which is
/// what refinement studies need.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSeries {
    pub dim: usize,
    pub period: f64,
    pub constant: f64,
    pub modes: Vec<TrigMode>,
}

impl TrigSeries {
    pub fn new(dim: usize, period: f64) -> Self {
        TrigSeries {
            dim,
            period,
            constant: 0.0,
            modes: Vec::new(),
        }
    }

    pub fn with_mode(mut self, k: &[i64], amplitude: f64, phase: f64) -> Self {
        self.modes.push(TrigMode {
            k: k.to_vec(),
            amplitude,
            phase,
        });
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }

    /// Random series with every wavevector in the box `|k_j| <= kmax`,
    /// standard normal amplitudes and uniform phases.
    pub fn random<R: Rng + ?Sized>(dim: usize, period: f64, kmax: i64, rng: &mut R) -> Self {
        let mut s = TrigSeries::new(dim, period);
        s.constant = rng.sample(StandardNormal);
        let side = (2 * kmax + 1) as usize;
        for flat in 0..side.pow(dim as u32) {
            let mut rem = flat;
            let mut k = vec![0i64; dim];
            for a in (0..dim).rev() {
                k[a] = (rem % side) as i64 - kmax;
                rem /= side;
            }
            // one representative per +-k pair
            match k.iter().find(|&&v| v != 0) {
                Some(&v) if v > 0 => {}
                _ => continue,
            }
            let amp: f64 = StandardNormal.sample(rng);
            let phase = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
            s.modes.push(TrigMode {
                k,
                amplitude: amp,
                phase,
            });
        }
        s
    }

    /// Highest |k_j| present.
    pub fn bandwidth(&self) -> i64 {
        self.modes
            .iter()
            .flat_map(|m| m.k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.period;
        self.constant
            + self
                .modes
                .iter()
                .map(|m| {
                    let arg: f64 = m.k.iter().zip(x).map(|(&k, &xa)| k as f64 * xa).sum();
                    m.amplitude * (w * arg + m.phase).cos()
                })
                .sum::<f64>()
    }

    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        if grid.dim() != self.dim || grid.period() != self.period {
            return Err(Error::GridMismatch(format!(
                "series on dim {} period {} sampled on {:?}",
                self.dim, self.period, grid
            )));
        }
        ScalarField::from_fn(grid, |x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn rejects_non_finite_values() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        match ScalarField::new(g, v) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resample_refine_then_coarsen_is_identity() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let fine = g.refined(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let f = ScalarField::new(g.clone(), vals).unwrap();
        let up = f.resample(&fine).unwrap();
        // refined field interpolates the coarse samples, Nyquist included
        for flat in 0..g.len() {
            let idx = g.unflatten(flat);
            let fi = fine.flatten(&[2 * idx[0], 2 * idx[1]]);
            assert!((up.values()[fi] - f.values()[flat]).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_of_single_mode() {
        let g = Grid::new(1, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let s = f.translated(&[0.3]);
        for i in 0..g.len() {
            let x = g.coord(i)[0];
            assert!((s.values()[i] - (x + 0.3).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn random_series_is_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = TrigSeries::random(2, 1.0, 3, &mut rng);
        assert_eq!(s.bandwidth(), 3);
        // (7*7 - 1) / 2 representatives
        assert_eq!(s.modes.len(), 24);
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = s.sample(&g).unwrap();
        for (flat, c) in f.spectral().iter().enumerate() {
            let k = g.int_xi(flat);
            if k[0].abs() > 3 || k[1].abs() > 3 {
                assert!(c.norm() < 1e-10);
            }
        }
    }
}
