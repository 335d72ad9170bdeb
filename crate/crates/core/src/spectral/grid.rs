//! Uniform periodic grids on the torus `[0, L)^d` and the discrete Fourier
//! transforms attached to them.
//!
//! Values are stored row-major with axis 0 slowest. Spectral coefficients use
//! the unnormalized forward convention `c_k = sum_j f_j exp(-i xi_k . x_j)` and
//! the inverse divides by `n^d`, so that `f(x) = n^-d sum_k c_k exp(i xi_k . x)`.
//! Integer wavenumbers per axis follow FFT order: `0, 1, .., n/2-1, -n/2, .., -1`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    period: f64,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// |xi| for every flat spectral index.
    abs_xi: Vec<f64>,
    /// Flat index of the mode -k.
    mirror: Vec<usize>,
}

impl Grid {
    /// Builds a grid with `n` points per axis over `[0, period)^dim`.
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "period must be positive, got {period}"
            )));
        }
        let len = n.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let scale = 2.0 * std::f64::consts::PI / period;
        let mut abs_xi = Vec::with_capacity(len);
        let mut mirror = Vec::with_capacity(len);
        for flat in 0..len {
            let idx = unflatten(flat, n, dim);
            let mut sq = 0.0;
            let mut m = [0usize; MAX_DIM];
            for a in 0..dim {
                let k = int_wavenumber(idx[a], n) as f64 * scale;
                sq += k * k;
                m[a] = (n - idx[a]) % n;
            }
            abs_xi.push(sq.sqrt());
            mirror.push(flatten(&m[..dim], n));
        }

        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                n,
                period,
                len,
                forward,
                inverse,
                abs_xi,
                mirror,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn period(&self) -> f64 {
        self.inner.period
    }

    pub fn spacing(&self) -> f64 {
        self.inner.period / self.inner.n as f64
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single grid cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    pub fn unflatten(&self, flat: usize) -> [usize; MAX_DIM] {
        unflatten(flat, self.n(), self.dim())
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        flatten(&idx[..self.dim()], self.n())
    }

    /// Physical coordinates of a grid point (unused axes are zero).
    pub fn coord(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let h = self.spacing();
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = idx[a] as f64 * h;
        }
        x
    }

    /// Signed integer wavenumber for per-axis index `i`.
    pub fn int_wavenumber(&self, i: usize) -> i64 {
        int_wavenumber(i, self.n())
    }

    /// Lattice frequency `2 pi k / L` for per-axis index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.int_wavenumber(i) as f64 * 2.0 * std::f64::consts::PI / self.period()
    }

    pub fn xi(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let mut xi = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            xi[a] = self.wavenumber(idx[a]);
        }
        xi
    }

    pub fn int_xi(&self, flat: usize) -> [i64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let mut k = [0; MAX_DIM];
        for a in 0..self.dim() {
            k[a] = self.int_wavenumber(idx[a]);
        }
        k
    }

    pub fn abs_xi(&self) -> &[f64] {
        &self.inner.abs_xi
    }

    /// Largest |xi| on the lattice.
    pub fn xi_max(&self) -> f64 {
        let nyq = std::f64::consts::PI * self.n() as f64 / self.period();
        nyq * (self.dim() as f64).sqrt()
    }

    /// Flat index of the mode `-k`.
    pub fn mirror(&self, flat: usize) -> usize {
        self.inner.mirror[flat]
    }

    /// Largest |k| kept by the 2/3 truncation rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n() as i64 - 1) / 3
    }

    pub fn in_dealias_band(&self, flat: usize) -> bool {
        let cut = self.dealias_cutoff();
        let idx = self.unflatten(flat);
        (0..self.dim()).all(|a| self.int_wavenumber(idx[a]).abs() <= cut)
    }

    /// Torus length of the displacement represented by grid offset `flat`.
    pub fn torus_distance(&self, flat: usize) -> f64 {
        let idx = self.unflatten(flat);
        let h = self.spacing();
        let mut sq = 0.0;
        for a in 0..self.dim() {
            let d = self.int_wavenumber(idx[a]).unsigned_abs() as f64 * h;
            sq += d * d;
        }
        sq.sqrt()
    }

    /// Same torus with `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.dim(), self.n() * factor, self.period())
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        data
    }

    /// Inverse transform, keeping the real part. For conjugate-symmetric input
    /// the discarded imaginary part is round-off.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.inverse_in_place(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Normalized inverse transform in place (complex output).
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, false);
        let norm = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
    }

    /// Unnormalized n-dimensional transform in place.
    pub fn transform(&self, data: &mut [Complex64], forward: bool) {
        assert_eq!(
            data.len(),
            self.len(),
            "coefficient layout does not match grid"
        );
        let fft = if forward {
            &self.inner.forward
        } else {
            &self.inner.inverse
        };
        let n = self.n();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        if self.dim() == 1 {
            return;
        }
        let mut lines = vec![Complex64::default(); data.len()];
        for axis in 0..self.dim() - 1 {
            let stride = n.pow((self.dim() - 1 - axis) as u32);
            let block = n * stride;
            let mut w = 0;
            for b in (0..data.len()).step_by(block) {
                for o in 0..stride {
                    for j in 0..n {
                        lines[w] = data[b + o + j * stride];
                        w += 1;
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            let mut r = 0;
            for b in (0..data.len()).step_by(block) {
                for o in 0..stride {
                    for j in 0..n {
                        data[b + o + j * stride] = lines[r];
                        r += 1;
                    }
                }
            }
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.period() == other.period())
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Grid(dim={}, n={}, L={})",
            self.dim(),
            self.n(),
            self.period()
        )
    }
}

fn int_wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn unflatten(mut flat: usize, n: usize, dim: usize) -> [usize; MAX_DIM] {
    let mut idx = [0; MAX_DIM];
    for a in (0..dim).rev() {
        idx[a] = flat % n;
        flat /= n;
    }
    idx
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}
