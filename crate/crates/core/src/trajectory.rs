//! Time-indexed sequences of fields with named diagnostic series.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::norms::{sobolev_norm, NormReport};
use crate::spectral::{Grid, ScalarField, VectorField};

/// Stored frames `u(t_0), u(t_1), ...` of an `m`-component state together
/// with diagnostic time series keyed by name.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Grid,
    components: usize,
    times: Vec<f64>,
    frames: Vec<VectorField>,
    reports: Vec<Vec<NormReport>>,
    series: BTreeMap<String, Vec<(f64, f64)>>,
    aggregates: BTreeMap<String, f64>,
}

impl Trajectory {
    pub fn new(grid: &Grid, components: usize) -> Self {
        Trajectory {
            grid: grid.clone(),
            components,
            times: Vec::new(),
            frames: Vec::new(),
            reports: Vec::new(),
            series: BTreeMap::new(),
            aggregates: BTreeMap::new(),
        }
    }

    /// Constant-in-time trajectory holding `frame` at `t0` and `t1`.
    pub fn stationary(frame: VectorField, t0: f64, t1: f64) -> Result<Self> {
        let mut tr = Trajectory::new(frame.grid(), frame.len());
        tr.push(t0, frame.clone())?;
        if t1 > t0 {
            tr.push(t1, frame)?;
        }
        Ok(tr)
    }

    pub fn push(&mut self, t: f64, frame: VectorField) -> Result<()> {
        self.push_with_reports(t, frame, Vec::new())
    }

    pub fn push_with_reports(
        &mut self,
        t: f64,
        frame: VectorField,
        reports: Vec<NormReport>,
    ) -> Result<()> {
        self.grid.check_same(frame.grid())?;
        if frame.len() != self.components {
            return Err(Error::arg(format!(
                "frame has {} components, trajectory holds {}",
                frame.len(),
                self.components
            )));
        }
        if !t.is_finite() || self.times.last().is_some_and(|&last| t <= last) {
            return Err(Error::arg(format!("frame time {t} is not increasing")));
        }
        self.times.push(t);
        self.frames.push(frame);
        self.reports.push(reports);
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[VectorField] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &VectorField {
        &self.frames[i]
    }

    /// Component `c` of every frame.
    pub fn scalar_frames(&self, c: usize) -> impl Iterator<Item = &ScalarField> {
        self.frames.iter().map(move |f| f.component(c))
    }

    pub fn initial(&self) -> Option<&VectorField> {
        self.frames.first()
    }

    pub fn terminal(&self) -> Option<&VectorField> {
        self.frames.last()
    }

    pub fn t_end(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn reports(&self, i: usize) -> &[NormReport] {
        &self.reports[i]
    }

    /// State at time `t` by linear interpolation between neighbouring frames.
    /// Times within `1e-12` of the stored horizon are clamped onto it.
    pub fn at(&self, t: f64) -> Result<VectorField> {
        let (Some(&first), Some(&last)) = (self.times.first(), self.times.last()) else {
            return Err(Error::arg("empty trajectory"));
        };
        let slack = 1e-12 * (1.0 + last.abs());
        if t < first - slack || t > last + slack {
            return Err(Error::arg(format!(
                "time {t} outside trajectory horizon [{first}, {last}]"
            )));
        }
        let hi = self.times.partition_point(|&s| s < t);
        if hi < self.times.len() && (self.times[hi] - t).abs() <= slack {
            return Ok(self.frames[hi].clone());
        }
        if hi == 0 {
            return Ok(self.frames[0].clone());
        }
        if hi == self.times.len() {
            return Ok(self.frames[hi - 1].clone());
        }
        if (self.times[hi - 1] - t).abs() <= slack {
            return Ok(self.frames[hi - 1].clone());
        }
        let (t0, t1) = (self.times[hi - 1], self.times[hi]);
        let s = (t - t0) / (t1 - t0);
        Ok(self.frames[hi - 1].blend(&self.frames[hi], s))
    }

    /// `max_k ||self(t_k) - other(t_k)||_inf` over this trajectory's times,
    /// with `other` interpolated.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (t, f) in self.times.iter().zip(&self.frames) {
            worst = worst.max(f.sup_distance(&other.at(*t)?));
        }
        Ok(worst)
    }

    /// Largest pointwise Euclidean norm over all frames.
    pub fn sup_norm(&self) -> f64 {
        self.frames
            .iter()
            .map(VectorField::sup_norm)
            .fold(0.0, f64::max)
    }

    /// Pointwise convex combination `(1 - gamma) other + gamma self` on this
    /// trajectory's times. Series are kept from `self`.
    pub fn damped_towards(&self, other: &Trajectory, gamma: f64) -> Result<Trajectory> {
        let mut out = self.clone();
        for (t, f) in out.times.iter().zip(out.frames.iter_mut()) {
            *f = other.at(*t)?.blend(f, gamma);
        }
        Ok(out)
    }

    pub fn record(&mut self, name: &str, t: f64, value: f64) {
        self.series
            .entry(name.to_string())
            .or_default()
            .push((t, value));
    }

    pub fn extend_series(&mut self, name: &str, points: impl IntoIterator<Item = (f64, f64)>) {
        self.series
            .entry(name.to_string())
            .or_default()
            .extend(points);
    }

    pub fn series(&self, name: &str) -> Option<&[(f64, f64)]> {
        self.series.get(name).map(Vec::as_slice)
    }

    pub fn series_names(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn set_aggregate(&mut self, name: &str, value: f64) {
        self.aggregates.insert(name.to_string(), value);
    }

    pub fn aggregates(&self) -> &BTreeMap<String, f64> {
        &self.aggregates
    }

    /// `(int_0^T sum_c ||u_c(s)||_{k,p}^p ds)^(1/p)` by the trapezoid rule over
    /// stored frames.
    pub fn y_norm(&self, k: u32, p: f64) -> Result<f64> {
        let vals = self
            .frames
            .iter()
            .map(|f| frame_norm(f, k as f64, p).map(|v| v.powf(p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(trapezoid(&self.times, &vals).powf(1.0 / p))
    }

    /// `sup_t ||u||_{k-1,p} + ||u||_{Y^{k,p}} + ||d_t u||_{Y^{k-1,p}}`, the time
    /// derivative taken by differencing consecutive frames.
    pub fn x_norm(&self, k: u32, p: f64) -> Result<f64> {
        if k == 0 {
            return Err(Error::arg("X^{k,p} needs k >= 1"));
        }
        let lower = (k - 1) as f64;
        let mut sup: f64 = 0.0;
        for f in &self.frames {
            sup = sup.max(frame_norm(f, lower, p)?);
        }
        let mut dt_vals = Vec::with_capacity(self.frames.len().saturating_sub(1));
        for i in 1..self.frames.len() {
            let dt = self.times[i] - self.times[i - 1];
            let diff = VectorField::new(
                self.frames[i]
                    .components()
                    .iter()
                    .zip(self.frames[i - 1].components())
                    .map(|(a, b)| (a - b).scaled(1.0 / dt))
                    .collect(),
            )?;
            dt_vals.push(frame_norm(&diff, lower, p)?.powf(p) * dt);
        }
        let dtu = dt_vals.iter().sum::<f64>().powf(1.0 / p);
        Ok(sup + self.y_norm(k, p)? + dtu)
    }
}

fn frame_norm(f: &VectorField, beta: f64, p: f64) -> Result<f64> {
    f.components()
        .iter()
        .map(|c| sobolev_norm(c, beta, p))
        .sum()
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
