//! Wall-time benchmarks of the hot kernels.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{step_linear, LinearCoefficients, Scheme, StepperConfig};
use crate::quasilinear::{picard_step, sqg, QuasilinearProblem};
use crate::spectral::{Grid, MultiplierOp, ScalarField, TrigSeries, VectorField};
use crate::trajectory::Trajectory;

pub const MIN_REPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// One Riesz-divergence application to a gradient.
    Multiplier,
    /// One Heun step with variable `a` and `b`.
    StepLinear,
    /// One Picard iterate of SQG over 5 steps (2-D only).
    PicardStep,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Multiplier, Kernel::StepLinear, Kernel::PicardStep];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Multiplier => "multiplier",
            Kernel::StepLinear => "step-linear",
            Kernel::PicardStep => "picard-step",
        }
    }

    pub fn parse(s: &str) -> Result<Kernel> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub kernels: Vec<Kernel>,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub reps: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            kernels: Kernel::ALL.to_vec(),
            dim: 2,
            sizes: vec![32, 64, 128, 256],
            reps: MIN_REPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub kernel: &'static str,
    pub dim: usize,
    pub n: usize,
    pub reps: usize,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// `d log(median) / d log(n^dim log n)` against the previous size of the
    /// same kernel.
    pub slope: Option<f64>,
}

pub fn bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    if spec.reps < MIN_REPS {
        return Err(Error::Config(format!(
            "bench needs at least {MIN_REPS} repetitions"
        )));
    }
    let mut rows = Vec::new();
    for &kernel in &spec.kernels {
        if kernel == Kernel::PicardStep && spec.dim != 2 {
            log::warn!(
                "picard-step runs the 2-D sqg preset; skipped for dim {}",
                spec.dim
            );
            continue;
        }
        let mut prev: Option<(f64, f64)> = None;
        for &n in &spec.sizes {
            let grid = Grid::new(spec.dim, n, 2.0 * std::f64::consts::PI)
                .map_err(|e| Error::Config(e.to_string()))?;
            let mut run = prepare(kernel, &grid)?;
            run()?;
            let mut times = Vec::with_capacity(spec.reps);
            for _ in 0..spec.reps {
                let start = Instant::now();
                run()?;
                times.push(start.elapsed().as_secs_f64());
            }
            times.sort_by(f64::total_cmp);
            let median = times[times.len() / 2];
            let work = (grid.len() as f64) * (n as f64).ln();
            let slope = prev.map(|(w0, m0)| (median / m0).ln() / (work / w0).ln());
            prev = Some((work, median));
            rows.push(BenchRow {
                kernel: kernel.name(),
                dim: spec.dim,
                n,
                reps: spec.reps,
                median_s: median,
                min_s: times[0],
                max_s: times[times.len() - 1],
                slope,
            });
        }
    }
    Ok(rows)
}

type Run = Box<dyn FnMut() -> Result<()>>;

fn prepare(kernel: Kernel, grid: &Grid) -> Result<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = TrigSeries::random(grid.dim(), grid.period(), 4, &mut rng).sample(grid)?;
    Ok(match kernel {
        Kernel::Multiplier => {
            let op = MultiplierOp::riesz_divergence(grid, 1.0)?;
            let w = crate::spectral::gradient(&u);
            Box::new(move || op.apply(&w).map(drop))
        }
        Kernel::StepLinear => {
            let a = ScalarField::from_fn(grid, |x| 1.5 + 0.4 * x[0].sin())?;
            let b = VectorField::new(
                (0..grid.dim())
                    .map(|j| ScalarField::from_fn(grid, |x| 0.3 * x[j].cos()))
                    .collect::<Result<_>>()?,
            )?;
            let coeffs = LinearCoefficients::new(a, 1.0, 2.0).with_b(b);
            let cfg = StepperConfig::fixed(1e-3, 1.0, Scheme::Heun);
            Box::new(move || step_linear(&u, 0.0, 1e-3, &coeffs, &cfg).map(drop))
        }
        Kernel::PicardStep => {
            let problem: QuasilinearProblem = sqg(grid, 1.0)?;
            let stepper = StepperConfig::fixed(1e-2, 5e-2, Scheme::Heun);
            let phi: VectorField = u.into();
            let prev = Trajectory::stationary(phi.clone(), 0.0, stepper.t_end)?;
            Box::new(move || picard_step(&prev, &phi, &problem, &stepper, 2).map(drop))
        }
    })
}

/// `kernel,dim,n,reps,median_s,min_s,max_s,slope`; only the header for an
/// empty table.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("kernel,dim,n,reps,median_s,min_s,max_s,slope\n");
    for r in rows {
        let slope = r.slope.map(|v| format!("{v:.3}")).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{:e},{:e},{:e},{slope}",
            r.kernel, r.dim, r.n, r.reps, r.median_s, r.min_s, r.max_s
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sizes_give_an_empty_table() {
        let spec = BenchSpec {
            sizes: vec![],
            ..Default::default()
        };
        let rows = bench(&spec).unwrap();
        assert!(rows.is_empty());
        assert_eq!(to_csv(&rows).lines().count(), 1);
    }

    #[test]
    fn small_sizes_produce_rows_with_slopes() {
        let spec = BenchSpec {
            kernels: vec![Kernel::Multiplier, Kernel::StepLinear],
            dim: 1,
            sizes: vec![16, 32],
            reps: MIN_REPS,
        };
        let rows = bench(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].slope.is_none() && rows[1].slope.is_some());
        assert!(rows
            .iter()
            .all(|r| r.min_s <= r.median_s && r.median_s <= r.max_s));
        assert!(bench(&BenchSpec { reps: 2, ..spec }).is_err());
    }
}
