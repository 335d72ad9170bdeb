//! Scenario files: TOML with a fixed set of sections. Every table rejects
//! unknown keys, so a misspelt option is an error rather than a silent default.
//! The grammar is documented in `docs/config.md`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{Scheme, StepperConfig, TimeStep};
use crate::quasilinear::PicardConfig;
use crate::spectral::{Grid, ScalarField, TrigMode, TrigSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Linear,
    Quasilinear,
    FullyNonlinear,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Linear => "linear",
            Solver::Quasilinear => "quasilinear",
            Solver::FullyNonlinear => "fully-nonlinear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    Csv,
    Snapshots,
    Heatmaps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub grid: GridSection,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub outer: OuterSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub initial: InitialSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub solver: Solver,
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Relative paths resolve against `FPDE_OUTPUT_ROOT` when set.
    pub output: Option<PathBuf>,
    #[serde(default = "default_emit")]
    pub emit: Vec<Emit>,
}

fn default_emit() -> Vec<Emit> {
    vec![Emit::Csv, Emit::Snapshots]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    2.0 * PI
}

/// `dt = 0.01` or `dt = "auto"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtValue {
    Fixed(f64),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSection {
    pub dt: DtValue,
    pub cfl: f64,
    pub max_dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub snapshot_stride: usize,
}

impl Default for StepperSection {
    fn default() -> Self {
        let d = StepperConfig::default();
        StepperSection {
            dt: DtValue::Keyword("auto".into()),
            cfl: d.cfl,
            max_dt: d.max_dt,
            scheme: d.scheme,
            t_end: d.t_end,
            snapshot_stride: d.snapshot_stride,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSection {
    pub tol_sup: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        let d = PicardConfig::default();
        PicardSection {
            tol_sup: d.tol_sup,
            max_iters: d.max_iters,
            damping: d.damping,
        }
    }
}

/// Outer loop of the fully nonlinear solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterSection {
    pub tol: f64,
    pub max_iters: usize,
    pub consistency_tol: f64,
    pub check_partials: bool,
}

impl Default for OuterSection {
    fn default() -> Self {
        OuterSection {
            tol: 1e-8,
            max_iters: 50,
            consistency_tol: 1e-2,
            check_partials: true,
        }
    }
}

/// `constant + sum amplitude cos(2 pi k.x / L + phase)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub mode: Vec<TrigMode>,
}

impl SeriesSpec {
    pub fn series(&self, grid: &Grid, key: &str) -> Result<TrigSeries> {
        let mut s = TrigSeries::new(grid.dim(), grid.period()).with_constant(self.constant);
        for m in &self.mode {
            if m.k.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "{key}: mode wavevector {:?} has {} entries, grid is {}-D",
                    m.k,
                    m.k.len(),
                    grid.dim()
                )));
            }
            s = s.with_mode(&m.k, m.amplitude, m.phase);
        }
        Ok(s)
    }

    pub fn sample(&self, grid: &Grid, key: &str) -> Result<ScalarField> {
        self.series(grid, key)?.sample(grid)
    }
}

/// Parameters of the chosen preset. Keys that the preset does not read are
/// rejected by [`ScenarioConfig::validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kappa: Option<f64>,
    pub drift: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub rate: Option<f64>,
    pub q_scale: Option<f64>,
    pub q_tanh: Option<f64>,
    pub h_scale: Option<f64>,
    pub u_rate: Option<f64>,
    pub source: Option<f64>,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub a: Option<SeriesSpec>,
    pub b: Option<Vec<SeriesSpec>>,
    pub f: Option<SeriesSpec>,
}

impl ProblemSection {
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut add = |set: bool, k| {
            if set {
                keys.push(k)
            }
        };
        add(self.kappa.is_some(), "kappa");
        add(self.drift.is_some(), "drift");
        add(self.h.is_some(), "h");
        add(self.rate.is_some(), "rate");
        add(self.q_scale.is_some(), "q_scale");
        add(self.q_tanh.is_some(), "q_tanh");
        add(self.h_scale.is_some(), "h_scale");
        add(self.u_rate.is_some(), "u_rate");
        add(self.source.is_some(), "source");
        add(self.a0.is_some(), "a0");
        add(self.a1.is_some(), "a1");
        add(self.a.is_some(), "a");
        add(self.b.is_some(), "b");
        add(self.f.is_some(), "f");
        keys
    }
}

/// Initial datum: explicit modes, or a random band-limited field drawn from
/// `run.seed` when `random_kmax` is set. Without either, `cos x_1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub mode: Vec<TrigMode>,
    pub random_kmax: Option<i64>,
    /// Sup norm the random field is scaled to.
    pub random_amplitude: Option<f64>,
}

/// A preset and the problem keys it reads.
pub struct PresetInfo {
    pub solver: Solver,
    pub name: &'static str,
    pub dims: &'static [usize],
    pub keys: &'static [&'static str],
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        solver: Solver::Linear,
        name: "inline",
        dims: &[1, 2, 3],
        keys: &["a", "b", "f", "a0", "a1"],
    },
    PresetInfo {
        solver: Solver::Quasilinear,
        name: "sqg",
        dims: &[2],
        keys: &["kappa"],
    },
    PresetInfo {
        solver: Solver::Quasilinear,
        name: "frozen-burgers-1d",
        dims: &[1],
        keys: &["kappa"],
    },
    PresetInfo {
        solver: Solver::FullyNonlinear,
        name: "half-heat",
        dims: &[1, 2, 3],
        keys: &["drift"],
    },
    PresetInfo {
        solver: Solver::FullyNonlinear,
        name: "hj-critical",
        dims: &[1, 2, 3],
        keys: &["h"],
    },
    PresetInfo {
        solver: Solver::FullyNonlinear,
        name: "reaction",
        dims: &[1, 2, 3],
        keys: &["rate"],
    },
    PresetInfo {
        solver: Solver::FullyNonlinear,
        name: "remark-class",
        dims: &[1, 2, 3],
        keys: &["q_scale", "q_tanh", "h_scale", "u_rate", "source"],
    },
];

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Name of the preset, filling in the solver's default.
    pub fn preset_name(&self) -> &str {
        match (&self.run.preset, self.run.solver) {
            (Some(p), _) => p,
            (None, Solver::Linear) => "inline",
            (None, Solver::Quasilinear) => "sqg",
            (None, Solver::FullyNonlinear) => "half-heat",
        }
    }

    pub fn preset(&self) -> Result<&'static PresetInfo> {
        let name = self.preset_name();
        PRESETS
            .iter()
            .find(|p| p.solver == self.run.solver && p.name == name)
            .ok_or_else(|| {
                let known: Vec<&str> = PRESETS
                    .iter()
                    .filter(|p| p.solver == self.run.solver)
                    .map(|p| p.name)
                    .collect();
                Error::Config(format!(
                    "unknown {} preset `{name}` (known: {})",
                    self.run.solver.name(),
                    known.join(", ")
                ))
            })
    }

    /// Checks everything that can be checked without solving. Failures are
    /// [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let preset = self.preset()?;
        let grid = self.grid()?;
        if !preset.dims.contains(&grid.dim()) {
            return Err(Error::Config(format!(
                "preset `{}` runs in dimension {:?}, grid is {}-D",
                preset.name,
                preset.dims,
                grid.dim()
            )));
        }
        for key in self.problem.present() {
            if !preset.keys.contains(&key) {
                return Err(Error::Config(format!(
                    "problem.{key} does not apply to preset `{}` (accepted: {})",
                    preset.name,
                    preset.keys.join(", ")
                )));
            }
        }
        let emitted: BTreeSet<_> = self.run.emit.iter().collect();
        if emitted.len() != self.run.emit.len() {
            return Err(Error::Config("run.emit lists an entry twice".into()));
        }
        self.stepper()?;
        self.picard()?;
        let o = &self.outer;
        if !(o.tol.is_finite() && o.tol > 0.0) || o.max_iters == 0 {
            return Err(Error::Config(
                "outer.tol must be > 0 and outer.max_iters >= 1".into(),
            ));
        }
        if !(o.consistency_tol.is_finite() && o.consistency_tol > 0.0) {
            return Err(Error::Config("outer.consistency_tol must be > 0".into()));
        }
        self.validate_problem(&grid)?;
        self.initial(&grid)?;
        Ok(())
    }

    fn validate_problem(&self, grid: &Grid) -> Result<()> {
        let p = &self.problem;
        if let Some(k) = p.kappa {
            // kappa is the lower ellipticity constant a0 of these presets
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Config(format!(
                    "problem.kappa (= a0) must be > 0, got {k}"
                )));
            }
        }
        if let Some(d) = &p.drift {
            if d.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "problem.drift has {} entries, grid is {}-D",
                    d.len(),
                    grid.dim()
                )));
            }
        }
        if self.run.solver == Solver::FullyNonlinear && self.preset_name() == "remark-class" {
            let r = self.remark_params();
            if r.q_scale + r.q_tanh.min(0.0) <= 0.0 {
                return Err(Error::Config(format!(
                    "remark-class: a0 = q_scale + min(q_tanh, 0) must be > 0, got {}",
                    r.q_scale + r.q_tanh.min(0.0)
                )));
            }
        }
        if self.run.solver == Solver::Linear {
            self.linear_bounds(grid)?;
        }
        Ok(())
    }

    /// `(a, a0, a1)` for the inline linear problem, with `a` checked against
    /// the bounds on the grid.
    pub fn linear_bounds(&self, grid: &Grid) -> Result<(ScalarField, f64, f64)> {
        let p = &self.problem;
        let a = match &p.a {
            Some(s) => s.sample(grid, "problem.a")?,
            None => ScalarField::constant(grid, 1.0),
        };
        let a0 = p.a0.unwrap_or_else(|| a.min());
        let a1 = p.a1.unwrap_or_else(|| a.max());
        if !(a0.is_finite() && a0 > 0.0) {
            return Err(Error::Config(format!("a0 must be > 0, got {a0}")));
        }
        if !(a1.is_finite() && a1 >= a0) {
            return Err(Error::Config(format!(
                "a1 must be >= a0, got a0 = {a0}, a1 = {a1}"
            )));
        }
        if a.min() < a0 - 1e-12 || a.max() > a1 + 1e-12 {
            return Err(Error::Config(format!(
                "problem.a ranges over [{}, {}], outside [a0, a1] = [{a0}, {a1}]",
                a.min(),
                a.max()
            )));
        }
        if let Some(b) = &p.b {
            if b.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "problem.b has {} components, grid is {}-D",
                    b.len(),
                    grid.dim()
                )));
            }
        }
        Ok((a, a0, a1))
    }

    pub fn remark_params(&self) -> crate::nonlinear::RemarkParams {
        let d = crate::nonlinear::RemarkParams::default();
        let p = &self.problem;
        crate::nonlinear::RemarkParams {
            q_scale: p.q_scale.unwrap_or(d.q_scale),
            q_tanh: p.q_tanh.unwrap_or(d.q_tanh),
            h_scale: p.h_scale.unwrap_or(d.h_scale),
            u_rate: p.u_rate.unwrap_or(d.u_rate),
            source: p.source.unwrap_or(d.source),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.dim, g.n, g.period).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn stepper(&self) -> Result<StepperConfig> {
        let s = &self.stepper;
        let dt = match &s.dt {
            DtValue::Fixed(v) => TimeStep::Fixed(*v),
            DtValue::Keyword(k) if k == "auto" => TimeStep::Auto,
            DtValue::Keyword(k) => {
                return Err(Error::Config(format!(
                    "stepper.dt must be a number or \"auto\", got \"{k}\""
                )))
            }
        };
        let cfg = StepperConfig {
            dt,
            cfl: s.cfl,
            max_dt: s.max_dt,
            scheme: s.scheme,
            t_end: s.t_end,
            snapshot_stride: s.snapshot_stride,
            ..Default::default()
        };
        cfg.validate()
            .map_err(|e| Error::Config(format!("stepper: {}", e.root())))?;
        Ok(cfg)
    }

    pub fn picard(&self) -> Result<PicardConfig> {
        let p = PicardConfig {
            tol_sup: self.picard.tol_sup,
            max_iters: self.picard.max_iters,
            damping: self.picard.damping,
        };
        p.validate()
            .map_err(|e| Error::Config(format!("picard: {}", e.root())))?;
        Ok(p)
    }

    /// The initial datum on `grid`.
    pub fn initial(&self, grid: &Grid) -> Result<ScalarField> {
        let init = &self.initial;
        if let Some(kmax) = init.random_kmax {
            if !init.mode.is_empty() || init.constant != 0.0 {
                return Err(Error::Config(
                    "initial: random_kmax cannot be combined with explicit modes".into(),
                ));
            }
            if !(1..=grid.dealias_cutoff()).contains(&kmax) {
                return Err(Error::Config(format!(
                    "initial.random_kmax must be in [1, {}] for n = {}, got {kmax}",
                    grid.dealias_cutoff(),
                    grid.n()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
            let mut s = TrigSeries::random(grid.dim(), grid.period(), kmax, &mut rng);
            s.constant = 0.0;
            let f = s.sample(grid)?;
            let target = init.random_amplitude.unwrap_or(1.0);
            if !(target.is_finite() && target > 0.0) {
                return Err(Error::Config("initial.random_amplitude must be > 0".into()));
            }
            return Ok(f.scaled(target / f.sup_norm()));
        }
        if init.random_amplitude.is_some() {
            return Err(Error::Config(
                "initial.random_amplitude needs random_kmax".into(),
            ));
        }
        if init.mode.is_empty() && init.constant == 0.0 {
            let mut k = vec![0; grid.dim()];
            k[0] = 1;
            return TrigSeries::new(grid.dim(), grid.period())
                .with_mode(&k, 1.0, 0.0)
                .sample(grid);
        }
        SeriesSpec {
            constant: init.constant,
            mode: init.mode.clone(),
        }
        .sample(grid, "initial")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQG: &str = r#"
        [run]
        solver = "quasilinear"
        preset = "sqg"
        [grid]
        dim = 2
        n = 32
        [stepper]
        dt = 0.01
        t_end = 0.1
    "#;

    #[test]
    fn parses_minimal_sqg() {
        let c = ScenarioConfig::parse(SQG).unwrap();
        assert_eq!(c.preset_name(), "sqg");
        assert_eq!(c.run.emit, vec![Emit::Csv, Emit::Snapshots]);
        assert_eq!(c.stepper().unwrap().dt, TimeStep::Fixed(0.01));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = SQG.replace("t_end", "t_ned");
        assert!(matches!(
            ScenarioConfig::parse(&typo),
            Err(Error::Config(_))
        ));
        let extra = format!("{SQG}\n[extra]\nx = 1\n");
        assert!(matches!(
            ScenarioConfig::parse(&extra),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn keys_must_fit_the_preset() {
        let bad = format!("{SQG}\n[problem]\nrate = 1.0\n");
        let err = ScenarioConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("problem.rate"), "{err}");
    }

    #[test]
    fn nonpositive_a0_is_a_config_error() {
        let kappa = format!("{SQG}\n[problem]\nkappa = 0.0\n");
        assert!(matches!(
            ScenarioConfig::parse(&kappa),
            Err(Error::Config(_))
        ));
        let linear = r#"
            [run]
            solver = "linear"
            [grid]
            dim = 1
            n = 16
            [problem]
            a0 = -1.0
        "#;
        assert!(matches!(
            ScenarioConfig::parse(linear),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn random_initial_depends_only_on_seed() {
        let text = format!("{SQG}\n[initial]\nrandom_kmax = 3\nrandom_amplitude = 0.5\n");
        let c = ScenarioConfig::parse(&text).unwrap();
        let g = c.grid().unwrap();
        let a = c.initial(&g).unwrap();
        let b = c.initial(&g).unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.sup_norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dt_keyword() {
        let text = SQG.replace("dt = 0.01", "dt = \"sometimes\"");
        assert!(ScenarioConfig::parse(&text).is_err());
        let text = SQG.replace("dt = 0.01", "dt = \"auto\"");
        assert_eq!(
            ScenarioConfig::parse(&text).unwrap().stepper().unwrap().dt,
            TimeStep::Auto
        );
    }
}
