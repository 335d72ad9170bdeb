//! Everything behind the `fpde` binary: scenario files and their artifacts,
//! the verification suite, benchmarks and snapshot inspection.

pub mod bench;
pub mod config;
pub mod inspect;
pub mod scenario;
pub mod verify;

use serde::Serialize;

use crate::error::Error;

pub use bench::{bench, to_csv as bench_csv, BenchRow, BenchSpec, Kernel};
pub use config::{Emit, ScenarioConfig, Solver};
pub use inspect::inspect;
pub use scenario::{
    output_dir, output_dir_under, run_scenario, run_scenario_in, RunStatus, RunSummary,
};
pub use verify::{verify, VerifyReport, SUITES};

/// Overrides the root that relative `run.output` paths resolve against.
pub const OUTPUT_ROOT_ENV: &str = "FPDE_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Process exit code for an error escaping a subcommand.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => EXIT_CONFIG,
        Error::Diverged { .. } | Error::NonFinite { .. } => EXIT_DIVERGENCE,
        Error::Ellipticity { .. } | Error::Hypothesis { .. } | Error::Invariant(_) => {
            EXIT_INVARIANT
        }
        _ => EXIT_OTHER,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// A named measurement held to a limit. NaN never passes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            limit,
            passed: value <= limit,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            limit,
            passed: value >= limit,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(
            f,
            "{} {}: {:.3e} {rel} {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.limit
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_both_relations() {
        assert!(!Check::le("x", f64::NAN, 1.0).passed);
        assert!(!Check::ge("x", f64::NAN, 1.0).passed);
        assert!(Check::ge("x", 1.0, 1.0).passed);
    }

    #[test]
    fn exit_codes_look_through_iteration_wrappers() {
        let e = Error::Iteration {
            iteration: 3,
            source: Box::new(Error::Diverged { step: 1, time: 0.1 }),
        };
        assert_eq!(exit_code(&e), EXIT_DIVERGENCE);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Invariant("x".into())), EXIT_INVARIANT);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_OTHER);
    }
}
