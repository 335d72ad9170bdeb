use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::norms::{NormReport, NormSpec};
use crate::snapshot;

/// Header and norms of a snapshot file as `key: value` lines.
pub fn inspect(path: &Path) -> Result<String> {
    let f = snapshot::load(path)?;
    let g = f.grid();
    let mut out = String::new();
    writeln!(out, "file: {}", path.display()).unwrap();
    writeln!(out, "format: FPDE v{}", snapshot::VERSION).unwrap();
    writeln!(out, "dim: {}", g.dim()).unwrap();
    writeln!(out, "n: {}", g.n()).unwrap();
    writeln!(out, "period: {}", g.period()).unwrap();
    writeln!(out, "min: {:e}", f.min()).unwrap();
    writeln!(out, "max: {:e}", f.max()).unwrap();
    writeln!(out, "mean: {:e}", f.mean()).unwrap();
    // the exhaustive Hölder search is quadratic in the point count
    let spec = if g.len() <= 1 << 14 {
        NormSpec::default()
    } else {
        NormSpec {
            holder: vec![],
            ..NormSpec::default()
        }
    };
    for (name, v) in NormReport::compute(&f, &spec)?.entries() {
        writeln!(out, "{name}: {v:e}").unwrap();
    }
    Ok(out)
}
