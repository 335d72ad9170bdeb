//! Nonlocal operators realized as Fourier multipliers, plus the local
//! differential operators (gradient, divergence, `div grad - grad div`) in the
//! same spectral form.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::field::{ScalarField, VectorField};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Relative tolerance for the conjugate-symmetry check on user symbols.
const SYMMETRY_TOL: f64 = 1e-10;

/// A matrix-valued Fourier symbol mapping `cols` input fields to `rows`
/// output fields. The symbol is stored conjugate-symmetric so real fields map
/// to real fields.
#[derive(Clone)]
pub struct MultiplierOp {
    name: String,
    grid: Grid,
    rows: usize,
    cols: usize,
    zero_mode: Vec<Complex64>,
    symbols: Arc<Vec<Vec<Complex64>>>,
}

impl MultiplierOp {
    /// Tabulates `symbol(xi, row, col)` over the lattice. At `xi = 0` the value
    /// `zero_mode[row * cols + col]` is used instead when given. Fails if the
    /// symbol is not finite somewhere or does not satisfy
    /// `symbol(-xi) = conj(symbol(xi))` away from Nyquist modes.
    pub fn from_symbol(
        grid: &Grid,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        zero_mode: Option<&[Complex64]>,
        symbol: impl Fn(&[f64], usize, usize) -> Complex64,
    ) -> Result<Self> {
        let name = name.into();
        if rows == 0 || cols == 0 {
            return Err(Error::arg(format!(
                "operator `{name}` must have a nonzero shape"
            )));
        }
        if let Some(z) = zero_mode {
            if z.len() != rows * cols {
                return Err(Error::arg(format!(
                    "operator `{name}`: zero-mode rule has {} entries, expected {}",
                    z.len(),
                    rows * cols
                )));
            }
        }
        let dim = grid.dim();
        let mut symbols = vec![vec![Complex64::default(); grid.len()]; rows * cols];
        for flat in 0..grid.len() {
            let xi = grid.xi(flat);
            for r in 0..rows {
                for c in 0..cols {
                    let v = match (flat, zero_mode) {
                        (0, Some(z)) => z[r * cols + c],
                        _ => symbol(&xi[..dim], r, c),
                    };
                    if !(v.re.is_finite() && v.im.is_finite()) {
                        return Err(Error::SymbolUndefined {
                            op: name.clone(),
                            index: flat,
                        });
                    }
                    symbols[r * cols + c][flat] = v;
                }
            }
        }
        for (entry, s) in symbols.iter_mut().enumerate() {
            for flat in 0..grid.len() {
                let m = grid.mirror(flat);
                if m == flat {
                    s[flat] = Complex64::new(s[flat].re, 0.0);
                } else if m > flat {
                    let (a, b) = (s[flat], s[m]);
                    let scale = a.norm().max(b.norm()).max(1.0);
                    if (a - b.conj()).norm() > SYMMETRY_TOL * scale && !is_nyquist_line(grid, flat)
                    {
                        return Err(Error::arg(format!(
                            "operator `{name}` (entry {entry}) is not conjugate-symmetric at index {flat}"
                        )));
                    }
                    let avg = (a + b.conj()) * 0.5;
                    s[flat] = avg;
                    s[m] = avg.conj();
                }
            }
        }
        let zero_mode = (0..rows * cols).map(|e| symbols[e][0]).collect();
        Ok(MultiplierOp {
            name,
            grid: grid.clone(),
            rows,
            cols,
            zero_mode,
            symbols: Arc::new(symbols),
        })
    }

    /// Scalar-to-scalar operator from a symbol of `xi`.
    pub fn scalar(
        grid: &Grid,
        name: impl Into<String>,
        zero_mode: Option<Complex64>,
        symbol: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self> {
        let z = zero_mode.map(|z| [z]);
        Self::from_symbol(grid, name, 1, 1, z.as_ref().map(|z| &z[..]), |xi, _, _| {
            symbol(xi)
        })
    }

    /// `(-Delta)^{alpha/2}`, symbol `|xi|^alpha`, for `alpha` in `(0, 2)`.
    pub fn fractional_laplacian(grid: &Grid, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::arg(format!(
                "fractional order {alpha} outside (0, 2)"
            )));
        }
        Self::scalar(
            grid,
            format!("(-Delta)^({alpha}/2)"),
            Some(Complex64::default()),
            |xi| Complex64::new(norm(xi).powf(alpha), 0.0),
        )
    }

    /// Riesz transform `R_j = (-Delta)^{-1/2} d_j`, symbol `i xi_j / |xi|`.
    pub fn riesz(grid: &Grid, j: usize) -> Result<Self> {
        check_axis(grid, j)?;
        Self::scalar(grid, format!("R_{j}"), Some(Complex64::default()), |xi| {
            Complex64::new(0.0, derivative_factor(grid, xi, j) / norm(xi))
        })
    }

    /// `R^alpha = (-Delta)^{(alpha-2)/2} div`, mapping a `dim`-vector field to
    /// a scalar. `alpha = 1` gives the operator that turns `grad u` into
    /// `-(-Delta)^{1/2} u`.
    pub fn riesz_divergence(grid: &Grid, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::arg(format!("order {alpha} outside (0, 2)")));
        }
        let zero = vec![Complex64::default(); grid.dim()];
        Self::from_symbol(
            grid,
            format!("R^{alpha}"),
            1,
            grid.dim(),
            Some(&zero),
            |xi, _, c| {
                Complex64::new(
                    0.0,
                    derivative_factor(grid, xi, c) * norm(xi).powf(alpha - 2.0),
                )
            },
        )
    }

    /// SQG velocity `grad^perp (-Delta)^{-1/2}` with `grad^perp = (-d_2, d_1)`;
    /// two-dimensional grids only.
    pub fn sqg_velocity(grid: &Grid) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::arg("SQG velocity operator needs a 2-D grid"));
        }
        let zero = [Complex64::default(); 2];
        Self::from_symbol(
            grid,
            "grad_perp (-Delta)^(-1/2)",
            2,
            1,
            Some(&zero),
            |xi, r, _| {
                let n = norm(xi);
                match r {
                    0 => Complex64::new(0.0, -derivative_factor(grid, xi, 1) / n),
                    _ => Complex64::new(0.0, derivative_factor(grid, xi, 0) / n),
                }
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `(rows, cols)`: number of output and input fields.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn symbol(&self, row: usize, col: usize) -> &[Complex64] {
        &self.symbols[row * self.cols + col]
    }

    pub fn zero_mode_rule(&self, row: usize, col: usize) -> Complex64 {
        self.zero_mode[row * self.cols + col]
    }

    /// Applies the operator to `cols` input fields, producing `rows` fields.
    pub fn apply_fields(&self, inputs: &[ScalarField]) -> Result<Vec<ScalarField>> {
        if inputs.len() != self.cols {
            return Err(Error::arg(format!(
                "operator `{}` takes {} input fields, got {}",
                self.name,
                self.cols,
                inputs.len()
            )));
        }
        for f in inputs {
            self.grid.check_same(f.grid())?;
        }
        let len = self.grid.len();
        (0..self.rows)
            .map(|r| {
                let mut acc = vec![Complex64::default(); len];
                for (c, f) in inputs.iter().enumerate() {
                    let sym = self.symbol(r, c);
                    for ((a, &s), &x) in acc.iter_mut().zip(sym).zip(f.spectral()) {
                        *a += s * x;
                    }
                }
                Ok(ScalarField::from_parts(
                    self.grid.clone(),
                    self.grid.inverse(&acc),
                ))
            })
            .collect()
    }

    pub fn apply(&self, input: &VectorField) -> Result<VectorField> {
        VectorField::new(self.apply_fields(input.components())?)
    }

    /// Scalar-to-scalar application.
    pub fn apply_scalar(&self, f: &ScalarField) -> Result<ScalarField> {
        if self.shape() != (1, 1) {
            return Err(Error::arg(format!(
                "operator `{}` is not scalar-to-scalar",
                self.name
            )));
        }
        Ok(self.apply_fields(std::slice::from_ref(f))?.remove(0))
    }
}

impl fmt::Debug for MultiplierOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MultiplierOp({}, {}x{}, {:?})",
            self.name, self.rows, self.cols, self.grid
        )
    }
}

/// Free-function form of [`MultiplierOp::apply`].
pub fn apply_multiplier(op: &MultiplierOp, f: &VectorField) -> Result<VectorField> {
    op.apply(f)
}

fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_axis(grid: &Grid, j: usize) -> Result<()> {
    if j >= grid.dim() {
        return Err(Error::arg(format!("axis {j} out of range for {grid:?}")));
    }
    Ok(())
}

/// `xi_j`, or zero on the Nyquist line of axis `j` where `i xi_j` has no
/// real-preserving value.
fn derivative_factor(grid: &Grid, xi: &[f64], j: usize) -> f64 {
    let nyq = std::f64::consts::PI * grid.n() as f64 / grid.period();
    if (xi[j] + nyq).abs() < 1e-9 * nyq {
        0.0
    } else {
        xi[j]
    }
}

fn is_nyquist_line(grid: &Grid, flat: usize) -> bool {
    let idx = grid.unflatten(flat);
    (0..grid.dim()).any(|a| idx[a] == grid.n() / 2)
}

/// Spectral symbol of `d_j` at a flat index (zero on the Nyquist line).
pub(crate) fn derivative_symbol(grid: &Grid, flat: usize, j: usize) -> Complex64 {
    let idx = grid.unflatten(flat);
    if idx[j] == grid.n() / 2 {
        Complex64::default()
    } else {
        Complex64::new(0.0, grid.wavenumber(idx[j]))
    }
}

/// Applies a real radial symbol `m(|xi|)` to `f`.
pub(crate) fn apply_radial(f: &ScalarField, m: impl Fn(f64) -> f64) -> ScalarField {
    let grid = f.grid();
    let c: Vec<Complex64> = f
        .spectral()
        .iter()
        .zip(grid.abs_xi())
        .map(|(&x, &k)| x * m(k))
        .collect();
    ScalarField::from_parts(grid.clone(), grid.inverse(&c))
}

/// `(-Delta)^{1/2} f`.
pub fn half_laplacian(f: &ScalarField) -> ScalarField {
    apply_radial(f, |k| k)
}

/// Spectral gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let comps = (0..grid.dim())
        .map(|j| {
            let c: Vec<Complex64> = f
                .spectral()
                .iter()
                .enumerate()
                .map(|(flat, &x)| derivative_symbol(grid, flat, j) * x)
                .collect();
            ScalarField::from_parts(grid.clone(), grid.inverse(&c))
        })
        .collect();
    VectorField::new(comps).expect("components share a grid")
}

/// Spectral divergence of a `dim`-component field.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let grid = v.grid();
    if v.len() != grid.dim() {
        return Err(Error::arg(format!(
            "divergence needs {} components, got {}",
            grid.dim(),
            v.len()
        )));
    }
    let mut acc = vec![Complex64::default(); grid.len()];
    for (j, comp) in v.components().iter().enumerate() {
        for (flat, (a, &x)) in acc.iter_mut().zip(comp.spectral()).enumerate() {
            *a += derivative_symbol(grid, flat, j) * x;
        }
    }
    Ok(ScalarField::from_parts(grid.clone(), grid.inverse(&acc)))
}

/// `div grad v - grad div v`, evaluated per mode as
/// `sum_j d_j (d_j v_i - d_i v_j)`, so the result is exactly zero in 1-D.
pub fn box_op(v: &VectorField) -> Result<VectorField> {
    let grid = v.grid();
    let d = grid.dim();
    if v.len() != d {
        return Err(Error::arg(format!(
            "box operator needs {d} components, got {}",
            v.len()
        )));
    }
    let spectra: Vec<&[Complex64]> = v.components().iter().map(|c| c.spectral()).collect();
    let comps = (0..d)
        .map(|i| {
            let c: Vec<Complex64> = (0..grid.len())
                .map(|flat| {
                    let di = derivative_symbol(grid, flat, i);
                    let mut s = Complex64::default();
                    for j in 0..d {
                        let dj = derivative_symbol(grid, flat, j);
                        s += dj * (dj * spectra[i][flat] - di * spectra[j][flat]);
                    }
                    s
                })
                .collect();
            ScalarField::from_parts(grid.clone(), grid.inverse(&c))
        })
        .collect();
    VectorField::new(comps)
}

/// Antisymmetric part of the Jacobian, `max_{i<j} ||d_i v_j - d_j v_i||_inf`.
pub fn curl_sup(v: &VectorField) -> f64 {
    let grids: Vec<VectorField> = v.components().iter().map(gradient).collect();
    let mut worst: f64 = 0.0;
    for i in 0..v.len() {
        for j in (i + 1)..v.len().min(v.grid().dim()) {
            let a = grids[j].component(i);
            let b = grids[i].component(j);
            worst = worst.max((a - b).sup_norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_laplacian_of_cosine() {
        let g = Grid::new(1, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].cos()).unwrap();
        let op = MultiplierOp::fractional_laplacian(&g, 1.0).unwrap();
        let out = op.apply_scalar(&f).unwrap();
        assert!((&out - &f).sup_norm() < 1e-13);
    }

    #[test]
    fn riesz_annihilates_constants() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let c = ScalarField::constant(&g, 3.5);
        for j in 0..2 {
            let r = MultiplierOp::riesz(&g, j).unwrap();
            assert_eq!(r.zero_mode_rule(0, 0), Complex64::default());
            assert!(r.apply_scalar(&c).unwrap().sup_norm() < 1e-14);
        }
    }

    #[test]
    fn undefined_symbol_fails_at_construction() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let err =
            MultiplierOp::scalar(&g, "inv", None, |xi| Complex64::new(1.0 / xi[0].abs(), 0.0));
        assert!(matches!(err, Err(Error::SymbolUndefined { index: 0, .. })));
        // fixed by declaring the zero mode
        assert!(
            MultiplierOp::scalar(&g, "inv", Some(Complex64::default()), |xi| {
                Complex64::new(1.0 / xi[0].abs(), 0.0)
            })
            .is_ok()
        );
    }

    #[test]
    fn non_hermitian_symbol_rejected() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let err = MultiplierOp::scalar(&g, "bad", None, |xi| Complex64::new(xi[0], 0.0));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fractional_order_range_enforced() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        assert!(MultiplierOp::fractional_laplacian(&g, 0.0).is_err());
        assert!(MultiplierOp::fractional_laplacian(&g, 2.0).is_err());
        assert!(MultiplierOp::riesz(&g, 1).is_err());
        assert!(MultiplierOp::sqg_velocity(&g).is_err());
    }

    #[test]
    fn box_vanishes_in_one_dimension() {
        let g = Grid::new(1, 32, 2.0 * PI).unwrap();
        let v = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() + x[0].cos()).unwrap();
        let b = box_op(&v.into()).unwrap();
        assert_eq!(b.component(0).sup_norm(), 0.0);
    }
}
