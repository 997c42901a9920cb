//! Discrete geometry and spectral calculus on the flat torus `[0,1)^2`
//! with unit total area.
//!
//! Fields are sampled on a uniform periodic `n x n` grid; derivatives and the
//! Green's function are computed through the discrete Fourier transform, so
//! they are exact on grid-resolvable trigonometric modes.

mod fft;

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Result, TodaError};

pub(crate) use fft::{apply_derivative, apply_symbol, forward, inverse};

/// Uniform periodic grid over the unit-area torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    /// `n` grid points per axis; must be a power of two, at least 8.
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(TodaError::Validation(format!(
                "grid size must be a power of two >= 8, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `1/n`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Area of one grid cell; the cells partition the torus with total measure 1.
    pub fn cell_area(&self) -> f64 {
        1.0 / (self.n * self.n) as f64
    }

    /// Coordinates of the node with indices `(i, j)`.
    pub fn node_point(&self, i: usize, j: usize) -> TorusPoint {
        TorusPoint::new(i as f64 / self.n as f64, j as f64 / self.n as f64)
    }

    /// Indices of the node nearest to `p`.
    pub fn nearest_node(&self, p: TorusPoint) -> (usize, usize) {
        let n = self.n;
        let i = (p.x * n as f64).round() as usize % n;
        let j = (p.y * n as f64).round() as usize % n;
        (i, j)
    }

    /// Snap `p` onto its nearest grid node.
    pub fn snap(&self, p: TorusPoint) -> TorusPoint {
        let (i, j) = self.nearest_node(p);
        self.node_point(i, j)
    }
}

/// Point on the torus; coordinates are reduced mod 1 at construction.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap_unit(x),
            y: wrap_unit(y),
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

/// Geodesic distance on the flat torus: per-axis wrapped difference, then
/// the Euclidean norm.
pub fn flat_distance(p: TorusPoint, q: TorusPoint) -> f64 {
    let dx = (p.x - q.x).abs();
    let dx = dx.min(1.0 - dx);
    let dy = (p.y - q.y).abs();
    let dy = dy.min(1.0 - dy);
    dx.hypot(dy)
}

/// Real-valued function sampled on a [`TorusGrid`].
///
/// Storage is row-major in the first index: the sample at node `(i, j)`,
/// i.e. at the point `(i/n, j/n)`, lives at `values[i*n + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl TorusField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n * grid.n],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n * grid.n],
        }
    }

    /// Sample a closure at every grid node.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(TorusPoint) -> f64) -> Self {
        let n = grid.n;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.node_point(i, j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n * grid.n {
            return Err(TodaError::Validation(format!(
                "field needs {} samples for n = {}, got {}",
                grid.n * grid.n,
                grid.n,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.grid.n + j] = v;
    }

    /// Value at the node nearest to `p`.
    pub fn at(&self, p: TorusPoint) -> f64 {
        let (i, j) = self.grid.nearest_node(p);
        self.get(i, j)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Uniform-cell quadrature of `f` over the torus. Since the surface has
    /// unit area this is the plain mean of the samples, computed in a fixed
    /// sequential order.
    pub fn integrate(&self) -> f64 {
        let sum: f64 = self.values.iter().sum();
        sum / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Subtract the mean so the field integrates to zero.
    pub fn project_zero_mean(&self) -> TorusField {
        let mean = self.integrate();
        self.map(|v| v - mean)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TorusField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &TorusField, f: impl Fn(f64, f64) -> f64) -> TorusField {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> TorusField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &TorusField) -> TorusField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TorusField) -> TorusField {
        self.zip_map(other, |a, b| a - b)
    }

    /// Add `c * other` in place.
    pub fn axpy(&mut self, c: f64, other: &TorusField) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Spectral Laplacian; exact on grid-resolvable trig modes, constants map to zero.
    pub fn laplacian(&self) -> TorusField {
        let n = self.grid.n;
        let mut coeffs = forward(&self.values, n);
        apply_symbol(&mut coeffs, n, |f1, f2| -4.0 * PI * PI * (f1 * f1 + f2 * f2));
        TorusField {
            grid: self.grid,
            values: inverse(coeffs, n),
        }
    }

    /// Spectral partial derivatives `(df/dx, df/dy)`.
    pub fn gradient(&self) -> (TorusField, TorusField) {
        let n = self.grid.n;
        let coeffs = forward(&self.values, n);
        let mut cx = coeffs.clone();
        apply_derivative(&mut cx, n, 0);
        let mut cy = coeffs;
        apply_derivative(&mut cy, n, 1);
        (
            TorusField {
                grid: self.grid,
                values: inverse(cx, n),
            },
            TorusField {
                grid: self.grid,
                values: inverse(cy, n),
            },
        )
    }

    /// Pointwise `grad f . grad g` from spectral derivatives.
    pub fn gradient_dot(&self, other: &TorusField) -> TorusField {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let (fx, fy) = self.gradient();
        let (gx, gy) = other.gradient();
        let mut out = fx.zip_map(&gx, |a, b| a * b);
        let cross = fy.zip_map(&gy, |a, b| a * b);
        out.axpy(1.0, &cross);
        out
    }

    /// Serialize as CSV: a `n=<n>` header line, then the samples row-major
    /// (one line per first index). Values use the shortest round-trip form.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.grid.n;
        writeln!(w, "n={n}")?;
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{}", self.get(i, j))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: &mut R) -> Result<TorusField> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim();
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                TodaError::Validation(format!("expected header line 'n=<n>', got {header:?}"))
            })?;
        let grid = TorusGrid::new(n)?;
        let mut values = Vec::with_capacity(n * n);
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.trim().split(',') {
                let v: f64 = tok.trim().parse().map_err(|_| {
                    TodaError::Validation(format!("bad CSV number {tok:?} in field file"))
                })?;
                values.push(v);
            }
        }
        TorusField::from_values(grid, values)
    }
}

/// Discrete Green's function of `-Laplace` at `p` (snapped to the nearest
/// node): solves `-G'' = delta_p - 1` spectrally with the mean mode zeroed,
/// so `integrate(G) = 0`. The delta is a single-node impulse of total mass 1.
pub fn green_function(grid: TorusGrid, p: TorusPoint) -> TorusField {
    let n = grid.n;
    let (pi_idx, pj_idx) = grid.nearest_node(p);
    let mut rhs = vec![-1.0; n * n];
    rhs[pi_idx * n + pj_idx] += (n * n) as f64;
    let mut coeffs = forward(&rhs, n);
    apply_symbol(&mut coeffs, n, |f1, f2| {
        let k2 = f1 * f1 + f2 * f2;
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / (4.0 * PI * PI * k2)
        }
    });
    // the (0,0) coefficient was already zero since the rhs integrates to zero,
    // but the symbol pins it exactly
    TorusField {
        grid,
        values: inverse(coeffs, n),
    }
}

/// Weight `h * exp(-sum_m 4 pi alpha_m G_{p_m})`, which vanishes like
/// `d(., p_m)^(2 alpha_m)` around each singular point. Requires `alpha >= 0`.
pub fn singular_weight(h: &TorusField, singularities: &[(TorusPoint, f64)]) -> Result<TorusField> {
    for (p, alpha) in singularities {
        if *alpha < 0.0 {
            return Err(TodaError::Validation(format!(
                "singular weight exponent must be >= 0, got alpha = {alpha} at ({}, {})",
                p.x(),
                p.y()
            )));
        }
    }
    let mut exponent = TorusField::zeros(h.grid());
    for (p, alpha) in singularities {
        let g = green_function(h.grid(), *p);
        exponent.axpy(-4.0 * PI * alpha, &g);
    }
    Ok(h.zip_map(&exponent, |hv, ev| hv * ev.exp()))
}

/// Sum of a spectrum against another field's spectrum is not needed publicly;
/// solver code uses this helper to apply `(-Laplace + shift)^{-1}`.
pub(crate) fn helmholtz_inverse(f: &TorusField, shift: f64) -> TorusField {
    let n = f.grid.n;
    let mut coeffs = forward(&f.values, n);
    apply_symbol(&mut coeffs, n, |f1, f2| {
        1.0 / (4.0 * PI * PI * (f1 * f1 + f2 * f2) + shift)
    });
    TorusField {
        grid: f.grid,
        values: inverse(coeffs, n),
    }
}
