//! Coefficient matrices with their symmetrizations, the quadratic forms, the
//! energy functionals and the Euler-Lagrange residuals of the associated
//! exponential-nonlinearity systems.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Result, TodaError};
use crate::torus::{TorusField, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum CartanPreset {
    A2,
    B2,
    G2,
    Custom,
}

/// Coefficient matrix `A` together with its inverse, and the factorization
/// `A = S D` into a symmetric positive definite `S` and a positive diagonal
/// `D`. For symmetric `A` the factorization is trivial (`D = I`).
#[derive(Clone, Debug)]
pub struct CartanSpec {
    n: usize,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    s: DMatrix<f64>,
    s_inv: DMatrix<f64>,
    d: Vec<f64>,
    preset: CartanPreset,
}

impl CartanSpec {
    /// The `2 x 2` Cartan presets.
    pub fn preset(tag: CartanPreset) -> Self {
        let (a, d) = match tag {
            CartanPreset::A2 => (vec![vec![2.0, -1.0], vec![-1.0, 2.0]], vec![1.0, 1.0]),
            CartanPreset::B2 => (vec![vec![2.0, -1.0], vec![-2.0, 2.0]], vec![1.0, 0.5]),
            CartanPreset::G2 => (
                vec![vec![2.0, -1.0], vec![-3.0, 2.0]],
                vec![1.0, 1.0 / 3.0],
            ),
            CartanPreset::Custom => panic!("custom spec requires an explicit matrix"),
        };
        let mut spec = Self::build(a, Some(d)).expect("preset matrices are valid");
        spec.preset = tag;
        spec
    }

    pub fn a2() -> Self {
        Self::preset(CartanPreset::A2)
    }

    pub fn b2() -> Self {
        Self::preset(CartanPreset::B2)
    }

    pub fn g2() -> Self {
        Self::preset(CartanPreset::G2)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "A2" | "a2" => Ok(Self::a2()),
            "B2" | "b2" => Ok(Self::b2()),
            "G2" | "g2" => Ok(Self::g2()),
            other => Err(TodaError::Validation(format!(
                "unknown matrix preset {other:?} (expected A2, B2 or G2)"
            ))),
        }
    }

    /// Build a spec from row-major matrix entries, computing the
    /// symmetrization. Fails if no positive diagonal `D` with `A D^{-1}`
    /// symmetric positive definite exists, or if an off-diagonal entry is
    /// positive (the systems treated here are competitive).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(rows, None)
    }

    fn build(rows: Vec<Vec<f64>>, preset_d: Option<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(TodaError::Validation("coefficient matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(TodaError::Validation(format!(
                    "coefficient matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(TodaError::Validation(
                "coefficient matrix has non-finite entries".into(),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] > 0.0 {
                    return Err(TodaError::Validation(format!(
                        "off-diagonal entry a[{i}][{j}] = {} must be <= 0",
                        a[(i, j)]
                    )));
                }
            }
        }

        let d = match preset_d {
            Some(d) => d,
            None => symmetrizing_diagonal(&a)?,
        };
        let mut s = a.clone();
        for j in 0..n {
            for i in 0..n {
                s[(i, j)] /= d[j];
            }
        }
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-9 * scale.max(1.0) {
                    return Err(TodaError::Validation(format!(
                        "matrix is not symmetrizable: s[{i}][{j}] = {} vs s[{j}][{i}] = {}",
                        s[(i, j)],
                        s[(j, i)]
                    )));
                }
                // enforce exact symmetry for downstream linear algebra
                let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = avg;
                s[(j, i)] = avg;
            }
        }

        let eig = s.clone().symmetric_eigenvalues();
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_eig = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min_eig <= 1e-10 * max_eig.max(1.0) {
            return Err(TodaError::Validation(format!(
                "symmetrized matrix is not positive definite (min eigenvalue {min_eig:.3e})"
            )));
        }

        let a_inv = a.clone().try_inverse().ok_or_else(|| {
            TodaError::Validation("coefficient matrix is singular".into())
        })?;
        let s_inv = s
            .clone()
            .try_inverse()
            .expect("positive definite matrices are invertible");

        let id_err = (&a * &a_inv - DMatrix::<f64>::identity(n, n))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if id_err > 1e-12 {
            return Err(TodaError::Numeric(format!(
                "matrix inverse check failed: |A A^-1 - I| = {id_err:.3e}"
            )));
        }

        Ok(Self {
            n,
            a,
            a_inv,
            s,
            s_inv,
            d,
            preset: CartanPreset::Custom,
        })
    }

    pub fn n_components(&self) -> usize {
        self.n
    }

    pub fn preset_tag(&self) -> CartanPreset {
        self.preset
    }

    /// Entry of the original coefficient matrix.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    /// Entry of `A^{-1}`.
    pub fn a_inv(&self, i: usize, j: usize) -> f64 {
        self.a_inv[(i, j)]
    }

    /// Entry of the symmetric factor `S`.
    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    /// Entry of `S^{-1}`; these are the coefficients of the quadratic form.
    pub fn s_inv(&self, i: usize, j: usize) -> f64 {
        self.s_inv[(i, j)]
    }

    pub fn s_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Diagonal factor with `S D = A`; these weights multiply the `rho_i` in
    /// the energy.
    pub fn d(&self, i: usize) -> f64 {
        self.d[i]
    }

    /// Coercivity threshold of component `i`: the energy is coercive iff
    /// `rho_i` is strictly below `8 pi / a_ii` for every component.
    pub fn coercivity_threshold(&self, i: usize) -> f64 {
        8.0 * PI / self.a[(i, i)]
    }

    /// Moser-Trudinger coefficient of component `i`: `8 pi / s_ii`.
    pub fn mt_coefficient(&self, i: usize) -> f64 {
        8.0 * PI / self.s[(i, i)]
    }
}

/// Find a positive diagonal `D` with `A D^{-1}` symmetric by propagating
/// `d_j = d_i a_ij / a_ji` along the graph of nonzero couplings.
fn symmetrizing_diagonal(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && (a[(i, j)] == 0.0) != (a[(j, i)] == 0.0) {
                return Err(TodaError::Validation(format!(
                    "matrix is not symmetrizable: a[{i}][{j}] and a[{j}][{i}] \
                     have mismatched zero pattern"
                )));
            }
        }
    }
    let mut d = vec![0.0f64; n];
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        d[start] = 1.0;
        seen[start] = true;
        let mut queue = vec![start];
        while let Some(i) = queue.pop() {
            for j in 0..n {
                if i == j || a[(i, j)] == 0.0 {
                    continue;
                }
                let dj = d[i] * a[(i, j)] / a[(j, i)];
                if seen[j] {
                    if (d[j] - dj).abs() > 1e-9 * d[j].abs().max(1.0) {
                        return Err(TodaError::Validation(format!(
                            "matrix is not symmetrizable: inconsistent diagonal \
                             at component {j} ({} vs {dj})",
                            d[j]
                        )));
                    }
                } else {
                    if dj <= 0.0 || !dj.is_finite() {
                        return Err(TodaError::Validation(format!(
                            "matrix is not symmetrizable with a positive diagonal \
                             (d[{j}] = {dj})"
                        )));
                    }
                    d[j] = dj;
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
    }
    Ok(d)
}

/// N-tuple of zero-mean fields together with the system parameters.
///
/// Construction projects each `u_i` to zero mean and validates the weights.
#[derive(Clone, Debug)]
pub struct SystemState {
    spec: CartanSpec,
    u: Vec<TorusField>,
    rho: Vec<f64>,
    h: Vec<TorusField>,
}

impl SystemState {
    pub fn new(
        spec: CartanSpec,
        u: Vec<TorusField>,
        rho: Vec<f64>,
        h: Vec<TorusField>,
    ) -> Result<Self> {
        let n = spec.n_components();
        if u.len() != n || rho.len() != n || h.len() != n {
            return Err(TodaError::Validation(format!(
                "state needs {n} components, got u: {}, rho: {}, h: {}",
                u.len(),
                rho.len(),
                h.len()
            )));
        }
        let grid = u[0].grid();
        for (i, f) in u.iter().enumerate() {
            if f.grid() != grid {
                return Err(TodaError::Validation(format!(
                    "component {i} lives on a different grid"
                )));
            }
            if !f.is_finite() {
                return Err(TodaError::Numeric(format!(
                    "component {i} has non-finite samples"
                )));
            }
        }
        for (i, &r) in rho.iter().enumerate() {
            if !(r > 0.0) {
                return Err(TodaError::Validation(format!(
                    "rho[{i}] = {r} must be positive"
                )));
            }
        }
        for (i, hf) in h.iter().enumerate() {
            if hf.grid() != grid {
                return Err(TodaError::Validation(format!(
                    "weight h[{i}] lives on a different grid"
                )));
            }
            if hf.values().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(TodaError::Validation(format!(
                    "weight h[{i}] must be finite and nonnegative"
                )));
            }
        }
        let u: Vec<TorusField> = u.into_iter().map(|f| f.project_zero_mean()).collect();
        let state = Self { spec, u, rho, h };
        for i in 0..n {
            // also guards against h identically zero
            state.log_int_h_exp_u(i)?;
        }
        Ok(state)
    }

    /// Zero fields with uniform weights.
    pub fn flat(spec: CartanSpec, grid: TorusGrid, rho: Vec<f64>) -> Result<Self> {
        let n = spec.n_components();
        let u = vec![TorusField::zeros(grid); n];
        let h = vec![TorusField::constant(grid, 1.0); n];
        Self::new(spec, u, rho, h)
    }

    pub fn spec(&self) -> &CartanSpec {
        &self.spec
    }

    pub fn grid(&self) -> TorusGrid {
        self.u[0].grid()
    }

    pub fn u(&self) -> &[TorusField] {
        &self.u
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn h(&self) -> &[TorusField] {
        &self.h
    }

    /// Replace the fields (projected to zero mean), keeping parameters.
    pub fn with_u(&self, u: Vec<TorusField>) -> Result<Self> {
        Self::new(self.spec.clone(), u, self.rho.clone(), self.h.clone())
    }

    /// `log int h_i e^{u_i}` through shifted log-sum-exp.
    pub fn log_int_h_exp_u(&self, i: usize) -> Result<f64> {
        log_int_h_exp(&self.h[i], &self.u[i])
    }

    /// Normalized density `h_i e^{u_i} / int h_i e^{u_i}`, renormalized so the
    /// quadrature mass is exactly 1.
    pub fn normalized_density(&self, i: usize) -> Result<TorusField> {
        let log_int = self.log_int_h_exp_u(i)?;
        let raw = self.h[i].zip_map(&self.u[i], |hv, uv| {
            if hv == 0.0 {
                0.0
            } else {
                (uv + hv.ln() - log_int).exp()
            }
        });
        let mass = raw.integrate();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(TodaError::Numeric(format!(
                "density {i} has mass {mass}"
            )));
        }
        Ok(raw.scale(1.0 / mass))
    }
}

/// `log int h e^u` with the max of the exponent subtracted first; bubble
/// fields reach values of order `-4 log lambda` and would overflow naively.
pub fn log_int_h_exp(h: &TorusField, u: &TorusField) -> Result<f64> {
    let s = h.zip_map(u, |hv, uv| if hv == 0.0 { f64::NEG_INFINITY } else { hv.ln() + uv });
    let m = s.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(TodaError::Numeric(
            "integrand of log int h e^u vanishes identically or overflows".into(),
        ));
    }
    let sum: f64 = s.values().iter().map(|&v| (v - m).exp()).sum();
    let mean = sum / s.values().len() as f64;
    Ok(m + mean.ln())
}

/// `int (1/2) sum_ij s^{ij} grad u_i . grad u_j`; the coefficients invert the
/// symmetrized matrix, so the B2/G2 presets reproduce the explicit forms
/// `|grad u1|^2/2 + grad u1.grad u2/2 + |grad u2|^2/4` and
/// `|grad u1|^2 + grad u1.grad u2 + |grad u2|^2/3`.
pub fn quadratic_form(spec: &CartanSpec, u: &[TorusField]) -> Result<f64> {
    let n = spec.n_components();
    if u.len() != n {
        return Err(TodaError::Validation(format!(
            "quadratic form needs {n} components, got {}",
            u.len()
        )));
    }
    let grads: Vec<_> = u.iter().map(|f| f.gradient()).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in i..n {
            let dot = grads[i].0.zip_map(&grads[j].0, |a, b| a * b).integrate()
                + grads[i].1.zip_map(&grads[j].1, |a, b| a * b).integrate();
            let w = if i == j { 0.5 } else { 1.0 };
            total += w * spec.s_inv(i, j) * dot;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentityVariant {
    B2,
    G2,
}

/// Residual of the elementary vector equalities used to split the quadratic
/// forms, in both the primary and the swapped arrangement. Returns the larger
/// of the two absolute residuals; it must vanish to machine precision.
pub fn elementary_identity_check(variant: IdentityVariant, x: [f64; 2], y: [f64; 2]) -> f64 {
    let nx = x[0] * x[0] + x[1] * x[1];
    let ny = y[0] * y[0] + y[1] * y[1];
    let xy = x[0] * y[0] + x[1] * y[1];
    let norm2 = |a: [f64; 2]| a[0] * a[0] + a[1] * a[1];
    match variant {
        IdentityVariant::B2 => {
            let lhs = nx / 2.0 + xy / 2.0 + ny / 4.0;
            let sum = [x[0] + y[0], x[1] + y[1]];
            let r1 = lhs - (nx / 4.0 + norm2(sum) / 4.0);
            let sw = [2.0 * x[0] + y[0], 2.0 * x[1] + y[1]];
            let r2 = lhs - (ny / 8.0 + norm2(sw) / 8.0);
            r1.abs().max(r2.abs())
        }
        IdentityVariant::G2 => {
            let lhs = nx + xy + ny / 3.0;
            let c1 = [3.0 * x[0] + 2.0 * y[0], 3.0 * x[1] + 2.0 * y[1]];
            let r1 = lhs - (nx / 4.0 + norm2(c1) / 12.0);
            let sw = [2.0 * x[0] + y[0], 2.0 * x[1] + y[1]];
            let r2 = lhs - (ny / 12.0 + norm2(sw) / 4.0);
            r1.abs().max(r2.abs())
        }
    }
}

/// Energy on arbitrary fields (not necessarily zero-mean); the functional is
/// invariant under per-component constant shifts.
pub fn energy_fields(
    spec: &CartanSpec,
    rho: &[f64],
    h: &[TorusField],
    u: &[TorusField],
) -> Result<f64> {
    let q = quadratic_form(spec, u)?;
    let mut j = q;
    for i in 0..spec.n_components() {
        let log_int = log_int_h_exp(&h[i], &u[i])?;
        j -= rho[i] * spec.d(i) * (log_int - u[i].integrate());
    }
    if !j.is_finite() {
        return Err(TodaError::Numeric(format!("energy is non-finite ({j})")));
    }
    Ok(j)
}

/// Energy of a state: quadratic form minus the weighted log-exponential terms.
pub fn energy(state: &SystemState) -> Result<f64> {
    energy_fields(state.spec(), state.rho(), state.h(), state.u())
}

/// L2-gradient of the energy with respect to each component, projected to
/// zero mean. Vanishes exactly at solutions of the system.
pub fn energy_gradient(state: &SystemState) -> Result<Vec<TorusField>> {
    let spec = state.spec();
    let n = spec.n_components();
    let laps: Vec<TorusField> = state.u().iter().map(|f| f.laplacian()).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut g = TorusField::zeros(state.grid());
        for (j, lap) in laps.iter().enumerate() {
            g.axpy(-spec.s_inv(k, j), lap);
        }
        let f_k = state.normalized_density(k)?;
        let w = state.rho()[k] * spec.d(k);
        g.axpy(-w, &f_k.map(|v| v - 1.0));
        out.push(g.project_zero_mean());
    }
    Ok(out)
}

/// Euler-Lagrange residual per component, using the original matrix `A`:
/// `-lap u_i - sum_j a_ij rho_j (h_j e^{u_j} / int h_j e^{u_j} - 1)`.
pub fn residual_fields(
    spec: &CartanSpec,
    rho: &[f64],
    h: &[TorusField],
    u: &[TorusField],
) -> Result<Vec<TorusField>> {
    let n = spec.n_components();
    let grid = u[0].grid();
    let mut densities = Vec::with_capacity(n);
    for j in 0..n {
        let log_int = log_int_h_exp(&h[j], &u[j])?;
        let raw = h[j].zip_map(&u[j], |hv, uv| {
            if hv == 0.0 {
                0.0
            } else {
                (uv + hv.ln() - log_int).exp()
            }
        });
        let mass = raw.integrate();
        densities.push(raw.scale(1.0 / mass));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = u[i].laplacian().scale(-1.0);
        for (j, f_j) in densities.iter().enumerate() {
            r.axpy(-spec.a(i, j) * rho[j], &f_j.map(|v| v - 1.0));
        }
        let _ = grid;
        out.push(r);
    }
    Ok(out)
}

pub fn residual(state: &SystemState) -> Result<Vec<TorusField>> {
    residual_fields(state.spec(), state.rho(), state.h(), state.u())
}

/// Which Moser-Trudinger inequality a deficit refers to.
pub enum MtVariant<'a> {
    /// Single component: `16 pi (log int e^u - int u) <= int |grad u|^2 + C`.
    Scalar,
    /// System form with coefficients `8 pi / s_ii` against the quadratic form.
    System(&'a CartanSpec),
}

/// Left side minus right side (without the constant) of the relevant
/// Moser-Trudinger inequality; sweeping families of fields bounds the
/// constant `C` empirically.
pub fn mt_deficit(variant: MtVariant<'_>, u: &[TorusField]) -> Result<f64> {
    match variant {
        MtVariant::Scalar => {
            if u.len() != 1 {
                return Err(TodaError::Validation(format!(
                    "scalar deficit takes one field, got {}",
                    u.len()
                )));
            }
            let ones = TorusField::constant(u[0].grid(), 1.0);
            let log_int = log_int_h_exp(&ones, &u[0])?;
            let dirichlet = u[0].gradient_dot(&u[0]).integrate();
            Ok(16.0 * PI * (log_int - u[0].integrate()) - dirichlet)
        }
        MtVariant::System(spec) => {
            if u.len() != spec.n_components() {
                return Err(TodaError::Validation(format!(
                    "system deficit needs {} fields, got {}",
                    spec.n_components(),
                    u.len()
                )));
            }
            let q = quadratic_form(spec, u)?;
            let mut lhs = 0.0;
            for (i, ui) in u.iter().enumerate() {
                let ones = TorusField::constant(ui.grid(), 1.0);
                let log_int = log_int_h_exp(&ones, ui)?;
                lhs += spec.mt_coefficient(i) * (log_int - ui.integrate());
            }
            Ok(lhs - q)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusPoint;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    fn random_smooth(g: TorusGrid, rng: &mut ChaCha8Rng) -> TorusField {
        let mut f = TorusField::zeros(g);
        for _ in 0..5 {
            let kx: i32 = rng.gen_range(-3..=3);
            let ky: i32 = rng.gen_range(-3..=3);
            let amp: f64 = rng.gen_range(-0.8..0.8);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let mode = TorusField::from_fn(g, |p| {
                (2.0 * PI * (kx as f64 * p.x() + ky as f64 * p.y()) + phase).cos()
            });
            f.axpy(amp, &mode);
        }
        f
    }

    #[test]
    fn preset_factorizations_are_exact() {
        let b2 = CartanSpec::b2();
        assert_eq!(b2.s(0, 0), 2.0);
        assert_eq!(b2.s(0, 1), -2.0);
        assert_eq!(b2.s(1, 1), 4.0);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b2.s(i, j) * b2.d(j), b2.a(i, j), "B2 S*D != A at ({i},{j})");
            }
        }
        let g2 = CartanSpec::g2();
        assert_eq!(g2.s(0, 1), -3.0);
        assert_eq!(g2.s(1, 1), 6.0);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g2.s(i, j) * g2.d(j), g2.a(i, j), "G2 S*D != A at ({i},{j})");
            }
        }
    }

    #[test]
    fn inverse_identity_within_tolerance() {
        for spec in [CartanSpec::a2(), CartanSpec::b2(), CartanSpec::g2()] {
            let n = spec.n_components();
            for i in 0..n {
                for j in 0..n {
                    let mut sum = 0.0;
                    for k in 0..n {
                        sum += spec.a(i, k) * spec.a_inv(k, j);
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((sum - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn symmetrization_recovered_from_raw_entries() {
        let spec = CartanSpec::from_rows(vec![vec![2.0, -1.0], vec![-2.0, 2.0]]).unwrap();
        let b2 = CartanSpec::b2();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(spec.s(i, j), b2.s(i, j), epsilon = 1e-14);
            }
            assert_abs_diff_eq!(spec.d(i), b2.d(i), epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        // positive off-diagonal
        assert!(CartanSpec::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).is_err());
        // merely positive semidefinite
        assert!(CartanSpec::from_rows(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).is_err());
        // mismatched zero pattern cannot be symmetrized
        assert!(CartanSpec::from_rows(vec![vec![2.0, 0.0], vec![-1.0, 2.0]]).is_err());
        // negative diagonal is not positive definite
        assert!(CartanSpec::from_rows(vec![vec![-2.0, -1.0], vec![-1.0, 2.0]]).is_err());
    }

    #[test]
    fn coercivity_thresholds() {
        let b2 = CartanSpec::b2();
        assert_abs_diff_eq!(b2.coercivity_threshold(0), 4.0 * PI);
        assert_abs_diff_eq!(b2.coercivity_threshold(1), 4.0 * PI);
        assert_abs_diff_eq!(b2.mt_coefficient(0), 4.0 * PI);
        assert_abs_diff_eq!(b2.mt_coefficient(1), 2.0 * PI);
        let g2 = CartanSpec::g2();
        assert_abs_diff_eq!(g2.mt_coefficient(1), 4.0 * PI / 3.0);
    }

    #[test]
    fn quadratic_form_of_constants_vanishes() {
        let g = grid(32);
        let u = vec![TorusField::constant(g, 1.3), TorusField::constant(g, -0.4)];
        let q = quadratic_form(&CartanSpec::b2(), &u).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_sine_value() {
        let g = grid(64);
        let u1 = TorusField::from_fn(g, |p| (2.0 * PI * p.x()).sin());
        let u2 = TorusField::zeros(g);
        let q = quadratic_form(&CartanSpec::b2(), &[u1, u2]).unwrap();
        assert_abs_diff_eq!(q, PI * PI, epsilon = 1e-10);
    }

    /// The general coefficient path must agree with the paper's explicit
    /// displays evaluated directly.
    #[test]
    fn quadratic_form_matches_handcoded_presets() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let u1 = random_smooth(g, &mut rng);
            let u2 = random_smooth(g, &mut rng);
            let q11 = u1.gradient_dot(&u1).integrate();
            let q12 = u1.gradient_dot(&u2).integrate();
            let q22 = u2.gradient_dot(&u2).integrate();

            let qb = quadratic_form(&CartanSpec::b2(), &[u1.clone(), u2.clone()]).unwrap();
            assert_abs_diff_eq!(qb, q11 / 2.0 + q12 / 2.0 + q22 / 4.0, epsilon = 1e-10);

            let qg = quadratic_form(&CartanSpec::g2(), &[u1, u2]).unwrap();
            assert_abs_diff_eq!(qg, q11 + q12 + q22 / 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn quadratic_form_zero_only_for_constants() {
        let g = grid(32);
        let u1 = TorusField::from_fn(g, |p| 0.1 * (2.0 * PI * p.y()).cos());
        let u2 = TorusField::zeros(g);
        let q = quadratic_form(&CartanSpec::b2(), &[u1, u2]).unwrap();
        assert!(q > 1e-6);
    }

    #[test]
    fn elementary_identities() {
        let r = elementary_identity_check(IdentityVariant::B2, [1.0, 0.0], [0.0, 1.0]);
        assert_eq!(r, 0.0);
        let r = elementary_identity_check(IdentityVariant::G2, [0.0, 0.0], [0.0, 0.0]);
        assert_eq!(r, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let y = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            assert!(elementary_identity_check(IdentityVariant::B2, x, y) < 1e-12);
            assert!(elementary_identity_check(IdentityVariant::G2, x, y) < 1e-12);
        }
    }

    #[test]
    fn energy_zero_state() {
        let state = SystemState::flat(CartanSpec::b2(), grid(32), vec![PI, PI]).unwrap();
        assert_abs_diff_eq!(energy(&state).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn energy_invariant_under_constant_shift() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = CartanSpec::b2();
        let rho = [2.0 * PI, 3.0 * PI];
        let h = vec![TorusField::constant(g, 1.0), TorusField::constant(g, 1.0)];
        let u = vec![random_smooth(g, &mut rng), random_smooth(g, &mut rng)];
        let shifted: Vec<TorusField> = u.iter().map(|f| f.map(|v| v + 2.7)).collect();
        let j0 = energy_fields(&spec, &rho, &h, &u).unwrap();
        let j1 = energy_fields(&spec, &rho, &h, &shifted).unwrap();
        assert_abs_diff_eq!(j0, j1, epsilon = 1e-10);
    }

    #[test]
    fn energy_bounded_on_coercive_sweep() {
        let g = grid(16);
        let spec = CartanSpec::b2();
        let rho = vec![2.0 * PI, 2.0 * PI];
        let h = vec![TorusField::constant(g, 1.0), TorusField::constant(g, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut min_j = f64::INFINITY;
        for _ in 0..100 {
            let u = vec![
                random_smooth(g, &mut rng).scale(0.5),
                random_smooth(g, &mut rng).scale(0.5),
            ];
            let j = energy_fields(&spec, &rho, &h, &u).unwrap();
            assert!(j.is_finite() && j > -100.0);
            min_j = min_j.min(j);
        }
        // the zero state bounds the minimum from above
        assert!(min_j.min(0.0) <= 0.0);
    }

    #[test]
    fn gradient_vanishes_at_flat_state() {
        let state = SystemState::flat(CartanSpec::g2(), grid(32), vec![5.0, 7.0]).unwrap();
        for gcomp in energy_gradient(&state).unwrap() {
            assert!(gcomp.sup_norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_directional_finite_differences() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let spec = CartanSpec::b2();
        let rho = vec![2.0 * PI, 5.0];
        let h = vec![
            TorusField::from_fn(g, |p| 1.0 + 0.4 * (2.0 * PI * p.x()).sin()),
            TorusField::constant(g, 1.0),
        ];
        let u = vec![
            random_smooth(g, &mut rng).scale(0.3),
            random_smooth(g, &mut rng).scale(0.3),
        ];
        let state = SystemState::new(spec.clone(), u.clone(), rho.clone(), h.clone()).unwrap();
        let grad = energy_gradient(&state).unwrap();
        let eps = 1e-5;
        for _ in 0..3 {
            let v = vec![
                random_smooth(g, &mut rng).project_zero_mean(),
                random_smooth(g, &mut rng).project_zero_mean(),
            ];
            let mut up = Vec::new();
            let mut dn = Vec::new();
            for (ui, vi) in state.u().iter().zip(&v) {
                let mut a = ui.clone();
                a.axpy(eps, vi);
                up.push(a);
                let mut b = ui.clone();
                b.axpy(-eps, vi);
                dn.push(b);
            }
            let fd = (energy_fields(&spec, &rho, &h, &up).unwrap()
                - energy_fields(&spec, &rho, &h, &dn).unwrap())
                / (2.0 * eps);
            let mut inner = 0.0;
            for (gi, vi) in grad.iter().zip(&v) {
                inner += gi.zip_map(vi, |a, b| a * b).integrate();
            }
            assert!(
                (fd - inner).abs() <= 1e-6 * inner.abs().max(1.0),
                "directional derivative mismatch: {fd} vs {inner}"
            );
        }
    }

    #[test]
    fn gradient_components_have_zero_mean() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let state = SystemState::new(
            CartanSpec::b2(),
            vec![random_smooth(g, &mut rng), random_smooth(g, &mut rng)],
            vec![3.0, 4.0],
            vec![TorusField::constant(g, 1.0), TorusField::constant(g, 1.0)],
        )
        .unwrap();
        for gcomp in energy_gradient(&state).unwrap() {
            assert!(gcomp.integrate().abs() < 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_at_flat_state() {
        let state = SystemState::flat(CartanSpec::b2(), grid(32), vec![6.0, 2.0]).unwrap();
        for r in residual(&state).unwrap() {
            assert!(r.sup_norm() < 1e-12);
        }
    }

    #[test]
    fn residual_invariant_under_constant_shift() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = CartanSpec::g2();
        let rho = [4.0, 5.0];
        let h = vec![TorusField::constant(g, 1.0), TorusField::constant(g, 1.0)];
        let u = vec![random_smooth(g, &mut rng), random_smooth(g, &mut rng)];
        let shifted: Vec<TorusField> = u.iter().map(|f| f.map(|v| v - 1.9)).collect();
        let r0 = residual_fields(&spec, &rho, &h, &u).unwrap();
        let r1 = residual_fields(&spec, &rho, &h, &shifted).unwrap();
        for (a, b) in r0.iter().zip(&r1) {
            assert!(a.sub(b).sup_norm() < 1e-10);
        }
    }

    /// The residual is the symmetrized matrix applied to the L2-gradient.
    #[test]
    fn residual_is_symmetrization_of_gradient() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let state = SystemState::new(
            CartanSpec::b2(),
            vec![
                random_smooth(g, &mut rng).scale(0.2),
                random_smooth(g, &mut rng).scale(0.2),
            ],
            vec![2.0 * PI, 2.0 * PI],
            vec![TorusField::constant(g, 1.0), TorusField::constant(g, 1.0)],
        )
        .unwrap();
        let grad = energy_gradient(&state).unwrap();
        let res = residual(&state).unwrap();
        let spec = state.spec();
        for i in 0..2 {
            let mut combo = TorusField::zeros(g);
            for (k, gk) in grad.iter().enumerate() {
                combo.axpy(spec.s(i, k), gk);
            }
            assert!(combo.sub(&res[i]).sup_norm() < 1e-10);
            let ratio = res[i].sup_norm() / grad[i].sup_norm().max(1e-300);
            assert!(ratio < 10.0 && ratio > 0.1, "sup-norm ratio {ratio}");
        }
    }

    #[test]
    fn mt_deficit_zero_field() {
        let g = grid(32);
        let d = mt_deficit(MtVariant::Scalar, &[TorusField::zeros(g)]).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
        let spec = CartanSpec::b2();
        let d = mt_deficit(
            MtVariant::System(&spec),
            &[TorusField::zeros(g), TorusField::zeros(g)],
        )
        .unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mt_deficit_running_max_is_monotone() {
        let g = grid(64);
        let p = TorusPoint::new(0.5, 0.5);
        let mut running = f64::NEG_INFINITY;
        for lam in [2.0, 4.0, 8.0, 16.0] {
            let u = TorusField::from_fn(g, |q| {
                let d = crate::torus::flat_distance(p, q);
                -2.0 * (1.0 + (lam * d).powi(2)).ln()
            });
            let deficit = mt_deficit(MtVariant::Scalar, &[u]).unwrap();
            let new_running = running.max(deficit);
            assert!(deficit <= new_running);
            running = new_running;
        }
        assert!(running.is_finite());
    }
}
