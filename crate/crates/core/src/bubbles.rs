//! The bubble test-function family modeled on joins of barycenter spaces,
//! and sweep drivers that verify its asymptotic estimates numerically.
//!
//! A bubble is `phi(x) = log sum_k t_k (1 + (s d(x, x_k))^2)^-2`; the test map
//! mixes one bubble per component through the coefficients `a_ij / a_jj`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::cartan::{energy_fields, log_int_h_exp, quadratic_form, CartanSpec};
use crate::error::{Result, TodaError};
use crate::fit::{fit_line, fit_plane, LineFit, PlaneFit};
use crate::torus::{flat_distance, TorusField, TorusGrid, TorusPoint};

/// Finitely supported probability measure: atoms with nonnegative weights
/// summing to one (normalized at construction).
#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterConfig {
    atoms: Vec<(TorusPoint, f64)>,
}

impl BarycenterConfig {
    pub fn new(atoms: Vec<(TorusPoint, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(TodaError::Validation(
                "barycenter configuration needs at least one atom".into(),
            ));
        }
        let mut total = 0.0;
        for (_, w) in &atoms {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(TodaError::Validation(format!(
                    "atom weight {w} must be finite and nonnegative"
                )));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(TodaError::Validation(
                "atom weights must have positive total mass".into(),
            ));
        }
        let atoms = atoms
            .into_iter()
            .map(|(p, w)| (p, w / total))
            .collect();
        Ok(Self { atoms })
    }

    pub fn single(p: TorusPoint) -> Self {
        Self {
            atoms: vec![(p, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(TorusPoint, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Smallest pairwise distance between atoms (infinity for a single atom).
    pub fn min_separation(&self) -> f64 {
        let mut sep = f64::INFINITY;
        for i in 0..self.atoms.len() {
            for j in (i + 1)..self.atoms.len() {
                sep = sep.min(flat_distance(self.atoms[i].0, self.atoms[j].0));
            }
        }
        sep
    }
}

/// Positive bubble scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BubbleScale {
    lambda: f64,
}

impl BubbleScale {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(TodaError::Validation(format!(
                "bubble scale must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn get(&self) -> f64 {
        self.lambda
    }
}

/// Point of the iterated join: one barycenter configuration per component
/// plus simplex coordinates. When `t_i = 0` the configuration `sigma_i` is
/// quotiented away, which the equality relation respects.
#[derive(Clone, Debug)]
pub struct JoinPoint {
    sigmas: Vec<BarycenterConfig>,
    t: Vec<f64>,
}

impl JoinPoint {
    pub fn new(sigmas: Vec<BarycenterConfig>, t: Vec<f64>) -> Result<Self> {
        if sigmas.len() != t.len() || sigmas.is_empty() {
            return Err(TodaError::Validation(format!(
                "join point needs matching component counts, got {} sigmas and {} weights",
                sigmas.len(),
                t.len()
            )));
        }
        let mut total = 0.0;
        for &ti in &t {
            if !(ti >= 0.0) || !ti.is_finite() {
                return Err(TodaError::Validation(format!(
                    "join coordinate {ti} must be finite and nonnegative"
                )));
            }
            total += ti;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(TodaError::Validation(format!(
                "join coordinates must sum to 1, got {total}"
            )));
        }
        let t = t.into_iter().map(|ti| ti / total).collect();
        Ok(Self { sigmas, t })
    }

    /// Two-component join stored through the scalar `t`: `t_1 = 1 - t`,
    /// `t_2 = t`.
    pub fn two_component(
        sigma1: BarycenterConfig,
        sigma2: BarycenterConfig,
        t: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(TodaError::Validation(format!(
                "scalar join coordinate must lie in [0, 1], got {t}"
            )));
        }
        Self::new(vec![sigma1, sigma2], vec![1.0 - t, t])
    }

    pub fn sigmas(&self) -> &[BarycenterConfig] {
        &self.sigmas
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// The scalar coordinate of a two-component join (`t_2`).
    pub fn scalar_t(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Atom counts per component; these play the role of the `K_i`.
    pub fn k(&self) -> Vec<usize> {
        self.sigmas.iter().map(|s| s.len()).collect()
    }
}

impl PartialEq for JoinPoint {
    fn eq(&self, other: &Self) -> bool {
        if self.t.len() != other.t.len() {
            return false;
        }
        for i in 0..self.t.len() {
            if self.t[i] != other.t[i] {
                return false;
            }
            // sigma_i only matters on the support of t
            if self.t[i] > 0.0 && self.sigmas[i] != other.sigmas[i] {
                return false;
            }
        }
        true
    }
}

/// `phi(x) = log sum_k t_k (1 + (s d(x, x_k))^2)^-2`, log-sum-exp over atoms.
/// `s = 0` returns the exact zero field, so components of the test map are
/// bitwise independent of quotiented configurations.
pub fn bubble(grid: TorusGrid, config: &BarycenterConfig, s: f64) -> Result<TorusField> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(TodaError::Validation(format!(
            "bubble scale must be finite and >= 0, got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(TorusField::zeros(grid));
    }
    let atoms = config.atoms();
    Ok(TorusField::from_fn(grid, |p| {
        let mut max_term = f64::NEG_INFINITY;
        let mut terms = [0.0f64; 8];
        let mut buf: Vec<f64>;
        let slice: &mut [f64] = if atoms.len() <= 8 {
            &mut terms[..atoms.len()]
        } else {
            buf = vec![0.0; atoms.len()];
            &mut buf
        };
        for (slot, (q, w)) in slice.iter_mut().zip(atoms) {
            let sd = s * flat_distance(p, *q);
            let v = if *w == 0.0 {
                f64::NEG_INFINITY
            } else {
                w.ln() - 2.0 * (1.0 + sd * sd).ln()
            };
            *slot = v;
            max_term = max_term.max(v);
        }
        let sum: f64 = slice.iter().map(|&v| (v - max_term).exp()).sum();
        max_term + sum.ln()
    }))
}

/// Test map `Phi_A^lambda(zeta)`: component `i` is
/// `sum_j (a_ij / a_jj) phi_j` with `phi_j = bubble(sigma_j, lambda t_j)`.
/// For the B2 preset this is `(phi1 - phi2/2, phi2 - phi1)`, for G2
/// `(phi1 - phi2/2, phi2 - 3/2 phi1)`.
pub fn test_map(
    spec: &CartanSpec,
    grid: TorusGrid,
    zeta: &JoinPoint,
    lambda: f64,
) -> Result<Vec<TorusField>> {
    let lambda = BubbleScale::new(lambda)?.get();
    let n = spec.n_components();
    if zeta.sigmas().len() != n {
        return Err(TodaError::Validation(format!(
            "join point has {} components, matrix has {n}",
            zeta.sigmas().len()
        )));
    }
    let phis: Vec<TorusField> = (0..n)
        .map(|j| bubble(grid, &zeta.sigmas()[j], lambda * zeta.t()[j]))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut comp = TorusField::zeros(grid);
        for (j, phi) in phis.iter().enumerate() {
            comp.axpy(spec.a(i, j) / spec.a(j, j), phi);
        }
        out.push(comp);
    }
    Ok(out)
}

const MIN_SWEEP_SAMPLES: usize = 6;
const WITHIN_COMPONENT_SEPARATION: f64 = 0.1;
const CROSS_COMPONENT_SEPARATION: f64 = 0.2;

fn validate_zeta_separation(zeta: &JoinPoint) -> Result<()> {
    for (i, sigma) in zeta.sigmas().iter().enumerate() {
        if sigma.min_separation() < WITHIN_COMPONENT_SEPARATION {
            return Err(TodaError::Validation(format!(
                "atoms of sigma_{i} closer than {WITHIN_COMPONENT_SEPARATION}"
            )));
        }
    }
    for i in 0..zeta.sigmas().len() {
        for j in (i + 1)..zeta.sigmas().len() {
            for (p, _) in zeta.sigmas()[i].atoms() {
                for (q, _) in zeta.sigmas()[j].atoms() {
                    if flat_distance(*p, *q) < CROSS_COMPONENT_SEPARATION {
                        return Err(TodaError::Validation(format!(
                            "supports of sigma_{i} and sigma_{j} closer than \
                             {CROSS_COMPONENT_SEPARATION}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn log_max(s: f64) -> f64 {
    s.max(1.0).ln()
}

/// Measured quadratic form of the test map at one scale, against the leading
/// terms `16 pi sum_i (K_i / s_ii) log max(1, lambda t_i)`; also the largest
/// bubble cross term, which must stay bounded.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradEstimate {
    pub lambda: f64,
    pub measured: f64,
    pub leading: f64,
    pub deviation: f64,
    pub cross_term_max: f64,
}

pub fn grad_estimate(
    spec: &CartanSpec,
    grid: TorusGrid,
    zeta: &JoinPoint,
    lambda: f64,
) -> Result<GradEstimate> {
    validate_zeta_separation(zeta)?;
    let fields = test_map(spec, grid, zeta, lambda)?;
    let measured = quadratic_form(spec, &fields)?;
    let n = spec.n_components();
    let mut leading = 0.0;
    for i in 0..n {
        leading += 16.0 * PI * zeta.sigmas()[i].len() as f64 / spec.s(i, i)
            * log_max(lambda * zeta.t()[i]);
    }
    let phis: Vec<TorusField> = (0..n)
        .map(|j| bubble(grid, &zeta.sigmas()[j], lambda * zeta.t()[j]))
        .collect::<Result<_>>()?;
    let mut cross_term_max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let cross = phis[i].gradient_dot(&phis[j]).integrate();
            cross_term_max = cross_term_max.max(cross.abs());
        }
    }
    Ok(GradEstimate {
        lambda,
        measured,
        leading,
        deviation: measured - leading,
        cross_term_max,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GradSweepReport {
    pub points: Vec<GradEstimate>,
    /// Fit of the measured quadratic form against `log lambda`.
    pub fit: LineFit,
    /// Slope the leading terms predict over the same sweep.
    pub leading_slope: f64,
    /// Fit of the cross term against `log lambda`; boundedness means a
    /// negligible slope.
    pub cross_fit: LineFit,
    /// Largest deviation from the leading terms: the calibrated constant.
    pub c_fit: f64,
}

/// Sweep the gradient estimate over at least 6 scales and fit the growth.
pub fn verify_grad_estimate(
    spec: &CartanSpec,
    grid: TorusGrid,
    zeta: &JoinPoint,
    lambdas: &[f64],
) -> Result<GradSweepReport> {
    if lambdas.len() < MIN_SWEEP_SAMPLES {
        return Err(TodaError::Validation(format!(
            "slope fits need at least {MIN_SWEEP_SAMPLES} scale samples, got {}",
            lambdas.len()
        )));
    }
    let points: Vec<GradEstimate> = lambdas
        .iter()
        .map(|&l| grad_estimate(spec, grid, zeta, l))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.lambda.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.measured).collect();
    let fit = fit_line(&xs, &ys)?;
    let leads: Vec<f64> = points.iter().map(|p| p.leading).collect();
    let leading_slope = fit_line(&xs, &leads)?.slope;
    let crosses: Vec<f64> = points.iter().map(|p| p.cross_term_max).collect();
    let cross_fit = fit_line(&xs, &crosses)?;
    let c_fit = points
        .iter()
        .fold(f64::NEG_INFINITY, |m, p| m.max(p.deviation.abs()));
    Ok(GradSweepReport {
        points,
        fit,
        leading_slope,
        cross_fit,
        c_fit,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AverageSweepReport {
    pub scales: Vec<f64>,
    pub averages: Vec<f64>,
    /// Fit of the average against `log s` over the samples with `s > 1`.
    pub fit: LineFit,
    /// Largest deviation from `-4 log max(1, s)`.
    pub c_fit: f64,
}

/// Bubble average `int phi`, which must fall off like `-4 log max(1, s)`.
pub fn verify_average_estimate(
    grid: TorusGrid,
    config: &BarycenterConfig,
    scales: &[f64],
) -> Result<AverageSweepReport> {
    if scales.len() < MIN_SWEEP_SAMPLES {
        return Err(TodaError::Validation(format!(
            "slope fits need at least {MIN_SWEEP_SAMPLES} scale samples, got {}",
            scales.len()
        )));
    }
    if config.min_separation() < WITHIN_COMPONENT_SEPARATION {
        return Err(TodaError::Validation(format!(
            "atoms closer than {WITHIN_COMPONENT_SEPARATION}"
        )));
    }
    let mut averages = Vec::with_capacity(scales.len());
    for &s in scales {
        averages.push(bubble(grid, config, s)?.integrate());
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&s, &a) in scales.iter().zip(&averages) {
        if s > 1.0 {
            xs.push(s.ln());
            ys.push(a);
        }
    }
    let fit = fit_line(&xs, &ys)?;
    let c_fit = scales
        .iter()
        .zip(&averages)
        .fold(f64::NEG_INFINITY, |m, (&s, &a)| {
            m.max((a + 4.0 * log_max(s)).abs())
        });
    Ok(AverageSweepReport {
        scales: scales.to_vec(),
        averages,
        fit,
        c_fit,
    })
}

/// The three log-integrals of the exponential estimate at one `(lambda, t)`:
/// `log int h1 e^{phi1 - phi2/2}`, `log int h2 e^{phi2 - phi1}` and
/// `log int h2 e^{phi2 - 3/2 phi1}`.
pub fn exp_quantities(
    grid: TorusGrid,
    sigma1: &BarycenterConfig,
    sigma2: &BarycenterConfig,
    lambda: f64,
    t: f64,
    h1: &TorusField,
    h2: &TorusField,
) -> Result<[f64; 3]> {
    let phi1 = bubble(grid, sigma1, lambda * (1.0 - t))?;
    let phi2 = bubble(grid, sigma2, lambda * t)?;
    let mut q = [0.0; 3];
    let e1 = phi1.zip_map(&phi2, |a, b| a - b / 2.0);
    q[0] = log_int_h_exp(h1, &e1)?;
    let e2 = phi2.zip_map(&phi1, |a, b| a - b);
    q[1] = log_int_h_exp(h2, &e2)?;
    let e3 = phi2.zip_map(&phi1, |a, b| a - 1.5 * b);
    q[2] = log_int_h_exp(h2, &e3)?;
    Ok(q)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpSweepReport {
    /// Sampled `(lambda, t)` pairs.
    pub samples: Vec<(f64, f64)>,
    pub quantities: Vec<[f64; 3]>,
    /// Coefficient pairs fitted for the three quantities: the first against
    /// `(log M1, log M2)`, the second and third against `(log M2, log M1)`.
    /// Expected values: `(-2, +2)`, `(-2, +4)`, `(-2, +6)`.
    pub fits: [PlaneFit; 3],
}

/// Two-variable slope fit of the exponential estimates over a `(lambda, t)`
/// grid. The samples must make `log M1` and `log M2` non-collinear, so at
/// least two distinct interior `t` values are required.
pub fn verify_exp_estimate(
    grid: TorusGrid,
    sigma1: &BarycenterConfig,
    sigma2: &BarycenterConfig,
    lambdas: &[f64],
    ts: &[f64],
    h: Option<(&TorusField, &TorusField)>,
) -> Result<ExpSweepReport> {
    if lambdas.len() * ts.len() < MIN_SWEEP_SAMPLES {
        return Err(TodaError::Validation(format!(
            "slope fits need at least {MIN_SWEEP_SAMPLES} samples, got {}",
            lambdas.len() * ts.len()
        )));
    }
    let ones = TorusField::constant(grid, 1.0);
    let (h1, h2) = h.unwrap_or((&ones, &ones));
    let zeta_check = JoinPoint::new(vec![sigma1.clone(), sigma2.clone()], vec![0.5, 0.5])?;
    validate_zeta_separation(&zeta_check)?;
    let mut samples = Vec::new();
    let mut quantities = Vec::new();
    let mut lm1 = Vec::new();
    let mut lm2 = Vec::new();
    for &lambda in lambdas {
        for &t in ts {
            let q = exp_quantities(grid, sigma1, sigma2, lambda, t, h1, h2)?;
            samples.push((lambda, t));
            quantities.push(q);
            lm1.push(log_max(lambda * (1.0 - t)));
            lm2.push(log_max(lambda * t));
        }
    }
    let y0: Vec<f64> = quantities.iter().map(|q| q[0]).collect();
    let y1: Vec<f64> = quantities.iter().map(|q| q[1]).collect();
    let y2: Vec<f64> = quantities.iter().map(|q| q[2]).collect();
    let fits = [
        fit_plane(&lm1, &lm2, &y0)?,
        fit_plane(&lm2, &lm1, &y1)?,
        fit_plane(&lm2, &lm1, &y2)?,
    ];
    Ok(ExpSweepReport {
        samples,
        quantities,
        fits,
    })
}

/// Validate `rho_i` inside the window `(8 pi / a_ii) (K_i, K_i + 1)`; the
/// endpoints form the critical lattice and are rejected.
pub fn validate_test_window(spec: &CartanSpec, rho: &[f64], ks: &[usize]) -> Result<()> {
    if rho.len() != spec.n_components() || ks.len() != spec.n_components() {
        return Err(TodaError::Validation(format!(
            "window check needs {} components, got rho: {}, K: {}",
            spec.n_components(),
            rho.len(),
            ks.len()
        )));
    }
    for i in 0..spec.n_components() {
        let unit = spec.coercivity_threshold(i);
        let lo = unit * ks[i] as f64;
        let hi = unit * (ks[i] + 1) as f64;
        let margin = 1e-9 * unit;
        if !(rho[i] > lo + margin && rho[i] < hi - margin) {
            return Err(TodaError::Validation(format!(
                "rho[{i}] = {} must lie strictly inside ({lo:.6}, {hi:.6}); \
                 the endpoints belong to the critical lattice",
                rho[i]
            )));
        }
    }
    Ok(())
}

/// Slope of `J(Phi^lambda)` in `log lambda` predicted by combining the three
/// estimates: `sum over active components of (16 pi K_i / s_ii - 2 d_i rho_i)`.
pub fn predicted_divergence_slope(
    spec: &CartanSpec,
    rho: &[f64],
    ks: &[usize],
    t: &[f64],
) -> f64 {
    let mut slope = 0.0;
    for i in 0..spec.n_components() {
        if t[i] > 0.0 {
            slope += 16.0 * PI * ks[i] as f64 / spec.s(i, i) - 2.0 * spec.d(i) * rho[i];
        }
    }
    slope
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub energy: f64,
    pub quadratic: f64,
    pub averages: Vec<f64>,
    pub log_ints: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZetaSweep {
    pub t: Vec<f64>,
    pub k: Vec<usize>,
    pub points: Vec<SweepPoint>,
    pub fit: LineFit,
    pub predicted_slope: f64,
    /// `fit.slope <= predicted_slope + 0.5`.
    pub meets_bound: bool,
    /// Energies strictly decreasing over the second half of the sweep.
    pub decreasing_tail: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    pub per_zeta: Vec<ZetaSweep>,
}

/// Evaluate `J(Phi^lambda(zeta))` over a scale sweep for each sampled join
/// point and fit the divergence rate.
pub fn energy_divergence_sweep(
    spec: &CartanSpec,
    grid: TorusGrid,
    rho: &[f64],
    zetas: &[JoinPoint],
    lambdas: &[f64],
    h: Option<&[TorusField]>,
) -> Result<DivergenceReport> {
    if lambdas.len() < MIN_SWEEP_SAMPLES {
        return Err(TodaError::Validation(format!(
            "slope fits need at least {MIN_SWEEP_SAMPLES} scale samples, got {}",
            lambdas.len()
        )));
    }
    let n = spec.n_components();
    let ones: Vec<TorusField> = vec![TorusField::constant(grid, 1.0); n];
    let h = h.unwrap_or(&ones);
    if h.len() != n {
        return Err(TodaError::Validation(format!(
            "divergence sweep needs {n} weights, got {}",
            h.len()
        )));
    }
    let mut per_zeta = Vec::with_capacity(zetas.len());
    for zeta in zetas {
        validate_zeta_separation(zeta)?;
        let ks = zeta.k();
        validate_test_window(spec, rho, &ks)?;
        let mut points = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let fields = test_map(spec, grid, zeta, lambda)?;
            let quadratic = quadratic_form(spec, &fields)?;
            let energy = energy_fields(spec, rho, h, &fields)?;
            let averages = fields.iter().map(|f| f.integrate()).collect();
            let mut log_ints = Vec::with_capacity(n);
            for (hi, fi) in h.iter().zip(&fields) {
                log_ints.push(log_int_h_exp(hi, fi)?);
            }
            points.push(SweepPoint {
                lambda,
                energy,
                quadratic,
                averages,
                log_ints,
            });
        }
        let xs: Vec<f64> = points.iter().map(|p| p.lambda.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.energy).collect();
        let fit = fit_line(&xs, &ys)?;
        let predicted_slope = predicted_divergence_slope(spec, rho, &ks, zeta.t());
        let meets_bound = fit.slope <= predicted_slope + 0.5;
        let tail_start = points.len() / 2;
        let decreasing_tail = points
            .windows(2)
            .skip(tail_start.saturating_sub(1))
            .all(|w| w[1].energy < w[0].energy);
        per_zeta.push(ZetaSweep {
            t: zeta.t().to_vec(),
            k: ks,
            points,
            fit,
            predicted_slope,
            meets_bound,
            decreasing_tail,
        });
    }
    Ok(DivergenceReport { per_zeta })
}

/// Circle of component `i` out of `n`: the horizontal circle
/// `y = (2 i + 1) / (2 n)` (zero-based `i`).
pub fn component_circle_height(i: usize, n: usize) -> f64 {
    (2 * i + 1) as f64 / (2 * n) as f64
}

/// Sample a join point with `ks[i]` atoms on the `i`-th retraction circle,
/// pairwise separated by at least 0.1, with interior simplex coordinates.
pub fn sample_zeta(rng: &mut impl rand::Rng, ks: &[usize]) -> Result<JoinPoint> {
    let n = ks.len();
    let mut sigmas = Vec::with_capacity(n);
    for (i, &k) in ks.iter().enumerate() {
        let y = component_circle_height(i, n);
        let mut xs: Vec<f64> = Vec::with_capacity(k);
        let mut guard = 0;
        while xs.len() < k {
            let x: f64 = rng.gen_range(0.0..1.0);
            if xs
                .iter()
                .all(|&prev| {
                    let d = (x - prev).abs();
                    d.min(1.0 - d) >= WITHIN_COMPONENT_SEPARATION + 0.02
                })
            {
                xs.push(x);
            }
            guard += 1;
            if guard > 10_000 {
                return Err(TodaError::Validation(format!(
                    "cannot place {k} atoms 0.1-separated on a circle"
                )));
            }
        }
        let atoms = xs
            .into_iter()
            .map(|x| (TorusPoint::new(x, y), rng.gen_range(0.2..1.0)))
            .collect();
        sigmas.push(BarycenterConfig::new(atoms)?);
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let t = raw.into_iter().map(|v| v / total).collect();
    JoinPoint::new(sigmas, t)
}
