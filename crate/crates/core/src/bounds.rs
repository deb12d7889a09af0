//! Estimation bounds under correct and misspecified wavefront models.
//!
//! Observations are modelled as `y = mu(eta) + w` with `w` circular white
//! Gaussian noise of known variance `sigma^2` per entry. The true mean comes
//! from the spherical SWM+SNS model; a far-field estimator fits the planar
//! family instead. The pseudo-true planar parameter minimises the KL
//! divergence between the two Gaussians, which for equal covariances is the
//! least-squares fit of the means. The misspecified bound is then
//! `A^-1 B A^-1` evaluated at that point.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, OfdmGrid, Point, SPEED_OF_LIGHT};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::wavefront::{
    ff_hessian, ff_hessian_fd, ff_jacobian_unchecked, ff_response_unchecked, nf_jacobian, nf_response, FfParams,
    NearFieldModel, NfParams, ParamJacobian, ResponseMatrix, FF_PARAM_LABELS,
};

/// FIMs at or above this equilibrated condition number are rejected.
pub const MAX_FIM_CONDITION: f64 = 1e12;

/// Floor applied to dB mismatch metrics, dB.
pub const MME_FLOOR_DB: f64 = -60.0;

/// Position parameters come first in both orderings.
pub const POSITION_INDICES: [usize; 2] = [0, 1];

#[derive(Debug, Clone)]
pub struct FimMatrix {
    pub matrix: RMatrix,
    pub labels: &'static [&'static str],
}

/// `F_ij = (2/sigma^2) sum_{n,k} Re{ conj(d mu/d eta_i) d mu/d eta_j }`.
pub fn fim(jacobian: &ParamJacobian, sigma2: f64) -> Result<FimMatrix> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    let gram = real_gram(&jacobian.slabs);
    Ok(FimMatrix {
        matrix: gram * (2.0 / sigma2),
        labels: jacobian.labels,
    })
}

/// `G_ij = sum Re{ conj(a_i) b_j }` over all entries.
fn real_gram(slabs: &[CMatrix]) -> RMatrix {
    let p = slabs.len();
    let mut g = RMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = re_inner(&slabs[i], &slabs[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn re_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Position error bound: `sqrt(trace([F^-1]_pos))`.
pub fn peb(fim: &FimMatrix, position_indices: &[usize]) -> Result<f64> {
    let n = fim.matrix.nrows();
    if let Some(&i) = position_indices.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("position index {i} out of range for {n} parameters")));
    }
    let inv = linalg::symmetric_inverse(&fim.matrix, MAX_FIM_CONDITION)?;
    let tr: f64 = position_indices.iter().map(|&i| inv[(i, i)]).sum();
    if !(tr > 0.0) {
        return Err(Error::numerical(format!("position block of inverse FIM has trace {tr}")));
    }
    Ok(tr.sqrt())
}

/// Inverse FIM straight from the Jacobian, through a QR factorisation of the
/// stacked real and imaginary parts.
pub fn inverse_fim(jacobian: &ParamJacobian, sigma2: f64) -> Result<RMatrix> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    let entries = jacobian.slabs.first().map_or(0, |s| s.len());
    let w = (2.0 / sigma2).sqrt();
    let a = RMatrix::from_fn(2 * entries, jacobian.n_params(), |r, j| {
        let z = jacobian.slabs[j][r / 2];
        w * if r % 2 == 0 { z.re } else { z.im }
    });
    linalg::gram_inverse(&a, MAX_FIM_CONDITION)
}

/// [`peb`] computed from the Jacobian without forming the FIM.
pub fn peb_from_jacobian(jacobian: &ParamJacobian, sigma2: f64, position_indices: &[usize]) -> Result<f64> {
    let n = jacobian.n_params();
    if let Some(&i) = position_indices.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("position index {i} out of range for {n} parameters")));
    }
    let inv = inverse_fim(jacobian, sigma2)?;
    let tr: f64 = position_indices.iter().map(|&i| inv[(i, i)]).sum();
    if !(tr > 0.0) {
        return Err(Error::numerical(format!("position block of inverse FIM has trace {tr}")));
    }
    Ok(tr.sqrt())
}

/// Coarse search grid and solver controls for [`pseudo_true`].
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoTrueOptions {
    pub theta_points: usize,
    pub tau_points: usize,
    /// Range used to place the delay grid `[tau_min_factor, tau_max_factor] * d / c`
    /// and to pick the delay branch (see [`PseudoTrueResult`]).
    pub reference_range_m: f64,
    pub tau_min_factor: f64,
    pub tau_max_factor: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub hessian: HessianMethod,
}

impl PseudoTrueOptions {
    pub fn for_range(reference_range_m: f64) -> Self {
        Self {
            theta_points: 181,
            tau_points: 256,
            reference_range_m,
            tau_min_factor: 0.2,
            tau_max_factor: 5.0,
            max_iterations: 200,
            restarts: 3,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            hessian: HessianMethod::CentralDifference,
        }
    }
}

/// How the planar second derivatives inside `A` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMethod {
    /// Central differences of the analytic Jacobian.
    CentralDifference,
    Analytic,
}

/// Relative step for differencing the analytic Jacobian.
pub const HESSIAN_FD_STEP: f64 = 1e-6;

/// Least-squares planar fit to a given mean.
///
/// Multiplying the planar response by `exp(-j 2 pi f_k m / df)` for integer
/// `m` is a constant phase that the complex gain absorbs, so the delay is only
/// identifiable modulo `1/df`. The reported delay is the representative
/// closest to `reference_range_m / c`.
#[derive(Debug, Clone)]
pub struct PseudoTrueResult {
    pub params: FfParams,
    /// `sum_k |mu_k - mu~_k|^2`.
    pub residual: f64,
    /// `delta = mu - mu~(eta_0)`.
    pub mismatch: CMatrix,
    pub iterations: usize,
    /// Gradient norm in solver coordinates divided by the signal energy.
    pub gradient_norm: f64,
    pub starts_used: usize,
}

struct FitProblem<'a> {
    geom: &'a ArrayGeometry,
    grid: &'a OfdmGrid,
    target: &'a CMatrix,
    /// Solver coordinates are `(theta, tau * tau_scale, h_re / g_scale, h_im / g_scale)`
    /// where `h = g exp(-j 2 pi f_c tau)` is the gain seen at the carrier.
    /// With `h` held fixed the delay only moves the phase across the band,
    /// which removes the near-degenerate delay/gain-phase valley.
    tau_scale: f64,
    g_scale: f64,
}

fn carrier_rotation(fc: f64, tau: f64) -> Complex64 {
    let cyc = fc * tau;
    Complex64::from_polar(1.0, -2.0 * PI * (cyc - cyc.round()))
}

impl FitProblem<'_> {
    fn to_params(&self, x: &[f64; 4]) -> FfParams {
        let tau = x[1] / self.tau_scale;
        let h = Complex64::new(x[2], x[3]) * self.g_scale;
        let g = h / carrier_rotation(self.grid.carrier_hz(), tau);
        FfParams::from_array([x[0], tau, g.re, g.im])
    }

    fn from_params(&self, p: &FfParams) -> [f64; 4] {
        let h = p.gain * carrier_rotation(self.grid.carrier_hz(), p.delay_s) / self.g_scale;
        [p.aoa_rad, p.delay_s * self.tau_scale, h.re, h.im]
    }

    fn residual(&self, x: &[f64; 4]) -> (CMatrix, f64) {
        let mu = ff_response_unchecked(self.geom, self.grid, &self.to_params(x));
        let delta = self.target - mu.matrix();
        let cost = delta.iter().map(|z| z.norm_sqr()).sum();
        (delta, cost)
    }

    /// Gauss-Newton normal matrix and `J^T r` in solver coordinates.
    fn linearise(&self, x: &[f64; 4], delta: &CMatrix) -> (RMatrix, [f64; 4]) {
        let p = self.to_params(x);
        let jac = ff_jacobian_unchecked(self.geom, self.grid, &p);
        let [j_theta, j_tau, j_re, j_im]: [CMatrix; 4] = jac.slabs.try_into().expect("four planar parameters");
        let rot = Complex64::from(1.0) / carrier_rotation(self.grid.carrier_hz(), p.delay_s);
        let fc = self.grid.carrier_hz();
        // d mu / d tau at fixed h picks up the carrier term j 2 pi f_c mu
        let d_tau = (j_tau + &j_im * (p.gain * 2.0 * PI * fc)) / Complex64::from(self.tau_scale);
        let slabs = [
            j_theta,
            d_tau,
            j_re * (rot * self.g_scale),
            j_im * (rot * self.g_scale),
        ];
        let jtj = real_gram(&slabs);
        let mut jtr = [0.0; 4];
        for (v, s) in jtr.iter_mut().zip(&slabs) {
            *v = re_inner(s, delta);
        }
        (jtj, jtr)
    }
}

/// Finds the planar parameters whose response is closest to `true_mean`.
///
/// A coarse `(theta, tau)` grid with the gain solved in closed form seeds a
/// damped Gauss-Newton (Levenberg-Marquardt) refinement over all four
/// parameters. On failure the solver restarts from the next-best grid cells.
pub fn pseudo_true(
    true_mean: &ResponseMatrix,
    geom: &ArrayGeometry,
    grid: &OfdmGrid,
    opts: &PseudoTrueOptions,
) -> Result<PseudoTrueResult> {
    let target = true_mean.matrix();
    if target.nrows() != geom.len() || target.ncols() != grid.len() {
        return Err(Error::invalid("true mean dimensions do not match geometry and grid"));
    }
    if !(opts.reference_range_m > 0.0) || opts.theta_points < 2 || opts.tau_points < 2 {
        return Err(Error::invalid("pseudo-true grid needs a positive reference range and >= 2 points per axis"));
    }
    let energy = true_mean.energy();
    if !(energy > 0.0) {
        return Err(Error::invalid("true mean is identically zero"));
    }
    let cells = coarse_cells(target, geom, grid, opts);
    let starts = pick_starts(&cells, opts.restarts + 1);

    let mut last_err = None;
    for (attempt, &(theta, tau, gain)) in starts.iter().enumerate() {
        let g_scale = gain.norm().max(f64::MIN_POSITIVE);
        let problem = FitProblem {
            geom,
            grid,
            target,
            tau_scale: grid.bandwidth_hz().max(grid.subcarrier_spacing_hz()).max(1.0),
            g_scale,
        };
        let init = FfParams::from_array([theta, tau, gain.re, gain.im]);
        match refine(&problem, init, energy, opts) {
            Ok((params, iterations, gradient_norm)) => {
                let params = canonical_branch(geom, grid, params, opts.reference_range_m);
                if params.validate().is_err() {
                    last_err = Some(Error::numerical(format!("fit left the planar domain: {params:?}")));
                    continue;
                }
                let mu = ff_response_unchecked(geom, grid, &params);
                let mismatch = target - mu.matrix();
                let residual = mismatch.iter().map(|z| z.norm_sqr()).sum();
                return Ok(PseudoTrueResult {
                    params,
                    residual,
                    mismatch,
                    iterations,
                    gradient_norm,
                    starts_used: attempt + 1,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::numerical("pseudo-true search produced no start points")))
}

struct Cell {
    i: usize,
    j: usize,
    theta: f64,
    tau: f64,
    gain: Complex64,
    residual: f64,
}

/// Grid values in the open interval `(-pi/2, pi/2)`.
fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI / 2.0 + (i + 1) as f64 * PI / (n + 1) as f64).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn coarse_cells(target: &CMatrix, geom: &ArrayGeometry, grid: &OfdmGrid, opts: &PseudoTrueOptions) -> Vec<Cell> {
    let thetas = theta_grid(opts.theta_points);
    let t0 = opts.reference_range_m / SPEED_OF_LIGHT;
    let taus = linspace(opts.tau_min_factor * t0, opts.tau_max_factor * t0, opts.tau_points);
    let f = grid.frequencies();
    let c = geom.centroid();
    let energy: f64 = target.iter().map(|z| z.norm_sqr()).sum();
    let norm_a2 = (geom.len() * grid.len()) as f64;
    let mut cells = Vec::with_capacity(thetas.len() * taus.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let (s, co) = theta.sin_cos();
        // z_k = sum_n conj(spatial_nk) mu_nk
        let z: Vec<Complex64> = (0..f.len())
            .map(|k| {
                geom.elements()
                    .iter()
                    .enumerate()
                    .map(|(n, q)| {
                        let proj = (q.x - c.x) * co + (q.y - c.y) * s;
                        let cyc = f[k] * proj / SPEED_OF_LIGHT;
                        Complex64::from_polar(1.0, -2.0 * PI * (cyc - cyc.round())) * target[(n, k)]
                    })
                    .sum()
            })
            .collect();
        for (j, &tau) in taus.iter().enumerate() {
            let inner: Complex64 = (0..f.len())
                .map(|k| {
                    let cyc = f[k] * tau;
                    Complex64::from_polar(1.0, 2.0 * PI * (cyc - cyc.round())) * z[k]
                })
                .sum();
            cells.push(Cell {
                i,
                j,
                theta,
                tau,
                gain: inner / norm_a2,
                residual: energy - inner.norm_sqr() / norm_a2,
            });
        }
    }
    cells
}

/// Best cells, skipping any within two grid steps of an already chosen one.
fn pick_starts(cells: &[Cell], count: usize) -> Vec<(f64, f64, Complex64)> {
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[a].residual.total_cmp(&cells[b].residual));
    let mut chosen: Vec<&Cell> = Vec::new();
    for idx in order {
        let c = &cells[idx];
        let near = chosen
            .iter()
            .any(|o| o.i.abs_diff(c.i) <= 2 && o.j.abs_diff(c.j) <= 2);
        if !near {
            chosen.push(c);
            if chosen.len() == count {
                break;
            }
        }
    }
    chosen.iter().map(|c| (c.theta, c.tau, c.gain)).collect()
}

/// Levenberg-Marquardt refinement. Returns `(params, iterations, relative gradient norm)`.
fn refine(
    problem: &FitProblem<'_>,
    init: FfParams,
    energy: f64,
    opts: &PseudoTrueOptions,
) -> Result<(FfParams, usize, f64)> {
    let mut x = problem.from_params(&init);
    let (mut delta, mut cost) = problem.residual(&x);
    let mut damping = 1e-3;
    for iter in 0..opts.max_iterations {
        let (jtj, jtr) = problem.linearise(&x, &delta);
        let grad_norm = jtr.iter().map(|v| v * v).sum::<f64>().sqrt() / energy;
        if grad_norm <= opts.gradient_tolerance {
            return Ok((problem.to_params(&x), iter, grad_norm));
        }
        let mut accepted = false;
        while damping <= 1e16 {
            let mut lhs = jtj.clone();
            for d in 0..4 {
                lhs[(d, d)] += damping * jtj[(d, d)].max(f64::MIN_POSITIVE);
            }
            let rhs = nalgebra::DVector::from_row_slice(&jtr);
            let step = match lhs.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let trial = [x[0] + step[0], x[1] + step[1], x[2] + step[2], x[3] + step[3]];
            let step_norm = step.norm();
            let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let (trial_delta, trial_cost) = problem.residual(&trial);
            if trial_cost <= cost && trial[0].abs() < PI / 2.0 {
                x = trial;
                delta = trial_delta;
                cost = trial_cost;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if step_norm <= opts.step_tolerance * (1.0 + x_norm) {
                    let (_, jtr) = problem.linearise(&x, &delta);
                    let g = jtr.iter().map(|v| v * v).sum::<f64>().sqrt() / energy;
                    return Ok((problem.to_params(&x), iter + 1, g));
                }
                break;
            }
            if step_norm <= opts.step_tolerance * (1.0 + x_norm) {
                // no representable improvement left
                return Ok((problem.to_params(&x), iter + 1, grad_norm));
            }
            damping *= 10.0;
        }
        if !accepted {
            return Err(Error::numerical(format!(
                "Gauss-Newton stalled at iteration {iter} (relative gradient {grad_norm:.3e})"
            )));
        }
    }
    Err(Error::numerical(format!(
        "pseudo-true fit did not converge in {} iterations",
        opts.max_iterations
    )))
}

/// Moves `tau` by whole periods `1/df` toward the reference delay and
/// compensates the gain so that the response is unchanged.
fn canonical_branch(geom: &ArrayGeometry, grid: &OfdmGrid, p: FfParams, reference_range_m: f64) -> FfParams {
    let _ = geom;
    if grid.len() < 2 {
        return p;
    }
    let df = grid.subcarrier_spacing_hz();
    let tau_ref = reference_range_m / SPEED_OF_LIGHT;
    let m = ((p.delay_s - tau_ref) * df).round();
    if m == 0.0 {
        return p;
    }
    // mu(tau - m/df) = mu(tau) * exp(+j 2 pi f_k m / df) and f_k/df = f_0/df + k
    let f0 = grid.frequencies()[0];
    let cyc = m * f0 / df;
    let comp = Complex64::from_polar(1.0, -2.0 * PI * (cyc - cyc.round()));
    FfParams {
        aoa_rad: p.aoa_rad,
        delay_s: p.delay_s - m / df,
        gain: p.gain * comp,
    }
}

/// The `A` and `B` matrices of the misspecified bound.
#[derive(Debug, Clone)]
pub struct MisspecifiedBound {
    pub a: RMatrix,
    pub b: RMatrix,
}

/// `A_ij = (2/s2) sum Re{H_ij^H delta - J_i^H J_j}`,
/// `B_ij = (4/s2^2) u_i u_j + (2/s2) sum Re{J_i^H J_j}` with `u_i = sum Re{J_i^H delta}`.
pub fn mcrlb(
    geom: &ArrayGeometry,
    grid: &OfdmGrid,
    fit: &PseudoTrueResult,
    sigma2: f64,
    hessian: HessianMethod,
) -> Result<MisspecifiedBound> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    let p = &fit.params;
    let jac = ff_jacobian_unchecked(geom, grid, p);
    let h = match hessian {
        HessianMethod::CentralDifference => ff_hessian_fd(geom, grid, p, HESSIAN_FD_STEP),
        HessianMethod::Analytic => ff_hessian(geom, grid, p),
    };
    let delta = &fit.mismatch;
    let gram = real_gram(&jac.slabs);
    let u: Vec<f64> = jac.slabs.iter().map(|s| re_inner(s, delta)).collect();
    let np = jac.n_params();
    let a = RMatrix::from_fn(np, np, |i, j| (2.0 / sigma2) * (re_inner(&h[i][j], delta) - gram[(i, j)]));
    let b = RMatrix::from_fn(np, np, |i, j| {
        4.0 / (sigma2 * sigma2) * u[i] * u[j] + (2.0 / sigma2) * gram[(i, j)]
    });
    // surface a singular A now rather than in the bound
    linalg::symmetric_inverse(&a, MAX_FIM_CONDITION)?;
    Ok(MisspecifiedBound { a, b })
}

/// Sandwich covariance `A^-1 B A^-1` in the planar parameter ordering.
pub fn sandwich(bound: &MisspecifiedBound) -> Result<RMatrix> {
    let a_inv = linalg::symmetric_inverse(&bound.a, MAX_FIM_CONDITION)?;
    let m = &a_inv * &bound.b * &a_inv;
    let t = m.transpose();
    Ok((m + t) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchedPositionBound {
    pub lb_mm_m: f64,
    pub bias_m: f64,
    /// `trace(T M T^T)`, the variance part.
    pub variance_m2: f64,
}

/// `sqrt(trace(T [A^-1 B A^-1]_(theta,tau) T^T) + |p~ - p|^2)`.
pub fn mismatched_position_bound(
    bound: &MisspecifiedBound,
    params: &FfParams,
    centroid: &Point,
    p_true: &Point,
) -> Result<MismatchedPositionBound> {
    let m = sandwich(bound)?;
    let variance_m2 = position_variance(&m, params);
    let bias_m = nalgebra::distance(&params.implied_position(centroid), p_true);
    Ok(MismatchedPositionBound {
        lb_mm_m: (variance_m2 + bias_m * bias_m).sqrt(),
        bias_m,
        variance_m2,
    })
}

fn position_variance(cov: &RMatrix, params: &FfParams) -> f64 {
    let t = params.position_jacobian();
    let mut tr = 0.0;
    for row in t {
        for a in 0..2 {
            for b in 0..2 {
                tr += row[a] * cov[(a, b)] * row[b];
            }
        }
    }
    tr
}

/// Position bound of the planar model itself, through `p = c tau (cos, sin)`.
pub fn ff_position_peb(geom: &ArrayGeometry, grid: &OfdmGrid, params: &FfParams, sigma2: f64) -> Result<f64> {
    params.validate()?;
    let inv = inverse_fim(&ff_jacobian_unchecked(geom, grid, params), sigma2)?;
    let v = position_variance(&inv, params);
    if !(v > 0.0) {
        return Err(Error::numerical("planar position variance is not positive"));
    }
    Ok(v.sqrt())
}

/// `10 log10(|lb - peb| / peb)`, floored at [`MME_FLOOR_DB`].
pub fn mme(lb_mm_m: f64, peb_m: f64) -> f64 {
    let x = (lb_mm_m - peb_m).abs() / peb_m;
    if x.is_nan() {
        return f64::NAN;
    }
    let floor = 10f64.powf(MME_FLOOR_DB / 10.0);
    10.0 * x.max(floor).log10()
}

/// One scenario point of the localisation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub peb_m: f64,
    pub lb_mm_m: f64,
    pub bias_m: f64,
    pub mme_db: f64,
    pub pseudo_true: FfParams,
    pub iterations: usize,
}

/// Array, band, noise and transmit amplitude of a localisation study.
#[derive(Debug, Clone)]
pub struct LocalizationSetup {
    pub geom: ArrayGeometry,
    pub grid: OfdmGrid,
    pub sigma2: f64,
    /// Complex gain of the source; `sqrt(P/K)` for total power `P` over `K` subcarriers.
    pub gain: Complex64,
    /// Solver settings; `reference_range_m` is replaced by the range of each
    /// analysed point.
    pub solver: PseudoTrueOptions,
}

impl LocalizationSetup {
    fn options(&self, p: &Point) -> PseudoTrueOptions {
        let range = nalgebra::distance(p, &self.geom.centroid());
        PseudoTrueOptions {
            reference_range_m: range,
            ..self.solver.clone()
        }
    }

    /// CRLB of the true near-field model at `p`.
    pub fn nf_peb(&self, p: &Point) -> Result<f64> {
        let params = NfParams::new(*p, self.gain);
        let jac = nf_jacobian(&self.geom, &self.grid, &params, NearFieldModel::SwmSns)?;
        peb_from_jacobian(&jac, self.sigma2, &POSITION_INDICES)
    }

    /// Full pipeline: NF truth, planar fit, misspecified bound, MME.
    pub fn analyze(&self, p: &Point) -> Result<BoundReport> {
        let params = NfParams::new(*p, self.gain);
        let mean = nf_response(&self.geom, &self.grid, &params, NearFieldModel::SwmSns)?;
        let peb_m = self.nf_peb(p)?;
        let fit = pseudo_true(&mean, &self.geom, &self.grid, &self.options(p))?;
        let bound = mcrlb(&self.geom, &self.grid, &fit, self.sigma2, self.solver.hessian)?;
        let mm = mismatched_position_bound(&bound, &fit.params, &self.geom.centroid(), p)?;
        Ok(BoundReport {
            peb_m,
            lb_mm_m: mm.lb_mm_m,
            bias_m: mm.bias_m,
            mme_db: mme(mm.lb_mm_m, peb_m),
            pseudo_true: fit.params,
            iterations: fit.iterations,
        })
    }

    /// Pipeline with planar truth; the mismatched bound must collapse to the
    /// planar PEB. Returns `(planar PEB, mismatched result)`.
    pub fn analyze_planar_truth(&self, truth: &FfParams) -> Result<(f64, MismatchedPositionBound)> {
        let mean = crate::wavefront::ff_response(&self.geom, &self.grid, truth)?;
        let centroid = self.geom.centroid();
        let p_true = truth.implied_position(&centroid);
        let fit = pseudo_true(&mean, &self.geom, &self.grid, &self.options(&p_true))?;
        let bound = mcrlb(&self.geom, &self.grid, &fit, self.sigma2, self.solver.hessian)?;
        let mm = mismatched_position_bound(&bound, &fit.params, &centroid, &p_true)?;
        Ok((ff_position_peb(&self.geom, &self.grid, truth, self.sigma2)?, mm))
    }
}

pub fn ff_labels() -> &'static [&'static str] {
    &FF_PARAM_LABELS
}
