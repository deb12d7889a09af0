//! Array responses over an OFDM grid.
//!
//! Three manifolds are provided: the planar far-field (FF) response, the
//! spherical wave model (SWM) with a single amplitude for the whole array,
//! and SWM with spatial non-stationarity (SNS), where every antenna sees its
//! own free-space amplitude `lambda_c / (4 pi d_n)`.
//!
//! Sign convention: a path of length `d` contributes `exp(-j 2 pi f d / c)`.
//! The planar inter-element term is referenced to the array centroid.

use std::f64::consts::PI;

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, OfdmGrid, Point, EXCLUSION_RADIUS_M, SPEED_OF_LIGHT};
use crate::linalg::CMatrix;

pub const NF_PARAM_LABELS: [&str; 4] = ["x", "y", "g_re", "g_im"];
pub const FF_PARAM_LABELS: [&str; 4] = ["theta", "tau", "g_re", "g_im"];

/// Which spherical model to use for a near-field response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearFieldModel {
    /// Spherical phase, one amplitude for every antenna.
    Swm,
    /// Spherical phase and per-antenna amplitude.
    SwmSns,
}

/// Near-field parameters `(x, y, g_re, g_im)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfParams {
    pub position: Point,
    pub gain: Complex64,
}

impl NfParams {
    pub fn new(position: Point, gain: Complex64) -> Self {
        Self { position, gain }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.position.x, self.position.y, self.gain.re, self.gain.im]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(Point::new(v[0], v[1]), Complex64::new(v[2], v[3]))
    }
}

/// Far-field parameters `(theta, tau, g_re, g_im)`. `theta` is measured from
/// array boresight (+x for a y-axis ULA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfParams {
    pub aoa_rad: f64,
    pub delay_s: f64,
    pub gain: Complex64,
}

impl FfParams {
    pub fn new(aoa_rad: f64, delay_s: f64, gain: Complex64) -> Result<Self> {
        let p = Self {
            aoa_rad,
            delay_s,
            gain,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aoa_rad.abs() < PI / 2.0) {
            return Err(Error::invalid(format!(
                "AoA must lie in (-pi/2, pi/2), got {}",
                self.aoa_rad
            )));
        }
        if !(self.delay_s.is_finite() && self.delay_s > 0.0) {
            return Err(Error::invalid(format!("delay must be > 0, got {}", self.delay_s)));
        }
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::invalid("gain must be finite"));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.aoa_rad, self.delay_s, self.gain.re, self.gain.im]
    }

    /// Unchecked constructor for solver iterates.
    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            aoa_rad: v[0],
            delay_s: v[1],
            gain: Complex64::new(v[2], v[3]),
        }
    }

    /// Position implied by the planar parameters: `c tau (cos theta, sin theta)`,
    /// relative to the array centroid.
    pub fn implied_position(&self, centroid: &Point) -> Point {
        let r = SPEED_OF_LIGHT * self.delay_s;
        Point::new(
            centroid.x + r * self.aoa_rad.cos(),
            centroid.y + r * self.aoa_rad.sin(),
        )
    }

    /// Jacobian of [`Self::implied_position`] with respect to `(theta, tau)`.
    pub fn position_jacobian(&self) -> [[f64; 2]; 2] {
        let r = SPEED_OF_LIGHT * self.delay_s;
        let (s, c) = self.aoa_rad.sin_cos();
        [[-r * s, SPEED_OF_LIGHT * c], [r * c, SPEED_OF_LIGHT * s]]
    }
}

/// Complex mean `mu[n][k]` (antennas by subcarriers).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix(CMatrix);

impl ResponseMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::numerical("response has non-finite entries"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn n_antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, n: usize, k: usize) -> Complex64 {
        self.0[(n, k)]
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Subcarrier `k` as a vector over antennas.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        self.0.column(k).iter().copied().collect()
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self(self.0.map(|z| z * alpha))
    }
}

/// `exp(j 2 pi cycles)` with the integer part of `cycles` removed first.
fn cis_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, 2.0 * PI * frac)
}

fn carrier_wavelength(grid: &OfdmGrid) -> f64 {
    SPEED_OF_LIGHT / grid.carrier_hz()
}

fn centroid_distance(geom: &ArrayGeometry, p: &Point) -> Result<f64> {
    let d0 = nalgebra::distance(p, &geom.centroid());
    if d0 < EXCLUSION_RADIUS_M {
        return Err(Error::DegenerateGeometry(
            "source coincides with the array centroid".into(),
        ));
    }
    Ok(d0)
}

/// Near-field response. SNS on: `A_n = lambda_c/(4 pi d_n)`; off: every antenna
/// uses `lambda_c/(4 pi d_0)` with `d_0` the distance to the centroid.
pub fn nf_response(
    geom: &ArrayGeometry,
    grid: &OfdmGrid,
    params: &NfParams,
    model: NearFieldModel,
) -> Result<ResponseMatrix> {
    let d = geom.distances(&params.position)?;
    let lambda_c = carrier_wavelength(grid);
    let amp: Vec<f64> = match model {
        NearFieldModel::SwmSns => d.iter().map(|&dn| lambda_c / (4.0 * PI * dn)).collect(),
        NearFieldModel::Swm => {
            let d0 = centroid_distance(geom, &params.position)?;
            vec![lambda_c / (4.0 * PI * d0); d.len()]
        }
    };
    let f = grid.frequencies();
    let m = CMatrix::from_fn(d.len(), f.len(), |n, k| {
        params.gain * amp[n] * cis_cycles(-f[k] * d[n] / SPEED_OF_LIGHT)
    });
    ResponseMatrix::new(m)
}

/// Projections of element offsets (from the centroid) on the arrival
/// direction and on its derivative with respect to theta.
fn planar_offsets(geom: &ArrayGeometry, aoa: f64) -> (Vec<f64>, Vec<f64>) {
    let c = geom.centroid();
    let (s, co) = aoa.sin_cos();
    let u = Vector2::new(co, s);
    let du = Vector2::new(-s, co);
    geom.elements()
        .iter()
        .map(|q| {
            let v = q - c;
            (v.dot(&u), v.dot(&du))
        })
        .unzip()
}

fn ff_unit(geom: &ArrayGeometry, grid: &OfdmGrid, aoa: f64, delay: f64) -> CMatrix {
    let (proj, _) = planar_offsets(geom, aoa);
    let f = grid.frequencies();
    CMatrix::from_fn(proj.len(), f.len(), |n, k| {
        cis_cycles(f[k] * (proj[n] / SPEED_OF_LIGHT - delay))
    })
}

/// Planar response `g exp(-j 2 pi f_k tau) exp(+j 2 pi y_n sin(theta) / lambda_k)`.
pub fn ff_response(geom: &ArrayGeometry, grid: &OfdmGrid, params: &FfParams) -> Result<ResponseMatrix> {
    params.validate()?;
    Ok(ff_response_unchecked(geom, grid, params))
}

pub(crate) fn ff_response_unchecked(
    geom: &ArrayGeometry,
    grid: &OfdmGrid,
    params: &FfParams,
) -> ResponseMatrix {
    ResponseMatrix(ff_unit(geom, grid, params.aoa_rad, params.delay_s) * params.gain)
}

/// Partial derivatives of a response, one `N x K` slab per parameter.
#[derive(Debug, Clone)]
pub struct ParamJacobian {
    pub slabs: Vec<CMatrix>,
    pub labels: &'static [&'static str],
}

impl ParamJacobian {
    pub fn n_params(&self) -> usize {
        self.slabs.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ModelParams {
    Nf(NfParams, NearFieldModel),
    Ff(FfParams),
}

/// Analytic Jacobian, ordered `(x, y, g_re, g_im)` or `(theta, tau, g_re, g_im)`.
pub fn response_jacobian(
    geom: &ArrayGeometry,
    grid: &OfdmGrid,
    params: &ModelParams,
) -> Result<ParamJacobian> {
    match params {
        ModelParams::Nf(p, model) => nf_jacobian(geom, grid, p, *model),
        ModelParams::Ff(p) => {
            p.validate()?;
            Ok(ff_jacobian_unchecked(geom, grid, p))
        }
    }
}

pub fn nf_jacobian(
    geom: &ArrayGeometry,
    grid: &OfdmGrid,
    params: &NfParams,
    model: NearFieldModel,
) -> Result<ParamJacobian> {
    let p = params.position;
    let d = geom.distances(&p)?;
    let unit = nf_response(geom, grid, &NfParams::new(p, Complex64::new(1.0, 0.0)), model)?.0;
    let mu = &unit * params.gain;
    let f = grid.frequencies();
    let q = geom.elements();
    // d(ln A_n)/dx, d(ln A_n)/dy
    let dlog_amp: Vec<[f64; 2]> = match model {
        NearFieldModel::SwmSns => q
            .iter()
            .zip(&d)
            .map(|(qn, &dn)| [-(p.x - qn.x) / (dn * dn), -(p.y - qn.y) / (dn * dn)])
            .collect(),
        NearFieldModel::Swm => {
            let c = geom.centroid();
            let d0 = centroid_distance(geom, &p)?;
            vec![[-(p.x - c.x) / (d0 * d0), -(p.y - c.y) / (d0 * d0)]; q.len()]
        }
    };
    let slab = |axis: usize| {
        CMatrix::from_fn(q.len(), f.len(), |n, k| {
            let dd = if axis == 0 { (p.x - q[n].x) / d[n] } else { (p.y - q[n].y) / d[n] };
            let factor = Complex64::new(dlog_amp[n][axis], -2.0 * PI * f[k] / SPEED_OF_LIGHT * dd);
            mu[(n, k)] * factor
        })
    };
    Ok(ParamJacobian {
        slabs: vec![slab(0), slab(1), unit.clone(), unit * Complex64::i()],
        labels: &NF_PARAM_LABELS,
    })
}

pub(crate) fn ff_jacobian_unchecked(geom: &ArrayGeometry, grid: &OfdmGrid, params: &FfParams) -> ParamJacobian {
    let unit = ff_unit(geom, grid, params.aoa_rad, params.delay_s);
    let mu = &unit * params.gain;
    let (_, dproj) = planar_offsets(geom, params.aoa_rad);
    let f = grid.frequencies();
    let n_ant = dproj.len();
    let d_theta = CMatrix::from_fn(n_ant, f.len(), |n, k| {
        mu[(n, k)] * Complex64::new(0.0, 2.0 * PI * f[k] * dproj[n] / SPEED_OF_LIGHT)
    });
    let d_tau = CMatrix::from_fn(n_ant, f.len(), |n, k| {
        mu[(n, k)] * Complex64::new(0.0, -2.0 * PI * f[k])
    });
    ParamJacobian {
        slabs: vec![d_theta, d_tau, unit.clone(), unit * Complex64::i()],
        labels: &FF_PARAM_LABELS,
    }
}

/// Second derivatives `H[i][j]` of the planar response, closed form.
pub fn ff_hessian(geom: &ArrayGeometry, grid: &OfdmGrid, params: &FfParams) -> Vec<Vec<CMatrix>> {
    let unit = ff_unit(geom, grid, params.aoa_rad, params.delay_s);
    let mu = &unit * params.gain;
    let (proj, dproj) = planar_offsets(geom, params.aoa_rad);
    let f = grid.frequencies();
    let (n_ant, n_sc) = (proj.len(), f.len());
    // phase derivatives; d2 phi / dtheta2 = -2 pi f proj / c, other second derivatives vanish
    let phi_theta = |n: usize, k: usize| 2.0 * PI * f[k] * dproj[n] / SPEED_OF_LIGHT;
    let phi_tau = |k: usize| -2.0 * PI * f[k];
    let phi_tt = |n: usize, k: usize| -2.0 * PI * f[k] * proj[n] / SPEED_OF_LIGHT;
    let j = Complex64::i();
    let zero = CMatrix::zeros(n_ant, n_sc);
    let h00 = CMatrix::from_fn(n_ant, n_sc, |n, k| {
        mu[(n, k)] * (j * phi_tt(n, k) - phi_theta(n, k).powi(2))
    });
    let h01 = CMatrix::from_fn(n_ant, n_sc, |n, k| mu[(n, k)] * (-phi_theta(n, k) * phi_tau(k)));
    let h11 = CMatrix::from_fn(n_ant, n_sc, |n, k| mu[(n, k)] * (-phi_tau(k).powi(2)));
    let h02 = CMatrix::from_fn(n_ant, n_sc, |n, k| unit[(n, k)] * j * phi_theta(n, k));
    let h03 = CMatrix::from_fn(n_ant, n_sc, |n, k| unit[(n, k)] * (-phi_theta(n, k)));
    let h12 = CMatrix::from_fn(n_ant, n_sc, |n, k| unit[(n, k)] * j * phi_tau(k));
    let h13 = CMatrix::from_fn(n_ant, n_sc, |n, k| unit[(n, k)] * (-phi_tau(k)));
    vec![
        vec![h00, h01.clone(), h02.clone(), h03.clone()],
        vec![h01, h11, h12.clone(), h13.clone()],
        vec![h02, h12, zero.clone(), zero.clone()],
        vec![h03, h13, zero.clone(), zero],
    ]
}

/// Per-parameter finite-difference steps: `rel` times a characteristic scale
/// of each parameter (shortest wavelength for positions, one radian for the
/// angle, one period of the highest subcarrier for the delay, `|g|` for gains).
pub fn fd_steps(grid: &OfdmGrid, params: &ModelParams, rel: f64) -> [f64; 4] {
    let fmax = grid.max_frequency_hz();
    let lambda_min = SPEED_OF_LIGHT / fmax;
    let (scales, gain) = match params {
        ModelParams::Nf(p, _) => ([lambda_min, lambda_min], p.gain.norm()),
        ModelParams::Ff(p) => ([1.0, 1.0 / fmax], p.gain.norm()),
    };
    let g = if gain > 0.0 { gain } else { 1.0 };
    [rel * scales[0], rel * scales[1], rel * g, rel * g]
}

/// Second derivatives of the planar response by central differences of the
/// analytic Jacobian, symmetrised.
pub fn ff_hessian_fd(geom: &ArrayGeometry, grid: &OfdmGrid, params: &FfParams, rel_step: f64) -> Vec<Vec<CMatrix>> {
    let steps = fd_steps(grid, &ModelParams::Ff(*params), rel_step);
    let base = params.to_array();
    let diffs: Vec<Vec<CMatrix>> = (0..4)
        .map(|i| {
            let mut plus = base;
            let mut minus = base;
            plus[i] += steps[i];
            minus[i] -= steps[i];
            let jp = ff_jacobian_unchecked(geom, grid, &FfParams::from_array(plus));
            let jm = ff_jacobian_unchecked(geom, grid, &FfParams::from_array(minus));
            jp.slabs
                .iter()
                .zip(&jm.slabs)
                .map(|(a, b)| (a - b) / Complex64::from(2.0 * steps[i]))
                .collect()
        })
        .collect();
    (0..4)
        .map(|i| {
            (0..4)
                .map(|j| (&diffs[i][j] + &diffs[j][i]) * Complex64::from(0.5))
                .collect()
        })
        .collect()
}

/// Planar parameters pointing at `p` from the array centroid, `tau = d_0 / c`.
pub fn ff_params_toward(geom: &ArrayGeometry, p: &Point, gain: Complex64) -> Result<FfParams> {
    let c = geom.centroid();
    let d0 = centroid_distance(geom, p)?;
    let aoa = (p.y - c.y).atan2(p.x - c.x);
    FfParams::new(aoa, d0 / SPEED_OF_LIGHT, gain)
}

/// Angle between two array manifolds, `acos(|a^H b| / (|a| |b|))` in `[0, pi/2]`.
pub fn manifold_angle(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "manifold lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::invalid("manifold_angle needs non-zero vectors"));
    }
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok((inner.norm() / (na * nb)).clamp(0.0, 1.0).acos())
}
