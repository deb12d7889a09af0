//! JSON scenario configuration.
//!
//! Unknown keys are rejected everywhere and every physical quantity carries
//! its unit in the key name.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{HessianMethod, PseudoTrueOptions};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, NoiseSpec, OfdmGrid, Point};

use super::sweep::{AxisSpec, SweepGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    MmeMap,
    ChestMap,
    SerMap,
    MetricsReport,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::MmeMap => "mme-map",
            ScenarioKind::ChestMap => "chest-map",
            ScenarioKind::SerMap => "ser-map",
            ScenarioKind::MetricsReport => "metrics-report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub array: ArrayConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ofdm: Option<OfdmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue: Option<UeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chest: Option<ChestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ser: Option<SerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blockage: Option<BlockageConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsConfig>,
}

/// Uniform linear array along y, centred at the origin, boresight +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_antennas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_wavelengths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
    pub carrier_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub x: AxisSpec,
    pub y: AxisSpec,
}

/// Rectangular UE antenna grid: `rows` along x, `cols` along y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
}

impl UeConfig {
    /// Antenna positions centred at `centre`, row-major.
    pub fn positions(&self, centre: &Point) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let dx = (r as f64 - (self.rows as f64 - 1.0) / 2.0) * self.spacing_m;
                let dy = (c as f64 - (self.cols as f64 - 1.0) / 2.0) * self.spacing_m;
                out.push(Point::new(centre.x + dx, centre.y + dy));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    /// Expected covariance of the mixed LoS/NLoS channel.
    Mixed,
    /// Sample covariance of the deterministic LoS responses only.
    Los,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChestConfig {
    #[serde(default = "default_pilot_snr_db")]
    pub pilot_snr_db: f64,
    #[serde(default = "default_covariance_model")]
    pub covariance_model: CovarianceKind,
}

fn default_pilot_snr_db() -> f64 {
    15.0
}

fn default_covariance_model() -> CovarianceKind {
    CovarianceKind::Mixed
}

impl Default for ChestConfig {
    fn default() -> Self {
        Self {
            pilot_snr_db: default_pilot_snr_db(),
            covariance_model: default_covariance_model(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerConfig {
    #[serde(default = "default_target_ser")]
    pub target_ser: f64,
    #[serde(default = "default_tol_db")]
    pub tol_db: f64,
    #[serde(default = "default_start_snr_db")]
    pub start_snr_db: f64,
    #[serde(default = "default_vectors_per_draw")]
    pub vectors_per_draw: usize,
}

fn default_target_ser() -> f64 {
    1e-3
}

fn default_tol_db() -> f64 {
    0.25
}

fn default_start_snr_db() -> f64 {
    10.0
}

fn default_vectors_per_draw() -> usize {
    8
}

impl Default for SerConfig {
    fn default() -> Self {
        Self {
            target_ser: default_target_ser(),
            tol_db: default_tol_db(),
            start_snr_db: default_start_snr_db(),
            vectors_per_draw: default_vectors_per_draw(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockageConfig {
    pub correlation_distance_m: f64,
}

impl Default for BlockageConfig {
    fn default() -> Self {
        Self {
            correlation_distance_m: crate::channel::DEFAULT_BLOCKAGE_CORRELATION_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "d_theta_points")]
    pub theta_points: usize,
    #[serde(default = "d_tau_points")]
    pub tau_points: usize,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "d_restarts")]
    pub restarts: usize,
    #[serde(default = "d_gradient_tolerance")]
    pub gradient_tolerance: f64,
    #[serde(default = "d_step_tolerance")]
    pub step_tolerance: f64,
    #[serde(default = "d_hessian")]
    pub hessian: HessianMethod,
}

fn d_theta_points() -> usize {
    181
}
fn d_tau_points() -> usize {
    256
}
fn d_max_iterations() -> usize {
    200
}
fn d_restarts() -> usize {
    3
}
fn d_gradient_tolerance() -> f64 {
    1e-10
}
fn d_step_tolerance() -> f64 {
    1e-12
}
fn d_hessian() -> HessianMethod {
    HessianMethod::CentralDifference
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta_points: d_theta_points(),
            tau_points: d_tau_points(),
            max_iterations: d_max_iterations(),
            restarts: d_restarts(),
            gradient_tolerance: d_gradient_tolerance(),
            step_tolerance: d_step_tolerance(),
            hessian: d_hessian(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self, reference_range_m: f64) -> PseudoTrueOptions {
        PseudoTrueOptions {
            theta_points: self.theta_points,
            tau_points: self.tau_points,
            max_iterations: self.max_iterations,
            restarts: self.restarts,
            gradient_tolerance: self.gradient_tolerance,
            step_tolerance: self.step_tolerance,
            hessian: self.hessian,
            ..PseudoTrueOptions::for_range(reference_range_m)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default)]
    pub probe_positions_m: Vec<[f64; 2]>,
    /// Boresight probes at these multiples of the Fraunhofer distance.
    #[serde(default)]
    pub probe_fraunhofer_multiples: Vec<f64>,
    pub snr_db: f64,
    pub n_draws: usize,
    pub n_capacity_draws: usize,
    #[serde(default = "d_dof_threshold")]
    pub dof_threshold: f64,
}

fn d_dof_threshold() -> f64 {
    crate::metrics::DEFAULT_DOF_THRESHOLD
}

fn need<'a, T>(v: &'a Option<T>, key: &str, kind: ScenarioKind) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::config(key, format!("required for kind `{}`", kind.as_str())))
}

fn positive(v: f64, key: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be a finite value > 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            // name the offending key itself, not only its parent
            let key = match unknown_field(&msg) {
                Some(f) if !path.ends_with(&f) => match path.as_str() {
                    "." | "" => f,
                    _ => format!("{path}.{f}"),
                },
                _ => path,
            };
            Error::config(key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let a = &self.array;
        let g = match (a.spacing_wavelengths, a.spacing_m) {
            (Some(s), None) => ArrayGeometry::ula_wavelengths(a.n_antennas, s, a.carrier_hz),
            (None, Some(s)) => ArrayGeometry::ula(a.n_antennas, s, a.carrier_hz),
            _ => {
                return Err(Error::config(
                    "array",
                    "exactly one of `spacing_wavelengths` and `spacing_m` must be given",
                ))
            }
        };
        g.map_err(|e| Error::config("array", e.to_string()))
    }

    pub fn ofdm_grid(&self) -> Result<OfdmGrid> {
        let o = need(&self.ofdm, "ofdm", self.kind)?;
        OfdmGrid::new(o.n_subcarriers, self.array.carrier_hz, o.bandwidth_hz).map_err(|e| Error::config("ofdm", e.to_string()))
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let p = need(&self.power, "power", self.kind)?;
        Ok(NoiseSpec::new(p.noise_psd_dbm_per_hz, p.noise_figure_db))
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let s = need(&self.sweep, "sweep", self.kind)?;
        SweepGrid::new(s.x.clone(), s.y.clone())
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }

    pub fn chest_config(&self) -> ChestConfig {
        self.chest.clone().unwrap_or_default()
    }

    pub fn ser_config(&self) -> SerConfig {
        self.ser.clone().unwrap_or_default()
    }

    pub fn blockage_config(&self) -> BlockageConfig {
        self.blockage.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.array.carrier_hz, "array.carrier_hz")?;
        if self.array.n_antennas == 0 {
            return Err(Error::config("array.n_antennas", "must be >= 1"));
        }
        if let Some(s) = self.array.spacing_wavelengths {
            positive(s, "array.spacing_wavelengths")?;
        }
        if let Some(s) = self.array.spacing_m {
            positive(s, "array.spacing_m")?;
        }
        self.geometry()?;
        if let Some(o) = &self.ofdm {
            if o.n_subcarriers == 0 {
                return Err(Error::config("ofdm.n_subcarriers", "must be >= 1"));
            }
            positive(o.bandwidth_hz, "ofdm.bandwidth_hz")?;
        }
        if let Some(s) = &self.sweep {
            s.x.validate("sweep.x")?;
            s.y.validate("sweep.y")?;
        }
        if let Some(u) = &self.ue {
            if u.rows == 0 || u.cols == 0 {
                return Err(Error::config("ue", "rows and cols must be >= 1"));
            }
            positive(u.spacing_m, "ue.spacing_m")?;
        }
        if let Some(b) = &self.blockage {
            positive(b.correlation_distance_m, "blockage.correlation_distance_m")?;
        }
        if let Some(s) = &self.ser {
            if !(s.target_ser > 0.0 && s.target_ser < 0.5) {
                return Err(Error::config("ser.target_ser", "must lie in (0, 0.5)"));
            }
            positive(s.tol_db, "ser.tol_db")?;
            if s.vectors_per_draw == 0 {
                return Err(Error::config("ser.vectors_per_draw", "must be >= 1"));
            }
        }
        if let Some(c) = &self.chest {
            if !c.pilot_snr_db.is_finite() {
                return Err(Error::config("chest.pilot_snr_db", "must be finite"));
            }
        }
        if let Some(s) = &self.solver {
            if s.theta_points < 2 || s.tau_points < 2 {
                return Err(Error::config("solver", "grid needs >= 2 points per axis"));
            }
            if s.max_iterations == 0 {
                return Err(Error::config("solver.max_iterations", "must be >= 1"));
            }
        }
        match self.kind {
            ScenarioKind::MmeMap => {
                need(&self.ofdm, "ofdm", self.kind)?;
                need(&self.power, "power", self.kind)?;
                need(&self.sweep, "sweep", self.kind)?;
            }
            ScenarioKind::ChestMap => {
                need(&self.sweep, "sweep", self.kind)?;
                need(&self.ue, "ue", self.kind)?;
            }
            ScenarioKind::SerMap => {
                need(&self.sweep, "sweep", self.kind)?;
                need(&self.ue, "ue", self.kind)?;
            }
            ScenarioKind::MetricsReport => {
                need(&self.ue, "ue", self.kind)?;
                let m = need(&self.metrics, "metrics", self.kind)?;
                if m.probe_positions_m.is_empty() && m.probe_fraunhofer_multiples.is_empty() {
                    return Err(Error::config("metrics", "no probe positions given"));
                }
                if m.n_draws < 100 {
                    return Err(Error::config("metrics.n_draws", "must be >= 100"));
                }
                if m.n_capacity_draws == 0 {
                    return Err(Error::config("metrics.n_capacity_draws", "must be >= 1"));
                }
                if !(m.dof_threshold > 0.0 && m.dof_threshold < 1.0) {
                    return Err(Error::config("metrics.dof_threshold", "must lie in (0, 1)"));
                }
                for (i, k) in m.probe_fraunhofer_multiples.iter().enumerate() {
                    positive(*k, &format!("metrics.probe_fraunhofer_multiples[{i}]"))?;
                }
            }
        }
        Ok(())
    }
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg
        .strip_prefix("unknown field `")
        .or_else(|| msg.strip_prefix("missing field `"))?;
    Some(rest[..rest.find('`')?].to_string())
}
