//! Scenario engines: one function per scenario kind, each returning a table
//! with one row per sweep cell (or probe).

use num_complex::Complex64;
use serde::Serialize;

use crate::bounds::{BoundReport, LocalizationSetup};
use crate::channel::{self, FfRayleighSampler, NfMixedSampler};
use crate::error::{Error, Result};
use crate::estimators::{self, SerOptions, SnrSearchOptions};
use crate::geometry::{db_to_linear, dbm_to_watts, ArrayGeometry, OfdmGrid, Point, SPEED_OF_LIGHT};
use crate::metrics;
use crate::rng::{self, tags};
use crate::wavefront::{self, ff_response, FfParams};

use super::config::{CovarianceKind, ScenarioConfig, ScenarioKind};
use super::sweep::par_map_cells;

/// Largest share of failed cells a run tolerates, percent.
pub const FAILURE_LIMIT_PERCENT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub x_m: f64,
    pub y_m: f64,
    pub value: f64,
    pub extras: Vec<f64>,
    /// `None` for a successful cell, otherwise the failure category.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioTable {
    pub kind: ScenarioKind,
    pub extra_columns: Vec<&'static str>,
    pub rows: Vec<CellRow>,
}

impl ScenarioTable {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.flag.is_some()).count()
    }

    /// Errors with [`Error::RunFailure`] when more than
    /// [`FAILURE_LIMIT_PERCENT`] of the rows failed. In SNR maps a cell whose
    /// target is unreachable inside the search range is a result, not a failure.
    pub fn check_failures(&self) -> Result<()> {
        let failed = self
            .rows
            .iter()
            .filter(|r| match r.flag.as_deref() {
                None => false,
                Some("no-solution") => self.kind != ScenarioKind::SerMap,
                Some(_) => true,
            })
            .count();
        let total = self.rows.len();
        if failed as f64 > FAILURE_LIMIT_PERCENT / 100.0 * total as f64 {
            return Err(Error::RunFailure {
                failed,
                total,
                limit_percent: FAILURE_LIMIT_PERCENT,
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; all cores when `None`. Results do not depend on it.
    pub threads: Option<usize>,
}

pub fn failure_flag(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::DegenerateGeometry(_) => "degenerate-geometry",
        Error::NumericalFailure(_) => "numerical-failure",
        Error::NoSolution(_) => "no-solution",
        Error::Config { .. } => "config",
        Error::RunFailure { .. } => "run-failure",
        Error::Io(_) => "io",
    }
}

fn row(p: &Point, res: Result<(f64, Vec<f64>)>, n_extra: usize) -> CellRow {
    match res {
        Ok((value, extras)) => CellRow {
            x_m: p.x,
            y_m: p.y,
            value,
            extras,
            flag: None,
        },
        Err(e) => CellRow {
            x_m: p.x,
            y_m: p.y,
            value: f64::NAN,
            extras: vec![f64::NAN; n_extra],
            flag: Some(failure_flag(&e).to_string()),
        },
    }
}

/// Dispatches on `cfg.kind`.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioTable> {
    match cfg.kind {
        ScenarioKind::MmeMap => run_mme_map(cfg, opts),
        ScenarioKind::ChestMap => run_chest_map(cfg, opts),
        ScenarioKind::SerMap => run_ser_map(cfg, opts),
        ScenarioKind::MetricsReport => run_metrics_report(cfg, opts),
    }
}

fn expect_kind(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::config(
            "kind",
            format!("expected `{}`, got `{}`", kind.as_str(), cfg.kind.as_str()),
        ));
    }
    Ok(())
}

/// Localisation setup described by an mme-map config.
pub fn localization_setup(cfg: &ScenarioConfig) -> Result<LocalizationSetup> {
    let geom = cfg.geometry()?;
    let grid = cfg.ofdm_grid()?;
    let sigma2 = cfg.noise()?.per_subcarrier_power_w(&grid)?;
    let power = cfg.power.as_ref().ok_or_else(|| Error::config("power", "missing"))?;
    let amp = (dbm_to_watts(power.tx_power_dbm) / grid.len() as f64).sqrt();
    Ok(LocalizationSetup {
        geom,
        grid,
        sigma2,
        gain: Complex64::new(amp, 0.0),
        solver: cfg.solver_config().options(1.0),
    })
}

pub const MME_COLUMNS: [&str; 3] = ["peb_m", "lb_mm_m", "bias_m"];

/// Misspecified-bound map.
pub fn run_mme_map(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioTable> {
    expect_kind(cfg, ScenarioKind::MmeMap)?;
    let setup = localization_setup(cfg)?;
    let cells = cfg.sweep_grid()?.cells();
    let rows = par_map_cells(&cells, opts.threads, |_, p| {
        let res = setup
            .analyze(p)
            .map(|r: BoundReport| (r.mme_db, vec![r.peb_m, r.lb_mm_m, r.bias_m]));
        row(p, res, MME_COLUMNS.len())
    })?;
    Ok(ScenarioTable {
        kind: ScenarioKind::MmeMap,
        extra_columns: MME_COLUMNS.to_vec(),
        rows,
    })
}

/// Channel-estimation loss at one UE position.
pub fn chest_cell(cfg: &ScenarioConfig, geom: &ArrayGeometry, p: &Point) -> Result<f64> {
    let ue = cfg.ue.as_ref().ok_or_else(|| Error::config("ue", "missing"))?;
    let chest = cfg.chest_config();
    let positions = ue.positions(p);
    let cov = match chest.covariance_model {
        CovarianceKind::Mixed => {
            channel::nf_mixed_covariance(geom, &positions, cfg.blockage_config().correlation_distance_m)?
        }
        CovarianceKind::Los => channel::nf_covariance(geom, &positions)?,
    };
    // covariances have trace N, i.e. unit power per antenna
    let sigma2 = db_to_linear(-chest.pilot_snr_db);
    estimators::chest_mismatch_metric(&cov, sigma2)
}

pub fn run_chest_map(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioTable> {
    expect_kind(cfg, ScenarioKind::ChestMap)?;
    let geom = cfg.geometry()?;
    let cells = cfg.sweep_grid()?.cells();
    let rows = par_map_cells(&cells, opts.threads, |_, p| {
        row(p, chest_cell(cfg, &geom, p).map(|v| (v, Vec::new())), 0)
    })?;
    Ok(ScenarioTable {
        kind: ScenarioKind::ChestMap,
        extra_columns: Vec::new(),
        rows,
    })
}

/// Shared state of an SNR-mismatch sweep: the far-field reference is computed
/// once per run.
#[derive(Debug, Clone)]
pub struct SerMapContext {
    pub geom: ArrayGeometry,
    pub ff_snr_db: f64,
    pub search: SnrSearchOptions,
    pub target_ser: f64,
    pub seed: u64,
    correlation_distance_m: f64,
    ue: super::config::UeConfig,
}

impl SerMapContext {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let geom = cfg.geometry()?;
        let ue = cfg.ue.clone().ok_or_else(|| Error::config("ue", "missing"))?;
        let ser = cfg.ser_config();
        let search = SnrSearchOptions {
            tol_db: ser.tol_db,
            start_db: ser.start_snr_db,
            ser: SerOptions {
                vectors_per_draw: ser.vectors_per_draw,
            },
            ..SnrSearchOptions::default()
        };
        let ff = FfRayleighSampler::new(geom.len(), ue.len())?;
        let mut rng = rng::substream(cfg.seed, &[tags::FF_CHANNEL]);
        let ff_snr_db = estimators::snr_for_target_ser(&ff, ser.target_ser, &mut rng, &search)?.snr_db;
        Ok(Self {
            geom,
            ff_snr_db,
            search,
            target_ser: ser.target_ser,
            seed: cfg.seed,
            correlation_distance_m: cfg.blockage_config().correlation_distance_m,
            ue,
        })
    }

    /// `(NF minus FF required SNR, NF required SNR)` for the UE centred at `p`.
    pub fn cell(&self, index: usize, p: &Point) -> Result<(f64, f64)> {
        let nf = NfMixedSampler::new(&self.geom, &self.ue.positions(p), self.correlation_distance_m)?;
        let mut rng = rng::substream(self.seed, &[tags::NF_CHANNEL, index as u64]);
        let nf_db = estimators::snr_for_target_ser(&nf, self.target_ser, &mut rng, &self.search)?.snr_db;
        Ok((nf_db - self.ff_snr_db, nf_db))
    }
}

pub const SER_COLUMNS: [&str; 2] = ["snr_nf_db", "snr_ff_db"];

pub fn run_ser_map(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioTable> {
    expect_kind(cfg, ScenarioKind::SerMap)?;
    let ctx = SerMapContext::new(cfg)?;
    let cells = cfg.sweep_grid()?.cells();
    let rows = par_map_cells(&cells, opts.threads, |i, p| {
        let res = ctx.cell(i, p).map(|(d, nf)| (d, vec![nf, ctx.ff_snr_db]));
        row(p, res, SER_COLUMNS.len())
    })?;
    Ok(ScenarioTable {
        kind: ScenarioKind::SerMap,
        extra_columns: SER_COLUMNS.to_vec(),
        rows,
    })
}

pub const METRIC_COLUMNS: [&str; 12] = [
    "range_m",
    "fraunhofer_m",
    "frobenius_dev",
    "condition_number",
    "kl_nats",
    "dof_nf",
    "dof_ff",
    "dof_gap",
    "capacity_nf_bps_hz",
    "capacity_ff_bps_hz",
    "capacity_gap_bps_hz",
    "los_probability",
];

/// Probe positions of a metrics report: explicit positions first, then
/// boresight probes at the requested multiples of the Fraunhofer distance.
pub fn metric_probes(cfg: &ScenarioConfig) -> Result<Vec<Point>> {
    let m = cfg.metrics.as_ref().ok_or_else(|| Error::config("metrics", "missing"))?;
    let geom = cfg.geometry()?;
    let df = geom.fraunhofer_distance(geom.carrier_wavelength())?;
    let c = geom.centroid();
    let mut out: Vec<Point> = m.probe_positions_m.iter().map(|&[x, y]| Point::new(x, y)).collect();
    out.extend(m.probe_fraunhofer_multiples.iter().map(|k| Point::new(c.x + k * df, c.y)));
    Ok(out)
}

/// Planar LoS channel of a UE antenna set: every antenna sees the arrival
/// direction of the UE centroid, with its own range as delay.
pub fn ff_los_channel(geom: &ArrayGeometry, ue_positions: &[Point]) -> Result<crate::linalg::CMatrix> {
    let grid = OfdmGrid::single(geom.carrier_hz())?;
    let centre = channel::centroid(ue_positions);
    let towards = wavefront::ff_params_toward(geom, &centre, Complex64::new(1.0, 0.0))?;
    let c = geom.centroid();
    let cols: Vec<Vec<Complex64>> = ue_positions
        .iter()
        .map(|u| {
            let d = nalgebra::distance(u, &c);
            let lambda = geom.carrier_wavelength();
            let amp = lambda / (4.0 * std::f64::consts::PI * d);
            let p = FfParams::new(towards.aoa_rad, d / SPEED_OF_LIGHT, Complex64::new(amp, 0.0))?;
            Ok(ff_response(geom, &grid, &p)?.column(0))
        })
        .collect::<Result<_>>()?;
    Ok(crate::linalg::CMatrix::from_fn(geom.len(), cols.len(), |n, u| cols[u][n]))
}

/// All metrics at one probe. Returns the manifold angle and the
/// [`METRIC_COLUMNS`] values.
pub fn metrics_probe(cfg: &ScenarioConfig, index: usize, p: &Point) -> Result<(f64, Vec<f64>)> {
    let m = cfg.metrics.as_ref().ok_or_else(|| Error::config("metrics", "missing"))?;
    let ue = cfg.ue.as_ref().ok_or_else(|| Error::config("ue", "missing"))?;
    let geom = cfg.geometry()?;
    let grid = OfdmGrid::single(geom.carrier_hz())?;
    let d_corr = cfg.blockage_config().correlation_distance_m;
    let centre = geom.centroid();
    let range = nalgebra::distance(p, &centre);
    let df = geom.fraunhofer_distance(geom.carrier_wavelength())?;

    let unit = Complex64::new(1.0, 0.0);
    let nf = wavefront::nf_response(&geom, &grid, &crate::wavefront::NfParams::new(*p, unit), crate::wavefront::NearFieldModel::SwmSns)?;
    let ff = ff_response(&geom, &grid, &wavefront::ff_params_toward(&geom, p, unit)?)?;
    let angle = wavefront::manifold_angle(&nf.column(0), &ff.column(0))?;

    let positions = ue.positions(p);
    let cov = match cfg.chest_config().covariance_model {
        CovarianceKind::Mixed => channel::nf_mixed_covariance(&geom, &positions, d_corr)?,
        CovarianceKind::Los => channel::nf_covariance(&geom, &positions)?,
    };
    let (frob, cond) = metrics::covariance_identity_deviation(cov.matrix())?;

    let nf_sampler = NfMixedSampler::new(&geom, &positions, d_corr)?;
    let ff_sampler = FfRayleighSampler::new(geom.len(), positions.len())?;
    let dof_nf = metrics::spatial_dof(nf_sampler.los_matrix(), m.dof_threshold)?;
    let dof_ff = metrics::spatial_dof(&ff_los_channel(&geom, &positions)?, m.dof_threshold)?;

    let rho = db_to_linear(m.snr_db);
    let mut rng_nf = rng::substream(cfg.seed, &[tags::KL, index as u64, 0]);
    let mut rng_ff = rng::substream(cfg.seed, &[tags::KL, index as u64, 1]);
    let s_nf = metrics::sinr_samples_db(&nf_sampler, rho, m.n_draws, &mut rng_nf)?;
    let s_ff = metrics::sinr_samples_db(&ff_sampler, rho, m.n_draws, &mut rng_ff)?;
    // a deterministic channel has a point-mass SINR law: infinitely far from any Gaussian
    let kl = match metrics::kl_from_samples(&s_nf, &s_ff) {
        Err(Error::InvalidArgument(msg)) if msg.starts_with("degenerate") => f64::INFINITY,
        other => other?,
    };

    let mut rng_nf = rng::substream(cfg.seed, &[tags::CAPACITY, index as u64, 0]);
    let mut rng_ff = rng::substream(cfg.seed, &[tags::CAPACITY, index as u64, 1]);
    let cap_nf = metrics::ergodic_capacity(&nf_sampler, rho, m.n_capacity_draws, &mut rng_nf)?;
    let cap_ff = metrics::ergodic_capacity(&ff_sampler, rho, m.n_capacity_draws, &mut rng_ff)?;
    let p_los = channel::los_probability_umi(range)?;

    Ok((
        angle,
        vec![
            range,
            df,
            frob,
            cond,
            kl,
            dof_nf as f64,
            dof_ff as f64,
            dof_nf as f64 - dof_ff as f64,
            cap_nf,
            cap_ff,
            cap_nf - cap_ff,
            p_los,
        ],
    ))
}

/// One row per probe; `value` is the NF/FF manifold angle in radians.
pub fn run_metrics_report(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioTable> {
    expect_kind(cfg, ScenarioKind::MetricsReport)?;
    let probes = metric_probes(cfg)?;
    let rows = par_map_cells(&probes, opts.threads, |i, p| {
        row(p, metrics_probe(cfg, i, p), METRIC_COLUMNS.len())
    })?;
    Ok(ScenarioTable {
        kind: ScenarioKind::MetricsReport,
        extra_columns: METRIC_COLUMNS.to_vec(),
        rows,
    })
}
