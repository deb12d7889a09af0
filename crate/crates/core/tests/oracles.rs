mod common;

use nearfar::bounds::{
    fim, mcrlb, pseudo_true, sandwich, HessianMethod, PseudoTrueOptions, PseudoTrueResult,
};
use nearfar::channel::{FfRayleighSampler, FixedChannel};
use nearfar::estimators::{
    lmmse_detect, qpsk_awgn_ser, qpsk_decide, qpsk_symbol, simulate_ser, snr_for_target_ser, snr_mismatch,
    SerOptions, SnrSearchOptions,
};
use nearfar::geometry::{db_to_linear, ArrayGeometry, OfdmGrid, Point, SPEED_OF_LIGHT};
use nearfar::linalg::{self, symmetric_eigenvalues, CMatrix, RMatrix};
use nearfar::metrics::spatial_dof;
use nearfar::rng::{substream, SimRng};
use nearfar::scenarios::runs::ff_los_channel;
use nearfar::wavefront::{
    ff_response, nf_jacobian, nf_response, response_jacobian, FfParams, ModelParams, NearFieldModel, NfParams,
};
use nearfar::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn case1() -> (ArrayGeometry, OfdmGrid) {
    let geom = ArrayGeometry::ula_wavelengths(128, 0.5, 140e9).unwrap();
    let grid = OfdmGrid::new(10, 140e9, 400e6).unwrap();
    (geom, grid)
}

fn case1_sigma2(grid: &OfdmGrid) -> f64 {
    nearfar::geometry::NoiseSpec::new(-173.8, 10.0).per_subcarrier_power_w(grid).unwrap()
}

fn polar(r: f64, deg: f64) -> Point {
    let a = deg.to_radians();
    Point::new(r * a.cos(), r * a.sin())
}

fn fit_at(p: Point) -> (ArrayGeometry, OfdmGrid, PseudoTrueResult) {
    let (geom, grid) = case1();
    let mean = nf_response(&geom, &grid, &NfParams::new(p, Complex64::new(0.1, 0.0)), NearFieldModel::SwmSns).unwrap();
    let r = nalgebra::distance(&p, &geom.centroid());
    let fit = pseudo_true(&mean, &geom, &grid, &PseudoTrueOptions::for_range(r)).unwrap();
    (geom, grid, fit)
}

/// Relative Frobenius distance after scaling both matrices to the unit
/// diagonal of `reference`.
fn equilibrated_distance(a: &RMatrix, reference: &RMatrix) -> f64 {
    let d: Vec<f64> = reference.diagonal().iter().map(|x| 1.0 / x.abs().sqrt()).collect();
    let s = |m: &RMatrix| RMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i] * d[j]);
    (s(a) - s(reference)).norm() / s(reference).norm()
}

#[test]
fn fim_matches_score_covariance() {
    let geom = ArrayGeometry::ula(2, 0.5, 1e9).unwrap();
    let grid = OfdmGrid::single(1e9).unwrap();
    let params = NfParams::new(Point::new(1.5, 0.4), Complex64::new(0.8, -0.3));
    let jac = nf_jacobian(&geom, &grid, &params, NearFieldModel::SwmSns).unwrap();
    let sigma2 = 1e-3;
    let f = fim(&jac, sigma2).unwrap().matrix;

    let mut rng = substream(21, &[]);
    let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).unwrap();
    let draws = 100_000;
    let mut cov = RMatrix::zeros(4, 4);
    for _ in 0..draws {
        let noise: Vec<Complex64> = (0..2)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        // score = (2 / s2) Re{J^H (y - mu)}
        let score: Vec<f64> = jac
            .slabs
            .iter()
            .map(|s| 2.0 / sigma2 * s.iter().zip(&noise).map(|(a, n)| (a.conj() * n).re).sum::<f64>())
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                cov[(i, j)] += score[i] * score[j];
            }
        }
    }
    cov /= draws as f64;
    let err = equilibrated_distance(&cov, &f);
    assert!(err < 0.05, "relative error {err}");
}

#[test]
fn misspecified_a_matches_differenced_fit_residual() {
    let (geom, grid, fit) = fit_at(polar(5.0, 45.0));
    let sigma2 = case1_sigma2(&grid);
    let bound = mcrlb(&geom, &grid, &fit, sigma2, HessianMethod::CentralDifference).unwrap();

    // A = -(1/s2) * Hessian of sum |mu - mu~(eta)|^2
    let mean = &fit.mismatch + ff_response(&geom, &grid, &fit.params).unwrap().matrix();
    let cost = |v: [f64; 4]| -> f64 {
        let m = ff_response(&geom, &grid, &FfParams::from_array(v)).unwrap();
        (&mean - m.matrix()).iter().map(|z| z.norm_sqr()).sum()
    };
    let x0 = fit.params.to_array();
    let g = fit.params.gain.norm();
    let h = [1e-5, 1e-5 / grid.max_frequency_hz(), 1e-5 * g, 1e-5 * g];
    let mut hess = RMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let at = |si: f64, sj: f64| {
                let mut v = x0;
                v[i] += si * h[i];
                v[j] += sj * h[j];
                cost(v)
            };
            hess[(i, j)] = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
        }
    }
    let a_fd = hess * (-1.0 / sigma2);
    let err = equilibrated_distance(&bound.a, &a_fd);
    assert!(err < 1e-3, "relative error {err}");

    let analytic = mcrlb(&geom, &grid, &fit, sigma2, HessianMethod::Analytic).unwrap();
    assert!(equilibrated_distance(&analytic.a, &bound.a) < 1e-6);
    assert!(equilibrated_distance(&analytic.b, &bound.b) < 1e-12);
}

#[test]
fn b_is_psd() {
    for p in [polar(3.0, -60.0), polar(12.0, 10.0), polar(30.0, 70.0)] {
        let (geom, grid, fit) = fit_at(p);
        let b = mcrlb(&geom, &grid, &fit, case1_sigma2(&grid), HessianMethod::CentralDifference).unwrap().b;
        let eig = symmetric_eigenvalues(&b);
        let top = eig.iter().cloned().fold(0.0, f64::max);
        assert!(eig.iter().all(|&l| l >= -1e-10 * top), "{eig:?}");
    }
}

#[test]
fn matched_family_collapses_to_crlb() {
    let (geom, grid) = case1();
    let truth = FfParams::new(0.4, 9.0 / SPEED_OF_LIGHT, Complex64::new(0.07, -0.05)).unwrap();
    let mean = ff_response(&geom, &grid, &truth).unwrap();
    let fit = pseudo_true(&mean, &geom, &grid, &PseudoTrueOptions::for_range(9.0)).unwrap();
    let energy = mean.energy();
    assert!(fit.residual <= 1e-16 * energy, "residual {}", fit.residual);
    let got = fit.params.to_array();
    let want = truth.to_array();
    for i in 0..4 {
        let scale = if i >= 2 { truth.gain.norm() } else { want[i].abs() };
        assert!((got[i] - want[i]).abs() <= 1e-6 * scale, "param {i}: {} vs {}", got[i], want[i]);
    }

    let sigma2 = case1_sigma2(&grid);
    let f = fim(&response_jacobian(&geom, &grid, &ModelParams::Ff(fit.params)).unwrap(), sigma2).unwrap().matrix;
    let bound = mcrlb(&geom, &grid, &fit, sigma2, HessianMethod::CentralDifference).unwrap();
    assert!(equilibrated_distance(&(-&bound.a), &f) < 1e-9);
    assert!(equilibrated_distance(&bound.b, &f) < 1e-9);
    let inv = linalg::symmetric_inverse(&f, 1e12).unwrap();
    assert!(equilibrated_distance(&sandwich(&bound).unwrap(), &inv) < 1e-6);
}

#[test]
fn pseudo_true_matches_exhaustive_grid_at_5m_45deg() {
    let p = polar(5.0, 45.0);
    let (geom, grid, fit) = fit_at(p);
    let mean = &fit.mismatch + ff_response(&geom, &grid, &fit.params).unwrap().matrix();
    let (theta, tau, residual) = common::brute_force_fit(&mean, &geom, &grid, 5.0 / SPEED_OF_LIGHT);
    assert!(fit.residual <= residual * (1.0 + 1e-9));
    assert!((fit.params.aoa_rad - theta).abs() <= common::BRUTE_THETA_STEP_RAD);
    let dt = common::wrapped_delay_difference(fit.params.delay_s, tau, &grid);
    assert!(dt.abs() <= common::BRUTE_TAU_STEP_S, "delay off by {dt:e}");
}

#[test]
fn awgn_ser_matches_closed_form() {
    let siso = FixedChannel(linalg::identity(1));
    for (db, n) in [(4.0, 200_000u64), (8.0, 500_000), (10.35, 2_000_000)] {
        let rho = db_to_linear(db);
        let mut rng = substream(31, &[db.to_bits()]);
        let p = simulate_ser(&siso, rho, n, &mut rng, &SerOptions::default()).unwrap();
        let expected = qpsk_awgn_ser(rho);
        let sigma = (expected * (1.0 - expected) / p.n_symbols as f64).sqrt();
        assert!((p.ser - expected).abs() <= 3.0 * sigma, "{db} dB: {} vs {expected}", p.ser);
    }
}

#[test]
fn ser_decreases_with_snr() {
    let ray = FfRayleighSampler::new(4, 2).unwrap();
    let mut last: Option<(f64, f64)> = None;
    for db in [0.0, 4.0, 8.0, 12.0, 16.0] {
        let mut rng = substream(41, &[]);
        let p = simulate_ser(&ray, db_to_linear(db), 200_000, &mut rng, &SerOptions::default()).unwrap();
        if let Some((ser, se)) = last {
            assert!(p.ser <= ser + 3.0 * (se + p.std_error), "{db} dB");
        }
        last = Some((p.ser, p.std_error));
    }
}

#[test]
fn required_snr_inverts_closed_form() {
    let siso = FixedChannel(linalg::identity(1));
    let opts = SnrSearchOptions::default();
    let at = |target: f64, seed: u64| {
        snr_for_target_ser(&siso, target, &mut SimRng::seed_from_u64(seed), &opts).unwrap().snr_db
    };
    let r3 = at(1e-3, 1);
    assert!((r3 - 10.35).abs() <= 0.2, "{r3}");
    let r2 = at(1e-2, 1);
    assert!(r2 < r3);
    // 2Q - Q^2 = 0.4 at Q = 1 - sqrt(0.6)
    let r04 = at(0.4, 1);
    let expected = {
        let q = 1.0 - 0.6f64.sqrt();
        let x = statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::Normal::new(0.0, 1.0).unwrap(), 1.0 - q);
        10.0 * (x * x).log10()
    };
    assert!((r04 - expected).abs() <= 0.25, "{r04} vs {expected}");
    assert_eq!(at(1e-3, 9), at(1e-3, 9));
    assert!(snr_for_target_ser(&siso, 0.5, &mut SimRng::seed_from_u64(0), &opts).is_err());
}

#[test]
fn identical_samplers_have_no_mismatch() {
    let ray = FfRayleighSampler::new(4, 2).unwrap();
    let opts = SnrSearchOptions {
        tol_db: 0.5,
        ..Default::default()
    };
    let d = snr_mismatch(&ray, &ray, 1e-2, &mut SimRng::seed_from_u64(3), &opts).unwrap();
    assert!(d.abs() <= 2.0 * opts.tol_db, "{d}");
    let again = snr_mismatch(&ray, &ray, 1e-2, &mut SimRng::seed_from_u64(3), &opts).unwrap();
    assert_eq!(d, again);
}

#[test]
fn orthogonal_channel_detection_matches_matched_filter() {
    let h = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(1.0, 1.0), Complex64::new(-1.0, 1.0), Complex64::new(1.0, -1.0), Complex64::new(1.0, 1.0)],
    );
    let mut rng = SimRng::seed_from_u64(17);
    let normal = Normal::new(0.0, 0.6).unwrap();
    for _ in 0..200 {
        let x = [qpsk_symbol(rand::Rng::gen_range(&mut rng, 0..4)), qpsk_symbol(rand::Rng::gen_range(&mut rng, 0..4))];
        let y: Vec<Complex64> = (0..2)
            .map(|n| h[(n, 0)] * x[0] + h[(n, 1)] * x[1] + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let (_, hard) = lmmse_detect(&h, &y, 3.0).unwrap();
        let mf: Vec<u8> = (0..2)
            .map(|u| qpsk_decide((0..2).map(|n| h[(n, u)].conj() * y[n]).sum()))
            .collect();
        assert_eq!(hard, mf);
    }
    let y = [Complex64::new(0.3, -1.2), Complex64::new(0.7, 0.1)];
    assert_eq!(lmmse_detect(&h, &y, 5.0).unwrap(), lmmse_detect(&h, &y, 5.0).unwrap());
}

#[test]
fn near_field_los_has_two_dof_where_planar_has_one() {
    let geom = ArrayGeometry::ula_wavelengths(64, 0.5, 3.5e9).unwrap();
    assert!((geom.aperture() - 2.7).abs() < 0.01);
    let ue = [Point::new(5.0, -0.165), Point::new(5.0, 0.165)];
    let grid = OfdmGrid::single(3.5e9).unwrap();
    let cols: Vec<Vec<Complex64>> = ue
        .iter()
        .map(|&u| {
            nf_response(&geom, &grid, &NfParams::new(u, Complex64::new(1.0, 0.0)), NearFieldModel::SwmSns)
                .unwrap()
                .column(0)
        })
        .collect();
    let nf = CMatrix::from_fn(64, 2, |n, u| cols[u][n]);
    assert_eq!(spatial_dof(&nf, 0.01).unwrap(), 2);
    assert_eq!(spatial_dof(&ff_los_channel(&geom, &ue).unwrap(), 0.01).unwrap(), 1);
}
