#![allow(dead_code)]

use std::f64::consts::PI;

use nearfar::geometry::{ArrayGeometry, OfdmGrid, SPEED_OF_LIGHT};
use nearfar::linalg::CMatrix;
use nearfar::Complex64;

pub const BRUTE_THETA_STEP_RAD: f64 = 0.01 * PI / 180.0;
pub const BRUTE_TAU_STEP_S: f64 = 1e-12;

fn cis_cycles(c: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (c - c.round()))
}

/// Exhaustive planar fit with the gain profiled out. Evaluates every
/// `theta` on a 0.01 degree grid with a 50 ps delay grid over one delay
/// period centred on `tau_centre`, then the full 1 ps grid around the best
/// few coarse cells. Returns `(theta, tau, residual)`.
pub fn brute_force_fit(mean: &CMatrix, geom: &ArrayGeometry, grid: &OfdmGrid, tau_centre: f64) -> (f64, f64, f64) {
    let f = grid.frequencies().to_vec();
    let y: Vec<f64> = geom.elements().iter().map(|q| q.y).collect();
    let energy: f64 = mean.iter().map(|z| z.norm_sqr()).sum();
    let norm = (y.len() * f.len()) as f64;
    let period = 1.0 / grid.subcarrier_spacing_hz();

    let steps = (90.0 / 0.01) as i64 - 1;
    let thetas: Vec<f64> = (-steps..=steps).map(|i| i as f64 * BRUTE_THETA_STEP_RAD).collect();
    let spatial = |theta: f64| -> Vec<Complex64> {
        let s = theta.sin();
        f.iter()
            .enumerate()
            .map(|(k, fk)| {
                y.iter()
                    .enumerate()
                    .map(|(n, yn)| cis_cycles(-fk * yn * s / SPEED_OF_LIGHT) * mean[(n, k)])
                    .sum()
            })
            .collect()
    };
    let fit = |z: &[Complex64], tau: f64| -> f64 {
        let inner: Complex64 = z.iter().zip(&f).map(|(zk, fk)| cis_cycles(fk * tau) * zk).sum();
        energy - inner.norm_sqr() / norm
    };

    let coarse_step = 50.0 * BRUTE_TAU_STEP_S;
    let n_coarse = (period / coarse_step).round() as i64;
    let coarse_taus: Vec<f64> = (0..n_coarse).map(|j| tau_centre - 0.5 * period + j as f64 * coarse_step).collect();
    let table: Vec<Vec<Complex64>> = coarse_taus
        .iter()
        .map(|&t| f.iter().map(|fk| cis_cycles(fk * t)).collect())
        .collect();

    let spatial_all: Vec<Vec<Complex64>> = thetas.iter().map(|&t| spatial(t)).collect();
    // best coarse delay for every angle
    let mut coarse: Vec<(f64, usize, usize)> = spatial_all
        .iter()
        .enumerate()
        .map(|(i, z)| {
            table
                .iter()
                .enumerate()
                .map(|(j, row)| {
                    let inner: Complex64 = z.iter().zip(row).map(|(a, b)| a * b).sum();
                    (energy - inner.norm_sqr() / norm, i, j)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap()
        })
        .collect();
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut seeds: Vec<(usize, usize)> = Vec::new();
    for &(_, i, j) in &coarse {
        let far = seeds
            .iter()
            .all(|&(a, b)| a.abs_diff(i) > 100 || b.abs_diff(j) > 20);
        if far {
            seeds.push((i, j));
            if seeds.len() == 3 {
                break;
            }
        }
    }

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for (i0, j0) in seeds {
        let lo = i0.saturating_sub(50);
        let hi = (i0 + 50).min(thetas.len() - 1);
        for i in lo..=hi {
            let z = &spatial_all[i];
            for dj in -100i64..=100 {
                let tau = coarse_taus[j0] + dj as f64 * BRUTE_TAU_STEP_S;
                let r = fit(z, tau);
                if r < best.0 {
                    best = (r, thetas[i], tau);
                }
            }
        }
    }
    (best.1, best.2, best.0)
}

/// `tau_a - tau_b` wrapped into half a delay period.
pub fn wrapped_delay_difference(tau_a: f64, tau_b: f64, grid: &OfdmGrid) -> f64 {
    let period = 1.0 / grid.subcarrier_spacing_hz();
    let d = (tau_a - tau_b) / period;
    (d - d.round()) * period
}
