//! Array geometry, OFDM subcarrier grid and thermal noise.
//!
//! Everything lives in the x-y plane. A uniform linear array (ULA) is laid
//! along the y-axis and centred on the origin, so array boresight is +x.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radius of the ball around each element inside which a source is rejected.
pub const EXCLUSION_RADIUS_M: f64 = 1e-9;

const COINCIDENT_TOL_M: f64 = 1e-12;

pub type Point = Point2<f64>;

pub fn wavelength(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}

/// Ordered antenna element positions and the carrier they are designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    elements: Vec<Point>,
    carrier_hz: f64,
}

impl ArrayGeometry {
    pub fn new(elements: Vec<Point>, carrier_hz: f64) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("array needs at least one element"));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::invalid(format!("carrier_hz must be > 0, got {carrier_hz}")));
        }
        if let Some(p) = elements.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::invalid(format!("non-finite element position {p:?}")));
        }
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate().skip(i + 1) {
                if nalgebra::distance(a, b) <= COINCIDENT_TOL_M {
                    return Err(Error::invalid(format!("elements {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { elements, carrier_hz })
    }

    /// ULA along the y-axis, centred on the origin.
    pub fn ula(n: usize, spacing_m: f64, carrier_hz: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ULA needs n >= 1"));
        }
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::invalid(format!("ULA spacing must be > 0, got {spacing_m}")));
        }
        let mid = (n as f64 - 1.0) / 2.0;
        let elements = (0..n)
            .map(|i| Point::new(0.0, (i as f64 - mid) * spacing_m))
            .collect();
        Self::new(elements, carrier_hz)
    }

    /// ULA whose spacing is given in carrier wavelengths.
    pub fn ula_wavelengths(n: usize, spacing_wavelengths: f64, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::invalid(format!("carrier_hz must be > 0, got {carrier_hz}")));
        }
        Self::ula(n, spacing_wavelengths * wavelength(carrier_hz), carrier_hz)
    }

    pub fn elements(&self) -> &[Point] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn carrier_wavelength(&self) -> f64 {
        wavelength(self.carrier_hz)
    }

    pub fn centroid(&self) -> Point {
        let e = &self.elements;
        let n = e.len();
        // pair elements from both ends so mirror-symmetric layouts cancel exactly
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..n / 2 {
            sx += e[i].x + e[n - 1 - i].x;
            sy += e[i].y + e[n - 1 - i].y;
        }
        if n % 2 == 1 {
            sx += e[n / 2].x;
            sy += e[n / 2].y;
        }
        Point::new(sx / n as f64, sy / n as f64)
    }

    /// Largest pairwise element distance.
    pub fn aperture(&self) -> f64 {
        let mut best = 0.0_f64;
        for (i, a) in self.elements.iter().enumerate() {
            for b in &self.elements[i + 1..] {
                best = best.max(nalgebra::distance(a, b));
            }
        }
        best
    }

    /// `2 D^2 / lambda`; zero for a single element.
    pub fn fraunhofer_distance(&self, wavelength_m: f64) -> Result<f64> {
        if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
            return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength_m}")));
        }
        let d = self.aperture();
        Ok(2.0 * d * d / wavelength_m)
    }

    /// Euclidean distances from `p` to each element, in element order.
    pub fn distances(&self, p: &Point) -> Result<Vec<f64>> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::invalid(format!("non-finite point {p:?}")));
        }
        self.elements
            .iter()
            .enumerate()
            .map(|(n, q)| {
                let d = nalgebra::distance(p, q);
                if d < EXCLUSION_RADIUS_M {
                    Err(Error::DegenerateGeometry(format!(
                        "point ({}, {}) coincides with element {n}",
                        p.x, p.y
                    )))
                } else {
                    Ok(d)
                }
            })
            .collect()
    }

    /// Same element layout scaled about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.elements.iter().map(|p| Point::new(p.x * factor, p.y * factor)).collect(),
            self.carrier_hz,
        )
    }
}

/// OFDM subcarriers symmetric about the carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGrid {
    carrier_hz: f64,
    bandwidth_hz: f64,
    frequencies: Vec<f64>,
}

impl OfdmGrid {
    pub fn new(n_subcarriers: usize, carrier_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::invalid("OFDM grid needs at least one subcarrier"));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::invalid(format!("carrier_hz must be > 0, got {carrier_hz}")));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz >= 0.0) {
            return Err(Error::invalid(format!("bandwidth_hz must be >= 0, got {bandwidth_hz}")));
        }
        let k = n_subcarriers as f64;
        let spacing = bandwidth_hz / k;
        let mid = (k - 1.0) / 2.0;
        let frequencies: Vec<f64> = (0..n_subcarriers)
            .map(|i| carrier_hz + (i as f64 - mid) * spacing)
            .collect();
        if frequencies.iter().any(|&f| f <= 0.0) {
            return Err(Error::invalid("bandwidth too wide: a subcarrier frequency is <= 0"));
        }
        Ok(Self {
            carrier_hz,
            bandwidth_hz,
            frequencies,
        })
    }

    /// One subcarrier at `carrier_hz`, zero bandwidth.
    pub fn single(carrier_hz: f64) -> Result<Self> {
        Self::new(1, carrier_hz, 0.0)
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.bandwidth_hz / self.frequencies.len() as f64
    }

    pub fn max_frequency_hz(&self) -> f64 {
        self.frequencies.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        self.frequencies.iter().map(|&f| wavelength(f)).collect()
    }
}

/// Thermal noise: PSD plus receiver noise figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

impl NoiseSpec {
    pub fn new(psd_dbm_per_hz: f64, noise_figure_db: f64) -> Self {
        Self {
            psd_dbm_per_hz,
            noise_figure_db,
        }
    }

    /// Noise power integrated over one subcarrier (`B/K` Hz), in watts.
    pub fn per_subcarrier_power_w(&self, grid: &OfdmGrid) -> Result<f64> {
        let df = grid.subcarrier_spacing_hz();
        if !(df > 0.0) {
            return Err(Error::invalid("noise power needs a positive subcarrier spacing"));
        }
        if !(self.psd_dbm_per_hz.is_finite() && self.noise_figure_db.is_finite()) {
            return Err(Error::invalid("noise PSD and figure must be finite"));
        }
        Ok(dbm_to_watts(self.psd_dbm_per_hz + self.noise_figure_db) * df)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_element_ula_sits_at_origin() {
        let g = ArrayGeometry::ula(1, 0.01, 1e9).unwrap();
        assert_eq!(g.elements(), &[Point::new(0.0, 0.0)]);
        assert_eq!(g.aperture(), 0.0);
        assert_eq!(g.fraunhofer_distance(0.01).unwrap(), 0.0);
    }

    #[test]
    fn two_element_ula_is_symmetric() {
        let g = ArrayGeometry::ula(2, 1.0, 1e9).unwrap();
        assert_eq!(g.elements(), &[Point::new(0.0, -0.5), Point::new(0.0, 0.5)]);
    }

    #[test]
    fn ula_rejects_bad_arguments() {
        assert!(matches!(ArrayGeometry::ula(0, 0.1, 1e9), Err(Error::InvalidArgument(_))));
        assert!(matches!(ArrayGeometry::ula(4, 0.0, 1e9), Err(Error::InvalidArgument(_))));
        assert!(matches!(ArrayGeometry::ula(4, -1.0, 1e9), Err(Error::InvalidArgument(_))));
        assert!(matches!(ArrayGeometry::ula(4, 0.1, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn coincident_elements_rejected() {
        let r = ArrayGeometry::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 1e-13)], 1e9);
        assert!(r.is_err());
    }

    #[test]
    fn case1_aperture_and_fraunhofer() {
        let lambda = wavelength(140e9);
        assert_relative_eq!(lambda, 2.1414e-3, max_relative = 1e-4);
        let g = ArrayGeometry::ula(128, lambda / 2.0, 140e9).unwrap();
        assert_relative_eq!(g.aperture(), 127.0 * lambda / 2.0, max_relative = 1e-12);
        assert_relative_eq!(g.aperture(), 0.13598, max_relative = 1e-4);
        assert_relative_eq!(g.centroid().y, 0.0, epsilon = 1e-12);
        let df = g.fraunhofer_distance(lambda).unwrap();
        assert!((df - 17.27).abs() < 0.01, "{df}");
    }

    #[test]
    fn case3_apertures() {
        let lambda = 2.0 * 2.7 / 63.0;
        let carrier = SPEED_OF_LIGHT / lambda;
        let half = ArrayGeometry::ula_wavelengths(64, 0.5, carrier).unwrap();
        let double = ArrayGeometry::ula_wavelengths(64, 2.0, carrier).unwrap();
        assert_relative_eq!(half.aperture(), 2.7, max_relative = 1e-12);
        assert_relative_eq!(double.aperture(), 10.8, max_relative = 1e-12);
        let df = half.fraunhofer_distance(lambda).unwrap();
        assert!((df - 170.1).abs() < 0.1, "{df}");
    }

    #[test]
    fn fraunhofer_arithmetic() {
        let g = ArrayGeometry::ula(2, 0.1, 1e9).unwrap();
        assert_relative_eq!(g.fraunhofer_distance(0.01).unwrap(), 2.0, max_relative = 1e-12);
        assert!(g.fraunhofer_distance(0.0).is_err());
    }

    #[test]
    fn distances_examples() {
        let g = ArrayGeometry::new(vec![Point::new(0.0, 0.0)], 1e9).unwrap();
        assert_eq!(g.distances(&Point::new(3.0, 4.0)).unwrap(), vec![5.0]);
        let g = ArrayGeometry::new(vec![Point::new(0.0, 0.5)], 1e9).unwrap();
        assert_relative_eq!(g.distances(&Point::new(1.0, 1.0)).unwrap()[0], 1.25f64.sqrt());
        assert!(matches!(
            g.distances(&Point::new(0.0, 0.5)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn boresight_distances_are_mirrored() {
        let g = ArrayGeometry::ula(9, 0.3, 1e9).unwrap();
        let d = g.distances(&Point::new(4.0, 0.0)).unwrap();
        let n = d.len();
        for i in 0..n {
            assert_relative_eq!(d[i], d[n - 1 - i], max_relative = 1e-15);
        }
    }

    #[test]
    fn ofdm_grid_is_centred() {
        let grid = OfdmGrid::new(10, 140e9, 400e6).unwrap();
        let mean = grid.frequencies().iter().sum::<f64>() / 10.0;
        assert_relative_eq!(mean, 140e9, max_relative = 1e-12);
        assert_relative_eq!(grid.subcarrier_spacing_hz(), 40e6);
        assert!(OfdmGrid::new(0, 1e9, 0.0).is_err());
        assert!(OfdmGrid::new(4, 1e6, 1e7).is_err());
    }

    #[test]
    fn noise_power_per_subcarrier() {
        let grid = OfdmGrid::new(10, 140e9, 400e6).unwrap();
        let s2 = NoiseSpec::new(-173.8, 10.0).per_subcarrier_power_w(&grid).unwrap();
        // -163.8 dBm/Hz over 40 MHz
        assert_relative_eq!(s2, 10f64.powf(-16.38) * 1e-3 * 40e6, max_relative = 1e-12);
        assert!(s2 > 0.0);
        let single = OfdmGrid::single(1e9).unwrap();
        assert!(NoiseSpec::new(-174.0, 0.0).per_subcarrier_power_w(&single).is_err());
    }
}
