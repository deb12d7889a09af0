//! Two-dimensional position sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min_m: f64,
    pub max_m: f64,
    pub count: usize,
    pub scale: AxisScale,
}

impl AxisSpec {
    pub fn linear(min_m: f64, max_m: f64, count: usize) -> Self {
        Self {
            min_m,
            max_m,
            count,
            scale: AxisScale::Linear,
        }
    }

    pub fn log(min_m: f64, max_m: f64, count: usize) -> Self {
        Self {
            min_m,
            max_m,
            count,
            scale: AxisScale::Log,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(self.min_m.is_finite() && self.max_m.is_finite() && self.min_m < self.max_m) {
            return Err(Error::config(key, format!("need min_m < max_m, got [{}, {}]", self.min_m, self.max_m)));
        }
        if self.count < 2 {
            return Err(Error::config(format!("{key}.count"), "must be >= 2"));
        }
        if self.scale == AxisScale::Log && self.min_m <= 0.0 {
            return Err(Error::config(format!("{key}.min_m"), "log scale needs min_m > 0"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    return self.max_m;
                }
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min_m + t * (self.max_m - self.min_m),
                    AxisScale::Log => (self.min_m.ln() + t * (self.max_m / self.min_m).ln()).exp(),
                }
            })
            .collect()
    }
}

/// Cells are ordered row-major: index `iy * count_x + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub x: AxisSpec,
    pub y: AxisSpec,
}

impl SweepGrid {
    pub fn new(x: AxisSpec, y: AxisSpec) -> Result<Self> {
        x.validate("sweep.x")?;
        y.validate("sweep.y")?;
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.count * self.y.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells(&self) -> Vec<Point> {
        let xs = self.x.values();
        let ys = self.y.values();
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| Point::new(x, y)))
            .collect()
    }
}

/// Evaluates `f(index, point)` for every point on a pool of `threads`
/// workers (all available cores when `None`). Output order follows input order.
pub fn par_map_cells<T, F>(points: &[Point], threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Point) -> T + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::invalid("thread count must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().enumerate().map(|(i, p)| f(i, p)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values() {
        let a = AxisSpec::linear(-1.0, 1.0, 5).values();
        assert_eq!(a, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let l = AxisSpec::log(1.0, 100.0, 3).values();
        assert!((l[1] - 10.0).abs() < 1e-12);
        assert_eq!(l[2], 100.0);
    }

    #[test]
    fn axis_validation() {
        assert!(AxisSpec::linear(1.0, 1.0, 4).validate("x").is_err());
        assert!(AxisSpec::linear(0.0, 1.0, 1).validate("x").is_err());
        assert!(AxisSpec::log(0.0, 1.0, 4).validate("x").is_err());
    }

    #[test]
    fn row_major_cells() {
        let g = SweepGrid::new(AxisSpec::linear(0.0, 1.0, 3), AxisSpec::linear(5.0, 6.0, 2)).unwrap();
        let c = g.cells();
        assert_eq!(c.len(), 6);
        assert_eq!((c[1].x, c[1].y), (0.5, 5.0));
        assert_eq!((c[3].x, c[3].y), (0.0, 6.0));
    }

    #[test]
    fn parallel_map_keeps_order() {
        let pts: Vec<Point> = (0..100).map(|i| Point::new(i as f64, 0.0)).collect();
        let out = par_map_cells(&pts, Some(3), |i, p| (i, p.x)).unwrap();
        for (i, (j, x)) in out.into_iter().enumerate() {
            assert_eq!(i, j);
            assert_eq!(x, i as f64);
        }
    }
}
