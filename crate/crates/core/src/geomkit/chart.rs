use rand::Rng;

use crate::error::{Error, Result};

/// One axis of a coordinate box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A single axis-aligned coordinate box, optionally periodic along some axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    bounds: Vec<Interval>,
    periods: Vec<Option<f64>>,
}

impl Chart {
    pub fn new(bounds: Vec<Interval>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidChart("dimension must be at least 1".into()));
        }
        for (axis, iv) in bounds.iter().enumerate() {
            if !(iv.lo < iv.hi) {
                return Err(Error::InvalidChart(format!(
                    "axis {axis}: lower bound {} is not below upper bound {}",
                    iv.lo, iv.hi
                )));
            }
        }
        let periods = vec![None; bounds.len()];
        Ok(Self { bounds, periods })
    }

    /// Closed box `[lo, hi]` on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Interval::closed(lo, hi); dim])
    }

    /// Marks `axis` as periodic. The axis bounds become `[lo, lo + period]`.
    pub fn with_period(mut self, axis: usize, period: f64) -> Result<Self> {
        if axis >= self.dim() {
            return Err(Error::InvalidChart(format!("no axis {axis}")));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidChart(format!(
                "period on axis {axis} must be positive, got {period}"
            )));
        }
        let lo = self.bounds[axis].lo;
        self.bounds[axis] = Interval {
            lo,
            hi: lo + period,
            lo_closed: true,
            hi_closed: false,
        };
        self.periods[axis] = Some(period);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn period(&self, axis: usize) -> Option<f64> {
        self.periods[axis]
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periods[axis].is_some()
    }

    /// True when every axis is periodic (a torus chart).
    pub fn is_compact(&self) -> bool {
        self.periods.iter().all(Option::is_some)
    }

    /// Checks that `p` lies at least `margin` inside every non-periodic axis.
    pub fn check_margin(&self, p: &[f64], margin: f64) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: p.len(),
            });
        }
        for (axis, (iv, &x)) in self.bounds.iter().zip(p).enumerate() {
            if self.periods[axis].is_some() {
                continue;
            }
            if x - iv.lo < margin || iv.hi - x < margin {
                return Err(Error::Margin {
                    point: p.to_vec(),
                    axis,
                    margin,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(p)
                .enumerate()
                .all(|(axis, (iv, &x))| self.periods[axis].is_some() || (iv.lo <= x && x <= iv.hi))
    }

    /// Cartesian product: coordinates of `self` first, then `other`.
    pub fn product(&self, other: &Chart) -> Chart {
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(&other.bounds);
        let mut periods = self.periods.clone();
        periods.extend_from_slice(&other.periods);
        Chart { bounds, periods }
    }

    /// Evenly spaced tensor grid with `counts[axis]` points per axis, kept
    /// `margin` away from non-periodic ends. Periodic axes are sampled over a
    /// half-open period.
    pub fn grid(&self, counts: &[usize], margin: f64) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .zip(counts)
            .enumerate()
            .map(|(axis, (iv, &n))| {
                let n = n.max(1);
                if let Some(period) = self.periods[axis] {
                    (0..n)
                        .map(|i| iv.lo + period * (i as f64 + 0.5) / n as f64)
                        .collect()
                } else {
                    let lo = iv.lo + margin;
                    let hi = iv.hi - margin;
                    if n == 1 {
                        vec![0.5 * (lo + hi)]
                    } else {
                        (0..n)
                            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                            .collect()
                    }
                }
            })
            .collect();
        cartesian(&axes)
    }

    /// Uniform random interior points at least `margin` from non-periodic ends.
    pub fn sample_interior<R: Rng>(&self, n: usize, margin: f64, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                self.bounds
                    .iter()
                    .enumerate()
                    .map(|(axis, iv)| {
                        if self.periods[axis].is_some() {
                            rng.random_range(iv.lo..iv.hi)
                        } else {
                            rng.random_range(iv.lo + margin..iv.hi - margin)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Midpoint of the box.
    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|iv| 0.5 * (iv.lo + iv.hi)).collect()
    }
}

pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Chart::new(vec![Interval::closed(1.0, 0.0)]).is_err());
        assert!(Chart::new(vec![]).is_err());
    }

    #[test]
    fn rejects_nonpositive_period() {
        let c = Chart::cube(1, 0.0, 1.0).unwrap();
        assert!(c.clone().with_period(0, 0.0).is_err());
        assert!(c.with_period(3, 1.0).is_err());
    }

    #[test]
    fn margin_ignores_periodic_axes() {
        let c = Chart::cube(2, 0.0, 1.0).unwrap().with_period(1, 1.0).unwrap();
        assert!(c.check_margin(&[0.5, 0.0], 0.1).is_ok());
        assert!(matches!(
            c.check_margin(&[0.05, 0.5], 0.1),
            Err(Error::Margin { axis: 0, .. })
        ));
    }

    #[test]
    fn grid_has_tensor_size() {
        let c = Chart::cube(2, -1.0, 1.0).unwrap();
        let g = c.grid(&[3, 4], 0.1);
        assert_eq!(g.len(), 12);
        assert!((g[0][0] + 0.9).abs() < 1e-15);
        assert!((g[11][1] - 0.9).abs() < 1e-15);
    }
}
