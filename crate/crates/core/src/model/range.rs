use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::ConvexHull;

/// Compact convex set of admissible control values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ControlRange {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Hull(ConvexHull),
}

impl ControlRange {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Dimension(
                "control box bounds must be nonempty and of equal length".into(),
            ));
        }
        if let Some(i) =
            (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || !lo[i].is_finite() || !hi[i].is_finite())
        {
            return Err(Error::Domain(format!(
                "control box requires finite lo <= hi (coordinate {i})"
            )));
        }
        Ok(ControlRange::Box { lo, hi })
    }

    /// One-dimensional range `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn from_vertices(dim: usize, vertices: &[f64]) -> Result<Self> {
        Ok(ControlRange::Hull(ConvexHull::from_points(dim, vertices)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlRange::Box { lo, .. } => lo.len(),
            ControlRange::Hull(h) => h.dim(),
        }
    }

    /// Membership up to `tol`. Hulls always allow a rounding slack of 1e-12.
    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        if u.len() != self.dim() {
            return false;
        }
        match self {
            ControlRange::Box { lo, hi } => {
                (0..lo.len()).all(|i| u[i] >= lo[i] - tol && u[i] <= hi[i] + tol)
            }
            ControlRange::Hull(h) => h.contains(u, tol.max(1e-12)),
        }
    }

    /// Radius of the largest ball (max-norm for boxes) around `u` inside the
    /// range; negative outside.
    pub fn interior_margin(&self, u: &[f64]) -> f64 {
        match self {
            ControlRange::Box { lo, hi } => (0..lo.len())
                .map(|i| (u[i] - lo[i]).min(hi[i] - u[i]))
                .fold(f64::INFINITY, f64::min),
            ControlRange::Hull(h) => h.interior_margin(u),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ControlRange::Box { lo, hi } => (lo.clone(), hi.clone()),
            ControlRange::Hull(h) => h.bounding_box(),
        }
    }

    /// Extreme points: the 2^m corners of a box or the hull vertices.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            ControlRange::Box { lo, hi } => {
                let m = lo.len();
                let mut out = Vec::with_capacity(1 << m.min(20));
                for mask in 0..(1usize << m) {
                    out.push(
                        (0..m)
                            .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                            .collect(),
                    );
                }
                out.dedup();
                out
            }
            ControlRange::Hull(h) => h.vertices().map(|v| v.to_vec()).collect(),
        }
    }

    /// Per-coordinate level grid of the bounding box, `levels` values each,
    /// filtered by membership. Endpoints are hit exactly.
    pub fn level_grid(&self, levels: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let m = lo.len();
        let axis = |i: usize, k: usize| -> f64 {
            if levels <= 1 || k == 0 {
                lo[i]
            } else if k == levels - 1 {
                hi[i]
            } else {
                (lo[i] + (hi[i] - lo[i]) * (k as f64) / ((levels - 1) as f64)).clamp(lo[i], hi[i])
            }
        };
        let total = levels.pow(m as u32);
        let mut out = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut u = Vec::with_capacity(m);
            for i in 0..m {
                u.push(axis(i, idx % levels));
                idx /= levels;
            }
            if self.contains(&u, 0.0) {
                out.push(u);
            }
        }
        out
    }

    /// Nearest point of a box range (clamping); identity for hulls.
    pub fn clamp(&self, u: &[f64]) -> Vec<f64> {
        match self {
            ControlRange::Box { lo, hi } => {
                (0..lo.len()).map(|i| u[i].clamp(lo[i], hi[i])).collect()
            }
            ControlRange::Hull(_) => u.to_vec(),
        }
    }
}
