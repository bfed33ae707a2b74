use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::DEFAULT_SET_TOL;
use crate::error::{Error, Result};
use crate::geometry::ConvexHull;
use crate::norm::PNorm;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Geometry of a compact set without its membership tolerance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Shape {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Hull(ConvexHull),
    /// Closed ε-neighbourhood of `base` in the given norm.
    Inflation {
        base: Box<Shape>,
        eps: f64,
        norm: PNorm,
    },
    /// Points whose Euclidean distance to the complement of `base` is at
    /// least `margin`, judged by a conservative margin estimate.
    Erosion {
        base: Box<Shape>,
        margin: f64,
    },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Hull(h) => h.dim(),
            Shape::Inflation { base, .. } => base.dim(),
            Shape::Erosion { base, .. } => base.dim(),
        }
    }

    /// Lower bound on the Euclidean distance from `x` to the complement;
    /// nonpositive outside.
    pub fn inner_margin(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Box { lo, hi } => (0..lo.len())
                .map(|i| (x[i] - lo[i]).min(hi[i] - x[i]))
                .fold(f64::INFINITY, f64::min),
            Shape::Hull(h) => {
                let dist = h.distance(x, PNorm::Two);
                if dist > 0.0 {
                    -dist
                } else {
                    h.interior_margin(x)
                }
            }
            Shape::Inflation { base, eps, norm } => {
                // radius of the Euclidean ball inside the unit ball of `norm`
                let c = match norm {
                    PNorm::One => 1.0 / (self.dim() as f64).sqrt(),
                    _ => 1.0,
                };
                let dist = base.distance(x, *norm);
                if dist > 0.0 {
                    (eps - dist) * c
                } else {
                    base.inner_margin(x).max(0.0) + eps * c
                }
            }
            Shape::Erosion { base, margin } => base.inner_margin(x) - margin,
        }
    }

    /// Distance from `x` measured in `norm` (0 inside).
    pub fn distance(&self, x: &[f64], norm: PNorm) -> f64 {
        match self {
            Shape::Box { lo, hi } => {
                let diff: Vec<f64> = (0..lo.len())
                    .map(|i| (lo[i] - x[i]).max(x[i] - hi[i]).max(0.0))
                    .collect();
                norm.of(&diff)
            }
            Shape::Hull(h) => h.distance(x, norm),
            Shape::Inflation {
                base,
                eps,
                norm: own,
            } => (base.distance(x, *own) - eps).max(0.0),
            Shape::Erosion { .. } => {
                let m = self.inner_margin(x);
                if m >= 0.0 {
                    0.0
                } else {
                    -m * norm_of_unit(norm, self.dim())
                }
            }
        }
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Shape::Box { lo, hi } => {
                (0..lo.len()).all(|i| x[i] >= lo[i] - tol && x[i] <= hi[i] + tol)
            }
            Shape::Hull(h) => h.contains(x, tol),
            Shape::Inflation { base, eps, norm } => base.distance(x, *norm) <= eps + tol,
            Shape::Erosion { base, margin } => {
                base.contains(x, tol) && base.inner_margin(x) >= margin - tol
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
            Shape::Hull(h) => h.bounding_box(),
            Shape::Inflation { base, eps, .. } => {
                let (lo, hi) = base.bounding_box();
                (
                    lo.iter().map(|v| v - eps).collect(),
                    hi.iter().map(|v| v + eps).collect(),
                )
            }
            Shape::Erosion { base, .. } => base.bounding_box(),
        }
    }
}

// largest `norm` length of a Euclidean unit vector
fn norm_of_unit(norm: PNorm, d: usize) -> f64 {
    match norm {
        PNorm::One => (d as f64).sqrt(),
        _ => 1.0,
    }
}

/// Compact subset of R^d with a closed-set membership tolerance `η`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompactSet {
    pub shape: Shape,
    pub tol: f64,
}

impl CompactSet {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Dimension(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
            return Err(Error::Domain(format!(
                "box requires lo <= hi (coordinate {i})"
            )));
        }
        Ok(CompactSet {
            shape: Shape::Box { lo, hi },
            tol: DEFAULT_SET_TOL,
        })
    }

    pub fn cube(dim: usize, r: f64) -> Self {
        CompactSet {
            shape: Shape::Box {
                lo: vec![-r; dim],
                hi: vec![r; dim],
            },
            tol: DEFAULT_SET_TOL,
        }
    }

    pub fn point(x: &[f64]) -> Self {
        CompactSet {
            shape: Shape::Box {
                lo: x.to_vec(),
                hi: x.to_vec(),
            },
            tol: DEFAULT_SET_TOL,
        }
    }

    pub fn hull(h: ConvexHull) -> Self {
        CompactSet {
            shape: Shape::Hull(h),
            tol: DEFAULT_SET_TOL,
        }
    }

    pub fn from_vertices(dim: usize, vertices: &[f64]) -> Result<Self> {
        Ok(Self::hull(ConvexHull::from_points(dim, vertices)?))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// `N_ε(S)`; nested inflations in the same norm merge.
    pub fn inflate(&self, eps: f64, norm: PNorm) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Domain(format!(
                "inflation radius must be >= 0, got {eps}"
            )));
        }
        let shape = match &self.shape {
            Shape::Inflation {
                base,
                eps: e0,
                norm: n0,
            } if *n0 == norm => Shape::Inflation {
                base: base.clone(),
                eps: e0 + eps,
                norm,
            },
            other => Shape::Inflation {
                base: Box::new(other.clone()),
                eps,
                norm,
            },
        };
        Ok(CompactSet {
            shape,
            tol: self.tol,
        })
    }

    /// Inner parallel set: points at Euclidean depth at least `margin`.
    pub fn eroded(&self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::Domain(format!(
                "erosion margin must be >= 0, got {margin}"
            )));
        }
        if margin == 0.0 {
            return Ok(self.clone());
        }
        let shape = match &self.shape {
            Shape::Erosion { base, margin: m0 } => Shape::Erosion {
                base: base.clone(),
                margin: m0 + margin,
            },
            other => Shape::Erosion {
                base: Box::new(other.clone()),
                margin,
            },
        };
        Ok(CompactSet {
            shape,
            tol: self.tol,
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().all(|v| v.is_finite()) && self.shape.contains(x, self.tol)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.shape.bounding_box()
    }

    /// Points of the regular grid `lo + k·pitch` over the bounding box that
    /// belong to the set.
    pub fn grid(&self, pitch: f64) -> Result<Vec<f64>> {
        if !(pitch > 0.0) {
            return Err(Error::Config(format!(
                "grid pitch must be positive, got {pitch}"
            )));
        }
        let (lo, hi) = self.bounding_box();
        let d = lo.len();
        let counts: Vec<usize> = (0..d)
            .map(|i| ((hi[i] - lo[i]) / pitch + 1e-9).floor() as usize + 1)
            .collect();
        let total: usize = counts.iter().product();
        if total > 50_000_000 {
            return Err(Error::Config(format!(
                "grid with pitch {pitch} has {total} nodes"
            )));
        }
        let mut out = Vec::new();
        let mut x = vec![0.0; d];
        for mut idx in 0..total {
            for i in 0..d {
                x[i] = lo[i] + (idx % counts[i]) as f64 * pitch;
                idx /= counts[i];
            }
            if self.contains(&x) {
                out.extend_from_slice(&x);
            }
        }
        Ok(out)
    }

    /// Image under `x -> P x` (`P` row-major, `rows x dim`). Boxes become
    /// hulls of their corner images; inflations grow by the operator norm
    /// of `P`, so the result contains the exact image.
    pub fn linear_image(&self, map: &[f64], rows: usize) -> Result<Self> {
        let shape = image_shape(&self.shape, map, rows)?;
        Ok(CompactSet {
            shape,
            tol: self.tol,
        })
    }

    /// `shape` scaled about the origin.
    pub fn scaled(&self, factor: f64) -> Self {
        let shape = scale_shape(&self.shape, factor);
        CompactSet {
            shape,
            tol: self.tol,
        }
    }
}

fn scale_shape(s: &Shape, factor: f64) -> Shape {
    match s {
        Shape::Box { lo, hi } => {
            let a: Vec<f64> = lo.iter().map(|v| v * factor).collect();
            let b: Vec<f64> = hi.iter().map(|v| v * factor).collect();
            Shape::Box {
                lo: a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(),
                hi: a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
            }
        }
        Shape::Hull(h) => Shape::Hull(h.scaled(factor)),
        Shape::Inflation { base, eps, norm } => Shape::Inflation {
            base: Box::new(scale_shape(base, factor)),
            eps: eps * factor.abs(),
            norm: *norm,
        },
        Shape::Erosion { base, margin } => Shape::Erosion {
            base: Box::new(scale_shape(base, factor)),
            margin: margin * factor.abs(),
        },
    }
}

fn image_shape(s: &Shape, map: &[f64], rows: usize) -> Result<Shape> {
    let d = s.dim();
    if map.len() != rows * d {
        return Err(Error::Dimension(
            "linear map does not match set dimension".into(),
        ));
    }
    match s {
        Shape::Box { lo, hi } => {
            if d > 16 {
                return Err(Error::Dimension("box image limited to dimension 16".into()));
            }
            let mut pts = Vec::with_capacity((1 << d) * rows);
            for mask in 0..(1usize << d) {
                let corner: Vec<f64> = (0..d)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect();
                for r in 0..rows {
                    pts.push((0..d).map(|c| map[r * d + c] * corner[c]).sum::<f64>());
                }
            }
            Ok(Shape::Hull(ConvexHull::from_points(rows, &pts)?))
        }
        Shape::Hull(h) => Ok(Shape::Hull(h.linear_image(map, rows)?)),
        Shape::Inflation { base, eps, norm } => {
            let m = nalgebra::DMatrix::from_row_slice(rows, d, map);
            let op = match norm {
                PNorm::Two => m.singular_values().iter().cloned().fold(0.0, f64::max),
                PNorm::One => (0..d)
                    .map(|c| (0..rows).map(|r| m[(r, c)].abs()).sum::<f64>())
                    .fold(0.0, f64::max),
                PNorm::Inf => (0..rows)
                    .map(|r| (0..d).map(|c| m[(r, c)].abs()).sum::<f64>())
                    .fold(0.0, f64::max),
            };
            Ok(Shape::Inflation {
                base: Box::new(image_shape(base, map, rows)?),
                eps: eps * op,
                norm: *norm,
            })
        }
        Shape::Erosion { .. } => Err(Error::Domain(
            "linear images of eroded sets are not supported".into(),
        )),
    }
}

/// Closed-set membership of `x` in `set` up to the set's tolerance.
pub fn membership(set: &CompactSet, x: &[f64]) -> bool {
    set.contains(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_membership() {
        let b = CompactSet::cube(2, 1.0);
        assert!(membership(&b, &[0.0, 0.0]));
        assert!(!membership(&b, &[1.5, 0.0]));
        assert!(membership(&b, &[1.0, -1.0]));
    }

    #[test]
    fn inflated_interval() {
        let b = CompactSet::cube(1, 1.0).inflate(0.6, PNorm::Two).unwrap();
        assert!(membership(&b, &[1.5]));
        assert!(!membership(&b, &[1.7]));
    }

    #[test]
    fn inflation_norms_differ_at_corner() {
        let b = CompactSet::cube(2, 1.0);
        let x = [1.4, 1.4];
        assert!(membership(&b.inflate(0.41, PNorm::Inf).unwrap(), &x));
        assert!(!membership(&b.inflate(0.41, PNorm::Two).unwrap(), &x));
        assert!(membership(&b.inflate(0.57, PNorm::Two).unwrap(), &x));
        assert!(!membership(&b.inflate(0.79, PNorm::One).unwrap(), &x));
    }

    #[test]
    fn grid_over_interval() {
        let k = CompactSet::boxed(vec![-0.8], vec![0.8]).unwrap();
        assert_eq!(k.grid(0.05).unwrap().len(), 33);
        assert_eq!(
            CompactSet::point(&[0.0, 0.0]).grid(0.1).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn image_of_box_is_hull_of_corners() {
        let b = CompactSet::cube(2, 1.0);
        let img = b.linear_image(&[1.0, 1.0], 1).unwrap();
        assert!(img.contains(&[2.0]) && !img.contains(&[2.1]));
    }

    #[test]
    fn erosion_shrinks_boxes_and_hulls() {
        let b = CompactSet::cube(2, 1.0).eroded(0.25).unwrap();
        assert!(b.contains(&[0.75, -0.75]) && !b.contains(&[0.8, 0.0]));
        let tri = CompactSet::from_vertices(2, &[0.0, 0.0, 4.0, 0.0, 0.0, 4.0]).unwrap();
        let e = tri.eroded(0.5).unwrap();
        assert!(e.contains(&[1.0, 1.0]) && !e.contains(&[0.4, 1.0]) && !e.contains(&[2.0, 1.9]));
        let q = CompactSet::cube(1, 1.0)
            .inflate(0.5, PNorm::Two)
            .unwrap()
            .eroded(0.5)
            .unwrap();
        assert!(q.contains(&[1.0]) && !q.contains(&[1.01]));
    }
}
