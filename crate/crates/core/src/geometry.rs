//! Convex polytopes given by vertex lists.
//!
//! Dimensions one and two carry an explicit half-space description, so
//! membership and distance queries are closed-form. From dimension three on
//! the hull is kept as a vertex list and queries go through small LPs.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp;
use crate::norm::PNorm;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Unit outward normal `n` and offset `c` of a facet `n·x <= c`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvexHull {
    dim: usize,
    /// Row-major vertex coordinates. In 2-D they are in counter-clockwise order.
    vertices: Vec<f64>,
    /// Empty in dimension >= 3.
    facets: Vec<Facet>,
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl ConvexHull {
    /// Hull of a point cloud (row-major, `dim` coordinates per point).
    pub fn from_points(dim: usize, points: &[f64]) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::Dimension("point cloud is empty or ragged".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite point in hull input".into()));
        }
        match dim {
            1 => {
                let lo = points.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(Self::interval(lo, hi))
            }
            2 => Ok(Self::monotone_chain(points)),
            _ => Ok(Self::support_hull(dim, points)),
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        let vertices = if lo == hi { vec![lo] } else { vec![lo, hi] };
        ConvexHull {
            dim: 1,
            vertices,
            facets: vec![
                Facet {
                    normal: vec![-1.0],
                    offset: -lo,
                },
                Facet {
                    normal: vec![1.0],
                    offset: hi,
                },
            ],
        }
    }

    fn monotone_chain(points: &[f64]) -> Self {
        let mut pts: Vec<[f64; 2]> = points.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
        if pts.len() < 3 {
            hull = pts.clone();
        } else {
            for p in pts.iter() {
                while hull.len() >= 2
                    && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
                {
                    hull.pop();
                }
                hull.push(*p);
            }
            let lower = hull.len() + 1;
            for p in pts.iter().rev().skip(1) {
                while hull.len() >= lower
                    && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
                {
                    hull.pop();
                }
                hull.push(*p);
            }
            hull.pop();
        }
        let mut facets = Vec::with_capacity(hull.len());
        let k = hull.len();
        if k >= 3 {
            for i in 0..k {
                let a = hull[i];
                let b = hull[(i + 1) % k];
                let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                let len = (ex * ex + ey * ey).sqrt();
                // counter-clockwise order: outward normal is (ey, -ex)
                let normal = vec![ey / len, -ex / len];
                let offset = normal[0] * a[0] + normal[1] * a[1];
                facets.push(Facet { normal, offset });
            }
        }
        ConvexHull {
            dim: 2,
            vertices: hull.iter().flat_map(|p| p.iter().copied()).collect(),
            facets,
        }
    }

    /// Support points along coordinate axes and pseudo-random directions.
    fn support_hull(dim: usize, points: &[f64]) -> Self {
        let count = points.len() / dim;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed0f_4011);
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = s;
                dirs.push(e);
            }
        }
        for _ in 0..(64 * dim * dim) {
            let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            dirs.push(v);
        }
        let mut chosen: Vec<usize> = dirs
            .iter()
            .map(|d| {
                (0..count)
                    .max_by(|&a, &b| {
                        let da: f64 = (0..dim).map(|i| d[i] * points[a * dim + i]).sum();
                        let db: f64 = (0..dim).map(|i| d[i] * points[b * dim + i]).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap()
            })
            .collect();
        chosen.sort_unstable();
        chosen.dedup();
        ConvexHull {
            dim,
            vertices: chosen
                .iter()
                .flat_map(|&k| points[k * dim..(k + 1) * dim].iter().copied())
                .collect(),
            facets: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.dim)
    }

    pub fn vertex_data(&self) -> &[f64] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if self.dim == 2 && self.facets.len() >= 8 {
            if let Some(inside) = self.fan_test(x, tol) {
                return inside;
            }
        }
        if self.dim <= 2 && !self.facets.is_empty() {
            return self.facets.iter().all(|f| {
                f.normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() <= f.offset + tol
            });
        }
        self.distance(x, PNorm::Inf) <= tol
    }

    /// Logarithmic membership for large polygons: locate `x` in the fan of
    /// triangles at vertex 0 and test the one boundary edge of its triangle.
    /// `None` near the boundary or outside the fan, where the full facet
    /// test decides.
    fn fan_test(&self, x: &[f64], tol: f64) -> Option<bool> {
        let k = self.facets.len();
        let v = |i: usize| &self.vertices[2 * i..2 * i + 2];
        let p = v(0);
        if cross(p, v(1), x) < 0.0 || cross(p, v(k - 1), x) > 0.0 {
            return None;
        }
        // largest i in [1, k-2] with x left of or on the ray p -> v_i
        let (mut lo, mut hi) = (1, k - 2);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if cross(p, v(mid), x) >= 0.0 {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let f = &self.facets[lo];
        let s = f.normal[0] * x[0] + f.normal[1] * x[1] - f.offset;
        if s <= -1e-12 * (1.0 + f.offset.abs()) {
            Some(true)
        } else if s > tol {
            Some(false)
        } else {
            None
        }
    }

    /// Distance from `x` to the hull in the given norm (0 inside).
    pub fn distance(&self, x: &[f64], norm: PNorm) -> f64 {
        match self.dim {
            1 => {
                let lo = self.vertices[0];
                let hi = *self.vertices.last().unwrap();
                (lo - x[0]).max(x[0] - hi).max(0.0)
            }
            2 if self.facets.is_empty() => {
                // point or segment
                let vs: Vec<&[f64]> = self.vertices().collect();
                if vs.len() == 1 {
                    norm.of(&[x[0] - vs[0][0], x[1] - vs[0][1]])
                } else {
                    segment_distance(vs[0], vs[1], x, norm)
                }
            }
            2 => {
                if self.contains(x, 0.0) {
                    return 0.0;
                }
                let vs: Vec<&[f64]> = self.vertices().collect();
                let k = vs.len();
                (0..k)
                    .map(|i| segment_distance(vs[i], vs[(i + 1) % k], x, norm))
                    .fold(f64::INFINITY, f64::min)
            }
            _ => match norm {
                PNorm::Inf => lp::hull_distance_inf(&self.vertices, self.dim, x),
                PNorm::One => lp::hull_distance_one(&self.vertices, self.dim, x),
                PNorm::Two => self.euclidean_distance_iterative(x),
            },
        }
    }

    /// Projected gradient with momentum on the simplex weights.
    fn euclidean_distance_iterative(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let k = self.vertex_count();
        let v = &self.vertices;
        let lipschitz: f64 = (0..k)
            .map(|j| (0..d).map(|i| v[j * d + i] * v[j * d + i]).sum::<f64>())
            .sum::<f64>()
            .max(1e-300);
        let step = 1.0 / lipschitz;
        let mut lam = vec![1.0 / k as f64; k];
        let mut y = lam.clone();
        let mut t = 1.0f64;
        let mut residual = vec![0.0; d];
        for _ in 0..20_000 {
            for i in 0..d {
                residual[i] = (0..k).map(|j| v[j * d + i] * y[j]).sum::<f64>() - x[i];
            }
            let mut next: Vec<f64> = (0..k)
                .map(|j| y[j] - step * (0..d).map(|i| v[j * d + i] * residual[i]).sum::<f64>())
                .collect();
            project_simplex(&mut next);
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let mut change = 0.0f64;
            for j in 0..k {
                change = change.max((next[j] - lam[j]).abs());
                y[j] = next[j] + (t - 1.0) / t_next * (next[j] - lam[j]);
            }
            lam = next;
            t = t_next;
            if change < 1e-15 {
                break;
            }
        }
        let p: Vec<f64> = (0..d)
            .map(|i| (0..k).map(|j| v[j * d + i] * lam[j]).sum::<f64>() - x[i])
            .collect();
        PNorm::Two.of(&p)
    }

    /// Largest `r` (lower bound in d >= 3) such that the ball around `x` of
    /// radius `r` lies in the hull; negative outside.
    pub fn interior_margin(&self, x: &[f64]) -> f64 {
        if self.dim <= 2 && !self.facets.is_empty() {
            return self
                .facets
                .iter()
                .map(|f| f.offset - f.normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
        }
        if self.dim == 2 {
            return -self.distance(x, PNorm::Two);
        }
        if !self.contains(x, 0.0) {
            return -self.distance(x, PNorm::Two);
        }
        // bisection on the cross-polytope x ± r e_i, whose inradius is r / sqrt(d)
        let (lo, hi) = self.bounding_box();
        let mut top = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let mut bottom = 0.0;
        for _ in 0..40 {
            let mid = 0.5 * (top + bottom);
            let ok = (0..self.dim).all(|i| {
                [mid, -mid].iter().all(|s| {
                    let mut y = x.to_vec();
                    y[i] += s;
                    self.contains(&y, 0.0)
                })
            });
            if ok {
                bottom = mid;
            } else {
                top = mid;
            }
        }
        bottom / (self.dim as f64).sqrt()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in self.vertices() {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    /// Lebesgue measure in dimensions one and two; in higher dimensions the
    /// product of the singular values of the centred vertex cloud.
    pub fn volume(&self) -> f64 {
        match self.dim {
            1 => {
                let (lo, hi) = self.bounding_box();
                hi[0] - lo[0]
            }
            2 => {
                let vs: Vec<&[f64]> = self.vertices().collect();
                let k = vs.len();
                if k < 3 {
                    return 0.0;
                }
                0.5 * (0..k)
                    .map(|i| {
                        let (a, b) = (vs[i], vs[(i + 1) % k]);
                        a[0] * b[1] - a[1] * b[0]
                    })
                    .sum::<f64>()
                    .abs()
            }
            d => {
                let k = self.vertex_count();
                if k <= d {
                    return 0.0;
                }
                let mean: Vec<f64> = (0..d)
                    .map(|i| self.vertices().map(|v| v[i]).sum::<f64>() / k as f64)
                    .collect();
                let m = nalgebra::DMatrix::from_fn(k, d, |r, c| self.vertices[r * d + c] - mean[c]);
                let sv = m.singular_values();
                sv.iter().product::<f64>() / (k as f64).powf(d as f64 / 2.0)
            }
        }
    }

    /// Image under `x -> factor * x`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.vertices.iter_mut() {
            *v *= factor;
        }
        if self.dim == 1 && factor < 0.0 {
            out.vertices.reverse();
        }
        if factor >= 0.0 {
            for f in out.facets.iter_mut() {
                f.offset *= factor;
            }
        } else {
            return ConvexHull::from_points(self.dim, &out.vertices).unwrap_or(out);
        }
        out
    }

    /// Image under a linear map given row-major as `rows x dim`.
    pub fn linear_image(&self, map: &[f64], rows: usize) -> Result<Self> {
        let d = self.dim;
        if map.len() != rows * d {
            return Err(Error::Dimension(
                "linear map does not match hull dimension".into(),
            ));
        }
        let pts: Vec<f64> = self
            .vertices()
            .flat_map(|v| {
                (0..rows).map(move |r| (0..d).map(|c| map[r * d + c] * v[c]).sum::<f64>())
            })
            .collect();
        ConvexHull::from_points(rows, &pts)
    }
}

/// Distance from `x` to the segment `[a, b]` in the given norm.
fn segment_distance(a: &[f64], b: &[f64], x: &[f64], norm: PNorm) -> f64 {
    let at = |s: f64| -> f64 {
        let diff: Vec<f64> = (0..a.len())
            .map(|i| x[i] - (a[i] + s * (b[i] - a[i])))
            .collect();
        norm.of(&diff)
    };
    if let PNorm::Two = norm {
        let e: Vec<f64> = (0..a.len()).map(|i| b[i] - a[i]).collect();
        let ee: f64 = e.iter().map(|v| v * v).sum();
        let s = if ee == 0.0 {
            0.0
        } else {
            ((0..a.len()).map(|i| (x[i] - a[i]) * e[i]).sum::<f64>() / ee).clamp(0.0, 1.0)
        };
        return at(s);
    }
    // convex in s: golden-section search
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..120 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if at(m1) <= at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.5 * (lo + hi)).min(at(0.0)).min(at(1.0))
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ConvexHull {
        ConvexHull::from_points(
            2,
            &[
                -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 0.0, 0.0, 0.5, 0.2,
            ],
        )
        .unwrap()
    }

    #[test]
    fn monotone_chain_drops_interior_points() {
        let h = square();
        assert_eq!(h.vertex_count(), 4);
        assert!((h.volume() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn half_space_membership_and_margin() {
        let h = square();
        assert!(h.contains(&[0.0, 0.0], 0.0));
        assert!(h.contains(&[1.0, 1.0], 1e-12));
        assert!(!h.contains(&[1.5, 0.0], 1e-9));
        assert!((h.interior_margin(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((h.interior_margin(&[0.5, 0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn planar_distances_per_norm() {
        let h = square();
        let x = [2.0, 3.0];
        assert!((h.distance(&x, PNorm::Two) - 5.0f64.sqrt()).abs() < 1e-12);
        assert!((h.distance(&x, PNorm::One) - 3.0).abs() < 1e-9);
        assert!((h.distance(&x, PNorm::Inf) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cube_queries_through_lp() {
        let mut pts = Vec::new();
        for &a in &[-1.0, 1.0] {
            for &b in &[-1.0, 1.0] {
                for &c in &[-1.0, 1.0] {
                    pts.extend_from_slice(&[a, b, c]);
                }
            }
        }
        pts.extend_from_slice(&[0.1, 0.2, 0.3]);
        let h = ConvexHull::from_points(3, &pts).unwrap();
        assert_eq!(h.vertex_count(), 8);
        assert!(h.contains(&[0.5, -0.5, 0.9], 1e-9));
        assert!(!h.contains(&[1.2, 0.0, 0.0], 1e-9));
        assert!((h.distance(&[2.0, 0.0, 0.0], PNorm::Two) - 1.0).abs() < 1e-6);
        assert!((h.distance(&[2.0, 2.0, 0.0], PNorm::One) - 2.0).abs() < 1e-9);
        let m = h.interior_margin(&[0.0, 0.0, 0.0]);
        assert!(m > 0.5 && m <= 1.0, "margin {m}");
    }

    #[test]
    fn scaling_and_images() {
        let h = square().scaled(0.5);
        assert!(h.contains(&[0.5, 0.5], 1e-12));
        assert!(!h.contains(&[0.6, 0.0], 1e-12));
        let proj = square().linear_image(&[1.0, 0.0], 1).unwrap();
        assert_eq!(proj.bounding_box(), (vec![-1.0], vec![1.0]));
    }

    #[test]
    fn fan_membership_matches_facet_test() {
        let pts: Vec<f64> = (0..40)
            .flat_map(|i| {
                let t = i as f64 * core::f64::consts::TAU / 40.0;
                [1.3 * t.cos() + 0.2, 0.7 * t.sin() - 0.1]
            })
            .collect();
        let h = ConvexHull::from_points(2, &pts).unwrap();
        assert!(h.facets().len() >= 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let x = [
                rng.random::<f64>() * 3.2 - 1.4,
                rng.random::<f64>() * 1.8 - 1.0,
            ];
            let full = h
                .facets()
                .iter()
                .all(|f| f.normal[0] * x[0] + f.normal[1] * x[1] <= f.offset + 1e-9);
            assert_eq!(h.contains(&x, 1e-9), full, "{x:?}");
        }
    }
}
