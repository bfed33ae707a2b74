//! Monte-Carlo approximation of the control set of a controllable
//! hyperbolic linear system.
//!
//! Random piecewise-constant controls are run from the origin forward in
//! time and under the time-reversed dynamics. Every recorded point of a
//! forward path lies in the positive orbit of 0, every backward point in the
//! negative orbit, and the estimate is the hull of the points of each cloud
//! that fall inside the hull of the other.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::ConvexHull;
use crate::model::{CompactSet, ControlRange, LinearSystem, QuantizedControl, System};
use crate::simulate::integrate_trajectory;
use crate::spectral::check_linear_hypotheses;

/// Points recorded per sample path (plus the end point).
const POINTS_PER_PATH: usize = 256;
/// Cap on cross-membership tests in dimension >= 3, where each is an LP.
const HIGH_DIM_TEST_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy)]
pub struct ControlSetOptions {
    pub samples: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for ControlSetOptions {
    fn default() -> Self {
        ControlSetOptions {
            samples: 2000,
            horizon: 8.0,
            dt: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlSetApprox {
    dim: usize,
    /// Row-major points from the forward runs.
    pub forward: Vec<f64>,
    /// Row-major points from the time-reversed runs.
    pub backward: Vec<f64>,
    pub hull: ConvexHull,
    /// Margin of the origin inside `hull`.
    pub interior_margin: f64,
    pub options: ControlSetOptions,
    /// Sample paths dropped because the state left the floating-point range.
    pub discarded: usize,
}

impl ControlSetApprox {
    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn random_value(range: &ControlRange, vertices: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    if rng.random::<f64>() < 0.75 {
        return vertices[rng.random_range(0..vertices.len())].clone();
    }
    match range {
        ControlRange::Box { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect(),
        ControlRange::Hull(_) => {
            // exponential weights give a uniform point of the simplex over the vertices
            let w: Vec<f64> = vertices
                .iter()
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let total: f64 = w.iter().sum();
            let m = range.dim();
            let mut u = vec![0.0; m];
            for (v, wi) in vertices.iter().zip(&w) {
                for k in 0..m {
                    u[k] += v[k] * wi / total;
                }
            }
            range.clamp(&u)
        }
    }
}

/// The `index`-th random control: a log-uniform step in `[T/64, T]` and
/// bang-bang biased values.
fn sample_control(
    range: &ControlRange,
    vertices: &[Vec<f64>],
    horizon: f64,
    seed: u64,
    index: u64,
) -> QuantizedControl {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let step = horizon * 64f64.powf(-rng.random::<f64>());
    let intervals = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let mut values = Vec::with_capacity(intervals * range.dim());
    for _ in 0..intervals {
        values.extend(random_value(range, vertices, &mut rng));
    }
    QuantizedControl::unchecked(step, range.dim(), values).expect("positive step")
}

/// Recorded points along the path, or `None` when the path blows up.
fn sample_path(
    sys: &System,
    omega: &QuantizedControl,
    opts: &ControlSetOptions,
) -> Option<Vec<f64>> {
    let d = sys.dim();
    let traj = integrate_trajectory(sys, &vec![0.0; d], omega, opts.horizon, opts.dt).ok()?;
    let stride = (traj.len() / POINTS_PER_PATH).max(1);
    let mut pts = Vec::with_capacity((traj.len() / stride + 2) * d);
    for k in (0..traj.len()).step_by(stride) {
        pts.extend_from_slice(traj.state(k));
    }
    if (traj.len() - 1) % stride != 0 {
        pts.extend_from_slice(traj.end());
    }
    if pts.iter().any(|v| !(v.abs() < 1e150)) {
        return None;
    }
    Some(pts)
}

fn cloud(sys: &System, opts: &ControlSetOptions, stream_offset: u64) -> (Vec<f64>, usize) {
    let range = sys.range();
    let vertices = range.vertices();
    let run = |i: usize| {
        let omega = sample_control(
            range,
            &vertices,
            opts.horizon,
            opts.seed,
            stream_offset + i as u64,
        );
        sample_path(sys, &omega, opts)
    };
    #[cfg(feature = "parallel")]
    let paths: Vec<Option<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..opts.samples).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let paths: Vec<Option<Vec<f64>>> = (0..opts.samples).map(run).collect();

    let mut out = Vec::new();
    let mut discarded = 0;
    for p in paths {
        match p {
            Some(p) => out.extend(p),
            None => discarded += 1,
        }
    }
    (out, discarded)
}

fn points_inside(points: &[f64], dim: usize, hull: &ConvexHull, out: &mut Vec<f64>) {
    let (lo, hi) = hull.bounding_box();
    let scale = lo.iter().chain(&hi).fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let boxed: Vec<&[f64]> = points
        .chunks_exact(dim)
        .filter(|p| {
            p.iter()
                .zip(lo.iter().zip(&hi))
                .all(|(x, (a, b))| *x >= a - tol && *x <= b + tol)
        })
        .collect();
    let stride = if dim >= 3 {
        (boxed.len() / HIGH_DIM_TEST_CAP).max(1)
    } else {
        1
    };
    for p in boxed.into_iter().step_by(stride) {
        if hull.contains(p, tol) {
            out.extend_from_slice(p);
        }
    }
}

/// Estimates the control set `D` of `sys` as a convex polytope.
pub fn estimate_control_set(
    sys: &LinearSystem,
    opts: ControlSetOptions,
) -> Result<ControlSetApprox> {
    check_linear_hypotheses(sys, 0.0, None)?;
    if opts.samples == 0 || !(opts.horizon > 0.0) || !(opts.dt > 0.0) {
        return Err(Error::Config(
            "control-set sampling needs samples > 0, horizon > 0 and dt > 0".into(),
        ));
    }
    let d = sys.dim();
    let fwd_sys: System = sys.clone().into();
    let bwd_sys: System = sys.time_reversed().into();
    let (forward, lost_f) = cloud(&fwd_sys, &opts, 0);
    let (backward, lost_b) = cloud(&bwd_sys, &opts, opts.samples as u64);
    if forward.is_empty() || backward.is_empty() {
        return Err(Error::Degenerate { volume: 0.0 });
    }
    let fwd_hull = ConvexHull::from_points(d, &forward)?;
    let bwd_hull = ConvexHull::from_points(d, &backward)?;
    let mut common = Vec::new();
    points_inside(&forward, d, &bwd_hull, &mut common);
    points_inside(&backward, d, &fwd_hull, &mut common);
    if common.is_empty() {
        return Err(Error::Degenerate { volume: 0.0 });
    }
    let hull = ConvexHull::from_points(d, &common)?;
    let volume = hull.volume();
    if !(volume >= 1e-12) {
        return Err(Error::Degenerate { volume });
    }
    let interior_margin = hull.interior_margin(&vec![0.0; d]);
    if !(interior_margin > 0.0) {
        return Err(Error::NotInterior {
            margin: interior_margin,
        });
    }
    Ok(ControlSetApprox {
        dim: d,
        forward,
        backward,
        hull,
        interior_margin,
        options: opts,
        discarded: lost_f + lost_b,
    })
}

/// The estimated hull scaled about the origin by `factor ∈ (0, 1]`.
pub fn shrink_hull(approx: &ControlSetApprox, factor: f64) -> Result<CompactSet> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::Config("shrink factor must lie in (0, 1]".into()));
    }
    Ok(CompactSet::hull(approx.hull.scaled(factor)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> LinearSystem {
        LinearSystem::from_rows(
            1,
            1,
            &[1.0],
            &[1.0],
            ControlRange::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn opts(samples: usize, horizon: f64) -> ControlSetOptions {
        ControlSetOptions {
            samples,
            horizon,
            dt: 0.01,
            seed: 7,
        }
    }

    #[test]
    fn scalar_hull_near_analytic_set() {
        let est = estimate_control_set(&scalar(), opts(2000, 8.0)).unwrap();
        let (lo, hi) = est.hull.bounding_box();
        assert!(
            (lo[0] + 1.0).abs() <= 0.05 && (hi[0] - 1.0).abs() <= 0.05,
            "{lo:?} {hi:?}"
        );
        assert!(lo[0] > -1.0 && hi[0] < 1.0);
    }

    #[test]
    fn endpoints_approach_one_with_horizon() {
        let mut last = 0.0;
        for h in [2.0, 4.0, 8.0] {
            let est = estimate_control_set(&scalar(), opts(400, h)).unwrap();
            let (lo, hi) = est.hull.bounding_box();
            let reach = hi[0].min(-lo[0]);
            assert!(reach >= last - 1e-12, "horizon {h}: {reach} < {last}");
            last = reach;
        }
    }

    #[test]
    fn spiral_hull_bounded_with_origin_inside() {
        let sys = LinearSystem::from_rows(
            2,
            1,
            &[1.0, -1.0, 1.0, 1.0],
            &[0.0, 1.0],
            ControlRange::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        let est = estimate_control_set(&sys, opts(500, 6.0)).unwrap();
        assert!(est.interior_margin > 0.0);
        let (lo, hi) = est.hull.bounding_box();
        assert!(lo.iter().chain(&hi).all(|v| v.abs() < 10.0));
    }

    #[test]
    fn center_rejected() {
        let sys = LinearSystem::from_rows(
            2,
            1,
            &[0.0, 1.0, -1.0, 0.0],
            &[0.0, 1.0],
            ControlRange::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            estimate_control_set(&sys, opts(10, 1.0)),
            Err(Error::NotHyperbolic { .. })
        ));
    }

    #[test]
    fn shrink_scales_about_origin() {
        let est = estimate_control_set(&scalar(), opts(200, 4.0)).unwrap();
        let full = shrink_hull(&est, 1.0).unwrap();
        assert_eq!(full.bounding_box(), est.hull.bounding_box());
        let half = shrink_hull(&est, 0.5).unwrap();
        let (lo, hi) = half.bounding_box();
        let (flo, fhi) = full.bounding_box();
        assert!((lo[0] - 0.5 * flo[0]).abs() < 1e-15 && (hi[0] - 0.5 * fhi[0]).abs() < 1e-15);
        let inner = shrink_hull(&est, 0.9).unwrap();
        for k in -100..=100 {
            let x = [k as f64 / 100.0];
            assert!(!inner.contains(&x) || full.contains(&x));
        }
        assert!(shrink_hull(&est, 0.0).is_err());
    }

    #[test]
    fn more_samples_never_shrink_forward_hull() {
        let fwd: System = scalar().into();
        let (small, _) = cloud(&fwd, &opts(100, 4.0), 0);
        let (large, _) = cloud(&fwd, &opts(200, 4.0), 0);
        let h_large = ConvexHull::from_points(1, &large).unwrap();
        let h_small = ConvexHull::from_points(1, &small).unwrap();
        for v in h_small.vertices() {
            assert!(h_large.contains(v, 0.0));
        }
    }
}
