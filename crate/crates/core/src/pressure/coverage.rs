use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use fixedbitset::FixedBitSet;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::candidates::interval_count;
use crate::error::{Error, Result};
use crate::model::{CompactSet, Potential, QuantizedControl, System};
use crate::simulate::{running_potential, substeps, Propagator};

/// Fixed-step stepping with the spanning check schedule: `Q` is tested at
/// every `stride`-th global step and at the end of every control interval.
pub(crate) struct Engine<'a> {
    sys: &'a System,
    dt: f64,
    stride: usize,
    props: Vec<Propagator<'a>>,
    next: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(sys: &'a System, dt: f64, stride: usize) -> Self {
        Engine {
            sys,
            dt,
            stride: stride.max(1),
            props: Vec::new(),
            next: vec![0.0; sys.dim()],
        }
    }

    fn prop_index(&mut self, delta: f64) -> (usize, usize) {
        let s = substeps(delta, self.dt);
        let h = delta / s as f64;
        let idx = match self.props.iter().position(|p| p.h() == h) {
            Some(i) => i,
            None => {
                self.props.push(Propagator::new(self.sys, h));
                self.props.len() - 1
            }
        };
        (idx, s)
    }

    /// Advances `x` through intervals `from..to` of `omega`. `g` is the
    /// global step counter. Returns false as soon as a check fails.
    /// `on_step(prev, next, u, h)` sees every step.
    #[allow(clippy::too_many_arguments, clippy::type_complexity)]
    pub(crate) fn advance(
        &mut self,
        x: &mut Vec<f64>,
        omega: &QuantizedControl,
        from: usize,
        to: usize,
        g: &mut usize,
        q: &CompactSet,
        mut on_step: Option<&mut dyn FnMut(&[f64], &[f64], &[f64], f64)>,
    ) -> bool {
        let (pi, s) = self.prop_index(omega.step());
        let stride = self.stride;
        let Engine { props, next, .. } = self;
        let prop = &mut props[pi];
        let h = prop.h();
        for i in from..to {
            let u = omega.value(i);
            for k in 0..s {
                prop.step(x, u, next);
                if let Some(cb) = on_step.as_mut() {
                    cb(x, next, u, h);
                }
                core::mem::swap(x, next);
                *g += 1;
                if x.iter().any(|v| !v.is_finite()) {
                    return false;
                }
                if ((*g).is_multiple_of(stride) || k + 1 == s) && !q.contains(x) {
                    return false;
                }
            }
        }
        true
    }
}

/// Spanning relation between candidate controls and grid points of `K`.
#[derive(Debug, Clone)]
pub struct CoverageMatrix {
    /// May be empty for matrices built directly from sets.
    pub candidates: Vec<QuantizedControl>,
    point_count: usize,
    /// One bit set over the points per candidate.
    pub covers: Vec<FixedBitSet>,
    /// `(S_τ f)(ω)` per candidate.
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub tau: f64,
    pub dt: f64,
    pub stride: usize,
}

impl CoverageMatrix {
    /// Builds a matrix from explicit covered-point lists and weights.
    pub fn from_weights(
        point_count: usize,
        covers: &[Vec<usize>],
        weights: Vec<f64>,
        tau: f64,
    ) -> Result<Self> {
        if covers.len() != weights.len() {
            return Err(Error::Dimension("one weight per candidate required".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!(
                "candidate weights must be positive and finite, got {w}"
            )));
        }
        let mut sets = Vec::with_capacity(covers.len());
        for c in covers {
            let mut b = FixedBitSet::with_capacity(point_count);
            for &j in c {
                if j >= point_count {
                    return Err(Error::Dimension(format!("point index {j} out of range")));
                }
                b.insert(j);
            }
            sets.push(b);
        }
        Ok(CoverageMatrix {
            candidates: Vec::new(),
            point_count,
            covers: sets,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            tau,
            dt: 0.0,
            stride: 1,
        })
    }

    pub(crate) fn from_parts(
        candidates: Vec<QuantizedControl>,
        point_count: usize,
        covers: Vec<FixedBitSet>,
        log_weights: Vec<f64>,
        tau: f64,
        dt: f64,
        stride: usize,
    ) -> Result<Self> {
        let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Numeric(format!(
                "candidate weight {w} is not positive and finite"
            )));
        }
        Ok(CoverageMatrix {
            candidates,
            point_count,
            covers,
            log_weights,
            weights,
            tau,
            dt,
            stride,
        })
    }

    pub fn candidate_count(&self) -> usize {
        self.covers.len()
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn covers(&self, candidate: usize, point: usize) -> bool {
        self.covers[candidate].contains(point)
    }

    /// Points covered by no candidate.
    pub fn uncovered(&self) -> Vec<usize> {
        let mut all = FixedBitSet::with_capacity(self.point_count);
        for c in &self.covers {
            all.union_with(c);
        }
        all.toggle_range(..);
        all.ones().collect()
    }

    /// The same relation for the potential `f + c`: every weight gains the
    /// factor `e^{cτ}`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let log_weights: Vec<f64> = self.log_weights.iter().map(|l| l + c * self.tau).collect();
        let mut out = self.clone();
        out.weights = log_weights.iter().map(|l| l.exp()).collect();
        out.log_weights = log_weights;
        if let Some(w) = out.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Numeric(format!(
                "shifted weight {w} is not positive and finite"
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoverageOptions {
    pub tau: f64,
    pub dt: f64,
    pub stride: usize,
}

fn candidate_row(
    sys: &System,
    points: &[f64],
    q: &CompactSet,
    omega: &QuantizedControl,
    intervals: usize,
    opts: &CoverageOptions,
) -> FixedBitSet {
    let d = sys.dim();
    let count = points.len() / d;
    let mut row = FixedBitSet::with_capacity(count);
    let mut engine = Engine::new(sys, opts.dt, opts.stride);
    let mut x = vec![0.0; d];
    for j in 0..count {
        let x0 = &points[j * d..(j + 1) * d];
        if !q.contains(x0) {
            continue;
        }
        x.copy_from_slice(x0);
        let mut g = 0;
        if engine.advance(&mut x, omega, 0, intervals, &mut g, q, None) {
            row.insert(j);
        }
    }
    row
}

/// Coverage of explicit points (row-major) by `candidates` on `[0, τ]`.
pub fn coverage_for_points(
    sys: &System,
    points: &[f64],
    q: &CompactSet,
    f: &Potential,
    candidates: &[QuantizedControl],
    opts: CoverageOptions,
) -> Result<CoverageMatrix> {
    let d = sys.dim();
    if points.is_empty() || !points.len().is_multiple_of(d) {
        return Err(Error::Config("K grid is empty".into()));
    }
    if q.dim() != d {
        return Err(Error::Dimension(
            "Q does not match the state dimension".into(),
        ));
    }
    let mut rows_meta = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        if c.input_dim() != sys.input_dim() {
            return Err(Error::Dimension(format!(
                "candidate {i} has the wrong input dimension"
            )));
        }
        let n = interval_count(opts.tau, c.step())?;
        if n > c.len() {
            return Err(Error::Config(format!(
                "candidate {i} is shorter than tau={}",
                opts.tau
            )));
        }
        rows_meta.push(n);
    }
    let run = |i: usize| candidate_row(sys, points, q, &candidates[i], rows_meta[i], &opts);
    #[cfg(feature = "parallel")]
    let covers: Vec<FixedBitSet> = {
        use rayon::prelude::*;
        (0..candidates.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let covers: Vec<FixedBitSet> = (0..candidates.len()).map(run).collect();

    let log_weights = candidates
        .iter()
        .map(|c| running_potential(f, c, opts.tau))
        .collect();
    CoverageMatrix::from_parts(
        candidates.to_vec(),
        points.len() / d,
        covers,
        log_weights,
        opts.tau,
        opts.dt,
        opts.stride,
    )
}

/// Coverage of the `pitch`-grid over `K`.
pub fn coverage_map(
    sys: &System,
    k: &CompactSet,
    pitch: f64,
    q: &CompactSet,
    f: &Potential,
    candidates: &[QuantizedControl],
    opts: CoverageOptions,
) -> Result<CoverageMatrix> {
    let points = k.grid(pitch)?;
    coverage_for_points(sys, &points, q, f, candidates, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControlRange, LinearSystem};

    fn scalar() -> System {
        LinearSystem::from_rows(
            1,
            1,
            &[1.0],
            &[1.0],
            ControlRange::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap()
        .into()
    }

    fn covered(x0: f64, u: f64) -> bool {
        let q = CompactSet::cube(1, 1.0);
        let omega = QuantizedControl::constant(1.0, 1, &[u]).unwrap();
        let opts = CoverageOptions {
            tau: 1.0,
            dt: 1e-3,
            stride: 1,
        };
        let m =
            coverage_for_points(&scalar(), &[x0], &q, &Potential::zero(), &[omega], opts).unwrap();
        m.covers(0, 0)
    }

    #[test]
    fn equilibrium_point_is_covered() {
        assert!(covered(0.0, 0.0));
    }

    #[test]
    fn pushed_out_point_is_not_covered() {
        // x(t) = 1.9 e^t - 1 exceeds 1 immediately
        assert!(!covered(0.9, 1.0));
    }

    #[test]
    fn pulled_back_point_follows_the_integrator() {
        // with u = -1, x(t) = 1 + (x0 - 1) e^t; from 0.5 this reaches -1
        // only at t = ln 4 > 1
        let traj = crate::simulate::integrate_trajectory(
            &scalar(),
            &[0.5],
            &QuantizedControl::constant(1.0, 1, &[-1.0]).unwrap(),
            1.0,
            1e-3,
        )
        .unwrap();
        let inside = (0..traj.len()).all(|k| traj.state(k)[0].abs() <= 1.0);
        assert_eq!(covered(0.5, -1.0), inside);
        assert!(inside);
    }

    #[test]
    fn weights_and_uncovered_points() {
        let m =
            CoverageMatrix::from_weights(3, &[vec![0], vec![0, 1]], vec![1.0, 2.0], 1.0).unwrap();
        assert_eq!(m.uncovered(), vec![2]);
        let s = m.shifted(0.5).unwrap();
        assert!((s.weights[1] - 2.0 * 0.5f64.exp()).abs() < 1e-14);
        assert!(CoverageMatrix::from_weights(1, &[vec![0]], vec![0.0], 1.0).is_err());
    }
}
