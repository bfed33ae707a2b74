use alloc::vec;
use alloc::vec::Vec;

use super::candidates::interval_count;
use super::coverage::Engine;
use crate::error::{Error, Result};
use crate::model::{CompactSet, Potential, QuantizedControl, System};
use crate::simulate::running_potential;
use crate::spectral::{hyperbolic_split, project_system};

#[derive(Debug, Clone, Copy)]
pub struct LowerBoundOptions {
    pub tau: f64,
    pub dt: f64,
    pub stride: usize,
    pub pitch: f64,
    pub use_projection: bool,
}

/// `(1/τ)(β + max{0, α})` with `β = min S_τ f` and `α = min ∫ div` over the
/// sampled pairs whose trajectory stays in `Q`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerBound {
    pub value: f64,
    pub tau: f64,
    pub beta: f64,
    pub alpha: f64,
    pub surviving_pairs: usize,
    pub surviving_candidates: usize,
    pub grid_points: usize,
    pub projected: bool,
    pub unstable_dim: Option<usize>,
}

impl LowerBound {
    pub(crate) fn assemble(
        tau: f64,
        beta: f64,
        alpha: f64,
        pairs: usize,
        cands: usize,
        points: usize,
    ) -> Self {
        LowerBound {
            value: (beta + alpha.max(0.0)) / tau,
            tau,
            beta,
            alpha,
            surviving_pairs: pairs,
            surviving_candidates: cands,
            grid_points: points,
            projected: false,
            unstable_dim: None,
        }
    }
}

struct Survivors {
    pairs: usize,
    candidates: usize,
    beta: f64,
    alpha: f64,
}

fn survivors(
    sys: &System,
    points: &[f64],
    q: &CompactSet,
    f: &Potential,
    candidates: &[QuantizedControl],
    opts: &LowerBoundOptions,
) -> Result<Survivors> {
    let d = sys.dim();
    let linear_alpha = sys.as_linear().map(|l| opts.tau * l.a().trace());
    let mut intervals = Vec::with_capacity(candidates.len());
    for c in candidates {
        let n = interval_count(opts.tau, c.step())?;
        if n > c.len() || c.input_dim() != sys.input_dim() {
            return Err(Error::Config(
                "lower-bound candidates must match the system and cover tau".into(),
            ));
        }
        intervals.push(n);
    }
    let run = |i: usize| -> (usize, f64) {
        let omega = &candidates[i];
        let mut engine = Engine::new(sys, opts.dt, opts.stride);
        let mut x = vec![0.0; d];
        let mut pairs = 0;
        let mut alpha = f64::INFINITY;
        for x0 in points.chunks_exact(d) {
            if !q.contains(x0) {
                continue;
            }
            x.copy_from_slice(x0);
            let mut g = 0;
            let ok = match linear_alpha {
                Some(a) => {
                    let ok = engine.advance(&mut x, omega, 0, intervals[i], &mut g, q, None);
                    if ok {
                        alpha = alpha.min(a);
                    }
                    ok
                }
                None => {
                    let mut acc = 0.0;
                    let mut trapezoid = |prev: &[f64], next: &[f64], u: &[f64], h: f64| {
                        acc += 0.5 * h * (sys.divergence(prev, u) + sys.divergence(next, u));
                    };
                    let ok = engine.advance(
                        &mut x,
                        omega,
                        0,
                        intervals[i],
                        &mut g,
                        q,
                        Some(&mut trapezoid),
                    );
                    if ok {
                        alpha = alpha.min(acc);
                    }
                    ok
                }
            };
            if ok {
                pairs += 1;
            }
        }
        (pairs, alpha)
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<(usize, f64)> = {
        use rayon::prelude::*;
        (0..candidates.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<(usize, f64)> = (0..candidates.len()).map(run).collect();

    let mut out = Survivors {
        pairs: 0,
        candidates: 0,
        beta: f64::INFINITY,
        alpha: f64::INFINITY,
    };
    for (i, (pairs, alpha)) in rows.into_iter().enumerate() {
        if pairs > 0 {
            out.pairs += pairs;
            out.candidates += 1;
            out.alpha = out.alpha.min(alpha);
            out.beta = out.beta.min(running_potential(f, &candidates[i], opts.tau));
        }
    }
    if out.pairs == 0 {
        return Err(Error::VacuousBound);
    }
    Ok(out)
}

/// Lower bound on the pressure from the sampled pairs `(x, ω) ∈ grid(K) ×
/// candidates`. With `use_projection` the computation runs on the unstable
/// subsystem with `πK` and `πQ`.
pub fn lower_bound(
    sys: &System,
    k: &CompactSet,
    q: &CompactSet,
    f: &Potential,
    candidates: &[QuantizedControl],
    opts: LowerBoundOptions,
) -> Result<LowerBound> {
    if !(opts.tau > 0.0) {
        return Err(Error::Config("lower-bound horizon must be positive".into()));
    }
    if !opts.use_projection {
        let points = k.grid(opts.pitch)?;
        let s = survivors(sys, &points, q, f, candidates, &opts)?;
        return Ok(LowerBound::assemble(
            opts.tau,
            s.beta,
            s.alpha,
            s.pairs,
            s.candidates,
            points.len() / sys.dim(),
        ));
    }
    let lin = sys.as_linear().ok_or_else(|| {
        Error::Config("projection onto the unstable subspace needs a linear system".into())
    })?;
    let split = hyperbolic_split(lin.a(), None)?;
    let du = split.unstable_dim();
    if du == 0 {
        // the projected state space is a point: every candidate survives
        let beta = candidates
            .iter()
            .map(|c| running_potential(f, c, opts.tau))
            .fold(f64::INFINITY, f64::min);
        if candidates.is_empty() {
            return Err(Error::VacuousBound);
        }
        let mut lb =
            LowerBound::assemble(opts.tau, beta, 0.0, candidates.len(), candidates.len(), 0);
        lb.projected = true;
        lb.unstable_dim = Some(0);
        return Ok(lb);
    }
    let proj = project_system(lin, &split)?;
    let map: Vec<f64> = (0..du)
        .flat_map(|r| (0..lin.dim()).map(move |c| (r, c)))
        .map(|(r, c)| proj.coordinates[(r, c)])
        .collect();
    let pk = k.linear_image(&map, du)?;
    let pq = q.linear_image(&map, du)?;
    let psys: System = proj.system.into();
    let points = pk.grid(opts.pitch)?;
    let s = survivors(&psys, &points, &pq, f, candidates, &opts)?;
    let mut lb = LowerBound::assemble(
        opts.tau,
        s.beta,
        s.alpha,
        s.pairs,
        s.candidates,
        points.len() / du,
    );
    lb.projected = true;
    lb.unstable_dim = Some(du);
    Ok(lb)
}
