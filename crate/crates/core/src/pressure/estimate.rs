use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use fixedbitset::FixedBitSet;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::candidates::{build_candidates, interval_count};
use super::cover::{min_weight_cover, CoverMethod, DEFAULT_EXACT_THRESHOLD};
use super::coverage::{CoverageMatrix, Engine};
use super::lower::{lower_bound, LowerBound, LowerBoundOptions};
use crate::error::{Error, Result};
use crate::model::{CompactSet, Potential, QuantizedControl, System};
use crate::norm::PNorm;
use crate::simulate::{running_potential, substeps};
use crate::spectral::{
    equilibrium_upper_bound, formula_pressure, hyperbolic_split, min_potential, EquilibriumBound,
    EquilibriumOptions, FormulaOptions,
};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PressureOptions {
    pub dt: f64,
    /// Control step `Δ`.
    pub delta: f64,
    /// Grid levels per control coordinate.
    pub levels: usize,
    /// Base horizon `τ0`; level `n` uses horizon `nτ0`.
    pub tau0: f64,
    pub n_max: usize,
    pub stride: usize,
    pub exact_threshold: usize,
    /// Maximum number of candidates per level.
    pub cap: usize,
    pub seed: u64,
    /// Pitch of the grid over `K`.
    pub pitch: f64,
    /// Test against `Q` eroded by the distance a trajectory can travel
    /// between two checks.
    pub q_margin: bool,
    /// Horizon of the lower bound.
    pub lower_tau: f64,
    pub use_projection: bool,
    /// Equilibrium pair `(x0, u0)` for the upper bound; linear systems
    /// default to the equilibrium of the potential's minimizer.
    pub equilibrium: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions {
            dt: 0.01,
            delta: 0.25,
            levels: 3,
            tau0: 0.25,
            n_max: 8,
            stride: 1,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            cap: 20_000,
            seed: 0,
            pitch: 0.05,
            q_margin: false,
            lower_tau: 2.0,
            use_projection: true,
            equilibrium: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesPoint {
    pub n: usize,
    pub tau: f64,
    /// Concatenations examined at this level.
    pub examined: usize,
    /// Candidates covering at least one grid point.
    pub live: usize,
    /// True when the cap forced a random subset of concatenations.
    pub capped: bool,
    pub cover_size: usize,
    pub a_tau: f64,
    pub log_a_over_tau: f64,
    pub slope_so_far: f64,
    pub method: CoverMethod,
    pub gap_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Discretization {
    pub delta: f64,
    pub dt: f64,
    /// Integration step actually used (`dt` rounded to divide `Δ`).
    pub h: f64,
    pub levels: usize,
    pub tau0: f64,
    pub n_max: usize,
    pub stride: usize,
    pub pitch: f64,
    pub grid_points: usize,
    pub base_candidates: usize,
    /// Membership tolerance `η` of `Q`.
    pub set_tol: f64,
    /// Erosion applied to `Q` (0 when off).
    pub q_margin: f64,
    /// Inflation radius of `Q` for outer-pressure runs.
    pub eps: Option<f64>,
    pub exact_threshold: usize,
    pub cap: usize,
    pub seed: u64,
}

/// Result of the brute-force estimate. The `a_τ` values are the weights of
/// feasible covers over a finite control class, hence upper-biased.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PressureReport {
    pub series: Vec<SeriesPoint>,
    /// Least-squares slope of `log a` against `τ` over the tail half.
    pub slope: f64,
    /// First `n` of the tail window.
    pub tail_from: usize,
    /// `(1/nτ0) log a` at the last level.
    pub last_ratio: f64,
    pub formula: Option<f64>,
    pub formula_error: Option<String>,
    pub lower_bound: Option<LowerBound>,
    pub lower_bound_error: Option<String>,
    pub upper_bound: Option<EquilibriumBound>,
    pub upper_bound_error: Option<String>,
    pub discretization: Discretization,
}

/// Least-squares slope of `(x, y)` pairs; `None` with fewer than two.
fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Tail-half slope of the first `len` series entries and the first `n`
/// of its window.
fn tail_slope(taus: &[f64], logs: &[f64]) -> (f64, usize) {
    let len = taus.len();
    if len == 1 {
        return (logs[0] / taus[0], 1);
    }
    let start = (len / 2).min(len - 2);
    (
        ls_slope(&taus[start..], &logs[start..]).expect("two points"),
        start + 1,
    )
}

struct Live {
    control: QuantizedControl,
    /// Base index when every segment is the same constant base control.
    constant: Option<usize>,
    points: Vec<u32>,
    ends: Vec<f64>,
}

struct Level<'a> {
    sys: &'a System,
    q: &'a CompactSet,
    points: &'a [f64],
    base: &'a [QuantizedControl],
    base_constant: &'a [bool],
    intervals: usize,
    dt: f64,
    stride: usize,
}

impl Level<'_> {
    fn extend(&self, parent: Option<&Live>, b: usize, n: usize) -> Option<Live> {
        let d = self.sys.dim();
        let base = &self.base[b];
        let control = match parent {
            Some(p) => p.control.concat(base).expect("common step"),
            None => base.clone(),
        };
        let from = (n - 1) * self.intervals;
        let to = n * self.intervals;
        let steps = substeps(base.step(), self.dt);
        let mut engine = Engine::new(self.sys, self.dt, self.stride);
        let mut x = vec![0.0; d];
        let mut points = Vec::new();
        let mut ends = Vec::new();
        match parent {
            Some(p) => {
                for (k, &j) in p.points.iter().enumerate() {
                    x.copy_from_slice(&p.ends[k * d..(k + 1) * d]);
                    let mut g = from * steps;
                    if engine.advance(&mut x, &control, from, to, &mut g, self.q, None) {
                        points.push(j);
                        ends.extend_from_slice(&x);
                    }
                }
            }
            None => {
                for (j, x0) in self.points.chunks_exact(d).enumerate() {
                    if !self.q.contains(x0) {
                        continue;
                    }
                    x.copy_from_slice(x0);
                    let mut g = 0;
                    if engine.advance(&mut x, &control, 0, to, &mut g, self.q, None) {
                        points.push(j as u32);
                        ends.extend_from_slice(&x);
                    }
                }
            }
        }
        if points.is_empty() {
            return None;
        }
        let constant = match parent {
            Some(p) if p.constant == Some(b) => Some(b),
            None if self.base_constant[b] => Some(b),
            _ => None,
        };
        Some(Live {
            control,
            constant,
            points,
            ends,
        })
    }
}

fn is_constant(c: &QuantizedControl) -> bool {
    let first = c.value(0);
    (1..c.len()).all(|i| c.value(i) == first)
}

/// Pairs `(parent, base)` examined at the next level: all of them, or the
/// constant continuations plus a seeded random subset when over `cap`.
fn select_pairs(
    live: &[Live],
    base_len: usize,
    cap: usize,
    seed: u64,
    n: usize,
) -> (Vec<(usize, usize)>, bool) {
    let total = live.len() * base_len;
    if total <= cap {
        return (
            (0..total).map(|i| (i / base_len, i % base_len)).collect(),
            false,
        );
    }
    let mut keep: Vec<usize> = live
        .iter()
        .enumerate()
        .filter_map(|(p, l)| l.constant.map(|b| p * base_len + b))
        .collect();
    let others: Vec<usize> = (0..total).filter(|i| !keep.contains(i)).collect();
    let want = cap.saturating_sub(keep.len()).min(others.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for idx in rand::seq::index::sample(&mut rng, others.len(), want) {
        keep.push(others[idx]);
    }
    keep.sort_unstable();
    (
        keep.into_iter()
            .map(|i| (i / base_len, i % base_len))
            .collect(),
        true,
    )
}

/// Largest `|F(x, u)|_2` over the corners of `Q`'s bounding box and the
/// control vertices (exact for linear systems).
fn speed_bound(sys: &System, q: &CompactSet) -> f64 {
    let (lo, hi) = q.bounding_box();
    let d = lo.len();
    let mut out = vec![0.0; d];
    let mut best = 0.0f64;
    for mask in 0..(1usize << d.min(16)) {
        let x: Vec<f64> = (0..d)
            .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
            .collect();
        for u in sys.range().vertices() {
            sys.field(&x, &u, &mut out);
            best = best.max(out.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    best
}

fn validate(opts: &PressureOptions) -> Result<usize> {
    if !(opts.dt > 0.0) || !(opts.pitch > 0.0) {
        return Err(Error::Config("dt and pitch must be positive".into()));
    }
    if opts.n_max == 0 || opts.stride == 0 {
        return Err(Error::Config("n_max and stride must be at least 1".into()));
    }
    interval_count(opts.tau0, opts.delta)
}

/// Brute-force estimate of the pressure over the horizons `nτ0`,
/// `n = 1..=n_max`.
pub fn estimate_pressure(
    sys: &System,
    k: &CompactSet,
    q: &CompactSet,
    f: &Potential,
    opts: &PressureOptions,
) -> Result<PressureReport> {
    run_estimate(sys, k, q, f, opts, None)
}

fn run_estimate(
    sys: &System,
    k: &CompactSet,
    q: &CompactSet,
    f: &Potential,
    opts: &PressureOptions,
    eps: Option<f64>,
) -> Result<PressureReport> {
    let intervals = validate(opts)?;
    let d = sys.dim();
    if k.dim() != d || q.dim() != d {
        return Err(Error::Dimension(
            "K and Q must match the state dimension".into(),
        ));
    }
    let points = k.grid(opts.pitch)?;
    if points.is_empty() {
        return Err(Error::Config(format!(
            "K grid with pitch {} is empty",
            opts.pitch
        )));
    }
    let grid_points = points.len() / d;
    let base = build_candidates(
        sys.range(),
        opts.levels,
        opts.tau0,
        opts.delta,
        opts.cap,
        opts.seed,
    )?;
    let base_constant: Vec<bool> = base.iter().map(is_constant).collect();
    let h = opts.delta / substeps(opts.delta, opts.dt) as f64;
    let margin = if opts.q_margin {
        speed_bound(sys, q) * opts.stride as f64 * h
    } else {
        0.0
    };
    let q_check = q.eroded(margin)?;

    let level = Level {
        sys,
        q: &q_check,
        points: &points,
        base: &base,
        base_constant: &base_constant,
        intervals,
        dt: opts.dt,
        stride: opts.stride,
    };

    let lower_n = {
        let r = opts.lower_tau / opts.tau0;
        let n = r.round();
        (n >= 1.0 && (n - r).abs() < 1e-9 && n as usize <= opts.n_max).then_some(n as usize)
    };
    let reuse_levels = match sys.as_linear() {
        Some(lin) if opts.use_projection => hyperbolic_split(lin.a(), None)
            .map(|s| s.unstable_dim() == d)
            .unwrap_or(false),
        Some(_) => true,
        None => false,
    };
    let mut lower: Option<core::result::Result<LowerBound, String>> = None;

    let mut series = Vec::with_capacity(opts.n_max);
    let mut taus = Vec::new();
    let mut logs = Vec::new();
    let mut live: Vec<Live> = Vec::new();
    for n in 1..=opts.n_max {
        let (pairs, capped) = if n == 1 {
            (
                (0..base.len()).map(|b| (usize::MAX, b)).collect::<Vec<_>>(),
                false,
            )
        } else {
            select_pairs(&live, base.len(), opts.cap, opts.seed, n)
        };
        let run = |&(p, b): &(usize, usize)| {
            level.extend(
                if p == usize::MAX {
                    None
                } else {
                    Some(&live[p])
                },
                b,
                n,
            )
        };
        #[cfg(feature = "parallel")]
        let next: Vec<Live> = {
            use rayon::prelude::*;
            pairs
                .par_iter()
                .map(run)
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let next: Vec<Live> = pairs.iter().filter_map(run).collect();

        let tau = n as f64 * opts.tau0;
        let covers: Vec<FixedBitSet> = next
            .iter()
            .map(|l| {
                let mut b = FixedBitSet::with_capacity(grid_points);
                for &j in &l.points {
                    b.insert(j as usize);
                }
                b
            })
            .collect();
        let log_weights: Vec<f64> = next
            .iter()
            .map(|l| running_potential(f, &l.control, tau))
            .collect();
        let controls: Vec<QuantizedControl> = next.iter().map(|l| l.control.clone()).collect();
        let mat = CoverageMatrix::from_parts(
            controls,
            grid_points,
            covers,
            log_weights,
            tau,
            opts.dt,
            opts.stride,
        )?;
        let cover = min_weight_cover(&mat, opts.exact_threshold).map_err(|e| match e {
            Error::NotAdmissible { uncovered, .. } => Error::NotAdmissible {
                n: Some(n),
                uncovered,
            },
            other => other,
        })?;

        if reuse_levels && lower_n == Some(n) {
            let alpha = tau * sys.as_linear().expect("linear").a().trace();
            let beta = mat
                .log_weights
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let pairs: usize = next.iter().map(|l| l.points.len()).sum();
            let mut lb = LowerBound::assemble(tau, beta, alpha, pairs, next.len(), grid_points);
            if opts.use_projection {
                lb.projected = true;
                lb.unstable_dim = Some(d);
            }
            lower = Some(Ok(lb));
        }

        let log_a = cover.total.ln();
        taus.push(tau);
        logs.push(log_a);
        let (slope_so_far, _) = tail_slope(&taus, &logs);
        series.push(SeriesPoint {
            n,
            tau,
            examined: pairs.len(),
            live: next.len(),
            capped,
            cover_size: cover.chosen.len(),
            a_tau: cover.total,
            log_a_over_tau: log_a / tau,
            slope_so_far,
            method: cover.method,
            gap_bound: cover.gap_bound,
        });
        live = next;
    }
    let (slope, tail_from) = tail_slope(&taus, &logs);
    let last_ratio = series.last().map(|s| s.log_a_over_tau).unwrap_or(f64::NAN);

    let lower = match lower {
        Some(l) => l,
        None => standalone_lower(sys, k, q, f, opts).map_err(|e| e.to_string()),
    };
    let (formula, formula_error) = formula_value(sys, f);
    let upper = upper_bound(sys, f, opts);
    let (lower_bound, lower_bound_error) = split_result(lower);
    let (upper_bound, upper_bound_error) = split_result(upper.map_err(|e| e.to_string()));

    Ok(PressureReport {
        series,
        slope,
        tail_from,
        last_ratio,
        formula,
        formula_error,
        lower_bound,
        lower_bound_error,
        upper_bound,
        upper_bound_error,
        discretization: Discretization {
            delta: opts.delta,
            dt: opts.dt,
            h,
            levels: opts.levels,
            tau0: opts.tau0,
            n_max: opts.n_max,
            stride: opts.stride,
            pitch: opts.pitch,
            grid_points,
            base_candidates: base.len(),
            set_tol: q.tol,
            q_margin: margin,
            eps,
            exact_threshold: opts.exact_threshold,
            cap: opts.cap,
            seed: opts.seed,
        },
    })
}

fn formula_value(sys: &System, f: &Potential) -> (Option<f64>, Option<String>) {
    match sys.as_linear() {
        Some(lin) => match formula_pressure(lin, f, FormulaOptions::default()) {
            Ok(fp) => (Some(fp.value), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (
            None,
            Some("closed form applies to linear systems only".to_string()),
        ),
    }
}

/// The closed form and the two theorem bounds, without the estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundsReport {
    pub formula: Option<f64>,
    pub formula_error: Option<String>,
    pub lower_bound: Option<LowerBound>,
    pub lower_bound_error: Option<String>,
    pub upper_bound: Option<EquilibriumBound>,
    pub upper_bound_error: Option<String>,
}

/// Lower bound at horizon `lower_tau` over candidates of that horizon,
/// the closed form when it applies, and the equilibrium upper bound.
pub fn theorem_bounds(
    sys: &System,
    k: &CompactSet,
    q: &CompactSet,
    f: &Potential,
    opts: &PressureOptions,
) -> BoundsReport {
    let (formula, formula_error) = formula_value(sys, f);
    let (lower_bound, lower_bound_error) =
        split_result(standalone_lower(sys, k, q, f, opts).map_err(|e| e.to_string()));
    let (upper_bound, upper_bound_error) =
        split_result(upper_bound(sys, f, opts).map_err(|e| e.to_string()));
    BoundsReport {
        formula,
        formula_error,
        lower_bound,
        lower_bound_error,
        upper_bound,
        upper_bound_error,
    }
}

fn split_result<T>(r: core::result::Result<T, String>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e)),
    }
}

fn standalone_lower(
    sys: &System,
    k: &CompactSet,
    q: &CompactSet,
    f: &Potential,
    opts: &PressureOptions,
) -> Result<LowerBound> {
    let cands = build_candidates(
        sys.range(),
        opts.levels,
        opts.lower_tau,
        opts.delta,
        opts.cap,
        opts.seed,
    )?;
    let use_projection = opts.use_projection && sys.as_linear().is_some();
    lower_bound(
        sys,
        k,
        q,
        f,
        &cands,
        LowerBoundOptions {
            tau: opts.lower_tau,
            dt: opts.dt,
            stride: opts.stride,
            pitch: opts.pitch,
            use_projection,
        },
    )
}

fn upper_bound(sys: &System, f: &Potential, opts: &PressureOptions) -> Result<EquilibriumBound> {
    let (x0, u0) = match (&opts.equilibrium, sys.as_linear()) {
        (Some((x, u)), _) => (x.clone(), u.clone()),
        (None, Some(lin)) => {
            let (u, _) = min_potential(f, lin.range(), 21);
            (lin.equilibrium(&u)?, u)
        }
        (None, None) => {
            return Err(Error::Config(
                "no equilibrium pair supplied for the upper bound".into(),
            ))
        }
    };
    equilibrium_upper_bound(sys, &x0, &u0, f, EquilibriumOptions::default())
}

/// Estimates with `Q` replaced by its `ε`-inflation for each `ε` of a
/// strictly decreasing ladder.
pub fn outer_pressure_series(
    sys: &System,
    k: &CompactSet,
    q: &CompactSet,
    f: &Potential,
    eps_ladder: &[f64],
    norm: PNorm,
    opts: &PressureOptions,
) -> Result<Vec<PressureReport>> {
    if eps_ladder.is_empty() {
        return Err(Error::Config("eps ladder is empty".into()));
    }
    if eps_ladder.iter().any(|e| !(*e > 0.0)) || eps_ladder.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config(
            "eps ladder must be positive and strictly decreasing".into(),
        ));
    }
    eps_ladder
        .iter()
        .map(|&e| run_estimate(sys, k, &q.inflate(e, norm)?, f, opts, Some(e)))
        .collect()
}
