//! Trajectories, variational flow, divergence integrals and Floquet
//! exponents.
//!
//! Integration is classical fixed-step RK4 with the step aligned to the
//! control step, so control switches always fall on grid nodes. For linear
//! systems one RK4 step is the exact linear map
//! `x -> M(h) x + N(h) u` with `M = Σ_{k≤4} (hA)^k / k!`; that map is
//! precomputed once per step size.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LinearSystem, Potential, QuantizedControl, System};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Number of RK4 substeps for one control interval of length `delta`:
/// the requested `dt` is rounded down so that it divides the interval.
pub fn substeps(delta: f64, dt: f64) -> usize {
    ((delta / dt) - 1e-9).ceil().max(1.0) as usize
}

/// One RK4 step of a linear system as a matrix pair.
#[derive(Debug, Clone)]
pub struct LinearStep {
    pub h: f64,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

impl LinearStep {
    pub fn new(sys: &LinearSystem, h: f64) -> Self {
        let d = sys.dim();
        let ha = sys.a() * h;
        let id = DMatrix::<f64>::identity(d, d);
        let ha2 = &ha * &ha;
        let ha3 = &ha2 * &ha;
        let ha4 = &ha3 * &ha;
        let m = &id + &ha + &ha2 * 0.5 + &ha3 * (1.0 / 6.0) + &ha4 * (1.0 / 24.0);
        let n = (&id + &ha * 0.5 + &ha2 * (1.0 / 6.0) + &ha3 * (1.0 / 24.0)) * sys.b() * h;
        LinearStep { h, m, n }
    }

    #[inline]
    pub fn apply(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.m.nrows();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.m[(i, j)] * x[j];
            }
            for k in 0..u.len() {
                acc += self.n[(i, k)] * u[k];
            }
            out[i] = acc;
        }
    }
}

/// Scratch space for generic RK4.
struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    y: Vec<f64>,
}

impl Rk4Scratch {
    fn new(d: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            y: vec![0.0; d],
        }
    }
}

fn rk4_step(sys: &System, x: &[f64], u: &[f64], h: f64, s: &mut Rk4Scratch, out: &mut [f64]) {
    let d = x.len();
    sys.field(x, u, &mut s.k1);
    for i in 0..d {
        s.y[i] = x[i] + 0.5 * h * s.k1[i];
    }
    sys.field(&s.y, u, &mut s.k2);
    for i in 0..d {
        s.y[i] = x[i] + 0.5 * h * s.k2[i];
    }
    sys.field(&s.y, u, &mut s.k3);
    for i in 0..d {
        s.y[i] = x[i] + h * s.k3[i];
    }
    sys.field(&s.y, u, &mut s.k4);
    for i in 0..d {
        out[i] = x[i] + h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
}

/// Fixed-step propagator for one system and one step size.
pub struct Propagator<'a> {
    sys: &'a System,
    h: f64,
    linear: Option<LinearStep>,
    scratch: Rk4Scratch,
}

impl<'a> Propagator<'a> {
    pub fn new(sys: &'a System, h: f64) -> Self {
        let linear = sys.as_linear().map(|l| LinearStep::new(l, h));
        Propagator {
            sys,
            h,
            linear,
            scratch: Rk4Scratch::new(sys.dim()),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn step(&mut self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match &self.linear {
            Some(ls) => ls.apply(x, u, out),
            None => rk4_step(self.sys, x, u, self.h, &mut self.scratch, out),
        }
    }
}

/// One stretch of constant step size and constant control.
#[derive(Debug, Clone, Copy)]
struct Segment {
    interval: usize,
    steps: usize,
    h: f64,
}

fn plan(omega: &QuantizedControl, tau: f64, dt: f64) -> Result<Vec<Segment>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if !(tau >= 0.0) || tau > omega.horizon() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "horizon {tau} outside [0, {}] of the control",
            omega.horizon()
        )));
    }
    let delta = omega.step();
    let full = substeps(delta, dt);
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let start = i as f64 * delta;
        let remaining = tau - start;
        if remaining <= 1e-12 * delta.max(tau) || i >= omega.len() {
            break;
        }
        if remaining >= delta * (1.0 - 1e-12) {
            out.push(Segment {
                interval: i,
                steps: full,
                h: delta / full as f64,
            });
        } else {
            let n = substeps(remaining, dt);
            out.push(Segment {
                interval: i,
                steps: n,
                h: remaining / n as f64,
            });
        }
        i += 1;
    }
    Ok(out)
}

/// Sampled trajectory `t -> φ(t, x0, ω)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    pub times: Vec<f64>,
    /// Row-major, one state per time.
    pub states: Vec<f64>,
    /// Control interval active on each step `[t_k, t_{k+1}]`.
    pub step_interval: Vec<usize>,
    pub control: QuantizedControl,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn end(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Integrates `ẋ = F(x, ω(t))` from `x0` over `[0, τ]`.
pub fn integrate_trajectory(
    sys: &System,
    x0: &[f64],
    omega: &QuantizedControl,
    tau: f64,
    dt: f64,
) -> Result<Trajectory> {
    let d = sys.dim();
    if x0.len() != d || omega.input_dim() != sys.input_dim() {
        return Err(Error::Dimension(
            "initial state or control does not match the system".into(),
        ));
    }
    let segments = plan(omega, tau, dt)?;
    let total: usize = segments.iter().map(|s| s.steps).sum();
    let mut times = Vec::with_capacity(total + 1);
    let mut states = Vec::with_capacity((total + 1) * d);
    let mut step_interval = Vec::with_capacity(total);
    times.push(0.0);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; d];
    let mut cached: Option<Propagator> = None;
    for seg in &segments {
        if cached.as_ref().map(|p| p.h() != seg.h).unwrap_or(true) {
            cached = Some(Propagator::new(sys, seg.h));
        }
        let prop = cached.as_mut().unwrap();
        let u = omega.value(seg.interval);
        let t0 = seg.interval as f64 * omega.step();
        for k in 0..seg.steps {
            prop.step(&x, u, &mut next);
            let t = t0 + (k + 1) as f64 * seg.h;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { time: t });
            }
            core::mem::swap(&mut x, &mut next);
            times.push(t);
            states.extend_from_slice(&x);
            step_interval.push(seg.interval);
        }
    }
    Ok(Trajectory {
        dim: d,
        times,
        states,
        step_interval,
        control: omega.clone(),
    })
}

/// `(S_τ f)(ω) = ∫_0^τ f(ω(t)) dt`, summed exactly over the control intervals.
pub fn running_potential(f: &Potential, omega: &QuantizedControl, tau: f64) -> f64 {
    let delta = omega.step();
    let mut acc = 0.0;
    for i in 0..omega.len() {
        let start = i as f64 * delta;
        if start >= tau {
            break;
        }
        let len = (tau - start).min(delta);
        acc += len * f.value(omega.value(i));
    }
    acc
}

/// Fundamental matrix of the homogeneous variational equation at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub phi: DMatrix<f64>,
    pub tau: f64,
    /// Base trajectory end point `φ(τ, x0, ω)`.
    pub end_state: Vec<f64>,
}

impl FundamentalMatrix {
    pub fn log_det(&self) -> f64 {
        self.phi.determinant().ln()
    }
}

/// `Φ(τ)` for `Φ' = ∇F(φ(t, x0, ω), ω(t)) Φ`, `Φ(0) = I`, integrated jointly
/// with the base trajectory.
pub fn integrate_variational(
    sys: &System,
    x0: &[f64],
    omega: &QuantizedControl,
    tau: f64,
    dt: f64,
) -> Result<FundamentalMatrix> {
    let d = sys.dim();
    if x0.len() != d || omega.input_dim() != sys.input_dim() {
        return Err(Error::Dimension(
            "initial state or control does not match the system".into(),
        ));
    }
    let segments = plan(omega, tau, dt)?;
    let mut phi = DMatrix::<f64>::identity(d, d);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; d];

    if let Some(lin) = sys.as_linear() {
        let mut prop: Option<LinearStep> = None;
        for seg in &segments {
            if prop.as_ref().map(|p| p.h != seg.h).unwrap_or(true) {
                prop = Some(LinearStep::new(lin, seg.h));
            }
            let p = prop.as_ref().unwrap();
            let u = omega.value(seg.interval);
            for k in 0..seg.steps {
                p.apply(&x, u, &mut next);
                core::mem::swap(&mut x, &mut next);
                phi = &p.m * phi;
                if x.iter().any(|v| !v.is_finite()) || phi.iter().any(|v| !v.is_finite()) {
                    let t = seg.interval as f64 * omega.step() + (k + 1) as f64 * seg.h;
                    return Err(Error::BlowUp { time: t });
                }
            }
        }
        return Ok(FundamentalMatrix {
            phi,
            tau,
            end_state: x,
        });
    }

    let mut scratch = Rk4Scratch::new(d);
    let mut y = vec![0.0; d];
    for seg in &segments {
        let u = omega.value(seg.interval);
        let h = seg.h;
        for k in 0..seg.steps {
            // stage states of the base trajectory drive the Jacobians
            let j1 = sys.jacobian(&x, u);
            sys.field(&x, u, &mut scratch.k1);
            for i in 0..d {
                y[i] = x[i] + 0.5 * h * scratch.k1[i];
            }
            let j2 = sys.jacobian(&y, u);
            sys.field(&y, u, &mut scratch.k2);
            for i in 0..d {
                y[i] = x[i] + 0.5 * h * scratch.k2[i];
            }
            let j3 = sys.jacobian(&y, u);
            sys.field(&y, u, &mut scratch.k3);
            for i in 0..d {
                y[i] = x[i] + h * scratch.k3[i];
            }
            let j4 = sys.jacobian(&y, u);
            sys.field(&y, u, &mut scratch.k4);
            for i in 0..d {
                next[i] = x[i]
                    + h / 6.0
                        * (scratch.k1[i]
                            + 2.0 * scratch.k2[i]
                            + 2.0 * scratch.k3[i]
                            + scratch.k4[i]);
            }
            let p1 = &j1 * &phi;
            let p2 = &j2 * (&phi + &p1 * (0.5 * h));
            let p3 = &j3 * (&phi + &p2 * (0.5 * h));
            let p4 = &j4 * (&phi + &p3 * h);
            phi += (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (h / 6.0);
            core::mem::swap(&mut x, &mut next);
            if x.iter().any(|v| !v.is_finite()) || phi.iter().any(|v| !v.is_finite()) {
                let t = seg.interval as f64 * omega.step() + (k + 1) as f64 * h;
                return Err(Error::BlowUp { time: t });
            }
        }
    }
    Ok(FundamentalMatrix {
        phi,
        tau,
        end_state: x,
    })
}

/// `∫_0^τ div F_{ω(s)}(φ(s, x, ω)) ds` along a computed trajectory.
///
/// Linear systems return `τ · trace(A)`; otherwise the trapezoid rule is
/// applied step by step, with both end nodes of a step evaluated under the
/// control active on that step.
pub fn divergence_integral(sys: &System, traj: &Trajectory) -> f64 {
    if let Some(lin) = sys.as_linear() {
        return traj.horizon() * lin.a().trace();
    }
    let mut acc = 0.0;
    for k in 0..traj.step_interval.len() {
        let u = traj.control.value(traj.step_interval[k]);
        let h = traj.times[k + 1] - traj.times[k];
        acc += 0.5 * h * (sys.divergence(traj.state(k), u) + sys.divergence(traj.state(k + 1), u));
    }
    acc
}

/// One Floquet exponent with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Exponent {
    pub rho: f64,
    pub multiplicity: usize,
}

/// Distinct exponents in strictly decreasing order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentSpectrum {
    pub exponents: Vec<Exponent>,
    pub grouping_tol: f64,
    pub periodicity_defect: f64,
}

impl ExponentSpectrum {
    /// `Σ_j max{0, d_j ρ_j}`.
    pub fn unstable_sum(&self) -> f64 {
        self.exponents
            .iter()
            .map(|e| (e.multiplicity as f64 * e.rho).max(0.0))
            .sum()
    }
}

/// Groups sorted-descending rates whose neighbours are within `tol`.
pub fn group_rates(mut rates: Vec<f64>, tol: f64) -> Vec<Exponent> {
    rates.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<(f64, usize, f64)> = Vec::new(); // (sum, count, last)
    for r in rates {
        match out.last_mut() {
            Some((sum, count, last)) if (*last - r).abs() <= tol => {
                *sum += r;
                *count += 1;
                *last = r;
            }
            _ => out.push((r, 1, r)),
        }
    }
    out.into_iter()
        .map(|(sum, count, _)| Exponent {
            rho: sum / count as f64,
            multiplicity: count,
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct FloquetOptions {
    pub dt: f64,
    /// Defaults to `1e-3 · max|ρ| + 1e-9`.
    pub grouping_tol: Option<f64>,
    /// Defaults to `1e-6 · (1 + |x0|)`.
    pub periodicity_tol: Option<f64>,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions {
            dt: 1e-3,
            grouping_tol: None,
            periodicity_tol: None,
        }
    }
}

/// Floquet exponents `(1/T) log|μ_j|` of the monodromy matrix of a
/// `T`-periodic control-trajectory pair. A control shorter than `T` is
/// extended periodically when `T` is a multiple of its horizon.
pub fn floquet_exponents(
    sys: &System,
    x0: &[f64],
    omega: &QuantizedControl,
    period: f64,
    opts: FloquetOptions,
) -> Result<ExponentSpectrum> {
    if !(period > 0.0) {
        return Err(Error::Domain(format!(
            "period must be positive, got {period}"
        )));
    }
    let h = omega.horizon();
    let omega = if h < period * (1.0 - 1e-12) {
        let reps = (period / h).round();
        if (reps * h - period).abs() > 1e-9 * period {
            return Err(Error::Domain(format!(
                "period {period} is not a multiple of the control horizon {h}"
            )));
        }
        omega.repeated(reps as usize)
    } else {
        omega.clone()
    };
    let fm = integrate_variational(sys, x0, &omega, period, opts.dt)?;
    let scale = 1.0 + x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let defect = x0
        .iter()
        .zip(&fm.end_state)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let ptol = opts.periodicity_tol.unwrap_or(1e-6 * scale);
    if !(defect <= ptol) {
        return Err(Error::NotPeriodic { defect });
    }
    let mu = linalg::complex_eigenvalues(&fm.phi)?;
    let rates: Vec<f64> = mu.iter().map(|m| m.re.hypot(m.im).ln() / period).collect();
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("monodromy matrix is singular".into()));
    }
    let max_abs = rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let gamma = opts.grouping_tol.unwrap_or(1e-3 * max_abs + 1e-9);
    Ok(ExponentSpectrum {
        exponents: group_rates(rates, gamma),
        grouping_tol: gamma,
        periodicity_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ControlRange;
    use alloc::vec;

    fn scalar(a: f64) -> System {
        LinearSystem::from_rows(
            1,
            1,
            &[a],
            &[1.0],
            ControlRange::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap()
        .into()
    }

    #[test]
    fn scalar_growth_with_unit_input() {
        let sys = scalar(1.0);
        let w = QuantizedControl::constant(1.0, 1, &[1.0]).unwrap();
        let tr = integrate_trajectory(&sys, &[0.0], &w, 1.0, 1e-3).unwrap();
        assert!((tr.end()[0] - (1.0f64.exp() - 1.0)).abs() < 1e-8);
        assert_eq!(tr.state(0), &[0.0]);
        assert_eq!(tr.times.len(), tr.states.len());
    }

    #[test]
    fn dt_is_rounded_to_divide_the_control_step() {
        assert_eq!(substeps(0.25, 0.01), 25);
        assert_eq!(substeps(0.25, 0.03), 9);
        let sys = scalar(1.0);
        let w = QuantizedControl::constant(0.25, 4, &[0.0]).unwrap();
        let tr = integrate_trajectory(&sys, &[1.0], &w, 1.0, 0.03).unwrap();
        assert_eq!(tr.len(), 37);
        assert!((tr.horizon() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_last_interval() {
        let sys = scalar(-1.0);
        let w = QuantizedControl::constant(1.0, 2, &[0.0]).unwrap();
        let tr = integrate_trajectory(&sys, &[1.0], &w, 1.5, 1e-3).unwrap();
        assert!((tr.horizon() - 1.5).abs() < 1e-12);
        assert!((tr.end()[0] - (-1.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn horizon_beyond_control_is_rejected() {
        let sys = scalar(1.0);
        let w = QuantizedControl::constant(0.5, 2, &[0.0]).unwrap();
        assert!(matches!(
            integrate_trajectory(&sys, &[0.0], &w, 1.5, 1e-2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn blow_up_reports_time() {
        let r = ControlRange::interval(-1.0, 1.0).unwrap();
        let sys: System = crate::model::GeneralSystem::new(
            "riccati",
            1,
            alloc::sync::Arc::new(|x: &[f64], _u: &[f64], out: &mut [f64]| out[0] = x[0] * x[0]),
            r,
        )
        .unwrap()
        .into();
        let w = QuantizedControl::constant(1.0, 3, &[0.0]).unwrap();
        match integrate_trajectory(&sys, &[100.0], &w, 3.0, 0.05) {
            Err(Error::BlowUp { time }) => assert!(time > 0.0 && time <= 3.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn running_potential_sums_intervals() {
        let w = QuantizedControl::unchecked(1.0, 1, vec![0.0, 2.0]).unwrap();
        let f = Potential::NormDist {
            u_ref: vec![0.0],
            norm: crate::norm::PNorm::One,
        };
        assert_eq!(running_potential(&f, &w, 2.0), 2.0);
        assert_eq!(running_potential(&f, &w, 1.5), 1.0);
        assert_eq!(running_potential(&Potential::Constant(3.0), &w, 2.0), 6.0);
        let at_ref = QuantizedControl::constant(0.5, 4, &[0.0]).unwrap();
        assert_eq!(running_potential(&f, &at_ref, 2.0), 0.0);
    }

    #[test]
    fn variational_identity_at_zero_horizon() {
        let sys = scalar(1.0);
        let w = QuantizedControl::constant(1.0, 1, &[1.0]).unwrap();
        let fm = integrate_variational(&sys, &[0.3], &w, 0.0, 1e-3).unwrap();
        assert_eq!(fm.phi, DMatrix::identity(1, 1));
        let fm = integrate_variational(&sys, &[0.3], &w, 1.0, 1e-3).unwrap();
        assert!((fm.phi[(0, 0)] - 1.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn divergence_of_linear_system_is_trace() {
        let r = ControlRange::interval(-1.0, 1.0).unwrap();
        let sys: System = LinearSystem::from_rows(2, 1, &[-1.0, 0.0, 0.0, -2.0], &[1.0, 1.0], r)
            .unwrap()
            .into();
        let w = QuantizedControl::constant(1.0, 1, &[0.5]).unwrap();
        let tr = integrate_trajectory(&sys, &[0.1, 0.2], &w, 1.0, 1e-2).unwrap();
        assert_eq!(divergence_integral(&sys, &tr), -3.0);
        let tr0 = integrate_trajectory(&sys, &[0.1, 0.2], &w, 0.0, 1e-2).unwrap();
        assert_eq!(divergence_integral(&sys, &tr0), 0.0);
    }

    #[test]
    fn grouping_merges_close_rates() {
        let g = group_rates(vec![-1.0, 1.0, 1.0 + 1e-7], 1e-6);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].multiplicity, 2);
        assert_eq!(
            g[1],
            Exponent {
                rho: -1.0,
                multiplicity: 1
            }
        );
    }

    #[test]
    fn saddle_exponents_and_periodicity_error() {
        let r = ControlRange::interval(-1.0, 1.0).unwrap();
        let sys: System = LinearSystem::from_rows(2, 1, &[1.0, 0.0, 0.0, -1.0], &[1.0, 1.0], r)
            .unwrap()
            .into();
        let w = QuantizedControl::constant(1.0, 1, &[0.0]).unwrap();
        let spec =
            floquet_exponents(&sys, &[0.0, 0.0], &w, 1.0, FloquetOptions::default()).unwrap();
        assert_eq!(spec.exponents.len(), 2);
        assert!((spec.exponents[0].rho - 1.0).abs() < 1e-9);
        assert!((spec.exponents[1].rho + 1.0).abs() < 1e-9);
        assert!(matches!(
            floquet_exponents(&sys, &[0.5, 0.0], &w, 1.0, FloquetOptions::default()),
            Err(Error::NotPeriodic { .. })
        ));
    }
}
