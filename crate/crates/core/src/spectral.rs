//! Exact linear-algebraic quantities of linear and linearized systems.
//!
//! The closed-form pressure of a controllable hyperbolic linear system with
//! `0 ∈ int U` is `min_U f + Σ_j d_j max{0, Re λ_j}`; the equilibrium bound
//! evaluates the same spectral sum at the Jacobian of a regular
//! equilibrium pair and adds `f(u0)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ControlRange, LinearSystem, Potential, System};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Eigenvalues with algebraic multiplicities. Conjugate pairs appear as two
/// entries; multiplicities sum to the dimension.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub cluster_tol: f64,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    /// `min_j |Re λ_j|`.
    pub fn hyperbolicity_margin(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn unstable_dim(&self) -> usize {
        self.eigenvalues
            .iter()
            .filter(|e| e.re > 0.0)
            .map(|e| e.multiplicity)
            .sum()
    }
}

/// Eigenvalues of `A`, clustered with tolerance `1e-8 · |A|_F`.
pub fn eigen_decompose(a: &DMatrix<f64>) -> Result<Spectrum> {
    let raw = linalg::complex_eigenvalues(a)?;
    let tol = 1e-8 * a.norm().max(f64::MIN_POSITIVE);
    let mut clusters: Vec<(f64, f64, usize)> = Vec::new();
    for z in raw {
        match clusters
            .iter_mut()
            .find(|(re, im, _)| (re - z.re).hypot(im - z.im) <= tol)
        {
            Some(c) => {
                // running mean keeps the representative centred
                let n = c.2 as f64;
                c.0 = (c.0 * n + z.re) / (n + 1.0);
                c.1 = (c.1 * n + z.im) / (n + 1.0);
                c.2 += 1;
            }
            None => clusters.push((z.re, z.im, 1)),
        }
    }
    clusters.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    Ok(Spectrum {
        eigenvalues: clusters
            .into_iter()
            .map(|(re, im, multiplicity)| Eigenvalue {
                re,
                im,
                multiplicity,
            })
            .collect(),
        cluster_tol: tol,
    })
}

/// `Σ_j d_j max{0, Re λ_j}`.
pub fn unstable_sum(spec: &Spectrum) -> f64 {
    spec.eigenvalues
        .iter()
        .map(|e| e.multiplicity as f64 * e.re.max(0.0))
        .sum()
}

/// Stable/unstable splitting `R^d = E^s ⊕ E^u` and the projection onto
/// `E^u` along `E^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicSplit {
    /// Orthonormal columns spanning `E^s` (`d x d_s`).
    pub stable_basis: DMatrix<f64>,
    /// Orthonormal columns spanning `E^u` (`d x d_u`).
    pub unstable_basis: DMatrix<f64>,
    pub projection: DMatrix<f64>,
    pub margin: f64,
}

impl HyperbolicSplit {
    pub fn stable_dim(&self) -> usize {
        self.stable_basis.ncols()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable_basis.ncols()
    }

    /// `V_uᵀ π`: maps a state to its `E^u` coordinates.
    pub fn unstable_coordinates(&self) -> DMatrix<f64> {
        self.unstable_basis.transpose() * &self.projection
    }
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let mut s = a.clone();
    let mut scaled = true;
    for _ in 0..200 {
        let inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular iterate in sign iteration".into()))?;
        let c = if scaled {
            let det = s.determinant().abs();
            if det > 0.0 && det.is_finite() {
                det.powf(-1.0 / d as f64)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&s * c + inv * (1.0 / c)) * 0.5;
        let change = (&next - &s).norm();
        let size = next.norm();
        s = next;
        if change <= 1e-13 * size {
            if !scaled {
                return Ok(s);
            }
            scaled = false;
        } else if change <= 1e-3 * size {
            // scaling only helps far from convergence
            scaled = false;
        }
    }
    Err(Error::Numeric("sign iteration did not converge".into()))
}

/// Orthonormal basis of the dominant `k`-dimensional column space, with each
/// column's largest-magnitude entry made positive.
fn dominant_basis(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = m.nrows();
    if k == 0 {
        return DMatrix::zeros(d, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut basis = DMatrix::zeros(d, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let col = u.column(idx);
        let pivot = (0..d)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
            .unwrap();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            basis[(r, c)] = sign * col[r];
        }
    }
    basis
}

/// Splits a hyperbolic `A`; `tol` defaults to `1e-8 · |A|_F`.
pub fn hyperbolic_split(a: &DMatrix<f64>, tol: Option<f64>) -> Result<HyperbolicSplit> {
    let spec = eigen_decompose(a)?;
    let tol = tol.unwrap_or(1e-8 * a.norm());
    if let Some(e) = spec.eigenvalues.iter().find(|e| e.re.abs() <= tol) {
        return Err(Error::NotHyperbolic {
            re: e.re,
            im: e.im,
            tol,
        });
    }
    let d = a.nrows();
    let du = spec.unstable_dim();
    let projection = if du == d {
        DMatrix::identity(d, d)
    } else if du == 0 {
        DMatrix::zeros(d, d)
    } else {
        let sign = matrix_sign(a)?;
        (DMatrix::identity(d, d) + sign) * 0.5
    };
    let complement = DMatrix::identity(d, d) - &projection;
    Ok(HyperbolicSplit {
        stable_basis: dominant_basis(&complement, d - du),
        unstable_basis: dominant_basis(&projection, du),
        projection,
        margin: spec.hyperbolicity_margin(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KalmanRank {
    pub rank: usize,
    pub controllable: bool,
}

/// Rank of `[B, AB, ..., A^{d-1}B]` with threshold `1e-10 · σ_max`.
pub fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<KalmanRank> {
    let d = a.nrows();
    if !a.is_square() || b.nrows() != d {
        return Err(Error::Dimension(
            "Kalman test needs square A and B with matching rows".into(),
        ));
    }
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(d, d * m);
    let mut block = b.clone();
    for k in 0..d {
        ctrb.view_mut((0, k * m), (d, m)).copy_from(&block);
        block = a * block;
    }
    let rank = linalg::rank(&ctrb, 1e-10);
    Ok(KalmanRank {
        rank,
        controllable: rank == d,
    })
}

/// Minimizer and minimum of `f` over `U`.
///
/// Constant and affine potentials are solved by vertex enumeration, a
/// norm distance over a box by clamping; everything else by a level grid
/// with coordinate-descent refinement down to step `1e-8`.
pub fn min_potential(f: &Potential, range: &ControlRange, levels: usize) -> (Vec<f64>, f64) {
    let levels = levels.max(2);
    match (f, range) {
        (Potential::Constant(c), _) => {
            // every point is a minimizer; the vertex centroid is interior
            let verts = range.vertices();
            let mut u = vec![0.0; range.dim()];
            for v in &verts {
                for (a, b) in u.iter_mut().zip(v) {
                    *a += b / verts.len() as f64;
                }
            }
            (u, *c)
        }
        (Potential::Affine { .. }, _) => range
            .vertices()
            .into_iter()
            .map(|v| {
                let val = f.value(&v);
                (v, val)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("control range has vertices"),
        (Potential::NormDist { u_ref, .. }, ControlRange::Box { .. }) => {
            let u = range.clamp(u_ref);
            let val = f.value(&u);
            (u, val)
        }
        (Potential::NormDist { u_ref, .. }, ControlRange::Hull(_))
            if range.contains(u_ref, 0.0) =>
        {
            (u_ref.clone(), 0.0)
        }
        (Potential::Shifted { base, c }, _) => {
            let (u, v) = min_potential(base, range, levels);
            (u, v + c)
        }
        _ => grid_descent(f, range, levels),
    }
}

fn grid_descent(f: &Potential, range: &ControlRange, levels: usize) -> (Vec<f64>, f64) {
    let grid = range.level_grid(levels);
    let mut best = grid
        .into_iter()
        .chain(range.vertices())
        .map(|u| {
            let v = f.value(&u);
            (u, v)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty control range");
    let (lo, hi) = range.bounding_box();
    let mut steps: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) / (levels - 1) as f64)
        .collect();
    while steps.iter().any(|&s| s >= 1e-8) {
        let mut improved = false;
        for i in 0..steps.len() {
            for dir in [1.0, -1.0] {
                let mut u = best.0.clone();
                u[i] += dir * steps[i];
                if range.contains(&u, 0.0) {
                    let v = f.value(&u);
                    if v < best.1 {
                        best = (u, v);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct FormulaOptions {
    /// Grid levels per control coordinate for numeric minimization.
    pub levels: usize,
    /// Extra margin on top of `1e-9` for `0 ∈ int U`.
    pub interior_tol: f64,
    pub hyperbolic_tol: Option<f64>,
}

impl Default for FormulaOptions {
    fn default() -> Self {
        FormulaOptions {
            levels: 21,
            interior_tol: 0.0,
            hyperbolic_tol: None,
        }
    }
}

/// The closed-form pressure together with the checked hypotheses.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FormulaPressure {
    pub spectrum: Spectrum,
    pub unstable_sum: f64,
    pub kalman: KalmanRank,
    pub hyperbolicity_margin: f64,
    /// Margin of `0` inside `U`.
    pub interior_margin: f64,
    pub argmin: Vec<f64>,
    pub min_potential: f64,
    pub value: f64,
}

/// Hypotheses shared by the closed-form pressure and the control-set
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHypotheses {
    pub kalman: KalmanRank,
    pub spectrum: Spectrum,
    pub interior_margin: f64,
}

/// Checks controllability, hyperbolicity and `0 ∈ int U`, in that order.
pub fn check_linear_hypotheses(
    sys: &LinearSystem,
    interior_tol: f64,
    hyperbolic_tol: Option<f64>,
) -> Result<LinearHypotheses> {
    let d = sys.dim();
    let kalman = kalman_rank(sys.a(), sys.b())?;
    if !kalman.controllable {
        return Err(Error::NotControllable {
            rank: kalman.rank,
            dim: d,
        });
    }
    let spectrum = eigen_decompose(sys.a())?;
    let htol = hyperbolic_tol.unwrap_or(1e-8 * sys.a().norm());
    if let Some(e) = spectrum.eigenvalues.iter().find(|e| e.re.abs() <= htol) {
        return Err(Error::NotHyperbolic {
            re: e.re,
            im: e.im,
            tol: htol,
        });
    }
    let origin = vec![0.0; sys.input_dim()];
    let interior_margin = sys.range().interior_margin(&origin);
    if !(interior_margin > 1e-9 + interior_tol) {
        return Err(Error::NotInterior {
            margin: interior_margin,
        });
    }
    Ok(LinearHypotheses {
        kalman,
        spectrum,
        interior_margin,
    })
}

/// `min_U f + Σ_j d_j max{0, Re λ_j}`, after checking controllability,
/// hyperbolicity and `0 ∈ int U`.
pub fn formula_pressure(
    sys: &LinearSystem,
    f: &Potential,
    opts: FormulaOptions,
) -> Result<FormulaPressure> {
    let LinearHypotheses {
        kalman,
        spectrum,
        interior_margin,
    } = check_linear_hypotheses(sys, opts.interior_tol, opts.hyperbolic_tol)?;
    let (argmin, min_f) = min_potential(f, sys.range(), opts.levels);
    let us = unstable_sum(&spectrum);
    Ok(FormulaPressure {
        hyperbolicity_margin: spectrum.hyperbolicity_margin(),
        unstable_sum: us,
        spectrum,
        kalman,
        interior_margin,
        argmin,
        min_potential: min_f,
        value: min_f + us,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EquilibriumOptions {
    /// Defaults to `1e-8 · (1 + |x0|)`.
    pub equilibrium_tol: Option<f64>,
    pub interior_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumBound {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub defect: f64,
    pub spectrum: Spectrum,
    pub kalman: KalmanRank,
    pub unstable_sum: f64,
    pub potential_at_u0: f64,
    pub value: f64,
}

/// Upper bound `Σ_{λ ∈ σ(∇F_{u0}(x0))} max{0, n_λ Re λ} + f(u0)` at a regular
/// equilibrium pair with `u0 ∈ int U`.
pub fn equilibrium_upper_bound(
    sys: &System,
    x0: &[f64],
    u0: &[f64],
    f: &Potential,
    opts: EquilibriumOptions,
) -> Result<EquilibriumBound> {
    let d = sys.dim();
    if x0.len() != d || u0.len() != sys.input_dim() {
        return Err(Error::Dimension(
            "equilibrium pair does not match the system".into(),
        ));
    }
    let mut fx = vec![0.0; d];
    sys.field(x0, u0, &mut fx);
    let defect = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = 1.0 + x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(defect <= opts.equilibrium_tol.unwrap_or(1e-8 * scale)) {
        return Err(Error::NotEquilibrium { defect });
    }
    let margin = sys.range().interior_margin(u0);
    if !(margin > 1e-9 + opts.interior_tol) {
        return Err(Error::NotInterior { margin });
    }
    let jac = sys.jacobian(x0, u0);
    let input = sys.input_jacobian(x0, u0);
    let kalman = kalman_rank(&jac, &input)?;
    if !kalman.controllable {
        return Err(Error::NotRegular {
            rank: kalman.rank,
            dim: d,
        });
    }
    let spectrum = eigen_decompose(&jac)?;
    let us = unstable_sum(&spectrum);
    let fu = f.value(u0);
    Ok(EquilibriumBound {
        x0: x0.to_vec(),
        u0: u0.to_vec(),
        defect,
        spectrum,
        kalman,
        unstable_sum: us,
        potential_at_u0: fu,
        value: us + fu,
    })
}

/// The unstable subsystem `ẏ = A|_{E^u} y + πB u` in `E^u` coordinates.
#[derive(Debug, Clone)]
pub struct ProjectedSystem {
    pub system: LinearSystem,
    /// `d_u x d` map from states to `E^u` coordinates.
    pub coordinates: DMatrix<f64>,
}

pub fn project_system(sys: &LinearSystem, split: &HyperbolicSplit) -> Result<ProjectedSystem> {
    let du = split.unstable_dim();
    if du == 0 {
        return Err(Error::Dimension(
            "unstable subspace is trivial; nothing to project onto".into(),
        ));
    }
    if split.projection.nrows() != sys.dim() {
        return Err(Error::Dimension(format!(
            "split is for dimension {} but system has {}",
            split.projection.nrows(),
            sys.dim()
        )));
    }
    let v = &split.unstable_basis;
    let a_u = v.transpose() * sys.a() * v;
    let b_u = v.transpose() * &split.projection * sys.b();
    Ok(ProjectedSystem {
        system: LinearSystem::new(a_u, b_u, sys.range().clone())?,
        coordinates: split.unstable_coordinates(),
    })
}
