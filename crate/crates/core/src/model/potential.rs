use alloc::boxed::Box;
use alloc::vec::Vec;

use super::ControlRange;
use crate::error::{Error, Result};
use crate::norm::PNorm;

/// Continuous potential `f: U -> R`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Potential {
    Constant(f64),
    /// `f(u) = w·u + b`
    Affine {
        w: Vec<f64>,
        b: f64,
    },
    /// `f(u) = |u - u_ref|_p`
    NormDist {
        u_ref: Vec<f64>,
        norm: PNorm,
    },
    /// `f(u) = base(u) + c`
    Shifted {
        base: Box<Potential>,
        c: f64,
    },
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Constant(0.0)
    }

    /// Value at `u` without checking membership in the control range.
    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::Affine { w, b } => w.iter().zip(u).map(|(a, x)| a * x).sum::<f64>() + b,
            Potential::NormDist { u_ref, norm } => norm.dist(u, u_ref),
            Potential::Shifted { base, c } => base.value(u) + c,
        }
    }

    /// `f + c`. Constant and affine potentials absorb the shift.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            Potential::Constant(v) => Potential::Constant(v + c),
            Potential::Affine { w, b } => Potential::Affine {
                w: w.clone(),
                b: b + c,
            },
            Potential::Shifted { base, c: c0 } => Potential::Shifted {
                base: base.clone(),
                c: c0 + c,
            },
            other => Potential::Shifted {
                base: Box::new(other.clone()),
                c,
            },
        }
    }

    /// Lipschitz constant in the potential's own metric (the max-norm for
    /// constant and affine kinds).
    pub fn lipschitz(&self) -> f64 {
        match self {
            Potential::Constant(_) => 0.0,
            Potential::Affine { w, .. } => PNorm::One.of(w),
            Potential::NormDist { .. } => 1.0,
            Potential::Shifted { base, .. } => base.lipschitz(),
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Potential::Constant(_) => None,
            Potential::Affine { w, .. } => Some(w.len()),
            Potential::NormDist { u_ref, .. } => Some(u_ref.len()),
            Potential::Shifted { base, .. } => base.input_dim(),
        }
    }
}

/// `f(u)` for `u ∈ U` (checked up to `tol`).
pub fn eval_potential(f: &Potential, range: &ControlRange, u: &[f64], tol: f64) -> Result<f64> {
    if !range.contains(u, tol) {
        return Err(Error::Domain(
            "potential evaluated outside the control range".into(),
        ));
    }
    if let Some(m) = f.input_dim() {
        if m != u.len() {
            return Err(Error::Dimension(
                "potential and control dimensions differ".into(),
            ));
        }
    }
    let v = f.value(u);
    if !v.is_finite() {
        return Err(Error::Numeric("potential is not finite".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn kinds_evaluate() {
        let r = ControlRange::boxed(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        assert_eq!(
            eval_potential(&Potential::Constant(3.0), &r, &[1.0, 2.0], 0.0).unwrap(),
            3.0
        );
        let aff = Potential::Affine {
            w: vec![1.0, 0.0],
            b: 0.0,
        };
        assert_eq!(eval_potential(&aff, &r, &[2.0, 5.0], 0.0).unwrap(), 2.0);
        let u0 = 0.3;
        let r1 = ControlRange::interval(-1.0 + u0, 1.0 + u0).unwrap();
        let nd = Potential::NormDist {
            u_ref: vec![u0],
            norm: PNorm::One,
        };
        assert_eq!(eval_potential(&nd, &r1, &[u0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn outside_range_is_domain_error() {
        let r = ControlRange::interval(-1.0, 1.0).unwrap();
        assert!(matches!(
            eval_potential(&Potential::zero(), &r, &[1.5], 1e-9),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn shift_adds_constant() {
        let nd = Potential::NormDist {
            u_ref: vec![0.0],
            norm: PNorm::Two,
        };
        let s = nd.shifted(2.0).shifted(-0.5);
        assert_eq!(s.value(&[-1.0]), 2.5);
        assert_eq!(
            Potential::Constant(1.0).shifted(2.0),
            Potential::Constant(3.0)
        );
    }

    #[test]
    fn lipschitz_bound_holds_on_grid() {
        let fs = [
            Potential::Constant(-2.0),
            Potential::Affine {
                w: vec![0.5, -2.0],
                b: 1.0,
            },
            Potential::NormDist {
                u_ref: vec![0.1, 0.2],
                norm: PNorm::Inf,
            },
        ];
        let grid: Vec<[f64; 2]> = (0..11)
            .flat_map(|i| (0..11).map(move |j| [-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64]))
            .collect();
        for f in &fs {
            let l = f.lipschitz();
            for a in &grid {
                for b in &grid {
                    let gap = (f.value(a) - f.value(b)).abs();
                    let metric = match f {
                        Potential::NormDist { norm, .. } => norm.dist(a, b),
                        _ => PNorm::Inf.dist(a, b),
                    };
                    assert!(gap <= l * metric + 1e-12);
                }
            }
        }
    }
}
