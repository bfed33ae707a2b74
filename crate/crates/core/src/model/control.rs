use alloc::format;
use alloc::vec::Vec;

use super::ControlRange;
use crate::error::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Piecewise-constant control with a single global step.
///
/// On `[(i-1)Δ, iΔ)` the control takes the value `v_i`; at the right end
/// of the horizon it keeps the last value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantizedControl {
    step: f64,
    input_dim: usize,
    values: Vec<f64>,
}

impl QuantizedControl {
    /// `values` is row-major: `input_dim` entries per interval.
    pub fn new(
        step: f64,
        input_dim: usize,
        values: Vec<f64>,
        range: &ControlRange,
    ) -> Result<Self> {
        let ctrl = Self::unchecked(step, input_dim, values)?;
        if range.dim() != input_dim {
            return Err(Error::Dimension(format!(
                "control has {input_dim} inputs but range has dimension {}",
                range.dim()
            )));
        }
        if let Some(i) = (0..ctrl.len()).find(|&i| !range.contains(ctrl.value(i), 0.0)) {
            return Err(Error::Domain(format!(
                "control value {i} lies outside the control range"
            )));
        }
        Ok(ctrl)
    }

    /// Constructor without range validation; used where values come from
    /// an already-validated pool.
    pub fn unchecked(step: f64, input_dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!(
                "control step must be positive, got {step}"
            )));
        }
        if input_dim == 0 || values.is_empty() || !values.len().is_multiple_of(input_dim) {
            return Err(Error::Dimension(
                "control values are empty or ragged".into(),
            ));
        }
        Ok(QuantizedControl {
            step,
            input_dim,
            values,
        })
    }

    pub fn constant(step: f64, intervals: usize, value: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(intervals * value.len());
        for _ in 0..intervals {
            values.extend_from_slice(value);
        }
        Self::unchecked(step, value.len(), values)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.values.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.len() as f64
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the interval active at time `t`.
    pub fn interval_at(&self, t: f64) -> usize {
        let i = (t / self.step).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.len() - 1)
        }
    }

    /// The shift `(Θ_k ω)(t) = ω(t + kΔ)` on a periodically extended control.
    pub fn rotated(&self, k: usize) -> Self {
        let n = self.len();
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..n {
            values.extend_from_slice(self.value((i + k) % n));
        }
        QuantizedControl {
            values,
            ..self.clone()
        }
    }

    pub fn concat(&self, other: &QuantizedControl) -> Result<Self> {
        if self.input_dim != other.input_dim || (self.step - other.step).abs() > 1e-12 * self.step {
            return Err(Error::Dimension(
                "cannot concatenate controls with different step or inputs".into(),
            ));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(QuantizedControl {
            values,
            ..self.clone()
        })
    }

    /// `times` periodic repetitions.
    pub fn repeated(&self, times: usize) -> Self {
        let mut values = Vec::with_capacity(self.values.len() * times);
        for _ in 0..times {
            values.extend_from_slice(&self.values);
        }
        QuantizedControl {
            values,
            ..self.clone()
        }
    }
}

/// Value of `ω` at time `t ∈ [0, horizon]`.
pub fn eval_control(omega: &QuantizedControl, t: f64) -> Result<&[f64]> {
    if !(t >= 0.0) || t > omega.horizon() {
        return Err(Error::Domain(format!(
            "time {t} outside [0, {}]",
            omega.horizon()
        )));
    }
    Ok(omega.value(omega.interval_at(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ab() -> QuantizedControl {
        QuantizedControl::unchecked(0.5, 1, vec![-1.0, 2.0]).unwrap()
    }

    #[test]
    fn lookup_follows_intervals() {
        let w = ab();
        assert_eq!(eval_control(&w, 0.25).unwrap(), &[-1.0]);
        assert_eq!(eval_control(&w, 0.5).unwrap(), &[2.0]);
        assert_eq!(eval_control(&w, 0.75).unwrap(), &[2.0]);
        assert_eq!(eval_control(&w, 1.0).unwrap(), &[2.0]);
        assert_eq!(eval_control(&w, 0.0).unwrap(), &[-1.0]);
    }

    #[test]
    fn lookup_outside_horizon_fails() {
        let w = ab();
        assert!(matches!(eval_control(&w, 1.0001), Err(Error::Domain(_))));
        assert!(matches!(eval_control(&w, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn values_must_lie_in_range() {
        let range = ControlRange::interval(-1.0, 1.0).unwrap();
        assert!(QuantizedControl::new(0.5, 1, vec![-1.0, 1.0], &range).is_ok());
        assert!(QuantizedControl::new(0.5, 1, vec![-1.0, 1.0 + 1e-15], &range).is_err());
        assert!(QuantizedControl::new(0.0, 1, vec![0.0], &range).is_err());
    }

    #[test]
    fn rotation_is_periodic_shift() {
        let w = QuantizedControl::unchecked(1.0, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.rotated(1).values(), &[2.0, 3.0, 1.0]);
        assert_eq!(w.rotated(3), w);
        assert_eq!(w.repeated(2).len(), 6);
    }
}
