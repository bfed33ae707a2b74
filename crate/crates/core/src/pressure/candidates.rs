use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ControlRange, QuantizedControl};

/// Number of control intervals of length `delta` in `tau`.
pub fn interval_count(tau: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0) || !(tau > 0.0) {
        return Err(Error::Config(format!(
            "need tau > 0 and delta > 0, got tau={tau}, delta={delta}"
        )));
    }
    let n = (tau / delta).round();
    if n < 1.0 || (n * delta - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::Config(format!(
            "tau={tau} is not a multiple of delta={delta}"
        )));
    }
    Ok(n as usize)
}

/// Candidate controls of horizon `tau`: every value sequence over the level
/// grid when there are at most `cap` of them, otherwise all constant
/// controls plus seeded random sequences, `cap` in total.
pub fn build_candidates(
    range: &ControlRange,
    levels: usize,
    tau: f64,
    delta: f64,
    cap: usize,
    seed: u64,
) -> Result<Vec<QuantizedControl>> {
    if levels < 2 {
        return Err(Error::Config(format!(
            "u_levels must be >= 2, got {levels}"
        )));
    }
    let n = interval_count(tau, delta)?;
    let grid = range.level_grid(levels);
    let g = grid.len();
    let m = range.dim();
    let make = |seq: &[usize]| {
        let mut values = Vec::with_capacity(seq.len() * m);
        for &i in seq {
            values.extend_from_slice(&grid[i]);
        }
        QuantizedControl::unchecked(delta, m, values).expect("validated step")
    };

    let total = (g as u128).checked_pow(n as u32);
    if let Some(total) = total.filter(|&t| t <= cap as u128) {
        let mut out = Vec::with_capacity(total as usize);
        let mut seq = alloc::vec![0usize; n];
        for _ in 0..total {
            out.push(make(&seq));
            // odometer with the last interval running fastest
            for pos in (0..n).rev() {
                seq[pos] += 1;
                if seq[pos] < g {
                    break;
                }
                seq[pos] = 0;
            }
        }
        return Ok(out);
    }
    if cap < g {
        return Err(Error::Config(format!(
            "cap={cap} is smaller than the {g} constant controls on the level grid"
        )));
    }
    let mut out: Vec<QuantizedControl> = (0..g).map(|i| make(&alloc::vec![i; n])).collect();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < cap {
        let seq: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
        if seq.iter().all(|&s| s == seq[0]) || !seen.insert(seq.clone()) {
            continue;
        }
        out.push(make(&seq));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ControlRange {
        ControlRange::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn constants_at_single_interval() {
        let c = build_candidates(&unit(), 3, 0.5, 0.5, 100, 0).unwrap();
        let vals: Vec<f64> = c.iter().map(|w| w.value(0)[0]).collect();
        assert_eq!(vals, [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn full_enumeration_count() {
        let c = build_candidates(&unit(), 2, 1.0, 0.5, 100, 0).unwrap();
        assert_eq!(c.len(), 4);
        let set: BTreeSet<Vec<u64>> = c
            .iter()
            .map(|w| w.values().iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn cap_keeps_constants() {
        // 10^6 sequences: 10 levels over 6 intervals
        let c = build_candidates(&unit(), 10, 6.0, 1.0, 10, 3).unwrap();
        assert_eq!(c.len(), 10);
        for w in &c {
            assert!(w.values().iter().all(|v| *v == w.values()[0]));
        }
        let c = build_candidates(&unit(), 10, 6.0, 1.0, 25, 3).unwrap();
        assert_eq!(c.len(), 25);
        assert!(build_candidates(&unit(), 10, 6.0, 1.0, 9, 3).is_err());
    }

    #[test]
    fn misaligned_horizon_rejected() {
        assert!(build_candidates(&unit(), 3, 0.7, 0.5, 100, 0).is_err());
    }
}
