#[cfg(not(feature = "std"))]
use num_traits::Float;

/// The p-norms supported for metrics on state and control space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PNorm {
    One,
    #[default]
    Two,
    Inf,
}

impl PNorm {
    pub fn from_p(p: f64) -> Option<Self> {
        if p == 1.0 {
            Some(PNorm::One)
        } else if p == 2.0 {
            Some(PNorm::Two)
        } else if p.is_infinite() && p > 0.0 {
            Some(PNorm::Inf)
        } else {
            None
        }
    }

    pub fn p(self) -> f64 {
        match self {
            PNorm::One => 1.0,
            PNorm::Two => 2.0,
            PNorm::Inf => f64::INFINITY,
        }
    }

    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            PNorm::One => v.iter().map(|x| x.abs()).sum(),
            PNorm::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PNorm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            PNorm::One => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            PNorm::Two => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            PNorm::Inf => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }

    /// The dual norm, used for Lipschitz constants of linear functionals.
    pub fn dual(self) -> Self {
        match self {
            PNorm::One => PNorm::Inf,
            PNorm::Two => PNorm::Two,
            PNorm::Inf => PNorm::One,
        }
    }
}
