use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use super::ControlRange;
use crate::error::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// `F(x, u)` written into the output slice.
pub type VectorFieldFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `div F_u(x)`.
pub type ScalarFieldFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// `∇_x F(x, u)` as a `d x d` matrix.
pub type JacobianFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

/// `ẋ = A x + B u`, `u ∈ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    range: ControlRange,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, range: ControlRange) -> Result<Self> {
        if a.nrows() == 0 || !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B must have {} rows and at least one column, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if range.dim() != b.ncols() {
            return Err(Error::Dimension(format!(
                "control range has dimension {} but B has {} columns",
                range.dim(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("system matrices must be finite".into()));
        }
        Ok(LinearSystem { a, b, range })
    }

    /// Row-major convenience constructor.
    pub fn from_rows(
        d: usize,
        m: usize,
        a: &[f64],
        b: &[f64],
        range: ControlRange,
    ) -> Result<Self> {
        if a.len() != d * d || b.len() != d * m {
            return Err(Error::Dimension(
                "matrix data does not match the stated dimensions".into(),
            ));
        }
        Self::new(
            DMatrix::from_row_slice(d, d, a),
            DMatrix::from_row_slice(d, m, b),
            range,
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn range(&self) -> &ControlRange {
        &self.range
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `ẋ = -A x - B u`: the same system with time reversed.
    pub fn time_reversed(&self) -> Self {
        LinearSystem {
            a: -&self.a,
            b: -&self.b,
            range: self.range.clone(),
        }
    }

    pub fn with_range(&self, range: ControlRange) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), range)
    }

    /// The rest point `x = -A⁻¹ B u` of the constant input `u`.
    pub fn equilibrium(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} entries, system takes {}",
                u.len(),
                self.input_dim()
            )));
        }
        let rhs = -(&self.b * nalgebra::DVector::from_column_slice(u));
        let x =
            self.a.clone().lu().solve(&rhs).ok_or_else(|| {
                Error::Numeric("A is singular; no equilibrium for this input".into())
            })?;
        Ok(x.iter().cloned().collect())
    }
}

/// `ẋ = F(x, u)` with user-supplied derivatives where available.
#[derive(Clone)]
pub struct GeneralSystem {
    name: String,
    dim: usize,
    input_dim: usize,
    field: VectorFieldFn,
    divergence: Option<ScalarFieldFn>,
    jacobian: Option<JacobianFn>,
    range: ControlRange,
}

impl fmt::Debug for GeneralSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("input_dim", &self.input_dim)
            .field("analytic_divergence", &self.divergence.is_some())
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("range", &self.range)
            .finish()
    }
}

impl GeneralSystem {
    pub fn new(name: &str, dim: usize, field: VectorFieldFn, range: ControlRange) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("state dimension must be >= 1".into()));
        }
        Ok(GeneralSystem {
            name: name.into(),
            dim,
            input_dim: range.dim(),
            field,
            divergence: None,
            jacobian: None,
            range,
        })
    }

    pub fn with_divergence(mut self, div: ScalarFieldFn) -> Self {
        self.divergence = Some(div);
        self
    }

    pub fn with_jacobian(mut self, jac: JacobianFn) -> Self {
        self.jacobian = Some(jac);
        self
    }

    /// Drops analytic derivatives so that finite differences are used.
    pub fn without_derivatives(mut self) -> Self {
        self.divergence = None;
        self.jacobian = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Built-in planar test systems (scalar input entering the second
    /// equation):
    ///
    /// - `vanderpol`: `ẋ = y, ẏ = (1 - x²) y - x + u`
    /// - `pendulum`: `ẋ = y, ẏ = -sin x - y/2 + u`
    pub fn builtin(name: &str, range: ControlRange) -> Result<Self> {
        if range.dim() != 1 {
            return Err(Error::Config(format!(
                "builtin system `{name}` takes a scalar control"
            )));
        }
        match name {
            "vanderpol" => Ok(GeneralSystem::new(
                name,
                2,
                Arc::new(|x: &[f64], u: &[f64], out: &mut [f64]| {
                    out[0] = x[1];
                    out[1] = (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
                }),
                range,
            )?
            .with_divergence(Arc::new(|x: &[f64], _u: &[f64]| 1.0 - x[0] * x[0]))
            .with_jacobian(Arc::new(|x: &[f64], _u: &[f64]| {
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[0.0, 1.0, -2.0 * x[0] * x[1] - 1.0, 1.0 - x[0] * x[0]],
                )
            }))),
            "pendulum" => Ok(GeneralSystem::new(
                name,
                2,
                Arc::new(|x: &[f64], u: &[f64], out: &mut [f64]| {
                    out[0] = x[1];
                    out[1] = -x[0].sin() - 0.5 * x[1] + u[0];
                }),
                range,
            )?
            .with_divergence(Arc::new(|_x: &[f64], _u: &[f64]| -0.5))
            .with_jacobian(Arc::new(|x: &[f64], _u: &[f64]| {
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -x[0].cos(), -0.5])
            }))),
            other => Err(Error::Config(format!(
                "unknown builtin system `{other}` (available: vanderpol, pendulum)"
            ))),
        }
    }
}

/// A control system on R^d.
#[derive(Debug, Clone)]
pub enum System {
    Linear(LinearSystem),
    General(GeneralSystem),
}

impl From<LinearSystem> for System {
    fn from(s: LinearSystem) -> Self {
        System::Linear(s)
    }
}

impl From<GeneralSystem> for System {
    fn from(s: GeneralSystem) -> Self {
        System::General(s)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl System {
    pub fn dim(&self) -> usize {
        match self {
            System::Linear(s) => s.dim(),
            System::General(s) => s.dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            System::Linear(s) => s.input_dim(),
            System::General(s) => s.input_dim,
        }
    }

    pub fn range(&self) -> &ControlRange {
        match self {
            System::Linear(s) => &s.range,
            System::General(s) => &s.range,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearSystem> {
        match self {
            System::Linear(s) => Some(s),
            System::General(_) => None,
        }
    }

    pub fn field(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            System::Linear(s) => {
                let d = s.dim();
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += s.a[(i, j)] * x[j];
                    }
                    for k in 0..s.input_dim() {
                        acc += s.b[(i, k)] * u[k];
                    }
                    out[i] = acc;
                }
            }
            System::General(s) => (s.field)(x, u, out),
        }
    }

    /// `∇_x F(x, u)`; central differences with step `1e-6 (1 + |x|)` when no
    /// analytic Jacobian is available.
    pub fn jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        match self {
            System::Linear(s) => s.a.clone(),
            System::General(s) => match &s.jacobian {
                Some(j) => j(x, u),
                None => fd_jacobian(
                    |y, out| (s.field)(y, u, out),
                    x,
                    s.dim,
                    1e-6 * (1.0 + norm2(x)),
                ),
            },
        }
    }

    /// `∇_u F(x, u)` (`d x m`).
    pub fn input_jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        match self {
            System::Linear(s) => s.b.clone(),
            System::General(s) => {
                let h = 1e-6 * (1.0 + norm2(u));
                let mut jac = DMatrix::zeros(s.dim, s.input_dim);
                let mut up = vec![0.0; s.dim];
                let mut dn = vec![0.0; s.dim];
                let mut v = u.to_vec();
                for k in 0..s.input_dim {
                    v[k] = u[k] + h;
                    (s.field)(x, &v, &mut up);
                    v[k] = u[k] - h;
                    (s.field)(x, &v, &mut dn);
                    v[k] = u[k];
                    for i in 0..s.dim {
                        jac[(i, k)] = (up[i] - dn[i]) / (2.0 * h);
                    }
                }
                jac
            }
        }
    }

    /// `div F_u(x)`; central differences with step `1e-5 (1 + |x|)` when no
    /// analytic divergence is available.
    pub fn divergence(&self, x: &[f64], u: &[f64]) -> f64 {
        match self {
            System::Linear(s) => s.a.trace(),
            System::General(s) => match &s.divergence {
                Some(div) => div(x, u),
                None => {
                    let h = 1e-5 * (1.0 + norm2(x));
                    let mut y = x.to_vec();
                    let mut up = vec![0.0; s.dim];
                    let mut dn = vec![0.0; s.dim];
                    let mut acc = 0.0;
                    for i in 0..s.dim {
                        y[i] = x[i] + h;
                        (s.field)(&y, u, &mut up);
                        y[i] = x[i] - h;
                        (s.field)(&y, u, &mut dn);
                        y[i] = x[i];
                        acc += (up[i] - dn[i]) / (2.0 * h);
                    }
                    acc
                }
            },
        }
    }
}

fn fd_jacobian(f: impl Fn(&[f64], &mut [f64]), x: &[f64], d: usize, h: f64) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(d, x.len());
    let mut y = x.to_vec();
    let mut up = vec![0.0; d];
    let mut dn = vec![0.0; d];
    for j in 0..x.len() {
        y[j] = x[j] + h;
        f(&y, &mut up);
        y[j] = x[j] - h;
        f(&y, &mut dn);
        y[j] = x[j];
        for i in 0..d {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    jac
}
