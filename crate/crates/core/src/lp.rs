//! Dense two-phase simplex for the small linear programs that show up in
//! hull membership and polytope distance queries.
//!
//! Problems are in standard form: minimize `c·z` subject to `A z = b`,
//! `z >= 0`. Bland's rule is used throughout, so the method terminates on
//! degenerate problems at the cost of some speed.

use alloc::vec;
use alloc::vec::Vec;

const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, z: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1); last column is the right-hand side
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] /= p;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let factor = self.t[r * w + pc];
            if factor == 0.0 {
                continue;
            }
            for c in 0..w {
                self.t[r * w + c] -= factor * self.t[pr * w + c];
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on the reduced costs of `cost`, restricted to
    /// columns `< allowed`. Returns false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            // reduced cost of column j: c_j - c_B^T column_j
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for r in 0..self.rows {
                    rc -= cost[self.basis[r]] * self.at(r, j);
                }
                if rc < -1e-12 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(pc) = entering else { return true };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, best)) => {
                            if ratio < best - 1e-15
                                || (ratio <= best + 1e-15 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                None => return false,
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
    }
}

/// Solves `min c·z, A z = b, z >= 0` with `A` given row-major (`rows x cols`).
pub fn solve_standard(a: &[f64], b: &[f64], c: &[f64]) -> LpOutcome {
    let rows = b.len();
    let n = c.len();
    assert_eq!(a.len(), rows * n, "constraint matrix has wrong size");

    // phase one: append one artificial per row
    let cols = n + rows;
    let mut t = vec![0.0; rows * (cols + 1)];
    for r in 0..rows {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r * (cols + 1) + j] = sign * a[r * n + j];
        }
        t[r * (cols + 1) + n + r] = 1.0;
        t[r * (cols + 1) + cols] = sign * b[r];
    }
    let mut tab = Tableau {
        rows,
        cols,
        t,
        basis: (n..n + rows).collect(),
    };
    let mut phase1 = vec![0.0; cols];
    for v in phase1.iter_mut().skip(n) {
        *v = 1.0;
    }
    tab.optimize(&phase1, cols);
    let infeas: f64 = (0..rows)
        .filter(|&r| tab.basis[r] >= n)
        .map(|r| tab.rhs(r))
        .sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if infeas > 1e-9 * scale {
        return LpOutcome::Infeasible;
    }

    // drive remaining artificials out of the basis; drop redundant rows
    let mut r = 0;
    while r < tab.rows {
        if tab.basis[r] >= n {
            if let Some(pc) = (0..n).find(|&j| tab.at(r, j).abs() > PIVOT_EPS) {
                tab.pivot(r, pc);
                r += 1;
            } else {
                let w = tab.cols + 1;
                tab.t.drain(r * w..(r + 1) * w);
                tab.basis.remove(r);
                tab.rows -= 1;
            }
        } else {
            r += 1;
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(c);
    if !tab.optimize(&phase2, n) {
        return LpOutcome::Unbounded;
    }
    let mut z = vec![0.0; n];
    for r in 0..tab.rows {
        if tab.basis[r] < n {
            z[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let value = c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum();
    LpOutcome::Optimal { value, z }
}

/// Max-norm distance from `x` to the convex hull of `vertices`
/// (`count` points of dimension `dim`, row-major).
pub fn hull_distance_inf(vertices: &[f64], dim: usize, x: &[f64]) -> f64 {
    let count = vertices.len() / dim;
    // vars: lambda (count), t, s_plus (dim), s_minus (dim)
    let n = count + 1 + 2 * dim;
    let rows = 2 * dim + 1;
    let mut a = vec![0.0; rows * n];
    let mut b = vec![0.0; rows];
    for i in 0..dim {
        // V lambda - t + s+ = x
        for k in 0..count {
            a[i * n + k] = vertices[k * dim + i];
        }
        a[i * n + count] = -1.0;
        a[i * n + count + 1 + i] = 1.0;
        b[i] = x[i];
        // -V lambda - t + s- = -x
        let r = dim + i;
        for k in 0..count {
            a[r * n + k] = -vertices[k * dim + i];
        }
        a[r * n + count] = -1.0;
        a[r * n + count + 1 + dim + i] = 1.0;
        b[r] = -x[i];
    }
    for k in 0..count {
        a[2 * dim * n + k] = 1.0;
    }
    b[2 * dim] = 1.0;
    let mut c = vec![0.0; n];
    c[count] = 1.0;
    match solve_standard(&a, &b, &c) {
        LpOutcome::Optimal { value, .. } => value.max(0.0),
        _ => f64::INFINITY,
    }
}

/// One-norm distance from `x` to the convex hull of `vertices`.
pub fn hull_distance_one(vertices: &[f64], dim: usize, x: &[f64]) -> f64 {
    let count = vertices.len() / dim;
    // vars: lambda (count), p (dim), q (dim); V lambda + p - q = x
    let n = count + 2 * dim;
    let rows = dim + 1;
    let mut a = vec![0.0; rows * n];
    let mut b = vec![0.0; rows];
    for i in 0..dim {
        for k in 0..count {
            a[i * n + k] = vertices[k * dim + i];
        }
        a[i * n + count + i] = 1.0;
        a[i * n + count + dim + i] = -1.0;
        b[i] = x[i];
    }
    for k in 0..count {
        a[dim * n + k] = 1.0;
    }
    b[dim] = 1.0;
    let mut c = vec![0.0; n];
    for v in c.iter_mut().skip(count) {
        *v = 1.0;
    }
    match solve_standard(&a, &b, &c) {
        LpOutcome::Optimal { value, .. } => value.max(0.0),
        _ => f64::INFINITY,
    }
}
