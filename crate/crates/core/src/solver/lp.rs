//! Dense tableau simplex for small linear programs of the form
//!
//! ```text
//! maximize  cᵀx   subject to  A x ≤ b,  x ≥ 0,  b ≥ 0
//! ```
//!
//! The origin is feasible, so no phase one is needed. Pivoting uses Dantzig's
//! rule with lowest-index tie-breaking and falls back to Bland's rule after a
//! run of degenerate pivots, which rules out cycling. The pivot sequence is a
//! pure function of the input.

use thiserror::Error;

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("right-hand side {row} is negative ({value}); origin must be feasible")]
    InfeasibleOrigin { row: usize, value: f64 },
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("dimension mismatch: {0}")]
    Shape(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

/// A `maximize cᵀx, A x ≤ b, x ≥ 0` problem in dense row-major storage.
#[derive(Debug, Clone)]
pub struct DenseLp {
    n_vars: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl DenseLp {
    pub fn new(objective: Vec<f64>) -> Self {
        DenseLp {
            n_vars: objective.len(),
            a: Vec::new(),
            b: Vec::new(),
            c: objective,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    /// Append the row `coeffs · x ≤ rhs`.
    pub fn push_row(&mut self, coeffs: &[f64], rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.n_vars {
            return Err(LpError::Shape("row length differs from variable count"));
        }
        self.a.extend_from_slice(coeffs);
        self.b.push(rhs);
        Ok(())
    }

    /// Append a row given as sparse `(column, value)` pairs.
    pub fn push_sparse_row(&mut self, entries: &[(usize, f64)], rhs: f64) -> Result<(), LpError> {
        let start = self.a.len();
        self.a.resize(start + self.n_vars, 0.0);
        for &(j, v) in entries {
            if j >= self.n_vars {
                self.a.truncate(start);
                return Err(LpError::Shape("column index out of range"));
            }
            self.a[start + j] += v;
        }
        self.b.push(rhs);
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let m = self.b.len();
        let n = self.n_vars;
        for (row, &value) in self.b.iter().enumerate() {
            if value < 0.0 {
                return Err(LpError::InfeasibleOrigin { row, value });
            }
        }
        // Columns: structural, slacks, rhs.
        let width = n + m + 1;
        let rhs = n + m;
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            row[..n].copy_from_slice(&self.a[i * n..(i + 1) * n]);
            row[n + i] = 1.0;
            row[rhs] = self.b[i];
        }
        // Reduced costs of a maximization; optimal when none is positive.
        let mut d = vec![0.0; width];
        d[..n].copy_from_slice(&self.c);
        let mut basis: Vec<usize> = (n..n + m).collect();

        let max_iter = 50 * (n + m).max(10);
        let mut degenerate_run = 0;
        let mut pivot_row = vec![0.0; width];
        for iteration in 0..max_iter {
            let bland = degenerate_run >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..n + m).find(|&j| d[j] > COST_TOL)
            } else {
                let mut best = None;
                let mut best_val = COST_TOL;
                for (j, &dj) in d[..n + m].iter().enumerate() {
                    if dj > best_val {
                        best_val = dj;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else {
                let mut x = vec![0.0; n];
                for (i, &bv) in basis.iter().enumerate() {
                    if bv < n {
                        x[bv] = t[i * width + rhs];
                    }
                }
                let objective = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
                return Ok(LpSolution {
                    objective,
                    x,
                    iterations: iteration,
                });
            };

            // Ratio test; ties go to the smallest basic variable index.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let aic = t[i * width + col];
                if aic > PIVOT_TOL {
                    let ratio = t[i * width + rhs] / aic;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr || (ratio == lr && basis[i] < basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio <= 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            let piv = t[r * width + col];
            for v in &mut t[r * width..(r + 1) * width] {
                *v /= piv;
            }
            t[r * width + col] = 1.0;
            pivot_row.copy_from_slice(&t[r * width..(r + 1) * width]);
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = t[i * width + col];
                if f == 0.0 {
                    continue;
                }
                let row = &mut t[i * width..(i + 1) * width];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[col] = 0.0;
                if row[rhs] < 0.0 && row[rhs] > -1e-12 {
                    row[rhs] = 0.0;
                }
            }
            let f = d[col];
            for (v, p) in d.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            d[col] = 0.0;
            basis[r] = col;
        }
        Err(LpError::IterationLimit(max_iter))
    }
}
