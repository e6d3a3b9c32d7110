//! SMO for the C-SVC dual
//!
//! ```text
//! min  ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ αᵢ ≤ C,   Qᵢⱼ = yᵢyⱼK(xᵢ, xⱼ)
//! ```
//!
//! Working pairs are chosen with the maximal-violating first index and the
//! second-order gain rule for the second index (Fan, Chen & Lin, JMLR 2005).
//! The solver accepts a starting point so a relearned problem can resume
//! from a neighbouring solution.

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Read access to a symmetric kernel matrix.
pub(crate) trait Gram {
    fn len(&self) -> usize;

    /// Row `i`; may borrow from `self` or be materialized into `buf`.
    fn row<'a>(&'a self, i: usize, buf: &'a mut Vec<f64>) -> &'a [f64];

    fn diag(&self, i: usize) -> f64;
}

/// Full n x n kernel matrix, row-major.
#[derive(Clone, Debug)]
pub(crate) struct DenseGram {
    n: usize,
    values: Vec<f64>,
}

impl DenseGram {
    pub fn rbf(points: &[Vec<f64>], gamma: f64) -> Self {
        let n = points.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = super::rbf(&points[i], &points[j], gamma);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Self { n, values }
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

impl Gram for DenseGram {
    fn len(&self) -> usize {
        self.n
    }

    fn row<'a>(&'a self, i: usize, _buf: &'a mut Vec<f64>) -> &'a [f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    fn diag(&self, i: usize) -> f64 {
        self.values[i * self.n + i]
    }
}

/// A dense matrix bordered by one extra point.
pub(crate) struct BorderedGram<'g> {
    pub base: &'g DenseGram,
    /// K(x_j, probe) for every base point j.
    pub border: Vec<f64>,
    pub corner: f64,
}

impl Gram for BorderedGram<'_> {
    fn len(&self) -> usize {
        self.base.n + 1
    }

    fn row<'a>(&'a self, i: usize, buf: &'a mut Vec<f64>) -> &'a [f64] {
        let n = self.base.n;
        buf.clear();
        if i == n {
            buf.extend_from_slice(&self.border);
            buf.push(self.corner);
        } else {
            buf.extend_from_slice(&self.base.values[i * n..(i + 1) * n]);
            buf.push(self.border[i]);
        }
        buf
    }

    fn diag(&self, i: usize) -> f64 {
        if i == self.base.n {
            self.corner
        } else {
            self.base.diag(i)
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    /// Gradient of the dual objective, `Qα − e`.
    pub grad: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

pub(crate) struct SolverParams {
    pub c: f64,
    pub eps: f64,
    pub max_iter: usize,
}

/// Runs SMO from `(alpha, grad)` until the maximal KKT violation drops below `eps`.
pub(crate) fn solve<G: Gram>(
    gram: &G,
    y: &[f64],
    params: &SolverParams,
    mut alpha: Vec<f64>,
    mut grad: Vec<f64>,
) -> Result<Solution> {
    let n = gram.len();
    debug_assert_eq!(y.len(), n);
    debug_assert_eq!(alpha.len(), n);
    debug_assert_eq!(grad.len(), n);
    let c = params.c;
    let mut buf_i = Vec::with_capacity(n);
    let mut buf_j = Vec::with_capacity(n);
    let mut iterations = 0;

    loop {
        // First index: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let q_i = gram.row(i, &mut buf_i);
        let kii = gram.diag(i);

        // Second index: best second-order gain in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let yg = y[t] * grad[t];
            if yg >= gmax2 {
                gmax2 = yg;
            }
            let diff = gmax + yg;
            if diff > 0.0 {
                let mut quad = kii + gram.diag(t) - 2.0 * q_i[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(diff * diff) / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < params.eps || j == usize::MAX {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NotConverged { iterations });
        }
        iterations += 1;

        let q_i = gram.row(i, &mut buf_i);
        let q_j = gram.row(j, &mut buf_j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = q_i[j];
        if y[i] != y[j] {
            let mut quad = kii + gram.diag(j) + 2.0 * (-kij);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + gram.diag(j) - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for t in 0..n {
            grad[t] += y[t] * (q_i[t] * di + q_j[t] * dj);
        }
    }

    let bias = bias_from_gradient(y, &alpha, &grad, c);
    Ok(Solution {
        alpha,
        grad,
        bias,
        iterations,
    })
}

/// Offset `b` of `f(x) = Σ αⱼyⱼK(xⱼ, x) + b`: the mean of `−yᵢGᵢ` over free
/// vectors, or the midpoint of the feasible interval when none are free.
fn bias_from_gradient(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut free_sum = 0.0;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    };
    -rho
}
