//! Spectral collocation substrate on a momentum interval.
//!
//! Chebyshev-Gauss-Lobatto nodes mapped to [tau_a, tau_b], the matching dense
//! differentiation matrix and Clenshaw-Curtis quadrature weights. Fields in
//! momentum coordinates are smooth up to the boundary while the operator
//! coefficients degenerate linearly there, so collocation keeps full accuracy
//! without one-sided stencils.

use crate::linalg::{self, LinalgError, Lu, Mat};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 16 nodes, got {0}")]
    TooCoarse(usize),
    #[error("invalid interval [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Collocation grid: nodes, first-derivative operator and quadrature weights.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    pub tau_a: f64,
    pub tau_b: f64,
    pub nodes: Vec<f64>,
    pub diff: Mat,
    pub weights: Vec<f64>,
    antideriv: Arc<Lu>,
}

/// Build the spectral grid on [tau_a, tau_b] with n nodes (endpoints included).
pub fn build_grid(tau_a: f64, tau_b: f64, n: usize) -> Result<MomentumGrid, GridError> {
    if n < 16 {
        return Err(GridError::TooCoarse(n));
    }
    if !(tau_a < tau_b) || !tau_a.is_finite() || !tau_b.is_finite() {
        return Err(GridError::BadInterval(tau_a, tau_b));
    }
    let m = n - 1;
    let half = 0.5 * (tau_b - tau_a);

    // Nodes ascending: tau_j = tau_a + half * (1 - cos(j pi / m)).
    let theta: Vec<f64> = (0..n).map(|j| j as f64 * PI / m as f64).collect();
    let nodes: Vec<f64> = theta.iter().map(|t| tau_a + half * (1.0 - t.cos())).collect();

    // Differentiation matrix for these nodes via barycentric form with the
    // negative-sum diagonal (annihilates constants to machine precision).
    let mut c = vec![1.0f64; n];
    c[0] = 2.0;
    c[m] = 2.0;
    // ascending nodes correspond to x = -cos(theta); sign pattern follows i+j
    let mut diff = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                diff.set(i, j, (c[i] / c[j]) * sign / (nodes[i] - nodes[j]));
            }
        }
    }
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += diff.get(i, j);
            }
        }
        diff.set(i, i, -s);
    }

    // Clenshaw-Curtis weights by integrating the Chebyshev interpolant:
    // f = sum_k a_k T_k with a = DCT-I of nodal values, int_{-1}^1 T_k = 2/(1-k^2)
    // for even k. Folding the transform into the nodes gives the weights.
    let mut weights = vec![0.0f64; n];
    for j in 0..n {
        let cj = if j == 0 || j == m { 2.0 } else { 1.0 };
        let mut s = 0.0;
        let mut k = 0usize;
        while k <= m {
            let ck = if k == 0 || k == m { 2.0 } else { 1.0 };
            let moment = 2.0 / (1.0 - (k * k) as f64);
            s += (2.0 / (m as f64 * ck)) * moment * (k as f64 * theta[j]).cos();
            k += 2;
        }
        // boundary cardinals carry half weight through 1/cj
        weights[j] = half * s / cj;
    }

    // Antiderivative solve: replace the first row of D with the evaluation at
    // tau_a to pin F(tau_a) = 0; reused for all cumulative integrals.
    let mut adm = diff.clone();
    for j in 0..n {
        adm.set(0, j, 0.0);
    }
    adm.set(0, 0, 1.0);
    let antideriv = Arc::new(Lu::factor(&adm)?);

    Ok(MomentumGrid { tau_a, tau_b, nodes, diff, weights, antideriv })
}

impl MomentumGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First derivative of a nodal field.
    pub fn deriv(&self, f: &[f64]) -> Vec<f64> {
        self.diff.matvec(f)
    }

    /// Quadrature of a nodal field over the interval.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Cumulative integral F(tau) = int_{tau_a}^{tau} f, F(tau_a) = 0.
    pub fn cumulative_integral(&self, f: &[f64]) -> Vec<f64> {
        let mut rhs = f.to_vec();
        rhs[0] = 0.0;
        self.antideriv.solve(&rhs)
    }

    /// Barycentric interpolation of a nodal field at an arbitrary point.
    pub fn interp(&self, f: &[f64], x: f64) -> f64 {
        let n = self.len();
        let m = n - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            let dx = x - self.nodes[j];
            if dx == 0.0 {
                return f[j];
            }
            let cj = if j == 0 || j == m { 0.5 } else { 1.0 };
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let w = cj * sign / dx;
            num += w * f[j];
            den += w;
        }
        num / den
    }

    /// Resample a nodal field onto another grid over the same interval.
    pub fn resample_to(&self, f: &[f64], fine: &MomentumGrid) -> Vec<f64> {
        fine.nodes.iter().map(|&x| self.interp(f, x)).collect()
    }

    /// Rectangular interpolation matrix onto the nodes of `fine`.
    pub fn interp_matrix_to(&self, fine: &MomentumGrid) -> Interp {
        let n = self.len();
        let m = n - 1;
        let rows = fine.len();
        let mut a = vec![0.0; rows * n];
        for (r, &x) in fine.nodes.iter().enumerate() {
            let mut hit = None;
            let mut den = 0.0;
            let mut ws = vec![0.0; n];
            for j in 0..n {
                let dx = x - self.nodes[j];
                if dx == 0.0 {
                    hit = Some(j);
                    break;
                }
                let cj = if j == 0 || j == m { 0.5 } else { 1.0 };
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let w = cj * sign / dx;
                ws[j] = w;
                den += w;
            }
            match hit {
                Some(j) => a[r * n + j] = 1.0,
                None => {
                    for j in 0..n {
                        a[r * n + j] = ws[j] / den;
                    }
                }
            }
        }
        Interp { rows, cols: n, a }
    }
}

/// Rectangular dense matrix for grid-to-grid interpolation.
#[derive(Debug, Clone)]
pub struct Interp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Interp {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.a[r * self.cols..(r + 1) * self.cols];
            let mut s = 0.0;
            for (c, x) in row.iter().zip(v) {
                s += c * x;
            }
            out[r] = s;
        }
        out
    }
}

/// Quadratic forms for the reduced vector-field eigenproblem, integrated
/// exactly on a refined auxiliary grid so the degenerate boundary weight
/// cannot produce spurious null modes: A(v) = int num (v')^2, B(v) = int den v^2,
/// with num, den given at the coarse nodes.
pub fn sl_forms(
    grid: &MomentumGrid,
    fine: &MomentumGrid,
    interp: &Interp,
    num: &[f64],
    den: &[f64],
) -> (Mat, Mat) {
    let n = grid.len();
    let nf = fine.len();
    // interpolation of a positive weight can undershoot near the degenerate
    // boundary; clamping keeps the forms semidefinite
    let num_f: Vec<f64> = grid.resample_to(num, fine).iter().map(|v| v.max(0.0)).collect();
    let den_f: Vec<f64> = grid.resample_to(den, fine).iter().map(|v| v.max(0.0)).collect();
    // ED: derivative on the coarse grid, interpolated to the fine nodes.
    let mut ed = vec![0.0; nf * n];
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| grid.diff.get(i, j)).collect();
        let colf = interp.apply(&col);
        for r in 0..nf {
            ed[r * n + j] = colf[r];
        }
    }
    let mut a = Mat::zeros(n);
    let mut b = Mat::zeros(n);
    for r in 0..nf {
        let qa = fine.weights[r] * num_f[r];
        let qb = fine.weights[r] * den_f[r];
        let erow = &interp.a[r * n..(r + 1) * n];
        let drow = &ed[r * n..(r + 1) * n];
        for i in 0..n {
            let dai = qa * drow[i];
            let dbi = qb * erow[i];
            if dai != 0.0 {
                for j in 0..n {
                    a.a[i * n + j] += dai * drow[j];
                }
            }
            if dbi != 0.0 {
                for j in 0..n {
                    b.a[i * n + j] += dbi * erow[j];
                }
            }
        }
    }
    (a, b)
}

/// Symmetric generalized eigenproblem A v = lambda B v on the complement of a
/// constraint subspace; thin wrapper shaping grid quadratic forms for the
/// dense solver. Eigenvector comes back B-normalized.
pub fn solve_sturm_liouville(
    a: &Mat,
    b: &Mat,
    constraints: &[Vec<f64>],
) -> Result<(f64, Vec<f64>), LinalgError> {
    linalg::constrained_smallest_eigenpair(a, b, constraints)
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mm = (n + 1) / 2;
    for i in 0..mm {
        // initial guess: Chebyshev approximation to the i-th Legendre root
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        let w = 1.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
