//! Dense linear algebra kernels: LU solves, symmetric eigenproblems via
//! Householder tridiagonalization + implicit QL, and bracketed root finding.
//!
//! Grids stay small (<= 1024 nodes) so O(N^3) dense routines are fine and we
//! avoid external solver dependencies.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("matrix is not positive definite (leading minor {col})")]
    NotPositiveDefinite { col: usize },
    #[error("QL iteration failed to converge for eigenvalue index {0}")]
    EigenNoConvergence(usize),
    #[error("no sign change on bracket [{a:.6e}, {b:.6e}]")]
    NoBracket { a: f64, b: f64 },
    #[error("root iteration exceeded {0} iterations")]
    MaxIterations(usize),
}

/// Dense row-major square matrix.
#[derive(Debug, Clone)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = self.row(i);
            let mut s = 0.0;
            for j in 0..n {
                s += row[j] * x[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut c = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    c.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        c
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut t = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.a[j * n + i] = self.a[i * n + j];
            }
        }
        t
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &Mat) -> Result<Lu, LinalgError> {
        let n = m.n;
        let mut lu = m.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(LinalgError::Singular { col: k, pivot: 0.0 });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = b[self.piv[i]];
        }
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Smallest diagonal magnitude of U, a cheap conditioning probe.
    pub fn min_pivot(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| self.lu[i * n + i].abs()).fold(f64::INFINITY, f64::min)
    }
}

pub fn solve(m: &Mat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Ok(Lu::factor(m)?.solve(b))
}

/// Cholesky factorization A = L L^T for symmetric positive definite A.
/// Returns L stored as lower-triangular dense matrix.
pub fn cholesky(m: &Mat) -> Result<Mat, LinalgError> {
    let n = m.n;
    let mut l = Mat::zeros(n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { col: j });
        }
        let dj = d.sqrt();
        l.set(j, j, dj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / dj);
        }
    }
    Ok(l)
}

/// Solve L y = b with L lower triangular.
pub fn forward_subst(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.n;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l.get(i, j) * y[j];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Solve L^T x = y with L lower triangular.
pub fn backward_subst_t(l: &Mat, y: &[f64]) -> Vec<f64> {
    let n = l.n;
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= l.get(j, i) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Symmetric eigendecomposition. Returns eigenvalues ascending and, when
/// `with_vectors` is set, the orthonormal eigenvectors as matrix columns.
///
/// Householder reduction to tridiagonal form followed by implicit-shift QL,
/// the classic EISPACK tred2/tql2 pair.
pub fn sym_eigen(m: &Mat, with_vectors: bool) -> Result<(Vec<f64>, Option<Mat>), LinalgError> {
    let n = m.n;
    if n == 0 {
        return Ok((Vec::new(), None));
    }
    let mut z = m.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // tred2: Householder tridiagonalization (accumulates transforms in z).
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += z.get(i, k).abs();
            }
            if scale == 0.0 {
                e[i] = z.get(i, l);
            } else {
                for k in 0..=l {
                    let v = z.get(i, k) / scale;
                    z.set(i, k, v);
                    h += v * v;
                }
                let mut f = z.get(i, l);
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z.set(i, l, f - g);
                f = 0.0;
                for j in 0..=l {
                    if with_vectors {
                        z.set(j, i, z.get(i, j) / h);
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z.get(j, k) * z.get(i, k);
                    }
                    for k in j + 1..=l {
                        g += z.get(k, j) * z.get(i, k);
                    }
                    e[j] = g / h;
                    f += e[j] * z.get(i, j);
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = z.get(i, j);
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = z.get(j, k) - (f * e[k] + g * z.get(i, k));
                        z.set(j, k, v);
                    }
                }
            }
        } else {
            e[i] = z.get(i, l);
        }
        d[i] = h;
    }
    if with_vectors {
        d[0] = 0.0;
    }
    e[0] = 0.0;
    for i in 0..n {
        if with_vectors {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += z.get(i, k) * z.get(k, j);
                    }
                    for k in 0..i {
                        let v = z.get(k, j) - g * z.get(k, i);
                        z.set(k, j, v);
                    }
                }
            }
            d[i] = z.get(i, i);
            z.set(i, i, 1.0);
            for j in 0..i {
                z.set(j, i, 0.0);
                z.set(i, j, 0.0);
            }
        } else {
            d[i] = z.get(i, i);
        }
    }

    // tql2: implicit-shift QL on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(LinalgError::EigenNoConvergence(l));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sgn = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[mm] - d[l] + e[l] / (g + sgn);
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if with_vectors {
                    for k in 0..n {
                        f = z.get(k, i + 1);
                        z.set(k, i + 1, s * z.get(k, i) + c * f);
                        z.set(k, i, c * z.get(k, i) - s * f);
                    }
                }
            }
            if r == 0.0 && mm > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    // Sort ascending, permuting vectors alongside.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let ds: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let vs = if with_vectors {
        let mut v = Mat::zeros(n);
        for (newcol, &oldcol) in idx.iter().enumerate() {
            for r in 0..n {
                v.set(r, newcol, z.get(r, oldcol));
            }
        }
        Some(v)
    } else {
        None
    };
    Ok((ds, vs))
}

/// Householder basis for the orthogonal complement of a single vector.
///
/// Returns an n x (n-1) column set Q (stored as Vec of columns) with
/// Q^T q = 0 and Q^T Q = I.
pub fn complement_basis(q: &[f64]) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 0.0, "complement basis of zero vector");
    // Reflector H mapping q to norm*sign*e0; columns 1..n of H span q-perp.
    let mut v: Vec<f64> = q.to_vec();
    let alpha = if q[0] >= 0.0 { -norm } else { norm };
    v[0] -= alpha;
    let vnorm2: f64 = v.iter().map(|x| x * x).sum();
    let mut cols = Vec::with_capacity(n - 1);
    for j in 1..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        if vnorm2 > 0.0 {
            let f = 2.0 * v[j] / vnorm2;
            for i in 0..n {
                col[i] -= f * v[i];
            }
        }
        cols.push(col);
    }
    cols
}

/// Smallest eigenpair of the generalized problem A v = lambda B v restricted
/// to the B-orthogonal complement of the given constraint vectors.
///
/// A must be symmetric positive semidefinite and B symmetric positive
/// definite on the constrained subspace. The returned eigenvector is
/// B-normalized.
pub fn constrained_smallest_eigenpair(
    a: &Mat,
    b: &Mat,
    constraints: &[Vec<f64>],
) -> Result<(f64, Vec<f64>), LinalgError> {
    let n = a.n;
    // Basis of the B-orthogonal complement: complement (euclidean) of B*q.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if constraints.is_empty() {
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            basis.push(e);
        }
    } else if constraints.len() == 1 {
        basis = complement_basis(&b.matvec(&constraints[0]));
    } else {
        // Gram-Schmidt the euclidean complement of all B*q_i.
        let bqs: Vec<Vec<f64>> = constraints.iter().map(|q| b.matvec(q)).collect();
        'outer: for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for bq in &bqs {
                let num: f64 = e.iter().zip(bq).map(|(x, y)| x * y).sum();
                let den: f64 = bq.iter().map(|x| x * x).sum();
                for i in 0..n {
                    e[i] -= num / den * bq[i];
                }
            }
            for prev in &basis {
                let num: f64 = e.iter().zip(prev.iter()).map(|(x, y)| x * y).sum();
                for i in 0..n {
                    e[i] -= num * prev[i];
                }
            }
            let nrm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm < 1e-10 {
                continue 'outer;
            }
            for x in e.iter_mut() {
                *x /= nrm;
            }
            basis.push(e);
            if basis.len() == n - constraints.len() {
                break;
            }
        }
    }
    let m = basis.len();

    // Project: At = P^T A P, Bt = P^T B P.
    let ap: Vec<Vec<f64>> = basis.iter().map(|col| a.matvec(col)).collect();
    let bp: Vec<Vec<f64>> = basis.iter().map(|col| b.matvec(col)).collect();
    let mut at = Mat::zeros(m);
    let mut bt = Mat::zeros(m);
    for i in 0..m {
        for j in 0..m {
            let av: f64 = basis[i].iter().zip(&ap[j]).map(|(x, y)| x * y).sum();
            let bv: f64 = basis[i].iter().zip(&bp[j]).map(|(x, y)| x * y).sum();
            at.set(i, j, av);
            bt.set(i, j, bv);
        }
    }
    // Symmetrize against roundoff.
    for i in 0..m {
        for j in 0..i {
            let s = 0.5 * (at.get(i, j) + at.get(j, i));
            at.set(i, j, s);
            at.set(j, i, s);
            let s = 0.5 * (bt.get(i, j) + bt.get(j, i));
            bt.set(i, j, s);
            bt.set(j, i, s);
        }
    }

    // B is only semidefinite when the weight degenerates at the boundary, so
    // reduce through A instead: A is positive definite on the constrained
    // subspace. Solve C y = mu y with C = L^{-1} Bt L^{-T}, At = L L^T; the
    // smallest pencil eigenvalue is 1/mu_max.
    let l = {
        let scale: f64 = (0..m).map(|i| at.get(i, i)).sum::<f64>() / m as f64;
        let mut result = cholesky(&at);
        // escalating ridge against roundoff-level indefiniteness; the shift
        // perturbs the eigenvalue at the same relative size
        let mut ridge = 1e-13;
        while result.is_err() && ridge < 1e-6 {
            let mut ar = at.clone();
            for i in 0..m {
                ar.set(i, i, ar.get(i, i) + ridge * scale);
            }
            result = cholesky(&ar);
            ridge *= 100.0;
        }
        result?
    };
    let mut c = Mat::zeros(m);
    // C = L^{-1} Bt L^{-T}, built column by column then row by row.
    for j in 0..m {
        let col: Vec<f64> = (0..m).map(|i| bt.get(i, j)).collect();
        let y = forward_subst(&l, &col);
        for i in 0..m {
            c.set(i, j, y[i]);
        }
    }
    let mut c2 = Mat::zeros(m);
    for i in 0..m {
        let row: Vec<f64> = (0..m).map(|j| c.get(i, j)).collect();
        let y = forward_subst(&l, &row);
        for j in 0..m {
            c2.set(i, j, y[j]);
        }
    }
    for i in 0..m {
        for j in 0..i {
            let s = 0.5 * (c2.get(i, j) + c2.get(j, i));
            c2.set(i, j, s);
            c2.set(j, i, s);
        }
    }

    let (vals, _) = sym_eigen(&c2, false)?;
    let mu = vals[m - 1];
    if !(mu > 0.0) {
        return Err(LinalgError::NotPositiveDefinite { col: 0 });
    }
    let lam = 1.0 / mu;

    // Eigenvector by inverse iteration on (C - mu I) with a small shift.
    let mut shifted = c2.clone();
    let shift = 1e-11 * (1.0 + mu.abs());
    for i in 0..m {
        shifted.set(i, i, shifted.get(i, i) - mu + shift);
    }
    let lu = Lu::factor(&shifted)?;
    let mut y = vec![1.0; m];
    for _ in 0..6 {
        let z = lu.solve(&y);
        let nrm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (yi, zi) in y.iter_mut().zip(&z) {
            *yi = zi / nrm;
        }
    }
    // Back-transform: w = L^{-T} y, v = P w, then B-normalize.
    let w = backward_subst_t(&l, &y);
    let mut v = vec![0.0; n];
    for (k, col) in basis.iter().enumerate() {
        for i in 0..n {
            v[i] += w[k] * col[i];
        }
    }
    let bv = b.matvec(&v);
    let nrm = v.iter().zip(&bv).map(|(x, y)| x * y).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= nrm;
    }
    Ok((lam, v))
}

/// Brent's method on a bracketing interval.
pub fn find_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, LinalgError> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(LinalgError::NoBracket { a, b });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm >= 0.0 { tol1 } else { -tol1 };
        }
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(LinalgError::MaxIterations(200))
}

/// Newton iteration with bisection fallback for monotone scalar equations.
pub fn newton_bisect<F, G>(mut f: F, mut df: G, a: f64, b: f64, x0: f64, tol: f64) -> Result<f64, LinalgError>
where
    F: FnMut(f64) -> f64,
    G: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (a, b);
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(LinalgError::NoBracket { a, b });
    }
    let increasing = fhi > 0.0;
    let mut x = x0.clamp(lo, hi);
    for _ in 0..100 {
        let fx = f(x);
        if fx.abs() == 0.0 || (hi - lo).abs() < tol {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = if d != 0.0 { x - fx / d } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < tol {
            return Ok(next);
        }
        x = next;
    }
    Err(LinalgError::MaxIterations(100))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_random_system() {
        let n = 12;
        let mut m = Mat::zeros(n);
        let mut seed = 88172645463325252u64;
        let mut rng = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed as f64 / u64::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng());
            }
            m.set(i, i, m.get(i, i) + 4.0);
        }
        let xtrue: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.matvec(&xtrue);
        let x = solve(&m, &b).unwrap();
        for (a, b) in x.iter().zip(&xtrue) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sym_eigen_diagonal_plus_rank_structure() {
        // classic second-difference matrix: eigenvalues 2 - 2 cos(k pi / (n+1))
        let n = 20;
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, 2.0);
            if i > 0 {
                m.set(i, i - 1, -1.0);
                m.set(i - 1, i, -1.0);
            }
        }
        let (vals, vecs) = sym_eigen(&m, true).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((v - exact).abs() < 1e-12, "eig {k}: {v} vs {exact}");
        }
        // residual check for the smallest pair
        let vecs = vecs.unwrap();
        let v0: Vec<f64> = (0..n).map(|i| vecs.get(i, 0)).collect();
        let mv = m.matvec(&v0);
        for i in 0..n {
            assert!((mv[i] - vals[0] * v0[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn constrained_eigen_identity_case() {
        // A = B = I, no constraints: smallest eigenvalue 1
        let n = 8;
        let a = Mat::identity(n);
        let b = Mat::identity(n);
        let (lam, _) = constrained_smallest_eigenpair(&a, &b, &[]).unwrap();
        assert!((lam - 1.0).abs() < 1e-12);
        // homogeneity: scaling A by 10 scales the eigenvalue by 10
        let mut a10 = Mat::identity(n);
        for i in 0..n {
            a10.set(i, i, 10.0);
        }
        let (lam10, _) = constrained_smallest_eigenpair(&a10, &b, &[]).unwrap();
        assert!((lam10 - 10.0 * lam).abs() < 1e-10);
    }

    #[test]
    fn brent_sqrt2() {
        let r = find_root(|x| x * x - 2.0, 1.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let r0 = find_root(|x| x, -1.0, 1.0, 1e-12).unwrap();
        assert!(r0.abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_no_sign_change() {
        assert!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn newton_bisect_matches_brent() {
        let f = |x: f64| x.exp() - 3.0;
        let df = |x: f64| x.exp();
        let r = newton_bisect(f, df, 0.0, 2.0, 1.0, 1e-14).unwrap();
        assert!((r - 3f64.ln()).abs() < 1e-12);
    }
}
