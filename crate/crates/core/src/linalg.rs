//! Small sparse-matrix and Krylov utilities for the transport solver.

/// Compressed sparse rows with column indices sorted within each row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Row-wise triplet accumulator.
#[derive(Debug, Clone)]
pub struct CsrBuilder {
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        Self { rows: vec![Vec::with_capacity(12); n] }
    }

    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        self.rows[row].push((col, val));
    }

    /// Merges duplicates in a fixed order.
    pub fn build(self) -> Csr {
        let n = self.rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        crate::par::fill_chunks(y, 1024, |chunk, out| {
            let start = chunk * 1024;
            for (k, yk) in out.iter_mut().enumerate() {
                let row = start + k;
                let mut acc = 0.0;
                for p in self.row_ptr[row]..self.row_ptr[row + 1] {
                    acc += self.vals[p] * x[self.cols[p]];
                }
                *yk = acc;
            }
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|row| {
                (self.row_ptr[row]..self.row_ptr[row + 1])
                    .find(|&p| self.cols[p] == row)
                    .map_or(0.0, |p| self.vals[p])
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Restarted GMRES with right preconditioning: solves `A x = b` starting from
/// `x`, stopping when `|b - Ax| <= tol |b|`.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovReport {
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut total = 0;
    loop {
        apply(x, &mut work);
        for k in 0..n {
            r[k] = b[k] - work[k];
        }
        let beta = norm(&r);
        if beta <= tol * bnorm || total >= max_iter {
            return KrylovReport { iterations: total, relative_residual: beta / bnorm, converged: beta <= tol * bnorm };
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;
        for k in 0..restart {
            let mut zk = vec![0.0; n];
            precondition(&v[k], &mut zk);
            let mut w = vec![0.0; n];
            apply(&zk, &mut w);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let h = dot(&w, vi);
                hess[i][k] = h;
                for (wq, vq) in w.iter_mut().zip(vi) {
                    *wq -= h * vq;
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            used = k + 1;
            total += 1;
            if g[k + 1].abs() <= 0.1 * tol * bnorm || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= hess[i][k] * y[k];
            }
            y[i] = acc / hess[i][i];
        }
        for (yk, zk) in y.iter().zip(&z) {
            for (xq, zq) in x.iter_mut().zip(zk) {
                *xq += yk * zq;
            }
        }
    }
}

/// Solves a tridiagonal system with real coefficients and complex data.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas_complex(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [rustfft::num_complex::Complex64],
) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = rhs.to_vec();
    let mut m = diag[0];
    c[0] = upper[0] / m;
    d[0] /= m;
    for i in 1..n {
        m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (d[i] - d[i - 1] * lower[i]) / m;
    }
    rhs[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = d[i] - rhs[i + 1] * c[i];
    }
}

/// Solves the periodic tridiagonal system
/// `lower_i x_{i-1} + diag_i x_i + upper_i x_{i+1} = rhs_i` (indices mod n)
/// by the Sherman–Morrison correction of the open system.
pub fn cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3);
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let solve = |rhs: &[f64]| {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = upper[0] / b[0];
        d[0] = rhs[0] / b[0];
        for i in 1..n {
            let m = b[i] - lower[i] * c[i - 1];
            c[i] = upper[i] / m;
            d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };
    let x = solve(rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve(&u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}
