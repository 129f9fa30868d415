//! Sparse system assembly from stencils, BiCGSTAB solution, and the
//! discrete maximum principle check.

use crate::geometry::Point;
use crate::stencil::Stencil;
use thiserror::Error;

pub const SOLVER_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no stencil supplied for interior point {0}")]
    MissingStencil(u32),
    #[error("BiCGSTAB breakdown: |rho| vanished twice consecutively")]
    Breakdown,
    #[error("dense elimination hit a zero pivot at row {0}")]
    SingularMatrix(usize),
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            out[i] = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[i][self.col_idx[k]] += self.vals[k];
            }
        }
        a
    }

    /// Maximum |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                b = b.max(self.col_idx[k].abs_diff(i));
            }
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    /// row r of the system corresponds to interior point permutation[r]
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// Lexicographic coordinate sort of the interior points (stable).
pub fn reindex<const D: usize>(points: &[Point<D>]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..points.len()).collect();
    perm.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap());
    perm
}

/// Assembles the N×N interior system. Row i (after permutation) reads
/// (Σⱼβⱼ)·uᵢ − Σ_{interior j} βⱼ·uⱼ = f(xᵢ) + Σ_{boundary j} βⱼ·g(x̄ⱼ).
pub fn assemble<const D: usize>(
    interior: &[Point<D>],
    stencils: &[Stencil<D>],
    f: &dyn Fn(&Point<D>) -> f64,
    g: &dyn Fn(&Point<D>) -> f64,
) -> Result<SparseSystem, SolverError> {
    let n = interior.len();
    let permutation = reindex(interior);
    let mut inv = vec![usize::MAX; n];
    for (r, &orig) in permutation.iter().enumerate() {
        inv[orig] = r;
    }
    let mut by_center: Vec<Option<&Stencil<D>>> = vec![None; n];
    for s in stencils {
        let c = s.center_id as usize;
        if c < n {
            by_center[c] = Some(s);
        }
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    for &orig in &permutation {
        let s = by_center[orig].ok_or(SolverError::MissingStencil(orig as u32))?;
        let mut diag = 0.0;
        let mut b = f(&interior[orig]);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(s.coefficients.len());
        for ((&id, &beta), (p, &on_bdry)) in s
            .neighbor_ids
            .iter()
            .zip(&s.coefficients)
            .zip(s.projected.iter().zip(&s.uses_boundary))
        {
            diag += beta;
            if !on_bdry && (id as usize) < n {
                entries.push((inv[id as usize], -beta));
            } else {
                b += beta * g(p);
            }
        }
        entries.push((inv[orig], diag));
        entries.sort_by_key(|&(c, _)| c);
        // merge duplicate columns (a neighbor can only appear once, but the
        // diagonal may coincide with nothing; keep it simple and safe)
        for (c, v) in entries {
            if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
            }
        }
        row_ptr.push(col_idx.len());
        rhs.push(b);
    }
    Ok(SparseSystem {
        matrix: Csr {
            n,
            row_ptr,
            col_idx,
            vals,
        },
        rhs,
        permutation,
    })
}

/// Plain BiCGSTAB with optional Jacobi preconditioning; zero breakdown
/// tolerated once (restart), twice consecutively is an error.
pub fn bicgstab(
    a: &Csr,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    jacobi: bool,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let n = a.n;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dotv = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let inv_diag: Vec<f64> = if jacobi {
        let mut d = vec![1.0; n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.col_idx[k] == i && a.vals[k].abs() > 1e-300 {
                    d[i] = 1.0 / a.vals[k];
                }
            }
        }
        d
    } else {
        vec![1.0; n]
    };
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let b_norm = norm(b).max(1e-300);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut breakdowns = 0usize;
    let mut res = norm(&r) / b_norm;
    let mut iters = 0;
    while res > tol && iters < max_iter {
        iters += 1;
        let rho_new = dotv(&r0, &r);
        if rho_new.abs() < 1e-30 {
            breakdowns += 1;
            if breakdowns >= 2 {
                return Err(SolverError::Breakdown);
            }
            // restart with the current residual as the shadow vector
            r = {
                let mut t = vec![0.0; n];
                a.matvec(&x, &mut t);
                b.iter().zip(&t).map(|(bi, ti)| bi - ti).collect()
            };
            p = vec![0.0; n];
            v = vec![0.0; n];
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        breakdowns = 0;
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        a.matvec(&ph, &mut v);
        alpha = rho / dotv(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            break;
        }
        let sh = precond(&s);
        let mut t = vec![0.0; n];
        a.matvec(&sh, &mut t);
        let tt = dotv(&t, &t);
        omega = if tt > 1e-300 { dotv(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
        }
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        res = norm(&r) / b_norm;
        if omega.abs() < 1e-30 {
            breakdowns += 1;
            if breakdowns >= 2 {
                return Err(SolverError::Breakdown);
            }
        }
    }
    // report the true residual
    let mut t = vec![0.0; n];
    a.matvec(&x, &mut t);
    let true_res = norm(
        &b.iter()
            .zip(&t)
            .map(|(bi, ti)| bi - ti)
            .collect::<Vec<f64>>(),
    ) / b_norm;
    Ok((
        x,
        SolveStats {
            iterations: iters,
            final_residual: true_res,
            converged: true_res <= tol,
        },
    ))
}

/// Dense Gaussian elimination with partial pivoting; the oracle path for
/// small systems.
pub fn dense_solve(a_dense: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a_dense[i].clone();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| m[p][col].abs().partial_cmp(&m[q][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() < 1e-300 {
            return Err(SolverError::SingularMatrix(col));
        }
        m.swap(col, piv);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in (i + 1)..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct DmpReport {
    pub ok: bool,
    pub worst_violation: f64,
}

/// Discrete maximum principle: for a discretely subharmonic solve (f ≡ 0 or
/// f ≤ 0 in our sign convention), interior values may not exceed the
/// maximum of g over the used boundary points, up to `slack`.
pub fn dmp_check<const D: usize>(
    stencils: &[Stencil<D>],
    solution_by_interior_id: &[f64],
    g: &dyn Fn(&Point<D>) -> f64,
    slack: f64,
) -> DmpReport {
    let mut g_max = f64::NEG_INFINITY;
    for s in stencils {
        for (p, &on_bdry) in s.projected.iter().zip(&s.uses_boundary) {
            if on_bdry {
                g_max = g_max.max(g(p));
            }
        }
    }
    let u_max = solution_by_interior_id
        .iter()
        .fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let violation = u_max - g_max;
    DmpReport {
        ok: violation <= slack,
        worst_violation: violation,
    }
}

/// Maximum-norm error of the interior solution against an exact field.
pub fn max_norm_error<const D: usize>(
    solution_by_interior_id: &[f64],
    interior: &[Point<D>],
    exact: &dyn Fn(&Point<D>) -> f64,
) -> f64 {
    solution_by_interior_id
        .iter()
        .zip(interior)
        .map(|(&u, p)| (u - exact(p)).abs())
        .fold(0.0, f64::max)
}

/// Scatters a solved row vector back to interior-id order.
pub fn unpermute(sol_rows: &[f64], permutation: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; sol_rows.len()];
    for (r, &orig) in permutation.iter().enumerate() {
        out[orig] = sol_rows[r];
    }
    out
}
