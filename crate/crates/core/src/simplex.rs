//! Dense two-phase simplex for the stencil weight problem:
//! minimize Σωⱼ subject to Cω = b, ω ≥ 0.

use thiserror::Error;

/// Relative tolerance on the final constraint residual.
pub const LP_TOL: f64 = 1e-10;
/// Phase-1 objective threshold deciding feasibility.
pub const FEAS_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-11;
const MAX_ITERS: usize = 20_000;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("simplex numerical breakdown: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal(Vec<f64>),
    Infeasible,
}

/// Minimizes Σωⱼ subject to Cω = b, ω ≥ 0, with Bland's anti-cycling rule.
/// Rows are scaled to unit ∞-norm internally (weights are unaffected).
/// Returns a basic optimal solution (at most m nonzero entries) whose
/// residual satisfies ‖Cω − b‖∞ ≤ LP_TOL·(1 + ‖b‖∞).
pub fn simplex_min_sum(c_mat: &[Vec<f64>], b: &[f64]) -> Result<LpResult, LpError> {
    simplex_min_sum_tol(c_mat, b, LP_TOL, FEAS_TOL)
}

/// Same as [`simplex_min_sum`] with explicit residual and feasibility
/// tolerances.
pub fn simplex_min_sum_tol(
    c_mat: &[Vec<f64>],
    b: &[f64],
    lp_tol: f64,
    feas_tol: f64,
) -> Result<LpResult, LpError> {
    let m = b.len();
    let n = if m == 0 { 0 } else { c_mat[0].len() };
    if m == 0 {
        return Ok(LpResult::Optimal(Vec::new()));
    }

    // row scaling and sign flip so that rhs >= 0
    let mut a = vec![vec![0.0; n + m + 1]; m];
    for i in 0..m {
        let mut s = b[i].abs();
        for j in 0..n {
            s = s.max(c_mat[i][j].abs());
        }
        if s < 1e-300 {
            s = 1.0;
        }
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            a[i][j] = flip * c_mat[i][j] / s;
        }
        a[i][n + i] = 1.0;
        a[i][n + m] = flip * b[i] / s;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase 1: minimize the sum of artificials. Reduced-cost row for the
    // artificial basis is the negated column sums of the constraint rows.
    let mut obj = vec![0.0; n + m + 1];
    for j in 0..n {
        obj[j] = -(0..m).map(|i| a[i][j]).sum::<f64>();
    }
    obj[n + m] = -(0..m).map(|i| a[i][n + m]).sum::<f64>();
    run_phase(&mut a, &mut obj, &mut basis, n + m)?;
    let phase1 = -obj[n + m];
    if phase1 > feas_tol {
        return Ok(LpResult::Infeasible);
    }

    // drive remaining artificials out of the basis (degenerate rows)
    for i in 0..m {
        if basis[i] >= n {
            let piv = (0..n).find(|&j| a[i][j].abs() > PIVOT_TOL);
            match piv {
                Some(j) => pivot(&mut a, &mut obj, &mut basis, i, j),
                None => {
                    // redundant row: zero it so it never pivots again
                    for v in a[i].iter_mut() {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    // phase 2: minimize Σω over the original columns only
    let mut obj2: Vec<f64> = vec![0.0; n + m + 1];
    for j in 0..n {
        obj2[j] = 1.0;
    }
    // canonicalize: subtract basic rows so basic reduced costs vanish
    for i in 0..m {
        if basis[i] < n && obj2[basis[i]].abs() > 0.0 {
            let f = obj2[basis[i]];
            for j in 0..=(n + m) {
                obj2[j] -= f * a[i][j];
            }
        }
    }
    // forbid artificials from re-entering
    for j in n..n + m {
        obj2[j] = f64::INFINITY;
    }
    run_phase(&mut a, &mut obj2, &mut basis, n)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = a[i][n + m].max(0.0);
        }
    }

    // The tableau values accumulate pivoting roundoff; recompute the basic
    // values from the original (unscaled) columns. The basis stays as the
    // simplex chose it — this only polishes the numbers. Keep whichever of
    // the two candidates leaves the smaller residual.
    let residual_inf = |x: &[f64]| -> f64 {
        (0..m)
            .map(|i| {
                ((0..n).map(|j| c_mat[i][j] * x[j]).sum::<f64>() - b[i]).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let mut basic_cols: Vec<usize> = basis.iter().copied().filter(|&j| j < n).collect();
    basic_cols.sort_unstable();
    if let Some(y) = solve_least_squares(c_mat, b, &basic_cols) {
        if y.iter().all(|&v| v >= -FEAS_TOL) {
            let mut polished = vec![0.0; n];
            for (&j, &v) in basic_cols.iter().zip(&y) {
                polished[j] = v.max(0.0);
            }
            if residual_inf(&polished) < residual_inf(&x) {
                x = polished;
            }
        }
    }

    // backward-error residual check against the original system: the
    // achievable accuracy scales with the magnitude of the summed terms,
    // not just with ‖b‖
    for i in 0..m {
        let r: f64 = (0..n).map(|j| c_mat[i][j] * x[j]).sum::<f64>() - b[i];
        let scale: f64 =
            (0..n).map(|j| (c_mat[i][j] * x[j]).abs()).sum::<f64>() + b[i].abs();
        if r.abs() > lp_tol * (1.0 + scale) {
            return Err(LpError::Numerical(format!(
                "residual {:.3e} exceeds tolerance in row {i}",
                r.abs()
            )));
        }
    }
    Ok(LpResult::Optimal(x))
}

/// Least-squares solve of the column submatrix `cols` of `c_mat` against
/// `b` by Householder QR; None when the submatrix is numerically
/// rank-deficient. For a consistent system the result is exact up to
/// roundoff, which is what the basic-solution polish needs.
fn solve_least_squares(c_mat: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let m = b.len();
    let k = cols.len();
    if k == 0 || k > m {
        return if k == 0 { Some(Vec::new()) } else { None };
    }
    let mut q = vec![vec![0.0; k]; m];
    for (i, row) in q.iter_mut().enumerate() {
        for (jj, &j) in cols.iter().enumerate() {
            row[jj] = c_mat[i][j];
        }
    }
    let mut rhs = b.to_vec();
    for p in 0..k {
        let norm_p: f64 = (p..m).map(|i| q[i][p] * q[i][p]).sum::<f64>().sqrt();
        if norm_p < 1e-300 {
            return None;
        }
        let sign = if q[p][p] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (p..m).map(|i| q[i][p]).collect();
        v[0] += sign * norm_p;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 < 1e-300 {
            return None;
        }
        for j in p..k {
            let dot: f64 = (p..m).map(|i| v[i - p] * q[i][j]).sum();
            let f = 2.0 * dot / vn2;
            for i in p..m {
                q[i][j] -= f * v[i - p];
            }
        }
        let dot: f64 = (p..m).map(|i| v[i - p] * rhs[i]).sum();
        let f = 2.0 * dot / vn2;
        for i in p..m {
            rhs[i] -= f * v[i - p];
        }
    }
    // back substitution on the upper-triangular factor
    let mut y = vec![0.0; k];
    for p in (0..k).rev() {
        let mut s = rhs[p];
        for j in p + 1..k {
            s -= q[p][j] * y[j];
        }
        if q[p][p].abs() < 1e-250 {
            return None;
        }
        y[p] = s / q[p][p];
    }
    Some(y)
}

/// Runs Bland-rule pivoting until no reduced cost among the first
/// `n_enter` columns is negative.
fn run_phase(
    a: &mut [Vec<f64>],
    obj: &mut [f64],
    basis: &mut [usize],
    n_enter: usize,
) -> Result<(), LpError> {
    let m = a.len();
    let rhs = a[0].len() - 1;
    for _ in 0..MAX_ITERS {
        // Bland: smallest-index column with negative reduced cost
        let Some(enter) = (0..n_enter).find(|&j| obj[j] < -PIVOT_TOL) else {
            return Ok(());
        };
        // ratio test, ties by smallest basis index (Bland)
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if a[i][enter] > PIVOT_TOL {
                let ratio = a[i][rhs] / a[i][enter];
                if ratio < best - 1e-15
                    || ((ratio - best).abs() <= 1e-15
                        && leave.map_or(true, |l| basis[i] < basis[l]))
                {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(LpError::Numerical(
                "unbounded pivot column in a bounded problem".into(),
            ));
        };
        pivot_full(a, obj, basis, leave, enter);
    }
    Err(LpError::Numerical("iteration limit reached".into()))
}

fn pivot(a: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], row: usize, col: usize) {
    pivot_full(a, obj, basis, row, col);
}

fn pivot_full(
    a: &mut [Vec<f64>],
    obj: &mut [f64],
    basis: &mut [usize],
    row: usize,
    col: usize,
) {
    let m = a.len();
    let w = a[0].len();
    let p = a[row][col];
    for j in 0..w {
        a[row][j] /= p;
    }
    a[row][col] = 1.0;
    for i in 0..m {
        if i != row && a[i][col].abs() > 0.0 {
            let f = a[i][col];
            for j in 0..w {
                a[i][j] -= f * a[row][j];
            }
            a[i][col] = 0.0;
        }
    }
    if obj[col].is_finite() && obj[col].abs() > 0.0 {
        let f = obj[col];
        for j in 0..w {
            if obj[j].is_finite() {
                obj[j] -= f * a[row][j];
            }
        }
        obj[col] = 0.0;
    }
    basis[row] = col;
}
