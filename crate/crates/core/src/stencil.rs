//! Per-point positive stencils: moment constraint assembly, minimal-weight
//! LP solve, and feasibility diagnostics (third moments, cone condition).

use crate::calibrate::{searching_delta, CalibrationTable};
use crate::domain::Domain;
use crate::geometry::{dist, dot, sub, GeometryError, Point, SearchEllipsoid, SymMat, VoxelGrid};
use crate::kernel::{rho_weight, KernelSpec};
use crate::simplex::{simplex_min_sum_tol, LpError, LpResult};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StencilError {
    #[error("point {0} has no neighbors inside its search region")]
    EmptyNeighborhood(u32),
    #[error("no positive stencil for point {id} at search radius {delta:.6e}")]
    Infeasible { id: u32, delta: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Multi-indices of total degree 1 then 2, each group lexicographic.
pub fn monomial_rows<const D: usize>() -> Vec<[usize; D]> {
    let mut rows = Vec::new();
    for i in 0..D {
        let mut a = [0usize; D];
        a[i] = 1;
        rows.push(a);
    }
    for i in 0..D {
        for j in i..D {
            let mut a = [0usize; D];
            a[i] += 1;
            a[j] += 1;
            rows.push(a);
        }
    }
    rows
}

fn monomial_eval<const D: usize>(y: &Point<D>, a: &[usize; D]) -> f64 {
    (0..D).map(|i| y[i].powi(a[i] as i32)).product()
}

/// Assembled moment constraints: minimize Σω subject to Cω = b, ω ≥ 0,
/// where column j carries neighbor j's projected displacement and kernel
/// weight, and the right-hand side encodes the moment identities (zero for
/// odd degree, 2A entries for degree two).
#[derive(Debug, Clone)]
pub struct StencilConstraints<const D: usize> {
    pub neighbor_ids: Vec<u32>,
    /// projected absolute positions x̄ⱼ
    pub projected: Vec<Point<D>>,
    pub uses_boundary: Vec<bool>,
    pub rho: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Builds the constraint system for one center. Exterior neighbors are
/// replaced by their anchored boundary projections; coincident projections
/// are merged keeping the nearest original neighbor.
pub fn build_constraints<const D: usize>(
    center_id: u32,
    center: &Point<D>,
    neighbors: &[(u32, Point<D>)],
    dom: &Domain<D>,
    e: &SearchEllipsoid<D>,
    k: &KernelSpec,
    a_i: &SymMat<D>,
) -> Result<StencilConstraints<D>, StencilError> {
    let mut ids: Vec<u32> = Vec::new();
    let mut projected: Vec<Point<D>> = Vec::new();
    let mut uses_boundary: Vec<bool> = Vec::new();
    let mut orig_dist: Vec<f64> = Vec::new();
    for &(id, pos) in neighbors {
        if id == center_id {
            continue;
        }
        let inside = dom.contains_closure(&pos);
        let p = if inside {
            pos
        } else {
            dom.project_to_boundary(center, &pos)
        };
        let d_orig = dist(center, &pos);
        // coincident projected positions collapse into one column
        if let Some(slot) = projected.iter().position(|q| dist(q, &p) < 1e-12) {
            if d_orig < orig_dist[slot] {
                ids[slot] = id;
                orig_dist[slot] = d_orig;
            }
            uses_boundary[slot] = uses_boundary[slot] || !inside;
            continue;
        }
        ids.push(id);
        projected.push(p);
        uses_boundary.push(!inside);
        orig_dist.push(d_orig);
    }
    if ids.is_empty() {
        return Err(StencilError::EmptyNeighborhood(center_id));
    }

    let rows = monomial_rows::<D>();
    let rho: Vec<f64> = projected
        .iter()
        .map(|p| rho_weight(e, &sub(p, center), k))
        .collect();
    let matrix: Vec<Vec<f64>> = rows
        .iter()
        .map(|a| {
            projected
                .iter()
                .zip(&rho)
                .map(|(p, r)| r * monomial_eval(&sub(p, center), a))
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = rows
        .iter()
        .map(|a| {
            let deg: usize = a.iter().sum();
            if deg == 1 {
                0.0
            } else {
                let mut pair = Vec::with_capacity(2);
                for (i, &ai) in a.iter().enumerate() {
                    for _ in 0..ai {
                        pair.push(i);
                    }
                }
                2.0 * a_i.entry(pair[0], pair[1])
            }
        })
        .collect();
    Ok(StencilConstraints {
        neighbor_ids: ids,
        projected,
        uses_boundary,
        rho,
        matrix,
        rhs,
    })
}

/// A solved positive stencil; only the active (ω > 0) columns are kept.
#[derive(Debug, Clone)]
pub struct Stencil<const D: usize> {
    pub center_id: u32,
    pub center: Point<D>,
    pub neighbor_ids: Vec<u32>,
    pub projected: Vec<Point<D>>,
    pub uses_boundary: Vec<bool>,
    /// LP weights ω ≥ 0
    pub weights: Vec<f64>,
    /// operator coefficients β = ρ_δ · ω
    pub coefficients: Vec<f64>,
    pub delta: f64,
    /// true when the reduced radius was infeasible and the full radius was used
    pub retried: bool,
}

impl<const D: usize> Stencil<D> {
    /// Applies the discrete second-order operator Σⱼ βⱼ (u(x̄ⱼ) − u(x_i)),
    /// an approximation of A(x_i) : D²u(x_i).
    pub fn apply(&self, u: impl Fn(&Point<D>) -> f64) -> f64 {
        let ui = u(&self.center);
        self.projected
            .iter()
            .zip(&self.coefficients)
            .map(|(p, b)| b * (u(p) - ui))
            .sum()
    }
}

/// Complete stencil construction for one interior point: search radius from
/// the calibration band, ellipsoid query, moment constraints, LP. When the
/// reduced radius turns out infeasible, one retry at the full radius is
/// attempted before failing.
#[allow(clippy::too_many_arguments)]
pub fn build_stencil<const D: usize>(
    center_id: u32,
    grid: &VoxelGrid<D>,
    dom: &Domain<D>,
    a_field: &dyn Fn(&Point<D>) -> SymMat<D>,
    k: &KernelSpec,
    h: f64,
    rho_band: f64,
    table: &CalibrationTable,
    reduced: bool,
) -> Result<Stencil<D>, StencilError> {
    build_stencil_tol(
        center_id,
        grid,
        dom,
        a_field,
        k,
        h,
        rho_band,
        table,
        reduced,
        crate::simplex::LP_TOL,
        crate::simplex::FEAS_TOL,
    )
}

/// Same as [`build_stencil`] with explicit LP tolerances.
#[allow(clippy::too_many_arguments)]
pub fn build_stencil_tol<const D: usize>(
    center_id: u32,
    grid: &VoxelGrid<D>,
    dom: &Domain<D>,
    a_field: &dyn Fn(&Point<D>) -> SymMat<D>,
    k: &KernelSpec,
    h: f64,
    rho_band: f64,
    table: &CalibrationTable,
    reduced: bool,
    lp_tol: f64,
    feas_tol: f64,
) -> Result<Stencil<D>, StencilError> {
    let center = *grid.point(center_id);
    let a_i = a_field(&center);
    let attempt = |use_reduced: bool| -> Result<(StencilConstraints<D>, LpResult, f64), StencilError> {
        let delta = searching_delta(h, rho_band, table, use_reduced);
        let e = SearchEllipsoid::from_matrix(center, &a_i, delta)?;
        let mut neighbors: Vec<(u32, Point<D>)> = grid
            .query_ellipsoid(&e)
            .into_iter()
            .map(|id| (id, *grid.point(id)))
            .collect();
        neighbors.retain(|(id, _)| *id != center_id);
        let cons = build_constraints(center_id, &center, &neighbors, dom, &e, k, &a_i)?;
        let sol = simplex_min_sum_tol(&cons.matrix, &cons.rhs, lp_tol, feas_tol)?;
        Ok((cons, sol, delta))
    };

    // a numerical breakdown at the reduced radius is treated like
    // infeasibility: the full radius brings in more candidate columns and
    // usually a better-conditioned basis
    let needs_full = match attempt(reduced) {
        Ok((c, LpResult::Optimal(w), d)) => {
            return finish_stencil(center_id, center, c, w, d, false);
        }
        Ok((_, LpResult::Infeasible, d_red)) => {
            if !reduced {
                return Err(StencilError::Infeasible {
                    id: center_id,
                    delta: d_red,
                });
            }
            true
        }
        Err(e) => {
            if reduced {
                true
            } else {
                return Err(e);
            }
        }
    };
    debug_assert!(needs_full);
    let (cons, sol, delta, retried) = match attempt(false)? {
        (c, LpResult::Optimal(w), d) => (c, w, d, true),
        (_, LpResult::Infeasible, d) => {
            return Err(StencilError::Infeasible {
                id: center_id,
                delta: d,
            })
        }
    };

    finish_stencil(center_id, center, cons, sol, delta, retried)
}

/// Packs the positive-weight columns of an LP solution into a stencil.
fn finish_stencil<const D: usize>(
    center_id: u32,
    center: Point<D>,
    cons: StencilConstraints<D>,
    sol: Vec<f64>,
    delta: f64,
    retried: bool,
) -> Result<Stencil<D>, StencilError> {
    let mut st = Stencil {
        center_id,
        center,
        neighbor_ids: Vec::new(),
        projected: Vec::new(),
        uses_boundary: Vec::new(),
        weights: Vec::new(),
        coefficients: Vec::new(),
        delta,
        retried,
    };
    for (j, &w) in sol.iter().enumerate() {
        if w > 0.0 {
            st.neighbor_ids.push(cons.neighbor_ids[j]);
            st.projected.push(cons.projected[j]);
            st.uses_boundary.push(cons.uses_boundary[j]);
            st.weights.push(w);
            st.coefficients.push(w * cons.rho[j]);
        }
    }
    Ok(st)
}

/// Multi-indices of total degree 3.
fn third_order_indices<const D: usize>() -> Vec<[usize; D]> {
    let mut out = Vec::new();
    let mut a = [0usize; D];
    fn rec<const D: usize>(a: &mut [usize; D], pos: usize, left: usize, out: &mut Vec<[usize; D]>) {
        if pos == D {
            if left == 0 {
                out.push(*a);
            }
            return;
        }
        for v in 0..=left {
            a[pos] = v;
            rec(a, pos + 1, left - v, out);
        }
        a[pos] = 0;
    }
    rec(&mut a, 0, 3, &mut out);
    out
}

/// Superconvergence diagnostic T₃ = max over |𝛂| = 3 of
/// |Σⱼ βⱼ (x̄ⱼ − x_i)^𝛂| (reported, never asserted).
pub fn third_moment_diag<const D: usize>(s: &Stencil<D>) -> f64 {
    third_order_indices::<D>()
        .iter()
        .map(|a| {
            s.projected
                .iter()
                .zip(&s.coefficients)
                .map(|(p, b)| b * monomial_eval(&sub(p, &s.center), a))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Cone-angle parameter σ_d: √2 − 1 in 2d, √((3 − √6)/6) in 3d.
pub fn cone_sigma(d: usize) -> f64 {
    match d {
        2 => 2.0f64.sqrt() - 1.0,
        3 => ((3.0 - 6.0f64.sqrt()) / 6.0).sqrt(),
        _ => unreachable!("only d = 2, 3 supported"),
    }
}

#[derive(Debug, Clone)]
pub struct ConeReport<const D: usize> {
    pub satisfied: bool,
    pub worst_direction: Point<D>,
}

/// Samples unit directions v and checks that each mapped cone around the
/// center contains a cloud point: with w̃ = M⁻¹(x − x_i), membership reads
/// w̃·v ≥ |w̃|²/(δ·√(1+σ_d)) together with |w̃| < δ.
pub fn cone_condition_check<const D: usize>(
    center_id: u32,
    grid: &VoxelGrid<D>,
    e: &SearchEllipsoid<D>,
    n_directions: usize,
) -> ConeReport<D> {
    let sigma = cone_sigma(D);
    let gauge = 1.0 / (e.radius * (1.0 + sigma).sqrt());
    let candidates: Vec<Point<D>> = grid
        .query_ellipsoid(e)
        .into_iter()
        .filter(|&id| id != center_id)
        .map(|id| e.inv_sqrt.matvec(&sub(grid.point(id), &e.center)))
        .collect();
    let mut worst: (f64, Point<D>) = (f64::INFINITY, [0.0; D]);
    for n in 0..n_directions {
        let v = unit_direction::<D>(n, n_directions);
        let margin = candidates
            .iter()
            .map(|w| dot(w, &v) - dot(w, w) * gauge)
            .fold(f64::NEG_INFINITY, f64::max);
        if margin < worst.0 {
            worst = (margin, v);
        }
    }
    ConeReport {
        satisfied: worst.0 >= 0.0,
        worst_direction: worst.1,
    }
}

/// Deterministic unit directions: uniform circle angles in 2d, a Fibonacci
/// sphere in 3d.
fn unit_direction<const D: usize>(n: usize, total: usize) -> Point<D> {
    let mut v = [0.0; D];
    match D {
        2 => {
            let t = std::f64::consts::TAU * n as f64 / total as f64;
            v[0] = t.cos();
            v[1] = t.sin();
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let z = 1.0 - 2.0 * (n as f64 + 0.5) / total as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * n as f64;
            v[0] = r * t.cos();
            v[1] = r * t.sin();
            v[2] = z;
        }
        _ => unreachable!(),
    }
    v
}
