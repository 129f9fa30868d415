//! Searching-radius calibration: the constant c(ϱ) relating the stencil
//! search radius δ = c·h·ϱ^{−1/2} to the fill distance, computed from the
//! inscribed-circle radius of mapped cone sectors inside the anisotropy
//! ellipse, banded by the eigenvalue ratio ϱ.

use crate::geometry::{add, norm, scale, Point};

/// Half-opening angle of the direction cone: 45°/2 in 2d, 33.7°/2 in 3d.
pub fn cone_half_angle(d: usize) -> f64 {
    match d {
        2 => std::f64::consts::PI / 8.0,
        3 => (33.7f64 / 2.0).to_radians(),
        _ => unreachable!("only d = 2, 3 supported"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub dim: usize,
    pub bands: Vec<Band>,
    pub reduction: f64,
}

impl CalibrationTable {
    /// Precomputed band constants.
    pub fn defaults(d: usize) -> Self {
        let (cs, reduction) = match d {
            2 => ([2.836, 2.901, 3.614], 1.0 / 3.0f64.sqrt()),
            3 => ([3.623, 3.776, 4.450], 1.0 / 18.0f64.cbrt()),
            _ => unreachable!("only d = 2, 3 supported"),
        };
        let edges = [(0.0, 0.01), (0.01, 0.1), (0.1, 1.0)];
        CalibrationTable {
            dim: d,
            bands: edges
                .iter()
                .zip(cs)
                .map(|(&(lo, hi), c)| Band { lo, hi, c })
                .collect(),
            reduction,
        }
    }

    /// Band constant for eigenvalue ratio ϱ ∈ (0, 1].
    pub fn constant(&self, rho: f64) -> f64 {
        for b in &self.bands {
            if rho > b.lo && rho <= b.hi {
                return b.c;
            }
        }
        self.bands.last().expect("table has bands").c
    }
}

/// Search radius δ = c(ϱ)·h·ϱ^{−1/2}, optionally shrunk by the table's
/// reduction factor.
pub fn searching_delta(h: f64, rho: f64, table: &CalibrationTable, reduced: bool) -> f64 {
    let mut c = table.constant(rho);
    if reduced {
        c *= table.reduction;
    }
    c * h / rho.sqrt()
}

/// Squared distance from `c` to the ellipse point at parameter s and its
/// first two derivatives in s, for the ellipse (√ϱ cos s, sin s).
fn ellipse_objective(rho_sqrt: f64, c: &Point<2>, s: f64) -> (f64, f64, f64) {
    let (sin, cos) = s.sin_cos();
    let px = rho_sqrt * cos;
    let py = sin;
    let dx = px - c[0];
    let dy = py - c[1];
    let f = dx * dx + dy * dy;
    let pxp = -rho_sqrt * sin;
    let pyp = cos;
    let fp = 2.0 * (dx * pxp + dy * pyp);
    let pxpp = -rho_sqrt * cos;
    let pypp = -sin;
    let fpp = 2.0 * (pxp * pxp + dx * pxpp + pyp * pyp + dy * pypp);
    (f, fp, fpp)
}

/// Distance from an interior point to the ellipse x²/ϱ + y² = 1: Newton on
/// the stationarity equation from the angular initial guess, golden-section
/// on a coarse bracket if Newton stalls.
fn dist_to_ellipse(rho: f64, c: &Point<2>) -> f64 {
    let rs = rho.sqrt();
    let mut s = (c[1]).atan2(c[0] / rs);
    let mut converged = false;
    for _ in 0..100 {
        let (_, fp, fpp) = ellipse_objective(rs, c, s);
        if fpp.abs() < 1e-300 {
            break;
        }
        let step = fp / fpp;
        s -= step;
        if step.abs() < 1e-14 {
            converged = true;
            break;
        }
    }
    if converged {
        let (f, _, fpp) = ellipse_objective(rs, c, s);
        if fpp > 0.0 {
            return f.sqrt();
        }
    }
    // fallback: coarse scan plus golden-section refinement
    let n = 720;
    let mut best_s = 0.0;
    let mut best_f = f64::INFINITY;
    for i in 0..n {
        let si = std::f64::consts::TAU * i as f64 / n as f64;
        let (f, _, _) = ellipse_objective(rs, c, si);
        if f < best_f {
            best_f = f;
            best_s = si;
        }
    }
    let w = std::f64::consts::TAU / n as f64;
    golden_min(|s| ellipse_objective(rs, c, s).0, best_s - w, best_s + w)
        .1
        .sqrt()
}

/// Golden-section minimization on [a, b] to 1e-10; returns (argmin, min).
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}

/// Inscribed-circle radius of the mapped cone sector pointing along θ:
/// corners p± = (√ϱ cos(θ±φ), sin(θ±φ)); the center moves along
/// t·(|p₂|p₁ + |p₁|p₂), where the distance to both cone edges is
/// t·|p₁×p₂|, and t is fixed by bisection so the circle touches the
/// ellipse from inside.
fn sector_radius(rho: f64, phi: f64, theta: f64) -> f64 {
    let rs = rho.sqrt();
    let p1: Point<2> = [rs * (theta - phi).cos(), (theta - phi).sin()];
    let p2: Point<2> = [rs * (theta + phi).cos(), (theta + phi).sin()];
    let cross = (p1[0] * p2[1] - p1[1] * p2[0]).abs();
    let dir = add(&scale(&p1, norm(&p2)), &scale(&p2, norm(&p1)));
    let gap = |t: f64| dist_to_ellipse(rho, &scale(&dir, t)) - t * cross;
    // the center moves from the origin (gap > 0) to the ellipse boundary
    // at t_b (gap = −r < 0); bisect between them
    let t_b = 1.0 / (dir[0] * dir[0] / rho + dir[1] * dir[1]).sqrt();
    let mut hi = t_b;
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) * cross
}

/// r(ϱ): worst-case (minimal) inscribed radius over cone directions
/// θ ∈ [0, π/2], by uniform sampling plus golden-section refinement.
pub fn inscribed_radius(rho: f64, phi: f64) -> f64 {
    let n = 721;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
        let r = sector_radius(rho, phi, theta);
        if r < best {
            best = r;
            best_i = i;
        }
    }
    let w = std::f64::consts::FRAC_PI_2 / (n - 1) as f64;
    let theta0 = std::f64::consts::FRAC_PI_2 * best_i as f64 / (n - 1) as f64;
    let (a, b) = (
        (theta0 - w).max(0.0),
        (theta0 + w).min(std::f64::consts::FRAC_PI_2),
    );
    golden_min(|t| sector_radius(rho, phi, t), a, b).1
}

/// √ϱ/r(ϱ) for one eigenvalue ratio. In 2d, r is the worst-case inscribed
/// circle directly. In 3d, the inscribed ball of the mapped cone section is
/// estimated from the ellipsoid with eigenvalues (ϱ, (1+ϱ)/2, 1): each of
/// the three principal-plane ellipses is reduced to the 2d problem (the
/// off-plane semi-axis rescales the whole section), and the smallest of the
/// three inscribed radii is used.
fn band_curve(d: usize, rho: f64, phi: f64) -> f64 {
    let r = if d == 2 {
        inscribed_radius(rho, phi)
    } else {
        let m = 0.5 * (1.0 + rho);
        inscribed_radius(rho, phi)
            .min(m.sqrt() * inscribed_radius(rho / m, phi))
            .min(inscribed_radius(m, phi))
    };
    rho.sqrt() / r
}

/// Computes band constants c = max over a logarithmic ϱ grid of √ϱ/r(ϱ).
/// A zero lower band edge is replaced by hi/100 for the grid.
pub fn calibrate_c(d: usize, edges: &[(f64, f64)], grid_nodes: usize) -> CalibrationTable {
    let phi = cone_half_angle(d);
    let defaults = CalibrationTable::defaults(d);
    let bands = edges
        .iter()
        .map(|&(lo, hi)| {
            let lo_eff = if lo > 0.0 { lo } else { hi / 100.0 };
            let mut c = 0.0f64;
            for k in 0..grid_nodes {
                let t = k as f64 / (grid_nodes - 1) as f64;
                let rho = lo_eff * (hi / lo_eff).powf(t);
                c = c.max(band_curve(d, rho, phi));
            }
            Band { lo, hi, c }
        })
        .collect();
    CalibrationTable {
        dim: d,
        bands,
        reduction: defaults.reduction,
    }
}
