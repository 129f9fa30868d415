//! Truncated fractional kernel γ(r) = C_α r^{−α} on r < 1, normalized so
//! its second moment over the unit ball equals 2d, and the anisotropic
//! density ρ_δ it induces.

use crate::geometry::{norm, sub, Point, SearchEllipsoid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel exponent {alpha} outside (2, {max}) for dimension {d}")]
    InvalidKernel { alpha: f64, d: usize, max: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    pub alpha: f64,
    pub dim: usize,
    pub norm_const: f64,
}

/// Surface measure of the unit sphere S^{d−1} for d = 2, 3.
fn sphere_surface(d: usize) -> f64 {
    match d {
        2 => std::f64::consts::TAU,
        3 => 2.0 * std::f64::consts::TAU,
        _ => unreachable!("only d = 2, 3 supported"),
    }
}

/// Normalization so that ∫_{B₁} |y|² γ(|y|) dy = 2d:
/// C_α = 2d(d + 2 − α) / |S^{d−1}|.
pub fn kernel_normalize(alpha: f64, d: usize) -> Result<KernelSpec, KernelError> {
    let max = d as f64 + 2.0;
    if !(alpha > 2.0 && alpha < max) {
        return Err(KernelError::InvalidKernel { alpha, d, max });
    }
    let norm_const = 2.0 * d as f64 * (max - alpha) / sphere_surface(d);
    Ok(KernelSpec {
        alpha,
        dim: d,
        norm_const,
    })
}

impl KernelSpec {
    /// γ(r) for r ∈ (0, 1); zero outside.
    pub fn gamma(&self, r: f64) -> f64 {
        if r > 0.0 && r < 1.0 {
            self.norm_const * r.powf(-self.alpha)
        } else {
            0.0
        }
    }
}

/// ρ_δ(x, y) = δ^{−(d+2)} γ(|M⁻¹y|/δ) det(M)⁻¹ for a displacement y
/// strictly inside the search ellipsoid. The center itself (y = 0) is
/// rejected: the kernel is singular there and centers never weight
/// themselves.
pub fn rho_weight<const D: usize>(
    e: &SearchEllipsoid<D>,
    y: &Point<D>,
    k: &KernelSpec,
) -> f64 {
    let r = norm(&e.inv_sqrt.matvec(y)) / e.radius;
    assert!(r > 0.0 && r < 1.0, "displacement must lie strictly inside");
    let det_m = e.sqrt_shape.det();
    e.radius.powi(-(D as i32 + 2)) * k.gamma(r) / det_m
}

/// ρ_δ evaluated for a neighbor position (displacement taken internally).
pub fn rho_weight_at<const D: usize>(
    e: &SearchEllipsoid<D>,
    pos: &Point<D>,
    k: &KernelSpec,
) -> f64 {
    rho_weight(e, &sub(pos, &e.center), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SymMat;

    #[test]
    fn normalization_closed_forms() {
        let k2 = kernel_normalize(3.0, 2).unwrap();
        assert!((k2.norm_const - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        let k3 = kernel_normalize(3.0, 3).unwrap();
        assert!((k3.norm_const - 3.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!(kernel_normalize(2.0, 2).is_err());
        assert!(kernel_normalize(4.5, 2).is_err());
    }

    /// Second moment by quadrature. With the substitution r = s^k,
    /// k = 2/(d+2−α), the radial integrand becomes exactly linear in s, so
    /// Simpson's rule is exact up to round-off.
    fn second_moment_numeric(k: &KernelSpec) -> f64 {
        let d = k.dim as f64;
        let p = 2.0 / (d + 2.0 - k.alpha);
        let n = 200_000usize;
        let f = |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            let r = s.powf(p);
            let dr = p * s.powf(p - 1.0);
            sphere_surface(k.dim) * k.norm_const * r.powf(d + 1.0 - k.alpha) * dr
        };
        let hstep = 1.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * hstep;
            acc += hstep / 6.0 * (f(a) + 4.0 * f(a + 0.5 * hstep) + f(a + hstep));
        }
        acc
    }

    #[test]
    fn second_moment_equals_2d() {
        for (alpha, d) in [(3.0, 2), (2.5, 2), (3.5, 2), (3.0, 3), (2.2, 3), (4.5, 3)] {
            let k = kernel_normalize(alpha, d).unwrap();
            let m = second_moment_numeric(&k);
            assert!(
                (m - 2.0 * d as f64).abs() < 1e-10,
                "α={alpha} d={d}: moment {m}"
            );
        }
    }

    #[test]
    fn rho_plugin_value() {
        // A = I, δ = 1, |y| = 1/2, d = 2, α = 3 → (2/π)·2³ = 16/π
        let k = kernel_normalize(3.0, 2).unwrap();
        let e = SearchEllipsoid::new([0.0, 0.0], SymMat::identity(), 1.0);
        let v = rho_weight(&e, &[0.5, 0.0], &k);
        assert!((v - 16.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rho_scaling_in_delta() {
        let k = kernel_normalize(3.0, 2).unwrap();
        // with A = I, ρ_δ(y) = δ^{−4}γ(|y|/δ): same |y|/δ ratio differs by δ^{−4}
        let e1 = SearchEllipsoid::new([0.0, 0.0], SymMat::identity(), 1.0);
        let e2 = SearchEllipsoid::new([0.0, 0.0], SymMat::identity(), 0.25);
        let v1 = rho_weight(&e1, &[0.5, 0.0], &k);
        let v2 = rho_weight(&e2, &[0.125, 0.0], &k);
        assert!((v2 / v1 - 0.25f64.powi(-4)).abs() < 1e-9 * v2 / v1);
    }

    #[test]
    fn rho_anisotropic_determinant_factor() {
        let k = kernel_normalize(3.0, 2).unwrap();
        let rho = 0.25;
        let a = SymMat::from_diag([rho, 1.0]);
        let e = SearchEllipsoid::from_matrix([0.0, 0.0], &a, 1.0).unwrap();
        // along the second axis M⁻¹ acts as identity; the value is the
        // isotropic one scaled by det(M)⁻¹ = ϱ^{−1/2}
        let v = rho_weight(&e, &[0.0, 0.5], &k);
        let iso = 16.0 / std::f64::consts::PI;
        assert!((v - iso / rho.sqrt()).abs() < 1e-12 * v);
    }

    #[test]
    fn rho_positive_inside() {
        let k = kernel_normalize(3.0, 2).unwrap();
        let e = SearchEllipsoid::new([0.0, 0.0], SymMat::identity(), 0.3);
        for t in 1..10 {
            let y = [0.03 * t as f64 * 0.99, 0.0];
            assert!(rho_weight(&e, &y, &k) > 0.0);
        }
    }
}
