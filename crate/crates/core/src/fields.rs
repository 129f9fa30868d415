//! Built-in coefficient matrix families (continuous, block-random, and
//! split discontinuous) and manufactured solutions with analytic Hessians.

use crate::geometry::{Point, SymMat};
use crate::mt19937::Mt19937;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("unknown coefficient matrix id {0}")]
    UnknownMatrix(usize),
    #[error("unknown manufactured solution {0} for dimension {1}")]
    UnknownSolution(String, usize),
}

/// A coefficient matrix family x ↦ A(x) with its nominal eigenvalue ratio.
pub struct CoefficientField<const D: usize> {
    pub id: usize,
    pub nominal_rho: f64,
    eval: Box<dyn Fn(&Point<D>) -> SymMat<D> + Send + Sync>,
}

impl<const D: usize> CoefficientField<D> {
    pub fn eval(&self, x: &Point<D>) -> SymMat<D> {
        (self.eval)(x)
    }
}

/// Block-random coefficient matrix A_ψ(x, n) = (B + Bᵀ + 4I)/den with
/// den = 8 (2d) / 10 (3d). B is d×d of MT19937 variates seeded by
/// ψ = Σᵢ round(xᵢ·n)·pᵢ mod 2³² with primes (2, 3, 5) and ties rounded
/// away from zero.
pub fn mt19937_block_matrix<const D: usize>(x: &Point<D>, n: f64) -> SymMat<D> {
    const PRIMES: [i64; 3] = [2, 3, 5];
    let mut psi: i64 = 0;
    for i in 0..D {
        psi = psi.wrapping_add((x[i] * n).round() as i64 * PRIMES[i]);
    }
    let seed = psi.rem_euclid(1i64 << 32) as u32;
    let mut mt = Mt19937::new(seed);
    let mut b = [[0.0f64; D]; D];
    for row in b.iter_mut() {
        for v in row.iter_mut() {
            *v = mt.next_f64();
        }
    }
    let den = match D {
        2 => 8.0,
        3 => 10.0,
        _ => unreachable!(),
    };
    let mut a = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            a[i][j] = (b[i][j] + b[j][i] + if i == j { 4.0 } else { 0.0 }) / den;
        }
    }
    SymMat::new(a).expect("symmetric by construction")
}

const BLOCK_N: [f64; 3] = [1e10, 1e4, 1.0];

/// 2d coefficient families 0–9.
pub fn builtin_matrix2(id: usize) -> Result<CoefficientField<2>, FieldError> {
    let diag = |a: f64, b: f64| SymMat::from_diag([a, b]);
    let f: Box<dyn Fn(&Point<2>) -> SymMat<2> + Send + Sync> = match id {
        0 => Box::new(|_| SymMat::identity()),
        1 => Box::new(move |x| diag(1.0 - 0.5 * x[0].abs(), 0.25 + 0.25 * x[1].abs())),
        2 => Box::new(|x| {
            let s = 1.0 / 2.21;
            SymMat::new([
                [s * (2.0 - x[0].abs()), s * 0.5],
                [s * 0.5, s * (0.5 + 0.5 * x[1].abs())],
            ])
            .unwrap()
        }),
        3 => Box::new(move |x| diag(1.0 - 0.5 * x[0].abs(), 0.025 + 0.025 * x[1].abs())),
        4 => Box::new(move |x| diag(1.0 - 0.5 * x[0].abs(), 0.0025 + 0.0025 * x[1].abs())),
        5 => Box::new(|x| {
            let s = 1.0 / 2.001;
            SymMat::new([
                [s * (2.0 - (x[0] * (0.5 - x[1])).abs()), s * 0.025],
                [s * 0.025, s * (0.01 + 0.0025 * x[0] * x[1].exp())],
            ])
            .unwrap()
        }),
        6 | 7 | 8 => {
            let n = BLOCK_N[id - 6];
            Box::new(move |x| mt19937_block_matrix(x, n))
        }
        9 => {
            let a2 = builtin_matrix2(2)?;
            let a3 = builtin_matrix2(3)?;
            Box::new(move |x| {
                if x[0] < 0.0 {
                    a2.eval(x)
                } else {
                    a3.eval(x)
                }
            })
        }
        _ => return Err(FieldError::UnknownMatrix(id)),
    };
    let rho = [1.0, 0.25, 0.0864, 0.025, 0.0025, 0.0014, 0.25, 0.25, 0.25, 0.025][id];
    Ok(CoefficientField {
        id,
        nominal_rho: rho,
        eval: f,
    })
}

/// 3d coefficient families 0–9.
pub fn builtin_matrix3(id: usize) -> Result<CoefficientField<3>, FieldError> {
    let f: Box<dyn Fn(&Point<3>) -> SymMat<3> + Send + Sync> = match id {
        0 => Box::new(|_| SymMat::identity()),
        1 => Box::new(|x| {
            SymMat::from_diag([
                1.0 - 0.5 * x[0].abs(),
                0.5 - 0.25 * x[1].abs(),
                0.25 + 0.25 * x[2].abs(),
            ])
        }),
        2 => Box::new(|x| {
            let s = 1.0 / 2.21;
            SymMat::new([
                [s * (2.0 - x[0].abs()), 0.0, s * 0.5],
                [0.0, s * (0.5 + 0.5 * x[1].abs()), 0.0],
                [s * 0.5, 0.0, s * (1.0 - 0.5 * x[2].abs())],
            ])
            .unwrap()
        }),
        3 => Box::new(|x| {
            SymMat::from_diag([
                1.0 - 0.5 * x[0].abs(),
                0.05 - 0.025 * x[1].abs(),
                0.025 + 0.025 * x[2].abs(),
            ])
        }),
        4 => Box::new(|x| {
            SymMat::from_diag([
                1.0 - 0.5 * x[0].abs(),
                0.005 - 0.0025 * x[1].abs(),
                0.0025 + 0.0025 * x[2].abs(),
            ])
        }),
        5 => Box::new(|x| {
            let s = 1.0 / 2.001;
            SymMat::new([
                [
                    s * (2.0 - (x[0] * (0.5 - x[1])).abs()),
                    s * -0.02,
                    s * 0.005,
                ],
                [
                    s * -0.02,
                    s * (0.005 + 0.005 * (x[0] + x[2]).abs()),
                    s * -0.001,
                ],
                [
                    s * 0.005,
                    s * -0.001,
                    s * (0.01 + 0.0025 * x[1] * x[2].exp()),
                ],
            ])
            .unwrap()
        }),
        6 | 7 | 8 => {
            let n = BLOCK_N[id - 6];
            Box::new(move |x| mt19937_block_matrix(x, n))
        }
        9 => {
            let a2 = builtin_matrix3(2)?;
            let a3 = builtin_matrix3(3)?;
            Box::new(move |x| {
                if x[0] < 0.0 {
                    a2.eval(x)
                } else {
                    a3.eval(x)
                }
            })
        }
        _ => return Err(FieldError::UnknownMatrix(id)),
    };
    let rho = [
        1.0, 0.25, 0.0864, 0.025, 0.0025, 0.0014, 0.1847, 0.1847, 0.1847, 0.025,
    ][id];
    Ok(CoefficientField {
        id,
        nominal_rho: rho,
        eval: f,
    })
}

/// A manufactured exact solution with its analytic Hessian; the forcing
/// f = −A(x):D²u(x) is composed with the run's coefficient field and the
/// boundary data g is u itself.
pub struct ManufacturedCase<const D: usize> {
    pub name: &'static str,
    pub u: Box<dyn Fn(&Point<D>) -> f64 + Send + Sync>,
    pub hessian: Box<dyn Fn(&Point<D>) -> SymMat<D> + Send + Sync>,
}

impl<const D: usize> ManufacturedCase<D> {
    /// f(x) = −A(x):D²u(x) = −Σᵢⱼ aᵢⱼ(x)·∂ᵢⱼu(x).
    pub fn forcing(&self, a: &CoefficientField<D>, x: &Point<D>) -> f64 {
        let h = (self.hessian)(x);
        let m = a.eval(x);
        let mut acc = 0.0;
        for i in 0..D {
            for j in 0..D {
                acc += m.entry(i, j) * h.entry(i, j);
            }
        }
        -acc
    }
}

pub fn builtin_solution2(name: &str) -> Result<ManufacturedCase<2>, FieldError> {
    match name {
        "u1" => Ok(ManufacturedCase {
            name: "u1",
            u: Box::new(|x| x[0] * x[1] + x[0].cos() * x[1].exp()),
            hessian: Box::new(|x| {
                let e = x[1].exp();
                SymMat::new([
                    [-x[0].cos() * e, 1.0 - x[0].sin() * e],
                    [1.0 - x[0].sin() * e, x[0].cos() * e],
                ])
                .unwrap()
            }),
        }),
        "u2" => Ok(ManufacturedCase {
            name: "u2",
            u: Box::new(|x| {
                let s = x[0] + x[1];
                let w = x[0] * (x[0] + 2.0 * x[1]);
                s.powi(4) * w.cos()
            }),
            hessian: Box::new(|x| {
                let s = x[0] + x[1];
                let w = x[0] * (x[0] + 2.0 * x[1]);
                let (sw, cw) = w.sin_cos();
                let u11 = 12.0 * s.powi(2) * cw - 18.0 * s.powi(4) * sw - 4.0 * s.powi(6) * cw;
                let u12 = 12.0 * s.powi(2) * cw
                    - 10.0 * s.powi(4) * sw
                    - 8.0 * x[0] * s.powi(3) * sw
                    - 4.0 * x[0] * s.powi(5) * cw;
                let u22 = 12.0 * s.powi(2) * cw
                    - 16.0 * x[0] * s.powi(3) * sw
                    - 4.0 * x[0] * x[0] * s.powi(4) * cw;
                SymMat::new([[u11, u12], [u12, u22]]).unwrap()
            }),
        }),
        "u3" => Ok(ManufacturedCase {
            name: "u3",
            u: Box::new(|x| x[0] * x[0] + x[1].sin() * (x[1] * x[1] - 1.0).exp()),
            hessian: Box::new(|x| {
                let g = (x[1] * x[1] - 1.0).exp();
                let u22 =
                    g * (4.0 * x[1] * x[1].cos() + (4.0 * x[1] * x[1] + 1.0) * x[1].sin());
                SymMat::new([[2.0, 0.0], [0.0, u22]]).unwrap()
            }),
        }),
        other => Err(FieldError::UnknownSolution(other.to_string(), 2)),
    }
}

pub fn builtin_solution3(name: &str) -> Result<ManufacturedCase<3>, FieldError> {
    match name {
        "u1" => Ok(ManufacturedCase {
            name: "u1",
            u: Box::new(|x| {
                x[0] * x[1] + x[0] * x[2] + x[1] * x[2] + x[0].cos() * (x[1] + x[2]).exp()
            }),
            hessian: Box::new(|x| {
                let e = (x[1] + x[2]).exp();
                let (s1, c1) = x[0].sin_cos();
                let off = 1.0 - s1 * e;
                SymMat::new([
                    [-c1 * e, off, off],
                    [off, c1 * e, 1.0 + c1 * e],
                    [off, 1.0 + c1 * e, c1 * e],
                ])
                .unwrap()
            }),
        }),
        "u2" => Ok(ManufacturedCase {
            name: "u2",
            u: Box::new(|x| {
                let s = x[0] + x[1] + x[2];
                let w = x[0] * (x[0] + 2.0 * x[1] + 2.0 * x[2]);
                s.powi(4) * w.cos()
            }),
            hessian: Box::new(|x| {
                let s = x[0] + x[1] + x[2];
                let w = x[0] * (x[0] + 2.0 * x[1] + 2.0 * x[2]);
                let (sw, cw) = w.sin_cos();
                // same structure as in 2d: ∂w/∂x₁ = 2s, ∂w/∂xₖ = 2x₁ (k ≥ 2)
                let u11 = 12.0 * s.powi(2) * cw - 18.0 * s.powi(4) * sw - 4.0 * s.powi(6) * cw;
                let u1k = 12.0 * s.powi(2) * cw
                    - 10.0 * s.powi(4) * sw
                    - 8.0 * x[0] * s.powi(3) * sw
                    - 4.0 * x[0] * s.powi(5) * cw;
                let ukl = 12.0 * s.powi(2) * cw
                    - 16.0 * x[0] * s.powi(3) * sw
                    - 4.0 * x[0] * x[0] * s.powi(4) * cw;
                SymMat::new([[u11, u1k, u1k], [u1k, ukl, ukl], [u1k, ukl, ukl]]).unwrap()
            }),
        }),
        other => Err(FieldError::UnknownSolution(other.to_string(), 3)),
    }
}
