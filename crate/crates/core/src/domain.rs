//! Computational domains: inside tests, exact boundary distances, ray
//! casting, and the anchored projection of exterior points onto the boundary.

use crate::geometry::{add, dist, norm, normalize, scale, sub, HyperRect, Point};

/// An axis-aligned boundary facet: coordinate `axis` is fixed to `coord`,
/// the remaining coordinates range over [lo, hi].
#[derive(Debug, Clone)]
struct Face<const D: usize> {
    axis: usize,
    coord: f64,
    lo: Point<D>,
    hi: Point<D>,
}

impl<const D: usize> Face<D> {
    fn new(axis: usize, coord: f64, lo: Point<D>, hi: Point<D>) -> Self {
        let mut lo = lo;
        let mut hi = hi;
        lo[axis] = coord;
        hi[axis] = coord;
        Self { axis, coord, lo, hi }
    }

    fn closest_point(&self, x: &Point<D>) -> Point<D> {
        std::array::from_fn(|i| x[i].clamp(self.lo[i], self.hi[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Ball,
    Box,
    LShape,
}

/// Open bounded domain with piecewise-smooth boundary. The unit ball is
/// handled analytically; boxes and L-shapes carry an explicit facet list so
/// that distances and ray hits are exact.
#[derive(Debug, Clone)]
pub struct Domain<const D: usize> {
    kind: Kind,
    outer: HyperRect<D>,
    faces: Vec<Face<D>>,
}

const SLACK: f64 = 1e-13;

impl<const D: usize> Domain<D> {
    /// Unit ball {|x| < 1}.
    pub fn unit_ball() -> Self {
        Self {
            kind: Kind::Ball,
            outer: HyperRect::new([-1.0; D], [1.0; D]),
            faces: Vec::new(),
        }
    }

    /// Open axis-aligned box (lo, hi).
    pub fn rect(r: HyperRect<D>) -> Self {
        let mut faces = Vec::new();
        for axis in 0..D {
            faces.push(Face::new(axis, r.lo[axis], r.lo, r.hi));
            faces.push(Face::new(axis, r.hi[axis], r.lo, r.hi));
        }
        Self {
            kind: Kind::Box,
            outer: r,
            faces,
        }
    }

    pub fn center(&self) -> Point<D> {
        self.outer.center()
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        match self.kind {
            Kind::Ball => norm(x) < 1.0,
            Kind::Box => self.outer.contains_open(x),
            Kind::LShape => {
                self.outer.contains_open(x) && !Self::in_removed_closed(x)
            }
        }
    }

    /// The removed box is [0,1]² in 2d and [0,1]×[−1,1]×[0,1] in 3d; within
    /// the outer cube that reduces to two sign conditions.
    fn in_removed_closed(x: &Point<D>) -> bool {
        match D {
            2 => x[0] >= 0.0 && x[1] >= 0.0,
            3 => x[0] >= 0.0 && x[2] >= 0.0,
            _ => unreachable!(),
        }
    }

    /// Euclidean distance from x (anywhere) to ∂Ω.
    pub fn dist_boundary(&self, x: &Point<D>) -> f64 {
        match self.kind {
            Kind::Ball => (1.0 - norm(x)).abs(),
            _ => self
                .faces
                .iter()
                .map(|f| dist(x, &f.closest_point(x)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Closest point of ∂Ω to x. For the ball centered at an interior x = 0
    /// the first coordinate axis breaks the tie.
    pub fn closest_boundary_point(&self, x: &Point<D>) -> Point<D> {
        match self.kind {
            Kind::Ball => {
                let n = norm(x);
                if n < 1e-300 {
                    let mut p = [0.0; D];
                    p[0] = 1.0;
                    p
                } else {
                    scale(x, 1.0 / n)
                }
            }
            _ => {
                let mut best = self.faces[0].closest_point(x);
                let mut best_d = dist(x, &best);
                for f in &self.faces[1..] {
                    let p = f.closest_point(x);
                    let d = dist(x, &p);
                    if d < best_d {
                        best_d = d;
                        best = p;
                    }
                }
                best
            }
        }
    }

    pub fn contains_closure(&self, x: &Point<D>) -> bool {
        self.contains(x) || self.dist_boundary(x) <= SLACK
    }

    /// Membership in Ω_δ = Ω ∪ {x ∉ Ω : dist(x, ∂Ω) < δ}.
    pub fn in_collar(&self, x: &Point<D>, delta: f64) -> bool {
        self.contains(x) || self.dist_boundary(x) < delta
    }

    /// Axis-aligned box containing Ω_δ₀.
    pub fn bounding_box(&self, delta0: f64) -> HyperRect<D> {
        self.outer.inflate(delta0)
    }

    /// First boundary crossing along origin + t·direction, t > 0. The origin
    /// must lie in Ω and the direction must be a unit vector.
    pub fn ray_first_hit(&self, origin: &Point<D>, direction: &Point<D>) -> Point<D> {
        debug_assert!(self.contains(origin), "ray origin must be interior");
        debug_assert!((norm(direction) - 1.0).abs() < 1e-12);
        match self.kind {
            Kind::Ball => {
                let od = crate::geometry::dot(origin, direction);
                let t = -od + (od * od + 1.0 - crate::geometry::dot(origin, origin)).sqrt();
                let hit = add(origin, &scale(direction, t));
                // renormalize so the boundary equation holds to round-off
                scale(&hit, 1.0 / norm(&hit))
            }
            _ => {
                let mut best_t = f64::INFINITY;
                let mut best: Option<Point<D>> = None;
                for f in &self.faces {
                    if direction[f.axis].abs() < 1e-300 {
                        continue;
                    }
                    let t = (f.coord - origin[f.axis]) / direction[f.axis];
                    if t <= SLACK || t >= best_t {
                        continue;
                    }
                    let mut hit = add(origin, &scale(direction, t));
                    hit[f.axis] = f.coord;
                    let inside = (0..D).all(|i| {
                        hit[i] >= f.lo[i] - SLACK && hit[i] <= f.hi[i] + SLACK
                    });
                    if inside {
                        // snap extents so corner grazes land on the corner
                        for i in 0..D {
                            hit[i] = hit[i].clamp(f.lo[i], f.hi[i]);
                        }
                        best_t = t;
                        best = Some(hit);
                    }
                }
                best.expect("interior ray must hit the boundary")
            }
        }
    }

    /// x_j itself if it lies in the closure of Ω, otherwise the first
    /// boundary hit of the ray from the interior anchor x_i towards x_j.
    pub fn project_to_boundary(&self, x_i: &Point<D>, x_j: &Point<D>) -> Point<D> {
        if self.contains_closure(x_j) {
            return *x_j;
        }
        self.ray_first_hit(x_i, &normalize(&sub(x_j, x_i)))
    }
}

/// 2d L-shape (−1,1)² \ [0,1]².
pub fn lshape2() -> Domain<2> {
    let faces = vec![
        Face::new(1, -1.0, [-1.0, -1.0], [1.0, 1.0]),
        Face::new(0, -1.0, [-1.0, -1.0], [1.0, 1.0]),
        Face::new(1, 1.0, [-1.0, -1.0], [0.0, 1.0]),
        Face::new(0, 1.0, [-1.0, -1.0], [1.0, 0.0]),
        Face::new(0, 0.0, [0.0, 0.0], [0.0, 1.0]),
        Face::new(1, 0.0, [0.0, 0.0], [1.0, 0.0]),
    ];
    Domain {
        kind: Kind::LShape,
        outer: HyperRect::new([-1.0, -1.0], [1.0, 1.0]),
        faces,
    }
}

/// 3d L-shape (−1,1)³ \ ([0,1]×[−1,1]×[0,1]); the prism removed spans the
/// full y-extent, so the two y-faces are L-shaped and split into two
/// rectangles each.
pub fn lshape3() -> Domain<3> {
    let faces = vec![
        // outer faces, trimmed where the removed prism meets them
        Face::new(0, -1.0, [-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
        Face::new(0, 1.0, [-1.0, -1.0, -1.0], [1.0, 1.0, 0.0]),
        Face::new(2, -1.0, [-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
        Face::new(2, 1.0, [-1.0, -1.0, -1.0], [0.0, 1.0, 1.0]),
        // reentrant faces
        Face::new(0, 0.0, [0.0, -1.0, 0.0], [0.0, 1.0, 1.0]),
        Face::new(2, 0.0, [0.0, -1.0, 0.0], [1.0, 1.0, 0.0]),
        // L-shaped y-faces, two rectangles each
        Face::new(1, -1.0, [-1.0, -1.0, -1.0], [0.0, -1.0, 1.0]),
        Face::new(1, -1.0, [0.0, -1.0, -1.0], [1.0, -1.0, 0.0]),
        Face::new(1, 1.0, [-1.0, 1.0, -1.0], [0.0, 1.0, 1.0]),
        Face::new(1, 1.0, [0.0, 1.0, -1.0], [1.0, 1.0, 0.0]),
    ];
    Domain {
        kind: Kind::LShape,
        outer: HyperRect::new([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
        faces,
    }
}
