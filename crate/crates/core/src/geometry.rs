//! Low-dimensional (d = 2, 3) linear algebra, ellipsoid/rectangle predicates
//! and voxel-grid range queries.

use thiserror::Error;

/// A point or displacement in `D`-dimensional space.
pub type Point<const D: usize> = [f64; D];

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("coefficient matrix is not positive definite (eigenvalue {0:e})")]
    DegenerateCoefficient(f64),
    #[error("point {0:?} lies outside the voxel grid bounds")]
    OutOfBounds(Vec<f64>),
}

pub fn sub<const D: usize>(a: &Point<D>, b: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn add<const D: usize>(a: &Point<D>, b: &Point<D>) -> Point<D> {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn scale<const D: usize>(a: &Point<D>, s: f64) -> Point<D> {
    std::array::from_fn(|i| a[i] * s)
}

pub fn dot<const D: usize>(a: &Point<D>, b: &Point<D>) -> f64 {
    (0..D).map(|i| a[i] * b[i]).sum()
}

pub fn norm<const D: usize>(a: &Point<D>) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist<const D: usize>(a: &Point<D>, b: &Point<D>) -> f64 {
    norm(&sub(a, b))
}

pub fn normalize<const D: usize>(a: &Point<D>) -> Point<D> {
    let n = norm(a);
    scale(a, 1.0 / n)
}

/// Symmetric d×d matrix; symmetry is enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat<const D: usize> {
    m: [[f64; D]; D],
}

impl<const D: usize> SymMat<D> {
    /// Builds from full entries, rejecting matrices whose asymmetry exceeds
    /// 1e-14 relative to the largest entry. Entries are symmetrized.
    pub fn new(m: [[f64; D]; D]) -> Result<Self, GeometryError> {
        let scale = m
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            .max(1e-300);
        for i in 0..D {
            for j in (i + 1)..D {
                let asym = (m[i][j] - m[j][i]).abs() / scale;
                if asym > 1e-14 {
                    return Err(GeometryError::NotSymmetric(asym));
                }
            }
        }
        let mut s = m;
        for i in 0..D {
            for j in (i + 1)..D {
                let v = 0.5 * (m[i][j] + m[j][i]);
                s[i][j] = v;
                s[j][i] = v;
            }
        }
        Ok(Self { m: s })
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; D]; D];
        for i in 0..D {
            m[i][i] = 1.0;
        }
        Self { m }
    }

    pub fn from_diag(d: [f64; D]) -> Self {
        let mut m = [[0.0; D]; D];
        for i in 0..D {
            m[i][i] = d[i];
        }
        Self { m }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn matvec(&self, v: &Point<D>) -> Point<D> {
        std::array::from_fn(|i| dot(&self.m[i], v))
    }

    pub fn mul(&self, other: &Self) -> [[f64; D]; D] {
        let mut out = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                out[i][j] = (0..D).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match D {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!("only d <= 3 is supported"),
        }
    }

    /// Inverse via adjugate (d <= 3).
    pub fn inverse(&self) -> Self {
        let det = self.det();
        let m = &self.m;
        let inv = match D {
            1 => {
                let mut out = [[0.0; D]; D];
                out[0][0] = 1.0 / det;
                out
            }
            2 => {
                let mut out = [[0.0; D]; D];
                out[0][0] = m[1][1] / det;
                out[0][1] = -m[0][1] / det;
                out[1][0] = -m[1][0] / det;
                out[1][1] = m[0][0] / det;
                out
            }
            3 => {
                let mut out = [[0.0; D]; D];
                for i in 0..3 {
                    for j in 0..3 {
                        let r = [(i + 1) % 3, (i + 2) % 3];
                        let c = [(j + 1) % 3, (j + 2) % 3];
                        // cofactor transposed: adjugate entry (j, i)
                        out[j][i] = (m[r[0]][c[0]] * m[r[1]][c[1]]
                            - m[r[0]][c[1]] * m[r[1]][c[0]])
                            / det;
                    }
                }
                out
            }
            _ => unreachable!("only d <= 3 is supported"),
        };
        Self { m: inv }
    }

    /// Eigen-decomposition by cyclic Jacobi rotations. Returns eigenvalues in
    /// ascending order and the matching orthonormal eigenvector columns.
    pub fn eigen_sym(&self) -> ([f64; D], [[f64; D]; D]) {
        let mut a = self.m;
        let mut v = [[0.0; D]; D];
        for i in 0..D {
            v[i][i] = 1.0;
        }
        let norm_a = self.frobenius().max(1e-300);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..D {
                for q in (p + 1)..D {
                    off += 2.0 * a[p][q] * a[p][q];
                }
            }
            if off.sqrt() < 1e-14 * norm_a {
                break;
            }
            for p in 0..D {
                for q in (p + 1)..D {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..D {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..D {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..D {
                        let vkp = v[k][p];
                        let vkq = v[k][q];
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..D).collect();
        order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
        let vals = std::array::from_fn(|i| a[order[i]][order[i]]);
        let mut vecs = [[0.0; D]; D];
        for (col, &o) in order.iter().enumerate() {
            for k in 0..D {
                vecs[k][col] = v[k][o];
            }
        }
        (vals, vecs)
    }

    /// Symmetric positive definite square root.
    pub fn sqrt_spd(&self) -> Result<Self, GeometryError> {
        let (vals, vecs) = self.eigen_sym();
        for &l in &vals {
            if l <= 0.0 {
                return Err(GeometryError::DegenerateCoefficient(l));
            }
        }
        let mut m = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                m[i][j] = (0..D).map(|k| vecs[i][k] * vals[k].sqrt() * vecs[j][k]).sum();
            }
        }
        Ok(Self { m })
    }
}

/// Anisotropic search neighborhood: the image of the radius-δ ball under the
/// matrix `M = A^{1/2}`, centered at a point. Membership is |M⁻¹(y−c)| < δ.
#[derive(Debug, Clone)]
pub struct SearchEllipsoid<const D: usize> {
    pub center: Point<D>,
    pub sqrt_shape: SymMat<D>,
    pub inv_sqrt: SymMat<D>,
    pub radius: f64,
}

impl<const D: usize> SearchEllipsoid<D> {
    pub fn new(center: Point<D>, sqrt_shape: SymMat<D>, radius: f64) -> Self {
        let inv_sqrt = sqrt_shape.inverse();
        Self {
            center,
            sqrt_shape,
            inv_sqrt,
            radius,
        }
    }

    pub fn from_matrix(
        center: Point<D>,
        a: &SymMat<D>,
        radius: f64,
    ) -> Result<Self, GeometryError> {
        Ok(Self::new(center, a.sqrt_spd()?, radius))
    }

    fn mapped_norm(&self, y: &Point<D>) -> f64 {
        norm(&self.inv_sqrt.matvec(&sub(y, &self.center)))
    }

    /// Strict interior membership.
    pub fn contains(&self, y: &Point<D>) -> bool {
        self.mapped_norm(y) < self.radius
    }

    /// Closure membership with a 1e-14 relative slack.
    pub fn contains_closure(&self, y: &Point<D>) -> bool {
        self.mapped_norm(y) <= self.radius * (1.0 + 1e-14)
    }

    /// Axis-aligned bounding box: half-width along axis k is δ·sqrt(A_kk).
    pub fn aabb(&self) -> HyperRect<D> {
        let m = &self.sqrt_shape;
        let half: Point<D> = std::array::from_fn(|k| {
            self.radius * (0..D).map(|j| m.entry(k, j) * m.entry(k, j)).sum::<f64>().sqrt()
        });
        HyperRect {
            lo: sub(&self.center, &half),
            hi: add(&self.center, &half),
        }
    }

    /// Quadratic form Q = M⁻ᵀM⁻¹ so that membership reads (y−c)ᵀQ(y−c) < δ².
    fn shape_quadratic(&self) -> [[f64; D]; D] {
        self.inv_sqrt.mul(&self.inv_sqrt)
    }
}

/// Axis-aligned box given by its lower and upper corners.
#[derive(Debug, Clone, Copy)]
pub struct HyperRect<const D: usize> {
    pub lo: Point<D>,
    pub hi: Point<D>,
}

impl<const D: usize> HyperRect<D> {
    pub fn new(lo: Point<D>, hi: Point<D>) -> Self {
        debug_assert!((0..D).all(|i| lo[i] < hi[i]));
        Self { lo, hi }
    }

    pub fn center(&self) -> Point<D> {
        std::array::from_fn(|i| 0.5 * (self.lo[i] + self.hi[i]))
    }

    pub fn vertex(&self, code: usize) -> Point<D> {
        std::array::from_fn(|i| {
            if code >> i & 1 == 1 {
                self.hi[i]
            } else {
                self.lo[i]
            }
        })
    }

    pub fn contains_open(&self, p: &Point<D>) -> bool {
        (0..D).all(|i| self.lo[i] < p[i] && p[i] < self.hi[i])
    }

    pub fn contains_closed(&self, p: &Point<D>) -> bool {
        (0..D).all(|i| self.lo[i] <= p[i] && p[i] <= self.hi[i])
    }

    pub fn inflate(&self, pad: f64) -> Self {
        Self {
            lo: std::array::from_fn(|i| self.lo[i] - pad),
            hi: std::array::from_fn(|i| self.hi[i] + pad),
        }
    }

    pub fn extent(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Disjoint,
    Contained,
    Partial,
}

/// Minimum of the quadratic x -> xᵀQx + bᵀx + s over a closed box, by
/// recursive face reduction: if the unconstrained stationary point falls
/// outside the box, the minimum lies on one of the 2n faces, each of which
/// fixes a coordinate and leaves a lower-dimensional quadratic.
fn min_quadratic_over_box(q: &[Vec<f64>], b: &[f64], s: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    if n == 0 {
        return s;
    }
    if n == 1 {
        let eval = |x: f64| q[0][0] * x * x + b[0] * x + s;
        let mut best = eval(lo[0]).min(eval(hi[0]));
        if q[0][0] > 0.0 {
            let xs = -b[0] / (2.0 * q[0][0]);
            if xs > lo[0] && xs < hi[0] {
                best = best.min(eval(xs));
            }
        }
        return best;
    }
    // Stationary point: solve 2Q x = -b by Gaussian elimination (n <= 3).
    if let Some(x) = solve_small(q, &b.iter().map(|v| -0.5 * v).collect::<Vec<_>>()) {
        if (0..n).all(|i| x[i] >= lo[i] && x[i] <= hi[i]) {
            let mut val = s;
            for i in 0..n {
                val += b[i] * x[i];
                for j in 0..n {
                    val += q[i][j] * x[i] * x[j];
                }
            }
            return val;
        }
    }
    let mut best = f64::INFINITY;
    for k in 0..n {
        for &v in &[lo[k], hi[k]] {
            // substitute x_k = v
            let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
            let qr: Vec<Vec<f64>> = keep
                .iter()
                .map(|&i| keep.iter().map(|&j| q[i][j]).collect())
                .collect();
            let br: Vec<f64> = keep.iter().map(|&i| b[i] + 2.0 * q[i][k] * v).collect();
            let sr = s + q[k][k] * v * v + b[k] * v;
            let lor: Vec<f64> = keep.iter().map(|&i| lo[i]).collect();
            let hir: Vec<f64> = keep.iter().map(|&i| hi[i]).collect();
            best = best.min(min_quadratic_over_box(&qr, &br, sr, &lor, &hir));
        }
    }
    best
}

fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Classifies the relationship of an axis-aligned box with an ellipsoid:
/// center-of-box test with the all-vertices test, then center-of-ellipsoid
/// test, then face intersection tests via recursive dimension reduction.
pub fn rect_ellipsoid_classify<const D: usize>(
    h: &HyperRect<D>,
    e: &SearchEllipsoid<D>,
) -> Classification {
    if e.contains(&h.center()) {
        let all_in = (0..1usize << D).all(|code| e.contains_closure(&h.vertex(code)));
        if all_in {
            return Classification::Contained;
        }
        return Classification::Partial;
    }
    if h.contains_open(&e.center) {
        return Classification::Partial;
    }
    // cheap sufficient overlap tests before the exact face minimization:
    // any vertex inside, or the box point closest to the center inside
    if (0..1usize << D).any(|code| e.contains(&h.vertex(code))) {
        return Classification::Partial;
    }
    let clamped: Point<D> =
        std::array::from_fn(|i| e.center[i].clamp(h.lo[i], h.hi[i]));
    if e.contains(&clamped) {
        return Classification::Partial;
    }
    // cheap sufficient disjointness: |M⁻¹y| ≥ |y|/‖M‖₂ and for symmetric M
    // the ∞-norm bounds ‖M‖₂, so a box farther than δ·‖M‖∞ cannot touch
    let m_norm = (0..D)
        .map(|i| (0..D).map(|j| e.sqrt_shape.entry(i, j).abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if dist(&clamped, &e.center) > e.radius * m_norm {
        return Classification::Disjoint;
    }
    // Faces: fix coordinate k to lo[k] or hi[k]; the face meets the ellipsoid
    // iff the minimum of (y−c)ᵀQ(y−c) − δ² over the face is negative.
    let q_arr = e.shape_quadratic();
    let q: Vec<Vec<f64>> = (0..D).map(|i| q_arr[i].to_vec()).collect();
    let delta2 = e.radius * e.radius;
    for k in 0..D {
        for &v in &[h.lo[k], h.hi[k]] {
            let mut lo: Vec<f64> = h.lo.to_vec();
            let mut hi: Vec<f64> = h.hi.to_vec();
            lo[k] = v;
            hi[k] = v;
            // shift so the quadratic is in y − c
            let lo_s: Vec<f64> = (0..D).map(|i| lo[i] - e.center[i]).collect();
            let hi_s: Vec<f64> = (0..D).map(|i| hi[i] - e.center[i]).collect();
            let b = vec![0.0; D];
            let min = min_quadratic_over_box(&q, &b, -delta2, &lo_s, &hi_s);
            if min < 0.0 {
                return Classification::Partial;
            }
        }
    }
    Classification::Disjoint
}

/// Uniform axis-aligned spatial hash over a bounding box. Immutable after
/// build; all queries are read-only.
#[derive(Debug, Clone)]
pub struct VoxelGrid<const D: usize> {
    pub bounds: HyperRect<D>,
    pub cell_size: f64,
    dims: [usize; D],
    cells: Vec<Vec<u32>>,
    points: Vec<Point<D>>,
}

/// Per-sweep scratch for [`VoxelGrid::nearest_dist_cached`].
#[derive(Debug, Default)]
pub struct NeighborCache {
    flat: Option<usize>,
    ids: Vec<u32>,
}

impl<const D: usize> VoxelGrid<D> {
    pub fn build(
        points: &[Point<D>],
        bounds: HyperRect<D>,
        cell_size: f64,
    ) -> Result<Self, GeometryError> {
        assert!(cell_size > 0.0);
        let dims: [usize; D] =
            std::array::from_fn(|i| ((bounds.extent(i) / cell_size).ceil() as usize).max(1));
        let total: usize = dims.iter().product();
        let mut grid = Self {
            bounds,
            cell_size,
            dims,
            cells: vec![Vec::new(); total],
            points: points.to_vec(),
        };
        for (id, p) in points.iter().enumerate() {
            if !bounds.contains_closed(p) {
                return Err(GeometryError::OutOfBounds(p.to_vec()));
            }
            let flat = grid.flat_index(&grid.cell_of(p));
            grid.cells[flat].push(id as u32);
        }
        Ok(grid)
    }

    /// Half-open cells [lo, hi), top boundary clamped into the last cell.
    fn cell_of(&self, p: &Point<D>) -> [usize; D] {
        std::array::from_fn(|i| {
            let raw = ((p[i] - self.bounds.lo[i]) / self.cell_size).floor() as isize;
            raw.clamp(0, self.dims[i] as isize - 1) as usize
        })
    }

    fn flat_index(&self, c: &[usize; D]) -> usize {
        let mut idx = 0;
        for i in 0..D {
            idx = idx * self.dims[i] + c[i];
        }
        idx
    }

    fn cell_rect(&self, c: &[usize; D]) -> HyperRect<D> {
        HyperRect {
            lo: std::array::from_fn(|i| self.bounds.lo[i] + c[i] as f64 * self.cell_size),
            hi: std::array::from_fn(|i| self.bounds.lo[i] + (c[i] + 1) as f64 * self.cell_size),
        }
    }

    pub fn point(&self, id: u32) -> &Point<D> {
        &self.points[id as usize]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn cell_range(&self, rect: &HyperRect<D>) -> ([usize; D], [usize; D]) {
        let lo = self.cell_of(&std::array::from_fn(|i| rect.lo[i].max(self.bounds.lo[i])));
        let hi = self.cell_of(&std::array::from_fn(|i| rect.hi[i].min(self.bounds.hi[i])));
        (lo, hi)
    }

    fn for_each_cell_in(
        &self,
        lo: &[usize; D],
        hi: &[usize; D],
        f: &mut impl FnMut(&[usize; D]),
    ) {
        let mut c = *lo;
        loop {
            f(&c);
            let mut k = D;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if c[k] < hi[k] {
                    c[k] += 1;
                    break;
                }
                c[k] = lo[k];
            }
        }
    }

    /// Ids of stored points strictly inside the ellipsoid, in ascending order.
    /// Voxels fully contained in the ellipsoid are bulk-added, partially
    /// overlapping voxels are filtered pointwise, disjoint voxels skipped.
    pub fn query_ellipsoid(&self, e: &SearchEllipsoid<D>) -> Vec<u32> {
        let mut out = Vec::new();
        let aabb = e.aabb();
        if (0..D).any(|i| aabb.hi[i] < self.bounds.lo[i] || aabb.lo[i] > self.bounds.hi[i]) {
            return out;
        }
        let (lo, hi) = self.cell_range(&aabb);
        self.for_each_cell_in(&lo, &hi, &mut |c| {
            let rect = self.cell_rect(c);
            match rect_ellipsoid_classify(&rect, e) {
                Classification::Disjoint => {}
                Classification::Contained => {
                    out.extend_from_slice(&self.cells[self.flat_index(c)]);
                }
                Classification::Partial => {
                    for &id in &self.cells[self.flat_index(c)] {
                        if e.contains(&self.points[id as usize]) {
                            out.push(id);
                        }
                    }
                }
            }
        });
        out.sort_unstable();
        out
    }

    /// Ids strictly within Euclidean distance r of p, ascending. Direct
    /// cell-range scan; cheaper than the ellipsoid query for balls.
    pub fn query_ball(&self, p: &Point<D>, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        let aabb = HyperRect::<D> {
            lo: std::array::from_fn(|i| p[i] - r),
            hi: std::array::from_fn(|i| p[i] + r),
        };
        if (0..D).any(|i| aabb.hi[i] < self.bounds.lo[i] || aabb.lo[i] > self.bounds.hi[i]) {
            return out;
        }
        let (lo, hi) = self.cell_range(&aabb);
        self.for_each_cell_in(&lo, &hi, &mut |c| {
            for &id in &self.cells[self.flat_index(c)] {
                if dist(p, &self.points[id as usize]) < r {
                    out.push(id);
                }
            }
        });
        out.sort_unstable();
        out
    }

    /// Exact distance from p to the nearest stored point. Fast path scans
    /// the 3^D cell neighborhood (candidates cached across calls sharing a
    /// home cell — lattice sweeps hit this constantly); any point outside
    /// that block is at least one cell size away, so a hit within
    /// `cell_size` is provably nearest, and anything else falls back to the
    /// ring search.
    pub fn nearest_dist_cached(&self, p: &Point<D>, cache: &mut NeighborCache) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let home = self.cell_of(p);
        let flat = self.flat_index(&home);
        if cache.flat != Some(flat) {
            cache.flat = Some(flat);
            cache.ids.clear();
            let lo: [usize; D] = std::array::from_fn(|i| home[i].saturating_sub(1));
            let hi: [usize; D] = std::array::from_fn(|i| (home[i] + 1).min(self.dims[i] - 1));
            self.for_each_cell_in(&lo, &hi, &mut |c| {
                cache.ids.extend_from_slice(&self.cells[self.flat_index(c)]);
            });
        }
        let mut best = f64::INFINITY;
        for &id in &cache.ids {
            best = best.min(dist(p, &self.points[id as usize]));
        }
        if best <= self.cell_size {
            Some(best)
        } else {
            self.nearest(p, None).map(|(_, d)| d)
        }
    }

    /// Nearest stored point to p (excluding ids in `skip`), by expanding
    /// shell search. Returns (id, distance).
    pub fn nearest(&self, p: &Point<D>, skip: Option<u32>) -> Option<(u32, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let home = self.cell_of(p);
        let max_ring: usize = (0..D).map(|i| self.dims[i]).max().unwrap_or(1);
        let mut best: Option<(u32, f64)> = None;
        for ring in 0..=max_ring {
            // once a candidate is found, one extra ring guarantees correctness
            if let Some((_, d)) = best {
                let safe = (ring as f64 - 1.0) * self.cell_size;
                if safe >= d {
                    break;
                }
            }
            let lo: [usize; D] =
                std::array::from_fn(|i| home[i].saturating_sub(ring));
            let hi: [usize; D] =
                std::array::from_fn(|i| (home[i] + ring).min(self.dims[i] - 1));
            self.for_each_cell_in(&lo, &hi, &mut |c| {
                let on_shell = (0..D).any(|i| {
                    c[i] == lo[i] && home[i] >= ring || c[i] == hi[i] && home[i] + ring <= hi[i]
                });
                // interior cells were visited in earlier rings
                let is_new = ring == 0
                    || (0..D).any(|i| {
                        (c[i] as isize - home[i] as isize).unsigned_abs() == ring
                    });
                let _ = on_shell;
                if !is_new {
                    return;
                }
                for &id in &self.cells[self.flat_index(c)] {
                    if Some(id) == skip {
                        continue;
                    }
                    let d = dist(p, &self.points[id as usize]);
                    if best.map_or(true, |(bi, bd)| d < bd || (d == bd && id < bi)) {
                        best = Some((id, d));
                    }
                }
            });
        }
        best
    }
}
