//! Proper point clouds: quasi-Monte Carlo initialization, fill distance /
//! separation / boundary distance estimation, and the add–map–merge
//! adjustment loop that enforces quasi-uniformity.

use crate::domain::Domain;
use crate::geometry::{add, dist, norm, scale, sub, HyperRect, Point, VoxelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PointCloudError {
    #[error("operation requires a non-empty point cloud")]
    EmptyCloud,
    #[error("operation requires at least two points")]
    TooFewPoints,
    #[error("adjustment loop exhausted {loops} iterations; unmet: {condition}")]
    AdjustmentFailed { loops: usize, condition: String },
}

/// Quasi-uniformity constants: fill distance bound c_h, separation ratio
/// c_ζ, boundary clearance ratio c_κ.
#[derive(Debug, Clone, Copy)]
pub struct ProperConstants {
    pub c_h: f64,
    pub c_zeta: f64,
    pub c_kappa: f64,
}

impl Default for ProperConstants {
    fn default() -> Self {
        Self {
            c_h: 1.0,
            c_zeta: 0.175,
            c_kappa: 0.25,
        }
    }
}

/// Scattered points over Ω_δ with interior points stored first.
#[derive(Debug, Clone)]
pub struct PointCloud<const D: usize> {
    pub points: Vec<Point<D>>,
    /// N: number of interior points; points[N..] lie in the collar.
    pub n_interior: usize,
    pub h: f64,
    pub zeta: f64,
    pub kappa: f64,
}

impl<const D: usize> PointCloud<D> {
    pub fn n_total(&self) -> usize {
        self.points.len()
    }
}

/// Van der Corput radical inverse of `index` (1-based) in `base`.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

const HALTON_BASES: [u64; 3] = [2, 3, 5];

/// First `count` Halton points after a burn-in of `skip`, mapped into `bx`.
pub fn halton_init<const D: usize>(count: usize, bx: &HyperRect<D>, skip: u64) -> Vec<Point<D>> {
    (0..count as u64)
        .map(|k| {
            std::array::from_fn(|i| {
                let u = radical_inverse(HALTON_BASES[i], skip + 1 + k);
                bx.lo[i] + u * (bx.hi[i] - bx.lo[i])
            })
        })
        .collect()
}

/// Monte-Carlo volume of Ω_δ with a fixed-seed generator (10⁶ samples).
pub fn collar_volume<const D: usize>(dom: &Domain<D>, delta: f64) -> f64 {
    let bx = dom.bounding_box(delta);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f6d6567);
    let n = 1_000_000;
    let mut hits = 0u64;
    for _ in 0..n {
        let p: Point<D> = std::array::from_fn(|i| rng.gen_range(bx.lo[i]..bx.hi[i]));
        if dom.in_collar(&p, delta) {
            hits += 1;
        }
    }
    let box_vol: f64 = (0..D).map(|i| bx.extent(i)).product();
    box_vol * hits as f64 / n as f64
}

fn grid_for<const D: usize>(
    points: &[Point<D>],
    bounds: HyperRect<D>,
    cell: f64,
) -> VoxelGrid<D> {
    VoxelGrid::build(points, bounds, cell).expect("points must lie in bounds")
}

/// Streams the probe lattice of spacing `s` over the bounding box of Ω_δ,
/// calling `f` for probes inside Ω_δ.
fn for_each_probe<const D: usize>(
    dom: &Domain<D>,
    delta: f64,
    s: f64,
    f: &mut impl FnMut(&Point<D>),
) {
    let bx = dom.bounding_box(delta);
    let counts: [usize; D] = std::array::from_fn(|i| (bx.extent(i) / s).ceil() as usize);
    let mut idx = [0usize; D];
    loop {
        let p: Point<D> = std::array::from_fn(|i| bx.lo[i] + (idx[i] as f64 + 0.5) * s);
        if dom.in_collar(&p, delta) {
            f(&p);
        }
        let mut k = D;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] + 1 < counts[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Fill distance of the cloud over Ω_δ, estimated on a probe lattice of
/// spacing `probe_spacing` (an under-estimate converging as spacing → 0).
pub fn estimate_fill_distance<const D: usize>(
    points: &[Point<D>],
    dom: &Domain<D>,
    delta: f64,
    probe_spacing: f64,
) -> Result<f64, PointCloudError> {
    sweep_fill_and_uncovered(points, dom, delta, probe_spacing, f64::INFINITY)
        .map(|(h, _)| h)
}

/// Single pass over the probe lattice: exact fill-distance estimate plus
/// the probes farther than `threshold` from every cloud point (probe order,
/// deterministic). Pass `threshold = ∞` to skip collection.
fn sweep_fill_and_uncovered<const D: usize>(
    points: &[Point<D>],
    dom: &Domain<D>,
    delta: f64,
    probe_spacing: f64,
    threshold: f64,
) -> Result<(f64, Vec<Point<D>>), PointCloudError> {
    if points.is_empty() {
        return Err(PointCloudError::EmptyCloud);
    }
    let bounds = dom.bounding_box(delta).inflate(probe_spacing);
    let grid = grid_for(points, bounds, (4.0 * probe_spacing).max(1e-9));
    let mut cache = crate::geometry::NeighborCache::default();
    let mut h = 0.0f64;
    let mut uncovered = Vec::new();
    for_each_probe(dom, delta, probe_spacing, &mut |p| {
        let d = grid.nearest_dist_cached(p, &mut cache).unwrap();
        h = h.max(d);
        if d > threshold {
            uncovered.push(*p);
        }
    });
    Ok((h, uncovered))
}

/// Greedy thinning of candidate insertions: keep a candidate only when it
/// is farther than `min_dist` from every kept one, in input order.
fn thin_candidates<const D: usize>(candidates: &[Point<D>], min_dist: f64) -> Vec<Point<D>> {
    use std::collections::HashMap;
    let cell = min_dist.max(1e-12);
    let key = |p: &Point<D>| -> [i64; D] {
        std::array::from_fn(|i| (p[i] / cell).floor() as i64)
    };
    let mut kept: Vec<Point<D>> = Vec::new();
    let mut buckets: HashMap<[i64; D], Vec<usize>> = HashMap::new();
    'cand: for p in candidates {
        let home = key(p);
        // scan the 3^D neighborhood of buckets
        let mut off = [-1i64; D];
        loop {
            let cellkey: [i64; D] = std::array::from_fn(|i| home[i] + off[i]);
            if let Some(ids) = buckets.get(&cellkey) {
                for &k in ids {
                    if dist(p, &kept[k]) <= min_dist {
                        continue 'cand;
                    }
                }
            }
            let mut ax = D;
            loop {
                if ax == 0 {
                    break;
                }
                ax -= 1;
                if off[ax] < 1 {
                    off[ax] += 1;
                    break;
                }
                off[ax] = -1;
            }
            if off == [-1i64; D] {
                break;
            }
        }
        buckets.entry(home).or_default().push(kept.len());
        kept.push(*p);
    }
    kept
}

/// Separation ζ = ½ min_{i<j} |x_i − x_j|, exact, voxel-accelerated.
pub fn compute_separation<const D: usize>(points: &[Point<D>]) -> Result<f64, PointCloudError> {
    if points.len() < 2 {
        return Err(PointCloudError::TooFewPoints);
    }
    let mut lo = [f64::INFINITY; D];
    let mut hi = [f64::NEG_INFINITY; D];
    for p in points {
        for i in 0..D {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let span = (0..D).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max).max(1e-9);
    let cell = (span / (points.len() as f64).powf(1.0 / D as f64)).max(1e-9);
    let bounds = HyperRect::new(
        std::array::from_fn(|i| lo[i] - 1e-9),
        std::array::from_fn(|i| hi[i] + 1e-9),
    );
    let grid = grid_for(points, bounds, cell);
    let mut min_d = f64::INFINITY;
    for (id, p) in points.iter().enumerate() {
        if let Some((_, d)) = grid.nearest(p, Some(id as u32)) {
            min_d = min_d.min(d);
        }
    }
    Ok(0.5 * min_d)
}

/// Minimum boundary distance over the interior points of the cloud.
pub fn compute_kappa<const D: usize>(points: &[Point<D>], dom: &Domain<D>) -> f64 {
    points
        .iter()
        .filter(|p| dom.contains(p))
        .map(|p| dom.dist_boundary(p))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct ProperReport {
    pub ok: bool,
    pub h: f64,
    pub zeta: f64,
    pub kappa: f64,
    pub violated: Vec<String>,
}

/// Checks the three quasi-uniformity conditions:
/// (i) h ≤ c_h (|Ω_δ|/M)^{1/d}, (ii) ζ ≥ c_ζ h, (iii) κ ≥ c_κ h.
pub fn validate_proper<const D: usize>(
    cloud: &PointCloud<D>,
    dom: &Domain<D>,
    delta: f64,
    consts: &ProperConstants,
) -> ProperReport {
    let vol = collar_volume(dom, delta);
    let m = cloud.n_total().max(1);
    let h_bound = consts.c_h * (vol / m as f64).powf(1.0 / D as f64);
    let mut violated = Vec::new();
    if cloud.h > h_bound {
        violated.push(format!(
            "fill distance {:.6e} exceeds bound {h_bound:.6e}",
            cloud.h
        ));
    }
    if cloud.zeta < consts.c_zeta * cloud.h {
        violated.push(format!(
            "separation {:.6e} below {:.6e}",
            cloud.zeta,
            consts.c_zeta * cloud.h
        ));
    }
    if cloud.kappa < consts.c_kappa * cloud.h {
        violated.push(format!(
            "boundary clearance {:.6e} below {:.6e}",
            cloud.kappa,
            consts.c_kappa * cloud.h
        ));
    }
    ProperReport {
        ok: violated.is_empty(),
        h: cloud.h,
        zeta: cloud.zeta,
        kappa: cloud.kappa,
        violated,
    }
}

/// Deterministically generates a proper point cloud for target fill
/// distance `h_target` over Ω_{δ₀}: Halton init cropped to the collar, then
/// loops of add (probe refills), inward mapping, and midpoint merges.
pub fn generate_cloud<const D: usize>(
    dom: &Domain<D>,
    h_target: f64,
    delta0: f64,
    consts: &ProperConstants,
    max_loops: usize,
) -> Result<PointCloud<D>, PointCloudError> {
    let bx = dom.bounding_box(delta0);
    let vol = collar_volume(dom, delta0);
    let m_target = ((vol / h_target.powi(D as i32)).ceil() as usize).max(2);
    let box_vol: f64 = (0..D).map(|i| bx.extent(i)).product();
    // oversample so that after cropping to Ω_δ roughly m_target survive
    let raw = ((m_target as f64 * box_vol / vol) * 1.05).ceil() as usize;
    let mut pts: Vec<Point<D>> = halton_init(raw, &bx, 20)
        .into_iter()
        .filter(|p| dom.in_collar(p, delta0))
        .collect();
    if pts.len() < 2 {
        return Err(PointCloudError::TooFewPoints);
    }

    let spacing = h_target / 4.0;
    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    let mut condition = String::new();
    let mut done = false;
    for _loop in 0..max_loops {
        // measure, then adjust: the loop exits only from a measurement that
        // found every condition satisfied, so the returned cloud is proper
        let m = pts.len();
        let h_bound = consts.c_h * (vol / m as f64).powf(1.0 / D as f64);
        let (h, uncovered) = sweep_fill_and_uncovered(&pts, dom, delta0, spacing, h_bound)?;
        let zeta = compute_separation(&pts)?;
        let kappa = compute_kappa(&pts, dom);
        last = (h, zeta, kappa);
        let mut bad = Vec::new();
        if h > h_bound {
            bad.push(format!("fill distance {h:.3e} > bound {h_bound:.3e}"));
        }
        if zeta < consts.c_zeta * h {
            bad.push(format!("separation {zeta:.3e} < {:.3e}", consts.c_zeta * h));
        }
        if kappa < consts.c_kappa * h {
            bad.push(format!(
                "boundary clearance {kappa:.3e} < {:.3e}",
                consts.c_kappa * h
            ));
        }
        if bad.is_empty() {
            done = true;
            break;
        }
        condition = bad.join("; ");

        // step 1: add points at probe locations left uncovered, thinned so
        // the insertions keep distance h_bound among themselves
        let added = !uncovered.is_empty();
        if added {
            pts.extend(thin_candidates(&uncovered, h_bound));
        }

        // after additions every probe is within h_bound of a point, so the
        // working fill distance for the clearance/merge radii is h_bound
        let h_work = if added { h_bound } else { h };

        // step 2: map interior points too close to the boundary inward;
        // the 10% margin keeps the clearance strict after later merges
        // perturb the fill distance
        let clearance = 1.1 * consts.c_kappa * h_work;
        for p in pts.iter_mut() {
            if dom.contains(p) && dom.dist_boundary(p) < clearance {
                let c = dom.closest_boundary_point(p);
                let dir = sub(p, &c);
                let n = norm(&dir);
                if n > 1e-300 {
                    let cand = add(&c, &scale(&dir, clearance / n));
                    if dom.contains(&cand) {
                        *p = cand;
                    }
                }
            }
        }

        // step 3: merge close pairs to their midpoint, closest pairs first,
        // each point participating at most once per loop
        let merge_r = 2.0 * consts.c_zeta * h_work;
        let mut lo2 = bx.inflate(spacing);
        lo2 = lo2.inflate(1e-9);
        let grid = grid_for(&pts, lo2, merge_r.max(1e-9));
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            for j in grid.query_ball(p, merge_r) {
                let j = j as usize;
                if j > i {
                    pairs.push((dist(p, &pts[j]), i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut used = vec![false; pts.len()];
        let mut remove = vec![false; pts.len()];
        for (_, i, j) in pairs {
            if used[i] || used[j] {
                continue;
            }
            used[i] = true;
            used[j] = true;
            let mid = scale(&add(&pts[i], &pts[j]), 0.5);
            // survivor is the midpoint unless it escapes Ω_δ, in which case
            // the first point of the pair survives unchanged
            if dom.in_collar(&mid, delta0) {
                pts[i] = mid;
            }
            remove[j] = true;
        }
        let mut k = 0;
        pts.retain(|_| {
            let keep = !remove[k];
            k += 1;
            keep
        });
    }
    if !done {
        return Err(PointCloudError::AdjustmentFailed {
            loops: max_loops,
            condition,
        });
    }

    // interior points first, collar points after; both groups sorted
    // lexicographically for a stable, reproducible ordering
    let (mut interior, mut collar): (Vec<Point<D>>, Vec<Point<D>>) =
        pts.into_iter().partition(|p| dom.contains(p));
    let lex = |a: &Point<D>, b: &Point<D>| a.partial_cmp(b).unwrap();
    interior.sort_by(lex);
    collar.sort_by(lex);
    let n_interior = interior.len();
    interior.extend(collar);
    Ok(PointCloud {
        points: interior,
        n_interior,
        h: last.0,
        zeta: last.1,
        kappa: last.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::lshape2;

    #[test]
    fn radical_inverse_by_hand() {
        assert_eq!(radical_inverse(2, 1), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(2, 3), 0.75);
        assert!((radical_inverse(3, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((radical_inverse(3, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((radical_inverse(3, 3) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn halton_first_points() {
        let unit = HyperRect::new([0.0, 0.0], [1.0, 1.0]);
        let pts = halton_init::<2>(3, &unit, 0);
        assert!(dist(&pts[0], &[0.5, 1.0 / 3.0]) < 1e-15);
        assert!(dist(&pts[1], &[0.25, 2.0 / 3.0]) < 1e-15);
        assert!(dist(&pts[2], &[0.75, 1.0 / 9.0]) < 1e-15);
        let sym = HyperRect::new([-1.0, -1.0], [1.0, 1.0]);
        let p = halton_init::<2>(1, &sym, 0);
        assert!(dist(&p[0], &[0.0, -1.0 / 3.0]) < 1e-15);
        // all mapped points stay in the box
        for p in halton_init::<3>(100, &HyperRect::new([0.0; 3], [1.0; 3]), 20) {
            assert!((0..3).all(|i| p[i] >= 0.0 && p[i] < 1.0));
        }
    }

    #[test]
    fn fill_distance_corners() {
        let square = Domain::rect(HyperRect::new([0.0, 0.0], [1.0, 1.0]));
        let corners = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let h = estimate_fill_distance(&corners, &square, 0.0, 0.01).unwrap();
        // attained at the center: √2/2, up to probe resolution
        assert!((h - 0.5f64.sqrt()).abs() < 0.02, "h = {h}");
        assert!(h <= 0.5f64.sqrt() + 1e-12);
    }

    #[test]
    fn fill_distance_single_center() {
        let disk = Domain::<2>::unit_ball();
        let h = estimate_fill_distance(&[[0.0, 0.0]], &disk, 0.0, 0.005).unwrap();
        assert!((h - 1.0).abs() < 0.01, "h = {h}");
        assert!(estimate_fill_distance::<2>(&[], &disk, 0.0, 0.01).is_err());
    }

    #[test]
    fn fill_distance_matches_fine_grid_oracle() {
        let square = Domain::rect(HyperRect::new([0.0, 0.0], [1.0, 1.0]));
        let mut state = 0x123u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<Point<2>> = (0..60).map(|_| [rnd(), rnd()]).collect();
        let s = 0.02;
        let h = estimate_fill_distance(&pts, &square, 0.0, s).unwrap();
        // exhaustive fine-grid oracle
        let fine = 0.004;
        let mut oracle = 0.0f64;
        let n = (1.0 / fine) as usize;
        for i in 0..n {
            for j in 0..n {
                let p = [(i as f64 + 0.5) * fine, (j as f64 + 0.5) * fine];
                let d = pts.iter().map(|q| dist(&p, q)).fold(f64::INFINITY, f64::min);
                oracle = oracle.max(d);
            }
        }
        assert!((h - oracle).abs() < s * 2.0f64.sqrt(), "h={h} oracle={oracle}");
    }

    #[test]
    fn separation_cases() {
        assert!((compute_separation(&[[0.0, 0.0], [0.2, 0.0]]).unwrap() - 0.1).abs() < 1e-15);
        let mut lattice = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                lattice.push([i as f64 * 0.3, j as f64 * 0.3]);
            }
        }
        assert!((compute_separation(&lattice).unwrap() - 0.15).abs() < 1e-15);
        assert!(compute_separation::<2>(&[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn separation_matches_brute_force() {
        let mut state = 0x99u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<Point<3>> = (0..300).map(|_| [rnd(), rnd(), rnd()]).collect();
        let fast = compute_separation(&pts).unwrap();
        let mut brute = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                brute = brute.min(dist(&pts[i], &pts[j]));
            }
        }
        assert!((fast - 0.5 * brute).abs() < 1e-15);
    }

    #[test]
    fn collar_volume_sanity() {
        let disk = Domain::<2>::unit_ball();
        let v = collar_volume(&disk, 0.0);
        assert!((v - std::f64::consts::PI).abs() < 0.02, "v = {v}");
        let l = lshape2();
        let v = collar_volume(&l, 0.0);
        assert!((v - 3.0).abs() < 0.02, "v = {v}");
    }

    #[test]
    fn generate_cloud_disk_is_proper() {
        let disk = Domain::<2>::unit_ball();
        let consts = ProperConstants::default();
        let h_target = 0.1;
        let delta0 = 3.0 * h_target;
        let cloud = generate_cloud(&disk, h_target, delta0, &consts, 25).unwrap();
        // self-validation: all three conditions hold
        let vol = collar_volume(&disk, delta0);
        let h_bound = consts.c_h * (vol / cloud.n_total() as f64).sqrt();
        assert!(cloud.h <= h_bound, "h={} bound={}", cloud.h, h_bound);
        assert!(cloud.zeta >= consts.c_zeta * cloud.h);
        assert!(cloud.kappa >= consts.c_kappa * cloud.h);
        // layout: interior first, collar after
        for (k, p) in cloud.points.iter().enumerate() {
            if k < cloud.n_interior {
                assert!(disk.contains(p));
            } else {
                assert!(!disk.contains(p) && disk.dist_boundary(p) < delta0);
            }
        }
        // no duplicates
        assert!(cloud.zeta > 0.0);
    }

    #[test]
    fn generate_cloud_deterministic() {
        let l = lshape2();
        let consts = ProperConstants::default();
        let a = generate_cloud(&l, 0.15, 0.4, &consts, 25).unwrap();
        let b = generate_cloud(&l, 0.15, 0.4, &consts, 25).unwrap();
        assert_eq!(a.n_interior, b.n_interior);
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p, q);
        }
    }
}
