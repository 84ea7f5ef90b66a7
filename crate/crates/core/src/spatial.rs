//! Hashed uniform grids: one over cloud points for triangle-proximity and
//! k-nearest queries, one over mesh faces for closest-point queries.

use rustc_hash::FxHashMap as HashMap;

use crate::assets::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};
use crate::{Barycentric, Triangle3, TriangleQuery, Vec3};

type CellKey = [i64; 3];

/// Key → slot map: a flat array over the occupied key box when that box is
/// small relative to the item count, a hash map otherwise.
#[derive(Debug, Clone)]
enum SlotIndex {
    Dense { dims: [i64; 3] },
    Hashed(HashMap<CellKey, u32>),
}

/// Cell bookkeeping shared by both grids: slot index, CSR offsets and items.
#[derive(Debug, Clone)]
struct CellTable {
    cell_size: f64,
    origin: Vec3,
    index: SlotIndex,
    /// Occupied cells and their slots, in slot order.
    occupied: Vec<(CellKey, u32)>,
    starts: Vec<u32>,
    items: Vec<u32>,
    key_min: CellKey,
    key_max: CellKey,
}

/// `floor` clamped to ±2^60, via truncation; `f64::floor` is a libcall
/// on baseline x86-64.
#[inline]
pub(crate) fn floor_i64(x: f64) -> i64 {
    let x = x.clamp(-(1i64 << 60) as f64, (1i64 << 60) as f64);
    let t = x as i64;
    if t as f64 > x { t - 1 } else { t }
}

fn cell_coord(v: f64, origin: f64, cell: f64) -> i64 {
    floor_i64((v - origin) / cell)
}

fn span_volume(lo: CellKey, hi: CellKey) -> f64 {
    (0..3).map(|a| (hi[a] - lo[a] + 1) as f64).product()
}

impl CellTable {
    fn key(&self, p: Vec3) -> CellKey {
        key_of(p, self.origin, self.cell_size)
    }

    /// Builds the table from `(item, key range)` memberships. `ranges` is
    /// called three times per item and must answer the same each time.
    fn build<F>(cell_size: f64, origin: Vec3, n_items: usize, ranges: F) -> Self
    where
        F: Fn(usize) -> Option<(CellKey, CellKey)>,
    {
        let mut key_min = [i64::MAX; 3];
        let mut key_max = [i64::MIN; 3];
        let mut memberships = 0f64;
        for i in 0..n_items {
            if let Some((lo, hi)) = ranges(i) {
                for a in 0..3 {
                    key_min[a] = key_min[a].min(lo[a]);
                    key_max[a] = key_max[a].max(hi[a]);
                }
                memberships += span_volume(lo, hi);
            }
        }
        let mut table = CellTable {
            cell_size,
            origin,
            index: SlotIndex::Hashed(HashMap::default()),
            occupied: Vec::new(),
            starts: vec![0],
            items: Vec::new(),
            key_min,
            key_max,
        };
        if memberships == 0.0 {
            return table;
        }
        let dense_limit = (4.0 * memberships).max((1u64 << 20) as f64);
        let volume = span_volume(key_min, key_max);

        let mut counts: Vec<u32>;
        if volume <= dense_limit {
            let dims = [0, 1, 2].map(|a| key_max[a] - key_min[a] + 1);
            table.index = SlotIndex::Dense { dims };
            counts = vec![0; volume as usize];
            for i in 0..n_items {
                if let Some((lo, hi)) = ranges(i) {
                    for_each_key(lo, hi, |k| counts[table.dense_slot(k, dims)] += 1);
                }
            }
        } else {
            let mut map: HashMap<CellKey, u32> = HashMap::default();
            counts = Vec::new();
            for i in 0..n_items {
                if let Some((lo, hi)) = ranges(i) {
                    for_each_key(lo, hi, |k| {
                        let slot = *map.entry(k).or_insert_with(|| {
                            counts.push(0);
                            (counts.len() - 1) as u32
                        });
                        counts[slot as usize] += 1;
                    });
                }
            }
            let mut keys: Vec<(CellKey, u32)> = map.iter().map(|(k, v)| (*k, *v)).collect();
            keys.sort_unstable_by_key(|e| e.1);
            table.occupied = keys;
            table.index = SlotIndex::Hashed(map);
        }

        let mut starts = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0u32;
        starts.push(0);
        for c in &counts {
            acc += c;
            starts.push(acc);
        }
        drop(counts);
        let mut fill = starts[..starts.len() - 1].to_vec();
        table.starts = starts;
        let mut items = vec![0u32; acc as usize];
        for i in 0..n_items {
            if let Some((lo, hi)) = ranges(i) {
                for_each_key(lo, hi, |k| {
                    let slot = table.slot(k).expect("counted above") as usize;
                    items[fill[slot] as usize] = i as u32;
                    fill[slot] += 1;
                });
            }
        }
        if let SlotIndex::Dense { dims } = table.index {
            for s in 0..fill.len() {
                if table.starts[s + 1] > table.starts[s] {
                    let x = s as i64 % dims[0];
                    let y = (s as i64 / dims[0]) % dims[1];
                    let z = s as i64 / (dims[0] * dims[1]);
                    table.occupied.push(([key_min[0] + x, key_min[1] + y, key_min[2] + z], s as u32));
                }
            }
        }
        table.items = items;
        table
    }

    fn dense_slot(&self, k: CellKey, dims: [i64; 3]) -> usize {
        let x = k[0] - self.key_min[0];
        let y = k[1] - self.key_min[1];
        let z = k[2] - self.key_min[2];
        ((z * dims[1] + y) * dims[0] + x) as usize
    }

    fn slot(&self, k: CellKey) -> Option<u32> {
        match &self.index {
            SlotIndex::Dense { dims } => {
                if (0..3).any(|a| k[a] < self.key_min[a] || k[a] > self.key_max[a]) {
                    return None;
                }
                let s = self.dense_slot(k, *dims);
                (self.starts[s + 1] > self.starts[s]).then_some(s as u32)
            }
            SlotIndex::Hashed(map) => map.get(&k).copied(),
        }
    }

    fn cell_items(&self, slot: usize) -> &[u32] {
        &self.items[self.starts[slot] as usize..self.starts[slot + 1] as usize]
    }

    fn clip(&self, lo: CellKey, hi: CellKey) -> Option<(CellKey, CellKey)> {
        let mut l = lo;
        let mut h = hi;
        for a in 0..3 {
            l[a] = l[a].max(self.key_min[a]);
            h[a] = h[a].min(self.key_max[a]);
            if l[a] > h[a] {
                return None;
            }
        }
        Some((l, h))
    }

    /// Visits every occupied cell whose key lies in the inclusive box.
    fn visit_box(&self, lo: CellKey, hi: CellKey, mut f: impl FnMut(&[u32])) {
        let Some((lo, hi)) = self.clip(lo, hi) else {
            return;
        };
        match &self.index {
            SlotIndex::Dense { dims } => {
                for z in lo[2]..=hi[2] {
                    for y in lo[1]..=hi[1] {
                        let row = self.dense_slot([lo[0], y, z], *dims);
                        let a = self.starts[row] as usize;
                        let b = self.starts[row + (hi[0] - lo[0]) as usize + 1] as usize;
                        if b > a {
                            // a row of cells is contiguous in the item array
                            f(&self.items[a..b]);
                        }
                    }
                }
            }
            SlotIndex::Hashed(map) => {
                if span_volume(lo, hi) > self.occupied.len() as f64 {
                    for &(k, s) in &self.occupied {
                        if (0..3).all(|a| k[a] >= lo[a] && k[a] <= hi[a]) {
                            f(self.cell_items(s as usize));
                        }
                    }
                } else {
                    for_each_key(lo, hi, |k| {
                        if let Some(&s) = map.get(&k) {
                            f(self.cell_items(s as usize));
                        }
                    });
                }
            }
        }
    }

    /// Like `visit_box`, but skips cells `keep` rejects. Along each x-row
    /// only the span from the first to the last kept cell is visited.
    fn visit_box_trimmed(&self, lo: CellKey, hi: CellKey, keep: impl Fn(CellKey) -> bool, mut f: impl FnMut(&[u32])) {
        let Some((lo, hi)) = self.clip(lo, hi) else {
            return;
        };
        match &self.index {
            SlotIndex::Dense { dims } => {
                for z in lo[2]..=hi[2] {
                    for y in lo[1]..=hi[1] {
                        let Some(x0) = (lo[0]..=hi[0]).find(|&x| keep([x, y, z])) else {
                            continue;
                        };
                        let x1 = (x0..=hi[0]).rev().find(|&x| keep([x, y, z])).unwrap_or(x0);
                        let row = self.dense_slot([x0, y, z], *dims);
                        let a = self.starts[row] as usize;
                        let b = self.starts[row + (x1 - x0) as usize + 1] as usize;
                        if b > a {
                            f(&self.items[a..b]);
                        }
                    }
                }
            }
            SlotIndex::Hashed(map) => {
                if span_volume(lo, hi) > self.occupied.len() as f64 {
                    for &(k, s) in &self.occupied {
                        if (0..3).all(|a| k[a] >= lo[a] && k[a] <= hi[a]) && keep(k) {
                            f(self.cell_items(s as usize));
                        }
                    }
                } else {
                    for_each_key(lo, hi, |k| {
                        if let Some(&s) = map.get(&k) {
                            if keep(k) {
                                f(self.cell_items(s as usize));
                            }
                        }
                    });
                }
            }
        }
    }

    /// Visits occupied cells at Chebyshev distance exactly `r` from `c`.
    fn visit_shell(&self, c: CellKey, r: i64, mut f: impl FnMut(&[u32])) {
        if r == 0 {
            if let Some(s) = self.slot(c) {
                f(self.cell_items(s as usize));
            }
            return;
        }
        let lo = [c[0] - r, c[1] - r, c[2] - r];
        let hi = [c[0] + r, c[1] + r, c[2] + r];
        let shell_cells = (2.0 * r as f64 + 1.0).powi(3) - (2.0 * r as f64 - 1.0).powi(3);
        if shell_cells > self.occupied.len() as f64 {
            for &(k, s) in &self.occupied {
                let d = (0..3).map(|a| (k[a] - c[a]).abs()).max().unwrap();
                if d == r {
                    f(self.cell_items(s as usize));
                }
            }
            return;
        }
        let Some((cl, ch)) = self.clip(lo, hi) else {
            return;
        };
        let mut probe = |k: CellKey| {
            if let Some(s) = self.slot(k) {
                f(self.cell_items(s as usize));
            }
        };
        for z in cl[2]..=ch[2] {
            for y in cl[1]..=ch[1] {
                if (z - c[2]).abs() == r || (y - c[1]).abs() == r {
                    for x in cl[0]..=ch[0] {
                        probe([x, y, z]);
                    }
                } else {
                    for x in [c[0] - r, c[0] + r] {
                        if x >= cl[0] && x <= ch[0] {
                            probe([x, y, z]);
                        }
                    }
                }
            }
        }
    }

    /// Lower bound on the distance from `p` to any cell outside the block of
    /// Chebyshev radius `r` around `c`.
    fn outside_bound(&self, p: Vec3, c: CellKey, r: i64) -> f64 {
        let pa = p.to_array();
        let oa = self.origin.to_array();
        (0..3)
            .map(|a| {
                let lo = oa[a] + (c[a] - r) as f64 * self.cell_size;
                let hi = oa[a] + (c[a] + r + 1) as f64 * self.cell_size;
                (pa[a] - lo).min(hi - pa[a])
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Next shell radius worth visiting after `r`; skips runs of empty shells
    /// when cells are sparse relative to the shell size.
    fn next_radius(&self, c: CellKey, r: i64) -> i64 {
        let n = r + 1;
        let shell_cells = (2.0 * n as f64 + 1.0).powi(3) - (2.0 * n as f64 - 1.0).powi(3);
        if shell_cells <= self.occupied.len() as f64 {
            return n;
        }
        self.occupied
            .iter()
            .map(|(k, _)| (0..3).map(|a| (k[a] - c[a]).abs()).max().unwrap())
            .filter(|&d| d > r)
            .min()
            .unwrap_or(n)
    }

    /// True once the block of radius `r` around `c` contains every occupied cell.
    fn exhausted(&self, c: CellKey, r: i64) -> bool {
        self.occupied.is_empty() || (0..3).all(|a| c[a] - r <= self.key_min[a] && c[a] + r >= self.key_max[a])
    }
}

fn key_of(p: Vec3, origin: Vec3, cell: f64) -> CellKey {
    [
        cell_coord(p.x, origin.x, cell),
        cell_coord(p.y, origin.y, cell),
        cell_coord(p.z, origin.z, cell),
    ]
}

fn for_each_key(lo: CellKey, hi: CellKey, mut f: impl FnMut(CellKey)) {
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                f([x, y, z]);
            }
        }
    }
}

/// Uniform grid over point indices. Each point lives in exactly one cell,
/// `floor((position − origin) / cell_size)`. Only occupied cells are stored.
#[derive(Debug, Clone)]
pub struct UniformGrid {
    table: CellTable,
    dims: [u64; 3],
    n_points: usize,
}

impl UniformGrid {
    pub fn build(cloud: &PointCloud, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::Config(format!("cell size must be positive, got {cell_size}")));
        }
        if cloud.is_empty() {
            return Err(Error::Config("cannot index an empty point cloud".into()));
        }
        let origin = cloud.bounds.min;
        let ext = cloud.bounds.extent().to_array();
        let dims = ext.map(|e| ((e / cell_size).floor() + 1.0).clamp(1.0, u64::MAX as f64) as u64);
        let table = CellTable::build(cell_size, origin, cloud.len(), |i| {
            let k = key_of(cloud.points[i].position, origin, cell_size);
            Some((k, k))
        });
        Ok(UniformGrid {
            table,
            dims,
            n_points: cloud.len(),
        })
    }

    /// Cell edge giving roughly `per_cell` points per occupied cell, assuming
    /// the points sample a surface spanning the two largest bounding extents.
    pub fn density_cell_size(cloud: &PointCloud, per_cell: f64) -> f64 {
        let mut e = cloud.bounds.extent().to_array();
        e.sort_by(|a, b| b.total_cmp(a));
        let area = (e[0] * e[1]).max(e[0] * e[0] * 1e-6).max(1e-300);
        let s = (area * per_cell / cloud.len().max(1) as f64).sqrt();
        if s.is_finite() && s > 0.0 { s } else { 1.0 }
    }

    pub fn cell_size(&self) -> f64 {
        self.table.cell_size
    }

    pub fn origin(&self) -> Vec3 {
        self.table.origin
    }

    pub fn dims(&self) -> [u64; 3] {
        self.dims
    }

    pub fn occupied_cells(&self) -> usize {
        self.table.occupied.len()
    }

    pub fn point_count(&self) -> usize {
        self.n_points
    }

    pub fn cell_of(&self, p: Vec3) -> [i64; 3] {
        self.table.key(p)
    }

    /// Point indices stored in the cell with key `k`.
    pub fn cell(&self, k: [i64; 3]) -> &[u32] {
        match self.table.slot(k) {
            Some(s) => self.table.cell_items(s as usize),
            None => &[],
        }
    }

    /// Iterates the occupied cells as `(cell key, point indices)`.
    pub fn cells(&self) -> impl Iterator<Item = ([i64; 3], &[u32])> {
        self.table
            .occupied
            .iter()
            .map(|&(k, s)| (k, self.table.cell_items(s as usize)))
    }

    /// Every point within `d_max` of the triangle, plus possibly some farther
    /// ones. Sorted ascending.
    pub fn candidates_near_triangle(&self, t: &Triangle3, d_max: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.visit_near_triangle(t, d_max, |items| out.extend_from_slice(items));
        out.sort_unstable();
        out
    }

    /// Hands over, cell run by cell run, a superset of the points within
    /// `d_max` of the triangle. No order is promised across runs.
    pub(crate) fn visit_near_triangle(&self, t: &Triangle3, d_max: f64, f: impl FnMut(&[u32])) {
        let (lo, hi) = t.aabb();
        // pad slightly so rounding in the key computation cannot drop a boundary point
        let pad = d_max.max(0.0) * (1.0 + 1e-9) + 1e-12 * (1.0 + lo.norm().max(hi.norm()));
        let pad = Vec3::new(pad, pad, pad);
        let klo = self.table.key(lo - pad);
        let khi = self.table.key(hi + pad);
        let n = (t.v1 - t.v0).cross(t.v2 - t.v0);
        let n_len = n.norm();
        if n_len > 0.0 && n_len.is_finite() {
            // cells whose box misses the slab |n·(p − v0)| ≤ d_max
            let n = n * (1.0 / n_len);
            let (cs, o) = (self.table.cell_size, self.table.origin);
            let reach = 0.5 * cs * (n.x.abs() + n.y.abs() + n.z.abs());
            let slack = 1e-9 * (1.0 + d_max.max(0.0) + reach + o.norm() + t.v0.norm() + hi.norm());
            let limit = d_max.max(0.0) + reach + slack;
            let off = n.dot(t.v0 - o);
            let keep = |k: CellKey| {
                let c = Vec3::new((k[0] as f64 + 0.5) * cs, (k[1] as f64 + 0.5) * cs, (k[2] as f64 + 0.5) * cs);
                (n.dot(c) - off).abs() <= limit
            };
            self.table.visit_box_trimmed(klo, khi, keep, f);
        } else {
            self.table.visit_box(klo, khi, f);
        }
    }

    /// Exact k nearest points to `q`, ordered by (distance, index).
    pub fn k_nearest(&self, cloud: &PointCloud, q: Vec3, k: usize) -> Vec<(f64, u32)> {
        let k = k.min(self.n_points);
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return best;
        }
        let c = self.table.key(q);
        let mut r = 0i64;
        loop {
            self.table.visit_shell(c, r, |items| {
                for &i in items {
                    let d = (cloud.points[i as usize].position - q).norm();
                    let cand = (d, i);
                    if best.len() < k || lex_less(cand, best[best.len() - 1]) {
                        let pos = best.partition_point(|&b| lex_less(b, cand));
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
            });
            if best.len() == k && best[k - 1].0 < self.table.outside_bound(q, c, r) {
                break;
            }
            if self.table.exhausted(c, r) {
                break;
            }
            r = self.table.next_radius(c, r);
        }
        best
    }
}

fn lex_less(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Closest point on a mesh surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub face: u32,
    pub point: Vec3,
    pub bary: Barycentric,
    pub distance: f64,
}

/// Uniform grid over mesh faces, each face binned into every cell its
/// bounding box touches.
#[derive(Debug, Clone)]
pub struct FaceGrid {
    table: CellTable,
    queries: Vec<Option<TriangleQuery>>,
}

/// Per-thread scratch for [`FaceGrid::closest_point`].
#[derive(Debug, Default)]
pub struct FaceScratch {
    stamp: Vec<u32>,
    generation: u32,
}

impl FaceGrid {
    /// Builds with a cell edge equal to the mean face bounding-box size.
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        let mut sum = 0.0;
        for f in 0..mesh.faces.len() {
            let (lo, hi) = mesh.triangle(f).aabb();
            let e = (hi - lo).to_array();
            sum += e[0].max(e[1]).max(e[2]);
        }
        let mean = sum / mesh.faces.len() as f64;
        let cell = if mean > 0.0 { mean } else { 1.0 };
        Self::build_with_cell(mesh, cell)
    }

    pub fn build_with_cell(mesh: &TriangleMesh, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::Config(format!("cell size must be positive, got {cell_size}")));
        }
        let origin = crate::assets::Aabb::of_points(mesh.vertices.iter().copied())
            .map(|b| b.min)
            .unwrap_or_else(Vec3::zero);
        let queries: Vec<Option<TriangleQuery>> = (0..mesh.faces.len())
            .map(|f| TriangleQuery::new(mesh.triangle(f)).ok())
            .collect();
        let table = CellTable::build(cell_size, origin, mesh.faces.len(), |f| {
            queries[f].as_ref()?;
            let (lo, hi) = mesh.triangle(f).aabb();
            Some((key_of(lo, origin, cell_size), key_of(hi, origin, cell_size)))
        });
        Ok(FaceGrid { table, queries })
    }

    pub fn face_count(&self) -> usize {
        self.queries.len()
    }

    /// Closest point over all non-degenerate faces; ties go to the lower face index.
    pub fn closest_point(&self, q: Vec3, scratch: &mut FaceScratch) -> Option<SurfaceHit> {
        if scratch.stamp.len() != self.queries.len() {
            scratch.stamp = vec![0; self.queries.len()];
            scratch.generation = 0;
        }
        scratch.generation = scratch.generation.wrapping_add(1);
        if scratch.generation == 0 {
            scratch.stamp.iter_mut().for_each(|s| *s = 0);
            scratch.generation = 1;
        }
        let gen = scratch.generation;
        let mut best: Option<SurfaceHit> = None;
        let c = self.table.key(q);
        let mut r = 0i64;
        loop {
            self.table.visit_shell(c, r, |items| {
                for &f in items {
                    if scratch.stamp[f as usize] == gen {
                        continue;
                    }
                    scratch.stamp[f as usize] = gen;
                    let Some(tq) = &self.queries[f as usize] else {
                        continue;
                    };
                    let (p, b) = tq.closest_point(q);
                    let d = (p - q).norm();
                    let better = match &best {
                        None => true,
                        Some(h) => d < h.distance || (d == h.distance && f < h.face),
                    };
                    if better {
                        best = Some(SurfaceHit {
                            face: f,
                            point: p,
                            bary: b,
                            distance: d,
                        });
                    }
                }
            });
            if let Some(h) = &best {
                if h.distance < self.table.outside_bound(q, c, r) {
                    break;
                }
            }
            if self.table.exhausted(c, r) {
                break;
            }
            r = self.table.next_radius(c, r);
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::SurfacePoint;
    use crate::UnitVec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    proptest::proptest! {
        #[test]
        fn floor_i64_matches_floor(x in -1e15f64..1e15) {
            proptest::prop_assert_eq!(floor_i64(x), x.floor() as i64);
        }
    }

    #[test]
    fn floor_i64_edges() {
        for x in [-0.0, 0.0, -1.0, -0.5, 0.5, 2.0, -2.0000001, f64::EPSILON, -f64::EPSILON] {
            assert_eq!(floor_i64(x), x.floor() as i64, "{x}");
        }
        assert_eq!(floor_i64(1e300), 1i64 << 60);
        assert_eq!(floor_i64(-1e300), -(1i64 << 60));
    }

    fn cloud_of(ps: &[Vec3]) -> PointCloud {
        PointCloud::new(
            ps.iter()
                .map(|&position| SurfacePoint {
                    position,
                    normal: UnitVec3::z_axis(),
                    color: [0, 0, 0],
                })
                .collect(),
        )
        .unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
        Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    #[test]
    fn single_point_grid() {
        let g = UniformGrid::build(&cloud_of(&[Vec3::new(1.0, 2.0, 3.0)]), 0.5).unwrap();
        assert_eq!(g.occupied_cells(), 1);
        assert_eq!(g.cell([0, 0, 0]), &[0]);
        assert_eq!(g.dims(), [1, 1, 1]);
    }

    #[test]
    fn cube_corners_occupy_eight_cells() {
        let mut ps = Vec::new();
        for i in 0..8 {
            ps.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        let g = UniformGrid::build(&cloud_of(&ps), 0.5).unwrap();
        assert_eq!(g.occupied_cells(), 8);
        assert_eq!(g.cell([2, 2, 2]), &[7]);
        assert_eq!(g.dims(), [3, 3, 3]);
    }

    #[test]
    fn rejects_bad_cell_size() {
        let c = cloud_of(&[Vec3::zero()]);
        assert!(matches!(UniformGrid::build(&c, 0.0), Err(Error::Config(_))));
        assert!(matches!(UniformGrid::build(&c, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn occupancy_is_conserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(1..2000);
            let ps: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 5.0)).collect();
            let g = UniformGrid::build(&cloud_of(&ps), rng.random_range(0.05..3.0)).unwrap();
            let mut seen = vec![0u32; n];
            for (key, items) in g.cells() {
                for &i in items {
                    seen[i as usize] += 1;
                    assert_eq!(g.cell_of(ps[i as usize]), key);
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn flat_cloud_has_unit_dims_on_flat_axis() {
        let ps: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let g = UniformGrid::build(&cloud_of(&ps), 2.0).unwrap();
        assert_eq!(g.dims(), [5, 1, 1]);
    }

    #[test]
    fn empty_region_and_inclusive_boundary() {
        let tri = Triangle3::new(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let far = cloud_of(&[Vec3::new(50.0, 50.0, 50.0), Vec3::new(60.0, 50.0, 50.0)]);
        let g = UniformGrid::build(&far, 0.5).unwrap();
        assert!(g.candidates_near_triangle(&tri, 1.0).is_empty());

        let at = cloud_of(&[Vec3::new(0.25, 0.25, 0.75), Vec3::new(3.0, 3.0, 3.0)]);
        let g = UniformGrid::build(&at, 0.1).unwrap();
        assert_eq!(g.candidates_near_triangle(&tri, 0.75), vec![0]);
    }

    #[test]
    fn candidates_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..1000 {
            let n = rng.random_range(1..=if case % 50 == 0 { 10_000 } else { 600 });
            let ps: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 2.0)).collect();
            let cloud = cloud_of(&ps);
            let d_max: f64 = rng.random_range(0.0..0.8);
            let cell: f64 = if case % 3 == 0 { rng.random_range(0.01..2.0) } else { (2.0 * d_max).max(1e-3) };
            let g = UniformGrid::build(&cloud, cell).unwrap();
            let t = Triangle3::new(rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0));
            let Ok(tq) = TriangleQuery::new(t) else { continue };
            let exact: Vec<u32> = (0..n as u32).filter(|&i| tq.distance(ps[i as usize]) <= d_max).collect();
            let got: Vec<u32> = g
                .candidates_near_triangle(&t, d_max)
                .into_iter()
                .filter(|&i| tq.distance(ps[i as usize]) <= d_max)
                .collect();
            assert_eq!(got, exact, "case {case}");
        }
    }

    #[test]
    fn candidates_keep_points_at_the_slab_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for case in 0..300 {
            let t = Triangle3::new(rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0));
            let Ok(tq) = TriangleQuery::new(t) else { continue };
            let n = tq.normal().get();
            let d_max: f64 = rng.random_range(0.0..0.3);
            let ps: Vec<Vec3> = (0..800)
                .map(|_| {
                    let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
                    if a + b > 1.0 {
                        a = 1.0 - a;
                        b = 1.0 - b;
                    }
                    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    t.v0 + (t.v1 - t.v0) * a + (t.v2 - t.v0) * b + n * (side * d_max * rng.random_range(0.9..=1.0))
                })
                .collect();
            let cloud = cloud_of(&ps);
            let cell = [0.003, 0.05, 0.4][case % 3];
            let g = UniformGrid::build(&cloud, cell).unwrap();
            let exact: Vec<u32> = (0..ps.len() as u32).filter(|&i| tq.distance(ps[i as usize]) <= d_max).collect();
            let got: Vec<u32> = g
                .candidates_near_triangle(&t, d_max)
                .into_iter()
                .filter(|&i| tq.distance(ps[i as usize]) <= d_max)
                .collect();
            assert_eq!(got, exact, "case {case}");
        }
    }

    #[test]
    fn tiny_cells_still_answer_queries() {
        let ps = [Vec3::new(0.2, 0.2, 0.0), Vec3::new(0.9, 0.9, 0.0), Vec3::new(0.3, 0.1, 1e-13)];
        let g = UniformGrid::build(&cloud_of(&ps), 2e-12).unwrap();
        let t = Triangle3::new(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(g.candidates_near_triangle(&t, 1e-12), vec![0, 1, 2]);
        assert_eq!(g.k_nearest(&cloud_of(&ps), Vec3::new(0.85, 0.85, 0.0), 1)[0].1, 1);
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..500 {
            let n = rng.random_range(1..1500);
            let ps: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 3.0)).collect();
            let cloud = cloud_of(&ps);
            let g = UniformGrid::build(&cloud, rng.random_range(0.05..2.0)).unwrap();
            let q = rand_vec(&mut rng, 4.0);
            let k = rng.random_range(1..12);
            let mut brute: Vec<(f64, u32)> =
                ps.iter().enumerate().map(|(i, p)| ((*p - q).norm(), i as u32)).collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            brute.truncate(k);
            assert_eq!(g.k_nearest(&cloud, q, k), brute, "case {case}");
        }
    }

    #[test]
    fn closest_face_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for case in 0..200 {
            let nv = rng.random_range(3..60);
            let verts: Vec<Vec3> = (0..nv).map(|_| rand_vec(&mut rng, 2.0)).collect();
            let nf = rng.random_range(1..80);
            let faces: Vec<[u32; 3]> = (0..nf)
                .map(|_| {
                    let a = rng.random_range(0..nv as u32);
                    let b = (a + rng.random_range(1..nv as u32)) % nv as u32;
                    let mut c = rng.random_range(0..nv as u32);
                    while c == a || c == b {
                        c = rng.random_range(0..nv as u32);
                    }
                    [a, b, c]
                })
                .collect();
            let mesh = TriangleMesh::new(verts, faces);
            let grid = FaceGrid::build(&mesh).unwrap();
            let mut scratch = FaceScratch::default();
            let q = rand_vec(&mut rng, 3.0);
            let brute = (0..nf)
                .filter_map(|f| TriangleQuery::new(mesh.triangle(f)).ok().map(|tq| (tq.distance(q), f as u32)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let hit = grid.closest_point(q, &mut scratch);
            match (hit, brute) {
                (Some(h), Some((d, f))) => {
                    assert_eq!(h.distance, d, "case {case}");
                    assert_eq!(h.face, f, "case {case}");
                }
                (None, None) => {}
                other => panic!("case {case}: {other:?}"),
            }
        }
    }
}
