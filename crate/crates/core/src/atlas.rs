//! Per-triangle UV atlas: every face becomes its own chart via a similarity
//! transform, and the charts are shelf-packed into the unit square with a
//! gutter of empty texels around each one.

use std::collections::BTreeSet;

use crate::assets::{MeshUvs, TriangleMesh};
use crate::error::{Error, Result};
use crate::{Triangle2, Vec2};

pub const MIN_RESOLUTION: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct UvAtlas {
    pub resolution: u32,
    pub gutter: u32,
    /// UV placement of each face, corners in face-vertex order.
    pub placements: Vec<Triangle2>,
    /// Texels per scene unit, shared by every face.
    pub texels_per_unit: f64,
}

impl UvAtlas {
    /// Stores the placements as per-corner texture coordinates on `mesh`.
    pub fn apply_to(&self, mesh: &mut TriangleMesh) {
        let mut coords = Vec::with_capacity(self.placements.len() * 3);
        let mut faces = Vec::with_capacity(self.placements.len());
        for (i, t) in self.placements.iter().enumerate() {
            coords.extend_from_slice(&[t.a, t.b, t.c]);
            let b = 3 * i as u32;
            faces.push([b, b + 1, b + 2]);
        }
        mesh.uvs = Some(MeshUvs { coords, faces });
    }

    /// Reads placements back from a mesh that already carries UVs.
    pub fn from_mesh(mesh: &TriangleMesh, resolution: u32, gutter: u32) -> Result<Self> {
        if mesh.uvs.is_none() {
            return Err(Error::MissingUVs);
        }
        Ok(UvAtlas {
            resolution,
            gutter,
            placements: (0..mesh.faces.len())
                .map(|f| mesh.uv_triangle(f).unwrap())
                .collect(),
            texels_per_unit: f64::NAN,
        })
    }
}

/// Face laid flat with its longest edge on the x axis and apex above it.
#[derive(Debug, Clone, Copy)]
struct Chart {
    corners: [Vec2; 3],
    width: f64,
    height: f64,
}

fn flatten(mesh: &TriangleMesh, face: usize) -> Result<Chart> {
    let t = mesh.triangle(face);
    if t.is_degenerate() {
        return Err(Error::DegenerateFace { face });
    }
    let p = [t.v0, t.v1, t.v2];
    let len = |i: usize| (p[(i + 1) % 3] - p[i]).norm();
    let mut base = 0;
    for i in 1..3 {
        if len(i) > len(base) {
            base = i;
        }
    }
    let (i, j, k) = (base, (base + 1) % 3, (base + 2) % 3);
    let l = len(i);
    let dir = (p[j] - p[i]) * (1.0 / l);
    let rel = p[k] - p[i];
    let ax = rel.dot(dir);
    let ay = rel.cross(dir).norm();
    let mut corners = [Vec2::default(); 3];
    corners[i] = Vec2::new(0.0, 0.0);
    corners[j] = Vec2::new(l, 0.0);
    corners[k] = Vec2::new(ax, ay);
    Ok(Chart {
        corners,
        width: l,
        height: ay,
    })
}

struct Packer<'a> {
    charts: &'a [Chart],
    order: &'a [usize],
    margin: f64,
    gap: f64,
}

impl Packer<'_> {
    /// Shelf-packs at `scale` texels per unit into a square of side `res`;
    /// returns each chart's bottom-left offset in texels.
    fn pack(&self, scale: f64, res: f64) -> Option<Vec<Vec2>> {
        let limit = res - self.margin;
        let mut out = vec![Vec2::default(); self.charts.len()];
        let mut x = self.margin;
        let mut y = self.margin;
        let mut shelf_h: Option<f64> = None;
        for &f in self.order {
            let w = self.charts[f].width * scale;
            let h = self.charts[f].height * scale;
            match shelf_h {
                None => shelf_h = Some(h),
                Some(sh) if x + w > limit => {
                    y += sh + self.gap;
                    x = self.margin;
                    shelf_h = Some(h);
                }
                _ => {}
            }
            if x + w > limit || y + shelf_h.unwrap() > limit {
                return None;
            }
            out[f] = Vec2::new(x, y);
            x += w + self.gap;
        }
        Some(out)
    }

    /// Smallest scale still accepted: the largest chart spans one texel.
    fn min_scale(&self) -> f64 {
        let m = self
            .charts
            .iter()
            .map(|c| c.width.max(c.height))
            .fold(0.0, f64::max);
        1.0 / m
    }
}

/// Lays every face out as its own chart and packs the charts into shelves,
/// tallest first (ties by face index), at the largest uniform scale that fits.
pub fn unwrap_per_triangle(mesh: &TriangleMesh, resolution: u32, gutter: u32) -> Result<UvAtlas> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "atlas resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    if gutter < 1 {
        return Err(Error::Config("atlas gutter must be at least 1 texel".into()));
    }
    mesh.validate()?;
    let charts = (0..mesh.faces.len())
        .map(|f| flatten(mesh, f))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..charts.len()).collect();
    order.sort_by(|&a, &b| charts[b].height.total_cmp(&charts[a].height).then(a.cmp(&b)));
    let packer = Packer {
        charts: &charts,
        order: &order,
        margin: gutter as f64 + 1.0,
        gap: 2.0 * gutter as f64 + 2.0,
    };
    let res = resolution as f64;
    let s_min = packer.min_scale();
    if packer.pack(s_min, res).is_none() {
        return Err(Error::AtlasOverflow {
            resolution,
            min_resolution: min_feasible_resolution(&packer, s_min, resolution),
        });
    }
    let max_dim = charts
        .iter()
        .map(|c| c.width.max(c.height))
        .fold(0.0, f64::max);
    let mut lo = s_min;
    let mut hi = (res - 2.0 * packer.margin) / max_dim;
    if packer.pack(hi, res).is_some() {
        lo = hi;
    } else {
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if packer.pack(mid, res).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let offsets = packer.pack(lo, res).expect("feasible scale packs");
    let placements = charts
        .iter()
        .zip(&offsets)
        .map(|(c, o)| {
            let uv = |p: Vec2| Vec2::new((o.x + p.x * lo) / res, (o.y + p.y * lo) / res);
            Triangle2::new(uv(c.corners[0]), uv(c.corners[1]), uv(c.corners[2]))
        })
        .collect();
    Ok(UvAtlas {
        resolution,
        gutter,
        placements,
        texels_per_unit: lo,
    })
}

fn min_feasible_resolution(packer: &Packer, scale: f64, from: u32) -> u32 {
    let mut hi = from.max(MIN_RESOLUTION);
    while packer.pack(scale, hi as f64).is_none() {
        hi = hi.saturating_mul(2);
        if hi == u32::MAX {
            return hi;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if packer.pack(scale, mid as f64).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtlasReport {
    /// Sum of UV triangle areas over the unit square.
    pub occupancy: f64,
    /// Texels claimed by more than one gutter-dilated face.
    pub overlapping_texels: usize,
    /// Face pairs whose dilated footprints share a texel.
    pub overlapping_faces: Vec<(u32, u32)>,
    /// Faces with a corner outside [0, 1]².
    pub out_of_bounds: Vec<u32>,
    /// Faces with no placement.
    pub missing: Vec<u32>,
}

impl AtlasReport {
    pub fn is_valid(&self) -> bool {
        self.overlapping_texels == 0 && self.out_of_bounds.is_empty() && self.missing.is_empty()
    }
}

/// Does triangle `t` (texel space) intersect the axis-aligned box?
fn tri_box_overlap(t: &[Vec2; 3], lo: Vec2, hi: Vec2) -> bool {
    let (tmin_x, tmax_x) = minmax(t.iter().map(|p| p.x));
    let (tmin_y, tmax_y) = minmax(t.iter().map(|p| p.y));
    if tmax_x < lo.x || tmin_x > hi.x || tmax_y < lo.y || tmin_y > hi.y {
        return false;
    }
    let corners = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    for i in 0..3 {
        let e = t[(i + 1) % 3] - t[i];
        let axis = Vec2::new(-e.y, e.x);
        let (a0, a1) = minmax(t.iter().map(|p| p.dot(axis)));
        let (b0, b1) = minmax(corners.iter().map(|p| p.dot(axis)));
        if a1 < b0 || b1 < a0 {
            return false;
        }
    }
    true
}

fn minmax(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Checks bounds and pairwise overlap of gutter-dilated texel footprints.
/// A face's footprint is every texel whose square, grown by the gutter on
/// each side, touches the face.
pub fn validate_atlas(atlas: &UvAtlas, mesh: &TriangleMesh) -> AtlasReport {
    let res = atlas.resolution;
    let g = atlas.gutter as f64;
    let mut report = AtlasReport::default();
    let n = mesh.faces.len().min(atlas.placements.len());
    report.missing = (atlas.placements.len() as u32..mesh.faces.len() as u32).collect();
    let mut owner = vec![u32::MAX; res as usize * res as usize];
    let mut pairs = BTreeSet::new();
    for f in 0..n {
        let t = atlas.placements[f];
        report.occupancy += t.signed_area().abs();
        let inb = |p: Vec2| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y);
        if !(inb(t.a) && inb(t.b) && inb(t.c)) {
            report.out_of_bounds.push(f as u32);
        }
        let tx = [t.a, t.b, t.c].map(|p| p * res as f64);
        let (x0, x1) = minmax(tx.iter().map(|p| p.x));
        let (y0, y1) = minmax(tx.iter().map(|p| p.y));
        let cx0 = ((x0 - g - 1.0).floor().max(0.0)) as u32;
        let cx1 = ((x1 + g).ceil().min(res as f64 - 1.0)).max(0.0) as u32;
        let cy0 = ((y0 - g - 1.0).floor().max(0.0)) as u32;
        let cy1 = ((y1 + g).ceil().min(res as f64 - 1.0)).max(0.0) as u32;
        for ky in cy0..=cy1 {
            for kx in cx0..=cx1 {
                let lo = Vec2::new(kx as f64 - g, ky as f64 - g);
                let hi = Vec2::new(kx as f64 + 1.0 + g, ky as f64 + 1.0 + g);
                if !tri_box_overlap(&tx, lo, hi) {
                    continue;
                }
                let idx = ky as usize * res as usize + kx as usize;
                let prev = owner[idx];
                if prev == u32::MAX {
                    owner[idx] = f as u32;
                } else if prev != f as u32 {
                    report.overlapping_texels += 1;
                    pairs.insert((prev.min(f as u32), prev.max(f as u32)));
                }
            }
        }
    }
    report.overlapping_faces = pairs.into_iter().collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::texel;
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tri_mesh() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.2, 0.7, 0.3)],
            vec![[0, 1, 2]],
        )
    }

    fn angles3(a: Vec3, b: Vec3, c: Vec3) -> [f64; 3] {
        let ang = |p: Vec3, q: Vec3, r: Vec3| {
            let u = q - p;
            let v = r - p;
            (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos()
        };
        [ang(a, b, c), ang(b, c, a), ang(c, a, b)]
    }

    fn angles2(t: &Triangle2) -> [f64; 3] {
        let l = |p: Vec2| Vec3::new(p.x, p.y, 0.0);
        angles3(l(t.a), l(t.b), l(t.c))
    }

    /// Texels whose centre lies in a placement, dilated by the gutter in
    /// chessboard distance; counts texels claimed by two faces.
    fn dilated_conflicts(atlas: &UvAtlas) -> usize {
        let r = atlas.resolution;
        let g = atlas.gutter as i64;
        let mut owner = vec![u32::MAX; (r * r) as usize];
        let mut conflicts = 0;
        for (f, t) in atlas.placements.iter().enumerate() {
            let mut mine = BTreeSet::new();
            for row in 0..r {
                for col in 0..r {
                    let c = texel::center_uv(col, row, r, r);
                    if t.barycentric_of(c).min_weight() >= 0.0 {
                        for dy in -g..=g {
                            for dx in -g..=g {
                                let (x, y) = (col as i64 + dx, row as i64 + dy);
                                if x >= 0 && y >= 0 && x < r as i64 && y < r as i64 {
                                    mine.insert((y * r as i64 + x) as usize);
                                }
                            }
                        }
                    }
                }
            }
            for i in mine {
                if owner[i] != u32::MAX {
                    conflicts += 1;
                }
                owner[i] = f as u32;
            }
        }
        conflicts
    }

    #[test]
    fn single_triangle_respects_margin() {
        let a = unwrap_per_triangle(&tri_mesh(), 64, 2).unwrap();
        assert_eq!(a.placements.len(), 1);
        let margin = 3.0 / 64.0;
        for p in [a.placements[0].a, a.placements[0].b, a.placements[0].c] {
            assert!(p.x >= margin - 1e-12 && p.x <= 1.0 - margin + 1e-12);
            assert!(p.y >= margin - 1e-12 && p.y <= 1.0 - margin + 1e-12);
        }
        assert!(validate_atlas(&a, &tri_mesh()).is_valid());
    }

    #[test]
    fn two_identical_triangles_are_congruent_and_disjoint() {
        let mut m = tri_mesh();
        m.vertices.extend_from_slice(&[Vec3::new(5.0, 0.0, 0.0), Vec3::new(6.0, 0.0, 0.0), Vec3::new(5.2, 0.7, 0.3)]);
        m.faces.push([3, 4, 5]);
        let a = unwrap_per_triangle(&m, 128, 2).unwrap();
        let (p, q) = (a.placements[0], a.placements[1]);
        for i in 0..3 {
            let dp = p.corner((i + 1) % 3) - p.corner(i);
            let dq = q.corner((i + 1) % 3) - q.corner(i);
            assert!((dp - dq).norm() < 1e-12);
        }
        let report = validate_atlas(&a, &m);
        assert!(report.is_valid(), "{report:?}");
        assert_eq!(dilated_conflicts(&a), 0);

        // occupancy against a rasterize-and-count estimate
        let r = 128;
        let mut inside = 0usize;
        for row in 0..r {
            for col in 0..r {
                let c = texel::center_uv(col, row, r, r);
                if a.placements.iter().any(|t| t.barycentric_of(c).min_weight() >= 0.0) {
                    inside += 1;
                }
            }
        }
        let raster = inside as f64 / (r * r) as f64;
        assert!((report.occupancy - raster).abs() <= 0.01 * raster, "{} vs {raster}", report.occupancy);
    }

    #[test]
    fn overlapping_placements_are_reported() {
        let mut m = tri_mesh();
        m.vertices.extend_from_slice(&[Vec3::new(5.0, 0.0, 0.0), Vec3::new(6.0, 0.0, 0.0), Vec3::new(5.2, 0.7, 0.3)]);
        m.faces.push([3, 4, 5]);
        let mut a = unwrap_per_triangle(&m, 128, 2).unwrap();
        a.placements[1] = a.placements[0];
        let report = validate_atlas(&a, &m);
        assert!(!report.is_valid());
        assert_eq!(report.overlapping_faces, vec![(0, 1)]);
        a.placements[1].a.x = 1.5;
        assert_eq!(validate_atlas(&a, &m).out_of_bounds, vec![1]);
    }

    #[test]
    fn overflow_reports_feasible_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = TriangleMesh::default();
        for i in 0..2000u32 {
            let o = Vec3::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), 0.0);
            m.vertices.extend_from_slice(&[o, o + Vec3::new(0.1, 0.0, 0.0), o + Vec3::new(0.0, 0.1, 0.05)]);
            m.faces.push([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        match unwrap_per_triangle(&m, 64, 1) {
            Err(Error::AtlasOverflow { min_resolution, .. }) => {
                assert!(min_resolution > 64);
                assert!(unwrap_per_triangle(&m, min_resolution, 1).is_ok());
                assert!(unwrap_per_triangle(&m, min_resolution - 1, 1).is_err());
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn bad_parameters_are_config_errors() {
        assert!(matches!(unwrap_per_triangle(&tri_mesh(), 32, 1), Err(Error::Config(_))));
        assert!(matches!(unwrap_per_triangle(&tri_mesh(), 64, 0), Err(Error::Config(_))));
    }

    fn random_mesh(rng: &mut ChaCha8Rng, n: usize) -> TriangleMesh {
        let mut m = TriangleMesh::default();
        for i in 0..n as u32 {
            let o = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let s = rng.random_range(0.05..0.3);
            let mut v = || Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
            let (a, b) = (v(), v());
            if (a.cross(b)).norm() < 1e-3 * s * s {
                m.vertices.extend_from_slice(&[o, o + Vec3::new(s, 0.0, 0.0), o + Vec3::new(0.0, s, 0.0)]);
            } else {
                m.vertices.extend_from_slice(&[o, o + a, o + b]);
            }
            m.faces.push([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        m
    }

    #[test]
    fn similarity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_mesh(&mut rng, 300);
        let a = unwrap_per_triangle(&m, 512, 2).unwrap();
        let b = unwrap_per_triangle(&m, 512, 2).unwrap();
        assert_eq!(a, b);
        let ratio0 = a.placements[0].signed_area().abs() / m.triangle(0).area();
        for f in 0..m.faces.len() {
            let t = m.triangle(f);
            let want = angles3(t.v0, t.v1, t.v2);
            let got = angles2(&a.placements[f]);
            for k in 0..3 {
                assert!((want[k] - got[k]).abs() < 1e-6);
            }
            let ratio = a.placements[f].signed_area().abs() / t.area();
            assert!((ratio - ratio0).abs() <= 1e-9 * ratio0);
        }
    }

    #[test]
    fn ten_thousand_faces_do_not_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_mesh(&mut rng, 10_000);
        let a = unwrap_per_triangle(&m, 1024, 1).unwrap();
        let report = validate_atlas(&a, &m);
        assert!(report.is_valid(), "{:?}", report.overlapping_faces.first());
        // independent centre-rasterization check over the dilated footprints
        let r = a.resolution;
        let g = a.gutter as i64;
        let mut owner = vec![u32::MAX; (r * r) as usize];
        for (f, t) in a.placements.iter().enumerate() {
            let tx = [t.a, t.b, t.c].map(|p| p * r as f64);
            let (x0, x1) = minmax(tx.iter().map(|p| p.x));
            let (y0, y1) = minmax(tx.iter().map(|p| p.y));
            for ky in (y0.floor() as i64).max(0)..=(y1.ceil() as i64).min(r as i64 - 1) {
                for kx in (x0.floor() as i64).max(0)..=(x1.ceil() as i64).min(r as i64 - 1) {
                    let c = texel::center_uv(kx as u32, r - 1 - ky as u32, r, r);
                    if t.barycentric_of(c).min_weight() < 0.0 {
                        continue;
                    }
                    for dy in -g..=g {
                        for dx in -g..=g {
                            let (x, y) = (kx + dx, ky + dy);
                            if x < 0 || y < 0 || x >= r as i64 || y >= r as i64 {
                                continue;
                            }
                            let o = &mut owner[(y * r as i64 + x) as usize];
                            assert!(*o == u32::MAX || *o == f as u32, "faces {} and {f} overlap", *o);
                            *o = f as u32;
                        }
                    }
                }
            }
        }
    }
}
