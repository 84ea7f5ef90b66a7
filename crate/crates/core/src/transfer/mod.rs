//! Point-to-texture detail transfer: gather cloud points around each face,
//! map them into the face's UV triangle by barycentric coordinates,
//! triangulate the patch and rasterize it into the texture and normal maps.

mod patch;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use patch::{triangulate_patch, PatchTriangulation, SiteOrigin};

use crate::assets::{texel, write_image, PointCloud, Rgb, TexelGrid, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::normal_angle_deg;
use crate::spatial::{floor_i64, UniformGrid};
use crate::{Triangle2, Triangle3, TriangleQuery, UnitVec3, Vec2, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BakeConfig {
    /// Maximum point-to-triangle distance, scene units.
    pub d_max: f64,
    /// Maximum angle between point normal and face normal, degrees.
    pub angle_max_deg: f64,
    pub resolution: u32,
    pub gutter: u32,
    pub bake_normals: bool,
    /// Neighbours averaged for vertex colors and normals.
    pub vertex_attr_k: usize,
    /// Grid cell edge; derived from point density when absent.
    pub cell_size: Option<f64>,
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig {
            d_max: 4.0,
            angle_max_deg: 120.0,
            resolution: 1024,
            gutter: 2,
            bake_normals: true,
            vertex_attr_k: 8,
            cell_size: None,
        }
    }
}

impl BakeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return bad(format!("d_max must be positive, got {}", self.d_max));
        }
        if !(self.angle_max_deg > 0.0 && self.angle_max_deg <= 180.0) {
            return bad(format!("angle_max_deg must be in (0, 180], got {}", self.angle_max_deg));
        }
        if self.resolution < crate::atlas::MIN_RESOLUTION {
            return bad(format!("resolution must be at least 64, got {}", self.resolution));
        }
        if self.vertex_attr_k == 0 {
            return bad("vertex_attr_k must be at least 1".into());
        }
        if let Some(c) = self.cell_size {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("cell_size must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// Grid over `cloud` using `cell_size` or a density-derived default.
    pub fn build_grid(&self, cloud: &PointCloud) -> Result<UniformGrid> {
        let cell = self
            .cell_size
            .unwrap_or_else(|| UniformGrid::density_cell_size(cloud, 64.0));
        UniformGrid::build(cloud, cell)
    }
}

/// A cloud point carried into a face's UV triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub uv: Vec2,
    pub color: Rgb,
    pub normal: UnitVec3,
    pub source_index: u32,
}

/// Indices of every point within `d_max` of `t` whose normal is within
/// `angle_max_deg` of the face normal, ascending. Degenerate faces gather nothing.
pub fn gather_points(t: &Triangle3, cloud: &PointCloud, grid: &UniformGrid, cfg: &BakeConfig) -> Vec<u32> {
    let Ok(q) = TriangleQuery::new(*t) else {
        return Vec::new();
    };
    let mut out = gather_with(&q, cloud, grid, cfg);
    out.sort_unstable();
    out
}

/// `gather_points` in grid visiting order.
fn gather_with(q: &TriangleQuery, cloud: &PointCloud, grid: &UniformGrid, cfg: &BakeConfig) -> Vec<u32> {
    let n = q.normal();
    let v0 = q.triangle().v0;
    // cheap screens with a margin; anything near a threshold gets the exact test
    let cos_max = cfg.angle_max_deg.to_radians().cos();
    let slack = 1e-9 * (1.0 + cfg.d_max + v0.norm());
    let pass = |i: u32| {
        let p = &cloud.points[i as usize];
        if n.get().dot(p.position - v0).abs() > cfg.d_max + slack {
            return false;
        }
        let c = p.normal.dot(n);
        let angle_ok = if c > cos_max + 1e-9 {
            true
        } else if c < cos_max - 1e-9 {
            false
        } else {
            normal_angle_deg(p.normal, n) <= cfg.angle_max_deg
        };
        angle_ok && q.distance(p.position) <= cfg.d_max
    };
    let mut out = Vec::new();
    grid.visit_near_triangle(q.triangle(), cfg.d_max, |items| out.extend(items.iter().copied().filter(|&i| pass(i))));
    out
}

/// Maps gathered points into `uv_tri`. Points whose projection falls outside
/// `t` (a weight below −1e-9) are dropped; the rest are clamped onto the face.
pub fn map_points(t: &Triangle3, indices: &[u32], cloud: &PointCloud, uv_tri: &Triangle2) -> Vec<MappedPoint> {
    let Ok(q) = TriangleQuery::new(*t) else {
        return Vec::new();
    };
    map_with(&q, indices, cloud, uv_tri)
}

fn map_with(q: &TriangleQuery, indices: &[u32], cloud: &PointCloud, uv_tri: &Triangle2) -> Vec<MappedPoint> {
    indices
        .iter()
        .filter_map(|&i| {
            let p = &cloud.points[i as usize];
            let b = q.barycentric(p.position);
            b.is_inside().then(|| MappedPoint {
                uv: uv_tri.apply(b.clamped()),
                color: p.color,
                normal: p.normal,
                source_index: i,
            })
        })
        .collect()
}

/// Per-vertex color (0–255, unrounded) and unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPayload {
    pub colors: Vec<[f64; 3]>,
    pub normals: Vec<UnitVec3>,
}

/// Uses the mesh's own vertex colors and normals when present; otherwise
/// each vertex takes the inverse-distance-weighted mean of its
/// `vertex_attr_k` nearest cloud points. Coincident points, if any, are
/// averaged with equal weight instead.
pub fn compute_vertex_payload(
    mesh: &TriangleMesh,
    cloud: &PointCloud,
    grid: &UniformGrid,
    cfg: &BakeConfig,
) -> VertexPayload {
    let need = mesh.colors.is_none() || mesh.normals.is_none();
    let estimates: Vec<([f64; 3], UnitVec3)> = if need {
        mesh.vertices
            .par_iter()
            .map(|&v| idw(cloud, &grid.k_nearest(cloud, v, cfg.vertex_attr_k)))
            .collect()
    } else {
        Vec::new()
    };
    let colors = match &mesh.colors {
        Some(c) => c.iter().map(|c| c.map(|x| x as f64)).collect(),
        None => estimates.iter().map(|e| e.0).collect(),
    };
    let normals = match &mesh.normals {
        Some(n) => n.clone(),
        None => estimates.iter().map(|e| e.1).collect(),
    };
    VertexPayload { colors, normals }
}

fn idw(cloud: &PointCloud, nn: &[(f64, u32)]) -> ([f64; 3], UnitVec3) {
    let exact = nn.iter().take_while(|(d, _)| *d == 0.0).count();
    let weight = |d: f64| if exact > 0 { if d == 0.0 { 1.0 } else { 0.0 } } else { 1.0 / d };
    let mut c = [0.0; 3];
    let mut n = Vec3::zero();
    let mut wsum = 0.0;
    for &(d, i) in nn {
        let w = weight(d);
        let p = &cloud.points[i as usize];
        for k in 0..3 {
            c[k] += w * p.color[k] as f64;
        }
        n += p.normal.get() * w;
        wsum += w;
    }
    let c = c.map(|x| x / wsum);
    let nearest = cloud.points[nn[0].1 as usize].normal;
    (c, n.normalized().unwrap_or(nearest))
}

/// Everything `bake_face` needs about one face apart from its patch.
#[derive(Debug, Clone, Copy)]
pub struct FaceContext {
    pub uv_tri: Triangle2,
    pub corner_colors: [[f64; 3]; 3],
    pub corner_normals: [UnitVec3; 3],
    pub face_normal: UnitVec3,
    pub width: u32,
    pub height: u32,
    pub bake_normals: bool,
}

impl FaceContext {
    pub fn new(mesh: &TriangleMesh, face: usize, payload: &VertexPayload, cfg: &BakeConfig) -> Result<Self> {
        let uv_tri = mesh.uv_triangle(face).ok_or(Error::MissingUVs)?;
        let f = mesh.faces[face].map(|i| i as usize);
        let corner_normals = f.map(|i| payload.normals[i]);
        let face_normal = TriangleQuery::new(mesh.triangle(face))
            .map(|q| q.normal())
            .ok()
            .or_else(|| (corner_normals[0].get() + corner_normals[1].get() + corner_normals[2].get()).normalized())
            .unwrap_or_else(UnitVec3::z_axis);
        Ok(FaceContext {
            uv_tri,
            corner_colors: f.map(|i| payload.colors[i]),
            corner_normals,
            face_normal,
            width: cfg.resolution,
            height: cfg.resolution,
            bake_normals: cfg.bake_normals,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BakedTexel {
    /// Row-major texel index.
    pub index: u32,
    pub color: Rgb,
    pub normal: Rgb,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceBake {
    pub texels: Vec<BakedTexel>,
    /// Texels inside the face that no sub-triangle claimed.
    pub slivers: usize,
}

impl FaceBake {
    /// Writes texels not already covered by an earlier face.
    pub fn write_into(&self, texture: &mut TexelGrid, normal_map: &mut TexelGrid) {
        for t in &self.texels {
            let i = t.index as usize;
            if texture.coverage[i] {
                continue;
            }
            texture.data[3 * i..3 * i + 3].copy_from_slice(&t.color);
            normal_map.data[3 * i..3 * i + 3].copy_from_slice(&t.normal);
            texture.coverage[i] = true;
            normal_map.coverage[i] = true;
        }
    }
}

/// Object-space normal encoding, `round((n + 1) / 2 · 255)` per channel.
pub fn encode_normal(n: UnitVec3) -> Rgb {
    n.get().to_array().map(|c| ((c + 1.0) * 0.5 * 255.0).round().clamp(0.0, 255.0) as u8)
}

pub fn decode_normal(c: Rgb) -> Vec3 {
    let [x, y, z] = c.map(|v| v as f64 / 255.0 * 2.0 - 1.0);
    Vec3::new(x, y, z)
}

pub fn encode_color(c: [f64; 3]) -> Rgb {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

fn blend_normal(w: [f64; 3], n: [Vec3; 3], fallback: UnitVec3) -> UnitVec3 {
    (n[0] * w[0] + n[1] * w[1] + n[2] * w[2]).normalized().unwrap_or(fallback)
}

/// Rasterizes one face: each texel whose centre lies in the face's UV
/// triangle takes the interpolated payload of the first sub-triangle (in
/// index order) that contains it.
pub fn bake_face(ctx: &FaceContext, patch: &PatchTriangulation, mapped: &[MappedPoint]) -> FaceBake {
    let (w, h) = (ctx.width, ctx.height);
    let outer = [ctx.uv_tri.a, ctx.uv_tri.b, ctx.uv_tri.c];
    let sign = patch::orient(outer[0], outer[1], outer[2]);
    if sign == 0.0 {
        return FaceBake::default();
    }
    let in_face = |p: Vec2| (0..3).all(|i| patch::orient(outer[i], outer[(i + 1) % 3], p) * sign >= 0.0);

    let Some((c0, c1, r0, r1)) = texel_range(ctx.uv_tri.aabb(), w, h) else {
        return FaceBake::default();
    };

    let payload = |s: u32| -> ([f64; 3], Vec3) {
        match patch.origins[s as usize] {
            SiteOrigin::Corner(k) => (ctx.corner_colors[k as usize], ctx.corner_normals[k as usize].get()),
            SiteOrigin::Mapped(i) => {
                let m = &mapped[i as usize];
                (m.color.map(|x| x as f64), m.normal.get())
            }
        }
    };
    let vertex_normal = |p: Vec2| {
        let b = ctx.uv_tri.barycentric_of(p).clamped().to_array();
        blend_normal(b, ctx.corner_normals.map(|n| n.get()), ctx.face_normal)
    };
    let shade = |p: Vec2, sites: [u32; 3], sub: &Triangle2| -> (Rgb, Rgb) {
        let b = sub.barycentric_of(p).clamped().to_array();
        let pl = sites.map(payload);
        let mut col = [0.0; 3];
        for k in 0..3 {
            col[k] = b[0] * pl[0].0[k] + b[1] * pl[1].0[k] + b[2] * pl[2].0[k];
        }
        let n = if ctx.bake_normals {
            blend_normal(b, pl.map(|x| x.1), ctx.face_normal)
        } else {
            vertex_normal(p)
        };
        (encode_color(col), encode_normal(n))
    };

    let mut out = FaceBake::default();
    let mut row_hint = 0u32;
    for r in r0..=r1 {
        let mut hint = row_hint;
        let mut first = true;
        for col in c0..=c1 {
            let p = texel::center_uv(col, r, w, h);
            if !in_face(p) {
                continue;
            }
            let found = match walk(patch, hint, p) {
                Ok(t) => {
                    hint = t;
                    Some(t as usize)
                }
                Err(t) => {
                    hint = t;
                    first_containing(patch, p)
                }
            };
            if first {
                row_hint = hint;
                first = false;
            }
            let (color, normal) = match found {
                Some(t) => shade(p, patch.triangles[t], &patch.triangle(t)),
                None => {
                    let nearest = (0..patch.sites.len() as u32)
                        .min_by(|&x, &y| {
                            let dx = (patch.sites[x as usize] - p).norm();
                            let dy = (patch.sites[y as usize] - p).norm();
                            dx.total_cmp(&dy)
                        })
                        .unwrap();
                    let (color, n) = payload(nearest);
                    let normal = if ctx.bake_normals {
                        n.normalized().unwrap_or(ctx.face_normal)
                    } else {
                        vertex_normal(p)
                    };
                    out.slivers += 1;
                    (encode_color(color), encode_normal(normal))
                }
            };
            out.texels.push(BakedTexel {
                index: r * w + col,
                color,
                normal,
            });
        }
    }
    out
}

/// Visibility walk from sub-triangle `start` towards `p`. `Ok` when `p` is
/// strictly inside the triangle reached, which is then the only one holding
/// it; `Err` with the last triangle visited otherwise.
fn walk(patch: &PatchTriangulation, start: u32, p: Vec2) -> std::result::Result<u32, u32> {
    let mut t = start;
    for _ in 0..patch.triangles.len() + 8 {
        let v = patch.triangles[t as usize].map(|i| patch.sites[i as usize]);
        let mut on_edge = false;
        let mut next = None;
        for i in 0..3 {
            let o = patch::orient(v[(i + 1) % 3], v[(i + 2) % 3], p);
            if o < 0.0 {
                next = Some(i);
                break;
            }
            on_edge |= o == 0.0;
        }
        match next {
            Some(i) => match patch.neighbors[t as usize][i] {
                u32::MAX => return Err(t),
                u => t = u,
            },
            None if on_edge => return Err(t),
            None => return Ok(t),
        }
    }
    Err(t)
}

/// Lowest-index sub-triangle whose closed region holds `p`.
fn first_containing(patch: &PatchTriangulation, p: Vec2) -> Option<usize> {
    (0..patch.triangles.len()).find(|&k| {
        let t = patch.triangle(k);
        patch::orient(t.a, t.b, p) >= 0.0 && patch::orient(t.b, t.c, p) >= 0.0 && patch::orient(t.c, t.a, p) >= 0.0
    })
}

/// Row-major indices of texels whose centres lie in `uv_tri`, boundary
/// included. This is the footprint `bake_face` writes.
pub fn face_footprint(uv_tri: &Triangle2, w: u32, h: u32) -> Vec<u32> {
    let outer = [uv_tri.a, uv_tri.b, uv_tri.c];
    let sign = patch::orient(outer[0], outer[1], outer[2]);
    let mut out = Vec::new();
    if sign == 0.0 {
        return out;
    }
    let Some((c0, c1, r0, r1)) = texel_range(uv_tri.aabb(), w, h) else {
        return out;
    };
    for r in r0..=r1 {
        for c in c0..=c1 {
            let p = texel::center_uv(c, r, w, h);
            if (0..3).all(|i| patch::orient(outer[i], outer[(i + 1) % 3], p) * sign >= 0.0) {
                out.push(r * w + c);
            }
        }
    }
    out
}

/// Inclusive column/row range of texels whose centres may fall in the box,
/// padded by one texel; `None` when the box misses the image.
fn texel_range((lo, hi): (Vec2, Vec2), w: u32, h: u32) -> Option<(u32, u32, u32, u32)> {
    let c0 = floor_i64(lo.x * w as f64 - 0.5) as f64 - 1.0;
    let c1 = (hi.x * w as f64 - 0.5).ceil() + 1.0;
    let r0 = floor_i64((1.0 - hi.y) * h as f64 - 0.5) as f64 - 1.0;
    let r1 = ((1.0 - lo.y) * h as f64 - 0.5).ceil() + 1.0;
    if c1 < 0.0 || r1 < 0.0 || c0 > (w - 1) as f64 || r0 > (h - 1) as f64 {
        return None;
    }
    let cl = |v: f64, m: u32| v.clamp(0.0, (m - 1) as f64) as u32;
    Some((cl(c0, w), cl(c1, w), cl(r0, h), cl(r1, h)))
}

/// Stage timings in milliseconds. Per-face stages are summed over faces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub grid_ms: f64,
    pub vertex_payload_ms: f64,
    pub gather_ms: f64,
    pub map_ms: f64,
    pub triangulate_ms: f64,
    pub bake_ms: f64,
    pub dilate_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BakeStats {
    pub faces: usize,
    pub points_gathered: usize,
    pub points_outside: usize,
    /// Points that became triangulation sites.
    pub points_transferred: usize,
    pub duplicates: usize,
    pub sub_triangles: usize,
    pub covered_texels: usize,
    pub sliver_texels: usize,
    pub dilated_texels: usize,
    /// Texels filled from vertex payload because no source surface was near.
    pub fallback_texels: usize,
    /// Faces with no gathered points.
    pub empty_faces: usize,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BakeOutput {
    pub texture: TexelGrid,
    pub normal_map: TexelGrid,
    pub stats: BakeStats,
}

/// Whether faces receive cloud points or only their vertex payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BakeMode {
    PointTransfer,
    VertexOnly,
}

/// Full point-transfer bake; builds its own grid.
pub fn bake_all(mesh: &TriangleMesh, cloud: &PointCloud, cfg: &BakeConfig) -> Result<BakeOutput> {
    bake_with(mesh, cloud, None, cfg, BakeMode::PointTransfer)
}

#[derive(Default)]
struct FaceStats {
    gathered: usize,
    outside: usize,
    transferred: usize,
    duplicates: usize,
    sub_triangles: usize,
    gather: f64,
    map: f64,
    triangulate: f64,
    bake: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Shared driver for the point-transfer bake and the vertex-only baseline.
pub fn bake_with(
    mesh: &TriangleMesh,
    cloud: &PointCloud,
    grid: Option<&UniformGrid>,
    cfg: &BakeConfig,
    mode: BakeMode,
) -> Result<BakeOutput> {
    let start = Instant::now();
    cfg.validate()?;
    if mesh.uvs.is_none() {
        return Err(Error::MissingUVs);
    }
    mesh.validate()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = cfg.build_grid(cloud)?;
            &owned
        }
    };
    timings.grid_ms = ms(t);

    let t = Instant::now();
    let payload = compute_vertex_payload(mesh, cloud, grid, cfg);
    timings.vertex_payload_ms = ms(t);

    let dedupe_eps = 1e-3 / cfg.resolution as f64;
    let results: Vec<(FaceBake, FaceStats)> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|f| -> Result<(FaceBake, FaceStats)> {
            let ctx = FaceContext::new(mesh, f, &payload, cfg)?;
            let mut st = FaceStats::default();
            let query = TriangleQuery::new(mesh.triangle(f)).ok();
            let (gathered, mapped) = match (mode, query) {
                (BakeMode::PointTransfer, Some(q)) => {
                    let t = Instant::now();
                    let g = gather_with(&q, cloud, grid, cfg);
                    st.gather = ms(t);
                    let t = Instant::now();
                    let m = map_with(&q, &g, cloud, &ctx.uv_tri);
                    st.map = ms(t);
                    (g.len(), m)
                }
                _ => (0, Vec::new()),
            };
            let t = Instant::now();
            let patch = triangulate_patch(&ctx.uv_tri, &mapped, dedupe_eps);
            st.triangulate = ms(t);
            let t = Instant::now();
            let bake = bake_face(&ctx, &patch, &mapped);
            st.bake = ms(t);
            st.gathered = gathered;
            st.outside = gathered - mapped.len();
            st.transferred = patch.interior + patch.boundary;
            st.duplicates = patch.duplicates;
            st.sub_triangles = patch.triangles.len();
            Ok((bake, st))
        })
        .collect::<Result<_>>()?;

    let res = cfg.resolution;
    let mut texture = TexelGrid::new(res, res);
    let mut normal_map = TexelGrid::new(res, res);
    let mut stats = BakeStats {
        faces: mesh.faces.len(),
        ..Default::default()
    };
    for (bake, st) in &results {
        bake.write_into(&mut texture, &mut normal_map);
        stats.points_gathered += st.gathered;
        stats.points_outside += st.outside;
        stats.points_transferred += st.transferred;
        stats.duplicates += st.duplicates;
        stats.sub_triangles += st.sub_triangles;
        stats.sliver_texels += bake.slivers;
        stats.empty_faces += (st.gathered == 0) as usize;
        timings.gather_ms += st.gather;
        timings.map_ms += st.map;
        timings.triangulate_ms += st.triangulate;
        timings.bake_ms += st.bake;
    }
    drop(results);
    stats.covered_texels = texture.covered_count();

    let t = Instant::now();
    stats.dilated_texels = dilate(&mut texture, &mut normal_map, cfg.gutter);
    timings.dilate_ms = ms(t);
    timings.total_ms = ms(start);
    stats.timings = timings;
    Ok(BakeOutput {
        texture,
        normal_map,
        stats,
    })
}

/// Fills every uncovered texel within `gutter` texels (chessboard distance)
/// of a covered one with the value of its nearest covered texel; ties go to
/// the earlier texel in row-major order. Both maps use the same source
/// texel. Coverage masks are left as baked. Returns the number filled.
pub fn dilate(texture: &mut TexelGrid, normal_map: &mut TexelGrid, gutter: u32) -> usize {
    let (w, h) = (texture.width as i64, texture.height as i64);
    let g = gutter as i64;
    if g == 0 {
        return 0;
    }
    let cov = &texture.coverage;
    let sources: Vec<(usize, usize)> = (0..h)
        .into_par_iter()
        .flat_map_iter(|r| {
            (0..w).filter_map(move |c| {
                let i = (r * w + c) as usize;
                if cov[i] {
                    return None;
                }
                let mut best: Option<(i64, usize)> = None;
                for rr in (r - g).max(0)..=(r + g).min(h - 1) {
                    for cc in (c - g).max(0)..=(c + g).min(w - 1) {
                        let j = (rr * w + cc) as usize;
                        if !cov[j] {
                            continue;
                        }
                        let d = (rr - r).pow(2) + (cc - c).pow(2);
                        if best.is_none_or(|(bd, bj)| (d, j) < (bd, bj)) {
                            best = Some((d, j));
                        }
                    }
                }
                best.map(|(_, j)| (i, j))
            })
        })
        .collect();
    for &(i, j) in &sources {
        texture.data.copy_within(3 * j..3 * j + 3, 3 * i);
        normal_map.data.copy_within(3 * j..3 * j + 3, 3 * i);
    }
    sources.len()
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Paths `<prefix>_albedo.png`, `<prefix>_normal.png`, `<prefix>_stats.json`.
pub fn output_paths(prefix: &Path) -> [PathBuf; 3] {
    [
        with_suffix(prefix, "_albedo.png"),
        with_suffix(prefix, "_normal.png"),
        with_suffix(prefix, "_stats.json"),
    ]
}

pub fn write_outputs(out: &BakeOutput, prefix: &Path) -> Result<[PathBuf; 3]> {
    let paths = output_paths(prefix);
    if let Some(dir) = paths[0].parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_image(&out.texture, &paths[0])?;
    write_image(&out.normal_map, &paths[1])?;
    let json = serde_json::to_string_pretty(&out.stats)?;
    std::fs::write(&paths[2], json).map_err(|e| Error::io(&paths[2], e))?;
    Ok(paths)
}
