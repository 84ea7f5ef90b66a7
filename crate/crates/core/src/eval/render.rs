//! Offscreen z-buffered software rasterizer with a single directional light.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assets::{TexelGrid, TriangleMesh};
use crate::error::{Error, Result};
use crate::synth::SceneKind;
use crate::{Barycentric, TriangleQuery, UnitVec3, Vec3};

pub const AMBIENT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: UnitVec3,
    pub vertical_fov_deg: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            position: Vec3::new(0.0, -3.0, 0.0),
            look_at: Vec3::zero(),
            up: UnitVec3::z_axis(),
            vertical_fov_deg: 45.0,
            width: 512,
            height: 512,
            near: 0.01,
            far: 100.0,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        self.basis().map(|_| ())
    }

    /// Right, up and forward unit vectors.
    fn basis(&self) -> Result<[Vec3; 3]> {
        let bad = |m: &str| Err(Error::Config(format!("camera: {m}")));
        if !(self.near > 0.0) || !(self.far > self.near) {
            return bad("need 0 < near < far");
        }
        if !(self.vertical_fov_deg > 0.0 && self.vertical_fov_deg < 180.0) {
            return bad("vertical fov must be in (0, 180)");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        let Some(f) = (self.look_at - self.position).normalized() else {
            return bad("position equals look_at");
        };
        let Some(r) = f.get().cross(self.up.get()).normalized() else {
            return bad("up is parallel to the view direction");
        };
        let u = r.get().cross(f.get());
        Ok([r.get(), u, f.get()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    /// Coverage marks pixels where geometry was drawn.
    pub color: TexelGrid,
    /// Camera-space depth, infinite where nothing was drawn.
    pub depth: Vec<f64>,
}

/// Supplies albedo (0–255 per channel) and a shading normal for a point on a face.
pub trait Surface: Sync {
    fn sample(&self, face: usize, bary: Barycentric) -> ([f64; 3], Vec3);
}

/// Bilinear lookup with clamp-to-edge; v points up.
pub fn sample_bilinear(img: &TexelGrid, u: f64, v: f64) -> [f64; 3] {
    let (w, h) = (img.width as i64, img.height as i64);
    let x = u * w as f64 - 0.5;
    let y = (1.0 - v) * h as f64 - 0.5;
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |xi: i64, yi: i64| {
        let c = img.get(xi.clamp(0, w - 1) as u32, yi.clamp(0, h - 1) as u32);
        c.map(|v| v as f64)
    };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let (a, b, c, d) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = a[k] + (b[k] - a[k]) * fx;
        let bot = c[k] + (d[k] - c[k]) * fx;
        out[k] = top + (bot - top) * fy;
    }
    out
}

fn face_normals(mesh: &TriangleMesh) -> Vec<Vec3> {
    (0..mesh.faces.len())
        .map(|f| TriangleQuery::new(mesh.triangle(f)).map(|q| q.normal().get()).unwrap_or(Vec3::new(0.0, 0.0, 1.0)))
        .collect()
}

fn vertex_normal(mesh: &TriangleMesh, face_n: &[Vec3], f: usize, b: Barycentric) -> Vec3 {
    match &mesh.normals {
        Some(ns) => {
            let [i, j, k] = mesh.faces[f].map(|i| ns[i as usize].get());
            b.blend3(i, j, k)
        }
        None => face_n[f],
    }
}

/// Texture-mapped mesh with an optional object-space normal map. Without a
/// normal map, vertex normals (or face normals) are used.
pub struct TexturedSurface<'a> {
    mesh: &'a TriangleMesh,
    texture: &'a TexelGrid,
    normal_map: Option<&'a TexelGrid>,
    face_n: Vec<Vec3>,
}

impl<'a> TexturedSurface<'a> {
    pub fn new(mesh: &'a TriangleMesh, texture: &'a TexelGrid, normal_map: Option<&'a TexelGrid>) -> Result<Self> {
        if mesh.uvs.is_none() {
            return Err(Error::MissingUVs);
        }
        Ok(TexturedSurface {
            mesh,
            texture,
            normal_map,
            face_n: face_normals(mesh),
        })
    }
}

impl Surface for TexturedSurface<'_> {
    fn sample(&self, face: usize, b: Barycentric) -> ([f64; 3], Vec3) {
        let uv = self.mesh.uv_triangle(face).unwrap().apply(b);
        let albedo = sample_bilinear(self.texture, uv.x, uv.y);
        let n = match self.normal_map {
            Some(nm) => {
                let c = sample_bilinear(nm, uv.x, uv.y);
                let e = c.map(|v| v / 255.0 * 2.0 - 1.0);
                Vec3::new(e[0], e[1], e[2])
            }
            None => vertex_normal(self.mesh, &self.face_n, face, b),
        };
        (albedo, n)
    }
}

/// Per-vertex colors and normals, interpolated across faces.
pub struct VertexColorSurface<'a> {
    mesh: &'a TriangleMesh,
    face_n: Vec<Vec3>,
}

impl<'a> VertexColorSurface<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        if mesh.colors.is_none() {
            return Err(Error::Schema("vertex colors".into()));
        }
        Ok(VertexColorSurface {
            mesh,
            face_n: face_normals(mesh),
        })
    }
}

impl Surface for VertexColorSurface<'_> {
    fn sample(&self, face: usize, b: Barycentric) -> ([f64; 3], Vec3) {
        let cs = self.mesh.colors.as_ref().unwrap();
        let [i, j, k] = self.mesh.faces[face].map(|i| cs[i as usize]);
        let w = b.to_array();
        let mut c = [0.0; 3];
        for ch in 0..3 {
            c[ch] = w[0] * i[ch] as f64 + w[1] * j[ch] as f64 + w[2] * k[ch] as f64;
        }
        (c, vertex_normal(self.mesh, &self.face_n, face, b))
    }
}

/// Ground-truth shading: each visible point of `mesh` is projected onto the
/// scene's analytic surface and takes the albedo and normal found there.
pub struct AnalyticSurface<'a> {
    mesh: &'a TriangleMesh,
    kind: SceneKind,
}

impl<'a> AnalyticSurface<'a> {
    pub fn new(mesh: &'a TriangleMesh, kind: SceneKind) -> Self {
        AnalyticSurface { mesh, kind }
    }
}

impl Surface for AnalyticSurface<'_> {
    fn sample(&self, face: usize, b: Barycentric) -> ([f64; 3], Vec3) {
        let t = self.mesh.triangle(face);
        let p = b.blend3(t.v0, t.v1, t.v2);
        let (q, n) = self.kind.project(p);
        (self.kind.albedo(q).map(|v| v as f64), n.get())
    }
}

/// `albedo · (0.2 + 0.8 · max(0, n · −light))`, rounded to 8 bits.
pub fn shade(albedo: [f64; 3], normal: Vec3, light_dir: UnitVec3) -> [u8; 3] {
    let n = normal.normalized().map(|n| n.get()).unwrap_or(Vec3::zero());
    let lambert = n.dot(-light_dir.get()).max(0.0);
    let k = AMBIENT + (1.0 - AMBIENT) * lambert;
    albedo.map(|a| (a * k).round().clamp(0.0, 255.0) as u8)
}

#[derive(Clone, Copy)]
struct ScreenTri {
    face: u32,
    xy: [[f64; 2]; 3],
    inv_z: [f64; 3],
    bary: [[f64; 3]; 3],
}

#[derive(Clone, Copy)]
struct ClipVert {
    cam: Vec3,
    bary: [f64; 3],
}

fn clip_near(poly: &[ClipVert; 3], near: f64) -> Vec<ClipVert> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = poly[i];
        let b = poly[(i + 1) % 3];
        let ina = a.cam.z >= near;
        let inb = b.cam.z >= near;
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (near - a.cam.z) / (b.cam.z - a.cam.z);
            let mut bary = [0.0; 3];
            for k in 0..3 {
                bary[k] = a.bary[k] + (b.bary[k] - a.bary[k]) * t;
            }
            let mut cam = a.cam + (b.cam - a.cam) * t;
            cam.z = near;
            out.push(ClipVert { cam, bary });
        }
    }
    out
}

fn project(mesh: &TriangleMesh, cam: &Camera) -> Result<Vec<ScreenTri>> {
    let [r, u, f] = cam.basis()?;
    let focal = cam.height as f64 * 0.5 / (cam.vertical_fov_deg.to_radians() * 0.5).tan();
    let (cx, cy) = (cam.width as f64 * 0.5, cam.height as f64 * 0.5);
    let to_cam = |p: Vec3| {
        let d = p - cam.position;
        Vec3::new(d.dot(r), d.dot(u), d.dot(f))
    };
    let cam_verts: Vec<Vec3> = mesh.vertices.iter().map(|&v| to_cam(v)).collect();
    let mut out = Vec::new();
    for (fi, face) in mesh.faces.iter().enumerate() {
        let vs = face.map(|i| cam_verts[i as usize]);
        if vs.iter().all(|v| v.z < cam.near) || vs.iter().all(|v| v.z > cam.far) {
            continue;
        }
        let poly = [
            ClipVert { cam: vs[0], bary: [1.0, 0.0, 0.0] },
            ClipVert { cam: vs[1], bary: [0.0, 1.0, 0.0] },
            ClipVert { cam: vs[2], bary: [0.0, 0.0, 1.0] },
        ];
        let clipped = clip_near(&poly, cam.near);
        let screen = |v: &ClipVert| [cx + focal * v.cam.x / v.cam.z, cy - focal * v.cam.y / v.cam.z];
        for k in 1..clipped.len().saturating_sub(1) {
            let tri = [clipped[0], clipped[k], clipped[k + 1]];
            out.push(ScreenTri {
                face: fi as u32,
                xy: tri.map(|v| screen(&v)),
                inv_z: tri.map(|v| 1.0 / v.cam.z),
                bary: tri.map(|v| v.bary),
            });
        }
    }
    Ok(out)
}

const BAND: usize = 16;

/// Rasterizes `mesh` through `surface`. Back faces are drawn; the nearest
/// fragment wins, and on exact depth ties the earlier face wins.
pub fn render_surface(mesh: &TriangleMesh, surface: &dyn Surface, cam: &Camera, light_dir: UnitVec3) -> Result<RenderedFrame> {
    let tris = project(mesh, cam)?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut color = TexelGrid::new(cam.width, cam.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut face_of = vec![u32::MAX; w * h];
    depth
        .par_chunks_mut(BAND * w)
        .zip(face_of.par_chunks_mut(BAND * w))
        .zip(color.data.par_chunks_mut(BAND * w * 3))
        .enumerate()
        .for_each(|(band, ((dep, fid), rgb))| {
            let y0 = band * BAND;
            let rows = dep.len() / w;
            for t in &tris {
                let ys = t.xy.map(|p| p[1]);
                let xs = t.xy.map(|p| p[0]);
                let ymin = ys[0].min(ys[1]).min(ys[2]);
                let ymax = ys[0].max(ys[1]).max(ys[2]);
                let xmin = xs[0].min(xs[1]).min(xs[2]);
                let xmax = xs[0].max(xs[1]).max(xs[2]);
                let r0 = ((ymin - 0.5).ceil().max(y0 as f64)) as i64;
                let r1 = ((ymax - 0.5).floor().min((y0 + rows) as f64 - 1.0)) as i64;
                let c0 = ((xmin - 0.5).ceil().max(0.0)) as i64;
                let c1 = ((xmax - 0.5).floor().min(w as f64 - 1.0)) as i64;
                if r0 > r1 || c0 > c1 {
                    continue;
                }
                let [a, b, c] = t.xy;
                let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if area == 0.0 {
                    continue;
                }
                let edge = |p: [f64; 2], q: [f64; 2], x: f64, y: f64| (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]);
                for row in r0..=r1 {
                    let y = row as f64 + 0.5;
                    for col in c0..=c1 {
                        let x = col as f64 + 0.5;
                        let l0 = edge(b, c, x, y) / area;
                        let l1 = edge(c, a, x, y) / area;
                        let l2 = edge(a, b, x, y) / area;
                        if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                            continue;
                        }
                        let iz = l0 * t.inv_z[0] + l1 * t.inv_z[1] + l2 * t.inv_z[2];
                        if !(iz > 0.0) {
                            continue;
                        }
                        let z = 1.0 / iz;
                        let li = (row as usize - y0) * w + col as usize;
                        if z < cam.near || z > cam.far || z >= dep[li] {
                            continue;
                        }
                        dep[li] = z;
                        fid[li] = t.face;
                        let mut bw = [0.0; 3];
                        for k in 0..3 {
                            bw[k] = (l0 * t.inv_z[0] * t.bary[0][k]
                                + l1 * t.inv_z[1] * t.bary[1][k]
                                + l2 * t.inv_z[2] * t.bary[2][k])
                                * z;
                        }
                        let (albedo, n) = surface.sample(t.face as usize, Barycentric::new(bw[0], bw[1], bw[2]));
                        rgb[3 * li..3 * li + 3].copy_from_slice(&shade(albedo, n, light_dir));
                    }
                }
            }
        });
    for (i, f) in face_of.iter().enumerate() {
        color.coverage[i] = *f != u32::MAX;
    }
    Ok(RenderedFrame { color, depth })
}

/// Renders a textured mesh, optionally with an object-space normal map.
pub fn render(
    mesh: &TriangleMesh,
    texture: &TexelGrid,
    normal_map: Option<&TexelGrid>,
    cam: &Camera,
    light_dir: UnitVec3,
) -> Result<RenderedFrame> {
    let s = TexturedSurface::new(mesh, texture, normal_map)?;
    render_surface(mesh, &s, cam, light_dir)
}
