//! Procedural test scenes with known ground truth: a checkerboard plane, a
//! latitude-striped sphere and a three-step staircase wall.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assets::{write_mesh, write_pointcloud, PlyEncoding, PointCloud, Rgb, SurfacePoint, TriangleMesh};
use crate::error::{Error, Result};
use crate::eval::Camera;
use crate::manifest::{Reference, Scaling, SceneManifest};
use crate::transfer::BakeConfig;
use crate::{UnitVec3, Vec3};

/// Square size of the checker and stripe patterns, scene units.
pub const PATTERN_CELL: f64 = 0.125;

const STEP_RISE: f64 = 0.2;
const STEP_RUN: f64 = 1.0 / 3.0;

/// Paper-scale sizes the desk-scale scenes stand in for.
pub const FULL_SCALE_POINTS: u64 = 28_368_767;
pub const FULL_SCALE_FACES: u64 = 240_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    CheckerPlane,
    StripeSphere,
    StepWall,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::CheckerPlane, SceneKind::StripeSphere, SceneKind::StepWall];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::CheckerPlane => "checker-plane",
            SceneKind::StripeSphere => "stripe-sphere",
            SceneKind::StepWall => "step-wall",
        }
    }

    /// Analytic albedo at a point on (or near) the surface.
    pub fn albedo(self, p: Vec3) -> Rgb {
        match self {
            SceneKind::CheckerPlane => checker(p.x, p.y, [255, 255, 255], [0, 0, 0]),
            SceneKind::StripeSphere => {
                let band = (p.z / PATTERN_CELL).floor() as i64;
                if band.rem_euclid(2) == 0 { [220, 40, 40] } else { [240, 230, 200] }
            }
            SceneKind::StepWall => {
                let (seg, t) = nearest_segment(p);
                checker(STEPS[seg].s0 + t, p.y, [250, 200, 40], [40, 40, 120])
            }
        }
    }

    /// Closest point on the analytic surface and the surface normal there.
    pub fn project(self, p: Vec3) -> (Vec3, UnitVec3) {
        match self {
            SceneKind::CheckerPlane => (
                Vec3::new(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0), 0.0),
                UnitVec3::z_axis(),
            ),
            SceneKind::StripeSphere => match p.normalized() {
                Some(n) => (n.get(), n),
                None => (Vec3::new(0.0, 0.0, 1.0), UnitVec3::z_axis()),
            },
            SceneKind::StepWall => {
                let (seg, t) = nearest_segment(p);
                let s = &STEPS[seg];
                let q = Vec3::new(s.x + s.dx * t, p.y.clamp(0.0, 1.0), s.z + s.dz * t);
                (q, s.normal())
            }
        }
    }

    /// Bake settings suited to the scene at the given noise level.
    pub fn suggested_config(self, noise_sigma: f64) -> BakeConfig {
        let (d, res) = match self {
            SceneKind::CheckerPlane => (0.01, 512),
            SceneKind::StripeSphere => (0.05, 1024),
            SceneKind::StepWall => (0.02, 512),
        };
        BakeConfig {
            d_max: d + 3.0 * noise_sigma,
            resolution: res,
            gutter: 2,
            ..Default::default()
        }
    }

    pub fn cameras(self) -> Vec<Camera> {
        let cam = |pos: [f64; 3], at: [f64; 3]| Camera {
            position: Vec3::from_array(pos),
            look_at: Vec3::from_array(at),
            up: UnitVec3::z_axis(),
            vertical_fov_deg: 45.0,
            width: 256,
            height: 256,
            near: 0.01,
            far: 100.0,
        };
        match self {
            SceneKind::CheckerPlane => vec![
                cam([0.5, -0.9, 1.1], [0.5, 0.5, 0.0]),
                cam([1.6, 1.4, 0.9], [0.5, 0.5, 0.0]),
            ],
            SceneKind::StripeSphere => vec![cam([0.0, -3.2, 1.0], [0.0; 3]), cam([2.4, 1.8, -1.2], [0.0; 3])],
            SceneKind::StepWall => vec![
                cam([-1.3, -0.9, 1.4], [0.5, 0.5, 0.3]),
                cam([-0.8, 1.9, 1.0], [0.5, 0.5, 0.3]),
            ],
        }
    }

    pub fn light_dir() -> UnitVec3 {
        Vec3::new(-0.3, 0.5, -0.8).normalized().unwrap()
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scene kind `{s}` (expected checker-plane, stripe-sphere or step-wall)")))
    }
}

fn checker(s: f64, t: f64, a: Rgb, b: Rgb) -> Rgb {
    let k = (s / PATTERN_CELL).floor() as i64 + (t / PATTERN_CELL).floor() as i64;
    if k.rem_euclid(2) == 0 { a } else { b }
}

/// One straight piece of the staircase profile in the x–z plane, swept along y ∈ [0, 1].
struct Step {
    x: f64,
    z: f64,
    dx: f64,
    dz: f64,
    len: f64,
    /// Arc length of the profile at the start of this piece.
    s0: f64,
}

impl Step {
    fn normal(&self) -> UnitVec3 {
        // risers face −x, treads face +z
        if self.dx == 0.0 { -UnitVec3::x_axis() } else { UnitVec3::z_axis() }
    }

    fn at(&self, t: f64, y: f64) -> Vec3 {
        Vec3::new(self.x + self.dx * t, y, self.z + self.dz * t)
    }
}

const STEPS: [Step; 6] = {
    const fn riser(i: usize) -> Step {
        Step {
            x: STEP_RUN * i as f64,
            z: STEP_RISE * i as f64,
            dx: 0.0,
            dz: 1.0,
            len: STEP_RISE,
            s0: (STEP_RISE + STEP_RUN) * i as f64,
        }
    }
    const fn tread(i: usize) -> Step {
        Step {
            x: STEP_RUN * i as f64,
            z: STEP_RISE * (i + 1) as f64,
            dx: 1.0,
            dz: 0.0,
            len: STEP_RUN,
            s0: (STEP_RISE + STEP_RUN) * i as f64 + STEP_RISE,
        }
    }
    [riser(0), tread(0), riser(1), tread(1), riser(2), tread(2)]
};

/// Closest staircase piece to `p` in the x–z plane and the clamped parameter on it.
fn nearest_segment(p: Vec3) -> (usize, f64) {
    let mut best = (f64::INFINITY, 0, 0.0);
    for (i, s) in STEPS.iter().enumerate() {
        let t = ((p.x - s.x) * s.dx + (p.z - s.z) * s.dz).clamp(0.0, s.len);
        let d = (p.x - s.x - s.dx * t).powi(2) + (p.z - s.z - s.dz * t).powi(2);
        if d < best.0 {
            best = (d, i, t);
        }
    }
    (best.1, best.2)
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub kind: SceneKind,
    pub cloud: PointCloud,
    pub low: TriangleMesh,
    pub high: TriangleMesh,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Samples `point_count` points uniformly on the analytic surface, coloured
/// by the clean position and displaced along the normal by Gaussian noise
/// truncated at ±3σ. All randomness comes from ChaCha8 seeded with `seed`.
pub fn synth_scene(kind: SceneKind, point_count: usize, noise_sigma: f64, seed: u64) -> Result<SynthScene> {
    if point_count < 1000 {
        return Err(Error::Config(format!("point count must be at least 1000, got {point_count}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise must be non-negative, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_area: f64 = STEPS.iter().map(|s| s.len).sum();
    let mut points = Vec::with_capacity(point_count);
    for _ in 0..point_count {
        let (p, n) = match kind {
            SceneKind::CheckerPlane => (Vec3::new(rng.random(), rng.random(), 0.0), UnitVec3::z_axis()),
            SceneKind::StripeSphere => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = (1.0 - z * z).max(0.0).sqrt();
                let p = Vec3::new(r * phi.cos(), r * phi.sin(), z);
                (p, p.normalized().unwrap())
            }
            SceneKind::StepWall => {
                let mut a: f64 = rng.random::<f64>() * total_area;
                let mut idx = STEPS.len() - 1;
                for (i, s) in STEPS.iter().enumerate() {
                    if a < s.len {
                        idx = i;
                        break;
                    }
                    a -= s.len;
                }
                let s = &STEPS[idx];
                let t = rng.random::<f64>() * s.len;
                (s.at(t, rng.random()), s.normal())
            }
        };
        let color = kind.albedo(p);
        let offset = if noise_sigma > 0.0 { truncated_normal(&mut rng) * noise_sigma } else { 0.0 };
        points.push(SurfacePoint {
            position: p + n.get() * offset,
            normal: n,
            color,
        });
    }
    let cloud = PointCloud::new(points)?;
    let (low, mut high) = match kind {
        SceneKind::CheckerPlane => (grid_plane(1), grid_plane(64)),
        SceneKind::StripeSphere => (icosphere(2), icosphere(6)),
        SceneKind::StepWall => (staircase(1), staircase(16)),
    };
    let (colors, normals) = high
        .vertices
        .iter()
        .map(|&v| {
            let (q, n) = kind.project(v);
            (kind.albedo(q), n)
        })
        .unzip();
    high.colors = Some(colors);
    high.normals = Some(normals);
    Ok(SynthScene {
        kind,
        cloud,
        low,
        high,
        noise_sigma,
        seed,
    })
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        if x.abs() <= 3.0 {
            return x;
        }
    }
}

/// Unit square in z = 0 split into n×n cells of two triangles each.
fn grid_plane(n: u32) -> TriangleMesh {
    let mut verts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            verts.push(Vec3::new(i as f64 / n as f64, j as f64 / n as f64, 0.0));
        }
    }
    let id = |i: u32, j: u32| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(verts, faces)
}

/// Staircase with each piece split into n×n cells of two triangles.
fn staircase(n: u32) -> TriangleMesh {
    let mut mesh = TriangleMesh::default();
    for s in &STEPS {
        let base = mesh.vertices.len() as u32;
        for j in 0..=n {
            for i in 0..=n {
                mesh.vertices.push(s.at(s.len * i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let id = |i: u32, j: u32| base + j * (n + 1) + i;
        for j in 0..n {
            for i in 0..n {
                // winding chosen so the geometric normal matches Step::normal
                if s.dx == 0.0 {
                    mesh.faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                    mesh.faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                } else {
                    mesh.faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                    mesh.faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    mesh
}

/// Icosahedron subdivided `level` times with vertices pushed onto the unit sphere.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|a| Vec3::from_array(*a).normalized().unwrap().get())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (verts[a as usize] + verts[b as usize]) * 0.5;
                verts.push(m.normalized().unwrap().get());
                verts.len() as u32 - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut mesh = TriangleMesh::new(verts, faces);
    mesh.normals = Some(mesh.vertices.iter().map(|v| v.normalized().unwrap()).collect());
    mesh
}

/// Writes `cloud.ply`, `low.obj`, `high.obj` and `manifest.json` into `dir`.
pub fn write_scene(scene: &SynthScene, dir: &Path) -> Result<SceneManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_pointcloud(&scene.cloud, dir.join("cloud.ply"), PlyEncoding::BinaryLittleEndian)?;
    let mut low = scene.low.clone();
    low.normals = None;
    write_mesh(&low, dir.join("low.obj"))?;
    write_mesh(&scene.high, dir.join("high.obj"))?;
    let manifest = SceneManifest {
        scene: Some(scene.kind),
        cloud: "cloud.ply".into(),
        low_mesh: "low.obj".into(),
        high_mesh: Some("high.obj".into()),
        cameras: scene.kind.cameras(),
        reference: Reference::Analytic,
        cfg: scene.kind.suggested_config(scene.noise_sigma),
        light_dir: SceneKind::light_dir(),
        point_count: scene.cloud.len(),
        noise_sigma: scene.noise_sigma,
        seed: scene.seed,
        scaling: Scaling {
            points_factor: FULL_SCALE_POINTS as f64 / scene.cloud.len() as f64,
            faces_factor: FULL_SCALE_FACES as f64 / scene.low.faces.len() as f64,
        },
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_plane_colors_match_checker() {
        let s = synth_scene(SceneKind::CheckerPlane, 5000, 0.0, 1).unwrap();
        for p in &s.cloud.points {
            assert_eq!(p.position.z, 0.0);
            assert_eq!(p.color, SceneKind::CheckerPlane.albedo(p.position));
        }
        assert_eq!(s.low.faces.len(), 2);
        assert!(s.high.faces.len() >= 200);
    }

    #[test]
    fn sphere_radius_within_three_sigma() {
        let sigma = 0.01;
        let s = synth_scene(SceneKind::StripeSphere, 20_000, sigma, 2).unwrap();
        let mut sum = 0.0;
        for p in &s.cloud.points {
            let r = p.position.norm();
            assert!((r - 1.0).abs() <= 3.0 * sigma + 1e-12);
            sum += (r - 1.0).powi(2);
        }
        // truncation at 3σ scales the variance by about 0.973
        let sd = (sum / s.cloud.len() as f64).sqrt();
        assert!((sd / sigma - 0.986).abs() < 0.03, "{sd}");
        assert_eq!(s.low.faces.len(), 320);
        assert_eq!(s.high.faces.len(), 81_920);
    }

    #[test]
    fn wall_geometry() {
        let s = synth_scene(SceneKind::StepWall, 2000, 0.0, 3).unwrap();
        assert_eq!(s.low.faces.len(), 12);
        assert!(s.high.faces.len() >= 1200);
        for f in 0..s.low.faces.len() {
            let t = s.low.triangle(f);
            let n = crate::geometry::triangle_normal(&t).unwrap();
            let (_, want) = SceneKind::StepWall.project(t.centroid());
            assert!(n.dot(want) > 0.999, "face {f}");
        }
        for p in &s.cloud.points {
            let (q, _) = SceneKind::StepWall.project(p.position);
            assert!((q - p.position).norm() < 1e-12);
        }
    }

    #[test]
    fn seed_fixes_everything() {
        let a = synth_scene(SceneKind::StepWall, 3000, 0.01, 9).unwrap();
        let b = synth_scene(SceneKind::StepWall, 3000, 0.01, 9).unwrap();
        let c = synth_scene(SceneKind::StepWall, 3000, 0.01, 10).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_ne!(a.cloud, c.cloud);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_scene(&a, d1.path()).unwrap();
        write_scene(&b, d2.path()).unwrap();
        for f in ["cloud.ply", "low.obj", "high.obj", "manifest.json"] {
            assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(matches!("torus".parse::<SceneKind>(), Err(Error::Config(_))));
        assert!(matches!(synth_scene(SceneKind::CheckerPlane, 999, 0.0, 0), Err(Error::Config(_))));
        assert!(matches!(synth_scene(SceneKind::CheckerPlane, 1000, -1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn icosphere_is_closed_and_outward() {
        let m = icosphere(2);
        assert_eq!(m.vertices.len(), 162);
        for f in 0..m.faces.len() {
            let t = m.triangle(f);
            let n = crate::geometry::triangle_normal(&t).unwrap();
            assert!(n.get().dot(t.centroid()) > 0.0);
        }
    }
}
