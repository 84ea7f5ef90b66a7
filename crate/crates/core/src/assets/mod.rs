//! In-memory scene data and the file formats used to move it around.

mod image;
mod obj;
mod ply;

pub use self::image::{read_image, write_image};
pub use self::obj::{read_mesh, read_mesh_from, write_mesh, write_mesh_to};
pub use self::ply::{read_pointcloud, read_pointcloud_from, write_pointcloud, PlyEncoding};

use crate::error::{Error, Result};
use crate::{Triangle2, Triangle3, UnitVec3, Vec2, Vec3};

/// 8-bit RGB triple.
pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub normal: UnitVec3,
    pub color: Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn of_points(mut it: impl Iterator<Item = Vec3>) -> Option<Self> {
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Some(Aabb { min, max })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<SurfacePoint>,
    pub bounds: Aabb,
    /// Points dropped on load because their normal had zero length.
    pub dropped_zero_normals: usize,
}

impl PointCloud {
    /// Builds a cloud from points, computing bounds. Fails on an empty set.
    pub fn new(points: Vec<SurfacePoint>) -> Result<Self> {
        let bounds = Aabb::of_points(points.iter().map(|p| p.position))
            .ok_or_else(|| Error::Config("point cloud is empty".into()))?;
        Ok(PointCloud {
            points,
            bounds,
            dropped_zero_normals: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reorders points along a Z-order curve over the bounding box so that
    /// spatial neighbours sit close in memory. Equal keys keep file order.
    pub fn sort_spatially(&mut self) {
        let ext = self.bounds.extent().to_array();
        let min = self.bounds.min.to_array();
        let scale = ext.map(|e| if e > 0.0 { ((1u64 << 21) - 1) as f64 / e } else { 0.0 });
        let mut keyed: Vec<(u64, u32)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let a = p.position.to_array();
                let q = [0, 1, 2].map(|k| (((a[k] - min[k]) * scale[k]) as u64).min((1 << 21) - 1));
                (spread_bits(q[0]) | spread_bits(q[1]) << 1 | spread_bits(q[2]) << 2, i as u32)
            })
            .collect();
        keyed.sort_unstable();
        let mut order: Vec<u32> = keyed.into_iter().map(|(_, i)| i).collect();
        // apply the permutation in place, one cycle at a time
        for start in 0..order.len() {
            if order[start] == u32::MAX {
                continue;
            }
            let first = self.points[start];
            let mut i = start;
            loop {
                let src = order[i] as usize;
                order[i] = u32::MAX;
                if src == start {
                    self.points[i] = first;
                    break;
                }
                self.points[i] = self.points[src];
                i = src;
            }
        }
    }
}

/// Spreads the low 21 bits of `v` so that bit k lands on bit 3k.
fn spread_bits(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | x << 32) & 0x1f00000000ffff;
    x = (x | x << 16) & 0x1f0000ff0000ff;
    x = (x | x << 8) & 0x100f00f00f00f00f;
    x = (x | x << 4) & 0x10c30c30c30c30c3;
    (x | x << 2) & 0x1249249249249249
}

/// Per-face-corner texture coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshUvs {
    pub coords: Vec<Vec2>,
    /// Indices into `coords`, one triple per face.
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Option<Vec<UnitVec3>>,
    pub colors: Option<Vec<Rgb>>,
    pub uvs: Option<MeshUvs>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        TriangleMesh {
            vertices,
            faces,
            ..Default::default()
        }
    }

    /// Checks index bounds, repeated indices, face count and attribute lengths.
    pub fn validate(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::Config("mesh has no faces".into()));
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(Error::Index {
                        line: 0,
                        index: i as i64,
                        count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace { face: fi });
            }
        }
        if self.normals.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Schema("vn".into()));
        }
        if self.colors.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Schema("vertex color".into()));
        }
        if let Some(uv) = &self.uvs {
            if uv.faces.len() != self.faces.len()
                || uv.faces.iter().flatten().any(|&i| i as usize >= uv.coords.len())
            {
                return Err(Error::Schema("vt".into()));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, face: usize) -> Triangle3 {
        let [a, b, c] = self.faces[face];
        Triangle3::new(
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        )
    }

    /// UV triangle of a face, if the mesh has texture coordinates.
    pub fn uv_triangle(&self, face: usize) -> Option<Triangle2> {
        let uv = self.uvs.as_ref()?;
        let [a, b, c] = uv.faces[face];
        Some(Triangle2::new(
            uv.coords[a as usize],
            uv.coords[b as usize],
            uv.coords[c as usize],
        ))
    }
}

/// A W×H image of 8-bit RGB texels with a coverage mask.
///
/// Row 0 is the top image row. Texture coordinate (0, 0) addresses the
/// bottom-left texel (V points up).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TexelGrid {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
    pub coverage: Vec<bool>,
}

impl TexelGrid {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        TexelGrid {
            width,
            height,
            data: vec![0; n * 3],
            coverage: vec![false; n],
        }
    }

    pub fn filled(width: u32, height: u32, rgb: Rgb) -> Self {
        let mut g = TexelGrid::new(width, height);
        for px in g.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    pub fn get(&self, col: u32, row: u32) -> Rgb {
        let i = self.index(col, row) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, col: u32, row: u32, rgb: Rgb) {
        let i = self.index(col, row) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn covered_count(&self) -> usize {
        self.coverage.iter().filter(|&&c| c).count()
    }
}

/// Texel-space conventions shared by the baker, renderer and atlas.
pub mod texel {
    use crate::Vec2;

    /// UV coordinate of the centre of texel (`col`, `row`).
    pub fn center_uv(col: u32, row: u32, width: u32, height: u32) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) / width as f64,
            1.0 - (row as f64 + 0.5) / height as f64,
        )
    }

    /// Converts UV to continuous texel coordinates (x right, y up from the bottom edge).
    pub fn uv_to_texel(uv: Vec2, width: u32, height: u32) -> Vec2 {
        Vec2::new(uv.x * width as f64, uv.y * height as f64)
    }

    /// Row index for a texel whose centre sits `k` rows above the bottom edge.
    pub fn row_from_bottom(k: u32, height: u32) -> u32 {
        height - 1 - k
    }
}
