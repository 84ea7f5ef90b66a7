//! Comparison bakers: vertex-only interpolation on the low mesh, and
//! transfer from a dense colored mesh.

use std::time::Instant;

use rayon::prelude::*;

use crate::assets::{texel, PointCloud, TexelGrid, TriangleMesh};
use crate::error::{Error, Result};
use crate::spatial::{FaceGrid, FaceScratch, UniformGrid};
use crate::transfer::{
    bake_with, dilate, encode_color, encode_normal, face_footprint, BakeConfig, BakeMode,
    BakeOutput, BakeStats, BakedTexel, FaceBake, FaceContext, VertexPayload,
};
use crate::{UnitVec3, Vec3};

/// Interpolates only the vertex payload across each face. Shares the
/// rasterization path of the point-transfer bake.
pub fn bake_lpm(mesh: &TriangleMesh, cloud: &PointCloud, cfg: &BakeConfig) -> Result<BakeOutput> {
    bake_with(mesh, cloud, None, cfg, BakeMode::VertexOnly)
}

pub fn bake_lpm_with_grid(
    mesh: &TriangleMesh,
    cloud: &PointCloud,
    grid: &UniformGrid,
    cfg: &BakeConfig,
) -> Result<BakeOutput> {
    bake_with(mesh, cloud, Some(grid), cfg, BakeMode::VertexOnly)
}

/// Vertex payload of `low`: its own colors and normals where present,
/// otherwise read off the closest points of `high`.
pub fn payload_from_mesh(low: &TriangleMesh, high: &TriangleMesh, grid: &FaceGrid) -> Result<VertexPayload> {
    let (hc, hn) = high_attributes(high)?;
    let mut scratch = FaceScratch::default();
    let mut colors = Vec::with_capacity(low.vertices.len());
    let mut normals = Vec::with_capacity(low.vertices.len());
    for &v in &low.vertices {
        let hit = grid
            .closest_point(v, &mut scratch)
            .ok_or_else(|| Error::Config("high mesh has no usable faces".into()))?;
        let (c, n) = interpolate_high(high, hc, hn, hit.face as usize, hit.bary.to_array());
        colors.push(c);
        normals.push(n.unwrap_or_else(UnitVec3::z_axis));
    }
    Ok(VertexPayload {
        colors: match &low.colors {
            Some(c) => c.iter().map(|c| c.map(f64::from)).collect(),
            None => colors,
        },
        normals: match &low.normals {
            Some(n) => n.clone(),
            None => normals,
        },
    })
}

fn high_attributes(high: &TriangleMesh) -> Result<(&[[u8; 3]], &[UnitVec3])> {
    let c = high.colors.as_deref().ok_or_else(|| Error::Schema("vertex colors on high mesh".into()))?;
    let n = high.normals.as_deref().ok_or_else(|| Error::Schema("vertex normals on high mesh".into()))?;
    Ok((c, n))
}

fn interpolate_high(
    high: &TriangleMesh,
    colors: &[[u8; 3]],
    normals: &[UnitVec3],
    face: usize,
    w: [f64; 3],
) -> ([f64; 3], Option<UnitVec3>) {
    let f = high.faces[face].map(|i| i as usize);
    let mut c = [0.0; 3];
    let mut n = Vec3::zero();
    for k in 0..3 {
        for ch in 0..3 {
            c[ch] += w[k] * colors[f[k]][ch] as f64;
        }
        n += normals[f[k]].get() * w[k];
    }
    (c, n.normalized())
}

/// Bakes `low`'s texture by looking up, for each covered texel, the closest
/// point on `high` and interpolating its vertex colors and normals. Texels
/// whose lookup lands farther than `d_max` take the low mesh's own vertex
/// payload instead and are counted in `fallback_texels`.
pub fn bake_from_mesh(high: &TriangleMesh, low: &TriangleMesh, cfg: &BakeConfig) -> Result<BakeOutput> {
    high_attributes(high)?;
    let grid = FaceGrid::build(high)?;
    let payload = payload_from_mesh(low, high, &grid)?;
    bake_from_mesh_with(high, &grid, low, &payload, cfg)
}

pub fn bake_from_mesh_with(
    high: &TriangleMesh,
    grid: &FaceGrid,
    low: &TriangleMesh,
    low_payload: &VertexPayload,
    cfg: &BakeConfig,
) -> Result<BakeOutput> {
    let start = Instant::now();
    cfg.validate()?;
    if low.uvs.is_none() {
        return Err(Error::MissingUVs);
    }
    low.validate()?;
    let (hc, hn) = high_attributes(high)?;
    let res = cfg.resolution;

    let faces: Vec<(FaceBake, usize)> = (0..low.faces.len())
        .into_par_iter()
        .map_init(FaceScratch::default, |scratch, f| -> Result<(FaceBake, usize)> {
            let ctx = FaceContext::new(low, f, low_payload, cfg)?;
            let tri = low.triangle(f);
            let mut out = FaceBake::default();
            let mut far = 0;
            for idx in face_footprint(&ctx.uv_tri, res, res) {
                let (col, row) = (idx % res, idx / res);
                let b = ctx.uv_tri.barycentric_of(texel::center_uv(col, row, res, res)).clamped();
                let w = b.to_array();
                let lo_color = {
                    let mut c = [0.0; 3];
                    for k in 0..3 {
                        for ch in 0..3 {
                            c[ch] += w[k] * ctx.corner_colors[k][ch];
                        }
                    }
                    c
                };
                let lo_normal = b
                    .blend3(ctx.corner_normals[0].get(), ctx.corner_normals[1].get(), ctx.corner_normals[2].get())
                    .normalized()
                    .unwrap_or(ctx.face_normal);
                let p = b.blend3(tri.v0, tri.v1, tri.v2);
                let hit = grid.closest_point(p, scratch).filter(|h| h.distance <= cfg.d_max);
                let (color, normal) = match hit {
                    Some(h) => {
                        let (c, n) = interpolate_high(high, hc, hn, h.face as usize, h.bary.to_array());
                        (c, n.unwrap_or(lo_normal))
                    }
                    None => {
                        far += 1;
                        (lo_color, lo_normal)
                    }
                };
                let normal = if cfg.bake_normals { normal } else { lo_normal };
                out.texels.push(BakedTexel {
                    index: idx,
                    color: encode_color(color),
                    normal: encode_normal(normal),
                });
            }
            Ok((out, far))
        })
        .collect::<Result<_>>()?;

    let mut texture = TexelGrid::new(res, res);
    let mut normal_map = TexelGrid::new(res, res);
    let mut stats = BakeStats {
        faces: low.faces.len(),
        ..Default::default()
    };
    for (bake, far) in &faces {
        bake.write_into(&mut texture, &mut normal_map);
        stats.fallback_texels += far;
    }
    stats.timings.bake_ms = start.elapsed().as_secs_f64() * 1e3;
    stats.covered_texels = texture.covered_count();
    let t = Instant::now();
    stats.dilated_texels = dilate(&mut texture, &mut normal_map, cfg.gutter);
    stats.timings.dilate_ms = t.elapsed().as_secs_f64() * 1e3;
    stats.timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(BakeOutput {
        texture,
        normal_map,
        stats,
    })
}
