//! Wavefront OBJ triangle meshes with optional vertex colors (`v x y z r g b`),
//! per-vertex normals and per-corner texture coordinates.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{MeshUvs, Rgb, TriangleMesh};
use crate::error::{Error, Result};
use crate::{Vec2, Vec3};

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mesh_from(BufReader::with_capacity(1 << 20, f))
}

#[derive(Clone, Copy)]
struct Corner {
    v: i64,
    vt: Option<i64>,
    vn: Option<i64>,
}

fn parse_corner(tok: &str, line: usize) -> Result<Corner> {
    let bad = || Error::Parse {
        line,
        message: format!("bad face reference `{tok}`"),
    };
    let mut parts = tok.split('/');
    let v = parts.next().ok_or_else(bad)?.parse::<i64>().map_err(|_| bad())?;
    let opt = |s: Option<&str>| -> Result<Option<i64>> {
        match s {
            None | Some("") => Ok(None),
            Some(s) => s.parse::<i64>().map(Some).map_err(|_| bad()),
        }
    };
    let vt = opt(parts.next())?;
    let vn = opt(parts.next())?;
    Ok(Corner { v, vt, vn })
}

/// Resolves a 1-based (or negative, relative) OBJ index.
fn resolve(idx: i64, count: usize, line: usize) -> Result<u32> {
    let r = if idx > 0 {
        idx - 1
    } else if idx < 0 {
        count as i64 + idx
    } else {
        -1
    };
    if r < 0 || r >= count as i64 {
        return Err(Error::Index {
            line,
            index: idx,
            count,
        });
    }
    Ok(r as u32)
}

fn floats(toks: &[&str], line: usize) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("bad number `{t}`"),
                })
        })
        .collect()
}

fn color_channel(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn read_mesh_from<R: BufRead>(r: R) -> Result<TriangleMesh> {
    let mut positions = Vec::new();
    let mut colors: Vec<Option<Rgb>> = Vec::new();
    let mut normals = Vec::new();
    let mut texcoords = Vec::new();
    let mut faces: Vec<([Corner; 3], usize)> = Vec::new();

    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<obj>", e))?;
        let line = line.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some((&kw, rest)) = toks.split_first() else {
            continue;
        };
        match kw {
            "v" => {
                let v = floats(rest, line_no)?;
                if v.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "vertex needs 3 coordinates".into(),
                    });
                }
                positions.push(Vec3::new(v[0], v[1], v[2]));
                colors.push((v.len() >= 6).then(|| {
                    [color_channel(v[3]), color_channel(v[4]), color_channel(v[5])]
                }));
            }
            "vn" => {
                let v = floats(rest, line_no)?;
                if v.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "normal needs 3 components".into(),
                    });
                }
                normals.push(Vec3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                let v = floats(rest, line_no)?;
                if v.len() < 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "texture coordinate needs 2 components".into(),
                    });
                }
                texcoords.push(Vec2::new(v[0], v[1]));
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(Error::NonTriangleFace {
                        line: line_no,
                        vertices: rest.len(),
                    });
                }
                let mut c = [Corner { v: 0, vt: None, vn: None }; 3];
                for (k, t) in rest.iter().enumerate() {
                    c[k] = parse_corner(t, line_no)?;
                    // relative indices refer to what has been read so far
                    if c[k].v < 0 {
                        c[k].v = resolve(c[k].v, positions.len(), line_no)? as i64 + 1;
                    }
                    if let Some(t) = c[k].vt.filter(|&t| t < 0) {
                        c[k].vt = Some(resolve(t, texcoords.len(), line_no)? as i64 + 1);
                    }
                    if let Some(n) = c[k].vn.filter(|&n| n < 0) {
                        c[k].vn = Some(resolve(n, normals.len(), line_no)? as i64 + 1);
                    }
                }
                faces.push((c, line_no));
            }
            _ => {}
        }
    }

    let nv = positions.len();
    let mut mesh_faces = Vec::with_capacity(faces.len());
    let with_vt = faces.iter().filter(|(c, _)| c.iter().all(|c| c.vt.is_some())).count();
    let with_vn = faces.iter().filter(|(c, _)| c.iter().all(|c| c.vn.is_some())).count();
    if with_vt != 0 && with_vt != faces.len() {
        return Err(Error::Schema("vt".into()));
    }
    if with_vn != 0 && with_vn != faces.len() {
        return Err(Error::Schema("vn".into()));
    }
    let mut uv_faces = Vec::new();
    // first normal referenced by each vertex, plus a running sum for conflicts
    let mut vn_first: Vec<Option<u32>> = vec![None; if with_vn > 0 { nv } else { 0 }];
    let mut vn_conflict = vec![false; vn_first.len()];
    let mut vn_sum = vec![Vec3::zero(); vn_first.len()];

    for (c, line) in &faces {
        let mut f = [0u32; 3];
        for k in 0..3 {
            f[k] = resolve(c[k].v, nv, *line)?;
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(Error::Parse {
                line: *line,
                message: "face repeats a vertex".into(),
            });
        }
        if with_vt > 0 {
            let mut t = [0u32; 3];
            for k in 0..3 {
                t[k] = resolve(c[k].vt.unwrap(), texcoords.len(), *line)?;
            }
            uv_faces.push(t);
        }
        if with_vn > 0 {
            for k in 0..3 {
                let n = resolve(c[k].vn.unwrap(), normals.len(), *line)?;
                let vi = f[k] as usize;
                match vn_first[vi] {
                    None => vn_first[vi] = Some(n),
                    Some(m) if m != n => vn_conflict[vi] = true,
                    _ => {}
                }
                vn_sum[vi] += normals[n as usize];
            }
        }
        mesh_faces.push(f);
    }

    let vertex_normals = if with_vn > 0 {
        let mut out = Vec::with_capacity(nv);
        for vi in 0..nv {
            let v = match (vn_first[vi], vn_conflict[vi]) {
                (Some(n), false) => normals[n as usize],
                (Some(_), true) => vn_sum[vi],
                (None, _) if normals.len() == nv => normals[vi],
                (None, _) => Vec3::new(0.0, 0.0, 1.0),
            };
            out.push(v.normalized().ok_or_else(|| Error::Schema("vn".into()))?);
        }
        Some(out)
    } else {
        None
    };

    let ncol = colors.iter().filter(|c| c.is_some()).count();
    let vertex_colors = if ncol == 0 {
        None
    } else if ncol == nv {
        Some(colors.into_iter().map(Option::unwrap).collect())
    } else {
        return Err(Error::Schema("vertex color".into()));
    };

    let mesh = TriangleMesh {
        vertices: positions,
        faces: mesh_faces,
        normals: vertex_normals,
        colors: vertex_colors,
        uvs: (with_vt > 0).then_some(MeshUvs {
            coords: texcoords,
            faces: uv_faces,
        }),
    };
    if mesh.faces.is_empty() {
        return Err(Error::Schema("f".into()));
    }
    Ok(mesh)
}

pub fn write_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, f);
    write_mesh_to(mesh, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Numbers are written in shortest round-trip form, so reading back gives
/// bit-identical coordinates.
pub fn write_mesh_to<W: Write>(mesh: &TriangleMesh, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "# {} vertices, {} faces", mesh.vertices.len(), mesh.faces.len())?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(c) => {
                let [r, g, b] = c[i].map(|x| x as f64 / 255.0);
                writeln!(w, "v {:?} {:?} {:?} {:?} {:?} {:?}", v.x, v.y, v.z, r, g, b)?
            }
            None => writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?,
        }
    }
    if let Some(ns) = &mesh.normals {
        for n in ns {
            let n = n.get();
            writeln!(w, "vn {:?} {:?} {:?}", n.x, n.y, n.z)?;
        }
    }
    if let Some(uv) = &mesh.uvs {
        for t in &uv.coords {
            writeln!(w, "vt {:?} {:?}", t.x, t.y)?;
        }
    }
    let has_n = mesh.normals.is_some();
    for (fi, f) in mesh.faces.iter().enumerate() {
        write!(w, "f")?;
        for k in 0..3 {
            let v = f[k] + 1;
            match (&mesh.uvs, has_n) {
                (Some(uv), true) => write!(w, " {v}/{}/{v}", uv.faces[fi][k] + 1)?,
                (Some(uv), false) => write!(w, " {v}/{}", uv.faces[fi][k] + 1)?,
                (None, true) => write!(w, " {v}//{v}")?,
                (None, false) => write!(w, " {v}")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<TriangleMesh> {
        read_mesh_from(s.as_bytes())
    }

    #[test]
    fn unit_right_triangle() {
        let m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert!(m.uvs.is_none() && m.normals.is_none() && m.colors.is_none());
    }

    #[test]
    fn quad_is_rejected_with_line_number() {
        let e = parse("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(e, Error::NonTriangleFace { line: 5, vertices: 4 }));
    }

    #[test]
    fn index_out_of_range() {
        let e = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(matches!(e, Error::Index { line: 4, index: 4, count: 3 }));
    }

    #[test]
    fn full_corner_references_and_colors() {
        let text = "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\n\
                    vn 0 0 2\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1/1 2/2/1 3/3/1\n";
        let m = parse(text).unwrap();
        assert_eq!(m.colors.as_ref().unwrap()[1], [0, 255, 0]);
        assert_eq!(m.normals.as_ref().unwrap()[2].get(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(m.uv_triangle(0).unwrap().b, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn negative_indices_are_relative() {
        let m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    fn arb_mesh() -> impl Strategy<Value = TriangleMesh> {
        (3usize..12, 1usize..10, any::<bool>(), any::<bool>(), any::<bool>()).prop_flat_map(
            |(nv, nf, col, nor, uv)| {
                let verts = proptest::collection::vec(
                    (-1e3..1e3f64, -1e3..1e3f64, -1e3..1e3f64),
                    nv,
                );
                let faces = proptest::collection::vec(
                    proptest::sample::subsequence((0..nv as u32).collect::<Vec<_>>(), 3),
                    nf,
                );
                let cols = proptest::collection::vec(any::<[u8; 3]>(), nv);
                let uvs = proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), nf * 3);
                (verts, faces, cols, uvs).prop_map(move |(v, f, c, t)| {
                    let mut m = TriangleMesh::new(
                        v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect(),
                        f.into_iter().map(|s| [s[0], s[2], s[1]]).collect(),
                    );
                    if col {
                        m.colors = Some(c);
                    }
                    if nor {
                        m.normals = Some(
                            m.vertices
                                .iter()
                                .map(|p| (*p + Vec3::new(0.0, 0.0, 1e4)).normalized().unwrap())
                                .collect(),
                        );
                    }
                    if uv {
                        m.uvs = Some(MeshUvs {
                            coords: t.into_iter().map(|(a, b)| Vec2::new(a, b)).collect(),
                            faces: (0..m.faces.len() as u32)
                                .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
                                .collect(),
                        });
                    }
                    m
                })
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn write_read_roundtrip(m in arb_mesh()) {
            let mut bytes = Vec::new();
            write_mesh_to(&m, &mut bytes).unwrap();
            let back = read_mesh_from(bytes.as_slice()).unwrap();
            prop_assert_eq!(&back.vertices, &m.vertices);
            prop_assert_eq!(&back.faces, &m.faces);
            prop_assert_eq!(&back.uvs, &m.uvs);
            prop_assert_eq!(&back.colors, &m.colors);
            if let (Some(a), Some(b)) = (&back.normals, &m.normals) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x.get() - y.get()).norm() < 1e-12);
                }
            } else {
                prop_assert_eq!(back.normals.is_some(), m.normals.is_some());
            }
        }
    }
}
