//! PLY point clouds: `vertex` element with x y z, nx ny nz (float or double)
//! and red green blue (uchar). ASCII and binary little-endian payloads.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{Aabb, PointCloud, SurfacePoint};
use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    lines: usize,
}

fn read_line<R: BufRead>(r: &mut R, buf: &mut Vec<u8>) -> Result<bool> {
    buf.clear();
    let n = r
        .read_until(b'\n', buf)
        .map_err(|e| Error::io("<ply>", e))?;
    Ok(n > 0)
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut buf = Vec::new();
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let parse_err = |line: usize, m: &str| Error::Parse {
        line,
        message: m.to_string(),
    };
    loop {
        if !read_line(r, &mut buf)? {
            return Err(Error::TruncatedFile("header ended before end_header".into()));
        }
        line_no += 1;
        let text = String::from_utf8_lossy(&buf);
        let toks: Vec<&str> = text.split_whitespace().collect();
        if line_no == 1 {
            if toks.first() != Some(&"ply") {
                return Err(Error::UnsupportedFormat("missing `ply` magic".into()));
            }
            continue;
        }
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _ver] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(Error::UnsupportedFormat(format!("PLY encoding `{other}`")))
                    }
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", ct, it, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                let count =
                    Scalar::parse(ct).ok_or_else(|| parse_err(line_no, "bad list count type"))?;
                let item =
                    Scalar::parse(it).ok_or_else(|| parse_err(line_no, "bad list item type"))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| parse_err(line_no, "bad property type"))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::Scalar(ty),
                });
            }
            ["end_header"] => break,
            _ => return Err(parse_err(line_no, "unrecognized header line")),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Schema("format".into()))?;
    Ok(Header {
        encoding,
        elements,
        lines: line_no,
    })
}

/// Column layout of the properties this reader needs.
struct VertexLayout {
    /// (offset in bytes, type) for x y z nx ny nz red green blue.
    fields: [(usize, Scalar); 9],
    /// Token index of each field for ASCII input.
    columns: [usize; 9],
    record_size: usize,
    ncols: usize,
}

const REQUIRED: [&str; 9] = ["x", "y", "z", "nx", "ny", "nz", "red", "green", "blue"];

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let mut offsets = Vec::with_capacity(el.props.len());
    let mut off = 0;
    for p in &el.props {
        match p.kind {
            PropKind::Scalar(s) => {
                offsets.push((off, s));
                off += s.size();
            }
            PropKind::List { .. } => {
                return Err(Error::UnsupportedFormat(format!(
                    "list property `{}` in vertex element",
                    p.name
                )))
            }
        }
    }
    let mut fields = [(0, Scalar::U8); 9];
    let mut columns = [0; 9];
    for (k, req) in REQUIRED.iter().enumerate() {
        let idx = el
            .props
            .iter()
            .position(|p| p.name == *req)
            .ok_or_else(|| Error::Schema(req.to_string()))?;
        let (o, ty) = offsets[idx];
        let ok = if k < 6 { ty.is_float() } else { ty == Scalar::U8 };
        if !ok {
            return Err(Error::Schema(req.to_string()));
        }
        fields[k] = (o, ty);
        columns[k] = idx;
    }
    Ok(VertexLayout {
        fields,
        columns,
        record_size: off,
        ncols: el.props.len(),
    })
}

fn truncated(expected: usize, got: usize, what: &str) -> Error {
    Error::TruncatedFile(format!("expected {expected} {what} records, found {got}"))
}

fn skip_element<R: BufRead>(r: &mut R, el: &Element, enc: PlyEncoding) -> Result<()> {
    let mut buf = Vec::new();
    match enc {
        PlyEncoding::Ascii => {
            for i in 0..el.count {
                if !read_line(r, &mut buf)? {
                    return Err(truncated(el.count, i, &el.name));
                }
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            for i in 0..el.count {
                for p in &el.props {
                    let n = match p.kind {
                        PropKind::Scalar(s) => s.size(),
                        PropKind::List { count, item } => {
                            buf.resize(count.size(), 0);
                            read_exact(r, &mut buf).map_err(|_| truncated(el.count, i, &el.name))?;
                            count.decode_le(&buf) as usize * item.size()
                        }
                    };
                    buf.resize(n, 0);
                    read_exact(r, &mut buf).map_err(|_| truncated(el.count, i, &el.name))?;
                }
            }
        }
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<()> {
    r.read_exact(buf)
}

fn make_point(v: [f64; 9]) -> Option<SurfacePoint> {
    let normal = Vec3::new(v[3], v[4], v[5]).normalized()?;
    Some(SurfacePoint {
        position: Vec3::new(v[0], v[1], v[2]),
        normal,
        color: [v[6] as u8, v[7] as u8, v[8] as u8],
    })
}

/// Reads a point cloud from a PLY file.
pub fn read_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pointcloud_from(BufReader::with_capacity(1 << 20, f))
}

pub fn read_pointcloud_from<R: BufRead>(mut r: R) -> Result<PointCloud> {
    let header = parse_header(&mut r)?;
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::Schema("vertex".into()))?;
    for el in &header.elements[..vi] {
        skip_element(&mut r, el, header.encoding)?;
    }
    let el = &header.elements[vi];
    let layout = vertex_layout(el)?;
    let mut points = Vec::with_capacity(el.count);
    let mut dropped = 0;

    match header.encoding {
        PlyEncoding::BinaryLittleEndian => {
            const CHUNK: usize = 4096;
            let mut buf = vec![0u8; layout.record_size * CHUNK];
            let mut done = 0;
            while done < el.count {
                let n = (el.count - done).min(CHUNK);
                let bytes = &mut buf[..n * layout.record_size];
                if let Err(e) = r.read_exact(bytes) {
                    if e.kind() == ErrorKind::UnexpectedEof {
                        return Err(truncated(el.count, done, "vertex"));
                    }
                    return Err(Error::io("<ply>", e));
                }
                for rec in bytes.chunks_exact(layout.record_size) {
                    let mut v = [0.0; 9];
                    for (k, &(o, ty)) in layout.fields.iter().enumerate() {
                        v[k] = ty.decode_le(&rec[o..]);
                    }
                    check_finite(&v, header.lines + 1)?;
                    match make_point(v) {
                        Some(p) => points.push(p),
                        None => dropped += 1,
                    }
                }
                done += n;
            }
        }
        PlyEncoding::Ascii => {
            let mut buf = Vec::new();
            for i in 0..el.count {
                let line = header.lines + i + 1;
                if !read_line(&mut r, &mut buf)? {
                    return Err(truncated(el.count, i, "vertex"));
                }
                let text = std::str::from_utf8(&buf).map_err(|_| Error::Parse {
                    line,
                    message: "invalid UTF-8".into(),
                })?;
                let toks: Vec<&str> = text.split_whitespace().collect();
                if toks.is_empty() {
                    return Err(truncated(el.count, i, "vertex"));
                }
                if toks.len() < layout.ncols {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {} values, found {}", layout.ncols, toks.len()),
                    });
                }
                let mut v = [0.0; 9];
                for (k, &col) in layout.columns.iter().enumerate() {
                    let t = toks[col];
                    v[k] = if k < 6 {
                        t.parse::<f64>().ok()
                    } else {
                        t.parse::<u8>().ok().map(f64::from)
                    }
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("bad value `{t}` for `{}`", REQUIRED[k]),
                    })?;
                }
                check_finite(&v, line)?;
                match make_point(v) {
                    Some(p) => points.push(p),
                    None => dropped += 1,
                }
            }
        }
    }

    let bounds = Aabb::of_points(points.iter().map(|p| p.position)).unwrap_or(Aabb {
        min: Vec3::zero(),
        max: Vec3::zero(),
    });
    Ok(PointCloud {
        points,
        bounds,
        dropped_zero_normals: dropped,
    })
}

fn check_finite(v: &[f64; 9], line: usize) -> Result<()> {
    if v[..3].iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Parse {
            line,
            message: "non-finite vertex position".into(),
        })
    }
}

/// Writes x y z nx ny nz as doubles and red green blue as uchar.
pub fn write_pointcloud(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    encoding: PlyEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, f);
    write_pointcloud_to(cloud, &mut w, encoding).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_pointcloud_to<W: Write>(
    cloud: &PointCloud,
    w: &mut W,
    encoding: PlyEncoding,
) -> std::io::Result<()> {
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt} 1.0")?;
    writeln!(w, "element vertex {}", cloud.points.len())?;
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        writeln!(w, "property double {p}")?;
    }
    for p in ["red", "green", "blue"] {
        writeln!(w, "property uchar {p}")?;
    }
    writeln!(w, "end_header")?;
    for p in &cloud.points {
        let n = p.normal.get();
        let vals = [p.position.x, p.position.y, p.position.z, n.x, n.y, n.z];
        match encoding {
            PlyEncoding::Ascii => {
                writeln!(
                    w,
                    "{:?} {:?} {:?} {:?} {:?} {:?} {} {} {}",
                    vals[0], vals[1], vals[2], vals[3], vals[4], vals[5],
                    p.color[0], p.color[1], p.color[2]
                )?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in vals {
                    w.write_all(&v.to_le_bytes())?;
                }
                w.write_all(&p.color)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::UnitVec3;

    fn parse(bytes: &[u8]) -> Result<PointCloud> {
        read_pointcloud_from(bytes)
    }

    const ASCII_ONE: &str = "ply\nformat ascii 1.0\nelement vertex 1\n\
        property float x\nproperty float y\nproperty float z\n\
        property float nx\nproperty float ny\nproperty float nz\n\
        property uchar red\nproperty uchar green\nproperty uchar blue\n\
        end_header\n0 0 0 0 0 1 255 0 0\n";

    #[test]
    fn single_ascii_point() {
        let c = parse(ASCII_ONE.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        let p = c.points[0];
        assert_eq!(p.position, Vec3::zero());
        assert_eq!(p.normal.get(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(p.color, [255, 0, 0]);
        assert_eq!(c.bounds.min, Vec3::zero());
    }

    #[test]
    fn missing_normal_property_is_a_schema_error() {
        let text = ASCII_ONE.replace("property float nx\n", "");
        match parse(text.as_bytes()) {
            Err(Error::Schema(p)) => assert_eq!(p, "nx"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integer_position_is_rejected() {
        let text = ASCII_ONE.replace("property float y\n", "property int y\n");
        assert!(matches!(parse(text.as_bytes()), Err(Error::Schema(p)) if p == "y"));
    }

    fn binary_cloud(n: usize) -> PointCloud {
        let points = (0..n)
            .map(|i| SurfacePoint {
                position: Vec3::new(i as f64, 0.5 * i as f64, -1.25),
                normal: UnitVec3::z_axis(),
                color: [i as u8, 2, 3],
            })
            .collect();
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn binary_truncation_is_detected() {
        let mut bytes = Vec::new();
        write_pointcloud_to(&binary_cloud(100), &mut bytes, PlyEncoding::BinaryLittleEndian)
            .unwrap();
        let cut = bytes.len() - 51;
        assert!(matches!(parse(&bytes[..cut]), Err(Error::TruncatedFile(_))));
        // partial last record as well
        assert!(matches!(parse(&bytes[..bytes.len() - 3]), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn binary_and_ascii_roundtrip() {
        let cloud = binary_cloud(37);
        for enc in [PlyEncoding::BinaryLittleEndian, PlyEncoding::Ascii] {
            let mut bytes = Vec::new();
            write_pointcloud_to(&cloud, &mut bytes, enc).unwrap();
            let back = parse(&bytes).unwrap();
            assert_eq!(back, cloud);
        }
    }

    #[test]
    fn zero_normals_are_dropped_and_counted() {
        let text = ASCII_ONE.replace("element vertex 1", "element vertex 2")
            + "1 2 3 0 0 0 1 1 1\n";
        let c = parse(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.dropped_zero_normals, 1);
    }

    #[test]
    fn normals_are_renormalized_and_extra_properties_skipped() {
        let text = "ply\nformat ascii 1.0\nelement camera 1\nproperty float fov\n\
            element vertex 1\nproperty double x\nproperty double y\nproperty double z\n\
            property float intensity\n\
            property float nx\nproperty float ny\nproperty float nz\n\
            property uchar red\nproperty uchar green\nproperty uchar blue\n\
            end_header\n60\n1 2 3 0.5 0 0 2 10 20 30\n";
        let c = parse(text.as_bytes()).unwrap();
        assert_eq!(c.points[0].normal.get(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(c.points[0].color, [10, 20, 30]);
    }

    #[test]
    fn float32_binary_fields_decode() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\n\
            property float x\nproperty float y\nproperty float z\n\
            property float nx\nproperty float ny\nproperty float nz\n\
            property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
            .to_vec();
        for v in [1.5f32, -2.0, 0.25, 0.0, 3.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[9, 8, 7]);
        let c = parse(&bytes).unwrap();
        assert_eq!(c.points[0].position, Vec3::new(1.5, -2.0, 0.25));
        assert_eq!(c.points[0].normal.get(), Vec3::new(0.0, 1.0, 0.0));
    }
}
