//! Delaunay triangulation of one face's UV triangle together with the points
//! mapped into it. The outer triangle is fixed; mapped points are inserted
//! incrementally (Morton order, walking point location) and Lawson flips keep
//! the result Delaunay. Orientation and in-circle tests are exact.

use robust::{incircle, orient2d, Coord};
use rustc_hash::FxHashMap as HashMap;

use super::MappedPoint;
use crate::spatial::floor_i64;
use crate::{Triangle2, Vec2};

const NONE: u32 = u32::MAX;

/// Where a triangulation vertex came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteOrigin {
    /// Corner 0, 1 or 2 of the face.
    Corner(u8),
    /// Index into the mapped-point list the patch was built from.
    Mapped(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchTriangulation {
    pub sites: Vec<Vec2>,
    pub origins: Vec<SiteOrigin>,
    /// Counter-clockwise index triples into `sites`.
    pub triangles: Vec<[u32; 3]>,
    /// `neighbors[t][i]` is the triangle across the edge opposite
    /// `triangles[t][i]`, or `u32::MAX` on the hull.
    pub neighbors: Vec<[u32; 3]>,
    /// Sites inserted strictly inside the face.
    pub interior: usize,
    /// Sites that landed on (or within rounding of) the face boundary; each
    /// splits a boundary edge and adds one triangle instead of two.
    pub boundary: usize,
    /// Mapped points dropped as near-duplicates of a corner or an earlier point.
    pub duplicates: usize,
}

impl PatchTriangulation {
    pub fn triangle(&self, i: usize) -> Triangle2 {
        let [a, b, c] = self.triangles[i];
        Triangle2::new(
            self.sites[a as usize],
            self.sites[b as usize],
            self.sites[c as usize],
        )
    }

    pub fn area_sum(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| self.triangle(i).signed_area().abs())
            .sum()
    }
}

fn coord(p: Vec2) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

pub(crate) fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    orient2d(coord(a), coord(b), coord(c))
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    /// `n[i]` is the neighbour across the edge opposite `v[i]`.
    n: [u32; 3],
}

enum Location {
    Inside(u32),
    OnEdge(u32, usize),
    Outside(u32, usize),
    Vertex,
}

struct Delaunay {
    pts: Vec<Vec2>,
    tris: Vec<Tri>,
    last: u32,
    stack: Vec<u32>,
    rot: u32,
}

impl Delaunay {
    fn new(a: Vec2, b: Vec2, c: Vec2, capacity: usize) -> Self {
        let mut pts = Vec::with_capacity(capacity + 3);
        pts.extend_from_slice(&[a, b, c]);
        let v = if orient(a, b, c) >= 0.0 { [0, 1, 2] } else { [0, 2, 1] };
        let mut tris = Vec::with_capacity(2 * capacity + 1);
        tris.push(Tri { v, n: [NONE; 3] });
        Delaunay {
            pts,
            tris,
            last: 0,
            stack: Vec::new(),
            rot: 0,
        }
    }

    fn o(&self, a: u32, b: u32, p: Vec2) -> f64 {
        orient(self.pts[a as usize], self.pts[b as usize], p)
    }

    fn locate(&mut self, p: Vec2) -> Location {
        let mut t = self.last;
        let mut steps = 0usize;
        'walk: loop {
            steps += 1;
            if steps > self.tris.len() + 8 {
                return self.locate_scan(p);
            }
            self.rot = self.rot.wrapping_add(1);
            let off = (self.rot % 3) as usize;
            let tri = self.tris[t as usize];
            let (mut zeros, mut edge) = (0, 0);
            for k in 0..3 {
                let i = (k + off) % 3;
                let o = self.o(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p);
                if o < 0.0 {
                    if tri.n[i] == NONE {
                        return Location::Outside(t, i);
                    }
                    t = tri.n[i];
                    continue 'walk;
                }
                if o == 0.0 {
                    zeros += 1;
                    edge = i;
                }
            }
            return match zeros {
                0 => Location::Inside(t),
                1 => Location::OnEdge(t, edge),
                _ => Location::Vertex,
            };
        }
    }

    fn classify(&self, t: u32, p: Vec2) -> Location {
        let tri = self.tris[t as usize];
        let mut zeros = 0;
        let mut edge = 0;
        for i in 0..3 {
            if self.o(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p) == 0.0 {
                zeros += 1;
                edge = i;
            }
        }
        match zeros {
            0 => Location::Inside(t),
            1 => Location::OnEdge(t, edge),
            _ => Location::Vertex,
        }
    }

    fn locate_scan(&self, p: Vec2) -> Location {
        for (t, tri) in self.tris.iter().enumerate() {
            if (0..3).all(|i| self.o(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p) >= 0.0) {
                return self.classify(t as u32, p);
            }
        }
        // outside the hull: attach to the hull edge it is most clearly beyond
        let mut best = (f64::INFINITY, 0u32, 0usize);
        for (t, tri) in self.tris.iter().enumerate() {
            for i in 0..3 {
                if tri.n[i] == NONE {
                    let o = self.o(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p);
                    if o < best.0 {
                        best = (o, t as u32, i);
                    }
                }
            }
        }
        Location::Outside(best.1, best.2)
    }

    /// Splits triangle `t` into three around the new vertex `s`.
    fn split_triangle(&mut self, t: u32, s: u32) {
        let Tri { v: [a, b, c], n: [na, nb, nc] } = self.tris[t as usize];
        let t1 = self.tris.len() as u32;
        let t2 = t1 + 1;
        self.tris[t as usize] = Tri { v: [s, b, c], n: [na, t1, t2] };
        self.tris.push(Tri { v: [s, c, a], n: [nb, t2, t] });
        self.tris.push(Tri { v: [s, a, b], n: [nc, t, t1] });
        relink(&mut self.tris, nb, t, t1);
        relink(&mut self.tris, nc, t, t2);
        self.stack.extend_from_slice(&[t, t1, t2]);
        self.legalize();
        self.last = t;
    }

    /// Inserts `s` on the edge opposite `t.v[i]`, splitting the triangle on
    /// each side of it.
    fn split_edge(&mut self, t: u32, i: usize, s: u32) {
        let tri = self.tris[t as usize];
        let c = tri.v[i];
        let a = tri.v[(i + 1) % 3];
        let b = tri.v[(i + 2) % 3];
        let u = tri.n[i];
        let nta = tri.n[(i + 1) % 3];
        let ntb = tri.n[(i + 2) % 3];
        let t2 = self.tris.len() as u32;
        if u == NONE {
            self.tris[t as usize] = Tri { v: [s, c, a], n: [ntb, NONE, t2] };
            self.tris.push(Tri { v: [s, b, c], n: [nta, t, NONE] });
            relink(&mut self.tris, nta, t, t2);
            self.stack.extend_from_slice(&[t, t2]);
        } else {
            let ut = self.tris[u as usize];
            let j = (0..3).find(|&j| ut.n[j] == t).expect("neighbour links are symmetric");
            let d = ut.v[j];
            let nu_ad = ut.n[(j + 1) % 3];
            let nu_db = ut.n[(j + 2) % 3];
            let u2 = t2 + 1;
            self.tris[t as usize] = Tri { v: [s, c, a], n: [ntb, u, t2] };
            self.tris.push(Tri { v: [s, b, c], n: [nta, t, u2] });
            self.tris[u as usize] = Tri { v: [s, a, d], n: [nu_ad, u2, t] };
            self.tris.push(Tri { v: [s, d, b], n: [nu_db, t2, u] });
            relink(&mut self.tris, nta, t, t2);
            relink(&mut self.tris, nu_db, u, u2);
            self.stack.extend_from_slice(&[t, t2, u, u2]);
        }
        self.legalize();
        self.last = t;
    }

    /// Restores the Delaunay property around the newest vertex, which sits
    /// at `v[0]` of every triangle on the stack.
    fn legalize(&mut self) {
        let (pts, tris, stack) = (&self.pts, &mut self.tris, &mut self.stack);
        while let Some(t) = stack.pop() {
            let Tri { v: [s, a, b], n: [u, tbs, tsa] } = tris[t as usize];
            if u == NONE {
                continue;
            }
            let ut = tris[u as usize];
            let j = match ut.n {
                [x, _, _] if x == t => 0,
                [_, x, _] if x == t => 1,
                [_, _, x] if x == t => 2,
                _ => continue,
            };
            let d = ut.v[j];
            let (ps, pa, pb, pd) = (pts[s as usize], pts[a as usize], pts[b as usize], pts[d as usize]);
            if incircle(coord(ps), coord(pa), coord(pb), coord(pd)) <= 0.0 {
                continue;
            }
            if orient(ps, pa, pd) <= 0.0 || orient(ps, pd, pb) <= 0.0 {
                continue;
            }
            // ut.v is a rotation of [d, b, a]
            let uad = ut.n[(j + 1) % 3];
            let udb = ut.n[(j + 2) % 3];
            tris[t as usize] = Tri { v: [s, a, d], n: [uad, u, tsa] };
            tris[u as usize] = Tri { v: [s, d, b], n: [udb, tbs, t] };
            relink(tris, uad, u, t);
            relink(tris, tbs, t, u);
            stack.push(t);
            stack.push(u);
        }
    }
}

fn relink(tris: &mut [Tri], w: u32, old: u32, new: u32) {
    if w == NONE {
        return;
    }
    for n in tris[w as usize].n.iter_mut() {
        if *n == old {
            *n = new;
            return;
        }
    }
}

fn morton(x: u32, y: u32) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut v = v as u64 & 0xffff_ffff;
        v = (v | (v << 16)) & 0x0000_ffff_0000_ffff;
        v = (v | (v << 8)) & 0x00ff_00ff_00ff_00ff;
        v = (v | (v << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
        v = (v | (v << 2)) & 0x3333_3333_3333_3333;
        v = (v | (v << 1)) & 0x5555_5555_5555_5555;
        v
    }
    spread(x) | (spread(y) << 1)
}

/// Triangulates the face's UV corners plus its mapped points.
///
/// Points closer than `dedupe_eps` (UV units) to a corner or to an earlier
/// kept point are dropped; "earlier" means lower source index.
pub fn triangulate_patch(uv_tri: &Triangle2, mapped: &[MappedPoint], dedupe_eps: f64) -> PatchTriangulation {
    if dedupe_eps > 0.0 {
        // the closest pair of sites is always a Delaunay edge, so when every
        // edge is long enough nothing would have been dropped
        let all: Vec<u32> = (0..mapped.len() as u32).collect();
        if let Some(p) = build(uv_tri, mapped, &all, 0, true) {
            let limit = dedupe_eps * (1.0 + 1e-9);
            let short = p.triangles.iter().any(|t| {
                (0..3).any(|i| (p.sites[t[i] as usize] - p.sites[t[(i + 1) % 3] as usize]).norm() < limit)
            });
            if !short {
                return p;
            }
        }
        let (kept, duplicates) = dedupe(uv_tri, mapped, dedupe_eps);
        build(uv_tri, mapped, &kept, duplicates, false).expect("non-strict build always completes")
    } else {
        let all: Vec<u32> = (0..mapped.len() as u32).collect();
        build(uv_tri, mapped, &all, 0, false).expect("non-strict build always completes")
    }
}

/// Greedy near-duplicate removal in source-index order on a hash grid with
/// cell = eps. Returns the kept indices and the number dropped.
fn dedupe(uv_tri: &Triangle2, mapped: &[MappedPoint], eps: f64) -> (Vec<u32>, usize) {
    let mut order: Vec<u32> = (0..mapped.len() as u32).collect();
    order.sort_by_key(|&i| mapped[i as usize].source_index);
    let key = |p: Vec2| (floor_i64(p.x / eps), floor_i64(p.y / eps));
    // each cell heads a chain through `next`
    let mut heads: HashMap<(i64, i64), u32> = HashMap::default();
    heads.reserve(mapped.len() + 3);
    let mut seen: Vec<Vec2> = Vec::with_capacity(mapped.len() + 3);
    let mut next: Vec<u32> = Vec::with_capacity(mapped.len() + 3);
    let insert = |p: Vec2, heads: &mut HashMap<(i64, i64), u32>, seen: &mut Vec<Vec2>, next: &mut Vec<u32>| {
        next.push(heads.insert(key(p), seen.len() as u32).unwrap_or(NONE));
        seen.push(p);
    };
    for c in [uv_tri.a, uv_tri.b, uv_tri.c] {
        insert(c, &mut heads, &mut seen, &mut next);
    }
    let mut kept = Vec::with_capacity(mapped.len());
    let mut duplicates = 0;
    for &i in &order {
        let p = mapped[i as usize].uv;
        let (kx, ky) = key(p);
        let mut near = false;
        'cells: for dx in -1..=1 {
            for dy in -1..=1 {
                let mut j = heads.get(&(kx + dx, ky + dy)).copied().unwrap_or(NONE);
                while j != NONE {
                    if (seen[j as usize] - p).norm() < eps {
                        near = true;
                        break 'cells;
                    }
                    j = next[j as usize];
                }
            }
        }
        if near {
            duplicates += 1;
        } else {
            insert(p, &mut heads, &mut seen, &mut next);
            kept.push(i);
        }
    }
    (kept, duplicates)
}

/// Inserts `kept` in Morton order. With `strict`, gives up (returns `None`)
/// on a degenerate face, a coincident site or a site outside the hull.
fn build(
    uv_tri: &Triangle2,
    mapped: &[MappedPoint],
    kept: &[u32],
    mut duplicates: usize,
    strict: bool,
) -> Option<PatchTriangulation> {
    let corners = [uv_tri.a, uv_tri.b, uv_tri.c];
    let (lo, hi) = uv_tri.aabb();
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
    let q = |v: f64| ((v / span).clamp(0.0, 1.0) * 65535.0) as u32;
    let mut keyed: Vec<(u64, u32, u32)> = kept
        .iter()
        .map(|&i| {
            let m = &mapped[i as usize];
            (morton(q(m.uv.x - lo.x), q(m.uv.y - lo.y)), m.source_index, i)
        })
        .collect();
    keyed.sort_unstable();

    let mut dt = Delaunay::new(corners[0], corners[1], corners[2], keyed.len());
    let mut origins = Vec::with_capacity(keyed.len() + 3);
    origins.extend([SiteOrigin::Corner(0), SiteOrigin::Corner(1), SiteOrigin::Corner(2)]);
    let (mut interior, mut boundary) = (0, 0);
    let degenerate = orient(corners[0], corners[1], corners[2]) == 0.0;
    if degenerate && strict && !keyed.is_empty() {
        return None;
    }
    for &(_, _, i) in &keyed {
        if degenerate {
            duplicates += 1;
            continue;
        }
        let p = mapped[i as usize].uv;
        let s = dt.pts.len() as u32;
        match dt.locate(p) {
            Location::Vertex => {
                if strict {
                    return None;
                }
                duplicates += 1;
                continue;
            }
            Location::Inside(t) => {
                dt.pts.push(p);
                dt.split_triangle(t, s);
                interior += 1;
            }
            Location::Outside(..) if strict => return None,
            Location::OnEdge(t, e) | Location::Outside(t, e) => {
                dt.pts.push(p);
                if dt.tris[t as usize].n[e] == NONE {
                    boundary += 1;
                } else {
                    interior += 1;
                }
                dt.split_edge(t, e, s);
            }
        }
        origins.push(SiteOrigin::Mapped(i));
    }
    let (triangles, neighbors) = dt.tris.into_iter().map(|t| (t.v, t.n)).unzip();
    Some(PatchTriangulation {
        sites: dt.pts,
        origins,
        triangles,
        neighbors,
        interior,
        boundary,
        duplicates,
    })
}
