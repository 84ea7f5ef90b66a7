//! Vector, triangle and barycentric primitives.
//!
//! Everything here is generic over a floating point scalar. The rest of the
//! crate works in `f64` through the aliases exported at the crate root.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type accepted by the geometry primitives.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Minimum area for a 3D triangle to count as non-degenerate.
pub const MIN_AREA_3D: f64 = 1e-12;
/// Minimum |signed area| for a UV triangle to count as non-degenerate.
pub const MIN_AREA_2D: f64 = 1e-14;
/// Slack used when classifying barycentric weights as inside.
pub const INSIDE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Self) -> Self {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Self) -> Self {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    /// Normalizes the vector, returning `None` for zero or non-finite input.
    pub fn normalized(self) -> Option<UnitVec3<T>> {
        UnitVec3::new(self)
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction with Euclidean norm 1 (within 1e-6).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3<T>", into = "Vec3<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct UnitVec3<T>(Vec3<T>);

impl<T: Real> UnitVec3<T> {
    pub fn new(v: Vec3<T>) -> Option<Self> {
        let n = v.norm();
        if n.is_finite() && n > T::zero() {
            Some(UnitVec3(v * (T::one() / n)))
        } else {
            None
        }
    }

    /// Wraps a vector the caller guarantees is already unit length.
    pub fn new_unchecked(v: Vec3<T>) -> Self {
        debug_assert!((v.norm() - T::one()).abs() <= T::lit(1e-6));
        UnitVec3(v)
    }

    pub fn x_axis() -> Self {
        UnitVec3(Vec3::new(T::one(), T::zero(), T::zero()))
    }

    pub fn y_axis() -> Self {
        UnitVec3(Vec3::new(T::zero(), T::one(), T::zero()))
    }

    pub fn z_axis() -> Self {
        UnitVec3(Vec3::new(T::zero(), T::zero(), T::one()))
    }

    pub fn get(self) -> Vec3<T> {
        self.0
    }

    pub fn dot(self, o: Self) -> T {
        self.0.dot(o.0)
    }
}

impl<T: Real> Neg for UnitVec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        UnitVec3(-self.0)
    }
}

impl<T: Real> From<UnitVec3<T>> for Vec3<T> {
    fn from(u: UnitVec3<T>) -> Self {
        u.0
    }
}

impl<T: Real> TryFrom<Vec3<T>> for UnitVec3<T> {
    type Error = String;
    fn try_from(v: Vec3<T>) -> std::result::Result<Self, String> {
        // keep already-unit input bit-exact so serialization round-trips
        if (v.dot(v) - T::one()).abs() <= T::epsilon() * T::lit(8.0) {
            return Ok(UnitVec3(v));
        }
        UnitVec3::new(v).ok_or_else(|| "zero-length direction".to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn perp_dot(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric<T> {
    pub w0: T,
    pub w1: T,
    pub w2: T,
}

impl<T: Real> Barycentric<T> {
    pub fn new(w0: T, w1: T, w2: T) -> Self {
        Barycentric { w0, w1, w2 }
    }

    pub fn vertex(i: usize) -> Self {
        let mut w = [T::zero(); 3];
        w[i] = T::one();
        Barycentric::new(w[0], w[1], w[2])
    }

    pub fn sum(self) -> T {
        self.w0 + self.w1 + self.w2
    }

    pub fn min_weight(self) -> T {
        self.w0.min(self.w1).min(self.w2)
    }

    /// All weights ≥ −1e-9.
    pub fn is_inside(self) -> bool {
        self.min_weight() >= -T::lit(INSIDE_EPS)
    }

    /// Clamps every weight into [0, 1] and rescales so they sum to one.
    pub fn clamped(self) -> Self {
        let c = |w: T| w.max(T::zero()).min(T::one());
        let (a, b, d) = (c(self.w0), c(self.w1), c(self.w2));
        let s = a + b + d;
        if s > T::zero() {
            Barycentric::new(a / s, b / s, d / s)
        } else {
            Barycentric::new(T::one(), T::zero(), T::zero())
        }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.w0, self.w1, self.w2]
    }

    /// Affine combination of three values.
    pub fn blend3(self, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Vec3<T> {
        a * self.w0 + b * self.w1 + c * self.w2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle3<T> {
    pub v0: Vec3<T>,
    pub v1: Vec3<T>,
    pub v2: Vec3<T>,
}

impl<T: Real> Triangle3<T> {
    pub fn new(v0: Vec3<T>, v1: Vec3<T>, v2: Vec3<T>) -> Self {
        Triangle3 { v0, v1, v2 }
    }

    pub fn vertex(&self, i: usize) -> Vec3<T> {
        match i {
            0 => self.v0,
            1 => self.v1,
            _ => self.v2,
        }
    }

    pub fn area(&self) -> T {
        (self.v1 - self.v0).cross(self.v2 - self.v0).norm() * T::lit(0.5)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.area() > T::lit(MIN_AREA_3D))
    }

    pub fn centroid(&self) -> Vec3<T> {
        (self.v0 + self.v1 + self.v2) * (T::one() / T::lit(3.0))
    }

    pub fn aabb(&self) -> (Vec3<T>, Vec3<T>) {
        (
            self.v0.min(self.v1).min(self.v2),
            self.v0.max(self.v1).max(self.v2),
        )
    }
}

/// Precomputed quantities for repeated queries against one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleQuery<T> {
    tri: Triangle3<T>,
    e0: Vec3<T>,
    e1: Vec3<T>,
    /// `e0 × e1` scaled by `1 / |e0 × e1|²`.
    n_scaled: Vec3<T>,
    normal: UnitVec3<T>,
}

impl<T: Real> TriangleQuery<T> {
    pub fn new(tri: Triangle3<T>) -> Result<Self> {
        if tri.is_degenerate() {
            return Err(Error::DegenerateTriangle);
        }
        let e0 = tri.v1 - tri.v0;
        let e1 = tri.v2 - tri.v0;
        let n = e0.cross(e1);
        let normal = n.normalized().ok_or(Error::DegenerateTriangle)?;
        Ok(TriangleQuery {
            tri,
            e0,
            e1,
            n_scaled: n * (T::one() / n.norm_squared()),
            normal,
        })
    }

    pub fn triangle(&self) -> &Triangle3<T> {
        &self.tri
    }

    pub fn normal(&self) -> UnitVec3<T> {
        self.normal
    }

    /// Barycentric coordinates of the orthogonal projection of `p` onto the plane.
    /// Uses sub-triangle cross products rather than the Gram system, whose
    /// determinant cancels badly on thin triangles.
    pub fn barycentric(&self, p: Vec3<T>) -> Barycentric<T> {
        let d = p - self.tri.v0;
        let w1 = d.cross(self.e1).dot(self.n_scaled);
        let w2 = self.e0.cross(d).dot(self.n_scaled);
        Barycentric::new(T::one() - w1 - w2, w1, w2)
    }

    /// Closest point of the closed triangle to `p`, with its barycentric weights.
    pub fn closest_point(&self, p: Vec3<T>) -> (Vec3<T>, Barycentric<T>) {
        let zero = T::zero();
        let one = T::one();
        let (a, b, c) = (self.tri.v0, self.tri.v1, self.tri.v2);
        let ab = self.e0;
        let ac = self.e1;
        let ap = p - a;
        let d1 = ab.dot(ap);
        let d2 = ac.dot(ap);
        if d1 <= zero && d2 <= zero {
            return (a, Barycentric::vertex(0));
        }
        let bp = p - b;
        let d3 = ab.dot(bp);
        let d4 = ac.dot(bp);
        if d3 >= zero && d4 <= d3 {
            return (b, Barycentric::vertex(1));
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= zero && d1 >= zero && d3 <= zero {
            let v = d1 / (d1 - d3);
            return (a + ab * v, Barycentric::new(one - v, v, zero));
        }
        let cp = p - c;
        let d5 = ab.dot(cp);
        let d6 = ac.dot(cp);
        if d6 >= zero && d5 <= d6 {
            return (c, Barycentric::vertex(2));
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= zero && d2 >= zero && d6 <= zero {
            let w = d2 / (d2 - d6);
            return (a + ac * w, Barycentric::new(one - w, zero, w));
        }
        let va = d3 * d6 - d5 * d4;
        if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return (b + (c - b) * w, Barycentric::new(zero, one - w, w));
        }
        let denom = one / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        (a + ab * v + ac * w, Barycentric::new(one - v - w, v, w))
    }

    pub fn distance(&self, p: Vec3<T>) -> T {
        (p - self.closest_point(p).0).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle2<T> {
    pub a: Vec2<T>,
    pub b: Vec2<T>,
    pub c: Vec2<T>,
}

impl<T: Real> Triangle2<T> {
    pub fn new(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> Self {
        Triangle2 { a, b, c }
    }

    pub fn corner(&self, i: usize) -> Vec2<T> {
        match i {
            0 => self.a,
            1 => self.b,
            _ => self.c,
        }
    }

    /// Positive for counter-clockwise winding.
    pub fn signed_area(&self) -> T {
        (self.b - self.a).perp_dot(self.c - self.a) * T::lit(0.5)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.signed_area().abs() > T::lit(MIN_AREA_2D))
    }

    pub fn centroid(&self) -> Vec2<T> {
        (self.a + self.b + self.c) * (T::one() / T::lit(3.0))
    }

    pub fn apply(&self, w: Barycentric<T>) -> Vec2<T> {
        self.a * w.w0 + self.b * w.w1 + self.c * w.w2
    }

    /// Barycentric coordinates of a point in the triangle's plane.
    pub fn barycentric_of(&self, p: Vec2<T>) -> Barycentric<T> {
        let area2 = (self.b - self.a).perp_dot(self.c - self.a);
        let w0 = (self.b - p).perp_dot(self.c - p) / area2;
        let w1 = (self.c - p).perp_dot(self.a - p) / area2;
        Barycentric::new(w0, w1, T::one() - w0 - w1)
    }

    pub fn aabb(&self) -> (Vec2<T>, Vec2<T>) {
        (
            Vec2::new(self.a.x.min(self.b.x).min(self.c.x), self.a.y.min(self.b.y).min(self.c.y)),
            Vec2::new(self.a.x.max(self.b.x).max(self.c.x), self.a.y.max(self.b.y).max(self.c.y)),
        )
    }
}

/// Unit normal of `(v1 − v0) × (v2 − v0)`.
pub fn triangle_normal<T: Real>(t: &Triangle3<T>) -> Result<UnitVec3<T>> {
    Ok(TriangleQuery::new(*t)?.normal())
}

/// Barycentric coordinates of `p` projected orthogonally onto the plane of `t`.
pub fn barycentric_of<T: Real>(p: Vec3<T>, t: &Triangle3<T>) -> Result<Barycentric<T>> {
    Ok(TriangleQuery::new(*t)?.barycentric(p))
}

pub fn apply_barycentric<T: Real>(b: Barycentric<T>, t: &Triangle2<T>) -> Vec2<T> {
    t.apply(b)
}

/// Euclidean distance from `p` to the closed triangle `t`.
pub fn point_triangle_distance<T: Real>(p: Vec3<T>, t: &Triangle3<T>) -> Result<T> {
    Ok(TriangleQuery::new(*t)?.distance(p))
}

/// Angle between two unit vectors in degrees, in [0, 180].
pub fn normal_angle_deg<T: Real>(a: UnitVec3<T>, b: UnitVec3<T>) -> T {
    a.dot(b).max(-T::one()).min(T::one()).acos().to_degrees()
}
