//! Planar points and the polygonal closed curve used as the discrete front.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of nodes carried by a [`ClosedCurve`].
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotation by -90 degrees: maps a counterclockwise tangent to the outward normal.
    #[inline]
    pub fn rot_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    /// Rotation by +90 degrees.
    #[inline]
    pub fn rot_ccw(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<(f64, f64)> for Vec2 {
    fn from((x, y): (f64, f64)) -> Self {
        Vec2::new(x, y)
    }
}

/// Reflection across one of the coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mirror {
    /// `(x, y) -> (x, -y)`, reflection across the x-axis.
    AcrossX,
    /// `(x, y) -> (-x, y)`, reflection across the y-axis.
    AcrossY,
}

impl Mirror {
    pub const ALL: [Mirror; 2] = [Mirror::AcrossX, Mirror::AcrossY];

    #[inline]
    pub fn apply(self, p: Vec2) -> Vec2 {
        match self {
            Mirror::AcrossX => Vec2::new(p.x, -p.y),
            Mirror::AcrossY => Vec2::new(-p.x, p.y),
        }
    }

    /// Signed coordinate that vanishes on the mirror axis.
    #[inline]
    pub fn axis_coord(self, p: Vec2) -> f64 {
        match self {
            Mirror::AcrossX => p.y,
            Mirror::AcrossY => p.x,
        }
    }

    /// Exact projection of a point onto the mirror axis.
    #[inline]
    pub fn snap(self, p: Vec2) -> Vec2 {
        match self {
            Mirror::AcrossX => Vec2::new(p.x, 0.0),
            Mirror::AcrossY => Vec2::new(0.0, p.y),
        }
    }
}

/// Oriented polygonal closed curve. The last node connects back to the first.
///
/// Counterclockwise order encloses the bounded region; clockwise order describes its
/// complement. The outward normal is the tangent rotated by -90 degrees in both cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedCurve {
    nodes: Vec<Vec2>,
}

impl ClosedCurve {
    /// Builds a curve and checks node count, distinct neighbours and simplicity.
    pub fn new(nodes: Vec<Vec2>) -> Result<Self> {
        let curve = ClosedCurve { nodes };
        curve.validate()?;
        Ok(curve)
    }

    /// Builds a curve without the O(N^2) simplicity check.
    pub(crate) fn new_unchecked(nodes: Vec<Vec2>) -> Self {
        ClosedCurve { nodes }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < MIN_NODES {
            return Err(Error::Geometry(format!(
                "closed curve needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if let Some(p) = self.nodes.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::Geometry(format!("non-finite node {p:?}")));
        }
        for i in 0..n {
            if self.nodes[i] == self.nodes[(i + 1) % n] {
                return Err(Error::Geometry(format!("nodes {i} and {} coincide", (i + 1) % n)));
            }
        }
        if let Some((i, j)) = self.first_self_intersection() {
            return Err(Error::Geometry(format!("edges {i} and {j} intersect")));
        }
        Ok(())
    }

    /// Regular polygon inscribed in a circle, counterclockwise, node 0 on the positive x-axis.
    pub fn circle(center: Vec2, radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("circle radius must be positive, got {radius}")));
        }
        let nodes = (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                center + Vec2::new(radius * th.cos(), radius * th.sin())
            })
            .collect();
        ClosedCurve::new(nodes)
    }

    /// Ellipse with semi-axes `a` (x) and `b` (y), nodes equally spaced in the angle parameter.
    pub fn ellipse(center: Vec2, a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("ellipse semi-axes must be positive, got {a}, {b}")));
        }
        let nodes = (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                center + Vec2::new(a * th.cos(), b * th.sin())
            })
            .collect();
        ClosedCurve::new(nodes)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Vec2> {
        self.nodes
    }

    #[inline]
    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i % self.nodes.len()]
    }

    #[inline]
    pub fn prev(&self, i: usize) -> Vec2 {
        self.nodes[(i + self.nodes.len() - 1) % self.nodes.len()]
    }

    #[inline]
    pub fn next(&self, i: usize) -> Vec2 {
        self.nodes[(i + 1) % self.nodes.len()]
    }

    /// Shoelace signed area; positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        let n = self.nodes.len();
        0.5 * (0..n)
            .map(|i| self.nodes[i].cross(self.nodes[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_counterclockwise(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn perimeter(&self) -> f64 {
        self.edge_lengths().sum()
    }

    pub fn edge_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.nodes.len();
        (0..n).map(move |i| self.nodes[i].dist(self.nodes[(i + 1) % n]))
    }

    /// Mean of the two edges adjacent to node `i`.
    pub fn local_spacing(&self, i: usize) -> f64 {
        let p = self.nodes[i];
        0.5 * (p.dist(self.prev(i)) + p.dist(self.next(i)))
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.nodes.len();
        let mut a = 0.0;
        let mut c = Vec2::ZERO;
        for i in 0..n {
            let p = self.nodes[i];
            let q = self.nodes[(i + 1) % n];
            let w = p.cross(q);
            a += w;
            c = c + (p + q) * w;
        }
        c * (1.0 / (3.0 * a))
    }

    pub fn reversed(&self) -> ClosedCurve {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        ClosedCurve { nodes }
    }

    pub fn translated(&self, d: Vec2) -> ClosedCurve {
        ClosedCurve { nodes: self.nodes.iter().map(|&p| p + d).collect() }
    }

    pub fn rotated(&self, angle: f64) -> ClosedCurve {
        ClosedCurve { nodes: self.nodes.iter().map(|p| p.rotated(angle)).collect() }
    }

    pub fn scaled(&self, k: f64) -> ClosedCurve {
        ClosedCurve { nodes: self.nodes.iter().map(|&p| p * k).collect() }
    }

    /// Mirror image with reversed node order, so orientation is preserved.
    pub fn mirrored(&self, m: Mirror) -> ClosedCurve {
        ClosedCurve { nodes: self.nodes.iter().rev().map(|&p| m.apply(p)).collect() }
    }

    /// Exterior turning angle at node `i`, in `[0, pi]`.
    pub fn turning_angle(&self, i: usize) -> f64 {
        let e1 = self.nodes[i] - self.prev(i);
        let e2 = self.next(i) - self.nodes[i];
        e1.cross(e2).atan2(e1.dot(e2)).abs()
    }

    /// Unit tangent at node `i` from the non-uniform second-order difference of its neighbours.
    pub fn tangent(&self, i: usize) -> Vec2 {
        node_tangent(self.prev(i), self.nodes[i], self.next(i))
    }

    /// Outward unit normal at node `i`.
    pub fn normal(&self, i: usize) -> Vec2 {
        self.tangent(i).rot_cw()
    }

    /// Crossing-number point-in-polygon test for the bounded region.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.nodes.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.nodes[i];
            let b = self.nodes[j];
            if (a.y > p.y) != (b.y > p.y) {
                let xc = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < xc {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Euclidean distance from `p` to the polygon.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.nodes[i], self.nodes[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// First pair of non-adjacent intersecting edges, if any.
    pub fn first_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.nodes.len();
        let bbox: Vec<[f64; 4]> = (0..n)
            .map(|i| {
                let a = self.nodes[i];
                let b = self.nodes[(i + 1) % n];
                [a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y)]
            })
            .collect();
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (bi, bj) = (bbox[i], bbox[j]);
                if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                    continue;
                }
                if segments_intersect(
                    self.nodes[i],
                    self.nodes[(i + 1) % n],
                    self.nodes[j],
                    self.nodes[(j + 1) % n],
                ) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_simple(&self) -> bool {
        self.first_self_intersection().is_none()
    }

    /// Offset `c` such that `m` maps node `i` onto node `c - i` (mod N) within `tol`.
    pub fn self_mirror_offset(&self, m: Mirror, tol: f64) -> Option<usize> {
        mirror_offset(&self.nodes, &self.nodes, m, tol)
    }

    /// Exact mirror symmetry: `m` maps the node set onto itself bit for bit.
    pub fn is_exactly_mirror_symmetric(&self, m: Mirror) -> bool {
        self.self_mirror_offset(m, 0.0).is_some()
    }

    pub(crate) fn hermite_edges(&self) -> Vec<HermiteEdge> {
        let n = self.nodes.len();
        let tangents: Vec<Vec2> = (0..n).map(|i| self.tangent(i)).collect();
        (0..n)
            .map(|e| HermiteEdge::new(self.nodes[e], self.nodes[(e + 1) % n], tangents[e], tangents[(e + 1) % n]))
            .collect()
    }
}

/// Finds `c` with `m(a[i]) ~ b[(c - i) mod N]` for all `i`.
pub(crate) fn mirror_offset(a: &[Vec2], b: &[Vec2], m: Mirror, tol: f64) -> Option<usize> {
    let n = a.len();
    if n == 0 || n != b.len() {
        return None;
    }
    let close = |p: Vec2, q: Vec2| (p.x - q.x).abs() <= tol && (p.y - q.y).abs() <= tol;
    let target = m.apply(a[0]);
    'candidates: for c in 0..n {
        if !close(target, b[c]) {
            continue;
        }
        for (i, &p) in a.iter().enumerate().skip(1) {
            let j = (c + n - i) % n;
            if !close(m.apply(p), b[j]) {
                continue 'candidates;
            }
        }
        return Some(c);
    }
    None
}

pub(crate) fn node_tangent(prev: Vec2, p: Vec2, next: Vec2) -> Vec2 {
    let e1 = p - prev;
    let e2 = next - p;
    let l1 = e1.norm();
    let l2 = e2.norm();
    // exact for points on a circle, reduces to the central difference for equal spacing
    let t = e1 * (l2 / l1) + e2 * (l1 / l2);
    t.normalized()
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm2();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Cubic Hermite interpolant of one polygon edge, tangents scaled by the chord length.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HermiteEdge {
    p0: Vec2,
    p1: Vec2,
    m0: Vec2,
    m1: Vec2,
}

impl HermiteEdge {
    pub fn new(p0: Vec2, p1: Vec2, t0: Vec2, t1: Vec2) -> Self {
        let l = p0.dist(p1);
        HermiteEdge { p0, p1, m0: t0 * l, m1: t1 * l }
    }

    #[inline]
    pub fn point(&self, u: f64) -> Vec2 {
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        self.p0 * h00 + self.m0 * h10 + self.p1 * h01 + self.m1 * h11
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> Vec2 {
        let u2 = u * u;
        let d00 = 6.0 * u2 - 6.0 * u;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -6.0 * u2 + 6.0 * u;
        let d11 = 3.0 * u2 - 2.0 * u;
        self.p0 * d00 + self.m0 * d10 + self.p1 * d01 + self.m1 * d11
    }

    /// Point and velocity in one pass.
    #[inline]
    pub fn eval(&self, u: f64) -> (Vec2, Vec2) {
        (self.point(u), self.derivative(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_area_and_orientation() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 512).unwrap();
        assert!(c.is_counterclockwise());
        let exact = 0.5 * 512.0 * (std::f64::consts::TAU / 512.0).sin();
        assert!((c.area() - exact).abs() < 1e-12);
        assert!(!c.reversed().is_counterclockwise());
    }

    #[test]
    fn rejects_short_and_degenerate_curves() {
        let few: Vec<Vec2> = (0..5).map(|k| Vec2::new(k as f64, (k * k) as f64)).collect();
        assert!(matches!(ClosedCurve::new(few), Err(Error::Geometry(_))));
        let mut nodes = ClosedCurve::circle(Vec2::ZERO, 1.0, 16).unwrap().into_nodes();
        nodes[3] = nodes[2];
        assert!(ClosedCurve::new(nodes).is_err());
    }

    #[test]
    fn rejects_figure_eight() {
        let nodes: Vec<Vec2> = (0..40)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 40.0;
                Vec2::new(t.sin(), (2.0 * t).sin() * 0.5)
            })
            .collect();
        assert!(matches!(ClosedCurve::new(nodes), Err(Error::Geometry(_))));
    }

    #[test]
    fn tangent_is_exact_on_circle_with_uneven_spacing() {
        let a = Vec2::new(1.0, 0.0).rotated(-0.1);
        let b = Vec2::new(1.0, 0.0);
        let c = Vec2::new(1.0, 0.0).rotated(0.3);
        let t = node_tangent(a, b, c);
        assert!((t.x).abs() < 1e-14 && (t.y - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_edge_hits_endpoints() {
        let e = HermiteEdge::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(e.point(0.0), Vec2::new(0.0, 0.0));
        assert!(e.point(1.0).dist(Vec2::new(1.0, 1.0)) < 1e-15);
    }

    #[test]
    fn contains_and_distance() {
        let c = ClosedCurve::circle(Vec2::ZERO, 2.0, 128).unwrap();
        assert!(c.contains(Vec2::new(0.5, 0.3)));
        assert!(!c.contains(Vec2::new(2.5, 0.0)));
        assert!((c.distance_to(Vec2::new(3.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirror_offset_of_regular_polygon() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 64).unwrap();
        assert_eq!(c.self_mirror_offset(Mirror::AcrossX, 1e-12), Some(0));
        assert_eq!(c.self_mirror_offset(Mirror::AcrossY, 1e-12), Some(32));
        let e = ClosedCurve::ellipse(Vec2::new(0.3, 0.0), 2.0, 1.0, 64).unwrap();
        assert!(e.self_mirror_offset(Mirror::AcrossY, 1e-9).is_none());
    }
}
