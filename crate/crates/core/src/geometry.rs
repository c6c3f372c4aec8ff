//! Planar geometry kernel: points, rectangles, discs, polygons, and exact
//! distance queries between segments, polygons and moving points.

use serde::{Deserialize, Serialize};

/// A point in the plane, meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point { x: v[0], y: v[1] }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn lerp(self, o: Point, s: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * s, self.y + (o.y - self.y) * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn centered(c: Point, half_w: f64, half_h: f64) -> Self {
        Rect::new(
            Point::new(c.x - half_w, c.y - half_h),
            Point::new(c.x + half_w, c.y + half_h),
        )
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Disc-shaped keep-out or target zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    /// Open containment: a point on the rim is not inside.
    pub fn contains(&self, p: Point) -> bool {
        self.center.dist(p) < self.radius
    }
}

/// A named polygonal obstacle. `vertices` are given in the obstacle's own
/// frame and rotated by `orientation` (radians, counter-clockwise) about
/// their centroid to obtain the world-frame outline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonObstacle {
    pub name: String,
    pub vertices: Vec<Point>,
    #[serde(default)]
    pub orientation: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolygonError {
    #[error("polygon `{0}` has fewer than 3 vertices")]
    TooFewVertices(String),
    #[error("polygon `{0}` has non-finite coordinates")]
    NonFinite(String),
    #[error("polygon `{0}` is self-intersecting")]
    SelfIntersecting(String),
    #[error("polygon `{0}` has zero area")]
    Degenerate(String),
}

impl PolygonObstacle {
    pub fn new(name: impl Into<String>, vertices: Vec<Point>, orientation: f64) -> Self {
        PolygonObstacle {
            name: name.into(),
            vertices,
            orientation,
        }
    }

    fn centroid(&self) -> Point {
        let n = self.vertices.len().max(1) as f64;
        let s = self
            .vertices
            .iter()
            .fold(Point::new(0.0, 0.0), |acc, v| acc.add(*v));
        s.scale(1.0 / n)
    }

    /// World-frame vertices.
    pub fn world_vertices(&self) -> Vec<Point> {
        if self.orientation == 0.0 {
            return self.vertices.clone();
        }
        let c = self.centroid();
        let (s, co) = self.orientation.sin_cos();
        self.vertices
            .iter()
            .map(|v| {
                let d = v.sub(c);
                Point::new(c.x + co * d.x - s * d.y, c.y + s * d.x + co * d.y)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), PolygonError> {
        let v = self.world_vertices();
        if v.len() < 3 {
            return Err(PolygonError::TooFewVertices(self.name.clone()));
        }
        if !v.iter().all(|p| p.is_finite()) || !self.orientation.is_finite() {
            return Err(PolygonError::NonFinite(self.name.clone()));
        }
        let n = v.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return Err(PolygonError::SelfIntersecting(self.name.clone()));
                }
            }
        }
        if signed_area(&v).abs() < 1e-12 {
            return Err(PolygonError::Degenerate(self.name.clone()));
        }
        Ok(())
    }
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection test (touching counts).
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let s = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, s))
}

pub fn segment_segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// Even-odd point-in-polygon test. Points on the boundary may go either way;
/// callers that need exact boundary handling combine this with edge distances.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Minimum distance between a segment (or a point when `p0 == p1`) and a
/// polygon region given by world-frame vertices. Zero when they touch, the
/// segment crosses the boundary, or the segment lies inside.
pub fn segment_polygon_clearance(p0: Point, p1: Point, poly: &[Point]) -> f64 {
    if point_in_polygon(p0, poly) || point_in_polygon(p1, poly) {
        return 0.0;
    }
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let d = segment_segment_distance(p0, p1, poly[i], poly[(i + 1) % n]);
        if d == 0.0 {
            return 0.0;
        }
        best = best.min(d);
    }
    best
}

/// Clearance between segment `p0→p1` and an obstacle.
pub fn segment_clearance(p0: Point, p1: Point, obstacle: &PolygonObstacle) -> f64 {
    segment_polygon_clearance(p0, p1, &obstacle.world_vertices())
}

/// Minimum over `s ∈ [0, duration]` of `|rel0 + rel_vel * s|`: the closest
/// approach of two points moving at constant velocity.
pub fn min_moving_distance(rel0: Point, rel_vel: Point, duration: f64) -> f64 {
    let vv = rel_vel.dot(rel_vel);
    let s = if vv == 0.0 {
        0.0
    } else {
        (-rel0.dot(rel_vel) / vv).clamp(0.0, duration.max(0.0))
    };
    rel0.add(rel_vel.scale(s)).norm()
}

/// Parameter interval `[s0, s1] ⊆ [0, 1]` where `a + s (b - a)` lies inside
/// the convex region given by half-planes `n · p <= c`.
pub fn clip_segment_halfplanes(a: Point, b: Point, planes: &[(Point, f64)]) -> Option<(f64, f64)> {
    let d = b.sub(a);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for &(n, c) in planes {
        let num = c - n.dot(a);
        let den = n.dot(d);
        if den == 0.0 {
            if num < 0.0 {
                return None;
            }
        } else {
            let s = num / den;
            if den > 0.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolygonObstacle {
        PolygonObstacle::new(
            "sq",
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            0.0,
        )
    }

    #[test]
    fn segment_inside_polygon_has_zero_clearance() {
        let sq = unit_square();
        let c = segment_clearance(Point::new(0.2, 0.2), Point::new(0.8, 0.7), &sq);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn horizontal_segment_above_unit_square() {
        let sq = unit_square();
        let c = segment_clearance(Point::new(-3.0, 2.0), Point::new(4.0, 2.0), &sq);
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crossing_segment_is_zero() {
        let sq = unit_square();
        assert_eq!(
            segment_clearance(Point::new(-1.0, 0.5), Point::new(2.0, 0.5), &sq),
            0.0
        );
    }

    #[test]
    fn rotated_square_validates_and_rotates_about_centroid() {
        let mut sq = unit_square();
        sq.orientation = std::f64::consts::FRAC_PI_4;
        sq.validate().unwrap();
        let w = sq.world_vertices();
        let c = w.iter().fold(Point::new(0.0, 0.0), |a, p| a.add(*p)).scale(0.25);
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
        // a diamond now reaches x = 0.5 - sqrt(2)/2
        let minx = w.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        assert!((minx - (0.5 - 0.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn bowtie_is_rejected() {
        let p = PolygonObstacle::new(
            "bow",
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            0.0,
        );
        assert!(matches!(p.validate(), Err(PolygonError::SelfIntersecting(_))));
    }

    #[test]
    fn moving_points_closest_approach() {
        // head-on, meet at s = 1
        let d = min_moving_distance(Point::new(2.0, 0.0), Point::new(-2.0, 0.0), 5.0);
        assert_eq!(d, 0.0);
        // diverging from the start
        let d = min_moving_distance(Point::new(1.0, 0.0), Point::new(1.0, 0.0), 5.0);
        assert_eq!(d, 1.0);
        // closest approach after the window ends
        let d = min_moving_distance(Point::new(3.0, 1.0), Point::new(-1.0, 0.0), 1.0);
        assert!((d - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn clip_against_box() {
        // box 0<=x<=1, 0<=y<=1
        let planes = [
            (Point::new(1.0, 0.0), 1.0),
            (Point::new(-1.0, 0.0), 0.0),
            (Point::new(0.0, 1.0), 1.0),
            (Point::new(0.0, -1.0), 0.0),
        ];
        let (a, b) =
            clip_segment_halfplanes(Point::new(-1.0, 0.5), Point::new(3.0, 0.5), &planes).unwrap();
        assert!((a - 0.25).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
        assert!(clip_segment_halfplanes(Point::new(-1.0, 2.0), Point::new(3.0, 2.0), &planes).is_none());
    }
}
