//! Static 2D geometry: polygonal obstacles, disc-shaped robots, 360° range
//! scans and overlap queries.
//!
//! Everything here is a pure function of its inputs. Robots see each other
//! only as discs in their scans; nothing else is shared between them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::agent::RobotState;
use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, Vec2};

/// Axis-aligned rectangle, serialized as `[xmin, ymin, xmax, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y) || !min.x.is_finite() || !max.y.is_finite() {
            return Err(Error::config(format!("degenerate bounds {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    /// Square of half-width `half` centered at the origin.
    pub fn centered(half: f64) -> Self {
        Self { min: Vec2::new(-half, -half), max: Vec2::new(half, half) }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

impl TryFrom<[f64; 4]> for Bounds {
    type Error = Error;
    fn try_from(v: [f64; 4]) -> Result<Self> {
        Bounds::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]))
    }
}

impl From<Bounds> for [f64; 4] {
    fn from(b: Bounds) -> Self {
        [b.min.x, b.min.y, b.max.x, b.max.y]
    }
}

/// A simple polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    /// Validates the ring and reorients clockwise input to counterclockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::config(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::config("polygon has non-finite vertex"));
        }
        let mut poly = Self { vertices };
        let area = poly.signed_area();
        if area == 0.0 {
            return Err(Error::config("polygon has zero area"));
        }
        if !poly.is_simple() {
            return Err(Error::config("polygon is self-intersecting"));
        }
        if area < 0.0 {
            poly.vertices.reverse();
        }
        Ok(poly)
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Result<Self> {
        Self::new(vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
    }

    /// Regular `sides`-gon inscribed in the circle of `radius` around `center`.
    pub fn regular(center: Vec2, radius: f64, sides: usize) -> Result<Self> {
        let verts = (0..sides)
            .map(|i| center + Vec2::from_angle(2.0 * PI * i as f64 / sides as f64) * radius)
            .collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Directed edges `(v_i, v_{i+1})`, closing the ring.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    /// Crossing-number containment; boundary points may land either way.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance from `p` to the polygon region (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.boundary_distance(p)
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff the open segment `p`–`q` crosses or touches the polygon.
    pub fn intersects_segment(&self, p: Vec2, q: Vec2) -> bool {
        self.contains(p) || self.contains(q) || self.edges().any(|(a, b)| segments_intersect(p, q, a, b))
    }

    fn is_simple(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    fn mapped(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        Self { vertices: self.vertices.iter().map(|&v| f(v)).collect() }
    }
}

impl TryFrom<Vec<Vec2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Vec2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, collinear overlaps included.
pub(crate) fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// The static environment. Immutable once constructed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldRepr", into = "WorldRepr")]
pub struct WorldModel {
    bounds: Bounds,
    obstacles: Vec<Polygon>,
}

#[derive(Serialize, Deserialize)]
struct WorldRepr {
    bounds: Bounds,
    #[serde(default)]
    polygons: Vec<Polygon>,
}

impl TryFrom<WorldRepr> for WorldModel {
    type Error = Error;
    fn try_from(r: WorldRepr) -> Result<Self> {
        WorldModel::new(r.bounds, r.polygons)
    }
}

impl From<WorldModel> for WorldRepr {
    fn from(w: WorldModel) -> Self {
        WorldRepr { bounds: w.bounds, polygons: w.obstacles }
    }
}

impl WorldModel {
    pub fn new(bounds: Bounds, obstacles: Vec<Polygon>) -> Result<Self> {
        for (i, poly) in obstacles.iter().enumerate() {
            if !poly.vertices().iter().all(|&v| bounds.contains(v)) {
                return Err(Error::config(format!("obstacle {i} leaves the world bounds")));
            }
        }
        Ok(Self { bounds, obstacles })
    }

    pub fn empty(bounds: Bounds) -> Self {
        Self { bounds, obstacles: Vec::new() }
    }

    /// Rectangular room whose free interior spans `±half_w × ±half_h`,
    /// enclosed by four walls of the given thickness.
    pub fn room(half_w: f64, half_h: f64, thickness: f64) -> Result<Self> {
        let (w, h, t) = (half_w, half_h, thickness);
        let walls = vec![
            Polygon::rectangle(Vec2::new(-w - t, -h - t), Vec2::new(w + t, -h))?,
            Polygon::rectangle(Vec2::new(-w - t, h), Vec2::new(w + t, h + t))?,
            Polygon::rectangle(Vec2::new(-w - t, -h), Vec2::new(-w, h))?,
            Polygon::rectangle(Vec2::new(w, -h), Vec2::new(w + t, h))?,
        ];
        let bounds = Bounds::new(Vec2::new(-w - t, -h - t), Vec2::new(w + t, h + t))?;
        Self::new(bounds, walls)
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    pub fn with_obstacle(mut self, poly: Polygon) -> Result<Self> {
        self.obstacles.push(poly);
        Self::new(self.bounds, self.obstacles)
    }

    /// Distance from `p` to the nearest obstacle region (∞ without obstacles).
    pub fn obstacle_distance(&self, p: Vec2) -> f64 {
        self.obstacles.iter().map(|o| o.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Rigid rotation of the whole world about the origin; the bounds become
    /// the axis-aligned box of the rotated corners.
    pub fn rotated(&self, angle: f64) -> Self {
        let b = self.bounds;
        let corners = [b.min, Vec2::new(b.max.x, b.min.y), b.max, Vec2::new(b.min.x, b.max.y)]
            .map(|c| c.rotate(angle));
        let min = corners.iter().fold(Vec2::new(f64::MAX, f64::MAX), |m, c| Vec2::new(m.x.min(c.x), m.y.min(c.y)));
        let max = corners.iter().fold(Vec2::new(f64::MIN, f64::MIN), |m, c| Vec2::new(m.x.max(c.x), m.y.max(c.y)));
        Self {
            bounds: Bounds { min, max },
            obstacles: self.obstacles.iter().map(|o| o.mapped(|v| v.rotate(angle))).collect(),
        }
    }
}

/// Range-sensor layout: `ray_count` rays evenly spaced over 360°.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub ray_count: usize,
    pub max_range: f64,
}

impl ScanConfig {
    pub fn new(ray_count: usize, max_range: f64) -> Result<Self> {
        let cfg = Self { ray_count, max_range };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ray_count == 0 {
            return Err(Error::config("ray_count must be positive"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::config("max_range must be positive"));
        }
        Ok(())
    }

    /// Angular spacing τ = 2π/M.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / self.ray_count as f64
    }

    /// Robot-frame bearing of ray `k` (zero-based).
    pub fn bearing(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.ray_count as f64
    }
}

/// One range scan in the robot frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    rays: Vec<Vec2>,
    ranges: Vec<f64>,
    hit_mask: Vec<bool>,
}

impl Scan {
    /// Builds a scan from ray vectors, deriving the hit mask from `max_range`.
    pub fn from_rays(rays: Vec<Vec2>, max_range: f64) -> Self {
        let ranges = rays.iter().map(|l| l.norm()).collect();
        Self::assemble(rays, ranges, max_range)
    }

    /// Builds a scan from per-ray ranges laid out at the standard bearings.
    /// Ranges are kept exactly as given.
    pub fn from_ranges(ranges: &[f64], max_range: f64) -> Self {
        let m = ranges.len();
        let rays = ranges
            .iter()
            .enumerate()
            .map(|(k, &d)| Vec2::from_angle(2.0 * PI * k as f64 / m as f64) * d)
            .collect();
        Self::assemble(rays, ranges.to_vec(), max_range)
    }

    fn assemble(rays: Vec<Vec2>, ranges: Vec<f64>, max_range: f64) -> Self {
        let hit_mask = ranges.iter().map(|&n| n > 0.0 && n < max_range).collect();
        Self { rays, ranges, hit_mask }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn rays(&self) -> &[Vec2] {
        &self.rays
    }

    pub fn hit_mask(&self) -> &[bool] {
        &self.hit_mask
    }

    pub fn ranges(&self) -> impl Iterator<Item = f64> + '_ {
        self.ranges.iter().copied()
    }

    /// Ray vectors in the hit set H.
    pub fn hits(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.rays.iter().zip(&self.hit_mask).filter(|(_, &h)| h).map(|(&l, _)| l)
    }
}

/// A robot body as seen by the geometry layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscBody {
    pub center: Vec2,
    pub radius: f64,
}

impl DiscBody {
    pub fn new(center: Vec2, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Self { center, radius }
    }
}

/// Smallest t > 0 with `origin + t·dir` on segment `a`–`b` (dir is unit).
fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom == 0.0 {
        // Parallel. Collinear overlaps are caught by the neighbouring edges'
        // endpoints.
        return None;
    }
    let ao = a - origin;
    let t = ao.cross(e) / denom;
    let u = ao.cross(dir) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Smallest t > 0 with `origin + t·dir` on the circle (dir is unit).
pub(crate) fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = dir.dot(oc);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = -b - sq;
    let t2 = -b + sq;
    if t1 > 0.0 {
        Some(t1)
    } else if t2 > 0.0 {
        Some(t2)
    } else {
        None
    }
}

/// Casts `cfg.ray_count` rays from `pose` against the obstacles and the
/// `others` discs. Ray 0 points along the robot heading.
pub fn raycast(world: &WorldModel, others: &[DiscBody], pose: &RobotState, cfg: &ScanConfig) -> Result<Scan> {
    let origin = pose.position();
    if !world.bounds.contains(origin) {
        return Err(Error::domain(format!("pose ({}, {}) outside world bounds", origin.x, origin.y)));
    }
    let d_max = cfg.max_range;
    let mut ranges = Vec::with_capacity(cfg.ray_count);
    for k in 0..cfg.ray_count {
        let dir = Vec2::from_angle(cfg.bearing(k) + pose.psi);
        let mut best = f64::INFINITY;
        for poly in &world.obstacles {
            for (a, b) in poly.edges() {
                if let Some(t) = ray_segment(origin, dir, a, b) {
                    best = best.min(t);
                }
            }
        }
        for body in others {
            if let Some(t) = ray_circle(origin, dir, body.center, body.radius) {
                best = best.min(t);
            }
        }
        ranges.push(best.min(d_max));
    }
    Ok(Scan::from_ranges(&ranges, d_max))
}

/// A detected overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Collision {
    /// Two robots, `a < b`.
    Robots { a: usize, b: usize },
    Obstacle { robot: usize, obstacle: usize },
}

/// All robot–robot and robot–obstacle overlaps, strict inequalities.
pub fn collisions(bodies: &[DiscBody], world: &WorldModel) -> Vec<Collision> {
    let mut out = Vec::new();
    for (i, bi) in bodies.iter().enumerate() {
        for (j, bj) in bodies.iter().enumerate().skip(i + 1) {
            if bi.center.distance(bj.center) < bi.radius + bj.radius {
                out.push(Collision::Robots { a: i, b: j });
            }
        }
    }
    for (i, body) in bodies.iter().enumerate() {
        for (o, poly) in world.obstacles.iter().enumerate() {
            if poly.distance(body.center) < body.radius {
                out.push(Collision::Obstacle { robot: i, obstacle: o });
            }
        }
    }
    out
}
