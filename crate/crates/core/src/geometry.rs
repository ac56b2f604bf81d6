//! Convex building footprints.
//!
//! A [`ConvexPolygon`] is stored twice: as its counterclockwise vertex loop and
//! as the intersection of half-planes `aₖᵀx ≤ bₖ` with unit outward normals.
//! Because the normals are unit length, `max_k(aₖᵀx − bₖ)` is a metric signed
//! distance (exact on the perimeter and inside, a lower bound near vertices
//! outside), and the log-sum-exp residual built on it has an approximation
//! error of at most `ε·ln(M_e)` map units.

use nalgebra::Vector2;
use thiserror::Error;

/// A point or vector in the map plane (map units).
pub type Vec2 = Vector2<f64>;

/// Slack on every "lies on the boundary" style predicate.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("vertex loop is not convex (turn direction flips at vertex {vertex})")]
    NonConvexInput { vertex: usize },
    #[error("degenerate vertex loop: {0}")]
    DegenerateInput(&'static str),
}

/// Closed half-plane `normal · x ≤ offset` with `|normal| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfSpace {
    #[inline]
    pub fn eval(&self, p: &Vec2) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Strictly convex polygon, counterclockwise, in dual vertex/half-space form.
///
/// Edge `k` runs from vertex `k` to vertex `k + 1` (cyclically) and owns
/// half-space row `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    halfspaces: Vec<HalfSpace>,
    /// `cumulative[k]` is the arc length from vertex 0 to vertex `k`;
    /// the last entry is the full perimeter.
    cumulative: Vec<f64>,
}

impl ConvexPolygon {
    /// Builds a polygon from an ordered vertex loop.
    ///
    /// Consecutive duplicates (and a repeated closing vertex) are dropped.
    /// Clockwise input is accepted and reversed. Any collinear triple is
    /// rejected rather than silently simplified.
    pub fn from_vertices(points: &[Vec2]) -> Result<Self, GeometryError> {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(GeometryError::DegenerateInput("non-finite vertex coordinate"));
            }
            if pts.last().is_none_or(|q| (p - q).norm() > 1e-12) {
                pts.push(*p);
            }
        }
        while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= 1e-12 {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(GeometryError::DegenerateInput("fewer than three distinct vertices"));
        }

        let n = pts.len();
        let turns: Vec<f64> = (0..n)
            .map(|i| {
                let e0 = pts[(i + 1) % n] - pts[i];
                let e1 = pts[(i + 2) % n] - pts[(i + 1) % n];
                let cross = e0.perp(&e1);
                if cross.abs() <= 1e-12 * e0.norm() * e1.norm() {
                    0.0
                } else {
                    cross
                }
            })
            .collect();
        if turns.iter().any(|&c| c == 0.0) {
            return Err(GeometryError::DegenerateInput("three collinear vertices"));
        }
        let positive = turns[0] > 0.0;
        if let Some(i) = turns.iter().position(|&c| (c > 0.0) != positive) {
            return Err(GeometryError::NonConvexInput { vertex: (i + 1) % n });
        }
        if !positive {
            pts.reverse();
        }

        // A pentagram turns consistently but winds twice.
        let winding: f64 = (0..n)
            .map(|i| {
                let e0 = pts[(i + 1) % n] - pts[i];
                let e1 = pts[(i + 2) % n] - pts[(i + 1) % n];
                e0.perp(&e1).atan2(e0.dot(&e1))
            })
            .sum();
        if (winding - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(GeometryError::NonConvexInput { vertex: 0 });
        }

        let mut halfspaces = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for i in 0..n {
            let a = pts[i];
            let d = pts[(i + 1) % n] - a;
            let len = d.norm();
            let normal = Vec2::new(d.y, -d.x) / len;
            halfspaces.push(HalfSpace { normal, offset: normal.dot(&a) });
            cumulative.push(cumulative[i] + len);
        }
        Ok(Self { vertices: pts, halfspaces, cumulative })
    }

    /// Convex hull of a point cloud (Andrew's monotone chain), collinear points dropped.
    pub fn hull(points: &[Vec2]) -> Result<Self, GeometryError> {
        let mut pts: Vec<Vec2> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup_by(|a, b| (*a - *b).norm() <= 1e-12);
        if pts.len() < 3 {
            return Err(GeometryError::DegenerateInput("fewer than three distinct vertices"));
        }
        let turn = |o: &Vec2, a: &Vec2, b: &Vec2| (a - o).perp(&(b - o));
        let mut lower: Vec<Vec2> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-12 {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Vec2> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-12 {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::from_vertices(&lower)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    /// Number of edges `M_e`.
    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn perimeter(&self) -> f64 {
        self.cumulative[self.vertices.len()]
    }

    pub fn edge(&self, k: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[k % n], self.vertices[(k + 1) % n])
    }

    pub fn centroid(&self) -> Vec2 {
        self.vertices.iter().sum::<Vec2>() / self.vertices.len() as f64
    }

    /// `max_k(aₖᵀp − bₖ)`: negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, p: &Vec2) -> f64 {
        self.halfspaces.iter().map(|h| h.eval(p)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the half-space attaining [`Self::signed_distance`] (first one on ties).
    pub fn active_face(&self, p: &Vec2) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (k, h) in self.halfspaces.iter().enumerate() {
            let v = h.eval(p);
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        best
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        self.signed_distance(p) <= BOUNDARY_TOL
    }

    /// Log-sum-exp boundary residual `R(p) = −ε ln Σₖ exp((aₖᵀp − bₖ)/ε)`.
    ///
    /// Evaluated with the max shift, so it is finite for every finite input.
    pub fn lse_residual(&self, p: &Vec2, eps: f64) -> f64 {
        let m = self.signed_distance(p);
        let sum: f64 = self.halfspaces.iter().map(|h| ((h.eval(p) - m) / eps).exp()).sum();
        -(m + eps * sum.ln())
    }

    /// `∇R(p) = −Σₖ aₖ wₖ` with softmax weights `wₖ ∝ exp((aₖᵀp − bₖ)/ε)`.
    pub fn lse_gradient(&self, p: &Vec2, eps: f64) -> Vec2 {
        let m = self.signed_distance(p);
        let mut sum = 0.0;
        let mut acc = Vec2::zeros();
        for h in &self.halfspaces {
            let w = ((h.eval(p) - m) / eps).exp();
            sum += w;
            acc += h.normal * w;
        }
        -acc / sum
    }

    /// Euclidean-nearest point on the perimeter. Equidistant edges resolve to
    /// the lowest edge index.
    pub fn project_to_perimeter(&self, p: &Vec2) -> Vec2 {
        let mut best = self.vertices[0];
        let mut best_dist = f64::INFINITY;
        for k in 0..self.edge_count() {
            let (a, b) = self.edge(k);
            let d = b - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let q = a + d * t;
            let dist = (p - q).norm();
            if dist < best_dist - 1e-12 {
                best_dist = dist;
                best = q;
            }
        }
        best
    }

    /// Point at normalized arc length `s` (wrapped into `[0, 1)`), counterclockwise from vertex 0.
    pub fn perimeter_point(&self, s: f64) -> Vec2 {
        let s = s.rem_euclid(1.0);
        let target = s * self.perimeter();
        let n = self.edge_count();
        let k = match self.cumulative[1..].iter().position(|&c| c > target) {
            Some(k) => k,
            None => n - 1,
        };
        let (a, b) = self.edge(k);
        let len = self.cumulative[k + 1] - self.cumulative[k];
        let t = ((target - self.cumulative[k]) / len).clamp(0.0, 1.0);
        a + (b - a) * t
    }

    /// Normalized arc-length coordinate of a perimeter point (inverse of
    /// [`Self::perimeter_point`] up to projection).
    pub fn perimeter_coordinate(&self, p: &Vec2) -> f64 {
        let q = self.project_to_perimeter(p);
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..self.edge_count() {
            let (a, b) = self.edge(k);
            let d = b - a;
            let t = ((q - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let dist = (q - (a + d * t)).norm();
            if dist < best.0 - 1e-12 {
                best = (dist, (self.cumulative[k] + t * d.norm()) / self.perimeter());
            }
        }
        best.1.rem_euclid(1.0)
    }

    /// True iff `min_{u∈[0,1]} signed_distance(p + u(q − p)) ≥ clearance`.
    ///
    /// Clips the segment against the polygon inflated by `clearance`
    /// (offsets `bₖ + clearance`). The clipped interval, if any, is where the
    /// convex piecewise-linear distance is `≤ clearance`; its midpoint value
    /// separates "touches the inflated boundary" from "enters it".
    pub fn segment_clear(&self, p: &Vec2, q: &Vec2, clearance: f64) -> bool {
        let d = q - p;
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for h in &self.halfspaces {
            // h.eval(p + u d) - clearance = start + u * slope ≤ 0
            let start = h.eval(p) - clearance;
            let slope = h.normal.dot(&d);
            if slope.abs() <= 1e-15 {
                if start > 0.0 {
                    return true;
                }
            } else {
                let u = -start / slope;
                if slope > 0.0 {
                    hi = hi.min(u);
                } else {
                    lo = lo.max(u);
                }
            }
            if lo > hi {
                return true;
            }
        }
        let mid = p + d * (0.5 * (lo + hi));
        self.signed_distance(&mid) >= clearance - 1e-12
    }

    /// Separating-axis test: true when the two polygons come closer than `gap`
    /// along every candidate axis (i.e. they overlap once inflated by `gap`).
    pub fn overlaps(&self, other: &ConvexPolygon, gap: f64) -> bool {
        let separated = |a: &ConvexPolygon, b: &ConvexPolygon| {
            a.halfspaces.iter().any(|h| {
                b.vertices
                    .iter()
                    .map(|v| h.eval(v))
                    .fold(f64::INFINITY, f64::min)
                    >= gap
            })
        };
        !(separated(self, other) || separated(other, self))
    }
}

/// Rectangular operational domain `[0, width] × [0, height]` and its buildings.
#[derive(Debug, Clone, PartialEq)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
    pub buildings: Vec<ConvexPolygon>,
}

impl Arena {
    pub fn new(width: f64, height: f64, buildings: Vec<ConvexPolygon>) -> Self {
        Self { width, height, buildings }
    }

    pub fn in_bounds(&self, p: &Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Smallest signed distance to any building (`+∞` on an empty map).
    pub fn obstacle_distance(&self, p: &Vec2) -> f64 {
        self.buildings.iter().map(|b| b.signed_distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn segment_clear(&self, p: &Vec2, q: &Vec2, clearance: f64) -> bool {
        self.buildings.iter().all(|b| b.segment_clear(p, q, clearance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn unit_square_halfspaces() {
        let sq = unit_square();
        let expected = [((0.0, -1.0), 0.0), ((1.0, 0.0), 1.0), ((0.0, 1.0), 1.0), ((-1.0, 0.0), 0.0)];
        for (h, ((nx, ny), b)) in sq.halfspaces().iter().zip(expected) {
            assert_abs_diff_eq!(h.normal.x, nx, epsilon = 1e-15);
            assert_abs_diff_eq!(h.normal.y, ny, epsilon = 1e-15);
            assert_abs_diff_eq!(h.offset, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn triangle_hypotenuse() {
        let tri = ConvexPolygon::from_vertices(&[Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)])
            .unwrap();
        assert_eq!(tri.edge_count(), 3);
        let h = tri.halfspaces()[1];
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(h.normal.x, r, epsilon = 1e-15);
        assert_abs_diff_eq!(h.normal.y, r, epsilon = 1e-15);
        assert_abs_diff_eq!(h.offset, 2.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_loops() {
        let collinear = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        assert!(matches!(ConvexPolygon::from_vertices(&collinear), Err(GeometryError::DegenerateInput(_))));
        let two = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)];
        assert!(matches!(ConvexPolygon::from_vertices(&two), Err(GeometryError::DegenerateInput(_))));
        let dart = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.5), Vec2::new(1.0, 2.0)];
        assert!(matches!(ConvexPolygon::from_vertices(&dart), Err(GeometryError::NonConvexInput { .. })));
        let star: Vec<Vec2> = (0..5)
            .map(|i| {
                let a = i as f64 * 4.0 * std::f64::consts::PI / 5.0;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        assert!(matches!(ConvexPolygon::from_vertices(&star), Err(GeometryError::NonConvexInput { .. })));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = ConvexPolygon::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(cw.edge_count(), 4);
        assert_abs_diff_eq!(cw.signed_distance(&Vec2::new(0.5, 0.5)), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn signed_distance_examples() {
        let sq = unit_square();
        assert_abs_diff_eq!(sq.signed_distance(&Vec2::new(0.5, 0.5)), -0.5);
        assert_abs_diff_eq!(sq.signed_distance(&Vec2::new(0.5, 0.0)), 0.0);
        assert_abs_diff_eq!(sq.signed_distance(&Vec2::new(2.0, 0.5)), 1.0);
    }

    #[test]
    fn lse_residual_examples() {
        let sq = unit_square();
        assert!(sq.lse_residual(&Vec2::new(0.5, 0.0), 0.01).abs() < 1e-12);
        assert_abs_diff_eq!(sq.lse_residual(&Vec2::new(0.0, 0.0), 0.01), -0.01 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            sq.lse_residual(&Vec2::new(0.5, 0.5), 0.01),
            -0.01 * (4f64.ln() - 50.0),
            epsilon = 1e-14
        );
        // far away: no overflow
        assert!(sq.lse_residual(&Vec2::new(1e6, -1e6), 1e-3).is_finite());
    }

    #[test]
    fn lse_gradient_examples() {
        let sq = unit_square();
        let g = sq.lse_gradient(&Vec2::new(0.5, 0.0), 0.01);
        assert_abs_diff_eq!(g.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y, 1.0, epsilon = 1e-12);
        let g = sq.lse_gradient(&Vec2::new(0.0, 0.0), 0.01);
        assert_abs_diff_eq!(g.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn projection_examples() {
        let sq = unit_square();
        assert_abs_diff_eq!(sq.project_to_perimeter(&Vec2::new(0.5, -1.0)), Vec2::new(0.5, 0.0));
        assert_abs_diff_eq!(sq.project_to_perimeter(&Vec2::new(0.5, 0.5)), Vec2::new(0.5, 0.0));
        assert_abs_diff_eq!(sq.project_to_perimeter(&Vec2::new(2.0, 2.0)), Vec2::new(1.0, 1.0));
    }

    #[test]
    fn perimeter_point_examples() {
        let sq = unit_square();
        assert_abs_diff_eq!(sq.perimeter_point(0.0), Vec2::new(0.0, 0.0));
        assert_abs_diff_eq!(sq.perimeter_point(0.25), Vec2::new(1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(sq.perimeter_point(0.125), Vec2::new(0.5, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(sq.perimeter_coordinate(&Vec2::new(0.5, 1.0)), 0.625, epsilon = 1e-15);
    }

    #[test]
    fn segment_clear_examples() {
        let sq = unit_square();
        assert!(!sq.segment_clear(&Vec2::new(-1.0, 0.5), &Vec2::new(2.0, 0.5), 0.0));
        assert!(sq.segment_clear(&Vec2::new(-1.0, 2.0), &Vec2::new(2.0, 2.0), 0.5));
        assert!(!sq.segment_clear(&Vec2::new(-1.0, 1.4), &Vec2::new(2.0, 1.4), 0.5));
        // grazing the inflated boundary exactly counts as clear
        assert!(sq.segment_clear(&Vec2::new(-1.0, 1.5), &Vec2::new(2.0, 1.5), 0.5));
        // degenerate segment
        assert!(!sq.segment_clear(&Vec2::new(0.5, 0.5), &Vec2::new(0.5, 0.5), 0.0));
        assert!(sq.segment_clear(&Vec2::new(3.0, 0.5), &Vec2::new(3.0, 0.5), 0.0));
    }

    #[test]
    fn hull_and_overlap() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(1.0, 0.0),
        ];
        let h = ConvexPolygon::hull(&pts).unwrap();
        assert_eq!(h.edge_count(), 4);
        let far = ConvexPolygon::from_vertices(&[Vec2::new(3.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(4.0, 1.0)])
            .unwrap();
        assert!(!h.overlaps(&far, 0.5));
        assert!(h.overlaps(&far, 1.5));
        assert!(h.overlaps(&h.clone(), 0.0));
    }
}
