//! Convex polygon arithmetic in the plane and root finding for affine
//! functions along a segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AffineFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Numerical tolerances for cutting polygons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomTolerance {
    /// Relative factor of the on-line deadband; the absolute band for a
    /// cut `a·x + b` on a polygon of radius `r` is
    /// `side_eps * (1 + |b| + |a| r)`.
    pub side_eps: f64,
    /// Vertices closer than this are merged.
    pub merge_eps: f64,
    /// Pieces with smaller area are dropped.
    pub min_area: f64,
}

impl Default for GeomTolerance {
    fn default() -> Self {
        GeomTolerance {
            side_eps: 1e-10,
            merge_eps: 1e-9,
            min_area: 1e-12,
        }
    }
}

impl GeomTolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_eps > 0.0 && self.merge_eps > 0.0 && self.min_area > 0.0) {
            return Err(Error::InvalidPolygon(
                "tolerances must all be strictly positive".into(),
            ));
        }
        Ok(())
    }

    fn deadband(&self, f: &AffineFunction, radius: f64) -> f64 {
        self.side_eps * (1.0 + f.offset.abs() + f.gradient_norm() * radius)
    }
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for ConvexPolygon {
    type Error = Error;

    fn try_from(vertices: Vec<Point2>) -> Result<Self> {
        ConvexPolygon::new(vertices)
    }
}

impl From<ConvexPolygon> for Vec<Point2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

/// Relative tolerance of the convexity check (cross products are compared
/// against the product of adjacent edge lengths).
const CONVEXITY_EPS: f64 = 1e-9;

impl ConvexPolygon {
    /// Validates orientation and convexity. Clockwise input is rejected
    /// rather than silently reversed.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let poly = ConvexPolygon { vertices };
        poly.validate()?;
        Ok(poly)
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    /// The default domain `[-1, 1]²`.
    pub fn unit_box() -> Self {
        Self::rectangle(-1.0, -1.0, 1.0, 1.0).expect("valid square")
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.vertices;
        if v.len() < 3 {
            return Err(Error::InvalidPolygon(format!("{} vertices", v.len())));
        }
        if v.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        if signed_area(v) <= 0.0 {
            return Err(Error::InvalidPolygon("orientation is not counter-clockwise".into()));
        }
        if !is_convex_ccw(v) {
            return Err(Error::InvalidPolygon("not convex".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let v = &self.vertices;
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        // Shift to the first vertex to limit cancellation on tiny cells.
        let o = v[0];
        for i in 0..v.len() {
            let p = Point2::new(v[i].x - o.x, v[i].y - o.y);
            let q = v[(i + 1) % v.len()];
            let q = Point2::new(q.x - o.x, q.y - o.y);
            let c = p.x * q.y - q.x * p.y;
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2))
    }

    /// Maximum distance of any vertex from the origin.
    pub fn radius(&self) -> f64 {
        self.vertices.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Signed distance from `p` to each edge's supporting line, positive
    /// on the inner side.
    pub fn edge_distances(&self, p: Point2) -> impl Iterator<Item = f64> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            (ex * (p.y - a.y) - ey * (p.x - a.x)) / ex.hypot(ey)
        })
    }

    pub fn min_edge_distance(&self, p: Point2) -> f64 {
        self.edge_distances(p).fold(f64::INFINITY, f64::min)
    }

    pub fn contains_strictly(&self, p: Point2) -> bool {
        self.min_edge_distance(p) > 0.0
    }

    /// Radius of the largest inscribed disc, by bisection on inward edge
    /// offsets.
    pub fn inradius(&self) -> f64 {
        let n = self.vertices.len();
        let edges: Vec<AffineFunction> = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let len = ex.hypot(ey);
                // Positive inside: (-ey, ex)·(p - a) / len.
                AffineFunction::new(vec![-ey / len, ex / len], (ey * a.x - ex * a.y) / len)
            })
            .collect();
        let feasible = |r: f64| {
            let mut poly: Vec<Point2> = self.vertices.clone();
            for e in &edges {
                let shifted = AffineFunction::new(e.coeffs.clone(), e.offset - r);
                poly = clip_keep_nonneg(&poly, &shifted);
                if poly.len() < 3 {
                    return false;
                }
            }
            signed_area(&poly) > 0.0
        };
        // A disc cannot have more area than the polygon.
        let (mut lo, mut hi) = (0.0, (self.area() / std::f64::consts::PI).sqrt());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    let o = v[0];
    let mut a2 = 0.0;
    for i in 1..v.len().saturating_sub(1) {
        let p = v[i];
        let q = v[i + 1];
        a2 += (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y);
    }
    0.5 * a2
}

fn is_convex_ccw(v: &[Point2]) -> bool {
    let n = v.len();
    (0..n).all(|i| {
        let a = v[i];
        let b = v[(i + 1) % n];
        let c = v[(i + 2) % n];
        let (ux, uy) = (b.x - a.x, b.y - a.y);
        let (wx, wy) = (c.x - b.x, c.y - b.y);
        let cross = ux * wy - uy * wx;
        cross > -CONVEXITY_EPS * ux.hypot(uy) * wx.hypot(wy)
    })
}

/// Plain Sutherland–Hodgman step keeping `f >= 0`, no deadband.
fn clip_keep_nonneg(poly: &[Point2], f: &AffineFunction) -> Vec<Point2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = f.eval(&p.to_array());
        let fq = f.eval(&q.to_array());
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            out.push(p.lerp(q, fp / (fp - fq)));
        }
    }
    out
}

/// Split `poly` by the zero line of `f`. The first part is the closure of
/// `{f > 0}`, the second of `{f <= 0}`; parts below `tol.min_area` are
/// returned as `None`. Vertices within the deadband go to both parts.
pub fn split_polygon(
    poly: &ConvexPolygon,
    f: &AffineFunction,
    tol: &GeomTolerance,
) -> Result<(Option<ConvexPolygon>, Option<ConvexPolygon>)> {
    if f.coeffs.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: f.coeffs.len(),
        });
    }
    Ok(split_unchecked(poly, f, tol))
}

pub(crate) fn split_unchecked(
    poly: &ConvexPolygon,
    f: &AffineFunction,
    tol: &GeomTolerance,
) -> (Option<ConvexPolygon>, Option<ConvexPolygon>) {
    let eps = tol.deadband(f, poly.radius());
    let verts = &poly.vertices;
    let values: Vec<f64> = verts.iter().map(|p| f.eval(&p.to_array())).collect();
    let side = |v: f64| {
        if v > eps {
            1i8
        } else if v < -eps {
            -1
        } else {
            0
        }
    };
    let sides: Vec<i8> = values.iter().map(|&v| side(v)).collect();
    let has_pos = sides.iter().any(|&s| s > 0);
    let has_neg = sides.iter().any(|&s| s < 0);
    if !has_pos {
        return (None, Some(poly.clone()));
    }
    if !has_neg {
        return (Some(poly.clone()), None);
    }

    let n = verts.len();
    let mut pos = Vec::with_capacity(n + 2);
    let mut neg = Vec::with_capacity(n + 2);
    for i in 0..n {
        let j = (i + 1) % n;
        let (si, sj) = (sides[i], sides[j]);
        if si >= 0 {
            pos.push(verts[i]);
        }
        if si <= 0 {
            neg.push(verts[i]);
        }
        if si * sj < 0 {
            let t = values[i] / (values[i] - values[j]);
            let x = verts[i].lerp(verts[j], t);
            pos.push(x);
            neg.push(x);
        }
    }
    (finish_piece(pos, tol), finish_piece(neg, tol))
}

fn finish_piece(mut v: Vec<Point2>, tol: &GeomTolerance) -> Option<ConvexPolygon> {
    dedup_ring(&mut v, tol.merge_eps);
    if v.len() < 3 {
        return None;
    }
    drop_collinear(&mut v);
    if v.len() < 3 || signed_area(&v) < tol.min_area {
        return None;
    }
    Some(ConvexPolygon { vertices: v })
}

fn dedup_ring(v: &mut Vec<Point2>, merge_eps: f64) {
    v.dedup_by(|b, a| a.dist(*b) < merge_eps);
    while v.len() > 1 && v[0].dist(*v.last().unwrap()) < merge_eps {
        v.pop();
    }
}

/// Remove vertices whose turn is numerically flat or reflex, which only
/// appears when a crossing lands next to an existing vertex.
fn drop_collinear(v: &mut Vec<Point2>) {
    let mut changed = true;
    while changed && v.len() >= 3 {
        changed = false;
        let n = v.len();
        for i in 0..n {
            let a = v[(i + n - 1) % n];
            let b = v[i];
            let c = v[(i + 1) % n];
            let (ux, uy) = (b.x - a.x, b.y - a.y);
            let (wx, wy) = (c.x - b.x, c.y - b.y);
            let cross = ux * wy - uy * wx;
            if cross <= CONVEXITY_EPS * ux.hypot(uy) * wx.hypot(wy) * 1e-3 {
                v.remove(i);
                changed = true;
                break;
            }
        }
    }
}

/// A point strictly inside `poly`: the centroid, or failing that the
/// vertex average, or failing that the midpoint between the centroid and
/// the midpoint of the longest diagonal from the vertex farthest from it.
pub fn interior_point(poly: &ConvexPolygon) -> Result<Point2> {
    let c = poly.centroid();
    if poly.contains_strictly(c) {
        return Ok(c);
    }
    let n = poly.vertices.len() as f64;
    let avg = Point2::new(
        poly.vertices.iter().map(|p| p.x).sum::<f64>() / n,
        poly.vertices.iter().map(|p| p.y).sum::<f64>() / n,
    );
    if poly.contains_strictly(avg) {
        return Ok(avg);
    }
    let far = poly
        .vertices
        .iter()
        .copied()
        .max_by(|a, b| a.dist(c).total_cmp(&b.dist(c)))
        .expect("non-empty polygon");
    let mid = Point2::new(0.5 * (far.x + c.x), 0.5 * (far.y + c.y));
    let guess = Point2::new(0.5 * (mid.x + c.x), 0.5 * (mid.y + c.y));
    if poly.contains_strictly(guess) {
        return Ok(guess);
    }
    Err(Error::DegeneratePolygon)
}

/// Root of `f(t) = slope·t + intercept` strictly inside `(0, 1)` when the
/// sign changes across the interval; `None` for `|slope| < eps`.
pub fn segment_root(slope: f64, intercept: f64, eps: f64) -> Option<f64> {
    if slope.abs() < eps {
        return None;
    }
    let f0 = intercept;
    let f1 = slope + intercept;
    if !(f0 < 0.0 && f1 > 0.0 || f0 > 0.0 && f1 < 0.0) {
        return None;
    }
    let t = -intercept / slope;
    (t > 0.0 && t < 1.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(a: f64, b: f64, c: f64) -> AffineFunction {
        AffineFunction::new(vec![a, b], c)
    }

    fn tol() -> GeomTolerance {
        GeomTolerance::default()
    }

    #[test]
    fn areas() {
        assert_eq!(ConvexPolygon::unit_box().area(), 4.0);
        let tri = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        assert!((tri.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert!(ConvexPolygon::new(cw).is_err());
        assert!(ConvexPolygon::new(vec![Point2::ORIGIN, Point2::new(1.0, 0.0)]).is_err());
        let dart = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 2.0),
        ];
        assert!(ConvexPolygon::new(dart).is_err());
    }

    #[test]
    fn axis_split() {
        let (p, n) = split_polygon(&ConvexPolygon::unit_box(), &line(1.0, 0.0, 0.0), &tol()).unwrap();
        let (p, n) = (p.unwrap(), n.unwrap());
        assert!((p.area() - 2.0).abs() < 1e-12);
        assert!((n.area() - 2.0).abs() < 1e-12);
        assert!(p.vertices().iter().all(|v| v.x >= 0.0));
        assert!(n.vertices().iter().all(|v| v.x <= 0.0));
    }

    #[test]
    fn miss_goes_to_negative() {
        let sq = ConvexPolygon::unit_box();
        let (p, n) = split_polygon(&sq, &line(1.0, 0.0, -5.0), &tol()).unwrap();
        assert!(p.is_none());
        assert_eq!(n.unwrap(), sq);
    }

    #[test]
    fn diagonal_split_through_vertices() {
        let (p, n) = split_polygon(&ConvexPolygon::unit_box(), &line(1.0, 1.0, 0.0), &tol()).unwrap();
        let (p, n) = (p.unwrap(), n.unwrap());
        assert_eq!(p.vertices().len(), 3);
        assert_eq!(n.vertices().len(), 3);
        assert!((p.area() - 2.0).abs() < 1e-12);
        assert!((n.area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_function_is_inactive() {
        let sq = ConvexPolygon::unit_box();
        let (p, n) = split_polygon(&sq, &line(0.0, 0.0, 0.0), &tol()).unwrap();
        assert!(p.is_none());
        assert_eq!(n.unwrap(), sq);
    }

    #[test]
    fn split_requires_planar_function() {
        let f = AffineFunction::new(vec![1.0, 0.0, 0.0], 0.0);
        assert!(split_polygon(&ConvexPolygon::unit_box(), &f, &tol()).is_err());
    }

    #[test]
    fn interior_points() {
        assert_eq!(interior_point(&ConvexPolygon::unit_box()).unwrap(), Point2::ORIGIN);
        let tri = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        let c = interior_point(&tri).unwrap();
        assert!((c.x - 1.0 / 3.0).abs() < 1e-15 && (c.y - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn segment_roots() {
        assert_eq!(segment_root(2.0, -1.0, 1e-12), Some(0.5));
        assert_eq!(segment_root(1.0, 1.0, 1e-12), None);
        assert_eq!(segment_root(0.0, 0.0, 1e-12), None);
        assert_eq!(segment_root(-4.0, 1.0, 1e-12), Some(0.25));
        // Root at an endpoint is not strictly inside.
        assert_eq!(segment_root(1.0, 0.0, 1e-12), None);
    }

    #[test]
    fn inradius_of_square_and_triangle() {
        assert!((ConvexPolygon::unit_box().inradius() - 1.0).abs() < 1e-9);
        let tri = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(0.0, 4.0),
        ])
        .unwrap();
        // r = area / semiperimeter = 6 / 6.
        assert!((tri.inradius() - 1.0).abs() < 1e-9);
    }

    fn arb_polygon() -> impl Strategy<Value = ConvexPolygon> {
        // Random cuts of the unit box keep the polygon convex by construction.
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.5f64..0.5), 0..5).prop_map(|cuts| {
            let mut poly = ConvexPolygon::unit_box();
            for (a, b, c) in cuts {
                if let (Some(p), _) = split_unchecked(&poly, &line(a, b, c), &tol()) {
                    if p.area() > 1e-3 {
                        poly = p;
                    }
                }
            }
            poly
        })
    }

    proptest! {
        #[test]
        fn split_conserves_area_and_convexity(
            poly in arb_polygon(),
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.5f64..1.5,
        ) {
            let f = line(a, b, c);
            let (p, n) = split_polygon(&poly, &f, &tol()).unwrap();
            let total: f64 = p.iter().chain(n.iter()).map(|q| q.area()).sum();
            prop_assert!((total - poly.area()).abs() <= 1e-9 * poly.area() + 2.0 * tol().min_area);
            for q in p.iter().chain(n.iter()) {
                prop_assert!(q.validate().is_ok());
            }
            let x = interior_point(&poly).unwrap();
            let fx = f.eval(&x.to_array());
            let in_p = p.as_ref().is_some_and(|q| q.min_edge_distance(x) > -1e-9);
            let in_n = n.as_ref().is_some_and(|q| q.min_edge_distance(x) > -1e-9);
            prop_assert!(in_p || in_n);
            if fx.abs() > 1e-6 {
                prop_assert!(in_p ^ in_n);
            }
        }

        #[test]
        fn split_sides_are_pure(
            poly in arb_polygon(),
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.5f64..1.5,
            weights in prop::collection::vec(0.01f64..1.0, 10),
        ) {
            let f = line(a, b, c);
            let (p, n) = split_unchecked(&poly, &f, &tol());
            let eps = 1e-9;
            for (part, sign) in [(p, 1.0), (n, -1.0)] {
                let Some(q) = part else { continue };
                // Convex combinations of the vertices are interior samples.
                for k in 0..10 {
                    let ws: Vec<f64> = (0..q.vertices().len())
                        .map(|i| weights[(i + k) % weights.len()])
                        .collect();
                    let s: f64 = ws.iter().sum();
                    let x = q.vertices().iter().zip(&ws).fold(Point2::ORIGIN, |acc, (v, w)| {
                        Point2::new(acc.x + v.x * w / s, acc.y + v.y * w / s)
                    });
                    prop_assert!(sign * f.eval(&x.to_array()) > -eps);
                }
            }
        }

        #[test]
        fn interior_point_is_strictly_inside(poly in arb_polygon()) {
            let x = interior_point(&poly).unwrap();
            prop_assert!(poly.edge_distances(x).all(|d| d > 0.0));
        }
    }
}
