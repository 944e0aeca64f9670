//! Planar geometry for ray construction. Heights are handled by callers.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Compass bearing from `from` to `to`, degrees in [0, 360).
pub fn bearing_deg(from: Point, to: Point) -> f64 {
    let d = sub(to, from);
    normalize_az(d[0].atan2(d[1]).to_degrees())
}

pub fn normalize_az(az: f64) -> f64 {
    let a = az.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Signed azimuth difference in (-180, 180].
pub fn az_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Elevation angle of a ray rising `dz` over horizontal run `run`, degrees.
pub fn elevation_deg(dz: f64, run: f64) -> f64 {
    dz.atan2(run).to_degrees()
}

/// True when the open segments `p1-p2` and `q1-q2` cross at a single point
/// interior to both. Touching at an endpoint does not count.
pub fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let r = sub(p2, p1);
    let s = sub(q2, q1);
    let denom = cross(r, s);
    if denom.abs() < 1e-12 {
        return false;
    }
    let qp = sub(q1, p1);
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    const EPS: f64 = 1e-9;
    t > EPS && t < 1.0 - EPS && u > EPS && u < 1.0 - EPS
}

/// Intersection parameter `(t, u)` of the lines through `p1-p2` and `q1-q2`.
pub fn line_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<(f64, f64)> {
    let r = sub(p2, p1);
    let s = sub(q2, q1);
    let denom = cross(r, s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = sub(q1, p1);
    Some((cross(qp, s) / denom, cross(qp, r) / denom))
}

pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Mirror image of `p` across the line through `a` and `b`.
pub fn reflect_point(p: Point, a: Point, b: Point) -> Point {
    let d = sub(b, a);
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2;
    let foot = [a[0] + t * d[0], a[1] + t * d[1]];
    [2.0 * foot[0] - p[0], 2.0 * foot[1] - p[1]]
}

/// Which side of the line `a-b` the point lies on (sign of the cross product).
pub fn side(p: Point, a: Point, b: Point) -> f64 {
    cross(sub(b, a), sub(p, a)).signum()
}

/// Perpendicular distance from `p` to the infinite line through `a` and `b`.
pub fn distance_to_line(p: Point, a: Point, b: Point) -> f64 {
    let d = sub(b, a);
    cross(d, sub(p, a)).abs() / d[0].hypot(d[1])
}

/// Whether the segment `a-b` crosses any edge of the closed polygon.
pub fn segment_crosses_polygon(a: Point, b: Point, polygon: &[Point]) -> bool {
    let n = polygon.len();
    (0..n).any(|i| segments_cross(a, b, polygon[i], polygon[(i + 1) % n]))
}
