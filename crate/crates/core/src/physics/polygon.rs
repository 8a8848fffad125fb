//! Minimal 2D convex polygon toolkit backing footprint overlap and
//! support-polygon stability.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P2 {
    pub x: f64,
    pub y: f64,
}

impl P2 {
    pub fn new(x: f64, y: f64) -> Self {
        P2 { x, y }
    }
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew monotone chain; returns CCW hull without the repeated endpoint.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub fn area(poly: &[P2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        a += poly[i].x * poly[j].y - poly[j].x * poly[i].y;
    }
    a.abs() / 2.0
}

/// Clips a convex CCW polygon by the half-plane { p : n.p <= d }.
fn clip_halfplane(poly: &[P2], nx: f64, ny: f64, d: f64) -> Vec<P2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let inside = |p: P2| nx * p.x + ny * p.y <= d + 1e-12;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let ia = inside(a);
        let ib = inside(b);
        if ia {
            out.push(a);
        }
        if ia != ib {
            let da = nx * a.x + ny * a.y - d;
            let db = nx * b.x + ny * b.y - d;
            let t = da / (da - db);
            out.push(P2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    out
}

/// Intersection of two convex CCW polygons (Sutherland-Hodgman).
pub fn intersect_convex(a: &[P2], b: &[P2]) -> Vec<P2> {
    if a.len() < 3 || b.len() < 3 {
        return Vec::new();
    }
    let mut out = a.to_vec();
    for i in 0..b.len() {
        if out.is_empty() {
            break;
        }
        let p = b[i];
        let q = b[(i + 1) % b.len()];
        // inward normal of CCW edge (p,q) points left; keep the left side
        let nx = q.y - p.y;
        let ny = p.x - q.x;
        let d = nx * p.x + ny * p.y;
        out = clip_halfplane(&out, nx, ny, d);
    }
    out
}

/// Shrinks a convex CCW polygon inward by `margin` (half-plane offsets).
pub fn shrink(poly: &[P2], margin: f64) -> Vec<P2> {
    if poly.len() < 3 {
        return Vec::new();
    }
    let mut out = poly.to_vec();
    for i in 0..poly.len() {
        if out.is_empty() {
            break;
        }
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let len = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt();
        if len < 1e-12 {
            continue;
        }
        let nx = (q.y - p.y) / len;
        let ny = (p.x - q.x) / len;
        let d = nx * p.x + ny * p.y - margin;
        out = clip_halfplane(&out, nx, ny, d);
    }
    out
}

pub fn contains_point(poly: &[P2], p: P2) -> bool {
    if poly.len() < 3 {
        return false;
    }
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if cross(a, b, p) < -1e-12 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(half: f64, cx: f64, cy: f64) -> Vec<P2> {
        vec![
            P2::new(cx - half, cy - half),
            P2::new(cx + half, cy - half),
            P2::new(cx + half, cy + half),
            P2::new(cx - half, cy + half),
        ]
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let mut pts = square(1.0, 0.0, 0.0);
        pts.push(P2::new(0.1, 0.2));
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((area(&hull) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn intersection_of_offset_squares() {
        let a = square(1.0, 0.0, 0.0);
        let b = square(1.0, 1.0, 1.0);
        let inter = intersect_convex(&a, &b);
        assert!((area(&inter) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_squares_have_empty_intersection() {
        let a = square(1.0, 0.0, 0.0);
        let b = square(1.0, 5.0, 0.0);
        assert!(area(&intersect_convex(&a, &b)) < 1e-12);
    }

    #[test]
    fn shrink_reduces_square() {
        let s = shrink(&square(1.0, 0.0, 0.0), 0.25);
        assert!((area(&s) - 2.25).abs() < 1e-9);
        assert!(contains_point(&s, P2::new(0.0, 0.0)));
        assert!(!contains_point(&s, P2::new(0.9, 0.0)));
    }

    #[test]
    fn shrink_past_center_vanishes() {
        let s = shrink(&square(0.1, 0.0, 0.0), 0.2);
        assert!(area(&s) < 1e-12);
    }
}
