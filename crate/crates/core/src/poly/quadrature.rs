//! Gauss-Legendre rules on [0,1] and composite rules on star-shaped
//! polygons (centroid fan + Duffy-collapsed tensor rules per triangle,
//! with an ear-clipping fallback for non-star-shaped loops).

use super::PolyError;
use crate::mesh::ElementGeometry;
use nalgebra::Point2;

/// Quadrature on a 2D region.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(Point2<f64>) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Quadrature on the unit interval \[0,1\].
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl EdgeRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on (-1, 1), by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // p_n(x) and its derivative via the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss-Legendre rule on \[0,1\], exact for polynomials of degree `order`.
pub fn edge_quadrature(order: usize) -> EdgeRule {
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n.max(1));
    EdgeRule {
        nodes: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
        exactness: order,
    }
}

fn push_triangle(
    rule: &mut QuadratureRule,
    a: Point2<f64>,
    b: Point2<f64>,
    c: Point2<f64>,
    order: usize,
) {
    // Duffy collapse of [0,1]^2 onto the triangle; the Jacobian factor u
    // raises the u-degree by one.
    let ru = edge_quadrature(order + 1);
    let rv = edge_quadrature(order);
    let area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    for (&u, &wu) in ru.nodes.iter().zip(&ru.weights) {
        for (&v, &wv) in rv.nodes.iter().zip(&rv.weights) {
            let p = a + (b - a) * u + (c - b) * (u * v);
            rule.nodes.push(p);
            rule.weights.push(area2 * u * wu * wv);
        }
    }
}

fn signed_area2(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)
}

fn point_in_triangle(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> bool {
    let d1 = signed_area2(p, a, b);
    let d2 = signed_area2(p, b, c);
    let d3 = signed_area2(p, c, a);
    (d1 > 0.0 && d2 > 0.0 && d3 > 0.0) || (d1 < 0.0 && d2 < 0.0 && d3 < 0.0)
}

/// Ear clipping of a simple CCW polygon into triangles.
fn ear_clip(vertices: &[Point2<f64>]) -> Result<Vec<[Point2<f64>; 3]>, PolyError> {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut tris = Vec::with_capacity(vertices.len().saturating_sub(2));
    let mut guard = 0usize;
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (vertices[ia], vertices[ib], vertices[ic]);
            if signed_area2(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx
                .iter()
                .any(|&j| j != ia && j != ib && j != ic && point_in_triangle(vertices[j], a, b, c));
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        guard += 1;
        if !clipped || guard > vertices.len() * vertices.len() {
            return Err(PolyError::DegenerateGeometry(
                "ear clipping failed; polygon may be non-simple".into(),
            ));
        }
    }
    tris.push([vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]]);
    Ok(tris)
}

/// Composite rule on a polygon, exact for polynomials of degree `order`.
///
/// Fans from the centroid when the polygon is star-shaped with respect to
/// it (every fan triangle positively oriented), otherwise falls back to
/// ear clipping.
pub fn polygon_quadrature(geom: &ElementGeometry, order: usize) -> Result<QuadratureRule, PolyError> {
    let mut rule = QuadratureRule {
        nodes: Vec::new(),
        weights: Vec::new(),
        exactness: order,
    };
    let n = geom.vertices.len();
    let c = geom.centroid;
    let fan_ok = (0..n).all(|i| {
        signed_area2(c, geom.vertices[i], geom.vertices[(i + 1) % n]) > 1e-14 * geom.diameter * geom.diameter
    });
    if fan_ok {
        for i in 0..n {
            push_triangle(&mut rule, c, geom.vertices[i], geom.vertices[(i + 1) % n], order);
        }
    } else {
        for [a, b, cc] in ear_clip(&geom.vertices)? {
            push_triangle(&mut rule, a, b, cc, order);
        }
    }
    Ok(rule)
}
