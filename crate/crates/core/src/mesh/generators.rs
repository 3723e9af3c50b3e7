//! Deterministic generators for the three mesh families of the
//! experiments: dyadic-boundary squares, hexagons with collapsing edges,
//! and square blocks with growing per-element edge counts.

use super::{MeshError, PolygonalMesh};
use nalgebra::Point2;
use std::collections::HashMap;

/// n x n axis-aligned squares of side 1/n, each side split into 2^m equal
/// edges, so every element boundary has 4*2^m edges and the number of mesh
/// edges is exactly 2*n*(n+1)*2^m.
pub fn generate_dyadic_square_mesh(n: usize, m: u32) -> PolygonalMesh {
    assert!(n >= 1, "need at least one square per side");
    let sub = 1usize << m;
    let denom = (n * sub) as f64;

    // All vertices live on gridlines; index them by integer lattice
    // coordinates in units of 1/(n*2^m) so shared points match exactly.
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices: Vec<Point2<f64>> = Vec::new();
    let mut vertex = |ix: usize, iy: usize, vertices: &mut Vec<Point2<f64>>| -> usize {
        *ids.entry((ix, iy)).or_insert_with(|| {
            vertices.push(Point2::new(ix as f64 / denom, iy as f64 / denom));
            vertices.len() - 1
        })
    };

    let mut elements = Vec::with_capacity(n * n);
    for cj in 0..n {
        for ci in 0..n {
            let (x0, x1) = (ci * sub, (ci + 1) * sub);
            let (y0, y1) = (cj * sub, (cj + 1) * sub);
            let mut loop_ = Vec::with_capacity(4 * sub);
            for ix in x0..x1 {
                loop_.push(vertex(ix, y0, &mut vertices));
            }
            for iy in y0..y1 {
                loop_.push(vertex(x1, iy, &mut vertices));
            }
            for ix in (x0 + 1..=x1).rev() {
                loop_.push(vertex(ix, y1, &mut vertices));
            }
            for iy in (y0 + 1..=y1).rev() {
                loop_.push(vertex(x0, iy, &mut vertices));
            }
            elements.push(loop_);
        }
    }

    PolygonalMesh::from_parts(vertices, elements).expect("dyadic generator produced a bad mesh")
}

/// Integer lattice point used while building the hexagonal tiling.
type IPoint = (i64, i64);

fn clip_half_plane(poly: &[IPoint], inside: impl Fn(IPoint) -> bool, axis_q: bool, c: i64) -> Vec<IPoint> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let p = poly[i];
        let s = poly[(i + 1) % poly.len()];
        let (pin, sin) = (inside(p), inside(s));
        let intersect = |p: IPoint, s: IPoint| -> IPoint {
            if axis_q {
                let (dq, dr) = (s.0 - p.0, s.1 - p.1);
                debug_assert!((c - p.0) * dr % dq == 0, "clip point off lattice");
                (c, p.1 + dr * (c - p.0) / dq)
            } else {
                let (dq, dr) = (s.0 - p.0, s.1 - p.1);
                debug_assert!((c - p.1) * dq % dr == 0, "clip point off lattice");
                (p.0 + dq * (c - p.1) / dr, c)
            }
        };
        match (pin, sin) {
            (true, true) => out.push(s),
            (true, false) => out.push(intersect(p, s)),
            (false, true) => {
                out.push(intersect(p, s));
                out.push(s);
            }
            (false, false) => {}
        }
    }
    // Remove consecutive duplicates introduced by vertices on the boundary.
    let mut dedup: Vec<IPoint> = Vec::with_capacity(out.len());
    for p in out {
        if dedup.last() != Some(&p) {
            dedup.push(p);
        }
    }
    if dedup.len() > 1 && dedup.first() == dedup.last() {
        dedup.pop();
    }
    dedup
}

fn ipoly_area2(poly: &[IPoint]) -> i64 {
    let mut a = 0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p.0 * q.1 - q.0 * p.1;
    }
    a
}

/// Flat-top hexagonal tiling of the unit square with ~2^level columns;
/// boundary cells are clipped to pentagons and quadrilaterals. From level 2
/// on, the designated (top) edge of every interior full hexagon is shrunk
/// to length s_level = R * shrink^(level-1) by moving its two endpoints
/// toward the edge midpoint, which keeps the tessellation conforming.
///
/// The cell geometry lives on the integer lattice (q, r) with spacing
/// (R/2, V/2); clipping intersections stay on the lattice, so shared
/// vertices coincide exactly.
pub fn generate_hexagonal_collapse_mesh(level: u32, shrink: f64) -> Result<PolygonalMesh, MeshError> {
    if level < 1 {
        return Err(MeshError::DegenerateGeometry("level must be >= 1".into()));
    }
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(MeshError::DegenerateGeometry(format!(
            "shrink factor {shrink} outside (0, 1]"
        )));
    }
    let cols = 1usize << level; // column pitch count; columns 0..=cols
    let r_hex = 2.0 / (3.0 * cols as f64);
    let shrink_pow = shrink.powi(level as i32 - 1);
    // Vertex-collision guard: collapsed edge must stay above 1e-14 * h_P.
    if r_hex * shrink_pow < 1e-14 * 2.0 * r_hex {
        return Err(MeshError::DegenerateGeometry(format!(
            "shrink {shrink} at level {level} collapses edges below 1e-14 * h_P"
        )));
    }

    let x_unit = r_hex / 2.0;
    let q_max = 3 * cols as i64; // q_max * x_unit == 1 exactly by construction
    // Vertical pitch snapped to 1/rows. The row count keeps the cell
    // aspect y_unit/x_unit strictly below sqrt(2); that bound keeps the
    // degeneracy ratio of the clipped boundary half-cells under 3.
    let rows = ((3.0 * cols as f64) / (2.0 * 2.0_f64.sqrt())).ceil() as i64;
    let y_unit = 1.0 / (2.0 * rows as f64);
    let r_max = 2 * rows;

    let mut cells: Vec<Vec<IPoint>> = Vec::new();
    let mut designated: Vec<(IPoint, IPoint)> = Vec::new();

    for i in 0..=(cols as i64) {
        let qc = 3 * i;
        let row_centers: Vec<i64> = if i % 2 == 0 {
            (0..=rows).map(|j| 2 * j).collect()
        } else {
            (0..rows).map(|j| 2 * j + 1).collect()
        };
        for rc in row_centers {
            let hex: Vec<IPoint> = vec![
                (qc + 2, rc),
                (qc + 1, rc + 1),
                (qc - 1, rc + 1),
                (qc - 2, rc),
                (qc - 1, rc - 1),
                (qc + 1, rc - 1),
            ];
            let full = hex
                .iter()
                .all(|&(q, r)| q >= 0 && q <= q_max && r >= 0 && r <= r_max);
            let clipped = if full {
                hex.clone()
            } else {
                let mut poly = hex.clone();
                poly = clip_half_plane(&poly, |p| p.0 >= 0, true, 0);
                if poly.len() < 3 {
                    continue;
                }
                poly = clip_half_plane(&poly, |p| p.0 <= q_max, true, q_max);
                if poly.len() < 3 {
                    continue;
                }
                poly = clip_half_plane(&poly, |p| p.1 >= 0, false, 0);
                if poly.len() < 3 {
                    continue;
                }
                poly = clip_half_plane(&poly, |p| p.1 <= r_max, false, r_max);
                if poly.len() < 3 || ipoly_area2(&poly) == 0 {
                    continue;
                }
                poly
            };
            if full && rc + 1 < r_max {
                // Interior top edge: eligible for the collapse.
                designated.push(((qc + 1, rc + 1), (qc - 1, rc + 1)));
            }
            cells.push(clipped);
        }
    }

    // Endpoint moves for the collapsed edges (identity at level 1 where
    // s equals the natural edge length).
    let mut moved: HashMap<IPoint, Point2<f64>> = HashMap::new();
    if shrink_pow < 1.0 {
        let s = r_hex * shrink_pow;
        for &(a, b) in &designated {
            let y = a.1 as f64 * y_unit;
            let mid_x = 0.5 * (a.0 + b.0) as f64 * x_unit;
            // a is the right endpoint (larger q), b the left one.
            moved.insert(a, Point2::new(mid_x + 0.5 * s, y));
            moved.insert(b, Point2::new(mid_x - 0.5 * s, y));
        }
    }

    let mut ids: HashMap<IPoint, usize> = HashMap::new();
    let mut vertices: Vec<Point2<f64>> = Vec::new();
    let mut elements: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut loop_ = Vec::with_capacity(cell.len());
        for &p in cell {
            let id = *ids.entry(p).or_insert_with(|| {
                let pos = moved
                    .get(&p)
                    .copied()
                    .unwrap_or_else(|| Point2::new(p.0 as f64 * x_unit, p.1 as f64 * y_unit));
                vertices.push(pos);
                vertices.len() - 1
            });
            loop_.push(id);
        }
        elements.push(loop_);
    }

    PolygonalMesh::from_parts(vertices, elements)
}

fn nside_base_splits(level: u32, growth: bool) -> usize {
    let q_flat = (3 * level as usize).div_ceil(2) + 2;
    if growth {
        (1usize << level) + q_flat + 1
    } else {
        q_flat
    }
}

/// Tiling by axis-aligned square blocks of side 1/2^level whose sides are
/// split into a position-dependent number of unequal edges, so element
/// edge counts vary across the mesh and grow with the level (arithmetic
/// growth for `growth = false`, geometric for `growth = true`). Blocks are
/// convex, hence star-shaped with an inscribed ball of radius h_P/(2*sqrt(2)).
pub fn generate_nside_mesh(level: u32, growth: bool) -> Result<PolygonalMesh, MeshError> {
    if level < 1 {
        return Err(MeshError::DegenerateGeometry("level must be >= 1".into()));
    }
    let g = 1usize << level;
    let block = 1.0 / g as f64;
    let base = nside_base_splits(level, growth);

    // Interior split points of one gridline segment: `pieces` cells with
    // alternating 1,2 weights (nonuniform but 2-graded).
    let splits = |pieces: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..pieces).map(|t| 1.0 + (t % 2) as f64).collect();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        w.iter()
            .take(pieces - 1)
            .map(|wi| {
                acc += wi;
                acc / total
            })
            .collect()
    };

    let mut ids: HashMap<(u64, u64), usize> = HashMap::new();
    let mut vertices: Vec<Point2<f64>> = Vec::new();
    let mut vertex = |p: Point2<f64>, vertices: &mut Vec<Point2<f64>>| -> usize {
        // Quantized key: coordinates are combinations of exact binary
        // block corners and per-segment fractions computed once, so the
        // key only guards against accidental recomputation drift.
        let key = ((p.x * 1e12).round() as u64, (p.y * 1e12).round() as u64);
        *ids.entry(key).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };

    // Point chains per gridline segment, shared by the two adjacent blocks.
    // The (i*j) parity offset makes per-element edge totals vary by block:
    // 4*base + i%2 + j%2.
    let h_count = |i: usize, j: usize| base + (i * j) % 2;
    let v_count = |i: usize, j: usize| base + (i * j) % 2;
    let mut h_chain: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut v_chain: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for j in 0..=g {
        for i in 0..g {
            let (x0, y) = (i as f64 * block, j as f64 * block);
            let mut chain = vec![vertex(Point2::new(x0, y), &mut vertices)];
            for f in splits(h_count(i, j)) {
                chain.push(vertex(Point2::new(x0 + f * block, y), &mut vertices));
            }
            chain.push(vertex(Point2::new(x0 + block, y), &mut vertices));
            h_chain.insert((i, j), chain);
        }
    }
    for j in 0..g {
        for i in 0..=g {
            let (x, y0) = (i as f64 * block, j as f64 * block);
            let mut chain = vec![vertex(Point2::new(x, y0), &mut vertices)];
            for f in splits(v_count(i, j)) {
                chain.push(vertex(Point2::new(x, y0 + f * block), &mut vertices));
            }
            chain.push(vertex(Point2::new(x, y0 + block), &mut vertices));
            v_chain.insert((i, j), chain);
        }
    }

    let mut elements = Vec::with_capacity(g * g);
    for j in 0..g {
        for i in 0..g {
            let bottom = &h_chain[&(i, j)];
            let right = &v_chain[&(i + 1, j)];
            let top = &h_chain[&(i, j + 1)];
            let left = &v_chain[&(i, j)];
            let mut loop_ = Vec::new();
            loop_.extend(&bottom[..bottom.len() - 1]);
            loop_.extend(&right[..right.len() - 1]);
            loop_.extend(top.iter().rev().take(top.len() - 1));
            loop_.extend(left.iter().rev().take(left.len() - 1));
            elements.push(loop_);
        }
    }

    PolygonalMesh::from_parts(vertices, elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{element_geometry, mesh_stats};
    use proptest::prelude::*;

    fn total_area(mesh: &PolygonalMesh) -> f64 {
        (0..mesh.n_elements())
            .map(|e| element_geometry(mesh, e).area)
            .sum()
    }

    #[test]
    fn dyadic_8_2_matches_reference_row() {
        let mesh = generate_dyadic_square_mesh(8, 2);
        let s = mesh_stats(&mesh);
        assert_eq!(s.n_elements, 64);
        assert_eq!(s.n_edges, 576);
        assert!((s.h - 1.767767e-01).abs() < 1e-7);
        assert!((s.h_min - 3.125e-02).abs() < 1e-15);
        assert!((s.gamma_h - 5.656854).abs() < 1e-6);
        assert!((total_area(&mesh) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dyadic_16_3_and_32_4_edge_counts() {
        let s = mesh_stats(&generate_dyadic_square_mesh(16, 3));
        assert_eq!(s.n_elements, 256);
        assert_eq!(s.n_edges, 4352);
        assert!((s.gamma_h - 8.0 * 2.0_f64.sqrt()).abs() < 1e-9);
        let s = mesh_stats(&generate_dyadic_square_mesh(32, 4));
        assert_eq!(s.n_edges, 2 * 32 * 33 * 16);
    }

    #[test]
    fn dyadic_1_0_is_unit_square() {
        let s = mesh_stats(&generate_dyadic_square_mesh(1, 0));
        assert_eq!((s.n_elements, s.n_edges), (1, 4));
        assert!((s.h - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!((s.h_min - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn dyadic_area_and_edge_count_law(n in 1usize..6, m in 0u32..4) {
            let mesh = generate_dyadic_square_mesh(n, m);
            prop_assert_eq!(mesh.n_edges(), 2 * n * (n + 1) * (1 << m));
            prop_assert!((total_area(&mesh) - 1.0).abs() < 1e-12);
            let s = mesh_stats(&mesh);
            let gamma = 2.0_f64.sqrt() * (1u64 << m) as f64;
            prop_assert!((s.gamma_h - gamma).abs() < 1e-9 * gamma);
        }
    }

    #[test]
    fn hexagonal_level1_regular() {
        let mesh = generate_hexagonal_collapse_mesh(1, 1.0).unwrap();
        assert!((total_area(&mesh) - 1.0).abs() < 1e-12);
        let s = mesh_stats(&mesh);
        assert!(s.gamma_h <= 3.0, "gamma_h = {}", s.gamma_h);
        // level 1 is independent of the shrink factor
        let other = generate_hexagonal_collapse_mesh(1, 0.5).unwrap();
        assert_eq!(other.n_elements(), mesh.n_elements());
        let so = mesh_stats(&other);
        assert!((so.gamma_h - s.gamma_h).abs() < 1e-14);
        // gamma_h agrees with the per-element geometry maximum
        let max_gamma = (0..mesh.n_elements())
            .map(|e| element_geometry(&mesh, e).gamma())
            .fold(0.0_f64, f64::max);
        assert!((s.gamma_h - max_gamma).abs() < 1e-14);
    }

    #[test]
    fn hexagonal_shrink_law() {
        let a = generate_hexagonal_collapse_mesh(2, 0.5).unwrap();
        let b = generate_hexagonal_collapse_mesh(2, 1.0 / 128.0).unwrap();
        assert_eq!(a.n_elements(), b.n_elements());
        assert_eq!(a.n_edges(), b.n_edges());
        let (sa, sb) = (mesh_stats(&a), mesh_stats(&b));
        let ratio = sb.h_min / sa.h_min;
        assert!(
            (ratio - 1.0 / 64.0).abs() < 1e-12,
            "h_min ratio {ratio} should be 1/64"
        );
        assert!((total_area(&a) - 1.0).abs() < 1e-12);
        assert!((total_area(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hexagonal_rejects_vertex_collision() {
        assert!(generate_hexagonal_collapse_mesh(14, 1e-11).is_err());
    }

    #[test]
    fn nside_edge_histogram_and_area() {
        let mesh = generate_nside_mesh(1, false).unwrap();
        assert!((total_area(&mesh) - 1.0).abs() < 1e-12);
        let mut counts: Vec<usize> = (0..mesh.n_elements())
            .map(|e| mesh.element(e).len())
            .collect();
        counts.sort_unstable();
        counts.dedup();
        assert!(counts.len() >= 2, "expected at least two distinct edge counts");
    }

    #[test]
    fn nside_growth_has_more_edges() {
        let flat = generate_nside_mesh(2, false).unwrap();
        let grow = generate_nside_mesh(2, true).unwrap();
        let max_edges = |m: &PolygonalMesh| (0..m.n_elements()).map(|e| m.element(e).len()).max();
        assert!(max_edges(&grow).unwrap() > max_edges(&flat).unwrap());
        assert!((total_area(&grow) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nside_blocks_are_star_shaped() {
        let mesh = generate_nside_mesh(1, false).unwrap();
        for e in 0..mesh.n_elements() {
            let g = element_geometry(&mesh, e);
            // convex blocks: inscribed ball of radius block/2 around centroid
            let r = g
                .edges
                .iter()
                .map(|ed| {
                    let mid = nalgebra::center(&ed.endpoints.0, &ed.endpoints.1);
                    (mid - g.centroid).dot(&ed.normal)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(r >= 0.25 * g.diameter, "kernel ball too small: {r}");
        }
    }
}
