//! 3D Quickhull.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Convex hull of a point set, as indices into the input slice.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    /// Hull vertex indices, ascending.
    pub vertices: Vec<usize>,
    /// Outward-oriented triangles.
    pub faces: Vec<[usize; 3]>,
    /// Undirected edges `(a, b)` with `a < b`, excluding the internal
    /// diagonals between coplanar triangles. Sorted.
    pub edges: Vec<(usize, usize)>,
    /// Distance tolerance used for visibility tests.
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(pts: &[Point3], v: [usize; 3]) -> Self {
        let [a, b, c] = v.map(|i| pts[i]);
        let n = (b - a).cross(&(c - a));
        let normal = n / n.norm();
        Self {
            v,
            normal,
            offset: normal.dot(&a.coords),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn dist(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    fn edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.v;
        [(a, b), (b, c), (c, a)]
    }
}

/// Cosine above which two adjacent hull triangles count as coplanar.
const COPLANAR_COS: f64 = 1.0 - 1e-9;

pub fn convex_hull(pts: &[Point3]) -> Result<ConvexHull> {
    if pts.len() < 4 {
        return Err(Error::DegenerateHull(format!(
            "convex hull needs at least 4 points, got {}",
            pts.len()
        )));
    }
    let max_abs = pts
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs(), p.z.abs()])
        .fold(0.0f64, f64::max);
    let eps = 1e-11 * max_abs.max(f64::MIN_POSITIVE);

    let [a, b, c, d] = initial_simplex(pts, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    let inner = Point3::from((pts[a].coords + pts[b].coords + pts[c].coords + pts[d].coords) / 4.0);
    for tri in [[a, b, c], [a, c, d], [a, d, b], [b, d, c]] {
        let mut f = Face::new(pts, tri);
        if f.dist(&inner) > 0.0 {
            f = Face::new(pts, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }
    let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for e in f.edges() {
            edge_map.insert(e, fi);
        }
    }
    for (i, p) in pts.iter().enumerate() {
        if [a, b, c, d].contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.dist(p) > eps) {
            f.outside.push(i);
        }
    }
    let mut pending: Vec<usize> = (0..faces.len()).filter(|&f| !faces[f].outside.is_empty()).collect();

    while let Some(fi) = pending.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let eye = {
            let f = &faces[fi];
            *f.outside
                .iter()
                .max_by(|&&i, &&j| f.dist(&pts[i]).total_cmp(&f.dist(&pts[j])).then(j.cmp(&i)))
                .expect("non-empty outside set")
        };
        let eye_p = pts[eye];

        // Visible region by flood fill from `fi`.
        let mut visible = vec![fi];
        let mut is_visible: HashMap<usize, bool> = HashMap::from([(fi, true)]);
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut cursor = 0;
        while cursor < visible.len() {
            let f = visible[cursor];
            cursor += 1;
            for (u, v) in faces[f].edges() {
                let g = edge_map[&(v, u)];
                let vis = match is_visible.get(&g) {
                    Some(&vis) => vis,
                    None => {
                        let vis = faces[g].dist(&eye_p) > eps;
                        is_visible.insert(g, vis);
                        if vis {
                            visible.push(g);
                        }
                        vis
                    }
                };
                if !vis {
                    horizon.push((u, v));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            let face = &mut faces[f];
            face.alive = false;
            orphans.append(&mut face.outside);
            for e in face.edges() {
                edge_map.remove(&e);
            }
        }
        let first_new = faces.len();
        for &(u, v) in &horizon {
            let f = Face::new(pts, [u, v, eye]);
            let id = faces.len();
            for e in f.edges() {
                edge_map.insert(e, id);
            }
            faces.push(f);
        }
        for i in orphans {
            if i == eye {
                continue;
            }
            let p = &pts[i];
            if let Some(f) = faces[first_new..].iter_mut().find(|f| f.dist(p) > eps) {
                f.outside.push(i);
            }
        }
        pending.extend((first_new..faces.len()).filter(|&f| !faces[f].outside.is_empty()));
    }

    let alive: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let mut vertices: Vec<usize> = alive.iter().flat_map(|f| f.v).collect();
    vertices.sort_unstable();
    vertices.dedup();
    let mut edges = Vec::new();
    for f in &alive {
        for (u, v) in f.edges() {
            if u > v {
                continue;
            }
            let g = &faces[edge_map[&(v, u)]];
            if f.normal.dot(&g.normal) > COPLANAR_COS {
                continue;
            }
            edges.push((u, v));
        }
    }
    edges.sort_unstable();
    Ok(ConvexHull {
        vertices,
        faces: alive.iter().map(|f| f.v).collect(),
        edges,
        tolerance: eps,
    })
}

fn initial_simplex(pts: &[Point3], eps: f64) -> Result<[usize; 4]> {
    let mut extremes = Vec::with_capacity(6);
    for k in 0..3 {
        let lo = (0..pts.len()).min_by(|&i, &j| pts[i][k].total_cmp(&pts[j][k])).unwrap_or(0);
        let hi = (0..pts.len()).max_by(|&i, &j| pts[i][k].total_cmp(&pts[j][k])).unwrap_or(0);
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (0.0, 0, 0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (pts[i] - pts[j]).norm();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let (span, a, b) = best;
    if span <= eps {
        return Err(Error::DegenerateHull("all points coincide; hull unavailable".into()));
    }
    let ab = (pts[b] - pts[a]) / span;
    let (line_d, c) = (0..pts.len())
        .map(|i| {
            let v = pts[i] - pts[a];
            ((v - ab * v.dot(&ab)).norm(), i)
        })
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
    if line_d <= eps {
        return Err(Error::DegenerateHull("collinear points; hull unavailable".into()));
    }
    let n = (pts[b] - pts[a]).cross(&(pts[c] - pts[a])).normalize();
    let (plane_d, d) = (0..pts.len())
        .map(|i| (n.dot(&(pts[i] - pts[a])).abs(), i))
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
    if plane_d <= eps {
        return Err(Error::DegenerateHull("2D hull; hull candidates unavailable".into()));
    }
    Ok([a, b, c, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_with_interior(seed: u64) -> Vec<Point3> {
        let mut pts: Vec<Point3> = (0..8)
            .map(|i| {
                Point3::new(
                    (i & 1) as f64,
                    ((i >> 1) & 1) as f64,
                    ((i >> 2) & 1) as f64,
                )
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            pts.push(Point3::new(
                rng.random_range(0.01..0.99),
                rng.random_range(0.01..0.99),
                rng.random_range(0.01..0.99),
            ));
        }
        pts
    }

    fn assert_contains_all(pts: &[Point3], hull: &ConvexHull) {
        for f in &hull.faces {
            let face = Face::new(pts, *f);
            for p in pts {
                assert!(face.dist(p) <= 1e-9, "point outside hull face by {}", face.dist(p));
            }
        }
    }

    #[test]
    fn cube_corners_are_the_hull() {
        let pts = cube_with_interior(1);
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices, (0..8).collect::<Vec<_>>());
        assert_eq!(hull.faces.len(), 12);
        assert_eq!(hull.edges.len(), 12);
        for &(u, v) in &hull.edges {
            let d = pts[v] - pts[u];
            assert_eq!(d.iter().filter(|c| c.abs() == 1.0).count(), 1);
        }
        assert_contains_all(&pts, &hull);
    }

    #[test]
    fn sphere_points_are_all_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3> = (0..400)
            .map(|_| {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                Point3::from(v.normalize())
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices.len(), pts.len());
        // Euler: V - E + F = 2 on a triangulated sphere.
        assert_eq!(hull.faces.len(), 2 * pts.len() - 4);
        assert_eq!(hull.edges.len(), 3 * pts.len() - 6);
    }

    #[test]
    fn random_cloud_containment_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3> = (0..500)
            .map(|_| Point3::new(rng.random(), rng.random::<f64>() * 2.0, rng.random()))
            .collect();
        let hull = convex_hull(&pts).unwrap();
        assert_contains_all(&pts, &hull);
        // Every hull vertex is extreme: it lies on at least one face plane.
        for &v in &hull.vertices {
            assert!(hull.faces.iter().any(|f| f.contains(&v)));
        }
    }

    #[test]
    fn tetrahedron_has_six_edges() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.edges.len(), 6);
        assert_eq!(hull.faces.len(), 4);
    }

    #[test]
    fn degenerate_inputs() {
        let flat: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64, (i * i % 7) as f64, 0.0)).collect();
        let err = convex_hull(&flat).unwrap_err().to_string();
        assert!(err.contains("2D hull"), "{err}");
        let line: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(convex_hull(&line).is_err());
        assert!(convex_hull(&line[..3]).is_err());
    }
}
