use super::Scene;
use crate::error::{Error, Result};
use crate::spatial::{dist, Grid, P3};

/// Undirected weighted edge with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub w: f64,
}

/// Weight of the edge between points `i` and `j`: spatial distance plus
/// `color_weight` times the Euclidean RGB distance (RGB in `[0, 1]`).
pub fn edge_weight(scene: &Scene, i: usize, j: usize, color_weight: f64) -> f64 {
    let ci = scene.color(i);
    let cj = scene.color(j);
    dist(&scene.point(i), &scene.point(j)) + color_weight * dist(&ci, &cj)
}

/// Grid cell size giving a handful of points per occupied cell.
pub(crate) fn auto_cell(points: &[P3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let ext = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
    let n = points.len().max(1) as f64;
    let cell = ext / n.sqrt().max(1.0) * 2.0;
    if cell.is_finite() && cell > 1e-9 {
        cell
    } else {
        1.0
    }
}

/// Connects every point to its `k` nearest neighbours. Edges are undirected,
/// deduplicated and sorted by `(weight, a, b)`.
pub fn build_knn_graph(scene: &Scene, k: usize, color_weight: f64) -> Result<Vec<Edge>> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let pts = scene.points_f64();
    let grid = Grid::new(&pts, auto_cell(&pts));
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(pts.len() * k);
    for (i, p) in pts.iter().enumerate() {
        for (j, _) in grid.knn(p, k, Some(i)) {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            pairs.push((a as u32, b as u32));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            w: edge_weight(scene, a as usize, b as usize, color_weight),
        })
        .collect();
    sort_edges(&mut edges);
    Ok(edges)
}

pub fn sort_edges(edges: &mut [Edge]) {
    edges.sort_by(|x, y| x.w.total_cmp(&y.w).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene(points: Vec<[f32; 3]>) -> Scene {
        let n = points.len();
        Scene::new("t", points, vec![[10, 20, 30]; n], vec![-1; n]).unwrap()
    }

    #[test]
    fn single_point_has_no_edges() {
        assert!(build_knn_graph(&scene(vec![[0.0; 3]]), 1, 0.2).unwrap().is_empty());
    }

    #[test]
    fn two_points_one_edge() {
        let e = build_knn_graph(&scene(vec![[0.0; 3], [0.5, 0.0, 0.0]]), 1, 0.2).unwrap();
        assert_eq!(e, vec![Edge { a: 0, b: 1, w: 0.5 }]);
    }

    #[test]
    fn empty_scene_is_an_error() {
        let err = build_knn_graph(&scene(vec![]), 4, 0.2).unwrap_err();
        assert_eq!(err.to_string(), "empty scene");
    }

    #[test]
    fn random_cloud_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<[f32; 3]> = (0..100).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let n = pts.len();
        let colors: Vec<[u8; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let s = Scene::new("r", pts, colors, vec![-1; n]).unwrap();
        let edges = build_knn_graph(&s, 4, 0.2).unwrap();

        // Oracle: O(n^2) neighbour lists.
        let mut want = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist(&s.point(i), &s.point(j)), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in &d[..4] {
                want.insert((i.min(j) as u32, i.max(j) as u32));
            }
        }
        let got: std::collections::BTreeSet<_> = edges.iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(got, want);

        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.a as usize] += 1;
            degree[e.b as usize] += 1;
            let ci = s.color(e.a as usize);
            let cj = s.color(e.b as usize);
            let w = dist(&s.point(e.a as usize), &s.point(e.b as usize)) + 0.2 * dist(&ci, &cj);
            assert!((e.w - w).abs() < 1e-12);
        }
        assert!(degree.iter().all(|&d| d >= 4));
    }
}
