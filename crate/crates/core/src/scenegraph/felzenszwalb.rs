//! Graph-based segmentation (Felzenszwalb & Huttenlocher) over a point graph.

use super::knn::{sort_edges, Edge};

struct Forest {
    parent: Vec<u32>,
    size: Vec<u32>,
    internal: Vec<f64>,
}

impl Forest {
    fn new(n: usize) -> Self {
        Forest {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Unions two roots; the larger (then lower-index) root survives.
    fn union(&mut self, a: u32, b: u32, w: f64) {
        let (big, small) = match self.size[a as usize].cmp(&self.size[b as usize]) {
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.internal[big as usize] = self.internal[big as usize].max(self.internal[small as usize]).max(w);
    }
}

/// Segments `n_points` vertices connected by `edges`.
///
/// Two components merge when the connecting edge weight is at most
/// `min(Int(C1) + k/|C1|, Int(C2) + k/|C2|)`, scanning edges by
/// `(weight, a, b)`. A second pass over the same order absorbs components
/// smaller than `min_size` into the neighbour reached by their lightest edge.
/// Labels are numbered by first occurrence in point order. Inputs with fewer
/// than `min_size` points collapse to a single segment.
pub fn felzenszwalb_segment(edges: &[Edge], n_points: usize, k: f64, min_size: usize) -> Vec<u32> {
    if n_points == 0 {
        return Vec::new();
    }
    if n_points < min_size {
        return vec![0; n_points];
    }
    let mut sorted = edges.to_vec();
    sort_edges(&mut sorted);

    let mut f = Forest::new(n_points);
    for e in &sorted {
        let ra = f.find(e.a);
        let rb = f.find(e.b);
        if ra == rb {
            continue;
        }
        let ta = f.internal[ra as usize] + k / f.size[ra as usize] as f64;
        let tb = f.internal[rb as usize] + k / f.size[rb as usize] as f64;
        if e.w <= ta.min(tb) {
            f.union(ra, rb, e.w);
        }
    }
    for e in &sorted {
        let ra = f.find(e.a);
        let rb = f.find(e.b);
        if ra != rb && ((f.size[ra as usize] as usize) < min_size || (f.size[rb as usize] as usize) < min_size) {
            f.union(ra, rb, e.w);
        }
    }

    let mut label = vec![u32::MAX; n_points];
    let mut out = Vec::with_capacity(n_points);
    let mut next = 0u32;
    for i in 0..n_points as u32 {
        let r = f.find(i) as usize;
        if label[r] == u32::MAX {
            label[r] = next;
            next += 1;
        }
        out.push(label[r]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegraph::{build_knn_graph, Scene};

    fn two_clusters() -> Scene {
        let mut pts = Vec::new();
        for c in 0..2 {
            for i in 0..10 {
                pts.push([c as f32 * 1.0 + i as f32 * 0.01, 0.0, 0.0]);
            }
        }
        Scene::new("c", pts, vec![[0; 3]; 20], vec![-1; 20]).unwrap()
    }

    #[test]
    fn single_point() {
        assert_eq!(felzenszwalb_segment(&[], 1, 0.05, 20), vec![0]);
    }

    #[test]
    fn separated_clusters_split_in_two() {
        let s = two_clusters();
        let edges = build_knn_graph(&s, 4, 0.2).unwrap();
        let seg = felzenszwalb_segment(&edges, s.len(), 0.05, 1);
        assert_eq!(&seg[..10], &[0; 10]);
        assert_eq!(&seg[10..], &[1; 10]);
    }

    #[test]
    fn small_segments_are_absorbed() {
        // Chain with one heavy edge isolating the last two points.
        let mut edges: Vec<Edge> = (0..9)
            .map(|i| Edge {
                a: i,
                b: i + 1,
                w: 0.01,
            })
            .collect();
        edges[7].w = 5.0;
        let raw = felzenszwalb_segment(&edges, 10, 0.05, 1);
        assert_eq!(raw.iter().filter(|&&l| l == raw[9]).count(), 2);
        let merged = felzenszwalb_segment(&edges, 10, 0.05, 5);
        assert!(merged.iter().all(|&l| l == 0));
    }

    #[test]
    fn degenerate_scene_is_one_segment() {
        let edges = vec![Edge { a: 0, b: 1, w: 100.0 }];
        assert_eq!(felzenszwalb_segment(&edges, 3, 0.05, 20), vec![0, 0, 0]);
    }
}
