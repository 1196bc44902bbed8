use super::Scene;
use crate::error::{Error, Result};
use crate::spatial::{dist2, Grid};

/// Symmetric binary adjacency between superpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    k: usize,
    neighbors: Vec<Vec<u32>>,
}

impl Adjacency {
    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut neighbors = vec![Vec::new(); k];
        for (a, b) in pairs {
            if a != b {
                neighbors[a as usize].push(b);
                neighbors[b as usize].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Adjacency { k, neighbors }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Sorted neighbour ids of `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&(j as u32)).is_ok()
    }

    /// Row-major `k × k` 0/1 matrix.
    pub fn dense(&self) -> Vec<u8> {
        let mut m = vec![0u8; self.k * self.k];
        for (i, n) in self.neighbors.iter().enumerate() {
            for &j in n {
                m[i * self.k + j as usize] = 1;
            }
        }
        m
    }

    /// Superpoints adjacent to any member of `mask` and not in it, sorted.
    pub fn frontier(&self, mask: &[bool]) -> Vec<u32> {
        let mut out: Vec<u32> = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .flat_map(|(i, _)| self.neighbors[i].iter().copied())
            .filter(|&j| !mask[j as usize])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Superpoints `i != j` are adjacent when some point of `i` lies within `d`
/// of some point of `j`.
pub fn compute_adjacency(assignment: &[u32], k: usize, scene: &Scene, d: f64) -> Result<Adjacency> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "adjacency distance must be > 0, got {d}"
        )));
    }
    if assignment.len() != scene.len() {
        return Err(Error::dims(format!(
            "assignment has {} entries for {} points",
            assignment.len(),
            scene.len()
        )));
    }
    let pts = scene.points_f64();
    let grid = Grid::new(&pts, d);
    let mut seen = std::collections::HashSet::new();
    for (i, p) in pts.iter().enumerate() {
        let a = assignment[i];
        grid.for_each_within(p, d, |j| {
            let b = assignment[j];
            if a < b {
                seen.insert((a, b));
            }
        });
    }
    let mut pairs: Vec<_> = seen.into_iter().collect();
    pairs.sort_unstable();
    Ok(Adjacency::from_pairs(k, pairs))
}

/// O(n²) reference used by tests.
pub fn adjacency_brute_force(assignment: &[u32], k: usize, scene: &Scene, d: f64) -> Adjacency {
    let pts = scene.points_f64();
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if assignment[i] != assignment[j] && dist2(&pts[i], &pts[j]) <= d * d {
                pairs.push((assignment[i], assignment[j]));
            }
        }
    }
    Adjacency::from_pairs(k, pairs)
}
