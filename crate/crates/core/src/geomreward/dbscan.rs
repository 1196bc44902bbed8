use rustc_hash::FxHashMap as HashMap;

use crate::spatial::{dist2, P3};

type Cell = (i64, i64, i64);

/// Density clustering. Returns one label per point, `-1` for noise.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are connected components of core points, numbered
/// in order of their lowest core index. A border point joins the
/// lowest-numbered cluster among the core points within `eps` of it, which is
/// what index-order expansion produces.
pub fn dbscan(points: &[P3], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(eps > 0.0 && min_pts >= 1, "dbscan needs eps > 0 and min_pts >= 1");
    let eps2 = eps * eps;
    // Cells of side eps/sqrt(3) have diameter eps, so co-cellular points are
    // always neighbours.
    let side = eps / 3f64.sqrt();
    let key = |p: &P3| -> Cell {
        (
            (p[0] / side).floor() as i64,
            (p[1] / side).floor() as i64,
            (p[2] / side).floor() as i64,
        )
    };
    let keys_all: Vec<Cell> = points.iter().map(key).collect();
    let index = CellIndex::new(&keys_all);
    let mut members: Vec<Vec<u32>> = Vec::new();
    let mut keys: Vec<Cell> = Vec::new();
    let mut id_of = vec![usize::MAX; index.slots()];
    for (i, c) in keys_all.iter().enumerate() {
        let slot = index.slot(c).expect("own cell is indexed");
        if id_of[slot] == usize::MAX {
            id_of[slot] = members.len();
            members.push(Vec::new());
            keys.push(*c);
        }
        members[id_of[slot]].push(i as u32);
    }
    // Non-empty cells within two steps of each cell, itself included.
    let reach: i64 = 2;
    let around: Vec<Vec<usize>> = keys
        .iter()
        .map(|c| {
            let mut out = Vec::new();
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        if let Some(slot) = index.slot(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                            if id_of[slot] != usize::MAX {
                                out.push(id_of[slot]);
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut core = vec![false; n];
    for (id, mine) in members.iter().enumerate() {
        if mine.len() >= min_pts {
            for &i in mine {
                core[i as usize] = true;
            }
            continue;
        }
        if around[id].iter().map(|&nc| members[nc].len()).sum::<usize>() < min_pts {
            continue;
        }
        for &i in mine {
            let p = &points[i as usize];
            let mut count = 0usize;
            'outer: for &nc in &around[id] {
                for &j in &members[nc] {
                    if dist2(p, &points[j as usize]) <= eps2 {
                        count += 1;
                        if count >= min_pts {
                            break 'outer;
                        }
                    }
                }
            }
            core[i as usize] = count >= min_pts;
        }
    }

    // Union-find over core points; each cell's cores are one group.
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let p = parent[x as usize];
            parent[x as usize] = parent[p as usize];
            x = p;
        }
        x
    }
    let cores: Vec<Vec<u32>> = members
        .iter()
        .map(|m| m.iter().copied().filter(|&i| core[i as usize]).collect())
        .collect();
    for cc in &cores {
        for w in cc.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b) as usize] = a.min(b);
            }
        }
    }
    for (id, mine) in cores.iter().enumerate() {
        if mine.is_empty() {
            continue;
        }
        for &nc in &around[id] {
            let theirs = &cores[nc];
            if nc <= id || theirs.is_empty() {
                continue;
            }
            let (a, b) = (find(&mut parent, mine[0]), find(&mut parent, theirs[0]));
            if a == b {
                continue;
            }
            let linked = mine.iter().any(|&i| {
                theirs
                    .iter()
                    .any(|&j| dist2(&points[i as usize], &points[j as usize]) <= eps2)
            });
            if linked {
                parent[a.max(b) as usize] = a.min(b);
            }
        }
    }

    let mut label = vec![-1i32; n];
    let mut root_label: HashMap<u32, i32> = HashMap::default();
    let mut next = 0i32;
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i as u32);
            let l = *root_label.entry(r).or_insert_with(|| {
                next += 1;
                next - 1
            });
            label[i] = l;
        }
    }
    for (id, mine) in members.iter().enumerate() {
        for &i in mine {
            if core[i as usize] {
                continue;
            }
            let p = &points[i as usize];
            let mut best = -1i32;
            for &nc in &around[id] {
                for &j in &cores[nc] {
                    let l = label[j as usize];
                    if (best < 0 || l < best) && dist2(p, &points[j as usize]) <= eps2 {
                        best = l;
                    }
                }
            }
            label[i as usize] = best;
        }
    }
    label
}

/// Maps occupied cells to slots: a dense box when it is small, else a hash.
enum CellIndex {
    Dense { lo: Cell, dims: (i64, i64, i64) },
    Sparse(HashMap<Cell, usize>),
}

impl CellIndex {
    fn new(keys: &[Cell]) -> Self {
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for c in keys {
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
        }
        let dims = (hi.0 - lo.0 + 1, hi.1 - lo.1 + 1, hi.2 - lo.2 + 1);
        let volume = (dims.0 as f64) * (dims.1 as f64) * (dims.2 as f64);
        if volume <= (1u64 << 18).max(8 * keys.len() as u64) as f64 {
            return CellIndex::Dense { lo, dims };
        }
        let mut map: HashMap<Cell, usize> = HashMap::default();
        for c in keys {
            let next = map.len();
            map.entry(*c).or_insert(next);
        }
        CellIndex::Sparse(map)
    }

    fn slots(&self) -> usize {
        match self {
            CellIndex::Dense { dims, .. } => (dims.0 * dims.1 * dims.2) as usize,
            CellIndex::Sparse(map) => map.len(),
        }
    }

    fn slot(&self, c: &Cell) -> Option<usize> {
        match self {
            CellIndex::Dense { lo, dims } => {
                let (x, y, z) = (c.0 - lo.0, c.1 - lo.1, c.2 - lo.2);
                if x < 0 || y < 0 || z < 0 || x >= dims.0 || y >= dims.1 || z >= dims.2 {
                    return None;
                }
                Some(((x * dims.1 + y) * dims.2 + z) as usize)
            }
            CellIndex::Sparse(map) => map.get(c).copied(),
        }
    }
}

/// Size of each cluster, indexed by label.
pub fn cluster_sizes(labels: &[i32]) -> Vec<usize> {
    let k = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut sizes = vec![0; k];
    for &l in labels {
        if l >= 0 {
            sizes[l as usize] += 1;
        }
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_points_form_one_cluster() {
        assert_eq!(dbscan(&[[0.3; 3]; 10], 0.05, 5), vec![0; 10]);
    }

    #[test]
    fn isolated_point_is_noise() {
        assert_eq!(dbscan(&[[0.0; 3]], 0.05, 2), vec![-1]);
        assert!(dbscan(&[], 0.05, 2).is_empty());
    }

    #[test]
    fn separated_blobs() {
        let mut pts = Vec::new();
        for b in 0..2 {
            for i in 0..10 {
                pts.push([b as f64 * 0.15 + i as f64 * 0.001, 0.0, 0.0]);
            }
        }
        let l = dbscan(&pts, 0.05, 3);
        assert_eq!(&l[..10], &[0; 10]);
        assert_eq!(&l[10..], &[1; 10]);
        assert_eq!(cluster_sizes(&l), vec![10, 10]);
    }

    #[test]
    fn border_joins_lowest_cluster() {
        // Two groups each reach the middle point through one core point; the
        // middle point itself is not core.
        let mut pts = vec![[-0.03, 0.0, 0.0]; 4];
        pts.push([0.0, 0.0, 0.0]);
        pts.extend(vec![[0.11, 0.0, 0.0]; 4]);
        pts.push([0.08, 0.0, 0.0]);
        pts.push([0.04, 0.0, 0.0]);
        let l = dbscan(&pts, 0.045, 5);
        assert_eq!(l, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0]);
    }
}
