//! Uniform-grid spatial hash for radius and k-nearest-neighbour queries.

use rustc_hash::FxHashMap as HashMap;

pub type P3 = [f64; 3];

#[inline]
pub fn dist2(a: &P3, b: &P3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &P3, b: &P3) -> f64 {
    dist2(a, b).sqrt()
}

type Cell = (i64, i64, i64);

pub struct Grid<'a> {
    points: &'a [P3],
    cell: f64,
    cells: HashMap<Cell, Vec<usize>>,
    lo: Cell,
    hi: Cell,
}

impl<'a> Grid<'a> {
    pub fn new(points: &'a [P3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::default();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let c = key(p, cell);
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
            cells.entry(c).or_default().push(i);
        }
        Grid {
            points,
            cell,
            cells,
            lo,
            hi,
        }
    }

    /// Indices of all points within distance `r` of `q` (inclusive), in
    /// ascending index order.
    pub fn within(&self, q: &P3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, r, |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn for_each_within(&self, q: &P3, r: f64, mut f: impl FnMut(usize)) {
        let r2 = r * r;
        let span = (r / self.cell).ceil() as i64;
        let c = key(q, self.cell);
        for x in (c.0 - span).max(self.lo.0)..=(c.0 + span).min(self.hi.0) {
            for y in (c.1 - span).max(self.lo.1)..=(c.1 + span).min(self.hi.1) {
                for z in (c.2 - span).max(self.lo.2)..=(c.2 + span).min(self.hi.2) {
                    if let Some(bucket) = self.cells.get(&(x, y, z)) {
                        for &i in bucket {
                            if dist2(q, &self.points[i]) <= r2 {
                                f(i);
                            }
                        }
                    }
                }
            }
        }
    }

    /// The `k` nearest points to `q`, sorted by `(distance, index)`.
    /// `skip` excludes one index (the query point itself).
    pub fn knn(&self, q: &P3, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
        let available = self.points.len() - usize::from(skip.is_some());
        let k = k.min(available);
        if k == 0 {
            return Vec::new();
        }
        let c = key(q, self.cell);
        let max_ring = [
            (c.0 - self.lo.0).abs(),
            (self.hi.0 - c.0).abs(),
            (c.1 - self.lo.1).abs(),
            (self.hi.1 - c.1).abs(),
            (c.2 - self.lo.2).abs(),
            (self.hi.2 - c.2).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let mut found: Vec<(usize, f64)> = Vec::new();
        let mut ring = 0i64;
        loop {
            self.visit_ring(c, ring, |i| {
                if Some(i) != skip {
                    found.push((i, dist2(q, &self.points[i])));
                }
            });
            if found.len() >= k {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                // Every unvisited point is at least `ring * cell` away.
                let bound = ring as f64 * self.cell;
                if found[k - 1].1 <= bound * bound || ring >= max_ring {
                    found.truncate(k);
                    return found.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect();
                }
            } else if ring >= max_ring {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                return found.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect();
            }
            ring += 1;
        }
    }

    fn visit_ring(&self, c: Cell, ring: i64, mut f: impl FnMut(usize)) {
        for x in c.0 - ring..=c.0 + ring {
            for y in c.1 - ring..=c.1 + ring {
                for z in c.2 - ring..=c.2 + ring {
                    let on_shell = (x - c.0).abs() == ring || (y - c.1).abs() == ring || (z - c.2).abs() == ring;
                    if !on_shell {
                        continue;
                    }
                    if let Some(bucket) = self.cells.get(&(x, y, z)) {
                        bucket.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }
}

#[inline]
fn key(p: &P3, cell: f64) -> Cell {
    (
        (p[0] / cell).floor() as i64,
        (p[1] / cell).floor() as i64,
        (p[2] / cell).floor() as i64,
    )
}
