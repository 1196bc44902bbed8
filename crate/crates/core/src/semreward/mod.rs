//! Semantic objectness: affinity between superpoints, normalized cut cost and
//! the per-scene bank of lowest costs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scenegraph::io::write_atomic;
use crate::scenegraph::Adjacency;
use crate::tensor::Mat;

pub use crate::geomreward::{REWARD_OBJECT, REWARD_REJECT};

pub const BANK_CAPACITY: usize = 20;

/// Dense symmetric `K × K` nonnegative weights with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinity {
    pub k: usize,
    pub w: Vec<f64>,
    row_sums: Vec<f64>,
}

impl Affinity {
    /// Wraps a row-major matrix. The caller guarantees symmetry and a zero
    /// diagonal.
    pub fn from_dense(k: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != k * k {
            return Err(Error::dims(format!(
                "affinity needs {} entries, got {}",
                k * k,
                w.len()
            )));
        }
        let row_sums = (0..k).map(|i| w[i * k..(i + 1) * k].iter().sum()).collect();
        Ok(Affinity { k, w, row_sums })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.k + j]
    }

    /// `W 1`.
    pub fn degrees(&self) -> &[f64] {
        &self.row_sums
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// `W = clamp(cos(f_i, f_j), 0, 1) ⊙ A` with a zero diagonal.
pub fn build_affinity(features: &Mat<f32>, adjacency: &Adjacency) -> Result<Affinity> {
    let k = features.rows;
    if adjacency.len() != k {
        return Err(Error::dims(format!(
            "{} feature rows but adjacency over {} superpoints",
            k,
            adjacency.len()
        )));
    }
    let mut w = vec![0.0; k * k];
    for i in 0..k {
        for &j in adjacency.neighbors(i) {
            let j = j as usize;
            if j > i {
                let s = cosine(features.row(i), features.row(j)).clamp(0.0, 1.0);
                w[i * k + j] = s;
                w[j * k + i] = s;
            }
        }
    }
    Affinity::from_dense(k, w)
}

/// A non-empty set of superpoint ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateMask {
    ids: Vec<u32>,
    k: usize,
}

impl CandidateMask {
    pub fn new(mut ids: Vec<u32>, k: usize) -> Result<Self> {
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::EmptyCandidate);
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= k) {
            return Err(Error::InvalidArgument(format!(
                "superpoint id {bad} out of range for K={k}"
            )));
        }
        Ok(CandidateMask { ids, k })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    /// Indicator vector `O`.
    pub fn one_hot(&self) -> Vec<f64> {
        let mut o = vec![0.0; self.k];
        for &i in &self.ids {
            o[i as usize] = 1.0;
        }
        o
    }

    pub fn flags(&self) -> Vec<bool> {
        let mut o = vec![false; self.k];
        for &i in &self.ids {
            o[i as usize] = true;
        }
        o
    }
}

/// `cut = Oᵀ W (1 − O)`, `vol = Oᵀ W 1`; cost is `cut / vol`, or `+∞` when
/// `vol = 0`.
pub fn cut_cost(w: &Affinity, mask: &CandidateMask) -> Result<f64> {
    if mask.k() != w.k {
        return Err(Error::dims(format!(
            "mask over K={} but affinity over K={}",
            mask.k(),
            w.k
        )));
    }
    let o = mask.one_hot();
    let k = w.k;
    let mut cut = 0.0;
    let mut vol = 0.0;
    for &i in mask.ids() {
        let i = i as usize;
        let row = &w.w[i * k..(i + 1) * k];
        let outside: f64 = row.iter().zip(&o).map(|(wij, oj)| wij * (1.0 - oj)).sum();
        cut += outside;
        vol += w.degrees()[i];
    }
    if vol == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(cut / vol)
}

/// Lowest costs seen so far for one scene, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct CostBank {
    capacity: usize,
    costs: Vec<f64>,
}

impl Default for CostBank {
    fn default() -> Self {
        Self::new(BANK_CAPACITY)
    }
}

impl CostBank {
    pub fn new(capacity: usize) -> Self {
        CostBank {
            capacity: capacity.max(1),
            costs: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.costs.len() >= self.capacity
    }

    pub fn max(&self) -> Option<f64> {
        self.costs.last().copied()
    }

    /// Reward the bank would give `cost` without changing it.
    pub fn peek_reward(&self, cost: f64) -> i32 {
        if cost.is_nan() || cost == f64::INFINITY {
            return REWARD_REJECT;
        }
        match self.max() {
            _ if !self.is_full() => REWARD_OBJECT,
            Some(m) if cost < m => REWARD_OBJECT,
            _ => REWARD_REJECT,
        }
    }

    /// Inserts `cost` when the bank has room or `cost` beats the current
    /// maximum, evicting that maximum when full.
    pub fn update(&mut self, cost: f64) -> i32 {
        let r = self.peek_reward(cost);
        if r == REWARD_OBJECT {
            if self.is_full() {
                self.costs.pop();
            }
            let at = self.costs.partition_point(|&c| c <= cost);
            self.costs.insert(at, cost);
        }
        r
    }

    /// One cost per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.costs {
            s.push_str(&format!("{c:?}\n"));
        }
        s
    }

    pub fn from_text(text: &str, capacity: usize) -> Result<Self> {
        let mut bank = CostBank::new(capacity);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let c: f64 = line
                .parse()
                .map_err(|_| Error::format(format!("bank line {}: not a number: {line}", n + 1)))?;
            bank.update(c);
        }
        Ok(bank)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path, capacity: usize) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, capacity)
    }
}
