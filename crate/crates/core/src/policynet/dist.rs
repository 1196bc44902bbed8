//! Action distributions over policy logits.

use rand::Rng;

use crate::tensor::Real;

pub(crate) fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let s = logits.iter().map(|&z| (z - m).exp()).fold(T::zero(), |a, b| a + b);
    let lse = m + s.ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Categorical distribution over seed logits.
#[derive(Clone, Debug)]
pub struct SeedDist<T> {
    pub logits: Vec<T>,
    log_p: Vec<T>,
}

impl<T: Real> SeedDist<T> {
    pub fn new(logits: Vec<T>) -> Self {
        let log_p = log_softmax(&logits);
        SeedDist { logits, log_p }
    }

    pub fn probs(&self) -> Vec<T> {
        self.log_p.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, i: usize) -> T {
        self.log_p[i]
    }

    pub fn entropy(&self) -> T {
        self.log_p.iter().map(|&l| -(l.exp() * l)).fold(T::zero(), |a, b| a + b)
    }

    /// `d log p_i / d logits`.
    pub fn grad_log_prob(&self, i: usize) -> Vec<T> {
        let mut g: Vec<T> = self.log_p.iter().map(|l| -l.exp()).collect();
        g[i] += T::one();
        g
    }

    /// `dH / d logits`.
    pub fn grad_entropy(&self) -> Vec<T> {
        let h = self.entropy();
        self.log_p.iter().map(|&l| -(l.exp() * (l + h))).collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.logits.iter().enumerate() {
            if l > self.logits[best] {
                best = i;
            }
        }
        best
    }
}

/// Independent Bernoulli merge decisions, one per neighbour.
#[derive(Clone, Debug)]
pub struct MergeDist<T> {
    pub logits: Vec<T>,
}

impl<T: Real> MergeDist<T> {
    pub fn new(logits: Vec<T>) -> Self {
        MergeDist { logits }
    }

    pub fn probs(&self) -> Vec<T> {
        self.logits.iter().map(|&z| sigmoid(z)).collect()
    }

    /// `Σ chosen log p + Σ unchosen log (1 − p)`.
    pub fn log_prob(&self, chosen: &[bool]) -> T {
        self.logits
            .iter()
            .zip(chosen)
            .map(|(&z, &a)| if a { -softplus(-z) } else { -softplus(z) })
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn entropy(&self) -> T {
        self.logits
            .iter()
            .map(|&z| softplus(z) - z * sigmoid(z))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn grad_log_prob(&self, chosen: &[bool]) -> Vec<T> {
        self.logits
            .iter()
            .zip(chosen)
            .map(|(&z, &a)| if a { T::one() - sigmoid(z) } else { -sigmoid(z) })
            .collect()
    }

    pub fn grad_entropy(&self) -> Vec<T> {
        self.logits
            .iter()
            .map(|&z| {
                let s = sigmoid(z);
                -(z * s * (T::one() - s))
            })
            .collect()
    }

    /// Neighbours whose merge probability exceeds one half.
    pub fn greedy(&self) -> Vec<bool> {
        self.logits.iter().map(|&z| z > T::zero()).collect()
    }
}

/// A sampled action with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSample {
    /// Seed: the chosen position. Merge: positions of merged neighbours.
    pub indices: Vec<usize>,
    pub log_prob: f64,
    pub entropy: f64,
    pub value: f64,
}

pub fn sample_seed<T: Real>(dist: &SeedDist<T>, value: T, rng: &mut impl Rng) -> ActionSample {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let probs = dist.probs();
    let mut pick = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p.f64();
        if u < acc {
            pick = i;
            break;
        }
    }
    seed_action(dist, pick, value)
}

pub fn seed_action<T: Real>(dist: &SeedDist<T>, pick: usize, value: T) -> ActionSample {
    ActionSample {
        indices: vec![pick],
        log_prob: dist.log_prob(pick).f64(),
        entropy: dist.entropy().f64(),
        value: value.f64(),
    }
}

pub fn sample_merge<T: Real>(dist: &MergeDist<T>, value: T, rng: &mut impl Rng) -> ActionSample {
    let chosen: Vec<bool> = dist.probs().iter().map(|p| rng.random::<f64>() < p.f64()).collect();
    merge_action(dist, &chosen, value)
}

pub fn merge_action<T: Real>(dist: &MergeDist<T>, chosen: &[bool], value: T) -> ActionSample {
    ActionSample {
        indices: chosen.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect(),
        log_prob: dist.log_prob(chosen).f64(),
        entropy: dist.entropy().f64(),
        value: value.f64(),
    }
}
