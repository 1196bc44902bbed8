//! Seed and merge policies with value heads.

mod dist;
mod net;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dist::{
    log_softmax, merge_action, sample_merge, sample_seed, seed_action, sigmoid, ActionSample, MergeDist, SeedDist,
};
pub use net::{TokenCache, TokenNet};

use crate::error::{Error, Result};
use crate::nn::{decode_checkpoint, encode_checkpoint, Params};
use crate::scenegraph::io::write_atomic;
use crate::scenegraph::{encoder_input_dim, PointEncoder};
use crate::tensor::{Mat, Real};
use crate::{visit_children, visit_children_mut};

pub const POLICY_MAGIC: &[u8; 4] = b"FOBP";

/// Scores every candidate superpoint as the episode's seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedPolicy<T> {
    pub net: TokenNet<T>,
}

impl<T: Real> SeedPolicy<T> {
    pub fn new(input: usize, hidden: usize, blocks: usize, rng: &mut impl Rng) -> Self {
        SeedPolicy {
            net: TokenNet::new(input, hidden, blocks, rng),
        }
    }

    pub fn forward(&self, features: &Mat<T>) -> Result<(SeedDist<T>, T, TokenCache<T>)> {
        if features.rows == 0 {
            return Err(Error::InvalidArgument(
                "seed policy needs at least one superpoint".into(),
            ));
        }
        let (logits, value, cache) = self.net.forward(features)?;
        Ok((SeedDist::new(logits), value, cache))
    }

    /// Returns `dL/dfeatures`.
    pub fn backward(&self, cache: &TokenCache<T>, d_logits: &[T], d_value: T, grad: &mut Self) -> Mat<T> {
        self.net.backward(cache, d_logits, d_value, &mut grad.net)
    }
}

/// Scores each frontier neighbour for merging into the current region.
#[derive(Clone, Debug, PartialEq)]
pub struct MergePolicy<T> {
    pub net: TokenNet<T>,
}

impl<T: Real> MergePolicy<T> {
    pub fn new(input: usize, hidden: usize, blocks: usize, rng: &mut impl Rng) -> Self {
        MergePolicy {
            net: TokenNet::new(input, hidden, blocks, rng),
        }
    }

    /// Tokens are the region feature followed by `neighbour + region` rows.
    pub fn forward(&self, region: &[T], neighbors: &Mat<T>) -> Result<(MergeDist<T>, T, TokenCache<T>)> {
        let d = self.net.input_dim();
        if region.len() != d || (neighbors.rows > 0 && neighbors.cols != d) {
            return Err(Error::dims(format!(
                "merge policy expects {d}-dim features, got region {} and neighbours {}",
                region.len(),
                neighbors.cols
            )));
        }
        let tokens = Mat::from_fn(neighbors.rows + 1, d, |i, j| {
            if i == 0 {
                region[j]
            } else {
                neighbors.at(i - 1, j) + region[j]
            }
        });
        let (logits, value, cache) = self.net.forward(&tokens)?;
        Ok((MergeDist::new(logits[1..].to_vec()), value, cache))
    }

    /// Returns `(dL/dregion, dL/dneighbours)`.
    pub fn backward(&self, cache: &TokenCache<T>, d_logits: &[T], d_value: T, grad: &mut Self) -> (Vec<T>, Mat<T>) {
        let mut full = Vec::with_capacity(d_logits.len() + 1);
        full.push(T::zero());
        full.extend_from_slice(d_logits);
        let dt = self.net.backward(cache, &full, d_value, &mut grad.net);
        let mut d_region = dt.row(0).to_vec();
        let d_nb = dt.slice_rows(1, dt.rows);
        for i in 0..d_nb.rows {
            for (r, v) in d_region.iter_mut().zip(d_nb.row(i)) {
                *r += *v;
            }
        }
        (d_region, d_nb)
    }
}

impl<T: Real> Params<T> for SeedPolicy<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        self.net.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        self.net.visit_mut(f);
    }
}

impl<T: Real> Params<T> for MergePolicy<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        self.net.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        self.net.visit_mut(f);
    }
}

/// Network sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub feature_dim: usize,
    pub encoder_hidden: usize,
    pub seed_blocks: usize,
    pub merge_blocks: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden: 128,
            feature_dim: 32,
            encoder_hidden: 64,
            seed_blocks: 1,
            merge_blocks: 3,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.feature_dim == 0 || self.encoder_hidden == 0 {
            return Err(Error::Config("policy dims must be >= 1".into()));
        }
        Ok(())
    }
}

/// Point encoder plus both policies; trained jointly.
#[derive(Clone, Debug)]
pub struct PolicySet<T> {
    pub encoder: PointEncoder<T>,
    pub seed: SeedPolicy<T>,
    pub merge: MergePolicy<T>,
}

impl<T: Real> PolicySet<T> {
    /// `sem_dim` is the per-point semantic feature width of the scenes.
    pub fn new(cfg: &PolicyConfig, sem_dim: usize, rng: &mut impl Rng) -> Self {
        PolicySet {
            encoder: PointEncoder::new(encoder_input_dim(sem_dim), cfg.encoder_hidden, cfg.feature_dim, rng),
            seed: SeedPolicy::new(cfg.feature_dim, cfg.hidden, cfg.seed_blocks, rng),
            merge: MergePolicy::new(cfg.feature_dim, cfg.hidden, cfg.merge_blocks, rng),
        }
    }

    pub fn config(&self) -> PolicyConfig {
        PolicyConfig {
            hidden: self.seed.net.hidden(),
            feature_dim: self.encoder.output_dim(),
            encoder_hidden: self.encoder.l1.output_dim(),
            seed_blocks: self.seed.net.blocks.len(),
            merge_blocks: self.merge.net.blocks.len(),
        }
    }

    pub fn sem_dim(&self) -> usize {
        self.encoder.input_dim() - encoder_input_dim(0)
    }

    pub fn cast<U: Real>(&self) -> PolicySet<U> {
        let mut rng = crate::rng::rng_from(0);
        let mut out = PolicySet::<U>::new(&self.config(), self.sem_dim(), &mut rng);
        let flat = crate::nn::flatten(self);
        let conv: Vec<U> = flat.iter().map(|v| U::c(v.f64())).collect();
        crate::nn::assign_flat(&mut out, &conv);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.config();
        let meta = format!(
            "sem_dim={}\nhidden={}\nfeature_dim={}\nencoder_hidden={}\nseed_blocks={}\nmerge_blocks={}",
            self.sem_dim(),
            c.hidden,
            c.feature_dim,
            c.encoder_hidden,
            c.seed_blocks,
            c.merge_blocks
        );
        encode_checkpoint(POLICY_MAGIC, &meta, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck = decode_checkpoint(bytes, POLICY_MAGIC)?;
        let cfg = PolicyConfig {
            hidden: ck.meta_usize("hidden")?,
            feature_dim: ck.meta_usize("feature_dim")?,
            encoder_hidden: ck.meta_usize("encoder_hidden")?,
            seed_blocks: ck.meta_usize("seed_blocks")?,
            merge_blocks: ck.meta_usize("merge_blocks")?,
        };
        let mut rng = crate::rng::rng_from(0);
        let mut p = PolicySet::new(&cfg, ck.meta_usize("sem_dim")?, &mut rng);
        ck.load_into(&mut p)?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl<T: Real> Params<T> for PolicySet<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        visit_children!(self, f, ["encoder" => self.encoder, "seed" => self.seed, "merge" => self.merge]);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        visit_children_mut!(self, f, ["encoder" => self.encoder, "seed" => self.seed, "merge" => self.merge]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_params;
    use crate::nn::{flatten, init_weight, zero_grad};
    use crate::rng::rng_from;

    #[test]
    fn seed_probabilities_and_equivariance() {
        let mut rng = rng_from(0);
        let p = SeedPolicy::<f64>::new(4, 8, 1, &mut rng);
        let x: Mat<f64> = init_weight(5, 4, &mut rng);
        let (d, v, _) = p.forward(&x).unwrap();
        let probs = d.probs();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&q| q > 0.0 && q < 1.0));
        assert!(v.is_finite());
        let perm = [3usize, 0, 4, 1, 2];
        let (dp, _, _) = p.forward(&x.select_rows(&perm)).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            assert!((dp.probs()[i] - probs[j]).abs() < 1e-12);
        }
        let same = Mat::from_fn(3, 4, |_, j| j as f64 * 0.1);
        for q in p.forward(&same).unwrap().0.probs() {
            assert!((q - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_degenerate_and_duplicates() {
        let mut rng = rng_from(1);
        let p = MergePolicy::<f64>::new(4, 8, 3, &mut rng);
        let region = vec![0.1, -0.2, 0.3, 0.0];
        let (d, v, _) = p.forward(&region, &Mat::zeros(0, 4)).unwrap();
        assert!(d.logits.is_empty() && v.is_finite());
        let nb = Mat::from_vec(2, 4, vec![0.5, 0.5, 0.1, 0.2, 0.5, 0.5, 0.1, 0.2]);
        let (d, _, _) = p.forward(&region, &nb).unwrap();
        assert_eq!(d.probs()[0], d.probs()[1]);
        assert!(p.forward(&region[..3], &nb).is_err());
    }

    #[test]
    fn seed_gradcheck() {
        let mut rng = rng_from(2);
        let p = SeedPolicy::<f64>::new(3, 6, 1, &mut rng);
        let x: Mat<f64> = init_weight(4, 3, &mut rng);
        let loss = |p: &SeedPolicy<f64>| {
            let (d, v, _) = p.forward(&x).unwrap();
            d.log_prob(2) + 0.3 * v
        };
        let (d, _, cache) = p.forward(&x).unwrap();
        let mut g = p.clone();
        zero_grad(&mut g);
        p.backward(&cache, &d.grad_log_prob(2), 0.3, &mut g);
        check_params(&p, &g, loss, 1e-4);
    }

    #[test]
    fn merge_gradcheck_including_inputs() {
        let mut rng = rng_from(3);
        let p = MergePolicy::<f64>::new(3, 6, 2, &mut rng);
        let region = vec![0.2, -0.4, 0.1];
        let nb: Mat<f64> = init_weight(3, 3, &mut rng);
        let chosen = [true, false, true];
        let f = |p: &MergePolicy<f64>, r: &[f64], n: &Mat<f64>| {
            let (d, v, _) = p.forward(r, n).unwrap();
            d.log_prob(&chosen) - 0.5 * v
        };
        let (d, _, cache) = p.forward(&region, &nb).unwrap();
        let mut g = p.clone();
        zero_grad(&mut g);
        let (dr, dn) = p.backward(&cache, &d.grad_log_prob(&chosen), -0.5, &mut g);
        check_params(&p, &g, |p| f(p, &region, &nb), 1e-4);
        let h = 1e-6;
        for j in 0..3 {
            let mut rp = region.clone();
            rp[j] += h;
            let mut rm = region.clone();
            rm[j] -= h;
            let num = (f(&p, &rp, &nb) - f(&p, &rm, &nb)) / (2.0 * h);
            assert!((num - dr[j]).abs() < 1e-6);
            let mut np = nb.clone();
            *np.at_mut(1, j) += h;
            let mut nm = nb.clone();
            *nm.at_mut(1, j) -= h;
            let num = (f(&p, &region, &np) - f(&p, &region, &nm)) / (2.0 * h);
            assert!((num - dn.at(1, j)).abs() < 1e-6);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = rng_from(4);
        let cfg = PolicyConfig {
            hidden: 8,
            feature_dim: 4,
            encoder_hidden: 6,
            ..Default::default()
        };
        let p = PolicySet::<f32>::new(&cfg, 5, &mut rng);
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..4], b"FOBP");
        let q = PolicySet::<f32>::from_bytes(&bytes).unwrap();
        assert_eq!(flatten(&p), flatten(&q));
        assert_eq!(q.config(), cfg);
        assert_eq!(q.sem_dim(), 5);
        assert_eq!(flatten(&p.cast::<f64>().cast::<f32>()), flatten(&p));
    }
}
