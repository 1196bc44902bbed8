use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::shapes::Archetype;
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::scenegraph::Scene;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub dim: usize,
    pub class_seed: u64,
    /// Per-point noise.
    pub sigma_f: f64,
    /// Per-instance perturbation of the class embedding.
    pub sigma_c: f64,
    /// How far object embeddings lean away from the background one.
    pub background_margin: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            dim: 16,
            class_seed: 0,
            sigma_f: 0.02,
            sigma_c: 0.05,
            background_margin: 0.3,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config("features: dim must be >= 2".into()));
        }
        if !(self.sigma_f >= 0.0 && self.sigma_c >= 0.0 && self.background_margin >= 0.0) {
            return Err(Error::Config("features: sigmas and margin must be >= 0".into()));
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn gaussian(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Unit embeddings indexed by class id (0 = background). Object classes have
/// a negative dot product with the background embedding.
pub fn class_embeddings(spec: &FeatureSpec) -> Vec<Vec<f64>> {
    let mut rng = rng_from(spec.class_seed);
    let mut bg = gaussian(spec.dim, &mut rng);
    normalize(&mut bg);
    let mut out = vec![bg.clone()];
    for _ in Archetype::ALL {
        let mut v = gaussian(spec.dim, &mut rng);
        normalize(&mut v);
        let d: f64 = v.iter().zip(&bg).map(|(a, b)| a * b).sum();
        for (x, b) in v.iter_mut().zip(&bg) {
            *x -= (d + spec.background_margin) * b;
        }
        normalize(&mut v);
        out.push(v);
    }
    out
}

/// Instance embeddings (class embedding plus perturbation, renormalised) and
/// the per-point features built from them, row-major `n x dim`.
pub fn gen_semantic_features(
    scene: &Scene,
    classes: &[Archetype],
    spec: &FeatureSpec,
    rng: &mut impl Rng,
) -> Result<(Vec<Vec<f64>>, Vec<f32>)> {
    spec.validate()?;
    let emb = class_embeddings(spec);
    let n_inst = scene
        .instances
        .iter()
        .copied()
        .max()
        .map_or(0, |m| (m + 1).max(0) as usize);
    if classes.len() < n_inst {
        return Err(Error::InvalidArgument(format!(
            "{} instances but only {} classes",
            n_inst,
            classes.len()
        )));
    }
    let perturb = |base: &[f64], rng: &mut dyn rand::RngCore| -> Vec<f64> {
        let mut v: Vec<f64> = base
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(rng);
                x + spec.sigma_c * z
            })
            .collect();
        normalize(&mut v);
        v
    };
    let mut inst_emb = Vec::with_capacity(n_inst + 1);
    inst_emb.push(perturb(&emb[0], rng));
    for c in &classes[..n_inst] {
        inst_emb.push(perturb(&emb[c.class_id()], rng));
    }
    let noise = Normal::new(0.0, spec.sigma_f.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut feats = Vec::with_capacity(scene.len() * spec.dim);
    for &id in &scene.instances {
        let e = &inst_emb[(id + 1).max(0) as usize];
        for x in e {
            let n = if spec.sigma_f > 0.0 { noise.sample(rng) } else { 0.0 };
            feats.push((x + n) as f32);
        }
    }
    Ok((inst_emb, feats))
}

/// Returns `scene` with synthetic features attached.
pub fn attach_features(scene: Scene, classes: &[Archetype], spec: &FeatureSpec, rng: &mut impl Rng) -> Result<Scene> {
    let (_, f) = gen_semantic_features(&scene, classes, spec, rng)?;
    scene.with_features(spec.dim, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objects_lean_away_from_background() {
        let e = class_embeddings(&FeatureSpec::default());
        for v in &e[1..] {
            let d: f64 = v.iter().zip(&e[0]).map(|(a, b)| a * b).sum();
            assert!(d < 0.0);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
