use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampler::CenterSample;
use crate::error::{Error, Result};
use crate::nn::{decode_checkpoint, encode_checkpoint, gelu, gelu_grad, zero_grad, Adam, Linear, Params};
use crate::scenegraph::io::write_atomic;
use crate::spatial::P3;
use crate::tensor::{Mat, Real};
use crate::{visit_children, visit_children_mut};

pub const CENTER_MAGIC: &[u8; 4] = b"FOBC";

/// Pointwise offset regressor with a max-pooled global context.
///
/// `x (N×3) → 64 → 128 = h`, `g = max_rows(h)`, `[h, g] (N×256) → 128 → 3`.
#[derive(Clone, Debug)]
pub struct CenterRegressor<T> {
    pub p1: Linear<T>,
    pub p2: Linear<T>,
    pub h1: Linear<T>,
    pub h2: Linear<T>,
}

pub struct RegressorCache<T> {
    x: Mat<T>,
    z1: Mat<T>,
    a1: Mat<T>,
    z2: Mat<T>,
    argmax: Vec<usize>,
    cat: Mat<T>,
    z3: Mat<T>,
    a3: Mat<T>,
}

impl<T: Real> CenterRegressor<T> {
    pub fn new(hidden: usize, context: usize, rng: &mut impl Rng) -> Self {
        CenterRegressor {
            p1: Linear::new(3, hidden, rng),
            p2: Linear::new(hidden, context, rng),
            h1: Linear::new(2 * context, context, rng),
            h2: Linear::new(context, 3, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.p1.output_dim()
    }

    pub fn context(&self) -> usize {
        self.p2.output_dim()
    }

    pub fn forward(&self, x: &Mat<T>) -> Result<(Mat<T>, RegressorCache<T>)> {
        if x.cols != 3 || x.rows == 0 {
            return Err(Error::dims(format!(
                "regressor expects N×3 input with N > 0, got {}×{}",
                x.rows, x.cols
            )));
        }
        let z1 = self.p1.forward(x);
        let a1 = z1.map(gelu);
        let z2 = self.p2.forward(&a1);
        let h = z2.map(gelu);
        let c = self.context();
        let mut argmax = vec![0usize; c];
        for j in 0..c {
            for i in 1..h.rows {
                if h.at(i, j) > h.at(argmax[j], j) {
                    argmax[j] = i;
                }
            }
        }
        let cat = Mat::from_fn(h.rows, 2 * c, |i, j| {
            if j < c {
                h.at(i, j)
            } else {
                h.at(argmax[j - c], j - c)
            }
        });
        let z3 = self.h1.forward(&cat);
        let a3 = z3.map(gelu);
        let y = self.h2.forward(&a3);
        Ok((
            y,
            RegressorCache {
                x: x.clone(),
                z1,
                a1,
                z2,
                argmax,
                cat,
                z3,
                a3,
            },
        ))
    }

    pub fn backward(&self, cache: &RegressorCache<T>, dy: &Mat<T>, grad: &mut Self) {
        let c = self.context();
        let mut da3 = self.h2.backward(&cache.a3, dy, &mut grad.h2);
        for (g, z) in da3.data.iter_mut().zip(&cache.z3.data) {
            *g *= gelu_grad(*z);
        }
        let dcat = self.h1.backward(&cache.cat, &da3, &mut grad.h1);
        let n = dcat.rows;
        let mut dh = Mat::from_fn(n, c, |i, j| dcat.at(i, j));
        for j in 0..c {
            let mut s = T::zero();
            for i in 0..n {
                s += dcat.at(i, c + j);
            }
            *dh.at_mut(cache.argmax[j], j) += s;
        }
        for (g, z) in dh.data.iter_mut().zip(&cache.z2.data) {
            *g *= gelu_grad(*z);
        }
        let mut da1 = self.p2.backward(&cache.a1, &dh, &mut grad.p2);
        for (g, z) in da1.data.iter_mut().zip(&cache.z1.data) {
            *g *= gelu_grad(*z);
        }
        self.p1.backward(&cache.x, &da1, &mut grad.p1);
    }

    /// Mean squared offset error and its gradient with respect to the output.
    pub fn mse(pred: &Mat<T>, target: &Mat<T>) -> (f64, Mat<T>) {
        let n = pred.rows.max(1) as f64;
        let mut loss = 0.0;
        let mut d = pred.zeros_like();
        for ((g, p), t) in d.data.iter_mut().zip(&pred.data).zip(&target.data) {
            let e = *p - *t;
            loss += e.f64() * e.f64();
            *g = e * T::c(2.0 / n);
        }
        (loss / n, d)
    }

    /// Offsets for already normalized points.
    pub fn predict(&self, points: &[P3]) -> Result<Vec<P3>> {
        let x = points_mat::<T>(points);
        let (y, _) = self.forward(&x)?;
        Ok((0..y.rows)
            .map(|i| [y.at(i, 0).f64(), y.at(i, 1).f64(), y.at(i, 2).f64()])
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = format!(
            "hidden={}\ncontext={}\nnormalization=centroid_unit_cube",
            self.hidden(),
            self.context()
        );
        encode_checkpoint(CENTER_MAGIC, &meta, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck = decode_checkpoint(bytes, CENTER_MAGIC)?;
        let mut rng = crate::rng::rng_from(0);
        let mut m = Self::new(ck.meta_usize("hidden")?, ck.meta_usize("context")?, &mut rng);
        ck.load_into(&mut m)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl<T: Real> Params<T> for CenterRegressor<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        visit_children!(self, f, ["p1" => self.p1, "p2" => self.p2, "h1" => self.h1, "h2" => self.h2]);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        visit_children_mut!(self, f, ["p1" => self.p1, "p2" => self.p2, "h1" => self.h1, "h2" => self.h2]);
    }
}

pub(crate) fn points_mat<T: Real>(points: &[P3]) -> Mat<T> {
    Mat::from_fn(points.len(), 3, |i, j| T::c(points[i][j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Points drawn per sample and step.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for RegressorTrainConfig {
    fn default() -> Self {
        RegressorTrainConfig {
            epochs: 20,
            lr: 1e-3,
            max_points: 1024,
            seed: 0,
        }
    }
}

/// Adam on the mean squared offset error, one sample per step. Returns the
/// mean loss of each epoch.
pub fn train_center_regressor(
    samples: &[CenterSample],
    model: &mut CenterRegressor<f32>,
    cfg: &RegressorTrainConfig,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let mut rng = crate::rng::rng_from(cfg.seed);
    let mut adam = Adam::new(cfg.lr);
    let mut grad = model.clone();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for (si, s) in samples.iter().enumerate() {
            let n = s.points.len();
            let idx: Vec<usize> = if n > cfg.max_points {
                let mut v = sample(&mut rng, n, cfg.max_points).into_vec();
                v.sort_unstable();
                v
            } else {
                (0..n).collect()
            };
            let x = Mat::from_fn(idx.len(), 3, |i, j| s.points[idx[i]][j] as f32);
            let t = Mat::from_fn(idx.len(), 3, |i, j| s.offsets[idx[i]][j] as f32);
            let (y, cache) = model.forward(&x)?;
            let (loss, dy) = CenterRegressor::mse(&y, &t);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite regressor loss at epoch {epoch}, sample {si} ({n} points)"
                )));
            }
            total += loss;
            zero_grad(&mut grad);
            model.backward(&cache, &dy, &mut grad);
            adam.step(model, &grad);
        }
        curve.push(total / samples.len() as f64);
    }
    Ok(curve)
}
