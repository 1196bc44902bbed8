use rand::Rng;

use super::Scene;
use crate::error::{Error, Result};
use crate::nn::{gelu, gelu_grad, Linear, Params};
use crate::tensor::{Mat, Real};
use crate::{visit_children, visit_children_mut};

pub const ENCODER_HIDDEN: usize = 64;

/// Three-layer per-point network standing in for a sparse-conv backbone.
#[derive(Clone, Debug)]
pub struct PointEncoder<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
    pub l3: Linear<T>,
}

pub struct EncoderCache<T> {
    x: Mat<T>,
    z1: Mat<T>,
    h1: Mat<T>,
    z2: Mat<T>,
    h2: Mat<T>,
}

/// Input width for scenes with `feat_dim` semantic channels.
pub fn encoder_input_dim(feat_dim: usize) -> usize {
    6 + feat_dim
}

/// Builds `[xyz - centroid, rgb, features]` rows.
pub fn encoder_input<T: Real>(scene: &Scene) -> Mat<T> {
    let c = scene.centroid();
    let d = encoder_input_dim(scene.feat_dim);
    let mut x = Mat::zeros(scene.len(), d);
    for i in 0..scene.len() {
        let p = scene.point(i);
        let rgb = scene.color(i);
        let row = x.row_mut(i);
        for j in 0..3 {
            row[j] = T::c(p[j] - c[j]);
            row[3 + j] = T::c(rgb[j]);
        }
        for (o, v) in row[6..].iter_mut().zip(scene.feature(i)) {
            *o = T::c(*v as f64);
        }
    }
    x
}

impl<T: Real> PointEncoder<T> {
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        PointEncoder {
            l1: Linear::new(input, hidden, rng),
            l2: Linear::new(hidden, hidden, rng),
            l3: Linear::new(hidden, output, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.l1.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.l3.output_dim()
    }

    pub fn forward(&self, x: &Mat<T>) -> Result<(Mat<T>, EncoderCache<T>)> {
        if x.cols != self.input_dim() {
            return Err(Error::dims(format!(
                "encoder expects {} input channels, got {}",
                self.input_dim(),
                x.cols
            )));
        }
        let z1 = self.l1.forward(x);
        let h1 = z1.map(gelu);
        let z2 = self.l2.forward(&h1);
        let h2 = z2.map(gelu);
        let y = self.l3.forward(&h2);
        Ok((
            y,
            EncoderCache {
                x: x.clone(),
                z1,
                h1,
                z2,
                h2,
            },
        ))
    }

    /// Accumulates parameter gradients into `grad`.
    pub fn backward(&self, cache: &EncoderCache<T>, dy: &Mat<T>, grad: &mut Self) {
        let mut dh2 = self.l3.backward(&cache.h2, dy, &mut grad.l3);
        for (g, z) in dh2.data.iter_mut().zip(&cache.z2.data) {
            *g *= gelu_grad(*z);
        }
        let mut dh1 = self.l2.backward(&cache.h1, &dh2, &mut grad.l2);
        for (g, z) in dh1.data.iter_mut().zip(&cache.z1.data) {
            *g *= gelu_grad(*z);
        }
        self.l1.backward(&cache.x, &dh1, &mut grad.l1);
    }
}

impl<T: Real> Params<T> for PointEncoder<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        visit_children!(self, f, ["l1" => self.l1, "l2" => self.l2, "l3" => self.l3]);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        visit_children_mut!(self, f, ["l1" => self.l1, "l2" => self.l2, "l3" => self.l3]);
    }
}

/// Per-point features for `scene`.
pub fn encode_points<T: Real>(scene: &Scene, enc: &PointEncoder<T>) -> Result<Mat<T>> {
    let x = encoder_input(scene);
    Ok(enc.forward(&x)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_params;
    use crate::nn::zero_grad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> Scene {
        Scene::new(
            "e",
            vec![[0.0, 0.0, 0.0], [1.0, 0.5, 0.2], [1.0, 0.5, 0.2]],
            vec![[255, 0, 0], [0, 128, 255], [0, 128, 255]],
            vec![-1; 3],
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut enc = PointEncoder::<f64>::new(6, 8, 4, &mut rng);
        zero_grad(&mut enc);
        let y = encode_points(&scene(), &enc).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_points_identical_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = PointEncoder::<f64>::new(6, 8, 4, &mut rng);
        let y = encode_points(&scene(), &enc).unwrap();
        assert_eq!(y.row(1), y.row(2));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = PointEncoder::<f64>::new(9, 8, 4, &mut rng);
        assert!(matches!(encode_points(&scene(), &enc), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = PointEncoder::<f64>::new(6, 8, 4, &mut rng);
        let x: Mat<f64> = encoder_input(&scene());
        let w = Mat::from_fn(3, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin());
        let loss = |e: &PointEncoder<f64>| -> f64 {
            let (y, _) = e.forward(&x).unwrap();
            y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = enc.forward(&x).unwrap();
        let mut grad = enc.clone();
        zero_grad(&mut grad);
        enc.backward(&cache, &w, &mut grad);
        check_params(&enc, &grad, loss, 1e-4);
    }
}
