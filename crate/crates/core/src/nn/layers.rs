use rand::Rng;

use super::{init_weight, Params};
use crate::tensor::{Mat, Real};

/// `y = x W + b` with `W: in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub w: Mat<T>,
    pub b: Mat<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: init_weight(input, output, rng),
            b: Mat::zeros(1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols
    }

    pub fn forward(&self, x: &Mat<T>) -> Mat<T> {
        let mut y = x.matmul(&self.w);
        y.add_row_broadcast(&self.b);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Mat<T>, dy: &Mat<T>, grad: &mut Linear<T>) -> Mat<T> {
        grad.w.add_matmul_tn(x, dy);
        grad.b.add_assign(&dy.sum_rows());
        dy.matmul_nt(&self.w)
    }
}

impl<T: Real> Params<T> for Linear<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        f("w", &self.w);
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        f("w", &mut self.w);
        f("b", &mut self.b);
    }
}

const LN_EPS: f64 = 1e-5;

/// Per-row layer normalisation with learned gain and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<T> {
    pub gain: Mat<T>,
    pub bias: Mat<T>,
}

#[derive(Clone, Debug)]
pub struct LnCache<T> {
    xhat: Mat<T>,
    inv_std: Vec<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gain: Mat::from_vec(1, dim, vec![T::one(); dim]),
            bias: Mat::zeros(1, dim),
        }
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, LnCache<T>) {
        let d = T::c(x.cols as f64);
        let mut xhat = x.zeros_like();
        let mut y = x.zeros_like();
        let mut inv_std = Vec::with_capacity(x.rows);
        for i in 0..x.rows {
            let row = x.row(i);
            let mean = row.iter().copied().sum::<T>() / d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / d;
            let is = T::one() / (var + T::c(LN_EPS)).sqrt();
            inv_std.push(is);
            for j in 0..x.cols {
                let h = (row[j] - mean) * is;
                *xhat.at_mut(i, j) = h;
                *y.at_mut(i, j) = h * self.gain.data[j] + self.bias.data[j];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LnCache<T>, dy: &Mat<T>, grad: &mut LayerNorm<T>) -> Mat<T> {
        let d = T::c(dy.cols as f64);
        let mut dx = dy.zeros_like();
        for i in 0..dy.rows {
            let xh = cache.xhat.row(i);
            let g = dy.row(i);
            let mut sum_dh = T::zero();
            let mut sum_dh_xh = T::zero();
            for j in 0..dy.cols {
                grad.gain.data[j] += g[j] * xh[j];
                grad.bias.data[j] += g[j];
                let dh = g[j] * self.gain.data[j];
                sum_dh += dh;
                sum_dh_xh += dh * xh[j];
            }
            let is = cache.inv_std[i];
            for j in 0..dy.cols {
                let dh = g[j] * self.gain.data[j];
                *dx.at_mut(i, j) = is * (dh - sum_dh / d - xh[j] * sum_dh_xh / d);
            }
        }
        dx
    }
}

impl<T: Real> Params<T> for LayerNorm<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        f("gain", &self.gain);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        f("gain", &mut self.gain);
        f("bias", &mut self.bias);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh-approximated GELU.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::c(0.5);
    let inner = T::c(GELU_C) * (x + T::c(0.044715) * x * x * x);
    half * x * (T::one() + inner.tanh())
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    let half = T::c(0.5);
    let x2 = x * x;
    let inner = T::c(GELU_C) * (x + T::c(0.044715) * x2 * x);
    let t = inner.tanh();
    let dinner = T::c(GELU_C) * (T::one() + T::c(3.0 * 0.044715) * x2);
    half * (T::one() + t) + half * x * (T::one() - t * t) * dinner
}

/// Two-layer perceptron `Linear -> GELU -> Linear`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
}

#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    x: Mat<T>,
    pre: Mat<T>,
    act: Mat<T>,
}

impl<T: Real> Mlp<T> {
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            fc1: Linear::new(input, hidden, rng),
            fc2: Linear::new(hidden, output, rng),
        }
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, MlpCache<T>) {
        let pre = self.fc1.forward(x);
        let act = pre.map(gelu);
        let y = self.fc2.forward(&act);
        (y, MlpCache { x: x.clone(), pre, act })
    }

    pub fn backward(&self, cache: &MlpCache<T>, dy: &Mat<T>, grad: &mut Mlp<T>) -> Mat<T> {
        let mut dact = self.fc2.backward(&cache.act, dy, &mut grad.fc2);
        for (g, &p) in dact.data.iter_mut().zip(&cache.pre.data) {
            *g *= gelu_grad(p);
        }
        self.fc1.backward(&cache.x, &dact, &mut grad.fc1)
    }
}

impl<T: Real> Params<T> for Mlp<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        crate::visit_children!(self, f, ["fc1" => self.fc1, "fc2" => self.fc2]);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        crate::visit_children_mut!(self, f, ["fc1" => self.fc1, "fc2" => self.fc2]);
    }
}
