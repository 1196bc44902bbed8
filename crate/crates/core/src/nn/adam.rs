use super::{flatten, Params};
use crate::tensor::Real;

/// Adaptive moment estimation over a flat view of a parameter struct.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step<P: Params<T>>(&mut self, params: &mut P, grads: &P) {
        let g = flatten(grads);
        if self.m.len() != g.len() {
            self.m = vec![T::zero(); g.len()];
            self.v = vec![T::zero(); g.len()];
        }
        self.t += 1;
        let (b1, b2) = (T::c(self.beta1), T::c(self.beta2));
        let bc1 = T::c(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = T::c(1.0 - self.beta2.powi(self.t as i32));
        let lr = T::c(self.lr);
        let eps = T::c(self.eps);
        for i in 0..g.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g[i] * g[i];
        }
        let mut off = 0;
        let (m, v) = (&self.m, &self.v);
        params.visit_mut(&mut |_, mat| {
            for x in mat.data.iter_mut() {
                let mhat = m[off] / bc1;
                let vhat = v[off] / bc2;
                *x -= lr * mhat / (vhat.sqrt() + eps);
                off += 1;
            }
        });
    }
}
