use rand::Rng;

use super::{LayerNorm, Linear, LnCache, Mlp, MlpCache, Params};
use crate::tensor::{Mat, Real};

/// Pre-norm transformer block: single-head self-attention followed by a
/// feed-forward network with 4x expansion, each wrapped in a residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    pub ln1: LayerNorm<T>,
    pub wq: Linear<T>,
    pub wk: Linear<T>,
    pub wv: Linear<T>,
    pub wo: Linear<T>,
    pub ln2: LayerNorm<T>,
    pub ff: Mlp<T>,
}

#[derive(Clone, Debug)]
pub struct BlockCache<T> {
    c1: LnCache<T>,
    z1: Mat<T>,
    q: Mat<T>,
    k: Mat<T>,
    v: Mat<T>,
    attn: Mat<T>,
    o: Mat<T>,
    c2: LnCache<T>,
    cf: MlpCache<T>,
}

impl<T: Real> Block<T> {
    pub fn new(dim: usize, rng: &mut impl Rng) -> Self {
        Block {
            ln1: LayerNorm::new(dim),
            wq: Linear::new(dim, dim, rng),
            wk: Linear::new(dim, dim, rng),
            wv: Linear::new(dim, dim, rng),
            wo: Linear::new(dim, dim, rng),
            ln2: LayerNorm::new(dim),
            ff: Mlp::new(dim, 4 * dim, dim, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.input_dim()
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, BlockCache<T>) {
        let scale = T::one() / T::c(self.dim() as f64).sqrt();
        let (z1, c1) = self.ln1.forward(x);
        let q = self.wq.forward(&z1);
        let k = self.wk.forward(&z1);
        let v = self.wv.forward(&z1);
        let mut attn = q.matmul_nt(&k);
        attn.scale(scale);
        softmax_rows(&mut attn);
        let o = attn.matmul(&v);
        let mut h = self.wo.forward(&o);
        h.add_assign(x);
        let (z2, c2) = self.ln2.forward(&h);
        let (f, cf) = self.ff.forward(&z2);
        let mut y = h;
        y.add_assign(&f);
        (
            y,
            BlockCache {
                c1,
                z1,
                q,
                k,
                v,
                attn,
                o,
                c2,
                cf,
            },
        )
    }

    pub fn backward(&self, cache: &BlockCache<T>, dy: &Mat<T>, grad: &mut Block<T>) -> Mat<T> {
        let scale = T::one() / T::c(self.dim() as f64).sqrt();
        let dz2 = self.ff.backward(&cache.cf, dy, &mut grad.ff);
        let mut dh = self.ln2.backward(&cache.c2, &dz2, &mut grad.ln2);
        dh.add_assign(dy);

        let d_o = self.wo.backward(&cache.o, &dh, &mut grad.wo);
        let da = d_o.matmul_nt(&cache.v);
        let dv = cache.attn.matmul_tn(&d_o);
        let mut ds = da;
        for i in 0..ds.rows {
            let a = cache.attn.row(i);
            let dot: T = ds.row(i).iter().zip(a).map(|(&g, &p)| g * p).sum();
            for (g, &p) in ds.row_mut(i).iter_mut().zip(a) {
                *g = p * (*g - dot) * scale;
            }
        }
        let dq = ds.matmul(&cache.k);
        let dk = ds.matmul_tn(&cache.q);
        let mut dz1 = self.wq.backward(&cache.z1, &dq, &mut grad.wq);
        dz1.add_assign(&self.wk.backward(&cache.z1, &dk, &mut grad.wk));
        dz1.add_assign(&self.wv.backward(&cache.z1, &dv, &mut grad.wv));
        let mut dx = self.ln1.backward(&cache.c1, &dz1, &mut grad.ln1);
        dx.add_assign(&dh);
        dx
    }
}

impl<T: Real> Params<T> for Block<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        crate::visit_children!(self, f, [
            "ln1" => self.ln1, "wq" => self.wq, "wk" => self.wk, "wv" => self.wv,
            "wo" => self.wo, "ln2" => self.ln2, "ff" => self.ff,
        ]);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        crate::visit_children_mut!(self, f, [
            "ln1" => self.ln1, "wq" => self.wq, "wk" => self.wk, "wv" => self.wv,
            "wo" => self.wo, "ln2" => self.ln2, "ff" => self.ff,
        ]);
    }
}

pub(crate) fn softmax_rows<T: Real>(m: &mut Mat<T>) {
    for i in 0..m.rows {
        let row = m.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
