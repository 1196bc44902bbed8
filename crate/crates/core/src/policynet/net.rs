use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{init_weight, Block, BlockCache, LayerNorm, Linear, LnCache, Params};
use crate::tensor::{Mat, Real};

/// Learnable value token, input projection, a stack of attention blocks, a
/// final norm and two heads: a per-token logit and a value read from the
/// value token.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenNet<T> {
    pub value_token: Mat<T>,
    pub proj: Linear<T>,
    pub blocks: Vec<Block<T>>,
    pub ln_out: LayerNorm<T>,
    pub head: Linear<T>,
    pub value_head: Linear<T>,
}

pub struct TokenCache<T> {
    tokens: Mat<T>,
    blocks: Vec<BlockCache<T>>,
    ln: LnCache<T>,
    out: Mat<T>,
}

impl<T: Real> TokenNet<T> {
    pub fn new(input: usize, hidden: usize, n_blocks: usize, rng: &mut impl Rng) -> Self {
        let mut head = Linear::new(hidden, 1, rng);
        // Small logits at init keep the untrained policy close to uniform.
        head.w.scale(T::c(0.01));
        TokenNet {
            value_token: init_weight(1, hidden, rng),
            proj: Linear::new(input, hidden, rng),
            blocks: (0..n_blocks).map(|_| Block::new(hidden, rng)).collect(),
            ln_out: LayerNorm::new(hidden),
            head,
            value_head: Linear::new(hidden, 1, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.proj.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.proj.output_dim()
    }

    /// Returns one logit per input row and the value estimate.
    pub fn forward(&self, tokens: &Mat<T>) -> Result<(Vec<T>, T, TokenCache<T>)> {
        if tokens.cols != self.input_dim() {
            return Err(Error::dims(format!(
                "policy expects {}-dim features, got {}",
                self.input_dim(),
                tokens.cols
            )));
        }
        let mut x = Mat::vstack(&self.value_token, &self.proj.forward(tokens));
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&x);
            caches.push(c);
            x = y;
        }
        let (out, ln) = self.ln_out.forward(&x);
        let logits = self.head.forward(&out.slice_rows(1, out.rows)).data;
        let value = self.value_head.forward(&out.slice_rows(0, 1)).data[0];
        Ok((
            logits,
            value,
            TokenCache {
                tokens: tokens.clone(),
                blocks: caches,
                ln,
                out,
            },
        ))
    }

    /// Accumulates parameter gradients and returns `dL/dtokens`.
    pub fn backward(&self, cache: &TokenCache<T>, d_logits: &[T], d_value: T, grad: &mut Self) -> Mat<T> {
        let n = cache.out.rows;
        let mut d_out = Mat::zeros(n, self.hidden());
        let dl = Mat::from_vec(n - 1, 1, d_logits.to_vec());
        let d_rows = self.head.backward(&cache.out.slice_rows(1, n), &dl, &mut grad.head);
        for i in 0..n - 1 {
            d_out.row_mut(i + 1).copy_from_slice(d_rows.row(i));
        }
        let dv = Mat::from_vec(1, 1, vec![d_value]);
        let d0 = self
            .value_head
            .backward(&cache.out.slice_rows(0, 1), &dv, &mut grad.value_head);
        d_out.row_mut(0).copy_from_slice(d0.row(0));
        let mut dx = self.ln_out.backward(&cache.ln, &d_out, &mut grad.ln_out);
        for (i, b) in self.blocks.iter().enumerate().rev() {
            dx = b.backward(&cache.blocks[i], &dx, &mut grad.blocks[i]);
        }
        for (g, d) in grad.value_token.data.iter_mut().zip(dx.row(0)) {
            *g += *d;
        }
        self.proj.backward(&cache.tokens, &dx.slice_rows(1, n), &mut grad.proj)
    }
}

impl<T: Real> Params<T> for TokenNet<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>)) {
        f("value_token", &self.value_token);
        self.proj.visit(&mut |n, m| f(&format!("proj.{n}"), m));
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&mut |n, m| f(&format!("block{i}.{n}"), m));
        }
        self.ln_out.visit(&mut |n, m| f(&format!("ln_out.{n}"), m));
        self.head.visit(&mut |n, m| f(&format!("head.{n}"), m));
        self.value_head.visit(&mut |n, m| f(&format!("value_head.{n}"), m));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>)) {
        f("value_token", &mut self.value_token);
        self.proj.visit_mut(&mut |n, m| f(&format!("proj.{n}"), m));
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&mut |n, m| f(&format!("block{i}.{n}"), m));
        }
        self.ln_out.visit_mut(&mut |n, m| f(&format!("ln_out.{n}"), m));
        self.head.visit_mut(&mut |n, m| f(&format!("head.{n}"), m));
        self.value_head.visit_mut(&mut |n, m| f(&format!("value_head.{n}"), m));
    }
}
