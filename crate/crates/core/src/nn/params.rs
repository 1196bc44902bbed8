use crate::tensor::{Mat, Real};

/// Named traversal over every trainable tensor of a network.
///
/// Visiting order is fixed by the implementation and shared between the
/// parameter struct and its gradient twin, so flat views line up.
pub trait Params<T: Real> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Mat<T>));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Mat<T>));
}

pub fn num_params<T: Real>(p: &impl Params<T>) -> usize {
    let mut n = 0;
    p.visit(&mut |_, m| n += m.data.len());
    n
}

pub fn flatten<T: Real>(p: &impl Params<T>) -> Vec<T> {
    let mut out = Vec::new();
    p.visit(&mut |_, m| out.extend_from_slice(&m.data));
    out
}

pub fn assign_flat<T: Real>(p: &mut impl Params<T>, flat: &[T]) {
    let mut off = 0;
    p.visit_mut(&mut |_, m| {
        let n = m.data.len();
        m.data.copy_from_slice(&flat[off..off + n]);
        off += n;
    });
    assert_eq!(off, flat.len(), "flat parameter length");
}

pub fn zero_grad<T: Real>(p: &mut impl Params<T>) {
    p.visit_mut(&mut |_, m| m.fill(T::zero()));
}

/// Forwards a child's visit under `prefix.`.
#[macro_export]
macro_rules! visit_children {
    ($self:ident, $f:ident, [$($name:literal => $field:expr),* $(,)?]) => {
        $(
            $crate::nn::Params::visit(&$field, &mut |n: &str, m| $f(&format!("{}.{}", $name, n), m));
        )*
    };
}

#[macro_export]
macro_rules! visit_children_mut {
    ($self:ident, $f:ident, [$($name:literal => $field:expr),* $(,)?]) => {
        $(
            $crate::nn::Params::visit_mut(&mut $field, &mut |n: &str, m| $f(&format!("{}.{}", $name, n), m));
        )*
    };
}
