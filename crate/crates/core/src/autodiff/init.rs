use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XavierVariant {
    Uniform,
    Normal,
}

/// `(fan_in, fan_out)` for a weight stored as `[out × in]`.
fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, 1),
        [out, inp] => (*inp, *out),
        [out, rest @ ..] => (rest.iter().product(), *out),
        [] => (1, 1),
    }
}

/// Glorot initialization: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`,
/// or `N(0, 2 / (fan_in + fan_out))`.
pub fn xavier_init<R: Rng + ?Sized>(shape: &[usize], variant: XavierVariant, rng: &mut R) -> Tensor {
    let (fan_in, fan_out) = fans(shape);
    let denom = (fan_in + fan_out) as f64;
    let mut t = Tensor::zeros(shape);
    match variant {
        XavierVariant::Uniform => {
            let bound = (6.0 / denom).sqrt();
            let dist = Uniform::new(-bound, bound).expect("finite positive bound");
            t.data_mut().iter_mut().for_each(|x| *x = dist.sample(rng));
        }
        XavierVariant::Normal => {
            let dist = Normal::new(0.0, (2.0 / denom).sqrt()).expect("finite std");
            t.data_mut().iter_mut().for_each(|x| *x = dist.sample(rng));
        }
    }
    t
}

pub fn zeros_init(shape: &[usize]) -> Tensor {
    Tensor::zeros(shape)
}
