//! Per-sample segmentation losses on sigmoid probabilities.
//!
//! Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the
//! loss is evaluated; the clamp has zero derivative where it is active.

use alloc::format;
use alloc::vec::Vec;

use super::activation::sigmoid;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Binary cross-entropy, averaged over pixels.
    Bce,
    /// Mean absolute error between probability and label.
    Mae,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Mae => "mae",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "bce" => Some(LossKind::Bce),
            "mae" => Some(LossKind::Mae),
            _ => None,
        }
    }
}

#[inline]
fn clamp<T: Scalar>(p: T) -> T {
    let lo = T::lit(PROB_CLAMP);
    let hi = T::one() - lo;
    p.max(lo).min(hi)
}

#[inline]
fn inside_clamp<T: Scalar>(p: T) -> bool {
    let lo = T::lit(PROB_CLAMP);
    p > lo && p < T::one() - lo
}

fn check_pair<T: Scalar>(prob: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if prob.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "probabilities {:?} vs targets {:?}",
            prob.shape(),
            target.shape()
        )));
    }
    Ok(())
}

fn per_sample<T: Scalar>(prob: &Tensor<T>, target: &Tensor<T>, f: impl Fn(f64, f64) -> f64) -> Result<Vec<T>> {
    check_pair(prob, target)?;
    let count = prob.sample_len() as f64;
    Ok((0..prob.n())
        .map(|i| {
            let total: f64 = prob
                .sample(i)
                .iter()
                .zip(target.sample(i))
                .map(|(&p, &y)| f(clamp(p).as_f64(), y.as_f64()))
                .sum();
            T::lit(total / count)
        })
        .collect())
}

/// `-mean[y ln p + (1 - y) ln(1 - p)]` per batch element.
pub fn bce_loss<T: Scalar>(prob: &Tensor<T>, target: &Tensor<T>) -> Result<Vec<T>> {
    per_sample(prob, target, |p, y| -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p)))
}

/// `mean |p - y|` per batch element.
pub fn mae_loss<T: Scalar>(prob: &Tensor<T>, target: &Tensor<T>) -> Result<Vec<T>> {
    per_sample(prob, target, |p, y| (p - y).abs())
}

pub fn loss<T: Scalar>(kind: LossKind, prob: &Tensor<T>, target: &Tensor<T>) -> Result<Vec<T>> {
    match kind {
        LossKind::Bce => bce_loss(prob, target),
        LossKind::Mae => mae_loss(prob, target),
    }
}

/// Sigmoid followed by the per-sample loss.
pub fn sigmoid_loss<T: Scalar>(kind: LossKind, logits: &Tensor<T>, target: &Tensor<T>) -> Result<(Tensor<T>, Vec<T>)> {
    let prob = sigmoid(logits);
    let losses = loss(kind, &prob, target)?;
    Ok((prob, losses))
}

/// Gradient with respect to the logits of `sum_i weights[i] * loss_i`,
/// where `prob = sigmoid(logits)` is the unclamped forward output.
pub fn sigmoid_loss_backward<T: Scalar>(
    kind: LossKind,
    prob: &Tensor<T>,
    target: &Tensor<T>,
    weights: &[T],
) -> Result<Tensor<T>> {
    check_pair(prob, target)?;
    if weights.len() != prob.n() {
        return Err(Error::Shape(format!(
            "{} loss weights for batch of {}",
            weights.len(),
            prob.n()
        )));
    }
    let scale = T::one() / T::lit(prob.sample_len() as f64);
    let mut grad = Tensor::zeros(prob.shape());
    for (i, &wi) in weights.iter().enumerate() {
        let k = wi * scale;
        let g = grad.sample_mut(i);
        if k == T::zero() {
            continue;
        }
        for ((gv, &p), &y) in g.iter_mut().zip(prob.sample(i)).zip(target.sample(i)) {
            if !inside_clamp(p) {
                continue;
            }
            let d_loss = match kind {
                LossKind::Bce => -y / p + (T::one() - y) / (T::one() - p),
                LossKind::Mae => {
                    if p > y {
                        T::one()
                    } else if p < y {
                        -T::one()
                    } else {
                        T::zero()
                    }
                }
            };
            *gv = k * d_loss * p * (T::one() - p);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{fd_check, random_tensor};
    use crate::rng::seeded;
    use alloc::vec;
    use rand::Rng;

    fn random_target(rng: &mut impl Rng, shape: [usize; 4]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect()).unwrap()
    }

    #[test]
    fn half_probability_gives_ln2() {
        let p = Tensor::<f64>::filled([2, 1, 3, 3], 0.5);
        let mut y = Tensor::<f64>::zeros([2, 1, 3, 3]);
        y.data_mut()[4] = 1.0;
        y.data_mut()[12] = 1.0;
        for l in bce_loss(&p, &y).unwrap() {
            assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_predictions() {
        let y = Tensor::from_vec([1, 1, 1, 4], vec![0.0f64, 1.0, 1.0, 0.0]).unwrap();
        assert!((mae_loss(&y, &y).unwrap()[0] - 1e-7).abs() < 1e-12);
        let bce = bce_loss(&y, &y).unwrap()[0];
        assert!(bce > 0.0 && bce < 2e-7);
        let exact = Tensor::from_vec([1, 1, 1, 2], vec![0.25f64, 0.75]).unwrap();
        assert_eq!(mae_loss(&exact, &exact).unwrap()[0], 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let p = Tensor::<f32>::zeros([1, 1, 2, 2]);
        let y = Tensor::<f32>::zeros([1, 1, 2, 3]);
        assert!(matches!(bce_loss(&p, &y), Err(Error::Shape(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(21);
        for kind in [LossKind::Bce, LossKind::Mae] {
            let z = random_tensor::<f64>(&mut rng, [3, 1, 4, 4]);
            let y = random_target(&mut rng, z.shape());
            let w = vec![0.5, 1.0, 0.0];
            let (p, _) = sigmoid_loss(kind, &z, &y).unwrap();
            let g = sigmoid_loss_backward(kind, &p, &y, &w).unwrap();
            let f = |t: &Tensor<f64>| {
                let (_, l) = sigmoid_loss(kind, t, &y).unwrap();
                l.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            assert!(fd_check(&z, &g, f) < 1e-6, "{kind:?}");
        }
    }
}
