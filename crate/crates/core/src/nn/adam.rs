use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::scalar::Scalar;
use super::schedule::TrainHyper;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Named parameters plus Adam moment buffers and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T = f32> {
    pub names: Vec<String>,
    pub params: Vec<Tensor<T>>,
    pub adam_m: Vec<Tensor<T>>,
    pub adam_v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> ModelState<T> {
    /// Fresh state with zeroed moments.
    pub fn new(names: Vec<String>, params: Vec<Tensor<T>>) -> Result<Self> {
        if names.len() != params.len() {
            return Err(Error::Shape(format!(
                "{} names for {} parameters",
                names.len(),
                params.len()
            )));
        }
        let zeros: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            names,
            adam_m: zeros.clone(),
            adam_v: zeros,
            params,
            step: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.params.len()
            || self.adam_m.len() != self.params.len()
            || self.adam_v.len() != self.params.len()
        {
            return Err(Error::Shape("parameter and moment lists differ in length".into()));
        }
        for ((p, m), v) in self.params.iter().zip(&self.adam_m).zip(&self.adam_v) {
            p.same_shape(m)?;
            p.same_shape(v)?;
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelState<U> {
        ModelState {
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            adam_m: self.adam_m.iter().map(Tensor::cast).collect(),
            adam_v: self.adam_v.iter().map(Tensor::cast).collect(),
            step: self.step,
        }
    }
}

/// One bias-corrected Adam update with learning rate `lr`.
///
/// Gradients are checked for finiteness before anything is modified, so a
/// failed step leaves the state untouched.
pub fn adam_step<T: Scalar>(state: &mut ModelState<T>, grads: &[Tensor<T>], lr: f64, hyper: &TrainHyper) -> Result<()> {
    if grads.len() != state.params.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameters",
            grads.len(),
            state.params.len()
        )));
    }
    for (g, p) in grads.iter().zip(&state.params) {
        g.same_shape(p)?;
    }
    if let Some(i) = grads.iter().position(|g| !g.all_finite()) {
        return Err(Error::Numerics(format!("gradient of {} is not finite", state.names[i])));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(hyper.beta1), T::lit(hyper.beta2));
    let c1 = T::lit(1.0 - libm::pow(hyper.beta1, f64::from(t)));
    let c2 = T::lit(1.0 - libm::pow(hyper.beta2, f64::from(t)));
    let (lr, eps) = (T::lit(lr), T::lit(hyper.eps));
    for (((p, m), v), g) in state
        .params
        .iter_mut()
        .zip(&mut state.adam_m)
        .zip(&mut state.adam_v)
        .zip(grads)
    {
        for (((p, m), v), &g) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
