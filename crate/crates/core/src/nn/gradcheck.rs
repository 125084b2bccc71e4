//! Central finite-difference verification of analytic gradients (`f64`).

use alloc::string::String;
use alloc::vec::Vec;

use super::adam::ModelState;
use super::loss::{sigmoid_loss, sigmoid_loss_backward, LossKind};
use super::tensor::Tensor;
use super::unet::UNet;
use crate::error::Result;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Magnitude below which gradients are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Numerical gradient of `f` at `x`.
pub fn finite_difference<F>(x: &Tensor<f64>, mut f: F, h: f64) -> Tensor<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    grad
}

pub fn max_relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Per-parameter-block outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a PReLU kink or changed a
    /// pooling choice; the loss is not differentiable there.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradReport {
    pub blocks: Vec<BlockError>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.blocks.iter().map(|b| b.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.blocks.iter().map(|b| b.skipped).sum()
    }
}

/// Checks every parameter of `net` on the batch-mean loss of `kind`.
pub fn check_unet(
    net: &UNet,
    state: &ModelState<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    kind: LossKind,
    h: f64,
) -> Result<GradReport> {
    let n = input.n();
    let weights: Vec<f64> = alloc::vec![1.0 / n as f64; n];
    let eval = |params: &[Tensor<f64>]| -> Result<(f64, u64)> {
        let (logits, cache) = net.forward(params, input)?;
        let (_, losses) = sigmoid_loss(kind, &logits, target)?;
        Ok((losses.iter().sum::<f64>() / n as f64, cache.branch_signature()))
    };
    let (logits, cache) = net.forward(&state.params, input)?;
    let (prob, _) = sigmoid_loss(kind, &logits, target)?;
    let d_logits = sigmoid_loss_backward(kind, &prob, target, &weights)?;
    let analytic = net.backward(&state.params, &cache, &d_logits)?;
    let base_sig = cache.branch_signature();

    let mut params = state.params.clone();
    let mut report = GradReport::default();
    for (b, name) in state.names.iter().enumerate() {
        let mut block = BlockError {
            name: name.clone(),
            max_rel_error: 0.0,
            checked: 0,
            skipped: 0,
        };
        for i in 0..params[b].len() {
            let orig = params[b].data()[i];
            params[b].data_mut()[i] = orig + h;
            let (up, sig_up) = eval(&params)?;
            params[b].data_mut()[i] = orig - h;
            let (down, sig_down) = eval(&params)?;
            params[b].data_mut()[i] = orig;
            if sig_up != base_sig || sig_down != base_sig {
                block.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            block.max_rel_error = block.max_rel_error.max(relative_error(analytic[b].data()[i], numeric));
            block.checked += 1;
        }
        report.blocks.push(block);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv::{conv2d, conv2d_backward};
    use crate::nn::testutil::random_tensor;
    use crate::rng::seeded;

    #[test]
    fn linear_layer_is_exact() {
        let mut rng = seeded(31);
        let x = random_tensor::<f64>(&mut rng, [1, 2, 4, 4]);
        let k = random_tensor::<f64>(&mut rng, [2, 2, 3, 3]);
        let b = Tensor::zeros([1, 2, 1, 1]);
        let probe = random_tensor::<f64>(&mut rng, [1, 2, 4, 4]);
        let g = conv2d_backward(&x, &k, 1, 1, &probe, false).unwrap();
        let numeric = finite_difference(&k, |t| conv2d(&x, t, &b, 1, 1).unwrap().dot(&probe).unwrap(), FD_STEP);
        assert!(max_relative_error(&g.kernel, &numeric) < 1e-7);
    }
}
