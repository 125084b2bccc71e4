use alloc::format;
use alloc::vec::Vec;

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// 2x2 max pooling with stride 2.
///
/// Returns the pooled tensor and, per output element, the flat input index
/// of the selected value. On ties the first position in row-major window
/// order wins.
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let [n, c, h, w] = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("max pooling needs even dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for r in 0..oh {
            for col in 0..ow {
                let mut best = base + 2 * r * w + 2 * col;
                for idx in [best + 1, best + w, best + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best as u32);
            }
        }
    }
    Ok((Tensor::from_vec([n, c, oh, ow], out)?, argmax))
}

/// Routes each output gradient to the input position recorded in `argmax`.
pub fn maxpool2_backward<T: Scalar>(
    input_shape: [usize; 4],
    argmax: &[u32],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::Shape(format!(
            "{} output gradients for {} pooled values",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        d[i as usize] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{fd_check, random_tensor};
    use crate::rng::seeded;
    use alloc::vec;

    #[test]
    fn constant_input_routes_to_window_origin() {
        let x = Tensor::<f32>::filled([1, 1, 4, 4], 2.0);
        let (y, idx) = maxpool2(&x).unwrap();
        assert_eq!(y.data(), &[2.0; 4]);
        assert_eq!(idx, vec![0, 2, 8, 10]);
        let dx = maxpool2_backward(x.shape(), &idx, &Tensor::filled([1, 1, 2, 2], 1.0)).unwrap();
        assert_eq!(dx.data()[0], 1.0);
        assert_eq!(dx.data()[1], 0.0);
        assert_eq!(dx.data().iter().sum::<f32>(), 4.0);
    }

    #[test]
    fn increasing_raster_picks_bottom_right() {
        let x = Tensor::from_vec([1, 1, 4, 4], (0..16).map(|v| v as f32).collect()).unwrap();
        let (y, idx) = maxpool2(&x).unwrap();
        assert_eq!(y.data(), &[5.0, 7.0, 13.0, 15.0]);
        assert_eq!(idx, vec![5, 7, 13, 15]);
    }

    #[test]
    fn odd_dims_rejected() {
        assert!(matches!(maxpool2(&Tensor::<f32>::zeros([1, 1, 3, 4])), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeded(9);
        let x = random_tensor::<f64>(&mut rng, [2, 3, 4, 6]);
        let probe = random_tensor::<f64>(&mut rng, [2, 3, 2, 3]);
        let (_, idx) = maxpool2(&x).unwrap();
        let dx = maxpool2_backward(x.shape(), &idx, &probe).unwrap();
        let err = fd_check(&x, &dx, |t| maxpool2(t).unwrap().0.dot(&probe).unwrap());
        assert!(err < 1e-6, "{err}");
    }
}
