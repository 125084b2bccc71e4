use alloc::format;
use alloc::vec::Vec;

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Parametric ReLU with one slope per channel: `x` if `x > 0`, else
/// `slope[c] * x`.
pub fn prelu<T: Scalar>(input: &Tensor<T>, slope: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.shape();
    if slope.len() != c {
        return Err(Error::Shape(format!("{} slopes for {c} channels", slope.len())));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(input.len());
    for i in 0..n {
        let x = input.sample(i);
        for (ch, &a) in slope.data().iter().enumerate() {
            out.extend(
                x[ch * plane..(ch + 1) * plane]
                    .iter()
                    .map(|&v| if v > T::zero() { v } else { a * v }),
            );
        }
    }
    Tensor::from_vec([n, c, h, w], out)
}

/// Gradients of [`prelu`] with respect to its input and slopes.
///
/// At exactly `x == 0` the slope branch is used; the point is excluded from
/// finite-difference checks.
pub fn prelu_backward<T: Scalar>(
    input: &Tensor<T>,
    slope: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    input.same_shape(grad_out)?;
    let [n, c, h, w] = input.shape();
    if slope.len() != c {
        return Err(Error::Shape(format!("{} slopes for {c} channels", slope.len())));
    }
    let plane = h * w;
    let mut dx = Vec::with_capacity(input.len());
    let mut da = Tensor::zeros(slope.shape());
    for i in 0..n {
        let x = input.sample(i);
        let g = grad_out.sample(i);
        for (ch, &a) in slope.data().iter().enumerate() {
            let mut acc = T::zero();
            for (&v, &gv) in x[ch * plane..(ch + 1) * plane].iter().zip(&g[ch * plane..(ch + 1) * plane]) {
                if v > T::zero() {
                    dx.push(gv);
                } else {
                    dx.push(a * gv);
                    acc += gv * v;
                }
            }
            da.data_mut()[ch] += acc;
        }
    }
    Ok((Tensor::from_vec([n, c, h, w], dx)?, da))
}

#[inline]
pub fn sigmoid_scalar<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp_libm())
    } else {
        let e = z.exp_libm();
        e / (T::one() + e)
    }
}

/// Elementwise logistic function; output lies in (0, 1) up to rounding.
pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let data = input.data().iter().map(|&z| sigmoid_scalar(z)).collect();
    Tensor::from_vec(input.shape(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{fd_check, random_tensor};
    use crate::rng::seeded;
    use alloc::vec;

    #[test]
    fn positive_input_is_identity_and_zero_slope_is_relu() {
        let x = Tensor::from_vec([1, 2, 1, 2], vec![1.0f32, 2.0, -3.0, 4.0]).unwrap();
        let a = Tensor::from_vec([1, 2, 1, 1], vec![0.25, 0.0]).unwrap();
        assert_eq!(prelu(&x, &a).unwrap().data(), &[1.0, 2.0, 0.0, 4.0]);
        let a = Tensor::from_vec([1, 2, 1, 1], vec![0.25, 0.5]).unwrap();
        assert_eq!(prelu(&x, &a).unwrap().data(), &[1.0, 2.0, -1.5, 4.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeded(11);
        let x = random_tensor::<f64>(&mut rng, [2, 3, 4, 4]);
        let a = random_tensor::<f64>(&mut rng, [1, 3, 1, 1]);
        let probe = random_tensor::<f64>(&mut rng, x.shape());
        let (dx, da) = prelu_backward(&x, &a, &probe).unwrap();
        assert!(fd_check(&x, &dx, |t| prelu(t, &a).unwrap().dot(&probe).unwrap()) < 1e-6);
        assert!(fd_check(&a, &da, |t| prelu(&x, t).unwrap().dot(&probe).unwrap()) < 1e-6);
    }

    #[test]
    fn sigmoid_is_bounded_and_stable() {
        let x = Tensor::from_vec([1, 1, 1, 4], vec![-1000.0f64, -1.0, 0.0, 1000.0]).unwrap();
        let s = sigmoid(&x);
        assert_eq!(s.data()[2], 0.5);
        assert!(s.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        assert!((s.data()[1] - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-15);
    }
}
