//! Shared oracles for unit tests.

use rand::Rng;

use super::gradcheck::{finite_difference, max_relative_error, FD_STEP};
use super::scalar::Scalar;
use super::tensor::Tensor;

pub fn random_tensor<T: Scalar>(rng: &mut impl Rng, shape: [usize; 4]) -> Tensor<T> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect()).unwrap()
}

/// Six nested loops, no lowering.
pub fn naive_conv2d(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, pad: usize, stride: usize) -> Tensor<f64> {
    let [n, cin, h, w] = x.shape();
    let [cout, _, kh, kw] = k.shape();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros([n, cout, oh, ow]);
    for i in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[co];
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x.data()[((i * cin + ci) * h + iy as usize) * w + ix as usize]
                                    * k.data()[((co * cin + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out.data_mut()[((i * cout + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// Max relative error of `analytic` against central differences of `f`.
pub fn fd_check<F: FnMut(&Tensor<f64>) -> f64>(x: &Tensor<f64>, analytic: &Tensor<f64>, f: F) -> f64 {
    max_relative_error(analytic, &finite_difference(x, f, FD_STEP))
}
