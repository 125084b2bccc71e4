//! 2-D convolution (cross-correlation) and 2x2 stride-2 transposed
//! convolution, both lowered to GEMM.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Gradients of a convolution-like layer.
#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    /// `None` when the caller asked not to propagate into the input.
    pub input: Option<Tensor<T>>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvGeometry {
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    stride: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeometry {
    fn new(input: [usize; 4], kernel: [usize; 4], bias_len: usize, pad: usize, stride: usize) -> Result<Self> {
        let [_, cin, h, w] = input;
        let [cout, kcin, kh, kw] = kernel;
        if kcin != cin {
            return Err(Error::Shape(format!(
                "kernel expects {kcin} input channels, got {cin}"
            )));
        }
        if bias_len != cout {
            return Err(Error::Shape(format!("{bias_len} biases for {cout} filters")));
        }
        if stride == 0 {
            return Err(Error::Shape("stride must be at least 1".into()));
        }
        let span = |size: usize, k: usize| -> Result<usize> {
            let padded = size + 2 * pad;
            if k == 0 || padded < k || (padded - k) % stride != 0 {
                return Err(Error::Shape(format!(
                    "size {size} with pad {pad}, kernel {k}, stride {stride} gives a non-integer output"
                )));
            }
            Ok((padded - k) / stride + 1)
        };
        Ok(Self {
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            pad,
            stride,
            oh: span(h, kh)?,
            ow: span(w, kw)?,
        })
    }

    fn patch_len(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.oh * self.ow
    }

    /// Input coordinate for output `o` and kernel tap `k`, if not padding.
    #[inline]
    fn source(&self, o: usize, k: usize, size: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < size).then_some(pos as usize)
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let plane = self.out_plane();
        for c in 0..self.cin {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * plane..(row + 1) * plane];
                    for oy in 0..self.oh {
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        match self.source(oy, ki, self.h) {
                            None => line.fill(T::zero()),
                            Some(iy) => {
                                let src = &x[(c * self.h + iy) * self.w..(c * self.h + iy + 1) * self.w];
                                for (ox, v) in line.iter_mut().enumerate() {
                                    *v = match self.source(ox, kj, self.w) {
                                        Some(ix) => src[ix],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let plane = self.out_plane();
        for c in 0..self.cin {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * plane..(row + 1) * plane];
                    for oy in 0..self.oh {
                        let Some(iy) = self.source(oy, ki, self.h) else {
                            continue;
                        };
                        let dst = &mut dx[(c * self.h + iy) * self.w..(c * self.h + iy + 1) * self.w];
                        for ox in 0..self.ow {
                            if let Some(ix) = self.source(ox, kj, self.w) {
                                dst[ix] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.pad == 0 && self.stride == 1
    }
}

/// Cross-correlation of `input (n, cin, h, w)` with `kernel (cout, cin, kh,
/// kw)` plus per-filter `bias` (any shape holding `cout` values).
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    pad: usize,
    stride: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::new(input.shape(), kernel.shape(), bias.len(), pad, stride)?;
    let n = input.n();
    let plane = g.out_plane();
    let mut out = Tensor::zeros([n, g.cout, g.oh, g.ow]);
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); g.patch_len() * plane]
    };
    for i in 0..n {
        let y = out.sample_mut(i);
        for (co, b) in bias.data().iter().enumerate() {
            y[co * plane..(co + 1) * plane].fill(*b);
        }
        let x = input.sample(i);
        let cols_ref: &[T] = if g.is_pointwise() {
            x
        } else {
            g.im2col(x, &mut cols);
            &cols
        };
        T::gemm(
            g.cout,
            g.patch_len(),
            plane,
            T::one(),
            kernel.data(),
            (g.patch_len(), 1),
            cols_ref,
            (plane, 1),
            T::one(),
            y,
            (plane, 1),
        );
    }
    Ok(out)
}

/// Backward pass of [`conv2d`] given the gradient of the output.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    pad: usize,
    stride: usize,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<LayerGrads<T>> {
    let g = ConvGeometry::new(input.shape(), kernel.shape(), kernel.shape()[0], pad, stride)?;
    let n = input.n();
    if grad_out.shape() != [n, g.cout, g.oh, g.ow] {
        return Err(Error::Shape(format!(
            "output gradient {:?}, expected {:?}",
            grad_out.shape(),
            [n, g.cout, g.oh, g.ow]
        )));
    }
    let plane = g.out_plane();
    let patch = g.patch_len();
    let mut dk = Tensor::zeros(kernel.shape());
    let mut db = Tensor::zeros([1, g.cout, 1, 1]);
    let mut dx = need_input.then(|| Tensor::zeros(input.shape()));
    let mut cols = vec![T::zero(); patch * plane];
    let mut dcols = vec![T::zero(); patch * plane];
    for i in 0..n {
        let dy = grad_out.sample(i);
        for (co, b) in db.data_mut().iter_mut().enumerate() {
            *b += dy[co * plane..(co + 1) * plane].iter().copied().sum::<T>();
        }
        let x = input.sample(i);
        let cols_ref: &[T] = if g.is_pointwise() {
            x
        } else {
            g.im2col(x, &mut cols);
            &cols
        };
        // dK += dY * cols^T
        T::gemm(
            g.cout,
            plane,
            patch,
            T::one(),
            dy,
            (plane, 1),
            cols_ref,
            (1, plane),
            T::one(),
            dk.data_mut(),
            (patch, 1),
        );
        if let Some(dx) = dx.as_mut() {
            let dxi = dx.sample_mut(i);
            if g.is_pointwise() {
                T::gemm(patch, g.cout, plane, T::one(), kernel.data(), (1, patch), dy, (plane, 1), T::one(), dxi, (plane, 1));
            } else {
                // dcols = K^T * dY
                T::gemm(
                    patch,
                    g.cout,
                    plane,
                    T::one(),
                    kernel.data(),
                    (1, patch),
                    dy,
                    (plane, 1),
                    T::zero(),
                    &mut dcols,
                    (plane, 1),
                );
                g.col2im(&dcols, dxi);
            }
        }
    }
    Ok(LayerGrads {
        input: dx,
        kernel: dk,
        bias: db,
    })
}

fn upconv_dims<T: Scalar>(input: &Tensor<T>, kernel: &Tensor<T>, bias_len: usize) -> Result<(usize, usize)> {
    let [kcin, cout, kh, kw] = kernel.shape();
    if (kh, kw) != (2, 2) {
        return Err(Error::Shape(format!("up-convolution kernel must be 2x2, got {kh}x{kw}")));
    }
    if kcin != input.c() {
        return Err(Error::Shape(format!(
            "up-convolution kernel expects {kcin} channels, got {}",
            input.c()
        )));
    }
    if bias_len != cout {
        return Err(Error::Shape(format!("{bias_len} biases for {cout} filters")));
    }
    Ok((kcin, cout))
}

/// Transposed 2x2 stride-2 convolution: `input (n, cin, h, w)` with
/// `kernel (cin, cout, 2, 2)` gives `(n, cout, 2h, 2w)`.
pub fn upconv2<T: Scalar>(input: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (cin, cout) = upconv_dims(input, kernel, bias.len())?;
    let [n, _, h, w] = input.shape();
    let hw = h * w;
    let taps = cout * 4;
    let mut out = Tensor::zeros([n, cout, 2 * h, 2 * w]);
    let mut y = vec![T::zero(); taps * hw];
    for i in 0..n {
        // Y[(co,a,b), p] = sum_ci K[ci, (co,a,b)] X[ci, p]
        T::gemm(taps, cin, hw, T::one(), kernel.data(), (1, taps), input.sample(i), (hw, 1), T::zero(), &mut y, (hw, 1));
        let o = out.sample_mut(i);
        for co in 0..cout {
            let b = bias.data()[co];
            for a in 0..2 {
                for bb in 0..2 {
                    let src = &y[(co * 4 + a * 2 + bb) * hw..(co * 4 + a * 2 + bb + 1) * hw];
                    for r in 0..h {
                        let dst_row = (co * 2 * h + 2 * r + a) * 2 * w;
                        for c in 0..w {
                            o[dst_row + 2 * c + bb] = src[r * w + c] + b;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`upconv2`].
pub fn upconv2_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<LayerGrads<T>> {
    let (cin, cout) = upconv_dims(input, kernel, kernel.shape()[1])?;
    let [n, _, h, w] = input.shape();
    if grad_out.shape() != [n, cout, 2 * h, 2 * w] {
        return Err(Error::Shape(format!(
            "output gradient {:?}, expected {:?}",
            grad_out.shape(),
            [n, cout, 2 * h, 2 * w]
        )));
    }
    let hw = h * w;
    let taps = cout * 4;
    let mut dk = Tensor::zeros(kernel.shape());
    let mut db = Tensor::zeros([1, cout, 1, 1]);
    let mut dx = need_input.then(|| Tensor::zeros(input.shape()));
    let mut dy = vec![T::zero(); taps * hw];
    for i in 0..n {
        let g = grad_out.sample(i);
        for co in 0..cout {
            let mut acc = T::zero();
            for a in 0..2 {
                for bb in 0..2 {
                    let dst = &mut dy[(co * 4 + a * 2 + bb) * hw..(co * 4 + a * 2 + bb + 1) * hw];
                    for r in 0..h {
                        let src_row = (co * 2 * h + 2 * r + a) * 2 * w;
                        for c in 0..w {
                            let v = g[src_row + 2 * c + bb];
                            dst[r * w + c] = v;
                            acc += v;
                        }
                    }
                }
            }
            db.data_mut()[co] += acc;
        }
        // dK[ci, q] += sum_p X[ci, p] dY[q, p]
        T::gemm(cin, hw, taps, T::one(), input.sample(i), (hw, 1), &dy, (1, hw), T::one(), dk.data_mut(), (taps, 1));
        if let Some(dx) = dx.as_mut() {
            // dX[ci, p] = sum_q K[ci, q] dY[q, p]
            T::gemm(cin, taps, hw, T::one(), kernel.data(), (taps, 1), &dy, (hw, 1), T::zero(), dx.sample_mut(i), (hw, 1));
        }
    }
    Ok(LayerGrads {
        input: dx,
        kernel: dk,
        bias: db,
    })
}
