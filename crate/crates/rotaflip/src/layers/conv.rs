//! 2-D convolution (cross-correlation) with explicit backward passes.
//!
//! Weights are `(Cout, Cin, kh, kw)`; output spatial size is
//! `floor((H + pad_total - kh) / stride) + 1`. `Same` padding follows the
//! ceil-division convention: output size `ceil(H / stride)` with any odd
//! padding placed on the bottom/right.
//!
//! The kernels are written so the innermost loops are contiguous
//! multiply-adds over output rows (forward, input gradient) or contiguous
//! dot products (weight gradient); both autovectorize. Sample-level rayon
//! parallelism keeps reductions in a fixed order, so results are
//! bit-reproducible run to run.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    /// (pad_begin, pad_end) for one spatial axis.
    fn amounts(self, size: usize, k: usize, stride: usize) -> (usize, usize) {
        match self {
            Padding::Valid => (0, 0),
            Padding::Same => {
                let out = size.div_ceil(stride);
                let total = ((out - 1) * stride + k).saturating_sub(size);
                (total / 2, total - total / 2)
            }
        }
    }
}

pub(crate) fn conv_out_size(size: usize, k: usize, stride: usize, pad: (usize, usize)) -> usize {
    (size + pad.0 + pad.1 - k) / stride + 1
}

fn validate<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &[T],
    stride: usize,
) -> Result<()> {
    if stride == 0 {
        return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
    }
    let [_, cin_x, h, wd] = x.shape();
    let [cout, cin_w, kh, kw] = w.shape();
    if cin_x != cin_w {
        return Err(Error::ShapeMismatch {
            op: "conv2d channels",
            lhs: x.shape(),
            rhs: w.shape(),
        });
    }
    if bias.len() != cout {
        return Err(Error::InvalidArgument(format!(
            "bias length {} does not match {cout} output channels",
            bias.len()
        )));
    }
    if kh > h + 2 * kh || kw > wd + 2 * kw {
        // kernels larger than the padded input cannot produce output
        return Err(Error::InvalidArgument(format!(
            "kernel {kh}x{kw} larger than input {h}x{wd}"
        )));
    }
    Ok(())
}

/// Copies `x` into a zero-padded buffer of shape `(N, C, H+pt+pb, W+pl+pr)`.
fn pad_input<T: Scalar>(x: &Tensor<T>, ph: (usize, usize), pw: (usize, usize)) -> Tensor<T> {
    if ph == (0, 0) && pw == (0, 0) {
        return x.clone();
    }
    let [n, c, h, w] = x.shape();
    let (hp, wp) = (h + ph.0 + ph.1, w + pw.0 + pw.1);
    let mut out = Tensor::zeros([n, c, hp, wp]);
    for ni in 0..n {
        for ci in 0..c {
            let src = x.map_slice(ni, ci);
            let dst = out.map_slice_mut(ni, ci);
            for row in 0..h {
                let d = (row + ph.0) * wp + pw.0;
                dst[d..d + w].copy_from_slice(&src[row * w..(row + 1) * w]);
            }
        }
    }
    out
}

fn crop_to<T: Scalar>(padded: &Tensor<T>, shape: [usize; 4], ph: usize, pw: usize) -> Tensor<T> {
    if padded.shape() == shape {
        return padded.clone();
    }
    let [n, c, h, w] = shape;
    let wp = padded.width();
    let mut out = Tensor::zeros(shape);
    for ni in 0..n {
        for ci in 0..c {
            let src = padded.map_slice(ni, ci);
            let dst = out.map_slice_mut(ni, ci);
            for row in 0..h {
                let s = (row + ph) * wp + pw;
                dst[row * w..(row + 1) * w].copy_from_slice(&src[s..s + w]);
            }
        }
    }
    out
}

/// Forward cross-correlation with bias.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    validate(x, w, bias, stride)?;
    let [n, cin, h, wd] = x.shape();
    let [cout, _, kh, kw] = w.shape();
    let ph = padding.amounts(h, kh, stride);
    let pw = padding.amounts(wd, kw, stride);
    if h + ph.0 + ph.1 < kh || wd + pw.0 + pw.1 < kw {
        return Err(Error::InvalidArgument(format!(
            "kernel {kh}x{kw} larger than padded input"
        )));
    }
    let xp = pad_input(x, ph, pw);
    let (hp, wp) = (xp.height(), xp.width());
    let ho = conv_out_size(h, kh, stride, ph);
    let wo = conv_out_size(wd, kw, stride, pw);

    let mut y = Tensor::zeros([n, cout, ho, wo]);
    let out_stride = cout * ho * wo;
    let in_stride = cin * hp * wp;
    let xp_data = xp.data();
    let w_data = w.data();
    y.data_mut()
        .par_chunks_mut(out_stride)
        .enumerate()
        .for_each(|(ni, out_n)| {
            let x_n = &xp_data[ni * in_stride..(ni + 1) * in_stride];
            for co in 0..cout {
                let out_c = &mut out_n[co * ho * wo..(co + 1) * ho * wo];
                let b = bias[co];
                for v in out_c.iter_mut() {
                    *v = b;
                }
                for ci in 0..cin {
                    let x_c = &x_n[ci * hp * wp..(ci + 1) * hp * wp];
                    let w_c = &w_data[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let wv = w_c[ki * kw + kj];
                            for oh in 0..ho {
                                let row = &x_c[(oh * stride + ki) * wp + kj..];
                                let out_row = &mut out_c[oh * wo..(oh + 1) * wo];
                                if stride == 1 {
                                    for (o, &xv) in out_row.iter_mut().zip(row.iter()) {
                                        *o = *o + wv * xv;
                                    }
                                } else {
                                    for (ow, o) in out_row.iter_mut().enumerate() {
                                        *o = *o + wv * row[ow * stride];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    Ok(y)
}

pub struct ConvGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

/// Backward pass for input, weights, and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    padding: Padding,
    grad_y: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let [n, cin, h, wd] = x.shape();
    let [cout, _, kh, kw] = w.shape();
    let ph = padding.amounts(h, kh, stride);
    let pw = padding.amounts(wd, kw, stride);
    let xp = pad_input(x, ph, pw);
    let (hp, wp) = (xp.height(), xp.width());
    let ho = conv_out_size(h, kh, stride, ph);
    let wo = conv_out_size(wd, kw, stride, pw);
    if grad_y.shape() != [n, cout, ho, wo] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            lhs: grad_y.shape(),
            rhs: [n, cout, ho, wo],
        });
    }

    let gy = grad_y.data();
    let xp_data = xp.data();
    let w_data = w.data();
    let gy_stride = cout * ho * wo;
    let in_stride = cin * hp * wp;

    // Bias gradient: per output channel, summed over samples in index order.
    let mut grad_bias = vec![T::ZERO; cout];
    grad_bias.par_iter_mut().enumerate().for_each(|(co, gb)| {
        let mut acc = T::ZERO;
        for ni in 0..n {
            let g_c = &gy[ni * gy_stride + co * ho * wo..ni * gy_stride + (co + 1) * ho * wo];
            for &g in g_c {
                acc += g;
            }
        }
        *gb = acc;
    });

    // Weight gradient: each output channel independent, samples in order.
    let mut grad_w = Tensor::zeros(w.shape());
    grad_w
        .data_mut()
        .par_chunks_mut(cin * kh * kw)
        .enumerate()
        .for_each(|(co, gw_c)| {
            for ni in 0..n {
                let g_c = &gy[ni * gy_stride + co * ho * wo..ni * gy_stride + (co + 1) * ho * wo];
                let x_n = &xp_data[ni * in_stride..(ni + 1) * in_stride];
                for ci in 0..cin {
                    let x_c = &x_n[ci * hp * wp..(ci + 1) * hp * wp];
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let mut acc = T::ZERO;
                            for oh in 0..ho {
                                let g_row = &g_c[oh * wo..(oh + 1) * wo];
                                let x_row = &x_c[(oh * stride + ki) * wp + kj..];
                                if stride == 1 {
                                    // Two-lane accumulation: fixed order, and
                                    // wide enough for the vectorizer.
                                    let mut a0 = T::ZERO;
                                    let mut a1 = T::ZERO;
                                    let mut it = g_row.chunks_exact(2).zip(x_row.chunks_exact(2));
                                    for (g2, x2) in &mut it {
                                        a0 = a0 + g2[0] * x2[0];
                                        a1 = a1 + g2[1] * x2[1];
                                    }
                                    if wo % 2 == 1 {
                                        a0 = a0 + g_row[wo - 1] * x_row[wo - 1];
                                    }
                                    acc = acc + a0 + a1;
                                } else {
                                    for (ow, &g) in g_row.iter().enumerate() {
                                        acc = acc + g * x_row[ow * stride];
                                    }
                                }
                            }
                            gw_c[ci * kh * kw + ki * kw + kj] += acc;
                        }
                    }
                }
            }
        });

    // Input gradient, accumulated into the padded buffer then cropped.
    let mut gxp = Tensor::zeros(xp.shape());
    gxp.data_mut()
        .par_chunks_mut(in_stride)
        .enumerate()
        .for_each(|(ni, gx_n)| {
            for co in 0..cout {
                let g_c = &gy[ni * gy_stride + co * ho * wo..ni * gy_stride + (co + 1) * ho * wo];
                for ci in 0..cin {
                    let gx_c = &mut gx_n[ci * hp * wp..(ci + 1) * hp * wp];
                    let w_c = &w_data[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let wv = w_c[ki * kw + kj];
                            for oh in 0..ho {
                                let g_row = &g_c[oh * wo..(oh + 1) * wo];
                                let base = (oh * stride + ki) * wp + kj;
                                if stride == 1 {
                                    let gx_row = &mut gx_c[base..base + wo];
                                    for (gx, &g) in gx_row.iter_mut().zip(g_row.iter()) {
                                        *gx = *gx + wv * g;
                                    }
                                } else {
                                    for (ow, &g) in g_row.iter().enumerate() {
                                        gx_c[base + ow * stride] += wv * g;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    let grad_input = crop_to(&gxp, x.shape(), ph.0, pw.0);

    Ok(ConvGrads {
        input: grad_input,
        weights: grad_w,
        bias: grad_bias,
    })
}
