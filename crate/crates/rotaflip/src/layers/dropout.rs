//! Inverted-scaling dropout.
//!
//! Training zeroes each activation independently with probability `rate`
//! and scales survivors by `1/(1-rate)`, so inference is the exact identity
//! with no rescale. The keep mask already carries the scale factor; backward
//! is a plain elementwise multiply by it.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::rng::RngStream;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
}

impl DropoutSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        Ok(DropoutSpec { rate })
    }
}

/// Forward pass. Returns the scaled keep mask (empty tensor in infer mode,
/// where the output is the input bit for bit).
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    spec: &DropoutSpec,
    mode: Mode,
    stream: &mut RngStream,
) -> Result<(Tensor<T>, Tensor<T>)> {
    match mode {
        Mode::Infer => Ok((x.clone(), Tensor::zeros([0, 0, 0, 0]))),
        Mode::Train => {
            let scale = T::from_f64(1.0 / (1.0 - spec.rate));
            let mut mask = Tensor::filled(x.shape(), scale);
            for v in mask.data_mut() {
                if stream.next_f64() < spec.rate {
                    *v = T::ZERO;
                }
            }
            let y = x.mul(&mask)?;
            Ok((y, mask))
        }
    }
}

pub fn dropout_backward<T: Scalar>(grad_y: &Tensor<T>, mask: &Tensor<T>) -> Result<Tensor<T>> {
    grad_y.mul(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor<f64> {
        let mut s = RngStream::new(seed);
        let data = s.uniform(shape.iter().product());
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn rate_zero_keeps_everything() {
        let x = random_tensor([2, 2, 3, 3], 1);
        let spec = DropoutSpec::new(0.0).unwrap();
        let mut s = RngStream::new(2);
        let (y, _) = dropout_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn infer_mode_is_exact_identity_at_every_rate() {
        let x = random_tensor([2, 2, 3, 3], 3);
        for rate in [0.0, 0.3, 0.9] {
            let spec = DropoutSpec::new(rate).unwrap();
            let mut s = RngStream::new(4);
            let (y, _) = dropout_forward(&x, &spec, Mode::Infer, &mut s).unwrap();
            assert_eq!(y, x, "rate {rate}");
        }
    }

    #[test]
    fn rate_one_is_rejected() {
        assert!(DropoutSpec::new(1.0).is_err());
        assert!(DropoutSpec::new(-0.2).is_err());
    }

    #[test]
    fn inverted_scaling_preserves_the_mean() {
        // Monte Carlo: mean(y) estimates mean(x); per-element variance of
        // the scaled Bernoulli estimator is x_i^2 * rate/(1-rate).
        let x = Tensor::<f64>::filled([10, 10, 10, 10], 1.0);
        let rate = 0.4;
        let spec = DropoutSpec::new(rate).unwrap();
        let mut s = RngStream::new(5);
        let (y, _) = dropout_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        let n = x.len() as f64;
        let mean = y.sum_all() / n;
        let sigma = (rate / (1.0 - rate) / n).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * sigma,
            "mean {mean} outside 1 +/- {:.4}",
            3.0 * sigma
        );
    }

    #[test]
    fn backward_multiplies_by_the_same_mask() {
        let x = random_tensor([2, 2, 4, 4], 6);
        let g = random_tensor([2, 2, 4, 4], 7);
        let spec = DropoutSpec::new(0.5).unwrap();
        let mut s = RngStream::new(8);
        let (_, mask) = dropout_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        let gx = dropout_backward(&g, &mask).unwrap();
        for i in 0..g.len() {
            assert_eq!(gx.data()[i], g.data()[i] * mask.data()[i]);
        }
    }
}
