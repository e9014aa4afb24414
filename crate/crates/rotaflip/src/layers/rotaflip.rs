//! The rotaflip layer: training-time random dihedral transforms of feature
//! maps.
//!
//! During training each (sample, channel) feature map is independently
//! replaced, with probability `rate`, by a uniformly drawn D4 transform of
//! itself. At inference the layer is the exact identity. The forward pass
//! returns the drawn [`TransformMask`]; the backward pass applies each
//! selected slot's inverse transform, which is the adjoint of a permutation.

use crate::d4::{self, D4Code};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::rng::RngStream;
use crate::tensor::{Scalar, Tensor};

/// Configuration of one rotaflip layer. `rate` is the only tuned
/// hyperparameter. `per_channel_shared` draws one decision per channel and
/// applies it to every sample in the batch; `include_identity` controls
/// whether the identity is part of the sampled set (the default eight-element
/// group) or excluded (seven codes).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotaflipSpec {
    pub rate: f64,
    pub per_channel_shared: bool,
    pub include_identity: bool,
}

impl RotaflipSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "rotaflip rate {rate} outside [0, 1]"
            )));
        }
        Ok(RotaflipSpec {
            rate,
            per_channel_shared: false,
            include_identity: true,
        })
    }

    pub fn with_per_channel_shared(mut self, shared: bool) -> Self {
        self.per_channel_shared = shared;
        self
    }

    pub fn with_include_identity(mut self, include: bool) -> Self {
        self.include_identity = include;
        self
    }
}

/// Record of the transforms applied by one forward pass: one optional code
/// per (sample, channel) slot. A `None` slot passed through unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformMask {
    batch: usize,
    channels: usize,
    codes: Vec<Option<D4Code>>,
}

impl TransformMask {
    pub fn empty(batch: usize, channels: usize) -> Self {
        TransformMask {
            batch,
            channels,
            codes: vec![None; batch * channels],
        }
    }

    pub fn from_codes(batch: usize, channels: usize, codes: Vec<Option<D4Code>>) -> Result<Self> {
        if codes.len() != batch * channels {
            return Err(Error::InvalidArgument(format!(
                "mask has {} slots for {batch}x{channels}",
                codes.len()
            )));
        }
        Ok(TransformMask { batch, channels, codes })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, n: usize, c: usize) -> Option<D4Code> {
        self.codes[n * self.channels + c]
    }

    pub fn selected_count(&self) -> usize {
        self.codes.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.iter().all(|c| c.is_none())
    }

    pub fn codes(&self) -> &[Option<D4Code>] {
        &self.codes
    }

    /// Mask with every slot's inverse code; composing a forward pass with a
    /// forward pass under the inverted mask restores the input exactly.
    pub fn inverted(&self) -> TransformMask {
        TransformMask {
            batch: self.batch,
            channels: self.channels,
            codes: self.codes.iter().map(|c| c.map(d4::invert)).collect(),
        }
    }
}

fn draw_mask(
    batch: usize,
    channels: usize,
    spec: &RotaflipSpec,
    stream: &mut RngStream,
) -> TransformMask {
    let sample = |s: &mut RngStream| {
        if spec.include_identity {
            d4::sample_code(s)
        } else {
            d4::sample_code_excluding_identity(s)
        }
    };
    let mut codes = vec![None; batch * channels];
    if spec.per_channel_shared {
        // One decision per channel, shared by the whole batch.
        for c in 0..channels {
            if stream.next_f64() < spec.rate {
                let code = sample(stream);
                for n in 0..batch {
                    codes[n * channels + c] = Some(code);
                }
            }
        }
    } else {
        // Independent Bernoulli(rate) per slot, row-major (n outer, c inner).
        for slot in codes.iter_mut() {
            if stream.next_f64() < spec.rate {
                *slot = Some(sample(stream));
            }
        }
    }
    TransformMask { batch, channels, codes }
}

/// Applies a frozen mask; the deterministic core shared by the sampled
/// forward pass, the backward pass, and gradient checking.
pub fn rotaflip_apply_mask<T: Scalar>(x: &Tensor<T>, mask: &TransformMask) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.shape();
    if mask.batch != n || mask.channels != c {
        return Err(Error::ShapeMismatch {
            op: "rotaflip_apply_mask",
            lhs: x.shape(),
            rhs: [mask.batch, mask.channels, 0, 0],
        });
    }
    let mut y = x.clone();
    for ni in 0..n {
        for ci in 0..c {
            if let Some(code) = mask.get(ni, ci) {
                if code != D4Code::Identity {
                    let src = x.map_slice(ni, ci);
                    d4::apply_into(src, h, w, code, y.map_slice_mut(ni, ci))?;
                }
            }
        }
    }
    Ok(y)
}

/// Forward pass. Training draws a fresh mask from `stream`; inference is the
/// exact identity and returns an empty mask. Requires square feature maps.
pub fn rotaflip_forward<T: Scalar>(
    x: &Tensor<T>,
    spec: &RotaflipSpec,
    mode: Mode,
    stream: &mut RngStream,
) -> Result<(Tensor<T>, TransformMask)> {
    let [n, c, h, w] = x.shape();
    if h != w {
        return Err(Error::NonSquare { height: h, width: w });
    }
    match mode {
        Mode::Infer => Ok((x.clone(), TransformMask::empty(n, c))),
        Mode::Train => {
            let mask = draw_mask(n, c, spec, stream);
            let y = rotaflip_apply_mask(x, &mask)?;
            Ok((y, mask))
        }
    }
}

/// Backward pass: each selected slot receives its gradient transformed by
/// the inverse code; untouched slots pass through unchanged.
pub fn rotaflip_backward<T: Scalar>(grad_y: &Tensor<T>, mask: &TransformMask) -> Result<Tensor<T>> {
    rotaflip_apply_mask(grad_y, &mask.inverted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor<f64> {
        let mut s = RngStream::new(seed);
        let data = s.uniform(shape.iter().product());
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn rate_zero_is_identity() {
        let x = random_tensor([2, 3, 4, 4], 1);
        let spec = RotaflipSpec::new(0.0).unwrap();
        let mut s = RngStream::new(2);
        let (y, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_empty());
    }

    #[test]
    fn infer_mode_is_identity_at_every_rate() {
        let x = random_tensor([2, 3, 4, 4], 3);
        for rate in [0.0, 0.1, 0.5, 1.0] {
            let spec = RotaflipSpec::new(rate).unwrap();
            let mut s = RngStream::new(4);
            let (y, mask) = rotaflip_forward(&x, &spec, Mode::Infer, &mut s).unwrap();
            assert_eq!(y, x, "rate {rate}");
            assert!(mask.is_empty());
        }
    }

    #[test]
    fn rate_one_on_symmetric_input_is_identity() {
        // Every slice constant => every D4 transform fixes it.
        let mut x = Tensor::<f64>::zeros([2, 3, 4, 4]);
        for n in 0..2 {
            for c in 0..3 {
                let v = (n * 3 + c) as f64;
                for e in x.map_slice_mut(n, c) {
                    *e = v;
                }
            }
        }
        let spec = RotaflipSpec::new(1.0).unwrap();
        let mut s = RngStream::new(5);
        let (y, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask.selected_count(), 6);
    }

    #[test]
    fn selected_slices_are_permutations_of_their_inputs() {
        let x = random_tensor([4, 5, 6, 6], 6);
        let spec = RotaflipSpec::new(0.7).unwrap();
        let mut s = RngStream::new(7);
        let (y, _) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        for n in 0..4 {
            for c in 0..5 {
                let mut a = x.map_slice(n, c).to_vec();
                let mut b = y.map_slice(n, c).to_vec();
                a.sort_by(|p, q| p.partial_cmp(q).unwrap());
                b.sort_by(|p, q| p.partial_cmp(q).unwrap());
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn rectangular_maps_are_rejected() {
        let x = Tensor::<f64>::zeros([1, 1, 4, 6]);
        let spec = RotaflipSpec::new(0.1).unwrap();
        let mut s = RngStream::new(8);
        assert!(rotaflip_forward(&x, &spec, Mode::Train, &mut s).is_err());
    }

    #[test]
    fn rate_outside_unit_interval_is_rejected() {
        assert!(RotaflipSpec::new(-0.1).is_err());
        assert!(RotaflipSpec::new(1.5).is_err());
    }

    #[test]
    fn backward_with_empty_mask_passes_through() {
        let g = random_tensor([2, 2, 3, 3], 9);
        let mask = TransformMask::empty(2, 2);
        assert_eq!(rotaflip_backward(&g, &mask).unwrap(), g);
    }

    #[test]
    fn backward_applies_inverse_code() {
        let g = random_tensor([1, 1, 3, 3], 10);
        let mask =
            TransformMask::from_codes(1, 1, vec![Some(D4Code::Rot90)]).unwrap();
        let got = rotaflip_backward(&g, &mask).unwrap();
        let expected = crate::d4::apply(g.map_slice(0, 0), 3, 3, D4Code::Rot270).unwrap();
        assert_eq!(got.map_slice(0, 0), &expected[..]);
    }

    #[test]
    fn forward_then_inverse_mask_restores_input() {
        let x = random_tensor([3, 4, 5, 5], 11);
        let spec = RotaflipSpec::new(0.8).unwrap();
        let mut s = RngStream::new(12);
        let (y, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        let back = rotaflip_apply_mask(&y, &mask.inverted()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn frozen_mask_application_is_linear() {
        let x = random_tensor([2, 3, 4, 4], 13);
        let z = random_tensor([2, 3, 4, 4], 14);
        let spec = RotaflipSpec::new(0.5).unwrap();
        let mut s = RngStream::new(15);
        let (_, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        let (a, b) = (2.5, -1.25);
        let combo = x.scale(a).add(&z.scale(b)).unwrap();
        let lhs = rotaflip_apply_mask(&combo, &mask).unwrap();
        let rhs = rotaflip_apply_mask(&x, &mask)
            .unwrap()
            .scale(a)
            .add(&rotaflip_apply_mask(&z, &mask).unwrap().scale(b))
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn selection_count_meets_binomial_bound() {
        // rate 0.1 over 10_000 slots: 1000 +/- 3*sqrt(10000*0.1*0.9) = 1000 +/- 90.
        let x = Tensor::<f64>::zeros([100, 100, 8, 8]);
        let spec = RotaflipSpec::new(0.1).unwrap();
        let mut s = RngStream::new(16);
        let (_, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        let count = mask.selected_count() as f64;
        assert!(
            (count - 1000.0).abs() <= 90.0,
            "selected {count} outside 1000 +/- 90"
        );
    }

    #[test]
    fn per_channel_shared_mode_shares_codes_across_batch() {
        let x = random_tensor([6, 10, 4, 4], 17);
        let spec = RotaflipSpec::new(0.5).unwrap().with_per_channel_shared(true);
        let mut s = RngStream::new(18);
        let (_, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        for c in 0..10 {
            let first = mask.get(0, c);
            for n in 1..6 {
                assert_eq!(mask.get(n, c), first, "channel {c} differs at sample {n}");
            }
        }
        assert!(!mask.is_empty());
    }

    #[test]
    fn excluding_identity_never_selects_identity_codes() {
        let x = Tensor::<f64>::zeros([10, 10, 2, 2]);
        let spec = RotaflipSpec::new(1.0).unwrap().with_include_identity(false);
        let mut s = RngStream::new(19);
        let (_, mask) = rotaflip_forward(&x, &spec, Mode::Train, &mut s).unwrap();
        assert_eq!(mask.selected_count(), 100);
        for code in mask.codes().iter().flatten() {
            assert_ne!(*code, D4Code::Identity);
        }
    }
}
