//! Max pooling with recorded argmax switches for the backward pass.

use crate::error::{Error, Result};
use crate::nn::Volume;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
}

/// Pooling hyperparameters: window extent F, stride S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub extent: usize,
    pub stride: usize,
    pub kind: PoolKind,
}

impl PoolSpec {
    pub fn max(extent: usize, stride: usize) -> Self {
        PoolSpec {
            extent,
            stride,
            kind: PoolKind::Max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.extent == 0 || self.stride == 0 {
            return Err(Error::shape("pool extent and stride must be >= 1"));
        }
        Ok(())
    }

    /// Output spatial length for an input length: floor((in − F)/S) + 1.
    pub fn out_len(&self, in_len: usize) -> usize {
        (in_len - self.extent) / self.stride + 1
    }
}

/// Forward pass. Returns the pooled volume and one flat input index per
/// output cell recording where each maximum came from (ties resolved to
/// the first cell in row-major scan order).
pub fn pool_forward(input: &Volume, spec: &PoolSpec) -> Result<(Volume, Vec<usize>)> {
    spec.validate()?;
    let (c, h, w) = input.dims();
    if spec.extent > h || spec.extent > w {
        return Err(Error::shape(format!(
            "pool extent {} exceeds input spatial dims {}x{}",
            spec.extent, h, w
        )));
    }
    let (oh, ow) = (spec.out_len(h), spec.out_len(w));
    let mut out = Volume::zeros(c, oh, ow);
    let mut switches = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let y0 = oy * spec.stride;
                let x0 = ox * spec.stride;
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = input.idx(ch, y0, x0);
                for y in y0..y0 + spec.extent {
                    for x in x0..x0 + spec.extent {
                        let v = input.get(ch, y, x);
                        if v > best {
                            best = v;
                            best_idx = input.idx(ch, y, x);
                        }
                    }
                }
                out.set(ch, oy, ox, best);
                switches[(ch * oh + oy) * ow + ox] = best_idx;
            }
        }
    }
    Ok((out, switches))
}

/// Backward pass: routes each output gradient to the input cell its
/// maximum came from. Overlapping windows accumulate.
pub(crate) fn pool_backward(
    in_dims: (usize, usize, usize),
    switches: &[usize],
    dout: &Volume,
) -> Volume {
    let (c, h, w) = in_dims;
    let mut dinput = Volume::zeros(c, h, w);
    for (k, &src) in switches.iter().enumerate() {
        dinput.data_mut()[src] += dout.data()[k];
    }
    dinput
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_formula_32_to_16() {
        let input = Volume::zeros(3, 32, 32);
        let (out, _) = pool_forward(&input, &PoolSpec::max(2, 2)).unwrap();
        assert_eq!(out.dims(), (3, 16, 16));
    }

    #[test]
    fn max_of_single_window() {
        let input = Volume::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, switches) = pool_forward(&input, &PoolSpec::max(2, 2)).unwrap();
        assert_eq!(out.dims(), (1, 1, 1));
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(switches, vec![3]);
    }

    #[test]
    fn unit_pool_is_identity() {
        let input = Volume::new(1, 1, 1, vec![7.5]).unwrap();
        let (out, _) = pool_forward(&input, &PoolSpec::max(1, 1)).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn oversize_extent_is_shape_error() {
        let input = Volume::zeros(1, 2, 2);
        assert!(pool_forward(&input, &PoolSpec::max(3, 1)).is_err());
    }

    #[test]
    fn backward_routes_to_argmax() {
        let input = Volume::new(1, 2, 4, vec![1.0, 2.0, 8.0, 3.0, 5.0, 4.0, 6.0, 7.0]).unwrap();
        let (out, switches) = pool_forward(&input, &PoolSpec::max(2, 2)).unwrap();
        assert_eq!(out.data(), &[5.0, 8.0]);
        let dout = Volume::new(1, 1, 2, vec![0.5, -2.0]).unwrap();
        let dinput = pool_backward((1, 2, 4), &switches, &dout);
        assert_eq!(
            dinput.data(),
            &[0.0, 0.0, -2.0, 0.0, 0.5, 0.0, 0.0, 0.0]
        );
    }
}
