//! Elementwise ReLU over vectors and volumes.

use crate::nn::Volume;

pub fn relu(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&x| x.max(0.0)).collect()
}

pub fn relu_volume(input: &Volume) -> Volume {
    let (c, h, w) = input.dims();
    Volume::new(c, h, w, relu(input.data())).expect("shape preserved")
}

/// d/dx max(0, x) · dout, taking the derivative at 0 to be 0.
pub(crate) fn relu_backward(input: &[f64], dout: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(dout)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}
