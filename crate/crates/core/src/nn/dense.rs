//! Fully-connected layer: pre-activation z_i = bias_i + Σ_j w[i][j]·x_j.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Weights (out_units × in_units, row-major) and per-unit biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub out_units: usize,
    pub in_units: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseParams {
    pub fn new(out_units: usize, in_units: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if out_units == 0 || in_units == 0 {
            return Err(Error::shape("dense dimensions must be >= 1"));
        }
        if weights.len() != out_units * in_units {
            return Err(Error::shape(format!(
                "weight length {} does not match {}x{}",
                weights.len(),
                out_units,
                in_units
            )));
        }
        if biases.len() != out_units {
            return Err(Error::shape(format!(
                "bias length {} does not match {} output units",
                biases.len(),
                out_units
            )));
        }
        Ok(DenseParams {
            out_units,
            in_units,
            weights,
            biases,
        })
    }

    /// Glorot-uniform initialized weights with zero biases.
    pub fn glorot(out_units: usize, in_units: usize, rng: &mut SplitMix64) -> Self {
        let limit = (6.0 / (in_units + out_units) as f64).sqrt();
        let weights = (0..out_units * in_units)
            .map(|_| rng.uniform(-limit, limit))
            .collect();
        DenseParams {
            out_units,
            in_units,
            weights,
            biases: vec![0.0; out_units],
        }
    }

    pub fn identity(units: usize) -> Self {
        let mut weights = vec![0.0; units * units];
        for i in 0..units {
            weights[i * units + i] = 1.0;
        }
        DenseParams {
            out_units: units,
            in_units: units,
            weights,
            biases: vec![0.0; units],
        }
    }
}

/// Gradients of a loss with respect to one dense layer's parameters.
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub fn dense_forward(input: &[f64], params: &DenseParams) -> Result<Vec<f64>> {
    if input.len() != params.in_units {
        return Err(Error::shape(format!(
            "dense expects {} inputs, got {}",
            params.in_units,
            input.len()
        )));
    }
    let mut out = Vec::with_capacity(params.out_units);
    for i in 0..params.out_units {
        let row = &params.weights[i * params.in_units..(i + 1) * params.in_units];
        let mut acc = params.biases[i];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        out.push(acc);
    }
    Ok(out)
}

pub(crate) fn dense_backward(
    input: &[f64],
    params: &DenseParams,
    dout: &[f64],
) -> (DenseGrads, Vec<f64>) {
    debug_assert_eq!(dout.len(), params.out_units);
    let mut dweights = vec![0.0; params.weights.len()];
    let mut dbiases = vec![0.0; params.out_units];
    let mut dinput = vec![0.0; params.in_units];
    for i in 0..params.out_units {
        let g = dout[i];
        dbiases[i] = g;
        let row = &params.weights[i * params.in_units..(i + 1) * params.in_units];
        let drow = &mut dweights[i * params.in_units..(i + 1) * params.in_units];
        for j in 0..params.in_units {
            drow[j] = g * input[j];
            dinput[j] += g * row[j];
        }
    }
    (
        DenseGrads {
            weights: dweights,
            biases: dbiases,
        },
        dinput,
    )
}
