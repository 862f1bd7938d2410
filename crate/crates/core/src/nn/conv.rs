//! Convolution layer: cross-correlation with zero padding that preserves
//! spatial size ("same" convolution). Filters use the odd (2h+1)-wide
//! parameterization, so a filter reaches h rows/columns either side of
//! the output position.

use crate::error::{Error, Result};
use crate::nn::Volume;
use crate::rng::SplitMix64;

/// Filter bank and biases for one convolution layer.
///
/// `filters` is flat, indexed `[out][in][u][v]` with spatial extent
/// (2·half_height+1) × (2·half_width+1); `biases` has one entry per
/// output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub half_height: usize,
    pub half_width: usize,
    pub filters: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvParams {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        half_height: usize,
        half_width: usize,
        filters: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::shape("conv channel counts must be >= 1"));
        }
        let per_filter = (2 * half_height + 1) * (2 * half_width + 1);
        if filters.len() != out_channels * in_channels * per_filter {
            return Err(Error::shape(format!(
                "filter bank length {} does not match {}x{}x{}x{}",
                filters.len(),
                out_channels,
                in_channels,
                2 * half_height + 1,
                2 * half_width + 1
            )));
        }
        if biases.len() != out_channels {
            return Err(Error::shape(format!(
                "bias length {} does not match {} output channels",
                biases.len(),
                out_channels
            )));
        }
        Ok(ConvParams {
            out_channels,
            in_channels,
            half_height,
            half_width,
            filters,
            biases,
        })
    }

    /// Glorot-uniform initialized filter bank with zero biases.
    pub fn glorot(
        out_channels: usize,
        in_channels: usize,
        half_height: usize,
        half_width: usize,
        rng: &mut SplitMix64,
    ) -> Self {
        let per_filter = (2 * half_height + 1) * (2 * half_width + 1);
        let fan_in = (in_channels * per_filter) as f64;
        let fan_out = (out_channels * per_filter) as f64;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        let filters = (0..out_channels * in_channels * per_filter)
            .map(|_| rng.uniform(-limit, limit))
            .collect();
        ConvParams {
            out_channels,
            in_channels,
            half_height,
            half_width,
            filters,
            biases: vec![0.0; out_channels],
        }
    }

    pub fn filter_height(&self) -> usize {
        2 * self.half_height + 1
    }

    pub fn filter_width(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    fn fidx(&self, out: usize, inp: usize, u: usize, v: usize) -> usize {
        ((out * self.in_channels + inp) * self.filter_height() + u) * self.filter_width() + v
    }
}

/// Gradients of a loss with respect to one conv layer's parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub filters: Vec<f64>,
    pub biases: Vec<f64>,
}

/// The (y, x) rectangle over which output position + (du, dv) stays in
/// frame: y in [max(0,−du), min(h, h−du)), x analogous.
#[inline]
fn valid_span(len: usize, offset: isize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).min(len as isize).max(0) as usize;
    (lo, hi)
}

/// Forward pass. Output channel i at (y, x) is
/// `bias_i + Σ_j Σ_{u,v} input[j][y+u][x+v] · filter[i][j][u+h1][v+h2]`
/// with out-of-frame input treated as zero, so spatial size is preserved.
///
/// The loops accumulate one shifted filter tap at a time over the valid
/// rectangle, keeping the hot inner loop contiguous in x.
pub fn conv_forward(input: &Volume, params: &ConvParams) -> Result<Volume> {
    if input.channels() != params.in_channels {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {}",
            params.in_channels,
            input.channels()
        )));
    }
    if !input.all_finite() {
        return Err(Error::numeric("conv input contains non-finite values"));
    }
    let (_, h, w) = input.dims();
    let (h1, h2) = (params.half_height as isize, params.half_width as isize);
    let mut out = Volume::zeros(params.out_channels, h, w);

    for i in 0..params.out_channels {
        let plane = &mut out.data_mut()[i * h * w..(i + 1) * h * w];
        plane.fill(params.biases[i]);
        for j in 0..params.in_channels {
            let in_plane = &input.data()[j * h * w..(j + 1) * h * w];
            for du in -h1..=h1 {
                let (y_lo, y_hi) = valid_span(h, du);
                for dv in -h2..=h2 {
                    let f = params.filters
                        [params.fidx(i, j, (du + h1) as usize, (dv + h2) as usize)];
                    let (x_lo, x_hi) = valid_span(w, dv);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in y_lo..y_hi {
                        let sy = (y as isize + du) as usize;
                        let src = &in_plane[sy * w + (x_lo as isize + dv) as usize..];
                        let dst = &mut plane[y * w + x_lo..y * w + x_hi];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += f * s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass: gradients for the filter bank, the biases, and the input.
pub(crate) fn conv_backward(
    input: &Volume,
    params: &ConvParams,
    dout: &Volume,
) -> (ConvGrads, Volume) {
    let (_, h, w) = input.dims();
    debug_assert_eq!(dout.dims(), (params.out_channels, h, w));
    let (h1, h2) = (params.half_height as isize, params.half_width as isize);

    let mut dfilters = vec![0.0; params.filters.len()];
    let mut dbiases = vec![0.0; params.biases.len()];
    let mut dinput = Volume::zeros(input.channels(), h, w);

    for (i, dbias) in dbiases.iter_mut().enumerate() {
        let dout_plane = &dout.data()[i * h * w..(i + 1) * h * w];
        *dbias = dout_plane.iter().sum();
        for j in 0..params.in_channels {
            let in_plane = &input.data()[j * h * w..(j + 1) * h * w];
            let din_base = j * h * w;
            for du in -h1..=h1 {
                let (y_lo, y_hi) = valid_span(h, du);
                for dv in -h2..=h2 {
                    let fi = params.fidx(i, j, (du + h1) as usize, (dv + h2) as usize);
                    let f = params.filters[fi];
                    let (x_lo, x_hi) = valid_span(w, dv);
                    if x_lo >= x_hi {
                        continue;
                    }
                    let mut df = 0.0;
                    for y in y_lo..y_hi {
                        let sy = (y as isize + du) as usize;
                        let s0 = sy * w + (x_lo as isize + dv) as usize;
                        let src = &in_plane[s0..s0 + (x_hi - x_lo)];
                        let g = &dout_plane[y * w + x_lo..y * w + x_hi];
                        let din = &mut dinput.data_mut()[din_base + s0..din_base + s0 + (x_hi - x_lo)];
                        for ((gv, sv), dv_slot) in g.iter().zip(src).zip(din) {
                            df += gv * sv;
                            *dv_slot += f * gv;
                        }
                    }
                    dfilters[fi] += df;
                }
            }
        }
    }

    (
        ConvGrads {
            filters: dfilters,
            biases: dbiases,
        },
        dinput,
    )
}
