//! Layer graphs: construction-time shape checking, forward with an
//! activation cache, cross-entropy backpropagation, SGD application,
//! parameter fingerprints, and a finite-difference gradient checker.

use crate::error::{Error, Result};
use crate::nn::activation::{relu, relu_backward, relu_volume};
use crate::nn::conv::{conv_backward, conv_forward, ConvGrads, ConvParams};
use crate::nn::dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
use crate::nn::pool::{pool_backward, pool_forward, PoolSpec};
use crate::nn::softmax::softmax;
use crate::nn::Volume;
use crate::rng::{Fnv1a64, SplitMix64};
use sha2::{Digest, Sha256};

/// One layer of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(ConvParams),
    Pool(PoolSpec),
    Relu,
    Flatten,
    Dense(DenseParams),
    Softmax,
}

impl LayerSpec {
    fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::Pool(_) => "pool",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense(_) => "dense",
            LayerSpec::Softmax => "softmax",
        }
    }
}

/// A value flowing between layers: a feature volume until flattened,
/// a flat vector afterwards.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Volume(Volume),
    Vector(Vec<f64>),
}

impl Signal {
    /// Volumes shaped c×1×1 pass as vectors; anything wider needs an
    /// explicit Flatten layer.
    fn into_vector(self, layer_index: usize) -> Result<Vec<f64>> {
        match self {
            Signal::Vector(v) => Ok(v),
            Signal::Volume(v) => {
                let (_, h, w) = v.dims();
                if h == 1 && w == 1 {
                    Ok(v.into_data())
                } else {
                    Err(Error::shape(format!(
                        "layer {}: expected a vector, got a {}x{}x{} volume (insert a flatten layer)",
                        layer_index,
                        v.channels(),
                        h,
                        w
                    )))
                }
            }
        }
    }

    fn into_volume(self, dims: (usize, usize, usize)) -> Volume {
        match self {
            Signal::Volume(v) => v,
            Signal::Vector(v) => {
                Volume::new(dims.0, dims.1, dims.2, v).expect("reshape length checked by caller")
            }
        }
    }
}

/// Shape of a signal at a layer boundary, used for construction-time checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ShapeState {
    Vol(usize, usize, usize),
    Vec(usize),
}

/// An ordered layer stack with validated shapes.
///
/// Invariants enforced at construction: adjacent layer shapes are
/// compatible with the declared input shape, the stack ends in exactly
/// one softmax, and `head_index` (when present) points at the last dense
/// layer — everything before it is the feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: (usize, usize, usize),
    layers: Vec<LayerSpec>,
    head_index: Option<usize>,
}

impl Network {
    pub fn new(input_shape: (usize, usize, usize), layers: Vec<LayerSpec>) -> Result<Self> {
        let (c, h, w) = input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::shape("network input dimensions must be >= 1"));
        }
        if layers.is_empty() {
            return Err(Error::shape("network must have at least one layer"));
        }
        let softmax_count = layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Softmax))
            .count();
        if softmax_count != 1 || !matches!(layers.last(), Some(LayerSpec::Softmax)) {
            return Err(Error::shape(
                "network must contain exactly one softmax, as its last layer",
            ));
        }
        let net = Network {
            input_shape,
            head_index: layers
                .iter()
                .rposition(|l| matches!(l, LayerSpec::Dense(_))),
            layers,
        };
        net.validate_shapes()?;
        Ok(net)
    }

    fn validate_shapes(&self) -> Result<()> {
        let mut state = ShapeState::Vol(self.input_shape.0, self.input_shape.1, self.input_shape.2);
        for (i, layer) in self.layers.iter().enumerate() {
            state = Self::next_shape(state, layer, i)?;
        }
        Ok(())
    }

    fn next_shape(state: ShapeState, layer: &LayerSpec, index: usize) -> Result<ShapeState> {
        let vector_len = |state: ShapeState| -> Result<usize> {
            match state {
                ShapeState::Vec(n) => Ok(n),
                ShapeState::Vol(c, 1, 1) => Ok(c),
                ShapeState::Vol(c, h, w) => Err(Error::shape(format!(
                    "layer {index}: expected a vector, got a {c}x{h}x{w} volume (insert a flatten layer)"
                ))),
            }
        };
        match layer {
            LayerSpec::Conv(p) => match state {
                ShapeState::Vol(c, h, w) => {
                    if c != p.in_channels {
                        return Err(Error::shape(format!(
                            "layer {index}: conv expects {} input channels, got {c}",
                            p.in_channels
                        )));
                    }
                    Ok(ShapeState::Vol(p.out_channels, h, w))
                }
                ShapeState::Vec(_) => Err(Error::shape(format!(
                    "layer {index}: conv needs a volume input"
                ))),
            },
            LayerSpec::Pool(s) => match state {
                ShapeState::Vol(c, h, w) => {
                    s.validate()?;
                    if s.extent > h || s.extent > w {
                        return Err(Error::shape(format!(
                            "layer {index}: pool extent {} exceeds input {h}x{w}",
                            s.extent
                        )));
                    }
                    Ok(ShapeState::Vol(c, s.out_len(h), s.out_len(w)))
                }
                ShapeState::Vec(_) => Err(Error::shape(format!(
                    "layer {index}: pool needs a volume input"
                ))),
            },
            LayerSpec::Relu => Ok(state),
            LayerSpec::Flatten => match state {
                ShapeState::Vol(c, h, w) => Ok(ShapeState::Vec(c * h * w)),
                ShapeState::Vec(_) => Err(Error::shape(format!(
                    "layer {index}: flatten needs a volume input"
                ))),
            },
            LayerSpec::Dense(p) => {
                let n = vector_len(state)?;
                if n != p.in_units {
                    return Err(Error::shape(format!(
                        "layer {index}: dense expects {} inputs, got {n}",
                        p.in_units
                    )));
                }
                Ok(ShapeState::Vec(p.out_units))
            }
            LayerSpec::Softmax => {
                let n = vector_len(state)?;
                Ok(ShapeState::Vec(n))
            }
        }
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Index of the last dense layer — the retrainable head. `None` for
    /// degenerate nets without a dense layer.
    pub fn head_index(&self) -> Option<usize> {
        self.head_index
    }

    /// Output width of the softmax, i.e. the class count.
    pub fn class_count(&self) -> usize {
        let mut state = ShapeState::Vol(self.input_shape.0, self.input_shape.1, self.input_shape.2);
        for (i, layer) in self.layers.iter().enumerate() {
            state = Self::next_shape(state, layer, i).expect("shapes validated at construction");
        }
        match state {
            ShapeState::Vec(n) => n,
            ShapeState::Vol(c, _, _) => c,
        }
    }

    /// A compact convolutional classifier: two conv/relu/pool stages, a
    /// flatten, and a dense softmax head. Seeded Glorot initialization.
    pub fn small_cnn(input_shape: (usize, usize, usize), classes: usize, seed: u64) -> Result<Self> {
        let (c, h, w) = input_shape;
        if h < 4 || w < 4 {
            return Err(Error::shape(
                "small_cnn needs at least a 4x4 input for its two pooling stages",
            ));
        }
        let mut rng = SplitMix64::new(seed);
        let conv1 = ConvParams::glorot(8, c, 1, 1, &mut rng);
        let pool = PoolSpec::max(2, 2);
        let (h1, w1) = (pool.out_len(h), pool.out_len(w));
        let conv2 = ConvParams::glorot(16, 8, 1, 1, &mut rng);
        let (h2, w2) = (pool.out_len(h1), pool.out_len(w1));
        let head = DenseParams::glorot(classes, 16 * h2 * w2, &mut rng);
        Network::new(
            input_shape,
            vec![
                LayerSpec::Conv(conv1),
                LayerSpec::Relu,
                LayerSpec::Pool(pool),
                LayerSpec::Conv(conv2),
                LayerSpec::Relu,
                LayerSpec::Pool(pool),
                LayerSpec::Flatten,
                LayerSpec::Dense(head),
                LayerSpec::Softmax,
            ],
        )
    }

    /// Clones the feature extractor and attaches a fresh dense softmax head.
    pub fn replace_head(&self, head: DenseParams) -> Result<Network> {
        let head_index = self
            .head_index
            .ok_or_else(|| Error::contract("network has no dense head to replace"))?;
        let mut layers: Vec<LayerSpec> = self.layers[..head_index].to_vec();
        layers.push(LayerSpec::Dense(head));
        layers.push(LayerSpec::Softmax);
        Network::new(self.input_shape, layers)
    }

    /// Runs all layers, returning class probabilities and the cache the
    /// backward pass needs.
    pub fn forward(&self, input: &Volume) -> Result<(Vec<f64>, ActivationCache)> {
        if input.dims() != self.input_shape {
            let (c, h, w) = self.input_shape;
            let (ic, ih, iw) = input.dims();
            return Err(Error::shape(format!(
                "layer 0: network expects {c}x{h}x{w} input, got {ic}x{ih}x{iw}"
            )));
        }
        let mut signal = Signal::Volume(input.clone());
        let mut traces = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (next, trace) = self.apply_layer(layer, signal, i)?;
            signal = next;
            traces.push(trace);
        }
        let probs = match signal {
            Signal::Vector(p) => p,
            Signal::Volume(_) => unreachable!("softmax output is a vector"),
        };
        let cache = ActivationCache {
            net_fingerprint: self.fingerprint(),
            traces,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    /// Runs only the frozen feature extractor (layers before the head),
    /// returning the bottleneck feature vector.
    pub fn forward_prefix(&self, input: &Volume) -> Result<Vec<f64>> {
        let head_index = self
            .head_index
            .ok_or_else(|| Error::contract("network has no dense head"))?;
        if input.dims() != self.input_shape {
            let (c, h, w) = self.input_shape;
            return Err(Error::shape(format!(
                "layer 0: network expects {c}x{h}x{w} input"
            )));
        }
        let mut signal = Signal::Volume(input.clone());
        for (i, layer) in self.layers[..head_index].iter().enumerate() {
            let (next, _) = self.apply_layer(layer, signal, i)?;
            signal = next;
        }
        signal.into_vector(head_index)
    }

    fn apply_layer(
        &self,
        layer: &LayerSpec,
        signal: Signal,
        index: usize,
    ) -> Result<(Signal, LayerTrace)> {
        match layer {
            LayerSpec::Conv(p) => match signal {
                Signal::Volume(v) => {
                    let out = conv_forward(&v, p)?;
                    Ok((Signal::Volume(out), LayerTrace::Conv { input: v }))
                }
                Signal::Vector(_) => Err(Error::shape(format!(
                    "layer {index}: conv needs a volume input"
                ))),
            },
            LayerSpec::Pool(s) => match signal {
                Signal::Volume(v) => {
                    let (out, switches) = pool_forward(&v, s)?;
                    Ok((
                        Signal::Volume(out),
                        LayerTrace::Pool {
                            in_dims: v.dims(),
                            switches,
                        },
                    ))
                }
                Signal::Vector(_) => Err(Error::shape(format!(
                    "layer {index}: pool needs a volume input"
                ))),
            },
            LayerSpec::Relu => match signal {
                Signal::Volume(v) => {
                    let out = relu_volume(&v);
                    Ok((Signal::Volume(out), LayerTrace::Relu {
                        input: Signal::Volume(v),
                    }))
                }
                Signal::Vector(v) => {
                    let out = relu(&v);
                    Ok((Signal::Vector(out), LayerTrace::Relu {
                        input: Signal::Vector(v),
                    }))
                }
            },
            LayerSpec::Flatten => match signal {
                Signal::Volume(v) => {
                    let dims = v.dims();
                    Ok((
                        Signal::Vector(v.into_data()),
                        LayerTrace::Flatten { in_dims: dims },
                    ))
                }
                Signal::Vector(_) => Err(Error::shape(format!(
                    "layer {index}: flatten needs a volume input"
                ))),
            },
            LayerSpec::Dense(p) => {
                let input = signal.into_vector(index)?;
                let out = dense_forward(&input, p)?;
                Ok((Signal::Vector(out), LayerTrace::Dense { input }))
            }
            LayerSpec::Softmax => {
                let input = signal.into_vector(index)?;
                let probs = softmax(&input)?;
                Ok((
                    Signal::Vector(probs.clone()),
                    LayerTrace::Softmax { probs },
                ))
            }
        }
    }

    /// Backpropagates the cross-entropy loss for a one-hot `target`
    /// through every layer, producing gradients for all parameters.
    /// The softmax/cross-entropy pair collapses to (p − t) at the logits.
    pub fn backward(&self, cache: &ActivationCache, target: &[f64]) -> Result<Gradients> {
        if cache.net_fingerprint != self.fingerprint() {
            return Err(Error::contract(
                "activation cache does not match this network (stale cache?)",
            ));
        }
        if cache.traces.len() != self.layers.len() {
            return Err(Error::contract("activation cache has wrong layer count"));
        }
        if target.len() != cache.probs.len() {
            return Err(Error::shape(format!(
                "target length {} does not match {} classes",
                target.len(),
                cache.probs.len()
            )));
        }

        let mut per_layer: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut dsignal: Option<Signal> = None;

        for (layer, trace) in self.layers.iter().zip(&cache.traces).rev() {
            match (layer, trace) {
                (LayerSpec::Softmax, LayerTrace::Softmax { probs }) => {
                    let dlogits: Vec<f64> =
                        probs.iter().zip(target).map(|(p, t)| p - t).collect();
                    dsignal = Some(Signal::Vector(dlogits));
                    per_layer.push(LayerGrads::None);
                }
                (LayerSpec::Dense(p), LayerTrace::Dense { input }) => {
                    let dout = dsignal.take().expect("softmax seeds the gradient").into_vector(0)?;
                    let (grads, dinput) = dense_backward(input, p, &dout);
                    dsignal = Some(Signal::Vector(dinput));
                    per_layer.push(LayerGrads::Dense(grads));
                }
                (LayerSpec::Flatten, LayerTrace::Flatten { in_dims }) => {
                    let dout = dsignal.take().expect("gradient present").into_vector(0)?;
                    dsignal = Some(Signal::Volume(
                        Volume::new(in_dims.0, in_dims.1, in_dims.2, dout)
                            .map_err(|_| Error::contract("flatten gradient length mismatch"))?,
                    ));
                    per_layer.push(LayerGrads::None);
                }
                (LayerSpec::Relu, LayerTrace::Relu { input }) => {
                    let dout = dsignal.take().expect("gradient present");
                    let next = match input {
                        Signal::Volume(v) => {
                            let dout = dout.into_volume(v.dims());
                            let din = relu_backward(v.data(), dout.data());
                            Signal::Volume(
                                Volume::new(v.channels(), v.height(), v.width(), din)
                                    .expect("shape preserved"),
                            )
                        }
                        Signal::Vector(v) => {
                            let dout = dout.into_vector(0)?;
                            Signal::Vector(relu_backward(v, &dout))
                        }
                    };
                    dsignal = Some(next);
                    per_layer.push(LayerGrads::None);
                }
                (LayerSpec::Pool(s), LayerTrace::Pool { in_dims, switches }) => {
                    let (c, h, w) = *in_dims;
                    let out_dims = (c, s.out_len(h), s.out_len(w));
                    let dout = dsignal.take().expect("gradient present").into_volume(out_dims);
                    dsignal = Some(Signal::Volume(pool_backward(*in_dims, switches, &dout)));
                    per_layer.push(LayerGrads::None);
                }
                (LayerSpec::Conv(p), LayerTrace::Conv { input }) => {
                    let out_dims = (p.out_channels, input.height(), input.width());
                    let dout = dsignal.take().expect("gradient present").into_volume(out_dims);
                    let (grads, dinput) = conv_backward(input, p, &dout);
                    dsignal = Some(Signal::Volume(dinput));
                    per_layer.push(LayerGrads::Conv(grads));
                }
                (layer, _) => {
                    return Err(Error::contract(format!(
                        "activation cache entry does not match layer kind {}",
                        layer.kind_name()
                    )));
                }
            }
        }

        per_layer.reverse();
        Ok(Gradients { per_layer })
    }

    /// θ ← θ − lr·g for every parameter, layer by layer.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if grads.per_layer.len() != self.layers.len() {
            return Err(Error::contract("gradient layer count mismatch"));
        }
        for (layer, grad) in self.layers.iter_mut().zip(&grads.per_layer) {
            match (layer, grad) {
                (LayerSpec::Conv(p), LayerGrads::Conv(g)) => {
                    crate::train::sgd_step(&mut p.filters, &g.filters, learning_rate)?;
                    crate::train::sgd_step(&mut p.biases, &g.biases, learning_rate)?;
                }
                (LayerSpec::Dense(p), LayerGrads::Dense(g)) => {
                    crate::train::sgd_step(&mut p.weights, &g.weights, learning_rate)?;
                    crate::train::sgd_step(&mut p.biases, &g.biases, learning_rate)?;
                }
                (LayerSpec::Conv(_), _) | (LayerSpec::Dense(_), _) => {
                    return Err(Error::contract("gradient kind does not match layer"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Fast structural + parameter fingerprint; any change to any weight,
    /// bias, or layer spec changes the value. Used to detect stale caches.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a64::new();
        for d in [self.input_shape.0, self.input_shape.1, self.input_shape.2] {
            h.write_u64(d as u64);
        }
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv(p) => {
                    h.write(&[1]);
                    for d in [p.out_channels, p.in_channels, p.half_height, p.half_width] {
                        h.write_u64(d as u64);
                    }
                    for v in p.filters.iter().chain(&p.biases) {
                        h.write_f64(*v);
                    }
                }
                LayerSpec::Pool(s) => {
                    h.write(&[2]);
                    h.write_u64(s.extent as u64);
                    h.write_u64(s.stride as u64);
                }
                LayerSpec::Relu => h.write(&[3]),
                LayerSpec::Flatten => h.write(&[4]),
                LayerSpec::Dense(p) => {
                    h.write(&[5]);
                    h.write_u64(p.out_units as u64);
                    h.write_u64(p.in_units as u64);
                    for v in p.weights.iter().chain(&p.biases) {
                        h.write_f64(*v);
                    }
                }
                LayerSpec::Softmax => h.write(&[6]),
            }
        }
        h.finish()
    }

    /// SHA-256 hex digest of the feature-extractor parameters (everything
    /// before the head). This is the freeze-contract fingerprint.
    pub fn prefix_sha256(&self) -> Result<String> {
        let head_index = self
            .head_index
            .ok_or_else(|| Error::contract("network has no dense head"))?;
        let bytes = self.canonical_bytes(head_index);
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Canonical byte serialization of input shape plus the first
    /// `layer_count` layers: kind tags, dimensions, and parameter bits.
    fn canonical_bytes(&self, layer_count: usize) -> Vec<u8> {
        let mut bytes = Vec::new();
        for d in [self.input_shape.0, self.input_shape.1, self.input_shape.2] {
            bytes.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for layer in &self.layers[..layer_count] {
            match layer {
                LayerSpec::Conv(p) => {
                    bytes.push(1);
                    for d in [p.out_channels, p.in_channels, p.half_height, p.half_width] {
                        bytes.extend_from_slice(&(d as u64).to_le_bytes());
                    }
                    for v in p.filters.iter().chain(&p.biases) {
                        bytes.extend_from_slice(&v.to_le_bytes());
                    }
                }
                LayerSpec::Pool(s) => {
                    bytes.push(2);
                    bytes.extend_from_slice(&(s.extent as u64).to_le_bytes());
                    bytes.extend_from_slice(&(s.stride as u64).to_le_bytes());
                }
                LayerSpec::Relu => bytes.push(3),
                LayerSpec::Flatten => bytes.push(4),
                LayerSpec::Dense(p) => {
                    bytes.push(5);
                    bytes.extend_from_slice(&(p.out_units as u64).to_le_bytes());
                    bytes.extend_from_slice(&(p.in_units as u64).to_le_bytes());
                    for v in p.weights.iter().chain(&p.biases) {
                        bytes.extend_from_slice(&v.to_le_bytes());
                    }
                }
                LayerSpec::Softmax => bytes.push(6),
            }
        }
        bytes
    }

    /// All trainable parameters, flattened in layer order
    /// (conv: filters then biases; dense: weights then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv(p) => {
                    out.extend_from_slice(&p.filters);
                    out.extend_from_slice(&p.biases);
                }
                LayerSpec::Dense(p) => {
                    out.extend_from_slice(&p.weights);
                    out.extend_from_slice(&p.biases);
                }
                _ => {}
            }
        }
        out
    }

    /// Writes back a parameter vector produced by [`Network::flat_params`].
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let mut cursor = 0;
        for layer in &mut self.layers {
            match layer {
                LayerSpec::Conv(p) => {
                    for slot in p.filters.iter_mut().chain(p.biases.iter_mut()) {
                        *slot = *params
                            .get(cursor)
                            .ok_or_else(|| Error::contract("parameter vector too short"))?;
                        cursor += 1;
                    }
                }
                LayerSpec::Dense(p) => {
                    for slot in p.weights.iter_mut().chain(p.biases.iter_mut()) {
                        *slot = *params
                            .get(cursor)
                            .ok_or_else(|| Error::contract("parameter vector too short"))?;
                        cursor += 1;
                    }
                }
                _ => {}
            }
        }
        if cursor != params.len() {
            return Err(Error::contract("parameter vector too long"));
        }
        Ok(())
    }
}

/// Per-layer data captured during forward, consumed by backward.
#[derive(Debug, Clone)]
enum LayerTrace {
    Conv { input: Volume },
    Pool { in_dims: (usize, usize, usize), switches: Vec<usize> },
    Relu { input: Signal },
    Flatten { in_dims: (usize, usize, usize) },
    Dense { input: Vec<f64> },
    Softmax { probs: Vec<f64> },
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    net_fingerprint: u64,
    traces: Vec<LayerTrace>,
    probs: Vec<f64>,
}

impl ActivationCache {
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }
}

/// Loss gradients for every parameterized layer, aligned with the
/// network's layer order.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Conv(ConvGrads),
    Dense(DenseGrads),
    None,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    per_layer: Vec<LayerGrads>,
}

impl Gradients {
    pub fn per_layer(&self) -> &[LayerGrads] {
        &self.per_layer
    }

    pub fn zeros_like(net: &Network) -> Gradients {
        let per_layer = net
            .layers()
            .iter()
            .map(|layer| match layer {
                LayerSpec::Conv(p) => Gradients::zero_conv(p),
                LayerSpec::Dense(p) => LayerGrads::Dense(DenseGrads {
                    weights: vec![0.0; p.weights.len()],
                    biases: vec![0.0; p.biases.len()],
                }),
                _ => LayerGrads::None,
            })
            .collect();
        Gradients { per_layer }
    }

    fn zero_conv(p: &ConvParams) -> LayerGrads {
        LayerGrads::Conv(ConvGrads {
            filters: vec![0.0; p.filters.len()],
            biases: vec![0.0; p.biases.len()],
        })
    }

    /// Elementwise accumulation; shapes must match.
    pub fn accumulate(&mut self, other: &Gradients) {
        debug_assert_eq!(self.per_layer.len(), other.per_layer.len());
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            match (a, b) {
                (LayerGrads::Conv(x), LayerGrads::Conv(y)) => {
                    for (u, v) in x.filters.iter_mut().zip(&y.filters) {
                        *u += v;
                    }
                    for (u, v) in x.biases.iter_mut().zip(&y.biases) {
                        *u += v;
                    }
                }
                (LayerGrads::Dense(x), LayerGrads::Dense(y)) => {
                    for (u, v) in x.weights.iter_mut().zip(&y.weights) {
                        *u += v;
                    }
                    for (u, v) in x.biases.iter_mut().zip(&y.biases) {
                        *u += v;
                    }
                }
                (LayerGrads::None, LayerGrads::None) => {}
                _ => unreachable!("gradient structures match by construction"),
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.per_layer {
            match g {
                LayerGrads::Conv(x) => {
                    x.filters.iter_mut().for_each(|v| *v *= factor);
                    x.biases.iter_mut().for_each(|v| *v *= factor);
                }
                LayerGrads::Dense(x) => {
                    x.weights.iter_mut().for_each(|v| *v *= factor);
                    x.biases.iter_mut().for_each(|v| *v *= factor);
                }
                LayerGrads::None => {}
            }
        }
    }

    /// Flattened in the same order as [`Network::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.per_layer {
            match g {
                LayerGrads::Conv(x) => {
                    out.extend_from_slice(&x.filters);
                    out.extend_from_slice(&x.biases);
                }
                LayerGrads::Dense(x) => {
                    out.extend_from_slice(&x.weights);
                    out.extend_from_slice(&x.biases);
                }
                LayerGrads::None => {}
            }
        }
        out
    }
}

/// Relative error with a floored denominator, so exact zeros on both
/// sides compare as zero instead of dividing by zero.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs().max(n.abs())).max(1e-12)
}

/// Central finite-difference check of every parameter gradient against
/// backpropagation. Returns the worst relative error.
pub fn grad_check(net: &Network, input: &Volume, target: &[f64], eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::usage("grad_check eps must be > 0"));
    }
    let (_, cache) = net.forward(input)?;
    let analytic = net.backward(&cache, target)?.flat();

    let mut work = net.clone();
    let base = net.flat_params();
    let mut params = base.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let saved = params[i];
        params[i] = saved + eps;
        work.set_flat_params(&params)?;
        let (probs_hi, _) = work.forward(input)?;
        let loss_hi = crate::train::cross_entropy(&probs_hi, target)?;
        params[i] = saved - eps;
        work.set_flat_params(&params)?;
        let (probs_lo, _) = work.forward(input)?;
        let loss_lo = crate::train::cross_entropy(&probs_lo, target)?;
        params[i] = saved;
        let numeric = (loss_hi - loss_lo) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}
