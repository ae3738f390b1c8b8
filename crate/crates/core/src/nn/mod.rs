//! Minimal feed-forward network toolkit with hand-written backward passes.
//!
//! Spatial activations are stored channel-major (`C × B × H × W`) so that a
//! convolution over the whole batch is a single matrix product against the
//! im2col buffer. Flat activations are row-major `B × F`.

mod scalar;

pub use scalar::{gemm, MatRef, Scalar};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Flat {
        batch: usize,
        features: usize,
    },
    /// Channel-major spatial block.
    Spatial {
        channels: usize,
        batch: usize,
        height: usize,
        width: usize,
    },
}

impl Layout {
    pub fn len(&self) -> usize {
        match *self {
            Layout::Flat { batch, features } => batch * features,
            Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } => channels * batch * height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch(&self) -> usize {
        match *self {
            Layout::Flat { batch, .. } | Layout::Spatial { batch, .. } => batch,
        }
    }
}

/// A batch of activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Act<T> {
    pub data: Vec<T>,
    pub layout: Layout,
}

impl<T: Scalar> Act<T> {
    pub fn flat(data: Vec<T>, batch: usize, features: usize) -> Self {
        assert_eq!(data.len(), batch * features);
        Self {
            data,
            layout: Layout::Flat { batch, features },
        }
    }

    pub fn spatial(data: Vec<T>, channels: usize, batch: usize, height: usize, width: usize) -> Self {
        assert_eq!(data.len(), channels * batch * height * width);
        Self {
            data,
            layout: Layout::Spatial {
                channels,
                batch,
                height,
                width,
            },
        }
    }

    pub fn batch(&self) -> usize {
        self.layout.batch()
    }

    /// Per-sample rows in `(c, h, w)` order regardless of layout.
    pub fn to_rows(&self) -> Vec<T> {
        match self.layout {
            Layout::Flat { .. } => self.data.clone(),
            Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } => {
                let hw = height * width;
                let mut out = vec![T::zero(); self.data.len()];
                for c in 0..channels {
                    for b in 0..batch {
                        let src = (c * batch + b) * hw;
                        let dst = b * channels * hw + c * hw;
                        out[dst..dst + hw].copy_from_slice(&self.data[src..src + hw]);
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub name: String,
    pub in_features: usize,
    pub out_features: usize,
    /// `out × in`, row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `out × in × k × k`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `in × out × k × k`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Linear(Linear<T>),
    Conv(Conv2d<T>),
    Deconv(ConvTranspose2d<T>),
    Relu,
    LeakyRelu(f64),
    /// Channel-major spatial block to per-sample feature rows.
    Flatten,
    /// Per-sample feature rows back to a `channels × height × width` block.
    Unflatten {
        channels: usize,
        height: usize,
        width: usize,
    },
}

/// Named parameter tensor with its logical shape.
#[derive(Debug, Clone, Copy)]
pub struct ParamView<'a, T> {
    pub name: &'a str,
    pub suffix: &'static str,
    pub shape: [usize; 4],
    pub rank: usize,
    pub values: &'a [T],
}

impl<T> Layer<T> {
    fn param_count(&self) -> usize {
        match self {
            Layer::Linear(_) | Layer::Conv(_) | Layer::Deconv(_) => 2,
            _ => 0,
        }
    }
}

enum Cache<T> {
    Input(Vec<T>),
    Cols(Vec<T>, Layout),
    Layout(Layout),
    None,
}

/// Values recorded by a forward pass for use by the matching backward pass.
pub struct Tape<T> {
    entries: Vec<Cache<T>>,
}

impl<T> Default for Tape<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

/// Gradient buffers aligned with [`Sequential::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T>(pub Vec<Vec<T>>);

impl<T: Scalar> Grads<T> {
    pub fn flat_len(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequential<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Linear(l) => {
                    out.push(ParamView {
                        name: &l.name,
                        suffix: "weight",
                        shape: [l.out_features, l.in_features, 1, 1],
                        rank: 2,
                        values: &l.weight,
                    });
                    out.push(ParamView {
                        name: &l.name,
                        suffix: "bias",
                        shape: [l.out_features, 1, 1, 1],
                        rank: 1,
                        values: &l.bias,
                    });
                }
                Layer::Conv(c) => {
                    out.push(ParamView {
                        name: &c.name,
                        suffix: "weight",
                        shape: [c.out_channels, c.in_channels, c.kernel, c.kernel],
                        rank: 4,
                        values: &c.weight,
                    });
                    out.push(ParamView {
                        name: &c.name,
                        suffix: "bias",
                        shape: [c.out_channels, 1, 1, 1],
                        rank: 1,
                        values: &c.bias,
                    });
                }
                Layer::Deconv(c) => {
                    out.push(ParamView {
                        name: &c.name,
                        suffix: "weight",
                        shape: [c.in_channels, c.out_channels, c.kernel, c.kernel],
                        rank: 4,
                        values: &c.weight,
                    });
                    out.push(ParamView {
                        name: &c.name,
                        suffix: "bias",
                        shape: [c.out_channels, 1, 1, 1],
                        rank: 1,
                        values: &c.bias,
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable parameter buffers in the same order as [`params`](Self::params).
    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Linear(l) => {
                    out.push(&mut l.weight);
                    out.push(&mut l.bias);
                }
                Layer::Conv(c) => {
                    out.push(&mut c.weight);
                    out.push(&mut c.bias);
                }
                Layer::Deconv(c) => {
                    out.push(&mut c.weight);
                    out.push(&mut c.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.values.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads<T> {
        Grads(
            self.params()
                .iter()
                .map(|p| vec![T::zero(); p.values.len()])
                .collect(),
        )
    }

    /// Fan-in scaled uniform initialisation: every weight and bias of a layer
    /// with fan-in `f` is drawn from `U(-1/sqrt(f), 1/sqrt(f))`. Fan-in is
    /// `in` for linear layers, `in·k²` for convolutions and `out·k²` for
    /// transposed convolutions. Each layer draws from its own child stream.
    pub fn init_fan_in(&mut self, stream: &SeedStream) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            let (fan_in, weight, bias) = match layer {
                Layer::Linear(l) => (l.in_features, &mut l.weight, &mut l.bias),
                Layer::Conv(c) => (c.in_channels * c.kernel * c.kernel, &mut c.weight, &mut c.bias),
                Layer::Deconv(c) => (c.out_channels * c.kernel * c.kernel, &mut c.weight, &mut c.bias),
                _ => continue,
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut s = stream.derive(idx as u64);
            for w in weight.iter_mut().chain(bias.iter_mut()) {
                *w = T::of((2.0 * s.uniform() - 1.0) * bound);
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        Sequential {
            layers: self
                .layers
                .iter()
                .map(|layer| match layer {
                    Layer::Linear(l) => Layer::Linear(Linear {
                        name: l.name.clone(),
                        in_features: l.in_features,
                        out_features: l.out_features,
                        weight: conv(&l.weight),
                        bias: conv(&l.bias),
                    }),
                    Layer::Conv(c) => Layer::Conv(Conv2d {
                        name: c.name.clone(),
                        in_channels: c.in_channels,
                        out_channels: c.out_channels,
                        kernel: c.kernel,
                        stride: c.stride,
                        padding: c.padding,
                        weight: conv(&c.weight),
                        bias: conv(&c.bias),
                    }),
                    Layer::Deconv(c) => Layer::Deconv(ConvTranspose2d {
                        name: c.name.clone(),
                        in_channels: c.in_channels,
                        out_channels: c.out_channels,
                        kernel: c.kernel,
                        stride: c.stride,
                        padding: c.padding,
                        weight: conv(&c.weight),
                        bias: conv(&c.bias),
                    }),
                    Layer::Relu => Layer::Relu,
                    Layer::LeakyRelu(s) => Layer::LeakyRelu(*s),
                    Layer::Flatten => Layer::Flatten,
                    Layer::Unflatten {
                        channels,
                        height,
                        width,
                    } => Layer::Unflatten {
                        channels: *channels,
                        height: *height,
                        width: *width,
                    },
                })
                .collect(),
        }
    }

    pub fn forward(&self, input: Act<T>, mut tape: Option<&mut Tape<T>>) -> Result<Act<T>> {
        if let Some(t) = tape.as_deref_mut() {
            t.entries.clear();
        }
        let mut x = input;
        for layer in &self.layers {
            let (y, cache) = forward_layer(layer, x, tape.is_some())?;
            if let Some(t) = tape.as_deref_mut() {
                t.entries.push(cache);
            }
            x = y;
        }
        Ok(x)
    }

    /// Back-propagates `grad_out` through the recorded pass. Parameter
    /// gradients are accumulated into `grads` when given; the gradient with
    /// respect to the network input is returned.
    pub fn backward(&self, tape: Tape<T>, grad_out: Act<T>, mut grads: Option<&mut Grads<T>>) -> Act<T> {
        assert_eq!(tape.entries.len(), self.layers.len(), "tape does not match network");
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }
        let mut g = grad_out;
        for ((layer, cache), &off) in self
            .layers
            .iter()
            .zip(tape.entries)
            .zip(offsets.iter())
            .rev()
        {
            let slot = grads.as_deref_mut().filter(|_| layer.param_count() > 0).map(|gr| {
                let (w, rest) = gr.0[off..].split_at_mut(1);
                (&mut w[0], &mut rest[0])
            });
            g = backward_layer(layer, cache, g, slot);
        }
        g
    }
}

fn forward_layer<T: Scalar>(layer: &Layer<T>, x: Act<T>, record: bool) -> Result<(Act<T>, Cache<T>)> {
    match layer {
        Layer::Linear(l) => {
            let Layout::Flat { batch, features } = x.layout else {
                return Err(Error::dim(format!("{} expects flat input", l.name)));
            };
            if features != l.in_features {
                return Err(Error::dim(format!(
                    "{} expects {} features, got {}",
                    l.name, l.in_features, features
                )));
            }
            let mut out = vec![T::zero(); batch * l.out_features];
            for row in out.chunks_mut(l.out_features) {
                row.copy_from_slice(&l.bias);
            }
            gemm(
                MatRef::new(&x.data, batch, features),
                MatRef::new(&l.weight, l.out_features, l.in_features).t(),
                T::one(),
                &mut out,
            );
            let cache = if record { Cache::Input(x.data) } else { Cache::None };
            Ok((Act::flat(out, batch, l.out_features), cache))
        }
        Layer::Conv(c) => {
            let Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } = x.layout
            else {
                return Err(Error::dim(format!("{} expects spatial input", c.name)));
            };
            if channels != c.in_channels {
                return Err(Error::dim(format!(
                    "{} expects {} channels, got {}",
                    c.name, c.in_channels, channels
                )));
            }
            let oh = (height + 2 * c.padding - c.kernel) / c.stride + 1;
            let ow = (width + 2 * c.padding - c.kernel) / c.stride + 1;
            let geom = Geometry {
                channels,
                batch,
                big_h: height,
                big_w: width,
                small_h: oh,
                small_w: ow,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            };
            let cols = im2col(&x.data, &geom);
            let ckk = geom.rows();
            let n = geom.cols();
            let mut out = vec![T::zero(); c.out_channels * n];
            for (o, row) in out.chunks_mut(n).enumerate() {
                row.iter_mut().for_each(|v| *v = c.bias[o]);
            }
            gemm(
                MatRef::new(&c.weight, c.out_channels, ckk),
                MatRef::new(&cols, ckk, n),
                T::one(),
                &mut out,
            );
            let cache = if record { Cache::Cols(cols, x.layout) } else { Cache::None };
            Ok((Act::spatial(out, c.out_channels, batch, oh, ow), cache))
        }
        Layer::Deconv(c) => {
            let Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } = x.layout
            else {
                return Err(Error::dim(format!("{} expects spatial input", c.name)));
            };
            if channels != c.in_channels {
                return Err(Error::dim(format!(
                    "{} expects {} channels, got {}",
                    c.name, c.in_channels, channels
                )));
            }
            let oh = (height - 1) * c.stride + c.kernel - 2 * c.padding;
            let ow = (width - 1) * c.stride + c.kernel - 2 * c.padding;
            let geom = Geometry {
                channels: c.out_channels,
                batch,
                big_h: oh,
                big_w: ow,
                small_h: height,
                small_w: width,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            };
            let okk = geom.rows();
            let n = geom.cols();
            let mut cols = vec![T::zero(); okk * n];
            gemm(
                MatRef::new(&c.weight, c.in_channels, okk).t(),
                MatRef::new(&x.data, c.in_channels, n),
                T::zero(),
                &mut cols,
            );
            let mut out = col2im(&cols, &geom);
            let plane = batch * oh * ow;
            for (o, block) in out.chunks_mut(plane).enumerate() {
                block.iter_mut().for_each(|v| *v += c.bias[o]);
            }
            let cache = if record { Cache::Input(x.data) } else { Cache::None };
            Ok((Act::spatial(out, c.out_channels, batch, oh, ow), cache))
        }
        Layer::Relu => {
            let data: Vec<T> = x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
            let cache = if record { Cache::Input(x.data) } else { Cache::None };
            Ok((
                Act {
                    data,
                    layout: x.layout,
                },
                cache,
            ))
        }
        Layer::LeakyRelu(slope) => {
            let s = T::of(*slope);
            let data: Vec<T> = x.data.iter().map(|&v| if v > T::zero() { v } else { v * s }).collect();
            let cache = if record { Cache::Input(x.data) } else { Cache::None };
            Ok((
                Act {
                    data,
                    layout: x.layout,
                },
                cache,
            ))
        }
        Layer::Flatten => {
            let Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } = x.layout
            else {
                return Err(Error::dim("flatten expects spatial input"));
            };
            let rows = x.to_rows();
            let cache = if record { Cache::Layout(x.layout) } else { Cache::None };
            Ok((Act::flat(rows, batch, channels * height * width), cache))
        }
        Layer::Unflatten {
            channels,
            height,
            width,
        } => {
            let Layout::Flat { batch, features } = x.layout else {
                return Err(Error::dim("unflatten expects flat input"));
            };
            if features != channels * height * width {
                return Err(Error::dim(format!(
                    "unflatten to {channels}x{height}x{width} from {features} features"
                )));
            }
            let data = rows_to_channel_major(&x.data, *channels, batch, height * width);
            let cache = if record { Cache::Layout(x.layout) } else { Cache::None };
            Ok((Act::spatial(data, *channels, batch, *height, *width), cache))
        }
    }
}

fn backward_layer<T: Scalar>(
    layer: &Layer<T>,
    cache: Cache<T>,
    g: Act<T>,
    grads: Option<(&mut Vec<T>, &mut Vec<T>)>,
) -> Act<T> {
    match (layer, cache) {
        (Layer::Linear(l), Cache::Input(input)) => {
            let batch = g.batch();
            if let Some((gw, gb)) = grads {
                gemm(
                    MatRef::new(&g.data, batch, l.out_features).t(),
                    MatRef::new(&input, batch, l.in_features),
                    T::one(),
                    gw,
                );
                for row in g.data.chunks(l.out_features) {
                    for (b, &v) in gb.iter_mut().zip(row) {
                        *b += v;
                    }
                }
            }
            let mut dx = vec![T::zero(); batch * l.in_features];
            gemm(
                MatRef::new(&g.data, batch, l.out_features),
                MatRef::new(&l.weight, l.out_features, l.in_features),
                T::zero(),
                &mut dx,
            );
            Act::flat(dx, batch, l.in_features)
        }
        (Layer::Conv(c), Cache::Cols(cols, in_layout)) => {
            let Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } = in_layout
            else {
                unreachable!()
            };
            let Layout::Spatial {
                height: oh,
                width: ow,
                ..
            } = g.layout
            else {
                unreachable!()
            };
            let geom = Geometry {
                channels,
                batch,
                big_h: height,
                big_w: width,
                small_h: oh,
                small_w: ow,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            };
            let ckk = geom.rows();
            let n = geom.cols();
            if let Some((gw, gb)) = grads {
                gemm(
                    MatRef::new(&g.data, c.out_channels, n),
                    MatRef::new(&cols, ckk, n).t(),
                    T::one(),
                    gw,
                );
                for (o, row) in g.data.chunks(n).enumerate() {
                    gb[o] += row.iter().copied().sum::<T>();
                }
            }
            let mut dcols = cols;
            gemm(
                MatRef::new(&c.weight, c.out_channels, ckk).t(),
                MatRef::new(&g.data, c.out_channels, n),
                T::zero(),
                &mut dcols,
            );
            Act {
                data: col2im(&dcols, &geom),
                layout: in_layout,
            }
        }
        (Layer::Deconv(c), Cache::Input(input)) => {
            let Layout::Spatial {
                batch,
                height: oh,
                width: ow,
                ..
            } = g.layout
            else {
                unreachable!()
            };
            let h = (oh + 2 * c.padding - c.kernel) / c.stride + 1;
            let w = (ow + 2 * c.padding - c.kernel) / c.stride + 1;
            let geom = Geometry {
                channels: c.out_channels,
                batch,
                big_h: oh,
                big_w: ow,
                small_h: h,
                small_w: w,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            };
            let okk = geom.rows();
            let n = geom.cols();
            let dcols = im2col(&g.data, &geom);
            if let Some((gw, gb)) = grads {
                gemm(
                    MatRef::new(&input, c.in_channels, n),
                    MatRef::new(&dcols, okk, n).t(),
                    T::one(),
                    gw,
                );
                let plane = batch * oh * ow;
                for (o, block) in g.data.chunks(plane).enumerate() {
                    gb[o] += block.iter().copied().sum::<T>();
                }
            }
            let mut dx = vec![T::zero(); c.in_channels * n];
            gemm(
                MatRef::new(&c.weight, c.in_channels, okk),
                MatRef::new(&dcols, okk, n),
                T::zero(),
                &mut dx,
            );
            Act::spatial(dx, c.in_channels, batch, h, w)
        }
        (Layer::Relu, Cache::Input(input)) => {
            let data = g
                .data
                .iter()
                .zip(&input)
                .map(|(&d, &x)| if x > T::zero() { d } else { T::zero() })
                .collect();
            Act { data, layout: g.layout }
        }
        (Layer::LeakyRelu(slope), Cache::Input(input)) => {
            let s = T::of(*slope);
            let data = g
                .data
                .iter()
                .zip(&input)
                .map(|(&d, &x)| if x > T::zero() { d } else { d * s })
                .collect();
            Act { data, layout: g.layout }
        }
        (Layer::Flatten, Cache::Layout(in_layout)) => {
            let Layout::Spatial {
                channels,
                batch,
                height,
                width,
            } = in_layout
            else {
                unreachable!()
            };
            Act {
                data: rows_to_channel_major(&g.data, channels, batch, height * width),
                layout: in_layout,
            }
        }
        (Layer::Unflatten { .. }, Cache::Layout(in_layout)) => Act {
            data: g.to_rows(),
            layout: in_layout,
        },
        _ => panic!("backward called with a tape recorded without gradients"),
    }
}

fn rows_to_channel_major<T: Scalar>(rows: &[T], channels: usize, batch: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows.len()];
    for b in 0..batch {
        for c in 0..channels {
            let src = b * channels * hw + c * hw;
            let dst = (c * batch + b) * hw;
            out[dst..dst + hw].copy_from_slice(&rows[src..src + hw]);
        }
    }
    out
}

/// Patch geometry shared by convolution (`big` = input) and transposed
/// convolution (`big` = output).
struct Geometry {
    channels: usize,
    batch: usize,
    big_h: usize,
    big_w: usize,
    small_h: usize,
    small_w: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.batch * self.small_h * self.small_w
    }

    /// Range of small-grid positions whose big-grid coordinate
    /// `pos * stride + k - padding` lies in `[0, limit)`.
    fn valid(&self, k: usize, small: usize, limit: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        let hi = if limit + p > k { ((limit + p - k - 1) / s + 1).min(small) } else { 0 };
        (lo, hi.max(lo))
    }
}

fn im2col<T: Scalar>(src: &[T], g: &Geometry) -> Vec<T> {
    let n = g.cols();
    let mut cols = vec![T::zero(); g.rows() * n];
    let big_plane = g.big_h * g.big_w;
    let (s, p) = (g.stride, g.padding);
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            let (y_lo, y_hi) = g.valid(ky, g.small_h, g.big_h);
            for kx in 0..g.kernel {
                let (x_lo, x_hi) = g.valid(kx, g.small_w, g.big_w);
                let r = (c * g.kernel + ky) * g.kernel + kx;
                let row = &mut cols[r * n..(r + 1) * n];
                for b in 0..g.batch {
                    let plane = &src[(c * g.batch + b) * big_plane..(c * g.batch + b + 1) * big_plane];
                    for y in y_lo..y_hi {
                        let sy = y * s + ky - p;
                        let base = (b * g.small_h + y) * g.small_w;
                        let line = &plane[sy * g.big_w..(sy + 1) * g.big_w];
                        let dst = &mut row[base..base + g.small_w];
                        for x in x_lo..x_hi {
                            dst[x] = line[x * s + kx - p];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], g: &Geometry) -> Vec<T> {
    let n = g.cols();
    let big_plane = g.big_h * g.big_w;
    let (s, p) = (g.stride, g.padding);
    let mut out = vec![T::zero(); g.channels * g.batch * big_plane];
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            let (y_lo, y_hi) = g.valid(ky, g.small_h, g.big_h);
            for kx in 0..g.kernel {
                let (x_lo, x_hi) = g.valid(kx, g.small_w, g.big_w);
                let r = (c * g.kernel + ky) * g.kernel + kx;
                let row = &cols[r * n..(r + 1) * n];
                for b in 0..g.batch {
                    let off = (c * g.batch + b) * big_plane;
                    for y in y_lo..y_hi {
                        let sy = y * s + ky - p;
                        let base = (b * g.small_h + y) * g.small_w;
                        let src = &row[base..base + g.small_w];
                        let line = &mut out[off + sy * g.big_w..off + (sy + 1) * g.big_w];
                        for x in x_lo..x_hi {
                            line[x * s + kx - p] += src[x];
                        }
                    }
                }
            }
        }
    }
    out
}
