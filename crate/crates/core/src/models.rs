//! Encoder, decoder and discriminator networks built from an
//! [`ArchitectureSpec`], and the single-file checkpoint archive.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::{GaussianPosterior, LatentBatch};
use crate::error::{Error, Result};
use crate::nn::{Act, Conv2d, ConvTranspose2d, Layer, Linear, Scalar, Sequential, Tape};
use crate::rng::{tags, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputShape {
    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub kernel: usize,
    pub stride: usize,
    pub out_channels: usize,
}

/// Weight initialisation scheme, recorded with every bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases; the
    /// discriminator's output layer starts at zero.
    FanInUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub input_shape: InputShape,
    pub latent_dim: usize,
    /// Encoder convolutions, each followed by ReLU. The decoder mirrors them
    /// with transposed convolutions.
    pub conv_layers: Vec<ConvLayerSpec>,
    pub encoder_fc_width: usize,
    /// Number of hidden layers in the discriminator MLP.
    pub discriminator_layers: usize,
    pub discriminator_width: usize,
    pub discriminator_activation: Activation,
    pub init: InitScheme,
}

fn convs(channels: &[usize]) -> Vec<ConvLayerSpec> {
    channels
        .iter()
        .map(|&c| ConvLayerSpec {
            kernel: 4,
            stride: 2,
            out_channels: c,
        })
        .collect()
}

impl ArchitectureSpec {
    /// The 64×64 binary-image architecture with a 6×1000 discriminator.
    pub fn paper_2d_shapes(latent_dim: usize) -> Self {
        Self {
            input_shape: InputShape {
                height: 64,
                width: 64,
                channels: 1,
            },
            latent_dim,
            conv_layers: convs(&[32, 32, 64, 64]),
            encoder_fc_width: 128,
            discriminator_layers: 6,
            discriminator_width: 1000,
            discriminator_activation: Activation::LeakyRelu { slope: 0.2 },
            init: InitScheme::FanInUniform,
        }
    }

    /// Reduced 32×32 architecture with halved channels and a 3×256
    /// discriminator.
    pub fn desk(latent_dim: usize) -> Self {
        Self {
            input_shape: InputShape {
                height: 32,
                width: 32,
                channels: 1,
            },
            latent_dim,
            conv_layers: convs(&[16, 16, 32, 32]),
            encoder_fc_width: 128,
            discriminator_layers: 3,
            discriminator_width: 256,
            discriminator_activation: Activation::LeakyRelu { slope: 0.2 },
            init: InitScheme::FanInUniform,
        }
    }

    /// Tiny 4×4 model with `d = 2`, used for gradient checks.
    pub fn toy() -> Self {
        Self {
            input_shape: InputShape {
                height: 4,
                width: 4,
                channels: 1,
            },
            latent_dim: 2,
            conv_layers: convs(&[3, 4]),
            encoder_fc_width: 6,
            discriminator_layers: 2,
            discriminator_width: 5,
            discriminator_activation: Activation::LeakyRelu { slope: 0.2 },
            init: InitScheme::FanInUniform,
        }
    }

    /// Spatial side lengths after each convolution, starting with the input.
    fn spatial_sizes(&self) -> Result<Vec<(usize, usize)>> {
        let mut sizes = vec![(self.input_shape.height, self.input_shape.width)];
        for (i, c) in self.conv_layers.iter().enumerate() {
            let (h, w) = *sizes.last().expect("non-empty");
            if c.kernel < c.stride || (c.kernel - c.stride) % 2 != 0 || c.stride == 0 {
                return Err(Error::config(format!(
                    "conv layer {i}: kernel {} and stride {} do not give a symmetric padding",
                    c.kernel, c.stride
                )));
            }
            if h % c.stride != 0 || w % c.stride != 0 || h < c.stride || w < c.stride {
                return Err(Error::config(format!(
                    "conv layer {i}: {h}x{w} input is not divisible by stride {}",
                    c.stride
                )));
            }
            sizes.push((h / c.stride, w / c.stride));
        }
        Ok(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.input_shape;
        if s.height == 0 || s.width == 0 || s.channels == 0 {
            return Err(Error::config("input shape must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim must be positive"));
        }
        if self.encoder_fc_width == 0 || self.discriminator_width == 0 || self.discriminator_layers == 0 {
            return Err(Error::config("layer widths and counts must be positive"));
        }
        if self.conv_layers.iter().any(|c| c.out_channels == 0) {
            return Err(Error::config("conv channels must be positive"));
        }
        self.spatial_sizes().map(|_| ())
    }

    fn slope(&self) -> f64 {
        match self.discriminator_activation {
            Activation::Relu => 0.0,
            Activation::LeakyRelu { slope } => slope,
        }
    }

    fn build_encoder<T: Scalar>(&self) -> Result<Sequential<T>> {
        let sizes = self.spatial_sizes()?;
        let mut layers = Vec::new();
        let mut ch = self.input_shape.channels;
        for (i, c) in self.conv_layers.iter().enumerate() {
            layers.push(Layer::Conv(Conv2d {
                name: format!("conv{}", i + 1),
                in_channels: ch,
                out_channels: c.out_channels,
                kernel: c.kernel,
                stride: c.stride,
                padding: (c.kernel - c.stride) / 2,
                weight: vec![T::zero(); c.out_channels * ch * c.kernel * c.kernel],
                bias: vec![T::zero(); c.out_channels],
            }));
            layers.push(Layer::Relu);
            ch = c.out_channels;
        }
        let (h, w) = *sizes.last().expect("non-empty");
        layers.push(Layer::Flatten);
        let flat = ch * h * w;
        layers.push(linear("fc", flat, self.encoder_fc_width));
        layers.push(linear("head", self.encoder_fc_width, 2 * self.latent_dim));
        Ok(Sequential::new(layers))
    }

    fn build_decoder<T: Scalar>(&self) -> Result<Sequential<T>> {
        let sizes = self.spatial_sizes()?;
        let (h, w) = *sizes.last().expect("non-empty");
        let top = self
            .conv_layers
            .last()
            .map_or(self.input_shape.channels, |c| c.out_channels);
        let mut layers = vec![
            linear("fc1", self.latent_dim, self.encoder_fc_width),
            Layer::Relu,
            linear("fc2", self.encoder_fc_width, top * h * w),
            Layer::Relu,
            Layer::Unflatten {
                channels: top,
                height: h,
                width: w,
            },
        ];
        let n = self.conv_layers.len();
        let mut ch = top;
        for i in (0..n).rev() {
            let c = &self.conv_layers[i];
            let out = if i == 0 {
                self.input_shape.channels
            } else {
                self.conv_layers[i - 1].out_channels
            };
            layers.push(Layer::Deconv(ConvTranspose2d {
                name: format!("deconv{}", n - i),
                in_channels: ch,
                out_channels: out,
                kernel: c.kernel,
                stride: c.stride,
                padding: (c.kernel - c.stride) / 2,
                weight: vec![T::zero(); ch * out * c.kernel * c.kernel],
                bias: vec![T::zero(); out],
            }));
            if i > 0 {
                layers.push(Layer::Relu);
            }
            ch = out;
        }
        layers.push(Layer::Flatten);
        Ok(Sequential::new(layers))
    }

    fn build_discriminator<T: Scalar>(&self) -> Sequential<T> {
        let mut layers = Vec::new();
        let mut width = self.latent_dim;
        for i in 0..self.discriminator_layers {
            layers.push(linear(&format!("hidden{}", i + 1), width, self.discriminator_width));
            layers.push(match self.discriminator_activation {
                Activation::Relu => Layer::Relu,
                Activation::LeakyRelu { .. } => Layer::LeakyRelu(self.slope()),
            });
            width = self.discriminator_width;
        }
        layers.push(linear("out", width, 2));
        Sequential::new(layers)
    }
}

fn linear<T: Scalar>(name: &str, input: usize, output: usize) -> Layer<T> {
    Layer::Linear(Linear {
        name: name.to_string(),
        in_features: input,
        out_features: output,
        weight: vec![T::zero(); input * output],
        bias: vec![T::zero(); output],
    })
}

/// Which of the three networks a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Net {
    Encoder,
    Decoder,
    Discriminator,
}

impl Net {
    pub const ALL: [Net; 3] = [Net::Encoder, Net::Decoder, Net::Discriminator];

    pub fn name(self) -> &'static str {
        match self {
            Net::Encoder => "encoder",
            Net::Decoder => "decoder",
            Net::Discriminator => "discriminator",
        }
    }
}

/// Encoder, decoder and discriminator parameters with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T = f32> {
    pub spec: ArchitectureSpec,
    pub seed: u64,
    pub encoder: Sequential<T>,
    pub decoder: Sequential<T>,
    pub discriminator: Sequential<T>,
}

/// Encoder outputs for a batch: row-major `B × d` means and log-variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorBatch<T> {
    pub mean: Vec<T>,
    pub log_variance: Vec<T>,
    pub batch: usize,
    pub dim: usize,
}

impl<T: Scalar> PosteriorBatch<T> {
    fn from_head(out: &[T], batch: usize, dim: usize) -> Self {
        let mut mean = Vec::with_capacity(batch * dim);
        let mut log_variance = Vec::with_capacity(batch * dim);
        for row in out.chunks(2 * dim) {
            mean.extend_from_slice(&row[..dim]);
            log_variance.extend_from_slice(&row[dim..]);
        }
        Self {
            mean,
            log_variance,
            batch,
            dim,
        }
    }

    pub fn posteriors(&self) -> Vec<GaussianPosterior> {
        (0..self.batch)
            .map(|i| {
                let r = i * self.dim..(i + 1) * self.dim;
                GaussianPosterior {
                    mean: self.mean[r.clone()].iter().map(|v| v.f64()).collect(),
                    log_variance: self.log_variance[r].iter().map(|v| v.f64()).collect(),
                }
            })
            .collect()
    }
}

impl<T: Scalar> ModelBundle<T> {
    /// Builds and initialises all three networks. Two calls with the same
    /// spec and seed give bit-identical bundles.
    pub fn new(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut encoder = spec.build_encoder()?;
        let mut decoder = spec.build_decoder()?;
        let mut discriminator = spec.build_discriminator();
        let init = SeedStream::new(seed).derive(tags::INIT);
        encoder.init_fan_in(&init.derive(0));
        decoder.init_fan_in(&init.derive(1));
        discriminator.init_fan_in(&init.derive(2));
        if let Some(Layer::Linear(out)) = discriminator.layers.last_mut() {
            out.weight.iter_mut().for_each(|w| *w = T::zero());
            out.bias.iter_mut().for_each(|w| *w = T::zero());
        }
        Ok(Self {
            spec,
            seed,
            encoder,
            decoder,
            discriminator,
        })
    }

    pub fn net(&self, which: Net) -> &Sequential<T> {
        match which {
            Net::Encoder => &self.encoder,
            Net::Decoder => &self.decoder,
            Net::Discriminator => &self.discriminator,
        }
    }

    pub fn net_mut(&mut self, which: Net) -> &mut Sequential<T> {
        match which {
            Net::Encoder => &mut self.encoder,
            Net::Decoder => &mut self.decoder,
            Net::Discriminator => &mut self.discriminator,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelBundle<U> {
        ModelBundle {
            spec: self.spec.clone(),
            seed: self.seed,
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
            discriminator: self.discriminator.cast(),
        }
    }

    pub fn pixels(&self) -> usize {
        self.spec.input_shape.pixels()
    }

    fn image_act(&self, images: &[T]) -> Result<(Act<T>, usize)> {
        let p = self.pixels();
        if images.is_empty() || !images.len().is_multiple_of(p) {
            return Err(Error::dim(format!(
                "{} pixel values do not form images of {p} pixels",
                images.len()
            )));
        }
        let b = images.len() / p;
        let s = self.spec.input_shape;
        let act = if s.channels == 1 {
            Act::spatial(images.to_vec(), 1, b, s.height, s.width)
        } else {
            let flat = Act::flat(images.to_vec(), b, p);
            Sequential::new(vec![Layer::Unflatten {
                channels: s.channels,
                height: s.height,
                width: s.width,
            }])
            .forward(flat, None)?
        };
        Ok((act, b))
    }

    /// Encoder pass on row-major images (per image `c, h, w` order), with an
    /// optional tape for back-propagation.
    pub fn encode_batch(&self, images: &[T], tape: Option<&mut Tape<T>>) -> Result<PosteriorBatch<T>> {
        let (act, b) = self.image_act(images)?;
        let out = self.encoder.forward(act, tape)?;
        Ok(PosteriorBatch::from_head(&out.data, b, self.spec.latent_dim))
    }

    /// Decoder pass; returns `B × pixels` logits, per image in `c, h, w` order.
    pub fn decode_batch(&self, codes: &[T], tape: Option<&mut Tape<T>>) -> Result<Vec<T>> {
        let d = self.spec.latent_dim;
        if codes.is_empty() || !codes.len().is_multiple_of(d) {
            return Err(Error::dim(format!("{} code values for width {d}", codes.len())));
        }
        let b = codes.len() / d;
        Ok(self.decoder.forward(Act::flat(codes.to_vec(), b, d), tape)?.data)
    }

    /// Discriminator pass; returns `B × 2` logits (class 0 = drawn from q(z)).
    pub fn discriminate_batch(&self, codes: &[T], tape: Option<&mut Tape<T>>) -> Result<Vec<T>> {
        let d = self.spec.latent_dim;
        if codes.is_empty() || !codes.len().is_multiple_of(d) {
            return Err(Error::dim(format!("{} code values for width {d}", codes.len())));
        }
        let b = codes.len() / d;
        Ok(self.discriminator.forward(Act::flat(codes.to_vec(), b, d), tape)?.data)
    }

    pub fn param_count(&self, which: Net) -> usize {
        self.net(which).param_count()
    }

    /// Cheap order-sensitive fingerprint of one network's parameters.
    pub fn fingerprint(&self, which: Net) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for p in self.net(which).params() {
            for v in p.values {
                h = (h ^ v.f64().to_bits()).wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

impl ModelBundle<f32> {
    pub fn encode(&self, images: &[f32]) -> Result<Vec<GaussianPosterior>> {
        Ok(self.encode_batch(images, None)?.posteriors())
    }

    pub fn decode(&self, codes: &LatentBatch) -> Result<Vec<f32>> {
        if codes.dim != self.spec.latent_dim {
            return Err(Error::dim(format!(
                "codes have width {}, model expects {}",
                codes.dim, self.spec.latent_dim
            )));
        }
        let c: Vec<f32> = codes.values.iter().map(|&v| v as f32).collect();
        self.decode_batch(&c, None)
    }

    pub fn discriminate(&self, codes: &LatentBatch) -> Result<Vec<f64>> {
        if codes.dim != self.spec.latent_dim {
            return Err(Error::dim(format!(
                "codes have width {}, model expects {}",
                codes.dim, self.spec.latent_dim
            )));
        }
        let c: Vec<f32> = codes.values.iter().map(|&v| v as f32).collect();
        Ok(self.discriminate_batch(&c, None)?.into_iter().map(f64::from).collect())
    }

    /// Writes spec, seed and every parameter tensor into `archive`.
    pub fn write_into(&self, archive: &mut Archive) -> Result<()> {
        archive.put_json(
            "bundle.json",
            &serde_json::json!({ "spec": self.spec, "seed": self.seed }),
        )?;
        for which in Net::ALL {
            for p in self.net(which).params() {
                archive.put_array(format!("{}/{}.{}", which.name(), p.name, p.suffix), p.values.to_vec());
            }
        }
        Ok(())
    }

    /// Rebuilds a bundle from an archive, checking every tensor's length.
    pub fn read_from(archive: &Archive) -> Result<Self> {
        #[derive(Deserialize)]
        struct Head {
            spec: ArchitectureSpec,
            seed: u64,
        }
        let head: Head = archive.json("bundle.json")?;
        let mut bundle = Self::new(head.spec, head.seed)?;
        for which in Net::ALL {
            let names: Vec<String> = bundle
                .net(which)
                .params()
                .iter()
                .map(|p| format!("{}/{}.{}", which.name(), p.name, p.suffix))
                .collect();
            for (name, slot) in names.iter().zip(bundle.net_mut(which).params_mut()) {
                let values = archive.array(name)?;
                if values.len() != slot.len() {
                    return Err(Error::format(
                        name.clone(),
                        format!("expected {} values, found {}", slot.len(), values.len()),
                    ));
                }
                slot.copy_from_slice(values);
            }
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut a = Archive::default();
        self.write_into(&mut a)?;
        a.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&Archive::read(path)?)
    }
}

/// In-memory image of a checkpoint: JSON documents plus little-endian `f32`
/// arrays keyed by name. Stored on disk as a zip archive; arrays live under
/// `params/<name>.f32`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    pub documents: BTreeMap<String, serde_json::Value>,
    pub arrays: BTreeMap<String, Vec<f32>>,
}

const ARRAY_PREFIX: &str = "params/";
const ARRAY_SUFFIX: &str = ".f32";

impl Archive {
    pub fn put_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        self.documents.insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn put_array(&mut self, name: impl Into<String>, values: Vec<f32>) {
        self.arrays.insert(name.into(), values);
    }

    pub fn json<D: serde::de::DeserializeOwned>(&self, name: &str) -> Result<D> {
        let v = self
            .documents
            .get(name)
            .ok_or_else(|| Error::format(name, "missing entry"))?;
        serde_json::from_value(v.clone()).map_err(|e| Error::format(name, e.to_string()))
    }

    pub fn array(&self, name: &str) -> Result<&[f32]> {
        self.arrays
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::format(name, "missing entry"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut zip = zip::ZipWriter::new(std::io::BufWriter::new(file));
        let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Stored);
        let zerr = |e: zip::result::ZipError| Error::io(path, std::io::Error::other(e));
        for (name, doc) in &self.documents {
            zip.start_file(name.as_str(), opts).map_err(zerr)?;
            let bytes = serde_json::to_vec_pretty(doc)?;
            zip.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        }
        for (name, values) in &self.arrays {
            zip.start_file(format!("{ARRAY_PREFIX}{name}{ARRAY_SUFFIX}"), opts)
                .map_err(zerr)?;
            let mut bytes = Vec::with_capacity(values.len() * 4);
            for v in values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            zip.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        }
        zip.finish().map_err(zerr)?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Reads a whole archive; any damage is reported before anything is
    /// returned.
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut zip = zip::ZipArchive::new(std::io::BufReader::new(file))
            .map_err(|e| Error::format(name.clone(), e.to_string()))?;
        let mut out = Archive::default();
        for i in 0..zip.len() {
            let mut entry = zip
                .by_index(i)
                .map_err(|e| Error::format(name.clone(), e.to_string()))?;
            let entry_name = entry.name().to_string();
            let mut bytes = Vec::with_capacity(entry.size() as usize);
            entry
                .read_to_end(&mut bytes)
                .map_err(|e| Error::format(entry_name.clone(), e.to_string()))?;
            if let Some(key) = entry_name
                .strip_prefix(ARRAY_PREFIX)
                .and_then(|k| k.strip_suffix(ARRAY_SUFFIX))
            {
                if bytes.len() % 4 != 0 {
                    return Err(Error::format(entry_name, "length is not a multiple of 4 bytes"));
                }
                let values = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                out.arrays.insert(key.to_string(), values);
            } else {
                let doc = serde_json::from_slice(&bytes).map_err(|e| Error::format(entry_name.clone(), e.to_string()))?;
                out.documents.insert(entry_name, doc);
            }
        }
        Ok(out)
    }
}
