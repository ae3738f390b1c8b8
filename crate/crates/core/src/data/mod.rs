//! Factor-grid image datasets: the procedural mini-shapes set, the public
//! 2D Shapes archive, and a generic `.npz` interchange layout.

pub mod npy;
mod shapes;

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub use shapes::{generate_mini_shapes, render_mini_shape, MINI_SHAPES_SIDE};

use npy::{NpyArray, NpyData};

/// Names and value counts of the ground-truth factors.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FactorSpec {
    pub names: Vec<String>,
    pub cardinalities: Vec<usize>,
}

impl FactorSpec {
    pub fn new(names: &[&str], cardinalities: &[usize]) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            cardinalities: cardinalities.to_vec(),
        }
    }

    /// Number of factors `K`.
    pub fn len(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinalities.is_empty()
    }

    /// Size of the full factor grid.
    pub fn grid_size(&self) -> usize {
        self.cardinalities.iter().product()
    }

    /// Factor classes of grid row `i`, last factor varying fastest.
    pub fn classes_of(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for k in (0..self.len()).rev() {
            out[k] = i % self.cardinalities[k];
            i /= self.cardinalities[k];
        }
        out
    }
}

/// Images with their ground-truth factor classes.
///
/// Pixels are held as bytes and scaled by `pixel_scale` on access, which
/// keeps the 737,280-image archive at one byte per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorDataset {
    pub name: String,
    pub spec: FactorSpec,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    images: Vec<u8>,
    pixel_scale: f32,
    /// Row-major `N × K`.
    factor_classes: Vec<u32>,
    /// `strata[k][v]` lists the rows whose factor `k` equals `v`.
    strata: Vec<Vec<Vec<u32>>>,
}

impl FactorDataset {
    /// Builds a dataset from per-image pixel rows (`c, h, w` order).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        spec: FactorSpec,
        (height, width, channels): (usize, usize, usize),
        images: Vec<u8>,
        pixel_scale: f32,
        factor_classes: Vec<u32>,
    ) -> Result<Self> {
        let pixels = height * width * channels;
        if pixels == 0 || images.is_empty() || !images.len().is_multiple_of(pixels) {
            return Err(Error::format("imgs", "image buffer does not hold whole images"));
        }
        let n = images.len() / pixels;
        let k = spec.len();
        if factor_classes.len() != n * k {
            return Err(Error::format(
                "latents_classes",
                format!("expected {n} x {k} classes, found {}", factor_classes.len()),
            ));
        }
        let mut strata: Vec<Vec<Vec<u32>>> = spec.cardinalities.iter().map(|&c| vec![Vec::new(); c]).collect();
        if k > 0 {
            for (i, row) in factor_classes.chunks(k).enumerate() {
                for (f, &v) in row.iter().enumerate() {
                    let slot = strata[f].get_mut(v as usize).ok_or_else(|| {
                        Error::format(
                            "latents_classes",
                            format!("row {i} factor {f} has class {v} beyond cardinality"),
                        )
                    })?;
                    slot.push(i as u32);
                }
            }
        }
        Ok(Self {
            name: name.into(),
            spec,
            height,
            width,
            channels,
            images,
            pixel_scale,
            factor_classes,
            strata,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len() / self.pixels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn has_factors(&self) -> bool {
        !self.spec.is_empty()
    }

    pub fn num_factors(&self) -> usize {
        self.spec.len()
    }

    pub fn factor(&self, row: usize, k: usize) -> usize {
        self.factor_classes[row * self.spec.len() + k] as usize
    }

    pub fn factors_of(&self, row: usize) -> &[u32] {
        let k = self.spec.len();
        &self.factor_classes[row * k..(row + 1) * k]
    }

    pub fn raw_image(&self, row: usize) -> &[u8] {
        let p = self.pixels();
        &self.images[row * p..(row + 1) * p]
    }

    pub fn pixel_scale(&self) -> f32 {
        self.pixel_scale
    }

    /// Writes image `row`, scaled into `[0, 1]`, to `out`.
    pub fn image_into(&self, row: usize, out: &mut [f32]) {
        for (o, &v) in out.iter_mut().zip(self.raw_image(row)) {
            *o = v as f32 * self.pixel_scale;
        }
    }

    /// Row-major float batch of the given rows.
    pub fn batch(&self, rows: &[usize]) -> Vec<f32> {
        let p = self.pixels();
        let mut out = vec![0.0; rows.len() * p];
        for (chunk, &r) in out.chunks_mut(p).zip(rows) {
            self.image_into(r, chunk);
        }
        out
    }

    /// Mean pixel intensity over the whole dataset.
    pub fn mean_intensity(&self) -> f64 {
        let total: u64 = self.images.iter().map(|&v| v as u64).sum();
        total as f64 * self.pixel_scale as f64 / self.images.len() as f64
    }

    /// Rows whose factor `k` has class `value`.
    pub fn stratum(&self, k: usize, value: usize) -> Result<&[u32]> {
        let per = self
            .strata
            .get(k)
            .ok_or_else(|| Error::Index(format!("factor {k} of {}", self.spec.len())))?;
        per.get(value)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Index(format!("class {value} of factor {k} (cardinality {})", per.len())))
    }

    /// SHA-256 over shape, factor spec, pixels and classes.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}x{}x{}", self.height, self.width, self.channels));
        h.update(serde_json::to_vec(&self.spec).expect("serialisable"));
        h.update(self.pixel_scale.to_le_bytes());
        h.update(&self.images);
        for c in &self.factor_classes {
            h.update(c.to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }

    /// Writes the dataset in the `.npz` layout read by [`load_factor_archive`]:
    /// `imgs` (`u8`, `N × H × W` or `N × C × H × W`), `latents_classes`
    /// (`i64`, `N × K`) and `latents_values` (the classes as `f64`).
    pub fn export_npz(&self, path: &Path) -> Result<()> {
        let n = self.len();
        let k = self.spec.len();
        let mut shape = vec![n];
        if self.channels != 1 {
            shape.push(self.channels);
        }
        shape.extend([self.height, self.width]);
        let imgs = if self.pixel_scale == 1.0 {
            self.images.clone()
        } else {
            self.images
                .iter()
                .map(|&v| ((v as f32 * self.pixel_scale) * 255.0).round() as u8)
                .collect()
        };
        let imgs = NpyArray::new(shape, NpyData::U8(imgs));
        let classes = NpyArray::new(
            vec![n, k],
            NpyData::I64(self.factor_classes.iter().map(|&c| c as i64).collect()),
        );
        let values = NpyArray::new(
            vec![n, k],
            NpyData::F64(self.factor_classes.iter().map(|&c| c as f64).collect()),
        );
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut entries = vec![("imgs", &imgs)];
        if k > 0 {
            entries.push(("latents_classes", &classes));
            entries.push(("latents_values", &values));
        }
        npy::write_npz(std::io::BufWriter::new(file), &entries).map_err(|e| Error::io(path, e))
    }
}

/// `L` images drawn uniformly with replacement from the rows where factor
/// `k` has class `value`. Returns the chosen row indices.
pub fn sample_fixed_factor_rows(
    dataset: &FactorDataset,
    k: usize,
    value: usize,
    l: usize,
    stream: &mut SeedStream,
) -> Result<Vec<usize>> {
    let rows = dataset.stratum(k, value)?;
    if rows.is_empty() {
        return Err(Error::Index(format!("factor {k} class {value} has no rows")));
    }
    Ok((0..l).map(|_| rows[stream.below(rows.len())] as usize).collect())
}

/// Image batch for [`sample_fixed_factor_rows`] with a seed.
pub fn sample_fixed_factor_batch(dataset: &FactorDataset, k: usize, value: usize, l: usize, seed: u64) -> Result<Vec<f32>> {
    let rows = sample_fixed_factor_rows(dataset, k, value, l, &mut SeedStream::new(seed))?;
    Ok(dataset.batch(&rows))
}

pub const DSPRITES_N: usize = 737_280;
pub const DSPRITES_CARDINALITIES: [usize; 5] = [3, 6, 40, 32, 32];
pub const DSPRITES_FACTORS: [&str; 5] = ["shape", "scale", "orientation", "pos_x", "pos_y"];

fn read_archive(path: &Path, wanted: &[&str]) -> Result<Vec<Option<NpyArray>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    npy::read_npz_entries(std::io::BufReader::new(file), wanted, &path.display().to_string())
}

fn image_bytes(arr: NpyArray) -> Result<(Vec<u8>, f32)> {
    match arr.data {
        NpyData::U8(v) => {
            let max = v.iter().copied().max().unwrap_or(0);
            Ok((v, if max <= 1 { 1.0 } else { 1.0 / 255.0 }))
        }
        NpyData::F32(v) => floats_to_bytes(v.into_iter().map(f64::from)),
        NpyData::F64(v) => floats_to_bytes(v.into_iter()),
        _ => Err(Error::format("imgs", "images must be u8 or floating point")),
    }
}

fn floats_to_bytes(v: impl Iterator<Item = f64>) -> Result<(Vec<u8>, f32)> {
    v.map(|x| {
        if (0.0..=1.0).contains(&x) {
            Ok((x * 255.0).round() as u8)
        } else {
            Err(Error::format("imgs", format!("pixel value {x} outside [0, 1]")))
        }
    })
    .collect::<Result<Vec<u8>>>()
    .map(|b| (b, 1.0 / 255.0))
}

/// Loads the published 2D Shapes archive: `imgs` (`u8`, `737280 × 64 × 64`)
/// and `latents_classes` (`737280 × 6`, first column constant). Any other
/// shape is rejected with the offending entry named.
pub fn load_dsprites(path: &Path) -> Result<FactorDataset> {
    let mut entries = read_archive(path, &["imgs", "latents_classes", "latents_values"])?;
    let values = entries.pop().flatten().ok_or_else(|| Error::format("latents_values", "missing entry"))?;
    let classes = entries.pop().flatten().ok_or_else(|| Error::format("latents_classes", "missing entry"))?;
    let imgs = entries.pop().flatten().ok_or_else(|| Error::format("imgs", "missing entry"))?;
    if imgs.shape != [DSPRITES_N, 64, 64] {
        return Err(Error::format("imgs", format!("shape {:?}, expected [737280, 64, 64]", imgs.shape)));
    }
    if classes.shape != [DSPRITES_N, 6] {
        return Err(Error::format(
            "latents_classes",
            format!("shape {:?}, expected [737280, 6]", classes.shape),
        ));
    }
    if values.shape != [DSPRITES_N, 6] {
        return Err(Error::format(
            "latents_values",
            format!("shape {:?}, expected [737280, 6]", values.shape),
        ));
    }
    let raw = classes.data.to_i64("latents_classes")?;
    let mut out = Vec::with_capacity(DSPRITES_N * 5);
    for (i, row) in raw.chunks(6).enumerate() {
        if row[0] != raw[0] {
            return Err(Error::format("latents_classes", format!("row {i}: first column is not constant")));
        }
        for (k, &c) in row[1..].iter().enumerate() {
            if c < 0 || c as usize >= DSPRITES_CARDINALITIES[k] {
                return Err(Error::format(
                    "latents_classes",
                    format!("row {i}: class {c} outside factor {k}'s range"),
                ));
            }
            out.push(c as u32);
        }
    }
    let (images, scale) = image_bytes(imgs)?;
    FactorDataset::new(
        "dsprites",
        FactorSpec::new(&DSPRITES_FACTORS, &DSPRITES_CARDINALITIES),
        (64, 64, 1),
        images,
        scale,
        out,
    )
}

/// Loads any archive in the interchange layout. `latents_classes` is
/// optional; constant columns are dropped and cardinalities are taken as
/// `max + 1`. Without it the dataset has no factors.
pub fn load_factor_archive(path: &Path) -> Result<FactorDataset> {
    let mut entries = read_archive(path, &["imgs", "latents_classes"])?;
    let classes = entries.pop().flatten();
    let imgs = entries.pop().flatten().ok_or_else(|| Error::format("imgs", "missing entry"))?;
    let (n, c, h, w) = match imgs.shape[..] {
        [n, h, w] => (n, 1, h, w),
        [n, c, h, w] => (n, c, h, w),
        _ => return Err(Error::format("imgs", format!("shape {:?} is not N x H x W", imgs.shape))),
    };
    let (spec, factor_classes) = match classes {
        None => (FactorSpec::new(&[], &[]), Vec::new()),
        Some(arr) => {
            if arr.shape.len() != 2 || arr.shape[0] != n {
                return Err(Error::format(
                    "latents_classes",
                    format!("shape {:?} does not match {n} images", arr.shape),
                ));
            }
            let cols = arr.shape[1];
            let raw = arr.data.to_i64("latents_classes")?;
            if raw.iter().any(|&v| v < 0) {
                return Err(Error::format("latents_classes", "negative class"));
            }
            let keep: Vec<usize> = (0..cols)
                .filter(|&j| raw.chunks(cols).any(|r| r[j] != raw[j]))
                .collect();
            let cards: Vec<usize> = keep
                .iter()
                .map(|&j| raw.chunks(cols).map(|r| r[j] as usize).max().unwrap_or(0) + 1)
                .collect();
            let names: Vec<String> = keep.iter().map(|j| format!("factor{j}")).collect();
            let classes = raw
                .chunks(cols)
                .flat_map(|r| keep.iter().map(|&j| r[j] as u32).collect::<Vec<_>>())
                .collect();
            (
                FactorSpec {
                    names,
                    cardinalities: cards,
                },
                classes,
            )
        }
    };
    let (images, scale) = image_bytes(imgs)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "archive".into());
    FactorDataset::new(name, spec, (h, w, c), images, scale, factor_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_of_is_mixed_radix() {
        let s = FactorSpec::new(&["a", "b"], &[2, 3]);
        assert_eq!(s.classes_of(0), vec![0, 0]);
        assert_eq!(s.classes_of(4), vec![1, 1]);
        assert_eq!(s.grid_size(), 6);
    }

    #[test]
    fn fixed_factor_batches_respect_the_factor() {
        let ds = generate_mini_shapes();
        assert_eq!(ds.len(), 3 * 3 * 8 * 8);
        assert_eq!(ds.stratum(0, 1).unwrap().len(), 192);
        let mut s = SeedStream::new(3);
        let rows = sample_fixed_factor_rows(&ds, 2, 5, 2000, &mut s).unwrap();
        assert!(rows.iter().all(|&r| ds.factor(r, 2) == 5));
        assert!(matches!(sample_fixed_factor_rows(&ds, 4, 0, 1, &mut s), Err(Error::Index(_))));
        assert!(matches!(sample_fixed_factor_rows(&ds, 1, 3, 1, &mut s), Err(Error::Index(_))));
        let imgs = sample_fixed_factor_batch(&ds, 0, 0, 3, 1).unwrap();
        assert_eq!(imgs.len(), 3 * 1024);
    }
}
