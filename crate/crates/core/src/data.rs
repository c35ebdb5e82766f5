//! Dataset ingestion and preparation: IDX binary files, Non-IID
//! partitioning across devices, train/validation splits, anomaly-set
//! generators (noisy grid, occlusion circle, synthetic blobs), and
//! dirty-case contamination of local data.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds::{self, STREAM_BLOBS, STREAM_DIRTY, STREAM_SPLIT};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Labeled grayscale images with pixels in [0,1]. Labels are implicit class
/// information and are never consumed by training; the category names the
/// set as a whole (e.g. "mnist", "noisy", "fashion").
#[derive(Debug, Clone)]
pub struct ImageSet {
    /// One image per row, row-major pixels, shape (n, rows·cols).
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
    pub category: String,
}

impl ImageSet {
    pub fn new(
        images: Array2<f64>,
        labels: Vec<u8>,
        rows: usize,
        cols: usize,
        category: impl Into<String>,
    ) -> Result<Self> {
        if images.nrows() != labels.len() {
            return Err(Error::Inconsistent(format!(
                "{} images but {} labels",
                images.nrows(),
                labels.len()
            )));
        }
        if images.ncols() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                got: images.ncols(),
            });
        }
        if labels.iter().any(|&y| y > 9) {
            return Err(Error::InvalidArgument("labels must be in 0..=9".into()));
        }
        if images.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidArgument("pixels must be in [0,1]".into()));
        }
        Ok(Self {
            images,
            labels,
            rows,
            cols,
            category: category.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> ArrayView1<f64> {
        self.images.row(i)
    }

    /// Copies the given rows (in the given order) into a new set.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            images: self.images.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rows: self.rows,
            cols: self.cols,
            category: self.category.clone(),
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = category.into();
        self
    }
}

/// One device's local data: disjoint train and validation splits.
#[derive(Debug, Clone)]
pub struct DevicePartition {
    pub device_id: usize,
    pub train: ImageSet,
    pub validation: ImageSet,
}

impl DevicePartition {
    pub fn total_len(&self) -> usize {
        self.train.len() + self.validation.len()
    }
}

fn read_u32_be<R: Read>(r: &mut R, have: usize, need: usize) -> Result<u32> {
    r.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        expected: need,
        got: have,
    })
}

/// Parses the IDX image/label byte streams (big-endian headers, magic
/// 0x00000803 for images and 0x00000801 for labels). Pixel bytes are
/// normalized to [0,1] by division by 255.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8], category: impl Into<String>) -> Result<ImageSet> {
    let mut ir = image_bytes;
    let magic = read_u32_be(&mut ir, image_bytes.len(), 16)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image stream magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(&mut ir, image_bytes.len(), 16)? as usize;
    let rows = read_u32_be(&mut ir, image_bytes.len(), 16)? as usize;
    let cols = read_u32_be(&mut ir, image_bytes.len(), 16)? as usize;
    let expected = 16 + n * rows * cols;
    if image_bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            got: image_bytes.len(),
        });
    }
    if image_bytes.len() > expected {
        return Err(Error::Format(format!(
            "image stream has {} trailing bytes",
            image_bytes.len() - expected
        )));
    }

    let mut lr = label_bytes;
    let lmagic = read_u32_be(&mut lr, label_bytes.len(), 8)?;
    if lmagic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label stream magic {lmagic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"
        )));
    }
    let ln = read_u32_be(&mut lr, label_bytes.len(), 8)? as usize;
    let lexpected = 8 + ln;
    if label_bytes.len() < lexpected {
        return Err(Error::Truncated {
            expected: lexpected,
            got: label_bytes.len(),
        });
    }
    if label_bytes.len() > lexpected {
        return Err(Error::Format(format!(
            "label stream has {} trailing bytes",
            label_bytes.len() - lexpected
        )));
    }
    if n != ln {
        return Err(Error::Inconsistent(format!(
            "{n} images but {ln} labels"
        )));
    }

    let pixels = &image_bytes[16..];
    let images = Array2::from_shape_fn((n, rows * cols), |(i, j)| {
        f64::from(pixels[i * rows * cols + j]) / 255.0
    });
    ImageSet::new(images, label_bytes[8..].to_vec(), rows, cols, category)
}

/// Loads an image/label IDX file pair from disk.
pub fn load_idx<P: AsRef<Path>>(images: P, labels: P, category: impl Into<String>) -> Result<ImageSet> {
    let ib = std::fs::read(images)?;
    let lb = std::fs::read(labels)?;
    parse_idx(&ib, &lb, category)
}

/// Writes a set back to the IDX pair, quantizing pixels to `round(p·255)`.
pub fn write_idx<W: Write>(set: &ImageSet, images: &mut W, labels: &mut W) -> Result<()> {
    images.write_u32::<BigEndian>(IDX_IMAGE_MAGIC)?;
    images.write_u32::<BigEndian>(set.len() as u32)?;
    images.write_u32::<BigEndian>(set.rows as u32)?;
    images.write_u32::<BigEndian>(set.cols as u32)?;
    for &p in set.images.iter() {
        images.write_u8((p * 255.0).round().clamp(0.0, 255.0) as u8)?;
    }
    labels.write_u32::<BigEndian>(IDX_LABEL_MAGIC)?;
    labels.write_u32::<BigEndian>(set.len() as u32)?;
    for &y in &set.labels {
        labels.write_u8(y)?;
    }
    Ok(())
}

pub fn save_idx<P: AsRef<Path>>(set: &ImageSet, images: P, labels: P) -> Result<()> {
    let mut iw = std::io::BufWriter::new(std::fs::File::create(images)?);
    let mut lw = std::io::BufWriter::new(std::fs::File::create(labels)?);
    write_idx(set, &mut iw, &mut lw)
}

/// Scatters samples across devices by label: a sample with label `y` goes
/// to device `y` with probability `p`, otherwise uniformly to one of the
/// other devices. Deterministic given (data order, p, seed).
pub fn partition_non_iid(
    data: &ImageSet,
    num_devices: usize,
    p: f64,
    seed: u64,
) -> Result<Vec<ImageSet>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability must be in [0,1], got {p}"
        )));
    }
    if num_devices < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 devices to partition".into(),
        ));
    }
    if data.labels.iter().any(|&y| (y as usize) >= num_devices) {
        return Err(Error::InvalidArgument(format!(
            "labels must be < num_devices ({num_devices}); the partition maps label n to device n"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); num_devices];
    for (i, &y) in data.labels.iter().enumerate() {
        let home = y as usize;
        let dev = if rng.random::<f64>() < p {
            home
        } else {
            let k = rng.random_range(0..num_devices - 1);
            if k >= home {
                k + 1
            } else {
                k
            }
        };
        assignment[dev].push(i);
    }
    Ok(assignment.iter().map(|idx| data.select(idx)).collect())
}

/// Shuffled split with `validation size = floor(n·val/(train+val))`.
/// Both outputs preserve source order.
pub fn split_train_val(
    data: &ImageSet,
    train_ratio: u32,
    val_ratio: u32,
    seed: u64,
) -> Result<(ImageSet, ImageSet)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty set".into()));
    }
    if train_ratio == 0 || val_ratio == 0 {
        return Err(Error::InvalidArgument("split ratios must be positive".into()));
    }
    let n = data.len();
    let val_count = n * val_ratio as usize / (train_ratio + val_ratio) as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut val_idx = indices[..val_count].to_vec();
    let mut train_idx = indices[val_count..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((data.select(&train_idx), data.select(&val_idx)))
}

/// Partition followed by a per-device 4:1-style split.
pub fn build_device_partitions(
    data: &ImageSet,
    num_devices: usize,
    p: f64,
    train_ratio: u32,
    val_ratio: u32,
    seed: u64,
) -> Result<Vec<DevicePartition>> {
    let parts = partition_non_iid(data, num_devices, p, seed)?;
    parts
        .into_iter()
        .enumerate()
        .map(|(device_id, set)| {
            let split_seed = seeds::derive(seed, &[STREAM_SPLIT, device_id as u64]);
            let (train, validation) = split_train_val(&set, train_ratio, val_ratio, split_seed)?;
            Ok(DevicePartition {
                device_id,
                train,
                validation,
            })
        })
        .collect()
}

/// White spots on a periodic grid: pixels at `(r, c)` with
/// `r ≡ phase_r (mod period)` and `c ≡ phase_c (mod period)` are set to 1.
pub fn noisy_grid(data: &ImageSet, period: usize, phase_r: usize, phase_c: usize) -> ImageSet {
    let mut out = data.clone();
    let (rows, cols) = (out.rows, out.cols);
    for mut img in out.images.rows_mut() {
        for r in (phase_r % period..rows).step_by(period) {
            for c in (phase_c % period..cols).step_by(period) {
                img[r * cols + c] = 1.0;
            }
        }
    }
    out.category = "noisy".into();
    out
}

/// Noisy variant with the default every-10-pixels grid anchored at (0,0).
pub fn make_noisy(data: &ImageSet) -> ImageSet {
    noisy_grid(data, 10, 0, 0)
}

/// Dark circle: pixels `(r, c)` with `(c−cx)² + (r−cy)² ≤ radius²` are set
/// to 0. The center is given as (column, row).
pub fn occlude_circle(data: &ImageSet, cx: f64, cy: f64, radius: f64) -> ImageSet {
    let mut out = data.clone();
    let (rows, cols) = (out.rows, out.cols);
    let r2 = radius * radius;
    for mut img in out.images.rows_mut() {
        for r in 0..rows {
            for c in 0..cols {
                let dc = c as f64 - cx;
                let dr = r as f64 - cy;
                if dc * dc + dr * dr <= r2 {
                    img[r * cols + c] = 0.0;
                }
            }
        }
    }
    out.category = "occluded".into();
    out
}

/// Occluded variant with the default 5-pixel-diameter circle at (14,20).
pub fn make_occluded(data: &ImageSet) -> ImageSet {
    occlude_circle(data, 14.0, 20.0, 2.5)
}

/// Synthetic anomaly images: one to three smooth gaussian bumps per image.
/// Serves as a stand-in anomaly category when no third dataset is on disk.
pub fn make_blobs(count: usize, rows: usize, cols: usize, seed: u64) -> ImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[STREAM_BLOBS]));
    let mut images = Array2::zeros((count, rows * cols));
    for mut img in images.rows_mut() {
        let n_blobs = rng.random_range(1..=3);
        for _ in 0..n_blobs {
            let cr = rng.random_range(4.0..rows as f64 - 4.0);
            let cc = rng.random_range(4.0..cols as f64 - 4.0);
            let sigma = rng.random_range(1.5..4.0);
            let amp = rng.random_range(0.6..1.0);
            let denom = 2.0 * sigma * sigma;
            for r in 0..rows {
                for c in 0..cols {
                    let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                    img[r * cols + c] += amp * (-d2 / denom).exp();
                }
            }
        }
        img.mapv_inplace(|p| p.clamp(0.0, 1.0));
    }
    ImageSet {
        images,
        labels: vec![0; count],
        rows,
        cols,
        category: "blob".into(),
    }
}

/// Where dirty samples are injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirtyTarget {
    /// Spread proportionally across train and validation.
    TrainAndValidation,
    /// Contaminate the train split only.
    TrainOnly,
}

/// Replaces `count` randomly chosen local samples with randomly chosen
/// anomaly samples. Sizes are unchanged; the swap is without replacement on
/// both sides.
pub fn inject_dirty(
    partition: &DevicePartition,
    anomalies: &ImageSet,
    count: usize,
    seed: u64,
    target: DirtyTarget,
) -> Result<DevicePartition> {
    let capacity = match target {
        DirtyTarget::TrainAndValidation => partition.total_len(),
        DirtyTarget::TrainOnly => partition.train.len(),
    };
    if count > capacity.min(anomalies.len()) {
        return Err(Error::InvalidArgument(format!(
            "cannot swap {count} samples: {capacity} local, {} anomalies",
            anomalies.len()
        )));
    }
    if anomalies.dim() != partition.train.dim() {
        return Err(Error::Shape {
            expected: partition.train.dim(),
            got: anomalies.dim(),
        });
    }
    let mut out = partition.clone();
    if count == 0 {
        return Ok(out);
    }

    let (train_count, val_count) = match target {
        DirtyTarget::TrainOnly => (count, 0),
        DirtyTarget::TrainAndValidation => {
            let t = count * partition.train.len() / partition.total_len();
            (t, count - t)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[STREAM_DIRTY, partition.device_id as u64]));
    let mut anomaly_idx: Vec<usize> = (0..anomalies.len()).collect();
    anomaly_idx.shuffle(&mut rng);
    let mut next_anomaly = anomaly_idx.into_iter();

    let mut swap_into = |set: &mut ImageSet, how_many: usize, rng: &mut ChaCha8Rng| {
        let mut local: Vec<usize> = (0..set.len()).collect();
        local.shuffle(rng);
        for &pos in local.iter().take(how_many) {
            let src = next_anomaly.next().expect("checked count");
            set.images.row_mut(pos).assign(&anomalies.images.row(src));
            set.labels[pos] = anomalies.labels[src];
        }
    };
    swap_into(&mut out.train, train_count, &mut rng);
    swap_into(&mut out.validation, val_count, &mut rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-built minimal IDX pair: one 28×28 zero image labeled 7.
    fn tiny_idx_pair() -> (Vec<u8>, Vec<u8>) {
        let mut ib = Vec::new();
        ib.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        ib.extend_from_slice(&1u32.to_be_bytes());
        ib.extend_from_slice(&28u32.to_be_bytes());
        ib.extend_from_slice(&28u32.to_be_bytes());
        ib.extend_from_slice(&[0u8; 28 * 28]);
        let mut lb = Vec::new();
        lb.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lb.extend_from_slice(&1u32.to_be_bytes());
        lb.push(7);
        (ib, lb)
    }

    fn checker_set(n: usize) -> ImageSet {
        let images = Array2::from_shape_fn((n, 28 * 28), |(i, j)| ((i + j) % 2) as f64);
        ImageSet::new(images, (0..n).map(|i| (i % 10) as u8).collect(), 28, 28, "mnist").unwrap()
    }

    #[test]
    fn parse_idx_minimal_pair() {
        let (ib, lb) = tiny_idx_pair();
        let set = parse_idx(&ib, &lb, "mnist").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.labels, vec![7]);
        assert!(set.images.iter().all(|&p| p == 0.0));
        assert_eq!((set.rows, set.cols), (28, 28));
    }

    #[test]
    fn parse_idx_rejects_wrong_magic() {
        let (mut ib, lb) = tiny_idx_pair();
        ib[..4].copy_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        assert!(matches!(parse_idx(&ib, &lb, "x"), Err(Error::Format(_))));
    }

    #[test]
    fn parse_idx_rejects_truncated_and_oversized_streams() {
        let (ib, lb) = tiny_idx_pair();
        assert!(matches!(
            parse_idx(&ib[..ib.len() - 5], &lb, "x"),
            Err(Error::Truncated { .. })
        ));
        let mut long = ib.clone();
        long.push(0);
        assert!(matches!(parse_idx(&long, &lb, "x"), Err(Error::Format(_))));
    }

    #[test]
    fn parse_idx_rejects_count_mismatch() {
        let (ib, mut lb) = tiny_idx_pair();
        lb[4..8].copy_from_slice(&2u32.to_be_bytes());
        lb.push(3);
        assert!(matches!(parse_idx(&ib, &lb, "x"), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn idx_round_trip() {
        let set = checker_set(5);
        let mut ib = Vec::new();
        let mut lb = Vec::new();
        write_idx(&set, &mut ib, &mut lb).unwrap();
        let back = parse_idx(&ib, &lb, "mnist").unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back.labels, set.labels);
        assert_eq!(back.images, set.images);
    }

    #[test]
    fn partition_degenerate_p_one_routes_by_label() {
        let set = checker_set(40);
        let parts = partition_non_iid(&set, 10, 1.0, 3).unwrap();
        for (dev, part) in parts.iter().enumerate() {
            assert!(part.labels.iter().all(|&y| y as usize == dev));
        }
        let total: usize = parts.iter().map(ImageSet::len).sum();
        assert_eq!(total, 40);
    }

    #[test]
    fn partition_conserves_samples_for_any_p() {
        let set = checker_set(101);
        for p in [0.0, 0.3, 0.9995] {
            let parts = partition_non_iid(&set, 10, p, 7).unwrap();
            let total: usize = parts.iter().map(ImageSet::len).sum();
            assert_eq!(total, 101);
        }
    }

    #[test]
    fn partition_is_deterministic() {
        let set = checker_set(60);
        let a = partition_non_iid(&set, 10, 0.9, 11).unwrap();
        let b = partition_non_iid(&set, 10, 0.9, 11).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.labels, y.labels);
            assert_eq!(x.images, y.images);
        }
    }

    #[test]
    fn partition_rejects_bad_probability() {
        let set = checker_set(10);
        assert!(partition_non_iid(&set, 10, 1.5, 0).is_err());
        assert!(partition_non_iid(&set, 10, -0.1, 0).is_err());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let set = checker_set(100);
        let (train, val) = split_train_val(&set, 4, 1, 5).unwrap();
        assert_eq!((train.len(), val.len()), (80, 20));

        let set7 = checker_set(7);
        let (train, val) = split_train_val(&set7, 4, 1, 5).unwrap();
        assert_eq!((train.len(), val.len()), (6, 1));
    }

    #[test]
    fn split_is_a_partition_of_the_input() {
        let set = checker_set(23);
        let (train, val) = split_train_val(&set, 4, 1, 9).unwrap();
        let mut got: Vec<Vec<u64>> = train
            .images
            .rows()
            .into_iter()
            .chain(val.images.rows())
            .map(|r| r.iter().map(|&p| p.to_bits()).collect())
            .collect();
        let mut want: Vec<Vec<u64>> = set
            .images
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&p| p.to_bits()).collect())
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn noisy_grid_hits_exactly_nine_pixels_on_zero_images() {
        let zero = ImageSet::new(Array2::zeros((1, 784)), vec![0], 28, 28, "mnist").unwrap();
        let noisy = make_noisy(&zero);
        let ones: Vec<usize> = noisy
            .images
            .row(0)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == 1.0)
            .map(|(i, _)| i)
            .collect();
        let expected: Vec<usize> = [0usize, 10, 20]
            .iter()
            .flat_map(|&r| [0usize, 10, 20].iter().map(move |&c| r * 28 + c))
            .collect();
        assert_eq!(ones, expected);
        assert_eq!(noisy.category, "noisy");
    }

    #[test]
    fn noisy_is_idempotent_and_fixed_on_white() {
        let white = ImageSet::new(Array2::ones((2, 784)), vec![0, 1], 28, 28, "mnist").unwrap();
        let once = make_noisy(&white);
        assert_eq!(once.images, white.images);
        let set = checker_set(3);
        let once = make_noisy(&set);
        let twice = make_noisy(&once);
        assert_eq!(once.images, twice.images);
    }

    #[test]
    fn occlusion_zeroes_21_lattice_points() {
        let white = ImageSet::new(Array2::ones((1, 784)), vec![0], 28, 28, "mnist").unwrap();
        let occ = make_occluded(&white);
        let zeros = occ.images.row(0).iter().filter(|&&p| p == 0.0).count();
        assert_eq!(zeros, 21);
        assert_eq!(occ.category, "occluded");

        // Independent lattice enumeration around center (col 14, row 20).
        let mut expected = 0;
        for r in 0..28i32 {
            for c in 0..28i32 {
                if (c - 14).pow(2) + (r - 20).pow(2) <= 6 {
                    // 2.5² = 6.25; integer squared distances ≤ 6 qualify
                    expected += 1;
                }
            }
        }
        assert_eq!(zeros, expected);
    }

    #[test]
    fn occlusion_is_idempotent_and_fixed_on_black() {
        let black = ImageSet::new(Array2::zeros((1, 784)), vec![0], 28, 28, "mnist").unwrap();
        assert_eq!(make_occluded(&black).images, black.images);
        let set = checker_set(2);
        let once = make_occluded(&set);
        assert_eq!(make_occluded(&once).images, once.images);
    }

    #[test]
    fn noisy_and_occlusion_touch_disjoint_pixels_and_commute() {
        // Modified pixel sets: grid {0,10,20}² vs the circle at (14,20).
        let grid: Vec<usize> = [0usize, 10, 20]
            .iter()
            .flat_map(|&r| [0usize, 10, 20].iter().map(move |&c| r * 28 + c))
            .collect();
        for r in 0..28i32 {
            for c in 0..28i32 {
                if (c - 14).pow(2) + (r - 20).pow(2) <= 6 {
                    assert!(!grid.contains(&((r * 28 + c) as usize)));
                }
            }
        }
        let set = checker_set(3);
        let a = make_occluded(&make_noisy(&set));
        let b = make_noisy(&make_occluded(&set));
        assert_eq!(a.images, b.images);
    }

    #[test]
    fn blobs_are_valid_images() {
        let blobs = make_blobs(10, 28, 28, 42);
        assert_eq!(blobs.len(), 10);
        assert!(blobs.images.iter().all(|&p| (0.0..=1.0).contains(&p)));
        // Not degenerate: something actually drawn.
        assert!(blobs.images.sum() > 1.0);
        let again = make_blobs(10, 28, 28, 42);
        assert_eq!(blobs.images, again.images);
    }

    fn partition_of(n: usize) -> DevicePartition {
        let set = checker_set(n);
        let (train, validation) = split_train_val(&set, 4, 1, 1).unwrap();
        DevicePartition {
            device_id: 0,
            train,
            validation,
        }
    }

    #[test]
    fn inject_dirty_zero_is_identity() {
        let part = partition_of(20);
        let blobs = make_blobs(5, 28, 28, 0);
        let out = inject_dirty(&part, &blobs, 0, 1, DirtyTarget::TrainAndValidation).unwrap();
        assert_eq!(out.train.images, part.train.images);
        assert_eq!(out.validation.images, part.validation.images);
    }

    #[test]
    fn inject_dirty_preserves_sizes_and_swaps_count_samples() {
        let part = partition_of(50);
        let blobs = make_blobs(20, 28, 28, 0);
        let out = inject_dirty(&part, &blobs, 10, 1, DirtyTarget::TrainAndValidation).unwrap();
        assert_eq!(out.train.len(), part.train.len());
        assert_eq!(out.validation.len(), part.validation.len());
        let changed = out
            .train
            .images
            .rows()
            .into_iter()
            .zip(part.train.images.rows())
            .chain(
                out.validation
                    .images
                    .rows()
                    .into_iter()
                    .zip(part.validation.images.rows()),
            )
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 10);
        // Proportional: 40 train / 10 val → 8 + 2.
        let train_changed = out
            .train
            .images
            .rows()
            .into_iter()
            .zip(part.train.images.rows())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(train_changed, 8);
    }

    #[test]
    fn inject_dirty_rejects_oversized_count() {
        let part = partition_of(10);
        let blobs = make_blobs(4, 28, 28, 0);
        assert!(inject_dirty(&part, &blobs, 5, 1, DirtyTarget::TrainAndValidation).is_err());
        assert!(inject_dirty(&part, &blobs, 11, 1, DirtyTarget::TrainAndValidation).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn generators_preserve_dims_and_range(n in 1usize..6, seed in 0u64..100) {
            let images = Array2::from_shape_fn((n, 784), |(i, j)| {
                ((i * 31 + j * 7 + seed as usize) % 256) as f64 / 255.0
            });
            let set = ImageSet::new(images, vec![0; n], 28, 28, "mnist").unwrap();
            for out in [make_noisy(&set), make_occluded(&set)] {
                prop_assert_eq!(out.len(), n);
                prop_assert_eq!((out.rows, out.cols), (28, 28));
                prop_assert!(out.images.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }

        #[test]
        fn partition_covers_input_disjointly(p in 0.0f64..=1.0, seed in 0u64..100) {
            let n = 50;
            let images = Array2::from_shape_fn((n, 4), |(i, j)| ((i + j) % 2) as f64);
            let set = ImageSet::new(images, (0..n).map(|i| (i % 10) as u8).collect(), 2, 2, "m").unwrap();
            let parts = partition_non_iid(&set, 10, p, seed).unwrap();
            let total: usize = parts.iter().map(ImageSet::len).sum();
            prop_assert_eq!(total, n);
            let label_total: usize = parts.iter().map(|s| s.labels.len()).sum();
            prop_assert_eq!(label_total, n);
        }
    }
}
