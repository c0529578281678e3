//! Loader for the CIFAR-10 binary batch layout.

use crate::data::types::{DatasetBundle, ImageSample, LabelSpace, SealedLabels};
use crate::error::{Error, Result};
use crate::imgops::Image;
use std::fs;
use std::path::{Path, PathBuf};

const RECORD: usize = 1 + 3 * 1024;
const SIDE: usize = 32;

const CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

fn find_root(root: &Path) -> PathBuf {
    // Accept either the extracted archive directory or its parent.
    let nested = root.join("cifar-10-batches-bin");
    if nested.is_dir() {
        nested
    } else {
        root.to_path_buf()
    }
}

fn read_batch(path: &Path, prefix: &str, start: usize) -> Result<Vec<ImageSample>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.is_empty() || bytes.len() % RECORD != 0 {
        return Err(Error::Load(format!(
            "{}: size {} is not a multiple of the {}-byte record",
            path.display(),
            bytes.len(),
            RECORD
        )));
    }
    let n = bytes.len() / RECORD;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let rec = &bytes[i * RECORD..(i + 1) * RECORD];
        let label = rec[0] as usize;
        if label >= CLASSES.len() {
            return Err(Error::Load(format!(
                "{}: record {i} has label {label} > 9",
                path.display()
            )));
        }
        // Planar R, G, B planes of 1024 bytes each, row-major.
        let mut img = Image::zeros((SIDE, SIDE, 3));
        for c in 0..3 {
            for y in 0..SIDE {
                for x in 0..SIDE {
                    img[(y, x, c)] = f64::from(rec[1 + c * 1024 + y * SIDE + x]) / 255.0;
                }
            }
        }
        out.push(ImageSample::new(
            format!("{prefix}-{:05}", start + i),
            img,
            Some(label),
        )?);
    }
    Ok(out)
}

/// Load the CIFAR-10 binary batches. The whole train split lands in
/// `labeled`; use `select_labeled` to carve out the SSL split.
pub fn load(root: &Path) -> Result<DatasetBundle> {
    let root = find_root(root);
    let train_files: Vec<String> = (1..=5).map(|i| format!("data_batch_{i}.bin")).collect();
    let mut missing = Vec::new();
    for f in train_files.iter().chain([&"test_batch.bin".to_string()]) {
        if !root.join(f).is_file() {
            missing.push(f.clone());
        }
    }
    if !missing.is_empty() {
        return Err(Error::Load(format!(
            "missing {} under {}; expected files: {}, test_batch.bin",
            missing.join(", "),
            root.display(),
            train_files.join(", ")
        )));
    }

    let mut train = Vec::new();
    for f in &train_files {
        let start = train.len();
        train.extend(read_batch(&root.join(f), "train", start)?);
    }
    let test = read_batch(&root.join("test_batch.bin"), "test", 0)?;
    let bundle = DatasetBundle {
        labeled: train,
        unlabeled: Vec::new(),
        test,
        label_space: LabelSpace::new(CLASSES.iter().map(|s| s.to_string()).collect())?,
        hidden: SealedLabels::default(),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// The three-superclass grouping used for partial output-space experiments:
/// mechanical classes, small animals, and large animals.
pub fn superclass_grouping() -> std::collections::HashMap<String, String> {
    let mut g = std::collections::HashMap::new();
    for c in ["airplane", "automobile", "ship", "truck"] {
        g.insert(c.to_string(), "mechanical".to_string());
    }
    for c in ["bird", "cat", "frog"] {
        g.insert(c.to_string(), "small-animal".to_string());
    }
    for c in ["deer", "dog", "horse"] {
        g.insert(c.to_string(), "large-animal".to_string());
    }
    g
}
