//! Loader for the MNIST idx archive layout (raw or gzip-compressed).

use crate::data::types::{DatasetBundle, ImageSample, LabelSpace, SealedLabels};
use crate::error::{Error, Result};
use crate::imgops::Image;
use flate2::read::GzDecoder;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

/// Find `<stem>` or `<stem>.gz` under `root`.
fn locate(root: &Path, stem: &str) -> Option<PathBuf> {
    let raw = root.join(stem);
    if raw.is_file() {
        return Some(raw);
    }
    let gz = root.join(format!("{stem}.gz"));
    gz.is_file().then_some(gz)
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

fn read_u32(reader: &mut dyn Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader
        .read_exact(&mut buf)
        .map_err(|e| Error::Load(format!("truncated idx file {}: {e}", path.display())))?;
    Ok(u32::from_be_bytes(buf))
}

fn read_images(path: &Path) -> Result<Vec<Image>> {
    let mut r = open_maybe_gz(path)?;
    let magic = read_u32(r.as_mut(), path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Load(format!(
            "bad image magic {magic} in {} (expected {IMAGE_MAGIC})",
            path.display()
        )));
    }
    let n = read_u32(r.as_mut(), path)? as usize;
    let h = read_u32(r.as_mut(), path)? as usize;
    let w = read_u32(r.as_mut(), path)? as usize;
    let mut raw = vec![0u8; n * h * w];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Load(format!("truncated pixel data in {}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let slice = &raw[i * h * w..(i + 1) * h * w];
        let data: Vec<f64> = slice.iter().map(|b| f64::from(*b) / 255.0).collect();
        out.push(
            Image::from_shape_vec((h, w, 1), data)
                .map_err(|e| Error::Load(format!("bad image shape: {e}")))?,
        );
    }
    Ok(out)
}

fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = open_maybe_gz(path)?;
    let magic = read_u32(r.as_mut(), path)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Load(format!(
            "bad label magic {magic} in {} (expected {LABEL_MAGIC})",
            path.display()
        )));
    }
    let n = read_u32(r.as_mut(), path)? as usize;
    let mut raw = vec![0u8; n];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Load(format!("truncated label data in {}: {e}", path.display())))?;
    Ok(raw)
}

/// Load an MNIST-format archive directory. The whole train split lands in
/// `labeled`; use `select_labeled` to carve out the SSL split.
pub fn load(root: &Path) -> Result<DatasetBundle> {
    let stems = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ];
    let paths: Vec<PathBuf> = stems
        .iter()
        .map(|s| {
            locate(root, s).ok_or_else(|| {
                Error::Load(format!(
                    "missing {s}[.gz] under {}; expected files: {}",
                    root.display(),
                    stems.join(", ")
                ))
            })
        })
        .collect::<Result<_>>()?;

    let make = |images: Vec<Image>, labels: Vec<u8>, prefix: &str| -> Result<Vec<ImageSample>> {
        if images.len() != labels.len() {
            return Err(Error::Load(format!(
                "{prefix}: {} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        images
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (px, l))| ImageSample::new(format!("{prefix}-{i:05}"), px, Some(l as usize)))
            .collect()
    };

    let train = make(read_images(&paths[0])?, read_labels(&paths[1])?, "train")?;
    let test = make(read_images(&paths[2])?, read_labels(&paths[3])?, "test")?;
    let classes = (0..10).map(|d| d.to_string()).collect();
    let bundle = DatasetBundle {
        labeled: train,
        unlabeled: Vec::new(),
        test,
        label_space: LabelSpace::new(classes)?,
        hidden: SealedLabels::default(),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(path: &Path, images: &[Vec<u8>], h: usize, w: usize) {
        let mut buf = Vec::new();
        buf.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(images.len() as u32).to_be_bytes());
        buf.extend_from_slice(&(h as u32).to_be_bytes());
        buf.extend_from_slice(&(w as u32).to_be_bytes());
        for img in images {
            buf.extend_from_slice(img);
        }
        File::create(path).unwrap().write_all(&buf).unwrap();
    }

    fn write_idx_labels(path: &Path, labels: &[u8]) {
        let mut buf = Vec::new();
        buf.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        buf.extend_from_slice(labels);
        File::create(path).unwrap().write_all(&buf).unwrap();
    }

    #[test]
    fn loads_synthetic_idx_archive() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let imgs: Vec<Vec<u8>> = (0..4).map(|i| vec![i * 60; 4]).collect();
        write_idx_images(&root.join("train-images-idx3-ubyte"), &imgs, 2, 2);
        write_idx_labels(&root.join("train-labels-idx1-ubyte"), &[0, 1, 2, 3]);
        write_idx_images(&root.join("t10k-images-idx3-ubyte"), &imgs[..2], 2, 2);
        write_idx_labels(&root.join("t10k-labels-idx1-ubyte"), &[1, 0]);

        let bundle = load(root).unwrap();
        assert_eq!(bundle.labeled.len(), 4);
        assert_eq!(bundle.test.len(), 2);
        assert_eq!(bundle.labeled[0].shape(), (2, 2, 1));
        assert_eq!(bundle.labeled[1].label, Some(1));
        // 60/255 scaling.
        assert!((bundle.labeled[1].pixels[(0, 0, 0)] - 60.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn empty_directory_reports_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let err = load(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("train-images-idx3-ubyte"), "{msg}");
        assert!(msg.contains("expected files"), "{msg}");
    }

    #[test]
    fn bad_magic_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write_idx_labels(&root.join("train-images-idx3-ubyte"), &[0]); // wrong magic
        write_idx_labels(&root.join("train-labels-idx1-ubyte"), &[0]);
        write_idx_labels(&root.join("t10k-images-idx3-ubyte"), &[0]);
        write_idx_labels(&root.join("t10k-labels-idx1-ubyte"), &[0]);
        let err = load(root).unwrap_err();
        assert!(err.to_string().contains("bad image magic"));
    }
}
