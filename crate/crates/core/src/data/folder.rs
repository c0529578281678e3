//! Generic directory-of-images ingestion: `images/<id>.png` plus a
//! `labels.csv` manifest with `id,label` lines (UTF-8, newline-terminated).
//! An optional `test/` subdirectory with the same layout supplies the test
//! split.

use crate::data::types::{DatasetBundle, ImageSample, LabelSpace, SealedLabels};
use crate::error::{Error, Result};
use crate::imgops;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

/// Parse `id,label` manifest lines. Blank lines are skipped.
fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| {
            Error::Load(format!(
                "{}:{}: expected `id,label`, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push((id.trim().to_string(), label.trim().to_string()));
    }
    if out.is_empty() {
        return Err(Error::Load(format!(
            "{}: manifest has no entries",
            path.display()
        )));
    }
    Ok(out)
}

fn load_split(dir: &Path, space: &LabelSpace) -> Result<Vec<ImageSample>> {
    let manifest = read_manifest(&dir.join("labels.csv"))?;
    let images_dir = dir.join("images");
    let mut out = Vec::with_capacity(manifest.len());
    for (id, label) in manifest {
        let class = space.index_of(&label).ok_or_else(|| {
            Error::Load(format!("sample {id}: unknown label {label:?} in manifest"))
        })?;
        let path = images_dir.join(format!("{id}.png"));
        let pixels = imgops::load_image(&path)?;
        out.push(ImageSample::new(id, pixels, Some(class))?);
    }
    Ok(out)
}

/// Load a generic dataset directory. Class names are the sorted distinct
/// labels across the train and (optional) test manifests.
pub fn load(root: &Path) -> Result<DatasetBundle> {
    let manifest_path = root.join("labels.csv");
    if !manifest_path.is_file() {
        return Err(Error::Load(format!(
            "missing {} ; expected layout: images/<id>.png plus labels.csv \
             (and optionally test/images, test/labels.csv)",
            manifest_path.display()
        )));
    }
    let mut names: BTreeSet<String> = read_manifest(&manifest_path)?
        .into_iter()
        .map(|(_, l)| l)
        .collect();
    let test_dir = root.join("test");
    let has_test = test_dir.join("labels.csv").is_file();
    if has_test {
        names.extend(
            read_manifest(&test_dir.join("labels.csv"))?
                .into_iter()
                .map(|(_, l)| l),
        );
    }
    let space = LabelSpace::new(names.into_iter().collect())?;
    let labeled = load_split(root, &space)?;
    let test = if has_test {
        load_split(&test_dir, &space)?
    } else {
        Vec::new()
    };
    let bundle = DatasetBundle {
        labeled,
        unlabeled: Vec::new(),
        test,
        label_space: space,
        hidden: SealedLabels::default(),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn write_sample(dir: &Path, id: &str, level: f64) {
        let img = Array3::from_elem((4, 4, 3), level);
        imgops::save_png(&img, &dir.join(format!("{id}.png"))).unwrap();
    }

    #[test]
    fn loads_folder_layout() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("images")).unwrap();
        write_sample(&root.join("images"), "a", 0.2);
        write_sample(&root.join("images"), "b", 0.8);
        fs::write(root.join("labels.csv"), "a,cat\nb,dog\n").unwrap();

        let bundle = load(root).unwrap();
        assert_eq!(bundle.labeled.len(), 2);
        assert_eq!(bundle.label_space.classes(), &["cat", "dog"]);
        assert_eq!(bundle.labeled[0].label, Some(0));
        assert!(bundle.test.is_empty());
    }

    #[test]
    fn missing_manifest_names_expected_layout() {
        let dir = tempfile::tempdir().unwrap();
        let err = load(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("labels.csv"), "{msg}");
        assert!(msg.contains("images/<id>.png"), "{msg}");
    }

    #[test]
    fn missing_image_names_offending_path() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("images")).unwrap();
        fs::write(root.join("labels.csv"), "ghost,cat\n").unwrap();
        let err = load(root).unwrap_err();
        assert!(err.to_string().contains("ghost.png"), "{err}");
    }
}
