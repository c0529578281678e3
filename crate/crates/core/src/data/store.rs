//! On-disk bundle layout so attacks, training, and evaluation can run as
//! separate CLI invocations.
//!
//! Layout under a bundle directory:
//!
//! ```text
//! label_space.json          # class names + optional grouping
//! labeled/images/<id>.png   labeled/labels.csv
//! unlabeled/images/<id>.png
//! test/images/<id>.png      test/labels.csv
//! hidden.csv                # sealed ground truth for evaluation only
//! ```
//!
//! PNG storage quantizes pixels to 8 bits; round-trips are therefore exact
//! only at 1/255 granularity.

use crate::data::types::{DatasetBundle, ImageSample, LabelSpace, SealedLabels};
use crate::error::{Error, Result};
use crate::imgops;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct LabelSpaceFile {
    classes: Vec<String>,
    grouping: Option<HashMap<String, String>>,
}

fn write_split(dir: &Path, samples: &[ImageSample], with_manifest: bool) -> Result<()> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(images.display().to_string(), e))?;
    let mut manifest = String::new();
    for s in samples {
        imgops::save_png(&s.pixels, &images.join(format!("{}.png", s.id)))?;
        if with_manifest {
            let label = s
                .label
                .ok_or_else(|| Error::Config(format!("sample {} missing label", s.id)))?;
            manifest.push_str(&format!("{},{label}\n", s.id));
        }
    }
    if with_manifest {
        let path = dir.join("labels.csv");
        fs::write(&path, manifest).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

fn read_split(dir: &Path, labeled: bool) -> Result<Vec<ImageSample>> {
    let images = dir.join("images");
    if !images.is_dir() {
        return Ok(Vec::new());
    }
    let labels: HashMap<String, usize> = if labeled {
        let path = dir.join("labels.csv");
        let text =
            fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (id, label) = l
                    .split_once(',')
                    .ok_or_else(|| Error::Load(format!("bad manifest line {l:?}")))?;
                let label: usize = label
                    .trim()
                    .parse()
                    .map_err(|_| Error::Load(format!("bad label in line {l:?}")))?;
                Ok((id.trim().to_string(), label))
            })
            .collect::<Result<_>>()?
    } else {
        HashMap::new()
    };

    let mut names: Vec<String> = fs::read_dir(&images)
        .map_err(|e| Error::io(images.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.strip_suffix(".png").map(str::to_string)
        })
        .collect();
    names.sort_unstable();

    let mut out = Vec::with_capacity(names.len());
    for id in names {
        let pixels = imgops::load_image(&images.join(format!("{id}.png")))?;
        let label = if labeled {
            Some(*labels.get(&id).ok_or_else(|| {
                Error::Load(format!("image {id}.png has no manifest entry"))
            })?)
        } else {
            None
        };
        out.push(ImageSample::new(id, pixels, label)?);
    }
    Ok(out)
}

pub fn export_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let space = LabelSpaceFile {
        classes: bundle.label_space.classes().to_vec(),
        grouping: bundle.label_space.grouping().cloned(),
    };
    let space_path = dir.join("label_space.json");
    fs::write(
        &space_path,
        serde_json::to_string_pretty(&space).expect("label space serializes"),
    )
    .map_err(|e| Error::io(space_path.display().to_string(), e))?;

    write_split(&dir.join("labeled"), &bundle.labeled, true)?;
    write_split(&dir.join("unlabeled"), &bundle.unlabeled, false)?;
    write_split(&dir.join("test"), &bundle.test, true)?;

    let mut hidden: Vec<(String, usize)> = bundle
        .hidden
        .map()
        .iter()
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    hidden.sort();
    let text: String = hidden
        .into_iter()
        .map(|(id, l)| format!("{id},{l}\n"))
        .collect();
    let hidden_path = dir.join("hidden.csv");
    fs::write(&hidden_path, text).map_err(|e| Error::io(hidden_path.display().to_string(), e))?;
    Ok(())
}

pub fn import_bundle(dir: &Path) -> Result<DatasetBundle> {
    let space_path = dir.join("label_space.json");
    let text =
        fs::read_to_string(&space_path).map_err(|e| Error::io(space_path.display().to_string(), e))?;
    let space_file: LabelSpaceFile =
        serde_json::from_str(&text).map_err(|e| Error::Load(format!("bad label_space.json: {e}")))?;
    let mut space = LabelSpace::new(space_file.classes)?;
    if let Some(g) = space_file.grouping {
        space = space.with_grouping(g)?;
    }

    let hidden_path = dir.join("hidden.csv");
    let hidden: HashMap<String, usize> = if hidden_path.is_file() {
        fs::read_to_string(&hidden_path)
            .map_err(|e| Error::io(hidden_path.display().to_string(), e))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (id, label) = l
                    .split_once(',')
                    .ok_or_else(|| Error::Load(format!("bad hidden.csv line {l:?}")))?;
                let label: usize = label
                    .trim()
                    .parse()
                    .map_err(|_| Error::Load(format!("bad hidden label in {l:?}")))?;
                Ok((id.trim().to_string(), label))
            })
            .collect::<Result<_>>()?
    } else {
        HashMap::new()
    };

    let bundle = DatasetBundle {
        labeled: read_split(&dir.join("labeled"), true)?,
        unlabeled: read_split(&dir.join("unlabeled"), false)?,
        test: read_split(&dir.join("test"), true)?,
        label_space: space,
        hidden: SealedLabels::new(hidden),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{self, SynthSpec};

    #[test]
    fn export_import_roundtrip() {
        let bundle = synth::generate(&SynthSpec {
            train: 30,
            test: 10,
            seed: 2,
            rgb: false,
        })
        .unwrap();
        let split = crate::data::select_labeled_opts(
            &bundle,
            2,
            0,
            crate::data::SelectOptions {
                stratified: false,
                enforce_ratio: true,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_bundle(&split, dir.path()).unwrap();
        let back = import_bundle(dir.path()).unwrap();
        assert_eq!(back.labeled.len(), 2);
        assert_eq!(back.unlabeled.len(), 28);
        assert_eq!(back.test.len(), 10);
        assert_eq!(back.label_space.classes(), split.label_space.classes());
        assert_eq!(back.hidden.len(), split.hidden.len());
        // Pixels survive up to 8-bit quantization.
        let a = &split.labeled[0];
        let b = back
            .labeled
            .iter()
            .find(|s| s.id == a.id)
            .expect("same ids");
        let max = a
            .pixels
            .iter()
            .zip(b.pixels.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max <= 0.5 / 255.0 + 1e-9, "max {max}");
    }
}
