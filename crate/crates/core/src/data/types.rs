//! Core dataset types: samples, label spaces, and bundles with sealed
//! hidden labels.

use crate::error::{Error, Result};
use crate::imgops::{self, Image};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

/// One image with an optional class id and a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub id: String,
    /// `(H, W, C)` floats in `[0, 1]`, `C` in `{1, 3}`.
    pub pixels: Image,
    pub label: Option<usize>,
}

impl ImageSample {
    pub fn new(id: impl Into<String>, pixels: Image, label: Option<usize>) -> Result<Self> {
        imgops::validate(&pixels)?;
        Ok(ImageSample {
            id: id.into(),
            pixels,
            label,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.pixels.dim()
    }
}

/// Ordered class names, with an optional class-to-superclass grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpace {
    classes: Vec<String>,
    grouping: Option<HashMap<String, String>>,
}

impl LabelSpace {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &classes {
            if !seen.insert(c.clone()) {
                return Err(Error::Config(format!("duplicate class name {c:?}")));
            }
        }
        if classes.is_empty() {
            return Err(Error::Config("label space must not be empty".into()));
        }
        Ok(LabelSpace {
            classes,
            grouping: None,
        })
    }

    /// Attach a grouping map; every class must map to exactly one superclass.
    pub fn with_grouping(mut self, grouping: HashMap<String, String>) -> Result<Self> {
        for c in &self.classes {
            if !grouping.contains_key(c) {
                return Err(Error::Config(format!(
                    "grouping does not cover class {c:?}"
                )));
            }
        }
        self.grouping = Some(grouping);
        Ok(self)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn grouping(&self) -> Option<&HashMap<String, String>> {
        self.grouping.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.classes.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

/// Ground-truth labels for the unlabeled set, kept out of reach of training
/// code. Every reveal is counted, so tests can audit that a training run
/// never touched them.
#[derive(Debug, Default)]
pub struct SealedLabels {
    labels: HashMap<String, usize>,
    accesses: AtomicU64,
}

impl SealedLabels {
    pub fn new(labels: HashMap<String, usize>) -> Self {
        SealedLabels {
            labels,
            accesses: AtomicU64::new(0),
        }
    }

    /// Reveal the hidden label of a sample for evaluation purposes.
    pub fn reveal(&self, id: &str) -> Option<usize> {
        self.accesses.fetch_add(1, Ordering::Relaxed);
        self.labels.get(id).copied()
    }

    /// Number of reveals so far (the access-audit flag).
    pub fn access_count(&self) -> u64 {
        self.accesses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Internal view for bundle maintenance (attack bookkeeping, remapping).
    /// Does not count as a reveal: callers here are not training code.
    pub(crate) fn map(&self) -> &HashMap<String, usize> {
        &self.labels
    }
}

impl Clone for SealedLabels {
    fn clone(&self) -> Self {
        SealedLabels {
            labels: self.labels.clone(),
            accesses: AtomicU64::new(self.accesses.load(Ordering::Relaxed)),
        }
    }
}

/// A labeled set `X`, an unlabeled set `U` (labels sealed), a test set, and
/// the label space. This is the unit all attacks and trainers consume.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub labeled: Vec<ImageSample>,
    pub unlabeled: Vec<ImageSample>,
    pub test: Vec<ImageSample>,
    pub label_space: LabelSpace,
    pub hidden: SealedLabels,
}

impl DatasetBundle {
    /// Validate structural invariants: labeled/test samples carry in-range
    /// labels, unlabeled samples carry none, ids are unique per split.
    pub fn validate(&self) -> Result<()> {
        let k = self.label_space.num_classes();
        for s in self.labeled.iter().chain(self.test.iter()) {
            match s.label {
                Some(l) if l < k => {}
                Some(l) => {
                    return Err(Error::Config(format!(
                        "sample {} has label {l} outside the {k}-class label space",
                        s.id
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "sample {} in a labeled split has no label",
                        s.id
                    )))
                }
            }
        }
        if let Some(s) = self.unlabeled.iter().find(|s| s.label.is_some()) {
            return Err(Error::Config(format!(
                "unlabeled sample {} carries a visible label",
                s.id
            )));
        }
        for split in [&self.labeled, &self.unlabeled, &self.test] {
            let mut seen = std::collections::HashSet::new();
            for s in split {
                if !seen.insert(s.id.as_str()) {
                    return Err(Error::Config(format!("duplicate sample id {}", s.id)));
                }
            }
        }
        Ok(())
    }

    /// Accuracy of the constant majority-class predictor on the test set.
    pub fn naive_classifier_accuracy(&self) -> f64 {
        if self.test.is_empty() {
            return 0.0;
        }
        let mut counts = vec![0usize; self.label_space.num_classes()];
        for s in &self.test {
            if let Some(l) = s.label {
                counts[l] += 1;
            }
        }
        let max = counts.into_iter().max().unwrap_or(0);
        max as f64 / self.test.len() as f64
    }

    pub fn image_shape(&self) -> Option<(usize, usize, usize)> {
        self.labeled
            .first()
            .or_else(|| self.unlabeled.first())
            .or_else(|| self.test.first())
            .map(ImageSample::shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn px() -> Image {
        Array3::zeros((2, 2, 1))
    }

    #[test]
    fn image_sample_validates_pixels() {
        let mut bad = px();
        bad[(0, 0, 0)] = 2.0;
        assert!(ImageSample::new("a", bad, None).is_err());
        assert!(ImageSample::new("a", px(), Some(0)).is_ok());
    }

    #[test]
    fn label_space_rejects_duplicates() {
        assert!(LabelSpace::new(vec!["a".into(), "a".into()]).is_err());
        let ls = LabelSpace::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(ls.index_of("b"), Some(1));
    }

    #[test]
    fn grouping_must_cover_all_classes() {
        let ls = LabelSpace::new(vec!["a".into(), "b".into()]).unwrap();
        let mut g = HashMap::new();
        g.insert("a".to_string(), "x".to_string());
        assert!(ls.clone().with_grouping(g.clone()).is_err());
        g.insert("b".to_string(), "x".to_string());
        assert!(ls.with_grouping(g).is_ok());
    }

    #[test]
    fn sealed_labels_count_reveals() {
        let mut m = HashMap::new();
        m.insert("s1".to_string(), 3usize);
        let sealed = SealedLabels::new(m);
        assert_eq!(sealed.access_count(), 0);
        assert_eq!(sealed.reveal("s1"), Some(3));
        assert_eq!(sealed.reveal("nope"), None);
        assert_eq!(sealed.access_count(), 2);
    }

    #[test]
    fn bundle_validation_flags_visible_unlabeled_labels() {
        let ls = LabelSpace::new(vec!["a".into()]).unwrap();
        let bundle = DatasetBundle {
            labeled: vec![ImageSample::new("l0", px(), Some(0)).unwrap()],
            unlabeled: vec![ImageSample::new("u0", px(), Some(0)).unwrap()],
            test: vec![],
            label_space: ls,
            hidden: SealedLabels::default(),
        };
        assert!(bundle.validate().is_err());
    }
}
