//! Dataset ingestion, labeled-subset selection, and label-space handling.

pub mod cifar;
pub mod folder;
pub mod mnist;
pub mod select;
pub mod store;
pub mod synth;
pub mod types;

pub use select::{map_labels, select_labeled, select_labeled_opts, SelectOptions};
pub use types::{DatasetBundle, ImageSample, LabelSpace, SealedLabels};

use crate::error::{Error, Result};
use std::path::Path;

/// Load a dataset by id from a directory. Known ids: `mnist`, `cifar10`,
/// `folder`. Synthetic corpora are generated via [`synth::generate`].
pub fn load_dataset(name: &str, root: &Path) -> Result<DatasetBundle> {
    if !root.is_dir() {
        return Err(Error::Load(format!(
            "dataset root {} does not exist or is not a directory",
            root.display()
        )));
    }
    match name {
        "mnist" => mnist::load(root),
        "cifar10" => cifar::load(root),
        "folder" => folder::load(root),
        other => Err(Error::Config(format!(
            "unknown dataset id {other:?}; known ids: mnist, cifar10, folder"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_id_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset("svhn", dir.path()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn missing_root_is_a_load_error() {
        let err = load_dataset("mnist", Path::new("/definitely/not/here")).unwrap_err();
        assert!(matches!(err, Error::Load(_)));
    }
}
