//! Labeled-subset selection and label-space remapping.

use crate::data::types::{DatasetBundle, ImageSample, LabelSpace, SealedLabels};
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::SliceRandom;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub struct SelectOptions {
    /// Spread the labeled picks evenly over classes (the default guards
    /// against classless labeled sets at tiny n). Uniform mode matches a
    /// plain random draw.
    pub stratified: bool,
    /// Enforce the SSL regime |X| <= |U| / 10.
    pub enforce_ratio: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            stratified: true,
            enforce_ratio: true,
        }
    }
}

/// Split the train pool of `bundle` into a labeled set of exactly `n`
/// samples and an unlabeled remainder whose labels move into the sealed
/// store. Deterministic for a fixed seed.
pub fn select_labeled(bundle: &DatasetBundle, n: usize, seed: u64) -> Result<DatasetBundle> {
    select_labeled_opts(bundle, n, seed, SelectOptions::default())
}

pub fn select_labeled_opts(
    bundle: &DatasetBundle,
    n: usize,
    seed: u64,
    opts: SelectOptions,
) -> Result<DatasetBundle> {
    // The pool is everything in the train split: currently-labeled samples
    // plus any unlabeled ones whose ground truth is on record.
    let mut pool: Vec<ImageSample> = bundle.labeled.clone();
    for s in &bundle.unlabeled {
        let mut s = s.clone();
        s.label = bundle.hidden.map().get(&s.id).copied();
        pool.push(s);
    }
    if n > pool.len() {
        return Err(Error::Argument(format!(
            "requested {n} labeled samples from a pool of {}",
            pool.len()
        )));
    }
    if opts.enforce_ratio && n * 11 > pool.len() {
        return Err(Error::Argument(format!(
            "labeled count {n} violates |X| <= |U|/10 for a pool of {} \
             (disable enforce_ratio to override)",
            pool.len()
        )));
    }

    let k = bundle.label_space.num_classes();
    let chosen: Vec<usize> = if opts.stratified {
        if n < k {
            return Err(Error::Argument(format!(
                "stratified selection needs n >= {k} classes, got n = {n}"
            )));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, s) in pool.iter().enumerate() {
            match s.label {
                Some(l) => by_class[l].push(i),
                None => {
                    return Err(Error::Argument(format!(
                        "stratified selection requires labels for the whole pool; \
                         sample {} has none",
                        s.id
                    )))
                }
            }
        }
        let mut picks = Vec::with_capacity(n);
        for (c, members) in by_class.iter_mut().enumerate() {
            let quota = n / k + usize::from(c < n % k);
            if members.len() < quota {
                return Err(Error::Argument(format!(
                    "class {c} has {} pool samples, fewer than its quota {quota}",
                    members.len()
                )));
            }
            let mut class_rng = rng::stream(seed, "select-class", &[c as u64]);
            members.shuffle(&mut class_rng);
            picks.extend_from_slice(&members[..quota]);
        }
        picks
    } else {
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        let mut pick_rng = rng::stream(seed, "select-uniform", &[]);
        indices.shuffle(&mut pick_rng);
        indices.truncate(n);
        indices
    };

    let chosen_set: std::collections::HashSet<usize> = chosen.iter().copied().collect();
    let mut labeled = Vec::with_capacity(n);
    let mut unlabeled = Vec::with_capacity(pool.len() - n);
    let mut hidden = HashMap::new();
    for (i, mut s) in pool.into_iter().enumerate() {
        if chosen_set.contains(&i) {
            labeled.push(s);
        } else {
            if let Some(l) = s.label.take() {
                hidden.insert(s.id.clone(), l);
            }
            unlabeled.push(s);
        }
    }

    let out = DatasetBundle {
        labeled,
        unlabeled,
        test: bundle.test.clone(),
        label_space: bundle.label_space.clone(),
        hidden: SealedLabels::new(hidden),
    };
    out.validate()?;
    Ok(out)
}

/// Remap every label (visible, sealed, and test) through `grouping`; the
/// label space becomes the superclass set, ordered by first appearance in
/// the original class list.
pub fn map_labels(
    bundle: &DatasetBundle,
    grouping: &HashMap<String, String>,
) -> Result<DatasetBundle> {
    let old = &bundle.label_space;
    for c in old.classes() {
        if !grouping.contains_key(c) {
            return Err(Error::Config(format!(
                "grouping does not cover class {c:?}"
            )));
        }
    }
    let mut super_names: Vec<String> = Vec::new();
    let mut class_to_super: Vec<usize> = Vec::with_capacity(old.num_classes());
    for c in old.classes() {
        let sup = &grouping[c];
        let ix = match super_names.iter().position(|s| s == sup) {
            Some(ix) => ix,
            None => {
                super_names.push(sup.clone());
                super_names.len() - 1
            }
        };
        class_to_super.push(ix);
    }

    let remap_split = |split: &[ImageSample]| -> Vec<ImageSample> {
        split
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.label = s.label.map(|l| class_to_super[l]);
                s
            })
            .collect()
    };
    let hidden: HashMap<String, usize> = bundle
        .hidden
        .map()
        .iter()
        .map(|(id, l)| (id.clone(), class_to_super[*l]))
        .collect();

    let out = DatasetBundle {
        labeled: remap_split(&bundle.labeled),
        unlabeled: bundle.unlabeled.clone(),
        test: remap_split(&bundle.test),
        label_space: LabelSpace::new(super_names)?,
        hidden: SealedLabels::new(hidden),
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{self, SynthSpec};

    fn pool(n: usize) -> DatasetBundle {
        synth::generate(&SynthSpec {
            train: n,
            test: 20,
            seed: 0,
            rgb: false,
        })
        .unwrap()
    }

    #[test]
    fn split_is_a_partition_by_id() {
        let bundle = pool(200);
        let out = select_labeled(&bundle, 10, 42).unwrap();
        assert_eq!(out.labeled.len(), 10);
        assert_eq!(out.unlabeled.len(), 190);
        let mut ids: Vec<&str> = out
            .labeled
            .iter()
            .chain(out.unlabeled.iter())
            .map(|s| s.id.as_str())
            .collect();
        ids.sort_unstable();
        let mut orig: Vec<&str> = bundle.labeled.iter().map(|s| s.id.as_str()).collect();
        orig.sort_unstable();
        assert_eq!(ids, orig);
        // Hidden labels agree with the generator's ground truth.
        assert_eq!(out.hidden.len(), 190);
    }

    #[test]
    fn selection_is_deterministic() {
        let bundle = pool(200);
        let a = select_labeled(&bundle, 12, 7).unwrap();
        let b = select_labeled(&bundle, 12, 7).unwrap();
        let ids = |x: &DatasetBundle| {
            x.labeled
                .iter()
                .map(|s| s.id.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&a), ids(&b));
        let c = select_labeled(&bundle, 12, 8).unwrap();
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn stratified_gives_one_per_class() {
        let bundle = pool(200);
        let out = select_labeled(&bundle, 10, 3).unwrap();
        let mut counts = vec![0usize; 10];
        for s in &out.labeled {
            counts[s.label.unwrap()] += 1;
        }
        assert!(counts.iter().all(|c| *c == 1), "{counts:?}");
    }

    #[test]
    fn uniform_mode_and_ratio_enforcement() {
        let bundle = pool(100);
        let opts = SelectOptions {
            stratified: false,
            enforce_ratio: true,
        };
        assert!(select_labeled_opts(&bundle, 20, 0, opts).is_err()); // 20*11 > 100
        let ok = select_labeled_opts(&bundle, 9, 0, opts).unwrap();
        assert_eq!(ok.labeled.len(), 9);
        assert!(select_labeled(&bundle, 101, 0).is_err());
    }

    #[test]
    fn map_labels_groups_and_preserves_pixels() {
        let bundle = select_labeled(&pool(200), 10, 1).unwrap();
        let grouping = synth::superclass_grouping();
        let grouped = map_labels(&bundle, &grouping).unwrap();
        assert_eq!(grouped.label_space.num_classes(), 3);
        assert_eq!(grouped.labeled.len(), bundle.labeled.len());
        assert_eq!(grouped.unlabeled.len(), bundle.unlabeled.len());
        for (a, b) in grouped.labeled.iter().zip(bundle.labeled.iter()) {
            assert_eq!(a.pixels, b.pixels);
        }
        // Hidden labels remapped into the superclass space.
        let id = &grouped.unlabeled[0].id;
        assert!(grouped.hidden.reveal(id).unwrap() < 3);
    }

    #[test]
    fn identity_grouping_keeps_bundle() {
        let bundle = select_labeled(&pool(150), 10, 1).unwrap();
        let identity: HashMap<String, String> = bundle
            .label_space
            .classes()
            .iter()
            .map(|c| (c.clone(), c.clone()))
            .collect();
        let same = map_labels(&bundle, &identity).unwrap();
        assert_eq!(same.label_space.classes(), bundle.label_space.classes());
        for (a, b) in same.labeled.iter().zip(bundle.labeled.iter()) {
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn incomplete_grouping_names_missing_class() {
        let bundle = pool(100);
        let mut grouping = synth::superclass_grouping();
        grouping.remove("tee");
        let err = map_labels(&bundle, &grouping).unwrap_err();
        assert!(err.to_string().contains("tee"), "{err}");
    }

    #[test]
    fn pixel_range_preserved_after_ops() {
        let bundle = select_labeled(&pool(150), 10, 1).unwrap();
        for s in bundle.labeled.iter().chain(bundle.unlabeled.iter()) {
            assert!(s.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
