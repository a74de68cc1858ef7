//! Subject-level train / validation / test splits.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::manifest::SampleManifestEntry;
use crate::error::{Error, Result};

const GRID_TRAIN: &[u32] = &[1, 3, 5, 6, 7, 8, 10, 12, 14, 16, 17, 22, 26, 28, 32];
const GRID_VAL: &[u32] = &[9, 20, 23, 27, 29, 30, 34];
const GRID_TEST: &[u32] = &[2, 4, 11, 13, 15, 18, 19, 25, 31, 33];

const TCD_TRAIN: &[u32] = &[
    1, 2, 3, 4, 5, 6, 7, 10, 11, 12, 13, 14, 16, 17, 19, 20, 21, 22, 23, 24, 26, 27, 29, 30, 31, 32, 35, 37,
    38, 39, 40, 42, 43, 46, 47, 48, 50, 51, 52, 53, 57, 59,
];
const TCD_VAL: &[u32] = &[34, 36, 44, 45, 49, 54, 58];
const TCD_TEST: &[u32] = &[8, 9, 15, 18, 25, 28, 33, 41, 55, 56];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ids: BTreeSet<u32>,
    pub val_ids: BTreeSet<u32>,
    pub test_ids: BTreeSet<u32>,
}

impl SplitSpec {
    pub fn new(
        train: impl IntoIterator<Item = u32>,
        val: impl IntoIterator<Item = u32>,
        test: impl IntoIterator<Item = u32>,
    ) -> Result<Self> {
        let s = Self {
            train_ids: train.into_iter().collect(),
            val_ids: val.into_iter().collect(),
            test_ids: test.into_iter().collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn grid() -> Self {
        Self::new(GRID_TRAIN.iter().copied(), GRID_VAL.iter().copied(), GRID_TEST.iter().copied()).unwrap()
    }

    pub fn tcdtimit() -> Self {
        Self::new(TCD_TRAIN.iter().copied(), TCD_VAL.iter().copied(), TCD_TEST.iter().copied()).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("train", &self.train_ids, "validation", &self.val_ids),
            ("train", &self.train_ids, "test", &self.test_ids),
            ("validation", &self.val_ids, "test", &self.test_ids),
        ];
        for (na, a, nb, b) in pairs {
            let shared: Vec<_> = a.intersection(b).collect();
            if !shared.is_empty() {
                return Err(Error::Validation(format!("subjects {shared:?} appear in both {na} and {nb} splits")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, id: u32) -> bool {
        self.train_ids.contains(&id) || self.val_ids.contains(&id) || self.test_ids.contains(&id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitEntries {
    pub train: Vec<SampleManifestEntry>,
    pub val: Vec<SampleManifestEntry>,
    pub test: Vec<SampleManifestEntry>,
}

impl SplitEntries {
    pub fn part(&self, part: SplitPart) -> &[SampleManifestEntry] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Val => &self.val,
            SplitPart::Test => &self.test,
        }
    }
}

/// Resolves a named split. `custom` needs an explicit spec.
pub fn split_spec(dataset_name: &str, custom: Option<&SplitSpec>) -> Result<SplitSpec> {
    match dataset_name.to_ascii_lowercase().as_str() {
        "grid" => Ok(SplitSpec::grid()),
        "tcdtimit" | "tcd_timit" | "tcd-timit" => Ok(SplitSpec::tcdtimit()),
        "custom" | "toy" => {
            let s = custom.ok_or_else(|| Error::Config(format!("dataset '{dataset_name}' needs an explicit split")))?;
            s.validate()?;
            Ok(s.clone())
        }
        other => Err(Error::Config(format!("unknown dataset '{other}' (expected grid, tcdtimit or custom)"))),
    }
}

pub fn split_subjects(
    dataset_name: &str,
    entries: &[SampleManifestEntry],
    custom: Option<&SplitSpec>,
) -> Result<SplitEntries> {
    let spec = split_spec(dataset_name, custom)?;
    let mut out = SplitEntries::default();
    let mut unknown = BTreeSet::new();
    for e in entries {
        let id = e.subject_id;
        if spec.train_ids.contains(&id) {
            out.train.push(e.clone());
        } else if spec.val_ids.contains(&id) {
            out.val.push(e.clone());
        } else if spec.test_ids.contains(&id) {
            out.test.push(e.clone());
        } else {
            unknown.insert(id);
        }
    }
    if !unknown.is_empty() {
        return Err(Error::Validation(format!("subject ids {unknown:?} are not part of the {dataset_name} split")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn entry(subject: u32, i: usize) -> SampleManifestEntry {
        SampleManifestEntry {
            sample_id: format!("s{subject}_{i}"),
            subject_id: subject,
            frames_path: PathBuf::from("f"),
            audio_path: PathBuf::from("a.wav"),
            transcript: None,
            fps: 25.0,
            sample_rate: 8000,
        }
    }

    #[test]
    fn grid_table_membership() {
        let s = split_subjects("grid", &[entry(2, 0), entry(9, 0), entry(1, 0)], None).unwrap();
        assert_eq!(s.test[0].subject_id, 2);
        assert_eq!(s.val[0].subject_id, 9);
        assert_eq!(s.train[0].subject_id, 1);
        assert_eq!(SplitSpec::grid().test_ids, GRID_TEST.iter().copied().collect());
    }

    #[test]
    fn tcd_sizes() {
        let s = SplitSpec::tcdtimit();
        assert_eq!((s.train_ids.len(), s.val_ids.len(), s.test_ids.len()), (42, 7, 10));
        assert_eq!((1..=59).filter(|&i| s.contains(i)).count(), 59);
    }

    #[test]
    fn unknown_subject_and_overlap_rejected() {
        assert!(matches!(split_subjects("grid", &[entry(21, 0)], None), Err(Error::Validation(_))));
        assert!(SplitSpec::new([1, 2], [2], [3]).is_err());
        assert!(split_subjects("custom", &[], None).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_entries(ids in prop::collection::vec(prop::sample::select(
            GRID_TRAIN.iter().chain(GRID_VAL).chain(GRID_TEST).copied().collect::<Vec<_>>()), 0..60)) {
            let entries: Vec<_> = ids.iter().enumerate().map(|(i, &s)| entry(s, i)).collect();
            let s = split_subjects("grid", &entries, None).unwrap();
            let mut seen: Vec<String> = s.train.iter().chain(&s.val).chain(&s.test).map(|e| e.sample_id.clone()).collect();
            seen.sort();
            let mut all: Vec<String> = entries.iter().map(|e| e.sample_id.clone()).collect();
            all.sort();
            prop_assert_eq!(seen, all);
        }
    }
}
