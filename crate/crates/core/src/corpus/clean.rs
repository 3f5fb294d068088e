//! Deduplication, cleaning and ground-truth labelling.

use std::collections::{HashMap, HashSet};

use super::{DropReason, GroundTruth, InclusionEntry, Record};

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize_title(title: &str) -> String {
    let stripped: String = title
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Duplicate-detection key: normalized title plus publication year.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DedupKey {
    pub title: String,
    pub year: Option<i32>,
}

impl DedupKey {
    pub fn new(title: &str, year: Option<i32>) -> Self {
        Self {
            title: normalize_title(title),
            year,
        }
    }

    pub fn of(record: &Record) -> Self {
        Self::new(&record.title, record.year)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Deduplicated {
    pub kept: Vec<Record>,
    /// Each dropped record with the id of the record it duplicates.
    pub dropped: Vec<(Record, String)>,
}

/// Keep the first record for every [`DedupKey`], preserving input order.
pub fn deduplicate(records: Vec<Record>) -> Deduplicated {
    let mut first_seen: HashMap<DedupKey, String> = HashMap::new();
    let mut out = Deduplicated::default();
    for mut record in records {
        let key = DedupKey::of(&record);
        match first_seen.get(&key) {
            Some(original) => {
                record.drop_reason = Some(DropReason::Duplicate);
                out.dropped.push((record, original.clone()));
            }
            None => {
                first_seen.insert(key, record.record_id.clone());
                out.kept.push(record);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct CleanOutcome {
    pub kept: Vec<Record>,
    pub dropped_missing_abstract: Vec<Record>,
    pub dropped_post_search: Vec<Record>,
}

impl CleanOutcome {
    pub fn dropped(&self) -> usize {
        self.dropped_missing_abstract.len() + self.dropped_post_search.len()
    }
}

/// Drop records without an abstract or published after `search_year`.
///
/// A record with no year is kept: it cannot be shown to post-date the search.
/// Records missing an abstract are reported under that reason even when they
/// are also late.
pub fn clean_records(records: Vec<Record>, search_year: i32) -> CleanOutcome {
    let mut out = CleanOutcome::default();
    for mut record in records {
        if record.abstract_str().is_none() {
            record.drop_reason = Some(DropReason::MissingAbstract);
            out.dropped_missing_abstract.push(record);
        } else if record.year.is_some_and(|y| y > search_year) {
            record.drop_reason = Some(DropReason::PublishedAfterSearch);
            out.dropped_post_search.push(record);
        } else {
            out.kept.push(record);
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct GroundTruthOutcome {
    pub records: Vec<Record>,
    /// Inclusion-list entries that matched no record.
    pub unmatched: Vec<InclusionEntry>,
}

/// Label records from a review's inclusion list, matched on [`DedupKey`].
pub fn attach_ground_truth(
    mut records: Vec<Record>,
    inclusion_list: &[InclusionEntry],
) -> GroundTruthOutcome {
    let wanted: HashSet<DedupKey> = inclusion_list
        .iter()
        .map(|entry| DedupKey::new(&entry.title, entry.year))
        .collect();
    let mut matched = HashSet::new();
    for record in &mut records {
        let key = DedupKey::of(record);
        if wanted.contains(&key) {
            record.ground_truth = GroundTruth::IncludedInReview;
            matched.insert(key);
        } else {
            record.ground_truth = GroundTruth::ExcludedFromReview;
        }
    }
    let unmatched = inclusion_list
        .iter()
        .filter(|entry| !matched.contains(&DedupKey::new(&entry.title, entry.year)))
        .cloned()
        .collect::<Vec<_>>();
    for entry in &unmatched {
        log::warn!(
            "inclusion-list entry matched no record: {:?} ({:?})",
            entry.title,
            entry.year
        );
    }
    GroundTruthOutcome { records, unmatched }
}
