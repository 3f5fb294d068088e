use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use screenkit::corpus::{build_balanced_subset, write_corpus, SubsetSpec};
use screenkit::GroundTruth;
use serde::Serialize;

use super::read_kept_records;
use crate::manifest::{digest_files, ManifestBuilder};

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Labelled corpus file; repeat for one file per review.
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    /// Seed for choosing excluded records.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Excluded records drawn from each review.
    #[arg(long, default_value_t = 23)]
    pub excludes_per_review: usize,
    /// Subset file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct SampleSummary {
    reviews: usize,
    records: usize,
    positives: usize,
    negatives: usize,
}

pub fn sample(args: &SampleArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("sample", args);
    run.corpus_digest = Some(digest_files(&args.corpus)?);

    let records = read_kept_records(&args.corpus)?;
    let spec = SubsetSpec {
        seed: args.seed,
        excludes_per_review: args.excludes_per_review,
        ..SubsetSpec::default()
    };
    let subset = build_balanced_subset(&records, &spec)?;

    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_corpus(BufWriter::new(file), &subset)?;

    let positives = subset
        .iter()
        .filter(|r| r.ground_truth == GroundTruth::IncludedInReview)
        .count();
    let summary = SampleSummary {
        reviews: subset
            .iter()
            .map(|r| r.review_id.as_str())
            .collect::<BTreeSet<_>>()
            .len(),
        records: subset.len(),
        positives,
        negatives: subset.len() - positives,
    };
    eprintln!(
        "subset: {} records ({} included, {} excluded) over {} reviews",
        summary.records, summary.positives, summary.negatives, summary.reviews
    );
    run.finish(&summary, manifest, Some(&args.out))
}
