use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use screenkit::corpus::{
    attach_ground_truth, clean_records, deduplicate, parse_ris, read_inclusion_list, to_record,
    write_corpus, CorpusError, MalformedRecord,
};
use screenkit::{GroundTruth, Record, ReviewProtocol};
use serde::Serialize;

use crate::manifest::{digest_files, ManifestBuilder};

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// RIS export of the review's search results; repeat for several files.
    #[arg(long = "ris", required = true)]
    pub ris: Vec<PathBuf>,
    /// Review protocol JSON; supplies the review id and search year.
    #[arg(long)]
    pub protocol: PathBuf,
    /// The review's included studies, as `title,year` CSV or RIS.
    #[arg(long)]
    pub inclusions: Option<PathBuf>,
    /// Corpus file to write (line-delimited JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Skip malformed RIS blocks instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    review_id: String,
    drafts: usize,
    malformed: usize,
    duplicates: usize,
    missing_abstract: usize,
    published_after_search: usize,
    kept: usize,
    included: usize,
    unmatched_inclusions: usize,
    /// Share of parsed drafts not kept, as a percentage.
    drop_rate_percent: f64,
}

pub fn ingest(args: &IngestArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("ingest", args);
    let mut inputs = args.ris.clone();
    inputs.extend(args.inclusions.iter().cloned());
    run.corpus_digest = Some(digest_files(&inputs)?);

    let protocol_text = fs::read_to_string(&args.protocol)
        .with_context(|| format!("reading {}", args.protocol.display()))?;
    let protocol = ReviewProtocol::from_json(&protocol_text)
        .with_context(|| format!("protocol {}", args.protocol.display()))?;
    let review_id = protocol.review_id.as_str();

    let mut malformed: Vec<MalformedRecord> = Vec::new();
    let mut records = Vec::new();
    let mut ordinal = 0;
    for path in &args.ris {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed =
            parse_ris(&bytes, path).with_context(|| format!("parsing {}", path.display()))?;
        malformed.extend(parsed.errors);
        for draft in &parsed.drafts {
            ordinal += 1;
            match to_record(draft, review_id, ordinal) {
                Ok(record) => records.push(record),
                Err(CorpusError::MissingTitle {
                    source_file,
                    start,
                    end,
                }) => malformed.push(MalformedRecord {
                    source_file,
                    line_span: (start, end),
                    message: "no TI or T1 title".into(),
                }),
                Err(other) => return Err(other.into()),
            }
        }
    }
    for problem in &malformed {
        if args.lenient {
            log::warn!("skipping malformed record {problem}");
        } else {
            eprintln!("malformed record {problem}");
        }
    }
    if !malformed.is_empty() && !args.lenient {
        bail!(
            "{} malformed RIS record(s); fix the input or rerun with --lenient",
            malformed.len()
        );
    }

    let order: Vec<String> = records.iter().map(|r| r.record_id.clone()).collect();
    let drafts = records.len();
    let deduped = deduplicate(records);
    let duplicates = deduped.dropped.len();
    let cleaned = clean_records(deduped.kept, protocol.search_year);
    let (missing_abstract, published_after_search) = (
        cleaned.dropped_missing_abstract.len(),
        cleaned.dropped_post_search.len(),
    );

    let inclusion_list = match &args.inclusions {
        Some(path) => {
            read_inclusion_list(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => Vec::new(),
    };
    let labelled = if args.inclusions.is_some() {
        attach_ground_truth(cleaned.kept, &inclusion_list)
    } else {
        screenkit::corpus::GroundTruthOutcome {
            records: cleaned.kept,
            unmatched: Vec::new(),
        }
    };
    let kept = labelled.records.len();
    let included = labelled
        .records
        .iter()
        .filter(|r| r.ground_truth == GroundTruth::IncludedInReview)
        .count();

    // Dropped records stay in the file, tagged with their reason, in input order.
    let mut by_id: HashMap<String, Record> = labelled
        .records
        .into_iter()
        .chain(deduped.dropped.into_iter().map(|(record, _)| record))
        .chain(cleaned.dropped_missing_abstract)
        .chain(cleaned.dropped_post_search)
        .map(|r| (r.record_id.clone(), r))
        .collect();
    let ordered: Vec<Record> = order.iter().filter_map(|id| by_id.remove(id)).collect();

    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_corpus(BufWriter::new(file), &ordered)?;

    let summary = IngestSummary {
        review_id: review_id.to_string(),
        drafts,
        malformed: malformed.len(),
        duplicates,
        missing_abstract,
        published_after_search,
        kept,
        included,
        unmatched_inclusions: labelled.unmatched.len(),
        drop_rate_percent: drop_rate_percent(drafts, kept),
    };
    eprintln!(
        "{}: {} drafts, {} duplicates, {} without abstract, {} after search year, {} kept ({} included)",
        summary.review_id, drafts, duplicates, missing_abstract, published_after_search, kept, included
    );
    run.finish(&summary, manifest, Some(&args.out))
}

/// Percentage of drafts removed, rounded to 2 decimal places.
pub fn drop_rate_percent(drafts: usize, kept: usize) -> f64 {
    if drafts == 0 {
        return 0.0;
    }
    let rate = (drafts - kept) as f64 / drafts as f64 * 100.0;
    (rate * 100.0).round() / 100.0
}
