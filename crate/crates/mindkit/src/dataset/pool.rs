//! Line-delimited persistence for rationale pools and sample datasets.
//!
//! Pool records are one self-describing JSON object per line with exactly
//! the fields {text, polarity, parent_id, generator_id, prompt_digest,
//! created_at}. Writes funnel through a single writer; each record is
//! flushed as a whole line so a crash can never leave a partial record.

use super::{Polarity, PoolFile, Provenance, Rationale, Sample};
use crate::error::{MindError, Result};
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolRecord {
    text: String,
    polarity: Polarity,
    parent_id: String,
    generator_id: String,
    prompt_digest: String,
    created_at: String,
}

impl From<&Rationale> for PoolRecord {
    fn from(r: &Rationale) -> Self {
        PoolRecord {
            text: r.text.clone(),
            polarity: r.polarity,
            parent_id: r.parent_id.clone(),
            generator_id: r.provenance.generator_id.clone(),
            prompt_digest: r.provenance.prompt_digest.clone(),
            created_at: r.provenance.created_at.clone(),
        }
    }
}

impl From<PoolRecord> for Rationale {
    fn from(rec: PoolRecord) -> Self {
        Rationale {
            text: rec.text,
            polarity: rec.polarity,
            parent_id: rec.parent_id,
            provenance: Provenance {
                generator_id: rec.generator_id,
                prompt_digest: rec.prompt_digest,
                created_at: rec.created_at,
            },
        }
    }
}

/// Single-writer append handle for one pool file.
pub struct PoolWriter {
    writer: BufWriter<File>,
    path: PathBuf,
    polarity: Polarity,
    written: usize,
}

impl PoolWriter {
    /// Open `path` for appending, creating it if missing.
    pub fn open(path: impl AsRef<Path>, polarity: Polarity) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| MindError::io(&path, e))?;
        Ok(PoolWriter {
            writer: BufWriter::new(file),
            path,
            polarity,
            written: 0,
        })
    }

    /// Validate and append one batch of rationales, one record per line.
    /// `index_base` offsets the record index reported on validation errors.
    pub fn append(&mut self, rationales: &[Rationale], index_base: usize) -> Result<()> {
        for (i, r) in rationales.iter().enumerate() {
            let violations = r.validate("record");
            if let Some(v) = violations.first() {
                return Err(MindError::InvalidRecord {
                    index: index_base + i,
                    code: v.code.to_string(),
                    detail: v.detail.clone(),
                });
            }
            if r.polarity != self.polarity {
                return Err(MindError::InvalidRecord {
                    index: index_base + i,
                    code: "POLARITY_MISMATCH".to_string(),
                    detail: format!("{} record in {} pool", r.polarity, self.polarity),
                });
            }
            let line = serde_json::to_string(&PoolRecord::from(r))
                .map_err(|e| MindError::BadResponse(e.to_string()))?;
            self.writer
                .write_all(line.as_bytes())
                .and_then(|_| self.writer.write_all(b"\n"))
                .map_err(|e| MindError::io(&self.path, e))?;
            self.written += 1;
        }
        self.writer.flush().map_err(|e| MindError::io(&self.path, e))
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<PoolFile> {
        self.writer.flush().map_err(|e| MindError::io(&self.path, e))?;
        Ok(PoolFile {
            path: self.path,
            polarity: self.polarity,
            record_count: self.written,
        })
    }
}

/// Write `rationales` to a fresh pool file at `path`.
///
/// All records must satisfy the rationale invariants and carry `polarity`;
/// the first offending record index is reported otherwise.
pub fn write_pool(
    rationales: &[Rationale],
    path: impl AsRef<Path>,
    polarity: Polarity,
) -> Result<PoolFile> {
    let path = path.as_ref();
    // Validate everything before touching the filesystem.
    for (i, r) in rationales.iter().enumerate() {
        if let Some(v) = r.validate("record").first() {
            return Err(MindError::InvalidRecord {
                index: i,
                code: v.code.to_string(),
                detail: v.detail.clone(),
            });
        }
        if r.polarity != polarity {
            return Err(MindError::InvalidRecord {
                index: i,
                code: "POLARITY_MISMATCH".to_string(),
                detail: format!("{} record in {} pool", r.polarity, polarity),
            });
        }
    }
    if path.exists() {
        std::fs::remove_file(path).map_err(|e| MindError::io(path, e))?;
    }
    let mut writer = PoolWriter::open(path, polarity)?;
    writer.append(rationales, 0)?;
    writer.finish()
}

/// Read a pool file back into rationales. Parse errors cite the 1-based line.
pub fn read_pool(path: impl AsRef<Path>) -> Result<Vec<Rationale>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MindError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MindError::io(path, e))?;
        let record: PoolRecord = serde_json::from_str(&line).map_err(|e| MindError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record.into());
    }
    Ok(out)
}

/// Write a dataset file: one sample per line.
pub fn write_dataset(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for (i, s) in samples.iter().enumerate() {
        if let Some(v) = s.validate().first() {
            return Err(MindError::InvalidRecord {
                index: i,
                code: v.code.to_string(),
                detail: v.detail.clone(),
            });
        }
    }
    let file = File::create(path).map_err(|e| MindError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| MindError::BadResponse(e.to_string()))?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| MindError::io(path, e))?;
    }
    writer.flush().map_err(|e| MindError::io(path, e))
}

/// Read a dataset file. Parse errors cite the 1-based line.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MindError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MindError::io(path, e))?;
        let sample: Sample = serde_json::from_str(&line).map_err(|e| MindError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{test_rationale, test_sample};
    use proptest::prelude::*;

    #[test]
    fn count_is_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pos.jsonl");
        let rs: Vec<Rationale> = (0..3)
            .map(|i| test_rationale("s1", &format!("Hence variant {}.", i), Polarity::Positive))
            .collect();
        let pool = write_pool(&rs, &path, Polarity::Positive).unwrap();
        assert_eq!(pool.record_count, 3);
    }

    #[test]
    fn empty_list_writes_empty_pool() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pos.jsonl");
        let pool = write_pool(&[], &path, Polarity::Positive).unwrap();
        assert_eq!(pool.record_count, 0);
        assert_eq!(read_pool(&path).unwrap(), vec![]);
    }

    #[test]
    fn delimiter_leak_is_rejected_at_index_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pos.jsonl");
        let bad = test_rationale("s1", "a\n\n~~~\n\nb", Polarity::Positive);
        let err = write_pool(&[bad], &path, Polarity::Positive).unwrap_err();
        match err {
            MindError::InvalidRecord { index, code, .. } => {
                assert_eq!(index, 0);
                assert_eq!(code, "DELIMITER_LEAK");
            }
            other => panic!("unexpected error {:?}", other),
        }
        assert!(!path.exists(), "no file should be created on rejection");
    }

    #[test]
    fn truncated_line_is_a_parse_error_citing_line_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pos.jsonl");
        std::fs::write(&path, "{\"text\": \"trunc").unwrap();
        let err = read_pool(&path).unwrap_err();
        match err {
            MindError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_pool("/nonexistent/pool.jsonl").unwrap_err();
        assert!(matches!(err, MindError::Io { .. }));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let samples = vec![test_sample("a"), test_sample("b")];
        write_dataset(&samples, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), samples);
    }

    #[test]
    fn pool_writer_appends_across_batches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pos.jsonl");
        let mut w = PoolWriter::open(&path, Polarity::Positive).unwrap();
        let a = test_rationale("s1", "Hence one.", Polarity::Positive);
        let b = test_rationale("s2", "Hence two.", Polarity::Positive);
        w.append(std::slice::from_ref(&a), 0).unwrap();
        w.append(std::slice::from_ref(&b), 1).unwrap();
        let pool = w.finish().unwrap();
        assert_eq!(pool.record_count, 2);
        assert_eq!(read_pool(&path).unwrap(), vec![a, b]);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        // Printable-ish text without the delimiter, labels, or edge whitespace.
        "[a-zA-Z0-9 ,.;:'()-]{1,80}"
            .prop_map(|s| s.trim().to_string())
            .prop_filter("nonempty", |s| !s.is_empty())
    }

    proptest! {
        #[test]
        fn pool_round_trip_is_identity(
            texts in proptest::collection::vec(arb_text(), 0..40),
            positives in proptest::collection::vec(any::<bool>(), 0..40),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let pos_path = dir.path().join("pos.jsonl");
            let neg_path = dir.path().join("neg.jsonl");
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for (i, text) in texts.iter().enumerate() {
                let positive = positives.get(i).copied().unwrap_or(true);
                if positive {
                    pos.push(test_rationale(&format!("s{}", i), text, Polarity::Positive));
                } else {
                    neg.push(test_rationale(&format!("s{}", i), text, Polarity::Negative));
                }
            }
            write_pool(&pos, &pos_path, Polarity::Positive).unwrap();
            write_pool(&neg, &neg_path, Polarity::Negative).unwrap();
            prop_assert_eq!(read_pool(&pos_path).unwrap(), pos);
            prop_assert_eq!(read_pool(&neg_path).unwrap(), neg);
        }
    }
}
