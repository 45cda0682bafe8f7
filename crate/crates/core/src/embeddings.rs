//! Word vectors in fastText `.vec` text format and triad featurization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::triads::{Surface, Triad};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("table dimension {dim} gives {got} features, expected {expected}")]
    DimMismatch {
        dim: usize,
        got: usize,
        expected: usize,
    },
    #[error("example file: {0}")]
    ExampleFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    declared_count: usize,
    entries: HashMap<String, Vec<f64>>,
    duplicates: usize,
}

impl EmbeddingTable {
    /// Builds a table directly from word/vector pairs. The first occurrence
    /// of a word wins.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<EmbeddingTable, EmbeddingError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(EmbeddingError::Header("dimension must be positive".into()));
        }
        let mut table = EmbeddingTable {
            dim,
            declared_count: 0,
            entries: HashMap::new(),
            duplicates: 0,
        };
        for (i, (word, v)) in entries.into_iter().enumerate() {
            if v.len() != dim {
                return Err(EmbeddingError::Format {
                    line: i + 1,
                    reason: format!("expected {dim} values, found {}", v.len()),
                });
            }
            table.insert(word, v);
        }
        table.declared_count = table.entries.len();
        Ok(table)
    }

    fn insert(&mut self, word: String, v: Vec<f64>) {
        if self.entries.contains_key(&word) {
            self.duplicates += 1;
        } else {
            self.entries.insert(word, v);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn declared_count(&self) -> usize {
        self.declared_count
    }

    /// Number of repeated words that were ignored during loading.
    pub fn duplicate_warnings(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Exact lookup, optionally retrying with the lowercased word.
    pub fn lookup(&self, word: &str, lowercase_fallback: bool) -> Option<&[f64]> {
        self.get(word).or_else(|| {
            if lowercase_fallback {
                self.get(&word.to_lowercase())
            } else {
                None
            }
        })
    }
}

pub fn load_vectors(path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
    read_vectors(BufReader::new(File::open(path)?))
}

/// Loads only the rows whose word passes `keep`. Full fastText files have
/// millions of rows; a corpus needs a few thousand of them.
pub fn load_vectors_for<F: Fn(&str) -> bool>(path: &Path, keep: F) -> Result<EmbeddingTable, EmbeddingError> {
    read_vectors_with(BufReader::new(File::open(path)?), keep)
}

/// Reads the `.vec` text format: a `count dim` header line followed by one
/// `word v1 .. vdim` row per line.
pub fn read_vectors<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    read_vectors_with(reader, |_| true)
}

/// As [`read_vectors`], keeping only words that pass `keep`. Skipped rows
/// are not parsed beyond the word.
pub fn read_vectors_with<R: BufRead, F: Fn(&str) -> bool>(
    reader: R,
    keep: F,
) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| EmbeddingError::Header("empty file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => (
            c.parse::<usize>()
                .map_err(|_| EmbeddingError::Header(format!("bad count {c:?}")))?,
            d.parse::<usize>()
                .map_err(|_| EmbeddingError::Header(format!("bad dimension {d:?}")))?,
        ),
        _ => return Err(EmbeddingError::Header(format!("expected `count dim`, got {header:?}"))),
    };
    if dim == 0 {
        return Err(EmbeddingError::Header("dimension must be positive".into()));
    }
    let mut table = EmbeddingTable {
        dim,
        declared_count: count,
        entries: HashMap::with_capacity(count.min(1 << 22)),
        duplicates: 0,
    };
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let line = line.trim_end_matches([' ', '\r']);
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        if !keep(word) {
            continue;
        }
        let word = word.to_string();
        let values = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| EmbeddingError::Format {
                    line: lineno,
                    reason: format!("unparsable value {p:?}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != dim {
            return Err(EmbeddingError::Format {
                line: lineno,
                reason: format!("expected {dim} values, found {}", values.len()),
            });
        }
        table.insert(word, values);
    }
    if table.duplicates > 0 {
        log::warn!("{} duplicate words ignored", table.duplicates);
    }
    if rows != count {
        log::warn!("header declares {count} rows, found {rows}");
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadExample {
    pub features: Vec<f64>,
    pub first_is_subject: bool,
    pub triad_ref: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovReport {
    pub subject_misses: usize,
    pub verb_misses: usize,
    pub object_misses: usize,
    pub skipped_triads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorizeOptions {
    pub seed: u64,
    pub surface: Surface,
    pub lowercase_fallback: bool,
    /// Feature length the caller expects (`3 * dim`), if known.
    pub expected_features: Option<usize>,
}

impl VectorizeOptions {
    pub fn new(seed: u64, surface: Surface) -> Self {
        VectorizeOptions {
            seed,
            surface,
            lowercase_fallback: false,
            expected_features: None,
        }
    }
}

/// The argument-order coin for triad `index`. Each triad draws from its own
/// ChaCha stream, so the outcome does not depend on processing order.
pub fn subject_first(seed: u64, index: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.gen::<bool>()
}

/// Concatenates `verb ++ first ++ second`, where the order of subject and
/// object is decided by a seeded coin per triad. Triads with any
/// out-of-vocabulary word are skipped and counted.
pub fn vectorize_triads(
    table: &EmbeddingTable,
    triads: &[Triad],
    opts: &VectorizeOptions,
) -> Result<(Vec<TriadExample>, OovReport), EmbeddingError> {
    let width = 3 * table.dim();
    if let Some(expected) = opts.expected_features {
        if expected != width {
            return Err(EmbeddingError::DimMismatch {
                dim: table.dim(),
                got: width,
                expected,
            });
        }
    }
    let mut report = OovReport::default();
    let mut examples = Vec::with_capacity(triads.len());
    for (index, triad) in triads.iter().enumerate() {
        let [s, v, o] = triad.surface(opts.surface);
        let subj = table.lookup(s, opts.lowercase_fallback);
        let verb = table.lookup(v, opts.lowercase_fallback);
        let obj = table.lookup(o, opts.lowercase_fallback);
        report.subject_misses += subj.is_none() as usize;
        report.verb_misses += verb.is_none() as usize;
        report.object_misses += obj.is_none() as usize;
        let (Some(subj), Some(verb), Some(obj)) = (subj, verb, obj) else {
            report.skipped_triads += 1;
            continue;
        };
        let first_is_subject = subject_first(opts.seed, index as u64);
        let (a, b) = if first_is_subject { (subj, obj) } else { (obj, subj) };
        let mut features = Vec::with_capacity(width);
        features.extend_from_slice(verb);
        features.extend_from_slice(a);
        features.extend_from_slice(b);
        examples.push(TriadExample {
            features,
            first_is_subject,
            triad_ref: triad.key(),
        });
    }
    Ok((examples, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleHeader {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub refs: Vec<String>,
}

/// Writes examples as one JSON header line followed by `n` records of a
/// label byte and `3 * dim` little-endian f64 values.
pub fn write_examples<W: Write>(
    mut w: W,
    dim: usize,
    seed: u64,
    examples: &[TriadExample],
) -> Result<(), EmbeddingError> {
    let header = ExampleHeader {
        dim,
        n: examples.len(),
        seed,
        refs: examples.iter().map(|e| e.triad_ref.clone()).collect(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| EmbeddingError::ExampleFile(e.to_string()))?;
    w.write_all(b"\n")?;
    for e in examples {
        if e.features.len() != 3 * dim {
            return Err(EmbeddingError::DimMismatch {
                dim,
                got: e.features.len(),
                expected: 3 * dim,
            });
        }
        w.write_all(&[e.first_is_subject as u8])?;
        for x in &e.features {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples<R: BufRead>(mut r: R) -> Result<(ExampleHeader, Vec<TriadExample>), EmbeddingError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: ExampleHeader =
        serde_json::from_str(&line).map_err(|e| EmbeddingError::ExampleFile(e.to_string()))?;
    if header.refs.len() != header.n {
        return Err(EmbeddingError::ExampleFile("ref count does not match n".into()));
    }
    let width = 3 * header.dim;
    let mut examples = Vec::with_capacity(header.n);
    let mut label = [0u8; 1];
    let mut buf = vec![0u8; 8 * width];
    for triad_ref in &header.refs {
        r.read_exact(&mut label)?;
        r.read_exact(&mut buf)?;
        let features = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        examples.push(TriadExample {
            features,
            first_is_subject: label[0] != 0,
            triad_ref: triad_ref.clone(),
        });
    }
    Ok((header, examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triads::{WordOrder, WordRecord};

    fn word(s: &str, id: usize) -> WordRecord {
        WordRecord {
            form: s.into(),
            lemma: s.into(),
            upos: "NOUN".into(),
            token_id: id,
        }
    }

    fn triad(s: &str, v: &str, o: &str) -> Triad {
        Triad {
            corpus: "toy".into(),
            sent_id: format!("{s}-{v}-{o}"),
            subject: word(s, 1),
            verb: word(v, 2),
            object: word(o, 3),
            original_order: WordOrder::SVO,
            subject_is_pron: false,
            object_is_pron: false,
            same_arguments: false,
        }
    }

    fn toy_table() -> EmbeddingTable {
        read_vectors("3 3\ndogs 1 0 0\nchew 0 1 0\nbones 0 0 1 \n".as_bytes()).unwrap()
    }

    #[test]
    fn loads_small_file() {
        let t = read_vectors("2 3\ncat 1 0 0\ndog 0 1 0\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("dog"), Some(&[0.0, 1.0, 0.0][..]));
        assert_eq!(t.declared_count(), 2);
    }

    #[test]
    fn filtered_load_skips_other_rows() {
        // the malformed row is never parsed because it is filtered out
        let text = "3 2\ncat 1 0\nbad x y\ndog 0 1\n";
        let t = read_vectors_with(text.as_bytes(), |w| w != "bad").unwrap();
        assert_eq!(t.len(), 2);
        let t = read_vectors_with(text.as_bytes(), |w| w == "dog").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.declared_count(), 3);
    }

    #[test]
    fn short_row_is_format_error() {
        let err = read_vectors("2 3\ncat 1 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbeddingError::Format { line: 2, .. }), "{err}");
        let err = read_vectors("1 3\ncat 1 x 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbeddingError::Format { line: 2, .. }), "{err}");
    }

    #[test]
    fn bad_header() {
        assert!(matches!(read_vectors("".as_bytes()), Err(EmbeddingError::Header(_))));
        assert!(matches!(read_vectors("3\n".as_bytes()), Err(EmbeddingError::Header(_))));
        assert!(matches!(read_vectors("a 3\n".as_bytes()), Err(EmbeddingError::Header(_))));
        assert!(matches!(read_vectors("1 0\n".as_bytes()), Err(EmbeddingError::Header(_))));
    }

    #[test]
    fn duplicates_keep_first() {
        let t = read_vectors("2 2\ncat 1 0\ncat 0 1\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.duplicate_warnings(), 1);
        assert_eq!(t.get("cat"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn lookup_is_case_sensitive_unless_asked() {
        let t = toy_table();
        assert!(t.lookup("Dogs", false).is_none());
        assert!(t.lookup("Dogs", true).is_some());
    }

    #[test]
    fn concatenation_order() {
        let t = toy_table();
        let triads = [triad("dogs", "chew", "bones")];
        // find a seed whose first draw is subject-first, and one that is not
        let seed_sf = (0..64).find(|&s| subject_first(s, 0)).unwrap();
        let seed_of = (0..64).find(|&s| !subject_first(s, 0)).unwrap();

        let (ex, _) = vectorize_triads(&t, &triads, &VectorizeOptions::new(seed_sf, Surface::Form)).unwrap();
        assert!(ex[0].first_is_subject);
        assert_eq!(ex[0].features, vec![0., 1., 0., 1., 0., 0., 0., 0., 1.]);

        let (ex, _) = vectorize_triads(&t, &triads, &VectorizeOptions::new(seed_of, Surface::Form)).unwrap();
        assert!(!ex[0].first_is_subject);
        assert_eq!(ex[0].features, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.]);
    }

    #[test]
    fn oov_object_skips_triad() {
        let t = toy_table();
        let (ex, oov) = vectorize_triads(
            &t,
            &[triad("dogs", "chew", "sticks"), triad("dogs", "chew", "bones")],
            &VectorizeOptions::new(1, Surface::Form),
        )
        .unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(oov.object_misses, 1);
        assert_eq!(oov.subject_misses, 0);
        assert_eq!(oov.skipped_triads, 1);
    }

    #[test]
    fn dim_mismatch_is_reported() {
        let mut opts = VectorizeOptions::new(1, Surface::Form);
        opts.expected_features = Some(900);
        assert!(matches!(
            vectorize_triads(&toy_table(), &[], &opts),
            Err(EmbeddingError::DimMismatch { got: 9, expected: 900, .. })
        ));
    }

    #[test]
    fn three_hundred_dims_give_nine_hundred_features() {
        let words = ["dogs", "chew", "bones"];
        let t = EmbeddingTable::from_entries(
            300,
            words.iter().enumerate().map(|(i, w)| (w.to_string(), vec![i as f64; 300])),
        )
        .unwrap();
        let mut opts = VectorizeOptions::new(7, Surface::Form);
        opts.expected_features = Some(900);
        let (ex, _) = vectorize_triads(&t, &[triad("dogs", "chew", "bones")], &opts).unwrap();
        assert_eq!(ex[0].features.len(), 900);
    }

    #[test]
    fn example_file_roundtrip() {
        let t = toy_table();
        let triads = vec![triad("dogs", "chew", "bones"), triad("bones", "chew", "dogs")];
        let (ex, _) = vectorize_triads(&t, &triads, &VectorizeOptions::new(3, Surface::Form)).unwrap();
        let mut buf = Vec::new();
        write_examples(&mut buf, 3, 3, &ex).unwrap();
        let (header, back) = read_examples(buf.as_slice()).unwrap();
        assert_eq!(header.n, 2);
        assert_eq!(header.seed, 3);
        assert_eq!(back, ex);
    }
}
