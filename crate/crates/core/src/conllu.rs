//! CoNLL-U reader.
//!
//! Only basic dependencies are kept: multiword-token ranges (`1-2`) and empty
//! nodes (`8.1`) are skipped. Sentences whose head graph is not a tree are
//! dropped and reported instead of failing the whole document.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConlluError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("token {0} does not exist in sentence")]
    UnknownToken(usize),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

fn parse_err(line: usize, reason: impl Into<String>) -> ConlluError {
    ConlluError::Parse {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// Renders the token as a 10-column CoNLL-U line (without newline).
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            self.form,
            self.lemma,
            self.upos,
            self.xpos,
            self.feats,
            self.head,
            self.deprel,
            self.deps,
            self.misc
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub text: Option<String>,
    /// Comment lines in file order, without the leading `#`.
    pub metadata: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Tokens attached to `head_id` with exactly the relation `deprel`, in
    /// linear order. Subtyped relations such as `nsubj:pass` do not match
    /// `nsubj`.
    pub fn dependents(&self, head_id: usize, deprel: &str) -> Result<Vec<&Token>, ConlluError> {
        if head_id == 0 || head_id > self.tokens.len() {
            return Err(ConlluError::UnknownToken(head_id));
        }
        Ok(self
            .tokens
            .iter()
            .filter(|t| t.head == head_id && t.deprel == deprel)
            .collect())
    }

    /// Checks that ids are `1..=n`, heads are in range, exactly one token
    /// hangs off the root, and every head chain
    /// reaches the root without a cycle.
    pub fn check_tree(&self) -> Result<(), String> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.id != i + 1 {
                return Err(format!("token ids not contiguous at position {}", i + 1));
            }
            if t.head > n {
                return Err(format!("token {} has head {} beyond sentence length", t.id, t.head));
            }
            if t.head == t.id {
                return Err(format!("token {} is its own head", t.id));
            }
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(format!("{roots} tokens attached to the root, expected 1"));
        }
        // 0 = unvisited, 1 = on current path, 2 = reaches root
        let mut state = vec![0u8; n + 1];
        state[0] = 2;
        for start in 1..=n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                cur = self.tokens[cur - 1].head;
            }
            if state[cur] == 1 {
                return Err(format!("cycle through token {cur}"));
            }
            for id in path {
                state[id] = 2;
            }
        }
        Ok(())
    }

    /// Serializes the sentence as CoNLL-U, terminated by a blank line.
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for m in &self.metadata {
            out.push('#');
            out.push_str(m);
            out.push('\n');
        }
        for t in &self.tokens {
            out.push_str(&t.to_line());
            out.push('\n');
        }
        out.push('\n');
        out
    }
}

/// A sentence dropped because its head graph is not a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub sent_id: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<Sentence>,
    pub rejected: Vec<Rejected>,
}

/// Parses a document, dropping non-tree sentences silently. Use
/// [`read_document`] to see what was dropped.
pub fn parse_document(text: &str) -> Result<Vec<Sentence>, ConlluError> {
    read_document(text).map(|d| d.sentences)
}

pub fn read_document(text: &str) -> Result<Document, ConlluError> {
    let mut doc = Document::default();
    let mut builder = SentenceBuilder::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            builder.finish(&mut doc);
            continue;
        }
        if builder.start_line == 0 {
            builder.start_line = lineno;
        }
        if let Some(comment) = line.strip_prefix('#') {
            builder.metadata.push(comment.to_string());
            continue;
        }
        builder.push_token_line(line, lineno)?;
    }
    builder.finish(&mut doc);
    Ok(doc)
}

#[derive(Default)]
struct SentenceBuilder {
    metadata: Vec<String>,
    tokens: Vec<Token>,
    start_line: usize,
    count: usize,
}

impl SentenceBuilder {
    fn push_token_line(&mut self, line: &str, lineno: usize) -> Result<(), ConlluError> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(parse_err(
                lineno,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id_col = cols[0];
        if id_col.contains('-') || id_col.contains('.') {
            // multiword range or empty node
            return Ok(());
        }
        let id: usize = id_col
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-numeric token id {id_col:?}")))?;
        if id == 0 {
            return Err(parse_err(lineno, "token id must be positive"));
        }
        if self.tokens.iter().any(|t| t.id == id) {
            return Err(parse_err(lineno, format!("duplicate token id {id}")));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-numeric head {:?}", cols[6])))?;
        for (name, idx) in [("FORM", 1), ("LEMMA", 2), ("UPOS", 3), ("DEPREL", 7)] {
            if cols[idx].is_empty() {
                return Err(parse_err(lineno, format!("empty {name} column")));
            }
        }
        self.tokens.push(Token {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head,
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
        Ok(())
    }

    fn finish(&mut self, doc: &mut Document) {
        if self.metadata.is_empty() && self.tokens.is_empty() {
            return;
        }
        let metadata = std::mem::take(&mut self.metadata);
        let tokens = std::mem::take(&mut self.tokens);
        let line = std::mem::take(&mut self.start_line);
        if tokens.is_empty() {
            // comment-only block, e.g. a document header
            return;
        }
        self.count += 1;
        let sent_id = metadata_value(&metadata, "sent_id")
            .unwrap_or_else(|| format!("s{}", self.count));
        let text = metadata_value(&metadata, "text");
        let sentence = Sentence {
            sent_id,
            text,
            metadata,
            tokens,
        };
        match sentence.check_tree() {
            Ok(()) => doc.sentences.push(sentence),
            Err(reason) => {
                log::warn!("rejecting sentence {} at line {line}: {reason}", sentence.sent_id);
                doc.rejected.push(Rejected {
                    sent_id: sentence.sent_id,
                    line,
                    reason,
                });
            }
        }
    }
}

fn metadata_value(metadata: &[String], key: &str) -> Option<String> {
    metadata.iter().find_map(|m| {
        let (k, v) = m.split_once('=')?;
        (k.trim() == key).then(|| v.trim().to_string())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Unsplit,
}

impl Split {
    /// Infers the split from UD file naming (`xx_corpus-ud-train.conllu`).
    pub fn from_path(path: &Path) -> Split {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        if name.contains("-train") {
            Split::Train
        } else if name.contains("-dev") {
            Split::Dev
        } else if name.contains("-test") {
            Split::Test
        } else {
            Split::Unsplit
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Treebank {
    pub language: String,
    pub corpus_name: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
    pub rejected: Vec<Rejected>,
}

impl Treebank {
    pub fn from_str(
        language: &str,
        corpus_name: &str,
        split: Split,
        text: &str,
    ) -> Result<Treebank, ConlluError> {
        let doc = read_document(text)?;
        Ok(Treebank {
            language: language.to_string(),
            corpus_name: corpus_name.to_string(),
            split,
            sentences: doc.sentences,
            rejected: doc.rejected,
        })
    }

    /// Loads a treebank file; the split is taken from the file name.
    pub fn load(language: &str, corpus_name: &str, path: &Path) -> Result<Treebank, ConlluError> {
        let text = fs::read_to_string(path).map_err(|e| ConlluError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_str(language, corpus_name, Split::from_path(path), &text)
    }
}
