use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{Choice, ExperimentError, Runner, Task};

/// Coder decisions keyed by `(session_id, item_id)`.
pub type Adjudications = BTreeMap<(String, String), bool>;

const HEADER: [&str; 7] = ["session_id", "item_id", "verb", "left", "right", "typed_sentence", "correct"];

fn adj_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Adjudication(e.to_string())
}

fn one_line(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// TSV of every construct-sentence response with an empty `correct`
/// column for a human coder. Returns the number of rows written.
pub fn export_for_adjudication<W: Write>(runner: &Runner, w: W) -> Result<usize, ExperimentError> {
    let mut out = csv::WriterBuilder::new().delimiter(b'\t').from_writer(w);
    out.write_record(HEADER).map_err(adj_err)?;
    let mut rows = 0;
    for s in runner.sessions().filter(|s| s.task == Task::ConstructSentence) {
        for r in &s.responses {
            let Choice::Sentence { left, right, typed } = &r.choice else {
                continue;
            };
            let verb = runner.lists().item(&r.item_id).map(|i| i.verb.as_str()).unwrap_or("");
            let typed = typed.as_deref().map(one_line).unwrap_or_default();
            out.write_record([
                s.session_id.as_str(),
                r.item_id.as_str(),
                verb,
                left,
                right,
                typed.as_str(),
                "",
            ])
            .map_err(adj_err)?;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(rows)
}

/// Reads a coded adjudication file. Rows with an empty `correct` column
/// are left undecided.
pub fn import_adjudication<R: Read>(r: R) -> Result<Adjudications, ExperimentError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(true)
        .from_reader(r);
    let headers = rdr.headers().map_err(adj_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExperimentError::Adjudication(format!("missing column {name}")))
    };
    let (si, ii, ci) = (col("session_id")?, col("item_id")?, col("correct")?);
    let mut out = Adjudications::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(adj_err)?;
        let value = rec.get(ci).unwrap_or("").trim().to_ascii_lowercase();
        let decided = match value.as_str() {
            "" => continue,
            "1" | "true" | "yes" | "y" | "correct" => true,
            "0" | "false" | "no" | "n" | "incorrect" => false,
            other => {
                return Err(ExperimentError::Adjudication(format!(
                    "row {}: cannot read correct = {other:?}",
                    n + 2
                )))
            }
        };
        let key = (rec.get(si).unwrap_or("").to_string(), rec.get(ii).unwrap_or("").to_string());
        out.insert(key, decided);
    }
    Ok(out)
}
