//! CSV export of feature vectors for external plotting tools.
//!
//! Columns: `label,kind,f0,...,f{d-1}`. `kind` is free text; the synthesis
//! pipeline uses `anchor` and `synthetic`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Matrix, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub label: String,
    pub kind: String,
    pub values: Vec<f64>,
}

fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["label".to_owned(), "kind".to_owned()];
    h.extend((0..dim).map(|i| format!("f{i}")));
    h
}

pub fn write_embeddings<W: std::io::Write, T: Scalar>(
    out: W,
    vectors: &Matrix<T>,
    labels: &[String],
    kinds: &[String],
) -> Result<()> {
    if labels.len() != vectors.rows() || kinds.len() != vectors.rows() {
        return Err(Error::Argument(format!(
            "{} vectors, {} labels, {} kinds",
            vectors.rows(),
            labels.len(),
            kinds.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(vectors.cols()))?;
    for ((row, label), kind) in vectors.iter_rows().zip(labels).zip(kinds) {
        let mut rec = vec![label.clone(), kind.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn export_embeddings<T: Scalar>(
    vectors: &Matrix<T>,
    labels: &[String],
    kinds: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(std::io::BufWriter::new(file), vectors, labels, kinds)
}

pub fn read_embeddings<R: std::io::Read>(input: R) -> Result<Vec<EmbeddingRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let label = rec.get(0).unwrap_or_default().to_owned();
        let kind = rec.get(1).unwrap_or_default().to_owned();
        let values = rec
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Dataset(format!("bad embedding value {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        rows.push(EmbeddingRow { label, kind, values });
    }
    Ok(rows)
}
