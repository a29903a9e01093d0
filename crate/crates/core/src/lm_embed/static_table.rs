use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LmError, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OovPolicy {
    #[default]
    Zero,
    /// Mean of all stored vectors.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    oov: OovPolicy,
    fallback: Vec<f64>,
    /// Fraction of vocabulary tokens (reserved symbols excluded) found in the source.
    pub coverage: f64,
}

impl StaticEmbeddingTable {
    pub fn new(dim: usize, vectors: BTreeMap<String, Vec<f64>>, oov: OovPolicy) -> Self {
        let fallback = match oov {
            OovPolicy::Zero => vec![0.0; dim],
            OovPolicy::Mean => {
                let mut m = vec![0.0; dim];
                for v in vectors.values() {
                    m.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                }
                let n = vectors.len().max(1) as f64;
                m.iter_mut().for_each(|a| *a /= n);
                m
            }
        };
        StaticEmbeddingTable {
            dim,
            vectors,
            oov,
            fallback,
            coverage: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn lookup(&self, token: &str) -> &[f64] {
        self.vectors.get(token).unwrap_or(&self.fallback)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_glove(path, self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice())))
    }
}

/// Writes `token v1 .. vd` lines.
pub fn write_glove<'a, I>(path: &Path, rows: I) -> std::io::Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let mut w = BufWriter::new(File::create(path)?);
    for (tok, v) in rows {
        write!(w, "{tok}")?;
        for x in v {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Reads a whitespace-separated `token v1 .. vd` file. The dimension is fixed by
/// the first non-blank line. With a vocabulary, only its tokens are kept and
/// coverage is measured against it.
pub fn load_static_embeddings(
    path: &Path,
    vocab: Option<&Vocab>,
    oov: OovPolicy,
) -> Result<StaticEmbeddingTable, LmError> {
    let unreadable = |reason: String| LmError::UnreadableFile {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| unreadable(e.to_string()))?;
    let mut dim = None;
    let mut vectors = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| unreadable(e.to_string()))?;
        let mut parts = line.split_whitespace();
        let Some(tok) = parts.next() else { continue };
        let values = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| unreadable(format!("line {}: {e}", i + 1)))?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(LmError::InconsistentDimension {
                path: path.to_path_buf(),
                line: i + 1,
                expected: d,
                found: values.len(),
            });
        }
        if vocab.is_none_or(|v| v.contains(tok)) {
            vectors.insert(tok.to_string(), values);
        }
    }
    let dim = dim.ok_or_else(|| unreadable("no vectors".into()))?;
    let mut table = StaticEmbeddingTable::new(dim, vectors, oov);
    if let Some(v) = vocab {
        let words = &v.tokens()[4..];
        let hits = words.iter().filter(|w| table.contains(w)).count();
        table.coverage = if words.is_empty() { 1.0 } else { hits as f64 / words.len() as f64 };
        log::info!("static vectors: {hits}/{} vocabulary tokens covered", words.len());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> std::path::PathBuf {
        let p = dir.join("v.txt");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_exact_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a 1 2 3 4\nb 0.5 0 0 -1\nc 0.1 0.2 0.3 0.4\n");
        let t = load_static_embeddings(&p, None, OovPolicy::Zero).unwrap();
        assert_eq!((t.len(), t.dim()), (3, 4));
        assert_eq!(t.lookup("c"), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(t.lookup("zzz"), &[0.0; 4]);
        let m = load_static_embeddings(&p, None, OovPolicy::Mean).unwrap();
        assert!((m.lookup("zzz")[0] - 1.6 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_dimension_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a 1 2 3 4\nb 1 2 3\n");
        match load_static_embeddings(&p, None, OovPolicy::Zero) {
            Err(LmError::InconsistentDimension { line: 2, expected: 4, found: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vocabulary_filter_and_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a 1 0\nq 0 1\n");
        let seqs = vec![vec!["a".to_string(), "b".to_string()]];
        let v = Vocab::from_sequences(&seqs, 1).unwrap();
        let t = load_static_embeddings(&p, Some(&v), OovPolicy::Zero).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.coverage, 0.5);
        assert!(load_static_embeddings(&dir.path().join("none"), None, OovPolicy::Zero).is_err());
    }
}
