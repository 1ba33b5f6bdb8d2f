use std::collections::{BTreeSet, HashSet};
use std::path::Path;

/// Rows of a local tool file. The first `key_width` columns are the submit
/// key; the rest are extractable fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureData {
    header: Vec<String>,
    key_width: usize,
    rows: Vec<Vec<String>>,
    pairs: HashSet<(String, String)>,
}

impl FixtureData {
    pub fn from_path(path: &Path, key_width: usize, symmetric: bool) -> Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| format!("{}: {e}", path.display()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.len() < key_width {
            return Err(format!("{}: fewer columns than the submit key", path.display()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
            rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Self::build(header, key_width, rows, symmetric))
    }

    pub fn from_pairs(field: &str, pairs: impl IntoIterator<Item = (String, String)>, symmetric: bool) -> Self {
        let header = vec![format!("Query{field}"), field.to_string()];
        let rows = pairs.into_iter().map(|(a, b)| vec![a, b]).collect();
        Self::build(header, 1, rows, symmetric)
    }

    fn build(header: Vec<String>, key_width: usize, mut rows: Vec<Vec<String>>, symmetric: bool) -> Self {
        if symmetric && header.len() == 2 {
            let existing: BTreeSet<Vec<String>> = rows.iter().cloned().collect();
            let reversed: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r[1].clone(), r[0].clone()])
                .filter(|r| !existing.contains(r))
                .collect();
            rows.extend(reversed);
        }
        let pairs = rows
            .iter()
            .filter(|r| r.len() >= 2)
            .map(|r| (r[0].clone(), r[1].clone()))
            .collect();
        FixtureData {
            header,
            key_width,
            rows,
            pairs,
        }
    }

    pub fn has_pair(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&(a.to_string(), b.to_string()))
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Rows whose key columns equal `key`, in file order.
    pub fn rows_for<'a>(&'a self, key: &'a [String]) -> impl Iterator<Item = &'a Vec<String>> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.len() >= self.key_width && r[..self.key_width] == key[..])
    }

    pub fn key_width(&self) -> usize {
        self.key_width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
