//! Canonical database: every base table flattened into
//! `(concept, primary key, attribute, value)` rows.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::OntologyEntry;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("table `{table}` has no key column `{column}`")]
    MissingKeyColumn { table: String, column: String },
    #[error("table `{table}` has no column `{column}` listed for its concept")]
    MissingColumn { table: String, column: String },
    #[error("table `{table}` repeats key `{key}`")]
    DuplicateKey { table: String, key: String },
    #[error("table `{table}` row {row} has an empty key")]
    EmptyKey { table: String, row: usize },
    #[error("table `{table}` row {row} has {found} cells, expected {expected}")]
    ArityMismatch {
        table: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table `{table}` repeats column `{column}`")]
    DuplicateColumn { table: String, column: String },
    #[error("ontology entry for `{concept}` expects table `{expected}`, got `{found}`")]
    TableMismatch {
        concept: String,
        expected: String,
        found: String,
    },
    #[error("cannot read table data: {0}")]
    Read(String),
}

impl StoreError {
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::MissingKeyColumn { .. } => "MissingKeyColumn",
            StoreError::MissingColumn { .. } => "MissingColumn",
            StoreError::DuplicateKey { .. } => "DuplicateKey",
            StoreError::EmptyKey { .. } => "EmptyKey",
            StoreError::ArityMismatch { .. } => "ArityMismatch",
            StoreError::DuplicateColumn { .. } => "DuplicateColumn",
            StoreError::TableMismatch { .. } => "TableMismatch",
            StoreError::Read(_) => "ReadError",
        }
    }
}

/// A base table as read from disk. Cells are kept as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RelationalTable {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, StoreError> {
        let table = RelationalTable {
            name: name.into(),
            columns,
            rows,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let mut seen = HashSet::new();
        for column in &self.columns {
            if !seen.insert(column.as_str()) {
                return Err(StoreError::DuplicateColumn {
                    table: self.name.clone(),
                    column: column.clone(),
                });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(StoreError::ArityMismatch {
                    table: self.name.clone(),
                    row: i,
                    expected: self.columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(())
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    /// Parses comma-separated text whose first record holds the column names.
    pub fn from_csv_reader<R: Read>(name: impl Into<String>, reader: R) -> Result<Self, StoreError> {
        let name = name.into();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| StoreError::Read(format!("{name}: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| StoreError::Read(format!("{name}: {e}")))?;
            rows.push(record.iter().map(|c| c.trim().to_string()).collect());
        }
        RelationalTable::new(name, columns, rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, StoreError> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| StoreError::Read(format!("bad table path {}", path.display())))?
            .to_string();
        let file = fs::File::open(path).map_err(|e| StoreError::Read(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(name, file)
    }

    /// Reads every `*.csv` file of a directory, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, StoreError> {
        let entries = fs::read_dir(dir).map_err(|e| StoreError::Read(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("csv")))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::from_csv_path(p)).collect()
    }
}

/// One row of the canonical database.
///
/// `is_virtual` marks self-identifying facts asserted for query constants that
/// are absent from the base tables; such facts take part in every rule but are
/// excluded when pivoting facts back into tables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalFact {
    pub concept: String,
    pub primary_key: String,
    pub attribute: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_virtual: bool,
}

impl CanonicalFact {
    pub fn new(
        concept: impl Into<String>,
        primary_key: impl Into<String>,
        attribute: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        CanonicalFact {
            concept: concept.into(),
            primary_key: primary_key.into(),
            attribute: attribute.into(),
            value: value.into(),
            is_virtual: false,
        }
    }

    pub fn matches(
        &self,
        concept: Option<&str>,
        primary_key: Option<&str>,
        attribute: Option<&str>,
        value: Option<&str>,
    ) -> bool {
        concept.is_none_or(|c| c == self.concept)
            && primary_key.is_none_or(|k| k == self.primary_key)
            && attribute.is_none_or(|a| a == self.attribute)
            && value.is_none_or(|v| v == self.value)
    }
}

/// Turns one base table into canonical facts using its ontology entry.
///
/// Empty cells contribute no fact. Every ingested column is admitted, including
/// columns the ontology entry does not list.
pub fn canonicalize(table: &RelationalTable, entry: &OntologyEntry) -> Result<Vec<CanonicalFact>, StoreError> {
    table.validate()?;
    if entry.table_name != table.name {
        return Err(StoreError::TableMismatch {
            concept: entry.concept_name.clone(),
            expected: entry.table_name.clone(),
            found: table.name.clone(),
        });
    }
    let key_idx = table
        .column_index(&entry.key_attribute)
        .ok_or_else(|| StoreError::MissingKeyColumn {
            table: table.name.clone(),
            column: entry.key_attribute.clone(),
        })?;
    if let Some(missing) = entry.attributes.iter().find(|a| table.column_index(a).is_none()) {
        return Err(StoreError::MissingColumn {
            table: table.name.clone(),
            column: missing.clone(),
        });
    }

    let mut keys = HashSet::new();
    for (i, row) in table.rows.iter().enumerate() {
        let key = &row[key_idx];
        if key.is_empty() {
            return Err(StoreError::EmptyKey {
                table: table.name.clone(),
                row: i,
            });
        }
        if !keys.insert(key.as_str()) {
            return Err(StoreError::DuplicateKey {
                table: table.name.clone(),
                key: key.clone(),
            });
        }
    }

    let facts = table
        .rows
        .iter()
        .flat_map(|row| {
            let key = &row[key_idx];
            table
                .columns
                .iter()
                .zip(row)
                .filter(|(_, cell)| !cell.is_empty())
                .map(move |(column, cell)| CanonicalFact::new(&entry.concept_name, key, column, cell))
        })
        .collect();
    Ok(facts)
}

/// Columns of `table` that the ontology entry does not mention.
pub fn unlisted_columns<'a>(table: &'a RelationalTable, entry: &OntologyEntry) -> Vec<&'a str> {
    table
        .columns
        .iter()
        .filter(|c| **c != entry.key_attribute && !entry.attributes.contains(c))
        .map(String::as_str)
        .collect()
}

/// In-memory canonical database, ordered by concept, key, attribute, value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalStore {
    facts: BTreeSet<CanonicalFact>,
}

impl CanonicalStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts(facts: impl IntoIterator<Item = CanonicalFact>) -> Self {
        CanonicalStore {
            facts: facts.into_iter().collect(),
        }
    }

    pub fn ingest(&mut self, table: &RelationalTable, entry: &OntologyEntry) -> Result<usize, StoreError> {
        let facts = canonicalize(table, entry)?;
        let n = facts.len();
        self.facts.extend(facts);
        Ok(n)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CanonicalFact> {
        self.facts.iter()
    }

    pub fn lookup(
        &self,
        concept: Option<&str>,
        primary_key: Option<&str>,
        attribute: Option<&str>,
        value: Option<&str>,
    ) -> Vec<&CanonicalFact> {
        match (concept, primary_key) {
            (Some(c), Some(k)) => self
                .object_facts(c, k)
                .filter(|f| f.matches(None, None, attribute, value))
                .collect(),
            _ => self
                .facts
                .iter()
                .filter(|f| f.matches(concept, primary_key, attribute, value))
                .collect(),
        }
    }

    fn object_facts<'a>(&'a self, concept: &str, key: &str) -> impl Iterator<Item = &'a CanonicalFact> + 'a {
        let start = CanonicalFact::new(concept, key, "", "");
        let (concept, key) = (concept.to_string(), key.to_string());
        self.facts
            .range(start..)
            .take_while(move |f| f.concept == concept && f.primary_key == key)
    }

    pub fn has_object(&self, concept: &str, key: &str) -> bool {
        self.object_facts(concept, key).next().is_some()
    }

    pub fn contains_value(&self, concept: &str, attribute: &str, value: &str) -> bool {
        self.facts
            .iter()
            .any(|f| f.concept == concept && f.attribute == attribute && f.value == value)
    }

    /// Asserts the self-identifying fact for `key_value`. No-op when the
    /// object's self fact already exists.
    pub fn seed_virtual(&mut self, concept: &str, key_value: &str, entry: &OntologyEntry) -> CanonicalFact {
        let fact = virtual_fact(concept, key_value, entry);
        let existing = self
            .object_facts(concept, key_value)
            .find(|f| f.attribute == entry.key_attribute && f.value == key_value)
            .cloned();
        match existing {
            Some(f) => f,
            None => {
                self.facts.insert(fact.clone());
                fact
            }
        }
    }

    /// Groups a concept's non-virtual facts by key and pivots them back into
    /// `key -> attribute -> value` rows.
    pub fn pivot(&self, concept: &str) -> BTreeMap<String, BTreeMap<String, String>> {
        let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for f in self.facts.iter().filter(|f| f.concept == concept && !f.is_virtual) {
            out.entry(f.primary_key.clone())
                .or_default()
                .insert(f.attribute.clone(), f.value.clone());
        }
        out
    }

    /// Writes the store as a four-column CSV document.
    pub fn export_csv<W: std::io::Write>(&self, writer: W) -> Result<(), StoreError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| StoreError::Read(e.to_string());
        w.write_record(["Concept", "PrimaryKey", "AttributeName", "AttributeValue"])
            .map_err(err)?;
        for f in &self.facts {
            w.write_record([&f.concept, &f.primary_key, &f.attribute, &f.value])
                .map_err(err)?;
        }
        w.flush().map_err(|e| StoreError::Read(e.to_string()))
    }

    /// A read-only view of this store extended with virtual seeds, leaving the
    /// store itself untouched.
    pub fn with_seeds<'a>(&'a self, seeds: &[(String, String)], kb: &crate::knowledge::KnowledgeBase) -> StoreView<'a> {
        let mut overlay = BTreeSet::new();
        for (concept, key) in seeds {
            let Some(entry) = kb.entry(concept) else { continue };
            let exists = self
                .object_facts(concept, key)
                .any(|f| f.attribute == entry.key_attribute && f.value == *key);
            if !exists {
                overlay.insert(virtual_fact(concept, key, entry));
            }
        }
        StoreView { base: self, overlay }
    }

    pub fn view(&self) -> StoreView<'_> {
        StoreView {
            base: self,
            overlay: BTreeSet::new(),
        }
    }
}

fn virtual_fact(concept: &str, key_value: &str, entry: &OntologyEntry) -> CanonicalFact {
    CanonicalFact {
        is_virtual: true,
        ..CanonicalFact::new(concept, key_value, &entry.key_attribute, key_value)
    }
}

/// The store plus per-query virtual seeds.
#[derive(Debug, Clone)]
pub struct StoreView<'a> {
    base: &'a CanonicalStore,
    overlay: BTreeSet<CanonicalFact>,
}

impl StoreView<'_> {
    pub fn iter(&self) -> impl Iterator<Item = &CanonicalFact> {
        self.base.iter().chain(self.overlay.iter())
    }

    pub fn len(&self) -> usize {
        self.base.len() + self.overlay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seeded(&self) -> impl Iterator<Item = &CanonicalFact> {
        self.overlay.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gene_entry() -> OntologyEntry {
        OntologyEntry {
            concept_name: "Gene".into(),
            table_name: "Entrez".into(),
            key_attribute: "GeneID".into(),
            attributes: vec!["GeneName".into(), "UniProtProteinID".into(), "DNASequence".into()],
        }
    }

    fn protein_entry() -> OntologyEntry {
        OntologyEntry {
            concept_name: "Protein".into(),
            table_name: "UniProt".into(),
            key_attribute: "ProteinID".into(),
            attributes: vec!["Function".into(), "ProteinName".into()],
        }
    }

    fn entrez_row() -> RelationalTable {
        RelationalTable::new(
            "Entrez",
            vec!["GeneName".into(), "GeneID".into(), "UniProtProteinID".into(), "DNASequence".into()],
            vec![vec![
                "repA1".into(),
                "1246500".into(),
                "O85067".into(),
                "ACCCTTGGAAACCC...".into(),
            ]],
        )
        .unwrap()
    }

    #[test]
    fn entrez_row_yields_four_facts() {
        let facts = canonicalize(&entrez_row(), &gene_entry()).unwrap();
        assert_eq!(facts.len(), 4);
        assert!(facts.contains(&CanonicalFact::new("Gene", "1246500", "GeneName", "repA1")));
        assert!(facts.contains(&CanonicalFact::new("Gene", "1246500", "GeneID", "1246500")));
    }

    #[test]
    fn empty_table_gives_no_facts() {
        let t = RelationalTable::new("Entrez", entrez_row().columns, vec![]).unwrap();
        assert!(canonicalize(&t, &gene_entry()).unwrap().is_empty());
    }

    #[test]
    fn two_by_three_table() {
        let entry = OntologyEntry {
            concept_name: "C".into(),
            table_name: "T".into(),
            key_attribute: "K".into(),
            attributes: vec!["A".into(), "B".into()],
        };
        let t = RelationalTable::new(
            "T",
            vec!["K".into(), "A".into(), "B".into()],
            vec![vec!["k1".into(), "a".into(), "b".into()], vec!["k2".into(), "a".into(), "c".into()]],
        )
        .unwrap();
        let facts = canonicalize(&t, &entry).unwrap();
        // count oracle: one fact per (row, column)
        let expected: usize = t.rows.iter().map(|r| r.len()).sum();
        assert_eq!(facts.len(), expected);
        assert_eq!(facts.len(), 6);
        let self_facts = facts.iter().filter(|f| f.attribute == "K" && f.value == f.primary_key).count();
        assert_eq!(self_facts, 2);
    }

    #[test]
    fn ingestion_errors() {
        let mut t = entrez_row();
        t.rows.push(t.rows[0].clone());
        assert!(matches!(canonicalize(&t, &gene_entry()), Err(StoreError::DuplicateKey { .. })));

        let mut entry = gene_entry();
        entry.key_attribute = "Nope".into();
        assert!(matches!(canonicalize(&entrez_row(), &entry), Err(StoreError::MissingKeyColumn { .. })));

        let bad = RelationalTable {
            name: "Entrez".into(),
            columns: entrez_row().columns,
            rows: vec![vec!["x".into()]],
        };
        assert!(matches!(canonicalize(&bad, &gene_entry()), Err(StoreError::ArityMismatch { .. })));
        assert!(matches!(
            RelationalTable::new("T", vec!["a".into(), "a".into()], vec![]),
            Err(StoreError::DuplicateColumn { .. })
        ));
    }

    #[test]
    fn empty_cells_are_skipped() {
        let mut t = entrez_row();
        t.rows[0][3] = String::new();
        assert_eq!(canonicalize(&t, &gene_entry()).unwrap().len(), 3);
    }

    #[test]
    fn lookup_patterns() {
        let mut store = CanonicalStore::new();
        assert!(store.lookup(None, None, None, None).is_empty());
        store.ingest(&entrez_row(), &gene_entry()).unwrap();
        let hits = store.lookup(Some("Gene"), Some("1246500"), Some("UniProtProteinID"), None);
        assert_eq!(hits, vec![&CanonicalFact::new("Gene", "1246500", "UniProtProteinID", "O85067")]);
        assert_eq!(store.lookup(None, None, Some("GeneName"), Some("repA1")).len(), 1);
    }

    #[test]
    fn seeding_is_idempotent() {
        let mut store = CanonicalStore::new();
        let f = store.seed_virtual("Protein", "Q9UKT8", &protein_entry());
        assert_eq!(f.attribute, "ProteinID");
        assert!(f.is_virtual);
        let before = store.clone();
        store.seed_virtual("Protein", "Q9UKT8", &protein_entry());
        assert_eq!(store, before);
        assert_eq!(store.lookup(Some("Protein"), Some("Q9UKT8"), Some("ProteinID"), None).len(), 1);
        // virtual facts stay out of the pivot
        assert!(store.pivot("Protein").is_empty());
    }

    #[test]
    fn csv_with_quoted_commas() {
        let text = "K,Desc\nk1,\"a, b\"\n";
        let t = RelationalTable::from_csv_reader("T", text.as_bytes()).unwrap();
        assert_eq!(t.rows[0][1], "a, b");
    }

    #[test]
    fn export_has_header() {
        let mut store = CanonicalStore::new();
        store.ingest(&entrez_row(), &gene_entry()).unwrap();
        let mut buf = Vec::new();
        store.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Concept,PrimaryKey,AttributeName,AttributeValue\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
