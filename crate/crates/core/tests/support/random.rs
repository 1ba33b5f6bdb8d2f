//! Random small deployments: tables, knowledge and pair-fixture tools.

use std::collections::BTreeSet;

use kriq_core::gateway::ToolGateway;
use kriq_core::knowledge::{
    DerivationEdge, ForeignKeyLink, KnowledgeBase, KnowledgeDocument, OntologyEntry, SimilarConcept, ToolBinding,
};
use kriq_core::store::{CanonicalStore, RelationalTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A pair fixture; `pairs: None` models a tool that is bound but not registered.
#[derive(Debug, Clone)]
pub struct RandomTool {
    pub name: String,
    pub pairs: Option<BTreeSet<(String, String)>>,
    pub symmetric: bool,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub doc: KnowledgeDocument,
    pub tables: Vec<RelationalTable>,
    pub tools: Vec<RandomTool>,
    pub seeds: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub concepts: usize,
    pub facts: usize,
    pub fk_links: usize,
    pub der_edges: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            concepts: 5,
            facts: 50,
            fk_links: 3,
            der_edges: 2,
        }
    }
}

const POOL: [&str; 5] = ["1", "2", "3", "4", "5"];

fn pick(rng: &mut ChaCha8Rng) -> String {
    POOL.choose(rng).unwrap().to_string()
}

pub fn instance(seed: u64, limits: Limits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_concepts = rng.gen_range(1..=limits.concepts);
    let mut ontology = Vec::new();
    let mut tables = Vec::new();
    let mut budget = limits.facts;
    for i in 0..n_concepts {
        let n_attrs = rng.gen_range(0..=2);
        let entry = OntologyEntry {
            concept_name: format!("C{i}"),
            table_name: format!("T{i}"),
            key_attribute: format!("k{i}"),
            attributes: (0..n_attrs).map(|j| format!("a{i}_{j}")).collect(),
        };
        let width = n_attrs + 1;
        let mut keys: Vec<&str> = POOL.to_vec();
        keys.shuffle(&mut rng);
        let max_rows = (budget / width).min(POOL.len());
        let n_rows = if max_rows == 0 { 0 } else { rng.gen_range(0..=max_rows) };
        let mut rows = Vec::new();
        for key in keys.into_iter().take(n_rows) {
            let mut row = vec![key.to_string()];
            for _ in 0..n_attrs {
                row.push(if rng.gen_bool(0.15) { String::new() } else { pick(&mut rng) });
            }
            budget -= row.iter().filter(|c| !c.is_empty()).count();
            rows.push(row);
        }
        let mut columns = vec![entry.key_attribute.clone()];
        columns.extend(entry.attributes.iter().cloned());
        tables.push(RelationalTable::new(entry.table_name.clone(), columns, rows).unwrap());
        ontology.push(entry);
    }

    let columns_of = |e: &OntologyEntry| e.all_attributes().map(String::from).collect::<Vec<_>>();
    let mut foreign_keys = Vec::new();
    for _ in 0..rng.gen_range(0..=limits.fk_links) {
        let x = ontology.choose(&mut rng).unwrap();
        let y = ontology.choose(&mut rng).unwrap();
        foreign_keys.push(ForeignKeyLink {
            table_x: x.table_name.clone(),
            table_y: y.table_name.clone(),
            column_x: columns_of(x).choose(&mut rng).unwrap().clone(),
            column_y: columns_of(y).choose(&mut rng).unwrap().clone(),
        });
    }
    let mut derivatives = Vec::new();
    for _ in 0..rng.gen_range(0..=limits.der_edges) {
        derivatives.push(DerivationEdge {
            concept_a: ontology.choose(&mut rng).unwrap().concept_name.clone(),
            concept_b: ontology.choose(&mut rng).unwrap().concept_name.clone(),
        });
    }
    let mut similar_concepts = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        similar_concepts.push(SimilarConcept {
            concept_x: ontology.choose(&mut rng).unwrap().concept_name.clone(),
            concept_y: ontology.choose(&mut rng).unwrap().concept_name.clone(),
            relations: vec!["R1".to_string()],
        });
    }

    let mut tools = Vec::new();
    for name in ["TA", "TB"] {
        let registered = rng.gen_bool(0.8);
        let pairs = registered.then(|| {
            (0..rng.gen_range(0..=4))
                .map(|_| (pick(&mut rng), pick(&mut rng)))
                .collect()
        });
        tools.push(RandomTool {
            name: name.to_string(),
            pairs,
            symmetric: rng.gen_bool(0.5),
        });
    }
    let mut ops = vec!["TA".to_string(), "TB".to_string()];
    ops.shuffle(&mut rng);

    let mut doc = KnowledgeDocument {
        ontology,
        derivatives,
        foreign_keys,
        similar_concepts,
        tools: vec![ToolBinding {
            relation: "R1".to_string(),
            operations: ops,
        }],
        ..KnowledgeDocument::default()
    };
    doc.options.symmetric_derivations = rng.gen_bool(0.5);

    let mut seeds = Vec::new();
    if rng.gen_bool(0.3) {
        let c = doc.ontology.choose(&mut rng).unwrap().concept_name.clone();
        seeds.push((c, "9".to_string()));
    }
    Instance {
        doc,
        tables,
        tools,
        seeds,
    }
}

impl Instance {
    pub fn kb(&self) -> KnowledgeBase {
        KnowledgeBase::from_document(self.doc.clone()).expect("random knowledge is consistent")
    }

    pub fn store(&self, kb: &KnowledgeBase) -> CanonicalStore {
        let mut store = CanonicalStore::new();
        for t in &self.tables {
            store.ingest(t, kb.entry_for_table(&t.name).unwrap()).unwrap();
        }
        store
    }

    pub fn gateway(&self) -> ToolGateway {
        let mut g = ToolGateway::new();
        for t in &self.tools {
            if let Some(pairs) = &t.pairs {
                g.register_pairs(&t.name, "id", pairs.iter().cloned(), t.symmetric);
            }
        }
        g
    }
}

/// A random table with unique keys in column 0 and some empty cells.
pub fn table(seed: u64) -> RelationalTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.gen_range(1..=5);
    let height = rng.gen_range(0..=8);
    let columns = (0..width).map(|i| format!("col{i}")).collect();
    let rows = (0..height)
        .map(|r| {
            let mut row = vec![format!("key{r}")];
            for _ in 1..width {
                row.push(if rng.gen_bool(0.2) { String::new() } else { format!("v{}", rng.gen_range(0..6)) });
            }
            row
        })
        .collect();
    RelationalTable::new("Things", columns, rows).unwrap()
}
