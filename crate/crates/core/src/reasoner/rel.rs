use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{Hop, RelFact};
use crate::knowledge::KnowledgeBase;
use crate::store::StoreView;

type Node = (String, String);

/// Foreign-key graph over the objects of a store view. Edges join two
/// objects whose columns hold equal values under some forK link, read in
/// either orientation.
pub(crate) struct JoinGraph {
    concept_of_table: HashMap<String, String>,
    adjacency: BTreeMap<Node, Vec<Hop>>,
}

impl JoinGraph {
    pub(crate) fn build(view: &StoreView<'_>, kb: &KnowledgeBase) -> Self {
        let concept_of_table: HashMap<String, String> = kb
            .ontology()
            .iter()
            .map(|e| (e.table_name.clone(), e.concept_name.clone()))
            .collect();
        let mut by_value: HashMap<(&str, &str, &str), BTreeSet<&str>> = HashMap::new();
        let mut by_object: BTreeMap<(&str, &str), Vec<(&str, &str)>> = BTreeMap::new();
        for f in view.iter() {
            by_value
                .entry((&f.concept, &f.attribute, &f.value))
                .or_default()
                .insert(&f.primary_key);
            by_object
                .entry((&f.concept, &f.primary_key))
                .or_default()
                .push((&f.attribute, &f.value));
        }
        let oriented: Vec<_> = kb
            .foreign_keys()
            .iter()
            .flat_map(|fk| fk.orientations())
            .filter_map(|fk| {
                let x = concept_of_table.get(&fk.table_x)?.clone();
                let y = concept_of_table.get(&fk.table_y)?.clone();
                Some((fk, x, y))
            })
            .collect();

        let mut adjacency: BTreeMap<Node, Vec<Hop>> = BTreeMap::new();
        for (&(concept, key), cells) in &by_object {
            let mut hops = BTreeSet::new();
            for (fk, x, y) in oriented.iter().filter(|(_, x, _)| x == concept) {
                for &(_, value) in cells.iter().filter(|(a, _)| *a == fk.column_x) {
                    let Some(partners) = by_value.get(&(y.as_str(), fk.column_y.as_str(), value)) else {
                        continue;
                    };
                    for &partner in partners {
                        if x == y && partner == key {
                            continue;
                        }
                        hops.insert(Hop {
                            from_table: fk.table_x.clone(),
                            from_column: fk.column_x.clone(),
                            to_table: fk.table_y.clone(),
                            to_column: fk.column_y.clone(),
                            from_key: key.to_string(),
                            to_key: partner.to_string(),
                            value: value.to_string(),
                        });
                    }
                }
            }
            if !hops.is_empty() {
                adjacency.insert((concept.to_string(), key.to_string()), hops.into_iter().collect());
            }
        }
        JoinGraph {
            concept_of_table,
            adjacency,
        }
    }

    pub(crate) fn target(&self, hop: &Hop) -> Node {
        (self.concept_of_table[&hop.to_table].clone(), hop.to_key.clone())
    }

    fn hops(&self, node: &Node) -> &[Hop] {
        self.adjacency.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// rel facts rooted at `origin`: breadth-first from the der-permitted
    /// first hops, never passing through `origin` again and visiting each
    /// object once.
    fn walk_from(&self, origin: &Node, der: &BTreeSet<(String, String)>, out: &mut Vec<RelFact>) {
        let mut parent: HashMap<Node, (Node, Hop)> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut order = Vec::new();
        for hop in self.hops(origin) {
            let target = self.target(hop);
            if !der.contains(&(origin.0.clone(), target.0.clone())) || parent.contains_key(&target) {
                continue;
            }
            parent.insert(target.clone(), (origin.clone(), hop.clone()));
            queue.push_back(target.clone());
            order.push(target);
        }
        while let Some(node) = queue.pop_front() {
            for hop in self.hops(&node) {
                let target = self.target(hop);
                if target == *origin || parent.contains_key(&target) {
                    continue;
                }
                parent.insert(target.clone(), (node.clone(), hop.clone()));
                queue.push_back(target.clone());
                order.push(target);
            }
        }
        for node in order {
            let mut path = Vec::new();
            let mut cur = node.clone();
            while cur != *origin {
                let (prev, hop) = &parent[&cur];
                path.push(hop.clone());
                cur = prev.clone();
            }
            path.reverse();
            out.push(RelFact {
                concept: origin.0.clone(),
                derived_concept: node.0,
                primary_key: origin.1.clone(),
                derived_key: node.1,
                path,
            });
        }
    }
}

pub(crate) fn closure(view: &StoreView<'_>, kb: &KnowledgeBase) -> Vec<RelFact> {
    let der = kb.derivation_pairs();
    if der.is_empty() {
        return Vec::new();
    }
    let graph = JoinGraph::build(view, kb);
    let mut out = Vec::new();
    for origin in graph.adjacency.keys() {
        graph.walk_from(origin, &der, &mut out);
    }
    out.sort();
    out
}
