use std::collections::BTreeMap;

use kriq_core::knowledge::OntologyEntry;
use kriq_core::store::{canonicalize, CanonicalStore, RelationalTable};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = (Vec<String>, Vec<Vec<String>>)> {
    (1usize..5, 0usize..8).prop_flat_map(|(width, height)| {
        let cell = prop_oneof![Just(String::new()), "[a-z0-9 ]{1,6}"];
        let rows = proptest::collection::vec(proptest::collection::vec(cell, width - 1), height);
        let columns = (0..width).map(|i| format!("col{i}")).collect::<Vec<_>>();
        (Just(columns), rows).prop_map(|(columns, rows)| {
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    r.insert(0, format!("key{i}"));
                    r
                })
                .collect();
            (columns, rows)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fact_count_and_pivot_round_trip((columns, rows) in table_strategy()) {
        let entry = OntologyEntry {
            concept_name: "Thing".into(),
            table_name: "Things".into(),
            key_attribute: "col0".into(),
            attributes: columns[1..].to_vec(),
        };
        let table = RelationalTable::new("Things", columns.clone(), rows.clone()).unwrap();
        let facts = canonicalize(&table, &entry).unwrap();
        let cells = rows.len() * columns.len();
        let empty = rows.iter().flatten().filter(|c| c.is_empty()).count();
        prop_assert_eq!(facts.len(), cells - empty);

        let store = CanonicalStore::from_facts(facts);
        let expected: BTreeMap<String, BTreeMap<String, String>> = rows
            .iter()
            .map(|r| {
                let attrs = columns
                    .iter()
                    .zip(r)
                    .filter(|(_, v)| !v.is_empty())
                    .map(|(c, v)| (c.clone(), v.clone()))
                    .collect();
                (r[0].clone(), attrs)
            })
            .collect();
        prop_assert_eq!(store.pivot("Thing"), expected);
    }
}
