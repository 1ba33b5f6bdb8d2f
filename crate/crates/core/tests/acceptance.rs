mod support;

use std::collections::{BTreeMap, BTreeSet};

use kriq_core::frontend::{classify, parse, TemplateVariant};
use kriq_core::knowledge::OntologyEntry;
use kriq_core::planner::{Mode, ResultTable};
use kriq_core::reasoner::{parse_goals, ProvenanceTrace, Reasoner, Strategy};
use kriq_core::store::{canonicalize, CanonicalStore};
use kriq_core::{run_pipeline, System};
use support::naive::{self, Rules};
use support::random::{self, Limits};

const QUERY_ONE: &str = "List all F-box domain protein 2 sequences";
const QUERY_TWO: &str = "What are the functions of UniProt proteins Q9UKT8 and Q9NVA1";

type Outcome = Result<String, String>;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn table(sys: &System, q: &str, mode: Mode) -> Result<ResultTable, String> {
    run_pipeline(q, sys, mode).map_err(|e| format!("{}: {e}", e.name()))
}

fn serialized(t: &ResultTable) -> String {
    let rows: Vec<_> = t.rows.iter().map(|r| (&r.values, r.derived, &r.provenance_id, &r.provenance)).collect();
    serde_json::to_string(&(&t.columns, rows)).unwrap()
}

fn names_relation(trace: &ProvenanceTrace, relation: &str) -> bool {
    trace
        .chain()
        .iter()
        .any(|t| matches!(t, ProvenanceTrace::Interpretive { relation: r, .. } if r == relation))
}

fn query_one_baseline(sys: &System) -> Outcome {
    let t = table(sys, QUERY_ONE, Mode::Baseline)?;
    let values: Vec<&Vec<String>> = t.rows.iter().map(|r| &r.values).collect();
    ensure(values == [&vec!["CTCTTTCTTTCG ...".to_string()]], || format!("got {values:?}"))?;
    Ok(serialized(&t))
}

fn query_one_enhanced(sys: &System) -> Outcome {
    let t = table(sys, QUERY_ONE, Mode::Enhanced)?;
    let expected: BTreeSet<Vec<String>> = [["CTCTTTCTTTCG ..."], ["CTCTTTCTTTCT ..."]]
        .iter()
        .map(|r| vec![r[0].to_string()])
        .collect();
    ensure(t.rows.len() == 2 && t.value_rows() == expected, || format!("got {:?}", t.value_rows()))?;
    let added = t.rows.iter().find(|r| r.values[0] == "CTCTTTCTTTCT ...").unwrap();
    let base = t.rows.iter().find(|r| r.values[0] == "CTCTTTCTTTCG ...").unwrap();
    ensure(added.derived && !base.derived, || "derived flags are wrong".into())?;
    ensure(added.provenance.atoms.iter().any(|a| names_relation(a, "Ortholog")), || {
        "added row has no Interpretive Ortholog step".into()
    })?;
    Ok(serialized(&t))
}

fn query_two(sys: &System) -> Outcome {
    let base = table(sys, QUERY_TWO, Mode::Baseline)?;
    let enhanced = table(sys, QUERY_TWO, Mode::Enhanced)?;
    let want = |v: &[&str]| v.iter().map(|x| vec![x.to_string()]).collect::<BTreeSet<_>>();
    ensure(base.value_rows() == want(&["Cytoplasmic vesicle"]), || {
        format!("baseline {:?}", base.value_rows())
    })?;
    ensure(
        enhanced.value_rows() == want(&["Cytoplasmic vesicle", "Substrate recognition"]),
        || format!("enhanced {:?}", enhanced.value_rows()),
    )?;
    Ok(serialized(&base) + &serialized(&enhanced))
}

fn repa1_chain(sys: &System) -> Outcome {
    let t = table(sys, "Find the function of gene repA1", Mode::Enhanced)?;
    ensure(t.column_values("Function") == ["Plasmid maintenance"], || format!("got {:?}", t.value_rows()))?;
    let row = &t.rows[0];
    let through = row.provenance.atoms.iter().flat_map(|a| a.chain()).any(|step| {
        matches!(step, ProvenanceTrace::Derived { rel, .. }
            if rel.primary_key == "1246500" && rel.derived_key == "O85067")
    });
    ensure(row.derived && through, || "no Derived step via 1246500 and O85067".into())?;
    Ok(serialized(&t))
}

fn raw_goal_parity(sys: &System) -> Outcome {
    let reasoner = Reasoner::new(sys.kb(), sys.gateway());
    let view = sys.store().view();
    let solve = |text: &str, s: Strategy| {
        let goals = parse_goals(text).map_err(|e| e.to_string())?;
        let sol = reasoner.solve(&goals, &view, s).map_err(|e| e.to_string())?;
        Ok::<Vec<String>, String>(sol.column("Val").into_iter().map(String::from).collect())
    };
    let link = "res('Gene', Pk, 'GeneName', 'repA1'), res('Gene', Pk, 'UniProtProteinID', Val)";
    let function = "res('Gene', Pk, 'GeneName', 'repA1'), res('Gene', Pk, 'Function', Val)";
    let a = solve(link, Strategy::DirectOnly)?;
    let b = solve(function, Strategy::DirectOnly)?;
    let c = solve(function, Strategy::Indirect)?;
    ensure(a == ["O85067"], || format!("link {a:?}"))?;
    ensure(b.is_empty(), || format!("direct function {b:?}"))?;
    ensure(c == ["Plasmid maintenance"], || format!("indirect function {c:?}"))?;
    Ok(format!("{a:?}{b:?}{c:?}"))
}

fn template_suite(_: &System) -> Outcome {
    use TemplateVariant::*;
    let cases = [
        (QUERY_ONE, Imperative),
        (QUERY_TWO, Imperative),
        (
            "Find the photosynthetic genes of cyanobacteria Prochlorococcus sp. strain (known also as MED4)",
            Imperative,
        ),
        ("For all genes of cyanobacteria find homologs", Iterative),
        ("If gene UQCC is protein coding, then find its protein", Conditional),
        ("List all genes of cyanobacteria", Imperative),
    ];
    let mut got = Vec::new();
    for (s, want) in cases {
        let v = parse(s).and_then(|t| classify(&t)).map(|t| t.variant()).map_err(|e| e.to_string())?;
        ensure(v == want, || format!("{s}: {v:?}"))?;
        got.push(v);
    }
    Ok(format!("{got:?}"))
}

fn oracle_equivalence(_: &System) -> Outcome {
    let mut sizes = Vec::new();
    for seed in 0..100 {
        let inst = random::instance(seed, Limits::default());
        let kb = inst.kb();
        let store = inst.store(&kb);
        ensure(store.len() <= 50 && kb.ontology().len() <= 5, || format!("seed {seed} exceeds limits"))?;
        let gateway = inst.gateway();
        let view = store.with_seeds(&inst.seeds, &kb);
        let got: BTreeSet<naive::Fact> = Reasoner::new(&kb, &gateway)
            .evaluate(&view, Strategy::Interpretive)
            .atoms()
            .into_iter()
            .map(|a| (a.concept, a.primary_key, a.attribute, a.value))
            .collect();
        let want = naive::evaluate(&inst, Rules::WithTools);
        ensure(got == want, || format!("seed {seed}: {} vs {} facts", got.len(), want.len()))?;
        sizes.push(got.len());
    }
    Ok(format!("{sizes:?}"))
}

fn canonicalization_law(_: &System) -> Outcome {
    let mut counts = Vec::new();
    for seed in 0..100 {
        let t = random::table(seed);
        let entry = OntologyEntry {
            concept_name: "Thing".into(),
            table_name: t.name.clone(),
            key_attribute: t.columns[0].clone(),
            attributes: t.columns[1..].to_vec(),
        };
        let facts = canonicalize(&t, &entry).map_err(|e| e.to_string())?;
        let empty = t.rows.iter().flatten().filter(|c| c.is_empty()).count();
        ensure(facts.len() == t.rows.len() * t.columns.len() - empty, || format!("seed {seed}: count"))?;
        let pivot = CanonicalStore::from_facts(facts.clone()).pivot("Thing");
        let expected: BTreeMap<String, BTreeMap<String, String>> = t
            .rows
            .iter()
            .map(|r| {
                let cells = t.columns.iter().zip(r).filter(|(_, v)| !v.is_empty());
                (r[0].clone(), cells.map(|(c, v)| (c.clone(), v.clone())).collect())
            })
            .collect();
        ensure(pivot == expected, || format!("seed {seed}: pivot"))?;
        counts.push(facts.len());
    }
    Ok(format!("{counts:?}"))
}

fn sql_agreement(sys: &System) -> Outcome {
    let mut out = String::new();
    for q in [QUERY_ONE, QUERY_TWO] {
        let a = sys.answer(q, Mode::Baseline).map_err(|e| e.to_string())?;
        let sql = a.sql.clone().map_err(|e| e.to_string())?;
        let rows = support::spj::execute(&sql, sys.tables());
        ensure(rows == a.table.value_rows(), || format!("{q}: sql {rows:?} vs {:?}", a.table.value_rows()))?;
        out.push_str(&sql);
    }
    Ok(out)
}

type Check = fn(&System) -> Outcome;

const CRITERIA: [(&str, Check); 9] = [
    ("query 1 baseline", query_one_baseline),
    ("query 1 enhanced", query_one_enhanced),
    ("query 2 baseline and enhanced", query_two),
    ("repA1 derivation chain", repa1_chain),
    ("raw goal parity", raw_goal_parity),
    ("template suite", template_suite),
    ("semi-naive equals naive on 100 random stores", oracle_equivalence),
    ("canonicalization law on 100 random tables", canonicalization_law),
    ("baseline equals rendered SQL", sql_agreement),
];

fn socket_count() -> usize {
    std::fs::read_dir("/proc/self/fd")
        .map(|d| {
            d.filter_map(|e| e.ok())
                .filter_map(|e| std::fs::read_link(e.path()).ok())
                .filter(|p| p.to_string_lossy().starts_with("socket:"))
                .count()
        })
        .unwrap_or(0)
}

fn run_suite() -> (Vec<Outcome>, usize) {
    let sys = System::bundled();
    let outcomes = CRITERIA.iter().map(|(_, check)| check(&sys)).collect();
    (outcomes, sys.gateway().remote_calls())
}

#[test]
fn acceptance() {
    let sockets_before = socket_count();
    let (first, remote_a) = run_suite();
    let (second, remote_b) = run_suite();
    let sockets_after = socket_count();

    let mut failed = 0;
    for (i, ((name, _), outcome)) in CRITERIA.iter().zip(&first).enumerate() {
        match outcome {
            Ok(_) => println!("[PASS] {}. {name}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {why}", i + 1);
            }
        }
    }

    let sys = System::bundled();
    let local_only = sys.gateway().is_side_effect_free();
    let determinism = if first != second {
        Err("outputs differ between runs".to_string())
    } else if sockets_after > sockets_before || remote_a + remote_b > 0 || !local_only {
        Err(format!(
            "network activity: sockets {sockets_before}->{sockets_after}, remote calls {}",
            remote_a + remote_b
        ))
    } else {
        Ok(())
    };
    match determinism {
        Ok(()) => println!("[PASS] 10. deterministic and fixture-only"),
        Err(why) => {
            failed += 1;
            println!("[FAIL] 10. deterministic and fixture-only: {why}");
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
