use sasaki::verify::{all_pass, check_ids, report_json, run_suite, Selection, SuiteConfig};
use std::collections::BTreeSet;

fn manifest_ids() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/checks.md");
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter_map(|l| l.strip_prefix("| "))
        .filter_map(|l| l.split(" |").next())
        .map(str::trim)
        .filter(|id| id.contains('.') && !id.starts_with('-'))
        .map(String::from)
        .collect()
}

#[test]
fn registry_matches_manifest() {
    let docs = manifest_ids();
    let code: Vec<String> = check_ids().into_iter().map(String::from).collect();
    assert_eq!(docs.iter().collect::<BTreeSet<_>>().len(), docs.len(), "duplicate ids in docs");
    assert_eq!(docs, code);
    for id in &code {
        let module = id.split('.').next().unwrap();
        assert!(["geometry", "fields", "maps", "flow"].contains(&module), "{id}");
    }
}

#[test]
fn single_and_empty_selection() {
    let cfg = SuiteConfig::default();
    let r = run_suite(&Selection::Ids(vec!["fields.reeb-codifferential".into()]), &cfg).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].id, "fields.reeb-codifferential");
    assert!(r[0].pass && r[0].residual <= 5e-3 && r[0].residual <= r[0].tolerance);
    assert!(run_suite(&Selection::Ids(vec![]), &cfg).unwrap().is_empty());
    assert!(all_pass(&[]));
    assert!(run_suite(&Selection::Ids(vec!["geometry.nope".into()]), &cfg).is_err());
}

#[test]
fn cheap_subset_is_deterministic() {
    let ids = ["geometry.connection-offset", "geometry.negativity-classes", "maps.energy-algebra", "maps.defect-classifiers"];
    let sel = Selection::Ids(ids.iter().map(|s| s.to_string()).collect());
    let cfg = SuiteConfig::default();
    let a = run_suite(&sel, &cfg).unwrap();
    let b = run_suite(&sel, &cfg).unwrap();
    assert_eq!(report_json(&a).unwrap(), report_json(&b).unwrap());
    assert!(all_pass(&a), "{}", report_json(&a).unwrap());
    let ids_out: Vec<&str> = a.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids_out, ids);
}
