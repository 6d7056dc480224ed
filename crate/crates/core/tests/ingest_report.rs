use std::fs;
use std::path::Path;

use gcindex::aggregation::{compute_all, MissingPolicy};
use gcindex::ingest::{
    default_classes, load_panel, load_tree, parse_panel, parse_tree, tree_to_json, IngestError,
};
use gcindex::model::{default_wef_tree, InnovatorClass, NodeKind, TreeError, Weight, Weights};
use gcindex::ranking::{rank_delta, rank_scores};
use gcindex::report::{
    chi_square_table, delta_table, emit_report, gain_table, load_table_csv, ranks_table, render,
    scores_table, trend_table, whatif_table, Format, ReportError, Table,
};
use gcindex::stats::{chi_square_test, ols_fit};
use gcindex::whatif::{apply_scenario, min_delta_for_rank_gain, Scenario};
use tempfile::TempDir;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/balkans-gci.csv");

fn write(dir: &TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

const COMPONENTS: &str = "\
year,country,indicator,value
2005,AAA,TI,4.10
2005,AAA,PII,3.95
2005,AAA,MEI,4.40
2005,BBB,TI,3.50
2005,BBB,PII,4.70
2005,BBB,MEI,4.05
2005,CCC,TI,5.25
2005,CCC,PII,4.00
2005,CCC,MEI,3.35
2006,AAA,TI,4.30
2006,AAA,PII,4.05
2006,AAA,MEI,4.20
2006,BBB,TI,3.45
2006,BBB,PII,4.10
2006,BBB,MEI,3.90
2006,CCC,TI,5.05
2006,CCC,PII,4.15
2006,CCC,MEI,3.55
";

const CLASSES: &str = "country,class\nAAA,noncore\nBBB,Core\nCCC,NONCORE\n";

fn sample_tables(dir: &TempDir) -> Vec<Table> {
    let panel = load_panel(
        &write(dir, "panel.csv", COMPONENTS),
        Some(&write(dir, "classes.csv", CLASSES)),
    )
    .unwrap();
    let tree = default_wef_tree();
    let prev = compute_all(&tree, &panel, 2005, MissingPolicy::Strict).unwrap();
    let cur = compute_all(&tree, &panel, 2006, MissingPolicy::Strict).unwrap();
    let (rp, rc) = (
        rank_scores(&prev, "GCI").unwrap(),
        rank_scores(&cur, "GCI").unwrap(),
    );
    let scenario = Scenario {
        country: "BBB".into(),
        node: "TI".into(),
        value: 6.0,
    };
    let outcome = apply_scenario(&tree, &cur, panel.classes(), &scenario).unwrap();
    let gain = min_delta_for_rank_gain(&tree, &cur, panel.classes(), "BBB", 1, "TI").unwrap();
    let trend = ols_fit(&[(2005, 3.9), (2006, 4.1), (2007, 3.7)]).unwrap();
    vec![
        scores_table(&cur, None),
        scores_table(&cur, Some("GCI")),
        ranks_table(&rc, Some(&cur)),
        delta_table(&rank_delta(&rp, &rc).unwrap()),
        chi_square_table(&chi_square_test(1.459644, 9, 0.05).unwrap()),
        trend_table("AAA", "GCI", 2005, 2007, &trend),
        whatif_table(&outcome),
        gain_table("BBB", "TI", 1, &gain),
    ]
}

#[test]
fn csv_reports_round_trip_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    for (i, table) in sample_tables(&dir).iter().enumerate() {
        let first = dir.path().join(format!("r{i}.csv"));
        emit_report(table, Format::Csv, &first).unwrap();
        let reloaded = load_table_csv(&first).unwrap();
        let second = dir.path().join(format!("r{i}-again.csv"));
        emit_report(&reloaded, Format::Csv, &second).unwrap();
        assert_eq!(
            fs::read(&first).unwrap(),
            fs::read(&second).unwrap(),
            "{}",
            table.title
        );
    }
}

#[test]
fn every_format_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for table in sample_tables(&dir) {
        for format in [Format::Csv, Format::Json, Format::Text, Format::Svg] {
            match (render(&table, format), render(&table, format)) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (Err(ReportError::UnsupportedFormat { .. }), Err(_)) => {
                    assert!(table.chart.is_none() && format == Format::Svg)
                }
                other => panic!("{}: {other:?}", table.title),
            }
        }
    }
}

#[test]
fn json_reports_parse_with_sorted_keys() {
    let dir = TempDir::new().unwrap();
    let table = &sample_tables(&dir)[2];
    let json = render(table, Format::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["rank"], 1);
    let text = serde_json::to_string(&rows[0]).unwrap();
    assert!(text.find("\"country\"").unwrap() < text.find("\"rank\"").unwrap());
}

#[test]
fn score_report_reloads_as_a_panel() {
    let dir = TempDir::new().unwrap();
    let panel = load_panel(
        &write(&dir, "panel.csv", COMPONENTS),
        Some(&write(&dir, "classes.csv", CLASSES)),
    )
    .unwrap();
    let scores = compute_all(&default_wef_tree(), &panel, 2006, MissingPolicy::Strict).unwrap();
    let path = dir.path().join("scores.csv");
    emit_report(&scores_table(&scores, None), Format::Csv, &path).unwrap();
    let again = load_panel(&path, Some(&dir.path().join("classes.csv"))).unwrap();
    let report = load_table_csv(&path).unwrap();
    let mut n = 0;
    for (country, node, s) in scores.iter() {
        let v = again.value(2006, country, node).unwrap();
        // equal to the written value, which is the score to 6 decimals
        let row = (0..report.rows.len())
            .find(|&r| {
                report.get(r, "country").unwrap().render() == country
                    && report.get(r, "indicator").unwrap().render() == node
            })
            .unwrap();
        assert!((v - report.get(row, "value").unwrap().as_f64().unwrap()).abs() <= 1e-9);
        assert!((v - s).abs() <= 5e-7 + 1e-12);
        n += 1;
    }
    assert_eq!(n, again.len());

    // a reloaded score file evaluates to its own values, node scores taken as given
    let exact = compute_all(&default_wef_tree(), &again, 2006, MissingPolicy::Strict).unwrap();
    for (country, node, s) in exact.iter() {
        assert!((again.value(2006, country, node).unwrap() - s).abs() <= 1e-9);
    }
}

#[test]
fn bundled_fixture_carries_the_published_leaders() {
    let panel = load_panel(Path::new(FIXTURE), None).unwrap();
    assert_eq!(panel.value(2006, "SVN", "GCI"), Some(4.77));
    assert_eq!(panel.value(2006, "GRC", "GCI"), Some(4.35));
    assert_eq!(panel.value(2006, "HRV", "GCI"), Some(4.02));
    let scores = compute_all(&default_wef_tree(), &panel, 2006, MissingPolicy::Strict).unwrap();
    let ranks = rank_scores(&scores, "GCI").unwrap();
    assert_eq!(ranks.entries[0], ("SVN".to_string(), 1));
    let text = fs::read_to_string(FIXTURE).unwrap();
    // every data row is preceded by its source comment
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate().skip(1) {
        if line.starts_with("20") {
            assert!(lines[i - 1].starts_with("# source:"), "row {line}");
        }
    }
}

#[test]
fn bundled_classes_cover_the_region() {
    let classes = default_classes();
    assert_eq!(classes.len(), 10);
    assert!(classes.values().all(|c| *c == InnovatorClass::NonCore));
}

#[test]
fn panel_errors_are_located() {
    let classes = default_classes();
    let dup = "year,country,indicator,value\n2006,SVN,GCI,4.77\n2006,SVN,GCI,4.70\n";
    match parse_panel(dup, &classes) {
        Err(IngestError::DuplicateKey {
            line, first_line, ..
        }) => {
            assert_eq!((line, first_line), (3, 2));
        }
        other => panic!("{other:?}"),
    }
    let bad = "year,country,indicator,value\n2006,SVN,GCI,4.77\n2006,HRV,GCI,four\n";
    let err = parse_panel(bad, &classes).unwrap_err();
    assert_eq!(err.to_string(), "line 3, column 4: invalid value \"four\"");
    let unknown = "year,country,indicator,value\n2006,XYZ,GCI,4.0\n";
    assert!(matches!(
        parse_panel(unknown, &classes),
        Err(IngestError::MissingClass { line: 2, .. })
    ));
    let four = "year,country,indicator,value\n# c\n2006,SVN,GCI,4.77\n2006,GRC,GCI,4.35\n2006,HRV,GCI,4.02\n2005,SVN,GCI,4.6\n";
    assert_eq!(parse_panel(four, &classes).unwrap().len(), 4);
}

#[test]
fn default_tree_survives_serialization() {
    let tree = default_wef_tree();
    let json = tree_to_json(&tree);
    assert_eq!(parse_tree(&json).unwrap(), tree);
    assert_eq!(tree_to_json(&parse_tree(&json).unwrap()), json);
    assert_eq!(load_tree("wef-default").unwrap(), tree);
}

#[test]
fn ict_override_changes_only_ict() {
    let dir = TempDir::new().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&tree_to_json(&default_wef_tree())).unwrap();
    let icts = doc["nodes"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|n| n["id"] == "ICTS")
        .unwrap();
    for child in icts["children"].as_array_mut().unwrap() {
        child["weight"] = "1/2".into();
    }
    let path = write(
        &dir,
        "tree.json",
        &serde_json::to_string_pretty(&doc).unwrap(),
    );
    let custom = load_tree(path.to_str().unwrap()).unwrap();
    let default = default_wef_tree();
    for node in default.nodes() {
        let other = custom.node(&node.id).unwrap();
        if node.id == "ICTS" {
            let NodeKind::Aggregate(Weights::Shared(edges)) = &other.kind else {
                panic!("{other:?}")
            };
            assert!(edges.iter().all(|e| e.weight == Weight::new(1, 2)));
            assert_ne!(node, other);
        } else {
            assert_eq!(node, other);
        }
    }
    assert_eq!(custom.nodes().count(), default.nodes().count());
}

#[test]
fn weight_sums_are_checked_on_load() {
    let json = r#"{"root": "R", "nodes": [
        {"id": "R", "children": [{"id": "A", "weight": "0.45"}, {"id": "B", "weight": "0.45"}]},
        {"id": "A"}, {"id": "B"}]}"#;
    assert!(matches!(
        parse_tree(json),
        Err(IngestError::Tree(TreeError::WeightSum { .. }))
    ));
    assert!(matches!(
        parse_tree(r#"{"root": "R", "nodes": [], "extra": 1}"#),
        Err(IngestError::Schema(_))
    ));
}
