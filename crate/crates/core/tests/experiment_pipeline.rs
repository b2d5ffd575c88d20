mod common;

use std::path::Path;

use molseq::experiment::{
    load_sider_csv, prepare_setup, run_hpo, AugmentSpec, Budget, HpoSpec, LoadOptions,
    Representation, RunReport, SIDER_COLUMNS,
};
use molseq::model::ModelKind;
use molseq::smiles::canonicalize;
use molseq::train::TrainConfig;

fn fixture() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sider_synthetic.csv")
}

#[test]
fn bundled_fixture_loads_with_known_content() {
    let t = load_sider_csv(&fixture(), LoadOptions::default()).unwrap();
    assert_eq!(t.len(), 30);
    assert_eq!(t.columns.len(), SIDER_COLUMNS);
    assert_eq!(t.columns[0], "smiles");
    assert_eq!(t.columns[1], "Hepatobiliary disorders");
    assert_eq!(
        t.task_names()[10],
        "Neoplasms benign, malignant and unspecified (incl cysts and polyps)"
    );
    // The fixture was generated with label(i, j) = [(3i + j) mod 4 == 0].
    for (i, row) in t.labels.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, ((3 * i + j) % 4 == 0) as u8, "row {i} task {j}");
        }
    }
    assert_eq!(t.smiles[6], "CC(=O)Oc1ccccc1C(=O)O");
}

fn small_budget() -> Budget {
    Budget {
        train: TrainConfig {
            max_epochs: 3,
            lr: 1e-2,
            batch_size: 16,
            ..TrainConfig::default()
        },
        embed_dim: 8,
        split_seed: 1,
        tasks: Some(vec!["nitrogen".into(), "aromatic".into()]),
        ..Budget::default()
    }
}

#[test]
fn augmentation_never_reaches_held_out_inputs() {
    let t = common::synthetic_table();
    for repr in Representation::ALL {
        let p = prepare_setup(&t, repr, 3, &AugmentSpec::default()).unwrap();
        p.check_leakage().unwrap();
        // Independent check in SMILES space: canonical forms of the
        // training rows that were augmented never belong to held-out rows.
        let held: std::collections::HashSet<&String> = p
            .split
            .val
            .iter()
            .chain(&p.split.test)
            .map(|&r| &p.canonical[r])
            .collect();
        let copies = |c: &String| p.canonical.iter().filter(|x| *x == c).count();
        for s in p.train.iter().filter(|s| s.augmented) {
            // A molecule listed twice in the raw data may sit on both sides.
            assert!(!held.contains(&p.canonical[s.row]) || copies(&p.canonical[s.row]) > 1);
            if !repr.is_selfies() {
                assert_eq!(canonicalize(&s.text).unwrap(), p.canonical[s.row]);
            }
        }
        if repr.is_augmented() {
            let ratio = p.train.len() as f64 / p.split.train.len() as f64;
            assert!(ratio > 3.0 && ratio <= 6.0, "{repr}: {ratio}");
        }
    }
}

#[test]
fn hpo_report_is_self_consistent_and_round_trips() {
    let t = common::synthetic_table();
    let spec = HpoSpec {
        n_configs: 2,
        top_k: 2,
        ..HpoSpec::new(ModelKind::Lstm)
    };
    let report = run_hpo(&t, Representation::Smiles, &spec, &small_budget()).unwrap();
    assert_eq!(report.setup, "LSTM SMILES");
    assert_eq!(report.runs.len(), 2 * 2);
    assert!(report
        .runs
        .iter()
        .all(|r| r.error.is_none() && r.test_auc.is_some()));
    report.verify().unwrap();
    assert_eq!(report.summary.selected.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    report.emit(&path).unwrap();
    let back = RunReport::load(&path).unwrap();
    assert_eq!(back, report);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(json.get("runs").is_some() && json.get("wall_clock_secs").is_none());

    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let h = report.summary.headline;
    assert_eq!(row, format!("LSTM SMILES, {:.3}, {:.3}", h.mean, h.std));
    assert!(dir.path().join("run.timing.json").exists());
}

#[test]
fn single_class_test_tasks_are_excluded_by_name() {
    let t = load_sider_csv(&fixture(), LoadOptions::default()).unwrap();
    let spec = HpoSpec {
        kind: ModelKind::QkLstm,
        grid: vec![8],
        n_configs: 1,
        top_k: 1,
        ..HpoSpec::new(ModelKind::QkLstm)
    };
    let budget = Budget {
        tasks: None,
        train: TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        },
        ..small_budget()
    };
    let report = run_hpo(&t, Representation::AugSelfies, &spec, &budget).unwrap();
    // Three test rows cannot carry both classes for every task.
    assert!(!report.excluded_tasks.is_empty());
    assert_eq!(report.tasks.len() + report.excluded_tasks.len(), 27);
    for name in &report.excluded_tasks {
        assert!(!report.runs.iter().any(|r| &r.task == name));
    }
    report.verify().unwrap();
}

#[test]
fn unknown_task_is_an_error() {
    let t = common::synthetic_table();
    let budget = Budget {
        tasks: Some(vec!["nope".into()]),
        ..small_budget()
    };
    let err = run_hpo(
        &t,
        Representation::Smiles,
        &HpoSpec::new(ModelKind::Lstm),
        &budget,
    )
    .unwrap_err();
    assert!(err.to_string().contains("nope"));
}
