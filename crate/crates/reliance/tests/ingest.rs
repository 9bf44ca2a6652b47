use std::fs;
use std::path::Path;

use reliance::ingest::{load, save};
use reliance::schema::SchemaConfig;
use reliance::CliError;
use reliance_core::synth::{generate, FeatureModel, GeneratorConfig};
use reliance_core::{Dataset, DecisionTask, Outcome, OutcomeSpace, ScoringRule, Trial};

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn binary_schema() -> SchemaConfig {
    SchemaConfig::canonical(OutcomeSpace::Binary, ScoringRule::ZeroOne, 0)
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const HEADER: &str = "participant_id,condition,trial_index,y,y_h,y_ai,a_b\n";

#[test]
fn canonical_csv_round_trips_bit_exact() {
    let mut trials = generate(&GeneratorConfig {
        participants: 6,
        features: FeatureModel::GaussianClusters { dimension: 3, separation: 2.0 },
        ..GeneratorConfig::two_type(8)
    })
    .unwrap()
    .trials()
    .to_vec();
    let awkward = [0.1 + 0.2, -0.0, 1e-310, f64::MAX, -f64::MIN_POSITIVE, 1.0 / 3.0];
    for (t, v) in trials.iter_mut().zip(awkward) {
        t.features[1] = v;
        t.explanation_meta = Some("said \"maybe\", then, no".into());
    }
    let task = DecisionTask::new(OutcomeSpace::Binary, ScoringRule::ZeroOne).unwrap();
    let ds = Dataset::new(trials, task).unwrap().0;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("round.csv");
    let schema = save(&path, &ds).unwrap();
    let (back, _) = load(&path, &schema).unwrap();
    assert_eq!(back.trials().len(), ds.trials().len());
    for (a, b) in ds.trials().iter().zip(back.trials()) {
        assert_eq!(a, b);
        let bits = |t: &Trial| t.features.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    let again = dir.path().join("again.csv");
    save(&again, &back).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn label_names_survive_a_round_trip() {
    let (ds, _) = load(&data("deception.jsonl"), &SchemaConfig::load(&data("deception.json")).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let schema = save(&path, &ds).unwrap();
    let (back, _) = load(&path, &schema).unwrap();
    assert_eq!(ds.trials(), back.trials());
    assert_eq!(back.task(), ds.task());
}

#[test]
fn off_space_value_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.csv", &format!("{HEADER}a,c,0,1,0,1,1\na,c,1,maybe,0,1,1\n"));
    let Err(CliError::Validation(report)) = load(&p, &binary_schema()) else { panic!("expected a validation error") };
    let issue = &report.errors[0];
    assert_eq!(issue.row, Some(2));
    assert_eq!(issue.field, "y");
    assert!(issue.to_string().contains("maybe"), "{issue}");
}

#[test]
fn structural_problems_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.csv", &format!("{HEADER}a,c,-1,1,0,1,1\na,c,1,1,,1,0\nb,c,x,1,0,1,1\n"));
    let Err(CliError::Validation(report)) = load(&p, &binary_schema()) else { panic!() };
    let rows: Vec<_> = report.errors.iter().map(|i| (i.row, i.field.as_str())).collect();
    assert_eq!(rows, [(Some(1), "trial_index"), (Some(2), "y_h"), (Some(3), "trial_index")]);

    let p = write(dir.path(), "dup.csv", &format!("{HEADER}a,c,0,1,0,1,1\na,c,0,1,0,1,0\n"));
    let Err(CliError::Validation(report)) = load(&p, &binary_schema()) else { panic!() };
    assert_eq!((report.errors[0].row, report.errors[0].field.as_str()), (Some(2), "trial_index"));

    let p = write(dir.path(), "cross.csv", &format!("{HEADER}a,c,0,1,0,1,1\na,d,1,1,0,1,1\n"));
    let Err(CliError::Validation(report)) = load(&p, &binary_schema()) else { panic!() };
    assert_eq!(report.errors[0].field, "condition");

    let p = write(dir.path(), "short.csv", "participant_id,condition,trial_index,y,y_h,y_ai\na,c,0,1,0,1\n");
    let Err(CliError::Validation(report)) = load(&p, &binary_schema()) else { panic!() };
    assert_eq!(report.errors[0].field, "a_b");
}

#[test]
fn unmatched_action_is_an_error() {
    let schema = SchemaConfig::canonical(
        OutcomeSpace::Labels { labels: vec!["x".into(), "y".into(), "z".into()] },
        ScoringRule::ZeroOne,
        0,
    );
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m.csv", &format!("{HEADER}a,c,0,x,y,z,x\n"));
    let Err(CliError::Validation(report)) = load(&p, &schema) else { panic!() };
    assert_eq!(report.errors[0].field, "behavioral_action");
}

#[test]
fn participant_without_disagreements_warns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "w.csv", &format!("{HEADER}a,c,0,1,1,1,1\nb,c,0,1,0,1,1\n"));
    let (ds, report) = load(&p, &binary_schema()).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(report.warnings.len(), 1);
    assert!(report.warnings[0].message.contains("participant a"));
}

#[test]
fn large_table_partitions_by_condition() {
    let mut body = String::from(HEADER);
    for c in ["left", "right"] {
        for p in 0..100 {
            for t in 0..20 {
                body += &format!("{c}{p},{c},{t},{},{},{},1\n", t % 2, (t / 2) % 2, (t / 3) % 2);
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "big.csv", &body);
    let (ds, _) = load(&p, &binary_schema()).unwrap();
    assert_eq!(ds.len(), 4000);
    let parts = ds.partition();
    assert_eq!(parts.len(), 2);
    for (_, d) in parts {
        assert_eq!(d.participant_count(), 100);
        assert_eq!(d.len(), 2000);
    }
}

#[test]
fn jsonl_fixture_reads_custom_columns() {
    let schema = SchemaConfig::load(&data("deception.json")).unwrap();
    let (ds, _) = load(&data("deception.jsonl"), &schema).unwrap();
    assert_eq!(ds.participant_count(), 30);
    assert_eq!(ds.feature_dim(), 1);
    assert_eq!(ds.conditions().count(), 2);
    assert!(ds.trials().iter().any(|t| t.explanation_meta.is_some()));
    assert!(ds.trials().iter().all(|t| matches!(t.ground_truth, Outcome::Label(0 | 1))));
}

#[test]
fn quadratic_fixture_keeps_the_midpoint_row() {
    let schema = SchemaConfig::load(&data("probability.toml")).unwrap();
    let (ds, _) = load(&data("probability.csv"), &schema).unwrap();
    let mid = ds.trials().iter().find(|t| t.participant_id == "s00" && t.trial_index == 10).unwrap();
    assert_eq!(mid.behavioral_action, Outcome::Value(0.5));
}
