//! Loading trial tables from CSV or JSON lines, and writing the canonical CSV.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use reliance_core::{Dataset, Issue, OutcomeSpace, Trial, ValidationReport};

use crate::error::{CliError, Result};
use crate::schema::{Columns, Format, SchemaConfig};

/// Reads and validates `path`. Warnings come back with the dataset.
pub fn load(path: &Path, schema: &SchemaConfig) -> Result<(Dataset, ValidationReport)> {
    schema.validate()?;
    let format = schema
        .format
        .or_else(|| Format::from_path(path))
        .ok_or_else(|| CliError::Config(format!("cannot infer the format of {}; set `format`", path.display())))?;
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut report = ValidationReport::default();
    let trials = match format {
        Format::Csv => read_csv(path, file, schema, &mut report)?,
        Format::Jsonl => read_jsonl(path, file, schema, &mut report)?,
    };
    if !report.is_ok() {
        return Err(CliError::Validation(report));
    }
    match Dataset::new(trials, schema.task()?) {
        Ok((ds, warnings)) => {
            report.merge(warnings);
            for w in &report.warnings {
                log::warn!("{w}");
            }
            Ok((ds, report))
        }
        Err(errors) => {
            report.merge(errors);
            Err(CliError::Validation(report))
        }
    }
}

fn read_csv(path: &Path, file: File, schema: &SchemaConfig, report: &mut ValidationReport) -> Result<Vec<Trial>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::None).from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(|e| CliError::parse(path, e))?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    for name in required_columns(schema) {
        if !index.contains_key(name) {
            report.errors.push(Issue::new(None, name, "column missing from header"));
        }
    }
    if !report.is_ok() {
        return Ok(Vec::new());
    }
    let mut trials = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(path, e))?;
        let get = |col: &str| index.get(col).and_then(|&j| record.get(j)).map(str::to_owned);
        if let Some(t) = parse_row(i + 1, get, schema, report) {
            trials.push(t);
        }
    }
    Ok(trials)
}

fn read_jsonl(path: &Path, file: File, schema: &SchemaConfig, report: &mut ValidationReport) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    let mut row = 0;
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CliError::parse(path, format!("line {}: {e}", line_no + 1)))?;
        let Some(object) = value.as_object() else {
            report.errors.push(Issue::new(Some(row), "", "line is not a JSON object"));
            continue;
        };
        let get = |col: &str| match object.get(col)? {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        };
        if let Some(t) = parse_row(row, get, schema, report) {
            trials.push(t);
        }
    }
    Ok(trials)
}

fn required_columns(schema: &SchemaConfig) -> impl Iterator<Item = &str> {
    let c = &schema.columns;
    [&c.participant_id, &c.condition, &c.trial_index, &c.ground_truth, &c.human_rec, &c.ai_rec, &c.behavioral_action]
        .into_iter()
        .map(String::as_str)
        .chain(schema.features.iter().map(String::as_str))
}

fn parse_row(
    row: usize,
    get: impl Fn(&str) -> Option<String>,
    schema: &SchemaConfig,
    report: &mut ValidationReport,
) -> Option<Trial> {
    let before = report.errors.len();
    let mut field = |col: &str| {
        let v = get(col);
        if v.is_none() {
            report.errors.push(Issue::new(Some(row), col, "missing value"));
        }
        v
    };
    let c: &Columns = &schema.columns;
    let participant_id = field(&c.participant_id).map(|s| s.trim().to_owned());
    let condition_id = field(&c.condition).map(|s| s.trim().to_owned());
    let trial_index = field(&c.trial_index);
    let outcomes = [&c.ground_truth, &c.human_rec, &c.ai_rec, &c.behavioral_action].map(|col| (col, field(col)));
    let features: Vec<(&String, Option<String>)> = schema.features.iter().map(|col| (col, field(col))).collect();
    let explanation_meta = c.explanation_meta.as_deref().and_then(&get).filter(|s| !s.is_empty());

    let trial_index = trial_index.and_then(|s| match s.trim().parse::<u64>() {
        Ok(v) => Some(v),
        Err(_) => {
            report.errors.push(Issue::new(Some(row), &c.trial_index, format!("{s:?} is not a non-negative integer")));
            None
        }
    });
    let [y, yh, yai, ab] = outcomes.map(|(col, v)| {
        v.and_then(|s| match schema.outcome.parse(&s) {
            Ok(o) => Some(o),
            Err(_) => {
                report.errors.push(Issue::new(Some(row), col, format!("{s:?} is outside the {}", describe(&schema.outcome))));
                None
            }
        })
    });
    let features: Vec<f64> = features
        .into_iter()
        .filter_map(|(col, v)| {
            v.and_then(|s| match s.trim().parse::<f64>() {
                Ok(x) => Some(x),
                Err(_) => {
                    report.errors.push(Issue::new(Some(row), col, format!("{s:?} is not a number")));
                    None
                }
            })
        })
        .collect();
    if report.errors.len() > before {
        return None;
    }
    Some(Trial {
        participant_id: participant_id?,
        condition_id: condition_id?,
        trial_index: trial_index?,
        features,
        ground_truth: y?,
        human_rec: yh?,
        ai_rec: yai?,
        behavioral_action: ab?,
        explanation_meta,
    })
}

fn describe(space: &OutcomeSpace) -> String {
    match space {
        OutcomeSpace::Binary => "binary space {0, 1}".into(),
        OutcomeSpace::Labels { labels } => format!("label set {labels:?}"),
        OutcomeSpace::UnitInterval => "unit interval".into(),
    }
}

/// Canonical CSV of `dataset` plus the schema that reads it back.
pub fn to_canonical_csv(dataset: &Dataset) -> (Vec<u8>, SchemaConfig) {
    let task = dataset.task();
    let mut schema = SchemaConfig::canonical(task.space.clone(), task.rule, dataset.feature_dim());
    let with_meta = dataset.trials().iter().any(|t| t.explanation_meta.is_some());
    if with_meta {
        schema.columns.explanation_meta = Some("explanation_meta".into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let c = &schema.columns;
    let mut header: Vec<&str> = vec![
        &c.participant_id,
        &c.condition,
        &c.trial_index,
        &c.ground_truth,
        &c.human_rec,
        &c.ai_rec,
        &c.behavioral_action,
    ];
    header.extend(schema.features.iter().map(String::as_str));
    header.extend(c.explanation_meta.as_deref());
    w.write_record(&header).expect("in-memory write");
    let space = &task.space;
    for t in dataset.trials() {
        let mut rec = vec![
            t.participant_id.clone(),
            t.condition_id.clone(),
            t.trial_index.to_string(),
            space.format(t.ground_truth),
            space.format(t.human_rec),
            space.format(t.ai_rec),
            space.format(t.behavioral_action),
        ];
        // `Display` for f64 is the shortest string that parses back to the same bits.
        rec.extend(t.features.iter().map(f64::to_string));
        if with_meta {
            rec.push(t.explanation_meta.clone().unwrap_or_default());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    (w.into_inner().expect("in-memory flush"), schema)
}

/// Writes the canonical CSV and returns its schema.
pub fn save(path: &Path, dataset: &Dataset) -> Result<SchemaConfig> {
    let (bytes, schema) = to_canonical_csv(dataset);
    let mut f = File::create(path).map_err(CliError::io(path))?;
    f.write_all(&bytes).map_err(CliError::io(path))?;
    Ok(schema)
}
