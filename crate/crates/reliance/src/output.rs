//! Plot-ready CSVs, the text summary and atomic file output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use reliance_core::losses::RelianceClass;
use reliance_core::resample::{Interval, Quantity};

use crate::error::{CliError, Result};
use crate::pipeline::SampleSet;
use crate::report::{BoundReport, Report};

/// Files rendered in memory, written together at the end.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn files(self) -> Vec<(String, Vec<u8>)> {
        self.files
    }

    /// Writes each file to a temporary sibling first, then renames it into place.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp"));
            std::fs::write(&tmp, contents).map_err(CliError::io(&tmp))?;
            std::fs::rename(&tmp, &target).map_err(CliError::io(&target))?;
            written.push(target);
        }
        Ok(written)
    }
}

const LOSS_QUANTITIES: [Quantity; 9] = [
    Quantity::RBaseline,
    Quantity::RBenchmark,
    Quantity::RMisreliant,
    Quantity::BBehavioral,
    Quantity::Delta,
    Quantity::GammaBehavioral,
    Quantity::GammaRational,
    Quantity::RelianceLoss,
    Quantity::DiscriminationLoss,
];

fn point(b: &BoundReport, q: Quantity) -> Option<f64> {
    let e = &b.estimates;
    let losses = (!b.losses.degenerate).then_some(&b.losses);
    match q {
        Quantity::RBaseline => Some(e.r_baseline),
        Quantity::RBenchmark => Some(e.r_benchmark),
        Quantity::BBehavioral => Some(e.b_behavioral),
        Quantity::RMisreliant => Some(e.r_misreliant),
        Quantity::GammaBehavioral => e.gamma_behavioral,
        Quantity::GammaRational => e.gamma_rational,
        Quantity::Delta => Some(b.losses.delta),
        Quantity::RelianceLoss => losses.map(|l| l.reliance_loss),
        Quantity::DiscriminationLoss => losses.map(|l| l.discrimination_loss),
    }
}

/// The widest requested interval of `q`.
fn widest(b: &BoundReport, q: Quantity) -> Option<Interval> {
    let summary = b.bootstrap.as_ref()?.get(q)?;
    summary.intervals.iter().copied().max_by(|x, y| x.level.total_cmp(&y.level))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per condition, bound and quantity, with the widest bootstrap interval.
pub fn losses_csv(report: &Report) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "mode", "quantity", "value", "level", "lo", "hi"]).expect("in-memory write");
    for c in &report.conditions {
        for b in &c.bounds {
            for q in LOSS_QUANTITIES {
                let iv = widest(b, q);
                w.write_record([
                    c.condition.clone(),
                    b.mode.as_str().to_string(),
                    q.as_str().to_string(),
                    cell(point(b, q)),
                    cell(iv.map(|i| i.level)),
                    cell(iv.map(|i| i.lo)),
                    cell(iv.map(|i| i.hi)),
                ])
                .expect("in-memory write");
            }
        }
    }
    w.into_inner().expect("in-memory flush")
}

/// Advantage curves of one condition, descending within each bound.
pub fn advantage_csv(bounds: &[BoundReport]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "rank", "quantile", "advantage"]).expect("in-memory write");
    for b in bounds {
        for (i, p) in b.advantage.points.iter().enumerate() {
            w.write_record([b.mode.as_str().to_string(), (i + 1).to_string(), p.quantile.to_string(), p.advantage.to_string()])
                .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn bootstrap_csv(samples: &[SampleSet]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "mode", "iteration", "quantity", "value"]).expect("in-memory write");
    for s in samples {
        for q in &s.result.quantities {
            for (i, v) in q.samples.iter().enumerate() {
                w.write_record([s.condition.clone(), s.mode.as_str().to_string(), i.to_string(), q.quantity.as_str().to_string(), cell(*v)])
                    .expect("in-memory write");
            }
        }
    }
    w.into_inner().expect("in-memory flush")
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

pub fn summary_text(report: &Report) -> String {
    let mut s = String::new();
    let m = &report.metadata;
    let _ = writeln!(s, "{} {} (report schema {})", m.tool, m.tool_version, report.schema_version);
    let _ = writeln!(s, "data: {} (sha256 {})", m.data_file, m.data_sha256);
    let _ = writeln!(s, "seed: {}", m.seed);
    for c in &report.conditions {
        let _ = writeln!(s, "\ncondition {}", c.condition);
        for b in &c.bounds {
            let e = &b.estimates;
            let k = b.chosen_k.map(|k| format!(", k = {k}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "  [{}{k}] {} participants, {} trials, {} disagreements, {} signals",
                b.mode.as_str(),
                e.n_participants,
                e.n_observations,
                e.n_disagreements,
                e.n_signals
            );
            for q in LOSS_QUANTITIES {
                let iv = widest(b, q).map(|i| format!("  {:.0}% [{:.4}, {:.4}]", i.level * 100.0, i.lo, i.hi)).unwrap_or_default();
                let _ = writeln!(s, "    {:<20} {:>10}{iv}", q.as_str(), fmt(point(b, q)));
            }
            if b.losses.degenerate {
                let _ = writeln!(s, "    value of complementation is zero; normalized losses are undefined");
            }
            let class = match b.reliance_class {
                Some(RelianceClass::UnderReliance) => "under-reliance",
                Some(RelianceClass::Appropriate) => "appropriate reliance",
                Some(RelianceClass::OverReliance) => "over-reliance",
                None => "reliance undefined",
            };
            let _ = writeln!(s, "    reliance: {class}");
            let verdict = if b.complementary { "complementary performance achieved" } else { "complementary performance not achieved" };
            let _ = writeln!(s, "    {verdict}");
        }
    }
    for w in &m.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    for n in &m.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

/// Everything `report` can render from the JSON alone.
pub fn rendered(report: &Report) -> Outputs {
    let mut out = Outputs::default();
    out.add("losses.csv", losses_csv(report));
    for c in &report.conditions {
        if let Some(first) = c.bounds.first() {
            out.add(first.advantage_file.clone(), advantage_csv(&c.bounds));
        }
    }
    out.add("summary.txt", summary_text(report));
    out
}
