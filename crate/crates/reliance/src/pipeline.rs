//! Dataset in, report out.

use std::collections::BTreeSet;

use reliance_core::analysis::{analyze, analyze_overfit, AmbiguityPolicy, ConditionAnalysis, Prepared};
use reliance_core::empirical::{Discretizer, KMeansConfig, SelectKConfig};
use reliance_core::estimators::Ranking;
use reliance_core::resample::{resample, unit_count, BootstrapConfig, BootstrapResult};
use reliance_core::seed::{derive_seed, Stream};
use reliance_core::{BoundMode, Dataset, OutcomeSpace};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::{BootstrapSummary, BoundReport, ConditionReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOptions {
    /// The overfit upper bound is always computed; this adds the discretized lower bound.
    pub discretized: bool,
    pub selection: SelectKConfig,
    pub bootstrap: Option<BootstrapConfig>,
    pub ranking: Ranking,
    pub ambiguity: AmbiguityPolicy,
    pub seed: u64,
}

impl AnalysisOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            discretized: true,
            selection: SelectKConfig { seed, ..SelectKConfig::default() },
            bootstrap: None,
            ranking: Ranking::Disagreements,
            ambiguity: AmbiguityPolicy::Fail,
            seed,
        }
    }

    pub fn modes(&self) -> Vec<BoundMode> {
        let mut m = vec![BoundMode::OverfitUpper];
        if self.discretized {
            m.push(BoundMode::DiscretizedLower);
        }
        m
    }
}

/// Bootstrap draws of one condition under one bound.
pub struct SampleSet {
    pub condition: String,
    pub mode: BoundMode,
    pub result: BootstrapResult,
}

pub struct ConditionRun {
    pub report: ConditionReport,
    pub samples: Vec<SampleSet>,
}

pub fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Runs every condition of `dataset`.
pub fn run(dataset: &Dataset, opts: &AnalysisOptions) -> Result<Vec<ConditionRun>> {
    let parts = dataset.partition();
    let mut prepared = Vec::with_capacity(parts.len());
    for (name, part) in &parts {
        let (p, dropped) = Prepared::new(part, opts.ambiguity)?;
        if !dropped.is_empty() {
            log::warn!("condition {name}: dropped {} ambiguous trial(s)", dropped.len());
        }
        prepared.push((p, dropped));
    }
    if prepared.iter().all(|(p, _)| p.disagreement_count() == 0) {
        return Err(CliError::Degenerate(
            "no trial in any condition has disagreeing human and AI recommendations; reliance and the rational benchmark's value are undefined".into(),
        ));
    }
    prepared.into_iter().map(|(p, dropped)| run_condition(&p, dropped, opts)).collect()
}

fn run_condition(p: &Prepared, dropped: Vec<String>, opts: &AnalysisOptions) -> Result<ConditionRun> {
    log::info!("condition {}: {} observations", p.condition, p.observations.len());
    let mut bounds = Vec::new();
    let mut samples = Vec::new();
    let advantage_file = format!("advantage_{}.csv", file_safe(&p.condition));

    let overfit = analyze_overfit(p, opts.ranking)?;
    let boot = match &opts.bootstrap {
        Some(cfg) => Some(parallel_bootstrap(p, &overfit, cfg, |r, _| analyze_overfit(r, opts.ranking))?),
        None => None,
    };
    bounds.push(bound_report(overfit, None, &boot, &advantage_file));
    if let Some(result) = boot {
        samples.push(SampleSet { condition: p.condition.clone(), mode: BoundMode::OverfitUpper, result });
    }

    if opts.discretized {
        let d = reliance_core::analysis::analyze_discretized(p, &opts.selection, opts.ranking)?;
        let k = d.selection.chosen_k;
        let boot = match &opts.bootstrap {
            Some(cfg) => {
                let kmeans = opts.selection.kmeans;
                let refit = |r: &Prepared, i: usize| refit_discretized(r, k, kmeans, cfg.seed, i, opts.ranking);
                Some(parallel_bootstrap(p, &d.analysis, cfg, refit)?)
            }
            None => None,
        };
        bounds.push(bound_report(d.analysis, Some(d.selection), &boot, &advantage_file));
        if let Some(result) = boot {
            samples.push(SampleSet { condition: p.condition.clone(), mode: BoundMode::DiscretizedLower, result });
        }
    }
    Ok(ConditionRun { report: ConditionReport { condition: p.condition.clone(), dropped_trials: dropped, bounds }, samples })
}

/// Refits the clusters on a resample at the chosen k (capped by the resample's distinct signals).
fn refit_discretized(
    r: &Prepared,
    k: usize,
    kmeans: KMeansConfig,
    seed: u64,
    iteration: usize,
    ranking: Ranking,
) -> reliance_core::Result<ConditionAnalysis> {
    let distinct = r.observations.iter().map(|o| o.signal).collect::<BTreeSet<_>>().len();
    let k = k.min(distinct).max(1);
    let seed = derive_seed(derive_seed(seed, Stream::Bootstrap, iteration as u64), Stream::KMeans, k as u64);
    let disc = Discretizer::fit(r, k, seed, kmeans)?;
    analyze(r, disc.keying(&r.signals)?, BoundMode::DiscretizedLower, ranking)
}

fn bound_report(
    a: ConditionAnalysis,
    selection: Option<reliance_core::empirical::KSelectionDiagnostics>,
    boot: &Option<BootstrapResult>,
    advantage_file: &str,
) -> BoundReport {
    BoundReport {
        mode: a.estimates.mode,
        complementary: a.estimates.complementary(),
        chosen_k: selection.as_ref().map(|s| s.chosen_k),
        k_selection: selection,
        bootstrap: boot.as_ref().map(BootstrapSummary::from_result),
        advantage_file: advantage_file.to_string(),
        estimates: a.estimates,
        losses: a.losses,
        reliance_class: a.reliance,
        advantage: a.advantage,
    }
}

/// Bootstrap with iterations spread over threads. Results are stored by
/// iteration index, so the outcome does not depend on scheduling.
pub fn parallel_bootstrap<F>(
    p: &Prepared,
    point: &ConditionAnalysis,
    cfg: &BootstrapConfig,
    analyze: F,
) -> Result<BootstrapResult>
where
    F: Fn(&Prepared, usize) -> reliance_core::Result<ConditionAnalysis> + Sync,
{
    cfg.validate()?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.iterations);
    let run = |i: usize| analyze(&resample(p, cfg, i)?, i);
    let mut slots: Vec<Option<reliance_core::Result<ConditionAnalysis>>> = (0..cfg.iterations).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = cfg.iterations.div_ceil(threads);
        for (c, out) in slots.chunks_mut(chunk).enumerate() {
            let run = &run;
            s.spawn(move || {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = Some(run(c * chunk + j));
                }
            });
        }
    });
    let runs = slots.into_iter().map(|s| s.expect("every slot filled")).collect::<reliance_core::Result<Vec<_>>>()?;
    let sample_size = cfg.sample_size.unwrap_or_else(|| unit_count(p, cfg.unit));
    Ok(BootstrapResult::assemble(point, cfg, sample_size, &runs)?)
}

/// Caveats that apply to the whole run.
pub fn notes(dataset: &Dataset, opts: &AnalysisOptions) -> Vec<String> {
    let mut notes = Vec::new();
    if dataset.task().space == OutcomeSpace::UnitInterval {
        notes.push(
            "behavioral choice on the unit interval is the recommendation nearest to the action (a convention, not part of the framework)"
                .into(),
        );
    }
    if opts.ranking == Ranking::AllTrials {
        notes.push("mis-reliant benchmark ranks all trials, agreements included".into());
    }
    notes
}
