//! Accuracy, Macro-F1 and Core Statute Hit, and the dataset harness that
//! produces them.

mod metrics;

pub use metrics::{
    accuracy, core_statute_hit, core_statute_hit_labels, macro_f1, per_mode_f1, CaseRow, ConfusionMatrix,
};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::AblationFlags;
use crate::corpus::{CaseRecord, KnowledgeBase, ModeId};
use crate::pipeline::{CaseFailure, Engine, JudgmentReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no cases to evaluate")]
    EmptyDataset,
    #[error("case {0} has no gold label")]
    Unlabeled(String),
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

pub type CaseOutcome = Result<JudgmentReport, CaseFailure>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub core_hit_rate: f64,
    /// In taxonomy order, RM1 first.
    pub per_mode_f1: Vec<f64>,
    pub cases: usize,
    pub failed: usize,
    pub confusion: ConfusionMatrix,
    pub config: Value,
    pub rows: Vec<CaseRow>,
}

impl EvalReport {
    /// Aggregates per-case rows. Pure: the result depends on the rows only.
    pub fn from_rows(label: impl Into<String>, rows: Vec<CaseRow>, config: Value) -> Result<Self, EvalError> {
        let accuracy = accuracy(&rows)?;
        let confusion = ConfusionMatrix::from_rows(&rows);
        let per_mode = per_mode_f1(&confusion);
        let hits = rows.iter().filter(|r| !r.failed && r.core_hit).count();
        Ok(Self {
            label: label.into(),
            accuracy,
            macro_f1: macro_f1(&confusion),
            core_hit_rate: hits as f64 / rows.len() as f64,
            per_mode_f1: per_mode.to_vec(),
            cases: rows.len(),
            failed: rows.iter().filter(|r| r.failed).count(),
            confusion,
            config,
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The row for one case outcome. Failed cases score false everywhere.
pub fn case_row(kb: &KnowledgeBase, gold: ModeId, case_id: &str, outcome: &CaseOutcome) -> CaseRow {
    match outcome {
        Ok(report) => {
            let predicted = report.judgment.final_mode;
            CaseRow {
                case_id: case_id.to_string(),
                gold,
                predicted: Some(predicted),
                core_hit: core_statute_hit(&kb.modes, predicted, gold),
                failed: false,
                error: None,
            }
        }
        Err(failure) => CaseRow {
            case_id: case_id.to_string(),
            gold,
            predicted: None,
            core_hit: false,
            failed: true,
            error: Some(failure.to_string()),
        },
    }
}

fn with_pool<T: Send>(concurrency: usize, f: impl FnOnce() -> T + Send) -> Result<T, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency)
        .build()
        .map_err(|e| EvalError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every case, at most `runner.concurrency` at a time, and persists
/// their artifacts. Outcomes are returned in input order.
pub fn run_cases(engine: &Engine, cases: &[CaseRecord]) -> Result<Vec<CaseOutcome>, EvalError> {
    let outcomes: Vec<CaseOutcome> = with_pool(engine.config().runner.concurrency, || {
        cases.par_iter().map(|c| engine.run_case(c)).collect()
    })?;
    for outcome in &outcomes {
        engine.persist(outcome)?;
    }
    Ok(outcomes)
}

fn gold_labels(cases: &[CaseRecord]) -> Result<Vec<ModeId>, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    cases
        .iter()
        .map(|c| c.gold_mode.ok_or_else(|| EvalError::Unlabeled(c.case_id.clone())))
        .collect()
}

/// Runs and scores a labeled dataset, returning the per-case outcomes too.
pub fn evaluate_with_outcomes(
    engine: &Engine,
    cases: &[CaseRecord],
) -> Result<(EvalReport, Vec<CaseOutcome>), EvalError> {
    let golds = gold_labels(cases)?;
    let outcomes = run_cases(engine, cases)?;
    let rows = cases
        .iter()
        .zip(&golds)
        .zip(&outcomes)
        .map(|((c, &g), o)| case_row(engine.kb(), g, &c.case_id, o))
        .collect();
    let config = engine.config();
    let report = EvalReport::from_rows(config.ablation.label(), rows, config.snapshot())?;
    Ok((report, outcomes))
}

pub fn evaluate_dataset(engine: &Engine, cases: &[CaseRecord]) -> Result<EvalReport, EvalError> {
    evaluate_with_outcomes(engine, cases).map(|(report, _)| report)
}

/// One report per row of the cumulative stage sweep, from no optional
/// stage to all of them.
pub fn ablation_sweep(engine: &Engine, cases: &[CaseRecord]) -> Result<Vec<EvalReport>, EvalError> {
    AblationFlags::sweep()
        .iter()
        .map(|&flags| evaluate_dataset(&engine.with_ablation(flags), cases))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AraRow {
    pub case_id: String,
    pub gold_index: usize,
    pub selected: Option<usize>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AraReport {
    pub accuracy: f64,
    pub rows: Vec<AraRow>,
}

/// Accident-reason answering: adjudicate each case, then select an option
/// from its report. Cases that fail at either step count as wrong.
pub fn ara_accuracy(engine: &Engine, cases: &[CaseRecord]) -> Result<AraReport, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let golds: Vec<usize> = cases
        .iter()
        .map(|c| c.gold_ara_index.ok_or_else(|| EvalError::Unlabeled(c.case_id.clone())))
        .collect::<Result<_, _>>()?;
    let rows: Vec<AraRow> = with_pool(engine.config().runner.concurrency, || {
        cases
            .par_iter()
            .zip(&golds)
            .map(|(case, &gold)| {
                let selected = engine
                    .run_case(case)
                    .map_err(|f| f.to_string())
                    .and_then(|report| engine.run_ara(case, &report).map_err(|e| e.to_string()));
                AraRow {
                    case_id: case.case_id.clone(),
                    gold_index: gold,
                    correct: selected.as_ref().is_ok_and(|&s| s == gold),
                    selected: selected.as_ref().ok().copied(),
                    error: selected.err(),
                }
            })
            .collect()
    })?;
    let correct = rows.iter().filter(|r| r.correct).count();
    Ok(AraReport {
        accuracy: correct as f64 / rows.len() as f64,
        rows,
    })
}

/// Aligned text table with one line per report: Acc, Macro-F1 and Core in
/// percent.
pub fn render_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .chain(["configuration".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>8}  {:>6}  {:>6}",
        "configuration", "Acc", "Macro-F1", "Core", "failed"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.1}  {:>8.1}  {:>6.1}  {:>6}",
            r.label,
            r.accuracy * 100.0,
            r.macro_f1 * 100.0,
            r.core_hit_rate * 100.0,
            r.failed
        );
    }
    out
}
