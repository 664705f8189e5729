use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{CorpusError, ModeId, ModeStatuteMap};

/// One evaluated case. `predicted` is `None` for failed cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case_id: String,
    pub gold: ModeId,
    pub predicted: Option<ModeId>,
    pub core_hit: bool,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseRow {
    pub fn correct(&self) -> bool {
        !self.failed && self.predicted == Some(self.gold)
    }
}

/// Counts indexed `[gold][predicted]`, plus failed cases per gold mode.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; ModeId::COUNT]; ModeId::COUNT],
    failed: [u64; ModeId::COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, gold: ModeId, predicted: Option<ModeId>) {
        match predicted {
            Some(p) => self.counts[gold.index()][p.index()] += 1,
            None => self.failed[gold.index()] += 1,
        }
    }

    pub fn from_rows(rows: &[CaseRow]) -> Self {
        let mut m = Self::new();
        for r in rows {
            m.record(r.gold, if r.failed { None } else { r.predicted });
        }
        m
    }

    pub fn count(&self, gold: ModeId, predicted: ModeId) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn failed_for(&self, gold: ModeId) -> u64 {
        self.failed[gold.index()]
    }

    pub fn failed_count(&self) -> u64 {
        self.failed.iter().sum()
    }

    /// Cases with a prediction.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// All cases, failed ones included.
    pub fn size(&self) -> u64 {
        self.total() + self.failed_count()
    }

    pub fn correct(&self) -> u64 {
        (0..ModeId::COUNT).map(|i| self.counts[i][i]).sum()
    }
}

/// Fraction of rows predicted correctly; failed rows count as wrong.
pub fn accuracy(rows: &[CaseRow]) -> Result<f64, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let correct = rows.iter().filter(|r| r.correct()).count();
    Ok(correct as f64 / rows.len() as f64)
}

/// F1 per mode in taxonomy order. A failed case adds to the false
/// negatives of its gold mode and to no mode's false positives. A mode with
/// zero precision and recall scores 0.
pub fn per_mode_f1(m: &ConfusionMatrix) -> [f64; ModeId::COUNT] {
    let mut f1 = [0.0; ModeId::COUNT];
    for (c, out) in f1.iter_mut().enumerate() {
        let tp = m.counts[c][c] as f64;
        let predicted: u64 = (0..ModeId::COUNT).map(|g| m.counts[g][c]).sum();
        let actual: u64 = m.counts[c].iter().sum::<u64>() + m.failed[c];
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        *out = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
    }
    f1
}

/// Unweighted mean of [`per_mode_f1`] over all six modes.
pub fn macro_f1(m: &ConfusionMatrix) -> f64 {
    per_mode_f1(m).iter().sum::<f64>() / ModeId::COUNT as f64
}

/// Whether the predicted mode's full statute set contains a core statute of
/// the gold mode.
pub fn core_statute_hit(map: &ModeStatuteMap, predicted: ModeId, gold: ModeId) -> bool {
    let full = map.binding(predicted).full;
    map.binding(gold).core.iter().any(|c| full.contains(c))
}

/// [`core_statute_hit`] on textual mode labels.
pub fn core_statute_hit_labels(map: &ModeStatuteMap, predicted: &str, gold: &str) -> Result<bool, CorpusError> {
    Ok(core_statute_hit(map, predicted.parse()?, gold.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::KnowledgeBase;

    fn rm(i: usize) -> ModeId {
        ModeId::from_index(i).unwrap()
    }

    fn row(gold: usize, predicted: Option<usize>) -> CaseRow {
        CaseRow {
            case_id: String::new(),
            gold: rm(gold),
            predicted: predicted.map(rm),
            core_hit: false,
            failed: predicted.is_none(),
            error: None,
        }
    }

    #[test]
    fn accuracy_counts_failures_as_wrong() {
        let rows = vec![row(0, Some(0)), row(1, Some(1)), row(2, Some(2)), row(3, None)];
        assert_eq!(accuracy(&rows).unwrap(), 0.75);
        assert!(matches!(accuracy(&[]), Err(EvalError::EmptyDataset)));
    }

    #[test]
    fn perfect_diagonal() {
        let rows: Vec<CaseRow> = (0..6).map(|i| row(i, Some(i))).collect();
        let m = ConfusionMatrix::from_rows(&rows);
        assert_eq!(macro_f1(&m), 1.0);
        assert_eq!(m.size(), 6);
    }

    #[test]
    fn all_wrong_is_zero() {
        let rows: Vec<CaseRow> = (0..5).map(|_| row(0, Some(1))).collect();
        let m = ConfusionMatrix::from_rows(&rows);
        assert_eq!(per_mode_f1(&m), [0.0; 6]);
        assert_eq!(macro_f1(&m), 0.0);
    }

    #[test]
    fn failure_adds_false_negative_only() {
        // Gold RM1 twice: one correct, one failed. P = 1, R = 1/2, F1 = 2/3.
        let m = ConfusionMatrix::from_rows(&[row(0, Some(0)), row(0, None)]);
        let f1 = per_mode_f1(&m);
        assert!((f1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1[1..], [0.0; 5]);
        assert_eq!(m.failed_count(), 1);
        assert_eq!(m.total(), 1);
    }

    #[test]
    fn core_hit_on_shipped_map() {
        let kb = KnowledgeBase::builtin();
        for m in ModeId::ALL {
            assert!(core_statute_hit(&kb.modes, m, m));
        }
        assert!(core_statute_hit_labels(&kb.modes, "RM3", "RM4").unwrap());
        assert!(!core_statute_hit_labels(&kb.modes, "RM1", "RM3").unwrap());
        assert!(core_statute_hit_labels(&kb.modes, "RM9", "RM1").is_err());
    }
}
