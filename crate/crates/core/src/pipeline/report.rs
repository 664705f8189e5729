use std::fmt::Write as _;

use super::TraceLog;
use crate::agents::FinalJudgment;
use crate::corpus::KnowledgeBase;

pub const REPORT_SECTIONS: [&str; 6] = [
    "Facts",
    "Issues",
    "Statute Analysis",
    "Precedent Analysis",
    "Liability Determination",
    "Decision",
];

pub const FALLBACK_NOTICE: &str = "Fallback notice: none of the cited provisions could be resolved in the statute \
                                   corpus; the statutes bound to the final responsibility mode were applied instead.";

pub fn section_header(title: &str) -> String {
    format!("== {title} ==")
}

/// Renders the final judgment as plain text. Output depends only on the
/// arguments.
pub fn render_report(judgment: &FinalJudgment, trace: &TraceLog, kb: &KnowledgeBase) -> String {
    let mode = kb.modes.mode(judgment.final_mode);
    let mut out = String::new();
    let _ = writeln!(out, "TRAFFIC ACCIDENT JUDGMENT REPORT");
    let _ = writeln!(out, "case: {}", judgment.case_id);
    let _ = writeln!(out, "trace: {}", trace.trace_id);
    let _ = writeln!(out, "responsibility mode: {} ({})", judgment.final_mode, mode.name);

    for (title, body) in judgment.report.titled() {
        let _ = writeln!(out, "\n{}", section_header(title));
        let _ = writeln!(out, "{}", body.trim());
        match title {
            "Statute Analysis" => {
                let _ = writeln!(out, "Applicable provisions:");
                for id in &judgment.final_statute_ids {
                    let citation = kb.corpus.statute(id).map_or_else(|| id.clone(), |s| s.citation());
                    let _ = writeln!(out, "  - {citation} [{id}]");
                }
            }
            "Decision" => {
                let _ = writeln!(out, "Final responsibility mode: {} ({}).", judgment.final_mode, mode.name);
                if judgment.fallback_applied {
                    let _ = writeln!(out, "{FALLBACK_NOTICE}");
                }
                for d in &judgment.deviations {
                    let _ = writeln!(out, "Deviation from the panel merge: {d}");
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ReportSections;
    use crate::corpus::ModeId;
    use serde_json::json;

    fn judgment(fallback: bool) -> FinalJudgment {
        FinalJudgment {
            case_id: "c1".into(),
            final_mode: "RM1".parse::<ModeId>().unwrap(),
            final_statute_ids: vec!["rtsl-43".into()],
            report: ReportSections {
                facts: "f".into(),
                issues: "i".into(),
                statute_analysis: "s".into(),
                precedent_analysis: "p".into(),
                liability_determination: "l".into(),
                decision: "d".into(),
            },
            fallback_applied: fallback,
            deviations: Vec::new(),
            trace_refs: Vec::new(),
        }
    }

    #[test]
    fn sections_in_order() {
        let kb = KnowledgeBase::builtin();
        let trace = TraceLog::new(&json!({"case_id": "c1"}), json!({}), &json!(1));
        let text = render_report(&judgment(false), &trace, &kb);
        let positions: Vec<usize> = REPORT_SECTIONS
            .iter()
            .map(|t| text.find(&section_header(t)).expect("section present"))
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("Road Traffic Safety Law Art. 43 [rtsl-43]"));
        assert!(!text.contains(FALLBACK_NOTICE));
        assert_eq!(text, render_report(&judgment(false), &trace, &kb));
    }

    #[test]
    fn fallback_notice_in_decision() {
        let kb = KnowledgeBase::builtin();
        let trace = TraceLog::new(&json!({"case_id": "c1"}), json!({}), &json!(1));
        let text = render_report(&judgment(true), &trace, &kb);
        let decision = text.find(&section_header("Decision")).unwrap();
        assert!(text[decision..].contains(FALLBACK_NOTICE));
    }
}
