//! Case orchestration: facts, retrieval, the judge panel and the rendered
//! report, with a trace record per stage.

mod report;
mod trace;

pub use report::{render_report, section_header, FALLBACK_NOTICE, REPORT_SECTIONS};
pub use trace::{digest_value, sha256_hex, StageName, StageRecord, StageStatus, TraceLog};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agents::{
    aggregate_facts, ask, assist, deliberation_judge, issue_judge, law_precedent_judge, raw_concatenation,
    single_judge_final, AgentError, AgentRole, AraSelection, FactStatement, FinalJudgment, LlmBackend,
    PreliminaryJudgment, RevisionSuggestions,
};
use crate::backend::BackendError;
use crate::config::{AblationFlags, ConfigError, PipelineConfig};
use crate::corpus::{CaseRecord, KnowledgeBase};
use crate::retrieval::{
    build_index, corpus_docs, retrieve_for_fact, EmbeddingBackend, InvertedIndex, LegalSummary, RetrievalError,
};
use trace::StageClock;

#[derive(Debug, Clone, Error)]
pub enum StageError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("retrieval failed: {0}")]
    Retrieval(String),
    #[error("invalid case: {0}")]
    InvalidCase(String),
}

impl From<RetrievalError> for StageError {
    fn from(e: RetrievalError) -> Self {
        StageError::Retrieval(e.to_string())
    }
}

impl StageError {
    /// Whether the failure came from an unreachable or misbehaving backend
    /// rather than from the input.
    pub fn is_backend(&self) -> bool {
        match self {
            StageError::Agent(AgentError::Backend { .. }) => true,
            StageError::Agent(AgentError::StructuredOutput { .. }) => true,
            StageError::Retrieval(_) => true,
            StageError::InvalidCase(_) => false,
        }
    }
}

/// A case that could not be adjudicated. The trace ends with the failed
/// stage.
#[derive(Debug, Clone, Error)]
#[error("case {case_id}: stage {stage} failed: {error}")]
pub struct CaseFailure {
    pub case_id: String,
    pub stage: StageName,
    pub error: StageError,
    pub trace: Box<TraceLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentReport {
    pub judgment: FinalJudgment,
    /// The fact statement every later stage worked from.
    pub fact: FactStatement,
    pub summary: LegalSummary,
    pub text: String,
    pub trace: TraceLog,
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Error)]
pub enum AraError {
    #[error("case {0} has no answer options")]
    NoOptions(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Shared read-only state for running cases. Cheap to clone.
#[derive(Clone)]
pub struct Engine {
    kb: Arc<KnowledgeBase>,
    index: Arc<InvertedIndex>,
    llm: Arc<dyn LlmBackend>,
    embedder: Arc<dyn EmbeddingBackend>,
    config: PipelineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("llm", &self.llm.name())
            .field("embedder", &self.embedder.name())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

struct Run<'a> {
    engine: &'a Engine,
    trace: TraceLog,
}

impl Run<'_> {
    fn stage<T: Serialize>(
        &mut self,
        stage: StageName,
        input: Value,
        f: impl FnOnce() -> Result<T, StageError>,
    ) -> Result<T, (StageName, StageError)> {
        let clock = StageClock::start(self.engine.config.runner.record_timings);
        match f() {
            Ok(out) => {
                let output = serde_json::to_value(&out).expect("stage output serializes");
                self.trace
                    .record(stage, StageStatus::Completed, &input, output, clock.elapsed_ms());
                Ok(out)
            }
            Err(e) => {
                self.trace.record(
                    stage,
                    StageStatus::Failed,
                    &input,
                    json!({"error": e.to_string()}),
                    clock.elapsed_ms(),
                );
                Err((stage, e))
            }
        }
    }

    fn skip<T: Serialize>(&mut self, stage: StageName, input: Value, substitute: T) -> T {
        let output = serde_json::to_value(&substitute).expect("stage output serializes");
        self.trace.record(stage, StageStatus::Skipped, &input, output, 0.0);
        substitute
    }
}

impl Engine {
    pub fn new(
        kb: Arc<KnowledgeBase>,
        index: Arc<InvertedIndex>,
        llm: Arc<dyn LlmBackend>,
        embedder: Arc<dyn EmbeddingBackend>,
        config: PipelineConfig,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        if let Some(doc) = index.docs().iter().find(|d| !kb.corpus.contains_id(&d.id)) {
            return Err(ConfigError::Invalid(format!(
                "index document {} is not in the knowledge base",
                doc.id
            )));
        }
        Ok(Self {
            kb,
            index,
            llm,
            embedder,
            config,
        })
    }

    /// Builds the backends named in `config`, and the index too unless one
    /// is given.
    pub fn from_config(
        kb: KnowledgeBase,
        index: Option<InvertedIndex>,
        config: PipelineConfig,
        api_key: Option<String>,
    ) -> Result<Self, SetupError> {
        config.validate()?;
        let index = match index {
            Some(i) => i,
            None => build_index(&corpus_docs(&kb.corpus), &config.retrieval.bm25())?,
        };
        let llm = config.build_llm(api_key)?;
        let embedder = config.build_embedder()?;
        Ok(Self::new(Arc::new(kb), Arc::new(index), llm, embedder, config)?)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn llm(&self) -> &dyn LlmBackend {
        self.llm.as_ref()
    }

    /// The same engine with different stage switches.
    pub fn with_ablation(&self, flags: AblationFlags) -> Self {
        let mut e = self.clone();
        e.config.ablation = flags;
        e
    }

    /// Runs one case through every enabled stage.
    pub fn run_case(&self, case: &CaseRecord) -> Result<JudgmentReport, CaseFailure> {
        let flags = self.config.ablation;
        let mut case = case.clone();
        if !flags.use_video_caption {
            case.video_description.clear();
        }
        let case_input = json!({
            "case_id": case.case_id,
            "accident_text": case.accident_text,
            "video_description": case.video_description,
        });
        let mut run = Run {
            engine: self,
            trace: TraceLog::new(&case_input, self.config.snapshot(), &self.config.fingerprint()),
        };
        match self.run_stages(&case, case_input, &mut run) {
            Ok(mut report) => {
                report.trace = run.trace;
                report.judgment.trace_refs = report.trace.completed_refs();
                report.text = render_report(&report.judgment, &report.trace, &self.kb);
                Ok(report)
            }
            Err((stage, error)) => Err(CaseFailure {
                case_id: case.case_id.clone(),
                stage,
                error,
                trace: Box::new(run.trace),
            }),
        }
    }

    fn run_stages(
        &self,
        case: &CaseRecord,
        case_input: Value,
        run: &mut Run<'_>,
    ) -> Result<JudgmentReport, (StageName, StageError)> {
        let flags = self.config.ablation;
        let settings = &self.config.runner.agents;
        let llm = self.llm.as_ref();
        let kb = self.kb.as_ref();

        if let Err(msg) = case.validate() {
            let err = StageError::InvalidCase(msg);
            run.trace.record(
                StageName::FactAggregation,
                StageStatus::Failed,
                &case_input,
                json!({"error": err.to_string()}),
                0.0,
            );
            return Err((StageName::FactAggregation, err));
        }

        let fact = if flags.use_fact_aggregation {
            run.stage(StageName::FactAggregation, case_input, || {
                Ok(aggregate_facts(case, llm, settings)?)
            })?
        } else {
            let raw = raw_concatenation(&case.accident_text, &case.video_description);
            run.skip(
                StageName::FactAggregation,
                case_input,
                FactStatement::from_raw(&case.case_id, &raw),
            )
        };

        let fact_input = serde_json::to_value(&fact).expect("fact serializes");
        let summary = if flags.use_assistant {
            let params = self.config.retrieval.bm25();
            let excerpt = self.config.retrieval.excerpt_chars;
            run.stage(StageName::Retrieval, fact_input.clone(), || {
                Ok(retrieve_for_fact(kb, &self.index, &fact, self.embedder.as_ref(), &params, excerpt)?)
            })?
        } else {
            run.skip(StageName::Retrieval, fact_input.clone(), LegalSummary::empty(&case.case_id))
        };

        let assist_input = json!({"fact": fact_input, "summary": summary});
        let digest = if flags.use_assistant {
            run.stage(StageName::JudgeAssistant, assist_input, || {
                Ok(assist(&fact, &summary, kb, llm, settings)?)
            })?
        } else {
            let empty = assist(&fact, &summary, kb, llm, settings).expect("empty summary needs no backend");
            run.skip(StageName::JudgeAssistant, assist_input, empty)
        };

        let single = !flags.use_multi_judge;
        let issue_input = json!({"fact": fact, "digest": single.then_some(&digest)});
        let prelim: PreliminaryJudgment = run.stage(StageName::IssueJudge, issue_input, || {
            Ok(issue_judge(&fact, kb, single.then_some(digest.as_str()), llm, settings)?)
        })?;

        let review_input = json!({"fact": fact, "preliminary": prelim, "digest": digest, "summary": summary});
        let judgment = if flags.use_multi_judge {
            let revisions: RevisionSuggestions = run.stage(StageName::LawPrecedentJudge, review_input, || {
                Ok(law_precedent_judge(&fact, &prelim, &digest, &summary, kb, llm, settings)?)
            })?;
            let deliberation_input = json!({"fact": fact, "preliminary": prelim, "revisions": revisions});
            run.stage(StageName::DeliberationJudge, deliberation_input, || {
                Ok(deliberation_judge(&fact, &prelim, &revisions, kb, llm, settings)?)
            })?
        } else {
            run.skip(StageName::LawPrecedentJudge, review_input, Value::Null);
            let passthrough = single_judge_final(&fact, &prelim, kb);
            let deliberation_input = json!({"fact": fact, "preliminary": prelim});
            run.skip(StageName::DeliberationJudge, deliberation_input, passthrough)
        };

        Ok(JudgmentReport {
            judgment,
            fact,
            summary,
            text: String::new(),
            trace: TraceLog::new(&Value::Null, Value::Null, &Value::Null),
        })
    }

    /// Picks the accident-reason option best supported by the report.
    pub fn run_ara(&self, case: &CaseRecord, report: &JudgmentReport) -> Result<usize, AraError> {
        let options = match case.ara_options.as_deref() {
            Some(o) if !o.is_empty() => o,
            _ => return Err(AraError::NoOptions(case.case_id.clone())),
        };
        if options.len() == 1 {
            return Ok(0);
        }
        let input = json!({
            "case_id": case.case_id,
            "report": report.text,
            "options": options,
        });
        let n = options.len();
        let selection: AraSelection = ask(
            self.llm.as_ref(),
            &self.config.runner.agents,
            AgentRole::AraSelector,
            &input,
            |s: &AraSelection| {
                if s.selected_index < n {
                    Ok(())
                } else {
                    Err(format!("selected_index {} is out of range for {n} options", s.selected_index))
                }
            },
        )?;
        Ok(selection.selected_index)
    }

    /// Writes `traces/<case_id>.json` and `reports/<case_id>.txt` under the
    /// configured directories. Returns the paths written.
    pub fn persist(&self, outcome: &Result<JudgmentReport, CaseFailure>) -> std::io::Result<Vec<PathBuf>> {
        let (case_id, trace, text) = match outcome {
            Ok(r) => (&r.judgment.case_id, &r.trace, Some(&r.text)),
            Err(f) => (&f.case_id, f.trace.as_ref(), None),
        };
        let mut written = Vec::new();
        if let Some(dir) = &self.config.runner.trace_dir {
            written.push(write_artifact(dir, case_id, "json", &trace.to_json())?);
        }
        if let (Some(dir), Some(text)) = (&self.config.runner.report_dir, text) {
            written.push(write_artifact(dir, case_id, "txt", text)?);
        }
        Ok(written)
    }
}

/// Case ids become file names; anything outside `[A-Za-z0-9._-]` is
/// replaced by `_`.
pub fn artifact_file_name(case_id: &str, extension: &str) -> String {
    let stem: String = case_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    let stem = if stem.is_empty() || stem.chars().all(|c| c == '.') {
        "_".to_string()
    } else {
        stem
    };
    format!("{stem}.{extension}")
}

fn write_artifact(dir: &Path, case_id: &str, extension: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(artifact_file_name(case_id, extension));
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{HashEmbedder, MockLlm, MockScript};

    fn engine(script: MockScript, flags: AblationFlags) -> (Engine, Arc<MockLlm>) {
        let kb = Arc::new(KnowledgeBase::builtin());
        let mut config = PipelineConfig {
            ablation: flags,
            ..PipelineConfig::default()
        };
        config.runner.record_timings = false;
        let index = Arc::new(build_index(&corpus_docs(&kb.corpus), &config.retrieval.bm25()).unwrap());
        let llm = Arc::new(MockLlm::new(script));
        let e = Engine::new(kb, index, llm.clone(), Arc::new(HashEmbedder::default()), config).unwrap();
        (e, llm)
    }

    fn case() -> CaseRecord {
        CaseRecord::new("c1", "The ego car rear-ended a stopped truck at the traffic light.")
            .with_video("Dashcam shows rain and a wet road.")
    }

    #[test]
    fn default_templates_run_end_to_end() {
        let (e, llm) = engine(MockScript::default(), AblationFlags::ALL_ON);
        let r = e.run_case(&case()).unwrap();
        assert_eq!(
            r.trace.stages.iter().map(|s| s.stage).collect::<Vec<_>>(),
            StageName::ALL.to_vec()
        );
        assert!(r.trace.stages.iter().all(|s| s.status == StageStatus::Completed));
        assert!(r.judgment.trace_refs.iter().all(|t| r.trace.resolves(t)));
        assert!(r.judgment.final_statute_ids.iter().all(|id| e.kb().corpus.statute(id).is_some()));
        assert_eq!(llm.calls(), 5);
        for title in REPORT_SECTIONS {
            assert!(r.text.contains(&section_header(title)));
        }
    }

    #[test]
    fn all_off_uses_concatenation_and_one_call() {
        let (e, llm) = engine(MockScript::default(), AblationFlags::ALL_OFF);
        let r = e.run_case(&case()).unwrap();
        assert_eq!(r.fact.narrative, case().accident_text);
        assert!(r.summary.is_empty());
        assert_eq!(llm.roles_called(), vec![AgentRole::IssueJudge]);
        let skipped: Vec<StageName> = r
            .trace
            .stages
            .iter()
            .filter(|s| s.status == StageStatus::Skipped)
            .map(|s| s.stage)
            .collect();
        assert_eq!(skipped.len(), 5);
        assert!(r.trace.is_ordered());
    }

    #[test]
    fn failure_carries_trace() {
        let script = MockScript::default().with_entry(AgentRole::IssueJudge, "c1", "not json");
        let (e, _) = engine(script, AblationFlags::ALL_ON);
        let f = e.run_case(&case()).unwrap_err();
        assert_eq!(f.stage, StageName::IssueJudge);
        assert_eq!(f.trace.stages.last().unwrap().status, StageStatus::Failed);
        assert!(f.error.is_backend());
    }

    #[test]
    fn ara_single_option_needs_no_call() {
        let (e, llm) = engine(MockScript::default(), AblationFlags::ALL_OFF);
        let mut c = case();
        let r = e.run_case(&c).unwrap();
        let before = llm.calls();
        c.ara_options = Some(vec!["only".into()]);
        assert_eq!(e.run_ara(&c, &r).unwrap(), 0);
        assert_eq!(llm.calls(), before);
        c.ara_options = Some(Vec::new());
        assert!(matches!(e.run_ara(&c, &r), Err(AraError::NoOptions(_))));
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(artifact_file_name("case-1", "json"), "case-1.json");
        assert_eq!(artifact_file_name("../x y", "txt"), ".._x_y.txt");
        assert_eq!(artifact_file_name("..", "txt"), "_.txt");
    }
}
