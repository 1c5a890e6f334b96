//! Planner/Programmer generation loop.

pub mod backend;
pub mod http;
pub mod prompt;
pub mod scripted;
pub mod tools;
pub mod transcript;

use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use gridrc_core::dsl::{parse_program, RuleProgram};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use self::backend::{complete_with_retry, AgentRole, ChatBackend, ChatRequest, Message};
use self::prompt::{build_initial_prompt, Prompt};
use self::tools::{parse_tool_call, ToolCall, CALL_SYNTAX, DRC_CODE_EVAL};
use self::transcript::Transcript;
use crate::dataset_dir::Dataset;
use crate::error::{Error, Result};
use crate::io;
use crate::parallel::{eval_config, evaluate_parallel, pool};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MultiAgentVision,
    MultiAgentNovision,
    SingleAgentVision,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::MultiAgentVision, Mode::MultiAgentNovision, Mode::SingleAgentVision];

    pub fn name(self) -> &'static str {
        match self {
            Mode::MultiAgentVision => "multi_agent_vision",
            Mode::MultiAgentNovision => "multi_agent_novision",
            Mode::SingleAgentVision => "single_agent_vision",
        }
    }

    fn vision(self) -> bool {
        self != Mode::MultiAgentNovision
    }

    fn has_planner(self) -> bool {
        self != Mode::SingleAgentVision
    }

    fn tools_enabled(self) -> bool {
        self == Mode::MultiAgentVision
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            format!("unknown mode `{s}`; expected one of {}", Mode::ALL.map(Mode::name).join(", "))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    TerminatedSuccess,
    TerminatedBudget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conversation {
    pub rule_id: String,
    pub transcript: Transcript,
    pub iteration: u32,
    pub status: Status,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub max_iterations: u32,
    pub seed: u64,
    /// F1 at which the run stops.
    pub f1_threshold: f64,
    /// Tool calls the Planner may make in one turn.
    pub max_tool_calls: usize,
    pub backoff: Duration,
    pub logical_clock: bool,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::MultiAgentVision,
            max_iterations: 10,
            seed: 0,
            f1_threshold: 1.0,
            max_tool_calls: 4,
            backoff: Duration::ZERO,
            logical_clock: true,
            jobs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestProgram {
    pub iteration: u32,
    pub source: String,
    pub program: RuleProgram,
    pub f1: f64,
    pub sha256: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub conversation: Conversation,
    pub best: Option<BestProgram>,
    /// Best F1 so far after each iteration; 0 until a program parses.
    pub best_f1_by_iteration: Vec<f64>,
    pub prompt: String,
}

impl RunOutcome {
    pub fn best_f1(&self) -> f64 {
        self.best.as_ref().map_or(0.0, |b| b.f1)
    }

    /// `rule, f1, iterations, wall_seconds`.
    pub fn summary_line(&self, wall_seconds: f64) -> String {
        format!("{}, {:.3}, {}, {wall_seconds:.3}", self.conversation.rule_id, self.best_f1(), self.conversation.iteration)
    }
}

/// A run stopped by a backend failure, with everything logged up to it.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub outcome: RunOutcome,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Body of the single fenced `drcdsl` block in a reply.
pub fn extract_program(reply: &str) -> std::result::Result<String, String> {
    let mut blocks = Vec::new();
    let mut lines = reply.lines();
    while let Some(line) = lines.next() {
        let Some(tag) = line.trim_start().strip_prefix("```") else { continue };
        let mut body = Vec::new();
        let mut closed = false;
        for l in lines.by_ref() {
            if l.trim_start().starts_with("```") {
                closed = true;
                break;
            }
            body.push(l);
        }
        if tag.trim() == "drcdsl" {
            if !closed {
                return Err("the ```drcdsl block is not closed".into());
            }
            blocks.push(body.join("\n"));
        }
    }
    match blocks.len() {
        1 => Ok(blocks.pop().unwrap()),
        n => Err(format!("expected exactly one ```drcdsl block, found {n}")),
    }
}

const PLANNER_ROLE: &str = "\
You are the Planner. Interpret the design rule and turn it into precise grid-domain conditions for
the Programmer. After each evaluation, reason about the reported false negatives and false
positives and revise the conditions. When the evaluation shows the target F1, reply TERMINATE.";

const PROGRAMMER_ROLE: &str = "\
You are the Programmer. Translate grid-domain conditions into a checker program and debug it with
the evaluation reports. Reply with exactly one ```drcdsl fenced block holding the full program.";

struct Loop<'a> {
    ds: &'a Dataset,
    rule_id: &'a str,
    backend: &'a dyn ChatBackend,
    cfg: &'a RunConfig,
    vision: bool,
    turns: std::collections::BTreeMap<AgentRole, usize>,
    transcript: Transcript,
}

impl Loop<'_> {
    fn ask(&mut self, agent: AgentRole, messages: &[Message]) -> Result<String> {
        let turn = self.next_turn(agent);
        let req = ChatRequest { agent, turn, messages: messages.to_vec() };
        complete_with_retry(self.backend, &req, self.cfg.backoff)
    }

    fn next_turn(&mut self, agent: AgentRole) -> usize {
        let t = self.turns.entry(agent).or_insert(0);
        *t += 1;
        *t - 1
    }

    /// Runs a tool; dataset-level errors become the answer so the Planner can recover.
    fn run_tool(&mut self, iteration: u32, call: &ToolCall) -> Result<String> {
        let (agent, cells) = match call {
            ToolCall::FoundryRuleAnalysis { .. } => (AgentRole::FoundryRuleAnalysis, Vec::new()),
            ToolCall::LayoutDrvAnalysis { cells, .. } => (AgentRole::LayoutDrvAnalysis, cells.clone()),
        };
        let request = match call {
            ToolCall::FoundryRuleAnalysis { question } => tools::foundry_request(self.ds, self.rule_id, question, self.vision, 0),
            ToolCall::LayoutDrvAnalysis { cells, question } => {
                tools::layout_request(self.ds, self.rule_id, cells, question, self.vision, 0)
            }
        };
        let (text, meta) = match request {
            Ok(mut req) => {
                req.turn = self.next_turn(agent);
                let images: Vec<&str> = req.messages.iter().flat_map(|m| &m.images).map(|i| i.name.as_str()).collect();
                let meta = json!({"cells": cells, "images": images});
                let answer = complete_with_retry(self.backend, &req, self.cfg.backoff)?;
                let text = if cells.is_empty() { answer } else { format!("cells: {}\n{answer}", cells.join(", ")) };
                (text, meta)
            }
            Err(e @ Error::Data(_)) | Err(e @ Error::Io { .. }) => {
                (format!("error: {e}"), json!({"cells": cells, "error": e.to_string()}))
            }
            Err(e) => return Err(e),
        };
        self.transcript.push(iteration, format!("tool:{}", call.name()), text.clone(), meta);
        Ok(text)
    }
}

/// Runs the generation loop for one rule.
pub fn run_generation(
    ds: &Dataset,
    rule_id: &str,
    backend: &dyn ChatBackend,
    cfg: &RunConfig,
) -> std::result::Result<RunOutcome, Box<Aborted>> {
    let vision = cfg.mode.vision() && backend.capabilities().vision;
    let early = |error: Error| {
        Box::new(Aborted {
            error,
            outcome: RunOutcome {
                conversation: Conversation {
                    rule_id: rule_id.into(),
                    transcript: Transcript::new(cfg.logical_clock),
                    iteration: 0,
                    status: Status::Running,
                },
                best: None,
                best_f1_by_iteration: Vec::new(),
                prompt: String::new(),
            },
        })
    };
    if cfg.max_iterations == 0 {
        return Err(early(Error::Usage("--max-iter must be at least 1".into())));
    }
    let spec = ds.rule(rule_id).map_err(early)?.clone();
    let Prompt { text: prompt, images, .. } = build_initial_prompt(ds, rule_id, cfg.seed, vision).map_err(early)?;
    let workers = pool(cfg.jobs).map_err(early)?;
    let eval_cfg = eval_config(&spec);
    let cases = ds.cases(rule_id);

    let mut lp = Loop {
        ds,
        rule_id,
        backend,
        cfg,
        vision,
        turns: Default::default(),
        transcript: Transcript::new(cfg.logical_clock),
    };
    let mut planner_msgs = Vec::new();
    let mut programmer_msgs = Vec::new();
    if cfg.mode.has_planner() {
        let tools_note = if cfg.mode.tools_enabled() { CALL_SYNTAX } else { "Tools are disabled in this run." };
        planner_msgs.push(Message::system(format!("{PLANNER_ROLE}\n\n{tools_note}\n\n{prompt}")).with_images(images.clone()));
        programmer_msgs.push(Message::system(format!("{PROGRAMMER_ROLE}\n\n{prompt}")));
    } else {
        programmer_msgs.push(Message::system(format!("{PROGRAMMER_ROLE}\n\n{prompt}")).with_images(images));
    }

    let mut status = Status::Running;
    let mut iteration = 0;
    let mut best: Option<BestProgram> = None;
    let mut best_f1_by_iteration = Vec::new();
    let mut planner_input = "Analyze the design rule and state the grid-domain conditions the checker must implement.".to_string();
    let mut feedback: Option<String> = None;
    let mut skip_planner = false;

    let result: Result<()> = (|| {
        for it in 1..=cfg.max_iterations {
            iteration = it;
            let mut conditions = None;
            if cfg.mode.has_planner() && !skip_planner {
                planner_msgs.push(Message::user(planner_input.clone()));
                let mut calls = 0;
                loop {
                    let reply = lp.ask(AgentRole::Planner, &planner_msgs)?;
                    lp.transcript.push(it, "planner", reply.clone(), json!({}));
                    planner_msgs.push(Message::assistant(reply.clone()));
                    let call = match parse_tool_call(&reply) {
                        Ok(Some(call)) if calls < cfg.max_tool_calls => call,
                        Ok(_) => {
                            conditions = Some(reply);
                            break;
                        }
                        Err(msg) => {
                            calls += 1;
                            let text = format!("error: {msg}");
                            lp.transcript.push(it, "tool:invalid_call", text.clone(), json!({}));
                            planner_msgs.push(Message::user(format!("{text}\n{CALL_SYNTAX}")));
                            if calls >= cfg.max_tool_calls {
                                conditions = Some(reply);
                                break;
                            }
                            continue;
                        }
                    };
                    calls += 1;
                    let answer = if cfg.mode.tools_enabled() {
                        lp.run_tool(it, &call)?
                    } else {
                        let text = format!("error: {} is disabled in this mode", call.name());
                        lp.transcript.push(it, format!("tool:{}", call.name()), text.clone(), json!({"disabled": true}));
                        text
                    };
                    planner_msgs.push(Message::user(format!("{} answer:\n{answer}", call.name())));
                }
            }

            let mut input = String::new();
            if let Some(f) = feedback.take() {
                input.push_str(&f);
                input.push_str("\n\n");
            }
            match conditions {
                Some(c) => input.push_str(&format!("Planner conditions:\n{c}\n\nWrite the checker program.")),
                None if it == 1 => input.push_str("Write the checker program."),
                None => input.push_str("Fix the program."),
            }
            programmer_msgs.push(Message::user(input));
            let reply = lp.ask(AgentRole::Programmer, &programmer_msgs)?;
            programmer_msgs.push(Message::assistant(reply.clone()));
            let source = extract_program(&reply);
            let hash = source.as_ref().ok().map(|s| sha256_hex(s));
            lp.transcript.push(it, "programmer", reply, json!({"program_sha256": hash}));

            let program = match source {
                Err(msg) => Err(("format", format!("format error: {msg}"))),
                Ok(src) => parse_program(&src).map(|p| (src, p)).map_err(|d| ("parse", format!("compile error: {d}"))),
            };
            let tool = format!("tool:{DRC_CODE_EVAL}");
            let (source, program) = match program {
                Ok(ok) => ok,
                Err((kind, text)) => {
                    lp.transcript.push(it, tool, text.clone(), json!({"program_sha256": hash, "error": kind}));
                    best_f1_by_iteration.push(best.as_ref().map_or(0.0, |b| b.f1));
                    feedback = Some(text);
                    skip_planner = true;
                    continue;
                }
            };
            let report = evaluate_parallel(&workers, &program, rule_id, &cases, &eval_cfg);
            let text = gridrc_core::eval::render_report(&report);
            lp.transcript.push(
                it,
                tool,
                text.clone(),
                json!({
                    "program_sha256": hash,
                    "precision": report.precision,
                    "recall": report.recall,
                    "f1": report.f1,
                    "tuple_f1": report.tuple_score.as_f64().2,
                }),
            );
            if best.as_ref().is_none_or(|b| report.f1 >= b.f1) {
                best = Some(BestProgram {
                    iteration: it,
                    source,
                    program,
                    f1: report.f1,
                    sha256: hash.clone().unwrap_or_default(),
                });
            }
            best_f1_by_iteration.push(best.as_ref().map_or(0.0, |b| b.f1));

            if report.f1 >= cfg.f1_threshold {
                if cfg.mode.has_planner() {
                    planner_msgs.push(Message::user(format!(
                        "{text}\nThe program reaches the target F1. Reply TERMINATE to finish."
                    )));
                    let reply = lp.ask(AgentRole::Planner, &planner_msgs)?;
                    lp.transcript.push(it, "planner", reply.clone(), json!({"confirm": reply.contains("TERMINATE")}));
                    planner_msgs.push(Message::assistant(reply));
                }
                status = Status::TerminatedSuccess;
                return Ok(());
            }
            planner_input = format!("{text}\nRevise the grid-domain conditions to remove these mismatches.");
            feedback = Some(text);
            skip_planner = false;
        }
        status = Status::TerminatedBudget;
        Ok(())
    })();

    let outcome = RunOutcome {
        conversation: Conversation { rule_id: rule_id.into(), transcript: lp.transcript, iteration, status },
        best,
        best_f1_by_iteration,
        prompt,
    };
    match result {
        Ok(()) => Ok(outcome),
        Err(error) => Err(Box::new(Aborted { error, outcome })),
    }
}

/// `summary.json`: everything but wall time, so scripted runs are reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rule: String,
    pub mode: Mode,
    pub seed: u64,
    pub status: Status,
    pub iterations: u32,
    pub max_iterations: u32,
    pub best_f1: f64,
    pub best_iteration: Option<u32>,
    pub best_program_sha256: Option<String>,
    pub best_f1_by_iteration: Vec<f64>,
    pub error: Option<String>,
}

/// Writes `transcript.jsonl`, `prompt.txt`, `summary.json` and, when a program parsed, `best.drcdsl`.
pub fn write_outputs(dir: &Path, outcome: &RunOutcome, cfg: &RunConfig, error: Option<&Error>) -> Result<RunSummary> {
    let summary = RunSummary {
        rule: outcome.conversation.rule_id.clone(),
        mode: cfg.mode,
        seed: cfg.seed,
        status: outcome.conversation.status,
        iterations: outcome.conversation.iteration,
        max_iterations: cfg.max_iterations,
        best_f1: outcome.best_f1(),
        best_iteration: outcome.best.as_ref().map(|b| b.iteration),
        best_program_sha256: outcome.best.as_ref().map(|b| b.sha256.clone()),
        best_f1_by_iteration: outcome.best_f1_by_iteration.clone(),
        error: error.map(|e| e.to_string()),
    };
    io::write_text(&dir.join("transcript.jsonl"), &outcome.conversation.transcript.to_jsonl())?;
    io::write_text(&dir.join("prompt.txt"), &outcome.prompt)?;
    if let Some(b) = &outcome.best {
        let mut src = b.source.clone();
        if !src.ends_with('\n') {
            src.push('\n');
        }
        io::write_text(&dir.join("best.drcdsl"), &src)?;
    }
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
