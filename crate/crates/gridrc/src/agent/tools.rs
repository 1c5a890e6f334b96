//! The Planner's analysis tools and their call syntax.

use std::time::Duration;

use gridrc_core::render::render_ascii;

use super::backend::{complete_with_retry, AgentRole, ChatBackend, ChatRequest, Message};
use super::prompt::{describe_cell, rule_section, svg_image};
use crate::dataset_dir::Dataset;
use crate::error::{Error, Result};

pub const FOUNDRY_RULE_ANALYSIS: &str = "FoundryRuleAnalysis";
pub const LAYOUT_DRV_ANALYSIS: &str = "LayoutDRVAnalysis";
pub const DRC_CODE_EVAL: &str = "DRCCodeEval";

pub const CALL_SYNTAX: &str = "\
Tools: start a line with one of
  CALL FoundryRuleAnalysis: <question>
  CALL LayoutDRVAnalysis [<cell>, <cell>, ...]: <question>
FoundryRuleAnalysis reads the rule description and figure. LayoutDRVAnalysis inspects the named
layouts together with their golden DRVs. Only the first call in a reply is run; its answer comes
back in the next message. Reply without a call to hand your grid-domain conditions to the Programmer.";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ToolCall {
    FoundryRuleAnalysis { question: String },
    LayoutDrvAnalysis { cells: Vec<String>, question: String },
}

impl ToolCall {
    pub fn name(&self) -> &'static str {
        match self {
            ToolCall::FoundryRuleAnalysis { .. } => FOUNDRY_RULE_ANALYSIS,
            ToolCall::LayoutDrvAnalysis { .. } => LAYOUT_DRV_ANALYSIS,
        }
    }
}

/// Finds the first `CALL` line. The question runs to the end of the reply.
/// `Err` describes a malformed call.
pub fn parse_tool_call(reply: &str) -> std::result::Result<Option<ToolCall>, String> {
    let Some(start) = reply.lines().position(|l| l.trim_start().starts_with("CALL ")) else {
        return Ok(None);
    };
    let mut rest: Vec<&str> = reply.lines().skip(start).collect();
    let first = rest[0].trim_start().trim_start_matches("CALL ").trim_start();
    let (head, q) = first.split_once(':').ok_or_else(|| format!("missing `:` after the tool name in `{}`", rest[0].trim()))?;
    rest[0] = q;
    let question = rest.join("\n").trim().to_string();
    let head = head.trim();
    if head == FOUNDRY_RULE_ANALYSIS {
        return Ok(Some(ToolCall::FoundryRuleAnalysis { question }));
    }
    if let Some(list) = head.strip_prefix(LAYOUT_DRV_ANALYSIS) {
        let list = list.trim();
        let inner = list
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .ok_or_else(|| format!("{LAYOUT_DRV_ANALYSIS} needs a bracketed cell list, got `{list}`"))?;
        let cells: Vec<String> =
            inner.split(',').map(|c| c.trim().trim_matches('"').to_string()).filter(|c| !c.is_empty()).collect();
        if cells.is_empty() {
            return Err(format!("{LAYOUT_DRV_ANALYSIS} needs at least one cell name"));
        }
        return Ok(Some(ToolCall::LayoutDrvAnalysis { cells, question }));
    }
    Err(format!("unknown tool `{head}`; available: {FOUNDRY_RULE_ANALYSIS}, {LAYOUT_DRV_ANALYSIS}"))
}

pub fn foundry_request(ds: &Dataset, rule_id: &str, question: &str, vision: bool, turn: usize) -> Result<ChatRequest> {
    let (rule_text, images) = rule_section(ds, rule_id, vision)?;
    let messages = vec![
        Message::system(
            "You are FoundryRuleAnalysis. Interpret the foundry design rule description (text and figure) and \
             answer the question precisely.",
        ),
        Message::user(format!("Question: {question}\n\n{rule_text}")).with_images(images),
    ];
    Ok(ChatRequest { agent: AgentRole::FoundryRuleAnalysis, turn, messages })
}

pub fn layout_request(
    ds: &Dataset,
    rule_id: &str,
    cells: &[String],
    question: &str,
    vision: bool,
    turn: usize,
) -> Result<ChatRequest> {
    let mut text = format!("Question: {question}\n");
    let mut images = Vec::new();
    for cell in cells {
        let (layout, labels) = ds.layout(cell).ok_or_else(|| Error::data(format!("unknown cell `{cell}`")))?;
        let golden = &labels[rule_id];
        text.push('\n');
        if vision {
            text.push_str(&format!("Layout {cell}: see attached image {cell}.svg (crosses mark golden DRV grids).\n"));
            images.push(svg_image(layout, golden));
        } else {
            text.push_str(&render_ascii(layout, Some(golden)));
        }
        text.push_str(&describe_cell(layout, rule_id, golden));
    }
    let messages = vec![
        Message::system(format!(
            "You are LayoutDRVAnalysis. Examine the layouts and their golden {rule_id} DRVs and explain which \
             geometric conditions produce them."
        )),
        Message::user(text).with_images(images),
    ];
    Ok(ChatRequest { agent: AgentRole::LayoutDrvAnalysis, turn, messages })
}

pub fn tool_foundry_rule_analysis(
    backend: &dyn ChatBackend,
    ds: &Dataset,
    rule_id: &str,
    question: &str,
    turn: usize,
    backoff: Duration,
) -> Result<String> {
    let req = foundry_request(ds, rule_id, question, backend.capabilities().vision, turn)?;
    complete_with_retry(backend, &req, backoff)
}

pub fn tool_layout_drv_analysis(
    backend: &dyn ChatBackend,
    ds: &Dataset,
    rule_id: &str,
    cells: &[String],
    question: &str,
    turn: usize,
    backoff: Duration,
) -> Result<String> {
    let req = layout_request(ds, rule_id, cells, question, backend.capabilities().vision, turn)?;
    complete_with_retry(backend, &req, backoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_forms() {
        assert_eq!(parse_tool_call("Conditions: ...").unwrap(), None);
        assert_eq!(
            parse_tool_call("Let me check.\nCALL FoundryRuleAnalysis: which direction?\nmore").unwrap(),
            Some(ToolCall::FoundryRuleAnalysis { question: "which direction?\nmore".into() })
        );
        assert_eq!(
            parse_tool_call("CALL LayoutDRVAnalysis [cell_001, \"cell_002\"]: why?").unwrap(),
            Some(ToolCall::LayoutDrvAnalysis { cells: vec!["cell_001".into(), "cell_002".into()], question: "why?".into() })
        );
        assert!(parse_tool_call("CALL DRCCodeEval: run").unwrap_err().contains("unknown tool"));
        assert!(parse_tool_call("CALL LayoutDRVAnalysis: x").is_err());
        assert!(parse_tool_call("CALL LayoutDRVAnalysis []: x").is_err());
        assert!(parse_tool_call("CALL FoundryRuleAnalysis").is_err());
    }
}
