mod common;

use std::collections::BTreeSet;

use common::{fenced, fixture, reference_source, two_iteration_script, Flaky, Recording};
use gridrc::agent::backend::{complete_with_retry, AgentRole, ChatRequest, Message, ATTEMPTS};
use gridrc::agent::prompt::build_initial_prompt;
use gridrc::agent::scripted::ScriptedBackend;
use gridrc::agent::tools::{layout_request, tool_foundry_rule_analysis, tool_layout_drv_analysis};
use gridrc::agent::transcript::Transcript;
use gridrc::agent::{extract_program, run_generation, sha256_hex, write_outputs, Mode, RunConfig, Status};
use gridrc::Category;
use std::time::Duration;

fn cfg(mode: Mode, max_iterations: u32) -> RunConfig {
    RunConfig { mode, max_iterations, seed: 7, jobs: Some(2), ..RunConfig::default() }
}

fn happy_backend(rule: &str) -> ScriptedBackend {
    ScriptedBackend::default()
        .with_replies(AgentRole::Planner, ["Conditions follow the rule text.", "TERMINATE"])
        .with_replies(AgentRole::Programmer, [fenced(&reference_source(rule))])
}

#[test]
fn reference_program_terminates_in_one_iteration() {
    let f = fixture();
    let out = run_generation(&f.dataset, "M0.S.1", &happy_backend("M0.S.1"), &cfg(Mode::MultiAgentVision, 10)).unwrap();
    assert_eq!(out.conversation.status, Status::TerminatedSuccess);
    assert_eq!(out.conversation.iteration, 1);
    assert_eq!(out.best_f1(), 1.0);
    let last = out.conversation.transcript.entries.last().unwrap();
    assert_eq!((last.speaker.as_str(), last.text.as_str()), ("planner", "TERMINATE"));
}

#[test]
fn two_iteration_fixture_repairs_the_threshold() {
    let f = fixture();
    let out = run_generation(&f.dataset, "M0.S.1", &two_iteration_script(), &cfg(Mode::MultiAgentVision, 10)).unwrap();
    assert_eq!(out.conversation.status, Status::TerminatedSuccess);
    assert_eq!(out.conversation.iteration, 2);
    assert_eq!(out.summary_line(0.5), "M0.S.1, 1.000, 2, 0.500");

    let e = &out.conversation.transcript.entries;
    let programs: Vec<usize> = (0..e.len()).filter(|&i| e[i].speaker == "programmer").collect();
    assert_eq!(programs.len(), 2);
    // The intermediate report sits between the two attempts and names the FP signature.
    let between: Vec<_> = e[programs[0]..programs[1]].iter().filter(|x| x.speaker == "tool:DRCCodeEval").collect();
    assert_eq!(between.len(), 1);
    let fp = between[0].text.split("False positives").nth(1).unwrap();
    assert!(fp.contains("spacing violation, dx=2, dy=0"), "{}", between[0].text);
    assert!(out.best_f1_by_iteration[0] < 1.0);
    assert_eq!(out.best.unwrap().iteration, 2);
}

#[test]
fn invalid_programs_exhaust_the_budget() {
    let f = fixture();
    let backend = ScriptedBackend::default()
        .with_replies(AgentRole::Planner, ["Conditions."])
        .with_replies(AgentRole::Programmer, [fenced("rule \"M0.S.1\" on M0 { spacing diagonal <= 1; }")]);
    let out = run_generation(&f.dataset, "M0.S.1", &backend, &cfg(Mode::MultiAgentVision, 4)).unwrap();
    assert_eq!(out.conversation.status, Status::TerminatedBudget);
    assert_eq!(out.conversation.iteration, 4);
    assert!(out.best.is_none());
    let t = &out.conversation.transcript;
    let diags: Vec<_> = t.by_speaker("tool:DRCCodeEval").collect();
    assert_eq!(diags.len(), 4);
    assert!(diags.iter().all(|d| d.text.starts_with("compile error:") && d.text.contains("diagonal")));
    // After the first diagnostic the Planner is skipped.
    assert_eq!(t.by_speaker("planner").count(), 1);
    assert_eq!(t.by_speaker("programmer").count(), 4);
}

#[test]
fn format_errors_are_reported() {
    assert!(extract_program("no code").unwrap_err().contains("found 0"));
    let two = format!("{}\n{}", fenced("a"), fenced("b"));
    assert!(extract_program(&two).unwrap_err().contains("found 2"));
    assert!(extract_program("```drcdsl\nrule").unwrap_err().contains("not closed"));
    assert_eq!(extract_program(&format!("text\n```rust\nx\n```\n{}", fenced("body"))).unwrap(), "body");

    let f = fixture();
    let backend = ScriptedBackend::default()
        .with_replies(AgentRole::Planner, ["Conditions."])
        .with_replies(AgentRole::Programmer, ["Here is the idea, without code."]);
    let out = run_generation(&f.dataset, "M0.S.1", &backend, &cfg(Mode::MultiAgentVision, 2)).unwrap();
    let diag = out.conversation.transcript.by_speaker("tool:DRCCodeEval").next().unwrap();
    assert!(diag.text.starts_with("format error:"));
    assert_eq!(diag.meta["error"], "format");
}

#[test]
fn transcript_replay_is_byte_identical() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let c = cfg(Mode::MultiAgentVision, 10);
        let out = run_generation(&f.dataset, "M0.S.1", &two_iteration_script(), &c).unwrap();
        let d = dir.path().join(run);
        write_outputs(&d, &out, &c, None).unwrap();
        bytes.push(
            ["transcript.jsonl", "summary.json", "best.drcdsl", "prompt.txt"].map(|n| std::fs::read(d.join(n)).unwrap()),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
    let t = Transcript::from_jsonl(std::str::from_utf8(&bytes[0][0]).unwrap()).unwrap();
    assert!(t.entries.iter().enumerate().all(|(i, e)| e.seq == i as u64 && e.timestamp == e.seq));
}

#[test]
fn reports_are_hash_linked_to_their_programs() {
    let f = fixture();
    let out = run_generation(&f.dataset, "M0.S.1", &two_iteration_script(), &cfg(Mode::MultiAgentVision, 10)).unwrap();
    let e = &out.conversation.transcript.entries;
    let mut checked = 0;
    for (i, entry) in e.iter().enumerate() {
        if entry.speaker != "tool:DRCCodeEval" {
            continue;
        }
        let prev = e[..i].iter().rev().find(|x| x.speaker == "programmer").unwrap();
        let src = extract_program(&prev.text).unwrap();
        assert_eq!(entry.meta["program_sha256"], sha256_hex(&src));
        assert_eq!(prev.meta["program_sha256"], entry.meta["program_sha256"]);
        checked += 1;
    }
    assert_eq!(checked, 2);
    assert_eq!(out.best.unwrap().sha256, e[8].meta["program_sha256"].as_str().unwrap());
}

#[test]
fn best_f1_is_monotone_and_ties_go_to_the_latest() {
    let f = fixture();
    let good = reference_source("M0.S.2");
    let worse = good.replace("<= 2", "<= 3");
    let backend = ScriptedBackend::default()
        .with_replies(AgentRole::Planner, ["Conditions."])
        .with_replies(AgentRole::Programmer, [fenced(&worse), fenced("broken"), fenced(&format!("// v2\n{worse}"))]);
    let out = run_generation(&f.dataset, "M0.S.2", &backend, &cfg(Mode::MultiAgentNovision, 4)).unwrap();
    assert_eq!(out.conversation.status, Status::TerminatedBudget);
    let b = &out.best_f1_by_iteration;
    assert_eq!(b.len(), 4);
    assert!(b.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(out.best.unwrap().iteration, 4);
}

#[test]
fn single_agent_mode_has_no_planner() {
    let f = fixture();
    let mut inner = happy_backend("VIA1.S.1").with_replies(AgentRole::Planner, Vec::<String>::new());
    inner.vision = true;
    let b = Recording::new(inner);
    let out = run_generation(&f.dataset, "VIA1.S.1", &b, &cfg(Mode::SingleAgentVision, 3)).unwrap();
    assert_eq!(out.conversation.status, Status::TerminatedSuccess);
    assert_eq!(out.conversation.transcript.by_speaker("planner").count(), 0);
    let reqs = b.take();
    assert!(reqs.iter().all(|r| r.agent == AgentRole::Programmer));
    // The rule figure goes straight to the Programmer.
    assert!(reqs[0].messages[0].images.iter().any(|i| i.name == "rule VIA1.S.1 figure"));
}

#[test]
fn novision_mode_disables_tools() {
    let f = fixture();
    let backend = Recording::new(
        two_iteration_script().with_replies(AgentRole::Planner, ["CALL FoundryRuleAnalysis: direction?", "Conditions.", "TERMINATE"]),
    );
    let out = run_generation(&f.dataset, "M0.S.1", &backend, &cfg(Mode::MultiAgentNovision, 3)).unwrap();
    let tool = out.conversation.transcript.by_speaker("tool:FoundryRuleAnalysis").next().unwrap();
    assert!(tool.text.contains("disabled"));
    let reqs = backend.take();
    assert!(reqs.iter().all(|r| r.agent == AgentRole::Planner || r.agent == AgentRole::Programmer));
    assert!(reqs.iter().flat_map(|r| &r.messages).all(|m| m.images.is_empty()));
}

#[test]
fn planner_tool_calls_are_capped() {
    let f = fixture();
    let backend = happy_backend("M0.S.1").with_replies(AgentRole::Planner, ["CALL FoundryRuleAnalysis: again?"]);
    let backend = backend.with_replies(AgentRole::FoundryRuleAnalysis, ["Same answer."]);
    let out = run_generation(&f.dataset, "M0.S.1", &backend, &cfg(Mode::MultiAgentVision, 1)).unwrap();
    let t = &out.conversation.transcript;
    assert_eq!(t.by_speaker("tool:FoundryRuleAnalysis").count(), 4);
    assert_eq!(t.by_speaker("planner").count(), 6);
}

#[test]
fn foundry_tool_passes_answers_through() {
    let f = fixture();
    let backend = ScriptedBackend::default().with_replies(AgentRole::FoundryRuleAnalysis, ["Spacing is horizontal."]);
    let rec = Recording::new(backend);
    let a = tool_foundry_rule_analysis(&rec, &f.dataset, "M0.S.1", "Which direction?", 0, Duration::ZERO).unwrap();
    assert_eq!(a, "Spacing is horizontal.");
    let req = &rec.take()[0];
    let user = &req.messages[1];
    assert!(user.text.contains("Which direction?"));
    assert!(user.text.contains("[image omitted]"));
    assert!(user.text.contains(&f.dataset.rule_text("M0.S.1").unwrap()));
    assert!(user.images.is_empty());

    let mut vision = ScriptedBackend::default().with_replies(AgentRole::FoundryRuleAnalysis, ["ok"]);
    vision.vision = true;
    let rec = Recording::new(vision);
    tool_foundry_rule_analysis(&rec, &f.dataset, "M0.S.1", "q", 0, Duration::ZERO).unwrap();
    let req = &rec.take()[0];
    assert!(!req.messages[1].text.contains("[image omitted]"));
    assert_eq!(req.messages[1].images.len(), 1);
}

#[test]
fn layout_tool_lists_cells_and_golden_drvs() {
    let f = fixture();
    let cells = vec!["cell_000".to_string(), "cell_001".to_string()];
    let backend = ScriptedBackend::default().with_replies(AgentRole::LayoutDrvAnalysis, ["Looks fine."]);
    let a = tool_layout_drv_analysis(&backend, &f.dataset, "M0.S.1", &cells, "why?", 0, Duration::ZERO).unwrap();
    assert_eq!(a, "Looks fine.");

    let err = tool_layout_drv_analysis(&backend, &f.dataset, "M0.S.1", &["cell_999x".into()], "q", 0, Duration::ZERO)
        .unwrap_err();
    assert!(err.to_string().contains("cell_999x"));

    // The ASCII view marks golden DRV grids with X.
    let (i, golden) = f.dataset.labels.iter().enumerate().find(|(_, l)| !l["M1.S.1"].is_empty()).unwrap();
    let cell = f.dataset.layouts[i].cell_name().to_string();
    let req = layout_request(&f.dataset, "M1.S.1", std::slice::from_ref(&cell), "q", false, 0).unwrap();
    let text = &req.messages[1].text;
    let grid: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("cell ")).skip(1).collect();
    let max_y = f.dataset.layouts[i].max_y();
    let marked: BTreeSet<(u32, u32)> = golden["M1.S.1"].iter().flat_map(|d| d.members().iter().map(|k| (k.x, k.y))).collect();
    for &(x, y) in &marked {
        let row = grid[(max_y - y) as usize];
        let body = row.split_once(' ').unwrap().1.trim_start();
        assert_eq!(body.as_bytes()[x as usize], b'X', "({x}, {y}) in {row}");
    }
    assert!(text.contains(&format!("Golden M1.S.1 DRVs of {cell}:")));
}

#[test]
fn planner_layout_call_logs_both_cells_and_unknown_cells_are_answered() {
    let f = fixture();
    let backend = happy_backend("M0.S.1")
        .with_replies(
            AgentRole::Planner,
            ["CALL LayoutDRVAnalysis [cell_003, cell_nope]: x", "CALL LayoutDRVAnalysis [cell_003, cell_004]: y", "C.", "TERMINATE"],
        )
        .with_replies(AgentRole::LayoutDrvAnalysis, ["seen"]);
    let out = run_generation(&f.dataset, "M0.S.1", &backend, &cfg(Mode::MultiAgentVision, 2)).unwrap();
    let tools: Vec<_> = out.conversation.transcript.by_speaker("tool:LayoutDRVAnalysis").collect();
    assert_eq!(tools.len(), 2);
    assert!(tools[0].text.contains("unknown cell `cell_nope`"));
    assert!(tools[1].text.contains("cell_003") && tools[1].text.contains("cell_004"));
    assert_eq!(out.conversation.status, Status::TerminatedSuccess);
}

#[test]
fn initial_prompt_examples() {
    let f = fixture();
    let p = build_initial_prompt(&f.dataset, "M0.S.1", 7, false).unwrap();
    assert_eq!(p.example_cells.len(), 2);
    assert_ne!(p.example_cells[0], p.example_cells[1]);
    for c in &p.example_cells {
        let (_, labels) = f.dataset.layout(c).unwrap();
        assert!(!labels["M0.S.1"].is_empty());
        assert!(p.text.contains(&format!("Golden M0.S.1 DRVs of {c}:")));
    }
    assert!(p.text.contains("program    = \"rule\""));
    assert!(!p.text.contains("```drcdsl"));
    assert!(!p.text.contains("rule \"M0.S.1\" on"));
    let again = build_initial_prompt(&f.dataset, "M0.S.1", 7, false).unwrap();
    assert_eq!(p.text, again.text);
    let other: Vec<_> = (0..20).map(|s| build_initial_prompt(&f.dataset, "M0.S.1", s, false).unwrap().example_cells).collect();
    assert!(other.iter().any(|c| *c != p.example_cells));
}

#[test]
fn prompt_needs_two_violating_layouts() {
    let f = fixture();
    let mut ds = f.dataset.clone();
    let mut kept = 0;
    for l in &mut ds.labels {
        if !l["M2.S.1"].is_empty() {
            kept += 1;
            if kept > 1 {
                l.get_mut("M2.S.1").unwrap().clear();
            }
        }
    }
    let err = build_initial_prompt(&ds, "M2.S.1", 1, true).err().unwrap();
    assert_eq!(err.category(), Category::Data);
    assert!(err.to_string().contains("has 1"));
    assert_eq!(build_initial_prompt(&ds, "NOPE", 1, true).err().unwrap().category(), Category::Usage);
}

#[test]
fn backend_failures_are_retried_then_surfaced() {
    let req = ChatRequest { agent: AgentRole::Planner, turn: 0, messages: vec![Message::user("hi")] };
    let ok = Flaky::new(ATTEMPTS - 1, "fine");
    assert_eq!(complete_with_retry(&ok, &req, Duration::from_millis(1)).unwrap(), "fine");
    assert_eq!(*ok.calls.lock().unwrap(), ATTEMPTS);

    let bad = Flaky::new(ATTEMPTS, "never");
    let err = complete_with_retry(&bad, &req, Duration::ZERO).unwrap_err();
    assert_eq!(err.category(), Category::Backend);
    assert_eq!(*bad.calls.lock().unwrap(), ATTEMPTS);

    // The loop aborts with what was logged so far.
    let f = fixture();
    let aborted = run_generation(&f.dataset, "M0.S.1", &Flaky::new(100, ""), &cfg(Mode::MultiAgentVision, 3)).unwrap_err();
    assert_eq!(aborted.error.category(), Category::Backend);
    assert_eq!(aborted.outcome.conversation.status, Status::Running);
    assert!(aborted.outcome.conversation.transcript.entries.is_empty());
}

#[test]
fn programs_cannot_reach_the_host() {
    use gridrc_core::dsl::parse_program;
    for src in [
        r#"rule "R" on M0 { include "/etc/passwd"; }"#,
        r#"rule "R" on M0 { open("/tmp/x"); }"#,
        r#"rule "R" on M0 { spacing horizontal <= env; }"#,
        r#"import os"#,
    ] {
        assert!(parse_program(src).is_err(), "{src}");
    }
    let f = fixture();
    let backend = ScriptedBackend::default()
        .with_replies(AgentRole::Planner, ["C."])
        .with_replies(AgentRole::Programmer, [fenced(r#"rule "M0.S.1" on M0 { read "/etc/passwd"; }"#)]);
    let out = run_generation(&f.dataset, "M0.S.1", &backend, &cfg(Mode::MultiAgentVision, 1)).unwrap();
    assert_eq!(out.conversation.status, Status::TerminatedBudget);
    assert!(out.best.is_none());
}

#[test]
fn http_request_body_shape() {
    use gridrc::agent::backend::Image;
    use gridrc::agent::http::request_body;
    let img = Image { name: "f".into(), media_type: "image/png".into(), data: vec![1, 2, 3] };
    let req = ChatRequest {
        agent: AgentRole::Planner,
        turn: 0,
        messages: vec![Message::system("s"), Message::user("u").with_images(vec![img])],
    };
    let v = request_body("m", &req, true, Some(0.0));
    assert_eq!(v["model"], "m");
    assert_eq!(v["messages"][0]["content"], "s");
    assert_eq!(v["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
    let text_only = request_body("m", &req, false, None);
    assert_eq!(text_only["messages"][1]["content"], "u");
    assert!(text_only.get("temperature").is_none());
}
