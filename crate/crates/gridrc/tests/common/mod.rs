//! Shared fixtures: a generated dataset on disk and instrumented backends.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use gridrc::agent::backend::{BackendError, Capabilities, ChatBackend, ChatRequest};
use gridrc::agent::scripted::{Script, ScriptedBackend};
use gridrc::dataset_dir::{load_dataset, write_dataset, Dataset};
use gridrc_core::dataset::GenParams;
use gridrc_core::rules::builtin_demo_techfile;

pub const SEED: u64 = 1;
pub const COUNT: usize = 207;

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub dataset: Dataset,
}

/// The 207-layout demo dataset, written once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        write_dataset(&root, SEED, COUNT, &GenParams::default(), &builtin_demo_techfile()).unwrap();
        let dataset = load_dataset(&root).unwrap();
        Fixture { _dir: dir, root, dataset }
    })
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn reference_source(rule: &str) -> String {
    gridrc_core::dsl::reference_program(rule).unwrap().to_string()
}

pub fn two_iteration_script() -> ScriptedBackend {
    let text = std::fs::read_to_string(fixtures_dir().join("m0s1_two_iter.script.json")).unwrap();
    ScriptedBackend::new(serde_json::from_str::<Script>(&text).unwrap())
}

pub fn fenced(src: &str) -> String {
    format!("```drcdsl\n{src}\n```")
}

/// Records every request before delegating.
pub struct Recording<B> {
    pub inner: B,
    pub requests: Mutex<Vec<ChatRequest>>,
}

impl<B: ChatBackend> Recording<B> {
    pub fn new(inner: B) -> Self {
        Recording { inner, requests: Mutex::new(Vec::new()) }
    }

    pub fn take(&self) -> Vec<ChatRequest> {
        std::mem::take(&mut self.requests.lock().unwrap())
    }
}

impl<B: ChatBackend> ChatBackend for Recording<B> {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.requests.lock().unwrap().push(request.clone());
        self.inner.complete(request)
    }
}

/// Fails with a transient error a fixed number of times, then answers.
pub struct Flaky {
    pub failures_left: Mutex<u32>,
    pub calls: Mutex<u32>,
    pub answer: String,
}

impl Flaky {
    pub fn new(failures: u32, answer: &str) -> Self {
        Flaky { failures_left: Mutex::new(failures), calls: Mutex::new(0), answer: answer.into() }
    }
}

impl ChatBackend for Flaky {
    fn capabilities(&self) -> Capabilities {
        Capabilities { vision: false }
    }

    fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
        *self.calls.lock().unwrap() += 1;
        let mut left = self.failures_left.lock().unwrap();
        if *left > 0 {
            *left -= 1;
            return Err(BackendError::Transient("connection reset".into()));
        }
        Ok(self.answer.clone())
    }
}
