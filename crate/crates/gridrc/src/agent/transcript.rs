//! Ordered conversation log, persisted as JSONL.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub seq: u64,
    pub iteration: u32,
    /// `planner`, `programmer` or `tool:<name>`.
    pub speaker: String,
    /// Logical tick (equal to `seq`) for scripted runs, Unix milliseconds otherwise.
    pub timestamp: u64,
    pub text: String,
    pub meta: Value,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    pub entries: Vec<Entry>,
    logical_clock: bool,
}

impl Transcript {
    pub fn new(logical_clock: bool) -> Self {
        Transcript { entries: Vec::new(), logical_clock }
    }

    pub fn push(&mut self, iteration: u32, speaker: impl Into<String>, text: impl Into<String>, meta: Value) {
        let seq = self.entries.len() as u64;
        let timestamp = if self.logical_clock {
            seq
        } else {
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
        };
        self.entries.push(Entry { seq, iteration, speaker: speaker.into(), timestamp, text: text.into(), meta });
    }

    pub fn by_speaker<'a>(&'a self, speaker: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.speaker == speaker)
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?;
        Ok(Transcript { entries, logical_clock: false })
    }
}
