//! Browser bindings. Every export takes plain strings and returns a JSON
//! string, so the page needs no generated TypeScript types.

use gpurace::oracle::{predictable_races, DEFAULT_BUDGET, DEFAULT_LIMIT};
use gpurace::trace::{parse_trace, write_trace, Trace};
use gpurace::workloads::{litmus, CORPUS};
use gpurace::{compression_stats, detect, prepare_trace, DetectorKind, Options, RaceReport};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Serialize)]
struct Analysis {
    events: usize,
    inferred_locks: bool,
    warnings: Vec<String>,
    gwcp: Vec<RaceReport>,
    hb: Vec<RaceReport>,
    lockset: Vec<RaceReport>,
    /// Predictable pairs, or `None` when the trace is too long to enumerate.
    oracle: Option<Vec<(usize, usize)>>,
    oracle_complete: bool,
}

fn error(messages: Vec<String>) -> String {
    json!({ "ok": false, "errors": messages }).to_string()
}

fn load(text: &str) -> Result<(Trace, bool, Vec<String>), String> {
    let trace = parse_trace(text).map_err(|e| error(vec![e.to_string()]))?;
    let p = prepare_trace(trace).map_err(|d| error(d.iter().map(ToString::to_string).collect()))?;
    Ok((p.trace, p.inferred, p.warnings.iter().map(ToString::to_string).collect()))
}

/// Runs all three detectors and, for short traces, the oracle.
pub fn analyze_json(text: &str, compress: bool) -> String {
    let (trace, inferred_locks, warnings) = match load(text) {
        Ok(x) => x,
        Err(e) => return e,
    };
    let opts = Options { compress, ..Options::default() };
    let oracle = predictable_races(&trace, DEFAULT_LIMIT, DEFAULT_BUDGET).ok();
    let a = Analysis {
        events: trace.len(),
        inferred_locks,
        warnings,
        gwcp: detect(&trace, DetectorKind::Gwcp, &opts),
        hb: detect(&trace, DetectorKind::Hb, &opts),
        lockset: detect(&trace, DetectorKind::Lockset, &opts),
        oracle_complete: oracle.as_ref().is_none_or(|o| o.complete),
        oracle: oracle.map(|o| o.pairs.into_iter().collect()),
    };
    json!({ "ok": true, "analysis": a }).to_string()
}

/// Compression counters after every event.
pub fn stats_json(text: &str) -> String {
    match load(text) {
        Ok((trace, _, _)) => json!({ "ok": true, "stats": compression_stats(&trace, &Options::default()) }).to_string(),
        Err(e) => e,
    }
}

/// Corpus entries with their expected verdicts.
pub fn corpus_json() -> String {
    json!(CORPUS).to_string()
}

/// Text of one corpus trace, normalized.
pub fn litmus_text(name: &str) -> Option<String> {
    let l = litmus(name)?;
    Some(write_trace(&parse_trace(l.text).ok()?))
}

#[wasm_bindgen]
pub fn analyze(text: &str, compress: bool) -> String {
    analyze_json(text, compress)
}

#[wasm_bindgen]
pub fn stats(text: &str) -> String {
    stats_json(text)
}

#[wasm_bindgen]
pub fn corpus() -> String {
    corpus_json()
}

#[wasm_bindgen]
pub fn litmus_trace(name: &str) -> String {
    litmus_text(name).unwrap_or_default()
}
