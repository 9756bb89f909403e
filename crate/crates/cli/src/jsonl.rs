//! JSON-lines files: one encounter or one simulation result per line.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use speedcas_core::encounters::Encounter;
use speedcas_core::simulator::SimResult;

use crate::error::{Error, Result};

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parses JSON lines, accepting LF or CRLF endings and skipping blank
/// lines. Errors carry the 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push((i + 1, item));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_set(text: &str, path: &Path) -> Result<Vec<Encounter>> {
    let rows: Vec<(usize, Encounter)> = parse_jsonl(text, path)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, e) in rows {
        let bad = |detail: String| Error::Parse {
            path: path.to_owned(),
            line,
            detail,
        };
        e.validate().map_err(|err| bad(err.to_string()))?;
        if !seen.insert(e.id) {
            return Err(bad(format!("duplicate encounter id {}", e.id)));
        }
        out.push(e);
    }
    if out.is_empty() {
        return Err(Error::data(path, "no encounters"));
    }
    Ok(out)
}

pub fn load_set(path: &Path) -> Result<Vec<Encounter>> {
    parse_set(&read(path)?, path)
}

pub fn save_set(encounters: &[Encounter], path: &Path) -> Result<()> {
    write(path, &to_jsonl(encounters))
}

pub fn load_results(path: &Path) -> Result<Vec<SimResult>> {
    let rows: Vec<(usize, SimResult)> = parse_jsonl(&read(path)?, path)?;
    if rows.is_empty() {
        return Err(Error::data(path, "no results"));
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn save_results(results: &[SimResult], path: &Path) -> Result<()> {
    write(path, &to_jsonl(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use speedcas_core::encounters::gen_hovering;

    #[test]
    fn round_trip() {
        let set = gen_hovering(100, 3).unwrap();
        let text = to_jsonl(&set);
        assert_eq!(parse_set(&text, Path::new("x")).unwrap(), set);
    }

    #[test]
    fn crlf_matches_lf() {
        let set = gen_hovering(5, 4).unwrap();
        let lf = to_jsonl(&set);
        let crlf = lf.replace('\n', "\r\n");
        assert_eq!(parse_set(&crlf, Path::new("x")).unwrap(), parse_set(&lf, Path::new("x")).unwrap());
    }

    #[test]
    fn missing_weight_is_named() {
        let set = gen_hovering(3, 4).unwrap();
        let mut lines: Vec<String> = to_jsonl(&set).lines().map(String::from).collect();
        let mut v: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        v.as_object_mut().unwrap().remove("weight");
        lines[1] = v.to_string();
        let err = parse_set(&lines.join("\n"), Path::new("set.jsonl")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{msg}");
        assert!(msg.contains("weight"), "{msg}");
    }
}
