//! Line-delimited JSON reading and writing.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Parses one value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("value serializes") + "\n")
        .collect()
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> Result<(), JsonlError> {
    out.write_all(to_jsonl(items).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RallyRef;

    #[test]
    fn round_trip_and_errors() {
        let items = vec![
            RallyRef {
                match_id: "m".into(),
                rally_id: "r1".into(),
            },
            RallyRef {
                match_id: "m".into(),
                rally_id: "r2".into(),
            },
        ];
        let text = to_jsonl(&items) + "\n";
        assert_eq!(read_jsonl::<RallyRef, _>(text.as_bytes()).unwrap(), items);
        let bad = "{\"match_id\":\"m\",\"rally_id\":\"r\"}\n{oops\n";
        assert!(matches!(read_jsonl::<RallyRef, _>(bad.as_bytes()), Err(JsonlError::Parse { line: 2, .. })));
    }
}
