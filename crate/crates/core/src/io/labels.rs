//! Label sidecar: one `start_sample,end_sample,category` line per segment.

use std::fmt::Write as _;
use std::path::Path;

use crate::sim::Segment;
use crate::{Error, Result};

pub fn write_labels(path: impl AsRef<Path>, segments: &[Segment]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for s in segments {
        let _ = writeln!(text, "{},{},{}", s.start, s.end, s.category);
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Segment>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut out = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let fields: Vec<&str> = line.trim().split(',').collect();
        let [start, end, cat] = fields[..] else {
            return Err(bad(
                i + 1,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        };
        let start: usize = start
            .parse()
            .map_err(|_| bad(i + 1, format!("bad start {start:?}")))?;
        let end: usize = end
            .parse()
            .map_err(|_| bad(i + 1, format!("bad end {end:?}")))?;
        let category = cat.parse().map_err(|e| bad(i + 1, format!("{e}")))?;
        if end <= start {
            return Err(bad(i + 1, format!("empty segment {start}..{end}")));
        }
        out.push(Segment {
            category,
            start,
            end,
        });
    }
    Ok(out)
}
