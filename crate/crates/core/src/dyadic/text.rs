//! Plain-text interval lists: one `level index` pair per line (0-based
//! index), `#` starts a comment, blank lines are ignored.

use super::{DyadicError, DyadicInterval, IntervalCollection};

pub fn parse_intervals(text: &str) -> Result<IntervalCollection, DyadicError> {
    let mut intervals = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || DyadicError::Parse {
            line: lineno + 1,
            content: raw.to_string(),
        };
        let mut fields = line.split_whitespace();
        let level: u32 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let index: u64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if fields.next().is_some() {
            return Err(bad());
        }
        intervals.push(DyadicInterval::new(level, index)?);
    }
    IntervalCollection::try_from_intervals(intervals)
}

/// Canonical rendering: sorted by `(level, index)`, one `m k` line each.
pub fn format_intervals(collection: &IntervalCollection) -> String {
    let mut out = String::with_capacity(collection.len() * 8);
    for i in collection {
        out.push_str(&format!("{} {}\n", i.level(), i.index()));
    }
    out
}
