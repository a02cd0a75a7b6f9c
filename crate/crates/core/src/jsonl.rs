//! Newline-delimited JSON helpers shared by every interchange file.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::Error;

pub fn write_lines<'a, W, T, I>(mut out: W, items: I) -> Result<(), Error>
where
    W: Write,
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads one value per non-blank line. Errors carry the 1-based line number.
pub fn read_lines<R: BufRead, T: DeserializeOwned>(input: R) -> Result<Vec<T>, Error> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::InvalidInput(format!("line {}: {e}", idx + 1)))?;
        out.push(value);
    }
    Ok(out)
}
