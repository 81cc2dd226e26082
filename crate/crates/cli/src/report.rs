//! Report output: a JSON file in the output directory plus either a text
//! summary or the same JSON on stdout.

use std::path::Path;

use serde::Serialize;

use crate::commands::CliError;

pub fn emit<R: Serialize>(
    report: &R,
    file: Option<&Path>,
    json_stdout: bool,
    text: impl FnOnce() -> String,
) -> Result<(), CliError> {
    if let Some(path) = file {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        }
        gantrycam::io::write_json(path, report)?;
    }
    if json_stdout {
        println!("{}", serde_json::to_string_pretty(report).map_err(gantrycam::Error::from)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

/// Fixed-width table with a header row.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ");
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}
