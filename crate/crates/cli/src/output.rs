//! CSV emission helpers.

use crate::CliError;
use std::io::Write;
use std::path::Path;

/// Format with 12 significant digits; re-parsing the text reproduces the
/// value at that precision.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

pub struct CsvSink {
    file: Option<std::fs::File>,
}

impl CsvSink {
    /// Write to the given path, or to stdout when no path is supplied.
    pub fn new(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => Some(
                std::fs::File::create(p)
                    .map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display())))?,
            ),
            None => None,
        };
        Ok(Self { file })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        let line = fields.join(",");
        match &mut self.file {
            Some(f) => writeln!(f, "{line}").map_err(|e| CliError::Io(e.to_string())),
            None => {
                let mut out = std::io::stdout().lock();
                match writeln!(out, "{line}") {
                    Ok(()) => Ok(()),
                    // downstream consumer (head, etc.) closed the pipe
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {
                        std::process::exit(0)
                    }
                    Err(e) => Err(CliError::Io(e.to_string())),
                }
            }
        }
    }

    pub fn header(&mut self, names: &[&str]) -> Result<(), CliError> {
        self.row(&names.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }
}
