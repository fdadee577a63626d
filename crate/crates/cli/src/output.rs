//! CSV emission. Numbers use 17 significant digits in scientific notation,
//! so the text round-trips and does not depend on locale.

use std::io::Write;
use std::path::Path;

use crate::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table held in memory until written.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    footer: Vec<String>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(internal)?;
        Ok(Self {
            writer,
            footer: Vec::new(),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(internal)
    }

    /// Adds a `# ` comment line after the rows.
    pub fn comment(&mut self, text: String) {
        self.footer.push(text);
    }

    pub fn into_bytes(self) -> Result<Vec<u8>, CliError> {
        let mut bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        for line in self.footer {
            bytes.extend_from_slice(b"# ");
            bytes.extend_from_slice(line.as_bytes());
            bytes.push(b'\n');
        }
        Ok(bytes)
    }
}

fn internal(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
