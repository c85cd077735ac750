//! Deterministic CSV emission with a `#`-prefixed parameter header.

use std::fmt::Write as _;

/// Seventeen significant digits in scientific notation; `-0` prints as `0`.
pub fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

/// `num`, or an empty field when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    text: String,
}

impl Table {
    /// Starts a table whose header names the tool version and the command.
    pub fn new(command: &str) -> Self {
        let mut t = Table::default();
        t.comment(&format!("oqs-bench {}", env!("CARGO_PKG_VERSION")));
        t.param("command", command);
        t
    }

    pub fn comment(&mut self, line: &str) {
        for l in line.lines() {
            if l.is_empty() {
                self.text.push_str("#\n");
            } else {
                let _ = writeln!(self.text, "# {l}");
            }
        }
    }

    pub fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "# {key} = {value}");
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let joined: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&joined.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
