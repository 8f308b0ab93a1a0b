//! Result bundles: CSV tables with a `#` header block plus one TOML summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::CliError;

/// Provenance stamped on every table and the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

/// Comma-separated table; columns carry their units in the header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// `columns` are `(name, unit)` pairs; use `"1"` for dimensionless values.
    pub fn new(name: impl Into<String>, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# plasim {}", prov.command);
        let _ = writeln!(out, "# config_sha256: {}", prov.config_hash);
        let _ = writeln!(out, "# seed: {}", prov.seed);
        let _ = writeln!(out, "# columns: {}", self.columns.join(", "));
        let names: Vec<&str> = self
            .columns
            .iter()
            .map(|c| c.split(" [").next().unwrap_or(c))
            .collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Fixed-format float for tables: identical inputs give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

/// Everything a command produces; written only after the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    pub summary: toml::Table,
}

impl ResultBundle {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            tables: Vec::new(),
            summary: toml::Table::new(),
        }
    }

    fn summary_document(&self) -> String {
        let mut run = toml::Table::new();
        run.insert("command".into(), self.provenance.command.clone().into());
        run.insert(
            "config_sha256".into(),
            self.provenance.config_hash.clone().into(),
        );
        run.insert(
            "seed".into(),
            toml::Value::Integer(self.provenance.seed as i64),
        );
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        let files: Vec<toml::Value> = self
            .tables
            .iter()
            .map(|t| format!("{}.csv", t.name).into())
            .collect();
        run.insert("tables".into(), files.into());
        let mut doc = toml::Table::new();
        doc.insert("run".into(), run.into());
        doc.insert("results".into(), self.summary.clone().into());
        toml::to_string(&doc).expect("summary is representable as TOML")
    }

    /// Writes `summary.toml` and every table into `dir`, and nowhere else.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        for table in &self.tables {
            if table.name.contains(['/', '\\']) || table.name.starts_with('.') {
                return Err(CliError::Runtime(format!(
                    "refusing table name {:?}",
                    table.name
                )));
            }
            fs::write(
                dir.join(format!("{}.csv", table.name)),
                table.render(&self.provenance),
            )?;
        }
        fs::write(dir.join("summary.toml"), self.summary_document())?;
        Ok(())
    }
}

/// File-name tag for a distance, e.g. `z5.000`.
pub fn z_tag(z: f64) -> String {
    format!("z{z:.3}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            command: "g2".into(),
            config_hash: "abc".into(),
            seed: 9,
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("t", &[("x", "mm"), ("f", "1")]);
        t.push_floats(&[0.5, -2.0]);
        let text = t.render(&prov());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# plasim g2");
        assert_eq!(lines[1], "# config_sha256: abc");
        assert_eq!(lines[2], "# seed: 9");
        assert_eq!(lines[3], "# columns: x [mm], f [1]");
        assert_eq!(lines[4], "x,f");
        assert_eq!(lines[5], "5.000000000000e-1,-2.000000000000e0");
    }

    #[test]
    fn summary_carries_provenance() {
        let mut b = ResultBundle::new(prov());
        b.summary.insert("g2".into(), 0.25.into());
        b.tables.push(Table::new("trials", &[("g2", "1")]));
        let doc: toml::Table = b.summary_document().parse().unwrap();
        assert_eq!(doc["run"]["config_sha256"].as_str(), Some("abc"));
        assert_eq!(doc["run"]["tables"][0].as_str(), Some("trials.csv"));
        assert_eq!(doc["results"]["g2"].as_float(), Some(0.25));
    }

    #[test]
    fn z_tags() {
        assert_eq!(z_tag(5.0), "z5.000");
        assert_eq!(z_tag(16.6374), "z16.637");
    }
}
