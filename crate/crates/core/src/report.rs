use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    /// Names of the offending elements, e.g. `["link1"]` or `["gripper", "arm"]`.
    pub subjects: Vec<String>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn push(&mut self, severity: Severity, subjects: &[&str], message: impl Into<String>) {
        self.findings.push(Finding {
            severity,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            message: message.into(),
        });
    }

    pub fn error(&mut self, subjects: &[&str], message: impl Into<String>) {
        self.push(Severity::Error, subjects, message)
    }

    pub fn warning(&mut self, subjects: &[&str], message: impl Into<String>) {
        self.push(Severity::Warning, subjects, message)
    }

    pub fn info(&mut self, subjects: &[&str], message: impl Into<String>) {
        self.push(Severity::Info, subjects, message)
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity == severity).count()
    }

    pub fn errors(&self) -> usize {
        self.count(Severity::Error)
    }

    pub fn warnings(&self) -> usize {
        self.count(Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors() > 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter()
    }
}

impl fmt::Display for ValidationReport {
    /// One line per finding: `severity<TAB>subject,subject<TAB>message`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{}\t{}\t{}", finding.severity, finding.subjects.join(","), finding.message)?;
        }
        write!(f, "summary\t{} errors, {} warnings", self.errors(), self.warnings())
    }
}
