use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    /// Level witnessing the violation.
    pub level: f64,
    pub detail: String,
}

impl Violation {
    pub fn new(constraint: &'static str, level: f64, detail: impl Into<String>) -> Self {
        Self {
            constraint,
            level,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal remarks, e.g. conditions only checkable on a truncated domain.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}
