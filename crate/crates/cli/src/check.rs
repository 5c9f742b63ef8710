use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value ≤ limit`, a numerical tolerance.
    AtMost,
    /// `value ≤ limit`, a wall-clock budget in seconds. Never overridden.
    Budget,
    /// `value > limit`.
    Above,
    /// `value == limit`, for counts and verdict flags.
    Equals,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost | Relation::Budget => "<=",
            Relation::Above => ">",
            Relation::Equals => "==",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub relation: Relation,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64, relation: Relation) -> Self {
        let passed = match relation {
            Relation::AtMost | Relation::Budget => value <= limit,
            Relation::Above => value > limit,
            Relation::Equals => value == limit,
        };
        Self {
            name: name.into(),
            value,
            limit,
            relation,
            passed,
            detail: None,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, limit, Relation::AtMost)
    }

    pub fn budget(name: impl Into<String>, seconds: f64, limit: f64) -> Self {
        Self::new(name, seconds, limit, Relation::Budget)
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, limit, Relation::Above)
    }

    pub fn equals(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Self::new(name, value, expected, Relation::Equals)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::equals(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    /// A check that could not be evaluated.
    pub fn error(name: impl Into<String>, message: impl Into<String>) -> Self {
        Self::flag(name, false).with_detail(message)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// Replaces the limit of a tolerance check and re-evaluates it.
    pub fn override_tolerance(&mut self, tol: f64) {
        if self.relation == Relation::AtMost {
            *self = Self::new(std::mem::take(&mut self.name), self.value, tol, Relation::AtMost)
                .with_optional_detail(self.detail.take());
        }
    }

    fn with_optional_detail(mut self, detail: Option<String>) -> Self {
        self.detail = detail;
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "ok  " } else { "FAIL" };
        write!(
            f,
            "{status} {:<44} {:>12.4e} {} {:.1e}",
            self.name,
            self.value,
            self.relation.symbol(),
            self.limit
        )?;
        if let Some(d) = &self.detail {
            write!(f, "  ({d})")?;
        }
        Ok(())
    }
}

/// Runs `f`, turning an error into a failed check named `name`.
pub fn guarded(name: &str, out: &mut Vec<Check>, f: impl FnOnce(&mut Vec<Check>) -> wr_core::Result<()>) {
    if let Err(e) = f(out) {
        out.push(Check::error(name, e.to_string()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::at_most("a", 1e-9, 1e-8).passed);
        assert!(!Check::at_most("a", f64::NAN, 1e-8).passed);
        assert!(!Check::above("b", 0.0, 0.0).passed);
        assert!(Check::equals("c", 2.0, 2.0).passed);
        assert!(!Check::flag("d", false).passed);
    }

    #[test]
    fn overrides_touch_only_tolerances() {
        let mut c = Check::at_most("a", 1e-9, 1e-8).with_detail("x");
        c.override_tolerance(1e-15);
        assert!(!c.passed && c.limit == 1e-15 && c.detail.as_deref() == Some("x"));
        let mut b = Check::budget("t", 0.5, 1.0);
        b.override_tolerance(1e-15);
        assert!(b.passed);
        let mut e = Check::equals("n", 2.0, 2.0);
        e.override_tolerance(1e-15);
        assert!(e.passed);
    }
}
