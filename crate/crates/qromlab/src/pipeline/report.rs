use std::fmt::Write as _;

use serde::Serialize;

use crate::transforms::FLOAT_SLACK;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Le => "<=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The inequality is conditional and its premise does not hold here.
    HypothesisUnmet,
}

/// One inequality `lhs relation rhs`, with the quoted statement it checks.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub paper_anchor: String,
    pub statement: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// Whether the inequality holds up to the slack.
    pub pass: bool,
    pub status: Status,
}

impl Check {
    /// `slack` is added on the permissive side.
    pub fn new(name: &str, anchor: &str, statement: Option<u64>, lhs: f64, relation: Relation, rhs: f64, slack: f64) -> Self {
        let pass = match relation {
            Relation::Ge => lhs + slack + FLOAT_SLACK >= rhs,
            Relation::Le => lhs <= rhs + slack + FLOAT_SLACK,
        };
        let status = if pass { Status::Pass } else { Status::Fail };
        Self { name: name.into(), paper_anchor: anchor.into(), statement, lhs, rhs, relation, pass, status }
    }

    /// Mark the check as conditional on `premise`.
    pub fn given(mut self, premise: bool) -> Self {
        if !premise {
            self.status = Status::HypothesisUnmet;
        }
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatementValue {
    pub x: u64,
    pub accept: f64,
}

/// Acceptance of the decider on yes- and no-instances.
#[derive(Debug, Clone, Serialize)]
pub struct Decision {
    pub yes: Vec<StatementValue>,
    pub no: Vec<StatementValue>,
    /// `min yes − max no`, when both sides are present.
    pub gap: Option<f64>,
}

impl Decision {
    pub fn max_no(&self) -> Option<f64> {
        self.no.iter().map(|v| v.accept).reduce(f64::max)
    }

    pub fn min_yes(&self) -> Option<f64> {
        self.yes.iter().map(|v| v.accept).reduce(f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub decision: Option<Decision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl Report {
    pub fn new(config: serde_json::Value) -> Self {
        Self { config, checks: Vec::new(), decision: None, runtime_ms: None }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// No check failed outright; unmet hypotheses do not count.
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn find(&self, name: &str, statement: Option<u64>) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name && c.statement == statement)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,statement,paper_anchor,lhs,relation,rhs,pass,status\n");
        for c in &self.checks {
            let st = c.statement.map(|x| x.to_string()).unwrap_or_default();
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::HypothesisUnmet => "hypothesis_unmet",
            };
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{:e},{},{}",
                csv_field(&c.name),
                st,
                csv_field(&c.paper_anchor),
                c.lhs,
                c.relation.symbol(),
                c.rhs,
                c.pass,
                status
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_is_on_the_permissive_side() {
        assert!(Check::new("a", "", None, 0.5, Relation::Ge, 0.5 + 1e-12, 0.0).pass);
        assert!(!Check::new("a", "", None, 0.5, Relation::Ge, 0.6, 1e-9).pass);
        assert!(Check::new("a", "", None, 0.6, Relation::Le, 0.5, 0.2).pass);
    }

    #[test]
    fn unmet_hypothesis_is_not_a_failure() {
        let mut r = Report::new(serde_json::json!({}));
        r.push(Check::new("bound", "", Some(1), 0.0, Relation::Ge, 1.0, 0.0).given(false));
        assert!(r.ok());
        assert!(!r.checks[0].pass);
        r.push(Check::new("bound", "", Some(2), 0.0, Relation::Ge, 1.0, 0.0));
        assert!(!r.ok());
    }

    #[test]
    fn csv_quotes_anchors() {
        let mut r = Report::new(serde_json::json!({}));
        r.push(Check::new("n", "\"a, b\"", None, 1.0, Relation::Le, 2.0, 0.0));
        let csv = r.to_csv();
        assert!(csv.lines().nth(1).unwrap().starts_with("n,,\"\"\"a, b\"\"\",1e0,<=,2e0,true,pass"));
    }
}
