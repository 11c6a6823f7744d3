//! The `verify` runner: every registered check, one report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::checks::{checks, Check, CheckContext, Measurement, SUITES};
use crate::commands::CommandOutput;
use crate::output::json_string;
use crate::{exit, CliError};

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub suite: String,
    pub status: String,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: String,
    pub runtime_s: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

pub fn parse_overrides(items: &[String], known: &[&str]) -> Result<BTreeMap<String, f64>, CliError> {
    let mut map = BTreeMap::new();
    for item in items {
        let (name, value) =
            item.split_once('=').ok_or_else(|| CliError::Usage(format!("tolerance override `{item}` is not name=value")))?;
        if !known.contains(&name) {
            return Err(CliError::Usage(format!("unknown check `{name}`; known: {}", known.join(", "))));
        }
        let value: f64 =
            value.parse().map_err(|_| CliError::Usage(format!("tolerance override `{item}` has a non-numeric value")))?;
        map.insert(name.to_string(), value);
    }
    Ok(map)
}

pub fn run_check(check: &dyn Check, ctx: &CheckContext, tolerance: f64) -> CheckRecord {
    let start = Instant::now();
    let outcome = check.run(ctx, tolerance);
    let runtime_s = start.elapsed().as_secs_f64();
    let (status, m) = match outcome {
        Ok(m) => {
            let within = if check.upper_bound() { m.measured <= tolerance } else { m.measured >= tolerance };
            (if within && m.extra_ok { "pass" } else { "fail" }, m)
        }
        Err(e) => ("error", Measurement { measured: f64::NAN, extra_ok: false, detail: e }),
    };
    CheckRecord {
        name: check.name().into(),
        suite: check.suite().into(),
        status: status.into(),
        measured: m.measured,
        tolerance,
        comparison: if check.upper_bound() { "<=" } else { ">=" }.into(),
        runtime_s,
        detail: m.detail,
    }
}

pub fn verify(suite: Option<&str>, overrides: &BTreeMap<String, f64>, seed: u64) -> Result<VerifyReport, CliError> {
    if let Some(s) = suite {
        if !SUITES.contains(&s) {
            return Err(CliError::Usage(format!("unknown suite `{s}`; known: {}", SUITES.join(", "))));
        }
    }
    let ctx = CheckContext { seed };
    let registry = checks();
    let mut records = Vec::new();
    for (_, check) in registry.iter() {
        if suite.is_some_and(|s| s != check.suite()) {
            continue;
        }
        let tol = overrides.get(check.name()).copied().unwrap_or(check.tolerance());
        records.push(run_check(check.as_ref(), &ctx, tol));
    }
    records.sort_by_key(|r| SUITES.iter().position(|s| *s == r.suite));
    let passed = records.iter().all(|r| r.status == "pass");
    Ok(VerifyReport { seed, checks: records, passed })
}

pub fn run(suite: Option<&str>, tolerances: &[String], seed: u64) -> Result<CommandOutput, CliError> {
    let registry = checks();
    let overrides = parse_overrides(tolerances, &registry.names())?;
    let report = verify(suite, &overrides, seed)?;
    let mut summary: Vec<String> = report
        .checks
        .iter()
        .map(|r| {
            format!(
                "{:<5} {:<28} measured {:.4e} {} {:.4e}  ({:.2} s)  {}",
                r.status.to_uppercase(),
                r.name,
                r.measured,
                r.comparison,
                r.tolerance,
                r.runtime_s,
                r.detail
            )
        })
        .collect();
    let failed = report.checks.iter().filter(|r| r.status != "pass").count();
    summary.push(format!("{} checks, {} failed", report.checks.len(), failed));
    Ok(CommandOutput {
        files: vec![("verify.json".into(), json_string(&report))],
        summary,
        code: if report.passed { exit::OK } else { exit::CHECK_FAILED },
    })
}
