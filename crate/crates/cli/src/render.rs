//! Text, JSON and CSV rendering of command results. Every number goes
//! through `sig9` so output diffs are stable.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use tpm_core::analysis::{DiscriminantMargins, JacobianMatrix, SingularityFlags};
use tpm_core::fk::FkBranch;
use tpm_core::model::Residuals;
use tpm_core::numfmt::sig9;
use tpm_core::reference::TableAudit;
use tpm_core::topology::TopologyReport;
use tpm_core::validate::ValidationReport;
use tpm_core::{ActuatorInput, FkSolution, IkSolution, InternalConfig, MechanismParams, PlatformPose};

use crate::Format;

/// Rounds every float in a JSON tree to 9 significant digits.
fn round(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            sig9(x).parse::<f64>().ok().and_then(|r| serde_json::Number::from_f64(r).map(Value::Number)).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round(v))).collect()),
        other => other,
    }
}

fn json_text<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("report serializes");
    serde_json::to_string_pretty(&round(value)).expect("json value prints")
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn cfg_json(c: &InternalConfig) -> Value {
    json!({ "gamma": c.gamma, "alpha": c.alpha, "beta": c.beta, "t": c.t })
}

pub fn fk(q: &ActuatorInput, sols: &[FkSolution], p: &MechanismParams, format: Format) -> String {
    match format {
        Format::Json => json_text(&json!({
            "input": q,
            "count": sols.len(),
            "solutions": sols.iter().map(|s| json!({
                "branch": s.branch.to_string(),
                "pose": s.pose,
                "config": cfg_json(&s.cfg),
                "residual_norm": s.residuals.scaled_norm(p),
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => csv_text(
            &["branch", "x", "y", "z", "gamma", "alpha", "beta", "t", "residual_norm"],
            &sols
                .iter()
                .map(|s| {
                    vec![
                        s.branch.to_string(),
                        sig9(s.pose.x),
                        sig9(s.pose.y),
                        sig9(s.pose.z),
                        sig9(s.cfg.gamma),
                        sig9(s.cfg.alpha),
                        sig9(s.cfg.beta),
                        sig9(s.cfg.t),
                        sig9(s.residuals.scaled_norm(p)),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Text => {
            let mut out = format!(
                "inputs ({}, {}, {}) mm: {} assemblies\n",
                sig9(q.y_a1),
                sig9(q.y_a2),
                sig9(q.y_a3),
                sols.len()
            );
            let _ = writeln!(
                out,
                "{:<5} {:>14} {:>14} {:>14} {:>13} {:>13} {:>13} {:>14} {:>10}",
                "mode", "x", "y", "z", "gamma", "alpha", "beta", "t", "residual"
            );
            for s in sols {
                let _ = writeln!(
                    out,
                    "{:<5} {:>14} {:>14} {:>14} {:>13} {:>13} {:>13} {:>14} {:>10}",
                    s.branch.to_string(),
                    sig9(s.pose.x),
                    sig9(s.pose.y),
                    sig9(s.pose.z),
                    sig9(s.cfg.gamma),
                    sig9(s.cfg.alpha),
                    sig9(s.cfg.beta),
                    sig9(s.cfg.t),
                    format!("{:.1e}", s.residuals.scaled_norm(p)),
                );
            }
            out
        }
    }
}

pub fn ik(pose: &PlatformPose, sols: &[IkSolution], format: Format) -> String {
    match format {
        Format::Json => json_text(&json!({
            "pose": pose,
            "count": sols.len(),
            "solutions": sols.iter().map(|s| json!({
                "branch": s.branch.to_string(),
                "input": s.input,
                "config": cfg_json(&s.cfg),
                "merged": s.merged,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => csv_text(
            &["branch", "q1", "q2", "q3", "alpha", "beta", "merged"],
            &sols
                .iter()
                .map(|s| {
                    vec![
                        s.branch.to_string(),
                        sig9(s.input.y_a1),
                        sig9(s.input.y_a2),
                        sig9(s.input.y_a3),
                        sig9(s.cfg.alpha),
                        sig9(s.cfg.beta),
                        s.merged.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Text => {
            let mut out = format!(
                "pose ({}, {}, {}) mm: {} working modes\n",
                sig9(pose.x),
                sig9(pose.y),
                sig9(pose.z),
                sols.len()
            );
            let _ = writeln!(
                out,
                "{:<7} {:>14} {:>14} {:>14} {:>13} {:>13}",
                "mode", "y_A1", "y_A2", "y_A3", "alpha", "beta"
            );
            for s in sols {
                let _ = writeln!(
                    out,
                    "{:<7} {:>14} {:>14} {:>14} {:>13} {:>13}{}",
                    s.branch.to_string(),
                    sig9(s.input.y_a1),
                    sig9(s.input.y_a2),
                    sig9(s.input.y_a3),
                    sig9(s.cfg.alpha),
                    sig9(s.cfg.beta),
                    if s.merged { "  (double root)" } else { "" },
                );
            }
            out
        }
    }
}

pub fn validation(r: &ValidationReport, format: Format) -> String {
    match format {
        Format::Json => json_text(r),
        Format::Csv => csv_text(
            &["check", "passed", "failed", "members", "worst"],
            &r.checks
                .iter()
                .map(|c| {
                    vec![
                        c.check.name().to_string(),
                        c.passed.to_string(),
                        c.failed.to_string(),
                        c.members.to_string(),
                        sig9(c.worst),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Text => {
            let mut out = format!(
                "seed {}, {} oracle and {} round-trip samples per direction, tolerance {} mm\n",
                r.config.seed,
                r.config.oracle_samples,
                r.config.round_trip_samples,
                sig9(r.config.tol)
            );
            for c in &r.checks {
                let _ = writeln!(
                    out,
                    "{:<14} passed {:>5}  failed {:>5}  members {:>6}  worst {} mm",
                    c.check.name(),
                    c.passed,
                    c.failed,
                    c.members,
                    sig9(c.worst)
                );
            }
            for m in &r.mismatches {
                let _ = writeln!(out, "mismatch {} sample {}: {}", m.check.name(), m.sample, m.detail);
            }
            let _ = writeln!(out, "{}", if r.all_passed() { "all checks passed" } else { "FAILED" });
            out
        }
    }
}

pub fn tables(a: &TableAudit, format: Format) -> String {
    if format == Format::Json {
        return json_text(&json!({
            "direct": a.direct.iter().map(|s| json!({
                "branch": s.branch.to_string(),
                "pose": s.pose,
            })).collect::<Vec<_>>(),
            "principal": a.principal.map(|s| s.branch.to_string()),
            "inverse": a.inverse.iter().map(|s| json!({
                "branch": s.branch.to_string(),
                "input": s.input,
            })).collect::<Vec<_>>(),
            "inverse_counts": a.inverse_counts.iter().map(|(b, n)| json!({"branch": b.to_string(), "count": n})).collect::<Vec<_>>(),
            "direct_rows": a.direct_rows,
            "inverse_rows": a.inverse_rows.iter().map(|r| json!({
                "row": r.row,
                "printed": r.printed,
                "nearest_branch": r.nearest.map(|s| s.branch.to_string()),
                "nearest_solution": r.nearest_solution,
            })).collect::<Vec<_>>(),
            "checks": a.checks,
            "passed": a.passed(),
        }));
    }
    if format == Format::Csv {
        return csv_text(
            &["row", "x", "y", "z", "best_mode", "defect_1", "defect_2", "defect_3", "violation", "nearest_solution"],
            &a.direct_rows
                .iter()
                .map(|r| {
                    vec![
                        r.row.to_string(),
                        sig9(r.printed.x),
                        sig9(r.printed.y),
                        sig9(r.printed.z),
                        r.best_code.clone().unwrap_or_default(),
                        sig9(r.leg_defects[0]),
                        sig9(r.leg_defects[1]),
                        sig9(r.leg_defects[2]),
                        sig9(r.violation),
                        sig9(r.nearest_solution),
                    ]
                })
                .collect::<Vec<_>>(),
        );
    }

    let mut out = String::from("Direct solutions for inputs (350, -300, -25) mm\n");
    let _ = writeln!(out, "{:<5} {:>14} {:>14} {:>14} {:>12}", "mode", "x", "y", "z", "ik count");
    for (s, (_, n)) in a.direct.iter().zip(&a.inverse_counts) {
        let _ = writeln!(
            out,
            "{:<5} {:>14} {:>14} {:>14} {:>12}",
            s.branch.to_string(),
            sig9(s.pose.x),
            sig9(s.pose.y),
            sig9(s.pose.z),
            n
        );
    }
    let _ = writeln!(out, "\nPrinted direct rows under the model (leg defects |B_iC_i| - L_i, mm)");
    let _ = writeln!(
        out,
        "{:<4} {:>13} {:>6} {:>13} {:>5} {:>13} {:>13} {:>13} {:>13} {:>13}",
        "row", "x", "y", "z", "mode", "leg 1", "leg 2", "leg 3", "violation", "to ours"
    );
    for r in &a.direct_rows {
        let _ = writeln!(
            out,
            "{:<4} {:>13} {:>6} {:>13} {:>5} {:>13} {:>13} {:>13} {:>13} {:>13}",
            r.row,
            sig9(r.printed.x),
            sig9(r.printed.y),
            sig9(r.printed.z),
            r.best_code.clone().unwrap_or_else(|| "-".into()),
            sig9(r.leg_defects[0]),
            sig9(r.leg_defects[1]),
            sig9(r.leg_defects[2]),
            sig9(r.violation),
            sig9(r.nearest_solution),
        );
    }
    let mode = a.principal.map(|s| s.branch.to_string()).unwrap_or_else(|| "-".into());
    let _ = writeln!(out, "\nInverse solutions of mode {mode} ({} working modes)", a.inverse.len());
    let _ = writeln!(
        out,
        "{:<4} {:>13} {:>13} {:>13} | {:<7} {:>13} {:>13} {:>13}   {:>11}",
        "row", "printed y_A1", "y_A2", "y_A3", "nearest", "y_A1", "y_A2", "y_A3", "distance"
    );
    for r in &a.inverse_rows {
        let ours = r
            .nearest
            .map(|s| {
                format!(
                    "{:<7} {:>13} {:>13} {:>13}",
                    s.branch.to_string(),
                    sig9(s.input.y_a1),
                    sig9(s.input.y_a2),
                    sig9(s.input.y_a3)
                )
            })
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<4} {:>13} {:>13} {:>13} | {}   {:>11}",
            r.row,
            sig9(r.printed.y_a1),
            sig9(r.printed.y_a2),
            sig9(r.printed.y_a3),
            ours,
            sig9(r.nearest_solution)
        );
    }
    let _ = writeln!(out, "\nAsserted agreements");
    for c in &a.checks {
        let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out
}

pub fn topology(r: &TopologyReport, format: Format) -> String {
    match format {
        Format::Json => json_text(r),
        Format::Csv => csv_text(
            &["loop", "sum_f", "actuated", "xi", "delta"],
            &r.loops
                .iter()
                .map(|l| {
                    vec![
                        l.name.clone(),
                        l.sum_f.to_string(),
                        l.actuated.to_string(),
                        l.xi.to_string(),
                        l.delta.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Text => {
            let mut out = format!("{}\n", r.name);
            for (name, poc) in &r.branches {
                let _ = writeln!(out, "branch {name}: {poc}");
            }
            let _ = writeln!(out, "platform: {}", r.platform);
            for l in &r.loops {
                let _ = writeln!(
                    out,
                    "loop {}: sum_f {}, actuated {}, xi {}, delta {:+}",
                    l.name, l.sum_f, l.actuated, l.xi, l.delta
                );
            }
            let _ = writeln!(out, "total joint freedoms: {}", r.total_f);
            let _ = writeln!(out, "DOF F = {}", r.dof);
            let _ = writeln!(out, "coupling degree kappa = {}", r.coupling_degree);
            out
        }
    }
}

pub struct CheckData {
    pub input: ActuatorInput,
    pub cfg: InternalConfig,
    pub branch: Option<FkBranch>,
    pub pose: PlatformPose,
    pub residuals: Residuals,
    pub flags: SingularityFlags,
    pub margins: Option<DiscriminantMargins>,
    pub implicit: Option<JacobianMatrix>,
    pub numeric: Option<JacobianMatrix>,
}

fn jac_json(j: &Option<JacobianMatrix>) -> Value {
    match j {
        Some(j) => json!({
            "j": j.j,
            "determinant": j.determinant(),
            "condition_number": j.condition_number(),
        }),
        None => Value::Null,
    }
}

fn jac_text(out: &mut String, name: &str, j: &Option<JacobianMatrix>) {
    match j {
        Some(j) => {
            let _ = writeln!(
                out,
                "{name} Jacobian (rows x y z, columns y_A1 y_A2 y_A3), det {}, cond {}",
                sig9(j.determinant()),
                sig9(j.condition_number())
            );
            for row in &j.j {
                let _ = writeln!(out, "  {:>14} {:>14} {:>14}", sig9(row[0]), sig9(row[1]), sig9(row[2]));
            }
        }
        None => {
            let _ = writeln!(out, "{name} Jacobian: unavailable");
        }
    }
}

pub fn check(d: &CheckData, p: &MechanismParams, format: Format) -> String {
    let margins: Vec<(String, f64, f64)> = d
        .margins
        .as_ref()
        .map(|m| m.named().into_iter().map(|(n, m)| (n, m.raw, m.normalized)).collect())
        .unwrap_or_default();
    match format {
        Format::Json | Format::Csv => json_text(&json!({
            "input": d.input,
            "branch": d.branch.map(|b| b.to_string()),
            "config": cfg_json(&d.cfg),
            "pose": d.pose,
            "residuals": d.residuals,
            "residual_norm": d.residuals.scaled_norm(p),
            "flags": d.flags,
            "discriminants": margins.iter().map(|(n, r, m)| json!({"name": n, "raw": r, "normalized": m})).collect::<Vec<_>>(),
            "implicit_jacobian": jac_json(&d.implicit),
            "numeric_jacobian": jac_json(&d.numeric),
        })),
        Format::Text => {
            let mut out = String::new();
            if let Some(b) = d.branch {
                let _ = writeln!(out, "mode {b}");
            }
            let _ = writeln!(
                out,
                "gamma {}  alpha {}  beta {}  t {}",
                sig9(d.cfg.gamma),
                sig9(d.cfg.alpha),
                sig9(d.cfg.beta),
                sig9(d.cfg.t)
            );
            let _ = writeln!(out, "pose ({}, {}, {}) mm", sig9(d.pose.x), sig9(d.pose.y), sig9(d.pose.z));
            let _ = writeln!(
                out,
                "residuals loop1 {} mm², loop2 {} mm², x-chain {} mm",
                sig9(d.residuals.loop1),
                sig9(d.residuals.loop2),
                sig9(d.residuals.xchain)
            );
            let groups = [("serial", &d.flags.serial), ("parallel", &d.flags.parallel), ("constraint", &d.flags.constraint)];
            for (name, set) in groups {
                let _ = writeln!(
                    out,
                    "{name} singularities: {}",
                    if set.is_empty() { "none".to_string() } else { set.join(", ") }
                );
            }
            let _ = writeln!(out, "condition margins (flag at <= {}):", sig9(d.flags.tol));
            for (n, v) in &d.flags.margins {
                let _ = writeln!(out, "  {n:<24} {}", sig9(*v));
            }
            if !margins.is_empty() {
                let _ = writeln!(out, "discriminants (raw, normalized):");
                for (n, r, m) in &margins {
                    let _ = writeln!(out, "  {n:<24} {:>16} {:>16}", sig9(*r), sig9(*m));
                }
            }
            jac_text(&mut out, "implicit", &d.implicit);
            if d.branch.is_some() {
                jac_text(&mut out, "finite-difference", &d.numeric);
            }
            out
        }
    }
}
