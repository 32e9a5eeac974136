//! CSV layouts for each command.

use std::fmt::Write as _;

use repro_dp_core::inference::GridResult;

use crate::run::{Experiment, IntervalRow, Outcome, PValueRow, ReplicateReport};

pub const CI_HEADER: &str = "model,method,alpha,R,coord,lower,upper,width,empty,seed,runtime_ms";
pub const PVALUE_HEADER: &str = "model,p,early_stopped,seed,runtime_ms";
pub const REPLICATE_HEADER: &str = "kind,replicate,seed,coord,lower,upper,width,p,hit,width_se,hit_se,status";

fn runtime(ms: Option<u128>) -> String {
    ms.map(|m| m.to_string()).unwrap_or_default()
}

/// Status text safe inside one CSV field.
fn field(s: &str) -> String {
    let s = s.replace(['\n', '\r'], " ");
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

pub fn ci_csv(exp: &Experiment, rows: &[IntervalRow], seed: u64, ms: Option<u128>) -> String {
    let mut out = format!("{CI_HEADER}\n");
    let cfg = &exp.config;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            cfg.model,
            cfg.method.label(),
            cfg.alpha,
            exp.draws(),
            r.coord,
            r.lower,
            r.upper,
            r.width(),
            r.empty,
            seed,
            runtime(ms)
        )
        .unwrap();
    }
    out
}

pub fn pvalue_csv(exp: &Experiment, row: &PValueRow, seed: u64, ms: Option<u128>) -> String {
    format!(
        "{PVALUE_HEADER}\n{},{},{},{},{}\n",
        exp.config.model,
        row.p,
        row.early_stopped,
        seed,
        runtime(ms)
    )
}

/// One row per accepted cell. Two-parameter grids use `x_lo,x_hi,y_lo,y_hi`;
/// other dimensions number the axes.
pub fn grid_csv(grid: &GridResult) -> String {
    let d = grid.bounding_box.dim();
    let mut out = if d == 2 {
        "x_lo,x_hi,y_lo,y_hi\n".to_string()
    } else {
        let cols: Vec<String> = (0..d).map(|j| format!("lo_{j},hi_{j}")).collect();
        format!("{}\n", cols.join(","))
    };
    for cell in &grid.cells {
        let vals: Vec<String> = (0..d).map(|j| format!("{},{}", cell.lower[j], cell.upper[j])).collect();
        writeln!(out, "{}", vals.join(",")).unwrap();
    }
    out
}

pub fn replicate_csv(exp: &Experiment, report: &ReplicateReport) -> String {
    let mut out = format!("{REPLICATE_HEADER}\n");
    let alpha = exp.config.alpha;
    for rep in &report.replicates {
        match &rep.outcome {
            Outcome::Intervals(rows) => {
                let truth = exp.config.true_theta.as_deref().unwrap_or_default();
                for r in rows {
                    let hit = truth.get(r.coord).map(|&t| r.contains(t) as u8);
                    writeln!(
                        out,
                        "rep,{},{},{},{},{},{},,{},,,ok",
                        rep.index,
                        rep.seed,
                        r.coord,
                        r.lower,
                        r.upper,
                        r.width(),
                        hit.map(|h| h.to_string()).unwrap_or_default()
                    )
                    .unwrap();
                }
            }
            Outcome::PValue(p) => {
                writeln!(out, "rep,{},{},,,,,{},{},,,ok", rep.index, rep.seed, p.p, (p.p <= alpha) as u8).unwrap();
            }
            Outcome::Failed(msg) => {
                writeln!(out, "rep,{},{},,,,,,,,,{}", rep.index, rep.seed, field(&format!("error: {msg}"))).unwrap();
            }
        }
    }
    let ok = report.succeeded();
    let status = format!("failed={}", report.failed);
    let seed = exp.config.master_seed;
    for c in &report.coords {
        writeln!(
            out,
            "summary,{ok},{seed},{},,,{},,{},{},{},{status}",
            c.coord, c.width.mean, c.coverage.mean, c.width.se, c.coverage.se
        )
        .unwrap();
    }
    if let Some(r) = report.rejection {
        writeln!(out, "summary,{ok},{seed},,,,,,{},,{},{status}", r.mean, r.se).unwrap();
    }
    out
}
