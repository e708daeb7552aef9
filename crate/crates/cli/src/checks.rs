//! Bound checks evaluated from result tables. `run` and `verify` share this
//! code, so a table re-read from disk reproduces the original verdicts.

use std::fmt;

use anyhow::{bail, Result};

use crate::experiments::{
    BOUNDS_COLUMNS, ERS_CODING_COLUMNS, GRS_COLUMNS, MATCHING_BIN_COLUMNS, MATCHING_COLUMNS, RS_CODING_COLUMNS,
    WZ_COLUMNS,
};
use crate::table::{RowView, Table};

/// Standard errors allowed on Monte Carlo bound comparisons of coding rates.
pub const CODING_SE_TOL: f64 = 2.0;
/// Standard errors allowed on matching and mismatch comparisons.
pub const MATCH_SE_TOL: f64 = 3.0;
/// Allowed deviation of matched-decode distortion from its target.
pub const DISTORTION_DB_TOL: f64 = 0.2;
/// Mean batch-index cost allowed once `N` reaches the bounding constant.
pub const BATCH_BITS_LIMIT: f64 = 4.0;
/// Slack for comparisons between closed-form quantities.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "==",
        })
    }
}

/// `value <relation> bound`, up to `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub schema: &'static str,
    /// 1-based data row.
    pub row: usize,
    /// Identifies the row for a reader, e.g. `sigma2=0.01`.
    pub context: String,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub tol: f64,
}

impl Check {
    /// Signed slack; negative means violated.
    pub fn margin(&self) -> f64 {
        match self.relation {
            Relation::Le => self.bound + self.tol - self.value,
            Relation::Ge => self.value - (self.bound - self.tol),
            Relation::Eq => self.tol - (self.value - self.bound).abs(),
        }
    }

    pub fn passed(&self) -> bool {
        self.margin() >= 0.0
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} row {} [{}] {}: {:.6} {} {:.6} (tol {:.3e}, margin {:+.6})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.schema,
            self.row,
            self.context,
            self.name,
            self.value,
            self.relation,
            self.bound,
            self.tol,
            self.margin()
        )
    }
}

struct Builder<'a> {
    schema: &'static str,
    row: RowView<'a>,
    context: String,
    out: Vec<Check>,
}

impl Builder<'_> {
    fn push(&mut self, name: impl Into<String>, value: f64, relation: Relation, bound: f64, tol: f64) {
        self.out.push(Check {
            schema: self.schema,
            row: self.row.number(),
            context: self.context.clone(),
            name: name.into(),
            value,
            relation,
            bound,
            tol,
        });
    }
}

fn context(row: &RowView<'_>, keys: &[&str]) -> Result<String> {
    Ok(keys.iter().map(|k| Ok(format!("{k}={}", row.str(k)?))).collect::<Result<Vec<_>>>()?.join(" "))
}

fn schema_of(table: &Table) -> Result<&'static str> {
    let known: [(&str, &[&str]); 7] = [
        ("rs-coding", RS_CODING_COLUMNS),
        ("ers-coding", ERS_CODING_COLUMNS),
        ("matching", MATCHING_COLUMNS),
        ("matching-bins", MATCHING_BIN_COLUMNS),
        ("wz", WZ_COLUMNS),
        ("grs-example", GRS_COLUMNS),
        ("bounds", BOUNDS_COLUMNS),
    ];
    for (name, cols) in known {
        if table.header.iter().map(String::as_str).eq(cols.iter().copied()) {
            return Ok(name);
        }
    }
    bail!("header does not match any known schema: {}", table.header.join(","))
}

/// Evaluates every check that applies to the rows of `table`.
pub fn evaluate(table: &Table) -> Result<Vec<Check>> {
    use Relation::*;
    let schema = schema_of(table)?;
    let mut all = Vec::new();
    for i in 0..table.rows.len() {
        let r = table.row(i);
        let keys: &[&str] = match schema {
            "rs-coding" => &["sigma2"],
            "ers-coding" => &["sigma2", "N"],
            "matching" => &["protocol", "N"],
            "matching-bins" => &["protocol", "N", "bin"],
            "wz" => &["sigma2_yprime_given_x", "n_joint", "log2V", "feedback"],
            "grs-example" => &["k"],
            _ => &["N", "y"],
        };
        let mut b = Builder { schema, row: r, context: context(&r, keys)?, out: Vec::new() };
        match schema {
            "rs-coding" => {
                b.push("e_log2_l", r.f64("e_log2_l")?, Le, 1.0, CODING_SE_TOL * r.f64("e_log2_l_se")?);
                let tol = CODING_SE_TOL * r.f64("e_log2_khat_se")?;
                b.push("e_log2_khat", r.f64("e_log2_khat")?, Le, r.f64("khat_bound")?, tol);
                b.push("ideal_bits", r.f64("ideal_bits")?, Le, r.f64("prop1_bound")?, 0.0);
                for c in ["sort_failures", "bin_failures", "wire_failures"] {
                    b.push(c, r.f64(c)?, Eq, 0.0, 0.0);
                }
            }
            "ers-coding" => {
                let tol = CODING_SE_TOL * r.f64("e_log2_sum_se")?;
                b.push("e_log2_k1hat+e_log2_k2hat", r.f64("e_log2_sum")?, Le, r.f64("sum_bound")?, tol);
                b.push("ideal_bits", r.f64("ideal_bits")?, Le, r.f64("prop2_bound")?, 0.0);
                for c in ["decode_failures", "wire_failures"] {
                    b.push(c, r.f64(c)?, Eq, 0.0, 0.0);
                }
            }
            "matching" | "matching-bins" => {
                let rate = r.f64("match_rate")?;
                b.push("match_rate >= 0", rate, Ge, 0.0, 0.0);
                b.push("match_rate <= 1", rate, Le, 1.0, 0.0);
                if let Some(bound) = r.opt("bound_value")? {
                    let tol = MATCH_SE_TOL * r.f64("std_err")?;
                    // The unconditional rejection-sampling rate is an identity.
                    let rel = if schema == "matching" && r.str("protocol")? == "rs" { Eq } else { Ge };
                    b.push("match_rate vs bound", rate, rel, bound, tol);
                }
            }
            "wz" => {
                let tol = MATCH_SE_TOL * r.f64("mismatch_se")?.hypot(r.f64("bound_se")?);
                b.push("mismatch_rate", r.f64("mismatch_rate")?, Le, r.f64("bound_value")?, tol);
                if r.f64("N")? >= r.f64("block_omega")? {
                    b.push("batch_bits", r.f64("batch_bits")?, Le, BATCH_BITS_LIMIT, 0.0);
                }
                let target = r.f64("target_db")?;
                b.push("matched_distortion_db", r.f64("matched_distortion_db")?, Eq, target, DISTORTION_DB_TOL);
                if r.str("feedback")? == "on" {
                    b.push("final_mismatch_rate", r.f64("final_mismatch_rate")?, Eq, 0.0, 0.0);
                    b.push("feedback_bits_out_of_set", r.f64("feedback_bits_out_of_set")?, Eq, 0.0, 0.0);
                }
            }
            "grs-example" => {
                let tol = MATCH_SE_TOL * r.f64("grs_se")?;
                b.push("grs_match_rate", r.f64("grs_match_rate")?, Eq, r.f64("grs_expected")?, tol);
                let (rate, se) = (r.f64("pml_match_rate")?, r.f64("pml_se")?);
                b.push("pml_match_rate vs claimed", rate, Eq, r.f64("pml_claimed")?, MATCH_SE_TOL * se);
                b.push("pml_match_rate vs closed form", rate, Eq, r.f64("pml_closed_form")?, MATCH_SE_TOL * se);
            }
            _ => {
                let rs = r.f64("rs_bound")?;
                let pml = r.f64("pml_bound")?;
                b.push("rs_bound vs lower form", rs, Ge, r.f64("rs_lower_form")?, EXACT_TOL);
                b.push("rs_bound <= 1", rs, Le, 1.0, EXACT_TOL);
                for c in ["ers_nocomm_bound", "ers_batchcomm_bound"] {
                    if let Some(v) = r.opt(c)? {
                        b.push(format!("{c} <= pml_bound"), v, Le, pml, EXACT_TOL);
                    }
                }
            }
        }
        all.extend(b.out);
    }
    Ok(all)
}

/// Counts of passing and failing checks.
pub fn tally(checks: &[Check]) -> (usize, usize) {
    let pass = checks.iter().filter(|c| c.passed()).count();
    (pass, checks.len() - pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins() {
        let c = Check {
            schema: "x",
            row: 1,
            context: String::new(),
            name: "v".into(),
            value: 1.0,
            relation: Relation::Le,
            bound: 0.9,
            tol: 0.2,
        };
        assert!((c.margin() - 0.1).abs() < 1e-12 && c.passed());
        let c = Check { relation: Relation::Eq, tol: 0.05, ..c };
        assert!(!c.passed());
        let c = Check { relation: Relation::Ge, tol: 0.0, ..c };
        assert!(c.passed());
        let c = Check { value: f64::NAN, ..c };
        assert!(!c.passed());
    }

    #[test]
    fn unknown_schema_is_an_error() {
        assert!(evaluate(&Table::new(&["a", "b"])).is_err());
    }
}
