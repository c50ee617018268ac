//! Flat CSV layouts. Column order is part of the output contract.

use shiftdyn::criteria::{CriterionKind, CriterionReport, CriterionRow, Example32};
use shiftdyn::experiments::ExperimentReport;
use shiftdyn::orbit::{DensityReport, OrbitTrace, ReturnSet, TransitivityWitness};

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub trait Tabular {
    fn table(&self) -> Table;
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

const PRODUCT_HEADER: [&str; 5] = ["k", "n_k", "forward_log", "backward_log", "invariant"];
const SUBSPACE_HEADER: [&str; 7] = ["k", "n_k", "decay", "approx_norm", "approx_error", "invariant", "approximants_in_subspace"];

fn product_row(r: &CriterionRow) -> Vec<String> {
    vec![r.k.to_string(), r.n_k.to_string(), opt(r.forward_log), opt(r.backward_log), r.invariant.to_string()]
}

impl Tabular for CriterionReport {
    fn table(&self) -> Table {
        match self.kind {
            CriterionKind::WeightProducts => Table { header: PRODUCT_HEADER.to_vec(), rows: self.rows.iter().map(product_row).collect() },
            CriterionKind::Subspace => Table {
                header: SUBSPACE_HEADER.to_vec(),
                rows: self
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.k.to_string(),
                            r.n_k.to_string(),
                            opt(r.decay),
                            opt(r.approx_norm),
                            opt(r.approx_error),
                            r.invariant.to_string(),
                            r.approximants_in_subspace.to_string(),
                        ]
                    })
                    .collect(),
            },
        }
    }
}

impl Tabular for OrbitTrace {
    fn table(&self) -> Table {
        let f = |x: Option<i64>| x.map(|v| v.to_string()).unwrap_or_default();
        Table {
            header: vec!["n", "support_lo", "support_hi", "support_len", "log_norm", "log_distance"],
            rows: self
                .steps
                .iter()
                .map(|s| vec![s.n.to_string(), f(s.support_lo), f(s.support_hi), s.support_len.to_string(), opt(s.log_norm), opt(s.log_distance)])
                .collect(),
        }
    }
}

impl Tabular for DensityReport {
    fn table(&self) -> Table {
        Table {
            header: vec!["target", "best_distance", "witness_step", "covered"],
            rows: self
                .targets
                .iter()
                .map(|t| vec![t.target.to_string(), num(t.best_distance), t.witness_step.to_string(), t.covered.to_string()])
                .collect(),
        }
    }
}

impl Tabular for TransitivityWitness {
    fn table(&self) -> Table {
        Table {
            header: vec!["n", "err_near", "err_far", "invariant_ok", "z_in_subspace"],
            rows: vec![vec![
                self.n.to_string(),
                num(self.err_near),
                num(self.err_far),
                self.invariant_ok.to_string(),
                self.z_in_subspace.to_string(),
            ]],
        }
    }
}

impl Tabular for ReturnSet {
    fn table(&self) -> Table {
        Table { header: vec!["n"], rows: self.members.iter().map(|n| vec![n.to_string()]).collect() }
    }
}

impl Tabular for Example32 {
    fn table(&self) -> Table {
        let mut header = vec!["component"];
        header.extend(PRODUCT_HEADER);
        let c = &self.certificate;
        let rows = [("w", &c.w_report), ("a", &c.a_report)]
            .into_iter()
            .flat_map(|(name, rep)| {
                rep.rows.iter().map(move |r| {
                    let mut row = vec![name.to_string()];
                    row.extend(product_row(r));
                    row
                })
            })
            .collect();
        Table { header, rows }
    }
}

impl Tabular for ExperimentReport {
    fn table(&self) -> Table {
        Table {
            header: vec!["experiment", "check", "observed", "relation", "bound", "passed"],
            rows: self
                .checks
                .iter()
                .map(|c| {
                    let rel = serde_json::to_value(c.relation).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                    vec![self.experiment.clone(), c.name.clone(), num(c.observed), rel, num(c.bound), c.passed.to_string()]
                })
                .collect(),
        }
    }
}

pub fn to_csv(table: &Table) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}
