//! CSV output.
//!
//! Floats are written in Rust's shortest round-trip form, so a fixed input
//! always produces the same bytes.
//!
//! | table | columns |
//! |-------|---------|
//! | trace | `trial,iter,loss,rotated_iou,corner_rms,jittered` |
//! | eval | `category,threshold,ap,n_gt,n_pred` (category `*` holds the mean over categories) |
//! | pr curve | `category,threshold,rank,precision,recall` |
//! | matrix | `gt,prd,value` |
//! | pairs | `index,value` |

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::eval::EvalResult;
use super::sim::SimTrace;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Anything that can be laid out as one CSV table.
pub trait CsvTable {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub const TRACE_HEADER: [&str; 6] = ["trial", "iter", "loss", "rotated_iou", "corner_rms", "jittered"];
pub const EVAL_HEADER: [&str; 5] = ["category", "threshold", "ap", "n_gt", "n_pred"];
pub const PR_HEADER: [&str; 5] = ["category", "threshold", "rank", "precision", "recall"];
pub const MATRIX_HEADER: [&str; 3] = ["gt", "prd", "value"];
pub const PAIRS_HEADER: [&str; 2] = ["index", "value"];

impl CsvTable for SimTrace {
    fn header(&self) -> Vec<&'static str> {
        TRACE_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.trials
            .iter()
            .flat_map(|t| {
                t.records.iter().map(move |r| {
                    vec![
                        t.trial.to_string(),
                        r.iter.to_string(),
                        r.loss.to_string(),
                        r.rotated_iou.to_string(),
                        r.corner_rms.to_string(),
                        u8::from(r.jittered).to_string(),
                    ]
                })
            })
            .collect()
    }
}

impl CsvTable for EvalResult {
    fn header(&self) -> Vec<&'static str> {
        EVAL_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for c in &self.categories {
            for curve in &c.curves {
                rows.push(vec![
                    c.category.clone(),
                    curve.threshold.to_string(),
                    curve.ap.to_string(),
                    c.n_gt.to_string(),
                    c.n_pred.to_string(),
                ]);
            }
        }
        let n_gt: usize = self.categories.iter().map(|c| c.n_gt).sum();
        let n_pred: usize = self.categories.iter().map(|c| c.n_pred).sum();
        for (t, m) in self.thresholds.iter().zip(&self.map_per_threshold) {
            rows.push(vec!["*".into(), t.to_string(), m.to_string(), n_gt.to_string(), n_pred.to_string()]);
        }
        rows
    }
}

/// Precision–recall curves of an [`EvalResult`].
pub struct PrCurves<'a>(pub &'a EvalResult);

impl CsvTable for PrCurves<'_> {
    fn header(&self) -> Vec<&'static str> {
        PR_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for c in &self.0.categories {
            for curve in &c.curves {
                for (i, (p, r)) in curve.precision.iter().zip(&curve.recall).enumerate() {
                    rows.push(vec![
                        c.category.clone(),
                        curve.threshold.to_string(),
                        (i + 1).to_string(),
                        p.to_string(),
                        r.to_string(),
                    ]);
                }
            }
        }
        rows
    }
}

/// A dense metric matrix, row `i` for ground truth `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMatrix(pub Vec<Vec<f64>>);

impl CsvTable for MetricMatrix {
    fn header(&self) -> Vec<&'static str> {
        MATRIX_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, v)| vec![i.to_string(), j.to_string(), v.to_string()]))
            .collect()
    }
}

/// Values of index-aligned pairs.
pub struct PairValues(pub Vec<f64>);

impl CsvTable for PairValues {
    fn header(&self) -> Vec<&'static str> {
        PAIRS_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.0.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]).collect()
    }
}

pub fn write_csv<T: CsvTable + ?Sized, W: Write>(table: &T, out: W) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(table.header())?;
    for row in table.rows() {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `table` to `path`.
pub fn emit_csv<T: CsvTable + ?Sized>(table: &T, path: &Path) -> Result<(), ReportError> {
    let file = std::fs::File::create(path)?;
    write_csv(table, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sim::{simulate_regression, SimConfig};

    fn to_string<T: CsvTable>(t: &T) -> String {
        let mut buf = Vec::new();
        write_csv(t, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_trace_is_header_only() {
        let cfg = SimConfig {
            n_trials: 0,
            ..SimConfig::default()
        };
        let s = to_string(&simulate_regression(&cfg).unwrap());
        assert_eq!(s, "trial,iter,loss,rotated_iou,corner_rms,jittered\r\n");
    }

    #[test]
    fn two_trial_row_count() {
        let cfg = SimConfig {
            n_trials: 2,
            max_iters: 7,
            ..SimConfig::default()
        };
        let s = to_string(&simulate_regression(&cfg).unwrap());
        assert_eq!(s.lines().count(), 1 + 2 * 7);
    }

    #[test]
    fn shortest_float_repr_and_quoting() {
        let m = MetricMatrix(vec![vec![1.0, 0.1, 1.0 / 3.0]]);
        let s = to_string(&m);
        assert!(s.contains("0,0,1\r\n0,1,0.1\r\n0,2,0.3333333333333333\r\n"), "{s}");
        let p = PairValues(vec![]);
        assert_eq!(to_string(&p), "index,value\r\n");
    }
}
