//! Hard Dice evaluation and the mean/std/median summary table.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Region column order used throughout reports (matches the evaluation
/// tables: ET, WT, TC).
pub const REGION_ORDER: [&str; 3] = ["et", "wt", "tc"];

/// Hard Dice between two binary masks: `2|P∩T| / (|P|+|T|)`.
///
/// Convention for degenerate regions: both empty scores 1.0, exactly one
/// empty scores 0.0.
pub fn dice_metric(pred: &Array3<u8>, truth: &Array3<u8>) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            context: "dice_metric",
            expected: truth.shape().to_vec(),
            actual: pred.shape().to_vec(),
        });
    }
    let mut np = 0u64;
    let mut nt = 0u64;
    let mut ni = 0u64;
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        let p = p != 0;
        let t = t != 0;
        np += u64::from(p);
        nt += u64::from(t);
        ni += u64::from(p && t);
    }
    if np + nt == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * ni as f64 / (np + nt) as f64)
}

/// Per-case Dice scores for the three nested regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub dice_et: f64,
    pub dice_wt: f64,
    pub dice_tc: f64,
}

/// Mean / population standard deviation / median of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

/// Aggregated scores over a set of cases, in ET/WT/TC order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub et: RegionStats,
    pub wt: RegionStats,
    pub tc: RegionStats,
}

fn region_stats(values: &mut Vec<f64>) -> RegionStats {
    // sort first so the result is bit-identical under case reordering
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let median = if values.len() % 2 == 1 {
        values[values.len() / 2]
    } else {
        (values[values.len() / 2 - 1] + values[values.len() / 2]) / 2.0
    };
    RegionStats { mean, std, median }
}

/// Compute per-region mean, population std and median over cases.
pub fn aggregate(cases: &[CaseMetrics]) -> Result<Summary> {
    if cases.is_empty() {
        return Err(Error::EmptyMetrics);
    }
    let mut et: Vec<f64> = cases.iter().map(|c| c.dice_et).collect();
    let mut wt: Vec<f64> = cases.iter().map(|c| c.dice_wt).collect();
    let mut tc: Vec<f64> = cases.iter().map(|c| c.dice_tc).collect();
    Ok(Summary {
        cases: cases.len(),
        et: region_stats(&mut et),
        wt: region_stats(&mut wt),
        tc: region_stats(&mut tc),
    })
}

impl Summary {
    /// Aligned plain-text table with regions as columns, ET WT TC order.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<8}{:>10}{:>10}{:>10}\n", "", "ET", "WT", "TC"));
        let rows: [(&str, fn(&RegionStats) -> f64); 3] = [
            ("Mean", |s| s.mean),
            ("StdDev", |s| s.std),
            ("Median", |s| s.median),
        ];
        for (name, f) in rows {
            out.push_str(&format!(
                "{:<8}{:>10.4}{:>10.4}{:>10.4}\n",
                name,
                f(&self.et),
                f(&self.wt),
                f(&self.tc)
            ));
        }
        out
    }

    /// CSV with one row per statistic, regions as columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,et,wt,tc\n");
        let rows: [(&str, fn(&RegionStats) -> f64); 3] = [
            ("mean", |s| s.mean),
            ("std", |s| s.std),
            ("median", |s| s.median),
        ];
        for (name, f) in rows {
            out.push_str(&format!(
                "{name},{},{},{}\n",
                f(&self.et),
                f(&self.wt),
                f(&self.tc)
            ));
        }
        out
    }
}

/// Per-case CSV: `case_id,dice_et,dice_wt,dice_tc`.
pub fn cases_to_csv(cases: &[CaseMetrics]) -> String {
    let mut out = String::from("case_id,dice_et,dice_wt,dice_tc\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.case_id, c.dice_et, c.dice_wt, c.dice_tc
        ));
    }
    out
}
