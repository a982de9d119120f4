use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::TrainConfig;

/// Outcome of one (split, seed) run. Accuracies are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub split_id: String,
    pub seed: u64,
    pub test_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seen_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unseen_accuracy: Option<f64>,
    pub epochs_run: usize,
    /// Epoch whose weights were evaluated (1-based).
    pub reported_epoch: usize,
    /// Eval-mode training loss before the first and after the last update.
    pub train_loss_before: f64,
    pub train_loss_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub test: MeanStd,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<MeanStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seen: Option<MeanStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unseen: Option<MeanStd>,
}

impl Summary {
    pub fn of(runs: &[RunRecord]) -> Option<Summary> {
        let pick = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
            let vals: Option<Vec<f64>> = runs.iter().map(f).collect();
            vals.and_then(|v| MeanStd::of(&v))
        };
        Some(Summary {
            test: MeanStd::of(&runs.iter().map(|r| r.test_accuracy).collect::<Vec<_>>())?,
            val: pick(&|r| r.val_accuracy),
            seen: pick(&|r| r.seen_accuracy),
            unseen: pick(&|r| r.unseen_accuracy),
        })
    }
}

/// Wall-clock information, kept apart so reports can be compared without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub wall_clock_seconds: f64,
}

impl Timing {
    pub fn start() -> (Timing, std::time::Instant) {
        let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
        (
            Timing {
                started_unix_ms: ms,
                wall_clock_seconds: 0.0,
            },
            std::time::Instant::now(),
        )
    }

    pub fn finish(mut self, started: std::time::Instant) -> Timing {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: String,
    pub dataset: String,
    pub label: String,
    pub config: TrainConfig,
    pub runs: Vec<RunRecord>,
    pub summary: Summary,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(protocol: &str, dataset: &str, label: String, config: TrainConfig, runs: Vec<RunRecord>, timing: Timing) -> Self {
        let summary = Summary::of(&runs).expect("a report has at least one run");
        RunReport {
            protocol: protocol.into(),
            dataset: dataset.into(),
            label,
            config,
            runs,
            summary,
            timing,
        }
    }

    /// JSON without the `timing` field, for reproducibility comparisons.
    pub fn comparable_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("timing");
        v
    }
}

fn pct(m: &MeanStd) -> String {
    format!("{:.1} ± {:.1}", 100.0 * m.mean, 100.0 * m.std)
}

/// Aligned text table, one row per report; accuracies in percent.
pub fn format_table(reports: &[RunReport]) -> String {
    let with_seen = reports.iter().any(|r| r.summary.seen.is_some());
    let mut header = vec!["model".to_string(), "runs".into()];
    if with_seen {
        header.extend(["seen".into(), "unseen".into()]);
    } else {
        header.push("test acc".into());
    }
    let mut rows = vec![header];
    for r in reports {
        let mut row = vec![r.label.clone(), r.runs.len().to_string()];
        if with_seen {
            let s = |m: &Option<MeanStd>| m.as_ref().map_or("-".into(), pct);
            row.push(s(&r.summary.seen));
            row.push(s(&r.summary.unseen));
        } else {
            row.push(pct(&r.summary.test));
        }
        rows.push(row);
    }
    render(&rows)
}

pub(crate) fn render(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (k, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if k == 0 {
            let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let m = MeanStd::of(&[0.5, 0.7]).unwrap();
        assert!((m.mean - 0.6).abs() < 1e-12);
        assert!((m.std - 0.1).abs() < 1e-12);
        assert_eq!(MeanStd::of(&[0.3, 0.3]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());
    }

    #[test]
    fn table_is_aligned() {
        let rows = vec![
            vec!["a".to_string(), "bb".into()],
            vec!["ccc".to_string(), "d".into()],
        ];
        let t = render(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a    bb");
        assert_eq!(lines[1], "-------");
        assert_eq!(lines[2], "ccc  d");
    }
}
