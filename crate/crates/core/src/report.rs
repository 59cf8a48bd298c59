//! Rendering of sweep results: PR-curve CSV and AP comparison tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::ClassLabel;
use crate::metrics::EvalReport;
use crate::pipelines::Strategy;

/// Published full-scale AP values for (strategy, class) pairs, shown next to
/// observed values for comparison.
pub const REFERENCE_AP: &[(Strategy, ClassLabel, f64)] = &[
    (Strategy::Direct, ClassLabel::Helmet, 0.6493),
    (Strategy::Nested, ClassLabel::Helmet, 0.4672),
    (Strategy::Cascaded, ClassLabel::HeadWithHelmet, 0.2699),
    (Strategy::Nested, ClassLabel::Person, 0.6767),
    (Strategy::Cascaded, ClassLabel::Person, 0.6767),
    (Strategy::Cascaded, ClassLabel::Head, 0.1024),
];

pub fn reference_ap(strategy: Strategy, class: ClassLabel) -> Option<f64> {
    REFERENCE_AP
        .iter()
        .find(|(s, c, _)| *s == strategy && *c == class)
        .map(|(_, _, v)| *v)
}

/// One row per (class, strategy, threshold): `class,strategy,threshold,precision,recall`.
pub fn pr_curves_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("class,strategy,threshold,precision,recall\n");
    for r in reports {
        for (class, curve) in &r.classes {
            for p in &curve.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    class, r.strategy, p.threshold, p.precision, p.recall
                );
            }
        }
    }
    out
}

fn method_name(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Direct => "Direct (Hard Hats)",
        Strategy::Nested => "Nested (Person → Hard Hats)",
        Strategy::Cascaded => "Multistage (Person → Head → Hard Hats)",
    }
}

fn fmt_ref(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Markdown table comparing hardhat AP across strategies, followed by a table
/// of every evaluated class.
pub fn ap_table_markdown(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    out.push_str("| Detection Method | AP (area under the curve) | Reference AP |\n");
    out.push_str("|---|---:|---:|\n");
    for r in reports {
        let class = r.strategy.hardhat_class();
        let ap = r
            .ap(class)
            .map_or_else(|| "-".into(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            method_name(r.strategy),
            ap,
            fmt_ref(reference_ap(r.strategy, class))
        );
    }

    out.push_str("\n| Strategy | Class | AP | Reference AP | Complete |\n");
    out.push_str("|---|---|---:|---:|---|\n");
    for r in reports {
        for (class, curve) in &r.classes {
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {} | {} |",
                r.strategy,
                class,
                curve.ap,
                fmt_ref(reference_ap(r.strategy, *class)),
                if r.complete { "yes" } else { "NO" }
            );
        }
    }
    if let Some(r) = reports.first() {
        let _ = write!(
            out,
            "\nAP convention: {}. IoU cut {}. Backend: {}.\n",
            r.ap_convention, r.iou_cut, r.backend
        );
    }
    out
}

/// Top-level `report.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub run_config: serde_json::Value,
    pub reports: Vec<EvalReport>,
}

impl SweepReport {
    pub fn complete(&self) -> bool {
        self.reports.iter().all(|r| r.complete)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RemapMode;
    use crate::metrics::{ClassCurve, Counts, PRPoint};
    use std::collections::BTreeMap;

    fn report() -> EvalReport {
        let points = vec![
            PRPoint {
                threshold: 0.1,
                precision: 0.5,
                recall: 1.0,
            },
            PRPoint {
                threshold: 0.2,
                precision: 1.0,
                recall: 0.5,
            },
        ];
        EvalReport {
            strategy: Strategy::Direct,
            manifest_mode: RemapMode::DirectNested,
            backend: "oracle".into(),
            grid: vec![0.1, 0.2],
            iou_cut: 0.5,
            ap_convention: "x".into(),
            images: 1,
            complete: true,
            error: None,
            classes: BTreeMap::from([(
                ClassLabel::Helmet,
                ClassCurve {
                    ap: crate::metrics::average_precision(&points),
                    points,
                    counts: vec![Counts::default(); 2],
                },
            )]),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = pr_curves_csv(&[report()]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "class,strategy,threshold,precision,recall");
        assert_eq!(lines[1], "helmet,direct,0.1,0.5,1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn table_shows_reference() {
        let md = ap_table_markdown(&[report()]);
        assert!(
            md.contains("| Direct (Hard Hats) | 0.8750 | 0.6493 |"),
            "{md}"
        );
        assert_eq!(
            reference_ap(Strategy::Cascaded, ClassLabel::Head),
            Some(0.1024)
        );
        assert_eq!(reference_ap(Strategy::Direct, ClassLabel::Person), None);
    }
}
