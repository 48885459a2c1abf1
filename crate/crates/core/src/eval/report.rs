//! Text tables and CSV output for metrics and latency.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::{LatencyReport, MiouReport, PrfReport};
use crate::cloud::SemanticClass;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

/// `class,iou,precision,recall,f1` rows for each class, then `mean`.
pub fn write_metrics_csv<W: Write>(w: &mut W, iou: &MiouReport, prf: &PrfReport) -> io::Result<()> {
    writeln!(w, "class,iou,precision,recall,f1")?;
    for c in SemanticClass::ALL {
        let p = &prf.per_class[c.index()];
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6}",
            c.name(),
            cell(iou.per_class[c.index()]),
            p.precision,
            p.recall,
            p.f1
        )?;
    }
    writeln!(
        w,
        "mean,{:.6},{:.6},{:.6},{:.6}",
        iou.miou, prf.macro_precision, prf.macro_recall, prf.macro_f1
    )
}

/// `stage,avg_ms,max_ms,min_ms` rows.
pub fn write_latency_csv<W: Write>(w: &mut W, report: &LatencyReport) -> io::Result<()> {
    writeln!(w, "stage,avg_ms,max_ms,min_ms")?;
    for s in &report.stages {
        writeln!(
            w,
            "{},{:.3},{:.3},{:.3}",
            s.stage, s.avg_ms, s.max_ms, s.min_ms
        )?;
    }
    Ok(())
}

pub fn format_metrics_table(iou: &MiouReport, prf: &PrfReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>10} {:>8} {:>8} {:>10}",
        "class", "iou", "precision", "recall", "f1", "support"
    );
    for c in SemanticClass::ALL {
        let p = &prf.per_class[c.index()];
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>10.4} {:>8.4} {:>8.4} {:>10}",
            c.name(),
            iou.per_class[c.index()].map_or_else(|| "n/a".into(), |v| format!("{v:.4}")),
            p.precision,
            p.recall,
            p.f1,
            p.support
        );
    }
    let _ = writeln!(
        out,
        "{:<10} {:>8.4} {:>10.4} {:>8.4} {:>8.4}",
        "mean", iou.miou, prf.macro_precision, prf.macro_recall, prf.macro_f1
    );
    out
}

pub fn format_latency_table(report: &LatencyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>10}",
        "stage", "avg ms", "max ms", "min ms"
    );
    for s in &report.stages {
        let _ = writeln!(
            out,
            "{:<10} {:>10.3} {:>10.3} {:>10.3}",
            s.stage, s.avg_ms, s.max_ms, s.min_ms
        );
    }
    let _ = writeln!(out, "({} timed runs)", report.runs);
    out
}

#[cfg(test)]
mod tests {
    use super::super::{classwise_prf, miou};
    use super::*;
    use SemanticClass::*;

    #[test]
    fn metrics_csv_has_every_class() {
        let r = miou(&[Plane, Plane, Cone], &[Plane, Sphere, Cone]).unwrap();
        let prf = classwise_prf(&r.confusion);
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &r, &prf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "class,iou,precision,recall,f1");
        assert!(lines[1].starts_with("plane,0.500000,0.500000,1.000000,"));
        assert!(lines[2].starts_with("ground,n/a,"));
        assert!(lines[6].starts_with("mean,"));
    }
}
