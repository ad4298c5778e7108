//! Tab-separated exports of metric tables and curves.

use std::io::Write;

use super::curves::Curve;
use super::metrics::MetricsReport;
use crate::error::Result;

pub const REPORT_HEADER: &str = "model\tacc_pct\toverall_f1\toverall_precision\toverall_recall\t\
private_f1\tprivate_precision\tprivate_recall\tpublic_f1\tpublic_precision\tpublic_recall";

pub fn report_row(name: &str, r: &MetricsReport) -> String {
    format!(
        "{name}\t{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
        100.0 * r.accuracy,
        r.overall.f1,
        r.overall.precision,
        r.overall.recall,
        r.private.f1,
        r.private.precision,
        r.private.recall,
        r.public.f1,
        r.public.precision,
        r.public.recall,
    )
}

pub fn write_report_table<W: Write>(mut out: W, rows: &[(String, MetricsReport)]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for (name, r) in rows {
        writeln!(out, "{}", report_row(name, r))?;
    }
    Ok(())
}

pub fn write_curve<W: Write>(mut out: W, curve: &Curve) -> Result<()> {
    writeln!(out, "threshold\tprecision\trecall\tf1\tfpr\tfnr\ttp\tfp\ttn\tfn")?;
    for p in &curve.points {
        let cm = p.confusion;
        writeln!(
            out,
            "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
            p.threshold, p.precision, p.recall, p.f1, p.fpr, p.fnr, cm.tp, cm.fp, cm.tn, cm.fn_
        )?;
    }
    Ok(())
}
