//! CSV outputs.

use std::io::Write;

use crate::error::Result;
use crate::metrics::{format_pct, format_pp, MetricsReport};

/// One row per mechanism with means, standard errors and baseline deltas.
pub fn write_report_csv<W: Write>(w: W, report: &MetricsReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "mechanism",
        "regime",
        "revenue",
        "adv_welfare",
        "total_welfare",
        "alloc_rate",
        "stderr_revenue",
        "stderr_adv_welfare",
        "stderr_total_welfare",
        "stderr_alloc_rate",
        "n",
        "delta_revenue",
        "delta_adv_welfare",
        "delta_total_welfare",
        "delta_alloc_rate",
    ])?;
    for (i, r) in report.rows.iter().enumerate() {
        let d = report.deltas.get(i);
        let mut rec = vec![
            r.mechanism.clone(),
            r.regime.clone(),
            r.revenue.mean.to_string(),
            r.adv_welfare.mean.to_string(),
            r.total_welfare.mean.to_string(),
            r.alloc_rate.mean.to_string(),
            r.revenue.stderr.to_string(),
            r.adv_welfare.stderr.to_string(),
            r.total_welfare.stderr.to_string(),
            r.alloc_rate.stderr.to_string(),
            r.n.to_string(),
        ];
        match d {
            Some(d) => rec.extend([
                format_pct(d.revenue_pct),
                format_pct(d.adv_welfare_pct),
                format_pct(d.total_welfare_pct),
                format_pp(d.alloc_rate_pp),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Long format for plotting: `mechanism,regime,metric,value,stderr`.
pub fn write_long_csv<W: Write>(w: W, report: &MetricsReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["mechanism", "regime", "metric", "value", "stderr"])?;
    for r in &report.rows {
        for (name, e) in [("revenue", r.revenue), ("adv_welfare", r.adv_welfare), ("total_welfare", r.total_welfare), ("alloc_rate", r.alloc_rate)] {
            out.write_record([r.mechanism.as_str(), r.regime.as_str(), name, &e.mean.to_string(), &e.stderr.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
