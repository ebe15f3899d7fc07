use std::io::Write;

use crate::optim::OptimizationTrace;

/// Writes one row per step: step, η, every loss term, then `x, y, z, k,
/// yaw` for each layout id seen in the trace (empty when absent).
pub fn write_trace_csv<W: Write>(trace: &OptimizationTrace, out: W) -> Result<(), csv::Error> {
    let mut ids: Vec<String> = Vec::new();
    for row in &trace.rows {
        for p in &row.poses {
            if !ids.contains(&p.id) {
                ids.push(p.id.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["step", "eta", "total", "global", "reg", "sds_instance", "layout", "refine"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for id in &ids {
        for f in ["x", "y", "z", "k", "yaw"] {
            header.push(format!("{id}.{f}"));
        }
    }
    w.write_record(&header)?;
    for row in &trace.rows {
        let t = &row.report.terms;
        let mut rec = vec![
            row.step.to_string(),
            row.eta.to_string(),
            row.report.total.to_string(),
            t.global.to_string(),
            t.reg.to_string(),
            t.sds_instance.iter().sum::<f64>().to_string(),
            t.layout.iter().sum::<f64>().to_string(),
            t.refine.iter().sum::<f64>().to_string(),
        ];
        for id in &ids {
            match row.poses.iter().find(|p| &p.id == id) {
                Some(p) => rec.extend([p.center.x, p.center.y, p.center.z, p.scale_factor, p.yaw].map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
