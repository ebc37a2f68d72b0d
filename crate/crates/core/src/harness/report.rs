use std::io::Write;

use super::evaluate::{Correlation, EvaluationReport, SweepRow};
use super::kpi::{KpiRecord, KpiSummary};
use super::relocation::RelocationReport;
use crate::network::TrafficNetwork;
use crate::Result;

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per run.
pub fn write_kpi_csv<W: Write>(records: &[KpiRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "mean_delay_s",
        "no_completed_trips",
        "throughput",
        "departures",
        "co2_kg",
        "bc_g",
        "mean_queue_veh",
        "gridlock_s",
    ])?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.mean_delay.to_string(),
            r.no_completed_trips.to_string(),
            r.throughput.to_string(),
            r.departures.to_string(),
            r.co2.to_string(),
            r.bc.to_string(),
            r.mean_queue.to_string(),
            opt(r.gridlock),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-run, per-link mean queue and per-junction emissions in long form.
pub fn write_detail_csv<W: Write>(records: &[KpiRecord], net: &TrafficNetwork, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "scope", "metric", "value"])?;
    for r in records {
        let seed = r.seed.to_string();
        for (l, q) in r.queue_per_link.iter().enumerate() {
            w.write_record([&seed, &format!("link:{}", net.links[l].id), "mean_queue_veh", &q.to_string()])?;
        }
        for (j, e) in r.junction_emissions.iter().enumerate() {
            let scope = format!("junction:{}", net.junctions[j].junction_id);
            w.write_record([&seed, &scope, "co2_kg", &e.co2.to_string()])?;
            w.write_record([&seed, &scope, "bc_g", &e.bc.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Paired per-seed rows: baseline, candidate and reduction for each KPI.
pub fn write_evaluation_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["seed".to_string()];
    for f in KpiSummary::FIELDS {
        header.extend([format!("baseline_{f}"), format!("ndr_{f}"), format!("reduction_{f}")]);
    }
    w.write_record(&header)?;
    for ((seed, b), c) in report.seeds.iter().zip(&report.baseline).zip(&report.candidate) {
        let mut row = vec![seed.to_string()];
        let (b, c) = (KpiSummary::of(b).values(), KpiSummary::of(c).values());
        for i in 0..b.len() {
            row.extend([b[i].to_string(), c[i].to_string(), (b[i] - c[i]).to_string()]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_corr(c: &Option<Correlation>) -> String {
    match c {
        Some(c) => format!("r = {:.3}, p = {:.3} (n = {})", c.r, c.p_value, c.n),
        None => "undefined (constant series or n < 3)".into(),
    }
}

/// Human-readable summary of a paired evaluation.
pub fn write_evaluation_summary<W: Write>(report: &EvaluationReport, mut out: W) -> Result<()> {
    writeln!(out, "{} paired runs", report.seeds.len())?;
    writeln!(
        out,
        "{:<12} {:>12} {:>12} {:>12} {:>9}",
        "kpi", "baseline", "ndr", "reduction", "percent"
    )?;
    let (b, c, d, p) = (
        report.baseline_mean.values(),
        report.candidate_mean.values(),
        report.delta.values(),
        report.percent.values(),
    );
    for (i, name) in KpiSummary::FIELDS.iter().enumerate() {
        writeln!(
            out,
            "{:<12} {:>12.3} {:>12.3} {:>12.3} {:>8.1}%",
            name, b[i], c[i], d[i], p[i]
        )?;
    }
    writeln!(out, "delay vs CO2 reduction: {}", fmt_corr(&report.delay_co2))?;
    writeln!(out, "delay vs BC reduction:  {}", fmt_corr(&report.delay_bc))?;
    Ok(())
}

/// Means per factor for both controllers, with increases relative to factor 1.0.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["factor".to_string(), "control".to_string()];
    for f in KpiSummary::FIELDS {
        header.extend([f.to_string(), format!("{f}_increase")]);
    }
    w.write_record(&header)?;
    for r in rows {
        for (control, mean, rel) in [
            ("baseline", &r.report.baseline_mean, &r.baseline_relative),
            ("ndr", &r.report.candidate_mean, &r.relative),
        ] {
            let mut row = vec![r.factor.to_string(), control.to_string()];
            for (m, x) in mean.values().iter().zip(rel.values()) {
                row.extend([m.to_string(), x.to_string()]);
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Means per layout and the B − A difference.
pub fn write_relocation_csv<W: Write>(report: &RelocationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["layout".to_string(), "control".to_string()];
    header.extend(KpiSummary::FIELDS.iter().map(|f| f.to_string()));
    w.write_record(&header)?;
    let rows = [
        ("A", "baseline", &report.a.baseline_mean),
        ("A", "ndr", &report.a.candidate_mean),
        ("B", "baseline", &report.b.baseline_mean),
        ("B", "ndr", &report.b.candidate_mean),
        ("B-A", "ndr", &report.delta),
    ];
    for (layout, control, s) in rows {
        let mut row = vec![layout.to_string(), control.to_string()];
        row.extend(s.values().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
