//! Run-directory export: scenario echo, one CSV per series type with a fixed
//! column order, probe events, and a flat key=value summary. All numeric
//! formatting is fixed-width so reruns with the same seed are byte-identical.

use std::fs;
use std::io;
use std::path::Path;

use super::metrics::{MetricsLog, Summary};

fn series_csv(rows: &[(f64, u32, f64)], id_column: &str, precision: usize) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", id_column, "value"]).expect("csv header");
    for (t, id, v) in rows {
        w.write_record([format!("{t:.6}"), id.to_string(), format!("{v:.prec$}", prec = precision)])
            .expect("csv row");
    }
    w.into_inner().expect("csv flush")
}

pub fn throughput_csv(log: &MetricsLog) -> Vec<u8> {
    series_csv(&log.throughput_rows, "flow_id", 6)
}

pub fn queue_csv(log: &MetricsLog) -> Vec<u8> {
    series_csv(&log.queue_rows, "queue_id", 6)
}

pub fn base_rtt_csv(log: &MetricsLog) -> Vec<u8> {
    series_csv(&log.base_rtt_rows, "flow_id", 9)
}

pub fn probes_csv(log: &MetricsLog) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "time", "flow_id", "status", "theta", "delta_r", "n_hat", "n_rounded", "c_hat",
        "d_corrected", "w_reset",
    ])
    .expect("csv header");
    let opt = |v: Option<f64>, prec: usize| match v {
        Some(x) => format!("{x:.prec$}", prec = prec),
        None => String::new(),
    };
    for p in &log.probes {
        w.write_record([
            format!("{:.6}", p.at),
            p.flow.to_string(),
            p.status.to_string(),
            format!("{:.6}", p.theta),
            format!("{:.9}", p.delta_r),
            opt(p.n_hat, 6),
            p.n_rounded.map(|n| n.to_string()).unwrap_or_default(),
            opt(p.c_hat, 3),
            opt(p.d_corrected, 9),
            opt(p.w_reset, 6),
        ])
        .expect("csv row");
    }
    w.into_inner().expect("csv flush")
}

pub fn summary_text(s: &Summary) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    kv("duration", format!("{:.6}", s.duration));
    kv("seed", s.seed.to_string());
    kv("bottleneck_pps", format!("{:.6}", s.bottleneck_pps));
    kv("tail_start", format!("{:.6}", s.tail_start));
    for (i, r) in s.flow_rate.iter().enumerate() {
        kv(&format!("flow.{i}.rate"), format!("{r:.6}"));
        kv(&format!("flow.{i}.share"), format!("{:.6}", s.flow_share[i]));
        kv(&format!("flow.{i}.drops"), s.flow_drops.get(i).copied().unwrap_or(0).to_string());
        kv(
            &format!("flow.{i}.base_rtt"),
            format!("{:.9}", s.base_rtt_final.get(i).copied().unwrap_or(f64::NAN)),
        );
    }
    if let Some(nc) = s.newcomer {
        kv("newcomer", nc.to_string());
    }
    if let Some(fr) = s.fairness_ratio {
        kv("fairness_ratio", format!("{fr:.6}"));
    }
    kv("queue_mean", format!("{:.6}", s.queue_mean));
    kv("injected", s.injected.to_string());
    kv("delivered", s.delivered.to_string());
    kv("dropped", s.dropped.to_string());
    kv("conservation_ok", s.conservation_ok.to_string());
    if let Some(t) = s.trace_ok {
        kv("trace_ok", t.to_string());
    }
    kv("probe_count", s.probe_count.to_string());
    kv("events", s.events_dispatched.to_string());
    out
}

/// Writes the whole run directory: scenario echo, series CSVs, probe events
/// and summary. Creates `dir` if needed.
pub fn write_run_dir(dir: &Path, scenario_text: &str, log: &MetricsLog) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.scn"), scenario_text)?;
    fs::write(dir.join("throughput.csv"), throughput_csv(log))?;
    fs::write(dir.join("queue.csv"), queue_csv(log))?;
    fs::write(dir.join("base_rtt.csv"), base_rtt_csv(log))?;
    fs::write(dir.join("probes.csv"), probes_csv(log))?;
    fs::write(dir.join("summary.txt"), summary_text(&log.summary))?;
    Ok(())
}
