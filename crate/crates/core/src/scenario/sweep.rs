//! Parameter sweeps: one run per axis value, sharing a base scenario. Each
//! run gets the base seed plus its index (an explicit `seed` axis overrides
//! this). Runs execute in parallel but results keep axis-value order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::metrics::MetricsLog;
use super::run::run_scenario;
use super::spec::{ScenarioError, ScenarioSpec};

pub struct SweepRun {
    pub axis: String,
    pub value: String,
    /// Full scenario text for this run (base + overrides).
    pub text: String,
    pub log: MetricsLog,
}

/// Builds the per-run scenario texts. Separated from execution so callers can
/// inspect or persist them.
pub fn sweep_texts(
    base_text: &str,
    axis: &str,
    values: &[String],
) -> Result<Vec<(String, String)>, ScenarioError> {
    let base = ScenarioSpec::parse(base_text)?;
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        // The seed offset line comes first so an explicit seed axis wins.
        let text = format!(
            "{base_text}\nseed={}\n{axis}={v}\n",
            base.seed.wrapping_add(i as u64)
        );
        // Parse now: an unknown axis or a bad value fails before any run starts.
        ScenarioSpec::parse(&text)?;
        out.push((v.clone(), text));
    }
    Ok(out)
}

/// Runs the sweep on up to `jobs` worker threads (0 or 1 = sequential).
pub fn sweep(
    base_text: &str,
    axis: &str,
    values: &[String],
    jobs: usize,
) -> Result<Vec<SweepRun>, ScenarioError> {
    let texts = sweep_texts(base_text, axis, values)?;
    let n = texts.len();
    let results: Vec<Mutex<Option<Result<MetricsLog, ScenarioError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(n.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let run = ScenarioSpec::parse(&texts[i].1).and_then(|spec| run_scenario(&spec));
                *results[i].lock().expect("sweep result slot") = Some(run);
            });
        }
    });

    let mut out = Vec::with_capacity(n);
    for (slot, (value, text)) in results.into_iter().zip(texts) {
        let log = slot.into_inner().expect("sweep slot lock").expect("sweep slot filled")?;
        out.push(SweepRun { axis: axis.to_string(), value, text, log });
    }
    Ok(out)
}

/// Flat per-point summary table for the sweep, one row per axis value.
pub fn sweep_csv(runs: &[SweepRun]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["axis", "value", "fairness_ratio", "queue_mean", "newcomer_rate", "probe_n_hat"])
        .expect("csv header");
    for r in runs {
        let s = &r.log.summary;
        let newcomer_rate = s
            .newcomer
            .and_then(|nc| s.flow_rate.get(nc as usize))
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        let n_hat = r
            .log
            .probes
            .iter()
            .rev()
            .find_map(|p| p.n_hat)
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        w.write_record([
            r.axis.clone(),
            r.value.clone(),
            s.fairness_ratio.map(|v| format!("{v:.6}")).unwrap_or_default(),
            format!("{:.6}", s.queue_mean),
            newcomer_rate,
            n_hat,
        ])
        .expect("csv row");
    }
    w.into_inner().expect("csv flush")
}
