//! Metric collection during a run and the end-of-run summary.
//!
//! Series are sampled on two cadences: queue occupancy and base-RTT
//! trajectories every `sample_interval`, per-flow throughput as delivered
//! packets averaged over `throughput_window`. Summary statistics are taken
//! over a tail interval that excludes transients: for each flow, the later of
//! half its lifetime and ten nominal RTTs past the last join.

use crate::remedy::ProbeOutcome;

/// Ten RTTs past the last join must have elapsed before any tail begins.
const TAIL_SETTLE_RTTS: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct ProbeRecord {
    pub at: f64,
    pub flow: u32,
    pub status: &'static str,
    pub theta: f64,
    pub delta_r: f64,
    pub n_hat: Option<f64>,
    pub n_rounded: Option<u64>,
    pub c_hat: Option<f64>,
    pub d_corrected: Option<f64>,
    pub w_reset: Option<f64>,
}

impl ProbeRecord {
    pub fn from_outcome(out: &ProbeOutcome) -> Self {
        ProbeRecord {
            at: out.at.as_secs_f64(),
            flow: out.flow,
            status: out.status.as_str(),
            theta: out.theta,
            delta_r: out.delta_r,
            n_hat: out.inversion.map(|i| i.n_hat),
            n_rounded: out.inversion.map(|i| i.n_rounded),
            c_hat: out.inversion.map(|i| i.c_hat),
            d_corrected: out.inversion.map(|i| i.d_corrected),
            w_reset: out.inversion.map(|i| i.w_reset),
        }
    }
}

/// Everything a run produces, ready for export or assertions.
#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    /// (window end, flow id, packets/second over the window)
    pub throughput_rows: Vec<(f64, u32, f64)>,
    /// (time, link id, packets at the node)
    pub queue_rows: Vec<(f64, u32, f64)>,
    /// (time, flow id, base RTT seconds)
    pub base_rtt_rows: Vec<(f64, u32, f64)>,
    pub probes: Vec<ProbeRecord>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub duration: f64,
    pub seed: u64,
    pub bottleneck_pps: f64,
    /// Global tail start (latest per-flow tail start), seconds.
    pub tail_start: f64,
    /// Mean delivered rate per flow over its tail, packets/second.
    pub flow_rate: Vec<f64>,
    /// `flow_rate` normalized by bottleneck capacity.
    pub flow_share: Vec<f64>,
    /// Index of the last flow to join, if any flows exist.
    pub newcomer: Option<u32>,
    /// n * newcomer rate / sum of incumbent rates.
    pub fairness_ratio: Option<f64>,
    /// Mean bottleneck occupancy over the global tail, packets.
    pub queue_mean: f64,
    pub flow_drops: Vec<u64>,
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub conservation_ok: bool,
    /// None when the trace checker was disabled.
    pub trace_ok: Option<bool>,
    /// Final base-RTT estimate per flow, seconds (NaN if never set).
    pub base_rtt_final: Vec<f64>,
    pub probe_count: usize,
    pub events_dispatched: u64,
}

/// Per-run context the summary needs beyond the raw series.
pub struct SummaryInputs<'a> {
    /// Actual (jittered) start and effective end per flow, seconds.
    pub flow_spans: &'a [(f64, f64)],
    pub tail_fraction: f64,
    /// Nominal settled RTT used for the ten-RTT settling guard.
    pub rtt_nominal: f64,
    pub bottleneck_link: u32,
    pub bottleneck_pps: f64,
    pub duration: f64,
    pub seed: u64,
}

pub struct Collector {
    window: f64,
    counts: Vec<u64>,
    pub log: MetricsLog,
}

impl Collector {
    pub fn new(flows: usize, window: f64) -> Self {
        Collector { window, counts: vec![0; flows], log: MetricsLog::default() }
    }

    pub fn on_data_delivery(&mut self, flow: u32) {
        self.counts[flow as usize] += 1;
    }

    pub fn on_throughput_tick(&mut self, now: f64) {
        for (i, c) in self.counts.iter_mut().enumerate() {
            self.log.throughput_rows.push((now, i as u32, *c as f64 / self.window));
            *c = 0;
        }
    }

    pub fn on_sample_tick(
        &mut self,
        now: f64,
        queues: impl Iterator<Item = (u32, f64)>,
        base_rtts: impl Iterator<Item = (u32, Option<f64>)>,
    ) {
        for (link, occ) in queues {
            self.log.queue_rows.push((now, link, occ));
        }
        for (flow, rtt) in base_rtts {
            if let Some(r) = rtt {
                self.log.base_rtt_rows.push((now, flow, r));
            }
        }
    }

    pub fn on_probe(&mut self, out: &ProbeOutcome) {
        self.log.probes.push(ProbeRecord::from_outcome(out));
    }

    /// Fills in the summary from the collected series.
    pub fn finish(mut self, inp: &SummaryInputs<'_>) -> MetricsLog {
        let n = inp.flow_spans.len();
        let last_join =
            inp.flow_spans.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        let settle_floor = if n == 0 {
            0.0
        } else {
            last_join + TAIL_SETTLE_RTTS * inp.rtt_nominal
        };

        let mut flow_rate = vec![f64::NAN; n];
        let mut tail_start_global: f64 = 0.0;
        for (i, (s, e)) in inp.flow_spans.iter().enumerate() {
            let tail_start = (s + inp.tail_fraction * (e - s)).max(settle_floor);
            tail_start_global = tail_start_global.max(tail_start);
            let mut sum = 0.0;
            let mut k = 0u64;
            for (t, flow, v) in &self.log.throughput_rows {
                if *flow == i as u32 && *t - 1e-9 > tail_start && *t <= e + 1e-9 {
                    sum += v;
                    k += 1;
                }
            }
            if k > 0 {
                flow_rate[i] = sum / k as f64;
            }
        }

        let newcomer = inp
            .flow_spans
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i as u32);
        let fairness_ratio = newcomer.and_then(|nc| {
            let old: Vec<f64> = (0..n)
                .filter(|i| *i as u32 != nc && flow_rate[*i].is_finite())
                .map(|i| flow_rate[i])
                .collect();
            if old.is_empty() || !flow_rate[nc as usize].is_finite() {
                return None;
            }
            crate::model::fairness_ratio(flow_rate[nc as usize], &old).ok()
        });

        let mut qsum = 0.0;
        let mut qn = 0u64;
        for (t, link, v) in &self.log.queue_rows {
            if *link == inp.bottleneck_link && *t >= tail_start_global {
                qsum += v;
                qn += 1;
            }
        }

        self.log.summary = Summary {
            duration: inp.duration,
            seed: inp.seed,
            bottleneck_pps: inp.bottleneck_pps,
            tail_start: tail_start_global,
            flow_share: flow_rate.iter().map(|r| r / inp.bottleneck_pps).collect(),
            flow_rate,
            newcomer,
            fairness_ratio,
            queue_mean: if qn > 0 { qsum / qn as f64 } else { f64::NAN },
            flow_drops: Vec::new(),
            injected: 0,
            delivered: 0,
            dropped: 0,
            conservation_ok: false,
            trace_ok: None,
            base_rtt_final: Vec::new(),
            probe_count: self.log.probes.len(),
            events_dispatched: 0,
        };
        self.log
    }
}
