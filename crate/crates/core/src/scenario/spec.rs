//! Scenario files: line-oriented `dotted.key=value` text, parsed into a
//! validated [`ScenarioSpec`]. Later lines win, which is also how sweeps
//! override an axis. Rates are given in bits/second; the conversion to
//! packets/second happens once here and is echoed into the run summary.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::remedy::{RemedyConfig, RemedyKind};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("simulation failed: {0}")]
    Sim(#[from] crate::sim::SimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Dumbbell {
        bottleneck_rate_bps: f64,
        /// One-way bottleneck propagation delay, seconds.
        bottleneck_delay_s: f64,
        access_rate_bps: f64,
        access_delay_s: f64,
    },
    ParkingLot {
        /// Chain links between the entry router and the destination.
        hop_count: usize,
        link_rate_bps: f64,
        link_delay_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub start_time: f64,
    /// Uniform jitter in [0, j) added to the start time, drawn from the run seed.
    pub start_jitter: f64,
    pub stop_time: Option<f64>,
    pub rtt_ewma_weight: f64,
    /// None = per-RTT updates; Some(s) = fixed interval.
    pub fixed_update_interval: Option<f64>,
    pub remedy: RemedyConfig,
    /// Preset the base RTT to the true empty-network RTT of the flow's path.
    pub oracle_base_rtt: bool,
    /// Parking-lot entry router, 1-based. Ignored for dumbbells.
    pub entry_hop: usize,
    /// Per-flow access-link one-way delay override, seconds. Lets flows have
    /// heterogeneous propagation delays on a shared bottleneck.
    pub access_delay: Option<f64>,
    pub slow_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSpec {
    pub count: usize,
    pub shape: f64,
    pub mean_burst: f64,
    pub mean_idle: f64,
    pub peak_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSpec {
    pub sample_interval: f64,
    pub throughput_window: f64,
    /// Fraction of each flow's lifetime kept as its summary tail.
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub topology: TopologySpec,
    pub flows: Vec<FlowSpec>,
    pub background: Option<BackgroundSpec>,
    pub duration: f64,
    pub seed: u64,
    pub packet_size: u32,
    pub ack_size: u32,
    /// Bottleneck-side queue capacity in packets; 0 = unbounded.
    pub buffer_capacity: usize,
    pub metrics: MetricsSpec,
    pub max_events: u64,
    /// Run the independent trace checker alongside the simulation.
    pub trace: bool,
}

impl ScenarioSpec {
    /// Bottleneck capacity in packets/second for the configured packet size.
    pub fn bottleneck_pps(&self) -> f64 {
        let bps = match self.topology {
            TopologySpec::Dumbbell { bottleneck_rate_bps, .. } => bottleneck_rate_bps,
            TopologySpec::ParkingLot { link_rate_bps, .. } => link_rate_bps,
        };
        bps / (8.0 * self.packet_size as f64)
    }

    pub fn parse(text: &str) -> Result<ScenarioSpec, ScenarioError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut errors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    map.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => errors.push(format!("line {}: expected key=value, got {line:?}", lineno + 1)),
            }
        }
        if !errors.is_empty() {
            return Err(ScenarioError::Validation(errors));
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<ScenarioSpec, ScenarioError> {
        let mut errors: Vec<String> = Vec::new();
        for key in map.keys() {
            if !key_is_known(key) {
                errors.push(format!("{key}: unknown key"));
            }
        }

        let get = |key: &str| -> Option<String> { map.get(key).cloned() };

        fn parse_num<T: std::str::FromStr>(
            errors: &mut Vec<String>,
            key: &str,
            value: Option<String>,
            default: T,
        ) -> T {
            match value {
                None => default,
                Some(s) => s.parse::<T>().unwrap_or_else(|_| {
                    errors.push(format!("{key}: cannot parse {s:?}"));
                    default
                }),
            }
        }
        // f64 parsing that accepts 100e6 style exponents comes with FromStr.
        let kind = get("topology.kind").unwrap_or_else(|| "dumbbell".into());
        let topology = match kind.as_str() {
            "dumbbell" => TopologySpec::Dumbbell {
                bottleneck_rate_bps: parse_num(&mut errors, "topology.bottleneck_rate", get("topology.bottleneck_rate"), 100e6),
                bottleneck_delay_s: parse_num(&mut errors, "topology.bottleneck_delay", get("topology.bottleneck_delay"), 5e-3),
                access_rate_bps: parse_num(&mut errors, "topology.access_rate", get("topology.access_rate"), 1e9),
                access_delay_s: parse_num(&mut errors, "topology.access_delay", get("topology.access_delay"), 1e-3),
            },
            "parking_lot" => TopologySpec::ParkingLot {
                hop_count: parse_num(&mut errors, "topology.hop_count", get("topology.hop_count"), 5usize),
                link_rate_bps: parse_num(&mut errors, "topology.link_rate", get("topology.link_rate"), 100e6),
                link_delay_s: parse_num(&mut errors, "topology.link_delay", get("topology.link_delay"), 5e-3),
            },
            other => {
                errors.push(format!("topology.kind: unknown kind {other:?}"));
                TopologySpec::Dumbbell {
                    bottleneck_rate_bps: 100e6,
                    bottleneck_delay_s: 5e-3,
                    access_rate_bps: 1e9,
                    access_delay_s: 1e-3,
                }
            }
        };

        let packet_size: u32 = parse_num(&mut errors, "packet_size", get("packet_size"), 1000);
        let ack_size: u32 = parse_num(&mut errors, "ack_size", get("ack_size"), 40);
        let duration: f64 = parse_num(&mut errors, "duration", get("duration"), 30.0);
        let seed: u64 = parse_num(&mut errors, "seed", get("seed"), 1);
        let buffer_capacity: usize =
            parse_num(&mut errors, "topology.buffer_capacity", get("topology.buffer_capacity"), 0);
        let max_events: u64 = parse_num(&mut errors, "max_events", get("max_events"), 2_000_000_000);
        let trace: bool = parse_num(&mut errors, "trace", get("trace"), true);

        let metrics = MetricsSpec {
            sample_interval: parse_num(&mut errors, "metrics.sample_interval", get("metrics.sample_interval"), 0.1),
            throughput_window: parse_num(&mut errors, "metrics.throughput_window", get("metrics.throughput_window"), 0.5),
            tail_fraction: parse_num(&mut errors, "metrics.tail_fraction", get("metrics.tail_fraction"), 0.5),
        };

        // Flows: indices must be dense from 0.
        let mut flow_count = 0usize;
        for key in map.keys() {
            if let Some(rest) = key.strip_prefix("flow.") {
                if let Some((idx, _)) = rest.split_once('.') {
                    if let Ok(i) = idx.parse::<usize>() {
                        flow_count = flow_count.max(i + 1);
                    } else {
                        errors.push(format!("{key}: flow index must be an integer"));
                    }
                }
            }
        }
        let mut flows = Vec::with_capacity(flow_count);
        for i in 0..flow_count {
            let f = |suffix: &str| format!("flow.{i}.{suffix}");
            let fget = |suffix: &str| map.get(&f(suffix)).cloned();
            let alpha: f64 = parse_num(&mut errors, &f("alpha"), fget("alpha"), 50.0);
            let gamma: f64 = parse_num(&mut errors, &f("gamma"), fget("gamma"), 0.5);
            let start_time: f64 = parse_num(&mut errors, &f("start_time"), fget("start_time"), 0.0);
            let start_jitter: f64 = parse_num(&mut errors, &f("start_jitter"), fget("start_jitter"), 0.0);
            let stop_time: Option<f64> = fget("stop_time")
                .map(|s| parse_num(&mut errors, &f("stop_time"), Some(s), f64::INFINITY));
            let rtt_ewma_weight: f64 =
                parse_num(&mut errors, &f("rtt_ewma_weight"), fget("rtt_ewma_weight"), 0.25);
            let update_mode = fget("update_mode").unwrap_or_else(|| "per_rtt".into());
            let fixed_update_interval = match update_mode.as_str() {
                "per_rtt" => None,
                s => match s.strip_prefix("fixed:") {
                    Some(secs) => match secs.parse::<f64>() {
                        Ok(v) if v > 0.0 => Some(v),
                        _ => {
                            errors.push(format!("{}: bad fixed interval {s:?}", f("update_mode")));
                            None
                        }
                    },
                    None => {
                        errors.push(format!("{}: unknown mode {s:?}", f("update_mode")));
                        None
                    }
                },
            };
            let remedy_kind = fget("remedy").unwrap_or_else(|| "none".into());
            let mut remedy = match remedy_kind.as_str() {
                "none" => RemedyConfig::none(),
                "rate_reduction" => RemedyConfig::rate_reduction(),
                "delay_probe" => RemedyConfig::delay_probe(),
                other => {
                    errors.push(format!("{}: unknown remedy {other:?}", f("remedy")));
                    RemedyConfig::none()
                }
            };
            remedy.theta = parse_num(&mut errors, &f("remedy.theta"), fget("remedy.theta"), remedy.theta);
            remedy.t_eps_rtts =
                parse_num(&mut errors, &f("remedy.t_eps_rtts"), fget("remedy.t_eps_rtts"), remedy.t_eps_rtts);
            remedy.settle_window =
                parse_num(&mut errors, &f("remedy.settle_window"), fget("remedy.settle_window"), remedy.settle_window);
            remedy.settle_tol =
                parse_num(&mut errors, &f("remedy.settle_tol"), fget("remedy.settle_tol"), remedy.settle_tol);
            // The throttle divisor defaults to the alpha threshold.
            remedy.scale_factor =
                parse_num(&mut errors, &f("remedy.scale_factor"), fget("remedy.scale_factor"), alpha);
            remedy.throttle_duration_rtts = parse_num(
                &mut errors,
                &f("remedy.throttle_duration_rtts"),
                fget("remedy.throttle_duration_rtts"),
                remedy.throttle_duration_rtts,
            );
            remedy.max_retries =
                parse_num(&mut errors, &f("remedy.max_retries"), fget("remedy.max_retries"), remedy.max_retries);
            let oracle_base_rtt: bool =
                parse_num(&mut errors, &f("oracle_base_rtt"), fget("oracle_base_rtt"), false);
            let entry_hop: usize = parse_num(&mut errors, &f("entry"), fget("entry"), 1);
            let access_delay: Option<f64> = fget("access_delay")
                .map(|s| parse_num(&mut errors, &f("access_delay"), Some(s), 1e-3));
            let slow_start: bool = parse_num(&mut errors, &f("slow_start"), fget("slow_start"), false);

            // Domain checks mirror the model-type invariants.
            if !(alpha > 0.0) {
                errors.push(format!("{}: alpha must be > 0", f("alpha")));
            }
            if !(gamma > 0.0 && gamma <= 1.0) {
                errors.push(format!("{}: gamma must be in (0, 1]", f("gamma")));
            }
            if !(start_time >= 0.0) || start_time >= duration {
                errors.push(format!("{}: start_time must lie in [0, duration)", f("start_time")));
            }
            if remedy.kind != RemedyKind::None && remedy.theta.abs() < 0.1 {
                // Estimates degrade near zero; allowed, but the spec flags it.
                // (Not an error: the theta sweep exercises this on purpose.)
            }
            if remedy.kind != RemedyKind::None
                && (remedy.theta == 0.0 || remedy.theta >= 1.0 || remedy.theta < -1.0)
            {
                errors.push(format!("{}: theta must be in [-1, 1) and nonzero", f("remedy.theta")));
            }
            if remedy.scale_factor <= 1.0 {
                errors.push(format!("{}: scale_factor must be > 1", f("remedy.scale_factor")));
            }
            if remedy.t_eps_rtts <= 0.0 {
                errors.push(format!("{}: t_eps_rtts must be > 0", f("remedy.t_eps_rtts")));
            }

            flows.push(FlowSpec {
                alpha,
                gamma,
                start_time,
                start_jitter,
                stop_time,
                rtt_ewma_weight,
                fixed_update_interval,
                remedy,
                oracle_base_rtt,
                entry_hop,
                access_delay,
                slow_start,
            });
        }

        let background = if map.keys().any(|k| k.starts_with("background.")) {
            let count: usize = parse_num(&mut errors, "background.count", get("background.count"), 1);
            let bg = BackgroundSpec {
                count,
                shape: parse_num(&mut errors, "background.shape", get("background.shape"), 1.5),
                mean_burst: parse_num(&mut errors, "background.mean_burst", get("background.mean_burst"), 0.1),
                mean_idle: parse_num(&mut errors, "background.mean_idle", get("background.mean_idle"), 0.1),
                peak_rate: parse_num(&mut errors, "background.peak_rate", get("background.peak_rate"), 1e6),
                seed: parse_num(&mut errors, "background.seed", get("background.seed"), seed),
            };
            if !(bg.shape > 1.0) {
                errors.push("background.shape: must be > 1".into());
            }
            if !(bg.mean_burst > 0.0 && bg.mean_idle > 0.0 && bg.peak_rate > 0.0) {
                errors.push("background: burst/idle/peak must be > 0".into());
            }
            if count == 0 { None } else { Some(bg) }
        } else {
            None
        };

        if !(duration > 0.0) {
            errors.push("duration: must be > 0".into());
        }
        if packet_size == 0 {
            errors.push("packet_size: must be > 0".into());
        }
        match topology {
            TopologySpec::Dumbbell { bottleneck_rate_bps, access_rate_bps, .. } => {
                if !(bottleneck_rate_bps > 0.0 && access_rate_bps > 0.0) {
                    errors.push("topology: rates must be > 0".into());
                }
            }
            TopologySpec::ParkingLot { hop_count, link_rate_bps, .. } => {
                if hop_count == 0 {
                    errors.push("topology.hop_count: must be >= 1".into());
                }
                if !(link_rate_bps > 0.0) {
                    errors.push("topology.link_rate: must be > 0".into());
                }
                for (i, fl) in flows.iter().enumerate() {
                    if fl.entry_hop == 0 || fl.entry_hop > hop_count {
                        errors.push(format!("flow.{i}.entry: must be in 1..={hop_count}"));
                    }
                }
            }
        }
        if flows.is_empty() && background.is_none() {
            errors.push("scenario has neither flows nor background traffic".into());
        }

        if !errors.is_empty() {
            return Err(ScenarioError::Validation(errors));
        }
        Ok(ScenarioSpec {
            topology,
            flows,
            background,
            duration,
            seed,
            packet_size,
            ack_size,
            buffer_capacity,
            metrics,
            max_events,
            trace,
        })
    }
}

/// Recognized scenario keys; anything else is a validation error (this is
/// also what rejects a bad sweep axis).
fn key_is_known(key: &str) -> bool {
    const TOP: &[&str] = &[
        "topology.kind",
        "topology.bottleneck_rate",
        "topology.bottleneck_delay",
        "topology.access_rate",
        "topology.access_delay",
        "topology.hop_count",
        "topology.link_rate",
        "topology.link_delay",
        "topology.buffer_capacity",
        "packet_size",
        "ack_size",
        "duration",
        "seed",
        "max_events",
        "trace",
        "metrics.sample_interval",
        "metrics.throughput_window",
        "metrics.tail_fraction",
    ];
    const FLOW: &[&str] = &[
        "alpha",
        "gamma",
        "start_time",
        "start_jitter",
        "stop_time",
        "rtt_ewma_weight",
        "update_mode",
        "remedy",
        "remedy.theta",
        "remedy.t_eps_rtts",
        "remedy.settle_window",
        "remedy.settle_tol",
        "remedy.scale_factor",
        "remedy.throttle_duration_rtts",
        "remedy.max_retries",
        "oracle_base_rtt",
        "entry",
        "access_delay",
        "slow_start",
    ];
    const BACKGROUND: &[&str] =
        &["count", "shape", "mean_burst", "mean_idle", "peak_rate", "seed"];
    if TOP.contains(&key) {
        return true;
    }
    if let Some(rest) = key.strip_prefix("flow.") {
        if let Some((idx, suffix)) = rest.split_once('.') {
            return idx.parse::<usize>().is_ok() && FLOW.contains(&suffix);
        }
        return false;
    }
    if let Some(rest) = key.strip_prefix("background.") {
        return BACKGROUND.contains(&rest);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = ScenarioSpec::parse("duration=10\nflow.0.alpha=50\nbogus.key=1\n").unwrap_err();
        let ScenarioError::Validation(msgs) = err else { panic!("wrong error kind") };
        assert!(msgs.iter().any(|m| m.contains("bogus.key")));
    }

    #[test]
    fn parses_minimal_dumbbell() {
        let text = "\
topology.kind=dumbbell
topology.bottleneck_rate=100e6
duration=10
seed=7
flow.0.alpha=50
flow.1.alpha=40
flow.1.start_time=2
";
        let spec = ScenarioSpec::parse(text).unwrap();
        assert_eq!(spec.flows.len(), 2);
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.flows[1].alpha, 40.0);
        assert!((spec.bottleneck_pps() - 12_500.0).abs() < 1e-9);
    }

    #[test]
    fn last_line_wins() {
        let text = "duration=10\nflow.0.alpha=50\nduration=20\n";
        let spec = ScenarioSpec::parse(text).unwrap();
        assert_eq!(spec.duration, 20.0);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# a comment\n\nduration=10 # trailing\nflow.0.alpha=50\n";
        let spec = ScenarioSpec::parse(text).unwrap();
        assert_eq!(spec.duration, 10.0);
    }

    #[test]
    fn validation_lists_offending_fields() {
        let text = "\
flow.0.alpha=-1
flow.0.gamma=2
flow.0.start_time=99
duration=10
";
        let err = ScenarioSpec::parse(text).unwrap_err();
        let ScenarioError::Validation(msgs) = err else { panic!("wrong error kind") };
        let joined = msgs.join("\n");
        assert!(joined.contains("flow.0.alpha"), "{joined}");
        assert!(joined.contains("flow.0.gamma"), "{joined}");
        assert!(joined.contains("flow.0.start_time"), "{joined}");
    }

    #[test]
    fn remedy_keys_apply() {
        let text = "\
duration=10
flow.0.alpha=50
flow.0.remedy=delay_probe
flow.0.remedy.theta=-0.3
flow.0.remedy.max_retries=1
";
        let spec = ScenarioSpec::parse(text).unwrap();
        assert_eq!(spec.flows[0].remedy.kind, RemedyKind::DelayProbe);
        assert_eq!(spec.flows[0].remedy.theta, -0.3);
        assert_eq!(spec.flows[0].remedy.max_retries, 1);
        assert_eq!(spec.flows[0].remedy.scale_factor, 50.0, "defaults to alpha");
    }

    #[test]
    fn parking_lot_entries_checked() {
        let text = "\
topology.kind=parking_lot
topology.hop_count=3
duration=10
flow.0.alpha=50
flow.0.entry=4
";
        assert!(ScenarioSpec::parse(text).is_err());
    }
}
