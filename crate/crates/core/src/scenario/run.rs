//! The scenario driver: builds the network, schedules flow and source
//! lifecycles, pumps the event loop, generates acks at sinks, and assembles
//! the metrics log. One call = one isolated, deterministic simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::flow::{FastFlow, FlowConfig, UpdateMode};
use crate::model::FlowParams;
use crate::sim::{Agent, ControlEvent, Engine, Packet, PacketKind, SimTime, Step};
use crate::traffic::{ParetoOnOffConfig, ParetoSource};

use super::build::{build, BuiltTopology};
use super::metrics::{Collector, MetricsLog, SummaryInputs};
use super::spec::{ScenarioError, ScenarioSpec};

/// Per-source seed separation for background generators.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn run_scenario(spec: &ScenarioSpec) -> Result<MetricsLog, ScenarioError> {
    let mut engine = Engine::new();
    engine.set_max_events(spec.max_events);
    if spec.trace {
        engine.enable_trace();
    }
    let built: BuiltTopology = build(&mut engine, spec);
    let duration = SimTime::from_secs_f64(spec.duration);

    // Start-time jitter is drawn from the run seed, flows in index order.
    let mut jitter_rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut flows: Vec<FastFlow> = Vec::with_capacity(spec.flows.len());
    let mut flow_spans: Vec<(f64, f64)> = Vec::with_capacity(spec.flows.len());
    for (i, fs) in spec.flows.iter().enumerate() {
        let jitter = if fs.start_jitter > 0.0 {
            jitter_rng.gen::<f64>() * fs.start_jitter
        } else {
            0.0
        };
        let start = (fs.start_time + jitter).min(spec.duration);
        let end = fs.stop_time.unwrap_or(spec.duration).min(spec.duration);
        flow_spans.push((start, end));

        let params = FlowParams::new(fs.alpha, fs.gamma)
            .map_err(|e| ScenarioError::Validation(vec![format!("flow.{i}: {e}")]))?;
        let mut cfg = FlowConfig::new(params);
        cfg.rtt_ewma_weight = fs.rtt_ewma_weight;
        cfg.update_mode = match fs.fixed_update_interval {
            None => UpdateMode::PerRtt,
            Some(s) => UpdateMode::Fixed(SimTime::from_secs_f64(s)),
        };
        cfg.start_time = SimTime::from_secs_f64(start);
        cfg.stop_time = fs.stop_time.map(SimTime::from_secs_f64);
        cfg.oracle_base_rtt = fs.oracle_base_rtt.then_some(built.true_rtt[i]);
        cfg.slow_start = fs.slow_start;
        cfg.remedy = fs.remedy.clone();
        cfg.packet_size = spec.packet_size;
        cfg.ack_size = spec.ack_size;
        let (fwd, rev) = built.flow_paths[i];
        flows.push(FastFlow::new(i as u32, cfg, fwd, rev));

        engine.schedule(SimTime::from_secs_f64(start), ControlEvent::FlowStart(i as u32))?;
        if let Some(stop) = fs.stop_time {
            if stop < spec.duration {
                engine.schedule(SimTime::from_secs_f64(stop), ControlEvent::FlowStop(i as u32))?;
            }
        }
    }

    let mut sources: Vec<ParetoSource> = Vec::new();
    if let (Some(bg), Some(path)) = (&spec.background, built.background_path) {
        for k in 0..bg.count {
            let cfg = ParetoOnOffConfig {
                shape: bg.shape,
                mean_burst: bg.mean_burst,
                mean_idle: bg.mean_idle,
                peak_rate: bg.peak_rate,
                packet_size: spec.packet_size,
                seed: bg.seed.wrapping_add(k as u64 * SEED_STRIDE),
            };
            let mut src = ParetoSource::new(k as u32, cfg, path);
            src.start(&mut engine);
            sources.push(src);
        }
    }

    let sample_tick = SimTime::from_secs_f64(spec.metrics.sample_interval);
    let window_tick = SimTime::from_secs_f64(spec.metrics.throughput_window);
    engine.schedule(sample_tick, ControlEvent::MetricsTick)?;
    engine.schedule(window_tick, ControlEvent::ThroughputTick)?;

    let mut collector = Collector::new(flows.len(), spec.metrics.throughput_window);

    loop {
        match engine.next_step(duration)? {
            Step::Delivered(pkt) => match pkt.kind {
                PacketKind::Data => {
                    let Agent::Flow(id) = pkt.owner else { unreachable!("data from a source") };
                    collector.on_data_delivery(id);
                    let rev = flows[id as usize].rev_path;
                    engine.inject(Packet {
                        owner: pkt.owner,
                        kind: PacketKind::Ack,
                        seq: pkt.seq,
                        size: spec.ack_size,
                        sent_at: pkt.sent_at,
                        path: rev,
                        hop: 0,
                    });
                }
                PacketKind::Ack => {
                    let Agent::Flow(id) = pkt.owner else { unreachable!("ack without a flow") };
                    let sample = (engine.now() - pkt.sent_at).as_secs_f64();
                    if let Some(outcome) = flows[id as usize].on_ack(&mut engine, pkt.seq, sample) {
                        collector.on_probe(&outcome);
                    }
                }
                PacketKind::Background => {}
            },
            Step::Control(ev) => match ev {
                ControlEvent::FlowStart(id) => flows[id as usize].start(&mut engine),
                ControlEvent::FlowStop(id) => flows[id as usize].stop(),
                ControlEvent::FlowTimer { flow, token } => {
                    if let Some(outcome) = flows[flow as usize].on_timer(&mut engine, token) {
                        collector.on_probe(&outcome);
                    }
                }
                ControlEvent::SourceToggle(id) => sources[id as usize].on_toggle(&mut engine),
                ControlEvent::SourceEmit(id) => sources[id as usize].on_emit(&mut engine),
                ControlEvent::MetricsTick => {
                    let now = engine.now().as_secs_f64();
                    let queues = built
                        .shared_links
                        .iter()
                        .map(|l| (l.0, engine.link(*l).occupancy() as f64))
                        .collect::<Vec<_>>();
                    let rtts = flows
                        .iter()
                        .map(|f| (f.id, f.base_rtt))
                        .collect::<Vec<_>>();
                    collector.on_sample_tick(now, queues.into_iter(), rtts.into_iter());
                    engine.run_trace_checks();
                    let next = engine.now() + sample_tick;
                    if next <= duration {
                        engine.schedule(next, ControlEvent::MetricsTick)?;
                    }
                }
                ControlEvent::ThroughputTick => {
                    collector.on_throughput_tick(engine.now().as_secs_f64());
                    let next = engine.now() + window_tick;
                    if next <= duration {
                        engine.schedule(next, ControlEvent::ThroughputTick)?;
                    }
                }
            },
            Step::Done => break,
        }
    }

    // Nominal settled RTT: slowest true path plus the model-predicted queue.
    let max_rtt = built.true_rtt.iter().copied().fold(0.0, f64::max);
    let mean_alpha = if flows.is_empty() {
        50.0
    } else {
        flows.iter().map(|f| f.alpha()).sum::<f64>() / flows.len() as f64
    };
    let pps = spec.bottleneck_pps();
    let model_queue = crate::model::sequential_queue_length(flows.len().max(1), mean_alpha)
        .unwrap_or(mean_alpha);
    let rtt_nominal = max_rtt + model_queue / pps;

    let inputs = SummaryInputs {
        flow_spans: &flow_spans,
        tail_fraction: spec.metrics.tail_fraction,
        rtt_nominal,
        bottleneck_link: built.bottleneck.0,
        bottleneck_pps: pps,
        duration: spec.duration,
        seed: spec.seed,
    };
    let mut log = collector.finish(&inputs);

    let stats = engine.stats;
    log.summary.injected = stats.injected;
    log.summary.delivered = stats.delivered;
    log.summary.dropped = stats.dropped;
    log.summary.conservation_ok =
        stats.injected == stats.delivered + stats.dropped + engine.total_queued() + engine.on_wire();
    engine.run_trace_checks();
    log.summary.trace_ok = engine.trace().map(|t| t.passed());
    log.summary.flow_drops =
        flows.iter().map(|f| engine.drops_for(Agent::Flow(f.id))).collect();
    log.summary.base_rtt_final =
        flows.iter().map(|f| f.base_rtt.unwrap_or(f64::NAN)).collect();
    log.summary.events_dispatched = engine.events_dispatched();
    Ok(log)
}

/// Parses and runs in one step.
pub fn run_scenario_text(text: &str) -> Result<MetricsLog, ScenarioError> {
    let spec = ScenarioSpec::parse(text)?;
    run_scenario(&spec)
}

/// Runs a lone flow through a dumbbell and reports (tail rate in packets per
/// second, mean bottleneck occupancy in packets). At equilibrium the rate
/// matches the bottleneck capacity and the queue holds alpha packets.
pub fn single_flow_equilibrium(
    alpha: f64,
    bottleneck_rate_bps: f64,
    bottleneck_delay_s: f64,
    duration: f64,
) -> Result<(f64, f64), ScenarioError> {
    let text = format!(
        "topology.kind=dumbbell\n\
         topology.bottleneck_rate={bottleneck_rate_bps}\n\
         topology.bottleneck_delay={bottleneck_delay_s}\n\
         duration={duration}\n\
         seed=1\n\
         flow.0.alpha={alpha}\n"
    );
    let log = run_scenario_text(&text)?;
    Ok((log.summary.flow_rate[0], log.summary.queue_mean))
}
