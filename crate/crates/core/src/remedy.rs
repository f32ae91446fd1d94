//! Sender-side mechanisms against persistent congestion.
//!
//! Both remedies arm once per flow join and fire after the flow settles:
//!
//! - **Rate reduction**: scale the window down for a couple of RTTs so the
//!   bottleneck queue can drain and the running-minimum RTT sample catches
//!   the true propagation delay.
//! - **Delay probe**: hold the window at `(1 - theta) * w*` for `t_eps`,
//!   measure the RTT shift this induces, invert it into an estimated flow
//!   count and capacity, and subtract the implied queueing bias from the
//!   base-RTT estimate, resetting the window to the fair-share value.
//!
//! The probe measurement uses a marker packet: the first packet sent once the
//! hold interval has elapsed. Its raw RTT sample reflects the queue exactly
//! one perturbation interval after the hold began, which is what the
//! depletion balance describes. While a probe or throttle is in effect the
//! periodic window update is frozen.

use crate::flow::{FastFlow, CWND_FLOOR};
use crate::model::{self, ProbeInversion};
use crate::sim::{Agent, ControlEvent, Engine, SimTime};

/// Timer token reserved by the fixed-interval window updater.
pub const FIXED_UPDATE_TOKEN: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemedyKind {
    None,
    RateReduction,
    DelayProbe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemedyConfig {
    pub kind: RemedyKind,
    /// Window perturbation factor; negative grows the window.
    pub theta: f64,
    /// Probe duration in multiples of the settled RTT.
    pub t_eps_rtts: f64,
    /// Consecutive small-change updates needed to declare equilibrium.
    pub settle_window: u32,
    /// Bound on the estimated remaining distance to the window fixed point
    /// (per-update change divided by the per-update contraction).
    pub settle_tol: f64,
    /// Window divisor during the rate-reduction throttle.
    pub scale_factor: f64,
    /// Throttle length in multiples of the current RTT estimate.
    pub throttle_duration_rtts: f64,
    /// Extra probe attempts after a failed one (theta halves each retry).
    pub max_retries: u32,
}

impl RemedyConfig {
    pub fn none() -> Self {
        RemedyConfig {
            kind: RemedyKind::None,
            theta: -0.5,
            t_eps_rtts: 1.0,
            settle_window: 5,
            settle_tol: 0.02,
            scale_factor: 50.0,
            throttle_duration_rtts: 2.0,
            max_retries: 2,
        }
    }

    pub fn delay_probe() -> Self {
        RemedyConfig { kind: RemedyKind::DelayProbe, ..Self::none() }
    }

    pub fn rate_reduction() -> Self {
        RemedyConfig { kind: RemedyKind::RateReduction, ..Self::none() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStatus {
    Ok,
    /// Measured RTT change inconsistent with the perturbation sign.
    FailedSign,
    /// Inversion produced a negative propagation delay; not applied.
    Clamped,
    /// Packets were dropped during the probe window.
    AbortedDrops,
}

impl ProbeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeStatus::Ok => "ok",
            ProbeStatus::FailedSign => "failed_sign",
            ProbeStatus::Clamped => "clamped",
            ProbeStatus::AbortedDrops => "aborted_drops",
        }
    }
}

/// One probe attempt's result, surfaced into the metrics log.
#[derive(Debug, Clone, Copy)]
pub struct ProbeOutcome {
    pub flow: u32,
    pub at: SimTime,
    pub status: ProbeStatus,
    pub theta: f64,
    /// Depletion-signed RTT change handed to the inversion.
    pub delta_r: f64,
    pub inversion: Option<ProbeInversion>,
}

/// Send-time band (as fractions of the hold) whose samples average into the
/// perturbed-RTT measurement. It opens once the window change has fully
/// reached the queue (serializing the change takes up to |theta| RTTs, with
/// equality for a lone flow) and closes before competing flows' responses
/// start moving the queue again (they lag by roughly one RTT).
fn plateau_window(theta: f64) -> (f64, f64) {
    let from = (theta.abs() + 0.10).max(0.20);
    let to = (from + 0.35).min(0.95);
    (from, to)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ProbeHold {
    w_star: f64,
    /// Pre-probe RTT baseline: phase-matched mean over the settled train.
    r_star: f64,
    /// Hold duration in seconds (`t_eps_rtts * r_star`).
    t_eps: f64,
    /// Plateau band bounds as fractions of the hold.
    window: (f64, f64),
    started_at: SimTime,
    drops_before: u64,
    /// First sequence sent under the perturbed window.
    start_seq: u64,
    /// Mean raw RTT over plateau-window sends. Averaging over a send-time
    /// window suppresses packet-granularity noise that a single end sample
    /// would carry straight into the flow-count estimate.
    sum: f64,
    count: u32,
    /// Marker sequence once armed; the measurement completes on its ack.
    marker: Option<u64>,
}

impl ProbeHold {
    fn fold_sample(&mut self, seq: u64, raw_sample: f64, now: SimTime) {
        if seq < self.start_seq {
            return;
        }
        let sent = now.as_secs_f64() - raw_sample;
        let t0 = self.started_at.as_secs_f64();
        if sent >= t0 + self.window.0 * self.t_eps && sent <= t0 + self.window.1 * self.t_eps {
            self.sum += raw_sample;
            self.count += 1;
        }
    }

    fn plateau_mean(&self, fallback: f64) -> f64 {
        if self.count > 0 {
            self.sum / self.count as f64
        } else {
            fallback
        }
    }
}

/// Pre-probe baseline accumulation over one settled RTT: (send time, raw
/// sample) pairs, so the reference window can be phase-matched to the
/// plateau window. The settled queue carries a small standing oscillation
/// with a period of about one RTT (the packet train recirculating); taking
/// both means over send windows an exact multiple of the hold apart makes it
/// cancel out of the difference.
#[derive(Debug, Clone)]
pub(crate) struct Baseline {
    samples: Vec<(f64, f64)>,
    until: SimTime,
}

#[derive(Debug, Clone)]
pub(crate) enum Phase {
    Inactive,
    /// Waiting for settle.
    Arming,
    /// Settled; averaging the pre-probe RTT for one more round trip.
    ProbeBaseline(Baseline),
    /// Window held at the perturbed value until the timer fires.
    ProbeHold(ProbeHold),
    /// Hold elapsed; waiting to send and then ack the marker packet.
    ProbeMeasure(ProbeHold),
    Throttled,
    Finished,
}

#[derive(Debug)]
pub struct RemedyState {
    pub(crate) phase: Phase,
    settled_count: u32,
    attempts: u32,
    theta_current: f64,
    active_token: u64,
    next_token: u64,
}

impl RemedyState {
    pub fn new(cfg: &RemedyConfig) -> Self {
        let phase = match cfg.kind {
            RemedyKind::None => Phase::Inactive,
            _ => Phase::Arming,
        };
        RemedyState {
            phase,
            settled_count: 0,
            attempts: 0,
            theta_current: cfg.theta,
            active_token: 0,
            next_token: 1,
        }
    }

    pub fn finished(&self) -> bool {
        matches!(self.phase, Phase::Finished)
    }

    pub fn in_progress(&self) -> bool {
        matches!(
            self.phase,
            Phase::ProbeBaseline(_) | Phase::ProbeHold(_) | Phase::ProbeMeasure(_) | Phase::Throttled
        )
    }
}

/// Settle detection and remedy triggering; runs after every window update.
pub(crate) fn on_window_update(flow: &mut FastFlow, engine: &mut Engine) -> Option<ProbeOutcome> {
    if !matches!(flow.remedy.phase, Phase::Arming) {
        return None;
    }
    let cfg = flow.cfg.remedy.clone();
    // Each update closes a gamma*(1 - d/r) fraction of the distance to the
    // FAST fixed point, so the raw per-update change certifies equilibrium
    // only up to that factor. Normalize by it: `settle_tol` bounds the
    // estimated remaining distance, not the raw step size. Without this the
    // probe fires while the window is still several percent short on
    // long-delay paths and overestimates the competitor count.
    let contraction = match (flow.base_rtt, flow.rtt_est) {
        (Some(d), Some(r)) if r > 0.0 => (flow.cfg.params.gamma * (1.0 - d / r)).max(1e-3),
        _ => 1.0,
    };
    let gap_estimate = flow.last_rel_delta / contraction;
    if gap_estimate < cfg.settle_tol {
        flow.remedy.settled_count += 1;
    } else {
        flow.remedy.settled_count = 0;
    }
    if flow.remedy.settled_count < cfg.settle_window {
        return None;
    }
    match cfg.kind {
        RemedyKind::DelayProbe => {
            if let Some(rtt) = flow.rtt_est {
                // Hold the window still from here through the whole probe:
                // residual convergence drift between the reference window and
                // the plateau window would otherwise read as extra queue.
                flow.updates_frozen = true;
                // Collect long enough that the phase-matched reference window
                // (which moves back for positive theta) is fully covered.
                let span = (1.0 + flow.remedy.theta_current.max(0.0)) * rtt;
                flow.remedy.phase = Phase::ProbeBaseline(Baseline {
                    samples: Vec::new(),
                    until: engine.now() + SimTime::from_secs_f64(span),
                });
            }
        }
        RemedyKind::RateReduction => start_throttle(flow, engine, &cfg),
        RemedyKind::None => {}
    }
    None
}

fn schedule_timer(flow: &mut FastFlow, engine: &mut Engine, delay_secs: f64) {
    let token = flow.remedy.next_token;
    flow.remedy.next_token += 1;
    flow.remedy.active_token = token;
    let at = engine.now() + SimTime::from_secs_f64(delay_secs);
    engine
        .schedule(at, ControlEvent::FlowTimer { flow: flow.id, token })
        .expect("remedy timer scheduling");
}

/// Picks the pre-probe RTT reference: the mean over the send window whose
/// recirculation phase matches the plateau window (two hold-lengths earlier;
/// a positive theta pauses the train and delays its pattern by theta RTTs,
/// which shifts the matching window back by the same amount). Falls back to
/// the whole-baseline mean when the slice is thin.
fn baseline_reference(samples: &[(f64, f64)], t0: f64, t_eps_rtts: f64, theta: f64) -> f64 {
    let overall = samples.iter().map(|(_, r)| r).sum::<f64>() / samples.len() as f64;
    let t_eps = t_eps_rtts * overall;
    let shift = theta.max(0.0);
    let (from, to) = plateau_window(theta);
    let lo = t0 - (2.0 - from + shift) * t_eps;
    let hi = t0 - (2.0 - to + shift) * t_eps;
    let mut sum = 0.0;
    let mut count = 0u32;
    for (sent, r) in samples {
        if *sent >= lo && *sent <= hi {
            sum += r;
            count += 1;
        }
    }
    if count >= 4 {
        sum / count as f64
    } else {
        overall
    }
}

fn start_probe(flow: &mut FastFlow, engine: &mut Engine, cfg: &RemedyConfig, r_star: f64) {
    if flow.base_rtt.is_none() {
        return;
    }
    let w_star = flow.cwnd;
    let t_eps = cfg.t_eps_rtts * r_star;
    let hold = ProbeHold {
        w_star,
        r_star,
        t_eps,
        window: plateau_window(flow.remedy.theta_current),
        started_at: engine.now(),
        drops_before: engine.drops_for(Agent::Flow(flow.id)),
        start_seq: flow.next_seq,
        sum: 0.0,
        count: 0,
        marker: None,
    };
    flow.updates_frozen = true;
    // Track raw samples during the probe so measurements see the
    // instantaneous RTT rather than the pre-probe average.
    flow.eta_override = Some(1.0);
    flow.cwnd = ((1.0 - flow.remedy.theta_current) * w_star).max(CWND_FLOOR);
    flow.remedy.phase = Phase::ProbeHold(hold);
    schedule_timer(flow, engine, t_eps);
}

fn start_throttle(flow: &mut FastFlow, engine: &mut Engine, cfg: &RemedyConfig) {
    let Some(rtt) = flow.rtt_est else { return };
    flow.updates_frozen = true;
    flow.cwnd = (flow.cwnd / cfg.scale_factor).max(CWND_FLOOR);
    flow.remedy.phase = Phase::Throttled;
    schedule_timer(flow, engine, cfg.throttle_duration_rtts * rtt);
}

/// Remedy timers: end of the probe hold or of the throttle.
pub(crate) fn on_timer(flow: &mut FastFlow, _engine: &mut Engine, token: u64) -> Option<ProbeOutcome> {
    if token != flow.remedy.active_token {
        return None; // stale timer
    }
    match flow.remedy.phase {
        Phase::ProbeHold(hold) => {
            // Arm the marker: the next packet sent closes the measurement.
            // The window stays perturbed until that send happens.
            flow.remedy.phase = Phase::ProbeMeasure(hold);
            None
        }
        Phase::Throttled => {
            // The FAST update resumes from the scaled-down window.
            flow.updates_frozen = false;
            flow.remedy.phase = Phase::Finished;
            None
        }
        _ => None,
    }
}

/// Marker arming: records the first sequence sent after the hold elapsed and
/// returns the window to its settled value.
pub(crate) fn on_packet_sent(flow: &mut FastFlow, seq: u64) {
    if let Phase::ProbeMeasure(mut hold) = flow.remedy.phase {
        if hold.marker.is_none() {
            hold.marker = Some(seq);
            flow.remedy.phase = Phase::ProbeMeasure(hold);
            flow.cwnd = hold.w_star.max(CWND_FLOOR);
        }
    }
}

/// Tracks probe-window samples; completes the probe at the marker's ack.
pub(crate) fn on_ack(
    flow: &mut FastFlow,
    engine: &mut Engine,
    seq: u64,
    raw_sample: f64,
) -> Option<ProbeOutcome> {
    let theta = flow.remedy.theta_current;
    let now = engine.now();
    let hold = match &mut flow.remedy.phase {
        Phase::ProbeBaseline(base) => {
            base.samples.push((now.as_secs_f64() - raw_sample, raw_sample));
            if now >= base.until && base.samples.len() >= 4 {
                let Phase::ProbeBaseline(base) =
                    std::mem::replace(&mut flow.remedy.phase, Phase::Arming)
                else {
                    unreachable!()
                };
                let cfg = flow.cfg.remedy.clone();
                let r_star =
                    baseline_reference(&base.samples, now.as_secs_f64(), cfg.t_eps_rtts, theta);
                start_probe(flow, engine, &cfg, r_star);
            }
            return None;
        }
        Phase::ProbeHold(hold) => {
            hold.fold_sample(seq, raw_sample, now);
            return None;
        }
        Phase::ProbeMeasure(hold) => {
            hold.fold_sample(seq, raw_sample, now);
            if hold.marker != Some(seq) {
                return None;
            }
            *hold
        }
        _ => return None,
    };
    let cfg = flow.cfg.remedy.clone();
    let now = engine.now();

    let dropped = engine.drops_for(Agent::Flow(flow.id)) > hold.drops_before;
    if dropped {
        return Some(fail_probe(flow, now, theta, 0.0, ProbeStatus::AbortedDrops, &cfg));
    }

    // Depletion-balance sign: a queue that grew (samples above the settled
    // RTT) yields a negative change, matching a negative theta.
    let r_eps = hold.plateau_mean(raw_sample);
    let delta_r = hold.r_star - r_eps;
    let base = flow.base_rtt.expect("probe ran without base rtt");
    let alpha = flow.alpha();

    match model::invert_probe(theta, hold.t_eps, delta_r, hold.w_star, hold.r_star, base, alpha) {
        Ok(inv) if !inv.clamped => {
            flow.base_rtt = Some(inv.d_corrected);
            flow.cwnd = inv.w_reset.max(CWND_FLOOR);
            flow.updates_frozen = false;
            flow.eta_override = None;
            flow.defer_next_update(now);
            flow.remedy.phase = Phase::Finished;
            Some(ProbeOutcome {
                flow: flow.id,
                at: now,
                status: ProbeStatus::Ok,
                theta,
                delta_r,
                inversion: Some(inv),
            })
        }
        Ok(inv) => {
            // A negative corrected delay is unphysical: report and retry.
            let mut out = fail_probe(flow, now, theta, delta_r, ProbeStatus::Clamped, &cfg);
            out.inversion = Some(inv);
            Some(out)
        }
        Err(_) => Some(fail_probe(flow, now, theta, delta_r, ProbeStatus::FailedSign, &cfg)),
    }
}

fn fail_probe(
    flow: &mut FastFlow,
    at: SimTime,
    theta: f64,
    delta_r: f64,
    status: ProbeStatus,
    cfg: &RemedyConfig,
) -> ProbeOutcome {
    if let Phase::ProbeMeasure(hold) | Phase::ProbeHold(hold) = flow.remedy.phase {
        flow.cwnd = hold.w_star.max(CWND_FLOOR);
    }
    flow.updates_frozen = false;
    flow.eta_override = None;
    flow.defer_next_update(at);
    flow.remedy.settled_count = 0;
    flow.remedy.attempts += 1;
    if flow.remedy.attempts <= cfg.max_retries {
        // Retry once re-settled, with a gentler perturbation.
        flow.remedy.theta_current = theta / 2.0;
        flow.remedy.phase = Phase::Arming;
    } else {
        // Give up; plain FAST behavior from here on.
        flow.remedy.phase = Phase::Finished;
    }
    ProbeOutcome { flow: flow.id, at, status, theta, delta_r, inversion: None }
}
