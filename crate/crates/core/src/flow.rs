//! FAST sender endpoint: window-clocked transmission, RTT estimation with
//! running-minimum base-RTT tracking, and the periodic window update
//!
//! ```text
//! w <- gamma * (d_hat * w / r_hat + alpha) + (1 - gamma) * w
//! ```
//!
//! applied once per measured RTT (or at a fixed interval). The window is kept
//! real-valued; clocking uses its floor, with a floor of 2 packets so the ACK
//! clock never stalls.

use std::collections::BTreeSet;

use crate::model::FlowParams;
use crate::remedy::{self, ProbeOutcome, RemedyConfig, RemedyState};
use crate::sim::{Agent, Engine, Packet, PacketKind, PathId, SimTime};

/// Smallest window that keeps the ACK clock alive.
pub const CWND_FLOOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Update once per measured round-trip time.
    PerRtt,
    /// Update every fixed interval.
    Fixed(SimTime),
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub params: FlowParams,
    /// EWMA weight for the smoothed RTT estimate.
    pub rtt_ewma_weight: f64,
    pub update_mode: UpdateMode,
    pub start_time: SimTime,
    pub stop_time: Option<SimTime>,
    /// Preset base RTT in seconds (a flow that already knows the true
    /// propagation delay), instead of learning it from samples.
    pub oracle_base_rtt: Option<f64>,
    /// Double the window each update until the FAST target falls behind.
    pub slow_start: bool,
    pub remedy: RemedyConfig,
    pub packet_size: u32,
    pub ack_size: u32,
}

impl FlowConfig {
    pub fn new(params: FlowParams) -> Self {
        FlowConfig {
            params,
            rtt_ewma_weight: 0.25,
            update_mode: UpdateMode::PerRtt,
            start_time: SimTime::ZERO,
            stop_time: None,
            oracle_base_rtt: None,
            slow_start: false,
            remedy: RemedyConfig::none(),
            packet_size: 1000,
            ack_size: 40,
        }
    }
}

/// One FAST sender. Owned by a single simulation instance.
pub struct FastFlow {
    pub id: u32,
    pub cfg: FlowConfig,
    pub fwd_path: PathId,
    pub rev_path: PathId,
    /// Congestion window, packets, real-valued.
    pub cwnd: f64,
    /// Estimated round-trip propagation delay (running minimum unless a
    /// remedy overwrites it), seconds.
    pub base_rtt: Option<f64>,
    /// Smoothed RTT estimate, seconds.
    pub rtt_est: Option<f64>,
    pub last_sample: f64,
    pub started: bool,
    pub stopped: bool,
    pub(crate) next_seq: u64,
    pub(crate) outstanding: BTreeSet<u64>,
    dup_acks: u32,
    retransmitted: BTreeSet<u64>,
    pub(crate) last_update_at: Option<SimTime>,
    pub(crate) updates_frozen: bool,
    pub(crate) eta_override: Option<f64>,
    ramping: bool,
    /// Relative window change at the last update, for settle detection.
    pub(crate) last_rel_delta: f64,
    pub(crate) update_count: u64,
    pub remedy: RemedyState,
    /// Packets sent (including retransmissions), for reporting.
    pub sent_count: u64,
}

impl FastFlow {
    pub fn new(id: u32, cfg: FlowConfig, fwd_path: PathId, rev_path: PathId) -> Self {
        let ramping = cfg.slow_start;
        let base_rtt = cfg.oracle_base_rtt;
        let remedy = RemedyState::new(&cfg.remedy);
        FastFlow {
            id,
            cfg,
            fwd_path,
            rev_path,
            cwnd: CWND_FLOOR,
            base_rtt,
            rtt_est: None,
            last_sample: 0.0,
            started: false,
            stopped: false,
            next_seq: 0,
            outstanding: BTreeSet::new(),
            dup_acks: 0,
            retransmitted: BTreeSet::new(),
            last_update_at: None,
            updates_frozen: false,
            eta_override: None,
            ramping,
            last_rel_delta: 1.0,
            update_count: 0,
            remedy,
            sent_count: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.params.alpha
    }

    pub fn in_flight(&self) -> usize {
        self.outstanding.len()
    }

    /// Effective integer window used for clocking.
    pub fn window(&self) -> usize {
        self.cwnd.floor() as usize
    }

    /// Pushes the next periodic update one RTT out from `now`; used when a
    /// remedy rewrites the window so the estimator can catch up first.
    pub(crate) fn defer_next_update(&mut self, now: SimTime) {
        self.last_update_at = Some(now);
    }

    pub fn start(&mut self, engine: &mut Engine) {
        self.started = true;
        if let UpdateMode::Fixed(interval) = self.cfg.update_mode {
            let at = engine.now() + interval;
            engine
                .schedule(
                    at,
                    crate::sim::ControlEvent::FlowTimer { flow: self.id, token: remedy::FIXED_UPDATE_TOKEN },
                )
                .expect("scheduling flow update timer");
        }
        self.release_packets(engine);
    }

    pub fn stop(&mut self) {
        self.stopped = true;
    }

    /// Handles an ACK delivery: RTT sample, loss detection, the per-RTT
    /// window update, remedy hooks and new transmissions.
    pub fn on_ack(&mut self, engine: &mut Engine, seq: u64, sample: f64) -> Option<ProbeOutcome> {
        let now = engine.now();
        self.last_sample = sample;
        self.base_rtt = Some(match self.base_rtt {
            Some(b) => b.min(sample),
            None => sample,
        });
        let eta = self.eta_override.unwrap_or(self.cfg.rtt_ewma_weight);
        self.rtt_est = Some(match self.rtt_est {
            Some(r) => (1.0 - eta) * r + eta * sample,
            None => sample,
        });

        // Cumulative-free loss detection: three acks passing a still-missing
        // oldest sequence trigger one retransmission of it.
        let oldest_before = self.outstanding.first().copied();
        let acked_known = self.outstanding.remove(&seq);
        match oldest_before {
            Some(oldest) if acked_known && seq == oldest => self.dup_acks = 0,
            Some(oldest) if seq > oldest => {
                self.dup_acks += 1;
                if self.dup_acks >= 3 && !self.retransmitted.contains(&oldest) {
                    self.retransmit(engine, oldest);
                    self.dup_acks = 0;
                }
            }
            _ => {}
        }

        let mut outcome = remedy::on_ack(self, engine, seq, sample);

        if self.update_due(now) {
            self.update_window();
            self.last_update_at = Some(now);
            let late = remedy::on_window_update(self, engine);
            if outcome.is_none() {
                outcome = late;
            }
        }

        self.release_packets(engine);
        outcome
    }

    fn update_due(&self, now: SimTime) -> bool {
        if self.updates_frozen || self.rtt_est.is_none() {
            return false;
        }
        match self.cfg.update_mode {
            UpdateMode::PerRtt => match self.last_update_at {
                None => true,
                Some(last) => {
                    let rtt = SimTime::from_secs_f64(self.rtt_est.unwrap_or(0.0));
                    now.saturating_sub(last) >= rtt
                }
            },
            // Fixed mode updates come from the timer, never from acks.
            UpdateMode::Fixed(_) => false,
        }
    }

    /// Applies the FAST window rule once. Requires both RTT estimates.
    pub fn update_window(&mut self) -> f64 {
        let (Some(d), Some(r)) = (self.base_rtt, self.rtt_est) else {
            return self.cwnd;
        };
        let gamma = self.cfg.params.gamma;
        let alpha = self.cfg.params.alpha;
        let target = gamma * (d / r * self.cwnd + alpha) + (1.0 - gamma) * self.cwnd;
        let old = self.cwnd;
        let new = if self.ramping {
            if target >= 2.0 * self.cwnd {
                2.0 * self.cwnd
            } else {
                self.ramping = false;
                target
            }
        } else {
            target
        };
        self.cwnd = new.max(CWND_FLOOR);
        self.last_rel_delta = (self.cwnd - old).abs() / old.max(1.0);
        self.update_count += 1;
        self.cwnd
    }

    /// Timer callback: fixed-interval updates and remedy timers.
    pub fn on_timer(&mut self, engine: &mut Engine, token: u64) -> Option<ProbeOutcome> {
        if token == remedy::FIXED_UPDATE_TOKEN {
            if let UpdateMode::Fixed(interval) = self.cfg.update_mode {
                if !self.stopped {
                    let mut outcome = None;
                    if !self.updates_frozen && self.rtt_est.is_some() {
                        self.update_window();
                        outcome = remedy::on_window_update(self, engine);
                        self.release_packets(engine);
                    }
                    let at = engine.now() + interval;
                    engine
                        .schedule(at, crate::sim::ControlEvent::FlowTimer { flow: self.id, token })
                        .expect("rescheduling flow update timer");
                    return outcome;
                }
            }
            return None;
        }
        let outcome = remedy::on_timer(self, engine, token);
        self.release_packets(engine);
        outcome
    }

    /// Sends while the window allows. Never exceeds floor(cwnd) in flight.
    pub fn release_packets(&mut self, engine: &mut Engine) {
        if !self.started || self.stopped {
            return;
        }
        while self.outstanding.len() < self.window() {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.outstanding.insert(seq);
            self.send(engine, seq);
            remedy::on_packet_sent(self, seq);
        }
    }

    fn retransmit(&mut self, engine: &mut Engine, seq: u64) {
        self.retransmitted.insert(seq);
        self.send(engine, seq);
    }

    fn send(&mut self, engine: &mut Engine, seq: u64) {
        self.sent_count += 1;
        engine.inject(Packet {
            owner: Agent::Flow(self.id),
            kind: PacketKind::Data,
            seq,
            size: self.cfg.packet_size,
            sent_at: engine.now(),
            path: self.fwd_path,
            hop: 0,
        });
    }
}
