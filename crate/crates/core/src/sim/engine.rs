//! The event engine: a clock, a time-ordered event queue with FIFO
//! tie-breaking, and packet transport across registered paths.
//!
//! Transport events (transmit-done, propagation arrival) are consumed
//! internally; the driver only sees packet deliveries at path ends and its own
//! control events. A simulation instance is strictly single-threaded.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use super::link::{Link, LinkId};
use super::packet::{Agent, Packet, PathId};
use super::time::SimTime;
use super::trace::TraceChecker;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("scheduling in the past: at {at} but clock is {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
    #[error("event cap of {cap} exceeded; runaway simulation")]
    EventCapExceeded { cap: u64 },
}

/// Driver-level events. The engine stores and orders them but assigns no
/// meaning; the scenario loop dispatches on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlEvent {
    FlowStart(u32),
    FlowStop(u32),
    /// Generic per-flow timer; `token` guards against stale timers.
    FlowTimer { flow: u32, token: u64 },
    SourceToggle(u32),
    SourceEmit(u32),
    MetricsTick,
    ThroughputTick,
}

#[derive(Debug)]
enum EventBody {
    TransmitDone(LinkId),
    Arrival(LinkId, Packet),
    Control(ControlEvent),
}

struct Scheduled {
    at: SimTime,
    seq: u64,
    body: EventBody,
}

// BinaryHeap is a max-heap; reverse to pop the earliest (time, seq) first.
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq)).reverse()
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

/// What the driver observes from one engine step.
#[derive(Debug)]
pub enum Step {
    /// A packet reached the end of its path.
    Delivered(Packet),
    Control(ControlEvent),
    /// No events remain at or before the requested horizon; the clock now
    /// stands at that horizon.
    Done,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct TransportStats {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
}

pub struct Engine {
    now: SimTime,
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
    links: Vec<Link>,
    paths: Vec<Vec<LinkId>>,
    dispatched: u64,
    max_events: u64,
    on_wire: u64,
    pub stats: TransportStats,
    drops_by_agent: BTreeMap<Agent, u64>,
    trace: Option<TraceChecker>,
}

impl Engine {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            next_seq: 0,
            links: Vec::new(),
            paths: Vec::new(),
            dispatched: 0,
            max_events: 2_000_000_000,
            on_wire: 0,
            stats: TransportStats::default(),
            drops_by_agent: BTreeMap::new(),
            trace: None,
        }
    }

    /// Caps total dispatched events; exceeding it aborts the run.
    pub fn set_max_events(&mut self, cap: u64) {
        self.max_events = cap;
    }

    /// Enables the independent trace checker for this run.
    pub fn enable_trace(&mut self) {
        let mut checker = TraceChecker::new(self.links.len());
        checker.grow(self.links.len());
        self.trace = Some(checker);
    }

    pub fn trace_mut(&mut self) -> Option<&mut TraceChecker> {
        self.trace.as_mut()
    }

    pub fn trace(&self) -> Option<&TraceChecker> {
        self.trace.as_ref()
    }

    pub fn add_link(&mut self, byte_rate: f64, prop_delay: SimTime, queue_capacity: usize) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(Link::new(byte_rate, prop_delay, queue_capacity));
        if let Some(t) = self.trace.as_mut() {
            t.grow(self.links.len());
        }
        id
    }

    pub fn register_path(&mut self, links: Vec<LinkId>) -> PathId {
        assert!(!links.is_empty(), "a path needs at least one link");
        let id = PathId(self.paths.len() as u32);
        self.paths.push(links);
        id
    }

    pub fn path_links(&self, path: PathId) -> &[LinkId] {
        &self.paths[path.0 as usize]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn events_dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn drops_for(&self, agent: Agent) -> u64 {
        self.drops_by_agent.get(&agent).copied().unwrap_or(0)
    }

    /// Packets currently queued or in service across all links.
    pub fn total_queued(&self) -> u64 {
        self.links.iter().map(|l| l.occupancy() as u64).sum()
    }

    pub fn on_wire(&self) -> u64 {
        self.on_wire
    }

    /// Schedules a driver control event. Scheduling in the past is a logic
    /// error in the driver.
    pub fn schedule(&mut self, at: SimTime, event: ControlEvent) -> Result<(), SimError> {
        if at < self.now {
            return Err(SimError::SchedulingInPast { at, now: self.now });
        }
        self.push(at, EventBody::Control(event));
        Ok(())
    }

    fn push(&mut self, at: SimTime, body: EventBody) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, body });
    }

    /// Injects a packet at the head of its path. Returns false if it was
    /// dropped immediately at the first queue.
    pub fn inject(&mut self, packet: Packet) -> bool {
        debug_assert!(packet.size > 0);
        self.stats.injected += 1;
        if let Some(t) = self.trace.as_mut() {
            t.on_inject();
        }
        let first = self.paths[packet.path.0 as usize][0];
        self.enqueue(first, packet)
    }

    /// Tail-drop admission; starts transmission immediately on an idle link.
    fn enqueue(&mut self, link_id: LinkId, packet: Packet) -> bool {
        let link = &mut self.links[link_id.index()];
        if link.is_full() {
            link.drops += 1;
            self.stats.dropped += 1;
            *self.drops_by_agent.entry(packet.owner).or_insert(0) += 1;
            if let Some(t) = self.trace.as_mut() {
                t.on_drop();
            }
            return false;
        }
        let was_idle = link.in_service.is_none();
        let tx = link.tx_time(packet.size);
        link.admit(packet);
        if let Some(t) = self.trace.as_mut() {
            t.on_queue_arrival(link_id.index());
        }
        if was_idle {
            self.push(self.now + tx, EventBody::TransmitDone(link_id));
        }
        true
    }

    /// Advances until a driver-visible step occurs or `t_end` is reached.
    /// Transport events are handled internally.
    pub fn next_step(&mut self, t_end: SimTime) -> Result<Step, SimError> {
        loop {
            match self.heap.peek() {
                None => {
                    self.now = t_end.max(self.now);
                    return Ok(Step::Done);
                }
                Some(top) if top.at > t_end => {
                    self.now = t_end.max(self.now);
                    return Ok(Step::Done);
                }
                _ => {}
            }
            let ev = self.heap.pop().expect("peeked event vanished");
            debug_assert!(ev.at >= self.now, "event queue went backwards");
            self.now = ev.at;
            self.dispatched += 1;
            if self.dispatched > self.max_events {
                return Err(SimError::EventCapExceeded { cap: self.max_events });
            }
            match ev.body {
                EventBody::TransmitDone(link_id) => {
                    let link = &mut self.links[link_id.index()];
                    let prop = link.prop_delay;
                    let (packet, next_tx) = link.finish_service();
                    if let Some(t) = self.trace.as_mut() {
                        t.on_departure(link_id.index());
                    }
                    self.on_wire += 1;
                    self.push(self.now + prop, EventBody::Arrival(link_id, packet));
                    if let Some(tx) = next_tx {
                        self.push(self.now + tx, EventBody::TransmitDone(link_id));
                    }
                }
                EventBody::Arrival(link_id, mut packet) => {
                    self.on_wire -= 1;
                    if let Some(t) = self.trace.as_mut() {
                        t.on_wire_end();
                    }
                    packet.hop += 1;
                    let path = &self.paths[packet.path.0 as usize];
                    debug_assert_eq!(path[packet.hop as usize - 1], link_id);
                    if (packet.hop as usize) == path.len() {
                        self.stats.delivered += 1;
                        if let Some(t) = self.trace.as_mut() {
                            t.on_delivery();
                        }
                        return Ok(Step::Delivered(packet));
                    }
                    let next_link = path[packet.hop as usize];
                    self.enqueue(next_link, packet);
                }
                EventBody::Control(c) => return Ok(Step::Control(c)),
            }
        }
    }

    /// Runs the trace checker's occupancy and conservation comparisons
    /// against live engine state.
    pub fn run_trace_checks(&mut self) {
        let at = self.now.as_secs_f64();
        let occupancies: Vec<usize> = self.links.iter().map(|l| l.occupancy()).collect();
        let queued = self.total_queued();
        if let Some(t) = self.trace.as_mut() {
            for (i, occ) in occupancies.iter().enumerate() {
                t.check_occupancy(i, *occ, at);
            }
            t.check_conservation(queued, at);
        }
    }
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}
