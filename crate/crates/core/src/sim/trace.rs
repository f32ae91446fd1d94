//! Independent replay of the transport event stream.
//!
//! The checker sees only the emitted events (inject, queue arrival, drop,
//! departure, delivery) and derives queue occupancies and conservation totals
//! from them alone. Comparing its numbers against the engine's live state
//! catches any bookkeeping drift between the two.

#[derive(Debug, Default)]
pub struct TraceChecker {
    occupancy: Vec<i64>,
    injected: u64,
    delivered: u64,
    dropped: u64,
    on_wire: i64,
    pub mismatches: Vec<String>,
}

impl TraceChecker {
    pub fn new(links: usize) -> Self {
        TraceChecker { occupancy: vec![0; links], ..Default::default() }
    }

    pub(super) fn grow(&mut self, links: usize) {
        if self.occupancy.len() < links {
            self.occupancy.resize(links, 0);
        }
    }

    pub(super) fn on_inject(&mut self) {
        self.injected += 1;
    }

    pub(super) fn on_queue_arrival(&mut self, link: usize) {
        self.occupancy[link] += 1;
    }

    pub(super) fn on_drop(&mut self) {
        self.dropped += 1;
    }

    pub(super) fn on_departure(&mut self, link: usize) {
        self.occupancy[link] -= 1;
        self.on_wire += 1;
    }

    pub(super) fn on_wire_end(&mut self) {
        self.on_wire -= 1;
    }

    pub(super) fn on_delivery(&mut self) {
        self.delivered += 1;
    }

    /// Records a mismatch if the engine's live occupancy disagrees with the
    /// occupancy replayed from the trace.
    pub fn check_occupancy(&mut self, link: usize, live: usize, at_secs: f64) {
        if self.occupancy[link] != live as i64 {
            self.mismatches.push(format!(
                "t={at_secs:.6}: link {link} live occupancy {live} != replayed {}",
                self.occupancy[link]
            ));
        }
    }

    /// Conservation: injected = delivered + dropped + queued + on wire.
    pub fn check_conservation(&mut self, live_queued: u64, at_secs: f64) {
        let derived_in_flight =
            self.injected as i64 - self.delivered as i64 - self.dropped as i64;
        let queued: i64 = self.occupancy.iter().sum();
        if derived_in_flight != queued + self.on_wire {
            self.mismatches.push(format!(
                "t={at_secs:.6}: conservation broken: in-flight {derived_in_flight} != queued {queued} + wire {}",
                self.on_wire
            ));
        }
        if queued != live_queued as i64 {
            self.mismatches.push(format!(
                "t={at_secs:.6}: replayed queue total {queued} != live {live_queued}"
            ));
        }
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn totals(&self) -> (u64, u64, u64) {
        (self.injected, self.delivered, self.dropped)
    }
}
