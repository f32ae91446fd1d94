//! A unidirectional link: one transmitter paid per packet (store-and-forward)
//! feeding a propagation pipe, behind a tail-drop FIFO queue.

use std::collections::VecDeque;

use super::packet::Packet;
use super::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
pub struct Link {
    /// Serialization rate, bytes per second.
    pub byte_rate: f64,
    /// One-way propagation delay.
    pub prop_delay: SimTime,
    /// Maximum packets at the node (waiting plus in service); 0 = unbounded.
    pub queue_capacity: usize,
    pub(super) waiting: VecDeque<Packet>,
    pub(super) in_service: Option<Packet>,
    byte_occupancy: u64,
    pub arrivals: u64,
    pub departures: u64,
    pub drops: u64,
}

impl Link {
    pub fn new(byte_rate: f64, prop_delay: SimTime, queue_capacity: usize) -> Self {
        assert!(byte_rate > 0.0, "link rate must be positive");
        Link {
            byte_rate,
            prop_delay,
            queue_capacity,
            waiting: VecDeque::new(),
            in_service: None,
            byte_occupancy: 0,
            arrivals: 0,
            departures: 0,
            drops: 0,
        }
    }

    /// Time to serialize `size` bytes onto the wire.
    pub fn tx_time(&self, size: u32) -> SimTime {
        SimTime::from_nanos((size as f64 / self.byte_rate * 1e9).round() as u64)
    }

    /// Packets at the node: waiting plus the one in transmission.
    pub fn occupancy(&self) -> usize {
        self.waiting.len() + usize::from(self.in_service.is_some())
    }

    pub fn byte_occupancy(&self) -> u64 {
        self.byte_occupancy
    }

    pub fn is_full(&self) -> bool {
        self.queue_capacity != 0 && self.occupancy() >= self.queue_capacity
    }

    pub(super) fn admit(&mut self, packet: Packet) {
        self.arrivals += 1;
        self.byte_occupancy += packet.size as u64;
        if self.in_service.is_none() {
            debug_assert!(self.waiting.is_empty());
            self.in_service = Some(packet);
        } else {
            self.waiting.push_back(packet);
        }
    }

    /// Completes the in-service transmission, promotes the next packet and
    /// returns (departed packet, tx time of the newly started packet).
    pub(super) fn finish_service(&mut self) -> (Packet, Option<SimTime>) {
        let done = self.in_service.take().expect("transmit-done without packet");
        self.departures += 1;
        self.byte_occupancy -= done.size as u64;
        let mut next_tx = None;
        if let Some(next) = self.waiting.pop_front() {
            next_tx = Some(self.tx_time(next.size));
            self.in_service = Some(next);
        }
        (done, next_tx)
    }
}
