//! Packets and the agents that own them.

use super::time::SimTime;

/// Who injected a packet: a congestion-controlled flow or a background source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Agent {
    Flow(u32),
    Source(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Data,
    Ack,
    Background,
}

/// A registered route: an ordered list of links. Packets carry the id plus a
/// hop cursor instead of the route itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathId(pub u32);

#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub owner: Agent,
    pub kind: PacketKind,
    /// Per-flow monotone counter. Acks carry the data packet's seq.
    pub seq: u64,
    /// Bytes on the wire.
    pub size: u32,
    /// For data packets the send time; acks echo the data packet's value so
    /// the sender can take an RTT sample.
    pub sent_at: SimTime,
    pub path: PathId,
    pub hop: u16,
}
