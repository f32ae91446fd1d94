//! Deterministic discrete-event core: clock, event queue, links and packet
//! transport. Identical inputs and seed give a bit-identical event order.

mod engine;
mod link;
mod packet;
mod time;
mod trace;

pub use engine::{ControlEvent, Engine, SimError, Step, TransportStats};
pub use link::{Link, LinkId};
pub use packet::{Agent, Packet, PacketKind, PathId};
pub use time::SimTime;
pub use trace::TraceChecker;
