//! Topology construction: dumbbell and parking-lot networks.
//!
//! Every flow gets dedicated access links in both directions; forward data
//! shares the bottleneck (or router chain), acks return on mirrored reverse
//! links. Only data-direction shared queues are bounded by the configured
//! buffer capacity; access and reverse-path queues are unbounded, so ack
//! traffic never congests.

use crate::sim::{Engine, LinkId, PathId, SimTime};

use super::spec::{ScenarioSpec, TopologySpec};

pub struct BuiltTopology {
    /// Forward (data) and reverse (ack) path per flow, by flow index.
    pub flow_paths: Vec<(PathId, PathId)>,
    /// Path used by every background source.
    pub background_path: Option<PathId>,
    /// The queue whose occupancy the summary reports: the shared data-side
    /// bottleneck (for parking lots, the final link into the sink).
    pub bottleneck: LinkId,
    /// All shared data-direction links, entry-side first.
    pub shared_links: Vec<LinkId>,
    /// Empty-network round-trip time per flow (propagation plus per-hop
    /// transmission for a data packet out and an ack back), seconds.
    pub true_rtt: Vec<f64>,
}

fn byte_rate(bps: f64) -> f64 {
    bps / 8.0
}

/// RTT on an idle network: per link, propagation plus serialization.
fn path_rtt(engine: &Engine, fwd: &[LinkId], rev: &[LinkId], data: u32, ack: u32) -> f64 {
    let leg = |links: &[LinkId], size: u32| -> f64 {
        links
            .iter()
            .map(|l| {
                let link = engine.link(*l);
                link.prop_delay.as_secs_f64() + link.tx_time(size).as_secs_f64()
            })
            .sum()
    };
    leg(fwd, data) + leg(rev, ack)
}

pub fn build(engine: &mut Engine, spec: &ScenarioSpec) -> BuiltTopology {
    match spec.topology {
        TopologySpec::Dumbbell {
            bottleneck_rate_bps,
            bottleneck_delay_s,
            access_rate_bps,
            access_delay_s,
        } => {
            let bneck_delay = SimTime::from_secs_f64(bottleneck_delay_s);
            let access_delay = SimTime::from_secs_f64(access_delay_s);
            let bneck_fwd =
                engine.add_link(byte_rate(bottleneck_rate_bps), bneck_delay, spec.buffer_capacity);
            let bneck_rev = engine.add_link(byte_rate(bottleneck_rate_bps), bneck_delay, 0);

            let mut flow_paths = Vec::with_capacity(spec.flows.len());
            let mut true_rtt = Vec::with_capacity(spec.flows.len());
            for flow in &spec.flows {
                let acc = flow
                    .access_delay
                    .map(SimTime::from_secs_f64)
                    .unwrap_or(access_delay);
                let up = engine.add_link(byte_rate(access_rate_bps), acc, 0);
                let down = engine.add_link(byte_rate(access_rate_bps), acc, 0);
                let up_rev = engine.add_link(byte_rate(access_rate_bps), acc, 0);
                let down_rev = engine.add_link(byte_rate(access_rate_bps), acc, 0);
                let fwd_links = vec![up, bneck_fwd, down];
                let rev_links = vec![down_rev, bneck_rev, up_rev];
                true_rtt.push(path_rtt(engine, &fwd_links, &rev_links, spec.packet_size, spec.ack_size));
                let fwd = engine.register_path(fwd_links);
                let rev = engine.register_path(rev_links);
                flow_paths.push((fwd, rev));
            }

            let background_path = spec.background.as_ref().map(|bg| {
                let up = engine.add_link(byte_rate(access_rate_bps), access_delay, 0);
                let _ = bg;
                engine.register_path(vec![up, bneck_fwd])
            });

            BuiltTopology {
                flow_paths,
                background_path,
                bottleneck: bneck_fwd,
                shared_links: vec![bneck_fwd],
                true_rtt,
            }
        }
        TopologySpec::ParkingLot { hop_count, link_rate_bps, link_delay_s } => {
            let delay = SimTime::from_secs_f64(link_delay_s);
            let rate = byte_rate(link_rate_bps);
            // Chain link j carries traffic from router j+1 toward the sink;
            // the last one feeds the sink directly.
            let chain_fwd: Vec<LinkId> =
                (0..hop_count).map(|_| engine.add_link(rate, delay, spec.buffer_capacity)).collect();
            let chain_rev: Vec<LinkId> = (0..hop_count).map(|_| engine.add_link(rate, delay, 0)).collect();

            let mut flow_paths = Vec::with_capacity(spec.flows.len());
            let mut true_rtt = Vec::with_capacity(spec.flows.len());
            for flow in &spec.flows {
                let entry = flow.entry_hop - 1; // validated 1-based
                let acc = flow.access_delay.map(SimTime::from_secs_f64).unwrap_or(delay);
                let up = engine.add_link(rate, acc, 0);
                let up_rev = engine.add_link(rate, acc, 0);
                let mut fwd_links = vec![up];
                fwd_links.extend_from_slice(&chain_fwd[entry..]);
                let mut rev_links: Vec<LinkId> = chain_rev[entry..].iter().rev().copied().collect();
                rev_links.push(up_rev);
                true_rtt.push(path_rtt(engine, &fwd_links, &rev_links, spec.packet_size, spec.ack_size));
                let fwd = engine.register_path(fwd_links);
                let rev = engine.register_path(rev_links);
                flow_paths.push((fwd, rev));
            }

            let background_path = spec.background.as_ref().map(|_| {
                let up = engine.add_link(rate, delay, 0);
                let mut links = vec![up];
                links.extend_from_slice(&chain_fwd);
                engine.register_path(links)
            });

            BuiltTopology {
                flow_paths,
                background_path,
                bottleneck: *chain_fwd.last().expect("hop_count >= 1"),
                shared_links: chain_fwd,
                true_rtt,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::spec::ScenarioSpec;

    #[test]
    fn dumbbell_true_rtt_matches_hand_computation() {
        let text = "\
topology.kind=dumbbell
topology.bottleneck_rate=100e6
topology.bottleneck_delay=5e-3
topology.access_rate=1e9
topology.access_delay=1e-3
duration=10
flow.0.alpha=50
";
        let spec = ScenarioSpec::parse(text).unwrap();
        let mut engine = Engine::new();
        let built = build(&mut engine, &spec);
        // Propagation: 2 * (1 + 5 + 1) ms = 14 ms.
        // Data tx: 8 us + 80 us + 8 us; ack tx: 0.32 + 3.2 + 0.32 us.
        let want = 0.014 + (8.0 + 80.0 + 8.0) * 1e-6 + (0.32 + 3.2 + 0.32) * 1e-6;
        let got = built.true_rtt[0];
        assert!((got - want).abs() < 1e-9, "true rtt {got} vs {want}");
    }

    #[test]
    fn parking_lot_entry_trims_the_chain() {
        let text = "\
topology.kind=parking_lot
topology.hop_count=5
topology.link_rate=100e6
topology.link_delay=5e-3
duration=10
flow.0.alpha=50
flow.0.entry=1
flow.1.alpha=50
flow.1.entry=5
";
        let spec = ScenarioSpec::parse(text).unwrap();
        let mut engine = Engine::new();
        let built = build(&mut engine, &spec);
        let (full_fwd, _) = built.flow_paths[0];
        let (short_fwd, _) = built.flow_paths[1];
        assert_eq!(engine.path_links(full_fwd).len(), 6, "access + 5 chain links");
        assert_eq!(engine.path_links(short_fwd).len(), 2, "access + final link");
        // Both flows share the final chain link into the sink.
        assert_eq!(
            engine.path_links(full_fwd).last(),
            engine.path_links(short_fwd).last()
        );
        assert_eq!(built.bottleneck, *engine.path_links(full_fwd).last().unwrap());
        assert!(built.true_rtt[0] > built.true_rtt[1]);
    }
}
