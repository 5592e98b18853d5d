use std::collections::{BTreeMap, VecDeque};

use super::{LinkTable, NetworkError, Role, Topology};
use crate::engine::NodeId;
use crate::mac::ScheduleLayout;
use crate::radio::RadioParams;

/// Hop count to the gateway and chosen next hop for every node.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTable {
    pub gradient: Vec<Option<u32>>,
    pub parent: Vec<Option<NodeId>>,
}

impl GradientTable {
    pub fn children(&self, of: NodeId) -> Vec<NodeId> {
        self.parent
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == Some(of))
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }
}

fn better(links: &LinkTable, node: NodeId, a: NodeId, b: NodeId) -> bool {
    let (pa, pb) = (links.two_way_dbm(node, a), links.two_way_dbm(node, b));
    pa > pb || (pa == pb && a < b)
}

/// Builds hop gradients over repeaters, then attaches each sensor to the
/// reachable repeater or gateway with the lowest gradient (strongest link on
/// ties). Only links with the configured margin above sensitivity are used.
pub fn compute_gradients(
    topo: &Topology,
    links: &LinkTable,
    radio: &RadioParams,
) -> Result<GradientTable, NetworkError> {
    let n = topo.len();
    let threshold = radio.sensitivity_dbm + radio.link_margin_db;
    let usable = |a: NodeId, b: NodeId| links.two_way_dbm(a, b) >= threshold;
    let mut gradient = vec![None; n];
    let mut parent = vec![None; n];
    let ffds: Vec<NodeId> = topo
        .nodes()
        .iter()
        .filter(|x| x.role.is_ffd())
        .map(|x| x.id)
        .collect();
    let gw = topo.gateway();
    gradient[gw.index()] = Some(0u32);
    let mut queue = VecDeque::from([gw]);
    while let Some(u) = queue.pop_front() {
        let gu = gradient[u.index()].expect("queued nodes have a gradient");
        for &v in &ffds {
            if v == u || !usable(u, v) {
                continue;
            }
            match gradient[v.index()] {
                None => {
                    gradient[v.index()] = Some(gu + 1);
                    parent[v.index()] = Some(u);
                    queue.push_back(v);
                }
                Some(gv) if gv == gu + 1 => {
                    let cur = parent[v.index()].expect("non-gateway has a parent");
                    if better(links, v, u, cur) {
                        parent[v.index()] = Some(u);
                    }
                }
                _ => {}
            }
        }
    }
    for s in topo.sensors() {
        let best = ffds
            .iter()
            .copied()
            .filter(|&f| gradient[f.index()].is_some() && usable(s.id, f))
            .min_by(|&a, &b| {
                let (ga, gb) = (gradient[a.index()], gradient[b.index()]);
                ga.cmp(&gb).then_with(|| {
                    if better(links, s.id, a, b) {
                        std::cmp::Ordering::Less
                    } else {
                        std::cmp::Ordering::Greater
                    }
                })
            });
        if let Some(p) = best {
            parent[s.id.index()] = Some(p);
            gradient[s.id.index()] = gradient[p.index()].map(|g| g + 1);
        }
    }
    let missing: Vec<NodeId> = (0..n)
        .filter(|&i| gradient[i].is_none() && topo.nodes()[i].role != Role::Repeater)
        .map(|i| NodeId(i as u32))
        .collect();
    if !missing.is_empty() {
        return Err(NetworkError::Disconnected(missing));
    }
    Ok(GradientTable { gradient, parent })
}

pub fn route_next_hop(table: &GradientTable, node: NodeId) -> Result<NodeId, NetworkError> {
    table
        .parent
        .get(node.index())
        .copied()
        .flatten()
        .ok_or(NetworkError::NoRoute(node))
}

/// One schedule cell per repeater or gateway that has children.
pub fn cells(topo: &Topology, table: &GradientTable) -> Vec<ScheduleLayout> {
    topo.nodes()
        .iter()
        .filter(|n| n.role.is_ffd())
        .filter_map(|n| {
            let members = table.children(n.id);
            (!members.is_empty()).then(|| ScheduleLayout::new(n.id, members))
        })
        .collect()
}

/// Packets forwarded per repeater, including repeaters that forwarded none.
pub fn count_router_load<I>(topo: &Topology, forwarders: I) -> BTreeMap<NodeId, u64>
where
    I: IntoIterator<Item = NodeId>,
{
    let mut load: BTreeMap<NodeId, u64> = topo
        .nodes()
        .iter()
        .filter(|n| n.role == Role::Repeater)
        .map(|n| (n.id, 0))
        .collect();
    for f in forwarders {
        if let Some(c) = load.get_mut(&f) {
            *c += 1;
        }
    }
    load
}
