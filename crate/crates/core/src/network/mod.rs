//! Node placement, street geometry, link budgets and routing.

mod cross;
mod map_file;
mod routing;

pub use cross::{build_cross_topology, CROSS_CURB_OFFSET, CROSS_GATEWAY_DISTANCE, CROSS_PITCH};
pub use map_file::{build_parking_map, parse_topology_file, TopologyDescription, PARKING_MAP};
pub use routing::{cells, compute_gradients, count_router_load, route_next_hop, GradientTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::NodeId;
use crate::radio::{mean_rx_power_dbm, RadioParams};

fn id_list(ids: &[NodeId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("cannot parse topology file: {0}")]
    Parse(String),
    #[error("tpo_dbm = {0} dBm is below the lowest repeater tier of this map")]
    UnsupportedTpo(f64),
    #[error("nodes without a route to the gateway: {}", id_list(.0))]
    Disconnected(Vec<NodeId>),
    #[error("node {0} has no next hop")]
    NoRoute(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Sensor,
    Repeater,
    Gateway,
}

impl Role {
    /// Full-function devices are always on and can relay.
    pub fn is_ffd(self) -> bool {
        self != Role::Sensor
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Sensor => "sensor",
            Role::Repeater => "repeater",
            Role::Gateway => "gateway",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Straight street given by its centre line and half width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub from: Point,
    pub to: Point,
    pub half_width: f64,
}

impl Street {
    pub fn new(from: Point, to: Point, half_width: f64) -> Self {
        Self {
            from,
            to,
            half_width,
        }
    }

    fn distance_to(&self, p: Point) -> f64 {
        let (dx, dy) = (self.to.x - self.from.x, self.to.y - self.from.y);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.x - self.from.x) * dx + (p.y - self.from.y) * dy) / len2).clamp(0.0, 1.0)
        };
        p.distance(Point::new(self.from.x + t * dx, self.from.y + t * dy))
    }

    pub fn contains(&self, p: Point) -> bool {
        self.distance_to(p) <= self.half_width + 1e-9
    }

    pub fn crosses(&self, o: &Street) -> bool {
        fn orient(a: Point, b: Point, c: Point) -> f64 {
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
        }
        let (a, b, c, d) = (self.from, self.to, o.from, o.to);
        let d1 = orient(c, d, a);
        let d2 = orient(c, d, b);
        let d3 = orient(a, b, c);
        let d4 = orient(a, b, d);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        // Touching or nearly touching ends count as a junction.
        let tol = self.half_width.max(o.half_width);
        self.distance_to(c) <= tol
            || self.distance_to(d) <= tol
            || o.distance_to(a) <= tol
            || o.distance_to(b) <= tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    pub position: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<String>,
}

/// Placed nodes on a street network. Node ids equal their index.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    streets: Vec<Street>,
    gateway: NodeId,
    // street indices containing each node
    on_streets: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, streets: Vec<Street>) -> Result<Self, NetworkError> {
        let mut gateway = None;
        for (i, n) in nodes.iter().enumerate() {
            if n.id.index() != i {
                return Err(NetworkError::Invalid(format!(
                    "node at index {i} has id {}",
                    n.id
                )));
            }
            if !(n.position.x.is_finite() && n.position.y.is_finite()) {
                return Err(NetworkError::Invalid(format!("node {} has a non-finite position", n.id)));
            }
            if n.role == Role::Gateway {
                if gateway.is_some() {
                    return Err(NetworkError::Invalid("more than one gateway".into()));
                }
                gateway = Some(n.id);
            }
        }
        let gateway = gateway.ok_or_else(|| NetworkError::Invalid("no gateway".into()))?;
        if streets.is_empty() {
            return Err(NetworkError::Invalid("no streets".into()));
        }
        let on_streets: Vec<Vec<usize>> = nodes
            .iter()
            .map(|n| {
                streets
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.contains(n.position))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        if let Some(i) = on_streets.iter().position(Vec::is_empty) {
            return Err(NetworkError::Invalid(format!("node {i} is not on any street")));
        }
        Ok(Self {
            nodes,
            streets,
            gateway,
            on_streets,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn gateway(&self) -> NodeId {
        self.gateway
    }

    pub fn sensors(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.role == Role::Sensor)
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors().count()
    }

    pub fn repeater_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.role == Role::Repeater).count()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.node(a).position.distance(self.node(b).position)
    }

    /// Street corners a signal turns between two nodes: 0 on a shared street,
    /// 1 across intersecting streets, 2 otherwise.
    pub fn corners(&self, a: NodeId, b: NodeId) -> u32 {
        let sa = &self.on_streets[a.index()];
        let sb = &self.on_streets[b.index()];
        if sa.iter().any(|s| sb.contains(s)) {
            return 0;
        }
        let crossing = sa
            .iter()
            .any(|&i| sb.iter().any(|&j| self.streets[i].crosses(&self.streets[j])));
        if crossing {
            1
        } else {
            2
        }
    }

    pub fn tpo_of(&self, id: NodeId, radio: &RadioParams) -> f64 {
        if self.node(id).role.is_ffd() {
            radio.ffd_tpo_dbm
        } else {
            radio.tpo_dbm
        }
    }

    pub fn link_table(&self, radio: &RadioParams) -> LinkTable {
        let n = self.len();
        let mut mean_dbm = vec![f64::NEG_INFINITY; n * n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (ia, ib) = (NodeId(a as u32), NodeId(b as u32));
                mean_dbm[a * n + b] = mean_rx_power_dbm(
                    self.tpo_of(ia, radio),
                    self.distance(ia, ib),
                    self.corners(ia, ib),
                    radio,
                );
            }
        }
        LinkTable { n, mean_dbm }
    }
}

/// Mean received power for every ordered (transmitter, receiver) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkTable {
    n: usize,
    mean_dbm: Vec<f64>,
}

impl LinkTable {
    pub fn mean_dbm(&self, tx: NodeId, rx: NodeId) -> f64 {
        self.mean_dbm[tx.index() * self.n + rx.index()]
    }

    /// Weaker direction of a two-way link.
    pub fn two_way_dbm(&self, a: NodeId, b: NodeId) -> f64 {
        self.mean_dbm(a, b).min(self.mean_dbm(b, a))
    }
}
