use super::{NetworkError, Node, Point, Role, Street, Topology};
use crate::engine::NodeId;

/// Spacing between neighbouring sensors along an arm.
pub const CROSS_PITCH: f64 = 5.0;
/// Lateral offset of a sensor from the street centre line.
pub const CROSS_CURB_OFFSET: f64 = 3.0;
/// Distance from the gateway to the nearest sensors.
pub const CROSS_GATEWAY_DISTANCE: f64 = 10.0;

const ARM_LENGTH: f64 = 1000.0;
const HALF_WIDTH: f64 = 8.0;

/// Order in which sensor positions are filled: (side, first index, end index).
/// Each size class extends the previous one, so a node id keeps its position
/// as the network grows.
fn blocks() -> impl Iterator<Item = (usize, usize, usize)> {
    let mut lo = 0usize;
    let mut hi = 3usize;
    std::iter::from_fn(move || {
        let out = [(0, lo, hi), (1, lo, hi)];
        lo = hi;
        hi *= 2;
        Some(out)
    })
    .flatten()
}

/// Single cell around a crossroads: gateway at the centre, sensors on the
/// four arms at a fixed pitch. 12, 24, 48 and 96 sensors give 1x3, 2x3, 2x6
/// and 2x12 sensors per arm (sides x depth).
pub fn build_cross_topology(n: usize) -> Result<Topology, NetworkError> {
    if n == 0 {
        return Err(NetworkError::Invalid("need at least one sensor".into()));
    }
    let first = (CROSS_GATEWAY_DISTANCE.powi(2) - CROSS_CURB_OFFSET.powi(2)).sqrt();
    let arms = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let mut nodes = vec![Node {
        id: NodeId(0),
        role: Role::Gateway,
        position: Point::new(0.0, 0.0),
        tier: None,
    }];
    'fill: for (side, lo, hi) in blocks() {
        let lateral = if side == 0 {
            CROSS_CURB_OFFSET
        } else {
            -CROSS_CURB_OFFSET
        };
        for r in lo..hi {
            let along = first + r as f64 * CROSS_PITCH;
            for &(dx, dy) in &arms {
                if nodes.len() > n {
                    break 'fill;
                }
                // lateral axis is the arm direction rotated by 90 degrees
                let p = Point::new(dx * along - dy * lateral, dy * along + dx * lateral);
                nodes.push(Node {
                    id: NodeId(nodes.len() as u32),
                    role: Role::Sensor,
                    position: p,
                    tier: None,
                });
            }
        }
        if nodes.len() > n {
            break;
        }
    }
    nodes.truncate(n + 1);
    let streets = vec![
        Street::new(Point::new(-ARM_LENGTH, 0.0), Point::new(ARM_LENGTH, 0.0), HALF_WIDTH),
        Street::new(Point::new(0.0, -ARM_LENGTH), Point::new(0.0, ARM_LENGTH), HALF_WIDTH),
    ];
    Topology::new(nodes, streets)
}
