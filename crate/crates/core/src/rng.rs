//! Seeded random streams, one per (batch, node, purpose).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::NodeId;

/// What a stream is used for. Separate purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Traffic = 1,
    InitialStatus = 2,
    Phase = 3,
    Backoff = 4,
    Fading = 5,
    Scenario = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub batch: u32,
    pub node: NodeId,
    pub purpose: Purpose,
}

impl StreamId {
    pub fn new(batch: u32, node: NodeId, purpose: Purpose) -> Self {
        Self {
            batch,
            node,
            purpose,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for a stream. The key depends on the master seed
/// and batch; node and purpose select a ChaCha stream under that key, so adding
/// nodes never perturbs the draws of existing ones.
pub fn stream(seed: u64, id: StreamId) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(0xA5A5_0000_0000_0000 ^ u64::from(id.batch)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream((u64::from(id.node.0) << 8) | id.purpose as u64);
    rng
}
