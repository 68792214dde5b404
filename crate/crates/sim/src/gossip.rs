//! Static random overlay for sibling-to-sibling heartbeat forwarding.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

/// Directed overlay over `n` siblings (local indices `0..n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GossipOverlay {
    /// Out-neighbours per node.
    pub out: Vec<Vec<usize>>,
    /// Nodes that receive directly from the parent.
    pub seeds: Vec<usize>,
}

impl GossipOverlay {
    /// Each node picks `fanout` distinct random peers other than itself; the
    /// parent's seed set is a random sample of `seed_set_size` nodes.
    pub fn build(n: usize, fanout: usize, seed_set_size: usize, rng: &mut impl Rng) -> Self {
        let k = fanout.min(n.saturating_sub(1));
        let out = (0..n)
            .map(|i| {
                index::sample(rng, n - 1, k)
                    .into_iter()
                    .map(|j| if j >= i { j + 1 } else { j })
                    .collect()
            })
            .collect();
        let seeds = index::sample(rng, n, seed_set_size.min(n)).into_vec();
        Self { out, seeds }
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    /// Nodes reachable from the seed set when nothing is dropped.
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = self.seeds.iter().copied().collect();
        let mut stack: Vec<usize> = self.seeds.clone();
        while let Some(v) = stack.pop() {
            for &w in &self.out[v] {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }
}

pub fn default_max_rounds(n: usize) -> u32 {
    (n.max(1) as f64).log2().ceil() as u32 + 3
}

/// One forwarding round: every holder sends to each out-neighbour that does
/// not hold the heartbeat yet, each send dropped independently. Returns the
/// newly reached nodes in ascending order. `blocked` nodes neither send nor
/// receive.
pub fn gossip_round(
    overlay: &GossipOverlay,
    holders: &BTreeSet<usize>,
    per_hop_drop: f64,
    blocked: &dyn Fn(usize) -> bool,
    rng: &mut impl Rng,
) -> (BTreeSet<usize>, u64) {
    let mut reached = BTreeSet::new();
    let mut sends = 0u64;
    for &h in holders {
        if blocked(h) {
            continue;
        }
        for &n in &overlay.out[h] {
            if holders.contains(&n) || reached.contains(&n) || blocked(n) {
                continue;
            }
            sends += 1;
            if rng.gen::<f64>() >= per_hop_drop {
                reached.insert(n);
            }
        }
    }
    (reached, sends)
}
