use serde::{Deserialize, Serialize};

use crate::error::{Result, SojournError};
use crate::network::{NetworkSpec, TrafficSolution};

/// Largest state space the builder will enumerate.
pub const MAX_STATES: u128 = 60_000_000;

/// How the marked customer is routed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathMode {
    /// The marked customer routes like everyone else.
    RandomRouting,
    /// The marked customer follows the given node sequence and then leaves;
    /// background customers still route at random.
    FixedPath(Vec<usize>),
}

/// One state of the marked-customer process.
///
/// `counts` excludes the marked customer; at the marked node it is
/// `ahead + behind`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarkedState {
    pub absorbed: bool,
    /// Position along the fixed path, or the node itself under random routing.
    pub stage: usize,
    pub node: usize,
    pub ahead: usize,
    pub counts: Vec<usize>,
}

impl MarkedState {
    pub fn absorbed() -> Self {
        Self {
            absorbed: true,
            stage: 0,
            node: 0,
            ahead: 0,
            counts: Vec::new(),
        }
    }
}

/// Truncated state space with every queue length capped at `cap`.
///
/// Id 0 is the absorbing aggregate. The remaining ids enumerate
/// `(stage, ahead, counts)` lexicographically, with `counts[0]` the most
/// significant digit, and are computed arithmetically rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedStateSpace {
    nodes: usize,
    cap: usize,
    /// Node occupied by the marked customer at each stage.
    stage_nodes: Vec<usize>,
    /// Whether the marked customer follows a fixed path.
    fixed_path: bool,
    entry_stage: usize,
    /// `(cap + 1)^(nodes - 1)`
    others: usize,
    stage_size: usize,
    len: usize,
}

impl MarkedStateSpace {
    /// Space for a marked customer entering at `entry_node`; under a fixed
    /// path the entry is the first path node.
    pub fn new(nodes: usize, cap: usize, mode: &PathMode, entry_node: usize) -> Result<Self> {
        let (stage_nodes, fixed_path, entry_stage) = match mode {
            PathMode::RandomRouting => ((0..nodes).collect(), false, entry_node),
            PathMode::FixedPath(path) => (path.clone(), true, 0),
        };
        let width = cap as u128 + 1;
        let others = width.pow(nodes as u32 - 1);
        let stage_size = width * (width + 1) / 2 * others;
        let total = 1 + stage_size * stage_nodes.len() as u128;
        if total > MAX_STATES {
            return Err(SojournError::StateSpaceTooLarge(total));
        }
        Ok(Self {
            nodes,
            cap,
            stage_nodes,
            fixed_path,
            entry_stage,
            others: others as usize,
            stage_size: stage_size as usize,
            len: total as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn stages(&self) -> usize {
        self.stage_nodes.len()
    }

    pub fn stage_node(&self, stage: usize) -> usize {
        self.stage_nodes[stage]
    }

    pub fn entry_stage(&self) -> usize {
        self.entry_stage
    }

    pub fn is_fixed_path(&self) -> bool {
        self.fixed_path
    }

    /// Number of `counts` vectors per `(stage, ahead)` block.
    fn block_size(&self, ahead: usize) -> usize {
        (self.cap - ahead + 1) * self.others
    }

    fn ahead_offset(&self, ahead: usize) -> usize {
        // sum_{a' < ahead} (cap - a' + 1) * others
        (ahead * (self.cap + 1) - ahead * ahead.saturating_sub(1) / 2) * self.others
    }

    /// Id of a live state. `counts` must respect the cap and `ahead <= counts[node]`.
    pub fn index(&self, stage: usize, ahead: usize, counts: &[usize]) -> usize {
        let node = self.stage_nodes[stage];
        let mut within = 0;
        for (j, &c) in counts.iter().enumerate() {
            if j == node {
                within = within * (self.cap - ahead + 1) + (c - ahead);
            } else {
                within = within * (self.cap + 1) + c;
            }
        }
        1 + stage * self.stage_size + self.ahead_offset(ahead) + within
    }

    pub fn state(&self, id: usize) -> MarkedState {
        if id == 0 {
            return MarkedState::absorbed();
        }
        let mut counts = vec![0; self.nodes];
        let (stage, ahead) = self.decode_into(id, &mut counts);
        MarkedState {
            absorbed: false,
            stage,
            node: self.stage_nodes[stage],
            ahead,
            counts,
        }
    }

    /// Decodes live state `id` into `counts`, returning `(stage, ahead)`.
    pub fn decode_into(&self, id: usize, counts: &mut [usize]) -> (usize, usize) {
        let rest = id - 1;
        let stage = rest / self.stage_size;
        let mut rest = rest % self.stage_size;
        let mut ahead = 0;
        while rest >= self.block_size(ahead) {
            rest -= self.block_size(ahead);
            ahead += 1;
        }
        let node = self.stage_nodes[stage];
        for j in (0..self.nodes).rev() {
            if j == node {
                let radix = self.cap - ahead + 1;
                counts[j] = rest % radix + ahead;
                rest /= radix;
            } else {
                counts[j] = rest % (self.cap + 1);
                rest /= self.cap + 1;
            }
        }
        (stage, ahead)
    }
}

/// Validates the marked customer's entry and path and builds the truncated space.
pub fn build_state_space(
    spec: &NetworkSpec,
    traffic: &TrafficSolution,
    entry_node: usize,
    mode: &PathMode,
    cap: usize,
) -> Result<MarkedStateSpace> {
    traffic.require_stable()?;
    spec.check_node(entry_node)?;
    let open = spec.total_arrival_rate() > 0.0;
    if cap == 0 && open {
        return Err(SojournError::CapTooSmall);
    }
    match mode {
        PathMode::RandomRouting => {
            if open && spec.arrival_rates()[entry_node] <= 0.0 {
                return Err(SojournError::UnreachablePath(format!(
                    "node {entry_node} has no exogenous arrivals"
                )));
            }
        }
        PathMode::FixedPath(path) => {
            for &node in path {
                spec.check_node(node)?;
            }
            if path.first() != Some(&entry_node) {
                return Err(SojournError::UnreachablePath(format!(
                    "path must start at the entry node {entry_node}"
                )));
            }
            for hop in path.windows(2) {
                if spec.routing_probability(hop[0], hop[1]) <= 0.0 {
                    return Err(SojournError::UnreachablePath(format!(
                        "no routing from node {} to node {}",
                        hop[0], hop[1]
                    )));
                }
            }
            let last = *path.last().unwrap();
            if spec.exit_probability(last) <= 0.0 {
                return Err(SojournError::UnreachablePath(format!(
                    "customers cannot leave the network from node {last}"
                )));
            }
        }
    }
    MarkedStateSpace::new(spec.nodes(), cap, mode, entry_node)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force enumeration in the documented lexicographic order.
    fn enumerate(nodes: usize, cap: usize, stage_nodes: &[usize]) -> Vec<(usize, usize, Vec<usize>)> {
        let mut boxes = vec![vec![]];
        for _ in 0..nodes {
            boxes = boxes
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    (0..=cap).map(move |c| {
                        let mut v = prefix.clone();
                        v.push(c);
                        v
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for (stage, &node) in stage_nodes.iter().enumerate() {
            for ahead in 0..=cap {
                for counts in &boxes {
                    if counts[node] >= ahead {
                        out.push((stage, ahead, counts.clone()));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn single_node_cap_two_has_seven_states() {
        let space = MarkedStateSpace::new(1, 2, &PathMode::RandomRouting, 0).unwrap();
        assert_eq!(space.len(), 7);
    }

    #[test]
    fn tandem_cap_one_matches_enumeration() {
        let space = MarkedStateSpace::new(2, 1, &PathMode::RandomRouting, 0).unwrap();
        let states = enumerate(2, 1, &[0, 1]);
        assert_eq!(space.len(), 1 + states.len());
        assert_eq!(space.len(), 13);
    }

    #[test]
    fn ids_follow_lexicographic_enumeration() {
        for (nodes, cap, stage_nodes) in [(1, 3, vec![0]), (2, 2, vec![0, 1]), (3, 2, vec![0, 1, 2]), (3, 1, vec![0, 2, 0])] {
            let mode = PathMode::FixedPath(stage_nodes.clone());
            let space = MarkedStateSpace::new(nodes, cap, &mode, stage_nodes[0]).unwrap();
            let states = enumerate(nodes, cap, &stage_nodes);
            assert_eq!(space.len(), states.len() + 1);
            for (k, (stage, ahead, counts)) in states.iter().enumerate() {
                assert_eq!(space.index(*stage, *ahead, counts), k + 1);
                let s = space.state(k + 1);
                assert_eq!((s.stage, s.ahead, &s.counts), (*stage, *ahead, counts));
                assert_eq!(s.node, stage_nodes[*stage]);
            }
        }
        assert!(MarkedStateSpace::new(1, 3, &PathMode::RandomRouting, 0).unwrap().state(0).absorbed);
    }

    #[test]
    fn cap_zero_only_for_lone_customer() {
        let empty = NetworkSpec::new_allow_empty(vec![0.0], vec![2.0], vec![vec![0.0]]).unwrap();
        let t = empty.solve_traffic().unwrap();
        let space = build_state_space(&empty, &t, 0, &PathMode::RandomRouting, 0).unwrap();
        assert_eq!(space.len(), 2);

        let open = NetworkSpec::tandem(1.0, vec![2.0]).unwrap();
        let t = open.solve_traffic().unwrap();
        assert_eq!(
            build_state_space(&open, &t, 0, &PathMode::RandomRouting, 0),
            Err(SojournError::CapTooSmall)
        );
    }

    #[test]
    fn path_validation() {
        let spec = NetworkSpec::three_node(1.0, [3.0, 2.0, 3.0], 0.5).unwrap();
        let t = spec.solve_traffic().unwrap();
        assert!(build_state_space(&spec, &t, 0, &PathMode::FixedPath(vec![0, 1, 2]), 2).is_ok());
        assert!(build_state_space(&spec, &t, 0, &PathMode::FixedPath(vec![0, 2]), 2).is_ok());
        for bad in [vec![0, 2, 1], vec![1, 2], vec![0, 1]] {
            assert!(matches!(
                build_state_space(&spec, &t, 0, &PathMode::FixedPath(bad), 2),
                Err(SojournError::UnreachablePath(_))
            ));
        }
        assert!(matches!(
            build_state_space(&spec, &t, 1, &PathMode::RandomRouting, 2),
            Err(SojournError::UnreachablePath(_))
        ));
        let unstable = NetworkSpec::tandem(2.0, vec![1.0]).unwrap();
        let ut = unstable.solve_traffic().unwrap();
        assert!(matches!(
            build_state_space(&unstable, &ut, 0, &PathMode::RandomRouting, 3),
            Err(SojournError::UnstableNetwork { .. })
        ));
    }
}
