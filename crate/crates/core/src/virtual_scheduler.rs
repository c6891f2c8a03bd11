//! Index sets and packet assignment for the virtual network.
//!
//! The virtual network has one virtual user per profile, coded caching gain
//! `t_bar` and spatial gain `alpha_bar`. Every round `r` has `P - t_bar`
//! transmissions; transmission `j` of round `r` serves the profiles in its
//! index set. The base round is built from a window rule and every later
//! round is the base round shifted by `r` (mod P).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::system_model::{DerivedParams, Packet, PlacementMatrix, Profile, SystemParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualIndexSet {
    pub round: usize,
    pub transmission: usize,
    /// `t_bar` holders (profiles `r..r+t_bar-1`) followed by `alpha_bar` receivers.
    pub members: Vec<Profile>,
}

impl VirtualIndexSet {
    pub fn last_position(&self) -> usize {
        self.members.len() - 1
    }

    pub fn position_of(&self, profile: Profile) -> Option<usize> {
        self.members.iter().position(|&m| m == profile)
    }
}

/// All `P * (P - t_bar)` index sets, ordered by round then transmission.
pub fn generate_index_sets(params: &SystemParams, alpha_bar: usize) -> Result<Vec<VirtualIndexSet>> {
    let p = params.profiles();
    let t_bar = params.t_bar();
    if alpha_bar == 0 {
        return Err(Error::InvalidParams("alpha_bar must be positive".into()));
    }
    if t_bar + alpha_bar > p {
        return Err(Error::UnsupportedRegime {
            needed: t_bar + alpha_bar,
            profiles: p,
        });
    }
    let span = p - t_bar;
    let base: Vec<Vec<Profile>> = (0..span)
        .map(|j| {
            (0..t_bar)
                .chain((0..alpha_bar).map(|i| (i + j) % span + t_bar))
                .collect()
        })
        .collect();
    let mut sets = Vec::with_capacity(p * span);
    for round in 0..p {
        for (transmission, members) in base.iter().enumerate() {
            sets.push(VirtualIndexSet {
                round,
                transmission,
                members: members.iter().map(|&m| (m + round) % p).collect(),
            });
        }
    }
    Ok(sets)
}

/// `count[profile][position]`: how often each profile sits at each position.
pub fn lemma1_census(sets: &[VirtualIndexSet], profiles: usize) -> Vec<Vec<usize>> {
    let width = sets.first().map_or(0, |s| s.members.len());
    let mut count = vec![vec![0; width]; profiles];
    for set in sets {
        for (position, &profile) in set.members.iter().enumerate() {
            count[profile][position] += 1;
        }
    }
    count
}

/// One line per set, `r=<r> j=<j>: (p1,...)`, all labels 1-based.
pub fn dump_index_sets(sets: &[VirtualIndexSet]) -> String {
    let mut out = String::new();
    for set in sets {
        let members: Vec<String> = set.members.iter().map(|m| (m + 1).to_string()).collect();
        let _ = writeln!(
            out,
            "r={} j={}: ({})",
            set.round + 1,
            set.transmission + 1,
            members.join(",")
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualStream {
    pub target: Profile,
    pub packet: Packet,
    /// Members at which this stream is nulled.
    pub suppressed_at: Vec<Profile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualTransmission {
    pub index_set: VirtualIndexSet,
    /// One stream per member, in member order.
    pub streams: Vec<VirtualStream>,
}

impl VirtualTransmission {
    fn build(index_set: &VirtualIndexSet, packets: &[Packet], placement: &PlacementMatrix) -> Self {
        let streams = index_set
            .members
            .iter()
            .zip(packets)
            .map(|(&target, &packet)| VirtualStream {
                target,
                packet,
                suppressed_at: index_set
                    .members
                    .iter()
                    .copied()
                    .filter(|&m| m != target && !placement.caches(packet, m))
                    .collect(),
            })
            .collect();
        Self {
            index_set: index_set.clone(),
            streams,
        }
    }

    /// Checks the virtual decodability conditions with nulling budget `alpha_bar - 1`.
    pub fn check(&self, placement: &PlacementMatrix, alpha_bar: usize) -> Result<()> {
        for stream in &self.streams {
            if placement.caches(stream.packet, stream.target) {
                return Err(Error::Undecodable(format!(
                    "virtual user {} already caches packet {}",
                    stream.target + 1,
                    stream.packet + 1
                )));
            }
            if stream.suppressed_at.len() + 1 > alpha_bar {
                return Err(Error::SuppressionBudget {
                    target: format!("virtual user {}", stream.target + 1),
                    needed: stream.suppressed_at.len(),
                    budget: alpha_bar - 1,
                });
            }
            for &m in &self.index_set.members {
                if m != stream.target && !placement.caches(stream.packet, m) && !stream.suppressed_at.contains(&m) {
                    return Err(Error::Undecodable(format!(
                        "packet {} for virtual user {} interferes at {}",
                        stream.packet + 1,
                        stream.target + 1,
                        m + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form assignment for `t_bar = 1`: the holder gets the packet of the
/// second member, every receiver gets the holder's cached packet.
pub fn assign_packets(index_set: &VirtualIndexSet, params: &SystemParams) -> Result<VirtualTransmission> {
    if params.t_bar() != 1 {
        return Err(Error::NeedsConstraintSearch(params.t_bar()));
    }
    let placement = PlacementMatrix::for_params(params);
    let m = &index_set.members;
    let packets: Vec<Packet> = (0..m.len()).map(|pos| if pos == 0 { m[1] } else { m[0] }).collect();
    Ok(VirtualTransmission::build(index_set, &packets, &placement))
}

/// Packet assignment for any `t_bar`.
///
/// Receivers of round `r` always get packet `r`, the one packet cached by all
/// holders. Holder packets come from a table over the base round: for each
/// holder position, transmissions are matched one-to-one with the packets the
/// holder misses, using only pairs that keep the stream decodable under both
/// the virtual budget `alpha_bar - 1` and the real budget `alpha - 1` once
/// elevated. Pairs left over when no perfect matching exists are filled in
/// order, so every missing packet is still covered exactly once.
#[derive(Debug, Clone)]
pub struct PacketAssigner {
    params: SystemParams,
    derived: DerivedParams,
    placement: PlacementMatrix,
    base_sets: Vec<VirtualIndexSet>,
    holder_packets: Vec<Vec<Packet>>,
    unmatched: usize,
}

impl PacketAssigner {
    pub fn new(params: &SystemParams, derived: &DerivedParams) -> Result<Self> {
        if params.t_bar() == 1 {
            Self::closed_form(params, derived)
        } else {
            Self::search(params, derived)
        }
    }

    fn base_sets(params: &SystemParams, derived: &DerivedParams) -> Result<Vec<VirtualIndexSet>> {
        let mut sets = generate_index_sets(params, derived.alpha_bar)?;
        sets.truncate(params.missing());
        Ok(sets)
    }

    fn closed_form(params: &SystemParams, derived: &DerivedParams) -> Result<Self> {
        let base_sets = Self::base_sets(params, derived)?;
        let placement = PlacementMatrix::for_params(params);
        let holder_packets = vec![base_sets.iter().map(|s| s.members[1]).collect()];
        let mut assigner = Self {
            params: *params,
            derived: *derived,
            placement,
            base_sets,
            holder_packets,
            unmatched: 0,
        };
        assigner.unmatched = assigner.count_invalid();
        Ok(assigner)
    }

    /// Matching-based assignment; valid for every `t_bar`.
    pub fn search(params: &SystemParams, derived: &DerivedParams) -> Result<Self> {
        let base_sets = Self::base_sets(params, derived)?;
        let placement = PlacementMatrix::for_params(params);
        let mut assigner = Self {
            params: *params,
            derived: *derived,
            placement,
            base_sets,
            holder_packets: Vec::new(),
            unmatched: 0,
        };
        let span = params.missing();
        for holder in 0..params.t_bar() {
            let candidates: Vec<Packet> = assigner.placement.missing_at(holder).collect();
            let edges: Vec<Vec<usize>> = (0..span)
                .map(|j| {
                    (0..candidates.len())
                        .filter(|&c| assigner.holder_edge_ok(holder, j, candidates[c]))
                        .collect()
                })
                .collect();
            let (mut matched, size) = max_matching(&edges, candidates.len());
            assigner.unmatched += span - size;
            let used: Vec<usize> = matched.iter().flatten().copied().collect();
            let mut free = (0..candidates.len()).filter(|c| !used.contains(c));
            for slot in matched.iter_mut() {
                if slot.is_none() {
                    *slot = free.next();
                }
            }
            assigner
                .holder_packets
                .push(matched.into_iter().map(|c| candidates[c.expect("square")]).collect());
        }
        Ok(assigner)
    }

    /// Whether packet `q` for holder `holder` in base transmission `j` fits both budgets.
    fn holder_edge_ok(&self, holder: Profile, j: usize, q: Packet) -> bool {
        let set = &self.base_sets[j];
        let last = set.last_position();
        let mut virtual_nulls = 0;
        let mut real_nulls = self.derived.eta_hat - 1;
        for (pos, &m) in set.members.iter().enumerate() {
            if m == holder || self.placement.caches(q, m) {
                continue;
            }
            virtual_nulls += 1;
            real_nulls += if pos == last {
                self.derived.b
            } else {
                self.derived.eta_hat
            };
        }
        virtual_nulls < self.derived.alpha_bar && real_nulls < self.params.alpha()
    }

    fn count_invalid(&self) -> usize {
        self.holder_packets
            .iter()
            .enumerate()
            .map(|(holder, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(j, &q)| !self.holder_edge_ok(holder, j, q))
                    .count()
            })
            .sum()
    }

    /// Holder/transmission pairs whose packet could not satisfy the nulling budgets.
    pub fn unmatched(&self) -> usize {
        self.unmatched
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn placement(&self) -> &PlacementMatrix {
        &self.placement
    }

    pub fn assign(&self, index_set: &VirtualIndexSet) -> VirtualTransmission {
        let p = self.params.profiles();
        let r = index_set.round;
        let packets: Vec<Packet> = (0..index_set.members.len())
            .map(|pos| match self.holder_packets.get(pos) {
                Some(row) => (row[index_set.transmission] + r) % p,
                None => r,
            })
            .collect();
        VirtualTransmission::build(index_set, &packets, &self.placement)
    }
}

/// Kuhn's augmenting-path matching. `edges[left]` lists admissible right
/// vertices; returns the right vertex matched to each left vertex.
fn max_matching(edges: &[Vec<usize>], right: usize) -> (Vec<Option<usize>>, usize) {
    fn augment(u: usize, edges: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &edges[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, edges, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }

    let mut owner = vec![None; right];
    let mut size = 0;
    for u in 0..edges.len() {
        let mut seen = vec![false; right];
        if augment(u, edges, &mut seen, &mut owner) {
            size += 1;
        }
    }
    let mut matched = vec![None; edges.len()];
    for (v, u) in owner.iter().enumerate() {
        if let Some(u) = u {
            matched[*u] = Some(v);
        }
    }
    (matched, size)
}
