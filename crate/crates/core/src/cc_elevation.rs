//! Elevation of virtual transmissions onto the real network.
//!
//! Every profile is padded or trimmed to `eta_hat` slots: surplus users are
//! excluded (and later served by the unicast step), short profiles receive
//! phantom slots. Each virtual transmission becomes `eta_hat` real vectors in
//! which every non-last member contributes all of its slots and the last
//! member contributes `b` slots, rotated across the vectors. Phantom streams
//! are built like any other stream and removed at the end.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::system_model::{DerivedParams, NetworkSnapshot, Packet, PlacementMatrix, Profile, SystemParams, UserId};
use crate::virtual_scheduler::{generate_index_sets, PacketAssigner, VirtualTransmission};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Occupant {
    Real(UserId),
    /// Phantom number within its profile, 0-based.
    Phantom(u32),
}

/// One of the `eta_hat` positions of a profile during the CC step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub profile: Profile,
    pub occupant: Occupant,
}

impl Slot {
    pub fn real(profile: Profile, user: UserId) -> Self {
        Self {
            profile,
            occupant: Occupant::Real(user),
        }
    }

    pub fn phantom(profile: Profile, index: u32) -> Self {
        Self {
            profile,
            occupant: Occupant::Phantom(index),
        }
    }

    pub fn is_phantom(&self) -> bool {
        matches!(self.occupant, Occupant::Phantom(_))
    }

    pub fn user(&self) -> Option<UserId> {
        match self.occupant {
            Occupant::Real(u) => Some(u),
            Occupant::Phantom(_) => None,
        }
    }
}

/// Real users print as their id, phantoms as `~<profile>.<n>` (1-based).
impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.occupant {
            Occupant::Real(u) => write!(f, "{u}"),
            Occupant::Phantom(i) => write!(f, "~{}.{}", self.profile + 1, i + 1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileServing {
    /// Served real users, ascending id.
    pub served: Vec<UserId>,
    pub phantoms: usize,
    pub excluded: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServingPlan {
    pub eta_hat: usize,
    pub profiles: Vec<ProfileServing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExclusionRule {
    /// Exclude the highest user ids of an over-full profile.
    #[default]
    HighestIds,
    Seeded(u64),
}

impl ExclusionRule {
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name {
            "highest-ids" => Ok(ExclusionRule::HighestIds),
            "seeded-random" => Ok(ExclusionRule::Seeded(seed)),
            other => Err(Error::Config(format!("unknown exclusion rule `{other}`"))),
        }
    }
}

pub fn make_serving_plan(snapshot: &NetworkSnapshot, eta_hat: usize, rule: ExclusionRule) -> ServingPlan {
    let profiles = (0..snapshot.profiles())
        .map(|p| {
            let mut users = snapshot.users_of(p);
            let keep = users.len().min(eta_hat);
            if let ExclusionRule::Seeded(seed) = rule {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
                users.shuffle(&mut rng);
            }
            let mut excluded = users.split_off(keep);
            users.sort_unstable();
            excluded.sort_unstable();
            ProfileServing {
                served: users,
                phantoms: eta_hat.saturating_sub(keep),
                excluded,
            }
        })
        .collect();
    ServingPlan { eta_hat, profiles }
}

impl ServingPlan {
    pub fn k_m(&self) -> usize {
        self.profiles.iter().map(|p| p.served.len()).sum()
    }

    pub fn k_u(&self) -> usize {
        self.profiles.iter().map(|p| p.excluded.len()).sum()
    }

    pub fn phantom_counts(&self) -> Vec<usize> {
        self.profiles.iter().map(|p| p.phantoms).collect()
    }

    /// The profile's `eta_hat` slots: served users first, then phantoms.
    pub fn slots(&self, profile: Profile) -> Vec<Slot> {
        let serving = &self.profiles[profile];
        serving
            .served
            .iter()
            .map(|&u| Slot::real(profile, u))
            .chain((0..serving.phantoms as u32).map(|i| Slot::phantom(profile, i)))
            .collect()
    }

    pub fn served_users(&self) -> impl Iterator<Item = (UserId, Profile)> + '_ {
        self.profiles
            .iter()
            .enumerate()
            .flat_map(|(p, s)| s.served.iter().map(move |&u| (u, p)))
    }

    pub fn excluded_users(&self) -> impl Iterator<Item = (UserId, Profile)> + '_ {
        self.profiles
            .iter()
            .enumerate()
            .flat_map(|(p, s)| s.excluded.iter().map(move |&u| (u, p)))
    }
}

/// Delivered subpacket indices per (slot, packet).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeliveryLedger {
    entries: BTreeMap<(Slot, Packet), Vec<u32>>,
}

impl DeliveryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves the next unused subpacket index of `packet` for `slot`.
    pub fn next(&mut self, slot: Slot, packet: Packet) -> u32 {
        let delivered = self.entries.entry((slot, packet)).or_default();
        let index = delivered.len() as u32;
        delivered.push(index);
        index
    }

    pub fn record(&mut self, slot: Slot, packet: Packet, subpacket: u32) -> Result<()> {
        let delivered = self.entries.entry((slot, packet)).or_default();
        if delivered.contains(&subpacket) {
            return Err(Error::DuplicateDelivery {
                target: slot.to_string(),
                packet: packet + 1,
                subpacket: subpacket + 1,
            });
        }
        delivered.push(subpacket);
        Ok(())
    }

    pub fn delivered(&self, slot: Slot, packet: Packet) -> &[u32] {
        self.entries.get(&(slot, packet)).map_or(&[], Vec::as_slice)
    }

    pub fn total(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn drop_phantoms(&mut self) {
        self.entries.retain(|(slot, _), _| !slot.is_phantom());
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Slot, Packet), &Vec<u32>)> {
        self.entries.iter()
    }

    /// Each listed user holds exactly subpackets `0..rho` of every packet its
    /// profile misses, and nothing else is recorded for it.
    pub fn check_complete(
        &self,
        users: impl IntoIterator<Item = (UserId, Profile)>,
        placement: &PlacementMatrix,
        rho: usize,
    ) -> Result<()> {
        let mut seen = 0;
        for (user, profile) in users {
            let slot = Slot::real(profile, user);
            for packet in 0..placement.size() {
                let mut got = self.delivered(slot, packet).to_vec();
                got.sort_unstable();
                let ok = if placement.caches(packet, profile) {
                    got.is_empty()
                } else {
                    got.len() == rho && got.iter().enumerate().all(|(i, &s)| s as usize == i)
                };
                if !ok {
                    return Err(Error::Undecodable(format!(
                        "user {user} holds {} subpackets of packet {} (expected {})",
                        got.len(),
                        packet + 1,
                        if placement.caches(packet, profile) { 0 } else { rho }
                    )));
                }
                if !got.is_empty() {
                    seen += 1;
                }
            }
        }
        if seen != self.entries.values().filter(|v| !v.is_empty()).count() {
            return Err(Error::Undecodable("ledger holds deliveries to unlisted users".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub target: Slot,
    pub packet: Packet,
    pub subpacket: u32,
    /// Served slots at which this stream is nulled: other profiles in member
    /// order, then the target's own profile mates.
    pub suppressed_at: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElevatedTransmission {
    pub round: usize,
    pub transmission: usize,
    pub delta: usize,
    pub streams: Vec<Stream>,
}

impl ElevatedTransmission {
    pub fn without_phantoms(&self) -> Self {
        Self {
            round: self.round,
            transmission: self.transmission,
            delta: self.delta,
            streams: self
                .streams
                .iter()
                .filter(|s| !s.target.is_phantom())
                .map(|s| Stream {
                    suppressed_at: s.suppressed_at.iter().copied().filter(|x| !x.is_phantom()).collect(),
                    ..s.clone()
                })
                .collect(),
        }
    }

    pub fn phantom_streams(&self) -> usize {
        self.streams.iter().filter(|s| s.target.is_phantom()).count()
    }

    /// Every target can cancel or is shielded from every other stream.
    pub fn check_decodable(&self, placement: &PlacementMatrix) -> Result<()> {
        for stream in &self.streams {
            let target = stream.target;
            if placement.caches(stream.packet, target.profile) {
                return Err(Error::Undecodable(format!(
                    "{target} already caches packet {}",
                    stream.packet + 1
                )));
            }
            if stream.suppressed_at.contains(&target) {
                return Err(Error::Undecodable(format!(
                    "stream to {target} is nulled at its own target"
                )));
            }
            for other in &self.streams {
                if other.target == target {
                    continue;
                }
                if !placement.caches(other.packet, target.profile) && !other.suppressed_at.contains(&target) {
                    return Err(Error::Undecodable(format!(
                        "in r={} j={} d={}: packet {} for {} interferes at {}",
                        self.round + 1,
                        self.transmission + 1,
                        self.delta + 1,
                        other.packet + 1,
                        other.target,
                        target
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetPolicy {
    /// Fail on the first stream that needs more than `alpha - 1` nulls.
    #[default]
    Enforce,
    /// Build the schedule anyway and count the offending streams.
    Record,
}

/// Elevates one virtual transmission; returns the `eta_hat` vectors before
/// phantom removal. Subpacket indices are reserved in `ledger`.
pub fn elevate_with_phantoms(
    vt: &VirtualTransmission,
    plan: &ServingPlan,
    derived: &DerivedParams,
    placement: &PlacementMatrix,
    ledger: &mut DeliveryLedger,
) -> Vec<ElevatedTransmission> {
    let eta_hat = derived.eta_hat;
    let set = &vt.index_set;
    let last = set.last_position();
    let slots: Vec<Vec<Slot>> = set.members.iter().map(|&m| plan.slots(m)).collect();

    (0..eta_hat)
        .map(|delta| {
            let mut chosen: Vec<(Slot, Packet)> = Vec::with_capacity(derived.rho);
            for (pos, stream) in vt.streams.iter().enumerate() {
                for (i, &slot) in slots[pos].iter().enumerate() {
                    if pos == last && (delta + i) % eta_hat >= derived.b {
                        continue;
                    }
                    chosen.push((slot, stream.packet));
                }
            }
            let streams = chosen
                .iter()
                .map(|&(target, packet)| {
                    let others = chosen
                        .iter()
                        .filter(|(s, _)| s.profile != target.profile && !placement.caches(packet, s.profile));
                    let mates = chosen
                        .iter()
                        .filter(|(s, _)| s.profile == target.profile && *s != target);
                    Stream {
                        target,
                        packet,
                        subpacket: ledger.next(target, packet),
                        suppressed_at: others.chain(mates).map(|&(s, _)| s).collect(),
                    }
                })
                .collect();
            ElevatedTransmission {
                round: set.round,
                transmission: set.transmission,
                delta,
                streams,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elevation {
    pub transmissions: Vec<ElevatedTransmission>,
    pub budget_violations: usize,
}

/// Elevates and removes phantoms, checking the `alpha - 1` nulling budget on
/// the streams that are actually sent.
pub fn elevate(
    vt: &VirtualTransmission,
    plan: &ServingPlan,
    params: &SystemParams,
    derived: &DerivedParams,
    placement: &PlacementMatrix,
    ledger: &mut DeliveryLedger,
    policy: BudgetPolicy,
) -> Result<Elevation> {
    let budget = params.alpha() - 1;
    let mut budget_violations = 0;
    let mut transmissions = Vec::with_capacity(derived.eta_hat);
    for tx in elevate_with_phantoms(vt, plan, derived, placement, ledger) {
        let tx = tx.without_phantoms();
        for stream in &tx.streams {
            if stream.suppressed_at.len() > budget {
                if policy == BudgetPolicy::Enforce {
                    return Err(Error::SuppressionBudget {
                        target: stream.target.to_string(),
                        needed: stream.suppressed_at.len(),
                        budget,
                    });
                }
                budget_violations += 1;
            }
        }
        transmissions.push(tx);
    }
    Ok(Elevation {
        transmissions,
        budget_violations,
    })
}

#[derive(Debug, Clone)]
pub struct CcOutcome {
    pub derived: DerivedParams,
    pub schedule: Vec<ElevatedTransmission>,
    /// Real users only.
    pub ledger: DeliveryLedger,
    pub j_m: u128,
    pub t_m: u128,
    pub budget_violations: usize,
}

/// Runs the whole CC step for a serving plan.
pub fn run_cc_step(plan: &ServingPlan, params: &SystemParams, policy: BudgetPolicy) -> Result<CcOutcome> {
    let derived = params.derive(plan.eta_hat);
    if derived.uc_only() {
        return Err(Error::Precondition("the CC step needs eta_hat >= 1".into()));
    }
    let sets = generate_index_sets(params, derived.alpha_bar)?;
    let assigner = PacketAssigner::new(params, &derived)?;
    let placement = assigner.placement().clone();
    let mut ledger = DeliveryLedger::new();
    let mut schedule = Vec::with_capacity(sets.len() * derived.eta_hat);
    let mut budget_violations = 0;
    for set in &sets {
        let vt = assigner.assign(set);
        let elevation = elevate(&vt, plan, params, &derived, &placement, &mut ledger, policy)?;
        budget_violations += elevation.budget_violations;
        schedule.extend(elevation.transmissions);
    }
    ledger.drop_phantoms();
    let j_m = schedule.iter().map(|t| t.streams.len() as u128).sum();
    let t_m = schedule.len() as u128;
    Ok(CcOutcome {
        derived,
        schedule,
        ledger,
        j_m,
        t_m,
        budget_violations,
    })
}
