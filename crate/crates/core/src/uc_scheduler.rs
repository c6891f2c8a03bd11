//! Greedy unicast delivery for users excluded from the CC step.
//!
//! Each excluded user starts with a backlog of `(P - t_bar) * rho`
//! subpackets. Every transmission serves the `alpha` users with the largest
//! backlog (ties to the smaller id), one subpacket each.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::cc_elevation::{DeliveryLedger, ServingPlan, Slot};
use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};
use crate::system_model::{Packet, PlacementMatrix, Profile, SystemParams, UserId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcStream {
    pub user: UserId,
    pub profile: Profile,
    pub packet: Packet,
    pub subpacket: u32,
    /// Co-served users that do not cache `packet`.
    pub suppressed_at: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcTransmission {
    pub index: usize,
    pub streams: Vec<UcStream>,
}

#[derive(Debug, Clone)]
pub struct UcOutcome {
    pub rho: usize,
    pub schedule: Vec<UcTransmission>,
    pub ledger: DeliveryLedger,
    pub j_u: u128,
    pub t_u: u128,
}

struct Backlog {
    user: UserId,
    profile: Profile,
    missing: Vec<Packet>,
    delivered: usize,
    total: usize,
}

impl Backlog {
    fn remaining(&self) -> usize {
        self.total - self.delivered
    }
}

pub fn run_uc_step(plan: &ServingPlan, params: &SystemParams) -> UcOutcome {
    let rho = params.derive(plan.eta_hat).rho;
    let placement = PlacementMatrix::for_params(params);
    let mut backlogs: Vec<Backlog> = plan
        .excluded_users()
        .map(|(user, profile)| {
            let missing: Vec<Packet> = placement.missing_at(profile).collect();
            let total = missing.len() * rho;
            Backlog {
                user,
                profile,
                missing,
                delivered: 0,
                total,
            }
        })
        .collect();

    let mut heap: BinaryHeap<(usize, Reverse<UserId>, usize)> = backlogs
        .iter()
        .enumerate()
        .filter(|(_, b)| b.remaining() > 0)
        .map(|(i, b)| (b.remaining(), Reverse(b.user), i))
        .collect();

    let alpha = params.alpha();
    let mut ledger = DeliveryLedger::new();
    let mut schedule = Vec::new();
    let mut j_u = 0u128;
    while !heap.is_empty() {
        let picked: Vec<usize> = (0..alpha).map_while(|_| heap.pop()).map(|(_, _, i)| i).collect();
        let mut items = Vec::with_capacity(picked.len());
        for &i in &picked {
            let b = &mut backlogs[i];
            let packet = b.missing[b.delivered / rho];
            let subpacket = (b.delivered % rho) as u32;
            b.delivered += 1;
            ledger
                .record(Slot::real(b.profile, b.user), packet, subpacket)
                .expect("each backlog position is visited once");
            items.push((b.user, b.profile, packet, subpacket));
            if b.remaining() > 0 {
                heap.push((b.remaining(), Reverse(b.user), i));
            }
        }
        let streams = items
            .iter()
            .map(|&(user, profile, packet, subpacket)| UcStream {
                user,
                profile,
                packet,
                subpacket,
                suppressed_at: items
                    .iter()
                    .filter(|&&(u, p, _, _)| u != user && !placement.caches(packet, p))
                    .map(|&(u, ..)| u)
                    .collect(),
            })
            .collect::<Vec<_>>();
        j_u += streams.len() as u128;
        schedule.push(UcTransmission {
            index: schedule.len(),
            streams,
        });
    }
    let t_u = schedule.len() as u128;
    UcOutcome {
        rho,
        schedule,
        ledger,
        j_u,
        t_u,
    }
}

/// `J_U / T_U`.
pub fn uc_dof(j_u: u128, t_u: u128) -> Result<Rational> {
    if t_u == 0 {
        return Err(Error::UndefinedDof("no unicast transmissions".into()));
    }
    Ok(ratio(j_u, t_u))
}
