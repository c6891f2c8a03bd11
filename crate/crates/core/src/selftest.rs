//! Built-in golden checks on the three-profile worked example and the
//! four-profile sweep setup; `dyncc selftest` runs these.

use crate::cc_elevation::{elevate_with_phantoms, make_serving_plan, DeliveryLedger, ExclusionRule};
use crate::dof_analytics::{optimize_eta_hat, verify_against_schedule};
use crate::export::format_cc;
use crate::rational::{int, ratio};
use crate::system_model::{NetworkSnapshot, PlacementMatrix, SystemParams};
use crate::uc_scheduler::run_uc_step;
use crate::virtual_scheduler::{generate_index_sets, PacketAssigner};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let (passed, detail) = match run() {
        Ok(x) => x,
        Err(e) => (false, e.to_string()),
    };
    Check { name, passed, detail }
}

fn example() -> (SystemParams, NetworkSnapshot) {
    (
        SystemParams::new(4, 3, 1).expect("valid"),
        NetworkSnapshot::from_lengths(&[2, 3, 3]),
    )
}

pub const ETA3_FIRST_PRE: &str =
    "CC r=1 j=1 d=1: (1,2,1,{6,2,~1.1}) (2,2,1,{6,1,~1.1}) (~1.1,2,1,{6,1,2}) (3,1,1,{6,4,5}) (4,1,1,{6,3,5}) (5,1,1,{6,3,4}) (6,1,1,{3,4,5})";
pub const ETA3_FIRST_POST: &str =
    "CC r=1 j=1 d=1: (1,2,1,{6,2}) (2,2,1,{6,1}) (3,1,1,{6,4,5}) (4,1,1,{6,3,5}) (5,1,1,{6,3,4}) (6,1,1,{3,4,5})";
pub const ETA2_FIRST: &str =
    "CC r=1 j=1 d=1: (1,2,1,{6,7,2}) (2,2,1,{6,7,1}) (3,1,1,{6,7,4}) (4,1,1,{6,7,3}) (6,1,1,{3,4,7}) (7,1,1,{3,4,6})";

/// First elevated vector for `eta_hat`, before and after phantom removal.
pub fn first_elevated(eta_hat: usize) -> Result<(String, String)> {
    let (params, snapshot) = example();
    let derived = params.derive(eta_hat);
    let sets = generate_index_sets(&params, derived.alpha_bar)?;
    let vt = PacketAssigner::new(&params, &derived)?.assign(&sets[0]);
    let plan = make_serving_plan(&snapshot, eta_hat, ExclusionRule::HighestIds);
    let placement = PlacementMatrix::for_params(&params);
    let txs = elevate_with_phantoms(&vt, &plan, &derived, &placement, &mut DeliveryLedger::new());
    Ok((format_cc(&txs[0]), format_cc(&txs[0].without_phantoms())))
}

pub fn run() -> Vec<Check> {
    vec![
        check("index set r=1 j=1 is (1,2,3)", || {
            let (params, _) = example();
            let sets = generate_index_sets(&params, 2)?;
            let got: Vec<usize> = sets[0].members.iter().map(|m| m + 1).collect();
            Ok((got == [1, 2, 3], format!("{got:?}")))
        }),
        check("eta_hat=3 first vector", || {
            let (pre, post) = first_elevated(3)?;
            Ok((pre == ETA3_FIRST_PRE && post == ETA3_FIRST_POST, post))
        }),
        check("eta_hat=2 first vector and unicast step", || {
            let (_, post) = first_elevated(2)?;
            let (params, snapshot) = example();
            let uc = run_uc_step(&make_serving_plan(&snapshot, 2, ExclusionRule::HighestIds), &params);
            let shape = uc.schedule.len() == 12 && uc.schedule.iter().all(|t| t.streams.len() == 2);
            Ok((
                post == ETA2_FIRST && shape,
                format!("{post}; {} unicast transmissions", uc.schedule.len()),
            ))
        }),
        check("counted DoF is 4 and 56/9", || {
            let (params, snapshot) = example();
            let a = verify_against_schedule(&snapshot, 2, &params)?;
            let b = verify_against_schedule(&snapshot, 3, &params)?;
            let ok = a.dof_counted == Some(int(4)) && b.dof_counted == Some(ratio(56, 9));
            Ok((ok, format!("{} and {}", a.dof(), b.dof())))
        }),
        check("uniform 4-profile curve peaks at 75", || {
            let params = SystemParams::new(50, 4, 1)?;
            let curve = optimize_eta_hat(&[25; 4], &params)?;
            let ok = curve.best_eta_hat == 25 && curve.dof_max == int(75) && curve.dof_at(0) == Some(int(50));
            Ok((ok, format!("max {} at {}", curve.dof_max, curve.best_eta_hat)))
        }),
        check("DoF is not monotonic in eta_hat", || {
            let (params, snapshot) = example();
            let curve = optimize_eta_hat(snapshot.lengths(), &params)?;
            Ok((
                !curve.is_monotonic(),
                format!("{:?}", curve.points.iter().map(|p| p.1.to_string()).collect::<Vec<_>>()),
            ))
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_pass() {
        for c in super::run() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
