//! Interval-by-interval runs over a churn trace.

use crate::dof_analytics::{optimize_eta_hat, verify_with, VerifyOptions};
use crate::error::{Error, Result};
use crate::experiment::config::{Dynamics, EtaChoice, Scenario};
use crate::experiment::{join_lengths, num, Table};
use crate::rational::Rational;
use crate::system_model::{AssignmentPolicy, ChurnEvent, NetworkSnapshot, SystemParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalRow {
    pub interval: u64,
    pub lengths: Vec<usize>,
    pub eta_hat: usize,
    /// `None` when the interval has no users to serve.
    pub dof: Option<Rational>,
    pub verified: bool,
}

impl IntervalRow {
    pub fn users(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// Events at time `t <= 1` apply before the first interval; an event at
/// time `t` takes effect at the start of interval `t`.
pub fn simulate_dynamics(
    initial: &NetworkSnapshot,
    params: &SystemParams,
    dynamics: &Dynamics,
    policy: AssignmentPolicy,
    opts: &VerifyOptions,
) -> Result<Vec<IntervalRow>> {
    if let Some(e) = dynamics.events.iter().find(|e| e.time > dynamics.intervals) {
        return Err(Error::Config(format!(
            "event for user {} at time {} is past the last interval {}",
            e.user, e.time, dynamics.intervals
        )));
    }
    let mut snapshot = initial.clone();
    let mut applied = 0;
    let mut rows = Vec::with_capacity(dynamics.intervals as usize);
    for interval in 1..=dynamics.intervals {
        let due = dynamics.events[applied..]
            .iter()
            .take_while(|e| e.time <= interval)
            .count();
        let batch: &[ChurnEvent] = &dynamics.events[applied..applied + due];
        if let (Some(last), Some(next)) = (dynamics.events[..applied].last(), batch.first()) {
            if next.time < last.time {
                return Err(Error::UnorderedEvents {
                    prev: last.time,
                    next: next.time,
                });
            }
        }
        snapshot = snapshot.apply_churn(batch, policy)?;
        applied += due;
        rows.push(interval_row(interval, &snapshot, params, dynamics.eta_policy, opts)?);
    }
    Ok(rows)
}

fn interval_row(
    interval: u64,
    snapshot: &NetworkSnapshot,
    params: &SystemParams,
    eta: EtaChoice,
    opts: &VerifyOptions,
) -> Result<IntervalRow> {
    let lengths = snapshot.lengths().to_vec();
    let empty = IntervalRow {
        interval,
        lengths: lengths.clone(),
        eta_hat: 0,
        dof: None,
        verified: false,
    };
    if snapshot.user_count() == 0 {
        return Ok(match eta {
            EtaChoice::Fixed(e) => IntervalRow { eta_hat: e, ..empty },
            _ => empty,
        });
    }
    let eta_hat = match eta {
        EtaChoice::Fixed(e) => e,
        EtaChoice::Optimize | EtaChoice::Sweep => optimize_eta_hat(&lengths, params)?.best_eta_hat,
    };
    let report = verify_with(snapshot, eta_hat, params, opts)?;
    Ok(IntervalRow {
        interval,
        lengths,
        eta_hat,
        dof: Some(report.dof()),
        verified: report.verification.is_verified(),
    })
}

pub fn dynamics_table(scenario: &Scenario) -> Result<Table> {
    let dynamics = scenario
        .dynamics
        .as_ref()
        .ok_or_else(|| Error::Config("the scenario has no [dynamics] section".into()))?;
    let opts = VerifyOptions {
        exclusion: scenario.exclusion,
        ..Default::default()
    };
    let rows = simulate_dynamics(&scenario.snapshot, &scenario.params, dynamics, scenario.policy, &opts)?;
    let mut t = Table::new(vec!["interval", "users", "lengths", "eta_hat", "dof", "verified"]);
    for r in rows {
        t.rows.push(vec![
            r.interval.to_string(),
            r.users().to_string(),
            join_lengths(&r.lengths),
            r.eta_hat.to_string(),
            r.dof.as_ref().map(num).unwrap_or_default(),
            r.verified.to_string(),
        ]);
    }
    Ok(t)
}
