//! Plain-text and CSV renderings of delivery schedules (1-based labels).
//!
//! ```text
//! CC r=1 j=1 d=1: (1,2,1,{6,2}) (2,2,1,{6,1}) ...
//! UC t=1: (5,2,1,{8}) (8,1,1,{5})
//! ```
//! Each tuple is `(target, packet, subpacket, {nulled at})`.

use std::fmt::Write as _;

use crate::cc_elevation::{run_cc_step, BudgetPolicy, CcOutcome, ElevatedTransmission, ServingPlan};
use crate::error::Result;
use crate::experiment::Table;
use crate::system_model::SystemParams;
use crate::uc_scheduler::{run_uc_step, UcOutcome, UcTransmission};

fn braces<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    let inner: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

pub fn format_cc(tx: &ElevatedTransmission) -> String {
    let mut line = format!("CC r={} j={} d={}:", tx.round + 1, tx.transmission + 1, tx.delta + 1);
    for s in &tx.streams {
        let _ = write!(
            line,
            " ({},{},{},{})",
            s.target,
            s.packet + 1,
            s.subpacket + 1,
            braces(&s.suppressed_at)
        );
    }
    line
}

pub fn format_uc(tx: &UcTransmission) -> String {
    let mut line = format!("UC t={}:", tx.index + 1);
    for s in &tx.streams {
        let _ = write!(
            line,
            " ({},{},{},{})",
            s.user,
            s.packet + 1,
            s.subpacket + 1,
            braces(&s.suppressed_at)
        );
    }
    line
}

/// Both steps of one delivery phase.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub cc: Option<CcOutcome>,
    pub uc: UcOutcome,
}

pub fn build_schedule(plan: &ServingPlan, params: &SystemParams, policy: BudgetPolicy) -> Result<Schedule> {
    let cc = if plan.eta_hat > 0 {
        Some(run_cc_step(plan, params, policy)?)
    } else {
        None
    };
    Ok(Schedule {
        cc,
        uc: run_uc_step(plan, params),
    })
}

impl Schedule {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tx in self.cc.iter().flat_map(|c| &c.schedule) {
            out.push_str(&format_cc(tx));
            out.push('\n');
        }
        for tx in &self.uc.schedule {
            out.push_str(&format_uc(tx));
            out.push('\n');
        }
        out
    }

    /// One row per stream.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(vec![
            "step",
            "r",
            "j",
            "d",
            "target",
            "packet",
            "subpacket",
            "nulled_at",
        ]);
        for tx in self.cc.iter().flat_map(|c| &c.schedule) {
            for s in &tx.streams {
                t.rows.push(vec![
                    "CC".into(),
                    (tx.round + 1).to_string(),
                    (tx.transmission + 1).to_string(),
                    (tx.delta + 1).to_string(),
                    s.target.to_string(),
                    (s.packet + 1).to_string(),
                    (s.subpacket + 1).to_string(),
                    s.suppressed_at
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                ]);
            }
        }
        for tx in &self.uc.schedule {
            for s in &tx.streams {
                t.rows.push(vec![
                    "UC".into(),
                    String::new(),
                    (tx.index + 1).to_string(),
                    String::new(),
                    s.user.to_string(),
                    (s.packet + 1).to_string(),
                    (s.subpacket + 1).to_string(),
                    s.suppressed_at
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                ]);
            }
        }
        t
    }
}
