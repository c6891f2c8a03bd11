//! `eta_hat` and sigma sweeps.

use rayon::prelude::*;

use crate::dof_analytics::{closed_form_dof, optimize_eta_hat, verify_with, DofReport, VerifyOptions};
use crate::error::{Error, Result};
use crate::experiment::config::Scenario;
use crate::experiment::lengths::{compositions, generate_lengths, LengthDistribution, LengthMode};
use crate::experiment::{float, num, Table};
use crate::rational::{int, ratio, Rational};
use crate::system_model::SystemParams;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtaRow {
    pub eta_hat: usize,
    pub eta_ratio: Rational,
    pub dof: Rational,
    pub dof_norm: Rational,
    pub verified: bool,
}

/// One row per `eta_hat` in `0..=max eta_p`; each point is also checked
/// against the built schedule where one exists.
pub fn sweep_eta_rows(scenario: &Scenario) -> Result<Vec<EtaRow>> {
    let params = &scenario.params;
    let lengths = scenario.snapshot.lengths();
    let curve = optimize_eta_hat(lengths, params)?;
    let max = lengths.iter().copied().max().unwrap_or(0) as u128;
    let opts = VerifyOptions {
        exclusion: scenario.exclusion,
        ..Default::default()
    };
    let reports: Vec<DofReport> = curve
        .points
        .par_iter()
        .map(|&(e, _)| verify_with(&scenario.snapshot, e, params, &opts))
        .collect::<Result<_>>()?;
    Ok(reports
        .into_iter()
        .map(|r| EtaRow {
            eta_hat: r.eta_hat,
            eta_ratio: ratio(r.eta_hat as u128, max),
            dof: r.dof(),
            dof_norm: r.dof() / curve.dof_max,
            verified: r.verification.is_verified(),
        })
        .collect())
}

pub fn sweep_eta(scenario: &Scenario) -> Result<Table> {
    let mut t = Table::new(vec!["eta_hat", "eta_ratio", "dof", "dof_norm", "verified"]);
    for r in sweep_eta_rows(scenario)? {
        t.rows.push(vec![
            r.eta_hat.to_string(),
            num(&r.eta_ratio),
            num(&r.dof),
            num(&r.dof_norm),
            r.verified.to_string(),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaRow {
    pub distribution: LengthDistribution,
    pub eta_star: usize,
    pub dof_m: Rational,
    pub dof_opt: Rational,
    pub ratio: Rational,
    pub uc_only_ratio: Rational,
}

/// `K gamma + alpha`, the uniform benchmark.
pub fn dof_opt(users: usize, params: &SystemParams) -> Rational {
    int(users as u128) * params.gamma() + int(params.alpha() as u128)
}

pub fn sigma_row(distribution: LengthDistribution, params: &SystemParams) -> Result<SigmaRow> {
    let curve = optimize_eta_hat(&distribution.lengths, params)?;
    let opt = dof_opt(distribution.users(), params);
    let uc = closed_form_dof(&distribution.lengths, 0, params)?;
    Ok(SigmaRow {
        eta_star: curve.best_eta_hat,
        dof_m: curve.dof_max,
        dof_opt: opt,
        ratio: curve.dof_max / opt,
        uc_only_ratio: uc / opt,
        distribution,
    })
}

/// The distributions a sigma sweep visits, in ascending sigma.
pub fn sigma_distributions(scenario: &Scenario) -> Result<Vec<LengthDistribution>> {
    let cfg = scenario.sigma_sweep.clone().unwrap_or_default();
    let users = cfg.users.unwrap_or(scenario.distribution.users());
    let profiles = scenario.params.profiles();
    if users == 0 {
        return Err(Error::Precondition("sigma sweep needs at least one user".into()));
    }
    let mut all = if cfg.targets.is_empty() {
        let every: Vec<_> = compositions(users, profiles)
            .into_iter()
            .map(LengthDistribution::new)
            .collect();
        if cfg.samples > 0 {
            crate::experiment::lengths::sample(every, cfg.samples, scenario.seed)
        } else {
            every
        }
    } else {
        let mut out = Vec::new();
        for (i, &target) in cfg.targets.iter().enumerate() {
            let mode = match cfg.samples {
                0 => LengthMode::Enumerate,
                count => LengthMode::Sample {
                    count,
                    seed: scenario.seed.wrapping_add(i as u64),
                },
            };
            out.extend(generate_lengths(users, profiles, target, cfg.tolerance, mode)?);
        }
        out
    };
    // stable: ties keep enumeration order
    all.sort_by_key(|d| d.sigma_sq);
    Ok(all)
}

pub fn sweep_sigma_rows(scenario: &Scenario) -> Result<Vec<SigmaRow>> {
    let params = scenario.params;
    sigma_distributions(scenario)?
        .into_par_iter()
        .map(|d| sigma_row(d, &params))
        .collect()
}

pub fn sweep_sigma(scenario: &Scenario) -> Result<Table> {
    let mut t = Table::new(vec!["sigma", "dof_M", "dof_opt", "ratio", "uc_only_ratio"]);
    for r in sweep_sigma_rows(scenario)? {
        t.rows.push(vec![
            float(r.distribution.sigma),
            num(&r.dof_m),
            num(&r.dof_opt),
            num(&r.ratio),
            num(&r.uc_only_ratio),
        ]);
    }
    Ok(t)
}
