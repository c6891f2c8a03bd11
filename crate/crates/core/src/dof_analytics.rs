//! DoF from schedule counts and from the closed form, and the line search
//! over `eta_hat`.

use std::fmt::Write as _;

use num_traits::Zero;

use crate::cc_elevation::{make_serving_plan, run_cc_step, BudgetPolicy, ExclusionRule, ServingPlan};
use crate::error::{Error, Result};
use crate::rational::{ceil_div, describe, int, ratio, Rational};
use crate::system_model::{NetworkSnapshot, PlacementMatrix, SystemParams};
use crate::uc_scheduler::run_uc_step;

/// The six quantities the DoF is built from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeliveryCounts {
    pub k_m: u128,
    pub k_u: u128,
    pub j_m: u128,
    pub t_m: u128,
    pub j_u: u128,
    pub t_u: u128,
}

impl DeliveryCounts {
    pub fn dof(&self) -> Result<Rational> {
        let t = self.t_m + self.t_u;
        if t == 0 {
            return Err(Error::UndefinedDof("no transmissions".into()));
        }
        Ok(ratio(self.j_m + self.j_u, t))
    }
}

fn served_split(lengths: &[usize], eta_hat: usize) -> (u128, u128) {
    let k_m = lengths.iter().map(|&n| n.min(eta_hat) as u128).sum();
    let k_u = lengths.iter().map(|&n| n.saturating_sub(eta_hat) as u128).sum();
    (k_m, k_u)
}

fn check_lengths(lengths: &[usize], params: &SystemParams) -> Result<()> {
    if lengths.len() != params.profiles() {
        return Err(Error::InvalidParams(format!(
            "{} profile lengths given for P = {}",
            lengths.len(),
            params.profiles()
        )));
    }
    Ok(())
}

/// `J_M, T_M, J_U, T_U` from their closed forms.
pub fn closed_form_counts(lengths: &[usize], eta_hat: usize, params: &SystemParams) -> Result<DeliveryCounts> {
    check_lengths(lengths, params)?;
    let (k_m, k_u) = served_split(lengths, eta_hat);
    let p = params.profiles() as u128;
    let missing = params.missing() as u128;
    let rho = params.derive(eta_hat).rho as u128;
    let j_u = k_u * missing * rho;
    Ok(DeliveryCounts {
        k_m,
        k_u,
        j_m: k_m * missing * rho,
        t_m: p * missing * eta_hat as u128,
        j_u,
        t_u: if k_u == 0 {
            0
        } else {
            ceil_div(j_u, k_u.min(params.alpha() as u128))
        },
    })
}

/// DoF by the three-case closed form, selected on `K_U`.
///
/// `eta_hat = 0` is unicast-only; it is undefined for an empty network.
pub fn closed_form_dof(lengths: &[usize], eta_hat: usize, params: &SystemParams) -> Result<Rational> {
    check_lengths(lengths, params)?;
    let (k_m, k_u) = served_split(lengths, eta_hat);
    let p = params.profiles() as u128;
    let t_bar = params.t_bar() as u128;
    let alpha = params.alpha() as u128;
    let eta = eta_hat as u128;
    let missing = p - t_bar; // P - P*gamma as well
    let rho = eta * t_bar + alpha;

    if k_u == 0 {
        if eta == 0 {
            return Err(Error::UndefinedDof("eta_hat = 0 with no users".into()));
        }
        return Ok(int(k_m) * params.gamma() + ratio(k_m * alpha, p * eta));
    }
    let numer = k_m * missing * rho + k_u * missing * rho;
    let cc_transmissions = p * missing * eta;
    let denom = if k_u < alpha {
        cc_transmissions + missing * rho
    } else {
        cc_transmissions + ceil_div(k_u * missing * rho, alpha)
    };
    Ok(ratio(numer, denom))
}

/// Full-multicast value `K gamma + alpha eta_avg / eta_hat`, for `eta_hat >= max eta_p`.
pub fn remark_dof(lengths: &[usize], eta_hat: usize, params: &SystemParams) -> Result<Rational> {
    check_lengths(lengths, params)?;
    let k: usize = lengths.iter().sum();
    let max = lengths.iter().copied().max().unwrap_or(0);
    if k == 0 {
        return Err(Error::Precondition("full multicasting needs at least one user".into()));
    }
    if eta_hat == 0 || eta_hat < max {
        return Err(Error::Precondition(format!(
            "full multicasting needs eta_hat >= max eta_p = {max}, got {eta_hat}"
        )));
    }
    let eta_avg = ratio(k as u128, params.profiles() as u128);
    Ok(int(k as u128) * params.gamma() + int(params.alpha() as u128) * eta_avg / int(eta_hat as u128))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verification {
    Verified,
    Unverified(String),
}

impl Verification {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verification::Verified)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofReport {
    pub eta_hat: usize,
    /// Counted from the schedules when verified, closed-form otherwise.
    pub counts: DeliveryCounts,
    pub dof_counted: Option<Rational>,
    pub dof_closed_form: Rational,
    pub verification: Verification,
    /// Streams whose nulling set exceeded `alpha - 1` (only under `BudgetPolicy::Record`).
    pub budget_violations: usize,
}

impl DofReport {
    pub fn dof(&self) -> Rational {
        self.dof_counted.unwrap_or(self.dof_closed_form)
    }

    /// Flat `key=value` lines.
    pub fn render(&self) -> String {
        let c = &self.counts;
        let mut out = String::new();
        let _ = writeln!(out, "eta_hat={}", self.eta_hat);
        for (k, v) in [
            ("K_M", c.k_m),
            ("K_U", c.k_u),
            ("J_M", c.j_m),
            ("T_M", c.t_m),
            ("J_U", c.j_u),
            ("T_U", c.t_u),
        ] {
            let _ = writeln!(out, "{k}={v}");
        }
        match &self.dof_counted {
            Some(d) => {
                let _ = writeln!(out, "dof_counted={}", describe(d));
            }
            None => out.push_str("dof_counted=\n"),
        }
        let _ = writeln!(out, "dof_closed_form={}", describe(&self.dof_closed_form));
        let _ = writeln!(out, "verified={}", self.verification.is_verified());
        if let Verification::Unverified(reason) = &self.verification {
            let _ = writeln!(out, "reason={reason}");
        }
        if self.budget_violations > 0 {
            let _ = writeln!(out, "budget_violations={}", self.budget_violations);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    pub exclusion: ExclusionRule,
    pub budget: BudgetPolicy,
    /// Also check ledger completeness and per-vector decodability.
    pub deep_checks: bool,
}

pub fn verify_against_schedule(snapshot: &NetworkSnapshot, eta_hat: usize, params: &SystemParams) -> Result<DofReport> {
    verify_with(snapshot, eta_hat, params, &VerifyOptions::default())
}

/// Builds both delivery steps, counts them and checks the count against the
/// closed form. Regimes without a schedule come back unverified.
pub fn verify_with(
    snapshot: &NetworkSnapshot,
    eta_hat: usize,
    params: &SystemParams,
    opts: &VerifyOptions,
) -> Result<DofReport> {
    let lengths = snapshot.lengths();
    let closed = closed_form_dof(lengths, eta_hat, params)?;
    let closed_counts = closed_form_counts(lengths, eta_hat, params)?;
    let unverified = |reason: String| DofReport {
        eta_hat,
        counts: closed_counts,
        dof_counted: None,
        dof_closed_form: closed,
        verification: Verification::Unverified(reason),
        budget_violations: 0,
    };

    let derived = params.derive(eta_hat);
    if !derived.uc_only() && !derived.schedulable(params) {
        return Ok(unverified(format!(
            "t_bar + alpha_bar = {} exceeds P = {}",
            derived.set_len(params),
            params.profiles()
        )));
    }
    let plan = make_serving_plan(snapshot, eta_hat, opts.exclusion);
    let (counts, budget_violations) = match count_schedule(&plan, params, opts) {
        Ok(x) => x,
        Err(e @ Error::SuppressionBudget { .. }) => return Ok(unverified(e.to_string())),
        Err(e) => return Err(e),
    };
    let counted = counts.dof()?;
    if counted != closed {
        return Err(Error::DofMismatch {
            eta_hat,
            counted: describe(&counted),
            closed: describe(&closed),
        });
    }
    Ok(DofReport {
        eta_hat,
        counts,
        dof_counted: Some(counted),
        dof_closed_form: closed,
        verification: Verification::Verified,
        budget_violations,
    })
}

/// Counts of the CC and UC schedules built for `plan`.
pub fn count_schedule(
    plan: &ServingPlan,
    params: &SystemParams,
    opts: &VerifyOptions,
) -> Result<(DeliveryCounts, usize)> {
    let mut counts = DeliveryCounts {
        k_m: plan.k_m() as u128,
        k_u: plan.k_u() as u128,
        ..Default::default()
    };
    let placement = PlacementMatrix::for_params(params);
    let mut violations = 0;
    if plan.eta_hat > 0 {
        let cc = run_cc_step(plan, params, opts.budget)?;
        if opts.deep_checks {
            cc.ledger
                .check_complete(plan.served_users(), &placement, cc.derived.rho)?;
            if cc.budget_violations == 0 {
                for tx in &cc.schedule {
                    tx.check_decodable(&placement)?;
                }
            }
        }
        counts.j_m = cc.j_m;
        counts.t_m = cc.t_m;
        violations = cc.budget_violations;
    }
    let uc = run_uc_step(plan, params);
    if opts.deep_checks {
        uc.ledger.check_complete(plan.excluded_users(), &placement, uc.rho)?;
    }
    counts.j_u = uc.j_u;
    counts.t_u = uc.t_u;
    Ok((counts, violations))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofCurve {
    pub points: Vec<(usize, Rational)>,
    /// Smallest maximizing `eta_hat`.
    pub best_eta_hat: usize,
    pub dof_max: Rational,
}

impl DofCurve {
    pub fn dof_at(&self, eta_hat: usize) -> Option<Rational> {
        self.points.iter().find(|(e, _)| *e == eta_hat).map(|(_, d)| *d)
    }

    pub fn is_monotonic(&self) -> bool {
        let inc = self.points.windows(2).all(|w| w[0].1 <= w[1].1);
        let dec = self.points.windows(2).all(|w| w[0].1 >= w[1].1);
        inc || dec
    }
}

/// Closed-form DoF for every `eta_hat` in `0..=max eta_p`.
pub fn optimize_eta_hat(lengths: &[usize], params: &SystemParams) -> Result<DofCurve> {
    let k: usize = lengths.iter().sum();
    if k == 0 {
        return Err(Error::Precondition("line search needs at least one user".into()));
    }
    let max = lengths.iter().copied().max().unwrap_or(0);
    let points = (0..=max)
        .map(|e| closed_form_dof(lengths, e, params).map(|d| (e, d)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = (0, Rational::zero());
    for &(e, d) in &points {
        if d > best.1 {
            best = (e, d);
        }
    }
    Ok(DofCurve {
        points,
        best_eta_hat: best.0,
        dof_max: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_params() -> SystemParams {
        SystemParams::new(4, 3, 1).unwrap()
    }

    #[test]
    fn example_one_closed_form() {
        let p = example_params();
        // 8 * (1/3) + 8 * 4 / 9
        assert_eq!(closed_form_dof(&[2, 3, 3], 3, &p).unwrap(), ratio(56, 9));
        assert_eq!(closed_form_dof(&[2, 3, 3], 2, &p).unwrap(), int(4));
        let c = closed_form_counts(&[2, 3, 3], 2, &p).unwrap();
        assert_eq!((c.j_m, c.t_m, c.j_u, c.t_u), (72, 12, 24, 12));
    }

    #[test]
    fn four_profiles_full_multicast() {
        let p = SystemParams::new(50, 4, 1).unwrap();
        let lengths = [25, 25, 25, 25];
        assert_eq!(closed_form_dof(&lengths, 25, &p).unwrap(), int(75));
        assert_eq!(remark_dof(&lengths, 25, &p).unwrap(), int(75));
        assert_eq!(closed_form_dof(&lengths, 0, &p).unwrap(), int(50));
    }

    #[test]
    fn remark_preconditions() {
        let p = example_params();
        assert!(matches!(remark_dof(&[0, 0, 0], 1, &p), Err(Error::Precondition(_))));
        assert!(matches!(remark_dof(&[2, 3, 3], 2, &p), Err(Error::Precondition(_))));
        assert_eq!(
            remark_dof(&[2, 3, 3], 3, &p).unwrap(),
            closed_form_dof(&[2, 3, 3], 3, &p).unwrap()
        );
    }

    #[test]
    fn empty_network_unicast_only_is_undefined() {
        let p = example_params();
        assert!(matches!(
            closed_form_dof(&[0, 0, 0], 0, &p),
            Err(Error::UndefinedDof(_))
        ));
        assert_eq!(closed_form_dof(&[0, 0, 0], 1, &p).unwrap(), int(0));
    }

    #[test]
    fn counts_agree_with_cases() {
        for p in 2..=6 {
            for t in 1..p {
                for alpha in 1..=10 {
                    let Ok(params) = SystemParams::new(alpha, p, t) else {
                        continue;
                    };
                    for lengths in [vec![3; p], (0..p).collect(), (0..p).map(|i| 7 * (i % 2)).collect()] {
                        for eta_hat in 0..=8 {
                            let closed = closed_form_dof(&lengths, eta_hat, &params);
                            let counts = closed_form_counts(&lengths, eta_hat, &params).unwrap().dof();
                            assert_eq!(closed.is_ok(), counts.is_ok());
                            if let (Ok(a), Ok(b)) = (closed, counts) {
                                assert_eq!(a, b, "P={p} t={t} a={alpha} e={eta_hat} {lengths:?}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_lengths_hit_the_benchmark() {
        for p in 2..=6 {
            for t in 1..p {
                for alpha in 1..=12 {
                    let Ok(params) = SystemParams::new(alpha, p, t) else {
                        continue;
                    };
                    for eta in 1..=6 {
                        let lengths = vec![eta; p];
                        let k = (p * eta) as u128;
                        let expected = int(k) * params.gamma() + int(alpha as u128);
                        assert_eq!(closed_form_dof(&lengths, eta, &params).unwrap(), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn verify_example_one() {
        let p = example_params();
        let s = NetworkSnapshot::from_lengths(&[2, 3, 3]);
        let r = verify_against_schedule(&s, 2, &p).unwrap();
        assert_eq!(
            r.counts,
            DeliveryCounts {
                k_m: 6,
                k_u: 2,
                j_m: 72,
                t_m: 12,
                j_u: 24,
                t_u: 12
            }
        );
        assert_eq!(r.dof_counted, Some(int(4)));
        assert!(r.verification.is_verified());

        let r = verify_against_schedule(&s, 3, &p).unwrap();
        assert_eq!(
            r.counts,
            DeliveryCounts {
                k_m: 8,
                k_u: 0,
                j_m: 112,
                t_m: 18,
                j_u: 0,
                t_u: 0
            }
        );
        assert_eq!(r.dof_counted, Some(ratio(56, 9)));

        let text = r.render();
        assert!(text.contains("dof_counted=56/9 (6.22222222222)\n"));
        assert!(text.contains("verified=true\n"));
    }

    #[test]
    fn verify_uniform_small() {
        let p = SystemParams::new(2, 3, 1).unwrap();
        let s = NetworkSnapshot::from_lengths(&[1, 1, 1]);
        let r = verify_against_schedule(&s, 1, &p).unwrap();
        assert_eq!(r.dof_counted, Some(int(3)));
    }

    #[test]
    fn unrealizable_regime_is_flagged() {
        let p = example_params();
        let s = NetworkSnapshot::from_lengths(&[2, 3, 3]);
        // alpha_bar = 4, t_bar + alpha_bar = 5 > 3
        let r = verify_against_schedule(&s, 1, &p).unwrap();
        assert!(!r.verification.is_verified());
        assert_eq!(r.dof(), ratio(80, 19));
        assert!(r.render().contains("reason="));
    }

    #[test]
    fn example_one_curve_is_not_monotonic() {
        let curve = optimize_eta_hat(&[2, 3, 3], &example_params()).unwrap();
        let values: Vec<_> = curve.points.iter().map(|(_, d)| *d).collect();
        assert_eq!(values, vec![int(4), ratio(80, 19), int(4), ratio(56, 9)]);
        assert_eq!(curve.best_eta_hat, 3);
        assert_eq!(curve.dof_max, ratio(56, 9));
        assert!(!curve.is_monotonic());
    }

    #[test]
    fn uniform_curve_peaks_at_full_multicast() {
        let p = SystemParams::new(50, 4, 1).unwrap();
        let curve = optimize_eta_hat(&[25, 25, 25, 25], &p).unwrap();
        assert_eq!(curve.best_eta_hat, 25);
        assert_eq!(curve.dof_max, int(75));
        assert_eq!(curve.dof_at(0), Some(int(50)));
    }

    #[test]
    fn skewed_curve_contains_unicast_endpoint() {
        let p = SystemParams::new(50, 4, 1).unwrap();
        let curve = optimize_eta_hat(&[100, 0, 0, 0], &p).unwrap();
        assert_eq!(curve.points.len(), 101);
        assert_eq!(curve.dof_at(0), Some(int(50)));
        assert!(optimize_eta_hat(&[0, 0, 0, 0], &p).is_err());
    }
}
