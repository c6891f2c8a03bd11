//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Built with `harness = false` so the lines always print. Exits nonzero if
//! any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dyncc::cc_elevation::{make_serving_plan, run_cc_step, BudgetPolicy, ExclusionRule};
use dyncc::dof_analytics::{closed_form_dof, optimize_eta_hat, verify_against_schedule, verify_with, VerifyOptions};
use dyncc::experiment::config::ScenarioConfig;
use dyncc::experiment::sweeps::{sweep_eta_rows, sweep_sigma_rows};
use dyncc::rational::{int, ratio, to_f64, Rational};
use dyncc::selftest::first_elevated;
use dyncc::uc_scheduler::run_uc_step;
use dyncc::virtual_scheduler::{dump_index_sets, generate_index_sets, lemma1_census};
use dyncc::{NetworkSnapshot, PlacementMatrix, SystemParams, UserId};

const MAX_USERS: usize = 15;
const TIME_LIMIT: Duration = Duration::from_secs(300);

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn example() -> (SystemParams, NetworkSnapshot) {
    (
        SystemParams::new(4, 3, 1).unwrap(),
        NetworkSnapshot::from_lengths(&[2, 3, 3]),
    )
}

fn golden(name: &str) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(str::to_owned)
        .collect()
}

fn criterion_1() -> Verdict {
    let (params, _) = example();
    let sets = generate_index_sets(&params, 2).map_err(|e| e.to_string())?;
    let first = dump_index_sets(&sets[..1]);
    ensure(first == "r=1 j=1: (1,2,3)\n", first.trim().to_string())
}

fn criterion_2() -> Verdict {
    let (pre, post) = first_elevated(3).map_err(|e| e.to_string())?;
    let want = golden("eight_users_eta3_first.txt");
    ensure(
        [pre.clone(), post.clone()] == want[..],
        format!("pre: {pre} | post: {post}"),
    )
}

fn criterion_3() -> Verdict {
    let (_, post) = first_elevated(2).map_err(|e| e.to_string())?;
    let (params, snapshot) = example();
    let uc = run_uc_step(&make_serving_plan(&snapshot, 2, ExclusionRule::HighestIds), &params);
    let widths: Vec<usize> = uc.schedule.iter().map(|t| t.streams.len()).collect();
    let targets: Vec<String> = post
        .split(" (")
        .skip(1)
        .map(|t| t.split(',').next().unwrap().to_string())
        .collect();
    ensure(
        vec![post.clone()] == golden("eight_users_eta2_first.txt")
            && targets == ["1", "2", "3", "4", "6", "7"]
            && widths == [2; 12],
        format!(
            "targets {{{}}}; {} unicast transmissions of widths {widths:?}",
            targets.join(","),
            widths.len()
        ),
    )
}

/// Every length vector of `profiles` entries with sum at most `max`.
fn for_each_vector(profiles: usize, max: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(cur: &mut Vec<usize>, left: usize, profiles: usize, f: &mut impl FnMut(&[usize])) {
        if cur.len() == profiles {
            f(cur);
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(cur, left - v, profiles, f);
            cur.pop();
        }
    }
    rec(&mut Vec::with_capacity(profiles), max, profiles, f);
}

#[derive(Default)]
struct Grid {
    configs: usize,
    vectors: u64,
    mismatches: Vec<String>,
    census_failures: Vec<String>,
    completeness_failures: Vec<String>,
    ledgers_checked: usize,
    cross_checked: usize,
    cross_mismatches: Vec<String>,
    cross_budget_violations: usize,
    /// Budget violations outside the two regimes where they are unavoidable
    /// (`eta_hat > alpha`, `t_bar > 1`).
    unexplained_violations: Vec<String>,
    elapsed: Duration,
}

/// Full-pipeline sampling stride per P: every vector for small P.
fn stride(profiles: usize) -> u64 {
    match profiles {
        0..=3 => 1,
        4 => 5,
        _ => 31,
    }
}

/// The whole P in {2..5} x alpha in [1,12] x eta_hat in [1,6] grid.
///
/// Per configuration one CC schedule is built with every slot held by a real
/// user. Streams to a slot do not depend on who else is real, so J_M of any
/// length vector is the number of streams addressed to its real slots in that
/// schedule. UC counts are built once per K_U. A stride of vectors also goes
/// through the per-vector pipeline as a cross-check of that reduction.
fn run_grid() -> Grid {
    let mut g = Grid::default();
    let start = Instant::now();
    for p in 2..=5usize {
        for t in 1..p {
            for alpha in 1..=12usize {
                let Ok(params) = SystemParams::new(alpha, p, t) else {
                    continue;
                };
                for eta in 1..=6usize {
                    let d = params.derive(eta);
                    if !d.schedulable(&params) {
                        continue;
                    }
                    g.configs += 1;
                    grid_config(&mut g, &params, eta);
                }
            }
        }
    }
    g.elapsed = start.elapsed();
    g
}

fn grid_config(g: &mut Grid, params: &SystemParams, eta: usize) {
    let p = params.profiles();
    let tag = format!("P={p} t={} a={} e={eta}", params.t_bar(), params.alpha());
    let d = params.derive(eta);
    let placement = PlacementMatrix::for_params(params);

    let sets = generate_index_sets(params, d.alpha_bar).unwrap();
    let census = lemma1_census(&sets, p);
    if census.iter().flatten().any(|&c| c != params.missing()) {
        g.census_failures.push(format!("{tag}: {census:?}"));
    }

    let full = NetworkSnapshot::from_lengths(&vec![eta; p]);
    let plan = make_serving_plan(&full, eta, ExclusionRule::HighestIds);
    let cc = run_cc_step(&plan, params, BudgetPolicy::Record).unwrap();
    if let Err(e) = cc.ledger.check_complete(plan.served_users(), &placement, d.rho) {
        g.completeness_failures.push(format!("{tag} CC: {e}"));
    }
    g.ledgers_checked += 1;
    // prefix[p][c]: streams to the first c slots of profile p
    let mut per_user: HashMap<UserId, u128> = HashMap::new();
    for s in cc.schedule.iter().flat_map(|tx| &tx.streams) {
        *per_user.entry(s.target.user().expect("no phantoms")).or_default() += 1;
    }
    let prefix: Vec<Vec<u128>> = (0..p)
        .map(|prof| {
            let mut acc = vec![0u128];
            for i in 0..eta {
                let id = UserId((prof * eta + i + 1) as u64);
                acc.push(acc[i] + per_user.get(&id).copied().unwrap_or(0));
            }
            acc
        })
        .collect();

    let mut uc_memo: HashMap<usize, (u128, u128)> = HashMap::new();
    let mut index = 0u64;
    let step = stride(p);
    for_each_vector(p, MAX_USERS, &mut |lengths| {
        g.vectors += 1;
        index += 1;
        let k_u: usize = lengths.iter().map(|&n| n.saturating_sub(eta)).sum();
        let j_m: u128 = lengths.iter().enumerate().map(|(i, &n)| prefix[i][n.min(eta)]).sum();
        let (j_u, t_u) = *uc_memo.entry(k_u).or_insert_with(|| {
            // excess users spread over the profiles in turn
            let mut rep = vec![eta; p];
            for i in 0..k_u {
                rep[i % p] += 1;
            }
            let plan = make_serving_plan(&NetworkSnapshot::from_lengths(&rep), eta, ExclusionRule::HighestIds);
            let uc = run_uc_step(&plan, params);
            if let Err(e) = uc.ledger.check_complete(plan.excluded_users(), &placement, d.rho) {
                g.completeness_failures.push(format!("{tag} UC K_U={k_u}: {e}"));
            }
            g.ledgers_checked += 1;
            (uc.j_u, uc.t_u)
        });
        let counted = ratio(j_m + j_u, cc.t_m + t_u);
        let closed = closed_form_dof(lengths, eta, params).unwrap();
        if counted != closed && g.mismatches.len() < 5 {
            g.mismatches
                .push(format!("{tag} {lengths:?}: counted {counted}, closed {closed}"));
        }

        if index.is_multiple_of(step) {
            g.cross_checked += 1;
            let opts = VerifyOptions {
                budget: BudgetPolicy::Record,
                deep_checks: true,
                ..Default::default()
            };
            match verify_with(&NetworkSnapshot::from_lengths(lengths), eta, params, &opts) {
                Ok(r) => {
                    let c = r.counts;
                    if (c.j_m, c.t_m, c.j_u, c.t_u) != (j_m, cc.t_m, j_u, t_u) {
                        g.cross_mismatches.push(format!("{tag} {lengths:?}: {c:?}"));
                    }
                    if r.budget_violations > 0 {
                        g.cross_budget_violations += 1;
                        if eta <= params.alpha() && params.t_bar() == 1 {
                            g.unexplained_violations.push(format!("{tag} {lengths:?}"));
                        }
                    }
                }
                Err(e) => g.cross_mismatches.push(format!("{tag} {lengths:?}: {e}")),
            }
        }
    });
}

fn criterion_4(g: &Grid) -> Verdict {
    let detail = format!(
        "{} configurations x {} vectors, {} mismatches; {} vectors re-run through the full pipeline, {} disagreements; \
         {} exceed the alpha-1 nulling budget, {} of those outside eta_hat > alpha or t_bar > 1; {:.1}s",
        g.configs,
        g.vectors,
        g.mismatches.len(),
        g.cross_checked,
        g.cross_mismatches.len(),
        g.cross_budget_violations,
        g.unexplained_violations.len(),
        g.elapsed.as_secs_f64()
    );
    let first = g
        .mismatches
        .first()
        .or(g.cross_mismatches.first())
        .or(g.unexplained_violations.first());
    ensure(
        g.mismatches.is_empty()
            && g.cross_mismatches.is_empty()
            && g.unexplained_violations.is_empty()
            && g.elapsed < TIME_LIMIT,
        match first {
            Some(m) => format!("{detail}; first: {m}"),
            None => detail,
        },
    )
}

fn criterion_5() -> Verdict {
    let (params, snapshot) = example();
    let a = verify_against_schedule(&snapshot, 2, &params).map_err(|e| e.to_string())?;
    let b = verify_against_schedule(&snapshot, 3, &params).map_err(|e| e.to_string())?;
    let closed = (
        closed_form_dof(snapshot.lengths(), 2, &params).unwrap(),
        closed_form_dof(snapshot.lengths(), 3, &params).unwrap(),
    );
    ensure(
        a.dof_counted == Some(int(4)) && b.dof_counted == Some(ratio(56, 9)) && closed == (int(4), ratio(56, 9)),
        format!("eta_hat=2 -> {}, eta_hat=3 -> {}", a.dof(), b.dof()),
    )
}

fn criterion_6(g: &Grid) -> Verdict {
    ensure(
        g.census_failures.is_empty(),
        format!(
            "{} configurations, {} exceptions{}",
            g.configs,
            g.census_failures.len(),
            g.census_failures
                .first()
                .map(|f| format!("; first: {f}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_7(g: &Grid) -> Verdict {
    ensure(
        g.completeness_failures.is_empty() && g.cross_mismatches.is_empty(),
        format!(
            "{} ledgers checked plus {} per-vector runs, {} failures{}",
            g.ledgers_checked,
            g.cross_checked,
            g.completeness_failures.len(),
            g.completeness_failures
                .first()
                .map(|f| format!("; first: {f}"))
                .unwrap_or_default()
        ),
    )
}

fn scenario(text: &str) -> dyncc::experiment::config::Scenario {
    ScenarioConfig::from_toml(text).unwrap().resolve(None).unwrap()
}

fn criterion_8() -> Verdict {
    let s = scenario("P = 4\nt_bar = 1\nalpha = 50\nlengths = [25, 25, 25, 25]\neta_hat = \"sweep\"\n");
    let rows = sweep_eta_rows(&s).map_err(|e| e.to_string())?;
    let best = rows.iter().max_by_key(|r| r.dof).unwrap();
    let first_max = rows.iter().find(|r| r.dof == best.dof).unwrap();
    ensure(
        first_max.eta_hat == 25
            && first_max.dof == int(75)
            && first_max.eta_ratio == int(1)
            && first_max.dof_norm == int(1)
            && first_max.verified,
        format!(
            "max {} at eta_hat={} (eta_ratio {}, dof_norm {}, schedule verified: {})",
            first_max.dof, first_max.eta_hat, first_max.eta_ratio, first_max.dof_norm, first_max.verified
        ),
    )
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn criterion_9() -> Verdict {
    let s = scenario("P = 4\nt_bar = 1\nalpha = 50\nlengths = [25, 25, 25, 25]\n");
    let rows = sweep_sigma_rows(&s).map_err(|e| e.to_string())?;
    let two_thirds = ratio(2, 3);
    let uc_ok = rows.iter().all(|r| r.uc_only_ratio == two_thirds);
    let uniform = rows.iter().find(|r| r.distribution.lengths == [25; 4]).map(|r| r.ratio);
    let above: Vec<&Vec<usize>> = rows
        .iter()
        .filter(|r| r.ratio > int(1))
        .map(|r| &r.distribution.lengths)
        .collect();
    let sigmas: Vec<f64> = rows.iter().map(|r| r.distribution.sigma).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| to_f64(&r.ratio)).collect();
    let corr = pearson(&sigmas, &ratios);
    let min: Rational = rows.iter().map(|r| r.ratio).min().unwrap();
    ensure(
        uc_ok && uniform == Some(int(1)) && above.is_empty() && corr < 0.0,
        format!(
            "{} distributions; uc_only ratio 2/3 everywhere: {uc_ok}; uniform ratio {}; {} above 1; \
             min ratio {}; corr(sigma, ratio) = {corr:.3}",
            rows.len(),
            uniform.map(|u| u.to_string()).unwrap_or("missing".into()),
            above.len(),
            min
        ),
    )
}

fn criterion_10() -> Verdict {
    let (params, snapshot) = example();
    let curve = optimize_eta_hat(snapshot.lengths(), &params).map_err(|e| e.to_string())?;
    let points: Vec<String> = curve.points.iter().map(|(e, d)| format!("{e}:{d}")).collect();
    ensure(!curve.is_monotonic(), format!("lengths (2,3,3): {}", points.join(" ")))
}

fn criterion_11() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sigma_sweep.toml");
    std::fs::write(
        &config,
        "P = 4\nt_bar = 1\nalpha = 50\nlengths = [25, 25, 25, 25]\n\n\
         [sigma_sweep]\nusers = 100\ntargets = [0.0, 5.0, 10.0, 20.0, 30.0]\ntolerance = 1.0\nsamples = 20\n",
    )
    .map_err(|e| e.to_string())?;
    let run = |seed: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_dyncc"))
            .args(["sweep-sigma", "--config"])
            .arg(&config)
            .args(["--seed", seed, "--format", "csv"])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok(out.stdout)
    };
    let (a, b, other) = (run("42")?, run("42")?, run("43")?);
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
    ensure(
        a == b && rows > 0 && !a.contains(&b'\r'),
        format!(
            "{rows} rows, {} bytes, identical: {}; seed 43 differs: {}",
            a.len(),
            a == b,
            a != other
        ),
    )
}

fn main() {
    let grid = run_grid();
    let results: Vec<(u8, Verdict)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4(&grid)),
        (5, criterion_5()),
        (6, criterion_6(&grid)),
        (7, criterion_7(&grid)),
        (8, criterion_8()),
        (9, criterion_9()),
        (10, criterion_10()),
        (11, criterion_11()),
    ];
    let mut failed = 0;
    for (id, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {id:>2}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2}: FAIL  {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
