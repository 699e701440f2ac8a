use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{render, Cell, ExperimentConfig, ExperimentOutput, OutputFormat, SweepAxis, Table};
use crate::bounds::{bound_mbp, bound_mbp_mric, cone_check, noise_operator_bound, verify_bound, AlgorithmParams};
use crate::cmsv::{
    brute_force_cmsv, estimate_cmsv, estimate_rcsv, mric_upper_bound, CmsvEstimate, Direction, BRUTE_FORCE_MAX_ENTRIES,
};
use crate::ensembles::{draw_gaussian_noise, draw_low_rank_signal, draw_operator, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, operator_norm};
use crate::operator::{MeasurementScenario, NoiseKind, NoiseSpec};
use crate::rng::trial_seed;
use crate::solvers::{solve_mbp, solve_mds, solve_mlasso, RecoveryResult, SolverConfig};

/// Mixed into the seed of the holdout draws so they never reuse a
/// calibration draw.
const HOLDOUT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn strs(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn ensemble_for(cfg: &ExperimentConfig, seed: u64) -> EnsembleSpec {
    EnsembleSpec { seed, ..cfg.ensemble }
}

fn solve(scenario: &MeasurementScenario, params: &AlgorithmParams, cfg: &SolverConfig) -> Result<RecoveryResult> {
    match *params {
        AlgorithmParams::Mbp { epsilon } => solve_mbp(scenario, epsilon, cfg),
        AlgorithmParams::Mds { lambda } => solve_mds(scenario, lambda, cfg),
        AlgorithmParams::Mlasso { mu, .. } => solve_mlasso(scenario, mu, cfg),
    }
}

/// `rho_tau^min` from the brute-force oracle on tiny shapes, the
/// projected-gradient estimator otherwise.
fn rho_min(cfg: &ExperimentConfig, op: &crate::operator::MeasurementOperator, tau: f64, seed: u64) -> Result<CmsvEstimate> {
    let (n1, n2) = op.shape();
    if n1 * n2 <= BRUTE_FORCE_MAX_ENTRIES {
        brute_force_cmsv(op, tau, Direction::Min, cfg.brute_samples, seed)
    } else {
        estimate_cmsv(op, tau, Direction::Min, cfg.starts, seed, &cfg.estimator)
    }
}

fn any_converged(e: &CmsvEstimate) -> bool {
    e.per_start_converged.iter().any(|&c| c)
}

const RECOVER_COLUMNS: [&str; 29] = [
    "trial",
    "seed",
    "n1",
    "n2",
    "m",
    "r",
    "algorithm",
    "parameter",
    "kappa",
    "iterations",
    "converged",
    "feasible",
    "primal_residual",
    "dual_residual",
    "objective",
    "realized_error",
    "relative_error",
    "rho_estimate",
    "rho_subscript",
    "rho_tau",
    "bound_value",
    "holds",
    "slack_ratio",
    "tau_h",
    "tau_limit",
    "hc_nuclear",
    "h0_nuclear",
    "cone_satisfied",
    "noise_condition",
];

/// Draws a scenario per trial, solves it and checks the error bound.
pub fn run_recover(cfg: &ExperimentConfig, format: OutputFormat) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let params = cfg.algorithm.expect("validated");
    let (n1, n2) = (cfg.ensemble.n1, cfg.ensemble.n2);
    let rows: Vec<(Vec<Cell>, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(Vec<Cell>, bool)> {
            let seed = trial_seed(cfg.seed, t as u64);
            let op = draw_operator(&ensemble_for(cfg, seed))?;
            let x = draw_low_rank_signal(n1, n2, cfg.signal.r, cfg.signal.scale, seed)?;
            let noise = NoiseSpec::realize(cfg.noise, op.m(), seed)?;
            let scenario = MeasurementScenario::new(op, x, noise, seed)?;
            let result = solve(&scenario, &params, &cfg.solver)?;
            let realized = frobenius_norm(&(&result.x_hat - &scenario.x_true));
            let mut row: Vec<Cell> = vec![
                t.into(),
                seed.into(),
                n1.into(),
                n2.into(),
                scenario.operator.m().into(),
                cfg.signal.r.into(),
                params.algorithm().name().into(),
                params.parameter().into(),
                params.kappa().into(),
                result.iterations.into(),
                result.converged.into(),
                result.feasible.into(),
                result.primal_residual.into(),
                result.dual_residual.into(),
                result.objective.into(),
                realized.into(),
                (realized / cfg.signal.scale).into(),
            ];
            if cfg.estimate_rho {
                let r = crate::linalg::numerical_rank(&scenario.x_true, crate::linalg::DEFAULT_RANK_TOL)?.max(1);
                let tau = params.rho_subscript(r)?.min(n1.min(n2) as f64);
                let rho = rho_min(cfg, &scenario.operator, tau, seed)?;
                let report = verify_bound(&scenario, &result, &params, &rho)?;
                let i = &report.bound_inputs;
                let c = &report.cone_check;
                row.extend([
                    i.rho_estimate.into(),
                    i.rho_subscript.into(),
                    i.rho_tau.into(),
                    report.bound_value.into(),
                    report.holds.into(),
                    report.slack_ratio.into(),
                    c.tau_h.into(),
                    c.tau_limit.into(),
                    c.hc_nuclear.into(),
                    c.h0_nuclear.into(),
                    c.satisfied.into(),
                    report.noise_condition.into(),
                ]);
            } else {
                let c = cone_check(&result.x_hat, &scenario.x_true, &params)?;
                row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
                row.extend([
                    c.tau_h.into(),
                    c.tau_limit.into(),
                    c.hc_nuclear.into(),
                    c.h0_nuclear.into(),
                    c.satisfied.into(),
                    Cell::Empty,
                ]);
            }
            Ok((row, result.converged))
        })
        .collect::<Result<_>>()?;
    let nonconverged = rows.iter().filter(|r| !r.1).count();
    let table = Table {
        name: "recover".into(),
        columns: strs(&RECOVER_COLUMNS),
        rows: rows.into_iter().map(|r| r.0).collect(),
    };
    render(cfg, vec![table], format, nonconverged)
}

/// Extreme l*-constrained singular values per trial, with the
/// rank-constrained values and both isometry constants when `rank` is set.
pub fn run_cmsv(cfg: &ExperimentConfig, format: OutputFormat) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let tau = cfg.tau.expect("validated");
    let rows: Vec<(Vec<Cell>, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(Vec<Cell>, bool)> {
            let seed = trial_seed(cfg.seed, t as u64);
            let op = draw_operator(&ensemble_for(cfg, seed))?;
            let lo = estimate_cmsv(&op, tau, Direction::Min, cfg.starts, seed, &cfg.estimator)?;
            let hi = estimate_cmsv(&op, tau, Direction::Max, cfg.starts, seed, &cfg.estimator)?;
            let mut row: Vec<Cell> = vec![
                t.into(),
                seed.into(),
                op.m().into(),
                tau.into(),
                lo.value.into(),
                hi.value.into(),
                mric_upper_bound(lo.value, hi.value).ok().into(),
            ];
            if let Some(r) = cfg.rank {
                let nlo = estimate_rcsv(&op, r, Direction::Min, cfg.starts, seed, &cfg.estimator)?;
                let nhi = estimate_rcsv(&op, r, Direction::Max, cfg.starts, seed, &cfg.estimator)?;
                row.extend([
                    r.into(),
                    nlo.value.into(),
                    nhi.value.into(),
                    mric_upper_bound(nlo.value, nhi.value).ok().into(),
                ]);
            } else {
                row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
            }
            Ok((row, any_converged(&lo) && any_converged(&hi)))
        })
        .collect::<Result<_>>()?;
    let nonconverged = rows.iter().filter(|r| !r.1).count();
    let table = Table {
        name: "cmsv".into(),
        columns: strs(&[
            "trial", "seed", "m", "tau", "rho_min", "rho_max", "mric_bound", "rank", "nu_min", "nu_max", "delta",
        ]),
        rows: rows.into_iter().map(|r| r.0).collect(),
    };
    render(cfg, vec![table], format, nonconverged)
}

/// One point of a Monte Carlo sweep over normalized operators `A / sqrt(m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub tau: f64,
    /// Per-trial estimates, in trial order.
    pub rho_min: Vec<f64>,
    pub rho_max: Vec<f64>,
    pub mean_min: f64,
    pub std_min: f64,
    pub mean_max: f64,
    pub std_max: f64,
    /// Fraction of trials with both estimates in `[1 - band, 1 + band]`.
    pub fraction_in_band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub axis: SweepAxis,
    pub band: f64,
    pub trials: usize,
    pub points: Vec<SweepPoint>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs the sweep and returns the aggregate together with the number of
/// trials whose estimator never met its stopping rule.
pub fn run_montecarlo_summary(cfg: &ExperimentConfig) -> Result<(MonteCarloSummary, usize)> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().expect("validated");
    let setups: Vec<(EnsembleSpec, f64)> = sweep
        .values
        .iter()
        .map(|&v| {
            let mut e = cfg.ensemble;
            e.normalize = true;
            let mut tau = cfg.tau.unwrap_or(v);
            match sweep.axis {
                SweepAxis::M => e.m = v as usize,
                SweepAxis::N2 => e.n2 = v as usize,
                SweepAxis::Tau => tau = v,
            }
            (e, tau)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let results: Vec<(f64, f64, bool)> = jobs
        .par_iter()
        .map(|&(p, t)| -> Result<(f64, f64, bool)> {
            let seed = trial_seed(cfg.seed, ((p as u64) << 32) | t as u64);
            let (spec, tau) = setups[p];
            let op = draw_operator(&EnsembleSpec { seed, ..spec })?;
            let lo = estimate_cmsv(&op, tau, Direction::Min, cfg.starts, seed, &cfg.estimator)?;
            let hi = estimate_cmsv(&op, tau, Direction::Max, cfg.starts, seed, &cfg.estimator)?;
            Ok((lo.value, hi.value, any_converged(&lo) && any_converged(&hi)))
        })
        .collect::<Result<_>>()?;
    let nonconverged = results.iter().filter(|r| !r.2).count();
    let points = setups
        .iter()
        .zip(&sweep.values)
        .zip(results.chunks(cfg.trials))
        .map(|((&(spec, tau), &v), chunk)| {
            let rho_min: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            let rho_max: Vec<f64> = chunk.iter().map(|r| r.1).collect();
            let (mean_min, std_min) = mean_std(&rho_min);
            let (mean_max, std_max) = mean_std(&rho_max);
            let (lo, hi) = (1.0 - cfg.band, 1.0 + cfg.band);
            let inside = chunk.iter().filter(|r| r.0 >= lo && r.1 <= hi).count();
            SweepPoint {
                axis_value: v,
                m: spec.m,
                n1: spec.n1,
                n2: spec.n2,
                tau,
                mean_min,
                std_min,
                mean_max,
                std_max,
                fraction_in_band: inside as f64 / cfg.trials as f64,
                rho_min,
                rho_max,
            }
        })
        .collect();
    Ok((
        MonteCarloSummary {
            axis: sweep.axis,
            band: cfg.band,
            trials: cfg.trials,
            points,
        },
        nonconverged,
    ))
}

/// Monte Carlo concentration study: per-trial and per-point tables.
pub fn run_montecarlo(cfg: &ExperimentConfig, format: OutputFormat) -> Result<ExperimentOutput> {
    let (summary, nonconverged) = run_montecarlo_summary(cfg)?;
    let (lo, hi) = (1.0 - cfg.band, 1.0 + cfg.band);
    let mut trial_rows = Vec::new();
    let mut point_rows = Vec::new();
    for (p, pt) in summary.points.iter().enumerate() {
        for (t, (&a, &b)) in pt.rho_min.iter().zip(&pt.rho_max).enumerate() {
            trial_rows.push(vec![
                p.into(),
                pt.axis_value.into(),
                t.into(),
                trial_seed(cfg.seed, ((p as u64) << 32) | t as u64).into(),
                pt.m.into(),
                pt.n2.into(),
                pt.tau.into(),
                a.into(),
                b.into(),
                mric_upper_bound(a, b).ok().into(),
                (a >= lo && b <= hi).into(),
            ]);
        }
        point_rows.push(vec![
            p.into(),
            pt.axis_value.into(),
            pt.m.into(),
            pt.n1.into(),
            pt.n2.into(),
            pt.tau.into(),
            summary.trials.into(),
            pt.mean_min.into(),
            pt.std_min.into(),
            pt.mean_max.into(),
            pt.std_max.into(),
            summary.band.into(),
            pt.fraction_in_band.into(),
        ]);
    }
    let tables = vec![
        Table {
            name: "montecarlo_trials".into(),
            columns: strs(&[
                "point", "axis_value", "trial", "seed", "m", "n2", "tau", "rho_min", "rho_max", "mric_bound", "in_band",
            ]),
            rows: trial_rows,
        },
        Table {
            name: "montecarlo_summary".into(),
            columns: strs(&[
                "point",
                "axis_value",
                "m",
                "n1",
                "n2",
                "tau",
                "trials",
                "mean_rho_min",
                "std_rho_min",
                "mean_rho_max",
                "std_rho_max",
                "band",
                "fraction_in_band",
            ]),
            rows: point_rows,
        },
    ];
    render(cfg, tables, format, nonconverged)
}

/// Basis pursuit over a grid of noise levels on oracle-sized instances:
/// the l*-CMSV bound with a brute-force `rho` next to the isometry-constant
/// bound with `delta` from the rank-constrained singular values.
pub fn run_bounds_ledger(cfg: &ExperimentConfig, format: OutputFormat) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (n1, n2) = (cfg.ensemble.n1, cfg.ensemble.n2);
    let p = n1.min(n2);
    let r = cfg.signal.r;
    let rho_tau = (8 * r).min(p) as f64;
    let nu_rank = (4 * r).min(p);
    let per_trial: Vec<Vec<(Vec<Cell>, bool)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<(Vec<Cell>, bool)>> {
            let seed = trial_seed(cfg.seed, t as u64);
            let op = draw_operator(&ensemble_for(cfg, seed))?;
            let x = draw_low_rank_signal(n1, n2, r, cfg.signal.scale, seed)?;
            let rho = brute_force_cmsv(&op, rho_tau, Direction::Min, cfg.brute_samples, seed)?.value;
            let nu_min = estimate_rcsv(&op, nu_rank, Direction::Min, cfg.starts, seed, &cfg.estimator)?.value;
            let nu_max = estimate_rcsv(&op, nu_rank, Direction::Max, cfg.starts, seed, &cfg.estimator)?.value;
            let delta = mric_upper_bound(nu_min, nu_max)?;
            cfg.noise_levels
                .iter()
                .map(|&epsilon| {
                    let noise = NoiseSpec::realize(NoiseKind::Bounded { epsilon }, op.m(), seed)?;
                    let scenario = MeasurementScenario::new(op.clone(), x.clone(), noise, seed)?;
                    let result = solve_mbp(&scenario, epsilon, &cfg.solver)?;
                    let realized = frobenius_norm(&(&result.x_hat - &scenario.x_true));
                    let floor = realized.max(1e-12);
                    let cmsv_bound = match bound_mbp(epsilon, rho) {
                        Ok(b) => Some(b),
                        Err(Error::Inapplicable(_)) => None,
                        Err(e) => return Err(e),
                    };
                    let mric_bound = match bound_mbp_mric(epsilon, delta) {
                        Ok(b) => Some(b),
                        Err(Error::Inapplicable(_)) => None,
                        Err(e) => return Err(e),
                    };
                    let bound_cells = |b: Option<f64>| -> [Cell; 2] {
                        match b {
                            Some(b) => [b.into(), (b / floor).into()],
                            None => ["inapplicable".into(), Cell::Empty],
                        }
                    };
                    let mut row: Vec<Cell> = vec![
                        t.into(),
                        seed.into(),
                        epsilon.into(),
                        r.into(),
                        rho_tau.into(),
                        rho.into(),
                        nu_rank.into(),
                        nu_min.into(),
                        nu_max.into(),
                        delta.into(),
                        realized.into(),
                    ];
                    row.extend(bound_cells(cmsv_bound));
                    row.extend(bound_cells(mric_bound));
                    row.push(result.converged.into());
                    Ok((row, result.converged))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<(Vec<Cell>, bool)> = per_trial.into_iter().flatten().collect();
    let nonconverged = rows.iter().filter(|r| !r.1).count();
    let table = Table {
        name: "bounds".into(),
        columns: strs(&[
            "trial",
            "seed",
            "epsilon",
            "r",
            "rho_tau",
            "rho_estimate",
            "nu_rank",
            "nu_min",
            "nu_max",
            "delta_estimate",
            "realized_error",
            "cmsv_bound",
            "cmsv_slack",
            "mric_bound",
            "mric_slack",
            "converged",
        ]),
        rows: rows.into_iter().map(|r| r.0).collect(),
    };
    render(cfg, vec![table], format, nonconverged)
}

/// Distribution of `||A^*(w)||` for the configured operator and noise level.
///
/// `lambda` is the smallest order statistic covering the configured
/// quantile with the configured confidence; a fresh holdout set reports how
/// often the true signal is then feasible for the Dantzig selector, and
/// `mu = lambda / kappa` is suggested for the LASSO.
pub fn run_noise_calibration(cfg: &ExperimentConfig, format: OutputFormat) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let sigma = match cfg.noise {
        NoiseKind::Gaussian { sigma } => sigma,
        _ => unreachable!("validated"),
    };
    let c = &cfg.calibration;
    let op = draw_operator(&ensemble_for(cfg, cfg.seed))?;
    let cal = noise_operator_bound(&op, sigma, c.c, cfg.trials, cfg.seed)?;
    let lambda = cal.coverage_quantile(c.quantile, c.confidence);
    let holdout = if c.holdout_trials == 0 { cfg.trials } else { c.holdout_trials };
    let feasible = (0..holdout)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let w = draw_gaussian_noise(op.m(), sigma, trial_seed(cfg.seed ^ HOLDOUT_SALT, t as u64))?;
            Ok(operator_norm(&op.adjoint(&w)?)? <= lambda)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&f| f)
        .count();

    let trial_rows = cal
        .values
        .iter()
        .enumerate()
        .map(|(t, &v)| vec![t.into(), trial_seed(cfg.seed, t as u64).into(), v.into(), (v > cal.threshold).into()])
        .collect();
    let summary_row = vec![
        sigma.into(),
        op.m().into(),
        op.shape().1.into(),
        cfg.trials.into(),
        c.c.into(),
        cal.threshold.into(),
        cal.exceed_fraction.into(),
        cal.quantile(0.5).into(),
        cal.quantile(0.9).into(),
        cal.quantile(0.95).into(),
        cal.quantile(0.99).into(),
        c.quantile.into(),
        c.confidence.into(),
        lambda.into(),
        holdout.into(),
        (feasible as f64 / holdout as f64).into(),
        c.kappa.into(),
        (lambda / c.kappa).into(),
    ];
    let tables = vec![
        Table {
            name: "noise_calibration_trials".into(),
            columns: strs(&["trial", "seed", "adjoint_norm", "exceeds_threshold"]),
            rows: trial_rows,
        },
        Table {
            name: "noise_calibration".into(),
            columns: strs(&[
                "sigma",
                "m",
                "n2",
                "trials",
                "c",
                "threshold",
                "exceed_fraction",
                "q50",
                "q90",
                "q95",
                "q99",
                "target_quantile",
                "confidence",
                "lambda",
                "holdout_trials",
                "holdout_feasible_fraction",
                "kappa",
                "mu",
            ]),
            rows: vec![summary_row],
        },
    ];
    render(cfg, tables, format, 0)
}

#[cfg(test)]
mod tests {
    use super::super::{run, CalibrationSpec, ExperimentKind, Sweep};
    use super::*;
    use crate::ensembles::EnsembleKind;

    fn base(kind: ExperimentKind) -> ExperimentConfig {
        serde_json::from_value(serde_json::json!({
            "kind": kind,
            "ensemble": {"kind": "gaussian", "n1": 2, "n2": 2, "m": 4},
        }))
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = base(ExperimentKind::Cmsv);
        assert_eq!(c.trials, 1);
        assert_eq!(c.starts, 32);
        assert_eq!(c.estimator.abs_tol, 1e-12);
        assert_eq!(c.estimator.max_iters, 20_000);
        assert_eq!(c.calibration, CalibrationSpec::default());
        assert_eq!(c.ensemble.kind, EnsembleKind::Gaussian);
    }

    #[test]
    fn validation_rejects_missing_pieces() {
        assert!(base(ExperimentKind::Recover).validate().is_err());
        assert!(base(ExperimentKind::Cmsv).validate().is_err());
        assert!(base(ExperimentKind::Montecarlo).validate().is_err());
        assert!(base(ExperimentKind::Bounds).validate().is_err());
        assert!(base(ExperimentKind::NoiseCalibration).validate().is_err());
        let mut c = base(ExperimentKind::Cmsv);
        c.tau = Some(3.0);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.tau = Some(1.5);
        c.trials = 0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json("{\"kind\": \"recover\"}").is_err());
        assert!(ExperimentConfig::from_json("{\"kind\": \"cmsv\", \"bogus\": 1}").is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = base(ExperimentKind::Cmsv);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output_path = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn recover_noiseless_is_exact_and_deterministic() {
        let mut c = base(ExperimentKind::Recover);
        c.ensemble.n1 = 3;
        c.ensemble.n2 = 3;
        c.ensemble.m = 9;
        c.algorithm = Some(AlgorithmParams::Mbp { epsilon: 0.0 });
        c.trials = 3;
        c.brute_samples = 10_000;
        let a = run(&c, OutputFormat::Both).unwrap();
        let b = run(&c, OutputFormat::Both).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.files.len(), 2);
        let csv = &a.files[0].contents;
        assert!(csv.starts_with("trial,seed,"));
        assert_eq!(csv.lines().count(), 4);
        assert!(!csv.contains('\r'));
        assert!(csv.contains(&c.hash()));
        let json: serde_json::Value = serde_json::from_str(&a.files[1].contents).unwrap();
        assert_eq!(json["version"], crate::VERSION);
        for rec in json["records"].as_array().unwrap() {
            assert!(rec["relative_error"].as_f64().unwrap() < 1e-6);
            assert_eq!(rec["cone_satisfied"], true);
        }
    }

    #[test]
    fn cmsv_rows_are_ordered() {
        let mut c = base(ExperimentKind::Cmsv);
        c.tau = Some(1.5);
        c.rank = Some(1);
        c.trials = 3;
        c.starts = 4;
        let out = run(&c, OutputFormat::Json).unwrap();
        let json: serde_json::Value = serde_json::from_str(&out.files[0].contents).unwrap();
        let recs = json["records"].as_array().unwrap();
        for (t, rec) in recs.iter().enumerate() {
            assert_eq!(rec["trial"], t as u64);
            let (lo, hi) = (rec["rho_min"].as_f64().unwrap(), rec["rho_max"].as_f64().unwrap());
            assert!(lo <= hi);
            assert!(rec["nu_min"].as_f64().unwrap() >= lo * 0.98);
        }
    }

    #[test]
    fn montecarlo_summary_shape() {
        let mut c = base(ExperimentKind::Montecarlo);
        c.ensemble.n1 = 3;
        c.ensemble.n2 = 3;
        c.tau = Some(2.0);
        c.sweep = Some(Sweep {
            axis: SweepAxis::M,
            values: vec![9.0, 36.0],
        });
        c.trials = 4;
        c.starts = 2;
        let (s, _) = run_montecarlo_summary(&c).unwrap();
        assert_eq!(s.points.len(), 2);
        for p in &s.points {
            assert_eq!(p.rho_min.len(), 4);
            assert!((0.0..=1.0).contains(&p.fraction_in_band));
            for (a, b) in p.rho_min.iter().zip(&p.rho_max) {
                assert!(a <= b);
            }
        }
        assert_eq!(s.points[1].m, 36);
    }

    #[test]
    fn bounds_ledger_zero_noise_row() {
        let mut c = base(ExperimentKind::Bounds);
        c.noise_levels = vec![0.0, 0.05];
        c.brute_samples = 10_000;
        c.starts = 4;
        let out = run(&c, OutputFormat::Json).unwrap();
        let json: serde_json::Value = serde_json::from_str(&out.files[0].contents).unwrap();
        let recs = json["records"].as_array().unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0]["realized_error"].as_f64().unwrap() < 1e-6);
        assert_eq!(recs[0]["cmsv_bound"].as_f64().unwrap(), 0.0);
        let mric = &recs[0]["mric_bound"];
        assert!(mric == "inapplicable" || mric.as_f64() == Some(0.0));
    }

    #[test]
    fn noise_calibration_scales_with_sigma() {
        let mut c = base(ExperimentKind::NoiseCalibration);
        c.trials = 40;
        c.noise = NoiseKind::Gaussian { sigma: 0.5 };
        let a = run(&c, OutputFormat::Json).unwrap();
        c.noise = NoiseKind::Gaussian { sigma: 1.0 };
        let b = run(&c, OutputFormat::Json).unwrap();
        let get = |o: &ExperimentOutput| -> serde_json::Value {
            serde_json::from_str(&o.files[1].contents).unwrap()
        };
        let (ja, jb) = (get(&a), get(&b));
        for q in ["q50", "q90", "q95", "q99", "lambda"] {
            let qa = ja["records"][0][q].as_f64().unwrap();
            let qb = jb["records"][0][q].as_f64().unwrap();
            assert_eq!(qb, 2.0 * qa, "{q}");
        }
        c.noise = NoiseKind::Gaussian { sigma: 0.0 };
        let z = get(&run(&c, OutputFormat::Json).unwrap());
        assert_eq!(z["records"][0]["q99"].as_f64().unwrap(), 0.0);
    }
}
