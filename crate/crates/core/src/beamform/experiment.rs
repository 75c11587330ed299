use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reformulate::{grid_minimize, simplex_grid};
use crate::socp::SolverConfig;

use super::mvdr::{optimal_sinr, sinr, smi_mvdr, solve_beam_rows, BeamRow};
use super::{
    assemble_snapshots, draw_run, power_to_db, sample_covariance, true_covariances, BeamformScenario,
};

/// Grid spacing of the allocation search in the joint experiment.
pub const JOINT_GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Smi,
    Optimal,
    Joint,
    Individual,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Smi => "smi",
            Method::Optimal => "optimal",
            Method::Joint => "joint",
            Method::Individual => "individual",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output SINR statistics in dB over the successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub snr_db: f64,
    pub method: Method,
    pub mean_sinr_db: f64,
    pub std_sinr_db: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: BeamformScenario,
    /// Ordered by SNR, then by method.
    pub stats: Vec<MethodStats>,
}

impl ExperimentResult {
    pub fn get(&self, snr_db: f64, method: Method) -> Option<&MethodStats> {
        self.stats.iter().find(|s| s.snr_db == snr_db && s.method == method)
    }
}

/// Mean and sample standard deviation with compensated sums, in input order.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = neumaier(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = neumaier(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

type RunOutcome = Vec<Vec<Option<f64>>>;

/// Runs `per_snr` for every run and SNR, then aggregates per method in run
/// order so the result does not depend on scheduling.
fn run_grid<F>(sc: &BeamformScenario, methods: &[Method], per_snr: F) -> Result<ExperimentResult>
where
    F: Fn(&BeamformScenario, f64, &super::RunDraws) -> Vec<Option<f64>> + Sync,
{
    sc.validate()?;
    let outcomes: Vec<RunOutcome> = (0..sc.runs)
        .into_par_iter()
        .map(|run| {
            let draws = draw_run(sc, sc.seed ^ run as u64);
            sc.snr_db.iter().map(|&snr| per_snr(sc, snr, &draws)).collect()
        })
        .collect();
    let mut stats = Vec::with_capacity(sc.snr_db.len() * methods.len());
    for (s, &snr) in sc.snr_db.iter().enumerate() {
        for (j, &method) in methods.iter().enumerate() {
            let values: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o[s][j])
                .filter(|v| v.is_finite())
                .collect();
            let (mean, std) = mean_std(&values);
            stats.push(MethodStats {
                snr_db: snr,
                method,
                mean_sinr_db: mean,
                std_sinr_db: std,
                runs: values.len(),
                failures: sc.runs - values.len(),
            });
        }
    }
    Ok(ExperimentResult { scenario: sc.clone(), stats })
}

fn log_failure<T>(what: Method, snr: f64, r: Result<T>) -> Option<T> {
    r.map_err(|e| log::warn!("{what} beamformer failed at {snr} dB: {e}")).ok()
}

/// Proposed chance-constrained beamformer against SMI and the optimum.
pub fn run_experiment(sc: &BeamformScenario) -> Result<ExperimentResult> {
    let cfg = SolverConfig::default();
    let presumed = sc.presumed_steering();
    let gamma = sc.mismatch_covariance();
    run_grid(sc, &[Method::Proposed, Method::Smi, Method::Optimal], |sc, snr, draws| {
        let truth = true_covariances(sc, snr, &draws.delta);
        let r_hat = sample_covariance(&assemble_snapshots(sc, snr, draws, sc.signal_in_training));
        let score = |w: &crate::linalg::CVec| {
            power_to_db(sinr(w, &truth.interference_noise, &truth.actual_steering, truth.signal_power))
        };
        let proposed = log_failure(
            Method::Proposed,
            snr,
            solve_beam_rows(
                &r_hat,
                &[BeamRow::distortionless(presumed.clone(), sc.confidence)],
                &gamma,
                sc.constant_mode,
                &cfg,
            ),
        )
        .map(|s| score(&s.w));
        let smi = log_failure(Method::Smi, snr, smi_mvdr(&r_hat, &presumed)).map(|w| score(&w));
        let optimal = optimal_sinr(&truth.interference_noise, &truth.actual_steering, truth.signal_power)
            .ok()
            .map(power_to_db);
        vec![proposed, smi, optimal]
    })
}

/// Distortionless row plus one suppression row per interferer, solved at
/// level `p` per row and jointly by exact search over allocations `y` with
/// row levels `p^{yᵢ}`.
pub fn run_joint_vs_individual(sc: &BeamformScenario) -> Result<ExperimentResult> {
    let alpha = sc
        .alpha
        .ok_or_else(|| Error::Domain("the joint experiment requires alpha".into()))?;
    if sc.interferers.is_empty() {
        return Err(Error::Domain("the joint experiment requires interferers".into()));
    }
    let cfg = SolverConfig::default();
    let presumed = sc.presumed_steering();
    let interferers = sc.interferer_steering();
    let gamma = sc.mismatch_covariance();
    let grid = simplex_grid(1 + interferers.len(), JOINT_GRID_STEP)?;
    let rows_at = |levels: &[f64]| -> Vec<BeamRow> {
        std::iter::once(BeamRow::distortionless(presumed.clone(), levels[0]))
            .chain(
                interferers
                    .iter()
                    .zip(&levels[1..])
                    .map(|(a, &l)| BeamRow::suppress(a.clone(), alpha, l)),
            )
            .collect()
    };
    let uniform = vec![sc.confidence; 1 + interferers.len()];
    run_grid(sc, &[Method::Joint, Method::Individual, Method::Optimal], |sc, snr, draws| {
        let truth = true_covariances(sc, snr, &draws.delta);
        let r_hat = sample_covariance(&assemble_snapshots(sc, snr, draws, sc.signal_in_training));
        let score = |w: &crate::linalg::CVec| {
            power_to_db(sinr(w, &truth.interference_noise, &truth.actual_steering, truth.signal_power))
        };
        let solve = |levels: &[f64]| solve_beam_rows(&r_hat, &rows_at(levels), &gamma, sc.constant_mode, &cfg);
        let individual = log_failure(Method::Individual, snr, solve(&uniform)).map(|s| score(&s.w));
        let joint = grid_minimize(&grid, |y| {
            let levels: Vec<f64> = y.iter().map(|&yi| sc.confidence.powf(yi)).collect();
            let sol = solve(&levels).ok()?;
            Some((sol.w, sol.objective))
        })
        .map(|(_, w, _)| score(&w));
        if joint.is_none() {
            log::warn!("joint beamformer infeasible at every allocation at {snr} dB");
        }
        let optimal = optimal_sinr(&truth.interference_noise, &truth.actual_steering, truth.signal_power)
            .ok()
            .map(power_to_db);
        vec![joint, individual, optimal]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(neumaier([1e16, 1.0, -1e16].into_iter()), 1.0);
        assert!(mean_std(&[]).0.is_nan());
    }

    fn small(runs: usize) -> BeamformScenario {
        BeamformScenario { runs, snr_db: vec![0.0, 20.0], ..BeamformScenario::fig1(20.0) }
    }

    #[test]
    fn experiment_is_deterministic() {
        let sc = small(3);
        let a = run_experiment(&sc).unwrap();
        let b = run_experiment(&sc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.stats.len(), 6);
        assert!(a.stats.iter().all(|s| s.runs + s.failures == 3));
    }

    #[test]
    fn no_method_beats_optimal() {
        let res = run_experiment(&small(10)).unwrap();
        for &snr in &res.scenario.snr_db {
            let best = res.get(snr, Method::Optimal).unwrap().mean_sinr_db;
            for m in [Method::Proposed, Method::Smi] {
                assert!(res.get(snr, m).unwrap().mean_sinr_db <= best + 0.5);
            }
        }
    }

    #[test]
    fn without_mismatch_all_approach_optimal() {
        let sc = BeamformScenario {
            mismatch_variance: 0.0,
            snapshots: 5000,
            runs: 4,
            snr_db: vec![0.0],
            signal_in_training: false,
            ..BeamformScenario::fig1(20.0)
        };
        let res = run_experiment(&sc).unwrap();
        let best = res.get(0.0, Method::Optimal).unwrap().mean_sinr_db;
        for m in [Method::Proposed, Method::Smi] {
            let v = res.get(0.0, m).unwrap().mean_sinr_db;
            assert!((best - v).abs() < 0.5, "{m} {v} {best}");
        }
    }

    #[test]
    fn joint_requires_alpha() {
        assert!(run_joint_vs_individual(&small(1)).is_err());
    }
}
