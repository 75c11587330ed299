//! MVDR beamforming with steering-vector mismatch on a uniform linear
//! array: scenario synthesis, the chance-constrained beamformer, baselines
//! and the SINR experiments.

mod experiment;
mod mvdr;

pub use experiment::{
    run_experiment, run_joint_vs_individual, ExperimentResult, Method, MethodStats, JOINT_GRID_STEP,
};
pub use mvdr::{
    check_beam_rows, mismatch_row, optimal_sinr, optimal_weights, sinr, smi_mvdr, solve_beam_rows,
    solve_mvdr_cccp, spread, BeamRow, BeamSolution, ConstantMode, RowKind, CHECK_TOL,
    COVARIANCE_RIDGE, RELAXATION,
};

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interferer {
    pub doa_deg: f64,
    pub inr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformScenario {
    pub sensors: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub desired_doa_deg: f64,
    pub interferers: Vec<Interferer>,
    pub noise_power: f64,
    /// Total mismatch variance `σ_δ²`; each element has variance `σ_δ²/M`.
    pub mismatch_variance: f64,
    pub snapshots: usize,
    pub confidence: f64,
    pub runs: usize,
    pub seed: u64,
    pub snr_db: Vec<f64>,
    /// Threshold of the interferer rows in the joint experiment.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub constant_mode: ConstantMode,
    /// Train on signal-plus-interference snapshots rather than
    /// interference-plus-noise only.
    #[serde(default = "default_true")]
    pub signal_in_training: bool,
}

fn default_true() -> bool {
    true
}

impl BeamformScenario {
    /// Eight sensors at half wavelength, desired signal at 3°, interferers at
    /// 30° and 50° with the given INR, `σ_δ² = 0.3 M`, 100 snapshots,
    /// `p = 0.95`, 200 runs.
    pub fn fig1(inr_db: f64) -> Self {
        BeamformScenario {
            sensors: 8,
            spacing: 0.5,
            desired_doa_deg: 3.0,
            interferers: vec![
                Interferer { doa_deg: 30.0, inr_db },
                Interferer { doa_deg: 50.0, inr_db },
            ],
            noise_power: 1.0,
            mismatch_variance: 0.3 * 8.0,
            snapshots: 100,
            confidence: 0.95,
            runs: 200,
            seed: 20240101,
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            alpha: None,
            constant_mode: ConstantMode::Derived,
            signal_in_training: true,
        }
    }

    /// The joint experiment: INR 20 dB, 100 runs, `α = 0.7`.
    pub fn fig2() -> Self {
        BeamformScenario {
            runs: 100,
            alpha: Some(0.7),
            snr_db: vec![0.0, 10.0, 20.0, 30.0],
            ..Self::fig1(20.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Domain(what.to_string()));
        if self.sensors < 2 {
            return fail("sensors must be at least 2");
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return fail("spacing must be positive");
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return fail("noise_power must be positive");
        }
        if !(self.mismatch_variance >= 0.0 && self.mismatch_variance.is_finite()) {
            return fail("mismatch_variance must be nonnegative");
        }
        if self.snapshots < self.sensors {
            return fail("snapshots must be at least the number of sensors");
        }
        if !(0.5..1.0).contains(&self.confidence) {
            return fail("confidence must lie in [0.5, 1)");
        }
        if self.runs == 0 {
            return fail("runs must be positive");
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|v| !v.is_finite()) {
            return fail("snr_db must be a nonempty list of finite values");
        }
        check_angle(self.desired_doa_deg)?;
        for i in &self.interferers {
            check_angle(i.doa_deg)?;
            if !i.inr_db.is_finite() {
                return fail("interferer inr_db must be finite");
            }
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return fail("alpha must be finite");
            }
        }
        Ok(())
    }

    /// `σ_δ²/M · I`.
    pub fn mismatch_covariance(&self) -> CMat {
        CMat::identity(self.sensors, self.sensors)
            * Complex64::new(self.mismatch_variance / self.sensors as f64, 0.0)
    }

    pub fn presumed_steering(&self) -> CVec {
        steering_rad(self.sensors, self.spacing, self.desired_doa_deg.to_radians())
    }

    pub fn interferer_steering(&self) -> Vec<CVec> {
        self.interferers
            .iter()
            .map(|i| steering_rad(self.sensors, self.spacing, i.doa_deg.to_radians()))
            .collect()
    }
}

/// A scenario and the interferer INRs to sweep; each INR gives one
/// scenario with every interferer at that level. An empty sweep keeps the
/// scenario as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: BeamformScenario,
    #[serde(default)]
    pub inr_db: Vec<f64>,
}

impl ExperimentConfig {
    /// INR 5, 20 and 40 dB.
    pub fn fig1() -> Self {
        ExperimentConfig { scenario: BeamformScenario::fig1(20.0), inr_db: vec![5.0, 20.0, 40.0] }
    }

    pub fn fig2() -> Self {
        ExperimentConfig { scenario: BeamformScenario::fig2(), inr_db: vec![20.0] }
    }

    /// `(INR, scenario)` pairs; the INR is `None` for an empty sweep.
    pub fn scenarios(&self) -> Result<Vec<(Option<f64>, BeamformScenario)>> {
        let out: Vec<(Option<f64>, BeamformScenario)> = if self.inr_db.is_empty() {
            vec![(None, self.scenario.clone())]
        } else {
            self.inr_db
                .iter()
                .map(|&inr| {
                    let mut sc = self.scenario.clone();
                    for i in &mut sc.interferers {
                        i.inr_db = inr;
                    }
                    (Some(inr), sc)
                })
                .collect()
        };
        for (_, sc) in &out {
            sc.validate()?;
        }
        Ok(out)
    }
}

fn check_angle(deg: f64) -> Result<()> {
    if deg > -90.0 && deg < 90.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("direction {deg}° outside (−90°, 90°)")))
    }
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// `a_k = exp(i 2π d k sin θ)`, `k = 0..M−1`, for `θ` in degrees.
pub fn steering(sensors: usize, spacing: f64, doa_deg: f64) -> Result<CVec> {
    check_angle(doa_deg)?;
    Ok(steering_rad(sensors, spacing, doa_deg.to_radians()))
}

fn steering_rad(sensors: usize, spacing: f64, theta: f64) -> CVec {
    let phase = 2.0 * PI * spacing * theta.sin();
    CVec::from_fn(sensors, |k, _| Complex64::from_polar(1.0, phase * k as f64))
}

/// Interference-plus-noise covariance, the actual steering vector and the
/// signal covariance at one SNR.
#[derive(Debug, Clone)]
pub struct TrueCovariances {
    pub signal: CMat,
    pub interference_noise: CMat,
    pub actual_steering: CVec,
    pub signal_power: f64,
}

pub fn true_covariances(sc: &BeamformScenario, snr_db: f64, delta: &CVec) -> TrueCovariances {
    let m = sc.sensors;
    let mut r_in = CMat::identity(m, m) * Complex64::new(sc.noise_power, 0.0);
    for (i, a) in sc.interferers.iter().zip(sc.interferer_steering()) {
        let power = db_to_power(i.inr_db) * sc.noise_power;
        r_in += &a * a.adjoint() * Complex64::new(power, 0.0);
    }
    let signal_power = db_to_power(snr_db) * sc.noise_power;
    let actual = sc.presumed_steering() + delta;
    TrueCovariances {
        signal: &actual * actual.adjoint() * Complex64::new(signal_power, 0.0),
        interference_noise: r_in,
        actual_steering: actual,
        signal_power,
    }
}

/// Unit-power random quantities of one run; SNR only rescales them.
#[derive(Debug, Clone)]
pub struct RunDraws {
    pub delta: CVec,
    pub signal: DVector<Complex64>,
    /// One row of unit-power waveform per interferer.
    pub interference: CMat,
    pub noise: CMat,
}

fn circular<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
}

/// Draws, in order, the mismatch `δ`, the signal waveform, the interferer
/// waveforms and the noise.
pub fn draw_run(sc: &BeamformScenario, run_seed: u64) -> RunDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let (m, k) = (sc.sensors, sc.snapshots);
    let elem_var = sc.mismatch_variance / m as f64;
    let delta = CVec::from_fn(m, |_, _| circular(&mut rng, elem_var));
    let signal = DVector::from_fn(k, |_, _| circular(&mut rng, 1.0));
    let interference = CMat::from_fn(sc.interferers.len(), k, |_, _| circular(&mut rng, 1.0));
    let noise = CMat::from_fn(m, k, |_, _| circular(&mut rng, sc.noise_power));
    RunDraws { delta, signal, interference, noise }
}

/// Training snapshots `x(t) = s(t) ã + Σₖ iₖ(t) aₖ + n(t)` as columns.
pub fn assemble_snapshots(sc: &BeamformScenario, snr_db: f64, draws: &RunDraws, with_signal: bool) -> CMat {
    let mut x = draws.noise.clone();
    for ((i, a), row) in sc
        .interferers
        .iter()
        .zip(sc.interferer_steering())
        .zip(draws.interference.row_iter())
    {
        let amp = (db_to_power(i.inr_db) * sc.noise_power).sqrt();
        x += &a * row * Complex64::new(amp, 0.0);
    }
    if with_signal {
        let amp = (db_to_power(snr_db) * sc.noise_power).sqrt();
        let actual = sc.presumed_steering() + &draws.delta;
        x += &actual * draws.signal.transpose() * Complex64::new(amp, 0.0);
    }
    x
}

pub fn snapshots(sc: &BeamformScenario, snr_db: f64, run_seed: u64) -> CMat {
    assemble_snapshots(sc, snr_db, &draw_run(sc, run_seed), true)
}

/// `R̂ = (1/K) Σₜ x(t) x(t)ᴴ`.
pub fn sample_covariance(x: &CMat) -> CMat {
    let k = x.ncols().max(1) as f64;
    let r = x * x.adjoint() / Complex64::new(k, 0.0);
    (&r + r.adjoint()) * Complex64::new(0.5, 0.0)
}
