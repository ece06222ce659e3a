//! Restricted single-copy baseline and the squeezed-mixture family used to
//! exhibit the linear-in-M cost of per-copy point estimation.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{learn_points, EstimateRecord, LearnPlan, TargetKind};
use crate::sampling::{HomodyneSampler, SamplerBackend, SeedStream, CHUNK};
use crate::states::{PhasePoint, ReflectionSymmetry, StateModel};
use crate::stats::{linear_fit, LinearFit};

/// Per-point restricted estimate; `estimated` is false when no copy landed on the point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedRecord {
    pub record: EstimateRecord,
    pub estimated: bool,
}

fn homodyne_samplers(state: &StateModel, points: &[PhasePoint]) -> Result<Vec<Arc<HomodyneSampler>>> {
    let mut cache: HashMap<Vec<u64>, Arc<HomodyneSampler>> = HashMap::new();
    points
        .iter()
        .map(|p| {
            let phases: Vec<f64> = p.components().iter().map(|a| a.arg()).collect();
            let key: Vec<u64> = phases.iter().map(|v| v.to_bits()).collect();
            if let Some(s) = cache.get(&key) {
                return Ok(s.clone());
            }
            let s = Arc::new(HomodyneSampler::new(state, &phases)?);
            cache.insert(key, s.clone());
            Ok(s)
        })
        .collect()
}

/// Each copy measures one uniformly chosen point; a point's estimate is the
/// mean of exp(−i√2 Σ|α_j| q_j) over its copies.
pub fn restricted_estimate(
    state: &StateModel,
    points: &[PhasePoint],
    copy_budget: u64,
    stream: &SeedStream,
) -> Result<Vec<RestrictedRecord>> {
    if copy_budget == 0 {
        return Err(Error::invalid("copy_budget", "must be at least 1"));
    }
    if points.is_empty() {
        return Err(Error::invalid("points", "empty point set"));
    }
    let samplers = homodyne_samplers(state, points)?;
    restricted_with_samplers(&samplers, points, copy_budget, stream)
}

fn restricted_with_samplers(
    samplers: &[Arc<HomodyneSampler>],
    points: &[PhasePoint],
    copy_budget: u64,
    stream: &SeedStream,
) -> Result<Vec<RestrictedRecord>> {
    let m = points.len();
    let k = points[0].modes();
    let mags: Vec<Vec<f64>> = points.iter().map(|p| p.components().iter().map(|a| SQRT_2 * a.norm()).collect()).collect();
    let chunks = copy_budget.div_ceil(CHUNK as u64);
    let partial: Vec<(Vec<Complex64>, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let count = (copy_budget - ci * CHUNK as u64).min(CHUNK as u64);
            let mut rng = stream.rng(ci);
            let mut sums = vec![Complex64::new(0.0, 0.0); m];
            let mut counts = vec![0u64; m];
            let mut q = vec![0.0; k];
            for _ in 0..count {
                let j = rng.random_range(0..m);
                samplers[j].sample_into(&mut rng, &mut q);
                let arg: f64 = mags[j].iter().zip(&q).map(|(a, b)| a * b).sum();
                sums[j] += Complex64::from_polar(1.0, -arg);
                counts[j] += 1;
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![Complex64::new(0.0, 0.0); m];
    let mut counts = vec![0u64; m];
    for (s, c) in partial {
        for j in 0..m {
            sums[j] += s[j];
            counts[j] += c[j];
        }
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(j, p)| RestrictedRecord {
            record: EstimateRecord {
                alpha: p.clone(),
                value: if counts[j] > 0 { sums[j] / counts[j] as f64 } else { Complex64::new(0.0, 0.0) },
                target_kind: TargetKind::Point,
                epsilon: f64::NAN,
                delta: f64::NAN,
                copies: counts[j],
                branch: None,
                square: None,
            },
            estimated: counts[j] > 0,
        })
        .collect())
}

/// Thresholds the family must meet.
pub const DIAGONAL_RANGE: [f64; 2] = [0.49, 0.50];
pub const OFF_DIAGONAL_MAX: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct LowerBoundFamily {
    pub m: usize,
    /// Squeezing in the parameterization where the variances are 1/(2r²) and r²/2.
    pub r: f64,
    pub alpha_mag: f64,
    pub thetas: Vec<f64>,
    pub states: Vec<StateModel>,
    pub points: Vec<PhasePoint>,
    /// values[i][j] = C_{ρ_i}(α_j)
    pub values: Vec<Vec<f64>>,
}

impl LowerBoundFamily {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.values[i][i]).collect()
    }

    pub fn off_diagonal_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                if i != j {
                    worst = worst.max(self.values[i][j].abs());
                }
            }
        }
        worst
    }

    pub fn separated(&self) -> bool {
        self.diagonal().iter().all(|d| *d >= DIAGONAL_RANGE[0] && *d <= DIAGONAL_RANGE[1]) && self.off_diagonal_max() <= OFF_DIAGONAL_MAX
    }
}

fn family_at(m: usize, r: f64, alpha_mag: f64) -> Result<LowerBoundFamily> {
    let thetas: Vec<f64> = (1..=m).map(|i| i as f64 * PI / (2.0 * (m as f64 + 1.0))).collect();
    let states = thetas
        .iter()
        .map(|&t| {
            StateModel::mixture(vec![(0.5, StateModel::squeezed_vacuum(r, t)?), (0.5, StateModel::squeezed_vacuum(r, -t)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<PhasePoint> = thetas.iter().map(|&t| PhasePoint::single(Complex64::from_polar(alpha_mag, t))).collect();
    let values = states
        .iter()
        .map(|s| points.iter().map(|p| s.characteristic1(p.components()[0]).re).collect())
        .collect();
    Ok(LowerBoundFamily { m, r, alpha_mag, thetas, states, points, values })
}

/// Builds the M mixtures ρ_i = ½S(θ_i) + ½S(−θ_i) with θ_i = iπ/(2(M+1)).
/// With `r = None` the smallest r on a 1% geometric grid meeting the
/// separation targets is used.
pub fn build_lowerbound_family(m: usize, r: Option<f64>, alpha_mag: f64) -> Result<LowerBoundFamily> {
    if m == 0 {
        return Err(Error::invalid("m", "must be positive"));
    }
    if !(alpha_mag > 0.0) || !alpha_mag.is_finite() {
        return Err(Error::invalid("alpha_mag", "must be positive"));
    }
    if let Some(r) = r {
        let fam = family_at(m, r, alpha_mag)?;
        if !fam.separated() {
            return Err(Error::SeparationUnattainable(format!(
                "M={m}, r={r}, |α|={alpha_mag}: diagonal range [{:.4}, {:.4}], off-diagonal max {:.3e}",
                fam.diagonal().iter().cloned().fold(f64::INFINITY, f64::min),
                fam.diagonal().iter().cloned().fold(0.0, f64::max),
                fam.off_diagonal_max()
            )));
        }
        return Ok(fam);
    }
    let mut r = 1.0;
    while r < 1e5 {
        let fam = family_at(m, r, alpha_mag)?;
        if fam.separated() {
            return Ok(fam);
        }
        r *= 1.01;
    }
    Err(Error::SeparationUnattainable(format!("no r below 1e5 separates M={m} at |α|={alpha_mag}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Restricted,
    QuantumEnhanced,
}

impl Strategy {
    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Restricted => "restricted",
            Strategy::QuantumEnhanced => "quantum-enhanced",
        }
    }
}

/// Schedule for one strategy: restricted budgets are copy counts, enhanced
/// budgets are planner accuracies (larger ε means fewer copies).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    Copies(Vec<u64>),
    Epsilons { epsilons: Vec<f64>, delta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub strategy: Strategy,
    pub m: usize,
    /// Copies charged: actual copies (restricted) or quantum-accounted copies (enhanced).
    pub budget: u64,
    pub epsilon: Option<f64>,
    pub trials: usize,
    pub successes: usize,
}

impl ScalingRow {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Error threshold separating the ≈½ diagonal from the ≈0 off-diagonal values.
pub const SUCCESS_THRESHOLD: f64 = 0.25;
pub const SUCCESS_RATE: f64 = 2.0 / 3.0;

/// Success frequencies over trials; each trial draws the hidden index uniformly.
/// Trial t uses the same hidden index and substream at every budget.
pub fn point_function_experiment(
    family: &LowerBoundFamily,
    strategy: Strategy,
    schedule: &Schedule,
    trials: usize,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<Vec<ScalingRow>> {
    if !family.separated() {
        return Err(Error::SeparationUnattainable("family fails the separation check".into()));
    }
    let m = family.m;
    let hidden: Vec<usize> = (0..trials).map(|t| stream.child("hidden").rng(t as u64).random_range(0..m)).collect();
    let identity = ReflectionSymmetry::identity(1);
    let samplers = match strategy {
        Strategy::Restricted => Some(
            family.states.iter().map(|s| homodyne_samplers(s, &family.points)).collect::<Result<Vec<_>>>()?,
        ),
        Strategy::QuantumEnhanced => None,
    };
    let success = |i: usize, est: &[Complex64]| {
        est.iter().zip(&family.values[i]).all(|(e, t)| (e - Complex64::new(*t, 0.0)).norm() <= SUCCESS_THRESHOLD)
    };
    let mut rows = Vec::new();
    match (strategy, schedule) {
        (Strategy::Restricted, Schedule::Copies(budgets)) => {
            let samplers = samplers.expect("restricted samplers");
            for &b in budgets {
                let wins = (0..trials)
                    .into_par_iter()
                    .map(|t| -> Result<bool> {
                        let i = hidden[t];
                        let rec = restricted_with_samplers(&samplers[i], &family.points, b, &stream.child("trial").child(t))?;
                        let est: Vec<Complex64> = rec.iter().map(|r| r.record.value).collect();
                        Ok(success(i, &est))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(ScalingRow { strategy, m, budget: b, epsilon: None, trials, successes: wins.iter().filter(|w| **w).count() });
            }
        }
        (Strategy::QuantumEnhanced, Schedule::Epsilons { epsilons, delta }) => {
            for &eps in epsilons {
                let plan = LearnPlan::new(eps, *delta, m)?;
                let wins = (0..trials)
                    .into_par_iter()
                    .map(|t| -> Result<bool> {
                        let i = hidden[t];
                        let out = learn_points(
                            &family.states[i],
                            Some(&identity),
                            &family.points,
                            eps,
                            *delta,
                            backend,
                            &stream.child("trial").child(t).child(eps),
                        )?;
                        let est: Vec<Complex64> = out.records.iter().map(|r| r.value).collect();
                        Ok(success(i, &est))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(ScalingRow {
                    strategy,
                    m,
                    budget: plan.quantum_copies(),
                    epsilon: Some(eps),
                    trials,
                    successes: wins.iter().filter(|w| **w).count(),
                });
            }
        }
        _ => return Err(Error::invalid("schedule", format!("schedule kind does not match strategy {}", strategy.tag()))),
    }
    Ok(rows)
}

/// Budget at which the success rate first reaches ⅔: restricted budgets are
/// interpolated in log-budget between bracketing schedule entries, enhanced
/// budgets are the first planner budget that succeeds.
pub fn copies_to_success(rows: &[ScalingRow]) -> Option<f64> {
    let mut sorted: Vec<&ScalingRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.budget);
    let first = sorted.iter().position(|r| r.rate() >= SUCCESS_RATE)?;
    let hit = sorted[first];
    if hit.strategy == Strategy::QuantumEnhanced || first == 0 {
        return Some(hit.budget as f64);
    }
    let prev = sorted[first - 1];
    let (b0, b1) = ((prev.budget as f64).ln(), (hit.budget as f64).ln());
    let (s0, s1) = (prev.rate(), hit.rate());
    let t = if s1 > s0 { (SUCCESS_RATE - s0) / (s1 - s0) } else { 1.0 };
    Some((b0 + t * (b1 - b0)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// (strategy, M, copies to ⅔ success)
    pub thresholds: Vec<(Strategy, usize, Option<f64>)>,
    /// ln(copies) against ln M for the restricted strategy.
    pub restricted_loglog: Option<LinearFit>,
    /// copies against ln M for the enhanced strategy.
    pub enhanced_log: Option<LinearFit>,
}

pub fn scaling_report(rows: Vec<ScalingRow>) -> ScalingReport {
    let mut keys: Vec<(Strategy, usize)> = rows.iter().map(|r| (r.strategy, r.m)).collect();
    keys.sort_by_key(|(s, m)| (s.tag(), *m));
    keys.dedup();
    let thresholds: Vec<(Strategy, usize, Option<f64>)> = keys
        .iter()
        .map(|&(s, m)| {
            let sel: Vec<ScalingRow> = rows.iter().filter(|r| r.strategy == s && r.m == m).cloned().collect();
            (s, m, copies_to_success(&sel))
        })
        .collect();
    let fit = |s: Strategy, loglog: bool| -> Option<LinearFit> {
        let pts: Vec<(f64, f64)> = thresholds
            .iter()
            .filter(|(st, _, c)| *st == s && c.is_some())
            .map(|(_, m, c)| {
                let c = c.unwrap();
                ((*m as f64).ln(), if loglog { c.ln() } else { c })
            })
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y).ok()
    };
    ScalingReport {
        restricted_loglog: fit(Strategy::Restricted, true),
        enhanced_log: fit(Strategy::QuantumEnhanced, false),
        thresholds,
        rows,
    }
}

/// Scaling-report CSV: strategy, M, budget, trials, successes.
pub fn write_scaling_csv<W: std::io::Write>(out: W, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "M", "budget", "epsilon", "trials", "successes"])?;
    for r in rows {
        w.write_record([
            r.strategy.tag().to_string(),
            r.m.to_string(),
            r.budget.to_string(),
            r.epsilon.map_or(String::new(), |e| e.to_string()),
            r.trials.to_string(),
            r.successes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
