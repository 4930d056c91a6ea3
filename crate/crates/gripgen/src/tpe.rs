//! Tree-structured Parzen Estimator over mixed conditional spaces.
//!
//! History is split at a score quantile into good/bad sets; each set gets
//! per-parameter one-dimensional density estimators (truncated-Gaussian
//! Parzen mixtures with a uniform prior component for numeric domains,
//! smoothed frequency tables for categoricals). Proposals draw candidates
//! from the good model and keep the best likelihood ratio g(x)/b(x).

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::space::{DesignPoint, DesignSpace, Domain, ParamValue, TrialRecord};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TpeConfig {
    /// Top quantile forming the good set.
    pub gamma: f64,
    /// Uniform-random trials before the model kicks in.
    pub n_startup: usize,
    /// Candidates scored per proposal.
    pub n_candidates: usize,
    /// Weight of the uniform prior component.
    pub prior_weight: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig { gamma: 0.25, n_startup: 20, n_candidates: 24, prior_weight: 1.0 }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Optimizer(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.n_startup < 1 || self.n_candidates < 1 || self.prior_weight <= 0.0 {
            return Err(Error::Optimizer("n_startup, n_candidates, prior_weight must be positive".into()));
        }
        Ok(())
    }
}

/// Splits history into (good, bad): |good| = max(1, ceil(gamma·n)), ties at
/// the threshold broken toward more recent trials.
pub fn split_trials(history: &[TrialRecord], gamma: f64) -> Result<(Vec<&TrialRecord>, Vec<&TrialRecord>)> {
    if history.is_empty() {
        return Err(Error::Optimizer("cannot split an empty history".into()));
    }
    let n = history.len();
    let n_good = ((gamma * n as f64).ceil() as usize).max(1).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    // Score descending; ties: later (more recent) index first.
    order.sort_by(|&a, &b| {
        history[b].score.partial_cmp(&history[a].score).unwrap().then(b.cmp(&a))
    });
    let good: Vec<&TrialRecord> = order[..n_good].iter().map(|&i| &history[i]).collect();
    let bad: Vec<&TrialRecord> = order[n_good..].iter().map(|&i| &history[i]).collect();
    Ok((good, bad))
}

#[derive(Debug, Clone)]
enum Estimator {
    Numeric {
        lo: f64,
        hi: f64,
        centers: Vec<f64>,
        bandwidth: f64,
        prior_weight: f64,
        integer: bool,
    },
    Categorical {
        probs: Vec<f64>,
    },
}

impl Estimator {
    fn density(&self, x: f64) -> f64 {
        match self {
            Estimator::Numeric { lo, hi, centers, bandwidth, prior_weight, .. } => {
                let range = hi - lo;
                let n = centers.len() as f64;
                let w_prior = prior_weight / (n + prior_weight);
                let w_obs = 1.0 / (n + prior_weight);
                let mut d = w_prior / range;
                if !centers.is_empty() {
                    let normal = Normal::new(0.0, *bandwidth).unwrap();
                    for &c in centers {
                        let z = normal.cdf(hi - c) - normal.cdf(lo - c);
                        if z > 0.0 {
                            d += w_obs * normal.pdf(x - c) / z;
                        }
                    }
                }
                d
            }
            Estimator::Categorical { probs } => probs[x.round() as usize],
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Estimator::Numeric { lo, hi, centers, bandwidth, prior_weight, integer } => {
                let n = centers.len() as f64;
                let w_prior = prior_weight / (n + prior_weight);
                let x = if centers.is_empty() || rng.gen::<f64>() < w_prior {
                    rng.gen_range(*lo..*hi)
                } else {
                    let c = centers[rng.gen_range(0..centers.len())];
                    // Truncated-Gaussian draw by rejection; the bandwidth
                    // floor keeps acceptance high.
                    let mut draw = f64::NAN;
                    for _ in 0..64 {
                        let u1: f64 = rng.gen::<f64>().max(1e-12);
                        let u2: f64 = rng.gen();
                        let g = (-2.0 * u1.ln()).sqrt()
                            * (2.0 * std::f64::consts::PI * u2).cos();
                        let x = c + bandwidth * g;
                        if x >= *lo && x <= *hi {
                            draw = x;
                            break;
                        }
                    }
                    if draw.is_nan() {
                        rng.gen_range(*lo..*hi)
                    } else {
                        draw
                    }
                };
                if *integer {
                    x.round().clamp(*lo, *hi)
                } else {
                    x
                }
            }
            Estimator::Categorical { probs } => {
                let mut u: f64 = rng.gen();
                for (i, p) in probs.iter().enumerate() {
                    u -= p;
                    if u <= 0.0 {
                        return i as f64;
                    }
                }
                (probs.len() - 1) as f64
            }
        }
    }
}

/// Silverman's rule on the observed sample: 1.06·σ̂·n^(−1/5), floored at
/// one thousandth of the domain range (and at the range itself when no
/// spread is observable).
fn silverman_bandwidth(centers: &[f64], range: f64) -> f64 {
    let n = centers.len() as f64;
    if centers.len() < 2 {
        return range * 0.5;
    }
    let mean = centers.iter().sum::<f64>() / n;
    let var = centers.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    (1.06 * var.sqrt() * n.powf(-0.2)).max(range * 1e-3)
}

/// Per-parameter factorized density over a design space.
#[derive(Debug, Clone)]
pub struct DensityModel {
    estimators: HashMap<String, Estimator>,
}

/// Fits one estimator per parameter from the points where that parameter
/// is present (conditional parameters are fit on their active subset).
pub fn fit_density(
    points: &[&DesignPoint],
    space: &DesignSpace,
    prior_weight: f64,
) -> DensityModel {
    let mut estimators = HashMap::new();
    for p in space.params() {
        let est = match &p.domain {
            Domain::Continuous { lo, hi, .. } => {
                let centers: Vec<f64> =
                    points.iter().filter_map(|pt| pt.f64(&p.name)).collect();
                let bandwidth = silverman_bandwidth(&centers, hi - lo);
                Estimator::Numeric { lo: *lo, hi: *hi, centers, bandwidth, prior_weight, integer: false }
            }
            Domain::Integer { lo, hi, .. } => {
                let centers: Vec<f64> =
                    points.iter().filter_map(|pt| pt.f64(&p.name)).collect();
                let bandwidth = silverman_bandwidth(&centers, (hi - lo) as f64 + 1.0);
                Estimator::Numeric {
                    lo: *lo as f64,
                    hi: *hi as f64,
                    centers,
                    bandwidth,
                    prior_weight,
                    integer: true,
                }
            }
            Domain::Categorical { choices } => {
                let mut counts = vec![0usize; choices.len()];
                for pt in points {
                    if let Some(s) = pt.cat(&p.name) {
                        if let Some(i) = choices.iter().position(|c| c == s) {
                            counts[i] += 1;
                        }
                    }
                }
                let n: usize = counts.iter().sum();
                let denom = n as f64 + choices.len() as f64 * prior_weight;
                let probs = counts.iter().map(|&c| (c as f64 + prior_weight) / denom).collect();
                Estimator::Categorical { probs }
            }
        };
        estimators.insert(p.name.clone(), est);
    }
    DensityModel { estimators }
}

impl DensityModel {
    /// Sum of per-active-parameter log densities.
    pub fn log_density(&self, point: &DesignPoint, space: &DesignSpace) -> f64 {
        let mut sum = 0.0;
        for p in space.params() {
            let Some(v) = point.values.get(&p.name) else { continue };
            let x = match (v, &p.domain) {
                (ParamValue::Cat(s), Domain::Categorical { choices }) => {
                    choices.iter().position(|c| c == s).unwrap_or(0) as f64
                }
                _ => v.as_f64().unwrap_or(0.0),
            };
            sum += self.estimators[&p.name].density(x).max(f64::MIN_POSITIVE).ln();
        }
        sum
    }

    /// Draws a full point: parameters in declaration order so conditional
    /// activation is resolved ancestor-first.
    pub fn sample<R: Rng>(&self, space: &DesignSpace, rng: &mut R) -> DesignPoint {
        let mut point = DesignPoint::new(space.id());
        for p in space.params() {
            let active = match &p.activation {
                None => true,
                Some(act) => {
                    point.values.get(&act.param).map(|v| v.to_string() == act.equals).unwrap_or(false)
                }
            };
            if !active {
                continue;
            }
            let x = self.estimators[&p.name].sample(rng);
            let v = match &p.domain {
                Domain::Continuous { .. } => ParamValue::Float(x),
                Domain::Integer { .. } => ParamValue::Int(x.round() as i64),
                Domain::Categorical { choices } => ParamValue::Cat(choices[x as usize].clone()),
            };
            point.values.insert(p.name.clone(), v);
        }
        point
    }

    #[cfg(test)]
    fn estimator(&self, name: &str) -> &Estimator {
        &self.estimators[name]
    }
}

/// Sequential TPE state: history plus the proposal rule.
#[derive(Debug, Clone)]
pub struct Optimizer {
    space: DesignSpace,
    config: TpeConfig,
    seed: u64,
    history: Vec<TrialRecord>,
}

impl Optimizer {
    pub fn new(space: DesignSpace, config: TpeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer { space, config, seed, history: Vec::new() })
    }

    /// Rebuild state from a journal; proposals continue deterministically.
    pub fn with_history(mut self, history: Vec<TrialRecord>) -> Self {
        self.history = history;
        self
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn best(&self) -> Option<&TrialRecord> {
        self.history
            .iter()
            .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap().then(std::cmp::Ordering::Greater))
    }

    /// Per-iteration RNG: a pure function of (seed, iteration index) so
    /// resumed runs replay identically.
    fn iter_rng(&self, iteration: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.seed ^ (iteration as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )
    }

    fn propose_from(&self, history: &[TrialRecord], iteration: usize) -> DesignPoint {
        let mut rng = self.iter_rng(iteration);
        if history.len() < self.config.n_startup {
            return self.space.sample_with_rng(&mut rng);
        }
        let (good, bad) = split_trials(history, self.config.gamma).expect("non-empty history");
        let good_pts: Vec<&DesignPoint> = good.iter().map(|t| &t.point).collect();
        let bad_pts: Vec<&DesignPoint> = bad.iter().map(|t| &t.point).collect();
        let g = fit_density(&good_pts, &self.space, self.config.prior_weight);
        let b = fit_density(&bad_pts, &self.space, self.config.prior_weight);
        let mut best: Option<(f64, DesignPoint)> = None;
        for _ in 0..self.config.n_candidates {
            let cand = g.sample(&self.space, &mut rng);
            let score = g.log_density(&cand, &self.space) - b.log_density(&cand, &self.space);
            if best.as_ref().map(|(s, _)| score > *s).unwrap_or(true) {
                best = Some((score, cand));
            }
        }
        best.expect("n_candidates >= 1").1
    }

    /// Next proposal given the current history.
    pub fn propose(&self) -> DesignPoint {
        self.propose_from(&self.history, self.history.len())
    }

    /// A batch of proposals drawn before any result returns, using the
    /// constant-liar strategy (pending points scored at the running
    /// median) so the batch spreads out.
    pub fn propose_batch(&self, size: usize) -> Vec<DesignPoint> {
        let mut shadow = self.history.clone();
        let mut out = Vec::with_capacity(size);
        for k in 0..size {
            let point = self.propose_from(&shadow, self.history.len() + k);
            let lie = median(shadow.iter().map(|t| t.score));
            shadow.push(TrialRecord {
                point: point.clone(),
                score: lie,
                seed: 0,
                wall_time: 0.0,
                tag: "pending".into(),
            });
            out.push(point);
        }
        out
    }

    pub fn record(&mut self, trial: TrialRecord) {
        self.history.push(trial);
    }
}

fn median(scores: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = scores.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the full loop: propose → evaluate → record, `budget` times.
/// Objective errors become score-0 trials tagged "infeasible".
pub fn optimize<F>(
    mut objective: F,
    space: &DesignSpace,
    budget: usize,
    config: TpeConfig,
    seed: u64,
) -> Result<(TrialRecord, Vec<TrialRecord>)>
where
    F: FnMut(&DesignPoint) -> Result<f64>,
{
    if budget < 1 {
        return Err(Error::Optimizer("budget must be at least 1".into()));
    }
    let mut opt = Optimizer::new(space.clone(), config, seed)?;
    for i in 0..budget {
        let point = opt.propose();
        let (score, tag) = match objective(&point) {
            Ok(s) if s.is_finite() => (s, String::new()),
            Ok(_) => (0.0, "infeasible".to_string()),
            Err(_) => (0.0, "infeasible".to_string()),
        };
        opt.record(TrialRecord { point, score, seed: seed ^ i as u64, wall_time: 0.0, tag });
    }
    let best = opt.best().expect("budget >= 1").clone();
    Ok((best, opt.history))
}
