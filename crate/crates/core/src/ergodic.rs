//! Empirical ergodic-property battery and the class decision table.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::base_systems::{BaseSystem, DeclaredClass};
use crate::error::{IdpError, Result};
use crate::process::{
    sample_trajectory, window_mean, LevySpec, Representation, SampleOptions, TrajectoryBatch,
};
use crate::rng::derive_seed;
use crate::spectral::{
    atom_at_zero, autocov_empirical, AtomReport, SpectralEstimate, Transform, MIN_CESARO_LAGS,
};
use crate::stats::{mean_se, Estimate};

/// Every threshold used by the battery; embedded in each report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    /// Relative threshold against the lag-0 (or reference) value.
    pub relative: f64,
    /// Standard-error multiplier for noise bands.
    pub z: f64,
    /// Significance level for KS and chi-square tests.
    pub significance: f64,
    /// A Birkhoff mean over n is expected to have at most this fraction of
    /// the squared error of the mean over n/4 when the process is ergodic.
    pub birkhoff_ratio: f64,
    /// Minimum ratio of rigidity-lag covariance to the Cesàro level.
    pub rigidity_factor: f64,
}

impl Calibration {
    /// Noise-band multiplier for a family of `comparisons` two-sided checks
    /// at the configured significance (Bonferroni), never below `z`.
    pub fn family_z(&self, comparisons: usize) -> f64 {
        let alpha = self.significance / (2.0 * comparisons.max(1) as f64);
        let q = Normal::standard().inverse_cdf(1.0 - alpha);
        q.max(self.z)
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            relative: 0.05,
            z: 3.0,
            significance: 0.01,
            birkhoff_ratio: 0.75,
            rigidity_factor: 5.0,
        }
    }
}

/// Sampling and lag budget for a classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub replicates: usize,
    pub length: usize,
    pub threshold: f64,
    #[serde(default)]
    pub margin: usize,
    pub max_lag: usize,
    /// λ grid for the atom, Cesàro, revival and pairwise tests.
    pub lambdas: Vec<f64>,
    /// λ used by the order-3 test.
    pub triple_lambda: f64,
    /// (j, l) points for E[g(X_0) g(X_j) g(X_{j+l})].
    pub triple_schedule: Vec<(usize, usize)>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    crate::process::DEFAULT_SMALL_JUMP_TOLERANCE
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        let short = |m: String| Err(IdpError::InsufficientBudget(m));
        if self.replicates < crate::spectral::MIN_REPLICATES {
            return short(format!(
                "{} replicates; at least {} needed",
                self.replicates,
                crate::spectral::MIN_REPLICATES
            ));
        }
        if self.length < 16 {
            return short(format!("window length {} below 16", self.length));
        }
        if self.max_lag < MIN_CESARO_LAGS || self.max_lag >= self.length {
            return short(format!(
                "max lag {} must lie in [{MIN_CESARO_LAGS}, {})",
                self.max_lag, self.length
            ));
        }
        if self.lambdas.is_empty() {
            return short("empty lambda grid".into());
        }
        if self.triple_schedule.is_empty() {
            return short("empty triple schedule".into());
        }
        if let Some(&(j, l)) = self
            .triple_schedule
            .iter()
            .find(|(j, l)| j + l >= self.length)
        {
            return short(format!(
                "triple point ({j}, {l}) exceeds window length {}",
                self.length
            ));
        }
        Ok(())
    }

    pub fn sample_options(&self, seed: u64) -> SampleOptions {
        SampleOptions::new(self.length, self.threshold, self.replicates, seed)
            .with_margin(self.margin)
            .with_tolerance(self.tolerance)
    }
}

/// Per-replicate Birkhoff means and their across-replicate spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffLimits {
    pub means: Vec<f64>,
    pub pooled_mean: f64,
    /// Across-replicate variance of the final means, with its standard error.
    pub variance: Estimate,
}

pub fn birkhoff_limits(batch: &TrajectoryBatch) -> BirkhoffLimits {
    birkhoff_over(batch, batch.length())
}

fn birkhoff_over(batch: &TrajectoryBatch, n: usize) -> BirkhoffLimits {
    let means: Vec<f64> = batch
        .windows
        .iter()
        .map(|w| w[..n].iter().sum::<f64>() / n as f64)
        .collect();
    let pooled = mean_se(&means).mean;
    let m = means.len() as f64;
    let corr = if means.len() > 1 { m / (m - 1.0) } else { 1.0 };
    let sq: Vec<f64> = means.iter().map(|x| (x - pooled).powi(2) * corr).collect();
    BirkhoffLimits {
        pooled_mean: pooled,
        variance: mean_se(&sq),
        means,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirkhoffTest {
    /// Mean of (B_n - μ)² - ratio·(B_{n/4} - μ)² across replicates.
    pub statistic: f64,
    pub standard_error: f64,
    pub target_mean: f64,
    pub across_variance: f64,
    pub pass: bool,
}

/// Convergence of Birkhoff means to `target` (or to the pooled mean).
///
/// Under ergodicity the squared error shrinks with n, so the mean of
/// d = (B_n - μ)² - ratio·(B_{n/4} - μ)² is negative; a nonergodic limit
/// keeps both errors at the same positive level and d turns positive.
pub fn birkhoff_constant_test(
    batch: &TrajectoryBatch,
    target: Option<f64>,
    cal: &Calibration,
) -> BirkhoffTest {
    let n = batch.length();
    let full = birkhoff_over(batch, n);
    let quarter = birkhoff_over(batch, (n / 4).max(1));
    let mu = target.unwrap_or(full.pooled_mean);
    let d: Vec<f64> = full
        .means
        .iter()
        .zip(&quarter.means)
        .map(|(a, b)| (a - mu).powi(2) - cal.birkhoff_ratio * (b - mu).powi(2))
        .collect();
    let est = mean_se(&d);
    BirkhoffTest {
        statistic: est.mean,
        standard_error: est.se,
        target_mean: mu,
        across_variance: full.variance.mean,
        pass: est.mean <= cal.z * est.se,
    }
}

/// Birkhoff means against the exact mean for nonnegative processes.
pub fn nonneg_ergodicity_test(
    spec: &LevySpec,
    opts: &SampleOptions,
    cal: &Calibration,
) -> Result<BirkhoffTest> {
    if spec.representation() != Representation::Nonnegative {
        return Err(IdpError::Representation(
            "ergodicity through Birkhoff means needs the nonnegative representation".into(),
        ));
    }
    let batch = sample_trajectory(spec, opts)?;
    let mu = window_mean(spec, &opts.sampling_window()?)?;
    Ok(birkhoff_constant_test(&batch, Some(mu), cal))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTest {
    pub lambda: f64,
    /// |Cov(e^{iλX_0}, e^{iλX_k})| for k = 0..=K.
    pub magnitudes: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub last_quartile_max: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn check_margin(batch: &TrajectoryBatch, lag: usize) -> Result<()> {
    if lag >= batch.length() {
        return Err(IdpError::InvalidParameter(format!(
            "lag {lag} not covered by window length {}",
            batch.length()
        )));
    }
    Ok(())
}

fn decay_from(est: &SpectralEstimate, lambda: f64, cal: &Calibration) -> DecayTest {
    let k = est.max_lag();
    let magnitudes: Vec<f64> = est.coefficients.iter().map(|c| c.norm()).collect();
    let standard_errors: Vec<f64> = (0..=k).map(|j| est.combined_se(j as i64)).collect();
    let start = (3 * k / 4).max(1);
    let last_quartile_max = magnitudes[start..].iter().copied().fold(0.0, f64::max);
    let noise = standard_errors[start..].iter().copied().fold(0.0, f64::max);
    let threshold = (cal.relative * magnitudes[0]).max(cal.z * noise);
    DecayTest {
        lambda,
        last_quartile_max,
        threshold,
        pass: last_quartile_max <= threshold,
        magnitudes,
        standard_errors,
    }
}

/// Decay of |Cov(e^{iλX_0}, e^{iλX_k})| over the last quartile of lags.
pub fn pairwise_mixing_test(
    batch: &TrajectoryBatch,
    lambda: f64,
    max_lag: usize,
    cal: &Calibration,
) -> Result<DecayTest> {
    check_margin(batch, max_lag)?;
    let est = autocov_empirical(batch, Transform::CharExp { lambda }, max_lag)?;
    Ok(decay_from(&est, lambda, cal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriplePoint {
    pub j: usize,
    pub l: usize,
    pub deviation: Complex64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleTest {
    pub lambda: f64,
    /// |E[g(X_0)³] - E[g]³|, the deviation at j = l = 0.
    pub reference: f64,
    pub points: Vec<TriplePoint>,
    pub threshold: f64,
    pub pass: bool,
}

/// E[g(X_0) g(X_j) g(X_{j+l})] - E[g]³ along the schedule, g = e^{iλ·}.
pub fn triple_mixing_test(
    batch: &TrajectoryBatch,
    lambda: f64,
    schedule: &[(usize, usize)],
    cal: &Calibration,
) -> Result<TripleTest> {
    if schedule.is_empty() {
        return Err(IdpError::Empty("triple schedule"));
    }
    for &(j, l) in schedule {
        check_margin(batch, j + l)?;
    }
    let n = batch.length();
    let g: Vec<Vec<Complex64>> = batch
        .windows
        .iter()
        .map(|w| {
            w.iter()
                .map(|&x| Complex64::new(0.0, lambda * x).exp())
                .collect()
        })
        .collect();
    let row_means: Vec<Complex64> = g
        .iter()
        .map(|r| r.iter().sum::<Complex64>() / n as f64)
        .collect();
    let re = mean_se(&row_means.iter().map(|z| z.re).collect::<Vec<_>>());
    let im = mean_se(&row_means.iter().map(|z| z.im).collect::<Vec<_>>());
    let m = Complex64::new(re.mean, im.mean);
    let m3 = m * m * m;
    let se_m3 = 3.0 * m.norm_sqr() * re.se.hypot(im.se);
    let point = |j: usize, l: usize| {
        let anchors = n - j - l;
        let per: Vec<Complex64> = g
            .iter()
            .map(|r| {
                (0..anchors)
                    .map(|t| r[t] * r[t + j] * r[t + j + l])
                    .sum::<Complex64>()
                    / anchors as f64
            })
            .collect();
        let a = mean_se(&per.iter().map(|z| z.re).collect::<Vec<_>>());
        let b = mean_se(&per.iter().map(|z| z.im).collect::<Vec<_>>());
        TriplePoint {
            j,
            l,
            deviation: Complex64::new(a.mean, b.mean) - m3,
            standard_error: a.se.hypot(b.se).hypot(se_m3),
        }
    };
    let reference = point(0, 0).deviation.norm();
    let points: Vec<TriplePoint> = schedule.iter().map(|&(j, l)| point(j, l)).collect();
    let last = points.last().expect("nonempty schedule");
    let threshold = (cal.relative * reference).max(cal.z * last.standard_error);
    Ok(TripleTest {
        lambda,
        reference,
        pass: last.deviation.norm() <= threshold,
        threshold,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakMixingTest {
    pub lambda: f64,
    /// (1/K) Σ_{k=1}^K |Cov(e^{iλX_0}, e^{iλX_k})|.
    pub cesaro: f64,
    pub threshold: f64,
    pub pass: bool,
    pub rigidity_lags: Vec<usize>,
    /// Largest |Cov| over the rigidity lags, when any are in range.
    pub rigidity_max: Option<f64>,
    pub revival_detected: bool,
}

/// Rigidity lags emitted by every tower inside the spec, in ascending order.
pub fn rigidity_lags(spec: &LevySpec) -> Vec<usize> {
    fn collect(b: &BaseSystem, out: &mut Vec<usize>) {
        match b {
            BaseSystem::RigidTower(t) => out.extend(t.rigidity_lags().iter().map(|&l| l as usize)),
            BaseSystem::DisjointUnion { components } => {
                for c in components {
                    collect(&c.system, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for s in spec.singles() {
        if let Some(b) = &s.base {
            collect(b, &mut out);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn weak_mixing_test(
    batch: &TrajectoryBatch,
    lambda: f64,
    max_lag: usize,
    lags: &[usize],
    cal: &Calibration,
) -> Result<WeakMixingTest> {
    check_margin(batch, max_lag)?;
    let est = autocov_empirical(batch, Transform::CharExp { lambda }, max_lag)?;
    Ok(weak_mixing_from(&est, lambda, lags, cal))
}

fn weak_mixing_from(
    est: &SpectralEstimate,
    lambda: f64,
    lags: &[usize],
    cal: &Calibration,
) -> WeakMixingTest {
    let k = est.max_lag();
    let cesaro = (1..=k).map(|j| est.coefficients[j].norm()).sum::<f64>() / k as f64;
    let noise = (1..=k).map(|j| est.combined_se(j as i64)).sum::<f64>() / k as f64;
    let threshold = cal.relative * est.coefficients[0].norm() + cal.z * noise;
    let in_range: Vec<usize> = lags.iter().copied().filter(|&l| l >= 1 && l <= k).collect();
    let rigidity_max = in_range
        .iter()
        .map(|&l| est.coefficients[l].norm())
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    let revival_detected =
        rigidity_max.is_some_and(|r| r >= cal.rigidity_factor * cesaro && r > cal.z * noise);
    WeakMixingTest {
        lambda,
        cesaro,
        threshold,
        pass: cesaro <= threshold,
        rigidity_lags: in_range,
        rigidity_max,
        revival_detected,
    }
}

/// Position in the hierarchy Bernoulli ⇒ mixing of all orders ⇒ mixing ⇒
/// weakly mixing ⇒ ergodic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassProfile {
    Nonergodic,
    Ergodic,
    WeaklyMixing,
    Mixing,
    MixingAllOrders,
    BernoulliCapable,
}

impl std::fmt::Display for ClassProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassProfile::Nonergodic => "nonergodic",
            ClassProfile::Ergodic => "ergodic",
            ClassProfile::WeaklyMixing => "weakly_mixing",
            ClassProfile::Mixing => "mixing",
            ClassProfile::MixingAllOrders => "mixing_all_orders",
            ClassProfile::BernoulliCapable => "bernoulli_capable",
        };
        f.write_str(s)
    }
}

/// Expected behaviour of the process built from a base of class `c`.
pub fn profile_of(c: DeclaredClass) -> ClassProfile {
    match c {
        DeclaredClass::Dissipative => ClassProfile::BernoulliCapable,
        DeclaredClass::ConservativeZeroType => ClassProfile::MixingAllOrders,
        DeclaredClass::PositiveTypeIIInfinite => ClassProfile::WeaklyMixing,
        DeclaredClass::TypeII1 => ClassProfile::Nonergodic,
        DeclaredClass::Composite => ClassProfile::Nonergodic,
    }
}

/// A product of factors behaves like its weakest factor.
pub fn declared_profile(spec: &LevySpec) -> ClassProfile {
    spec.leaf_classes()
        .into_iter()
        .map(profile_of)
        .min()
        .unwrap_or(ClassProfile::BernoulliCapable)
}

/// Raw verdicts feeding the decision table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Outcomes {
    pub birkhoff_constant: bool,
    pub atom_detected: bool,
    pub cesaro_decay: bool,
    pub pairwise_decay: bool,
    pub triple_decay: bool,
    pub rigidity_revival: bool,
    pub structural_certificate: bool,
}

/// The published decision table.
///
/// | condition (first match wins)                     | profile             |
/// |--------------------------------------------------|---------------------|
/// | atom detected or Birkhoff means not constant     | nonergodic          |
/// | Cesàro decay fails                               | ergodic             |
/// | rigidity revival or pairwise decay fails         | weakly_mixing       |
/// | triple decay fails                               | mixing              |
/// | moving-average certificate                       | bernoulli_capable   |
/// | otherwise                                        | mixing_all_orders   |
pub fn decide(o: &Outcomes) -> ClassProfile {
    if o.atom_detected || !o.birkhoff_constant {
        ClassProfile::Nonergodic
    } else if !o.cesaro_decay {
        ClassProfile::Ergodic
    } else if o.rigidity_revival || !o.pairwise_decay {
        ClassProfile::WeaklyMixing
    } else if !o.triple_decay {
        ClassProfile::Mixing
    } else if o.structural_certificate {
        ClassProfile::BernoulliCapable
    } else {
        ClassProfile::MixingAllOrders
    }
}

/// Checks that a profile is backed by every weaker test passing.
pub fn monotone_consistent(p: ClassProfile, o: &Outcomes) -> bool {
    let ergodic = o.birkhoff_constant && !o.atom_detected;
    let weak = ergodic && o.cesaro_decay;
    let mixing = weak && o.pairwise_decay && !o.rigidity_revival;
    let all = mixing && o.triple_decay;
    match p {
        ClassProfile::Nonergodic => !ergodic,
        ClassProfile::Ergodic => ergodic,
        ClassProfile::WeaklyMixing => weak,
        ClassProfile::Mixing => mixing,
        ClassProfile::MixingAllOrders => all,
        ClassProfile::BernoulliCapable => all && o.structural_certificate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub spec: LevySpec,
    pub declared_class: DeclaredClass,
    pub seed: u64,
    pub budget: Budget,
    pub calibration: Calibration,
    pub birkhoff: BirkhoffTest,
    pub atoms: Vec<(f64, AtomReport)>,
    /// Set when no λ on the grid exhibits an atom; not a proof of ergodicity.
    pub atom_note: Option<String>,
    pub weak_mixing: Vec<WeakMixingTest>,
    pub pairwise: Vec<DecayTest>,
    pub triple: TripleTest,
    pub outcomes: Outcomes,
    pub inferred: ClassProfile,
    pub declared: ClassProfile,
    pub matches: bool,
    pub monotone_consistent: bool,
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let yes = |b: bool| if b { "pass" } else { "fail" };
        let mut s = String::new();
        s.push_str(&format!("declared class: {}\n", self.declared_class));
        s.push_str(&format!(
            "birkhoff_constant: {} (statistic {:.6e}, se {:.3e}, variance {:.6e})\n",
            yes(self.outcomes.birkhoff_constant),
            self.birkhoff.statistic,
            self.birkhoff.standard_error,
            self.birkhoff.across_variance
        ));
        s.push_str(&format!(
            "atom_at_zero: {}\n",
            if self.outcomes.atom_detected {
                "detected"
            } else {
                "not found on grid"
            }
        ));
        s.push_str(&format!(
            "cesaro_decay: {}\n",
            yes(self.outcomes.cesaro_decay)
        ));
        for t in &self.weak_mixing {
            s.push_str(&format!(
                "  lambda {}: cesaro {:.6e}, threshold {:.6e}, rigidity max {}\n",
                t.lambda,
                t.cesaro,
                t.threshold,
                t.rigidity_max
                    .map_or("-".to_string(), |r| format!("{r:.6e}"))
            ));
        }
        s.push_str(&format!(
            "pairwise_decay: {}\n",
            yes(self.outcomes.pairwise_decay)
        ));
        for t in &self.pairwise {
            s.push_str(&format!(
                "  lambda {}: last quartile {:.6e}, threshold {:.6e}\n",
                t.lambda, t.last_quartile_max, t.threshold
            ));
        }
        s.push_str(&format!(
            "triple_decay: {} (threshold {:.6e})\n",
            yes(self.outcomes.triple_decay),
            self.triple.threshold
        ));
        s.push_str(&format!(
            "rigidity_revival: {}\n",
            if self.outcomes.rigidity_revival {
                "detected"
            } else {
                "absent"
            }
        ));
        s.push_str(&format!(
            "inferred: {}\ndeclared: {}\nmatch: {}\n",
            self.inferred, self.declared, self.matches
        ));
        s
    }
}

/// Runs the whole battery on one batch and applies the decision table.
pub fn classify(
    spec: &LevySpec,
    budget: &Budget,
    seed: u64,
    cal: &Calibration,
) -> Result<ClassificationReport> {
    budget.validate()?;
    spec.validate()?;
    let opts = budget.sample_options(derive_seed(seed, 0));
    let batch = sample_trajectory(spec, &opts)?;
    let target = if spec.representation() == Representation::Nonnegative {
        Some(window_mean(spec, &opts.sampling_window()?)?)
    } else {
        None
    };
    let birkhoff = birkhoff_constant_test(&batch, target, cal);

    let lags = rigidity_lags(spec);
    let per_lambda: Vec<(AtomReport, WeakMixingTest, DecayTest)> = budget
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let est = autocov_empirical(&batch, Transform::CharExp { lambda }, budget.max_lag)?;
            Ok((
                atom_at_zero(&est, cal.relative, cal.z)?,
                weak_mixing_from(&est, lambda, &lags, cal),
                decay_from(&est, lambda, cal),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let atoms: Vec<(f64, AtomReport)> = budget
        .lambdas
        .iter()
        .copied()
        .zip(per_lambda.iter().map(|p| p.0))
        .collect();
    let weak_mixing: Vec<WeakMixingTest> = per_lambda.iter().map(|p| p.1.clone()).collect();
    let pairwise: Vec<DecayTest> = per_lambda.into_iter().map(|p| p.2).collect();
    let atom_detected = atoms.iter().any(|(_, a)| a.detected);
    let triple = triple_mixing_test(&batch, budget.triple_lambda, &budget.triple_schedule, cal)?;

    let outcomes = Outcomes {
        birkhoff_constant: birkhoff.pass,
        atom_detected,
        cesaro_decay: weak_mixing.iter().all(|t| t.pass),
        pairwise_decay: pairwise.iter().all(|t| t.pass),
        triple_decay: triple.pass,
        rigidity_revival: weak_mixing.iter().any(|t| t.revival_detected),
        structural_certificate: spec.all_moving_average(),
    };
    let inferred = decide(&outcomes);
    let declared = declared_profile(spec);
    Ok(ClassificationReport {
        spec: spec.clone(),
        declared_class: spec.declared_class(),
        seed,
        budget: budget.clone(),
        calibration: *cal,
        birkhoff,
        atom_note: (!atom_detected).then(|| "atom not found on grid".to_string()),
        atoms,
        weak_mixing,
        pairwise,
        triple,
        monotone_consistent: monotone_consistent(inferred, &outcomes),
        outcomes,
        inferred,
        declared,
        matches: inferred == declared,
    })
}
