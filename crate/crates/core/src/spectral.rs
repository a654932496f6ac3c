//! Spectral measures through their Fourier coefficients σ̂(k).
//!
//! Convention: σ̂(k) = E[(g(X_0) - m) · conj(g(X_k) - m)] for process
//! covariances and σ̂(k) = ∫ (e^{iλx_0} - 1) · conj(e^{iλx_k} - 1) dQ for
//! Lévy measures, so σ̂(-k) = conj σ̂(k).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base_systems::WindowSpec;
use crate::error::{invalid, IdpError, Result};
use crate::process::{char_functional, LevySpec, TrajectoryBatch};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::mean_se;

pub const MIN_REPLICATES: usize = 100;
pub const MIN_CESARO_LAGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    EmpiricalProcess,
    LevyMeasure,
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    CharExp { lambda: f64 },
}

impl Transform {
    pub fn apply(self, x: f64) -> Complex64 {
        match self {
            Transform::Identity => Complex64::new(x, 0.0),
            Transform::CharExp { lambda } => Complex64::new(0.0, lambda * x).exp(),
        }
    }
}

/// Coefficients σ̂(0..=K) with standard errors; negative lags by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub provenance: Provenance,
    pub lambda: Option<f64>,
    pub coefficients: Vec<Complex64>,
    pub se_re: Vec<f64>,
    pub se_im: Vec<f64>,
}

impl SpectralEstimate {
    pub fn max_lag(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// σ̂(k) for k in [-K, K].
    pub fn get(&self, k: i64) -> Complex64 {
        let c = self.coefficients[k.unsigned_abs() as usize];
        if k < 0 {
            c.conj()
        } else {
            c
        }
    }

    pub fn se(&self, k: i64) -> (f64, f64) {
        let i = k.unsigned_abs() as usize;
        (self.se_re[i], self.se_im[i])
    }

    pub fn combined_se(&self, k: i64) -> f64 {
        let (a, b) = self.se(k);
        a.hypot(b)
    }

    /// CSV with columns lag, real, imag, se_real, se_imag for lags -K..=K.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,real,imag,se_real,se_imag\n");
        let k = self.max_lag() as i64;
        for lag in -k..=k {
            let c = self.get(lag);
            let (sr, si) = self.se(lag);
            out.push_str(&format!(
                "{lag},{},{},{},{}\n",
                fmt12(c.re),
                fmt12(c.im),
                fmt12(sr),
                fmt12(si)
            ));
        }
        out
    }
}

/// Twelve significant digits in scientific notation; negative zero prints as zero.
pub fn fmt12(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// Across-replicate covariances Cov(g(X_t), g(X_{t+k})), averaged over the
/// anchors t within each replicate, centred at the pooled mean.
pub fn autocov_empirical(
    batch: &TrajectoryBatch,
    transform: Transform,
    max_lag: usize,
) -> Result<SpectralEstimate> {
    let n = batch.length();
    if max_lag >= n {
        return Err(invalid(format!(
            "max lag {max_lag} must be below window length {n}"
        )));
    }
    if batch.replicates() < MIN_REPLICATES {
        return Err(IdpError::InsufficientBudget(format!(
            "autocovariance needs at least {MIN_REPLICATES} replicates"
        )));
    }
    let g: Vec<Vec<Complex64>> = batch
        .windows
        .iter()
        .map(|w| w.iter().map(|&x| transform.apply(x)).collect())
        .collect();
    let count = (g.len() * n) as f64;
    let mean: Complex64 = g.iter().flatten().sum::<Complex64>() / count;
    let mut coefficients = Vec::with_capacity(max_lag + 1);
    let mut se_re = Vec::with_capacity(max_lag + 1);
    let mut se_im = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let anchors = n - k;
        let per: Vec<Complex64> = g
            .iter()
            .map(|row| {
                (0..anchors)
                    .map(|t| (row[t] - mean) * (row[t + k] - mean).conj())
                    .sum::<Complex64>()
                    / anchors as f64
            })
            .collect();
        let re = mean_se(&per.iter().map(|z| z.re).collect::<Vec<_>>());
        let im = mean_se(&per.iter().map(|z| z.im).collect::<Vec<_>>());
        let im_mean = if k == 0 { 0.0 } else { im.mean };
        coefficients.push(Complex64::new(re.mean, im_mean));
        se_re.push(re.se);
        se_im.push(if k == 0 { 0.0 } else { im.se });
    }
    Ok(SpectralEstimate {
        provenance: Provenance::EmpiricalProcess,
        lambda: match transform {
            Transform::Identity => None,
            Transform::CharExp { lambda } => Some(lambda),
        },
        coefficients,
        se_re,
        se_im,
    })
}

/// ∫_{A(w)} g(x_0, x_k) dQ for k = 0..=K summed over the spec's components,
/// exact where the family permits and importance sampled otherwise.
pub fn levy_pair_coefficients<G>(
    spec: &LevySpec,
    w: &WindowSpec,
    max_lag: usize,
    draws: usize,
    seed: u64,
    g: G,
) -> Result<(Vec<Complex64>, Vec<f64>, Vec<f64>)>
where
    G: Fn(f64, f64) -> Complex64,
{
    if max_lag >= w.length {
        return Err(invalid(format!(
            "window margin does not cover lag {max_lag} (window length {})",
            w.length
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut coef = vec![zero; max_lag + 1];
    let mut var_re = vec![0.0; max_lag + 1];
    let mut var_im = vec![0.0; max_lag + 1];
    for (j, s) in spec.singles().iter().enumerate() {
        let Some(base) = &s.base else { continue };
        let exact: Option<Vec<Complex64>> = (0..=max_lag as i64)
            .map(|k| base.pair_integral(w, 0, k, &g))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        if let Some(vals) = exact {
            for (c, v) in coef.iter_mut().zip(vals) {
                *c += v;
            }
            continue;
        }
        if draws < 2 {
            return Err(IdpError::InsufficientBudget(
                "importance sampling needs at least two draws".into(),
            ));
        }
        let prepared = base.prepare(w)?;
        let mass = prepared.hit_mass();
        let mut rng = rng_from_seed(derive_seed(seed, j as u64));
        let mut samples: Vec<Vec<Complex64>> = vec![Vec::with_capacity(draws); max_lag + 1];
        for _ in 0..draws {
            let p = prepared.sample(base, &mut rng)?;
            let orbit = base.orbit_window(&p, 0, max_lag + 1)?;
            for (k, col) in samples.iter_mut().enumerate() {
                col.push(g(orbit[0], orbit[k]) * mass);
            }
        }
        for (k, col) in samples.iter().enumerate() {
            let re = mean_se(&col.iter().map(|z| z.re).collect::<Vec<_>>());
            let im = mean_se(&col.iter().map(|z| z.im).collect::<Vec<_>>());
            coef[k] += Complex64::new(re.mean, im.mean);
            var_re[k] += re.se * re.se;
            var_im[k] += im.se * im.se;
        }
    }
    Ok((
        coef,
        var_re.into_iter().map(f64::sqrt).collect(),
        var_im.into_iter().map(f64::sqrt).collect(),
    ))
}

/// σ̂(k) = ∫ (e^{iλx_0} - 1) conj(e^{iλx_k} - 1) dQ over Q|A(w).
pub fn levy_sigma(
    spec: &LevySpec,
    w: &WindowSpec,
    lambda: f64,
    max_lag: usize,
    draws: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    let g = |x: f64, y: f64| {
        (Complex64::new(0.0, lambda * x).exp() - 1.0)
            * (Complex64::new(0.0, lambda * y).exp() - 1.0).conj()
    };
    let (coefficients, se_re, se_im) = levy_pair_coefficients(spec, w, max_lag, draws, seed, g)?;
    Ok(SpectralEstimate {
        provenance: Provenance::LevyMeasure,
        lambda: Some(lambda),
        coefficients,
        se_re,
        se_im,
    })
}

/// Predicted Cov(e^{iλX_0}, e^{iλX_k}) = |E e^{iλX_0}|² (exp σ̂(k) - 1).
pub fn char_autocov_predict(
    spec: &LevySpec,
    w: &WindowSpec,
    lambda: f64,
    sigma: &SpectralEstimate,
    draws: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    if sigma.lambda != Some(lambda) {
        return Err(invalid(format!(
            "sigma computed at lambda {:?}, prediction requested at {lambda}",
            sigma.lambda
        )));
    }
    let phi = char_functional(spec, w, &[lambda], draws, seed)?;
    let mod2 = phi.mean.norm_sqr();
    let se_mod2 = 2.0 * phi.mean.norm() * phi.se();
    let mut coefficients = Vec::new();
    let mut se_re = Vec::new();
    let mut se_im = Vec::new();
    for (k, s) in sigma.coefficients.iter().enumerate() {
        let e = s.exp();
        coefficients.push((e - 1.0) * mod2);
        let scale = mod2 * e.norm();
        se_re.push((scale * sigma.se_re[k]).hypot((e - 1.0).norm() * se_mod2));
        se_im.push((scale * sigma.se_im[k]).hypot((e - 1.0).norm() * se_mod2));
    }
    Ok(SpectralEstimate {
        provenance: Provenance::Transformed,
        lambda: Some(lambda),
        coefficients,
        se_re,
        se_im,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagComparison {
    pub lag: usize,
    pub empirical: Complex64,
    pub predicted: Complex64,
    pub combined_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub lags: Vec<LagComparison>,
    pub all_pass: bool,
}

/// Lag-by-lag agreement: |empirical - predicted| within `z` standard errors,
/// where the standard error of a complex estimate is sqrt(se_re² + se_im²).
pub fn compare(
    empirical: &SpectralEstimate,
    predicted: &SpectralEstimate,
    max_lag: usize,
    z: f64,
) -> ComparisonReport {
    let lags: Vec<LagComparison> = (0..=max_lag)
        .map(|k| {
            let e = empirical.get(k as i64);
            let p = predicted.get(k as i64);
            let se = empirical
                .combined_se(k as i64)
                .hypot(predicted.combined_se(k as i64));
            let tol = 1e-12 * p.norm().max(1.0);
            LagComparison {
                lag: k,
                empirical: e,
                predicted: p,
                combined_se: se,
                pass: (e - p).norm() <= z * se + tol,
            }
        })
        .collect();
    let all_pass = lags.iter().all(|l| l.pass);
    ComparisonReport { lags, all_pass }
}

/// Cov(X_0, X_k) against ∫ x_0 x_k dQ.
pub fn covariance_isometry_check(
    spec: &LevySpec,
    batch: &TrajectoryBatch,
    max_lag: usize,
    draws: usize,
    seed: u64,
    z: f64,
) -> Result<ComparisonReport> {
    if !spec.is_square_integrable() {
        return Err(IdpError::NotIntegrable(
            "covariance isometry needs a square-integrable Levy measure".into(),
        ));
    }
    let empirical = autocov_empirical(batch, Transform::Identity, max_lag)?;
    let w = WindowSpec::new(batch.length() + batch.margin, batch.window.threshold)?;
    let (coefficients, se_re, se_im) =
        levy_pair_coefficients(spec, &w, max_lag, draws, seed, |x, y| {
            Complex64::new(x * y, 0.0)
        })?;
    let predicted = SpectralEstimate {
        provenance: Provenance::LevyMeasure,
        lambda: None,
        coefficients,
        se_re,
        se_im,
    };
    Ok(compare(&empirical, &predicted, max_lag, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomReport {
    pub cesaro: f64,
    pub standard_error: f64,
    pub threshold: f64,
    pub detected: bool,
}

/// Cesàro mean (1/K) Σ_{k=1}^K Re σ̂(k), estimating the atom σ{0}.
///
/// The atom is flagged when the lower 3-SE bound exceeds `relative · σ̂(0)`.
pub fn atom_at_zero(est: &SpectralEstimate, relative: f64, z: f64) -> Result<AtomReport> {
    let k = est.max_lag();
    if k < MIN_CESARO_LAGS {
        return Err(IdpError::InsufficientBudget(format!(
            "Cesaro estimate needs at least {MIN_CESARO_LAGS} lags"
        )));
    }
    let cesaro = (1..=k).map(|j| est.coefficients[j].re).sum::<f64>() / k as f64;
    let se = (1..=k).map(|j| est.se_re[j]).sum::<f64>() / k as f64;
    let threshold = relative * est.coefficients[0].re.abs();
    Ok(AtomReport {
        cesaro,
        standard_error: se,
        threshold,
        detected: cesaro - z * se > threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RajchmanReport {
    pub last_quartile_max: f64,
    pub decay_threshold: f64,
    pub decay_pass: bool,
    pub wiener_statistic: f64,
    pub wiener_threshold: f64,
    pub continuity_pass: bool,
}

/// Decay of |σ̂(k)| over the last quartile of lags and the Wiener statistic
/// (1/K) Σ_{k=1}^K |σ̂(k)|².
pub fn rajchman_diagnostic(est: &SpectralEstimate, relative: f64, z: f64) -> RajchmanReport {
    let k = est.max_lag();
    let s0 = est.coefficients[0].norm();
    if k == 0 {
        return RajchmanReport {
            last_quartile_max: 0.0,
            decay_threshold: relative * s0,
            decay_pass: true,
            wiener_statistic: 0.0,
            wiener_threshold: relative * s0 * s0,
            continuity_pass: true,
        };
    }
    let start = (3 * k / 4).max(1);
    let tail = start..=k;
    let last_quartile_max = tail
        .clone()
        .map(|j| est.coefficients[j].norm())
        .fold(0.0, f64::max);
    let tail_se = tail.map(|j| est.combined_se(j as i64)).fold(0.0, f64::max);
    let decay_threshold = (relative * s0).max(z * tail_se);
    let wiener_statistic = (1..=k).map(|j| est.coefficients[j].norm_sqr()).sum::<f64>() / k as f64;
    let noise = (1..=k)
        .map(|j| (z * est.combined_se(j as i64)).powi(2))
        .sum::<f64>()
        / k as f64;
    let wiener_threshold = (relative * s0 * s0).max(noise);
    RajchmanReport {
        last_quartile_max,
        decay_threshold,
        decay_pass: last_quartile_max <= decay_threshold,
        wiener_statistic,
        wiener_threshold,
        continuity_pass: wiener_statistic <= wiener_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(values: Vec<f64>, se: f64) -> SpectralEstimate {
        let n = values.len();
        SpectralEstimate {
            provenance: Provenance::EmpiricalProcess,
            lambda: None,
            coefficients: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            se_re: vec![se; n],
            se_im: vec![se; n],
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let est = SpectralEstimate {
            provenance: Provenance::LevyMeasure,
            lambda: Some(1.0),
            coefficients: vec![Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.25)],
            se_re: vec![0.0; 2],
            se_im: vec![0.0; 2],
        };
        assert_eq!(est.get(-1), est.get(1).conj());
    }

    #[test]
    fn atom_on_constant_and_zero_sequences() {
        let zero = synthetic(vec![0.0; 30], 0.0);
        let rep = atom_at_zero(&zero, 0.05, 3.0).unwrap();
        assert_eq!(rep.cesaro, 0.0);
        assert!(!rep.detected);
        let constant = synthetic(vec![0.7; 30], 0.0);
        let rep = atom_at_zero(&constant, 0.05, 3.0).unwrap();
        assert!((rep.cesaro - 0.7).abs() < 1e-15);
        assert!(rep.detected);
        assert!(atom_at_zero(&synthetic(vec![1.0; 10], 0.0), 0.05, 3.0).is_err());
    }

    #[test]
    fn cesaro_recovers_level_under_decaying_noise() {
        let c = 0.4;
        let vals: Vec<f64> = (0..400)
            .map(|k| {
                c + if k == 0 {
                    1.0
                } else {
                    0.5 * (-(k as f64) / 5.0).exp() * (k as f64).cos()
                }
            })
            .collect();
        let rep = atom_at_zero(&synthetic(vals, 0.01), 0.05, 3.0).unwrap();
        assert!((rep.cesaro - c).abs() <= 3.0 * rep.standard_error);
        assert!(rep.detected);
    }

    #[test]
    fn rajchman_extremes() {
        let zero = synthetic(vec![0.0; 40], 0.0);
        let r = rajchman_diagnostic(&zero, 0.05, 3.0);
        assert!(r.decay_pass && r.continuity_pass);
        let constant = synthetic(vec![1.0; 40], 0.0);
        let r = rajchman_diagnostic(&constant, 0.05, 3.0);
        assert!(!r.decay_pass && !r.continuity_pass);
    }

    #[test]
    fn csv_layout() {
        let est = synthetic(vec![1.0, -0.0, 0.25], 0.0);
        let csv = est.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lag,real,imag,se_real,se_imag");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("-2,2.50000000000e-1,"));
        assert_eq!(
            lines[3],
            "0,1.00000000000e0,0.00000000000e0,0.00000000000e0,0.00000000000e0"
        );
    }
}
