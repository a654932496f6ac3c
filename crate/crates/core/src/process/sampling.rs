//! Maruyama integral over window-truncated Poisson configurations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LevySpec, Representation, SingleSpec};
use crate::base_systems::{Integrand, WindowSpec};
use crate::error::{IdpError, Result};
use crate::rng::derive_seed;
use crate::suspension::sample_with;

/// Default bound on the per-coordinate variance of neglected jumps.
pub const DEFAULT_SMALL_JUMP_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleOptions {
    /// Output window length n.
    pub length: usize,
    pub threshold: f64,
    pub replicates: usize,
    /// Extra coordinates added to the hit window, then cropped.
    #[serde(default)]
    pub margin: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub seed: u64,
}

fn default_tolerance() -> f64 {
    DEFAULT_SMALL_JUMP_TOLERANCE
}

impl SampleOptions {
    pub fn new(length: usize, threshold: f64, replicates: usize, seed: u64) -> Self {
        Self {
            length,
            threshold,
            replicates,
            margin: 0,
            tolerance: DEFAULT_SMALL_JUMP_TOLERANCE,
            seed,
        }
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The window whose hit set is sampled (output window plus margin).
    pub fn sampling_window(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.length + self.margin, self.threshold)
    }

    pub fn output_window(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.length, self.threshold)
    }
}

/// M independent windows (X_0, …, X_{n-1}).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBatch {
    pub windows: Vec<Vec<f64>>,
    pub window: WindowSpec,
    pub margin: usize,
    pub representation: Representation,
    /// Sum over components of max_i ∫_{A^c} (f∘T^i)² dμ.
    pub small_jump_bound: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub replicate_seeds: Vec<u64>,
}

impl TrajectoryBatch {
    pub fn replicates(&self) -> usize {
        self.windows.len()
    }

    pub fn length(&self) -> usize {
        self.window.length
    }

    /// X_i across replicates.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.windows.iter().map(|w| w[i]).collect()
    }
}

fn suggest_threshold(s: &SingleSpec, w: &WindowSpec, tolerance: f64) -> Result<f64> {
    let base = s.base.as_ref().unwrap();
    let mut eps = w.threshold;
    for _ in 0..60 {
        eps /= 2.0;
        if base.small_jump_variance(&WindowSpec::new(w.length, eps)?)? <= tolerance {
            return Ok(eps);
        }
    }
    Ok(0.0)
}

/// Per-coordinate constants C_i with X_i = Σ f(T^i x) - C_i.
fn compensators(s: &SingleSpec, w: &WindowSpec, n: usize) -> Result<Vec<f64>> {
    let Some(base) = &s.base else {
        return Ok(vec![-s.drift; n]);
    };
    (0..n as i64)
        .map(|i| {
            Ok(match s.representation {
                Representation::Nonnegative => -s.drift,
                Representation::Centered => base.coordinate_integral(w, i, Integrand::Identity)?,
                Representation::Truncated => {
                    base.coordinate_integral(w, i, Integrand::Truncation)? - s.drift
                }
            })
        })
        .collect()
}

fn sample_single(s: &SingleSpec, opts: &SampleOptions, component: u64) -> Result<TrajectoryBatch> {
    let total = opts.sampling_window()?;
    let n = opts.length;
    let replicate_seeds: Vec<u64> = (0..opts.replicates as u64)
        .map(|r| derive_seed(opts.seed, r))
        .collect();
    let comp = compensators(s, &total, n)?;
    let mut bound = 0.0;
    let windows = match &s.base {
        None => vec![vec![s.drift; n]; opts.replicates],
        Some(base) => {
            bound = base.small_jump_variance(&total)?;
            if s.representation != Representation::Nonnegative && bound > opts.tolerance {
                return Err(IdpError::SmallJumpBound {
                    bound,
                    tolerance: opts.tolerance,
                    suggested: suggest_threshold(s, &total, opts.tolerance)?,
                });
            }
            let prepared = base.prepare(&total)?;
            replicate_seeds
                .par_iter()
                .map(|&rs| {
                    let config = sample_with(base, &prepared, derive_seed(rs, component))?;
                    let mut out = vec![0.0; n];
                    for p in &config.points {
                        base.add_orbit(p, 0, &mut out)?;
                    }
                    for (x, c) in out.iter_mut().zip(&comp) {
                        *x -= c;
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(TrajectoryBatch {
        windows,
        window: opts.output_window()?,
        margin: opts.margin,
        representation: s.representation,
        small_jump_bound: bound,
        tolerance: opts.tolerance,
        seed: opts.seed,
        replicate_seeds,
    })
}

/// One batch per single component, sampled independently.
pub fn sample_components(spec: &LevySpec, opts: &SampleOptions) -> Result<Vec<TrajectoryBatch>> {
    spec.validate()?;
    if opts.replicates == 0 {
        return Err(IdpError::InsufficientBudget(
            "at least one replicate".into(),
        ));
    }
    spec.singles()
        .iter()
        .enumerate()
        .map(|(j, s)| sample_single(s, opts, j as u64))
        .collect()
}

/// Sample M windows of the IDp process with Lévy measure given by `spec`.
pub fn sample_trajectory(spec: &LevySpec, opts: &SampleOptions) -> Result<TrajectoryBatch> {
    let mut parts = sample_components(spec, opts)?.into_iter();
    let mut batch = parts.next().expect("at least one component");
    for p in parts {
        for (a, b) in batch.windows.iter_mut().zip(&p.windows) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        batch.small_jump_bound += p.small_jump_bound;
    }
    batch.representation = spec.representation();
    Ok(batch)
}
