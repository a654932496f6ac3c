//! Dissipative family: Q is the sum over offsets of the law of a pulse
//! `v * h(. - tau)` with random amplitude `v ~ rho`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WindowSpec;
use crate::error::{invalid, IdpError, Result};
use crate::process::truncation;
use crate::rng::sample_weighted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(value: f64, weight: f64) -> Self {
        Self { value, weight }
    }
}

/// Amplitude measure rho on R \ {0}.
///
/// `Power` has density `positive * alpha * v^(-alpha-1)` on `v > 0` and
/// `negative * alpha * |v|^(-alpha-1)` on `v < 0`, so that
/// `rho(v > t) = positive * t^(-alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeLaw {
    Atoms {
        atoms: Vec<Atom>,
    },
    Power {
        alpha: f64,
        positive: f64,
        negative: f64,
    },
}

/// Which scalar map is integrated against the amplitude law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    Identity,
    Truncation,
    Square,
}

impl Integrand {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Integrand::Identity => x,
            Integrand::Truncation => truncation(x),
            Integrand::Square => x * x,
        }
    }
}

impl AmplitudeLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            AmplitudeLaw::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid("amplitude law has no atoms"));
                }
                for a in atoms {
                    if !a.value.is_finite() || a.value == 0.0 {
                        return Err(invalid("amplitude atoms must be finite and nonzero"));
                    }
                    if !a.weight.is_finite() || a.weight <= 0.0 {
                        return Err(invalid(
                            "amplitude atom weights must be finite and positive",
                        ));
                    }
                }
                Ok(())
            }
            AmplitudeLaw::Power {
                alpha,
                positive,
                negative,
            } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(invalid(format!(
                        "power-law index {alpha} outside (0, 2): not integrable against v^2 ^ 1"
                    )));
                }
                if !(positive.is_finite() && negative.is_finite())
                    || *positive < 0.0
                    || *negative < 0.0
                    || positive + negative <= 0.0
                {
                    return Err(invalid(
                        "power-law side weights must be >= 0 with positive sum",
                    ));
                }
                Ok(())
            }
        }
    }

    /// rho(|v| > t).
    pub fn tail_mass(&self, t: f64) -> f64 {
        match self {
            AmplitudeLaw::Atoms { atoms } => atoms
                .iter()
                .filter(|a| a.value.abs() > t)
                .map(|a| a.weight)
                .sum(),
            AmplitudeLaw::Power {
                alpha,
                positive,
                negative,
            } => (positive + negative) * t.powf(-alpha),
        }
    }

    /// rho(v > t) for t > 0 (upper tail only).
    pub fn upper_tail_mass(&self, t: f64) -> f64 {
        match self {
            AmplitudeLaw::Atoms { atoms } => {
                atoms.iter().filter(|a| a.value > t).map(|a| a.weight).sum()
            }
            AmplitudeLaw::Power {
                alpha, positive, ..
            } => positive * t.powf(-alpha),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            AmplitudeLaw::Atoms { atoms } => atoms.iter().all(|a| a.value > 0.0),
            AmplitudeLaw::Power { negative, .. } => *negative == 0.0,
        }
    }

    /// Draw v from rho conditioned on |v| > t. Requires `tail_mass(t) > 0`.
    pub fn sample_tail<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        match self {
            AmplitudeLaw::Atoms { atoms } => {
                let w: Vec<f64> = atoms
                    .iter()
                    .map(|a| if a.value.abs() > t { a.weight } else { 0.0 })
                    .collect();
                atoms[sample_weighted(&w, rng)].value
            }
            AmplitudeLaw::Power {
                alpha,
                positive,
                negative,
            } => {
                let sign = if rng.gen::<f64>() * (positive + negative) < *positive {
                    1.0
                } else {
                    -1.0
                };
                // inverse CDF of the Pareto tail above t
                let u: f64 = 1.0 - rng.gen::<f64>();
                sign * t * u.powf(-1.0 / alpha)
            }
        }
    }

    /// ∫_{|v|<=t} v^2 rho(dv).
    pub fn small_second_moment(&self, t: f64) -> f64 {
        match self {
            AmplitudeLaw::Atoms { atoms } => atoms
                .iter()
                .filter(|a| a.value.abs() <= t)
                .map(|a| a.weight * a.value * a.value)
                .sum(),
            AmplitudeLaw::Power {
                alpha,
                positive,
                negative,
            } => (positive + negative) * alpha * t.powf(2.0 - alpha) / (2.0 - alpha),
        }
    }

    /// ∫_{|v|>t} g(a v) rho(dv) in closed form.
    pub fn tail_integral(&self, t: f64, a: f64, g: Integrand) -> Result<f64> {
        match self {
            AmplitudeLaw::Atoms { atoms } => Ok(atoms
                .iter()
                .filter(|x| x.value.abs() > t)
                .map(|x| x.weight * g.apply(a * x.value))
                .sum()),
            AmplitudeLaw::Power {
                alpha,
                positive,
                negative,
            } => {
                if a == 0.0 {
                    return Ok(0.0);
                }
                let b = a.abs();
                match g {
                    Integrand::Identity => {
                        if *alpha <= 1.0 && positive != negative {
                            return Err(IdpError::NotIntegrable(format!(
                                "power-law amplitudes with alpha = {alpha} have no first moment"
                            )));
                        }
                        if *alpha <= 1.0 {
                            // symmetric: principal value vanishes
                            return Ok(0.0);
                        }
                        let one_side = b * alpha * t.powf(1.0 - alpha) / (alpha - 1.0);
                        Ok(a.signum() * (positive - negative) * one_side)
                    }
                    Integrand::Truncation => {
                        let one_side = power_truncation_side(*alpha, t, b);
                        Ok(a.signum() * (positive - negative) * one_side)
                    }
                    Integrand::Square => Err(IdpError::NotIntegrable(
                        "power-law amplitudes have no second moment".into(),
                    )),
                }
            }
        }
    }
}

/// ∫_{w>t} c(b w) alpha w^(-alpha-1) dw for b > 0.
fn power_truncation_side(alpha: f64, t: f64, b: f64) -> f64 {
    let knee = 1.0 / b;
    let upper = t.max(knee);
    let mut total = upper.powf(-alpha);
    if t < knee {
        let linear = if (alpha - 1.0).abs() < 1e-15 {
            (knee / t).ln()
        } else {
            (knee.powf(1.0 - alpha) - t.powf(1.0 - alpha)) / (1.0 - alpha)
        };
        total += alpha * b * linear;
    }
    total
}

/// Dissipative base: counting measure on offsets times the amplitude law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingAverage {
    pub pulse: Vec<f64>,
    pub amplitude: AmplitudeLaw,
}

impl MovingAverage {
    pub fn new(pulse: Vec<f64>, amplitude: AmplitudeLaw) -> Result<Self> {
        let ma = Self { pulse, amplitude };
        ma.validate()?;
        Ok(ma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulse.iter().any(|h| !h.is_finite()) {
            return Err(invalid("pulse entries must be finite"));
        }
        if self.pulse.iter().all(|&h| h == 0.0) {
            return Err(invalid("pulse must have at least one nonzero entry"));
        }
        self.amplitude.validate()
    }

    /// h(j), zero outside the stored support.
    pub fn tap(&self, j: i64) -> f64 {
        if j < 0 {
            return 0.0;
        }
        self.pulse.get(j as usize).copied().unwrap_or(0.0)
    }

    pub fn support_len(&self) -> i64 {
        self.pulse.len() as i64
    }

    /// Offsets that can touch window coordinates `[start, start + len)`.
    pub fn offsets(&self, start: i64, len: usize) -> std::ops::Range<i64> {
        (start - self.support_len() + 1)..(start + len as i64)
    }

    /// max_{i in window} |h(i - tau)|.
    pub fn window_peak(&self, tau: i64, start: i64, len: usize) -> f64 {
        (start..start + len as i64)
            .map(|i| self.tap(i - tau).abs())
            .fold(0.0, f64::max)
    }

    /// Amplitude threshold for an offset: the point hits iff |v| > result.
    pub fn amplitude_threshold(&self, tau: i64, w: &WindowSpec) -> Option<f64> {
        let peak = self.window_peak(tau, 0, w.length);
        (peak > 0.0).then(|| w.threshold / peak)
    }

    pub fn offset_weights(&self, w: &WindowSpec) -> Vec<(i64, f64, f64)> {
        self.offsets(0, w.length)
            .filter_map(|tau| {
                self.amplitude_threshold(tau, w)
                    .map(|t| (tau, t, self.amplitude.tail_mass(t)))
            })
            .collect()
    }

    pub fn hit_mass(&self, w: &WindowSpec) -> f64 {
        self.offset_weights(w).iter().map(|&(_, _, m)| m).sum()
    }

    /// μ(A(w) ∩ T^{-k} A(w)), exact.
    pub fn return_mass(&self, w: &WindowSpec, k: i64) -> f64 {
        let lo = (-self.support_len() + 1).min(k - self.support_len() + 1);
        let hi = (w.length as i64).max(k + w.length as i64);
        (lo..hi)
            .filter_map(|tau| {
                let a = self.window_peak(tau, 0, w.length);
                let b = self.window_peak(tau, k, w.length);
                let m = a.min(b);
                (m > 0.0).then(|| self.amplitude.tail_mass(w.threshold / m))
            })
            .sum()
    }

    /// μ(∩_c {|f∘T^c| > ε}).
    pub fn joint_exceed_mass(&self, w: &WindowSpec, coords: &[i64]) -> f64 {
        let lo = coords.iter().min().copied().unwrap_or(0);
        let hi = coords.iter().max().copied().unwrap_or(0);
        ((lo - self.support_len() + 1)..=hi)
            .filter_map(|tau| {
                let m = coords
                    .iter()
                    .map(|&c| self.tap(c - tau).abs())
                    .fold(f64::INFINITY, f64::min);
                (m > 0.0 && m.is_finite()).then(|| self.amplitude.tail_mass(w.threshold / m))
            })
            .sum()
    }

    /// ∫_{A(w)} g(f∘T^i) dμ.
    pub fn coordinate_integral(&self, w: &WindowSpec, i: i64, g: Integrand) -> Result<f64> {
        let mut total = 0.0;
        for (tau, t, _) in self.offset_weights(w) {
            let a = self.tap(i - tau);
            if a != 0.0 {
                total += self.amplitude.tail_integral(t, a, g)?;
            }
        }
        Ok(total)
    }

    /// max over window coordinates of ∫_{A(w)^c} (f∘T^i)^2 dμ.
    pub fn small_jump_variance(&self, w: &WindowSpec) -> f64 {
        (0..w.length as i64)
            .map(|i| {
                self.offsets(0, w.length)
                    .map(|tau| {
                        let a = self.tap(i - tau);
                        if a == 0.0 {
                            return 0.0;
                        }
                        let t = self.amplitude_threshold(tau, w).unwrap_or(f64::INFINITY);
                        a * a * self.amplitude.small_second_moment(t)
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_atom() -> AmplitudeLaw {
        AmplitudeLaw::Atoms {
            atoms: vec![Atom::new(1.0, 1.0)],
        }
    }

    #[test]
    fn all_zero_pulse_rejected() {
        assert!(MovingAverage::new(vec![0.0, 0.0], unit_atom()).is_err());
    }

    #[test]
    fn power_index_out_of_range_rejected() {
        let law = AmplitudeLaw::Power {
            alpha: 2.0,
            positive: 1.0,
            negative: 0.0,
        };
        assert!(MovingAverage::new(vec![1.0], law).is_err());
    }

    #[test]
    fn power_tail_integral_matches_quadrature() {
        // midpoint rule in the variable u = t * w^{-alpha} on (0, 1]
        let alpha = 1.5;
        let t = 0.3;
        let b = 2.0;
        let law = AmplitudeLaw::Power {
            alpha,
            positive: 1.0,
            negative: 0.0,
        };
        let n = 400_000;
        let mut acc = 0.0;
        for k in 0..n {
            let u = (k as f64 + 0.5) / n as f64;
            let w = t * u.powf(-1.0 / alpha);
            acc += truncation(b * w);
        }
        let quad = acc / n as f64 * t.powf(-alpha);
        let exact = law.tail_integral(t, b, Integrand::Truncation).unwrap();
        assert!((quad - exact).abs() < 1e-4, "{quad} vs {exact}");
    }

    #[test]
    fn power_small_moment_closed_form() {
        let law = AmplitudeLaw::Power {
            alpha: 0.8,
            positive: 0.5,
            negative: 0.5,
        };
        // ∫_0^t v^2 * 0.8 v^{-1.8} dv per side = 0.8 t^1.2 / 1.2
        let expected = 0.8 * 0.1f64.powf(1.2) / 1.2;
        assert!((law.small_second_moment(0.1) - expected).abs() < 1e-15);
    }

    #[test]
    fn return_mass_vanishes_beyond_reach() {
        let ma = MovingAverage::new(vec![1.0, 2.0, 1.0], unit_atom()).unwrap();
        let w = WindowSpec::new(2, 0.5).unwrap();
        assert_eq!(ma.return_mass(&w, 0), ma.hit_mass(&w));
        // pulse length 3, window 2: offsets overlap up to lag 3
        assert!(ma.return_mass(&w, 3) > 0.0);
        assert_eq!(ma.return_mass(&w, 4), 0.0);
    }
}
