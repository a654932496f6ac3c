//! Moving-average round trip and the symmetric α-stable family.

use serde::{Deserialize, Serialize};

use super::{LevySpec, Representation, SingleSpec};
use crate::base_systems::{
    disjoint_union, AmplitudeLaw, Atom, BaseSystem, DeclaredClass, MovingAverage, WindowSpec,
};
use crate::error::{invalid, Result};

/// Lévy measure Q_g of the sequences carried by the wandering set {τ = 0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorLaw {
    /// Weighted point masses at finitely supported sequences starting at 0.
    Sequences { atoms: Vec<GeneratorAtom> },
    /// The law of `v * pulse` with v ~ amplitude.
    ScaledPulse {
        pulse: Vec<f64>,
        amplitude: AmplitudeLaw,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorAtom {
    pub sequence: Vec<f64>,
    pub weight: f64,
}

fn peak(seq: &[f64], k: i64, n: usize) -> f64 {
    (0..n as i64)
        .filter_map(|i| {
            let j = i - k;
            (j >= 0).then(|| seq.get(j as usize).copied().unwrap_or(0.0).abs())
        })
        .fold(0.0, f64::max)
}

impl GeneratorLaw {
    /// Offsets k for which Q_g ∘ T^{-k} can reach the window.
    pub fn offsets(&self, w: &WindowSpec) -> std::ops::Range<i64> {
        let len = match self {
            GeneratorLaw::Sequences { atoms } => {
                atoms.iter().map(|a| a.sequence.len()).max().unwrap_or(0)
            }
            GeneratorLaw::ScaledPulse { pulse, .. } => pulse.len(),
        } as i64;
        (1 - len)..(w.length as i64)
    }

    /// Mass of the generator placed at offset k that hits A(w).
    pub fn offset_hit_mass(&self, w: &WindowSpec, k: i64) -> f64 {
        match self {
            GeneratorLaw::Sequences { atoms } => atoms
                .iter()
                .filter(|a| peak(&a.sequence, k, w.length) > w.threshold)
                .map(|a| a.weight)
                .sum(),
            GeneratorLaw::ScaledPulse { pulse, amplitude } => {
                let p = peak(pulse, k, w.length);
                if p > 0.0 {
                    amplitude.tail_mass(w.threshold / p)
                } else {
                    0.0
                }
            }
        }
    }

    /// Q = Σ_k Q_g ∘ T^{-k} as a base system.
    pub fn rebuild(&self) -> Result<BaseSystem> {
        match self {
            GeneratorLaw::ScaledPulse { pulse, amplitude } => Ok(BaseSystem::MovingAverage(
                MovingAverage::new(pulse.clone(), amplitude.clone())?,
            )),
            GeneratorLaw::Sequences { atoms } => {
                let unit = |a: &GeneratorAtom| {
                    MovingAverage::new(
                        a.sequence.clone(),
                        AmplitudeLaw::Atoms {
                            atoms: vec![Atom::new(1.0, a.weight)],
                        },
                    )
                    .map(BaseSystem::MovingAverage)
                };
                match atoms.as_slice() {
                    [] => Err(invalid("generator law has no atoms")),
                    [one] => unit(one),
                    many => disjoint_union(
                        many.iter()
                            .map(|a| Ok((1.0, unit(a)?)))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                }
            }
        }
    }
}

/// Extract Q_g = Q|_{τ = 0} from a moving-average spec and rebuild
/// Q = Σ_k Q_g ∘ T^{-k} from it.
pub fn moving_average_roundtrip(spec: &LevySpec) -> Result<(GeneratorLaw, LevySpec)> {
    let LevySpec::Single(SingleSpec {
        base: Some(BaseSystem::MovingAverage(ma)),
        drift,
        representation,
    }) = spec
    else {
        return Err(invalid(
            "round trip needs a single spec over a moving-average (dissipative) base",
        ));
    };
    let generator = match &ma.amplitude {
        AmplitudeLaw::Atoms { atoms } => GeneratorLaw::Sequences {
            atoms: atoms
                .iter()
                .map(|a| GeneratorAtom {
                    sequence: ma.pulse.iter().map(|h| a.value * h).collect(),
                    weight: a.weight,
                })
                .collect(),
        },
        law => GeneratorLaw::ScaledPulse {
            pulse: ma.pulse.clone(),
            amplitude: law.clone(),
        },
    };
    let rebuilt = LevySpec::single(generator.rebuild()?, *drift, *representation)?;
    Ok((generator, rebuilt))
}

/// Symmetric α-stable moving average: ρ(dv) = (α/2)|v|^{-α-1} dv.
pub fn alpha_stable_spec(alpha: f64, pulse: Vec<f64>) -> Result<LevySpec> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid(format!("stability index {alpha} outside (0, 2)")));
    }
    let amplitude = AmplitudeLaw::Power {
        alpha,
        positive: 0.5,
        negative: 0.5,
    };
    LevySpec::single(
        BaseSystem::MovingAverage(MovingAverage::new(pulse, amplitude)?),
        0.0,
        Representation::Truncated,
    )
}

fn power_ma(spec: &LevySpec) -> Result<(&MovingAverage, f64, f64, f64)> {
    if let LevySpec::Single(SingleSpec {
        base: Some(BaseSystem::MovingAverage(ma)),
        ..
    }) = spec
    {
        if let AmplitudeLaw::Power {
            alpha,
            positive,
            negative,
        } = ma.amplitude
        {
            return Ok((ma, alpha, positive, negative));
        }
    }
    Err(invalid(
        "scaling checks need a power-law moving-average spec",
    ))
}

/// Lévy measure of b·X: the amplitude law is multiplied by b^α.
pub fn scaled_spec(spec: &LevySpec, b: f64) -> Result<LevySpec> {
    if !(b.is_finite() && b > 0.0) {
        return Err(invalid("scale must be positive"));
    }
    let (ma, alpha, positive, negative) = power_ma(spec)?;
    let f = b.powf(alpha);
    let amplitude = AmplitudeLaw::Power {
        alpha,
        positive: positive * f,
        negative: negative * f,
    };
    LevySpec::single(
        BaseSystem::MovingAverage(MovingAverage::new(ma.pulse.clone(), amplitude)?),
        0.0,
        spec.representation(),
    )
}

/// The event {x_coord > level}, level > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEvent {
    pub coord: i64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub alpha: f64,
    pub scale: f64,
    pub expected_ratio: f64,
    /// Q(S_b^{-1} E) / Q(E) per event.
    pub ratios: Vec<f64>,
    pub max_relative_error: f64,
    pub class_before: DeclaredClass,
    pub class_after: DeclaredClass,
    pub class_invariant: bool,
}

/// Q{x_c > t} for a power-law moving average (independent of c).
fn upper_tail(ma: &MovingAverage, alpha: f64, positive: f64, negative: f64, t: f64) -> f64 {
    ma.pulse
        .iter()
        .map(|&h| {
            if h > 0.0 {
                positive * (t / h).powf(-alpha)
            } else if h < 0.0 {
                negative * (t / -h).powf(-alpha)
            } else {
                0.0
            }
        })
        .sum()
}

/// Checks Q(S_b^{-1} E) = b^α Q(E) on tail events and that the scaled
/// measure stays in the declared class.
pub fn scaling_check(spec: &LevySpec, b: f64, events: &[TailEvent]) -> Result<ScalingReport> {
    let (ma, alpha, positive, negative) = power_ma(spec)?;
    if events.iter().any(|e| !(e.level > 0.0)) {
        return Err(invalid("tail events need a positive level"));
    }
    let expected = b.powf(alpha);
    let ratios: Vec<f64> = events
        .iter()
        .map(|e| {
            upper_tail(ma, alpha, positive, negative, e.level / b)
                / upper_tail(ma, alpha, positive, negative, e.level)
        })
        .collect();
    let max_relative_error = ratios
        .iter()
        .map(|r| ((r - expected) / expected).abs())
        .fold(0.0, f64::max);
    let scaled = scaled_spec(spec, b)?;
    let class_before = spec.declared_class();
    let class_after = scaled.declared_class();
    Ok(ScalingReport {
        alpha,
        scale: b,
        expected_ratio: expected,
        ratios,
        max_relative_error,
        class_before,
        class_after,
        class_invariant: class_before == class_after,
    })
}
