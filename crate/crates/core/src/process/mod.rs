//! Stationary IDp processes from Lévy-measure specifications.
//!
//! A [`LevySpec`] is either a single Lévy measure Q (the push-forward of a
//! base system by ω ↦ {f(T^i ω)}) with a drift and a representation, or an
//! independent convolution of such specs.

mod functionals;
mod sampling;
mod stable;

use serde::{Deserialize, Serialize};

pub use functionals::{char_functional, laplace_functional, mean_value, window_mean};
pub use sampling::{
    sample_components, sample_trajectory, SampleOptions, TrajectoryBatch,
    DEFAULT_SMALL_JUMP_TOLERANCE,
};
pub use stable::{
    alpha_stable_spec, moving_average_roundtrip, scaled_spec, scaling_check, GeneratorLaw,
    ScalingReport, TailEvent,
};

use crate::base_systems::{BaseSystem, DeclaredClass};
use crate::error::{invalid, IdpError, Result};

/// Truncation function c(x): -1 below -1, x on [-1, 1], +1 above 1.
pub fn truncation(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// How drift and compensation enter the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// X_i = b + Σ f(T^i x) - ∫_A c(f∘T^i) dμ
    Truncated,
    /// X_i = Σ f(T^i x) - ∫_A f∘T^i dμ, no drift
    Centered,
    /// X_i = b + Σ f(T^i x), f >= 0 and b >= 0
    Nonnegative,
}

/// Slot of the four-fold factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSlot {
    Bernoulli,
    Mixing,
    WeaklyMixing,
    Nonergodic,
}

impl FactorSlot {
    pub fn expected_class(self) -> DeclaredClass {
        match self {
            FactorSlot::Bernoulli => DeclaredClass::Dissipative,
            FactorSlot::Mixing => DeclaredClass::ConservativeZeroType,
            FactorSlot::WeaklyMixing => DeclaredClass::PositiveTypeIIInfinite,
            FactorSlot::Nonergodic => DeclaredClass::TypeII1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FactorSlot::Bernoulli => "bernoulli",
            FactorSlot::Mixing => "mixing",
            FactorSlot::WeaklyMixing => "weakly_mixing",
            FactorSlot::Nonergodic => "nonergodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleSpec {
    /// `None` is the zero Lévy measure (drift only).
    #[serde(default)]
    pub base: Option<BaseSystem>,
    #[serde(default)]
    pub drift: f64,
    pub representation: Representation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionSpec {
    pub components: Vec<LevySpec>,
    /// Representation label of the sum: the common one, or `Truncated`
    /// when components mix representations.
    pub representation: Representation,
    /// Factorization slots, parallel to `components` (empty when unused).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<FactorSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevySpec {
    Single(SingleSpec),
    Convolution(ConvolutionSpec),
}

impl LevySpec {
    pub fn single(base: BaseSystem, drift: f64, representation: Representation) -> Result<Self> {
        let s = LevySpec::Single(SingleSpec {
            base: Some(base),
            drift,
            representation,
        });
        s.validate()?;
        Ok(s)
    }

    pub fn drift_only(drift: f64, representation: Representation) -> Result<Self> {
        let s = LevySpec::Single(SingleSpec {
            base: None,
            drift,
            representation,
        });
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevySpec::Single(s) => {
                if !s.drift.is_finite() {
                    return Err(invalid("drift must be finite"));
                }
                if let Some(base) = &s.base {
                    base.validate()?;
                }
                match s.representation {
                    Representation::Nonnegative => {
                        if s.drift < 0.0 {
                            return Err(IdpError::Representation(
                                "nonnegative representation needs drift >= 0".into(),
                            ));
                        }
                        if s.base.as_ref().is_some_and(|b| !b.is_nonnegative()) {
                            return Err(IdpError::Representation(
                                "nonnegative representation needs f >= 0".into(),
                            ));
                        }
                    }
                    Representation::Centered => {
                        if s.drift != 0.0 {
                            return Err(IdpError::Representation(
                                "centered representation carries no drift".into(),
                            ));
                        }
                        if s.base.as_ref().is_some_and(|b| !b.is_square_integrable()) {
                            return Err(IdpError::Representation(
                                "centered representation needs a square-integrable Levy measure"
                                    .into(),
                            ));
                        }
                    }
                    Representation::Truncated => {}
                }
                Ok(())
            }
            LevySpec::Convolution(c) => {
                if c.components.is_empty() {
                    return Err(IdpError::Empty("convolution components"));
                }
                if !c.slots.is_empty() && c.slots.len() != c.components.len() {
                    return Err(invalid("slots must be parallel to components"));
                }
                for (i, comp) in c.components.iter().enumerate() {
                    comp.validate()?;
                    if let Some(slot) = c.slots.get(i) {
                        check_slot(*slot, comp)?;
                    }
                }
                Ok(())
            }
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            LevySpec::Single(s) => s.representation,
            LevySpec::Convolution(c) => c.representation,
        }
    }

    /// Classes of all non-union base components, sorted and deduplicated.
    pub fn leaf_classes(&self) -> Vec<DeclaredClass> {
        let mut out = match self {
            LevySpec::Single(s) => s
                .base
                .as_ref()
                .map(|b| b.leaf_classes())
                .unwrap_or_default(),
            LevySpec::Convolution(c) => {
                c.components.iter().flat_map(|x| x.leaf_classes()).collect()
            }
        };
        out.sort();
        out.dedup();
        out
    }

    /// Declared class of the Lévy measure: a single class, or `Composite`.
    pub fn declared_class(&self) -> DeclaredClass {
        let leaves = self.leaf_classes();
        if leaves.len() == 1 {
            leaves[0]
        } else {
            DeclaredClass::Composite
        }
    }

    /// Single specs in sampling order.
    pub fn singles(&self) -> Vec<&SingleSpec> {
        match self {
            LevySpec::Single(s) => vec![s],
            LevySpec::Convolution(c) => c.components.iter().flat_map(|x| x.singles()).collect(),
        }
    }

    /// True when the base observable is nonnegative everywhere.
    pub fn is_nonnegative(&self) -> bool {
        self.singles()
            .iter()
            .all(|s| s.base.as_ref().is_none_or(|b| b.is_nonnegative()))
    }

    pub fn is_square_integrable(&self) -> bool {
        self.singles()
            .iter()
            .all(|s| s.base.as_ref().is_none_or(|b| b.is_square_integrable()))
    }

    /// True when every Lévy-measure component is built from moving averages.
    pub fn all_moving_average(&self) -> bool {
        fn ma(b: &BaseSystem) -> bool {
            match b {
                BaseSystem::MovingAverage(_) => true,
                BaseSystem::DisjointUnion { components } => {
                    components.iter().all(|c| ma(&c.system))
                }
                _ => false,
            }
        }
        self.singles()
            .iter()
            .all(|s| s.base.as_ref().is_none_or(ma))
    }
}

fn check_slot(slot: FactorSlot, spec: &LevySpec) -> Result<()> {
    let expected = slot.expected_class();
    let leaves = spec.leaf_classes();
    if leaves.iter().any(|c| *c != expected) {
        return Err(IdpError::ClassMismatch {
            slot: slot.name(),
            expected: expected.to_string(),
            found: leaves
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("+"),
        });
    }
    Ok(())
}

/// Independent sum. Lévy measures and drifts add; a mix of representations
/// is labelled `Truncated`.
pub fn convolve(specs: Vec<LevySpec>) -> Result<LevySpec> {
    if specs.is_empty() {
        return Err(IdpError::Empty("convolution components"));
    }
    let first = specs[0].representation();
    let representation = if specs.iter().all(|s| s.representation() == first) {
        first
    } else {
        Representation::Truncated
    };
    let out = LevySpec::Convolution(ConvolutionSpec {
        components: specs,
        representation,
        slots: Vec::new(),
    });
    out.validate()?;
    Ok(out)
}

/// P = P_B * P_m * P_wm * P_ne with each slot checked against its class.
pub fn canonical_four(
    bernoulli: Option<LevySpec>,
    mixing: Option<LevySpec>,
    weakly_mixing: Option<LevySpec>,
    nonergodic: Option<LevySpec>,
) -> Result<LevySpec> {
    let mut components = Vec::new();
    let mut slots = Vec::new();
    for (slot, spec) in [
        (FactorSlot::Bernoulli, bernoulli),
        (FactorSlot::Mixing, mixing),
        (FactorSlot::WeaklyMixing, weakly_mixing),
        (FactorSlot::Nonergodic, nonergodic),
    ] {
        if let Some(s) = spec {
            check_slot(slot, &s)?;
            components.push(s);
            slots.push(slot);
        }
    }
    let LevySpec::Convolution(mut c) = convolve(components)? else {
        unreachable!()
    };
    c.slots = slots;
    Ok(LevySpec::Convolution(c))
}
