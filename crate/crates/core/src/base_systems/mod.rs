//! Base dynamical systems (Ω, μ, T, f) with σ-finite μ.
//!
//! Nothing here samples from μ itself. Every sampler draws from μ restricted
//! to the window-hit set
//!
//! ```text
//!   A(w) = { ω : max_{0 <= i < n} |f(T^i ω)| > ε },
//! ```
//!
//! which has finite mass, normalized to a probability.

pub mod finite;
pub mod moving_average;
pub mod tower;
pub mod walk;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, IdpError, Result};
use crate::rng::{derive_seed, rng_from_seed, sample_weighted};
use crate::stats::{complex_mean_se, ComplexEstimate};

pub use finite::{FiniteInvariant, Marginal, StationaryLaw};
pub use moving_average::{AmplitudeLaw, Atom, Integrand, MovingAverage};
pub use tower::RigidTower;
pub use walk::{NullRecurrentWalk, WalkPath, WalkSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredClass {
    Dissipative,
    ConservativeZeroType,
    PositiveTypeIIInfinite,
    TypeII1,
    Composite,
}

impl std::fmt::Display for DeclaredClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DeclaredClass::Dissipative => "dissipative",
            DeclaredClass::ConservativeZeroType => "conservative_zero_type",
            DeclaredClass::PositiveTypeIIInfinite => "positive_type_ii_infinite",
            DeclaredClass::TypeII1 => "type_ii1",
            DeclaredClass::Composite => "composite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub length: usize,
    pub threshold: f64,
}

impl WindowSpec {
    pub fn new(length: usize, threshold: f64) -> Result<Self> {
        if length == 0 {
            return Err(invalid("window length must be positive"));
        }
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(invalid("window threshold must be finite and positive"));
        }
        Ok(Self { length, threshold })
    }

    pub fn with_length(&self, length: usize) -> Self {
        Self { length, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedComponent {
    pub weight: f64,
    pub system: BaseSystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseSystem {
    MovingAverage(MovingAverage),
    NullRecurrentWalk(NullRecurrentWalk),
    RigidTower(RigidTower),
    FiniteInvariant(FiniteInvariant),
    DisjointUnion { components: Vec<WeightedComponent> },
}

pub fn moving_average_base(pulse: Vec<f64>, amplitude: AmplitudeLaw) -> Result<BaseSystem> {
    Ok(BaseSystem::MovingAverage(MovingAverage::new(
        pulse, amplitude,
    )?))
}

pub fn null_recurrent_walk_base(step_law: Vec<(i64, f64)>, mark: f64) -> Result<BaseSystem> {
    Ok(BaseSystem::NullRecurrentWalk(NullRecurrentWalk::new(
        step_law, mark,
    )?))
}

pub fn rigid_tower_base(stage_depth: u32) -> Result<BaseSystem> {
    Ok(BaseSystem::RigidTower(RigidTower::new(stage_depth, 1.0)?))
}

pub fn finite_invariant_base(intensity: f64, law: StationaryLaw) -> Result<BaseSystem> {
    Ok(BaseSystem::FiniteInvariant(FiniteInvariant::new(
        intensity, law,
    )?))
}

pub fn disjoint_union(components: Vec<(f64, BaseSystem)>) -> Result<BaseSystem> {
    let sys = BaseSystem::DisjointUnion {
        components: components
            .into_iter()
            .map(|(weight, system)| WeightedComponent { weight, system })
            .collect(),
    };
    sys.validate()?;
    Ok(sys)
}

/// A point ω of the base space. `shift` re-anchors the orbit:
/// the point evaluates at time `i` as its state evaluates at `i + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub shift: i64,
    pub state: PointState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointState {
    Pulse { offset: i64, amplitude: f64 },
    Walk(WalkPath),
    Level(i64),
    Law { seed: u64 },
    Component { index: usize, inner: Box<BasePoint> },
}

impl BasePoint {
    pub fn new(state: PointState) -> Self {
        Self { shift: 0, state }
    }

    /// T^k applied to the point.
    pub fn shifted(&self, k: i64) -> Self {
        Self {
            shift: self.shift + k,
            state: self.state.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCorrelation {
    pub lag: i64,
    pub estimate: f64,
    pub standard_error: f64,
}

/// Per-window sampling tables, built once and reused across draws.
#[derive(Debug, Clone)]
pub struct PreparedSampler {
    window: WindowSpec,
    mass: f64,
    kind: Prepared,
}

#[derive(Debug, Clone)]
enum Prepared {
    MovingAverage {
        offsets: Vec<(i64, f64)>,
        weights: Vec<f64>,
    },
    Walk(std::sync::Arc<WalkSampler>),
    Tower(Vec<i64>),
    Finite,
    Union {
        parts: Vec<PreparedSampler>,
        masses: Vec<f64>,
    },
}

impl PreparedSampler {
    pub fn hit_mass(&self) -> f64 {
        self.mass
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    /// One draw from μ|A(w) normalized.
    pub fn sample<R: Rng + ?Sized>(&self, system: &BaseSystem, rng: &mut R) -> Result<BasePoint> {
        if self.mass <= 0.0 {
            return Err(IdpError::ZeroHitMass);
        }
        let state = match (&self.kind, system) {
            (Prepared::MovingAverage { offsets, weights }, BaseSystem::MovingAverage(ma)) => {
                let (tau, t) = offsets[sample_weighted(weights, rng)];
                PointState::Pulse {
                    offset: tau,
                    amplitude: ma.amplitude.sample_tail(t, rng),
                }
            }
            (Prepared::Walk(sampler), BaseSystem::NullRecurrentWalk(walk)) => {
                PointState::Walk(sampler.sample(walk, rng))
            }
            (Prepared::Tower(levels), BaseSystem::RigidTower(_)) => {
                PointState::Level(RigidTower::sample_level(levels, rng))
            }
            (Prepared::Finite, BaseSystem::FiniteInvariant(fi)) => PointState::Law {
                seed: fi.sample_seed(&self.window, rng)?,
            },
            (Prepared::Union { parts, masses }, BaseSystem::DisjointUnion { components }) => {
                let index = sample_weighted(masses, rng);
                let inner = parts[index].sample(&components[index].system, rng)?;
                PointState::Component {
                    index,
                    inner: Box::new(inner),
                }
            }
            _ => return Err(invalid("prepared sampler does not belong to this system")),
        };
        Ok(BasePoint::new(state))
    }
}

fn window_coords_check(w: &WindowSpec, coords: &[i64]) -> Result<()> {
    if coords.iter().any(|&c| c < 0 || c >= w.length as i64) {
        return Err(IdpError::SupportViolation {
            coords: coords.to_vec(),
            start: 0,
            end: w.length as i64,
        });
    }
    Ok(())
}

impl BaseSystem {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseSystem::MovingAverage(ma) => ma.validate(),
            BaseSystem::NullRecurrentWalk(_) | BaseSystem::RigidTower(_) => Ok(()),
            BaseSystem::FiniteInvariant(fi) => fi.validate(),
            BaseSystem::DisjointUnion { components } => {
                if components.is_empty() {
                    return Err(IdpError::Empty("disjoint union components"));
                }
                for c in components {
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return Err(invalid("union weights must be finite and positive"));
                    }
                    c.system.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn declared_class(&self) -> DeclaredClass {
        match self {
            BaseSystem::MovingAverage(_) => DeclaredClass::Dissipative,
            BaseSystem::NullRecurrentWalk(_) => DeclaredClass::ConservativeZeroType,
            BaseSystem::RigidTower(_) => DeclaredClass::PositiveTypeIIInfinite,
            BaseSystem::FiniteInvariant(_) => DeclaredClass::TypeII1,
            BaseSystem::DisjointUnion { components } => {
                let leaves = self.leaf_classes();
                if leaves.iter().all(|c| *c == leaves[0]) && !components.is_empty() {
                    leaves[0]
                } else {
                    DeclaredClass::Composite
                }
            }
        }
    }

    /// Classes of all non-union components, sorted and deduplicated.
    pub fn leaf_classes(&self) -> Vec<DeclaredClass> {
        let mut out = match self {
            BaseSystem::DisjointUnion { components } => components
                .iter()
                .flat_map(|c| c.system.leaf_classes())
                .collect(),
            other => vec![other.declared_class()],
        };
        out.sort();
        out.dedup();
        out
    }

    /// f >= 0 everywhere.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            BaseSystem::MovingAverage(ma) => {
                let pos_pulse = ma.pulse.iter().all(|&h| h >= 0.0);
                let neg_pulse = ma.pulse.iter().all(|&h| h <= 0.0);
                let pos_amp = ma.amplitude.is_nonnegative();
                let neg_amp = match &ma.amplitude {
                    AmplitudeLaw::Atoms { atoms } => atoms.iter().all(|a| a.value < 0.0),
                    AmplitudeLaw::Power { positive, .. } => *positive == 0.0,
                };
                (pos_pulse && pos_amp) || (neg_pulse && neg_amp)
            }
            BaseSystem::NullRecurrentWalk(walk) => walk.mark() > 0.0,
            BaseSystem::RigidTower(t) => t.mark() > 0.0,
            BaseSystem::FiniteInvariant(fi) => fi.is_nonnegative(),
            BaseSystem::DisjointUnion { components } => {
                components.iter().all(|c| c.system.is_nonnegative())
            }
        }
    }

    /// μ(A(w)), exact for every family.
    pub fn hit_mass(&self, w: &WindowSpec) -> Result<f64> {
        let m = match self {
            BaseSystem::MovingAverage(ma) => ma.hit_mass(w),
            BaseSystem::NullRecurrentWalk(walk) => walk.hit_mass(w),
            BaseSystem::RigidTower(t) => t.hit_mass(w)?,
            BaseSystem::FiniteInvariant(fi) => fi.hit_mass(w),
            BaseSystem::DisjointUnion { components } => {
                let mut total = 0.0;
                for c in components {
                    total += c.weight * c.system.hit_mass(w)?;
                }
                total
            }
        };
        assert!(m.is_finite() && m >= 0.0, "hit mass must be finite");
        Ok(m)
    }

    pub fn prepare(&self, w: &WindowSpec) -> Result<PreparedSampler> {
        let (mass, kind) = match self {
            BaseSystem::MovingAverage(ma) => {
                let ow = ma.offset_weights(w);
                let mass = ow.iter().map(|x| x.2).sum();
                (
                    mass,
                    Prepared::MovingAverage {
                        offsets: ow.iter().map(|&(tau, t, _)| (tau, t)).collect(),
                        weights: ow.iter().map(|x| x.2).collect(),
                    },
                )
            }
            BaseSystem::NullRecurrentWalk(walk) => {
                let s = WalkSampler::new(walk, w);
                (s.hit_mass(), Prepared::Walk(std::sync::Arc::new(s)))
            }
            BaseSystem::RigidTower(t) => {
                let levels = t.hit_levels(w)?;
                (levels.len() as f64 * t.width(), Prepared::Tower(levels))
            }
            BaseSystem::FiniteInvariant(fi) => (fi.hit_mass(w), Prepared::Finite),
            BaseSystem::DisjointUnion { components } => {
                let mut parts = Vec::new();
                let mut masses = Vec::new();
                for c in components {
                    let p = c.system.prepare(w)?;
                    masses.push(c.weight * p.mass);
                    parts.push(p);
                }
                (masses.iter().sum(), Prepared::Union { parts, masses })
            }
        };
        Ok(PreparedSampler {
            window: *w,
            mass,
            kind,
        })
    }

    pub fn sample_conditioned<R: Rng + ?Sized>(
        &self,
        w: &WindowSpec,
        rng: &mut R,
    ) -> Result<BasePoint> {
        self.prepare(w)?.sample(self, rng)
    }

    /// f(T^i ω).
    pub fn orbit_eval(&self, p: &BasePoint, i: i64) -> Result<f64> {
        Ok(self.orbit_window(p, i, 1)?[0])
    }

    /// f(T^i ω) for i in [start, start + len).
    pub fn orbit_window(&self, p: &BasePoint, start: i64, len: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; len];
        self.add_orbit(p, start, &mut out)?;
        Ok(out)
    }

    /// Adds f(T^{start + j} ω) to `out[j]`.
    pub fn add_orbit(&self, p: &BasePoint, start: i64, out: &mut [f64]) -> Result<()> {
        let start = start + p.shift;
        let len = out.len();
        match (self, &p.state) {
            (BaseSystem::MovingAverage(ma), PointState::Pulse { offset, amplitude }) => {
                let lo = (offset - start).max(0);
                let hi = (offset + ma.support_len() - start).min(len as i64);
                for j in lo..hi {
                    out[j as usize] += amplitude * ma.tap(start + j - offset);
                }
            }
            (BaseSystem::NullRecurrentWalk(walk), PointState::Walk(path)) => {
                for (slot, x) in out.iter_mut().zip(path.positions(walk, start, len)) {
                    if x == 0 {
                        *slot += walk.mark();
                    }
                }
            }
            (BaseSystem::RigidTower(t), PointState::Level(level)) => {
                for (slot, v) in out.iter_mut().zip(t.orbit(*level, start, len)?) {
                    *slot += v;
                }
            }
            (BaseSystem::FiniteInvariant(fi), PointState::Law { seed }) => {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot += fi.law.value(*seed, start + j as i64);
                }
            }
            (BaseSystem::DisjointUnion { components }, PointState::Component { index, inner }) => {
                let c = components
                    .get(*index)
                    .ok_or_else(|| invalid("component index out of range"))?;
                c.system.add_orbit(inner, start, out)?;
            }
            _ => return Err(invalid("point does not belong to this system")),
        }
        Ok(())
    }

    /// True when the orbit exceeds ε somewhere in [start, start + n).
    pub fn hits(&self, p: &BasePoint, start: i64, w: &WindowSpec) -> Result<bool> {
        Ok(self
            .orbit_window(p, start, w.length)?
            .iter()
            .any(|x| x.abs() > w.threshold))
    }

    /// μ|A(w) as a finite list of weighted points, when it is purely atomic.
    pub fn atoms(&self, w: &WindowSpec) -> Result<Option<Vec<(f64, BasePoint)>>> {
        let out = match self {
            BaseSystem::MovingAverage(ma) => {
                let AmplitudeLaw::Atoms { atoms } = &ma.amplitude else {
                    return Ok(None);
                };
                let mut out = Vec::new();
                for (tau, t, _) in ma.offset_weights(w) {
                    for a in atoms.iter().filter(|a| a.value.abs() > t) {
                        out.push((
                            a.weight,
                            BasePoint::new(PointState::Pulse {
                                offset: tau,
                                amplitude: a.value,
                            }),
                        ));
                    }
                }
                out
            }
            BaseSystem::NullRecurrentWalk(_) => return Ok(None),
            BaseSystem::RigidTower(t) => t
                .hit_levels(w)?
                .into_iter()
                .map(|l| (t.width(), BasePoint::new(PointState::Level(l))))
                .collect(),
            BaseSystem::FiniteInvariant(fi) => {
                let Some(levels) = fi.constant_atoms(w) else {
                    return Ok(None);
                };
                let StationaryLaw::RandomConstant { atoms } = &fi.law else {
                    // a single constant: any seed realizes it
                    return Ok(Some(
                        levels
                            .iter()
                            .map(|a| (a.weight, BasePoint::new(PointState::Law { seed: 0 })))
                            .collect(),
                    ));
                };
                // find a seed realizing each level
                let mut out = Vec::new();
                for a in &levels {
                    let seed = (0u64..)
                        .take(1 << 20)
                        .find(|&s| fi.law.value(s, 0) == a.value)
                        .ok_or_else(|| invalid("could not address a random-constant level"))?;
                    let _ = atoms;
                    out.push((a.weight, BasePoint::new(PointState::Law { seed })));
                }
                out
            }
            BaseSystem::DisjointUnion { components } => {
                let mut out = Vec::new();
                for (index, c) in components.iter().enumerate() {
                    let Some(inner) = c.system.atoms(w)? else {
                        return Ok(None);
                    };
                    out.extend(inner.into_iter().map(|(m, p)| {
                        (
                            c.weight * m,
                            BasePoint::new(PointState::Component {
                                index,
                                inner: Box::new(p),
                            }),
                        )
                    }));
                }
                out
            }
        };
        Ok(Some(out))
    }

    /// μ(∩_{c in coords} {|f∘T^c| > ε}) for window coordinates.
    pub fn joint_exceed_mass(&self, w: &WindowSpec, coords: &[i64]) -> Result<f64> {
        window_coords_check(w, coords)?;
        if coords.is_empty() {
            return self.hit_mass(w);
        }
        Ok(match self {
            BaseSystem::MovingAverage(ma) => ma.joint_exceed_mass(w, coords),
            BaseSystem::NullRecurrentWalk(walk) => walk.joint_visit_mass(w, coords),
            BaseSystem::RigidTower(t) => {
                if t.mark().abs() <= w.threshold {
                    return Ok(0.0);
                }
                let lo = *coords.iter().min().unwrap();
                let count = t
                    .base_levels()
                    .iter()
                    .filter(|&&l| coords.iter().all(|&c| t.is_base_level(l + c - lo)))
                    .count();
                count as f64 * t.width()
            }
            BaseSystem::FiniteInvariant(fi) => fi.joint_exceed_mass(w, coords),
            BaseSystem::DisjointUnion { components } => {
                let mut total = 0.0;
                for c in components {
                    total += c.weight * c.system.joint_exceed_mass(w, coords)?;
                }
                total
            }
        })
    }

    /// ∫_{A(w)} g(x_a, x_b) dμ for window coordinates a, b, exact when the
    /// family permits. `g(0, 0)` must vanish.
    pub fn pair_integral<G>(
        &self,
        w: &WindowSpec,
        a: i64,
        b: i64,
        g: &G,
    ) -> Result<Option<Complex64>>
    where
        G: Fn(f64, f64) -> Complex64,
    {
        window_coords_check(w, &[a, b])?;
        if let Some(atoms) = self.atoms(w)? {
            let mut total = Complex64::new(0.0, 0.0);
            for (m, p) in &atoms {
                let x = self.orbit_eval(p, a)?;
                let y = self.orbit_eval(p, b)?;
                total += g(x, y) * *m;
            }
            return Ok(Some(total));
        }
        Ok(match self {
            BaseSystem::NullRecurrentWalk(walk) => {
                if walk.mark().abs() <= w.threshold {
                    return Ok(Some(Complex64::new(0.0, 0.0)));
                }
                let v = walk.mark();
                if a == b {
                    Some(g(v, v))
                } else {
                    let p = walk.return_probability((a - b).unsigned_abs());
                    Some(g(v, v) * p + (g(v, 0.0) + g(0.0, v)) * (1.0 - p))
                }
            }
            BaseSystem::FiniteInvariant(fi) => fi.pair_integral(w, a, b, g),
            BaseSystem::DisjointUnion { components } => {
                let mut total = Complex64::new(0.0, 0.0);
                for c in components {
                    match c.system.pair_integral(w, a, b, g)? {
                        Some(v) => total += v * c.weight,
                        None => return Ok(None),
                    }
                }
                Some(total)
            }
            _ => None,
        })
    }

    /// ∫_{A(w)} g(f∘T^i) dμ for a window coordinate i, exact.
    pub fn coordinate_integral(&self, w: &WindowSpec, i: i64, g: Integrand) -> Result<f64> {
        window_coords_check(w, &[i])?;
        Ok(match self {
            BaseSystem::MovingAverage(ma) => ma.coordinate_integral(w, i, g)?,
            // {x_i != 0} has unit mass and lies inside A(w) when visible
            BaseSystem::NullRecurrentWalk(walk) => {
                if walk.mark().abs() > w.threshold {
                    g.apply(walk.mark())
                } else {
                    0.0
                }
            }
            BaseSystem::RigidTower(t) => {
                t.check_window(w)?;
                if t.mark().abs() > w.threshold {
                    g.apply(t.mark())
                } else {
                    0.0
                }
            }
            BaseSystem::FiniteInvariant(fi) => fi.coordinate_integral(w, g),
            BaseSystem::DisjointUnion { components } => {
                let mut total = 0.0;
                for c in components {
                    total += c.weight * c.system.coordinate_integral(w, i, g)?;
                }
                total
            }
        })
    }

    /// ∫ f dμ over the whole space.
    pub fn full_mean(&self) -> Result<f64> {
        Ok(match self {
            BaseSystem::MovingAverage(ma) => match &ma.amplitude {
                AmplitudeLaw::Atoms { atoms } => {
                    let first: f64 = atoms.iter().map(|a| a.weight * a.value).sum();
                    first * ma.pulse.iter().sum::<f64>()
                }
                AmplitudeLaw::Power { alpha, .. } => {
                    return Err(IdpError::NotIntegrable(format!(
                        "power-law amplitudes with alpha = {alpha} have no first moment"
                    )))
                }
            },
            BaseSystem::NullRecurrentWalk(walk) => walk.mark(),
            BaseSystem::RigidTower(t) => t.mark(),
            BaseSystem::FiniteInvariant(fi) => fi.full_integral(Integrand::Identity),
            BaseSystem::DisjointUnion { components } => {
                let mut total = 0.0;
                for c in components {
                    total += c.weight * c.system.full_mean()?;
                }
                total
            }
        })
    }

    /// True when ∫ f² dμ < ∞.
    pub fn is_square_integrable(&self) -> bool {
        match self {
            BaseSystem::MovingAverage(ma) => matches!(ma.amplitude, AmplitudeLaw::Atoms { .. }),
            BaseSystem::DisjointUnion { components } => {
                components.iter().all(|c| c.system.is_square_integrable())
            }
            _ => true,
        }
    }

    /// max over window coordinates of ∫_{A(w)^c} (f∘T^i)² dμ.
    pub fn small_jump_variance(&self, w: &WindowSpec) -> Result<f64> {
        Ok(match self {
            BaseSystem::MovingAverage(ma) => ma.small_jump_variance(w),
            BaseSystem::NullRecurrentWalk(walk) => {
                if walk.mark().abs() > w.threshold {
                    0.0
                } else {
                    walk.mark().powi(2)
                }
            }
            BaseSystem::RigidTower(t) => {
                if t.mark().abs() > w.threshold {
                    0.0
                } else {
                    t.mark().powi(2)
                }
            }
            BaseSystem::FiniteInvariant(fi) => fi.small_jump_variance(w),
            BaseSystem::DisjointUnion { components } => {
                let mut total = 0.0;
                for c in components {
                    total += c.weight * c.system.small_jump_variance(w)?;
                }
                total
            }
        })
    }

    /// μ(A(w) ∩ T^{-k} A(w)), exact.
    pub fn exact_return_mass(&self, w: &WindowSpec, k: i64) -> Result<f64> {
        Ok(match self {
            BaseSystem::MovingAverage(ma) => ma.return_mass(w, k),
            BaseSystem::NullRecurrentWalk(walk) => walk.return_mass(w, k),
            BaseSystem::RigidTower(t) => {
                let k = k.abs();
                let wide = w.with_length(w.length + k as usize);
                t.check_window(&wide)?;
                let hit = t.hit_levels(w)?;
                let count = hit
                    .iter()
                    .filter(|&&l| hit.binary_search(&(l + k)).is_ok())
                    .count();
                count as f64 * t.width()
            }
            BaseSystem::FiniteInvariant(fi) => match &fi.law {
                StationaryLaw::Iid { .. } => {
                    let n = w.length as i32;
                    let union = w.length + (k.unsigned_abs() as usize).min(w.length);
                    let q1 = fi.law.window_small_probability(w.threshold, 1);
                    fi.intensity * (1.0 - 2.0 * q1.powi(n) + q1.powi(union as i32))
                }
                _ => fi.hit_mass(w),
            },
            BaseSystem::DisjointUnion { components } => {
                let mut total = 0.0;
                for c in components {
                    total += c.weight * c.system.exact_return_mass(w, k)?;
                }
                total
            }
        })
    }

    /// Importance-sampling estimate of μ(A(w) ∩ T^{-k} A(w)).
    pub fn correlation_estimate(
        &self,
        w: &WindowSpec,
        k: i64,
        draws: usize,
        seed: u64,
    ) -> Result<EmpiricalCorrelation> {
        if draws == 0 {
            return Err(invalid("correlation estimate needs at least one draw"));
        }
        let prepared = self.prepare(w)?;
        let mass = prepared.hit_mass();
        if k == 0 {
            return Ok(EmpiricalCorrelation {
                lag: 0,
                estimate: mass,
                standard_error: 0.0,
            });
        }
        let mut rng = rng_from_seed(seed);
        let mut hits = 0usize;
        for _ in 0..draws {
            let p = prepared.sample(self, &mut rng)?;
            if self.hits(&p, k, w)? {
                hits += 1;
            }
        }
        let frac = hits as f64 / draws as f64;
        let se = if draws > 1 {
            (frac * (1.0 - frac) / (draws - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(EmpiricalCorrelation {
            lag: k,
            estimate: mass * frac,
            standard_error: mass * se,
        })
    }

    /// ∫_{A(w)} F(x_0, …, x_{n-1}) dμ for a functional F of the window
    /// vanishing on the zero sequence: exact summation over atoms when μ|A(w)
    /// is atomic, otherwise importance sampling with `draws` points.
    pub fn window_integral<F>(
        &self,
        prepared: &PreparedSampler,
        draws: usize,
        seed: u64,
        f: F,
    ) -> Result<ComplexEstimate>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let w = *prepared.window();
        if let Some(atoms) = self.atoms(&w)? {
            let mut total = Complex64::new(0.0, 0.0);
            for (m, p) in &atoms {
                total += f(&self.orbit_window(p, 0, w.length)?) * *m;
            }
            return Ok(ComplexEstimate::exact(total));
        }
        if draws < 2 {
            return Err(IdpError::InsufficientBudget(
                "importance sampling needs at least two draws".into(),
            ));
        }
        let mass = prepared.hit_mass();
        let mut rng = rng_from_seed(derive_seed(seed, 0x1515));
        let mut vals = Vec::with_capacity(draws);
        for _ in 0..draws {
            let p = prepared.sample(self, &mut rng)?;
            vals.push(f(&self.orbit_window(&p, 0, w.length)?) * mass);
        }
        Ok(complex_mean_se(&vals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn delta_one() -> AmplitudeLaw {
        AmplitudeLaw::Atoms {
            atoms: vec![Atom::new(1.0, 1.0)],
        }
    }

    fn w(n: usize, eps: f64) -> WindowSpec {
        WindowSpec::new(n, eps).unwrap()
    }

    #[test]
    fn single_tap_unit_mass() {
        let b = moving_average_base(vec![1.0], delta_one()).unwrap();
        assert_eq!(b.hit_mass(&w(1, 0.5)).unwrap(), 1.0);
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let p = b.sample_conditioned(&w(1, 0.5), &mut rng).unwrap();
            assert_eq!(
                p.state,
                PointState::Pulse {
                    offset: 0,
                    amplitude: 1.0
                }
            );
        }
    }

    #[test]
    fn two_tap_mass_two() {
        let b = moving_average_base(vec![1.0, 1.0], delta_one()).unwrap();
        assert_eq!(b.hit_mass(&w(1, 0.5)).unwrap(), 2.0);
    }

    #[test]
    fn power_law_unit_tail() {
        let law = AmplitudeLaw::Power {
            alpha: 1.5,
            positive: 1.0,
            negative: 0.0,
        };
        let b = moving_average_base(vec![1.0], law).unwrap();
        assert!((b.hit_mass(&w(1, 1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orbit_eval_and_shift() {
        let b = moving_average_base(vec![1.0, 2.0], delta_one()).unwrap();
        let p = BasePoint::new(PointState::Pulse {
            offset: 0,
            amplitude: 3.0,
        });
        assert_eq!(b.orbit_eval(&p, 1).unwrap(), 6.0);
        assert_eq!(b.orbit_eval(&p, 1).unwrap(), b.orbit_eval(&p, 1).unwrap());
        let q = BasePoint::new(PointState::Pulse {
            offset: 1,
            amplitude: 3.0,
        });
        for i in -3..4 {
            assert_eq!(
                b.orbit_eval(&q, i + 1).unwrap(),
                b.orbit_eval(&p, i).unwrap()
            );
            assert_eq!(
                b.orbit_eval(&p.shifted(1), i).unwrap(),
                b.orbit_eval(&p, i + 1).unwrap()
            );
        }
    }

    #[test]
    fn walk_examples() {
        let b = null_recurrent_walk_base(vec![(-1, 0.5), (1, 0.5)], 1.0).unwrap();
        assert_eq!(b.hit_mass(&w(1, 0.5)).unwrap(), 1.0);
        assert!((b.hit_mass(&w(2, 0.5)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn finite_examples() {
        let c = finite_invariant_base(1.5, StationaryLaw::Constant { value: 2.0 }).unwrap();
        assert_eq!(c.hit_mass(&w(4, 1.0)).unwrap(), 1.5);
        let mut rng = rng_from_seed(2);
        let p = c.sample_conditioned(&w(4, 1.0), &mut rng).unwrap();
        assert_eq!(c.orbit_window(&p, 0, 4).unwrap(), vec![2.0; 4]);
        let corr = c.correlation_estimate(&w(4, 1.0), 7, 100, 3).unwrap();
        assert_eq!(corr.estimate, 1.5);
    }

    #[test]
    fn union_is_additive() {
        let a = moving_average_base(vec![1.0, 1.0], delta_one()).unwrap();
        let t = rigid_tower_base(3).unwrap();
        let u = disjoint_union(vec![(1.0, a.clone()), (1.0, t.clone())]).unwrap();
        let win = w(3, 0.5);
        let sum = a.hit_mass(&win).unwrap() + t.hit_mass(&win).unwrap();
        assert_eq!(u.hit_mass(&win).unwrap(), sum);
        assert_eq!(u.declared_class(), DeclaredClass::Composite);
        let single = disjoint_union(vec![(1.0, a.clone())]).unwrap();
        assert_eq!(single.hit_mass(&win).unwrap(), a.hit_mass(&win).unwrap());
        assert!(disjoint_union(vec![]).is_err());
    }

    #[test]
    fn tower_depth_error() {
        let t = rigid_tower_base(2).unwrap();
        assert!(matches!(
            t.hit_mass(&w(100, 0.5)),
            Err(IdpError::DepthExceeded { .. })
        ));
    }

    #[test]
    fn serde_round_trip() {
        let b = disjoint_union(vec![
            (
                1.0,
                null_recurrent_walk_base(vec![(-1, 0.5), (1, 0.5)], 1.0).unwrap(),
            ),
            (2.0, rigid_tower_base(4).unwrap()),
        ])
        .unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: BaseSystem = serde_json::from_str(&s).unwrap();
        assert_eq!(b, back);
    }
}
