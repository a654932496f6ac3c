//! Type II₁ family: a finite multiple `c * P` of a stationary probability
//! law on sequences. Realizations are addressed by a seed so any coordinate
//! can be regenerated on demand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::moving_average::{Atom, Integrand};
use super::WindowSpec;
use crate::error::{invalid, IdpError, Result};
use crate::rng::addressed_uniform;

const MAX_REJECTIONS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Atoms { atoms: Vec<Atom> },
    Uniform { low: f64, high: f64 },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        match self {
            Marginal::Atoms { atoms } => validate_probability_atoms(atoms),
            Marginal::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(invalid("uniform marginal needs finite low < high"));
                }
                Ok(())
            }
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        match self {
            Marginal::Atoms { atoms } => pick_atom(atoms, u),
            Marginal::Uniform { low, high } => low + (high - low) * u,
        }
    }

    /// P(|X| <= eps).
    fn small_probability(&self, eps: f64) -> f64 {
        match self {
            Marginal::Atoms { atoms } => atoms
                .iter()
                .filter(|a| a.value.abs() <= eps)
                .map(|a| a.weight)
                .sum(),
            Marginal::Uniform { low, high } => {
                let lo = low.max(-eps);
                let hi = high.min(eps);
                ((hi - lo).max(0.0)) / (high - low)
            }
        }
    }

    /// E[g(X); |X| <= eps] when `small`, else E[g(X)].
    fn expectation(&self, g: Integrand, small: Option<f64>) -> f64 {
        match self {
            Marginal::Atoms { atoms } => atoms
                .iter()
                .filter(|a| small.is_none_or(|e| a.value.abs() <= e))
                .map(|a| a.weight * g.apply(a.value))
                .sum(),
            Marginal::Uniform { low, high } => {
                let (lo, hi) = match small {
                    Some(e) => (low.max(-e), high.min(e)),
                    None => (*low, *high),
                };
                if hi <= lo {
                    return 0.0;
                }
                uniform_integral(lo, hi, g) / (high - low)
            }
        }
    }
}

/// ∫_lo^hi g(x) dx for the piecewise-polynomial integrands.
fn uniform_integral(lo: f64, hi: f64, g: Integrand) -> f64 {
    match g {
        Integrand::Identity => (hi * hi - lo * lo) / 2.0,
        Integrand::Square => (hi.powi(3) - lo.powi(3)) / 3.0,
        Integrand::Truncation => {
            let seg = |a: f64, b: f64, f: &dyn Fn(f64, f64) -> f64| {
                if b > a {
                    f(a, b)
                } else {
                    0.0
                }
            };
            seg(lo, hi.min(-1.0), &|a, b| -(b - a))
                + seg(lo.max(-1.0), hi.min(1.0), &|a, b| (b * b - a * a) / 2.0)
                + seg(lo.max(1.0), hi, &|a, b| b - a)
        }
    }
}

fn validate_probability_atoms(atoms: &[Atom]) -> Result<()> {
    if atoms.is_empty() {
        return Err(invalid("law has no atoms"));
    }
    if atoms
        .iter()
        .any(|a| !a.value.is_finite() || !a.weight.is_finite() || a.weight <= 0.0)
    {
        return Err(invalid("law atoms need finite values and positive weights"));
    }
    Ok(())
}

fn pick_atom(atoms: &[Atom], u: f64) -> f64 {
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    let mut x = u * total;
    for a in atoms {
        if x < a.weight {
            return a.value;
        }
        x -= a.weight;
    }
    atoms.last().unwrap().value
}

/// Stationary probability law on R^Z with seed-addressed realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StationaryLaw {
    /// The constant sequence `value`.
    Constant { value: f64 },
    /// A constant sequence whose level is drawn from `atoms`.
    RandomConstant { atoms: Vec<Atom> },
    /// Independent coordinates with the given marginal.
    Iid { marginal: Marginal },
}

impl StationaryLaw {
    fn validate(&self) -> Result<()> {
        match self {
            StationaryLaw::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("constant law value must be finite"));
                }
                Ok(())
            }
            StationaryLaw::RandomConstant { atoms } => validate_probability_atoms(atoms),
            StationaryLaw::Iid { marginal } => marginal.validate(),
        }
    }

    fn normalized_atoms(atoms: &[Atom]) -> Vec<Atom> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        atoms
            .iter()
            .map(|a| Atom::new(a.value, a.weight / total))
            .collect()
    }

    /// Coordinate `i` of the realization addressed by `seed`.
    pub fn value(&self, seed: u64, i: i64) -> f64 {
        match self {
            StationaryLaw::Constant { value } => *value,
            StationaryLaw::RandomConstant { atoms } => pick_atom(atoms, addressed_uniform(seed, 0)),
            StationaryLaw::Iid { marginal } => marginal.quantile(addressed_uniform(seed, i)),
        }
    }

    /// P(|x_i| <= eps for all i in a window of length n).
    pub fn window_small_probability(&self, eps: f64, n: usize) -> f64 {
        match self {
            StationaryLaw::Constant { value } => {
                if value.abs() <= eps {
                    1.0
                } else {
                    0.0
                }
            }
            StationaryLaw::RandomConstant { atoms } => Self::normalized_atoms(atoms)
                .iter()
                .filter(|a| a.value.abs() <= eps)
                .map(|a| a.weight)
                .sum(),
            StationaryLaw::Iid { marginal } => marginal.small_probability(eps).powi(n as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteInvariant {
    pub intensity: f64,
    pub law: StationaryLaw,
}

impl FiniteInvariant {
    pub fn new(intensity: f64, law: StationaryLaw) -> Result<Self> {
        let f = Self { intensity, law };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity.is_finite() && self.intensity > 0.0) {
            return Err(invalid("intensity must be finite and positive"));
        }
        self.law.validate()?;
        if self.law.window_small_probability(0.0, 1) >= 1.0 {
            return Err(invalid(
                "law is concentrated on the zero sequence, which carries no Levy mass",
            ));
        }
        Ok(())
    }

    pub fn is_nonnegative(&self) -> bool {
        match &self.law {
            StationaryLaw::Constant { value } => *value >= 0.0,
            StationaryLaw::RandomConstant { atoms } => atoms.iter().all(|a| a.value >= 0.0),
            StationaryLaw::Iid { marginal } => match marginal {
                Marginal::Atoms { atoms } => atoms.iter().all(|a| a.value >= 0.0),
                Marginal::Uniform { low, .. } => *low >= 0.0,
            },
        }
    }

    pub fn hit_probability(&self, w: &WindowSpec) -> f64 {
        1.0 - self.law.window_small_probability(w.threshold, w.length)
    }

    pub fn hit_mass(&self, w: &WindowSpec) -> f64 {
        self.intensity * self.hit_probability(w)
    }

    pub fn hits(&self, seed: u64, w: &WindowSpec) -> bool {
        (0..w.length as i64).any(|i| self.law.value(seed, i).abs() > w.threshold)
    }

    /// Rejection sampling of a seed whose realization hits the window.
    pub fn sample_seed<R: Rng + ?Sized>(&self, w: &WindowSpec, rng: &mut R) -> Result<u64> {
        for _ in 0..MAX_REJECTIONS {
            let seed: u64 = rng.gen();
            if self.hits(seed, w) {
                return Ok(seed);
            }
        }
        Err(IdpError::ZeroHitMass)
    }

    /// Law of the window restricted to A(w), when it is a finite list of
    /// weighted constant sequences.
    pub fn constant_atoms(&self, w: &WindowSpec) -> Option<Vec<Atom>> {
        let atoms = match &self.law {
            StationaryLaw::Constant { value } => vec![Atom::new(*value, 1.0)],
            StationaryLaw::RandomConstant { atoms } => StationaryLaw::normalized_atoms(atoms),
            StationaryLaw::Iid { .. } => return None,
        };
        Some(
            atoms
                .into_iter()
                .filter(|a| a.value.abs() > w.threshold)
                .map(|a| Atom::new(a.value, a.weight * self.intensity))
                .collect(),
        )
    }

    pub fn joint_exceed_mass(&self, w: &WindowSpec, coords: &[i64]) -> f64 {
        let mut cs = coords.to_vec();
        cs.sort_unstable();
        cs.dedup();
        match &self.law {
            StationaryLaw::Iid { marginal } => {
                let p = 1.0 - marginal.small_probability(w.threshold);
                self.intensity * p.powi(cs.len() as i32)
            }
            _ => self.intensity * (1.0 - self.law.window_small_probability(w.threshold, 1)),
        }
    }

    /// ∫_{A(w)} g(x_a, x_b) dμ for window coordinates a, b.
    pub fn pair_integral<G>(
        &self,
        w: &WindowSpec,
        a: i64,
        b: i64,
        g: G,
    ) -> Option<num_complex::Complex64>
    where
        G: Fn(f64, f64) -> num_complex::Complex64,
    {
        use num_complex::Complex64;
        if let Some(atoms) = self.constant_atoms(w) {
            return Some(atoms.iter().map(|x| g(x.value, x.value) * x.weight).sum());
        }
        let StationaryLaw::Iid {
            marginal: Marginal::Atoms { atoms },
        } = &self.law
        else {
            return None;
        };
        let atoms = StationaryLaw::normalized_atoms(atoms);
        let eps = w.threshold;
        let q: f64 = atoms
            .iter()
            .filter(|x| x.value.abs() <= eps)
            .map(|x| x.weight)
            .sum();
        let n = w.length as i32;
        let mut full = Complex64::new(0.0, 0.0);
        let mut small = Complex64::new(0.0, 0.0);
        if a == b {
            for x in &atoms {
                let v = g(x.value, x.value) * x.weight;
                full += v;
                if x.value.abs() <= eps {
                    small += v;
                }
            }
            small *= q.powi(n - 1);
        } else {
            for x in &atoms {
                for y in &atoms {
                    let v = g(x.value, y.value) * (x.weight * y.weight);
                    full += v;
                    if x.value.abs() <= eps && y.value.abs() <= eps {
                        small += v;
                    }
                }
            }
            small *= q.powi(n - 2);
        }
        Some((full - small) * self.intensity)
    }

    /// ∫_{A(w)} g(x_i) dμ, exact for every shipped law.
    pub fn coordinate_integral(&self, w: &WindowSpec, g: Integrand) -> f64 {
        match &self.law {
            StationaryLaw::Iid { marginal } => {
                let q = marginal.small_probability(w.threshold);
                let full = marginal.expectation(g, None);
                let small = marginal.expectation(g, Some(w.threshold));
                self.intensity * (full - small * q.powi(w.length as i32 - 1))
            }
            _ => self
                .constant_atoms(w)
                .unwrap()
                .iter()
                .map(|a| a.weight * g.apply(a.value))
                .sum(),
        }
    }

    /// ∫ over the whole (unrestricted) measure of g(x_0).
    pub fn full_integral(&self, g: Integrand) -> f64 {
        let e = match &self.law {
            StationaryLaw::Constant { value } => g.apply(*value),
            StationaryLaw::RandomConstant { atoms } => StationaryLaw::normalized_atoms(atoms)
                .iter()
                .map(|a| a.weight * g.apply(a.value))
                .sum(),
            StationaryLaw::Iid { marginal } => marginal.expectation(g, None),
        };
        self.intensity * e
    }

    pub fn small_jump_variance(&self, w: &WindowSpec) -> f64 {
        match &self.law {
            StationaryLaw::Iid { marginal } => {
                let q = marginal.small_probability(w.threshold);
                self.intensity
                    * marginal.expectation(Integrand::Square, Some(w.threshold))
                    * q.powi(w.length as i32 - 1)
            }
            StationaryLaw::Constant { value } => {
                if value.abs() <= w.threshold {
                    self.intensity * value * value
                } else {
                    0.0
                }
            }
            StationaryLaw::RandomConstant { atoms } => {
                self.intensity
                    * StationaryLaw::normalized_atoms(atoms)
                        .iter()
                        .filter(|a| a.value.abs() <= w.threshold)
                        .map(|a| a.weight * a.value * a.value)
                        .sum::<f64>()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform01() -> StationaryLaw {
        StationaryLaw::Iid {
            marginal: Marginal::Uniform {
                low: 0.0,
                high: 1.0,
            },
        }
    }

    #[test]
    fn nonpositive_intensity_rejected() {
        assert!(FiniteInvariant::new(0.0, StationaryLaw::Constant { value: 1.0 }).is_err());
    }

    #[test]
    fn zero_law_rejected() {
        assert!(FiniteInvariant::new(1.0, StationaryLaw::Constant { value: 0.0 }).is_err());
    }

    #[test]
    fn uniform_hit_masses() {
        let f = FiniteInvariant::new(2.0, uniform01()).unwrap();
        assert!((f.hit_mass(&WindowSpec::new(1, 0.5).unwrap()) - 1.0).abs() < 1e-15);
        assert!((f.hit_mass(&WindowSpec::new(2, 0.5).unwrap()) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_truncation_integral() {
        // ∫_{-2}^{2} c(x) dx = 0 and ∫_0^3 c(x) dx = 0.5 + 2
        assert!(uniform_integral(-2.0, 2.0, Integrand::Truncation).abs() < 1e-15);
        assert!((uniform_integral(0.0, 3.0, Integrand::Truncation) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn values_are_seed_addressed() {
        let law = uniform01();
        assert_eq!(law.value(42, 17), law.value(42, 17));
        assert_ne!(law.value(42, 17), law.value(42, 18));
    }
}
