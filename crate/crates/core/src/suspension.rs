//! Window-truncated Poisson configurations over a base system and the
//! Fock-space toolkit: counts, the shift, exponential vectors, multiple
//! integrals and the exact joint-moment formula.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base_systems::{BasePoint, BaseSystem, PointState, PreparedSampler, WindowSpec};
use crate::error::{IdpError, Result};
use crate::rng::{rng_from_seed, sample_poisson};

pub const MAX_CHAOS_ORDER: usize = 4;

/// A finite realization of the Poisson measure restricted to A(window).
///
/// After `shift(k)` the points hit the window `[window_start, window_start + n)`
/// of the new time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub points: Vec<BasePoint>,
    pub window: WindowSpec,
    pub window_start: i64,
    pub seed: u64,
}

/// `{ω : |f(T^c ω)| > ε for every c in coords}`, optionally restricted to
/// one component of a disjoint union. Empty `coords` means A(window) itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventSet {
    pub coords: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

impl EventSet {
    pub fn exceed(coords: &[i64]) -> Self {
        let mut coords = coords.to_vec();
        coords.sort_unstable();
        coords.dedup();
        Self {
            coords,
            component: None,
        }
    }

    pub fn whole_window() -> Self {
        Self {
            coords: Vec::new(),
            component: None,
        }
    }

    pub fn in_component(mut self, index: usize) -> Self {
        self.component = Some(index);
        self
    }

    /// Intersection of two event sets; `None` when they live in different
    /// components (the intersection is empty).
    pub fn intersect(&self, other: &EventSet) -> Option<EventSet> {
        let component = match (self.component, other.component) {
            (Some(a), Some(b)) if a != b => return None,
            (a, b) => a.or(b),
        };
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        coords.sort_unstable();
        coords.dedup();
        Some(EventSet { coords, component })
    }
}

/// A simple function Σ_j c_j 1_{E_j} with finite-mass event sets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunction {
    pub terms: Vec<(Complex64, EventSet)>,
}

impl TestFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn indicator(set: EventSet) -> Self {
        Self::real(1.0, set)
    }

    pub fn real(coef: f64, set: EventSet) -> Self {
        Self {
            terms: vec![(Complex64::new(coef, 0.0), set)],
        }
    }

    pub fn plus(mut self, coef: Complex64, set: EventSet) -> Self {
        self.terms.push((coef, set));
        self
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            terms: self.terms.iter().map(|(c, e)| (c * s, e.clone())).collect(),
        }
    }
}

/// Draws N ~ Poisson(μ(A(w))) and N independent points of μ|A(w).
pub fn sample_configuration(
    base: &BaseSystem,
    w: &WindowSpec,
    seed: u64,
) -> Result<PointConfiguration> {
    let prepared = base.prepare(w)?;
    sample_with(base, &prepared, seed)
}

/// As [`sample_configuration`] with precomputed sampling tables.
pub fn sample_with(
    base: &BaseSystem,
    prepared: &PreparedSampler,
    seed: u64,
) -> Result<PointConfiguration> {
    let mut rng = rng_from_seed(seed);
    let n = sample_poisson(prepared.hit_mass(), &mut rng);
    let mut points = Vec::with_capacity(n as usize);
    for _ in 0..n {
        points.push(prepared.sample(base, &mut rng)?);
    }
    Ok(PointConfiguration {
        points,
        window: *prepared.window(),
        window_start: 0,
        seed,
    })
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// T* applied k times: every point is re-anchored by k.
    pub fn shift(&self, k: i64) -> PointConfiguration {
        PointConfiguration {
            points: self.points.iter().map(|p| p.shifted(k)).collect(),
            window: self.window,
            window_start: self.window_start - k,
            seed: self.seed,
        }
    }

    fn check_support(&self, set: &EventSet) -> Result<()> {
        let end = self.window_start + self.window.length as i64;
        if set
            .coords
            .iter()
            .any(|&c| c < self.window_start || c >= end)
        {
            return Err(IdpError::SupportViolation {
                coords: set.coords.clone(),
                start: self.window_start,
                end,
            });
        }
        Ok(())
    }

    fn contains(&self, base: &BaseSystem, p: &BasePoint, set: &EventSet) -> Result<bool> {
        if let Some(idx) = set.component {
            match &p.state {
                PointState::Component { index, .. } if *index == idx => {}
                _ => return Ok(false),
            }
        }
        for &c in &set.coords {
            if base.orbit_eval(p, c)?.abs() <= self.window.threshold {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// N(set).
    pub fn count(&self, base: &BaseSystem, set: &EventSet) -> Result<u64> {
        self.check_support(set)?;
        let mut n = 0;
        for p in &self.points {
            if self.contains(base, p, set)? {
                n += 1;
            }
        }
        Ok(n)
    }

    /// μ(set), exact.
    pub fn event_mass(&self, base: &BaseSystem, set: &EventSet) -> Result<f64> {
        self.check_support(set)?;
        let coords: Vec<i64> = set.coords.iter().map(|c| c - self.window_start).collect();
        match set.component {
            None => base.joint_exceed_mass(&self.window, &coords),
            Some(idx) => match base {
                BaseSystem::DisjointUnion { components } => {
                    let c = components
                        .get(idx)
                        .ok_or_else(|| IdpError::InvalidParameter(format!("no component {idx}")))?;
                    Ok(c.weight * c.system.joint_exceed_mass(&self.window, &coords)?)
                }
                _ => Err(IdpError::InvalidParameter(
                    "component events need a disjoint-union base".into(),
                )),
            },
        }
    }

    /// h(x) for one point.
    pub fn evaluate(
        &self,
        base: &BaseSystem,
        h: &TestFunction,
        p: &BasePoint,
    ) -> Result<Complex64> {
        let mut v = Complex64::new(0.0, 0.0);
        for (c, set) in &h.terms {
            if self.contains(base, p, set)? {
                v += c;
            }
        }
        Ok(v)
    }

    /// ∫ h dμ.
    pub fn integral(&self, base: &BaseSystem, h: &TestFunction) -> Result<Complex64> {
        let mut v = Complex64::new(0.0, 0.0);
        for (c, set) in &h.terms {
            v += c * self.event_mass(base, set)?;
        }
        Ok(v)
    }

    fn values(&self, base: &BaseSystem, h: &TestFunction) -> Result<Vec<Complex64>> {
        for (_, set) in &h.terms {
            self.check_support(set)?;
        }
        self.points
            .iter()
            .map(|p| self.evaluate(base, h, p))
            .collect()
    }

    /// ε_h(ν) = exp(-∫h dμ) ∏_{x in ν} (1 + h(x)).
    pub fn exponential_vector(&self, base: &BaseSystem, h: &TestFunction) -> Result<Complex64> {
        let m = self.integral(base, h)?;
        let prod: Complex64 = self
            .values(base, h)?
            .into_iter()
            .map(|v| Complex64::new(1.0, 0.0) + v)
            .product();
        Ok((-m).exp() * prod)
    }

    /// J^(n)(f) from the generating identity
    /// `Σ_n s^n/n! J^(n)(f) = exp(-s ∫f dμ) ∏_x (1 + s f(x))`.
    pub fn multiple_integral(
        &self,
        base: &BaseSystem,
        f: &TestFunction,
        n: usize,
    ) -> Result<Complex64> {
        self.multiple_integral_offset(base, f, n, Complex64::new(0.0, 0.0))
    }

    /// J^(n)(f) with the compensator ∫f dμ shifted by `offset`; a nonzero
    /// offset is a deliberate fault used to exercise the identity checks.
    pub fn multiple_integral_offset(
        &self,
        base: &BaseSystem,
        f: &TestFunction,
        n: usize,
        offset: Complex64,
    ) -> Result<Complex64> {
        if n == 0 || n > MAX_CHAOS_ORDER {
            return Err(IdpError::UnsupportedOrder(n));
        }
        let m = self.integral(base, f)? + offset;
        let vals = self.values(base, f)?;
        Ok(chaos_from_values(&vals, m, n))
    }

    /// Reference evaluation of J^(n)(f) by enumerating ordered tuples of
    /// distinct points:
    /// `J^(n) = Σ_k C(n,k) (-m)^(n-k) Σ_{distinct x_1..x_k} f(x_1)…f(x_k)`.
    pub fn multiple_integral_brute(
        &self,
        base: &BaseSystem,
        f: &TestFunction,
        n: usize,
    ) -> Result<Complex64> {
        if n == 0 || n > MAX_CHAOS_ORDER {
            return Err(IdpError::UnsupportedOrder(n));
        }
        let m = self.integral(base, f)?;
        let vals = self.values(base, f)?;
        Ok(chaos_brute(&vals, m, n))
    }
}

/// n! [s^n] exp(-s m) ∏ (1 + s v).
pub fn chaos_from_values(vals: &[Complex64], m: Complex64, n: usize) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    // coefficients of ∏ (1 + s v) up to degree n (elementary symmetric sums)
    let mut e = vec![zero; n + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for &v in vals {
        for k in (1..=n).rev() {
            e[k] = e[k] + e[k - 1] * v;
        }
    }
    // coefficients of exp(-s m)
    let mut g = vec![zero; n + 1];
    g[0] = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        g[k] = g[k - 1] * (-m) / k as f64;
    }
    let coef: Complex64 = (0..=n).map(|k| e[k] * g[n - k]).sum();
    coef * factorial(n)
}

fn chaos_brute(vals: &[Complex64], m: Complex64, n: usize) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..=n {
        let mut used = vec![false; vals.len()];
        let s = ordered_tuples(vals, &mut used, k);
        total += s * binomial(n, k) * (-m).powu((n - k) as u32);
    }
    total
}

fn ordered_tuples(vals: &[Complex64], used: &mut [bool], k: usize) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..vals.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        s += vals[i] * ordered_tuples(vals, used, k - 1);
        used[i] = false;
    }
    s
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// E[ε_{h_1} ⋯ ε_{h_n}] = exp(Σ_{|S| >= 2} ∫ ∏_{i in S} h_i dμ).
///
/// `cross` returns ∫ ∏_{i in S} h_i dμ for an index subset S (sorted), or
/// `None` when it is not available.
pub fn moment_oracle<F>(n: usize, cross: F) -> Result<Complex64>
where
    F: Fn(&[usize]) -> Option<Complex64>,
{
    if n > MAX_CHAOS_ORDER {
        return Err(IdpError::UnsupportedOrder(n));
    }
    let mut exponent = Complex64::new(0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        exponent += cross(&subset).ok_or(IdpError::MissingCrossIntegral(subset.clone()))?;
    }
    Ok(exponent.exp())
}

/// Exact ∫ ∏_{i in S} h_i dμ by expanding each simple function and using
/// exact masses of intersections of event sets.
pub fn cross_integral(
    base: &BaseSystem,
    config: &PointConfiguration,
    hs: &[&TestFunction],
) -> Result<Complex64> {
    fn go(
        base: &BaseSystem,
        config: &PointConfiguration,
        hs: &[&TestFunction],
        acc: Complex64,
        set: Option<EventSet>,
    ) -> Result<Complex64> {
        let Some((first, rest)) = hs.split_first() else {
            return match set {
                Some(s) => Ok(acc * config.event_mass(base, &s)?),
                None => Ok(Complex64::new(0.0, 0.0)),
            };
        };
        let mut total = Complex64::new(0.0, 0.0);
        for (c, e) in &first.terms {
            let next = match &set {
                None => Some(e.clone()),
                Some(s) => s.intersect(e),
            };
            if next.is_none() {
                continue;
            }
            total += go(base, config, rest, acc * c, next)?;
        }
        Ok(total)
    }
    go(base, config, hs, Complex64::new(1.0, 0.0), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_systems::{moving_average_base, AmplitudeLaw, Atom};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn first_two_chaoses_for_indicator() {
        let vals = vec![c(1.0); 3];
        assert!((chaos_from_values(&vals, c(2.0), 1) - c(1.0)).norm() < 1e-12);
        assert!((chaos_from_values(&vals, c(2.0), 2) - c(-2.0)).norm() < 1e-12);
        assert!((chaos_brute(&vals, c(2.0), 2) - c(-2.0)).norm() < 1e-12);
    }

    #[test]
    fn generating_function_matches_brute_force() {
        let vals = vec![c(0.5), c(-1.25), Complex64::new(0.3, 0.7), c(2.0), c(1.0)];
        let m = Complex64::new(0.8, -0.1);
        for n in 1..=4 {
            let a = chaos_from_values(&vals, m, n);
            let b = chaos_brute(&vals, m, n);
            assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0), "n={n}");
        }
    }

    #[test]
    fn oracle_small_cases() {
        assert_eq!(moment_oracle(1, |_| None).unwrap(), c(1.0));
        let two = moment_oracle(2, |_| Some(c(0.4))).unwrap();
        assert!((two - c(0.4f64.exp())).norm() < 1e-15);
        assert_eq!(moment_oracle(3, |_| Some(c(0.0))).unwrap(), c(1.0));
        assert!(matches!(
            moment_oracle(2, |_| None),
            Err(IdpError::MissingCrossIntegral(_))
        ));
    }

    #[test]
    fn empty_configuration_values() {
        let base = moving_average_base(
            vec![1.0],
            AmplitudeLaw::Atoms {
                atoms: vec![Atom::new(1.0, 0.3)],
            },
        )
        .unwrap();
        let w = WindowSpec::new(1, 0.5).unwrap();
        let config = PointConfiguration {
            points: vec![],
            window: w,
            window_start: 0,
            seed: 0,
        };
        let h = TestFunction::indicator(EventSet::exceed(&[0]));
        let ev = config.exponential_vector(&base, &h).unwrap();
        assert!((ev - c((-0.3f64).exp())).norm() < 1e-15);
        assert_eq!(
            config
                .exponential_vector(&base, &TestFunction::zero())
                .unwrap(),
            c(1.0)
        );
        assert_eq!(config.count(&base, &EventSet::whole_window()).unwrap(), 0);
    }

    #[test]
    fn shift_round_trip_and_support() {
        let base = moving_average_base(
            vec![1.0, 1.0],
            AmplitudeLaw::Atoms {
                atoms: vec![Atom::new(1.0, 1.0)],
            },
        )
        .unwrap();
        let w = WindowSpec::new(3, 0.5).unwrap();
        let config = sample_configuration(&base, &w, 4).unwrap();
        assert_eq!(config.shift(0), config);
        assert_eq!(config.shift(2).shift(-2), config);
        assert!(matches!(
            config.count(&base, &EventSet::exceed(&[3])),
            Err(IdpError::SupportViolation { .. })
        ));
        assert!(config
            .shift(1)
            .count(&base, &EventSet::exceed(&[-1]))
            .is_ok());
    }

    #[test]
    fn chaos_order_bounds() {
        let vals = vec![c(1.0)];
        let _ = chaos_from_values(&vals, c(0.0), 4);
        let base = moving_average_base(
            vec![1.0],
            AmplitudeLaw::Atoms {
                atoms: vec![Atom::new(1.0, 1.0)],
            },
        )
        .unwrap();
        let config = sample_configuration(&base, &WindowSpec::new(1, 0.5).unwrap(), 1).unwrap();
        let f = TestFunction::indicator(EventSet::whole_window());
        assert!(matches!(
            config.multiple_integral(&base, &f, 5),
            Err(IdpError::UnsupportedOrder(5))
        ));
    }
}
