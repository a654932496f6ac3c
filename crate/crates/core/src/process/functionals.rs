//! Characteristic and Laplace functionals and means, evaluated over the
//! window-restricted Lévy measure Q|A(w), which is the exact Lévy measure of
//! the sampled process.

use num_complex::Complex64;

use super::{LevySpec, Representation, SingleSpec};
use crate::base_systems::{Integrand, WindowSpec};
use crate::error::{invalid, IdpError, Result};
use crate::rng::derive_seed;
use crate::stats::{ComplexEstimate, Estimate};

fn check_support(w: &WindowSpec, a: &[f64]) -> Result<()> {
    if a.len() > w.length {
        return Err(IdpError::SupportViolation {
            coords: vec![a.len() as i64 - 1],
            start: 0,
            end: w.length as i64,
        });
    }
    Ok(())
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

/// Log characteristic functional of one component.
fn log_char(
    s: &SingleSpec,
    w: &WindowSpec,
    a: &[f64],
    draws: usize,
    seed: u64,
) -> Result<ComplexEstimate> {
    let total_a: f64 = a.iter().sum();
    let drift = Complex64::new(0.0, total_a * s.drift);
    let Some(base) = &s.base else {
        return Ok(ComplexEstimate::exact(drift));
    };
    let prepared = base.prepare(w)?;
    let jump = base.window_integral(&prepared, draws, seed, |x| {
        Complex64::new(0.0, dot(a, x)).exp() - 1.0
    })?;
    let integrand = match s.representation {
        Representation::Nonnegative => None,
        Representation::Centered => Some(Integrand::Identity),
        Representation::Truncated => Some(Integrand::Truncation),
    };
    let mut comp = 0.0;
    if let Some(g) = integrand {
        for (i, &ai) in a.iter().enumerate() {
            if ai != 0.0 {
                comp += ai * base.coordinate_integral(w, i as i64, g)?;
            }
        }
    }
    Ok(ComplexEstimate {
        mean: jump.mean + drift - Complex64::new(0.0, comp),
        ..jump
    })
}

/// E[exp i⟨a, X⟩] for the process sampled on window `w`.
///
/// Exact when Q|A(w) is atomic; otherwise the jump integral is importance
/// sampled with `draws` points and the error is propagated through exp.
pub fn char_functional(
    spec: &LevySpec,
    w: &WindowSpec,
    a: &[f64],
    draws: usize,
    seed: u64,
) -> Result<ComplexEstimate> {
    check_support(w, a)?;
    let mut log = ComplexEstimate::exact(Complex64::new(0.0, 0.0));
    for (j, s) in spec.singles().iter().enumerate() {
        let l = log_char(s, w, a, draws, derive_seed(seed, j as u64))?;
        log.mean += l.mean;
        log.se_re = log.se_re.hypot(l.se_re);
        log.se_im = log.se_im.hypot(l.se_im);
    }
    let phi = log.mean.exp();
    let se = phi.norm() * log.se();
    Ok(ComplexEstimate {
        mean: phi,
        se_re: se,
        se_im: se,
    })
}

/// E[exp -⟨a, X⟩] for a nonnegative process sampled on window `w`.
pub fn laplace_functional(
    spec: &LevySpec,
    w: &WindowSpec,
    a: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    check_support(w, a)?;
    if a.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("Laplace functional needs a nonnegative sequence"));
    }
    let mut log = 0.0;
    let mut var = 0.0;
    for (j, s) in spec.singles().iter().enumerate() {
        if s.representation != Representation::Nonnegative {
            return Err(IdpError::Representation(
                "Laplace functional needs the nonnegative representation".into(),
            ));
        }
        log -= a.iter().sum::<f64>() * s.drift;
        if let Some(base) = &s.base {
            let prepared = base.prepare(w)?;
            let est = base.window_integral(&prepared, draws, derive_seed(seed, j as u64), |x| {
                Complex64::new(1.0 - (-dot(a, x)).exp(), 0.0)
            })?;
            log -= est.mean.re;
            var += est.se_re * est.se_re;
        }
    }
    let value = log.exp();
    Ok(Estimate {
        mean: value,
        se: value * var.sqrt(),
    })
}

/// E[X_0] = b + ∫ x_0 dQ over the whole Lévy measure.
pub fn mean_value(spec: &LevySpec) -> Result<f64> {
    let mut total = 0.0;
    for s in spec.singles() {
        if s.representation != Representation::Nonnegative {
            return Err(IdpError::Representation(
                "mean value is defined for the nonnegative representation".into(),
            ));
        }
        total += s.drift;
        if let Some(base) = &s.base {
            total += base.full_mean()?;
        }
    }
    Ok(total)
}

/// E[X_0] of the process sampled on window `w` (Q replaced by Q|A(w)).
pub fn window_mean(spec: &LevySpec, w: &WindowSpec) -> Result<f64> {
    let mut total = 0.0;
    for s in spec.singles() {
        let Some(base) = &s.base else {
            total += s.drift;
            continue;
        };
        total += match s.representation {
            Representation::Nonnegative => {
                s.drift + base.coordinate_integral(w, 0, Integrand::Identity)?
            }
            Representation::Centered => 0.0,
            Representation::Truncated => {
                s.drift + base.coordinate_integral(w, 0, Integrand::Identity)?
                    - base.coordinate_integral(w, 0, Integrand::Truncation)?
            }
        };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_systems::{finite_invariant_base, StationaryLaw};
    use crate::process::convolve;

    fn constant(c: f64, v: f64, repr: Representation) -> LevySpec {
        LevySpec::single(
            finite_invariant_base(c, StationaryLaw::Constant { value: v }).unwrap(),
            0.0,
            repr,
        )
        .unwrap()
    }

    #[test]
    fn zero_vector_gives_one() {
        let s = constant(1.5, 2.0, Representation::Nonnegative);
        let w = WindowSpec::new(4, 1.0).unwrap();
        let phi = char_functional(&s, &w, &[0.0, 0.0], 10, 0).unwrap();
        assert_eq!(phi.mean, Complex64::new(1.0, 0.0));
        assert_eq!(laplace_functional(&s, &w, &[0.0], 10, 0).unwrap().mean, 1.0);
    }

    #[test]
    fn point_mass_closed_forms() {
        let (c, v, s) = (1.3, 0.7, 0.9);
        let spec = constant(c, v, Representation::Truncated);
        let w = WindowSpec::new(3, 0.5).unwrap();
        let phi = char_functional(&spec, &w, &[s], 0, 0).unwrap();
        let expect = (Complex64::new(0.0, s * v).exp() - 1.0 - Complex64::new(0.0, s * v)) * c;
        assert!((phi.mean - expect.exp()).norm() < 1e-14);

        let nn = constant(1.5, 2.0, Representation::Nonnegative);
        let w = WindowSpec::new(1, 1.0).unwrap();
        let lap = laplace_functional(&nn, &w, &[1.0], 0, 0).unwrap();
        assert!((lap.mean - (-1.5 * (1.0 - (-2.0f64).exp())).exp()).abs() < 1e-14);
        assert!((mean_value(&nn).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn drift_only_mean() {
        let s = LevySpec::drift_only(0.7, Representation::Nonnegative).unwrap();
        assert_eq!(mean_value(&s).unwrap(), 0.7);
    }

    #[test]
    fn convolution_multiplies() {
        let a = constant(1.3, 0.7, Representation::Truncated);
        let b = constant(0.4, -2.0, Representation::Truncated);
        let w = WindowSpec::new(2, 0.5).unwrap();
        let conv = convolve(vec![a.clone(), b.clone()]).unwrap();
        let x = [0.3, -1.1];
        let pa = char_functional(&a, &w, &x, 0, 0).unwrap().mean;
        let pb = char_functional(&b, &w, &x, 0, 0).unwrap().mean;
        let pc = char_functional(&conv, &w, &x, 0, 0).unwrap().mean;
        assert!((pc - pa * pb).norm() <= 1e-12 * pc.norm());
    }

    #[test]
    fn support_checked() {
        let s = constant(1.0, 2.0, Representation::Truncated);
        let w = WindowSpec::new(2, 0.5).unwrap();
        assert!(matches!(
            char_functional(&s, &w, &[1.0, 1.0, 1.0], 0, 0),
            Err(IdpError::SupportViolation { .. })
        ));
    }
}
