//! Small statistical helpers: sample means with standard errors, two-sample
//! tests and chi-square goodness of fit.

use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
        }
    }

    /// True when `|mean - target| <= z * se`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.se
    }
}

pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    assert!(n >= 1, "mean_se on empty sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Estimate { mean, se: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Complex sample mean with separate standard errors on the real and
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl ComplexEstimate {
    pub fn exact(value: Complex64) -> Self {
        Self {
            mean: value,
            se_re: 0.0,
            se_im: 0.0,
        }
    }

    /// Combined standard error `hypot(se_re, se_im)`.
    pub fn se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }

    /// Componentwise agreement within `z` standard errors.
    pub fn within(&self, target: Complex64, z: f64) -> bool {
        (self.mean.re - target.re).abs() <= z * self.se_re
            && (self.mean.im - target.im).abs() <= z * self.se_im
    }
}

pub fn complex_mean_se(zs: &[Complex64]) -> ComplexEstimate {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    let r = mean_se(&re);
    let i = mean_se(&im);
    ComplexEstimate {
        mean: Complex64::new(r.mean, i.mean),
        se_re: r.se,
        se_im: i.se,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
///
/// With ties (discrete data) the asymptotic p-value is conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square goodness of fit of observed counts against expected
/// counts. Cells with expected count below 5 are pooled into one tail cell.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> TestOutcome {
    assert_eq!(observed.len(), expected.len());
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= 5.0 {
            obs.push(o as f64);
            exp.push(e);
        } else {
            pool_o += o as f64;
            pool_e += e;
        }
    }
    if pool_e > 0.0 {
        obs.push(pool_o);
        exp.push(pool_e);
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = obs.len().saturating_sub(1).max(1) as f64;
    TestOutcome {
        statistic: stat,
        p_value: chi2_sf(stat, dof),
    }
}

/// Two-sample chi-square homogeneity test over integer-keyed categories.
pub fn chi_square_homogeneity(a: &[i64], b: &[i64]) -> TestOutcome {
    use std::collections::BTreeMap;
    let mut table: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for &x in a {
        table.entry(x).or_default().0 += 1.0;
    }
    for &x in b {
        table.entry(x).or_default().1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    // pool sparse cells so every expected count is at least 5
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (_, (ca, cb)) in table {
        acc.0 += ca;
        acc.1 += cb;
        let tot = acc.0 + acc.1;
        if tot * na.min(nb) / n >= 5.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let tot = ca + cb;
        let ea = tot * na / n;
        let eb = tot * nb / n;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    let dof = (cells.len().saturating_sub(1)).max(1) as f64;
    TestOutcome {
        statistic: stat,
        p_value: if cells.len() < 2 {
            1.0
        } else {
            chi2_sf(stat, dof)
        },
    }
}

pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    let dist = ChiSquared::new(dof).expect("positive dof");
    1.0 - dist.cdf(stat)
}

/// Pearson correlation between two equally long samples, with the standard
/// error `1/sqrt(n)` valid under independence.
pub fn correlation(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    let r = if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    };
    Estimate {
        mean: r,
        se: 1.0 / n.sqrt(),
    }
}
