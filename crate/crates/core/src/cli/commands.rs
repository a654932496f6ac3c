//! The four pipelines behind the subcommands.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{PlotSpec, Provenance, Written};
use super::CliError;
use crate::base_systems::{BaseSystem, WindowSpec};
use crate::ergodic::classify;
use crate::process::{sample_trajectory, LevySpec};
use crate::rng::derive_seed;
use crate::spectral::{
    atom_at_zero, autocov_empirical, char_autocov_predict, compare, covariance_isometry_check,
    fmt12, levy_sigma, rajchman_diagnostic, AtomReport, ComparisonReport, RajchmanReport,
    Transform,
};
use crate::stats::complex_mean_se;
use crate::suspension::{
    chaos_from_values, cross_integral, factorial, moment_oracle, sample_with, EventSet,
    PointConfiguration, TestFunction,
};

/// What a command produced and which checks failed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Written,
    pub failures: Vec<String>,
}

fn specs(cfg: &ExperimentConfig) -> Result<Vec<(String, LevySpec)>, CliError> {
    cfg.specs
        .iter()
        .map(|e| {
            Ok((
                e.name.clone(),
                e.resolve()
                    .map_err(|err| CliError::from_idp(&e.name, err))?,
            ))
        })
        .collect()
}

#[derive(Serialize)]
struct TrajectoryMetadata<'a> {
    #[serde(flatten)]
    provenance: Provenance,
    name: &'a str,
    spec: &'a LevySpec,
    entry_seed: u64,
    length: usize,
    threshold: f64,
    margin: usize,
    replicates: usize,
    small_jump_bound: f64,
    tolerance: f64,
    data: String,
}

pub fn simulate(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    for (idx, (name, spec)) in specs(cfg)?.into_iter().enumerate() {
        let entry_seed = derive_seed(seed, idx as u64);
        let opts = cfg.sample_options(entry_seed);
        let batch = sample_trajectory(&spec, &opts).map_err(|e| CliError::from_idp(&name, e))?;
        let mut csv = (0..opts.length)
            .map(|i| format!("X_{i}"))
            .collect::<Vec<_>>()
            .join(",");
        csv.push('\n');
        for row in &batch.windows {
            csv.push_str(&row.iter().map(|&x| fmt12(x)).collect::<Vec<_>>().join(","));
            csv.push('\n');
        }
        let data = format!("{name}.trajectories.csv");
        outcome.written.text(out.join(&data), &csv)?;
        let meta = TrajectoryMetadata {
            provenance: Provenance::new("simulate", seed, cfg.calibration),
            name: &name,
            spec: &spec,
            entry_seed,
            length: opts.length,
            threshold: opts.threshold,
            margin: opts.margin,
            replicates: opts.replicates,
            small_jump_bound: batch.small_jump_bound,
            tolerance: batch.tolerance,
            data: data.clone(),
        };
        outcome
            .written
            .json(out.join(format!("{name}.trajectories.json")), &meta)?;
        let plot = PlotSpec {
            title: format!("{name}: sample paths"),
            data,
            x: "coordinate index of X_0 .. X_{n-1}".into(),
            y: vec!["one line per row".into()],
            error: vec![],
            kind: "lines",
        };
        outcome.written.text(
            out.join(format!("{name}.trajectories.plot.txt")),
            &plot.render(),
        )?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub spec: String,
    pub component: usize,
    pub identity: String,
    pub estimate: [f64; 2],
    pub expected: [f64; 2],
    pub standard_error: [f64; 2],
    pub pass: bool,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    #[serde(flatten)]
    provenance: Provenance,
    window: WindowSpec,
    draws: usize,
    compensator_offset: f64,
    checks: &'a [IdentityCheck],
    all_pass: bool,
}

/// Test functions on coordinates 0, 1, 2 of the window (clamped to its length).
fn test_functions(n: usize) -> [TestFunction; 5] {
    let c = |i: i64| i.min(n as i64 - 1);
    let (c0, c1, c2) = (c(0), c(1), c(2));
    let h = TestFunction::real(0.5, EventSet::exceed(&[c0]))
        .plus(Complex64::new(-0.3, 0.2), EventSet::exceed(&[c1]));
    let g = TestFunction::real(0.4, EventSet::exceed(&[c1]))
        .plus(Complex64::new(0.0, 0.25), EventSet::exceed(&[c0, c2]));
    let k = TestFunction::real(-0.2, EventSet::whole_window())
        .plus(Complex64::new(0.3, 0.0), EventSet::exceed(&[c2]));
    let f1 = TestFunction::real(0.5, EventSet::exceed(&[c0]))
        .plus(Complex64::new(-0.3, 0.0), EventSet::exceed(&[c1]));
    let f2 = TestFunction::real(0.4, EventSet::exceed(&[c1]))
        .plus(Complex64::new(0.25, 0.0), EventSet::exceed(&[c0, c2]));
    [h, g, k, f1, f2]
}

/// Monte Carlo checks per base system in [`identity_suite`].
const STATISTICAL_CHECKS: usize = 8;

/// Checks of the Fock-space identities on one base system.
pub fn identity_suite(
    name: &str,
    component: usize,
    base: &BaseSystem,
    w: &WindowSpec,
    draws: usize,
    seed: u64,
    offset: f64,
    z: f64,
) -> crate::Result<Vec<IdentityCheck>> {
    let prepared = base.prepare(w)?;
    let configs: Vec<PointConfiguration> = (0..draws as u64)
        .into_par_iter()
        .map(|r| sample_with(base, &prepared, derive_seed(seed, r)))
        .collect::<crate::Result<_>>()?;
    let probe = &configs[0];
    let [h, g, k, f1, f2] = test_functions(w.length);
    let masses: Vec<Complex64> = [&h, &g, &k, &f1, &f2]
        .iter()
        .map(|t| probe.integral(base, t))
        .collect::<crate::Result<_>>()?;
    let values = |t: &TestFunction| -> crate::Result<Vec<Vec<Complex64>>> {
        configs
            .par_iter()
            .map(|c| c.points.iter().map(|p| c.evaluate(base, t, p)).collect())
            .collect()
    };
    let (vh, vg, vk, v1, v2) = (
        values(&h)?,
        values(&g)?,
        values(&k)?,
        values(&f1)?,
        values(&f2)?,
    );
    let one = Complex64::new(1.0, 0.0);
    let eps = |vals: &[Complex64], m: Complex64| {
        (-m).exp() * vals.iter().map(|v| one + v).product::<Complex64>()
    };

    let mut checks = Vec::new();
    let mut push = |identity: String, samples: Vec<Complex64>, expected: Complex64| {
        let est = complex_mean_se(&samples);
        let tol = 1e-12 * expected.norm().max(1.0);
        let pass = (est.mean - expected).norm() <= z * est.se() + tol;
        checks.push(IdentityCheck {
            spec: name.to_string(),
            component,
            identity,
            estimate: [est.mean.re, est.mean.im],
            expected: [expected.re, expected.im],
            standard_error: [est.se_re, est.se_im],
            pass,
        });
    };

    let eh: Vec<Complex64> = vh.iter().map(|v| eps(v, masses[0])).collect();
    let eg: Vec<Complex64> = vg.iter().map(|v| eps(v, masses[1])).collect();
    let ek: Vec<Complex64> = vk.iter().map(|v| eps(v, masses[2])).collect();
    push("exponential_vector_mean".into(), eh.clone(), one);
    let hg = cross_integral(base, probe, &[&h, &g])?;
    push(
        "exponential_vector_gram".into(),
        eh.iter().zip(&eg).map(|(a, b)| a * b).collect(),
        hg.exp(),
    );
    let fns = [&h, &g, &k];
    let oracle = moment_oracle(3, |s| {
        let hs: Vec<&TestFunction> = s.iter().map(|&i| fns[i]).collect();
        cross_integral(base, probe, &hs).ok()
    })?;
    push(
        "joint_moment_oracle".into(),
        eh.iter()
            .zip(&eg)
            .zip(&ek)
            .map(|((a, b), c)| a * b * c)
            .collect(),
        oracle,
    );

    let shift = Complex64::new(offset, 0.0);
    let f12 = cross_integral(base, probe, &[&f1, &f2])?;
    for n in 1..=2usize {
        for p in 1..=2usize {
            let samples = v1
                .iter()
                .zip(&v2)
                .map(|(a, b)| {
                    chaos_from_values(a, masses[3] + shift, n)
                        * chaos_from_values(b, masses[4] + shift, p)
                })
                .collect();
            let expected = if n == p {
                f12.powu(n as u32) * factorial(n)
            } else {
                Complex64::new(0.0, 0.0)
            };
            push(format!("chaos_isometry_{n}_{p}"), samples, expected);
        }
    }

    let a = EventSet::exceed(&[0]);
    let b = EventSet::exceed(&[(w.length as i64 - 1).min(1)]);
    let ab = a.intersect(&b).expect("same component");
    let counts: Vec<(f64, f64)> = configs
        .iter()
        .map(|c| Ok((c.count(base, &a)? as f64, c.count(base, &b)? as f64)))
        .collect::<crate::Result<_>>()?;
    let ma = probe.event_mass(base, &a)?;
    let mb = probe.event_mass(base, &b)?;
    push(
        "count_covariance".into(),
        counts
            .iter()
            .map(|(x, y)| Complex64::new((x - ma) * (y - mb), 0.0))
            .collect(),
        Complex64::new(probe.event_mass(base, &ab)?, 0.0),
    );

    let mut worst: f64 = 0.0;
    for c in configs.iter().filter(|c| c.len() <= 12).take(500) {
        for n in 1..=3 {
            let fast = c.multiple_integral(base, &f1, n)?;
            let brute = c.multiple_integral_brute(base, &f1, n)?;
            worst = worst.max((fast - brute).norm() / brute.norm().max(1.0));
        }
    }
    checks.push(IdentityCheck {
        spec: name.to_string(),
        component,
        identity: "charlier_matches_enumeration".into(),
        estimate: [worst, 0.0],
        expected: [0.0, 0.0],
        standard_error: [1e-10, 0.0],
        pass: worst <= 1e-10,
    });
    Ok(checks)
}

pub fn verify(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let w = WindowSpec::new(cfg.window.length + cfg.window.margin, cfg.window.threshold)
        .map_err(|e| CliError::from_idp("window", e))?;
    let entries = specs(cfg)?;
    let components: usize = entries
        .iter()
        .map(|(_, spec)| spec.singles().iter().filter(|s| s.base.is_some()).count())
        .sum();
    let z = cfg.calibration.family_z(STATISTICAL_CHECKS * components);
    let mut checks = Vec::new();
    for (idx, (name, spec)) in entries.into_iter().enumerate() {
        for (j, s) in spec.singles().iter().enumerate() {
            let Some(base) = &s.base else { continue };
            let entry_seed = derive_seed(derive_seed(seed, idx as u64), j as u64);
            checks.extend(
                identity_suite(
                    &name,
                    j,
                    base,
                    &w,
                    cfg.budget.draws,
                    entry_seed,
                    cfg.test_hooks.compensator_offset,
                    z,
                )
                .map_err(|e| CliError::from_idp(&name, e))?,
            );
        }
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        provenance: Provenance::new("verify", seed, cfg.calibration),
        window: w,
        draws: cfg.budget.draws,
        compensator_offset: cfg.test_hooks.compensator_offset,
        checks: &checks,
        all_pass,
    };
    let mut outcome = Outcome::default();
    outcome.written.json(out.join("verify.json"), &report)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!(
            "{} [{}] {}: {} (estimate {} {}, expected {} {}, se {} {})\n",
            c.spec,
            c.component,
            c.identity,
            if c.pass { "pass" } else { "FAIL" },
            fmt12(c.estimate[0]),
            fmt12(c.estimate[1]),
            fmt12(c.expected[0]),
            fmt12(c.expected[1]),
            fmt12(c.standard_error[0]),
            fmt12(c.standard_error[1])
        ));
        if !c.pass {
            outcome
                .failures
                .push(format!("{} [{}] {}", c.spec, c.component, c.identity));
        }
    }
    outcome.written.text(out.join("verify.txt"), &text)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct LambdaSummary {
    lambda: f64,
    files: [String; 3],
    comparison_pass: bool,
    atom: Option<AtomReport>,
    rajchman: RajchmanReport,
}

#[derive(Serialize)]
struct SpectraReport<'a> {
    #[serde(flatten)]
    provenance: Provenance,
    name: &'a str,
    spec: &'a LevySpec,
    entry_seed: u64,
    max_lag: usize,
    replicates: usize,
    draws: usize,
    lambdas: Vec<LambdaSummary>,
    comparison_table: String,
    isometry: Option<ComparisonReport>,
}

pub const COMPARISON_HEADER: &str =
    "lambda,lag,empirical_real,empirical_imag,predicted_real,predicted_imag,combined_se,pass,atom_detected";

pub fn spectra(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let k = cfg.budget.max_lag;
    let relation_z = cfg.calibration.family_z(cfg.budget.lambdas.len() * (k + 1));
    let isometry_z = cfg.calibration.family_z(k + 1);
    for (idx, (name, spec)) in specs(cfg)?.into_iter().enumerate() {
        let entry_seed = derive_seed(seed, idx as u64);
        let idp = |e| CliError::from_idp(&name, e);
        let opts = cfg.sample_options(derive_seed(entry_seed, 0));
        let batch = sample_trajectory(&spec, &opts).map_err(idp)?;
        let w = opts.sampling_window().map_err(idp)?;
        let mut table = format!("{COMPARISON_HEADER}\n");
        let mut lambdas = Vec::new();
        for (li, &lambda) in cfg.budget.lambdas.iter().enumerate() {
            let draw_seed = derive_seed(entry_seed, 1 + li as u64);
            let empirical =
                autocov_empirical(&batch, Transform::CharExp { lambda }, k).map_err(idp)?;
            let sigma =
                levy_sigma(&spec, &w, lambda, k, cfg.budget.draws, draw_seed).map_err(idp)?;
            let predicted =
                char_autocov_predict(&spec, &w, lambda, &sigma, cfg.budget.draws, draw_seed)
                    .map_err(idp)?;
            let cmp = compare(&empirical, &predicted, k, relation_z);
            let atom = atom_at_zero(&empirical, cfg.calibration.relative, cfg.calibration.z).ok();
            let detected = atom.is_some_and(|a| a.detected);
            for l in &cmp.lags {
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    fmt12(lambda),
                    l.lag,
                    fmt12(l.empirical.re),
                    fmt12(l.empirical.im),
                    fmt12(l.predicted.re),
                    fmt12(l.predicted.im),
                    fmt12(l.combined_se),
                    l.pass,
                    detected
                ));
            }
            if !cmp.all_pass {
                outcome
                    .failures
                    .push(format!("{name}: covariance relation at lambda {lambda}"));
            }
            let stem = format!("{name}.lambda{li}");
            let files = [
                format!("{stem}.empirical.csv"),
                format!("{stem}.levy.csv"),
                format!("{stem}.predicted.csv"),
            ];
            outcome
                .written
                .text(out.join(&files[0]), &empirical.to_csv())?;
            outcome.written.text(out.join(&files[1]), &sigma.to_csv())?;
            outcome
                .written
                .text(out.join(&files[2]), &predicted.to_csv())?;
            lambdas.push(LambdaSummary {
                lambda,
                files,
                comparison_pass: cmp.all_pass,
                atom,
                rajchman: rajchman_diagnostic(&sigma, cfg.calibration.relative, cfg.calibration.z),
            });
        }
        let comparison_table = format!("{name}.comparison.csv");
        outcome.written.text(out.join(&comparison_table), &table)?;
        let isometry = if spec.is_square_integrable() {
            let rep = covariance_isometry_check(
                &spec,
                &batch,
                k,
                cfg.budget.draws,
                derive_seed(entry_seed, u64::MAX),
                isometry_z,
            )
            .map_err(idp)?;
            if !rep.all_pass {
                outcome
                    .failures
                    .push(format!("{name}: covariance isometry"));
            }
            Some(rep)
        } else {
            None
        };
        let report = SpectraReport {
            provenance: Provenance::new("spectra", seed, cfg.calibration),
            name: &name,
            spec: &spec,
            entry_seed,
            max_lag: k,
            replicates: cfg.budget.replicates,
            draws: cfg.budget.draws,
            lambdas,
            comparison_table: comparison_table.clone(),
            isometry,
        };
        outcome
            .written
            .json(out.join(format!("{name}.spectra.json")), &report)?;
        for (suffix, y) in [("empirical", "real"), ("levy", "real")] {
            let plot = PlotSpec {
                title: format!("{name}: {suffix} spectral coefficients"),
                data: format!("{name}.lambda*.{suffix}.csv"),
                x: "lag".into(),
                y: vec![y.into(), "imag".into()],
                error: vec!["se_real".into(), "se_imag".into()],
                kind: "points",
            };
            outcome.written.text(
                out.join(format!("{name}.{suffix}.plot.txt")),
                &plot.render(),
            )?;
        }
        let plot = PlotSpec {
            title: format!("{name}: empirical against predicted covariance"),
            data: comparison_table,
            x: "lag".into(),
            y: vec!["empirical_real".into(), "predicted_real".into()],
            error: vec!["combined_se".into()],
            kind: "points, one panel per lambda",
        };
        outcome.written.text(
            out.join(format!("{name}.comparison.plot.txt")),
            &plot.render(),
        )?;
    }
    Ok(outcome)
}

pub fn classify_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let budget = cfg.classification_budget();
    for (idx, (name, spec)) in specs(cfg)?.into_iter().enumerate() {
        let entry_seed = derive_seed(seed, idx as u64);
        let report = classify(&spec, &budget, entry_seed, &cfg.calibration)
            .map_err(|e| CliError::from_idp(&name, e))?;
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            provenance: Provenance,
            name: &'a str,
            report: &'a crate::ergodic::ClassificationReport,
        }
        let doc = Doc {
            provenance: Provenance::new("classify", seed, cfg.calibration),
            name: &name,
            report: &report,
        };
        outcome
            .written
            .json(out.join(format!("{name}.classification.json")), &doc)?;
        let text = format!(
            "{} {} (classify)\nspec: {name}\n{}",
            super::output::TOOL,
            super::output::VERSION,
            report.summary()
        );
        outcome
            .written
            .text(out.join(format!("{name}.classification.txt")), &text)?;
        if !report.matches {
            outcome.failures.push(format!(
                "{name}: inferred {} but declared {}",
                report.inferred, report.declared
            ));
        }
        if !report.monotone_consistent {
            outcome
                .failures
                .push(format!("{name}: report violates the implication chain"));
        }
    }
    Ok(outcome)
}
