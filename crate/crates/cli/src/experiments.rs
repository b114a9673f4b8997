//! The experiments. Each one writes its CSV files into the output directory
//! and returns the list of checks; verdicts come straight from the library
//! reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ctrw_harmonic::bernstein::StableExponent;
use ctrw_harmonic::ctrw::{
    empirical_fl_symbol, fl_limit_symbol, fl_pairs, ks_distance, two_sample_critical,
    walk_endpoints, Coupling, WalkConfig,
};
use ctrw_harmonic::driver::{Constant, TestFunction};
use ctrw_harmonic::evolution::{
    laplace_q, q_monte_carlo, q_overshoot_quadrature, q_uncoupled_fourier, q_undershoot_quadrature,
    QField,
};
use ctrw_harmonic::nonlocal::{
    constant_residual, laplace_residual, pmp_probe, residual_scan, resolvent_identity_residual,
    ScanField, SeparableField, TimeProfile,
};
use ctrw_harmonic::sampling::{replicate, sample_limit_value};
use ctrw_harmonic::{Error, TimeChange};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    fn at_most(name: String, value: f64, bound: f64) -> Self {
        Self {
            name,
            pass: value <= bound,
            value,
            bound,
        }
    }

    fn above(name: String, value: f64, bound: f64) -> Self {
        Self {
            name,
            pass: value > bound,
            value,
            bound,
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn create(&mut self, dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(dir.join(name))?))
    }

    fn csv(&mut self, dir: &Path, name: &str) -> Result<csv::Writer<File>, CliError> {
        self.outputs.push(name.to_string());
        Ok(csv::Writer::from_path(dir.join(name))?)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Outcome::default();
    match cfg.experiment {
        Experiment::FlSymbol => fl_symbol(cfg, &mut out)?,
        Experiment::CtrwConverge => ctrw_converge(cfg, &mut out)?,
        Experiment::QFields => q_fields(cfg, &mut out)?,
        Experiment::ResidualScan => residual_scans(cfg, &mut out)?,
        Experiment::LaplaceChecks => laplace_checks(cfg, &mut out)?,
        Experiment::PmpProbe => pmp_probes(cfg, &mut out)?,
        Experiment::Identities => identities(cfg, &mut out)?,
    }
    Ok(out)
}

fn tag(alpha: StableExponent) -> String {
    format!("a{alpha}")
}

fn fl_symbol(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let mut w = out.csv(&cfg.output_dir, "symbol.csv")?;
    w.write_record([
        "alpha",
        "c",
        "lambda",
        "xi",
        "re",
        "im",
        "stderr",
        "target_re",
        "target_im",
    ])?;
    let last_c = cfg.scale_c.len() - 1;
    for (ai, &alpha) in cfg.alpha.iter().enumerate() {
        for (ci, &c) in cfg.scale_c.iter().enumerate() {
            let seed = cfg.seed.child((ai * 1000 + ci) as u64);
            let samples = fl_pairs(alpha, c, cfg.u_index, cfg.n_paths, seed)?;
            for &lambda in &cfg.lambda {
                for &xi in &cfg.xi {
                    let s = empirical_fl_symbol(&samples, lambda, xi)?;
                    let target = fl_limit_symbol(alpha, cfg.u_index, lambda, xi);
                    w.write_record([
                        alpha.to_string(),
                        c.to_string(),
                        lambda.to_string(),
                        xi.to_string(),
                        s.estimate.re.to_string(),
                        s.estimate.im.to_string(),
                        s.stderr.to_string(),
                        target.to_string(),
                        "0".to_string(),
                    ])?;
                    if ci == last_c {
                        let err = (s.estimate - target).norm();
                        out.checks.push(Check::at_most(
                            format!("fl_symbol alpha={alpha} c={c} lambda={lambda} xi={xi}"),
                            err,
                            cfg.tolerances.mc_sigmas * s.stderr,
                        ));
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn ctrw_converge(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let tol = &cfg.tolerances;
    let mut w = out.csv(&cfg.output_dir, "ctrw.csv")?;
    w.write_record([
        "alpha",
        "c",
        "comparison",
        "statistic",
        "critical",
        "n_a",
        "n_b",
    ])?;
    let n = cfg.n_paths as usize;
    let crit = two_sample_critical(n, n, tol.ks_level)?;
    let t = cfg.horizon_t;
    for (ai, &alpha) in cfg.alpha.iter().enumerate() {
        let limit = |kind: TimeChange, stream: u64| -> Result<Vec<f64>, Error> {
            replicate(cfg.seed.child(stream), cfg.n_paths, |rng, _| {
                sample_limit_value(alpha, t, 0.0, kind, rng)
            })
            .into_iter()
            .collect()
        };
        let base = (ai as u64) * 1000;
        let over = limit(TimeChange::Overshoot, base + 900)?;
        let under = limit(TimeChange::Undershoot, base + 901)?;
        let mut octrw_ks = Vec::new();
        for (ci, &c) in cfg.scale_c.iter().enumerate() {
            let mut row = |name: &str, stat: f64| -> Result<(), CliError> {
                w.write_record([
                    alpha.to_string(),
                    c.to_string(),
                    name.to_string(),
                    stat.to_string(),
                    crit.to_string(),
                    n.to_string(),
                    n.to_string(),
                ])?;
                Ok(())
            };
            let coupled = WalkConfig {
                alpha,
                scale_c: c,
                horizon_t: t,
                n_paths: cfg.n_paths,
                seed: cfg.seed.child(base + ci as u64),
                coupling: Coupling::Coupled,
            };
            let ends = walk_endpoints(&coupled)?;
            let x: Vec<f64> = ends.iter().map(|e| e.ctrw).collect();
            let y: Vec<f64> = ends.iter().map(|e| e.octrw).collect();
            let ks_y = ks_distance(&y, &over)?;
            let ks_x = ks_distance(&x, &under)?;
            let ks_xy = ks_distance(&x, &y)?;
            row("octrw_vs_overshoot_limit", ks_y)?;
            row("ctrw_vs_undershoot_limit", ks_x)?;
            row("coupled_ctrw_vs_octrw", ks_xy)?;
            octrw_ks.push(ks_y);

            let uncoupled = WalkConfig {
                coupling: Coupling::Uncoupled,
                seed: cfg.seed.child(base + 500 + ci as u64),
                ..coupled
            };
            let ends = walk_endpoints(&uncoupled)?;
            let ux: Vec<f64> = ends.iter().map(|e| e.ctrw).collect();
            let uy: Vec<f64> = ends.iter().map(|e| e.octrw).collect();
            let ks_u = ks_distance(&ux, &uy)?;
            row("uncoupled_ctrw_vs_octrw", ks_u)?;

            if ci == cfg.scale_c.len() - 1 {
                out.checks.push(Check::at_most(
                    format!("octrw_vs_overshoot_limit alpha={alpha} c={c}"),
                    ks_y,
                    tol.ks_slack * crit,
                ));
                out.checks.push(Check::at_most(
                    format!("ctrw_vs_undershoot_limit alpha={alpha} c={c}"),
                    ks_x,
                    tol.ks_slack * crit,
                ));
                out.checks.push(Check::above(
                    format!("coupled_split alpha={alpha} c={c}"),
                    ks_xy,
                    crit,
                ));
                out.checks.push(Check::at_most(
                    format!("uncoupled_no_split alpha={alpha} c={c}"),
                    ks_u,
                    crit,
                ));
            }
        }
        for (k, pair) in octrw_ks.windows(2).enumerate() {
            out.checks.push(Check::at_most(
                format!(
                    "octrw_ks_nonincreasing alpha={alpha} c={}",
                    cfg.scale_c[k + 1]
                ),
                pair[1],
                pair[0] + tol.ks_slack * crit,
            ));
        }
    }
    w.flush()?;
    Ok(())
}

/// Two-sided normal quantile for a family-wise level over `cells` tests.
fn bonferroni_sigmas(level: f64, cells: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - level / (2.0 * cells.max(1) as f64))
}

fn write_field(out: &mut Outcome, dir: &Path, field: &QField) -> Result<(), CliError> {
    let name = format!(
        "q_{}_{}_{}.csv",
        field.kind.as_str(),
        field.route.as_str(),
        tag(field.alpha)
    );
    let mut f = out.create(dir, &name)?;
    field.write_csv(&mut f)?;
    f.flush()?;
    Ok(())
}

fn q_fields(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let u = &cfg.bump;
    for (ai, &alpha) in cfg.alpha.iter().enumerate() {
        for (ki, &kind) in cfg.kinds.iter().enumerate() {
            let quad = match kind {
                TimeChange::Overshoot => q_overshoot_quadrature(alpha, u, &cfg.grids)?,
                TimeChange::Undershoot => q_undershoot_quadrature(alpha, u, &cfg.grids)?,
                TimeChange::Uncoupled => q_uncoupled_fourier(alpha, u, &cfg.grids)?,
            };
            let seed = cfg.seed.child((ai * 10 + ki) as u64);
            let mc = q_monte_carlo(kind, alpha, u, &cfg.grids, cfg.n_paths, seed)?;
            write_field(out, &cfg.output_dir, &quad)?;
            write_field(out, &cfg.output_dir, &mc)?;

            let label = format!("{kind} alpha={alpha}");
            let initial_err = cfg
                .grids
                .t
                .iter()
                .position(|&t| t == 0.0)
                .map(|i| {
                    cfg.grids
                        .x
                        .iter()
                        .enumerate()
                        .map(|(j, &x)| {
                            (quad.values[i][j] - u.value(x))
                                .abs()
                                .max((mc.values[i][j] - u.value(x)).abs())
                        })
                        .fold(0.0, f64::max)
                })
                .unwrap_or(0.0);
            out.checks.push(Check::at_most(
                format!("initial_row {label}"),
                initial_err,
                0.0,
            ));
            out.checks.push(Check::at_most(
                format!("sup_bound {label}"),
                quad.max_abs(),
                u.sup_norm() * (1.0 + 1e-12),
            ));

            let mut max_z: f64 = 0.0;
            let mut cells = 0;
            for (i, &t) in cfg.grids.t.iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                for j in 0..cfg.grids.x.len() {
                    cells += 1;
                    let d = (mc.values[i][j] - quad.values[i][j]).abs();
                    let se = mc.stderr[i][j];
                    let z = if se > 0.0 {
                        d / se
                    } else if d <= 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    max_z = max_z.max(z);
                }
            }
            let sigmas = cfg
                .tolerances
                .mc_sigmas
                .max(bonferroni_sigmas(cfg.tolerances.ks_level, cells));
            out.checks.push(Check::at_most(
                format!("mc_vs_quadrature {label}"),
                max_z,
                sigmas,
            ));
        }
    }
    Ok(())
}

fn residual_scans(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let grids = cfg.grids.positive_times();
    let tol = &cfg.tolerances;
    for &alpha in &cfg.alpha {
        for &kind in &cfg.kinds {
            for field in [ScanField::Harmonic, ScanField::NegativeControl] {
                let report = residual_scan(
                    kind,
                    field,
                    alpha,
                    &cfg.bump,
                    &grids,
                    &cfg.scheme,
                    tol.harmonic,
                )?;
                let suffix = match field {
                    ScanField::Harmonic => "",
                    ScanField::NegativeControl => "_control",
                };
                let name = format!("residual_{}{suffix}_{}.csv", kind.as_str(), tag(alpha));
                let mut f = out.create(&cfg.output_dir, &name)?;
                report.write_csv(&mut f)?;
                f.flush()?;
                let frac = report.pass_fraction();
                match field {
                    ScanField::Harmonic => out.checks.push(Check {
                        name: format!("harmonic_pass_fraction {kind} alpha={alpha}"),
                        pass: frac == 1.0,
                        value: frac,
                        bound: 1.0,
                    }),
                    ScanField::NegativeControl => out.checks.push(Check::above(
                        format!("control_fail_fraction {kind} alpha={alpha}"),
                        1.0 - frac,
                        tol.control_fail_fraction,
                    )),
                }
            }
        }
    }
    Ok(())
}

fn identity_writer(
    out: &mut Outcome,
    dir: &Path,
    name: &str,
) -> Result<csv::Writer<File>, CliError> {
    let mut w = out.csv(dir, name)?;
    w.write_record(["name", "alpha", "param", "residual", "bound"])?;
    Ok(w)
}

fn identity_row(
    w: &mut csv::Writer<File>,
    name: &str,
    alpha: Option<StableExponent>,
    param: f64,
    residual: f64,
    bound: f64,
) -> Result<(), CliError> {
    w.write_record([
        name.to_string(),
        alpha.map(|a| a.to_string()).unwrap_or_default(),
        param.to_string(),
        residual.to_string(),
        bound.to_string(),
    ])?;
    Ok(())
}

fn laplace_checks(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let mut w = identity_writer(out, &cfg.output_dir, "laplace.csv")?;
    let u = &cfg.bump;
    let x = u.center;
    for &alpha in &cfg.alpha {
        for &lambda in &cfg.lambda {
            let r = laplace_residual(alpha, u, x, lambda, &cfg.scheme)?;
            identity_row(
                &mut w,
                "laplace_residual",
                Some(alpha),
                lambda,
                r.value,
                r.bound,
            )?;
            out.checks.push(Check::at_most(
                format!("laplace_residual alpha={alpha} lambda={lambda}"),
                r.value.abs(),
                r.bound,
            ));
            let q = laplace_q(alpha, u, x, lambda)?;
            let diff = (q.double_integral.value - q.numerical.value).abs();
            let bound = q.double_integral.error + q.numerical.error + cfg.tolerances.identity;
            identity_row(&mut w, "laplace_q_routes", Some(alpha), lambda, diff, bound)?;
            out.checks.push(Check::at_most(
                format!("laplace_q_routes alpha={alpha} lambda={lambda}"),
                diff,
                bound,
            ));
        }
    }
    for &lambda in &cfg.lambda {
        let r = resolvent_identity_residual(u, lambda, &cfg.grids.x)?;
        identity_row(&mut w, "resolvent", None, lambda, r.residual, r.bound)?;
        out.checks.push(Check::at_most(
            format!("resolvent lambda={lambda}"),
            r.residual,
            cfg.tolerances.identity.max(r.bound),
        ));
    }
    w.flush()?;
    Ok(())
}

fn pmp_probes(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let mut w = out.csv(&cfg.output_dir, "pmp.csv")?;
    w.write_record([
        "name",
        "alpha",
        "x_star",
        "t_star",
        "value",
        "bound",
        "gap",
        "levy_tail",
        "threshold",
    ])?;
    let one = Constant(1.0);
    for &alpha in &cfg.alpha {
        let hump = SeparableField::new(&cfg.bump, TimeProfile::Hump);
        let window = SeparableField::new(
            &one,
            TimeProfile::Step {
                initial: 0.5,
                later: 1.0,
            },
        );
        for (name, f) in [("bump_hump", &hump), ("raised_window", &window)] {
            let r = pmp_probe(f, cfg.bump.center, 1.0, alpha, &cfg.grids, &cfg.scheme)?;
            w.write_record([
                name.to_string(),
                alpha.to_string(),
                r.x_star.to_string(),
                r.t_star.to_string(),
                r.value.to_string(),
                r.bound.to_string(),
                r.gap.to_string(),
                r.levy_tail.to_string(),
                r.threshold().to_string(),
            ])?;
            out.checks.push(Check {
                name: format!("pmp {name} alpha={alpha}"),
                pass: r.pass(),
                value: r.value,
                bound: r.threshold(),
            });
        }
        let flat = SeparableField::new(
            &one,
            TimeProfile::Step {
                initial: 1.0,
                later: 1.0,
            },
        );
        let rejected = matches!(
            pmp_probe(&flat, 0.0, 1.0, alpha, &cfg.grids, &cfg.scheme),
            Err(Error::Precondition(_))
        );
        out.checks.push(Check {
            name: format!("pmp constant_rejected alpha={alpha}"),
            pass: rejected,
            value: if rejected { 1.0 } else { 0.0 },
            bound: 1.0,
        });
    }
    w.flush()?;
    Ok(())
}

fn identities(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let tol = cfg.tolerances.identity;
    let mut w = identity_writer(out, &cfg.output_dir, "identities.csv")?;
    for &alpha in &cfg.alpha {
        let model = alpha.model();
        for t in [0.01, 1.0, 100.0] {
            let e = model.renewal_identity_residual(t)?;
            identity_row(&mut w, "renewal", Some(alpha), t, e.value, e.error)?;
            out.checks.push(Check::at_most(
                format!("renewal alpha={alpha} t={t}"),
                e.value.abs(),
                tol,
            ));
        }
        for kind in TimeChange::ALL {
            let v = constant_residual(kind, alpha, 1.0, 0.0, 1.0, &cfg.scheme)?;
            identity_row(
                &mut w,
                &format!("constant_{}", kind.as_str()),
                Some(alpha),
                1.0,
                v.value,
                v.bound,
            )?;
            out.checks.push(Check::at_most(
                format!("constant_{kind} alpha={alpha}"),
                v.value.abs(),
                v.bound + tol,
            ));
        }
    }
    for &lambda in &cfg.lambda {
        let r = resolvent_identity_residual(&cfg.bump, lambda, &cfg.grids.x)?;
        identity_row(&mut w, "resolvent", None, lambda, r.residual, r.bound)?;
        out.checks.push(Check::at_most(
            format!("resolvent lambda={lambda}"),
            r.residual,
            tol,
        ));
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_exceeds_three_sigma_for_large_families() {
        assert!((bonferroni_sigmas(0.0027, 1) - 3.0).abs() < 1e-3);
        assert!(bonferroni_sigmas(0.01, 1320) > 4.0);
    }
}
