//! Convergence-study orchestrator: one high-resolution limit run, one thin
//! run per eps, entropy metering at every sample time, CSV assembly and
//! rate fitting.

use std::sync::Arc;

use crate::config::RunConfig;
use crate::entropy::{inequality_check, EntropyReport, Meter};
use crate::error::{Error, Result};
use crate::geometry::{FiberProfile, ThinGrid};
use crate::korn::korn_estimate;
use crate::limit_solver::{
    run_limit, ClassicalCertificate, LimitConfig, LimitModel, LimitSampler, LimitTrajectory,
};
use crate::thin_solver::{self, init_well_prepared};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Limit resolution multiple over the thin solver's base resolution.
const LIMIT_REFINE: usize = 4;

/// Coarse nodal resolution of the Korn diagnostic (kept small: the direct
/// eigensolve is cubic in the number of degrees of freedom).
const KORN_NX: usize = 32;
const KORN_NS: usize = 8;

/// One CSV row: everything metered for one `(eps, t)` pair.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub epsilon: f64,
    pub mu: f64,
    pub eta: f64,
    pub t: f64,
    pub e0_norm: f64,
    pub e_norm: f64,
    pub e_lift: f64,
    pub diss_cum: f64,
    pub terms: [f64; 5],
    pub r_cum: f64,
    pub slack: f64,
    pub korn: f64,
    pub kernel_dim: usize,
    pub lambda: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub error: String,
}

pub struct Study {
    pub rows: Vec<StudyRow>,
    pub certificate: ClassicalCertificate,
}

struct EpsOutcome {
    epsilon: f64,
    mu: f64,
    eta: f64,
    reports: Vec<EntropyReport>,
    korn: f64,
    kernel_dim: usize,
    error: String,
}

fn limit_initial_data(cfg: &RunConfig, nx: usize) -> (Vec<f64>, Vec<f64>) {
    let s = &cfg.study;
    let dx = 1.0 / nx as f64;
    let rho0 = vec![s.rho0; nx];
    let u0 = (0..nx)
        .map(|i| s.u_a + s.u_b * (TAU * (i as f64 + 0.5) * dx).sin())
        .collect();
    (rho0, u0)
}

/// Ill-prepared perturbation amplitude so the lift of `amp sin(2 pi x)`
/// carries normalized relative entropy `delta0` at t = 0 (to leading order
/// in eps).
fn ill_prepared_amp(profile: &FiberProfile, rho0: f64, delta0: f64) -> f64 {
    if delta0 <= 0.0 {
        return 0.0;
    }
    let n = 2048;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..n {
        let x = (k as f64 + 0.5) / n as f64;
        let a = profile.area(x);
        num += (TAU * x).sin().powi(2) * a;
        den += a;
    }
    (2.0 * delta0 * den / (rho0 * num)).sqrt()
}

fn run_one_eps(
    cfg: &RunConfig,
    profile: &FiberProfile,
    traj: &LimitTrajectory,
    epsilon: f64,
) -> EpsOutcome {
    let (mu, eta) = match cfg.study.mode.as_str() {
        "euler" => (cfg.study.kappa * epsilon, cfg.study.kappa * epsilon),
        _ => (cfg.fluid.mu, cfg.fluid.eta),
    };
    let mut out = EpsOutcome {
        epsilon,
        mu,
        eta,
        reports: Vec::new(),
        korn: f64::NAN,
        kernel_dim: 0,
        error: String::new(),
    };

    let grid = Arc::new(ThinGrid::new(profile, epsilon, cfg.solver.nx, cfg.solver.ns));
    let s = &cfg.study;
    let amp = ill_prepared_amp(profile, s.rho0, s.delta0);
    let mut state = init_well_prepared(
        profile,
        grid.clone(),
        |_| s.rho0,
        |x| s.u_a + s.u_b * (TAU * x).sin() + amp * (TAU * x).sin(),
    );

    let renorm = match cfg.renorm() {
        Ok(r) => r,
        Err(e) => {
            out.error = e.to_string();
            return out;
        }
    };
    let meter = Meter { renorm, mu, eta, n_dim: 2 };
    let scfg = thin_solver::SolverConfig {
        law: renorm.law,
        mu,
        eta,
        cfl: cfg.solver.cfl,
        dissipation: cfg.solver.dissipation,
        forcing: None,
        exact_ghost: None,
    };

    let mut sample_idx = 0usize;
    let mut reports = Vec::new();
    let run_result = thin_solver::run(
        &mut state,
        &scfg,
        cfg.solver.t_end,
        cfg.solver.sample_dt,
        |st| {
            let sampler = LimitSampler::new(traj, sample_idx);
            reports.push(meter.report(st, &sampler)?);
            sample_idx += 1;
            Ok(())
        },
    );
    out.reports = reports;
    if let Err(e) = run_result {
        out.error = e.to_string();
    }

    match korn_estimate(profile, &ThinGrid::new(profile, epsilon, KORN_NX, KORN_NS)) {
        Ok(k) => {
            out.korn = k.constant;
            out.kernel_dim = k.kernel_dim;
        }
        Err(e) => {
            if out.error.is_empty() {
                out.error = e.to_string();
            }
        }
    }
    out
}

/// Runs the full study: one limit solve, one thin run per eps (parallel up
/// to `workers` threads), metered rows in eps-then-time order.
pub fn run_study(cfg: &RunConfig, workers: usize) -> Result<Study> {
    let profile = cfg.profile()?;
    let law = cfg.law()?;
    let nx_fine = cfg.solver.nx * LIMIT_REFINE;
    let (rho0, u0) = limit_initial_data(cfg, nx_fine);
    let model = match cfg.study.mode.as_str() {
        "euler" => LimitModel::EulerLimit,
        _ => LimitModel::NsLimit,
    };
    let lcfg = LimitConfig {
        law,
        model,
        mu: cfg.fluid.mu,
        eta: cfg.fluid.eta,
        n_dim: 2,
        nx: nx_fine,
        cfl: cfg.solver.cfl,
        t_end: cfg.solver.t_end,
        sample_dt: cfg.solver.sample_dt,
        dissipation: cfg.solver.dissipation,
        forcing: None,
    };
    let traj = run_limit(&profile, &lcfg, &rho0, &u0)?;

    let eps = &cfg.study.epsilons;
    let mut outcomes: Vec<Option<EpsOutcome>> = (0..eps.len()).map(|_| None).collect();
    let workers = workers.max(1);
    std::thread::scope(|scope| {
        let traj = &traj;
        let profile = &profile;
        let mut pending: Vec<(usize, &mut Option<EpsOutcome>)> =
            outcomes.iter_mut().enumerate().collect();
        while !pending.is_empty() {
            let batch: Vec<_> = pending
                .drain(..pending.len().min(workers))
                .collect();
            let handles: Vec<_> = batch
                .into_iter()
                .map(|(k, slot)| {
                    let e = eps[k];
                    scope.spawn(move || {
                        *slot = Some(run_one_eps(cfg, profile, traj, e));
                    })
                })
                .collect();
            for h in handles {
                h.join().expect("study worker panicked");
            }
        }
    });

    let mut rows = Vec::new();
    for out in outcomes.into_iter().map(Option::unwrap) {
        if out.reports.is_empty() {
            rows.push(StudyRow {
                epsilon: out.epsilon,
                mu: out.mu,
                eta: out.eta,
                t: f64::NAN,
                e0_norm: f64::NAN,
                e_norm: f64::NAN,
                e_lift: f64::NAN,
                diss_cum: f64::NAN,
                terms: [f64::NAN; 5],
                r_cum: f64::NAN,
                slack: f64::NAN,
                korn: out.korn,
                kernel_dim: out.kernel_dim,
                lambda: traj.certificate.lambda,
                rho_min: traj.certificate.rho_min,
                rho_max: traj.certificate.rho_max,
                error: out.error,
            });
            continue;
        }
        let slacks = inequality_check(&out.reports);
        let e0_norm = out.reports[0].e_normalized;
        let mut diss_cum = 0.0;
        let mut r_cum = 0.0;
        for (k, rep) in out.reports.iter().enumerate() {
            if k > 0 {
                let prev = &out.reports[k - 1];
                let dt = rep.t - prev.t;
                diss_cum += 0.5 * dt * (prev.dissipation + rep.dissipation);
                r_cum += 0.5 * dt * (prev.remainder + rep.remainder);
            }
            rows.push(StudyRow {
                epsilon: out.epsilon,
                mu: out.mu,
                eta: out.eta,
                t: rep.t,
                e0_norm,
                e_norm: rep.e_normalized,
                e_lift: rep.e_vs_lift,
                diss_cum,
                terms: rep.terms,
                r_cum,
                slack: slacks[k].1,
                korn: out.korn,
                kernel_dim: out.kernel_dim,
                lambda: traj.certificate.lambda,
                rho_min: traj.certificate.rho_min,
                rho_max: traj.certificate.rho_max,
                error: out.error.clone(),
            });
        }
    }
    Ok(Study { rows, certificate: traj.certificate })
}

pub const CSV_HEADER: &str = "epsilon,mu,eta,t,e0_norm,e_norm,e_lift,diss_cum,\
term_i,term_ii,term_iii,term_iv,term_v,r_cum,slack,korn,kernel_dim,lambda,\
rho_min,rho_max,error";

impl Study {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let nums = [
                r.epsilon, r.mu, r.eta, r.t, r.e0_norm, r.e_norm, r.e_lift, r.diss_cum,
                r.terms[0], r.terms[1], r.terms[2], r.terms[3], r.terms[4], r.r_cum, r.slack,
                r.korn,
            ];
            for v in nums {
                s.push_str(&format!("{v:.16e},"));
            }
            s.push_str(&format!("{},", r.kernel_dim));
            for v in [r.lambda, r.rho_min, r.rho_max] {
                s.push_str(&format!("{v:.16e},"));
            }
            s.push_str(&r.error);
            s.push('\n');
        }
        s
    }
}

/// Least-squares rate of `E_norm(T)` in eps plus the theorem-shaped bound
/// constants, at the sample time nearest `t_select`.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// per-eps `E_norm / (eps + E0_norm)` (dimension-reduction bound shape)
    pub bound_constants: Vec<(f64, f64)>,
    /// per-eps `E_norm / (mu + eta + eps)` (vanishing-viscosity bound shape)
    pub euler_constants: Vec<(f64, f64)>,
    /// `(eps, E_norm)` pairs entering the fit
    pub points: Vec<(f64, f64)>,
}

pub fn fit_rate(rows: &[StudyRow], t_select: f64) -> Result<RateFit> {
    let mut sel: Vec<&StudyRow> = Vec::new();
    for r in rows.iter().filter(|r| r.error.is_empty() && r.t.is_finite()) {
        match sel.iter_mut().find(|s| s.epsilon == r.epsilon) {
            Some(s) => {
                if (r.t - t_select).abs() < (s.t - t_select).abs() {
                    *s = r;
                }
            }
            None => sel.push(r),
        }
    }
    if sel.len() < 3 {
        return Err(Error::Config(format!(
            "rate fit needs >= 3 epsilons, have {}",
            sel.len()
        )));
    }
    sel.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let n = sel.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for r in &sel {
        let lx = r.epsilon.ln();
        let ly = r.e_norm.max(f64::MIN_POSITIVE).ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    Ok(RateFit {
        slope,
        intercept,
        bound_constants: sel
            .iter()
            .map(|r| (r.epsilon, r.e_norm / (r.epsilon + r.e0_norm)))
            .collect(),
        euler_constants: sel
            .iter()
            .map(|r| (r.epsilon, r.e_norm / (r.mu + r.eta + r.epsilon)))
            .collect(),
        points: sel.iter().map(|r| (r.epsilon, r.e_norm)).collect(),
    })
}

/// gnuplot script plotting `E_norm(T)` against eps from the study CSV.
pub fn gnuplot_script(csv_path: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set xlabel 'epsilon'\n\
         set ylabel 'normalized relative entropy at final time'\n\
         set key left top\n\
         t_final = system(\"tail -n +2 {csv} | cut -d, -f4 | sort -g | tail -1\")\n\
         plot '{csv}' using 1:(abs($4 - t_final) < 1e-9 ? $6 : 1/0) \\\n\
             with linespoints title 'E_norm(T)', \\\n\
             '' using 1:(abs($4 - t_final) < 1e-9 ? $1 : 1/0) \\\n\
             with lines dashtype 2 title 'slope 1 reference'\n",
        csv = csv_path
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_rows(f: impl Fn(f64) -> f64) -> Vec<StudyRow> {
        [0.2f64, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e| StudyRow {
                epsilon: e,
                mu: 0.05,
                eta: 0.05,
                t: 0.25,
                e0_norm: 0.0,
                e_norm: f(e),
                e_lift: 0.0,
                diss_cum: 0.0,
                terms: [0.0; 5],
                r_cum: 0.0,
                slack: 0.0,
                korn: 0.0,
                kernel_dim: 0,
                lambda: 1.0,
                rho_min: 1.0,
                rho_max: 1.0,
                error: String::new(),
            })
            .collect()
    }

    #[test]
    fn fit_rate_linear_rows() {
        let rows = synthetic_rows(|e| 0.7 * e);
        let fit = fit_rate(&rows, 0.25).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        for (_, c) in &fit.bound_constants {
            assert!((c - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rate_quadratic_rows() {
        let rows = synthetic_rows(|e| e * e);
        let fit = fit_rate(&rows, 0.25).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_needs_three_epsilons() {
        let mut rows = synthetic_rows(|e| e);
        rows.truncate(2);
        assert!(fit_rate(&rows, 0.25).is_err());
    }

    #[test]
    fn rest_study_has_floor_entropy() {
        let cfg = RunConfig::from_str(
            r#"
            [profile]
            base = "circle"
            area = "cosine"
            a = 1.5
            b = 0.5

            [solver]
            nx = 32
            ns = 8
            t_end = 0.02
            sample_dt = 0.01

            [study]
            epsilons = [0.2]
            u_b = 0.0
            "#,
        )
        .unwrap();
        let study = run_study(&cfg, 1).unwrap();
        assert!(!study.rows.is_empty());
        for r in &study.rows {
            assert!(r.error.is_empty(), "{}", r.error);
            assert!(r.e_norm.abs() < 1e-12, "E_norm = {}", r.e_norm);
        }
    }

    #[test]
    fn csv_is_deterministic_and_complete() {
        let cfg = RunConfig::from_str(
            r#"
            [profile]
            base = "circle"
            area = "cosine"
            a = 1.5
            b = 0.5

            [solver]
            nx = 32
            ns = 8
            t_end = 0.02
            sample_dt = 0.01

            [study]
            epsilons = [0.2, 0.1]
            "#,
        )
        .unwrap();
        let a = run_study(&cfg, 1).unwrap().to_csv();
        let b = run_study(&cfg, 2).unwrap().to_csv();
        assert_eq!(a, b, "study output must not depend on worker count");
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        // 2 epsilons x 3 samples (t = 0, 0.01, 0.02)
        assert_eq!(lines.len(), 1 + 2 * 3);
        let n_cols = CSV_HEADER.split(',').count();
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), n_cols);
        }
    }
}
