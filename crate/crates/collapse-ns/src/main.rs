use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use collapse_ns::config::RunConfig;
use collapse_ns::entropy::Meter;
use collapse_ns::geometry::{BaseKind, Side, ThinGrid};
use collapse_ns::korn::korn_estimate;
use collapse_ns::lift::{
    beta, boundary_area_flux, flow_area_check, lifted_continuity_residual, solve_fiber_neumann,
};
use collapse_ns::limit_solver::{
    run_limit, ClassicalCertificate, LimitConfig, LimitModel, LimitSample, LimitSampler,
    LimitTrajectory,
};
use collapse_ns::mms;
use collapse_ns::study::{fit_rate, gnuplot_script, run_study};
use collapse_ns::thermo::coercivity_scan;
use collapse_ns::thin_solver::{self, init_well_prepared, FluidState};
use collapse_ns::{Error, Result};

#[derive(Parser)]
#[command(name = "collapse-ns", about = "Thin-domain compressible flow studies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full convergence study: limit run, per-eps thin runs, entropy CSV
    Study {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Output CSV path
        #[arg(long, default_value = "study.csv")]
        out: PathBuf,
        /// Parallel thin runs
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also emit a gnuplot script next to the CSV
        #[arg(long)]
        gnuplot: bool,
    },
    /// Single thin-domain flow run with CSV snapshots (x, s, rho, ux, uy)
    RunNs {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Fiber scale (default: largest of study.epsilons)
        #[arg(long)]
        epsilon: Option<f64>,
        /// Snapshot file prefix
        #[arg(long, default_value = "ns")]
        out: String,
    },
    /// Single limit run with CSV snapshots (x, rho_hat, u_hat)
    RunLimit {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value = "limit")]
        out: String,
    },
    /// Entropy report from a thin snapshot and a limit snapshot
    Entropy {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        epsilon: f64,
        /// thin snapshot CSV produced by run-ns
        #[arg(long)]
        thin: PathBuf,
        /// limit snapshot CSV produced by run-limit
        #[arg(long)]
        limit: PathBuf,
    },
    /// Korn constant rows (epsilon, constant, kernel_dim) over the sweep
    Korn {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Canonical-lift identity battery
    LiftCheck {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Pressure-renormalization and coercivity battery
    ThermoCheck {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Manufactured-solution refinement study for both solvers
    Mms {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Largest thin resolution (halved twice downwards)
        #[arg(long, default_value_t = 256)]
        max_nx: usize,
    },
}

fn main() {
    if let Err(e) = dispatch() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Study { cfg, out, workers, gnuplot } => cmd_study(&cfg, &out, workers, gnuplot),
        Cmd::RunNs { cfg, epsilon, out } => cmd_run_ns(&cfg, epsilon, &out),
        Cmd::RunLimit { cfg, out } => cmd_run_limit(&cfg, &out),
        Cmd::Entropy { cfg, epsilon, thin, limit } => cmd_entropy(&cfg, epsilon, &thin, &limit),
        Cmd::Korn { cfg } => cmd_korn(&cfg),
        Cmd::LiftCheck { cfg } => cmd_lift_check(&cfg),
        Cmd::ThermoCheck { cfg } => cmd_thermo_check(&cfg),
        Cmd::Mms { cfg, max_nx } => cmd_mms(&cfg, max_nx),
    }
}

fn load(cfg: &ConfigArg) -> Result<RunConfig> {
    RunConfig::from_path(&cfg.config)
}

fn cmd_study(cfg: &ConfigArg, out: &PathBuf, workers: usize, gnuplot: bool) -> Result<()> {
    let cfg = load(cfg)?;
    let study = run_study(&cfg, workers)?;
    std::fs::write(out, study.to_csv())?;
    println!("wrote {}", out.display());
    println!("lambda={:.6e}", study.certificate.lambda);
    println!("rho_min={:.6e}", study.certificate.rho_min);
    println!("rho_max={:.6e}", study.certificate.rho_max);
    if let Ok(fit) = fit_rate(&study.rows, cfg.solver.t_end) {
        println!("slope={:.4}", fit.slope);
        for (e, c) in &fit.bound_constants {
            println!("bound_constant[eps={e}]={c:.6e}");
        }
    }
    if gnuplot {
        let script = out.with_extension("gp");
        std::fs::write(&script, gnuplot_script(&out.display().to_string()))?;
        println!("wrote {}", script.display());
    }
    Ok(())
}

fn write_thin_snapshot(path: &str, st: &FluidState) -> Result<()> {
    let g = &st.grid;
    let mut s = String::from("x,s,rho,ux,uy\n");
    for j in 0..g.ns as isize {
        for i in 0..g.nx as isize {
            let u = st.velocity(i, j);
            let k = st.at(i, j);
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                g.x[i as usize], g.s[j as usize], st.rho[k], u[0], u[1]
            ));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn cmd_run_ns(cfg: &ConfigArg, epsilon: Option<f64>, out: &str) -> Result<()> {
    let cfg = load(cfg)?;
    let profile = cfg.profile()?;
    let eps = epsilon.unwrap_or(cfg.study.epsilons[0]);
    let grid = Arc::new(ThinGrid::new(&profile, eps, cfg.solver.nx, cfg.solver.ns));
    let s = &cfg.study;
    let tau = 2.0 * std::f64::consts::PI;
    let mut st = init_well_prepared(
        &profile,
        grid,
        |_| s.rho0,
        |x| s.u_a + s.u_b * (tau * x).sin(),
    );
    let scfg = thin_solver::SolverConfig {
        law: cfg.law()?,
        mu: cfg.fluid.mu,
        eta: cfg.fluid.eta,
        cfl: cfg.solver.cfl,
        dissipation: cfg.solver.dissipation,
        forcing: None,
        exact_ghost: None,
    };
    let mut k = 0usize;
    thin_solver::run(&mut st, &scfg, cfg.solver.t_end, cfg.solver.sample_dt, |st| {
        let path = format!("{out}_{k:04}.csv");
        write_thin_snapshot(&path, st)?;
        println!("t={:.6} -> {path}", st.t);
        k += 1;
        Ok(())
    })
}

fn cmd_run_limit(cfg: &ConfigArg, out: &str) -> Result<()> {
    let cfg = load(cfg)?;
    let profile = cfg.profile()?;
    let nx = cfg.solver.nx * 4;
    let dx = 1.0 / nx as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let rho0 = vec![cfg.study.rho0; nx];
    let u0: Vec<f64> = (0..nx)
        .map(|i| cfg.study.u_a + cfg.study.u_b * (tau * (i as f64 + 0.5) * dx).sin())
        .collect();
    let model = match cfg.study.mode.as_str() {
        "euler" => LimitModel::EulerLimit,
        _ => LimitModel::NsLimit,
    };
    let lcfg = LimitConfig {
        law: cfg.law()?,
        model,
        mu: cfg.fluid.mu,
        eta: cfg.fluid.eta,
        n_dim: 2,
        nx,
        cfl: cfg.solver.cfl,
        t_end: cfg.solver.t_end,
        sample_dt: cfg.solver.sample_dt,
        dissipation: cfg.solver.dissipation,
        forcing: None,
    };
    let traj = run_limit(&profile, &lcfg, &rho0, &u0)?;
    for (k, sample) in traj.samples.iter().enumerate() {
        let mut s = String::from("x,rho_hat,u_hat\n");
        for i in 0..nx {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                (i as f64 + 0.5) * dx,
                sample.rho[i],
                sample.u[i]
            ));
        }
        let path = format!("{out}_{k:04}.csv");
        std::fs::write(&path, s)?;
        println!("t={:.6} -> {path}", sample.t);
    }
    println!("lambda={:.16e}", traj.certificate.lambda);
    println!("rho_min={:.16e}", traj.certificate.rho_min);
    println!("rho_max={:.16e}", traj.certificate.rho_max);
    Ok(())
}

fn parse_csv(path: &PathBuf, cols: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        if vals.len() != cols {
            return Err(Error::Parse(format!(
                "{}:{}: expected {cols} columns",
                path.display(),
                ln + 1
            )));
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Snapshot-based entropy report. The snapshots carry no time derivatives,
/// so the metered remainder treats the limit sample as frozen in time.
fn cmd_entropy(cfg: &ConfigArg, epsilon: f64, thin: &PathBuf, limit: &PathBuf) -> Result<()> {
    let cfg = load(cfg)?;
    let profile = cfg.profile()?;

    let lrows = parse_csv(limit, 3)?;
    let nx_fine = lrows.len();
    let sample = LimitSample {
        t: 0.0,
        rho: lrows.iter().map(|r| r[1]).collect(),
        u: lrows.iter().map(|r| r[2]).collect(),
        drho_dt: vec![0.0; nx_fine],
        du_dt: vec![0.0; nx_fine],
    };
    let dx = 1.0 / nx_fine as f64;
    let dlog = (0..nx_fine)
        .map(|i| profile.dlog_area_unchecked((i as f64 + 0.5) * dx))
        .collect();
    let traj = LimitTrajectory {
        base: profile.base,
        nx: nx_fine,
        dx,
        samples: vec![sample],
        certificate: ClassicalCertificate { lambda: f64::NAN, rho_min: 0.0, rho_max: 0.0 },
        dlog,
    };
    let sampler = LimitSampler::new(&traj, 0);

    let trows = parse_csv(thin, 5)?;
    let nx = trows.iter().take_while(|r| r[1] == trows[0][1]).count();
    if nx == 0 || trows.len() % nx != 0 {
        return Err(Error::Parse("thin snapshot is not a full grid".into()));
    }
    let ns = trows.len() / nx;
    let grid = Arc::new(ThinGrid::new(&profile, epsilon, nx, ns));
    let mut st = FluidState::new(&profile, grid);
    for (row, vals) in trows.iter().enumerate() {
        let (i, j) = ((row % nx) as isize, (row / nx) as isize);
        let k = st.at(i, j);
        st.rho[k] = vals[2];
        st.mx[k] = vals[2] * vals[3];
        st.my[k] = vals[2] * vals[4];
    }

    let meter = Meter {
        renorm: cfg.renorm()?,
        mu: cfg.fluid.mu,
        eta: cfg.fluid.eta,
        n_dim: 2,
    };
    let rep = meter.report(&mut st, &sampler)?;
    println!("e_vs_uhat={:.16e}", rep.e_vs_uhat);
    println!("e_vs_lift={:.16e}", rep.e_vs_lift);
    println!("e_normalized={:.16e}", rep.e_normalized);
    for (k, v) in rep.terms.iter().enumerate() {
        println!("term_{}={:.16e}", k + 1, v);
    }
    println!("dissipation={:.16e}", rep.dissipation);
    println!("remainder={:.16e}", rep.remainder);
    Ok(())
}

fn cmd_korn(cfg: &ConfigArg) -> Result<()> {
    let cfg = load(cfg)?;
    let profile = cfg.profile()?;
    println!("epsilon,constant,kernel_dim");
    for &eps in &cfg.study.epsilons {
        let grid = ThinGrid::new(&profile, eps, 32, 8);
        let est = korn_estimate(&profile, &grid)?;
        println!("{:.16e},{:.16e},{}", est.epsilon, est.constant, est.kernel_dim);
    }
    Ok(())
}

fn cmd_lift_check(cfg: &ConfigArg) -> Result<()> {
    let cfg = load(cfg)?;
    let profile = cfg.profile()?;
    let mut ok = true;
    let mut check = |name: &str, value: f64, tol: f64| {
        let pass = value <= tol;
        ok &= pass;
        println!(
            "{name}: {value:.3e} (tol {tol:.1e}) {}",
            if pass { "pass" } else { "FAIL" }
        );
    };

    // tangency of the boundary lift and the divergence identity
    let mut tangency: f64 = 0.0;
    let mut div_err: f64 = 0.0;
    let mut flux_err: f64 = 0.0;
    for k in 0..64 {
        let x = (k as f64 + 0.5) / 64.0;
        for side in [Side::Top, Side::Bottom] {
            let (_, xt) = beta(&profile, x, side, 1.0)?;
            let f = collapse_ns::geometry::boundary_frame(&profile, 1.0, x, side);
            tangency = tangency.max((xt[0] * f.nu[0] + xt[1] * f.nu[1]).abs());
        }
        let pot = solve_fiber_neumann(&profile, x, 1.0)?;
        div_err = div_err.max((pot.div() - profile.dlog_area_unchecked(x)).abs());
        flux_err = flux_err.max((boundary_area_flux(&profile, x)? - profile.area_d1(x)).abs());
    }
    check("boundary lift tangency", tangency, 1e-10);
    check("fiber divergence identity", div_err, 1e-10);
    check("boundary area flux = A'", flux_err, 1e-10);

    // flow-transported area vs direct evaluation
    let (flowed, direct) = flow_area_check(&profile, 0.1, 0.5, 1e-3)?;
    check("flow vs direct area", (flowed - direct).abs(), 1e-8);

    // lifted continuity residual refines at 2nd order
    let residual = |nx: usize| {
        let dx = 1.0 / nx as f64;
        let tau = 2.0 * std::f64::consts::PI;
        let rho: Vec<f64> = (0..nx).map(|i| 1.0 + 0.1 * (tau * (i as f64 + 0.5) * dx).sin()).collect();
        let u: Vec<f64> = (0..nx).map(|i| 0.1 * (tau * (i as f64 + 0.5) * dx).cos()).collect();
        lifted_continuity_residual(&profile, &rho, &u)
    };
    let (r1, r2) = (residual(128), residual(256));
    let order = (r1 / r2).log2();
    check("continuity residual order >= 1.9", (2.0 - order).max(0.0), 0.1);

    if !ok {
        return Err(Error::Config("lift checks failed".into()));
    }
    Ok(())
}

fn cmd_thermo_check(cfg: &ConfigArg) -> Result<()> {
    let cfg = load(cfg)?;
    let renorm = cfg.renorm()?;
    // H-ODE residual on a log grid
    let mut worst: f64 = 0.0;
    for k in 0..=600 {
        let rho = 10f64.powf(-3.0 + 6.0 * k as f64 / 600.0);
        let (h, h1, _) = renorm.renorm_h(rho)?;
        let res = (rho * h1 - h - renorm.law.p(rho)).abs() / (1.0 + renorm.law.p(rho));
        worst = worst.max(res);
    }
    println!("h_ode_residual={worst:.3e}");

    // integrand non-negativity on a deterministic pseudo-random scan
    let mut state = 0x2545f4914f6cdd1du64;
    let mut rnd = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut min_val = f64::INFINITY;
    for _ in 0..100_000 {
        let rho = 4.0 * rnd();
        let r = 0.25 + 3.75 * rnd();
        let u = [4.0 * rnd() - 2.0, 4.0 * rnd() - 2.0];
        let big_u = [4.0 * rnd() - 2.0, 4.0 * rnd() - 2.0];
        min_val = min_val.min(renorm.entropy_integrand(rho, &u, r, &big_u)?);
    }
    println!("integrand_min={min_val:.3e}");

    let c = coercivity_scan(&renorm, (0.5, 2.0), (0.25, 4.0), 64)?;
    println!("c1={:.6e}", c.c1);
    println!("c2={:.6e}", c.c2);
    println!("c3={:.6e}", c.c3);
    if min_val < 0.0 {
        return Err(Error::Config("entropy integrand went negative".into()));
    }
    Ok(())
}

fn cmd_mms(cfg: &ConfigArg, max_nx: usize) -> Result<()> {
    let cfg = load(cfg)?;
    let profile = cfg.profile()?;
    if profile.base != BaseKind::Circle {
        return Err(Error::Config("mms verification runs on the circle base".into()));
    }
    let law = cfg.law()?;
    let resolutions: Vec<usize> = [4usize, 2, 1].iter().map(|d| max_nx / d).collect();

    println!("limit solver:");
    let rows = mms::verify_limit(&profile, law, cfg.fluid.mu, cfg.fluid.eta, 0.1, &resolutions, cfg.solver.cfl)?;
    print_mms(&rows);

    println!("thin solver (eps = 0.2):");
    let rows = mms::verify_thin(&profile, 0.2, law, cfg.fluid.mu, cfg.fluid.eta, 0.1, &resolutions, cfg.solver.cfl)?;
    print_mms(&rows);
    Ok(())
}

fn print_mms(rows: &[mms::MmsRow]) {
    println!("  nx    err_rho        err_u          order_rho order_u");
    let orders = mms::observed_orders(rows);
    for (k, r) in rows.iter().enumerate() {
        if k == 0 {
            println!("  {:<5} {:.6e}   {:.6e}   -     -", r.nx, r.err_rho, r.err_u);
        } else {
            let (orho, ou) = orders[k - 1];
            println!(
                "  {:<5} {:.6e}   {:.6e}   {orho:.2}  {ou:.2}",
                r.nx, r.err_rho, r.err_u
            );
        }
    }
}
