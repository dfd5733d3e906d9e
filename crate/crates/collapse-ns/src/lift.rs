//! Canonical lift of base vector fields to the thin domain: the boundary
//! coefficient beta, the fiber Neumann potential, the rescaled lift field,
//! the flow-based area derivative and the lifted continuity identity.

use crate::error::{Error, Result};
use crate::geometry::{boundary_frame, BaseKind, FiberKind, FiberProfile, Side, ThinGrid};

/// `beta = -<L Xhat, nu> / <n, nu>` on the unrescaled domain (eps = 1),
/// together with the boundary lift `Xtilde = beta n + L Xhat`.
///
/// `L Xhat = (Xhat, 0)` is the horizontal (Euclidean-constant) lift. For the
/// interval fiber the second component is vertical; for the axisymmetric disk
/// fiber it is radial, and beta reduces to `Xhat R'`.
pub fn beta(profile: &FiberProfile, x: f64, side: Side, xhat: f64) -> Result<(f64, [f64; 2])> {
    profile.check_in_base(x)?;
    match profile.fiber {
        FiberKind::Interval => {
            let f = boundary_frame(profile, 1.0, x, side);
            let n_nu = f.n[0] * f.nu[0] + f.n[1] * f.nu[1];
            if n_nu.abs() < 1e-14 {
                return Err(Error::Transversality { x });
            }
            let b = -(xhat * f.nu[0]) / n_nu;
            let xtilde = [xhat + b * f.n[0], b * f.n[1]];
            Ok((b, xtilde))
        }
        FiberKind::Disk => {
            // Radial section: wall r = R(x), outward nu prop to (-R', 1),
            // fiber normal n = (0, 1) (radial direction).
            let rp = profile.radius_d1(x);
            let b = xhat * rp;
            Ok((b, [xhat, b]))
        }
    }
}

/// Fiber potential gradient `V` of the Neumann problem on the fiber over `x`:
/// `div_F V = (d/dx log A) Xhat` with `V . n = <Xtilde, n>` on the fiber
/// boundary. Closed form: `V(y) = slope * y` with `slope = Xhat A'/A` for the
/// interval fiber and `V(r) = Xhat (R'/R) r` radially for the disk.
#[derive(Debug, Clone, Copy)]
pub struct FiberPotential {
    pub x: f64,
    pub xhat: f64,
    pub fiber: FiberKind,
    /// `Xhat A'/A` (interval) or `Xhat R'/R` (disk).
    pub slope: f64,
}

impl FiberPotential {
    /// `V` at the fiber coordinate (vertical `y` or radial `r`).
    pub fn v(&self, y: f64) -> f64 {
        self.slope * y
    }

    /// Fiber divergence of `V`; constant over the fiber.
    pub fn div(&self) -> f64 {
        match self.fiber {
            FiberKind::Interval => self.slope,
            FiberKind::Disk => 2.0 * self.slope, // (1/r)(r V)' = 2 R'/R = A'/A
        }
    }
}

pub fn solve_fiber_neumann(profile: &FiberProfile, x: f64, xhat: f64) -> Result<FiberPotential> {
    profile.check_in_base(x)?;
    let slope = match profile.fiber {
        FiberKind::Interval => xhat * profile.dlog_area(x)?,
        FiberKind::Disk => xhat * profile.radius_d1(x) / profile.radius(x),
    };
    // Compatibility: the fiber integral of Xhat A'/A must equal the boundary
    // integral of <Xtilde, n>; both reduce to Xhat A' here.
    let lhs = profile.area(x) * xhat * profile.dlog_area(x)?;
    let rhs = xhat * profile.area_d1(x);
    let residual = (lhs - rhs).abs();
    if residual > 1e-10 * (1.0 + rhs.abs()) {
        return Err(Error::NeumannCompatibility { x, residual });
    }
    Ok(FiberPotential { x, xhat, fiber: profile.fiber, slope })
}

/// Sampled path for the interval fiber: solves the two-point Neumann problem
/// for the potential `U'' = q` on `[-A/2, A/2]` with `U'(+-A/2) = +-Xhat A'/2`
/// and zero mean, then differentiates. Returns `(y_k, V_k)` pairs.
pub fn solve_fiber_neumann_sampled(
    profile: &FiberProfile,
    x: f64,
    xhat: f64,
    m: usize,
) -> Result<Vec<(f64, f64)>> {
    assert!(m >= 4);
    let a = profile.area(x);
    let q = xhat * profile.dlog_area(x)?;
    let gp = xhat * profile.area_d1(x) / 2.0; // U'(top)
    let h = a / m as f64;
    let n = m + 1;
    // Unknowns: U_0..U_m and the compatibility multiplier.
    let mut sys = nalgebra::DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = nalgebra::DVector::<f64>::zeros(n + 1);
    for k in 1..m {
        sys[(k, k - 1)] = 1.0 / (h * h);
        sys[(k, k)] = -2.0 / (h * h);
        sys[(k, k + 1)] = 1.0 / (h * h);
        sys[(k, n)] = 1.0; // multiplier absorbs any compatibility defect
        rhs[k] = q;
    }
    // One-sided second-order Neumann rows.
    sys[(0, 0)] = -3.0 / (2.0 * h);
    sys[(0, 1)] = 4.0 / (2.0 * h);
    sys[(0, 2)] = -1.0 / (2.0 * h);
    rhs[0] = -gp;
    sys[(m, m)] = 3.0 / (2.0 * h);
    sys[(m, m - 1)] = -4.0 / (2.0 * h);
    sys[(m, m - 2)] = 1.0 / (2.0 * h);
    rhs[m] = gp;
    // Zero-mean gauge (trapezoid weights).
    for k in 0..n {
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        sys[(n, k)] = w * h;
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Parse("singular fiber Neumann system".into()))?;
    // V = U' by central differences (one-sided second order at the ends).
    let u = |k: usize| sol[k];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let y = -a / 2.0 + k as f64 * h;
        let v = if k == 0 {
            (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h)
        } else if k == m {
            (3.0 * u(m) - 4.0 * u(m - 1) + u(m - 2)) / (2.0 * h)
        } else {
            (u(k + 1) - u(k - 1)) / (2.0 * h)
        };
        out.push((y, v));
    }
    Ok(out)
}

/// Canonical lift `U_eps = (uhat, uhat (A'/A) y)` sampled on a thin grid.
/// The eps-rescaling `V_eps(y) = eps V(y/eps)` cancels in physical
/// coordinates, so the vertical component is linear in the physical `y`.
#[derive(Debug, Clone)]
pub struct LiftField {
    pub epsilon: f64,
    pub uhat: Vec<f64>,  // per column
    pub slope: Vec<f64>, // uhat * A'/A per column
}

impl LiftField {
    /// Lift vector at cell center `(i, j)` of `grid`.
    pub fn at(&self, grid: &ThinGrid, i: usize, j: usize) -> [f64; 2] {
        [self.uhat[i], self.slope[i] * grid.phys_y(i, j)]
    }

    /// Lift vector at the lateral boundary over column `i` (`side` top or
    /// bottom), where `y = +- eps A / 2`.
    pub fn at_wall(&self, grid: &ThinGrid, i: usize, side: Side) -> [f64; 2] {
        let sgn = if side == Side::Top { 0.5 } else { -0.5 };
        let y = sgn * grid.epsilon * grid.area[i];
        [self.uhat[i], self.slope[i] * y]
    }
}

pub fn lift_field(profile: &FiberProfile, grid: &ThinGrid, uhat: &[f64]) -> LiftField {
    assert_eq!(uhat.len(), grid.nx);
    let slope: Vec<f64> = grid
        .x
        .iter()
        .zip(uhat)
        .map(|(&xi, &ui)| ui * profile.dlog_area_unchecked(xi))
        .collect();
    LiftField { epsilon: grid.epsilon, uhat: uhat.to_vec(), slope }
}

/// Transport check for the fiber-area evolution: integrates the Jacobian
/// ODE `J' = (A'/A)(x0 + t) J` of the boundary-lift flow at unit base speed
/// with classical RK4 at the given step, and compares `A(x0) J(t_end)`
/// against the direct evaluation `A(x0 + t_end)`.
pub fn flow_area_check(
    profile: &FiberProfile,
    x0: f64,
    t_end: f64,
    step: f64,
) -> Result<(f64, f64)> {
    profile.check_in_base(x0)?;
    if profile.base == BaseKind::Interval && !(0.0..=1.0).contains(&(x0 + t_end)) {
        return Err(Error::FlowExitsDomain { t: t_end, x: x0 + t_end });
    }
    let l = |x: f64| profile.dlog_area_unchecked(x);
    let nsteps = (t_end / step).ceil().max(1.0) as usize;
    let dt = t_end / nsteps as f64;
    let mut j = 1.0f64;
    let mut t = 0.0f64;
    for _ in 0..nsteps {
        let k1 = l(x0 + t) * j;
        let k2 = l(x0 + t + 0.5 * dt) * (j + 0.5 * dt * k1);
        let k3 = l(x0 + t + 0.5 * dt) * (j + 0.5 * dt * k2);
        let k4 = l(x0 + t + dt) * (j + dt * k3);
        j += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
    }
    Ok((profile.area(x0) * j, profile.area(x0 + t_end)))
}

/// Boundary integral of `<Xtilde, n>` over the fiber boundary at `x` for
/// `Xhat = 1`; equals `A'(x)` by the area-evolution identity.
pub fn boundary_area_flux(profile: &FiberProfile, x: f64) -> Result<f64> {
    let (_, xt_top) = beta(profile, x, Side::Top, 1.0)?;
    let (_, xt_bot) = beta(profile, x, Side::Bottom, 1.0)?;
    match profile.fiber {
        FiberKind::Interval => Ok(xt_top[1] * 1.0 + xt_bot[1] * (-1.0)),
        // Disk: integral over the circle of radius R of the radial component.
        FiberKind::Disk => {
            Ok(xt_top[1] * 2.0 * std::f64::consts::PI * profile.radius(x))
        }
    }
}

/// Sup norm over interior base nodes of
/// `d_t rho_hat + div(rho_hat U_eps)` where `d_t rho_hat` is supplied by the
/// weighted continuity equation `d_t rho_hat = -(1/A) d_x(rho_hat uhat A)`.
/// Second-order small for smooth data; identically zero for `uhat = 0`.
pub fn lifted_continuity_residual(
    profile: &FiberProfile,
    rho_hat: &[f64],
    u_hat: &[f64],
) -> f64 {
    let nx = rho_hat.len();
    assert_eq!(u_hat.len(), nx);
    let dx = 1.0 / nx as f64;
    let x = |i: usize| (i as f64 + 0.5) * dx;
    let flux: Vec<f64> = (0..nx)
        .map(|i| rho_hat[i] * u_hat[i] * profile.area(x(i)))
        .collect();
    let qm: Vec<f64> = (0..nx).map(|i| rho_hat[i] * u_hat[i]).collect();
    let periodic = profile.base == BaseKind::Circle;
    let range: Box<dyn Iterator<Item = usize>> = if periodic {
        Box::new(0..nx)
    } else {
        Box::new(1..nx - 1)
    };
    let mut worst: f64 = 0.0;
    for i in range {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        let a = profile.area(x(i));
        let drho_dt = -(flux[ip] - flux[im]) / (2.0 * dx) / a;
        let div_horiz = (qm[ip] - qm[im]) / (2.0 * dx);
        let vert = rho_hat[i] * u_hat[i] * profile.area_d1(x(i)) / a;
        worst = worst.max((drho_dt + div_horiz + vert).abs());
    }
    worst
}
