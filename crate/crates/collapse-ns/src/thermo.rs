//! Gamma-law pressure, the renormalization H with rho H' - H = p, the
//! relative-entropy integrand and empirical coercivity constants.

use crate::error::{Error, Result};

/// Isentropic pressure `p(rho) = a rho^gamma`.
#[derive(Debug, Clone, Copy)]
pub struct PressureLaw {
    pub gamma: f64,
    pub a: f64,
}

impl PressureLaw {
    /// `n_dim` is the flow dimension N; the admissibility condition is
    /// gamma > N/2.
    pub fn new(gamma: f64, a: f64, n_dim: usize) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Config(format!("pressure scale a = {a} must be positive")));
        }
        if !(gamma > n_dim as f64 / 2.0) {
            return Err(Error::Config(format!(
                "adiabatic exponent gamma = {gamma} must exceed N/2 = {}",
                n_dim as f64 / 2.0
            )));
        }
        Ok(PressureLaw { gamma, a })
    }

    pub fn p(&self, rho: f64) -> f64 {
        // gamma = 2 is the default law and sits in every solver hot loop
        if self.gamma == 2.0 {
            self.a * rho * rho
        } else {
            self.a * rho.powf(self.gamma)
        }
    }

    /// `p'(rho) = a gamma rho^(gamma-1)`; the squared sound speed.
    pub fn dp(&self, rho: f64) -> f64 {
        if self.gamma == 2.0 {
            2.0 * self.a * rho
        } else {
            self.a * self.gamma * rho.powf(self.gamma - 1.0)
        }
    }
}

/// Pressure potential H with `rho H' - H = p` and `H'' = p'/rho`, anchored
/// at the reference density `rho_floor` so that `H(rho_floor) = 0` when the
/// floor is positive.
#[derive(Debug, Clone, Copy)]
pub struct Renormalization {
    pub law: PressureLaw,
    pub rho_floor: f64,
}

impl Renormalization {
    pub fn new(law: PressureLaw, rho_floor: f64) -> Result<Self> {
        if rho_floor < 0.0 {
            return Err(Error::Config(format!("rho_floor = {rho_floor} must be >= 0")));
        }
        Ok(Renormalization { law, rho_floor })
    }

    /// `(H, H', H'')` at `rho > 0`:
    /// `H(rho) = a rho (rho^(g-1) - rho_floor^(g-1)) / (g - 1)`.
    pub fn renorm_h(&self, rho: f64) -> Result<(f64, f64, f64)> {
        if !(rho > 0.0) {
            return Err(Error::Config(format!("renorm_h needs rho > 0, got {rho}")));
        }
        Ok(self.h_unchecked(rho))
    }

    fn h_unchecked(&self, rho: f64) -> (f64, f64, f64) {
        let g = self.law.gamma;
        let a = self.law.a;
        let floor_pow = self.rho_floor.powf(g - 1.0);
        let h = a * rho * (rho.powf(g - 1.0) - floor_pow) / (g - 1.0);
        let h1 = a * (g * rho.powf(g - 1.0) - floor_pow) / (g - 1.0);
        let h2 = a * g * rho.powf(g - 2.0);
        (h, h1, h2)
    }

    /// `H(rho)` extended by continuity to `rho = 0` (value 0 for gamma > 1).
    pub fn h(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            0.0
        } else {
            self.h_unchecked(rho).0
        }
    }

    /// Relative-entropy integrand
    /// `1/2 rho |u - U|^2 + H(rho) - H'(r)(rho - r) - H(r)`.
    ///
    /// Non-negative by convexity of H; `rho = 0` is admissible.
    pub fn entropy_integrand(&self, rho: f64, u: &[f64], r: f64, big_u: &[f64]) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Config(format!("comparison density r = {r} must be positive")));
        }
        if rho < 0.0 {
            return Err(Error::Config(format!("density rho = {rho} must be >= 0")));
        }
        let kin: f64 = u
            .iter()
            .zip(big_u)
            .map(|(&ui, &bi)| (ui - bi) * (ui - bi))
            .sum();
        let (hr, h1r, _) = self.h_unchecked(r);
        Ok(0.5 * rho * kin + self.h(rho) - h1r * (rho - r) - hr)
    }
}

/// Empirical coercivity constants of the entropy integrand: on `K x K` the
/// integrand is bracketed by `c1,c2` times `|u-U|^2 + |rho-r|^2`; for
/// `r in K`, `rho outside Kprime` it dominates `c3 (1 + rho|u-U|^2 + rho^gamma)`.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

pub fn coercivity_scan(
    renorm: &Renormalization,
    k: (f64, f64),
    kprime: (f64, f64),
    samples: usize,
) -> Result<CoercivityConstants> {
    if !(kprime.0 > 0.0 && kprime.0 < k.0 && k.0 < k.1 && k.1 < kprime.1) {
        return Err(Error::Config(format!(
            "need 0 < K'min < Kmin < Kmax < K'max, got K = {k:?}, K' = {kprime:?}"
        )));
    }
    let n = samples.max(16);
    let speeds = [0.0, 0.5, 1.0, 2.0];
    let grid = |lo: f64, hi: f64, t: f64| lo + (hi - lo) * t;

    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for i in 0..n {
        let rho = grid(k.0, k.1, i as f64 / (n - 1) as f64);
        for j in 0..n {
            let r = grid(k.0, k.1, j as f64 / (n - 1) as f64);
            for &dv in &speeds {
                let denom = dv * dv + (rho - r) * (rho - r);
                if denom < 1e-14 {
                    continue;
                }
                let e = renorm.entropy_integrand(rho, &[dv], r, &[0.0])?;
                if e <= 0.0 && denom > 1e-10 {
                    return Err(Error::CoercivityViolation(format!(
                        "integrand {e:.3e} not positive at rho={rho}, r={r}, |u-U|={dv}"
                    )));
                }
                let ratio = e / denom;
                c1 = c1.min(ratio);
                c2 = c2.max(ratio);
            }
        }
    }

    let mut c3 = f64::INFINITY;
    // Density outside K': below Kprime.0 (including 0) and above Kprime.1.
    let mut rhos: Vec<f64> = (0..n).map(|i| kprime.0 * i as f64 / n as f64).collect();
    for i in 0..n {
        // log-spaced tail up to 1e3 * K'max
        let t = i as f64 / (n - 1) as f64;
        rhos.push(kprime.1 * 1e3f64.powf(t));
    }
    for &rho in &rhos {
        for j in 0..n {
            let r = grid(k.0, k.1, j as f64 / (n - 1) as f64);
            for &dv in &speeds {
                let e = renorm.entropy_integrand(rho, &[dv], r, &[0.0])?;
                let denom = 1.0 + rho * dv * dv + rho.powf(renorm.law.gamma);
                if e <= 0.0 {
                    return Err(Error::CoercivityViolation(format!(
                        "integrand {e:.3e} not positive at rho={rho}, r={r}, |u-U|={dv}"
                    )));
                }
                c3 = c3.min(e / denom);
            }
        }
    }

    if !(c1 > 0.0 && c3 > 0.0) {
        return Err(Error::CoercivityViolation(format!(
            "non-positive constants c1 = {c1:.3e}, c3 = {c3:.3e}"
        )));
    }
    Ok(CoercivityConstants { c1, c2, c3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_renorm() -> Renormalization {
        Renormalization::new(PressureLaw::new(2.0, 1.0, 2).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn gamma_below_half_n_rejected() {
        assert!(PressureLaw::new(1.4, 1.0, 3).is_err());
        assert!(PressureLaw::new(1.6, 1.0, 3).is_ok());
    }

    #[test]
    fn renorm_closed_form_examples() {
        // gamma=2, a=1, floor=1: H(rho) = rho(rho-1)
        let rn = std_renorm();
        let (h1v, _, _) = rn.renorm_h(1.0).unwrap();
        assert_eq!(h1v, 0.0);
        let (h, h1, h2) = rn.renorm_h(2.0).unwrap();
        assert!((h - 2.0).abs() < 1e-14);
        assert!((h1 - 3.0).abs() < 1e-14);
        assert!((h2 - 2.0).abs() < 1e-14);
        // ODE check at rho = 2: 2*3 - 2 = 4 = p(2)
        assert!((2.0 * h1 - h - rn.law.p(2.0)).abs() < 1e-14);
    }

    #[test]
    fn ode_residual_on_log_spaced_grid() {
        for &(gamma, a, floor) in &[(2.0, 1.0, 1.0), (1.7, 0.5, 0.3), (3.0, 2.0, 0.0)] {
            let rn = Renormalization::new(PressureLaw::new(gamma, a, 2).unwrap(), floor).unwrap();
            for k in 0..=600 {
                let rho = 10.0f64.powf(-3.0 + 6.0 * k as f64 / 600.0);
                let (h, h1, h2) = rn.renorm_h(rho).unwrap();
                let p = rn.law.p(rho);
                assert!(
                    (rho * h1 - h - p).abs() <= 1e-11 * (1.0 + p.abs() + h.abs()),
                    "ODE residual at rho = {rho}"
                );
                assert!((h2 - rn.law.dp(rho) / rho).abs() <= 1e-11 * (1.0 + h2.abs()));
                assert!(h2 > 0.0, "H'' > 0 at rho = {rho}");
            }
        }
    }

    #[test]
    fn entropy_integrand_examples() {
        let rn = std_renorm();
        // coincident pair
        assert_eq!(rn.entropy_integrand(1.5, &[0.3], 1.5, &[0.3]).unwrap(), 0.0);
        // kinetic only
        assert!((rn.entropy_integrand(1.0, &[1.0], 1.0, &[0.0]).unwrap() - 0.5).abs() < 1e-14);
        // density only: H(2) - H'(1)(1) - H(1) = 2 - 1 - 0 = 1
        assert!((rn.entropy_integrand(2.0, &[0.0], 1.0, &[0.0]).unwrap() - 1.0).abs() < 1e-14);
        // vacuum: integrand = r H'(r) - H(r) = p(r)
        assert!((rn.entropy_integrand(0.0, &[0.0], 1.0, &[0.0]).unwrap() - 1.0).abs() < 1e-14);
        // reflection symmetry in velocity
        let a = rn.entropy_integrand(1.3, &[0.7], 0.9, &[0.2]).unwrap();
        let b = rn.entropy_integrand(1.3, &[-0.7], 0.9, &[-0.2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn entropy_integrand_nonnegative_on_scan() {
        let rn = std_renorm();
        for i in 0..100 {
            let rho = 3.0 * i as f64 / 99.0;
            for j in 0..50 {
                let r = 0.2 + 2.8 * j as f64 / 49.0;
                for &dv in &[0.0, 0.5, 2.0] {
                    let e = rn.entropy_integrand(rho, &[dv], r, &[0.0]).unwrap();
                    assert!(e >= -1e-14, "rho={rho} r={r} dv={dv}: {e}");
                }
            }
        }
    }

    #[test]
    fn doubling_a_doubles_everything() {
        let r1 = Renormalization::new(PressureLaw::new(2.0, 1.0, 2).unwrap(), 0.7).unwrap();
        let r2 = Renormalization::new(PressureLaw::new(2.0, 2.0, 2).unwrap(), 0.7).unwrap();
        for &rho in &[0.3, 1.0, 4.2] {
            let a = r1.renorm_h(rho).unwrap();
            let b = r2.renorm_h(rho).unwrap();
            assert!((2.0 * a.0 - b.0).abs() < 1e-13 * (1.0 + b.0.abs()));
            assert!((2.0 * a.1 - b.1).abs() < 1e-13 * (1.0 + b.1.abs()));
            assert!((2.0 * a.2 - b.2).abs() < 1e-13 * (1.0 + b.2.abs()));
            assert!((2.0 * r1.law.p(rho) - r2.law.p(rho)).abs() < 1e-13);
        }
    }

    #[test]
    fn coercivity_constants_positive() {
        let rn = std_renorm();
        let c = coercivity_scan(&rn, (0.5, 2.0), (0.25, 4.0), 100).unwrap();
        assert!(c.c1 > 0.0 && c.c2 >= c.c1 && c.c3 > 0.0);
        // closed form check: rho = 0, r = 1 gives integrand 1, denom 1
        assert!(c.c3 <= 1.0 + 1e-12);
    }
}
