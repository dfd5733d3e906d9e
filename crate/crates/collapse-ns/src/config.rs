//! TOML run configuration: `[profile]`, `[fluid]`, `[solver]`, `[study]`
//! sections shared by all CLI subcommands.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{AreaFn, BaseKind, CubicSpline, FiberKind, FiberProfile};
use crate::thermo::{PressureLaw, Renormalization};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub base: String,
    #[serde(default = "default_fiber")]
    pub fiber: String,
    pub area: String,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    /// uniform samples of A on [0, 1] for `area = "table"`
    #[serde(default)]
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    #[serde(default = "two")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub rho_floor: f64,
    #[serde(default = "default_visc")]
    pub mu: f64,
    #[serde(default = "default_visc")]
    pub eta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_ns")]
    pub ns: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_dissipation")]
    pub dissipation: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Euler-mode viscosity schedule `mu = eta = kappa * eps`
    #[serde(default = "one")]
    pub kappa: f64,
    /// limit initial velocity `u_a + u_b sin(2 pi x)`
    #[serde(default)]
    pub u_a: f64,
    #[serde(default = "default_ub")]
    pub u_b: f64,
    /// limit initial density (constant)
    #[serde(default = "one")]
    pub rho0: f64,
    /// target normalized initial entropy for ill-prepared runs (0 = well prepared)
    #[serde(default)]
    pub delta0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileConfig,
    #[serde(default = "default_fluid")]
    pub fluid: FluidConfig,
    #[serde(default = "default_solver")]
    pub solver: SolverConfig,
    #[serde(default = "default_study")]
    pub study: StudySection,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_visc() -> f64 {
    0.05
}
fn default_fiber() -> String {
    "interval".into()
}
fn default_nx() -> usize {
    128
}
fn default_ns() -> usize {
    16
}
fn default_cfl() -> f64 {
    0.4
}
fn default_t_end() -> f64 {
    0.25
}
fn default_sample_dt() -> f64 {
    0.01
}
fn default_dissipation() -> f64 {
    0.01
}
fn default_mode() -> String {
    "ns".into()
}
fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn default_ub() -> f64 {
    0.1
}
fn default_fluid() -> FluidConfig {
    FluidConfig {
        gamma: 2.0,
        a: 1.0,
        rho_floor: 1.0,
        mu: 0.05,
        eta: 0.05,
    }
}
fn default_solver() -> SolverConfig {
    SolverConfig {
        nx: default_nx(),
        ns: default_ns(),
        cfl: default_cfl(),
        t_end: default_t_end(),
        sample_dt: default_sample_dt(),
        dissipation: default_dissipation(),
    }
}
fn default_study() -> StudySection {
    StudySection {
        mode: default_mode(),
        epsilons: default_epsilons(),
        kappa: 1.0,
        u_a: 0.0,
        u_b: default_ub(),
        rho0: 1.0,
        delta0: 0.0,
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.cfl > 0.0 && s.cfl <= 0.9) {
            return Err(Error::Config(format!("cfl = {} outside (0, 0.9]", s.cfl)));
        }
        if s.t_end <= 0.0 || s.sample_dt <= 0.0 {
            return Err(Error::Config("t_end and sample_dt must be positive".into()));
        }
        let eps = &self.study.epsilons;
        if eps.is_empty() || eps.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("epsilons must be strictly decreasing".into()));
        }
        match self.study.mode.as_str() {
            "ns" | "euler" => {}
            m => return Err(Error::Config(format!("unknown study mode '{m}'"))),
        }
        if self.study.mode == "ns" && !(self.fluid.mu > 0.0 && self.fluid.eta > 0.0) {
            return Err(Error::Config("ns mode needs mu > 0 and eta > 0".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<FiberProfile> {
        let base = match self.profile.base.as_str() {
            "circle" => BaseKind::Circle,
            "interval" => BaseKind::Interval,
            b => return Err(Error::Config(format!("unknown base '{b}'"))),
        };
        let fiber = match self.profile.fiber.as_str() {
            "interval" => FiberKind::Interval,
            "disk" => FiberKind::Disk,
            f => return Err(Error::Config(format!("unknown fiber '{f}'"))),
        };
        let area = match self.profile.area.as_str() {
            "constant" => AreaFn::Constant { a: self.profile.a },
            "affine" => AreaFn::Affine { a: self.profile.a, b: self.profile.b },
            "cosine" => AreaFn::Cosine { a: self.profile.a, b: self.profile.b },
            "table" => {
                if self.profile.table.len() < 4 {
                    return Err(Error::Config("area table needs >= 4 samples".into()));
                }
                let spline = match base {
                    BaseKind::Circle => CubicSpline::periodic(&self.profile.table),
                    BaseKind::Interval => CubicSpline::natural(&self.profile.table),
                };
                AreaFn::Table(spline)
            }
            a => return Err(Error::Config(format!("unknown area kind '{a}'"))),
        };
        FiberProfile::new(base, fiber, area)
    }

    pub fn law(&self) -> Result<PressureLaw> {
        PressureLaw::new(self.fluid.gamma, self.fluid.a, 2)
    }

    pub fn renorm(&self) -> Result<Renormalization> {
        Renormalization::new(self.law()?, self.fluid.rho_floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
        [profile]
        base = "circle"
        area = "cosine"
        a = 1.5
        b = 0.5

        [fluid]
        gamma = 2.0
        mu = 0.05
        eta = 0.05

        [solver]
        nx = 128
        ns = 16
        t_end = 0.25

        [study]
        mode = "ns"
        epsilons = [0.2, 0.1, 0.05, 0.025]
    "#;

    #[test]
    fn parses_defaults_and_profile() {
        let cfg = RunConfig::from_str(EXAMPLE).unwrap();
        assert_eq!(cfg.solver.sample_dt, 0.01);
        assert_eq!(cfg.study.u_b, 0.1);
        let p = cfg.profile().unwrap();
        assert!((p.area(0.0) - 2.0).abs() < 1e-14);
        cfg.law().unwrap();
        cfg.renorm().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad_cfl = EXAMPLE.replace("t_end = 0.25", "t_end = 0.25\ncfl = 1.5");
        assert!(RunConfig::from_str(&bad_cfl).is_err());
        let bad_eps = EXAMPLE.replace("[0.2, 0.1, 0.05, 0.025]", "[0.1, 0.2]");
        assert!(RunConfig::from_str(&bad_eps).is_err());
        let unknown = EXAMPLE.replace("mode = \"ns\"", "mode = \"ns\"\nbogus = 1");
        assert!(RunConfig::from_str(&unknown).is_err());
    }
}
