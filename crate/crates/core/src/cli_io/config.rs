use crate::cone::{suggest_k, ConeGeometry, DivisorSpec};
use crate::flow::{Integrator, LadderPlan};
use crate::torus::TorusDomain;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Smoothing strength: a number, or `"auto"` for the sufficient bound of `suggest_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum KChoice {
    Value(f64),
    Named(KWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KWord {
    Auto,
}

impl Default for KChoice {
    fn default() -> Self {
        KChoice::Named(KWord::Auto)
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = KChoice;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("k: a number or \"auto\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<KChoice, E> {
                Ok(KChoice::Value(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<KChoice, E> {
                Ok(KChoice::Value(v as f64))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<KChoice, E> {
                match v {
                    "auto" => Ok(KChoice::Named(KWord::Auto)),
                    _ => Err(E::custom(format!("k: expected a number or \"auto\", got {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// `ρ = amplitude · cos 2π(p x + q y)` in lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistMode {
    pub mode: [i32; 2],
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: [f64; 2],
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    #[serde(default)]
    pub k: KChoice,
    pub eps_ladder: Vec<f64>,
    pub divisor: Vec<[f64; 2]>,
    #[serde(default = "defaults::a0")]
    pub a0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_twist: Option<TwistMode>,
    #[serde(rename = "T_end", default = "defaults::t_end")]
    pub t_end: f64,
    #[serde(default = "defaults::dt_out")]
    pub dt_out: f64,
    #[serde(default = "defaults::cfl")]
    pub cfl: f64,
    #[serde(default = "defaults::delta_mask")]
    pub delta_mask: f64,
    #[serde(default = "defaults::integrator")]
    pub integrator: String,
    /// Run ladder members one after another. Results do not depend on it;
    /// `false` lets members run on separate threads.
    #[serde(default = "defaults::yes")]
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

mod defaults {
    pub fn a0() -> f64 {
        1.0
    }
    pub fn t_end() -> f64 {
        8.0
    }
    pub fn dt_out() -> f64 {
        0.1
    }
    pub fn cfl() -> f64 {
        0.2
    }
    pub fn delta_mask() -> f64 {
        0.05
    }
    pub fn integrator() -> String {
        "rkc".into()
    }
    pub fn yes() -> bool {
        true
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// The acceptance configuration: square torus, two points, four rungs.
    pub fn reference() -> Self {
        RunConfig {
            tau: [0.0, 1.0],
            n: 128,
            beta: 0.5,
            k: KChoice::default(),
            eps_ladder: vec![0.2, 0.1, 0.05, 0.025],
            divisor: vec![[0.25, 0.25], [0.75, 0.5]],
            a0: defaults::a0(),
            rho_twist: None,
            t_end: defaults::t_end(),
            dt_out: defaults::dt_out(),
            cfl: defaults::cfl(),
            delta_mask: defaults::delta_mask(),
            integrator: defaults::integrator(),
            deterministic: true,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{key} must be finite")))
            }
        };
        finite("tau", self.tau[0])?;
        finite("tau", self.tau[1])?;
        if !(self.tau[1] > 0.0) {
            return Err(bad("tau: imaginary part must be positive"));
        }
        if self.n < 16 || self.n % 2 != 0 {
            return Err(bad(format!("N = {} must be even and at least 16", self.n)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(bad("beta out of (0,1)"));
        }
        if let KChoice::Value(k) = self.k {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(bad("k must be a non-negative number or \"auto\""));
            }
        }
        if self.eps_ladder.is_empty() {
            return Err(bad("eps_ladder must not be empty"));
        }
        if self.eps_ladder.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(bad("eps_ladder entries must be positive"));
        }
        if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("eps_ladder must be strictly decreasing"));
        }
        if self.divisor.is_empty() {
            return Err(bad("divisor: at least one point required"));
        }
        for p in &self.divisor {
            finite("divisor", p[0])?;
            finite("divisor", p[1])?;
        }
        let domain = self.domain()?;
        let pts = self.points();
        for (a, &p) in pts.iter().enumerate() {
            for &q in &pts[a + 1..] {
                if domain.distance(p, q) < 1e-12 {
                    return Err(bad("divisor points must be distinct"));
                }
            }
        }
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(bad("a0 must be positive"));
        }
        if let Some(tw) = &self.rho_twist {
            finite("rho_twist.amplitude", tw.amplitude)?;
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(bad("T_end must be positive"));
        }
        if !(self.dt_out > 0.0 && self.dt_out <= self.t_end) {
            return Err(bad("dt_out must lie in (0, T_end]"));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(bad("cfl must be positive"));
        }
        if !(self.delta_mask >= 0.0 && self.delta_mask.is_finite()) {
            return Err(bad("delta_mask must be non-negative"));
        }
        self.integrator_kind()?;
        Ok(())
    }

    pub fn integrator_kind(&self) -> Result<Integrator> {
        self.integrator
            .parse()
            .map_err(|_| bad(format!("integrator: unknown scheme {:?}", self.integrator)))
    }

    pub fn domain(&self) -> Result<TorusDomain> {
        TorusDomain::new(Complex64::new(self.tau[0], self.tau[1]), self.n)
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.divisor.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn geometry(&self) -> Result<Arc<ConeGeometry>> {
        let domain = self.domain()?;
        let divisor = DivisorSpec::new(self.points(), self.beta)?;
        let rho = self.rho_twist.map(|tw| {
            let (p, q) = (tw.mode[0] as f64, tw.mode[1] as f64);
            domain.sample(|x, y| tw.amplitude * (2.0 * PI * (p * x + q * y)).cos())
        });
        Ok(Arc::new(ConeGeometry::build(domain, divisor, self.a0, rho)?))
    }

    /// The value of `k`, resolving `"auto"` against the whole ladder.
    pub fn resolve_k(&self, geom: &ConeGeometry) -> Result<f64> {
        match self.k {
            KChoice::Value(k) => Ok(k),
            KChoice::Named(KWord::Auto) => Ok(suggest_k(geom, &self.eps_ladder)?.sufficient),
        }
    }

    pub fn plan(&self, eps_list: Vec<f64>) -> Result<LadderPlan> {
        LadderPlan::new(eps_list, self.t_end, self.dt_out, self.cfl, self.integrator_kind()?)
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml(&text)
}
