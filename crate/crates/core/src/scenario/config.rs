use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::dynsim::SimConfig;
use crate::error::{Error, Result};
use crate::flatmodel::{flat_boundaries_from_joint, FlatBoundaryConditions, ReducedFlatParams};
use crate::varplanner::{StrategyKind, StrategySpec};

/// An angle given either as a number or as a multiple of pi such as `"pi"`,
/// `"-pi/2"` or `"3*pi/4"`. The textual form is kept for re-serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Angle {
    pub value: f64,
    pub expr: Option<String>,
}

impl Angle {
    pub fn rad(value: f64) -> Self {
        Self { value, expr: None }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value = parse_pi_expr(text)
            .ok_or_else(|| Error::Config(format!("cannot parse angle '{text}'")))?;
        Ok(Self {
            value,
            expr: Some(text.to_string()),
        })
    }
}

fn parse_pi_expr(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.to_ascii_lowercase();
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, Some(d.parse::<f64>().ok()?)),
        None => (body, None),
    };
    let numerator = if let Some(factor) = num.strip_suffix("pi") {
        let factor = factor.strip_suffix('*').unwrap_or(factor);
        let k = if factor.is_empty() { 1.0 } else { factor.parse::<f64>().ok()? };
        k * std::f64::consts::PI
    } else {
        num.parse::<f64>().ok()?
    };
    let value = match den {
        Some(d) if d != 0.0 => numerator / d,
        Some(_) => return None,
        None => numerator,
    };
    let value = if negative { -value } else { value };
    value.is_finite().then_some(value)
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.expr {
            Some(e) => serializer.serialize_str(e),
            None => serializer.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct AngleVisitor;

        impl Visitor<'_> for AngleVisitor {
            type Value = Angle;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number of radians or an expression like \"pi/2\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Angle, E> {
                Ok(Angle::rad(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Angle, E> {
                Ok(Angle::rad(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Angle, E> {
                Ok(Angle::rad(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Angle, E> {
                Angle::parse(v).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(AngleVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    #[serde(rename = "i1_star_kgm2")]
    pub i1_star: f64,
    #[serde(rename = "i2_star_kgm2")]
    pub i2_star: f64,
    #[serde(rename = "k2_Nm_per_rad")]
    pub k2: f64,
    #[serde(rename = "c2_Nms_per_rad")]
    pub c2: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        let p = ReducedFlatParams::reference_robot();
        Self {
            i1_star: p.i_star_prev,
            i2_star: p.i_star_last,
            k2: p.stiffness,
            c2: p.damping,
        }
    }
}

impl RobotConfig {
    pub fn params(&self) -> Result<ReducedFlatParams> {
        ReducedFlatParams::new(self.i1_star, self.i2_star, self.k2, self.c2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    #[serde(rename = "t_i_s")]
    pub t_i: f64,
    #[serde(rename = "t_f_s")]
    pub t_f: f64,
    #[serde(rename = "q1_i_rad")]
    pub q1_i: Angle,
    #[serde(rename = "q2_i_rad")]
    pub q2_i: Angle,
    #[serde(rename = "q1_f_rad")]
    pub q1_f: Angle,
    #[serde(rename = "q2_f_rad")]
    pub q2_f: Angle,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            t_i: 0.0,
            t_f: 1.0,
            q1_i: Angle::rad(0.0),
            q2_i: Angle::rad(0.0),
            q1_f: Angle::parse("pi").expect("literal"),
            q2_f: Angle::rad(0.0),
        }
    }
}

impl MotionConfig {
    pub fn bounds(&self) -> Result<FlatBoundaryConditions> {
        flat_boundaries_from_joint(
            self.q1_i.value,
            self.q2_i.value,
            self.q1_f.value,
            self.q2_f.value,
            self.t_i,
            self.t_f,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "t_free_s")]
    pub t_free: f64,
    pub k_scale: f64,
    pub c_scale: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimConfig::default().into()
    }
}

impl From<SimConfig> for SimSection {
    fn from(c: SimConfig) -> Self {
        Self {
            dt: c.dt,
            t_free: c.t_free,
            k_scale: c.k_scale,
            c_scale: c.c_scale,
        }
    }
}

impl From<SimSection> for SimConfig {
    fn from(s: SimSection) -> Self {
        Self {
            dt: s.dt,
            t_free: s.t_free,
            k_scale: s.k_scale,
            c_scale: s.c_scale,
        }
    }
}

/// Complete description of one plan / simulate / evaluate run.
///
/// Every section has defaults: the reference robot, a rest-to-rest move of
/// the actuated joint from 0 to pi in one second, polynomial planning
/// (`r = 150`, `p = 17` when used), `dt = 1e-4 s` and one second of free
/// response on the nominal plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub robot: RobotConfig,
    pub motion: MotionConfig,
    pub strategy: StrategySpec,
    pub sim: SimSection,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.params()?;
        self.motion.bounds()?;
        self.strategy.validate()?;
        SimConfig::from(self.sim).validate()
    }

    pub fn with_strategy(mut self, kind: StrategyKind) -> Self {
        self.strategy.kind = kind;
        self
    }
}
