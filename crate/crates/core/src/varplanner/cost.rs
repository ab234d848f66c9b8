use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatmodel::ReducedFlatParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Minimize the sixth derivative only; gives the 11th-degree polynomial.
    Polynomial,
    /// Also penalize the squared feed-forward torque, weighted by `r^8`.
    MinControlEffort,
    /// Also penalize the squared flat acceleration (passive spring energy), weighted by `p^8`.
    MinPotentialEnergy,
    /// Both penalties together.
    Mixed,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Polynomial,
        StrategyKind::MinControlEffort,
        StrategyKind::MinPotentialEnergy,
        StrategyKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Polynomial => "polynomial",
            StrategyKind::MinControlEffort => "min_control_effort",
            StrategyKind::MinPotentialEnergy => "min_potential_energy",
            StrategyKind::Mixed => "mixed",
        }
    }

    fn uses_torque(self) -> bool {
        matches!(self, StrategyKind::MinControlEffort | StrategyKind::Mixed)
    }

    fn uses_potential(self) -> bool {
        matches!(self, StrategyKind::MinPotentialEnergy | StrategyKind::Mixed)
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "polynomial" | "poly" => Ok(StrategyKind::Polynomial),
            "min_control_effort" | "min_control" | "control" => Ok(StrategyKind::MinControlEffort),
            "min_potential_energy" | "min_potential" | "potential" => {
                Ok(StrategyKind::MinPotentialEnergy)
            }
            "mixed" => Ok(StrategyKind::Mixed),
            other => Err(Error::InvalidStrategy(format!("unknown strategy '{other}'"))),
        }
    }
}

/// A planning strategy and its weighting factors.
///
/// The weights enter the cost as `r^8` and `p^8`, which keeps useful values of
/// `r` and `p` in a human-friendly range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_r() -> f64 {
    150.0
}

fn default_p() -> f64 {
    17.0
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self::polynomial()
    }
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, r: f64, p: f64) -> Self {
        Self { kind, r, p }
    }

    pub fn polynomial() -> Self {
        Self::new(StrategyKind::Polynomial, default_r(), default_p())
    }

    pub fn min_control_effort(r: f64) -> Self {
        Self::new(StrategyKind::MinControlEffort, r, default_p())
    }

    pub fn min_potential_energy(p: f64) -> Self {
        Self::new(StrategyKind::MinPotentialEnergy, default_r(), p)
    }

    pub fn mixed(r: f64, p: f64) -> Self {
        Self::new(StrategyKind::Mixed, r, p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("p", self.p)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidStrategy(format!(
                    "weighting factor {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric positive-semidefinite weighting of the flat-output derivatives
/// of order 1..=6. The integrand of the cost is `0.5 * v^T Q v` with
/// `v = [y', y'', ..., y^(6)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    q: Matrix6<f64>,
}

impl QuadraticCost {
    pub fn new(q: Matrix6<f64>) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStrategy("cost matrix has non-finite entries".into()));
        }
        let scale = q.amax().max(f64::MIN_POSITIVE);
        if (q - q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidStrategy("cost matrix is not symmetric".into()));
        }
        let min_eig = q.symmetric_eigenvalues().min();
        if min_eig < -1e-9 * scale {
            return Err(Error::InvalidStrategy(format!(
                "cost matrix is not positive-semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { q })
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.q
    }

    /// Entry `q_ij` indexed by derivative orders `i, j` in `1..=6`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.q[(i - 1, j - 1)]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.q * factor)
    }

    /// Integrand `0.5 * v^T Q v` for derivatives `d[1..=6]`.
    pub fn integrand(&self, d: &[f64; 7]) -> f64 {
        let v = Vector6::from_column_slice(&d[1..7]);
        0.5 * v.dot(&(self.q * v))
    }
}

/// Quadratic cost matching a planning strategy.
///
/// The torque penalty is assembled as `r^8 g g^T` with
/// `g = [0, a, 0, b, -e, 0]` the torque gains, so the mixed terms
/// `q42`, `q52`, `q54` come out of the outer product.
pub fn cost_from_strategy(spec: &StrategySpec, params: &ReducedFlatParams) -> Result<QuadraticCost> {
    spec.validate()?;
    params.validate()?;
    let mut q = Matrix6::zeros();
    q[(5, 5)] = 1.0;
    if spec.kind.uses_torque() {
        let [a, b, e] = params.torque_gains();
        let g = Vector6::new(0.0, a, 0.0, b, -e, 0.0);
        q += g * g.transpose() * spec.r.powi(8);
    }
    if spec.kind.uses_potential() {
        q[(1, 1)] += spec.p.powi(8);
    }
    QuadraticCost::new(q)
}

/// Coefficients `c[m]` of `sum_m c[m] y^(m) = 0`, for `m = 0..=12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeCoefficients {
    pub c: [f64; 13],
}

impl OdeCoefficients {
    pub fn order(&self) -> usize {
        self.c.iter().rposition(|&v| v != 0.0).unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_m c[m] * d[m]` together with the largest single term magnitude.
    pub fn residual(&self, d: &[f64; 13]) -> (f64, f64) {
        self.c
            .iter()
            .zip(d)
            .fold((0.0, 0.0), |(sum, big), (c, d)| (sum + c * d, f64::max(big, (c * d).abs())))
    }
}

/// Euler-Lagrange equation of the quadratic cost.
///
/// Expanding `sum_k (-1)^k d^k/dt^k (dL/dy^(k)) = 0` for
/// `L = 0.5 sum_ij q_ij y^(i) y^(j)` collects `c[m] = sum_{i+j=m} (-1)^i q_ij`.
/// Pairs `(i, j)` and `(j, i)` are combined before summing so that every odd
/// order cancels exactly.
pub fn ele_ode(cost: &QuadraticCost) -> Result<OdeCoefficients> {
    if cost.entry(6, 6) <= 0.0 {
        return Err(Error::OrderCollapse);
    }
    let mut c = [0.0; 13];
    for (m, cm) in c.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 1..=6usize {
            let Some(j) = m.checked_sub(i) else { break };
            if j < i || j > 6 {
                continue;
            }
            let sign_i = if i % 2 == 0 { 1.0 } else { -1.0 };
            if i == j {
                acc += sign_i * cost.entry(i, i);
            } else {
                let sign_j = if j % 2 == 0 { 1.0 } else { -1.0 };
                let sym = 0.5 * (cost.entry(i, j) + cost.entry(j, i));
                acc += (sign_i + sign_j) * sym;
            }
        }
        *cm = acc;
    }
    if c[12] < 0.0 {
        c.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(OdeCoefficients { c })
}
