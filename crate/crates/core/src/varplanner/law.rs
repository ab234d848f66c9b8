use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::{build_basis, Basis};
use super::cost::{cost_from_strategy, ele_ode, OdeCoefficients, QuadraticCost, StrategySpec};
use super::roots::characteristic_roots;
use crate::error::{Error, Result};
use crate::flatmodel::{FlatBoundaryConditions, FlatSample, ReducedFlatParams};

/// Boundary systems with a larger (equilibrated) condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Number of grid points used by [`cost_value`].
pub const COST_QUADRATURE_POINTS: usize = 2001;

/// Analytic flat-output trajectory solving the Euler-Lagrange ODE between two
/// sets of boundary conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionLaw {
    pub basis: Basis,
    pub coeffs: Vec<f64>,
    pub bounds: FlatBoundaryConditions,
    pub ode: OdeCoefficients,
    /// 2-norm condition number of the row/column equilibrated boundary system.
    pub condition_number: f64,
    /// Largest boundary-condition mismatch, relative to the largest boundary value.
    pub bc_residual: f64,
}

impl MotionLaw {
    /// Sum of coefficient-weighted basis derivatives of order `0..N`.
    /// No clamping to the motion interval.
    pub fn raw_derivatives<const N: usize>(&self, t: f64) -> [f64; N] {
        let mut out = [0.0; N];
        for (d, c) in self.basis.derivatives::<N>(t).into_iter().zip(&self.coeffs) {
            for (o, v) in out.iter_mut().zip(d) {
                *o += c * v;
            }
        }
        out
    }

    /// Flat output and derivatives 0..=6 at `t`. Outside the motion interval
    /// the law holds the nearest boundary value with zero derivatives.
    pub fn eval(&self, t: f64) -> FlatSample {
        let b = &self.bounds;
        if t < b.t_start {
            return FlatSample::unit(0, b.y_start());
        }
        if t > b.t_end {
            return FlatSample::unit(0, b.y_end());
        }
        FlatSample::new(self.raw_derivatives::<7>(t))
    }

    /// Largest Euler-Lagrange residual `|sum_m c_m y^(m)|` of the planned
    /// law on a `points`-sample grid, relative to its largest term on the grid.
    pub fn ode_residual(&self, points: usize) -> f64 {
        let (t0, t1) = (self.bounds.t_start, self.bounds.t_end);
        let (mut worst, mut big) = (0.0f64, 0.0f64);
        for i in 0..points {
            let t = t0 + (t1 - t0) * i as f64 / (points - 1) as f64;
            let d = self.raw_derivatives::<13>(t);
            let sum: f64 = self.ode.c.iter().zip(&d).map(|(c, v)| c * v).sum();
            worst = worst.max(sum.abs());
            big = self.ode.c.iter().zip(&d).fold(big, |m, (c, v)| m.max((c * v).abs()));
        }
        if big > 0.0 {
            worst / big
        } else {
            0.0
        }
    }
}

pub fn eval_motion_law(law: &MotionLaw, t: f64) -> FlatSample {
    law.eval(t)
}

/// Solves the 12x12 collocation system for the basis coefficients.
///
/// Rows are derivatives of order 0..=5 at the start, then at the end. The
/// system is equilibrated by rows and columns before a full-pivot LU solve,
/// followed by two steps of iterative refinement.
pub fn solve_motion_law(
    basis: Basis,
    bounds: &FlatBoundaryConditions,
    ode: OdeCoefficients,
) -> Result<MotionLaw> {
    bounds.validate()?;
    if basis.len() != 12 {
        return Err(Error::RootClustering(format!(
            "expected 12 basis terms, got {}",
            basis.len()
        )));
    }

    let mut a = DMatrix::<f64>::zeros(12, 12);
    let (start, end) = (basis.derivatives::<6>(bounds.t_start), basis.derivatives::<6>(bounds.t_end));
    for (j, (d0, d1)) in start.iter().zip(&end).enumerate() {
        for m in 0..6 {
            a[(m, j)] = d0[m];
            a[(6 + m, j)] = d1[m];
        }
    }
    let rhs = DVector::from_row_slice(&bounds.values());

    let col_scale: Vec<f64> = (0..12)
        .map(|j| inverse_or_one(a.column(j).amax()))
        .collect();
    let mut scaled = a.clone();
    for (j, s) in col_scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let row_scale: Vec<f64> = (0..12).map(|i| inverse_or_one(scaled.row(i).amax())).collect();
    for (i, s) in row_scale.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*s);
    }
    let scaled_rhs = DVector::from_fn(12, |i, _| rhs[i] * row_scale[i]);

    let singular = scaled.singular_values();
    let condition = singular.max() / singular.min();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        });
    }

    let lu = scaled.clone().full_piv_lu();
    let mut y = lu.solve(&scaled_rhs).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
        limit: MAX_CONDITION,
    })?;
    for _ in 0..2 {
        let r = &scaled_rhs - &scaled * &y;
        if let Some(dy) = lu.solve(&r) {
            y += dy;
        }
    }
    let coeffs: Vec<f64> = y.iter().zip(&col_scale).map(|(v, s)| v * s).collect();

    let mut law = MotionLaw {
        basis,
        coeffs,
        bounds: *bounds,
        ode,
        condition_number: condition,
        bc_residual: 0.0,
    };
    law.bc_residual = boundary_residual(&law);
    Ok(law)
}

fn inverse_or_one(v: f64) -> f64 {
    if v > 0.0 {
        1.0 / v
    } else {
        1.0
    }
}

/// Largest mismatch of the 12 boundary conditions, relative to the largest
/// boundary value (absolute when all boundary values vanish).
pub fn boundary_residual(law: &MotionLaw) -> f64 {
    let b = &law.bounds;
    let d0 = law.raw_derivatives::<6>(b.t_start);
    let d1 = law.raw_derivatives::<6>(b.t_end);
    let target = b.values();
    let scale = target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    d0.iter()
        .chain(&d1)
        .zip(&target)
        .fold(0.0f64, |m, (got, want)| m.max((got - want).abs()))
        / scale
}

/// Plans the flat output for a strategy: cost, Euler-Lagrange ODE, roots,
/// basis and boundary solve.
pub fn plan(
    spec: &StrategySpec,
    params: &ReducedFlatParams,
    bounds: &FlatBoundaryConditions,
) -> Result<MotionLaw> {
    let cost = cost_from_strategy(spec, params)?;
    plan_for_cost(&cost, bounds)
}

pub fn plan_for_cost(cost: &QuadraticCost, bounds: &FlatBoundaryConditions) -> Result<MotionLaw> {
    let ode = ele_ode(cost)?;
    let roots = characteristic_roots(&ode)?;
    let basis = build_basis(&roots, bounds)?;
    solve_motion_law(basis, bounds, ode)
}

/// Composite Simpson quadrature of `0.5 v^T Q v` over `[t_start, t_end]` for
/// an arbitrary flat trajectory given by its derivatives.
pub fn integrate_cost<F>(cost: &QuadraticCost, t_start: f64, t_end: f64, points: usize, f: F) -> f64
where
    F: Fn(f64) -> [f64; 7],
{
    // Simpson needs an odd number of points
    let points = if points % 2 == 0 { points + 1 } else { points }.max(3);
    let n = points - 1;
    let h = (t_end - t_start) / n as f64;
    let sum: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * cost.integrand(&f(t_start + h * i as f64))
        })
        .sum();
    sum * h / 3.0
}

pub fn cost_value(law: &MotionLaw, cost: &QuadraticCost) -> f64 {
    let b = &law.bounds;
    integrate_cost(cost, b.t_start, b.t_end, COST_QUADRATURE_POINTS, |t| {
        law.raw_derivatives::<7>(t)
    })
}
