use nalgebra::linalg::balancing;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cost::OdeCoefficients;
use crate::error::{Error, Result};

/// Trailing coefficients below this fraction of the largest one count as exact zeros.
pub const ZERO_COEFF_TOL: f64 = 1e-12;
/// Relative distance under which numerically computed roots are merged.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Relative back-substitution residual every clustered root must satisfy.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

impl Root {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Roots of the characteristic polynomial with multiplicities.
///
/// Complex roots are listed with both members of each conjugate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn zero_multiplicity(&self) -> usize {
        self.roots
            .iter()
            .filter(|r| r.re == 0.0 && r.im == 0.0)
            .map(|r| r.multiplicity)
            .sum()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.re != 0.0 || r.im != 0.0)
    }
}

/// Horner evaluation of `sum_k a[k] z^k` together with `sum_k |a[k]| |z|^k`.
fn eval_poly(ascending: &[f64], z: Complex64) -> (Complex64, f64) {
    let r = z.norm();
    ascending.iter().rev().fold((Complex64::new(0.0, 0.0), 0.0), |(acc, mag), &a| {
        (acc * z + a, mag * r + a.abs())
    })
}

fn eval_poly_derivative(ascending: &[f64], z: Complex64) -> Complex64 {
    ascending
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (k, &a)| acc * z + a * k as f64)
}

/// Eigenvalues of the companion matrix of a monic polynomial given in ascending order.
///
/// The companion matrix is already upper Hessenberg, so after balancing it goes
/// straight into the shifted QR iteration.
fn companion_eigenvalues(monic: &[f64]) -> Result<Vec<Complex64>> {
    let n = monic.len() - 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -monic[i];
    }
    balancing::balance_parlett_reinsch(&mut m);
    hessenberg_eigenvalues(&m).ok_or_else(|| {
        Error::RootClustering("QR iteration on the companion matrix did not converge".into())
    })
}

/// Francis double-shift QR iteration on an upper Hessenberg matrix (the
/// EISPACK `hqr` scheme). Returns `None` if a block fails to deflate.
fn hessenberg_eigenvalues(h: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    const MAX_ITS: usize = 60;
    let n = h.nrows();
    // 1-based copy keeps the index arithmetic of the classic formulation
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = n as isize;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
            } else {
                let mut y = a[nu - 1][nu - 1];
                let mut w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nu - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != 0.0 {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = 0.0;
                        wi[nu] = 0.0;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS {
                        return None;
                    }
                    if its == 10 || its == 20 || its == 40 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nu {
                            a[i][i] -= x;
                        }
                        let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;

                    let (mut p, mut q, mut r);
                    let mut m = nu - 2;
                    loop {
                        let z = a[m][m];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - rr - ss;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nu {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    for k in m..nu {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = if k != nu - 1 { a[k + 2][k - 1] } else { 0.0 };
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                let mut pp = a[k][j] + q * a[k + 1][j];
                                if k != nu - 1 {
                                    pp += r * a[k + 2][j];
                                    a[k + 2][j] -= pp * z;
                                }
                                a[k + 1][j] -= pp * y;
                                a[k][j] -= pp * x;
                            }
                            let mmin = nu.min(k + 3);
                            for i in l..=mmin {
                                let mut pp = x * a[i][k] + y * a[i][k + 1];
                                if k != nu - 1 {
                                    pp += z * a[i][k + 2];
                                    a[i][k + 2] -= pp * r;
                                }
                                a[i][k + 1] -= pp * q;
                                a[i][k] -= pp;
                            }
                        }
                    }
                }
            }
            if nn < 1 || (l as isize) >= nn - 1 {
                break;
            }
        }
    }
    Some((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

fn newton_polish(ascending: &[f64], z0: Complex64) -> Complex64 {
    let mut z = z0;
    let (mut best, _) = eval_poly(ascending, z);
    for _ in 0..8 {
        let d = eval_poly_derivative(ascending, z);
        if d.norm() == 0.0 {
            break;
        }
        let (f, _) = eval_poly(ascending, z);
        let next = z - f / d;
        let (fn_, _) = eval_poly(ascending, next);
        if fn_.norm() >= best.norm() {
            break;
        }
        best = fn_;
        z = next;
    }
    z
}

/// Roots of `sum_m c[m] s^m` with multiplicities.
///
/// The zero root is split off exactly by stripping negligible low-order
/// coefficients; the rest come from the companion matrix, are merged into
/// multiplicity groups and conjugate pairs, and then polished by Newton steps.
pub fn characteristic_roots(ode: &OdeCoefficients) -> Result<RootSet> {
    let degree = ode.order();
    if ode.c[degree] == 0.0 {
        return Err(Error::RootClustering("characteristic polynomial is identically zero".into()));
    }
    let scale = ode.max_abs();
    let zeros = ode.c[..degree]
        .iter()
        .take_while(|v| v.abs() < ZERO_COEFF_TOL * scale)
        .count();

    let reduced: Vec<f64> = ode.c[zeros..=degree].to_vec();
    let lead = reduced[reduced.len() - 1];
    let monic: Vec<f64> = reduced.iter().map(|v| v / lead).collect();

    let mut roots = Vec::new();
    if zeros > 0 {
        roots.push(Root {
            re: 0.0,
            im: 0.0,
            multiplicity: zeros,
        });
    }
    if monic.len() > 1 {
        let raw = companion_eigenvalues(&monic)?;
        let groups = cluster(&raw);
        roots.extend(pair_conjugates(groups, &monic)?);
    }

    for root in roots.iter().filter(|r| r.multiplicity > 0) {
        let z = root.value();
        if z.norm() == 0.0 {
            continue;
        }
        let (f, mag) = eval_poly(&monic, z);
        if !(f.norm() <= ROOT_RESIDUAL_TOL * mag) {
            return Err(Error::RootClustering(format!(
                "root {z} has relative residual {:e}",
                f.norm() / mag
            )));
        }
    }

    roots.sort_by(|a, b| {
        a.re.total_cmp(&b.re)
            .then(a.im.total_cmp(&b.im))
    });
    let set = RootSet { roots };
    if set.total_multiplicity() != degree {
        return Err(Error::RootClustering(format!(
            "multiplicities sum to {} instead of {degree}",
            set.total_multiplicity()
        )));
    }
    Ok(set)
}

/// Greedy grouping of roots within `CLUSTER_TOL` of each other; returns (mean, count).
fn cluster(raw: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut groups: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
    for &z in raw {
        let found = groups.iter_mut().find(|(_, center)| {
            (z - *center).norm() <= CLUSTER_TOL * z.norm().max(center.norm())
        });
        match found {
            Some((members, center)) => {
                members.push(z);
                *center = members.iter().sum::<Complex64>() / members.len() as f64;
            }
            None => groups.push((vec![z], z)),
        }
    }
    groups.into_iter().map(|(m, c)| (c, m.len())).collect()
}

fn pair_conjugates(groups: Vec<(Complex64, usize)>, monic: &[f64]) -> Result<Vec<Root>> {
    let is_real = |z: Complex64| z.im.abs() <= CLUSTER_TOL * z.norm();
    let mut out = Vec::new();
    let mut lower: Vec<(Complex64, usize)> = Vec::new();

    for (z, m) in groups {
        if is_real(z) {
            let mut re = z.re;
            if m == 1 {
                re = newton_polish(monic, Complex64::new(re, 0.0)).re;
            }
            out.push(Root { re, im: 0.0, multiplicity: m });
        } else if z.im > 0.0 {
            let z = if m == 1 { newton_polish(monic, z) } else { z };
            out.push(Root { re: z.re, im: z.im, multiplicity: m });
            out.push(Root { re: z.re, im: -z.im, multiplicity: m });
        } else {
            lower.push((z, m));
        }
    }

    // every lower-half-plane group must mirror an upper one
    for (z, m) in lower {
        let matched = out.iter().any(|r| {
            r.im > 0.0
                && r.multiplicity == m
                && (r.value().conj() - z).norm() <= CLUSTER_TOL * z.norm()
        });
        if !matched {
            return Err(Error::RootClustering(format!(
                "root {z} (multiplicity {m}) has no conjugate partner"
            )));
        }
    }
    Ok(out)
}
