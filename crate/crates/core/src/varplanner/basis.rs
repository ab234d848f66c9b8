use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::RootSet;
use crate::error::{Error, Result};
use crate::flatmodel::FlatBoundaryConditions;

/// Largest `|beta - center| * T / 2` allowed inside one root cluster.
///
/// Roots closer than this give nearly collinear exponentials over the motion,
/// so they share a divided-difference basis instead.
pub const CLUSTER_REACH: f64 = 2.0;

/// Highest derivative order the Taylor truncation is sized for.
const SERIES_ORDER: i32 = 12;
const SERIES_TOL: f64 = 1e-20;
const MAX_SERIES_LEN: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Re,
    Im,
}

/// Characteristic roots `center + offsets[i]` handled together.
///
/// Function `k` of the cluster is
/// `exp(c (t - anchor)) * D_k(t - expansion_point)`, where `D_k(s)` is the
/// divided difference of `z -> exp(z s)` over `offsets[0..=k]`. `D_k` is
/// summed as a Taylor series in `s`, which stays accurate when offsets
/// coincide or nearly do; for an isolated root the function is a plain
/// exponential, and for a repeated root it is `s^k / k!` times one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCluster {
    pub center: [f64; 2],
    pub offsets: Vec<[f64; 2]>,
    pub anchor: f64,
    /// Taylor terms kept past the leading one.
    pub series_len: usize,
}

/// Real basis function: one part of one cluster function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub cluster: usize,
    pub index: usize,
    pub part: Part,
}

/// Twelve real functions spanning the solutions of the Euler-Lagrange ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub clusters: Vec<RootCluster>,
    pub terms: Vec<BasisTerm>,
    /// Midpoint of the motion; the divided differences are expanded about it.
    pub expansion_point: f64,
}

fn cplx(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

impl RootCluster {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Derivatives of order `0..N` of every cluster function at `t`.
    pub fn derivatives<const N: usize>(&self, t: f64, expansion_point: f64) -> Vec<[Complex64; N]> {
        let m = self.offsets.len();
        let len = self.series_len;
        let c = cplx(self.center);
        let s = t - expansion_point;

        // s^i / i!
        let mut pw = vec![0.0; m + len];
        let mut acc = 1.0;
        for (i, p) in pw.iter_mut().enumerate() {
            if i > 0 {
                acc *= s / i as f64;
            }
            *p = acc;
        }
        let mut c_pow = [Complex64::new(1.0, 0.0); N];
        for n in 1..N {
            c_pow[n] = c_pow[n - 1] * c;
        }
        let e = (c * (t - self.anchor)).exp();

        // complete homogeneous symmetric polynomials h_j(offsets[0..=k]), row by row
        let zero = Complex64::new(0.0, 0.0);
        let mut h_prev = vec![zero; len + 1];
        h_prev[0] = Complex64::new(1.0, 0.0);
        let mut h = vec![zero; len + 1];

        let mut out = Vec::with_capacity(m);
        for (k, off) in self.offsets.iter().enumerate() {
            let delta = cplx(*off);
            h[0] = Complex64::new(1.0, 0.0);
            for j in 1..=len {
                h[j] = h_prev[j] + delta * h[j - 1];
            }
            // d-th derivative of D_k: sum_j s^(k+j-d)/(k+j-d)! h_j
            let mut dd = [zero; N];
            for (d, slot) in dd.iter_mut().enumerate() {
                let mut sum = zero;
                for (j, hj) in h.iter().enumerate() {
                    if k + j >= d {
                        sum += hj * pw[k + j - d];
                    }
                }
                *slot = sum;
            }
            let mut row = [zero; N];
            for (n, slot) in row.iter_mut().enumerate() {
                let mut sum = zero;
                let mut binom = 1.0;
                for d in 0..=n {
                    if d > 0 {
                        binom = binom * (n + 1 - d) as f64 / d as f64;
                    }
                    sum += c_pow[n - d] * dd[d] * binom;
                }
                *slot = sum * e;
            }
            out.push(row);
            std::mem::swap(&mut h_prev, &mut h);
        }
        out
    }
}

impl Basis {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Complex derivatives of order `0..N` of every cluster function.
    pub fn cluster_derivatives<const N: usize>(&self, t: f64) -> Vec<Vec<[Complex64; N]>> {
        self.clusters
            .iter()
            .map(|c| c.derivatives::<N>(t, self.expansion_point))
            .collect()
    }

    /// Derivatives of order `0..N` of every basis term at `t`.
    pub fn derivatives<const N: usize>(&self, t: f64) -> Vec<[f64; N]> {
        let all = self.cluster_derivatives::<N>(t);
        self.terms
            .iter()
            .map(|term| {
                let d = &all[term.cluster][term.index];
                match term.part {
                    Part::Re => d.map(|v| v.re),
                    Part::Im => d.map(|v| v.im),
                }
            })
            .collect()
    }
}

/// Taylor terms needed so the truncation error of every derivative up to
/// `SERIES_ORDER` stays far below the leading term, for offsets within
/// `reach / half` of the center.
fn series_len(reach: f64, half: f64, nodes: usize) -> usize {
    let r = reach * half;
    if r == 0.0 {
        return 0;
    }
    let mut bound = 1.0;
    for j in 1..=MAX_SERIES_LEN {
        bound *= r / j as f64;
        if bound * ((nodes + j) as f64).powi(SERIES_ORDER) < SERIES_TOL {
            return j;
        }
    }
    MAX_SERIES_LEN
}

struct Nodes {
    values: Vec<Complex64>,
    mirror: Vec<usize>,
}

/// Roots expanded by multiplicity, each paired with its conjugate copy.
fn expand(roots: &RootSet) -> Result<Nodes> {
    let mut values = Vec::with_capacity(12);
    let mut mirror = Vec::with_capacity(12);
    for root in &roots.roots {
        if root.im < 0.0 {
            let partner = roots
                .roots
                .iter()
                .any(|r| r.re == root.re && r.im == -root.im && r.multiplicity == root.multiplicity);
            if !partner {
                return Err(Error::RootClustering(format!(
                    "root {} {}i has no conjugate partner",
                    root.re, root.im
                )));
            }
            continue;
        }
        for _ in 0..root.multiplicity {
            let i = values.len();
            if root.im == 0.0 {
                values.push(Complex64::new(root.re, 0.0));
                mirror.push(i);
            } else {
                values.push(Complex64::new(root.re, root.im));
                values.push(Complex64::new(root.re, -root.im));
                mirror.push(i + 1);
                mirror.push(i);
            }
        }
    }
    Ok(Nodes { values, mirror })
}

fn radius(nodes: &Nodes, members: &[usize]) -> f64 {
    let center = members.iter().map(|&i| nodes.values[i]).sum::<Complex64>() / members.len() as f64;
    members
        .iter()
        .map(|&i| (nodes.values[i] - center).norm())
        .fold(0.0, f64::max)
}

fn mirror_cluster(nodes: &Nodes, clusters: &[Vec<usize>], idx: usize) -> usize {
    let probe = nodes.mirror[clusters[idx][0]];
    clusters
        .iter()
        .position(|c| c.contains(&probe))
        .expect("every node belongs to a cluster")
}

/// Agglomerates roots into clusters of radius at most `limit`, keeping the
/// clustering symmetric under conjugation.
fn agglomerate(nodes: &Nodes, limit: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..nodes.values.len()).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let (ma, mb) = (mirror_cluster(nodes, &clusters, a), mirror_cluster(nodes, &clusters, b));
                let mut union: Vec<usize> = clusters[a].iter().chain(&clusters[b]).copied().collect();
                if ma == a || mb == b || ma == b {
                    union.extend(clusters[ma].iter().chain(&clusters[mb]));
                    union.sort_unstable();
                    union.dedup();
                }
                let r = radius(nodes, &union);
                if best.is_none_or(|(br, _, _)| r < br) {
                    best = Some((r, a, b));
                }
            }
        }
        let Some((r, a, b)) = best else { break };
        if r > limit {
            break;
        }
        let (ma, mb) = (mirror_cluster(nodes, &clusters, a), mirror_cluster(nodes, &clusters, b));
        let mut groups = vec![vec![a, b]];
        if ma == a || mb == b || ma == b {
            groups[0].extend([ma, mb]);
        } else {
            groups.push(vec![ma, mb]);
        }
        let mut merged = Vec::new();
        let mut used = Vec::new();
        for g in groups {
            let mut set: Vec<usize> = g.iter().flat_map(|&i| clusters[i].clone()).collect();
            set.sort_unstable();
            set.dedup();
            used.extend(g);
            merged.push(set);
        }
        used.sort_unstable();
        used.dedup();
        for i in used.into_iter().rev() {
            clusters.remove(i);
        }
        clusters.extend(merged);
    }
    clusters
}

/// Twelve real basis functions for the ODE with these roots.
///
/// Roots within `2 * CLUSTER_REACH / T` of each other are grouped. A cluster
/// closed under conjugation has a real center; its roots are ordered with
/// each complex root followed by its conjugate, which makes every function
/// real once the conjugate is included, so the real parts form the basis. A
/// cluster that is not closed under conjugation contributes the real and
/// imaginary parts of its functions, and its mirror image is dropped.
pub fn build_basis(roots: &RootSet, bounds: &FlatBoundaryConditions) -> Result<Basis> {
    let nodes = expand(roots)?;
    let half = 0.5 * bounds.duration();
    let clusters = agglomerate(&nodes, CLUSTER_REACH / half);

    let mut out: Vec<RootCluster> = Vec::new();
    let mut terms = Vec::with_capacity(12);
    let mut kept: Vec<(Complex64, Vec<usize>, bool)> = Vec::new();
    for (idx, members) in clusters.iter().enumerate() {
        let self_conjugate = mirror_cluster(&nodes, &clusters, idx) == idx;
        let mut center = members.iter().map(|&i| nodes.values[i]).sum::<Complex64>() / members.len() as f64;
        if self_conjugate {
            center.im = 0.0;
        } else if center.im < 0.0 {
            continue;
        }
        kept.push((center, members.clone(), self_conjugate));
    }
    kept.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));

    for (center, members, self_conjugate) in kept {
        let key = |i: &usize| {
            let d = nodes.values[*i] - center;
            (d.norm(), d.re, d.im)
        };
        let mut order: Vec<usize> = if self_conjugate {
            // real roots and upper members of pairs, each pair completed by its conjugate
            let mut units: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| nodes.values[i].im >= 0.0 && (nodes.values[i].im > 0.0 || nodes.mirror[i] == i))
                .collect();
            units.sort_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite roots"));
            units
                .into_iter()
                .flat_map(|i| if nodes.mirror[i] == i { vec![i] } else { vec![i, nodes.mirror[i]] })
                .collect()
        } else {
            members.clone()
        };
        if !self_conjugate {
            order.sort_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite roots"));
        }
        let offsets: Vec<[f64; 2]> = order
            .iter()
            .map(|&i| {
                let d = nodes.values[i] - center;
                [d.re, d.im]
            })
            .collect();
        let reach = offsets.iter().map(|o| cplx(*o).norm()).fold(0.0, f64::max);
        let anchor = if center.re > 0.0 { bounds.t_end } else { bounds.t_start };
        let cluster = out.len();
        for index in 0..offsets.len() {
            if self_conjugate {
                terms.push(BasisTerm { cluster, index, part: Part::Re });
            } else {
                terms.push(BasisTerm { cluster, index, part: Part::Re });
                terms.push(BasisTerm { cluster, index, part: Part::Im });
            }
        }
        out.push(RootCluster {
            center: [center.re, center.im],
            series_len: series_len(reach, half, offsets.len()),
            offsets,
            anchor,
        });
    }

    if terms.len() != nodes.values.len() {
        return Err(Error::RootClustering(format!(
            "clustering produced {} basis functions for {} roots",
            terms.len(),
            nodes.values.len()
        )));
    }
    Ok(Basis {
        clusters: out,
        terms,
        expansion_point: bounds.t_start + half,
    })
}
