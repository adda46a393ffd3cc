//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls into the solvers under test.

#![allow(dead_code)]

use kpg_ot::{DiscreteDistribution, KeypointPairing};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum of `Σ_i cost[i, σ(i)]` over all permutations.
pub fn brute_force_assignment(cost: ArrayView2<f64>) -> f64 {
    fn go(k: usize, used: &mut Vec<bool>, acc: f64, cost: ArrayView2<f64>, best: &mut f64) {
        let n = cost.nrows();
        if k == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(k + 1, used, acc + cost[[k, j]], cost, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, &mut vec![false; cost.nrows()], 0.0, cost, &mut best);
    best
}

/// Dense two-phase tableau simplex with Bland's rule for
/// `min cᵀx  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0`.
/// Returns `None` when infeasible. Intended for a few dozen variables.
pub struct DenseLp {
    pub c: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ub: Vec<(Vec<f64>, f64)>,
}

impl DenseLp {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c, eq: Vec::new(), ub: Vec::new() }
    }

    pub fn solve(&self) -> Option<(f64, Vec<f64>)> {
        let nv = self.c.len();
        let nu = self.ub.len();
        // rows: ub rows get a slack; every row gets an artificial
        let rows: Vec<(Vec<f64>, f64, Option<usize>)> = self
            .ub
            .iter()
            .enumerate()
            .map(|(k, (a, b))| (a.clone(), *b, Some(k)))
            .chain(self.eq.iter().map(|(a, b)| (a.clone(), *b, None)))
            .collect();
        let nr = rows.len();
        let ncols = nv + nu + nr;
        let mut t = vec![vec![0.0; ncols + 1]; nr];
        for (r, (a, b, slack)) in rows.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for v in 0..nv {
                t[r][v] = sign * a[v];
            }
            if let Some(k) = slack {
                t[r][nv + k] = sign;
            }
            t[r][nv + nu + r] = 1.0;
            t[r][ncols] = sign * b;
        }
        let mut basis: Vec<usize> = (0..nr).map(|r| nv + nu + r).collect();

        let phase1: Vec<f64> = (0..ncols).map(|j| if j >= nv + nu { 1.0 } else { 0.0 }).collect();
        run_simplex(&mut t, &mut basis, &phase1, ncols, ncols);
        let infeas: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= nv + nu)
            .map(|(r, _)| t[r][ncols])
            .sum();
        if infeas > 1e-9 {
            return None;
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..nr {
            if basis[r] >= nv + nu {
                if let Some(j) = (0..nv + nu).find(|&j| t[r][j].abs() > 1e-12) {
                    pivot(&mut t, &mut basis, r, j);
                }
            }
        }
        let mut phase2 = vec![0.0; ncols];
        phase2[..nv].copy_from_slice(&self.c);
        run_simplex(&mut t, &mut basis, &phase2, ncols, nv + nu);
        let mut x = vec![0.0; nv];
        for (r, &b) in basis.iter().enumerate() {
            if b < nv {
                x[b] = t[r][ncols];
            }
        }
        let obj = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        Some((obj, x))
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, j: usize) {
    let piv = t[r][j];
    for v in t[r].iter_mut() {
        *v /= piv;
    }
    let row = t[r].clone();
    for (k, other) in t.iter_mut().enumerate() {
        if k != r {
            let f = other[j];
            if f != 0.0 {
                for (o, rv) in other.iter_mut().zip(&row) {
                    *o -= f * rv;
                }
            }
        }
    }
    basis[r] = j;
}

/// Columns `>= allowed` may not enter.
fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], ncols: usize, allowed: usize) {
    for _ in 0..100_000 {
        // reduced costs
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let mut rc = cost[j];
            for (r, &b) in basis.iter().enumerate() {
                rc -= cost[b] * t[r][j];
            }
            rc < -1e-11
        });
        let Some(j) = entering else { return };
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..t.len() {
            if t[r][j] > 1e-12 {
                let ratio = t[r][ncols] / t[r][j];
                let cand = (ratio, basis[r], r);
                best = match best {
                    None => Some(cand),
                    Some(b) if ratio < b.0 - 1e-12 || (ratio <= b.0 + 1e-12 && cand.1 < b.1) => Some(cand),
                    keep => keep,
                };
            }
        }
        let Some((_, _, r)) = best else { panic!("unbounded oracle LP") };
        pivot(t, basis, r, j);
    }
    panic!("oracle simplex did not terminate");
}

/// Optimal value of masked balanced transport via the dense oracle.
pub fn oracle_masked_lp(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    open: &Array2<bool>,
) -> Option<f64> {
    let (m, n) = cost.dim();
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| open[[i, j]])
        .collect();
    let mut lp = DenseLp::new(cells.iter().map(|&(i, j)| cost[[i, j]]).collect());
    for i in 0..m {
        lp.eq.push((cells.iter().map(|&(a, _)| f64::from(u8::from(a == i))).collect(), p[i]));
    }
    for j in 0..n {
        lp.eq.push((cells.iter().map(|&(_, b)| f64::from(u8::from(b == j))).collect(), q[j]));
    }
    lp.solve().map(|r| r.0)
}

/// Optimal value of masked partial transport of mass `s`: ordinary rows and
/// columns are bounded by their mass, keypoint rows and columns are shipped
/// in full.
pub fn oracle_partial_lp(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    kp: &KeypointPairing,
    s: f64,
) -> Option<f64> {
    let (m, n) = cost.dim();
    let src: Vec<usize> = kp.source_indices();
    let tgt: Vec<usize> = kp.target_indices();
    let open = mask_oracle(m, n, kp);
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| open[[i, j]])
        .collect();
    let mut lp = DenseLp::new(cells.iter().map(|&(i, j)| cost[[i, j]]).collect());
    for i in 0..m {
        let row: Vec<f64> = cells.iter().map(|&(a, _)| f64::from(u8::from(a == i))).collect();
        if src.contains(&i) {
            lp.eq.push((row, p[i]));
        } else {
            lp.ub.push((row, p[i]));
        }
    }
    for j in 0..n {
        let col: Vec<f64> = cells.iter().map(|&(_, b)| f64::from(u8::from(b == j))).collect();
        if tgt.contains(&j) {
            lp.eq.push((col, q[j]));
        } else {
            lp.ub.push((col, q[j]));
        }
    }
    lp.eq.push((vec![1.0; cells.len()], s));
    lp.solve().map(|r| r.0)
}

/// Mask rebuilt from its definition.
pub fn mask_oracle(m: usize, n: usize, kp: &KeypointPairing) -> Array2<bool> {
    Array2::from_shape_fn((m, n), |(i, j)| {
        let row_kp = kp.pairs().iter().find(|&&(a, _)| a == i);
        let col_kp = kp.pairs().iter().find(|&&(_, b)| b == j);
        match (row_kp, col_kp) {
            (None, None) => true,
            (Some(&(_, b)), _) => b == j,
            (None, Some(_)) => false,
        }
    })
}

/// Weighted projection oracle for the L2-regularized primal
/// `min ⟨π, G⟩ + ε Σ π²/(p_i q_j)` over the masked polytope, by Dykstra's
/// alternating projections (rows, columns, nonnegativity) in the metric
/// `Σ π²/(p_i q_j)`. Returns the plan.
pub fn dykstra_l2_primal(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: ArrayView2<f64>,
    open: &Array2<bool>,
    epsilon: f64,
    sweeps: usize,
) -> Array2<f64> {
    let (m, n) = g.dim();
    let w = Array2::from_shape_fn((m, n), |(i, j)| if open[[i, j]] { p[i] * q[j] } else { 0.0 });
    // objective = ε Σ (π - π0)² / w + const, π0 = -G w / (2ε)
    let mut x = Array2::from_shape_fn((m, n), |(i, j)| -g[[i, j]] * w[[i, j]] / (2.0 * epsilon));
    let mut corr = [Array2::<f64>::zeros((m, n)), Array2::zeros((m, n)), Array2::zeros((m, n))];
    for _ in 0..sweeps {
        for (k, c) in corr.iter_mut().enumerate() {
            let y = &x + &*c;
            let mut proj = y.clone();
            match k {
                0 => {
                    for i in 0..m {
                        let wsum: f64 = w.row(i).sum();
                        if wsum > 0.0 {
                            let lam = (p[i] - y.row(i).sum()) / wsum;
                            for j in 0..n {
                                proj[[i, j]] += w[[i, j]] * lam;
                            }
                        }
                    }
                }
                1 => {
                    for j in 0..n {
                        let wsum: f64 = w.column(j).sum();
                        if wsum > 0.0 {
                            let lam = (q[j] - y.column(j).sum()) / wsum;
                            for i in 0..m {
                                proj[[i, j]] += w[[i, j]] * lam;
                            }
                        }
                    }
                }
                _ => proj.mapv_inplace(|v| v.max(0.0)),
            }
            // affine projections are exact and need no correction term,
            // but keeping it is harmless
            *c = &y - &proj;
            x = proj;
        }
        for ((i, j), v) in x.indexed_iter_mut() {
            if !open[[i, j]] {
                *v = 0.0;
            }
        }
    }
    x
}

pub fn l2_primal_value(
    plan: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    g: ArrayView2<f64>,
    epsilon: f64,
) -> f64 {
    let mut total = 0.0;
    for ((i, j), &v) in plan.indexed_iter() {
        if v != 0.0 {
            total += v * g[[i, j]] + epsilon * v * v / (p[i] * q[j]);
        }
    }
    total
}

/// `Σ_{ijkl} (Cs_ik - Ct_jl)² π_ij π_kl` by four loops.
pub fn naive_gw_loss(plan: ArrayView2<f64>, cs: ArrayView2<f64>, ct: ArrayView2<f64>) -> f64 {
    let (m, n) = plan.dim();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            for k in 0..m {
                for l in 0..n {
                    let d = cs[[i, k]] - ct[[j, l]];
                    total += d * d * plan[[i, j]] * plan[[k, l]];
                }
            }
        }
    }
    total
}

/// Gradient of [`naive_gw_loss`]: `2 Σ_{kl} (Cs_ik - Ct_jl)² π_kl`.
pub fn naive_gw_gradient(plan: ArrayView2<f64>, cs: ArrayView2<f64>, ct: ArrayView2<f64>) -> Array2<f64> {
    let (m, n) = plan.dim();
    Array2::from_shape_fn((m, n), |(i, j)| {
        let mut acc = 0.0;
        for k in 0..m {
            for l in 0..n {
                let d = cs[[i, k]] - ct[[j, l]];
                acc += d * d * plan[[k, l]];
            }
        }
        2.0 * acc
    })
}

pub fn random_points(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((count, dim), |_| rng.random::<f64>() * 4.0 - 2.0)
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let v = Array1::from_shape_fn(n, |_| 0.1 + rng.random::<f64>());
    let s = v.sum();
    v / s
}

/// Random instance with `k` keypoint pairs at random distinct positions and
/// equal masses on each pair. Both sides have total mass 1.
pub struct Instance {
    pub source: DiscreteDistribution,
    pub target: DiscreteDistribution,
    pub kp: KeypointPairing,
}

pub fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize, dim: usize) -> Instance {
    let p = random_simplex(rng, m);
    let src = sample_distinct(rng, m, k);
    let tgt = sample_distinct(rng, n, k);
    let mut q = Array1::from_shape_fn(n, |_| 0.1 + rng.random::<f64>());
    let kp_mass: f64 = src.iter().map(|&i| p[i]).sum();
    let free: f64 = (0..n).filter(|j| !tgt.contains(j)).map(|j| q[j]).sum();
    for j in 0..n {
        if !tgt.contains(&j) {
            q[j] *= (1.0 - kp_mass) / free;
        }
    }
    for (a, &b) in src.iter().zip(&tgt) {
        q[b] = p[*a];
    }
    let pairs = src.into_iter().zip(tgt).collect();
    Instance {
        source: DiscreteDistribution::with_raw_mass(random_points(rng, m, dim), p).unwrap(),
        target: DiscreteDistribution::with_raw_mass(random_points(rng, n, dim), q).unwrap(),
        kp: KeypointPairing::new(pairs).unwrap(),
    }
}

pub fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let v = rng.random_range(0..n);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}
