//! Independent reference computations shared by the integration tests.
//! Nothing here goes through the library's factorizations.

#![allow(dead_code, clippy::needless_range_loop)]

use dpc_precoding::{PrecodingOrder, ProblemInstance, C64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<C64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex Gaussian with unit variance, drawn with the test's own RNG.
pub fn cgauss(rng: &mut ChaCha8Rng) -> C64 {
    // Box-Muller keeps the test independent of the library's sampler.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    C64::new(r * t.cos(), r * t.sin())
}

pub fn random_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    nt: usize,
    rate_lo: f64,
    rate_hi: f64,
) -> ProblemInstance {
    let channels = (0..m)
        .map(|_| (0..nt).map(|_| cgauss(rng)).collect())
        .collect();
    let targets = (0..m).map(|_| rng.random_range(rate_lo..rate_hi)).collect();
    ProblemInstance::new(channels, targets).expect("valid random instance")
}

/// Corpus: `M` in 2..=6, `nT` in 2..=8, targets uniform in (0.1, 4) bits.
pub fn corpus(seed: u64, count: usize) -> Vec<ProblemInstance> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let m = r.random_range(2..=6);
            let nt = r.random_range(2..=8);
            random_instance(&mut r, m, nt, 0.1, 4.0)
        })
        .collect()
}

pub fn random_perm(rng: &mut ChaCha8Rng, m: usize) -> PrecodingOrder {
    let mut v: Vec<usize> = (0..m).collect();
    v.shuffle(rng);
    PrecodingOrder::new(v).unwrap()
}

pub fn all_orders(m: usize) -> Vec<PrecodingOrder> {
    fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<PrecodingOrder>) {
        if left.is_empty() {
            out.push(PrecodingOrder::new(prefix.clone()).unwrap());
            return;
        }
        for i in 0..left.len() {
            let u = left.remove(i);
            prefix.push(u);
            rec(prefix, left, out);
            prefix.pop();
            left.insert(i, u);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..m).collect(), &mut out);
    out
}

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| C64::new((i == j) as u8 as f64, 0.0))
                .collect()
        })
        .collect()
}

/// `I + sum_{u in users} p_u h_u h_u^H`.
pub fn covariance(inst: &ProblemInstance, users: &[usize], p: &[f64]) -> Mat {
    let n = inst.num_tx_antennas();
    let mut z = identity(n);
    for &u in users {
        let h = inst.channel(u);
        for i in 0..n {
            for j in 0..n {
                z[i][j] += p[u] * h[i] * h[j].conj();
            }
        }
    }
    z
}

/// Determinant by LU with partial pivoting.
pub fn det(a: &Mat) -> C64 {
    let n = a.len();
    let mut a = a.clone();
    let mut d = C64::new(1.0, 0.0);
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))
            .unwrap();
        if a[piv][k].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != k {
            a.swap(piv, k);
            d = -d;
        }
        d *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
        }
    }
    d
}

pub fn log2det(a: &Mat) -> f64 {
    det(a).re.log2()
}

/// SIC rates by user for decoding `order` at powers `p`.
pub fn sic_rates(inst: &ProblemInstance, order: &PrecodingOrder, p: &[f64]) -> Vec<f64> {
    let m = inst.num_users();
    let perm = order.as_slice();
    let mut rates = vec![0.0; m];
    for pos in 0..m {
        let with = log2det(&covariance(inst, &perm[pos..], p));
        let without = log2det(&covariance(inst, &perm[pos + 1..], p));
        rates[perm[pos]] = with - without;
    }
    rates
}

/// Inverse of a 3x3 matrix by cofactors.
pub fn inverse3(a: &Mat) -> Mat {
    let c = |i: usize, j: usize| {
        let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        let s: Vec<usize> = (0..3).filter(|&x| x != j).collect();
        a[r[0]][s[0]] * a[r[1]][s[1]] - a[r[0]][s[1]] * a[r[1]][s[0]]
    };
    let d = det(a);
    (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * c(j, i) / d
                })
                .collect()
        })
        .collect()
}

/// `v^H A v`, real part.
pub fn quad(a: &Mat, v: &[C64]) -> f64 {
    let n = v.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += v[i].conj() * a[i][j] * v[j];
        }
    }
    acc.re
}

/// Every nonempty subset sum-rate constraint holds within `tol` bits.
pub fn region_ok(inst: &ProblemInstance, p: &[f64], targets: &[f64], tol: f64) -> bool {
    let m = inst.num_users();
    (1u32..(1 << m)).all(|mask| {
        let users: Vec<usize> = (0..m).filter(|&u| mask >> u & 1 == 1).collect();
        let need: f64 = users.iter().map(|&u| targets[u]).sum();
        log2det(&covariance(inst, &users, p)) >= need - tol
    })
}

/// Lagrangian inner objective `sum_k lambda_k R_k(p) - sum p` at the SIC
/// vertex with ascending multipliers, from determinants.
pub fn inner_objective_oracle(inst: &ProblemInstance, lambda: &[f64], p: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..lambda.len()).collect();
    idx.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
    let order = PrecodingOrder::new(idx).unwrap();
    let rates = sic_rates(inst, &order, p);
    lambda.iter().zip(&rates).map(|(l, r)| l * r).sum::<f64>() - p.iter().sum::<f64>()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
