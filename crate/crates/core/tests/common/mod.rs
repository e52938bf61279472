//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use odecheck::gof::GmSample;

pub fn kernel(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

pub fn kernel_deriv(u: f64) -> f64 {
    if u.abs() < 1.0 {
        -1.5 * u
    } else {
        0.0
    }
}

pub fn naive_vn(e: &[Vec<f64>], t: &[f64], h: f64) -> Vec<f64> {
    let n = e.len();
    let p = e[0].len();
    let mut v = vec![0.0; p];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let k = kernel((t[i] - t[j]) / h) / h;
            for c in 0..p {
                v[c] += k * e[i][c] * e[j][c];
            }
        }
    }
    let nn = (n * (n - 1)) as f64;
    v.iter().map(|x| x / nn).collect()
}

pub fn naive_sigma_tm(e: &[Vec<f64>], t: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = e.len();
    let p = e[0].len();
    let mut s = vec![vec![0.0; p]; p];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let k = kernel((t[i] - t[j]) / h);
            let w = k * k / h;
            for a in 0..p {
                for b in 0..p {
                    s[a][b] += w * (e[i][a] * e[j][a]) * (e[i][b] * e[j][b]);
                }
            }
        }
    }
    let nn = (n * (n - 1)) as f64;
    s.iter().map(|r| r.iter().map(|x| 2.0 * x / nn).collect()).collect()
}

/// `V^f` from the full double sum over `(i, j)` at each design point.
pub fn naive_gm_vnf(s: &GmSample, h: f64) -> f64 {
    let n = s.times.len();
    let mut total = 0.0;
    for d in 0..n {
        let mut inner = 0.0;
        for i in 0..n {
            for j in 0..n {
                let kdi = kernel((s.times[d] - s.times[i]) / h);
                let kpdi = kernel_deriv((s.times[d] - s.times[i]) / h);
                let kdj = kernel((s.times[d] - s.times[j]) / h);
                inner += kpdi * kdj * (s.y[i] - s.y[j]) / h.powi(3) - kdi * kdj * s.f[d] / h.powi(2);
            }
        }
        inner /= ((n - 1) * (n - 1)) as f64;
        total += inner * inner;
    }
    total / (n as f64 * h * h)
}

fn all_permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in all_permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Kernel `W'(z_a, z_b, z_c, z_d, z_s)` of the order-5 U-statistic.
fn w_prime(s: &GmSample, h: f64, z: &[usize]) -> f64 {
    let (a, b, c, d, t) = (z[0], z[1], z[2], z[3], z[4]);
    let k = |x: usize| kernel((s.times[t] - s.times[x]) / h);
    let kp = |x: usize| kernel_deriv((s.times[t] - s.times[x]) / h);
    let left = kp(c) * (s.y[c] - s.y[a]) / h.powi(3) - k(c) * s.f[t] / h.powi(2);
    let right = kp(d) * (s.y[d] - s.y[b]) / h.powi(3) - k(d) * s.f[t] / h.powi(2);
    k(a) * k(b) * left * right / (h * h)
}

/// Sample variance of the projections, each averaged over blocks of four
/// time-sorted indices and symmetrized over all orderings.
pub fn naive_gm_variance(s: &GmSample, h: f64) -> f64 {
    let n = s.times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.times[a].partial_cmp(&s.times[b]).unwrap().then(a.cmp(&b)));
    let w: Vec<f64> = (0..n)
        .map(|t| {
            let others: Vec<usize> = order.iter().copied().filter(|&i| i != t).collect();
            let blocks: Vec<&[usize]> = others.chunks_exact(4).collect();
            let mut sum = 0.0;
            for blk in &blocks {
                let z = [blk[0], blk[1], blk[2], blk[3], t];
                let perms = all_permutations(&z);
                sum += perms.iter().map(|p| w_prime(s, h, p)).sum::<f64>() / perms.len() as f64;
            }
            sum / blocks.len() as f64
        })
        .collect();
    let mean = w.iter().sum::<f64>() / n as f64;
    w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS p-value `2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)` with the
/// small-sample correction `lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
