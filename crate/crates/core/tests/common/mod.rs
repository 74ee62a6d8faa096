//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use donorsim::spin_system::DonorParams;

/// Cyclic Jacobi eigenvalues of a real symmetric matrix, ascending.
pub fn jacobi_eigenvalues<const N: usize>(mut a: [[f64; N]; N]) -> [f64; N] {
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-300 {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev = [0.0; N];
    for i in 0..N {
        ev[i] = a[i][i];
    }
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Donor Hamiltonian `we Sz - wn Iz + A S.I` in the product basis
/// (up-Up, up-Down, down-Up, down-Down), MHz.
pub fn donor_hamiltonian(p: &DonorParams<f64>) -> [[f64; 4]; 4] {
    let (we, wn, a) = (p.electron_zeeman(), p.nuclear_zeeman(), p.hyperfine_a);
    let mut h = [[0.0; 4]; 4];
    let spins = [(0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5)];
    for (i, (sz, iz)) in spins.iter().enumerate() {
        h[i][i] = we * sz - wn * iz + a * sz * iz;
    }
    // flip-flop (S+I- + S-I+)/2 couples up-Down and down-Up
    h[1][2] = a / 2.0;
    h[2][1] = a / 2.0;
    h
}

/// Composite Simpson rule on `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + h * i as f64);
    }
    s * h / 3.0
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Time at which `series` first reaches 90% of its rise from the first
/// to the last sample, by linear interpolation.
pub fn time_to_90(times: &[f64], series: &[f64]) -> Option<f64> {
    let (a, b) = (series[0], *series.last()?);
    let target = a + 0.9 * (b - a);
    for i in 1..series.len() {
        let (y0, y1) = (series[i - 1], series[i]);
        if (y0 - target) * (y1 - target) <= 0.0 && y1 != y0 {
            let f = (target - y0) / (y1 - y0);
            return Some(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    None
}

/// Stationary distribution of a generator (`q[to][from]`, columns summing
/// to zero) by Grassmann-Taksar-Heyman state reduction, which only adds
/// and divides nonnegative numbers.
pub fn gth_stationary<const N: usize>(q: &[[f64; N]; N]) -> [f64; N] {
    // p[i][j]: rate i -> j
    let mut p = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            if i != j {
                p[i][j] = q[j][i];
            }
        }
    }
    for k in (1..N).rev() {
        let s: f64 = (0..k).map(|j| p[k][j]).sum();
        for i in 0..k {
            p[i][k] /= s;
        }
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    p[i][j] += p[i][k] * p[k][j];
                }
            }
        }
    }
    let mut x = [0.0; N];
    x[0] = 1.0;
    for k in 1..N {
        x[k] = (0..k).map(|i| x[i] * p[i][k]).sum();
    }
    let total: f64 = x.iter().sum();
    x.map(|v| v / total)
}
