//! Jacobi-preconditioned conjugate gradient on the free degrees of freedom.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sparse::{dot, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgSettings {
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the system size.
    pub cap_per_dof: usize,
    /// Iterations without a new lowest residual before giving up.
    pub stagnation_window: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        CgSettings {
            rel_tol: 1e-10,
            cap_per_dof: 20,
            stagnation_window: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CgStatus {
    Converged,
    IterationCap,
    Stagnated,
    /// Non-positive curvature: the operator is not positive definite on the
    /// search space.
    Breakdown,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub status: CgStatus,
}

/// Solves `A x = b` restricted to rows and columns where `free` is true;
/// constrained entries of `x` stay zero.
///
/// The iteration runs on `b / |b|` and rescales the result, so scaling `b`
/// scales `x` without changing the iteration count.
pub fn pcg(a: &CsrMatrix, b: &[f64], free: &[bool], settings: &CgSettings) -> CgOutcome {
    let n = a.n;
    assert_eq!(b.len(), n);
    assert_eq!(free.len(), n);
    let mask = |v: &mut [f64]| {
        v.par_iter_mut().zip(free.par_iter()).for_each(|(x, &f)| {
            if !f {
                *x = 0.0
            }
        })
    };
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .zip(free)
        .map(|(d, &f)| if f && d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    mask(&mut r);
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
            status: CgStatus::Converged,
        };
    }
    r.par_iter_mut().for_each(|v| *v /= b_norm);
    let precondition = |r: &[f64], z: &mut [f64]| {
        z.par_iter_mut()
            .enumerate()
            .for_each(|(i, zi)| *zi = r[i] * inv_diag[i]);
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let cap = settings.cap_per_dof * free.iter().filter(|&&f| f).count().max(1);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut rel = 1.0;
    let finish = |mut x: Vec<f64>, iterations, rel_residual, status| {
        x.par_iter_mut().for_each(|v| *v *= b_norm);
        CgOutcome {
            x,
            iterations,
            rel_residual,
            status,
        }
    };
    for it in 1..=cap {
        a.mul_into(&p, &mut q);
        mask(&mut q);
        let pq = dot(&p, &q);
        if !pq.is_finite() {
            return finish(x, it, rel, CgStatus::NonFinite);
        }
        if pq <= 0.0 {
            return finish(x, it, rel, CgStatus::Breakdown);
        }
        let alpha = rz / pq;
        x.par_iter_mut()
            .zip(p.par_iter())
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .zip(q.par_iter())
            .for_each(|(ri, qi)| *ri -= alpha * qi);
        rel = dot(&r, &r).sqrt();
        if !rel.is_finite() {
            return finish(x, it, rel, CgStatus::NonFinite);
        }
        if rel <= settings.rel_tol {
            return finish(x, it, rel, CgStatus::Converged);
        }
        if rel < best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= settings.stagnation_window {
                return finish(x, it, rel, CgStatus::Stagnated);
            }
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    finish(x, cap, rel, CgStatus::IterationCap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                col_idx.push(j);
                values.push(if i == j { 2.0 } else { -1.0 });
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[test]
    fn solves_spd_system() {
        let a = laplacian(50);
        let want: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        let b = a.mul(&want);
        let out = pcg(&a, &b, &[true; 50], &CgSettings::default());
        assert_eq!(out.status, CgStatus::Converged);
        let err = want.iter().zip(&out.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn constrained_entries_stay_zero() {
        let a = laplacian(10);
        let mut free = vec![true; 10];
        free[0] = false;
        free[9] = false;
        let out = pcg(&a, &[1.0; 10], &free, &CgSettings::default());
        assert_eq!(out.status, CgStatus::Converged);
        assert_eq!(out.x[0], 0.0);
        assert_eq!(out.x[9], 0.0);
        // discrete Poisson with unit load: x_i = i (9 - i) / 2
        for i in 1..9 {
            let k = i as f64;
            assert!((out.x[i] - k * (9.0 - k) / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_inconsistent_system_is_flagged() {
        // free-free Laplacian with a net load has no solution
        let mut a = laplacian(40);
        a.values[0] = 1.0;
        let last = a.values.len() - 1;
        a.values[last] = 1.0;
        let out = pcg(&a, &vec![1.0; 40], &[true; 40], &CgSettings::default());
        assert_ne!(out.status, CgStatus::Converged);
    }

    #[test]
    fn zero_rhs_is_trivial() {
        let out = pcg(&laplacian(5), &[0.0; 5], &[true; 5], &CgSettings::default());
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 5]);
    }
}
