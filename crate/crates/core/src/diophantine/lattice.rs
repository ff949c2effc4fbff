//! Closest-vector enumeration for simultaneous approximation.
//!
//! For `|n| <= B` and `||n alpha_j - z_j|| < eps` the vector
//! `(n/B, (n alpha_1 - m_1 - z_1)/eps, ...)` has every coordinate in
//! `[-1, 1]`, so it lies in the Euclidean ball of radius `sqrt(d + 1)` around
//! the target. Enumerating every lattice point in that ball (after LLL) is
//! complete; candidates are then re-checked exactly by the caller.

use crate::{Error, Result};

pub(crate) struct Lattice {
    // rows of the reduced basis
    rows: Vec<Vec<f64>>,
    // rows = transform * original rows
    transform: Vec<Vec<i64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gram_schmidt(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let n = rows.len();
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut mu = vec![vec![0.0; n]; n];
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let mut v = rows[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&rows[i], &star[j]) / norms[j];
            for (vk, sk) in v.iter_mut().zip(&star[j]) {
                *vk -= mu[i][j] * sk;
            }
        }
        norms[i] = dot(&v, &v);
        star.push(v);
    }
    (star, mu, norms)
}

impl Lattice {
    pub(crate) fn reduce(basis: Vec<Vec<f64>>) -> Self {
        let n = basis.len();
        let mut rows = basis;
        let mut transform: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        let mut k = 1;
        let mut guard = 0usize;
        while k < n && guard < 100_000 {
            guard += 1;
            for j in (0..k).rev() {
                let (_, mu, _) = gram_schmidt(&rows);
                let q = mu[k][j].round();
                if q != 0.0 {
                    let qi = q as i64;
                    for c in 0..rows[k].len() {
                        rows[k][c] -= q * rows[j][c];
                    }
                    for c in 0..n {
                        transform[k][c] -= qi * transform[j][c];
                    }
                }
            }
            let (_, mu, norms) = gram_schmidt(&rows);
            if norms[k] >= (0.99 - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
                k += 1;
            } else {
                rows.swap(k, k - 1);
                transform.swap(k, k - 1);
                k = (k - 1).max(1);
            }
        }
        Lattice { rows, transform }
    }

    /// Original coefficient vectors of every lattice point within distance
    /// `radius` of `target`.
    pub(crate) fn enumerate(&self, target: &[f64], radius: f64, cap: usize) -> Result<Vec<Vec<i64>>> {
        let n = self.rows.len();
        let (star, mu, norms) = gram_schmidt(&self.rows);
        let tau: Vec<f64> = (0..n).map(|i| dot(target, &star[i]) / norms[i]).collect();
        let mut out = Vec::new();
        let mut coeffs = vec![0i64; n];
        self.descend(n, &mu, &norms, &tau, radius * radius, &mut coeffs, &mut out, cap)?;
        Ok(out
            .into_iter()
            .map(|c| (0..n).map(|k| (0..n).map(|i| c[i] * self.transform[i][k]).sum()).collect())
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        level: usize,
        mu: &[Vec<f64>],
        norms: &[f64],
        tau: &[f64],
        budget: f64,
        coeffs: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
        cap: usize,
    ) -> Result<()> {
        if level == 0 {
            if out.len() >= cap {
                return Err(Error::Cap(format!("lattice enumeration exceeded {cap} candidates")));
            }
            out.push(coeffs.clone());
            return Ok(());
        }
        let i = level - 1;
        let n = coeffs.len();
        let center = tau[i] - (i + 1..n).map(|j| coeffs[j] as f64 * mu[j][i]).sum::<f64>();
        let half = (budget.max(0.0) / norms[i]).sqrt();
        let lo = (center - half).ceil() as i64;
        let hi = (center + half).floor() as i64;
        for c in lo..=hi {
            let off = c as f64 - center;
            let rest = budget - off * off * norms[i];
            if rest < 0.0 {
                continue;
            }
            coeffs[i] = c;
            self.descend(i, mu, norms, tau, rest, coeffs, out, cap)?;
        }
        coeffs[i] = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_integer_grid_ball() {
        let lat = Lattice::reduce(vec![vec![1.0, 0.0], vec![7.0, 1.0]]);
        let pts = lat.enumerate(&[0.2, 0.1], 1.5, 1000).unwrap();
        // integer points within 1.5 of (0.2, 0.1) in the standard lattice
        let mut expected = 0;
        for x in -3i64..=3 {
            for y in -3i64..=3 {
                if (x as f64 - 0.2).powi(2) + (y as f64 - 0.1).powi(2) <= 2.25 {
                    expected += 1;
                }
            }
        }
        assert_eq!(pts.len(), expected);
        for c in &pts {
            let x = c[0] as f64 + 7.0 * c[1] as f64;
            let y = c[1] as f64;
            assert!((x - 0.2).powi(2) + (y - 0.1).powi(2) <= 2.25 + 1e-9);
        }
    }

    #[test]
    fn cap_is_reported() {
        let lat = Lattice::reduce(vec![vec![1.0]]);
        assert!(matches!(lat.enumerate(&[0.0], 100.0, 10), Err(Error::Cap(_))));
    }
}
