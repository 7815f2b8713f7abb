//! Minimizing a quadratic form over the probability simplex.
//!
//! The objective `yᵀAy` is in general nonconvex. Candidates come from every
//! vertex, every edge critical point, the interior stationary point of each
//! face (for small dimensions), warm starts, and multi-start projected
//! gradient descent; the best one wins.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct InnerConfig {
    /// Faces are enumerated exhaustively up to this dimension.
    pub face_limit: usize,
    /// Random starts of projected gradient descent.
    pub starts: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub grad_tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            face_limit: 12,
            starts: 32,
            seed: 0,
            max_steps: 5_000,
            grad_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub weights: Vec<f64>,
    pub value: f64,
    /// Projected-gradient runs performed.
    pub restarts: usize,
    /// Every distinct candidate point with its objective value.
    pub candidates: Vec<(Vec<f64>, f64)>,
}

pub fn quadratic(a: &DMatrix<f64>, y: &[f64]) -> f64 {
    let v = DVector::from_column_slice(y);
    v.dot(&(a * &v))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Projected gradient with Armijo step halving. Returns the end point and
/// whether the step length fell below the tolerance.
fn descend(a: &DMatrix<f64>, mut y: Vec<f64>, cfg: &InnerConfig) -> (Vec<f64>, bool) {
    let mut f = quadratic(a, &y);
    let mut step = 1.0;
    for _ in 0..cfg.max_steps {
        let g = a * DVector::from_column_slice(&y) * 2.0;
        let mut accepted = false;
        while step > 1e-16 {
            let mut z: Vec<f64> = y
                .iter()
                .zip(g.iter())
                .map(|(yi, gi)| yi - step * gi)
                .collect();
            project_simplex(&mut z);
            let d: f64 = z
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d < cfg.grad_tol {
                return (y, true);
            }
            let fz = quadratic(a, &z);
            let decrease: f64 = g
                .iter()
                .zip(z.iter().zip(&y))
                .map(|(gi, (zi, yi))| gi * (zi - yi))
                .sum();
            if fz <= f + 1e-4 * decrease {
                y = z;
                f = fz;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return (y, true);
        }
    }
    (y, false)
}

fn push_candidate(out: &mut Vec<(Vec<f64>, f64)>, a: &DMatrix<f64>, y: Vec<f64>) {
    let v = quadratic(a, &y);
    if !v.is_finite() {
        return;
    }
    let dup = out
        .iter()
        .any(|(z, _)| z.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-9));
    if !dup {
        out.push((y, v));
    }
}

/// Minimizes `yᵀAy` over the simplex. `a` should be symmetric.
pub fn minimize_quadratic(
    a: &DMatrix<f64>,
    warm: &[Vec<f64>],
    cfg: &InnerConfig,
) -> Result<InnerSolution> {
    let k = a.nrows();
    let mut cands = Vec::new();
    for i in 0..k {
        let mut y = vec![0.0; k];
        y[i] = 1.0;
        push_candidate(&mut cands, a, y);
    }
    for i in 0..k {
        for j in i + 1..k {
            let alpha = a[(i, i)] + a[(j, j)] - 2.0 * a[(i, j)];
            if alpha > 1e-15 {
                let t = ((a[(j, j)] - a[(i, j)]) / alpha).clamp(0.0, 1.0);
                let mut y = vec![0.0; k];
                y[i] = t;
                y[j] = 1.0 - t;
                push_candidate(&mut cands, a, y);
            }
        }
    }
    if k >= 3 && k <= cfg.face_limit {
        for mask in 1u32..(1 << k) {
            if mask.count_ones() < 3 {
                continue;
            }
            let idx: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])]);
            let Some(u) = sub.lu().solve(&DVector::from_element(idx.len(), 1.0)) else {
                continue;
            };
            let s: f64 = u.sum();
            if s <= 0.0 || u.iter().any(|&x| x <= 0.0) {
                continue;
            }
            let mut y = vec![0.0; k];
            for (pos, &i) in idx.iter().enumerate() {
                y[i] = u[pos] / s;
            }
            push_candidate(&mut cands, a, y);
        }
    }
    let mut restarts = 0;
    let mut converged = 0;
    let mut starts: Vec<Vec<f64>> = warm.iter().filter(|w| w.len() == k).cloned().collect();
    starts.push(vec![1.0 / k as f64; k]);
    if k > 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.starts {
            // Exponential spacings give a uniform point of the simplex.
            let mut y: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = y.iter().sum();
            y.iter_mut().for_each(|x| *x /= s);
            starts.push(y);
        }
    }
    for s in starts {
        let (y, ok) = descend(a, s, cfg);
        restarts += 1;
        converged += ok as usize;
        push_candidate(&mut cands, a, y);
    }
    if converged == 0 {
        return Err(Error::InnerSolveFailure(format!(
            "no descent of {restarts} converged (dimension {k})"
        )));
    }
    let best = cands
        .iter()
        .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
        .cloned()
        .ok_or_else(|| Error::InnerSolveFailure("no candidate".into()))?;
    Ok(InnerSolution {
        weights: best.0,
        value: best.1,
        restarts,
        candidates: cands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn projection_lands_on_simplex() {
        let mut v = vec![0.3, 2.0, -1.0];
        project_simplex(&mut v);
        assert_abs_diff_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_is_minimized_at_the_centre() {
        let a = DMatrix::<f64>::identity(4, 4);
        let s = minimize_quadratic(&a, &[], &InnerConfig::default()).unwrap();
        assert_abs_diff_eq!(s.value, 0.25, epsilon = 1e-12);
        for w in s.weights {
            assert_abs_diff_eq!(w, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn concave_forms_pick_a_vertex() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 3.0, 3.0, 2.0, 3.0, 3.0, 3.0, 5.0]);
        let s = minimize_quadratic(&a, &[], &InnerConfig::default()).unwrap();
        assert_eq!(s.weights, vec![1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(s.value, 1.0);
    }

    #[test]
    fn edge_critical_point() {
        // (t, 1-t) with f = t^2 + (1-t)^2 has its minimum at t = 1/2.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let s = minimize_quadratic(&a, &[], &InnerConfig::default()).unwrap();
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn never_worse_than_a_sample(entries in prop::collection::vec(0.0f64..5.0, 25), probe in prop::collection::vec(0.0f64..1.0, 5)) {
            let m = DMatrix::from_row_slice(5, 5, &entries);
            let a = (&m + m.transpose()) * 0.5;
            let s = minimize_quadratic(&a, &[], &InnerConfig { face_limit: 5, starts: 4, ..Default::default() }).unwrap();
            let total: f64 = probe.iter().sum();
            prop_assume!(total > 1e-3);
            let y: Vec<f64> = probe.iter().map(|x| x / total).collect();
            prop_assert!(s.value <= quadratic(&a, &y) + 1e-9);
            prop_assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
