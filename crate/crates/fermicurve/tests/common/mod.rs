//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `r(x) = r0 + l·x + Σ κ_ij x1^i x2^j (2 ≤ i+j ≤ 3) + η(e^{x1−x2} − 1 − x1 + x2)`
/// with analytic bounds on `D_δ`.
pub struct Perturbation {
    pub r0: C,
    pub l: [C; 2],
    pub kappa: Vec<(i32, i32, C)>,
    pub eta: C,
}

impl Perturbation {
    pub fn random(rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let mut rc = |s: f64| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * s;
        let r0 = rc(scale);
        let l = [rc(scale), rc(scale)];
        let mut kappa = Vec::new();
        for (i, j) in [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)] {
            kappa.push((i, j, rc(scale)));
        }
        let eta = rc(scale);
        Perturbation { r0, l, kappa, eta }
    }

    pub fn eval(&self, x: [C; 2]) -> C {
        let mut r = self.r0 + self.l[0] * x[0] + self.l[1] * x[1];
        for &(i, j, k) in &self.kappa {
            r += k * x[0].powi(i) * x[1].powi(j);
        }
        let t = x[0] - x[1];
        r + self.eta * (t.exp() - 1.0 - t)
    }

    /// `(a, b)`: sup of `|∂_i r|` and of the Frobenius norm of `∂²r` on `D_δ`.
    pub fn bounds(&self, delta: f64) -> (f64, f64) {
        let e = (2.0 * delta).exp();
        let mut a = [self.l[0].norm(), self.l[1].norm()];
        let mut h = [[0.0f64; 2]; 2];
        for &(i, j, k) in &self.kappa {
            let k = k.norm();
            let (fi, fj) = (i as f64, j as f64);
            if i >= 1 {
                a[0] += k * fi * delta.powi(i + j - 1);
            }
            if j >= 1 {
                a[1] += k * fj * delta.powi(i + j - 1);
            }
            if i >= 2 {
                h[0][0] += k * fi * (fi - 1.0) * delta.powi(i + j - 2);
            }
            if j >= 2 {
                h[1][1] += k * fj * (fj - 1.0) * delta.powi(i + j - 2);
            }
            if i >= 1 && j >= 1 {
                h[0][1] += k * fi * fj * delta.powi(i + j - 2);
            }
        }
        // |e^t − 1| ≤ e^{|t|} − 1 with |t| ≤ 2δ; every second derivative is ±η e^t
        a[0] += self.eta.norm() * (e - 1.0);
        a[1] += self.eta.norm() * (e - 1.0);
        for (i, j) in [(0, 0), (1, 1), (0, 1)] {
            h[i][j] += self.eta.norm() * e;
        }
        let b = (h[0][0].powi(2) + h[1][1].powi(2) + 2.0 * h[0][1].powi(2)).sqrt();
        (a[0].max(a[1]), b)
    }
}
