//! Ready-made models on the square lattice `2πℤ²` (dual `ℤ²`, Λ = 1/2).
//!
//! * [`compact`]: a few low modes, small enough for every estimate to be
//!   certified at moderate `|v|`; used for the regular sheet and the bound
//!   suite.
//! * [`axis_family`]: a potential with slowly decaying coefficients along
//!   the `b2` axis, so that every `d = (0, n)` in its support carries a
//!   measurable handle constant.
//! * [`random_admissible`]: seeded random draws satisfying the smallness
//!   hypothesis, for property tests.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fourier::{CVec2, Model, ParamOverrides, ScalarField, VectorField, ZERO};
use crate::lattice::{DualPoint, Lattice};

/// Tube radius used by the presets (`Λ/6 = 1/12 > 0.08`).
pub const EPSILON: f64 = 0.08;

fn conj2(a: CVec2) -> CVec2 {
    [a[0].conj(), a[1].conj()]
}

/// Adds `x` at `b` and its conjugate at `−b` (a real potential).
fn hermitian_scalar(f: &mut ScalarField, b: DualPoint, x: C) -> Result<()> {
    f.insert(b, x)?;
    f.insert(-b, x.conj())
}

fn hermitian_vector(f: &mut VectorField, b: DualPoint, x: CVec2) -> Result<()> {
    f.insert(b, x)?;
    f.insert(-b, conj2(x))
}

/// Real `A` on the modes `±(1,0), ±(0,1), ±(1,1)` and real `V` on the eight
/// nearest modes.
pub fn compact_fields() -> (VectorField, ScalarField) {
    let mut a = VectorField::new();
    let mut v = ScalarField::new();
    hermitian_vector(&mut a, DualPoint(1, 0), [C::new(0.0, 1.2e-4), C::new(1.5e-4, 1.0e-4)]).unwrap();
    hermitian_vector(&mut a, DualPoint(0, 1), [C::new(1.4e-4, -0.6e-4), C::new(0.0, 1.3e-4)]).unwrap();
    hermitian_vector(&mut a, DualPoint(1, 1), [C::new(0.8e-4, 0.5e-4), C::new(-0.6e-4, 0.2e-4)]).unwrap();
    hermitian_scalar(&mut v, DualPoint(1, 0), C::new(3.0e-3, 1.0e-3)).unwrap();
    hermitian_scalar(&mut v, DualPoint(0, 1), C::new(2.0e-3, -1.5e-3)).unwrap();
    hermitian_scalar(&mut v, DualPoint(1, 1), C::new(1.5e-3, 0.5e-3)).unwrap();
    hermitian_scalar(&mut v, DualPoint(1, -1), C::new(-1.0e-3, 1.0e-3)).unwrap();
    (a, v)
}

pub fn compact() -> Model {
    let (a, v) = compact_fields();
    Model::new(Lattice::square_2pi(), a, v, ParamOverrides { epsilon: Some(EPSILON), ..Default::default() })
        .expect("compact preset is admissible")
}

/// `V̂(±(0,n)) = amplitude/n³` for `1 ≤ n ≤ n_max`, plus a tiny real `A` on
/// the nearest modes (so the magnetic terms are exercised too).
pub fn axis_fields(n_max: i64, amplitude: f64) -> (VectorField, ScalarField) {
    let mut a = VectorField::new();
    let mut v = ScalarField::new();
    hermitian_vector(&mut a, DualPoint(1, 0), [C::new(0.0, 2.0e-5), C::new(3.0e-5, 0.0)]).unwrap();
    hermitian_vector(&mut a, DualPoint(0, 1), [C::new(2.5e-5, 0.0), C::new(0.0, 1.5e-5)]).unwrap();
    for n in 1..=n_max {
        let x = amplitude / (n as f64).powi(3);
        hermitian_scalar(&mut v, DualPoint(0, n), C::new(x, 0.3 * x)).unwrap();
    }
    (a, v)
}

pub fn axis_family(n_max: i64, amplitude: f64) -> Model {
    let (a, v) = axis_fields(n_max, amplitude);
    Model::new(Lattice::square_2pi(), a, v, ParamOverrides { epsilon: Some(EPSILON), ..Default::default() })
        .expect("axis preset is admissible")
}

/// The free operator on `2πℤ²`.
pub fn free() -> Model {
    Model::free(Lattice::square_2pi(), ParamOverrides { epsilon: Some(EPSILON), ..Default::default() })
        .expect("free model")
}

/// A random real potential on modes with `|b| ≤ √2`, with
/// `‖(1+b²)Â‖_{l¹}` a random fraction of the smallness limit and
/// `‖V̂‖∞ ≤ v_max`.
pub fn random_admissible(seed: u64, v_max: f64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = [DualPoint(1, 0), DualPoint(0, 1), DualPoint(1, 1), DualPoint(1, -1)];
    let mut a = VectorField::new();
    let mut v = ScalarField::new();
    let limit = 2.0 * EPSILON / 63.0;
    let fraction: f64 = rng.random_range(0.05..0.9);
    let mut raw = Vec::new();
    for &b in &half {
        let x: CVec2 = [
            C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        ];
        raw.push((b, x));
        let s = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * v_max;
        hermitian_scalar(&mut v, b, s).unwrap();
    }
    let lat = Lattice::square_2pi();
    let weighted: f64 =
        raw.iter().map(|(b, x)| 2.0 * (1.0 + lat.norm(*b).powi(2)) * (x[0].norm_sqr() + x[1].norm_sqr()).sqrt()).sum();
    let scale = fraction * limit / weighted;
    for (b, x) in raw {
        hermitian_vector(&mut a, b, [x[0] * scale, x[1] * scale]).unwrap();
    }
    Model::new(lat, a, v, ParamOverrides { epsilon: Some(EPSILON), ..Default::default() }).expect("random preset")
}

/// Zero vector (convenience for callers building fields by hand).
pub const ZERO2: CVec2 = [ZERO, ZERO];
