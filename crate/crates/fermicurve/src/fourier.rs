//! Finitely supported Fourier data on the dual lattice and the model
//! constants derived from it.

use std::collections::BTreeMap;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DualPoint, Lattice};

/// A complex 2-vector (values of `Â`).
pub type CVec2 = [C; 2];

pub const ZERO: C = C { re: 0.0, im: 0.0 };

/// Values that can live on a [`FourierField`].
pub trait FieldValue: Copy + Default + PartialEq + std::fmt::Debug {
    fn norm(&self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
}

impl FieldValue for C {
    fn norm(&self) -> f64 {
        C::norm(*self)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
}

impl FieldValue for CVec2 {
    /// Euclidean norm of the complex vector.
    fn norm(&self) -> f64 {
        (self[0].norm_sqr() + self[1].norm_sqr()).sqrt()
    }
    fn add(self, o: Self) -> Self {
        [self[0] + o[0], self[1] + o[1]]
    }
    fn sub(self, o: Self) -> Self {
        [self[0] - o[0], self[1] - o[1]]
    }
}

/// A finitely supported function on `Γ^#`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FourierField<T: FieldValue> {
    entries: BTreeMap<DualPoint, T>,
}

pub type ScalarField = FourierField<C>;
pub type VectorField = FourierField<CVec2>;

impl<T: FieldValue> FourierField<T> {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Builds a field from `(b, value)` pairs; repeated `b` is an error.
    pub fn from_entries<I: IntoIterator<Item = (DualPoint, T)>>(it: I) -> Result<Self> {
        let mut f = Self::new();
        for (b, x) in it {
            f.insert(b, x)?;
        }
        Ok(f)
    }

    pub fn insert(&mut self, b: DualPoint, x: T) -> Result<()> {
        if self.entries.insert(b, x).is_some() {
            return Err(Error::DuplicateCoefficient(b));
        }
        Ok(())
    }

    /// Adds `x` to the value at `b` (creating the entry if needed).
    pub fn accumulate(&mut self, b: DualPoint, x: T) {
        let e = self.entries.entry(b).or_default();
        *e = e.add(x);
    }

    /// The value at `b`; zero off the support.
    #[inline]
    pub fn get(&self, b: DualPoint) -> T {
        self.entries.get(&b).copied().unwrap_or_default()
    }

    pub fn support(&self) -> impl Iterator<Item = DualPoint> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DualPoint, T)> + '_ {
        self.entries.iter().map(|(b, x)| (*b, *x))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every stored value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|x| *x == T::default())
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(DualPoint, T) -> U) -> FourierField<U> {
        FourierField { entries: self.entries.iter().map(|(b, x)| (*b, f(*b, *x))).collect() }
    }

    /// Largest `|b|` over the support (0 for an empty field).
    pub fn support_radius(&self, lat: &Lattice) -> f64 {
        self.support().map(|b| lat.norm(b)).fold(0.0, f64::max)
    }
}

/// Bilinear (non-conjugating) dot product of complex 2-vectors.
#[inline]
pub fn cdot(a: CVec2, b: CVec2) -> C {
    a[0] * b[0] + a[1] * b[1]
}

/// Dot product of a real vector with a complex 2-vector.
#[inline]
pub fn rdot(a: [f64; 2], b: CVec2) -> C {
    b[0] * a[0] + b[1] * a[1]
}

/// `q̂(b) = −b·Â(b) + Σ_c Â(c)·Â(b−c) + V̂(b)`.
pub fn q_field(lat: &Lattice, a: &VectorField, v: &ScalarField) -> ScalarField {
    let mut q = ScalarField::new();
    for (b, x) in v.iter() {
        q.accumulate(b, x);
    }
    for (b, x) in a.iter() {
        q.accumulate(b, -rdot(lat.point(b), x));
    }
    for (c, x) in a.iter() {
        for (e, y) in a.iter() {
            q.accumulate(c + e, cdot(x, y));
        }
    }
    q
}

/// `Σ_b (1 + |b|^β) |f(b)|`, where β = 0 is read as the plain `l¹` norm
/// (unit weight). Points with `b = 0` are skipped when `exclude_zero` is set.
pub fn weighted_l1<T: FieldValue>(lat: &Lattice, f: &FourierField<T>, beta: f64, exclude_zero: bool) -> f64 {
    f.iter()
        .filter(|(b, _)| !(exclude_zero && b.is_zero()))
        .map(|(b, x)| {
            let w = if beta == 0.0 { 1.0 } else { 1.0 + lat.norm(b).powf(beta) };
            w * x.norm()
        })
        .sum()
}

/// Outcome of the magnetic smallness test `‖(1+b²)Â‖_{l¹(b≠0)} < 2ε/63`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub pass: bool,
    pub weighted_norm: f64,
    pub limit: f64,
    pub margin: f64,
}

pub fn check_smallness(lat: &Lattice, a: &VectorField, epsilon: f64) -> SmallnessReport {
    let weighted_norm = weighted_l1(lat, a, 2.0, true);
    let limit = 2.0 * epsilon / 63.0;
    SmallnessReport { pass: weighted_norm < limit, weighted_norm, limit, margin: limit - weighted_norm }
}

/// `R = max{1, α, 2Λ, 140‖Â‖_{l¹}, (4/ε)‖(1+b²)q̂‖_{l¹}}`.
pub fn radius_r(lat: &Lattice, a: &VectorField, q: &ScalarField, epsilon: f64) -> f64 {
    [
        1.0,
        lat.alpha,
        2.0 * lat.lambda,
        140.0 * weighted_l1(lat, a, 0.0, false),
        4.0 / epsilon * weighted_l1(lat, q, 2.0, false),
    ]
    .into_iter()
    .fold(f64::MIN, f64::max)
}

/// Tube radius, low-|v| cutoff, the constant `R`, and the truncation radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub rho: f64,
    pub radius_r: f64,
    /// Radius of the ball of dual points kept around every element of `G`.
    pub window_radius: f64,
}

/// Optional user overrides; `None` selects the documented default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub window_radius: Option<f64>,
}

/// Lattice, potentials, the derived field `q`, and the parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub lattice: Lattice,
    pub a: VectorField,
    pub v: ScalarField,
    pub q: ScalarField,
    pub params: ModelParams,
}

impl Model {
    /// Assembles a model and validates `0 < ε < Λ/6`, `ρ ≥ R`, `Â(0) = 0`.
    ///
    /// Defaults: `ε = Λ/12`, `ρ = R`, and a window radius of
    /// `max(12Λ, ρ/2 + 4Λ, 2s + 3Λ)` with `s` the support radius of `Â`
    /// (enough to contain the near-field splits).
    pub fn new(lattice: Lattice, a: VectorField, v: ScalarField, ov: ParamOverrides) -> Result<Self> {
        let a0 = a.get(DualPoint::ZERO);
        if a0 != [ZERO, ZERO] {
            return Err(Error::NonZeroMean(format!("({}, {})", a0[0], a0[1])));
        }
        let lam = lattice.lambda;
        let epsilon = ov.epsilon.unwrap_or(lam / 12.0);
        if !(epsilon > 0.0 && epsilon < lam / 6.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {epsilon} violates 0 < epsilon < Lambda/6 = {}",
                lam / 6.0
            )));
        }
        let q = q_field(&lattice, &a, &v);
        let radius_r = radius_r(&lattice, &a, &q, epsilon);
        let rho = ov.rho.unwrap_or(radius_r);
        if !(rho >= radius_r) {
            return Err(Error::InvalidParameter(format!("rho = {rho} violates rho >= R = {radius_r}")));
        }
        let s = a.support_radius(&lattice);
        let window_radius =
            ov.window_radius.unwrap_or((12.0 * lam).max(0.5 * rho + 4.0 * lam).max(2.0 * s + 3.0 * lam));
        if !(window_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("window_radius = {window_radius} must be positive")));
        }
        Ok(Model { lattice, a, v, q, params: ModelParams { epsilon, rho, radius_r, window_radius } })
    }

    /// The free operator on the given lattice.
    pub fn free(lattice: Lattice, ov: ParamOverrides) -> Result<Self> {
        Self::new(lattice, VectorField::new(), ScalarField::new(), ov)
    }

    pub fn smallness(&self) -> SmallnessReport {
        check_smallness(&self.lattice, &self.a, self.params.epsilon)
    }

    /// True when both potentials vanish identically.
    pub fn is_free(&self) -> bool {
        self.a.is_zero() && self.v.is_zero()
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        if !(rho >= self.params.radius_r) {
            return Err(Error::InvalidParameter(format!("rho = {rho} violates rho >= R = {}", self.params.radius_r)));
        }
        let mut m = self.clone();
        m.params.rho = rho;
        Ok(m)
    }

    pub fn with_window_radius(&self, w: f64) -> Self {
        let mut m = self.clone();
        m.params.window_radius = w;
        m
    }

    /// `‖Â‖_{l¹}` and `‖q̂‖_{l¹}`.
    pub fn a_l1(&self) -> f64 {
        weighted_l1(&self.lattice, &self.a, 0.0, false)
    }
    pub fn q_l1(&self) -> f64 {
        weighted_l1(&self.lattice, &self.q, 0.0, false)
    }
}

/// Removes the mean of `Â` by the gauge shift `k ↦ k − Â(0)`: returns the
/// shifted field and the shift. `H_k(A, V)` equals `H_{k−Â(0)}(A−Â(0), V)`.
pub fn gauge_normalize(a: &VectorField) -> (VectorField, CVec2) {
    let a0 = a.get(DualPoint::ZERO);
    let out = FourierField { entries: a.iter().filter(|(b, _)| !b.is_zero()).collect() };
    (out, a0)
}
