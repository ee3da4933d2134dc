//! Run configuration and potential specification files (TOML).
//!
//! A potential file describes the lattice, the Fourier coefficients of
//! `A = (A1, A2)` and `V`, and optional parameter overrides:
//!
//! ```toml
//! [lattice]
//! kind = "square_2pi"            # or gamma1 = [x, y], gamma2 = [x, y]
//!
//! [params]
//! epsilon = 0.08
//!
//! [potential]
//! hermitian = true               # add the conjugate at −b for every entry
//! v  = [[1, 0, 3.0e-3, 1.0e-3]]  # (b1, b2, re, im)
//! a1 = [[0, 1, 1.4e-4, -0.6e-4]]
//! a2 = [[0, 1, 0.0, 1.3e-4]]
//! ```
//!
//! A run configuration names either a potential file (relative to the
//! configuration file) or a built-in preset, adds parameter overrides on
//! top, and carries the per-command settings. Every inconsistency is
//! reported when the file is loaded, naming the violated constraint.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::{CVec2, Model, ParamOverrides, ScalarField, VectorField, ZERO};
use crate::lattice::{DualPoint, Lattice};
use crate::presets;

/// Lattice generators, or a named lattice.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<[f64; 2]>,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        match (&self.kind, self.gamma1, self.gamma2) {
            (Some(k), None, None) if k == "square_2pi" => Ok(Lattice::square_2pi()),
            (Some(k), None, None) => Err(Error::Config(format!("unknown lattice kind {k:?} (known: \"square_2pi\")"))),
            (None, Some(g1), Some(g2)) => Lattice::new(g1, g2),
            _ => Err(Error::Config("lattice needs either `kind` or both `gamma1` and `gamma2`".into())),
        }
    }
}

/// `ε`, `ρ` and window-radius overrides.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<f64>,
}

impl ParamsSpec {
    /// `self` where set, otherwise `base`.
    pub fn over(&self, base: &ParamsSpec) -> ParamsSpec {
        ParamsSpec {
            epsilon: self.epsilon.or(base.epsilon),
            rho: self.rho.or(base.rho),
            window_radius: self.window_radius.or(base.window_radius),
        }
    }

    pub fn overrides(&self) -> ParamOverrides {
        ParamOverrides { epsilon: self.epsilon, rho: self.rho, window_radius: self.window_radius }
    }
}

/// Coefficient lists `(b1, b2, re, im)` per field component.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntriesSpec {
    #[serde(default)]
    pub hermitian: bool,
    #[serde(default)]
    pub v: Vec<[f64; 4]>,
    #[serde(default)]
    pub a1: Vec<[f64; 4]>,
    #[serde(default)]
    pub a2: Vec<[f64; 4]>,
}

/// The contents of a potential file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub potential: EntriesSpec,
}

fn dual_index(x: f64, what: &str) -> Result<i64> {
    if x.fract() != 0.0 || !x.is_finite() || x.abs() > 1e9 {
        return Err(Error::Config(format!("{what}: lattice index {x} is not an integer")));
    }
    Ok(x as i64)
}

/// Parses one component list, expanding conjugates when `hermitian`.
fn component(entries: &[[f64; 4]], hermitian: bool, name: &str) -> Result<BTreeMap<DualPoint, C>> {
    let mut out = BTreeMap::new();
    let mut put = |b: DualPoint, x: C| -> Result<()> {
        if out.insert(b, x).is_some() {
            return Err(Error::Config(format!("{name}: duplicate coefficient at b = {b}")));
        }
        Ok(())
    };
    for e in entries {
        let b = DualPoint(dual_index(e[0], name)?, dual_index(e[1], name)?);
        let x = C::new(e[2], e[3]);
        if !(x.re.is_finite() && x.im.is_finite()) {
            return Err(Error::Config(format!("{name}: non-finite coefficient at b = {b}")));
        }
        if hermitian && b.is_zero() {
            if x.im != 0.0 {
                return Err(Error::Config(format!("{name}: hermitian field needs a real value at b = 0")));
            }
            put(b, x)?;
        } else if hermitian {
            put(b, x)?;
            put(-b, x.conj())?;
        } else {
            put(b, x)?;
        }
    }
    Ok(out)
}

impl PotentialSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("potential file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The lattice and the fields `A`, `V`.
    pub fn fields(&self) -> Result<(Lattice, VectorField, ScalarField)> {
        let lat = self.lattice.build()?;
        let h = self.potential.hermitian;
        let v = component(&self.potential.v, h, "v")?;
        let a1 = component(&self.potential.a1, h, "a1")?;
        let a2 = component(&self.potential.a2, h, "a2")?;
        let vf = ScalarField::from_entries(v)?;
        let mut merged: BTreeMap<DualPoint, CVec2> = BTreeMap::new();
        for (b, x) in a1 {
            merged.entry(b).or_insert([ZERO, ZERO])[0] = x;
        }
        for (b, x) in a2 {
            merged.entry(b).or_insert([ZERO, ZERO])[1] = x;
        }
        Ok((lat, VectorField::from_entries(merged)?, vf))
    }

    /// The model with `extra` overriding the file's own parameters.
    pub fn model(&self, extra: &ParamsSpec) -> Result<Model> {
        let (lat, a, v) = self.fields()?;
        Model::new(lat, a, v, extra.over(&self.params).overrides())
    }

    /// The spec of an assembled model (non-Hermitian form, every entry listed).
    pub fn from_model(model: &Model) -> Self {
        let lat = &model.lattice;
        let lattice = if *lat == Lattice::square_2pi() {
            LatticeSpec { kind: Some("square_2pi".into()), ..Default::default() }
        } else {
            LatticeSpec { kind: None, gamma1: Some(lat.gamma1), gamma2: Some(lat.gamma2) }
        };
        let row = |b: DualPoint, x: C| [b.0 as f64, b.1 as f64, x.re, x.im];
        let v = model.v.iter().map(|(b, x)| row(b, x)).collect();
        let a1 = model.a.iter().filter(|(_, x)| x[0] != ZERO).map(|(b, x)| row(b, x[0])).collect();
        let a2 = model.a.iter().filter(|(_, x)| x[1] != ZERO).map(|(b, x)| row(b, x[1])).collect();
        let p = &model.params;
        PotentialSpec {
            lattice,
            params: ParamsSpec { epsilon: Some(p.epsilon), rho: Some(p.rho), window_radius: Some(p.window_radius) },
            potential: EntriesSpec { hermitian: false, v, a1, a2 },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// A built-in model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PresetSpec {
    Free,
    Compact,
    Axis { n_max: i64, amplitude: f64 },
    Random { seed: u64, v_max: f64 },
}

impl PresetSpec {
    pub fn model(&self) -> Model {
        match *self {
            PresetSpec::Free => presets::free(),
            PresetSpec::Compact => presets::compact(),
            PresetSpec::Axis { n_max, amplitude } => presets::axis_family(n_max, amplitude),
            PresetSpec::Random { seed, v_max } => presets::random_admissible(seed, v_max),
        }
    }
}

/// Real-slice sampling of the free curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreecurveConfig {
    pub k2_min: f64,
    pub k2_max: f64,
    pub samples: usize,
    /// Lines `N_ν(b)` with `|b| ≤ window_radius` are drawn; a negative
    /// radius selects no lines.
    pub window_radius: f64,
}

impl Default for FreecurveConfig {
    fn default() -> Self {
        FreecurveConfig { k2_min: -3.0, k2_max: 3.0, samples: 121, window_radius: 4.0 }
    }
}

/// Regular-sheet tracing along `y = t + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub nu: u8,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Complex offset `[re, im]` added to every `t`.
    pub offset: [f64; 2],
    pub tol: f64,
    pub max_iters: usize,
    /// Largest accepted residual `|F(η, y)|` at a solved point.
    pub residual_limit: f64,
    pub auto_rho: bool,
    pub kernel_check: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            nu: 1,
            t_min: 4.0,
            t_max: 40.0,
            samples: 24,
            offset: [0.25, 0.25],
            tol: 1e-13,
            max_iters: 40,
            residual_limit: 1e-9,
            auto_rho: true,
            kernel_check: false,
        }
    }
}

/// Handle analysis for a list of `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandlesConfig {
    pub d: Vec<[i64; 2]>,
    /// Curve samples per handle: radii × angles.
    pub curve_radii: usize,
    pub curve_angles: usize,
}

impl Default for HandlesConfig {
    fn default() -> Self {
        HandlesConfig { d: vec![[0, 3], [0, 4], [0, 6]], curve_radii: 3, curve_angles: 8 }
    }
}

/// The bound suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random sample points per region.
    pub samples: usize,
    /// Range of `|v|` for regular-region samples (the lower end is raised
    /// above `R` when needed).
    pub v_min: f64,
    pub v_max: f64,
    /// Every `derivative_stride`-th regular sample also runs the
    /// finite-difference derivative checks.
    pub derivative_stride: usize,
    /// Partners `d` for handle-region samples.
    pub handle_d: Vec<[i64; 2]>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { samples: 100, v_min: 4.0, v_max: 60.0, derivative_stride: 10, handle_d: vec![[0, 6], [0, 9]] }
    }
}

/// One point `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// `[re, im]` of `k1` and `k2`.
    pub k1: [f64; 2],
    pub k2: [f64; 2],
    /// Radius of the ball of dual points (defaults to the model's window radius).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { k1: [0.01, 6.25], k2: [6.25, 0.25], window_radius: None }
    }
}

/// A run configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Potential file, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetSpec>,
    /// Overrides applied on top of the potential's own parameters.
    #[serde(default)]
    pub params: ParamsSpec,
    /// Output directory, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub freecurve: FreecurveConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub handles: HandlesConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

/// What the hash covers: everything that can change a result.
#[derive(Serialize)]
struct Canonical<'a> {
    model: &'a PotentialSpec,
    seed: u64,
    freecurve: &'a FreecurveConfig,
    trace: &'a TraceConfig,
    handles: &'a HandlesConfig,
    verify: &'a VerifyConfig,
    spectrum: &'a SpectrumConfig,
}

/// A loaded, validated configuration with its model.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: RunConfig,
    pub model: Model,
    /// Output directory.
    pub out: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("run configuration: {e}")))
    }

    /// Checks the command settings that do not depend on the model.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let t = &self.trace;
        if t.nu != 1 && t.nu != 2 {
            return bad(format!("trace.nu = {} violates nu in {{1, 2}}", t.nu));
        }
        if !(t.t_min <= t.t_max) || t.samples == 0 {
            return bad("trace needs t_min <= t_max and samples >= 1".into());
        }
        if !(t.tol > 0.0) || t.max_iters == 0 {
            return bad("trace needs tol > 0 and max_iters >= 1".into());
        }
        let f = &self.freecurve;
        if !(f.k2_min <= f.k2_max) {
            return bad(format!("freecurve.k2_min = {} violates k2_min <= k2_max = {}", f.k2_min, f.k2_max));
        }
        let v = &self.verify;
        if !(0.0 < v.v_min && v.v_min < v.v_max) || v.derivative_stride == 0 {
            return bad("verify needs 0 < v_min < v_max and derivative_stride >= 1".into());
        }
        if self.handles.curve_radii == 0 || self.handles.curve_angles == 0 {
            return bad("handles needs curve_radii >= 1 and curve_angles >= 1".into());
        }
        Ok(())
    }

    /// Builds the model; `base` resolves a relative potential path.
    pub fn model(&self, base: &Path) -> Result<Model> {
        let model = match (&self.potential, &self.preset) {
            (Some(p), None) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                PotentialSpec::load(&path)?.model(&self.params)
            }
            (None, Some(preset)) => {
                // keep the preset's ε; ρ and the window radius follow the defaults
                let m = preset.model();
                let mut spec = PotentialSpec::from_model(&m);
                spec.params = ParamsSpec { epsilon: Some(m.params.epsilon), rho: None, window_radius: None };
                spec.model(&self.params)
            }
            (None, None) => Err(Error::Config("configuration names neither `potential` nor `preset`".into())),
            (Some(_), Some(_)) => Err(Error::Config("configuration names both `potential` and `preset`".into())),
        };
        model.map_err(|e| match e {
            Error::Config(m) | Error::InvalidParameter(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }

    /// Hex SHA-256 of the canonical form of the model and the settings.
    pub fn hash(&self, model: &Model) -> String {
        let spec = PotentialSpec::from_model(model);
        let c = Canonical {
            model: &spec,
            seed: self.seed,
            freecurve: &self.freecurve,
            trace: &self.trace,
            handles: &self.handles,
            verify: &self.verify,
            spectrum: &self.spectrum,
        };
        let text = toml::to_string(&c).expect("canonical configuration serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Run {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_config(RunConfig::parse(&text)?, base)
    }

    pub fn from_config(config: RunConfig, base: &Path) -> Result<Self> {
        config.validate()?;
        let model = config.model(base)?;
        let out = match &config.out {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => base.join(p),
            None => base.join("out"),
        };
        Ok(Run { config, model, out })
    }

    pub fn hash(&self) -> String {
        self.config.hash(&self.model)
    }
}
