//! SPDE coefficients: the constant `kappa^2` and the diffusion tensor field
//! `H(s) = gamma * I + v(s) v(s)^T`.
//!
//! Three vector-field representations are supported:
//!
//! * a constant vector,
//! * a fixed base field scaled by `sqrt(beta)` (so `H = gamma I + beta b b^T`),
//! * a truncated real Fourier series on the periodic domain.
//!
//! [`ParamLayout`] packs the free scalars of a representation into a flat
//! parameter vector `theta` whose first entry is always `gamma`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub const IDENTITY: Self = Self { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    /// `gamma * I + v v^T`.
    pub fn from_gamma_and_vector(gamma: f64, v: [f64; 2]) -> Self {
        Self { xx: gamma + v[0] * v[0], xy: v[0] * v[1], yy: gamma + v[1] * v[1] }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_trace = 0.5 * self.trace();
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        (half_trace + r, half_trace - r)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { xx: self.xx - other.xx, xy: self.xy - other.xy, yy: self.yy - other.yy }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { xx: c * self.xx, xy: c * self.xy, yy: c * self.yy }
    }

    /// `R H R^T` for the rotation by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let xx = c * c * self.xx - 2.0 * s * c * self.xy + s * s * self.yy;
        let yy = s * s * self.xx + 2.0 * s * c * self.xy + c * c * self.yy;
        let xy = s * c * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        Self { xx, xy, yy }
    }
}

/// The constant reaction coefficient `kappa^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaSpec {
    kappa_sq: f64,
}

impl KappaSpec {
    pub fn new(kappa_sq: f64) -> Result<Self> {
        if !(kappa_sq.is_finite() && kappa_sq > 0.0) {
            return Err(Error::InvalidSpec(format!("kappa^2 must be positive, got {kappa_sq}")));
        }
        Ok(Self { kappa_sq })
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }
}

impl Default for KappaSpec {
    fn default() -> Self {
        Self { kappa_sq: 1.0 }
    }
}

/// Whether `(k, l)` is in the half-plane `{k > 0} U {k = 0, l > 0}` that
/// indexes a real Fourier series without conjugate duplicates.
pub fn is_half_plane_frequency(k: i64, l: i64) -> bool {
    k > 0 || (k == 0 && l > 0)
}

/// Non-zero frequencies of a truncated real Fourier series, kept in
/// lexicographic order. The constant term is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrequencySet {
    freqs: Vec<(i64, i64)>,
}

impl FrequencySet {
    pub fn new(freqs: impl IntoIterator<Item = (i64, i64)>) -> Result<Self> {
        let mut freqs: Vec<(i64, i64)> = freqs.into_iter().collect();
        for &(k, l) in &freqs {
            if !is_half_plane_frequency(k, l) {
                return Err(Error::InvalidSpec(format!("frequency ({k}, {l}) is not in the half-plane index set")));
            }
        }
        freqs.sort_unstable();
        if freqs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("duplicate frequency".into()));
        }
        Ok(Self { freqs })
    }

    /// All frequencies with `|k| <= max_k` and `|l| <= max_l` in the half-plane.
    pub fn truncated(max_k: i64, max_l: i64) -> Self {
        let freqs: Vec<(i64, i64)> = (0..=max_k)
            .flat_map(|k| (-max_l..=max_l).map(move |l| (k, l)))
            .filter(|&(k, l)| is_half_plane_frequency(k, l))
            .collect();
        Self::new(freqs).expect("generated set is valid")
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.freqs.iter().copied()
    }

    pub fn position(&self, k: i64, l: i64) -> Option<usize> {
        self.freqs.binary_search(&(k, l)).ok()
    }
}

/// Cosine/sine coefficients of one frequency for both components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierTerm {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

/// `v(x, y) = c + sum_{(k,l)} [A cos(phase) + B sin(phase)]` with
/// `phase = 2 pi (k x / A + l y / B)`, one such series per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierVectorField {
    width: f64,
    height: f64,
    constant: [f64; 2],
    freqs: FrequencySet,
    terms: Vec<FourierTerm>,
}

impl FourierVectorField {
    pub fn new(
        width: f64,
        height: f64,
        constant: [f64; 2],
        freqs: FrequencySet,
        terms: Vec<FourierTerm>,
    ) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidSpec("Fourier field needs a positive domain".into()));
        }
        if terms.len() != freqs.len() {
            return Err(Error::InvalidSpec(format!(
                "{} frequencies but {} coefficient sets",
                freqs.len(),
                terms.len()
            )));
        }
        Ok(Self { width, height, constant, freqs, terms })
    }

    /// Field with every coefficient zero.
    pub fn zeros(width: f64, height: f64, freqs: FrequencySet) -> Self {
        let terms = vec![FourierTerm::default(); freqs.len()];
        Self { width, height, constant: [0.0; 2], freqs, terms }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn constant(&self) -> [f64; 2] {
        self.constant
    }

    pub fn frequencies(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn terms(&self) -> &[FourierTerm] {
        &self.terms
    }

    /// Number of scalar coefficients: two constants plus four per frequency.
    pub fn num_coefficients(&self) -> usize {
        2 + 4 * self.freqs.len()
    }

    pub fn phase(&self, k: i64, l: i64, p: Point) -> f64 {
        2.0 * PI * (k as f64 * p.x / self.width + l as f64 * p.y / self.height)
    }

    pub fn value_at(&self, p: Point) -> [f64; 2] {
        let mut v = self.constant;
        for ((k, l), t) in self.freqs.iter().zip(&self.terms) {
            let (s, c) = self.phase(k, l, p).sin_cos();
            v[0] += t.a1 * c + t.b1 * s;
            v[1] += t.a2 * c + t.b2 * s;
        }
        v
    }
}

/// One term `amplitude * sin(2 pi (k x / A + l y / B) + phase)` of a
/// closed-form periodic stream function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub k: i64,
    pub l: i64,
    #[serde(default)]
    pub phase: f64,
}

/// Periodic scalar function given as a finite sum of sinusoids. Its gradient
/// is available in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFunction {
    pub width: f64,
    pub height: f64,
    pub terms: Vec<SineTerm>,
}

impl StreamFunction {
    pub fn new(width: f64, height: f64, terms: Vec<SineTerm>) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidSpec("stream function needs a positive domain".into()));
        }
        Ok(Self { width, height, terms })
    }

    fn wave(&self, t: &SineTerm, p: Point) -> f64 {
        2.0 * PI * (t.k as f64 * p.x / self.width + t.l as f64 * p.y / self.height) + t.phase
    }

    pub fn value(&self, p: Point) -> f64 {
        self.terms.iter().map(|t| t.amplitude * self.wave(t, p).sin()).sum()
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let c = t.amplitude * self.wave(t, p).cos();
            g[0] += c * 2.0 * PI * t.k as f64 / self.width;
            g[1] += c * 2.0 * PI * t.l as f64 / self.height;
        }
        g
    }

    /// Gradient rotated 90 degrees counter-clockwise: `(-f_y, f_x)`.
    pub fn rotated_gradient(&self, p: Point) -> [f64; 2] {
        let g = self.gradient(p);
        [-g[1], g[0]]
    }
}

/// Samples on the half-step lattice of a grid: point `(p, q)` sits at
/// `(p h_x / 2, q h_y / 2)` for `p < 2M`, `q < 2N`. Cell centres are the
/// odd-odd points and face centres the odd-even / even-odd points.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice<T> {
    grid: GridSpec,
    values: Vec<T>,
}

impl<T: Copy> Lattice<T> {
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let (w, h) = (2 * grid.cells_x(), 2 * grid.cells_y());
        let mut values = Vec::with_capacity(w * h);
        for q in 0..h {
            for p in 0..w {
                values.push(f(p, q));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<T>) -> Result<Self> {
        let expected = 4 * grid.num_cells();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        (2 * self.grid.cells_x(), 2 * self.grid.cells_y())
    }

    /// Value at lattice point `(p, q)`, indices wrapped periodically.
    pub fn get(&self, p: i64, q: i64) -> T {
        let (w, h) = self.dims();
        let p = p.rem_euclid(w as i64) as usize;
        let q = q.rem_euclid(h as i64) as usize;
        self.values[q * w + p]
    }

    pub fn point(&self, p: usize, q: usize) -> Point {
        Point::new(0.5 * p as f64 * self.grid.step_x(), 0.5 * q as f64 * self.grid.step_y())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl Lattice<[f64; 2]> {
    /// Bilinear interpolation between lattice points; exact at lattice points.
    pub fn interpolate(&self, p: Point) -> [f64; 2] {
        let p = self.grid.wrap_point(p);
        let fx = p.x / (0.5 * self.grid.step_x());
        let fy = p.y / (0.5 * self.grid.step_y());
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - x0, fy - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let mut out = [0.0; 2];
        for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
            for (dy, wy) in [(0, 1.0 - ty), (1, ty)] {
                let w = wx * wy;
                if w != 0.0 {
                    let v = self.get(x0 + dx, y0 + dy);
                    out[0] += w * v[0];
                    out[1] += w * v[1];
                }
            }
        }
        out
    }

    /// Centred-difference divergence at every lattice point.
    pub fn divergence(&self) -> Lattice<f64> {
        let hx = self.grid.step_x();
        let hy = self.grid.step_y();
        Lattice::from_fn(self.grid, |p, q| {
            let (p, q) = (p as i64, q as i64);
            (self.get(p + 1, q)[0] - self.get(p - 1, q)[0]) / hx + (self.get(p, q + 1)[1] - self.get(p, q - 1)[1]) / hy
        })
    }
}

/// A scalar potential from which a divergence-free vector field is derived.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    ClosedForm(StreamFunction),
    Sampled(Lattice<f64>),
}

/// Sample `v = R_90 grad f = (-f_y, f_x)` on the half-step lattice of `grid`.
///
/// Closed-form potentials are differentiated analytically. Sampled ones use
/// centred differences over neighbouring lattice points (spacing `h / 2`).
pub fn rotated_gradient_field(f: &ScalarField, grid: &GridSpec) -> Result<Lattice<[f64; 2]>> {
    match f {
        ScalarField::ClosedForm(sf) => Ok(Lattice::from_fn(*grid, |p, q| {
            let pt = Point::new(0.5 * p as f64 * grid.step_x(), 0.5 * q as f64 * grid.step_y());
            sf.rotated_gradient(pt)
        })),
        ScalarField::Sampled(samples) => {
            if samples.grid() != grid {
                return Err(Error::InvalidSpec("sampled potential lives on a different grid".into()));
            }
            let hx = grid.step_x();
            let hy = grid.step_y();
            Ok(Lattice::from_fn(*grid, |p, q| {
                let (p, q) = (p as i64, q as i64);
                let fx = (samples.get(p + 1, q) - samples.get(p - 1, q)) / hx;
                let fy = (samples.get(p, q + 1) - samples.get(p, q - 1)) / hy;
                [-fy, fx]
            }))
        }
    }
}

/// Base vector field of a fixed-field parametrization.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseField {
    /// Rotated gradient of a closed-form stream function.
    StreamFunction(StreamFunction),
    /// Samples on the half-step lattice.
    Lattice(Lattice<[f64; 2]>),
}

impl BaseField {
    pub fn value_at(&self, p: Point) -> [f64; 2] {
        match self {
            BaseField::StreamFunction(sf) => sf.rotated_gradient(p),
            BaseField::Lattice(l) => l.interpolate(p),
        }
    }

    fn domain(&self) -> (f64, f64) {
        match self {
            BaseField::StreamFunction(sf) => (sf.width, sf.height),
            BaseField::Lattice(l) => (l.grid().width(), l.grid().height()),
        }
    }
}

/// The vector field `v(s)` of the diffusion tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorFieldSpec {
    Constant([f64; 2]),
    /// `sqrt(beta) * base(s)`; the scale is stored already square-rooted.
    FixedScaled {
        base: BaseField,
        scale: f64,
    },
    Fourier(FourierVectorField),
}

impl VectorFieldSpec {
    pub fn fixed_scaled(base: BaseField, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidSpec(format!("beta must be non-negative, got {beta}")));
        }
        Ok(Self::FixedScaled { base, scale: beta.sqrt() })
    }

    /// `beta` of a fixed-field spec.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Self::FixedScaled { scale, .. } => Some(scale * scale),
            _ => None,
        }
    }

    fn domain(&self) -> Option<(f64, f64)> {
        match self {
            Self::Constant(_) => None,
            Self::FixedScaled { base, .. } => Some(base.domain()),
            Self::Fourier(f) => Some((f.width, f.height)),
        }
    }

    /// Evaluate at a point of the domain `[0, A) x [0, B)`.
    pub fn eval(&self, p: Point) -> Result<[f64; 2]> {
        if let Some((a, b)) = self.domain() {
            if !(p.x >= 0.0 && p.x < a && p.y >= 0.0 && p.y < b) {
                return Err(Error::OutsideDomain { x: p.x, y: p.y, a, b });
            }
        }
        Ok(self.value_at(p))
    }

    /// Evaluate without a domain check. Every representation is periodic, so
    /// points outside the domain give the value at the wrapped point.
    pub fn value_at(&self, p: Point) -> [f64; 2] {
        match self {
            Self::Constant(v) => *v,
            Self::FixedScaled { base, scale } => {
                let b = base.value_at(p);
                [scale * b[0], scale * b[1]]
            }
            Self::Fourier(f) => f.value_at(p),
        }
    }

    /// The same field with its sign flipped.
    pub fn negated(&self) -> Self {
        match self {
            Self::Constant(v) => Self::Constant([-v[0], -v[1]]),
            Self::FixedScaled { base, scale } => Self::FixedScaled {
                base: match base {
                    BaseField::StreamFunction(sf) => {
                        let mut sf = sf.clone();
                        sf.terms.iter_mut().for_each(|t| t.amplitude = -t.amplitude);
                        BaseField::StreamFunction(sf)
                    }
                    BaseField::Lattice(l) => BaseField::Lattice(Lattice {
                        grid: l.grid,
                        values: l.values.iter().map(|v| [-v[0], -v[1]]).collect(),
                    }),
                },
                scale: *scale,
            },
            Self::Fourier(f) => {
                let mut f = f.clone();
                f.constant = [-f.constant[0], -f.constant[1]];
                for t in &mut f.terms {
                    *t = FourierTerm { a1: -t.a1, b1: -t.b1, a2: -t.a2, b2: -t.b2 };
                }
                Self::Fourier(f)
            }
        }
    }
}

/// `H(s) = gamma I + v(s) v(s)^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropySpec {
    gamma: f64,
    field: VectorFieldSpec,
}

impl AnisotropySpec {
    pub fn new(gamma: f64, field: VectorFieldSpec) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidSpec(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { gamma, field })
    }

    /// `H = gamma I`.
    pub fn isotropic(gamma: f64) -> Result<Self> {
        Self::new(gamma, VectorFieldSpec::Constant([0.0, 0.0]))
    }

    /// Constant `H = gamma I + beta w w^T` with `w = (cos angle, sin angle)`.
    pub fn rotated_constant(gamma: f64, beta: f64, angle: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidSpec(format!("beta must be non-negative, got {beta}")));
        }
        let r = beta.sqrt();
        Self::new(gamma, VectorFieldSpec::Constant([r * angle.cos(), r * angle.sin()]))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn field(&self) -> &VectorFieldSpec {
        &self.field
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.field, VectorFieldSpec::Constant(_))
    }

    pub fn eval_h(&self, p: Point) -> Result<SymMat2> {
        Ok(SymMat2::from_gamma_and_vector(self.gamma, self.field.eval(p)?))
    }

    /// [`AnisotropySpec::eval_h`] without the domain check.
    pub fn h_at(&self, p: Point) -> SymMat2 {
        SymMat2::from_gamma_and_vector(self.gamma, self.field.value_at(p))
    }
}

/// Maps between a flat parameter vector and an [`AnisotropySpec`].
///
/// Orderings:
///
/// * `Constant`: `[gamma, v1, v2]`
/// * `FixedField`: `[gamma, beta]`
/// * `Fourier`: `[gamma, A1_00, A2_00, (A1, B1, A2, B2) per frequency]`,
///   frequencies in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamLayout {
    Constant,
    FixedField(BaseField),
    Fourier { width: f64, height: f64, freqs: FrequencySet },
}

impl ParamLayout {
    pub fn fourier(width: f64, height: f64, freqs: FrequencySet) -> Self {
        Self::Fourier { width, height, freqs }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Constant => 3,
            Self::FixedField(_) => 2,
            Self::Fourier { freqs, .. } => 3 + 4 * freqs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Human-readable parameter names in layout order.
    pub fn names(&self) -> Vec<String> {
        match self {
            Self::Constant => vec!["gamma".into(), "v1".into(), "v2".into()],
            Self::FixedField(_) => vec!["gamma".into(), "beta".into()],
            Self::Fourier { freqs, .. } => {
                let mut names = vec!["gamma".into(), "A1[0,0]".into(), "A2[0,0]".into()];
                for (k, l) in freqs.iter() {
                    for c in ["A1", "B1", "A2", "B2"] {
                        names.push(format!("{c}[{k},{l}]"));
                    }
                }
                names
            }
        }
    }

    /// Whether the vector-field part enters `H` only through `v v^T`, so that
    /// negating those parameters leaves the model unchanged.
    pub fn has_sign_symmetry(&self) -> bool {
        !matches!(self, Self::FixedField(_))
    }

    /// `theta` with the vector-field parameters negated.
    pub fn flip_sign(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        if self.has_sign_symmetry() {
            out.iter_mut().skip(1).for_each(|x| *x = -*x);
        }
        out
    }

    pub fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::LayoutMismatch { expected: self.len(), got: theta.len() });
        }
        Ok(())
    }

    /// Feasibility of `theta` under the parameter constraints
    /// (`gamma > 0`, and `beta >= 0` for fixed fields).
    pub fn check_feasible(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Infeasible("non-finite parameter".into()));
        }
        if theta[0] <= 0.0 {
            return Err(Error::Infeasible(format!("gamma = {} is not positive", theta[0])));
        }
        if let Self::FixedField(_) = self {
            if theta[1] < 0.0 {
                return Err(Error::Infeasible(format!("beta = {} is negative", theta[1])));
            }
        }
        Ok(())
    }

    pub fn unpack(&self, theta: &[f64]) -> Result<AnisotropySpec> {
        self.check_feasible(theta)?;
        let gamma = theta[0];
        let field = match self {
            Self::Constant => VectorFieldSpec::Constant([theta[1], theta[2]]),
            Self::FixedField(base) => VectorFieldSpec::fixed_scaled(base.clone(), theta[1])?,
            Self::Fourier { width, height, freqs } => {
                let terms = theta[3..]
                    .chunks_exact(4)
                    .map(|c| FourierTerm { a1: c[0], b1: c[1], a2: c[2], b2: c[3] })
                    .collect();
                VectorFieldSpec::Fourier(FourierVectorField::new(
                    *width,
                    *height,
                    [theta[1], theta[2]],
                    freqs.clone(),
                    terms,
                )?)
            }
        };
        AnisotropySpec::new(gamma, field)
    }

    /// Inverse of [`ParamLayout::unpack`]. Fails when the spec's field is not
    /// representable in this layout.
    pub fn pack(&self, spec: &AnisotropySpec) -> Result<Vec<f64>> {
        let mismatch = || Error::InvalidSpec("field does not match the parameter layout".into());
        let mut theta = vec![spec.gamma()];
        match (self, spec.field()) {
            (Self::Constant, VectorFieldSpec::Constant(v)) => theta.extend_from_slice(v),
            (Self::FixedField(base), VectorFieldSpec::FixedScaled { base: b, scale }) => {
                if base != b {
                    return Err(mismatch());
                }
                theta.push(scale * scale);
            }
            (Self::Fourier { width, height, freqs }, VectorFieldSpec::Fourier(f)) => {
                if f.width != *width || f.height != *height {
                    return Err(mismatch());
                }
                theta.extend_from_slice(&f.constant);
                // coefficients of frequencies outside the spec's set stay zero
                let mut coeffs = vec![0.0; 4 * freqs.len()];
                for ((k, l), t) in f.freqs.iter().zip(&f.terms) {
                    match freqs.position(k, l) {
                        Some(pos) => coeffs[4 * pos..4 * pos + 4].copy_from_slice(&[t.a1, t.b1, t.a2, t.b2]),
                        None if *t == FourierTerm::default() => {}
                        None => return Err(mismatch()),
                    }
                }
                theta.extend(coeffs);
            }
            (Self::Fourier { width, height, freqs }, VectorFieldSpec::Constant(v)) => {
                let _ = (width, height);
                theta.extend_from_slice(v);
                theta.extend(std::iter::repeat_n(0.0, 4 * freqs.len()));
            }
            _ => return Err(mismatch()),
        }
        Ok(theta)
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// JSON form of an [`AnisotropySpec`]:
/// `{"gamma": g, "field": {"type": "constant" | "fourier" | "fixed", ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropyJson {
    pub gamma: f64,
    #[serde(default = "FieldJson::zero")]
    pub field: FieldJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldJson {
    Constant { v: [f64; 2] },
    Fourier { coefficients: Vec<FourierCoefficientJson> },
    Fixed { beta: f64, base: BaseFieldJson },
}

impl FieldJson {
    fn zero() -> Self {
        Self::Constant { v: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierCoefficientJson {
    pub k: i64,
    pub l: i64,
    #[serde(rename = "A1", default)]
    pub a1: f64,
    #[serde(rename = "B1", default)]
    pub b1: f64,
    #[serde(rename = "A2", default)]
    pub a2: f64,
    #[serde(rename = "B2", default)]
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseFieldJson {
    /// Rotated gradient of `sum amplitude * sin(2 pi (k x/A + l y/B) + phase)`.
    StreamFunction { terms: Vec<SineTerm> },
    /// Lattice samples read from a CSV file (see [`crate::io::read_lattice_field`]).
    Lattice { path: String },
}

impl AnisotropyJson {
    /// Build the spec on `grid`. Lattice paths are resolved against `base_dir`.
    pub fn to_spec(&self, grid: &GridSpec, base_dir: &std::path::Path) -> Result<AnisotropySpec> {
        let field = match &self.field {
            FieldJson::Constant { v } => VectorFieldSpec::Constant(*v),
            FieldJson::Fourier { coefficients } => {
                let mut constant = [0.0; 2];
                let mut pairs = Vec::new();
                for c in coefficients {
                    if c.k == 0 && c.l == 0 {
                        if c.b1 != 0.0 || c.b2 != 0.0 {
                            return Err(Error::InvalidSpec("the (0,0) term has no sine coefficients".into()));
                        }
                        constant = [constant[0] + c.a1, constant[1] + c.a2];
                    } else {
                        pairs.push(((c.k, c.l), FourierTerm { a1: c.a1, b1: c.b1, a2: c.a2, b2: c.b2 }));
                    }
                }
                let freqs = FrequencySet::new(pairs.iter().map(|p| p.0))?;
                let mut terms = vec![FourierTerm::default(); freqs.len()];
                for ((k, l), t) in pairs {
                    terms[freqs.position(k, l).expect("present")] = t;
                }
                VectorFieldSpec::Fourier(FourierVectorField::new(grid.width(), grid.height(), constant, freqs, terms)?)
            }
            FieldJson::Fixed { beta, base } => VectorFieldSpec::fixed_scaled(base.to_base(grid, base_dir)?, *beta)?,
        };
        AnisotropySpec::new(self.gamma, field)
    }
}

impl BaseFieldJson {
    pub fn to_base(&self, grid: &GridSpec, base_dir: &std::path::Path) -> Result<BaseField> {
        match self {
            BaseFieldJson::StreamFunction { terms } => {
                Ok(BaseField::StreamFunction(StreamFunction::new(grid.width(), grid.height(), terms.clone())?))
            }
            BaseFieldJson::Lattice { path } => {
                let path = base_dir.join(path);
                Ok(BaseField::Lattice(crate::io::read_lattice_field(&path, grid)?))
            }
        }
    }
}
