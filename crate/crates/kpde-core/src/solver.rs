//! Deterministic parabolic solver for du/dt = (L - q)u + f on the periodic
//! box, with L a Fourier-multiplier generator.
//!
//! One step of size dt is the Strang composition
//!   u <- e^{-q dt/2} . F^{-1}[ e^{a(xi) dt} F[ e^{-q dt/2} . u ] ]
//! plus the midpoint Duhamel increment dt * S_{dt/2} f(t + dt/2), where
//! S_{dt/2} is itself one half-size Strang step. Second order in dt; exact
//! for q = 0 and whenever q is constant (the factors commute).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{to_complex, to_real, GridFft};
use crate::grid::{GridField, GridSpec};
use crate::hermite::hermite_function;

/// Constant-coefficient generator L given by a real Fourier symbol a(xi).
///
/// All shipped symbols satisfy a <= 0, so the semigroup bound constants are
/// M = 1 and w = max over grid frequencies of a(xi) (zero for the shipped
/// variants, attained at xi = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// a(xi) = -|xi|^2
    Laplacian,
    /// a(xi) = -|xi|^4
    BiLaplacian,
    /// a(xi) = sum_j coeffs[j] * (|xi|^2)^j
    PolyDispersion { coeffs: Vec<f64> },
}

impl OperatorSpec {
    /// Symbol value at squared frequency |xi|^2.
    pub fn symbol(&self, freq_sq: f64) -> f64 {
        match self {
            OperatorSpec::Laplacian => -freq_sq,
            OperatorSpec::BiLaplacian => -freq_sq * freq_sq,
            OperatorSpec::PolyDispersion { coeffs } => coeffs
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * freq_sq + c),
        }
    }

    /// Stability constant M of the semigroup estimate.
    pub fn stability_m(&self) -> f64 {
        1.0
    }

    /// Growth bound w = max a(xi) over the grid frequencies.
    pub fn growth_bound(&self, spec: &GridSpec) -> f64 {
        (0..spec.total_points())
            .map(|i| self.symbol(spec.frequency_sq(i)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// M exp((w + M q_sup) t) (g_norm + f_l1_norm): the a-priori ceiling on the
/// L2 norm of the mild solution at time t.
pub fn apriori_bound(
    stability_m: f64,
    growth_bound: f64,
    q_sup: f64,
    t: f64,
    g_norm: f64,
    f_l1_norm: f64,
) -> f64 {
    stability_m * ((growth_bound + stability_m * q_sup) * t).exp() * (g_norm + f_l1_norm)
}

/// Scalar time profile of one separable source term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    One,
    Cos { omega: f64 },
    /// The Hermite function xi_k(t), the k-th white-noise mode in time.
    HermiteFn { k: usize },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::One => 1.0,
            TimeProfile::Cos { omega } => (omega * t).cos(),
            TimeProfile::HermiteFn { k } => hermite_function(*k, t),
        }
    }
}

/// f(t, x) = sum_i profile_i(t) * space_i(x). An empty sum is the zero source.
#[derive(Debug, Clone, Default)]
pub struct Source {
    terms: Vec<(TimeProfile, GridField)>,
}

impl Source {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(profile: TimeProfile, space: GridField) -> Self {
        Self {
            terms: vec![(profile, space)],
        }
    }

    pub fn push(&mut self, profile: TimeProfile, space: GridField) {
        self.terms.push((profile, space));
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(TimeProfile, GridField)] {
        &self.terms
    }

    /// Drop terms whose spatial part is identically zero.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|(_, space)| !space.is_zero());
        self
    }

    pub fn eval(&self, t: f64, spec: &GridSpec) -> GridField {
        let mut out = GridField::zeros(*spec);
        for (profile, space) in &self.terms {
            out.axpy(profile.value(t), space);
        }
        out
    }

    /// L2 norm of f(t, .) without materializing intermediate fields twice.
    pub fn l2_norm_at(&self, t: f64, spec: &GridSpec) -> f64 {
        self.eval(t, spec).l2_norm()
    }
}

/// Discrete trajectory: fields stored at the uniform times m * dt, m = 0..=M.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    spec: GridSpec,
    dt: f64,
    fields: Vec<GridField>,
}

impl Trajectory {
    pub fn new(spec: GridSpec, dt: f64, fields: Vec<GridField>) -> Self {
        Self { spec, dt, fields }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|m| self.time(m)).collect()
    }

    pub fn field(&self, m: usize) -> &GridField {
        &self.fields[m]
    }

    pub fn field_mut(&mut self, m: usize) -> &mut GridField {
        &mut self.fields[m]
    }

    pub fn fields(&self) -> &[GridField] {
        &self.fields
    }

    pub fn last(&self) -> &GridField {
        self.fields.last().expect("trajectory holds t = 0")
    }

    /// Per-time discrete L2 norms.
    pub fn l2_norms(&self) -> Vec<f64> {
        self.fields.iter().map(GridField::l2_norm).collect()
    }

    /// C([0,T]; L2) norm: the max of the stored per-time L2 norms.
    pub fn x_norm(&self) -> f64 {
        self.fields
            .iter()
            .map(GridField::l2_norm)
            .fold(0.0f64, f64::max)
    }

    /// self += scale * other, pointwise over all stored times.
    pub fn axpy(&mut self, scale: f64, other: &Trajectory) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.fields.iter_mut().zip(&other.fields) {
            a.axpy(scale, b);
        }
    }

    pub fn zeros_like(&self) -> Trajectory {
        Trajectory {
            spec: self.spec,
            dt: self.dt,
            fields: vec![GridField::zeros(self.spec); self.len()],
        }
    }
}

/// Per-time L2 norms together with the sup over stored times.
pub fn trajectory_norms(u: &Trajectory) -> (Vec<f64>, f64) {
    let norms = u.l2_norms();
    let sup = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    (norms, sup)
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {t_end}"
        )));
    }
    let steps = (t_end / dt).round();
    if steps < 1.0 || (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} does not divide the horizon T = {t_end}"
        )));
    }
    Ok(steps as usize)
}

/// Strang-splitting solve of du/dt = (L - q)u + f, u(0) = g, up to t = T.
pub fn solve_deterministic(
    op: &OperatorSpec,
    q: &GridField,
    f: &Source,
    g: &GridField,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    solve_deterministic_with_stride(op, q, f, g, t_end, dt, 1)
}

/// Same integrator, storing only every `store_every`-th step (the stored time
/// mesh stays uniform; `store_every` must divide the step count).
pub fn solve_deterministic_with_stride(
    op: &OperatorSpec,
    q: &GridField,
    f: &Source,
    g: &GridField,
    t_end: f64,
    dt: f64,
    store_every: usize,
) -> Result<Trajectory> {
    let spec = *g.spec();
    if q.spec() != &spec {
        return Err(Error::DimensionMismatch(
            "potential and initial data live on different grids".into(),
        ));
    }
    if !q.is_finite() {
        return Err(Error::InvalidArgument(
            "potential has non-finite values on the grid".into(),
        ));
    }
    if !g.is_finite() {
        return Err(Error::InvalidArgument(
            "initial data has non-finite values".into(),
        ));
    }
    let steps = step_count(t_end, dt)?;
    if store_every == 0 || steps % store_every != 0 {
        return Err(Error::InvalidArgument(format!(
            "store_every = {store_every} must divide the {steps} time steps"
        )));
    }

    let total = spec.total_points();
    let mut half_q = vec![0.0f64; total];
    let mut quarter_q = vec![0.0f64; total];
    for (i, &qi) in q.values().iter().enumerate() {
        half_q[i] = (-qi * dt / 2.0).exp();
        quarter_q[i] = (-qi * dt / 4.0).exp();
    }
    let mut full_symbol = vec![0.0f64; total];
    let mut half_symbol = vec![0.0f64; total];
    for i in 0..total {
        let a = op.symbol(spec.frequency_sq(i));
        full_symbol[i] = (a * dt).exp();
        half_symbol[i] = (a * dt / 2.0).exp();
    }

    let mut fft = GridFft::new(&spec);
    let mut buf = Vec::new();
    let has_source = !f.is_zero();

    let mut fields = Vec::with_capacity(steps / store_every + 1);
    fields.push(g.clone());
    let mut u = g.clone();

    for m in 0..steps {
        // diffusion-with-potential Strang step
        pointwise_mul(u.values_mut(), &half_q);
        spectral_mul(&mut fft, &mut buf, u.values_mut(), &full_symbol);
        pointwise_mul(u.values_mut(), &half_q);

        if has_source {
            let t_mid = (m as f64 + 0.5) * dt;
            let mut s = f.eval(t_mid, &spec);
            pointwise_mul(s.values_mut(), &quarter_q);
            spectral_mul(&mut fft, &mut buf, s.values_mut(), &half_symbol);
            pointwise_mul(s.values_mut(), &quarter_q);
            u.axpy(dt, &s);
        }
        if (m + 1) % store_every == 0 {
            fields.push(u.clone());
        }
    }

    Ok(Trajectory::new(spec, dt * store_every as f64, fields))
}

fn pointwise_mul(values: &mut [f64], factors: &[f64]) {
    for (v, &f) in values.iter_mut().zip(factors) {
        *v *= f;
    }
}

fn spectral_mul(
    fft: &mut GridFft,
    buf: &mut Vec<rustfft::num_complex::Complex<f64>>,
    values: &mut [f64],
    factors: &[f64],
) {
    to_complex(values, buf);
    fft.forward(buf);
    for (v, &f) in buf.iter_mut().zip(factors) {
        *v *= f;
    }
    fft.inverse(buf);
    to_real(buf, values);
}
