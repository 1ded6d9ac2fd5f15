//! Chaos-expansion front end: expand stochastic data into coefficient
//! families, solve the decoupled propagator system, and reduce the resulting
//! coefficient fields (weighted norms, statistics, realizations).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldExpr, GridField, GridSpec};
use crate::hermite::{eval_fourier_hermite, GaussianSample};
use crate::multi_index::{MultiIndex, TruncationSet};
use crate::solver::{
    solve_deterministic_with_stride, OperatorSpec, Source, TimeProfile, Trajectory,
};

/// One separable source term in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTermExpr {
    pub profile: TimeProfile,
    pub space: FieldExpr,
}

/// A time-dependent source in closed form, f = sum_i profile_i(t) space_i(x).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceExpr {
    pub terms: Vec<SourceTermExpr>,
}

impl SourceExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(profile: TimeProfile, space: FieldExpr) -> Self {
        Self {
            terms: vec![SourceTermExpr { profile, space }],
        }
    }

    pub fn build(&self, spec: &GridSpec) -> Source {
        let mut src = Source::zero();
        for term in &self.terms {
            src.push(term.profile.clone(), term.space.sample(spec));
        }
        src.pruned()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.space.validate(dim))
    }
}

/// Chaos description of one piece of stochastic data. `T` is the closed form
/// of a single deterministic coefficient: [`FieldExpr`] for initial data,
/// [`SourceExpr`] for forces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StochasticData<T> {
    /// A deterministic function: all mass at the zero index.
    Deterministic { value: T },
    /// Time white noise, f_{e(k)}(t, x) = xi_k(t); forces only.
    TimeWhiteNoise,
    /// A Gaussian process: a mean plus first-order fluctuations, the k-th
    /// entry attached to e(k). Support on |gamma| <= 1 by construction.
    Gaussian { mean: T, fluctuations: Vec<T> },
    /// Arbitrary finite coefficient table.
    Explicit { entries: Vec<ExplicitEntry<T>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitEntry<T> {
    pub index: MultiIndex,
    pub value: T,
}

/// Concrete per-index data for the propagator system; absent entries are zero.
#[derive(Debug, Default)]
pub struct ExpandedData {
    pub forces: BTreeMap<MultiIndex, Source>,
    pub initials: BTreeMap<MultiIndex, GridField>,
}

/// Expand force and initial data into coefficient families over `trunc`.
pub fn expand_inputs(
    force: &StochasticData<SourceExpr>,
    initial: &StochasticData<FieldExpr>,
    trunc: &TruncationSet,
    spec: &GridSpec,
) -> Result<ExpandedData> {
    let mut out = ExpandedData::default();

    match initial {
        StochasticData::Deterministic { value } => {
            insert_initial(&mut out, MultiIndex::zero(), value, trunc, spec)?;
        }
        StochasticData::TimeWhiteNoise => {
            return Err(Error::Unsupported(
                "time white noise is a force term, not an initial condition".into(),
            ));
        }
        StochasticData::Gaussian { mean, fluctuations } => {
            check_fluctuation_count(fluctuations.len(), trunc)?;
            insert_initial(&mut out, MultiIndex::zero(), mean, trunc, spec)?;
            for (i, fl) in fluctuations.iter().enumerate() {
                insert_initial(&mut out, MultiIndex::unit(i + 1), fl, trunc, spec)?;
            }
        }
        StochasticData::Explicit { entries } => {
            for e in entries {
                insert_initial(&mut out, e.index.clone(), &e.value, trunc, spec)?;
            }
        }
    }

    match force {
        StochasticData::Deterministic { value } => {
            insert_force(&mut out, MultiIndex::zero(), value, trunc, spec)?;
        }
        StochasticData::TimeWhiteNoise => {
            let one = FieldExpr::Constant { value: 1.0 };
            for k in 1..=trunc.max_dim {
                let expr = SourceExpr::single(TimeProfile::HermiteFn { k }, one.clone());
                insert_force(&mut out, MultiIndex::unit(k), &expr, trunc, spec)?;
            }
        }
        StochasticData::Gaussian { mean, fluctuations } => {
            check_fluctuation_count(fluctuations.len(), trunc)?;
            insert_force(&mut out, MultiIndex::zero(), mean, trunc, spec)?;
            for (i, fl) in fluctuations.iter().enumerate() {
                insert_force(&mut out, MultiIndex::unit(i + 1), fl, trunc, spec)?;
            }
        }
        StochasticData::Explicit { entries } => {
            for e in entries {
                insert_force(&mut out, e.index.clone(), &e.value, trunc, spec)?;
            }
        }
    }

    Ok(out)
}

fn check_fluctuation_count(count: usize, trunc: &TruncationSet) -> Result<()> {
    if count > trunc.max_dim {
        return Err(Error::DimensionMismatch(format!(
            "{count} Gaussian fluctuation coefficients exceed the truncation dimension {}",
            trunc.max_dim
        )));
    }
    if trunc.max_order < 1 && count > 0 {
        return Err(Error::InvalidArgument(
            "truncation order 0 cannot carry first-order Gaussian fluctuations".into(),
        ));
    }
    Ok(())
}

fn check_index(gamma: &MultiIndex, trunc: &TruncationSet) -> Result<()> {
    if !trunc.contains(gamma) {
        return Err(Error::InvalidArgument(format!(
            "coefficient index {gamma} lies outside the truncation (P={}, K={})",
            trunc.max_order, trunc.max_dim
        )));
    }
    Ok(())
}

fn insert_initial(
    out: &mut ExpandedData,
    gamma: MultiIndex,
    expr: &FieldExpr,
    trunc: &TruncationSet,
    spec: &GridSpec,
) -> Result<()> {
    check_index(&gamma, trunc)?;
    expr.validate(spec.dim())?;
    let field = expr.sample(spec);
    if !field.is_zero() {
        out.initials.insert(gamma, field);
    }
    Ok(())
}

fn insert_force(
    out: &mut ExpandedData,
    gamma: MultiIndex,
    expr: &SourceExpr,
    trunc: &TruncationSet,
    spec: &GridSpec,
) -> Result<()> {
    check_index(&gamma, trunc)?;
    expr.validate(spec.dim())?;
    let source = expr.build(spec);
    if !source.is_zero() {
        out.forces.insert(gamma, source);
    }
    Ok(())
}

/// A truncated chaos expansion of trajectories: U = sum_gamma u_gamma H_gamma.
/// Coefficients with zero data are exactly absent.
#[derive(Debug, Clone)]
pub struct ChaosField {
    trunc: TruncationSet,
    spec: GridSpec,
    stored_dt: f64,
    stored_len: usize,
    coefficients: BTreeMap<MultiIndex, Trajectory>,
    /// Kondratiev order tag echoed in reports; not used by any computation.
    pub p_tag: f64,
}

impl ChaosField {
    pub fn empty(trunc: TruncationSet, spec: GridSpec, stored_dt: f64, stored_len: usize) -> Self {
        Self {
            trunc,
            spec,
            stored_dt,
            stored_len,
            coefficients: BTreeMap::new(),
            p_tag: 1.1,
        }
    }

    pub fn insert(&mut self, gamma: MultiIndex, u: Trajectory) -> Result<()> {
        check_index(&gamma, &self.trunc)?;
        if u.spec() != &self.spec || u.len() != self.stored_len || u.dt() != self.stored_dt {
            return Err(Error::DimensionMismatch(
                "all chaos coefficients must share one grid and one time mesh".into(),
            ));
        }
        self.coefficients.insert(gamma, u);
        Ok(())
    }

    pub fn trunc(&self) -> &TruncationSet {
        &self.trunc
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn stored_dt(&self) -> f64 {
        self.stored_dt
    }

    pub fn stored_len(&self) -> usize {
        self.stored_len
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.stored_len)
            .map(|m| m as f64 * self.stored_dt)
            .collect()
    }

    pub fn coefficient(&self, gamma: &MultiIndex) -> Option<&Trajectory> {
        self.coefficients.get(gamma)
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficients in graded-lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Trajectory)> {
        self.coefficients.iter()
    }

    fn zero_trajectory(&self) -> Trajectory {
        Trajectory::new(
            self.spec,
            self.stored_dt,
            vec![GridField::zeros(self.spec); self.stored_len],
        )
    }

    /// Squared Kondratiev norm: sum_gamma ||u_gamma||_X^2 (2N)^{-p gamma},
    /// accumulated in graded-lexicographic order.
    pub fn kondratiev_norm_sq(&self, p: f64) -> f64 {
        self.coefficients
            .iter()
            .map(|(g, u)| {
                let x = u.x_norm();
                x * x * g.weight_2n(p)
            })
            .sum()
    }

    /// Per-coefficient breakdown of the squared norm at order p.
    pub fn norm_contributions(&self, p: f64) -> Vec<NormContribution> {
        self.coefficients
            .iter()
            .map(|(g, u)| {
                let x_norm = u.x_norm();
                let weight = g.weight_2n(p);
                NormContribution {
                    index: g.clone(),
                    x_norm,
                    weight,
                    contribution: x_norm * x_norm * weight,
                }
            })
            .collect()
    }

    /// Mean u_0 and the pointwise variance sum_{|gamma|>=1} gamma! u_gamma^2.
    pub fn mean_variance(&self) -> Result<(Trajectory, Trajectory)> {
        let mean = self
            .coefficients
            .get(&MultiIndex::zero())
            .cloned()
            .unwrap_or_else(|| self.zero_trajectory());
        let mut variance = self.zero_trajectory();
        for (g, u) in &self.coefficients {
            if g.is_zero() {
                continue;
            }
            let fac = g.factorial()?;
            for (vf, uf) in (0..self.stored_len).map(|m| (m, m)) {
                let dst = variance.field_mut(vf);
                for (d, s) in dst.values_mut().iter_mut().zip(u.field(uf).values()) {
                    *d += fac * s * s;
                }
            }
        }
        Ok((mean, variance))
    }

    /// Realize the expansion at one Gaussian sample: sum_gamma u_gamma H_gamma(z).
    pub fn sample_realization(&self, z: &GaussianSample) -> Result<Trajectory> {
        if z.dim() < self.trunc.max_dim {
            return Err(Error::DimensionMismatch(format!(
                "sample dimension {} below truncation dimension {}",
                z.dim(),
                self.trunc.max_dim
            )));
        }
        let mut out = self.zero_trajectory();
        for (g, u) in &self.coefficients {
            let h = eval_fourier_hermite(g, z)?;
            out.axpy(h, u);
        }
        Ok(out)
    }

    /// Ratio of the top-order shell's variance contribution to the total:
    /// the reported truncation-tail indicator.
    pub fn variance_tail_ratio(&self) -> Result<f64> {
        let mut total = 0.0;
        let mut shell = 0.0;
        for (g, u) in &self.coefficients {
            if g.is_zero() {
                continue;
            }
            let fac = g.factorial()?;
            let x = u.x_norm();
            let c = fac * x * x;
            total += c;
            if g.order() == self.trunc.max_order {
                shell += c;
            }
        }
        Ok(if total > 0.0 { shell / total } else { 0.0 })
    }
}

/// Weighted squared distance between two chaos fields sharing a mesh:
/// sum_gamma ||u_gamma - v_gamma||_X^2 (2N)^{-p gamma}, absent = zero.
pub fn difference_norm_sq(a: &ChaosField, b: &ChaosField, p: f64) -> f64 {
    let mut keys: Vec<&MultiIndex> = a.coefficients.keys().collect();
    for k in b.coefficients.keys() {
        if !a.coefficients.contains_key(k) {
            keys.push(k);
        }
    }
    keys.sort();
    let mut total = 0.0;
    for g in keys {
        let x = match (a.coefficients.get(g), b.coefficients.get(g)) {
            (Some(u), Some(v)) => {
                let mut d = u.clone();
                d.axpy(-1.0, v);
                d.x_norm()
            }
            (Some(u), None) | (None, Some(u)) => u.x_norm(),
            (None, None) => 0.0,
        };
        total += x * x * g.weight_2n(p);
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct NormContribution {
    pub index: MultiIndex,
    pub x_norm: f64,
    pub weight: f64,
    pub contribution: f64,
}

/// Solve the decoupled propagator system: one deterministic problem per index
/// carrying data. Independent solves run on the rayon pool; assembly into the
/// graded-lex map makes the result identical for any worker count.
pub fn solve_propagator(
    op: &OperatorSpec,
    q: &GridField,
    data: &ExpandedData,
    trunc: &TruncationSet,
    t_end: f64,
    dt: f64,
    store_every: usize,
) -> Result<ChaosField> {
    let spec = *q.spec();
    let mut keys: Vec<MultiIndex> = data.initials.keys().cloned().collect();
    for k in data.forces.keys() {
        if !data.initials.contains_key(k) {
            keys.push(k.clone());
        }
    }
    keys.sort();

    let zero_source = Source::zero();
    let zero_field = GridField::zeros(spec);
    let solved: Result<Vec<(MultiIndex, Trajectory)>> = keys
        .into_par_iter()
        .map(|gamma| {
            let f = data.forces.get(&gamma).unwrap_or(&zero_source);
            let g = data.initials.get(&gamma).unwrap_or(&zero_field);
            solve_deterministic_with_stride(op, q, f, g, t_end, dt, store_every)
                .map(|u| (gamma.clone(), u))
                .map_err(|e| Error::Coefficient {
                    gamma: gamma.to_string(),
                    source: Box::new(e),
                })
        })
        .collect();

    let steps = (t_end / dt).round() as usize;
    let stored_len = steps / store_every + 1;
    let mut field = ChaosField::empty(trunc.clone(), spec, dt * store_every as f64, stored_len);
    for (gamma, u) in solved? {
        field.insert(gamma, u)?;
    }
    Ok(field)
}
