//! The map `𝒯_R` of the localized mild formulation, evaluated on stored space-time fields.

use std::sync::Arc;

use num_complex::Complex64;

use super::drift::DriftSpec;
use super::SystemParams;
use crate::bourgain::{restricted_norm, restricted_ytilde_norm, running_norms, BourgainWeight};
use crate::cutoffs::localize_by_norm;
use crate::error::{invalid, Error, Result};
use crate::noise::{multiply_kdv, multiply_schrodinger, NoiseOperator, WienerIncrement};
use crate::rng::{Channel, SeedLineage};
use crate::spectral::{
    airy_propagate, airy_propagate_complex, schrodinger_propagate, ComplexField, RealField, SpaceTimeField,
    SpectralField,
};

/// Relative disagreement between the trapezoid on `dt` and on `2dt` above which the Duhamel
/// quadrature is considered unresolved.
pub const HALVING_TOLERANCE: f64 = 1e-3;

/// `(u, v)` on a common time grid; `v` is real-valued but stored as a complex field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
}

/// Frozen noise path: increment `k` drives the interval `[t_k, t_{k+1})`.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub phi: Arc<NoiseOperator>,
    pub psi: Arc<NoiseOperator>,
    pub master_seed: u64,
    pub path_id: u64,
}

impl NoisePath {
    fn increments(&self, k: usize, dt: f64) -> Result<(WienerIncrement, WienerIncrement)> {
        let l1 = SeedLineage::new(self.master_seed, self.path_id, Channel::Schrodinger);
        let l2 = l1.with_channel(Channel::Kdv);
        Ok((
            WienerIncrement::draw(l1, k as u64, dt, self.phi.basis_size())?,
            WienerIncrement::draw(l2, k as u64, dt, self.psi.basis_size())?,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct PicardSetup {
    pub u0: ComplexField,
    pub w0: RealField,
    pub r: f64,
    pub b: f64,
    pub params: SystemParams,
    pub noise: Option<NoisePath>,
}

/// `∫₀^{t_k} S(t_k - s) f(s) ds` for every sample, via the cumulative trapezoid applied to
/// `S(-s)f(s)` and exact propagation back to `t_k`.
pub fn duhamel_schrodinger(f: &SpaceTimeField) -> Result<SpaceTimeField> {
    duhamel(f, |g, t| schrodinger_propagate(g, t))
}

/// `∫₀^{t_k} U(t_k - s) g(s) ds` (Airy group), same quadrature.
pub fn duhamel_airy(f: &SpaceTimeField) -> Result<SpaceTimeField> {
    duhamel(f, |g, t| airy_propagate_complex(g, t))
}

fn duhamel(f: &SpaceTimeField, group: impl Fn(&ComplexField, f64) -> Result<ComplexField>) -> Result<SpaceTimeField> {
    let dt = f.dt();
    let nt = f.timesteps();
    let pulled: Vec<ComplexField> =
        (0..nt).map(|k| group(&f.slice_field(k), -(k as f64) * dt)).collect::<Result<_>>()?;
    let fine = cumulative_trapezoid(&pulled, dt, 1);
    let coarse = cumulative_trapezoid(&pulled, dt, 2);
    let scale = fine.iter().map(|c| c.l2_norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        let worst = coarse
            .iter()
            .enumerate()
            .map(|(i, c)| c.sub(&fine[2 * i]).map(|d| d.l2_norm()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if worst > HALVING_TOLERANCE * scale {
            return Err(Error::Accuracy(format!(
                "Duhamel trapezoid changes by {:.3e} (relative) under step halving",
                worst / scale
            )));
        }
    }
    let slices: Vec<ComplexField> =
        fine.iter().enumerate().map(|(k, acc)| group(acc, k as f64 * dt)).collect::<Result<_>>()?;
    SpaceTimeField::from_slices(dt, &slices).map(|s| s.with_pad_factor(f.pad_factor()))
}

/// Cumulative trapezoid using every `stride`-th sample; entry `i` integrates up to sample `stride·i`.
fn cumulative_trapezoid(samples: &[ComplexField], dt: f64, stride: usize) -> Vec<ComplexField> {
    let h = dt * stride as f64;
    let picks: Vec<&ComplexField> = samples.iter().step_by(stride).collect();
    let mut out = Vec::with_capacity(picks.len());
    let mut acc = ComplexField::zeros(samples[0].grid());
    out.push(acc.clone());
    for pair in picks.windows(2) {
        acc = ComplexField::from_raw(
            acc.grid(),
            acc.values()
                .iter()
                .zip(pair[0].values().iter().zip(pair[1].values()))
                .map(|(a, (x, y))| a + (x + y) * (0.5 * h))
                .collect(),
        );
        out.push(acc.clone());
    }
    out
}

/// One application of `𝒯_R`.
pub fn picard_apply(pair: &FieldPair, setup: &PicardSetup) -> Result<FieldPair> {
    let (u, v) = (&pair.u, &pair.v);
    if u.timesteps() != v.timesteps() || u.dt().to_bits() != v.dt().to_bits() {
        return invalid("u and v must share the time grid");
    }
    u.grid().eq(v.grid()).then_some(()).ok_or_else(|| Error::InvalidArgument("grid mismatch".into()))?;
    setup.u0.same_grid(&setup.w0)?;
    let dt = u.dt();
    let nt = u.timesteps();
    let b = setup.b;

    let (_, x_env) = running_norms(u, &BourgainWeight::x(b, 1.0)?)?;
    let (_, y_env) = running_norms(v, &BourgainWeight::y(b, 1.0)?)?;
    let (_, yh_env) = running_norms(v, &BourgainWeight::y_homogeneous(b, 1.0)?)?;
    let mut ytilde: Vec<f64> = y_env.iter().zip(&yh_env).map(|(a, c)| a + c).collect();
    for k in 1..ytilde.len() {
        ytilde[k] = ytilde[k].max(ytilde[k - 1]);
    }
    let (u_loc, v_loc) = if setup.r.is_infinite() {
        (u.clone(), v.clone())
    } else {
        (localize_by_norm(&x_env, u, setup.r)?, localize_by_norm(&ytilde, v, setup.r)?)
    };

    let drift = DriftSpec::full(&setup.params, false);
    let mut nonlin_u = Vec::with_capacity(nt);
    let mut nonlin_v = Vec::with_capacity(nt);
    let mut free_w = Vec::with_capacity(nt);
    for k in 0..nt {
        let t = k as f64 * dt;
        let uw = airy_propagate(&setup.w0, t)?;
        let ul = u_loc.slice_field(k);
        let wl = v_loc.slice_field(k).real_part().add(&uw)?;
        let (du, dv) = drift.evaluate(&ul, &wl)?;
        nonlin_u.push(du);
        nonlin_v.push(dv.to_complex());
        free_w.push(uw);
    }
    let du = duhamel_schrodinger(&SpaceTimeField::from_slices(dt, &nonlin_u)?)?;
    let dv = duhamel_airy(&SpaceTimeField::from_slices(dt, &nonlin_v)?)?;

    let (su, sv) = match &setup.noise {
        Some(path) => stochastic_convolutions(u_loc.clone(), v, &free_w, path, &setup.params)?,
        None => (None, None),
    };

    let mut out_u = Vec::with_capacity(nt);
    let mut out_v = Vec::with_capacity(nt);
    for k in 0..nt {
        let t = k as f64 * dt;
        let mut uk = schrodinger_propagate(&setup.u0, t)?.add(&du.slice_field(k))?;
        let mut vk = dv.slice_field(k);
        if let Some(su) = &su {
            uk = uk.add(&su[k])?;
        }
        if let Some(sv) = &sv {
            vk = vk.add(&sv[k])?;
        }
        out_u.push(uk);
        out_v.push(vk.real_part().to_complex());
    }
    let pad = u.pad_factor();
    Ok(FieldPair {
        u: SpaceTimeField::from_slices(dt, &out_u)?.with_pad_factor(pad),
        v: SpaceTimeField::from_slices(dt, &out_v)?.with_pad_factor(pad),
    })
}

type Slices = Option<Vec<ComplexField>>;

/// `S(t_k) Σ_{j<k} S(-t_j) F(u_j)^α ΦΔW_j` on the time grid of `u`, the left-point Itô sum of the
/// Schrödinger stochastic convolution with increments drawn from `lineage`.
pub fn stochastic_convolution(
    u: &SpaceTimeField,
    phi: &NoiseOperator,
    lineage: SeedLineage,
    params: &SystemParams,
) -> Result<SpaceTimeField> {
    let dt = u.dt();
    let mut acc = ComplexField::zeros(u.grid());
    let mut out = vec![acc.clone()];
    for k in 1..u.timesteps() {
        let j = k - 1;
        let inc = WienerIncrement::draw(lineage, j as u64, dt, phi.basis_size())?;
        let g = multiply_schrodinger(&u.slice_field(j), &phi.realize(&inc)?, params.alpha, params.f_choice)?;
        acc = acc.add(&schrodinger_propagate(&g, -(j as f64) * dt)?)?;
        out.push(schrodinger_propagate(&acc, k as f64 * dt)?);
    }
    Ok(SpaceTimeField::from_slices(dt, &out)?.with_pad_factor(u.pad_factor()))
}

/// Itô sums for both equations; the KdV one uses `(v_j + U(t_j)w₀)^α`.
fn stochastic_convolutions(
    u_loc: SpaceTimeField,
    v: &SpaceTimeField,
    free_w: &[RealField],
    path: &NoisePath,
    params: &SystemParams,
) -> Result<(Slices, Slices)> {
    let dt = u_loc.dt();
    let nt = u_loc.timesteps();
    let lineage = SeedLineage::new(path.master_seed, path.path_id, Channel::Schrodinger);
    let su = stochastic_convolution(&u_loc, &path.phi, lineage, params)?;
    let mut acc_v = ComplexField::zeros(u_loc.grid());
    let mut out_v = vec![acc_v.clone()];
    for k in 1..nt {
        let j = k - 1;
        let (_, d2) = path.increments(j, dt)?;
        let xi2 = path.psi.realize(&d2)?;
        let wj = v.slice_field(j).real_part().add(&free_w[j])?;
        let gv = multiply_kdv(&wj, &xi2, params.alpha)?.to_complex();
        acc_v = acc_v.add(&airy_propagate_complex(&gv, -(j as f64) * dt)?)?;
        out_v.push(airy_propagate_complex(&acc_v, k as f64 * dt)?);
    }
    Ok((Some((0..nt).map(|k| su.slice_field(k)).collect()), Some(out_v)))
}

/// `‖u₁ - u₂‖_{X^T_{b,1}} + ‖v₁ - v₂‖_{Ỹ^T_{b,1}}` over the full stored span.
pub fn pair_distance(p1: &FieldPair, p2: &FieldPair, b: f64) -> Result<f64> {
    let du = p1.u.zip_with(&p2.u, |a, c| a - c)?;
    let dv = p1.v.zip_with(&p2.v, |a, c| a - c)?;
    let t = p1.u.span();
    Ok(restricted_norm(&du, t, &BourgainWeight::x(b, 1.0)?)? + restricted_ytilde_norm(&dv, t, b, 1.0)?)
}

/// `d(𝒯p₁, 𝒯p₂) / d(p₁, p₂)`.
pub fn contraction_factor(p1: &FieldPair, p2: &FieldPair, setup: &PicardSetup) -> Result<f64> {
    let before = pair_distance(p1, p2, setup.b)?;
    if before == 0.0 {
        return Err(Error::Precondition("contraction factor needs two distinct pairs".into()));
    }
    let after = pair_distance(&picard_apply(p1, setup)?, &picard_apply(p2, setup)?, setup.b)?;
    Ok(after / before)
}

impl FieldPair {
    pub fn zeros(grid: &crate::spectral::Grid1D, dt: f64, timesteps: usize) -> Result<Self> {
        let z = SpaceTimeField::new(grid, dt, vec![Complex64::new(0.0, 0.0); grid.points() * timesteps])?;
        Ok(Self { u: z.clone(), v: z })
    }
}
