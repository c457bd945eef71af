use num_complex::Complex64;

use super::{ApproxParams, SystemParams};
use crate::cutoffs::TruncationFamily;
use crate::error::{invalid, Result};
use crate::spectral::{dealias, zero, ComplexField, RealField, SpectralField};

/// Nonlinear drift of one hierarchy level.
///
/// Schrödinger part: `-i(γ₁ψ_K(|u|²)uw + β|u|²φ_K(|u|²)u)`.
/// KdV part: `P_n∂x(γ₂φ_K(|u|²)|u|² - ½c φ_K(w)w²)` with `c` the Burgers coefficient.
/// With `K = ∞` and no `n` this is the drift of the original system.
#[derive(Debug, Clone, Copy)]
pub struct DriftSpec {
    pub gamma1: f64,
    pub beta: f64,
    pub gamma2: f64,
    pub burgers: f64,
    pub family: TruncationFamily,
    pub n: Option<f64>,
    pub dealias: bool,
}

impl DriftSpec {
    pub fn full(params: &SystemParams, dealias: bool) -> Self {
        Self {
            gamma1: params.gamma1,
            beta: params.beta,
            gamma2: params.gamma2,
            burgers: params.burgers,
            family: TruncationFamily::inactive(),
            n: None,
            dealias,
        }
    }

    pub fn approx(params: &SystemParams, approx: &ApproxParams, dealias: bool) -> Result<Self> {
        approx.validate()?;
        let family = if approx.k.is_finite() { TruncationFamily::new(approx.k)? } else { TruncationFamily::inactive() };
        Ok(Self { family, n: approx.n_bound(), ..Self::full(params, dealias) })
    }

    pub fn evaluate(&self, u: &ComplexField, w: &RealField) -> Result<(ComplexField, RealField)> {
        u.same_grid(w)?;
        let (u, w) = self.inputs(u, w);
        Ok((self.schrodinger_part(&u, &w), self.kdv_part(&u, &w)))
    }

    pub fn schrodinger(&self, u: &ComplexField, w: &RealField) -> Result<ComplexField> {
        u.same_grid(w)?;
        let (u, w) = self.inputs(u, w);
        Ok(self.schrodinger_part(&u, &w))
    }

    pub fn kdv(&self, u: &ComplexField, w: &RealField) -> Result<RealField> {
        u.same_grid(w)?;
        let (u, w) = self.inputs(u, w);
        Ok(self.kdv_part(&u, &w))
    }

    fn inputs(&self, u: &ComplexField, w: &RealField) -> (ComplexField, RealField) {
        if self.dealias {
            (dealias(u), dealias(w))
        } else {
            (u.clone(), w.clone())
        }
    }

    fn schrodinger_part(&self, u: &ComplexField, w: &RealField) -> ComplexField {
        let fam = &self.family;
        let inactive = fam.is_inactive();
        let values: Vec<Complex64> = u
            .values()
            .iter()
            .zip(w.values())
            .map(|(&z, &wv)| {
                let rho = z.norm_sqr();
                let (psi, phi) = if inactive { (1.0, 1.0) } else { (fam.psi(rho), fam.phi(rho)) };
                let real_potential = self.gamma1 * psi * wv + self.beta * rho * phi;
                Complex64::new(0.0, -real_potential) * z
            })
            .collect();
        let grid = u.grid();
        let mut spec = grid.forward(&values);
        spec[grid.nyquist_index()] = zero();
        if self.dealias {
            for (c, keep) in spec.iter_mut().zip(grid.dealias_mask()) {
                if !keep {
                    *c = zero();
                }
            }
        }
        ComplexField::from_spectrum(grid, &spec)
    }

    fn kdv_part(&self, u: &ComplexField, w: &RealField) -> RealField {
        let fam = &self.family;
        let inactive = fam.is_inactive();
        let flux: Vec<f64> = u
            .values()
            .iter()
            .zip(w.values())
            .map(|(&z, &wv)| {
                let rho = z.norm_sqr();
                let (phi_u, phi_w) = if inactive { (1.0, 1.0) } else { (fam.phi(rho), fam.phi(wv)) };
                self.gamma2 * phi_u * rho - 0.5 * self.burgers * phi_w * wv * wv
            })
            .collect();
        let grid = u.grid();
        let mut spec = grid.forward_real(&flux);
        let mask = grid.dealias_mask();
        let nyq = grid.nyquist_index();
        for (j, (c, &xi)) in spec.iter_mut().zip(grid.wavenumbers()).enumerate() {
            let keep = j != nyq
                && self.n.map_or(true, |n| xi.abs() <= n)
                && (!self.dealias || mask[j]);
            *c = if keep { *c * Complex64::new(0.0, xi) } else { zero() };
        }
        RealField::from_spectrum(grid, &spec)
    }
}

/// `-i(γ₁uw + β|u|²u)`.
pub fn drift_schrodinger(u: &ComplexField, w: &RealField, params: &SystemParams, dealias: bool) -> Result<ComplexField> {
    DriftSpec::full(params, dealias).schrodinger(u, w)
}

/// `γ₂∂x|u|² - ½∂x(w²)`.
pub fn drift_kdv(u: &ComplexField, w: &RealField, params: &SystemParams, dealias: bool) -> Result<RealField> {
    DriftSpec::full(params, dealias).kdv(u, w)
}

/// Both drifts of the `(m, n, K)` level.
pub fn drift_approx(
    u: &ComplexField,
    w: &RealField,
    params: &SystemParams,
    approx: &ApproxParams,
    dealias: bool,
) -> Result<(ComplexField, RealField)> {
    if approx.n < approx.m {
        return invalid("n must be >= m");
    }
    DriftSpec::approx(params, approx, dealias)?.evaluate(u, w)
}
