//! Moving-block family showing that an `L^r_x L^q_t` bound by `L^∞_t H¹_x` fails for `q > r`:
//! the block `φ(x - j)` occupies the time slab `[j/n, (j+1)/n)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::SmoothCutoff;
use crate::error::{invalid, Result};
use crate::functionals::{mixed_norm, NormOrder};
use crate::spectral::{sobolev_norm, ComplexField, Grid1D, SpaceTimeField};

/// Box length and resolution of the construction: integer translates are exact grid shifts.
pub const BOX_LENGTH: f64 = 64.0;
pub const BOX_POINTS: usize = 4096;
/// Time samples per slab.
pub const SAMPLES_PER_SLAB: usize = 32;

/// `1` on `[0, 1]`, zero outside `(-1/4, 5/4)`, quintic transitions.
pub fn counterexample_profile(x: f64) -> f64 {
    if x <= 0.5 {
        SmoothCutoff.eval(1.0 + (0.0 - x).max(0.0) * 4.0)
    } else {
        SmoothCutoff.eval(1.0 + (x - 1.0).max(0.0) * 4.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleNorms {
    pub n: usize,
    /// `‖u_n‖_{L^∞_t H¹_x}`.
    pub sup_h1: f64,
    /// `‖u_n‖_{L^r_x L^q_t}`.
    pub mixed: f64,
}

/// Both norms of `u_n` on `[0, 1]` × box, with midpoint time samples and blocks centred in the box.
pub fn counterexample_norms(n: usize, r: f64, q: f64) -> Result<CounterexampleNorms> {
    if n == 0 {
        return invalid("n must be >= 1");
    }
    if n as f64 + 2.0 > BOX_LENGTH {
        return invalid(format!("box of length {BOX_LENGTH} cannot hold {n} translates"));
    }
    let grid = Grid1D::new(BOX_LENGTH, BOX_POINTS)?;
    let shift = -((n / 2) as f64);
    let blocks: Vec<ComplexField> = (0..n)
        .map(|j| ComplexField::from_fn(&grid, |x| Complex64::new(counterexample_profile(x - j as f64 - shift), 0.0)))
        .collect();
    let sup_h1 = blocks
        .iter()
        .map(|b| sobolev_norm(b, 1.0, None))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let nt = SAMPLES_PER_SLAB * n;
    let dt = 1.0 / nt as f64;
    let mut values = Vec::with_capacity(nt * grid.points());
    for k in 0..nt {
        values.extend_from_slice(blocks[k / SAMPLES_PER_SLAB].values());
    }
    let field = SpaceTimeField::new(&grid, dt, values)?;
    let mixed = mixed_norm(&field, q, r, NormOrder::SpaceOuter)?;
    Ok(CounterexampleNorms { n, sup_h1, mixed })
}
