use nalgebra::{DMatrix, DVector};

use super::ControlSource;
use crate::error::{Error, Result};
use crate::operators::HamiltonianTerms;
use crate::spectra::eigh;
use crate::C64;

/// Largest dimension the dense oracle will diagonalize.
pub const DENSE_LIMIT: usize = 512;

/// `exp(-i H dt)` through a dense eigendecomposition.
pub fn propagator(h: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let (values, vectors) = eigh(h);
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&e| C64::from_polar(1.0, -e * dt)),
    ));
    &vectors * phases * vectors.adjoint()
}

/// Piecewise-constant propagation: `[t0, t1]` is cut into `n_slices` equal
/// slices and each applies `exp(-i H(t_mid) dt)`.
pub fn exponential_oracle(
    psi: &DVector<C64>,
    terms: &HamiltonianTerms,
    detuning: &[f64],
    controls: &dyn ControlSource,
    t0: f64,
    t1: f64,
    n_slices: usize,
) -> Result<DVector<C64>> {
    exponential_oracle_with_limit(psi, terms, detuning, controls, t0, t1, n_slices, DENSE_LIMIT)
}

pub fn exponential_oracle_with_limit(
    psi: &DVector<C64>,
    terms: &HamiltonianTerms,
    detuning: &[f64],
    controls: &dyn ControlSource,
    t0: f64,
    t1: f64,
    n_slices: usize,
    dense_limit: usize,
) -> Result<DVector<C64>> {
    let d = terms.dim();
    if d > dense_limit {
        return Err(Error::Resource {
            what: "dense oracle dimension",
            requested: d,
            limit: dense_limit,
        });
    }
    if psi.len() != d {
        return Err(Error::dimension(format!("state of length {} for operator of dimension {d}", psi.len())));
    }
    if n_slices == 0 {
        return Err(Error::config("oracle needs at least one slice"));
    }
    let h = (t1 - t0) / n_slices as f64;
    let mut out = psi.clone();
    for k in 0..n_slices {
        let c = controls.controls(t0 + (k as f64 + 0.5) * h);
        let hm = terms.dense(&c.site_chi(terms.sites()), c.kappa, detuning);
        out = propagator(&hm, h) * out;
    }
    Ok(out)
}
