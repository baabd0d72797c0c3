use std::sync::Arc;

use log::warn;
use nalgebra::DVector;

use crate::basis::LatticeBasis;
use crate::error::Result;
use crate::state::{embed_input_state, InputState, QuantumState};
use crate::C64;

/// `(1/sqrt M) sum_j |psi_in>_j prod_{r != j} |0>_r`, renormalized.
pub fn target_state(input: &InputState, basis: &Arc<LatticeBasis>) -> Result<QuantumState> {
    let m = basis.sites();
    let mut v = DVector::<C64>::zeros(basis.dim());
    for j in 0..m {
        let e = embed_input_state(input, basis, j)?;
        v += e.as_pure().expect("embedding is pure");
    }
    v /= C64::new((m as f64).sqrt(), 0.0);
    let norm2 = v.norm_squared();
    if (norm2 - 1.0).abs() > 1e-12 {
        warn!(
            "vacuum component makes the site terms overlap; target norm^2 = {norm2:.6e} before renormalization"
        );
    }
    v /= C64::new(norm2.sqrt(), 0.0);
    QuantumState::pure(basis.clone(), v)
}
