//! Pure states, density matrices and state-level utilities.

use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::basis::{LatticeBasis, LatticeSpec};
use crate::error::{Error, Result};
use crate::C64;

/// Default bound on the weight of `|0>` and `|1>` components in an input state.
pub const LOW_OCCUPATION_THRESHOLD: f64 = 1e-6;

/// Single-resonator input state `sum_n C_n |n>`, normalized at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InputState {
    amplitudes: Vec<(u32, C64)>,
}

impl InputState {
    /// Duplicate occupations are summed; the result is sorted by `n` and normalized.
    pub fn new(amplitudes: impl IntoIterator<Item = (u32, C64)>) -> Result<Self> {
        let mut merged: Vec<(u32, C64)> = Vec::new();
        for (n, c) in amplitudes {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::config(format!("non-finite amplitude for n = {n}")));
            }
            match merged.iter_mut().find(|(m, _)| *m == n) {
                Some((_, acc)) => *acc += c,
                None => merged.push((n, c)),
            }
        }
        merged.retain(|(_, c)| c.norm_sqr() > 0.0);
        merged.sort_by_key(|(n, _)| *n);
        let norm = merged.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::config("input state has zero norm"));
        }
        for (_, c) in &mut merged {
            *c /= norm;
        }
        Ok(Self { amplitudes: merged })
    }

    pub fn fock(n: u32) -> Self {
        Self {
            amplitudes: vec![(n, C64::new(1.0, 0.0))],
        }
    }

    pub fn amplitudes(&self) -> &[(u32, C64)] {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: u32) -> C64 {
        self.amplitudes
            .iter()
            .find(|(m, _)| *m == n)
            .map_or(C64::new(0.0, 0.0), |(_, c)| *c)
    }

    pub fn max_n(&self) -> u32 {
        self.amplitudes.last().map_or(0, |(n, _)| *n)
    }

    pub fn min_n(&self) -> u32 {
        self.amplitudes.first().map_or(0, |(n, _)| *n)
    }

    pub fn occupations(&self) -> impl Iterator<Item = u32> + '_ {
        self.amplitudes.iter().map(|(n, _)| *n)
    }

    /// `sum_{n<2} |C_n|^2`.
    pub fn low_occupation_weight(&self) -> f64 {
        self.amplitudes
            .iter()
            .filter(|(n, _)| *n < 2)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Logs a warning and returns `false` when the low-occupation weight exceeds `threshold`.
    pub fn check_low_occupation(&self, threshold: f64) -> bool {
        let w = self.low_occupation_weight();
        if w > threshold {
            warn!("input state has weight {w:.3e} on n < 2 (threshold {threshold:.1e})");
            false
        } else {
            true
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Pure(DVector<C64>),
    Density(DMatrix<C64>),
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    basis: Arc<LatticeBasis>,
    data: StateData,
}

impl QuantumState {
    pub fn pure(basis: Arc<LatticeBasis>, psi: DVector<C64>) -> Result<Self> {
        if psi.len() != basis.dim() {
            return Err(Error::dimension(format!(
                "vector of length {} on basis of dimension {}",
                psi.len(),
                basis.dim()
            )));
        }
        Ok(Self {
            basis,
            data: StateData::Pure(psi),
        })
    }

    pub fn density(basis: Arc<LatticeBasis>, rho: DMatrix<C64>) -> Result<Self> {
        let d = basis.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::dimension(format!(
                "{}x{} matrix on basis of dimension {d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(Self {
            basis,
            data: StateData::Density(rho),
        })
    }

    pub fn basis(&self) -> &Arc<LatticeBasis> {
        &self.basis
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn into_data(self) -> StateData {
        self.data
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&DVector<C64>> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn as_density(&self) -> Option<&DMatrix<C64>> {
        match &self.data {
            StateData::Density(m) => Some(m),
            StateData::Pure(_) => None,
        }
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn into_density(self) -> Self {
        let rho = self.to_density();
        Self {
            basis: self.basis,
            data: StateData::Density(rho),
        }
    }

    /// Norm of a pure state, or the trace of a density matrix.
    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm_squared(),
            StateData::Density(m) => m.trace().re,
        }
    }

    pub fn normalized(mut self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Invariant(format!("cannot normalize state with trace {t}")));
        }
        match &mut self.data {
            StateData::Pure(v) => *v /= C64::new(t.sqrt(), 0.0),
            StateData::Density(m) => *m /= C64::new(t, 0.0),
        }
        Ok(self)
    }

    /// `<n_j>` for every site.
    pub fn occupations(&self) -> Vec<f64> {
        let m = self.basis.sites();
        let mut out = vec![0.0; m];
        for i in 0..self.basis.dim() {
            let p = match &self.data {
                StateData::Pure(v) => v[i].norm_sqr(),
                StateData::Density(r) => r[(i, i)].re,
            };
            for (j, &n) in self.basis.state(i).iter().enumerate() {
                out[j] += p * n as f64;
            }
        }
        out
    }

    /// `<N_total>`.
    pub fn total_occupation(&self) -> f64 {
        self.occupations().iter().sum()
    }

    /// `max |rho - rho^dagger|`; zero for pure states.
    pub fn hermiticity_error(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 0.0,
            StateData::Density(m) => hermiticity_error(m),
        }
    }

    /// Smallest eigenvalue of the (Hermitian part of the) density matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 0.0,
            StateData::Density(m) => {
                let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
                h.symmetric_eigenvalues().min()
            }
        }
    }

    /// Amplitude restricted to basis states with exactly `n` quanta, in basis order.
    pub fn sector_component(&self, n: u32) -> Option<DVector<C64>> {
        let v = self.as_pure()?;
        let idx = self.basis.sector_indices(n);
        Some(DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i])))
    }
}

pub fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for b in 0..d {
        for a in b..d {
            worst = worst.max((m[(a, b)] - m[(b, a)].conj()).norm());
        }
    }
    worst
}

fn same_basis(a: &QuantumState, b: &QuantumState) -> Result<()> {
    if Arc::ptr_eq(&a.basis, &b.basis) || *a.basis == *b.basis {
        Ok(())
    } else {
        Err(Error::dimension(format!(
            "states live on different bases ({:?} vs {:?})",
            a.basis.spec(),
            b.basis.spec()
        )))
    }
}

/// `sum_n C_n |n>_site (x) |0>` on every other site. Sites are 0-based.
pub fn embed_input_state(
    input: &InputState,
    basis: &Arc<LatticeBasis>,
    site: usize,
) -> Result<QuantumState> {
    if site >= basis.sites() {
        return Err(Error::config(format!(
            "site {site} out of range for {} sites",
            basis.sites()
        )));
    }
    let mut psi = DVector::zeros(basis.dim());
    for &(n, c) in input.amplitudes() {
        psi[single_site_index(basis, site, n)?] += c;
    }
    QuantumState::pure(basis.clone(), psi)?.normalized()
}

pub(crate) fn single_site_index(basis: &LatticeBasis, site: usize, n: u32) -> Result<usize> {
    let mut occ = vec![0u32; basis.sites()];
    occ[site] = n;
    basis.index_of(&occ).ok_or_else(|| {
        Error::Truncation(format!(
            "occupation {n} on site {} is outside the truncated basis {:?}",
            site + 1,
            basis.spec()
        ))
    })
}

/// `|<target|psi>|^2` for pure states, `<target|rho|target>` for density matrices.
pub fn fidelity(state: &QuantumState, target: &QuantumState) -> Result<f64> {
    same_basis(state, target)?;
    let t = target
        .as_pure()
        .ok_or_else(|| Error::config("fidelity target must be a pure state"))?;
    let f = match &state.data {
        StateData::Pure(v) => t.dotc(v).norm_sqr(),
        StateData::Density(r) => expectation(r, t),
    };
    Ok(f.clamp(0.0, 1.0))
}

/// `<t|rho|t>` (real part).
pub fn expectation(rho: &DMatrix<C64>, t: &DVector<C64>) -> f64 {
    t.dotc(&(rho * t)).re
}

/// Reduced density matrix on `keep` (0-based sites, any order; the result is
/// ordered by increasing site index).
pub fn partial_trace(state: &QuantumState, keep: &[usize]) -> Result<QuantumState> {
    let basis = &state.basis;
    let m = basis.sites();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::config("partial trace needs at least one kept site"));
    }
    if let Some(&bad) = kept.iter().find(|&&j| j >= m) {
        return Err(Error::config(format!("site {bad} out of range for {m} sites")));
    }
    let traced: Vec<usize> = (0..m).filter(|j| !kept.contains(j)).collect();

    let spec = basis.spec();
    let cap = spec.per_site_cap;
    let total = spec
        .total_cap
        .map(|t| t.min(cap.saturating_mul(kept.len() as u32)));
    let reduced = Arc::new(LatticeBasis::new(LatticeSpec::new(kept.len(), cap, total)?)?);

    // group full-basis states by their traced-out occupation
    let mut groups: HashMap<Vec<u32>, Vec<(usize, usize)>> = HashMap::new();
    for i in 0..basis.dim() {
        let occ = basis.state(i);
        let env: Vec<u32> = traced.iter().map(|&j| occ[j]).collect();
        let sys: Vec<u32> = kept.iter().map(|&j| occ[j]).collect();
        let r = reduced
            .index_of(&sys)
            .ok_or_else(|| Error::Invariant("reduced occupation missing from reduced basis".into()))?;
        groups.entry(env).or_default().push((i, r));
    }

    let mut out = DMatrix::zeros(reduced.dim(), reduced.dim());
    for members in groups.values() {
        for &(a, ra) in members {
            for &(b, rb) in members {
                out[(ra, rb)] += match &state.data {
                    StateData::Pure(v) => v[a] * v[b].conj(),
                    StateData::Density(r) => r[(a, b)],
                };
            }
        }
    }
    QuantumState::density(reduced, out)
}

/// `Tr(rho^2)`; exactly 1 for pure states.
pub fn purity(state: &QuantumState) -> f64 {
    match &state.data {
        StateData::Pure(_) => 1.0,
        StateData::Density(r) => density_purity(r),
    }
}

pub(crate) fn density_purity(r: &DMatrix<C64>) -> f64 {
    // Tr(rho^2) = sum_ab rho_ab rho_ba
    let d = r.nrows();
    let mut s = 0.0;
    for b in 0..d {
        for a in 0..d {
            s += (r[(a, b)] * r[(b, a)]).re;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(m: usize, cap: u32, total: Option<u32>) -> Arc<LatticeBasis> {
        Arc::new(LatticeBasis::new(LatticeSpec::new(m, cap, total).unwrap()).unwrap())
    }

    fn fock(b: &Arc<LatticeBasis>, occ: &[u32]) -> QuantumState {
        let mut v = DVector::zeros(b.dim());
        v[b.index_of(occ).unwrap()] = C64::new(1.0, 0.0);
        QuantumState::pure(b.clone(), v).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_pure(b: &Arc<LatticeBasis>, parts: &[(f64, f64)]) -> QuantumState {
        let v = DVector::from_iterator(
            b.dim(),
            (0..b.dim()).map(|i| {
                let (x, y) = parts[i % parts.len()];
                C64::new(x + 0.1 * i as f64, y - 0.05 * i as f64)
            }),
        );
        QuantumState::pure(b.clone(), v).unwrap().normalized().unwrap()
    }

    #[test]
    fn embed_single_fock() {
        let b = basis(3, 3, None);
        let s = embed_input_state(&InputState::fock(2), &b, 0).unwrap();
        assert!((fidelity(&s, &fock(&b, &[2, 0, 0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn embed_superposition_normalizes() {
        let b = basis(3, 3, None);
        let input = InputState::new([(2, c(1.0)), (3, c(1.0))]).unwrap();
        let s = embed_input_state(&input, &b, 0).unwrap();
        let v = s.as_pure().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[b.index_of(&[2, 0, 0]).unwrap()].re - h).abs() < 1e-15);
        assert!((v[b.index_of(&[3, 0, 0]).unwrap()].re - h).abs() < 1e-15);
        assert!((s.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn embed_rejects_truncation_violation() {
        let b = basis(2, 2, None);
        assert!(matches!(
            embed_input_state(&InputState::fock(3), &b, 0),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn low_occupation_warning() {
        let input = InputState::new([(1, c(0.1)), (2, c(1.0))]).unwrap();
        assert!(!input.check_low_occupation(LOW_OCCUPATION_THRESHOLD));
        assert!(InputState::fock(2).check_low_occupation(LOW_OCCUPATION_THRESHOLD));
    }

    #[test]
    fn fidelity_examples() {
        let b = basis(3, 3, None);
        let a = fock(&b, &[2, 0, 0]);
        let o = fock(&b, &[0, 2, 0]);
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &o).unwrap(), 0.0);
        let rho = (a.to_density() + o.to_density()) * c(0.5);
        let mixed = QuantumState::density(b.clone(), rho).unwrap();
        assert!((fidelity(&mixed, &a).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_basis_mismatch() {
        let a = fock(&basis(2, 2, None), &[1, 0]);
        let b = fock(&basis(2, 3, None), &[1, 0]);
        assert!(matches!(fidelity(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn partial_trace_product_state() {
        let b = basis(2, 3, None);
        let red = partial_trace(&fock(&b, &[2, 0]), &[0]).unwrap();
        let r = red.as_density().unwrap();
        assert_eq!(r.nrows(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == 2 && j == 2 { 1.0 } else { 0.0 };
                assert!((r[(i, j)] - c(expected)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn partial_trace_of_w_state() {
        // oracle: (1/3)(|n0>+|0n>)(<n0|+<0n|) + (1/3)|00><00|
        let n = 2;
        let b = basis(3, 2, None);
        let s3 = 1.0 / 3f64.sqrt();
        let mut v = DVector::zeros(b.dim());
        for occ in [[n, 0, 0], [0, n, 0], [0, 0, n]] {
            v[b.index_of(&occ).unwrap()] = c(s3);
        }
        let w = QuantumState::pure(b.clone(), v).unwrap();
        let red = partial_trace(&w, &[0, 1]).unwrap();
        let rb = red.basis().clone();
        let mut expected = DMatrix::<C64>::zeros(rb.dim(), rb.dim());
        let (i_n0, i_0n, i_00) = (
            rb.index_of(&[n, 0]).unwrap(),
            rb.index_of(&[0, n]).unwrap(),
            rb.index_of(&[0, 0]).unwrap(),
        );
        for &a in &[i_n0, i_0n] {
            for &bb in &[i_n0, i_0n] {
                expected[(a, bb)] = c(1.0 / 3.0);
            }
        }
        expected[(i_00, i_00)] = c(1.0 / 3.0);
        assert!((red.as_density().unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn purity_examples() {
        let b = basis(2, 1, None);
        assert_eq!(purity(&fock(&b, &[1, 0])), 1.0);
        let mixed = QuantumState::density(b.clone(), DMatrix::identity(4, 4) * c(0.25)).unwrap();
        assert!((purity(&mixed) - 0.25).abs() < 1e-15);
        let half = (fock(&b, &[1, 0]).to_density() + fock(&b, &[0, 1]).to_density()) * c(0.5);
        let half = QuantumState::density(b.clone(), half).unwrap();
        assert!((purity(&half) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn input_state_merges_and_sorts() {
        let s = InputState::new([(3, c(1.0)), (2, c(0.5)), (2, c(0.5))]).unwrap();
        let a = s.amplitudes();
        assert_eq!(a[0].0, 2);
        assert!((a[0].1 - a[1].1).norm() < 1e-15);
        assert!(InputState::new([(2, c(0.0))]).is_err());
    }

    proptest! {
        #[test]
        fn basis_round_trip(m in 1usize..4, cap in 0u32..4, slack in 0u32..4) {
            let total = if slack == 0 { None } else { Some((m as u32 * cap).saturating_sub(slack - 1)) };
            let b = LatticeBasis::new(LatticeSpec::new(m, cap, total).unwrap()).unwrap();
            for i in 0..b.dim() {
                prop_assert_eq!(b.index_of(b.state(i)), Some(i));
            }
        }

        #[test]
        fn embedded_quanta_stay_on_site(site in 0usize..3, a2 in -1.0f64..1.0, a3 in -1.0f64..1.0, ph in 0.0f64..6.3) {
            prop_assume!(a2.abs() + a3.abs() > 1e-3);
            let b = basis(3, 3, None);
            let input = InputState::new([(2, c(a2)), (3, C64::from_polar(a3, ph))]).unwrap();
            let s = embed_input_state(&input, &b, site).unwrap();
            let occ = s.occupations();
            for (j, n) in occ.iter().enumerate() {
                if j != site { prop_assert!(n.abs() < 1e-15); }
            }
            prop_assert!((s.trace() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fidelity_ignores_global_phase(x in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4), p1 in 0.0f64..6.3, p2 in 0.0f64..6.3) {
            let b = basis(2, 2, None);
            let s = random_pure(&b, &x);
            let t = random_pure(&b, &[(0.3, -0.2), (0.1, 0.7)]);
            let f0 = fidelity(&s, &t).unwrap();
            let s2 = QuantumState::pure(b.clone(), s.as_pure().unwrap() * C64::from_polar(1.0, p1)).unwrap();
            let t2 = QuantumState::pure(b.clone(), t.as_pure().unwrap() * C64::from_polar(1.0, p2)).unwrap();
            prop_assert!((fidelity(&s2, &t2).unwrap() - f0).abs() < 1e-12);
        }

        #[test]
        fn partial_trace_composes(x in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
            let b = basis(3, 3, None);
            let s = random_pure(&b, &x);
            let direct = partial_trace(&s, &[0]).unwrap();
            let two = partial_trace(&s, &[0, 1]).unwrap();
            let staged = partial_trace(&two, &[0]).unwrap();
            let diff = direct.as_density().unwrap() - staged.as_density().unwrap();
            prop_assert!(diff.norm() < 1e-12);
            prop_assert!((direct.trace() - s.trace()).abs() < 1e-12);
        }
    }
}
