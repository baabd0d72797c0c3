//! Sparse operators on a truncated Fock basis and the Bose-Hubbard Hamiltonian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::LatticeBasis;
use crate::error::{Error, Result};
use crate::C64;

/// Magnitude below which entries are dropped when an operator is assembled.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Square complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed and
    /// entries with magnitude `<= PRUNE_THRESHOLD` are removed.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v.norm() > PRUNE_THRESHOLD);

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols: merged.iter().map(|e| e.1).collect(),
            vals: merged.iter().map(|e| e.2).collect(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, std::iter::empty())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_triplets(
            values.len(),
            values.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map_or(C64::new(0.0, 0.0), |(_, v)| v)
    }

    /// `y = A x`, O(nnz).
    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        assert_eq!(x.len(), self.dim);
        let mut y = DVector::zeros(self.dim);
        self.apply_add(C64::new(1.0, 0.0), x.as_slice(), y.as_mut_slice());
        y
    }

    /// `y += alpha A x` on raw slices.
    pub fn apply_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr += alpha * acc;
        }
    }

    /// `A B` for dense `B`.
    pub fn mul_dense(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        assert_eq!(b.nrows(), self.dim);
        let mut out = DMatrix::zeros(self.dim, b.ncols());
        for col in 0..b.ncols() {
            let x = b.column(col);
            let mut y = out.column_mut(col);
            for r in 0..self.dim {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * x[self.cols[k]];
                }
                y[r] = acc;
            }
        }
        out
    }

    /// `B A` for dense `B`.
    pub fn dense_mul(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        assert_eq!(b.ncols(), self.dim);
        let mut out = DMatrix::zeros(b.nrows(), self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                // (B A)[:, c] += B[:, r] * A[r, c]
                let c = self.cols[k];
                let v = self.vals[k];
                let src = b.column(r);
                let mut dst = out.column_mut(c);
                dst.axpy(v, &src, C64::new(1.0, 0.0));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, t)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).add(&other.mul(self).scale(C64::new(-1.0, 0.0)))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        self.add(&self.adjoint().scale(C64::new(-1.0, 0.0))).max_abs()
    }

    /// Block `A[idx, idx]`.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            map[i] = k;
        }
        let mut t = Vec::new();
        for (k, &r) in indices.iter().enumerate() {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    t.push((k, map[c], v));
                }
            }
        }
        Self::from_triplets(indices.len(), t)
    }
}

/// `c_j` (0-based site).
pub fn annihilator(basis: &LatticeBasis, site: usize) -> SparseOperator {
    assert!(site < basis.sites(), "site {site} out of range");
    let t = (0..basis.dim()).filter_map(|i| {
        let n = basis.state(i)[site];
        basis
            .lowered(i, site)
            .map(|target| (target, i, C64::new((n as f64).sqrt(), 0.0)))
    });
    SparseOperator::from_triplets(basis.dim(), t)
}

pub fn creator(basis: &LatticeBasis, site: usize) -> SparseOperator {
    annihilator(basis, site).adjoint()
}

/// `n_j = c_j^dagger c_j`.
pub fn number(basis: &LatticeBasis, site: usize) -> SparseOperator {
    let d: Vec<f64> = basis.iter().map(|occ| occ[site] as f64).collect();
    SparseOperator::diagonal(&d)
}

pub fn total_number_operator(basis: &LatticeBasis) -> SparseOperator {
    let d: Vec<f64> = (0..basis.dim()).map(|i| basis.total(i) as f64).collect();
    SparseOperator::diagonal(&d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

impl Boundary {
    /// Nearest-neighbour bonds `(j, j+1)`. A periodic ring of two sites has the
    /// bond counted twice; a single site has none.
    pub fn bonds(self, sites: usize) -> Vec<(usize, usize)> {
        match self {
            Boundary::Periodic if sites >= 2 => (0..sites).map(|j| (j, (j + 1) % sites)).collect(),
            Boundary::Periodic => Vec::new(),
            Boundary::Open => (0..sites.saturating_sub(1)).map(|j| (j, j + 1)).collect(),
        }
    }
}

/// Parameters of `H/hbar = sum_j [ -(chi_j/2) n_j(n_j-1) + dw_j n_j ] - kappa sum_<jk> (c_j^+ c_k + h.c.)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParams {
    pub chi: Vec<f64>,
    pub kappa: f64,
    pub detuning: Vec<f64>,
    pub boundary: Boundary,
}

impl HamiltonianParams {
    pub fn uniform(sites: usize, chi: f64, kappa: f64) -> Self {
        Self {
            chi: vec![chi; sites],
            kappa,
            detuning: vec![0.0; sites],
            boundary: Boundary::Periodic,
        }
    }

    /// Kerr term on the first site only.
    pub fn single_site(sites: usize, chi1: f64, kappa: f64) -> Self {
        let mut chi = vec![0.0; sites];
        chi[0] = chi1;
        Self {
            chi,
            kappa,
            detuning: vec![0.0; sites],
            boundary: Boundary::Periodic,
        }
    }

    pub fn validate(&self, sites: usize) -> Result<()> {
        if self.chi.len() != sites || self.detuning.len() != sites {
            return Err(Error::dimension(format!(
                "chi has {} and detuning {} entries for {sites} sites",
                self.chi.len(),
                self.detuning.len()
            )));
        }
        if let Some(c) = self.chi.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::config(format!("Kerr strength must be finite and >= 0, got {c}")));
        }
        if !self.kappa.is_finite() || self.detuning.iter().any(|d| !d.is_finite()) {
            return Err(Error::config("hopping and detunings must be finite"));
        }
        Ok(())
    }
}

pub fn build_hamiltonian(basis: &LatticeBasis, params: &HamiltonianParams) -> Result<SparseOperator> {
    params.validate(basis.sites())?;
    Ok(HamiltonianTerms::new(basis, params.boundary).operator(&params.chi, params.kappa, &params.detuning))
}

/// Instantaneous control values: Kerr strength on site 1, Kerr strength on the
/// remaining sites, and the hopping rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Controls {
    pub chi1: f64,
    pub chi: f64,
    pub kappa: f64,
}

impl Controls {
    pub fn new(chi1: f64, chi: f64, kappa: f64) -> Self {
        Self { chi1, chi, kappa }
    }

    pub fn site_chi(&self, sites: usize) -> Vec<f64> {
        (0..sites).map(|j| if j == 0 { self.chi1 } else { self.chi }).collect()
    }

    pub fn lerp(a: Self, b: Self, f: f64) -> Self {
        Self {
            chi1: a.chi1 + (b.chi1 - a.chi1) * f,
            chi: a.chi + (b.chi - a.chi) * f,
            kappa: a.kappa + (b.kappa - a.kappa) * f,
        }
    }
}

/// The pieces of the Hamiltonian precomputed once per basis so that the
/// operator for any control values is a cheap combination.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    sites: usize,
    /// `n_j(n_j - 1)` per site and basis state.
    kerr: Vec<Vec<f64>>,
    /// `n_j` per site and basis state.
    occupation: Vec<Vec<f64>>,
    /// `sum_<jk> (c_j^+ c_k + c_k^+ c_j)`, real symmetric.
    hopping: SparseOperator,
}

impl HamiltonianTerms {
    pub fn new(basis: &LatticeBasis, boundary: Boundary) -> Self {
        let m = basis.sites();
        let d = basis.dim();
        let mut kerr = vec![Vec::with_capacity(d); m];
        let mut occupation = vec![Vec::with_capacity(d); m];
        for occ in basis.iter() {
            for j in 0..m {
                let n = occ[j] as f64;
                kerr[j].push(n * (n - 1.0));
                occupation[j].push(n);
            }
        }
        let mut t = Vec::new();
        for (j, k) in boundary.bonds(m) {
            // normal-ordered pair c_j^+ c_k + c_k^+ c_j keeps the block Hermitian
            // in a total-capped basis
            for (a, b) in [(j, k), (k, j)] {
                for i in 0..d {
                    let occ = basis.state(i);
                    if occ[b] == 0 {
                        continue;
                    }
                    let mut target = occ.to_vec();
                    target[b] -= 1;
                    let amp_b = (occ[b] as f64).sqrt();
                    target[a] += 1;
                    let amp_a = (target[a] as f64).sqrt();
                    if let Some(r) = basis.index_of(&target) {
                        t.push((r, i, C64::new(amp_a * amp_b, 0.0)));
                    }
                }
            }
        }
        Self {
            sites: m,
            kerr,
            occupation,
            hopping: SparseOperator::from_triplets(d, t),
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.hopping.dim()
    }

    pub fn hopping(&self) -> &SparseOperator {
        &self.hopping
    }

    pub fn occupation(&self, site: usize) -> &[f64] {
        &self.occupation[site]
    }

    /// Number-diagonal part `sum_j -(chi_j/2) n_j(n_j-1) + dw_j n_j`.
    pub fn diagonal(&self, chi: &[f64], detuning: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.diagonal_into(chi, detuning, &mut out);
        out
    }

    pub fn diagonal_into(&self, chi: &[f64], detuning: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..self.sites {
            let (c, w) = (-0.5 * chi[j], detuning[j]);
            if c == 0.0 && w == 0.0 {
                continue;
            }
            for (a, o) in out.iter_mut().enumerate() {
                *o += c * self.kerr[j][a] + w * self.occupation[j][a];
            }
        }
    }

    pub fn operator(&self, chi: &[f64], kappa: f64, detuning: &[f64]) -> SparseOperator {
        let diag = self.diagonal(chi, detuning);
        let d = self.dim();
        let t = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, C64::new(v, 0.0)))
            .chain(self.hopping.triplets().map(|(r, c, v)| (r, c, v * -kappa)));
        SparseOperator::from_triplets(d, t)
    }

    pub fn dense(&self, chi: &[f64], kappa: f64, detuning: &[f64]) -> DMatrix<C64> {
        let mut h = self.hopping.to_dense() * C64::new(-kappa, 0.0);
        for (i, v) in self.diagonal(chi, detuning).into_iter().enumerate() {
            h[(i, i)] += v;
        }
        h
    }

    pub fn controls_operator(&self, c: &Controls, detuning: &[f64]) -> SparseOperator {
        self.operator(&c.site_chi(self.sites), c.kappa, detuning)
    }

    /// Terms restricted to the basis states `indices` (typically one number sector).
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Self {
            sites: self.sites,
            kerr: self.kerr.iter().map(pick).collect(),
            occupation: self.occupation.iter().map(pick).collect(),
            hopping: self.hopping.restrict(indices),
        }
    }
}
