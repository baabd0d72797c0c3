//! Exact diagonalization in number sectors, reference states and phase-diagram tools.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::LatticeBasis;
use crate::error::{Error, Result};
use crate::operators::{annihilator, HamiltonianParams, HamiltonianTerms};
use crate::state::{single_site_index, QuantumState, StateData};
use crate::{C64, TWO_PI};

/// Boundary of the W phase; treated as a constant independent of lattice size.
pub const TAU1: f64 = 0.25;

/// Default probability that `superfluid_state` may lose to truncation.
pub const SUPERFLUID_LOSS_TOLERANCE: f64 = 1e-6;

/// Relative tolerance under which eigenvalues count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// `|kappa| / (chi (N - 1))`.
pub fn tau(kappa: f64, chi: f64, n: u32) -> Result<f64> {
    if !(chi > 0.0) || n < 2 {
        return Err(Error::domain(format!(
            "tau undefined for chi = {chi}, N = {n} (needs chi > 0 and N >= 2)"
        )));
    }
    Ok(kappa.abs() / (chi * (n - 1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tau2 {
    pub value: f64,
    /// Set for `M = 3, 4`, where only the range `(tau1, 0.3]` is known.
    pub approximate: bool,
}

fn tau2_formula(m: usize) -> f64 {
    let s = (std::f64::consts::PI / m as f64).sin();
    1.0 / (2.0 * m as f64 * s * s)
}

/// Superfluid boundary. `M = 2` gives `tau1`; `M >= 5` uses `1 / (2 M sin^2(pi/M))`;
/// `M = 3, 4` are interpolated linearly between those two anchors and flagged.
pub fn tau2(m: usize) -> Result<Tau2> {
    match m {
        0 | 1 => Err(Error::domain(format!("tau2 needs at least 2 sites, got {m}"))),
        2 => Ok(Tau2 {
            value: TAU1,
            approximate: false,
        }),
        3 | 4 => {
            let f = (m - 2) as f64 / 3.0;
            Ok(Tau2 {
                value: TAU1 + f * (tau2_formula(5) - TAU1),
                approximate: true,
            })
        }
        _ => Ok(Tau2 {
            value: tau2_formula(m),
            approximate: false,
        }),
    }
}

/// Largest `M` with `tau2(M) <= tau_star` (0 when even `M = 2` fails).
pub fn max_sites_for_tau(tau_star: f64) -> usize {
    let mut best = 0;
    let mut m = 2;
    // tau2 grows roughly like M / pi^2, so this terminates quickly
    while let Ok(t) = tau2(m) {
        if t.value > tau_star {
            break;
        }
        best = m;
        m += 1;
    }
    best
}

/// `(1/sqrt M) sum_j exp(i k 2 pi j / M) |N>_j`, sites numbered from 1 in the phase.
pub fn w_state(basis: &Arc<LatticeBasis>, n: u32, k: usize) -> Result<QuantumState> {
    let m = basis.sites();
    if k >= m {
        return Err(Error::domain(format!("quasimomentum index {k} out of range for {m} sites")));
    }
    let norm = 1.0 / (m as f64).sqrt();
    let mut psi = DVector::zeros(basis.dim());
    for j in 0..m {
        let phase = TWO_PI * (k * (j + 1)) as f64 / m as f64;
        psi[single_site_index(basis, j, n)?] += C64::from_polar(norm, phase);
    }
    QuantumState::pure(basis.clone(), psi)
}

#[derive(Debug, Clone)]
pub struct Superfluid {
    pub state: QuantumState,
    /// Probability kept by the truncation before renormalization.
    pub retained: f64,
}

/// `(b_0^dagger)^N |vac> / sqrt(N!)` projected onto the basis and renormalized.
pub fn superfluid_state(basis: &Arc<LatticeBasis>, n: u32, loss_tolerance: f64) -> Result<Superfluid> {
    let m = basis.sites() as f64;
    let ln_fact = |k: u32| (1..=k).map(|x| (x as f64).ln()).sum::<f64>();
    let mut psi = DVector::zeros(basis.dim());
    for i in 0..basis.dim() {
        let occ = basis.state(i);
        if occ.iter().sum::<u32>() != n {
            continue;
        }
        // multinomial amplitude sqrt(N! / prod n_j!) M^(-N/2)
        let ln_amp = 0.5 * (ln_fact(n) - occ.iter().map(|&k| ln_fact(k)).sum::<f64>()) - 0.5 * n as f64 * m.ln();
        psi[i] = C64::new(ln_amp.exp(), 0.0);
    }
    let retained = psi.norm_squared();
    if 1.0 - retained > loss_tolerance {
        return Err(Error::Truncation(format!(
            "superfluid state with N = {n} loses probability {:.3e} to truncation (tolerance {loss_tolerance:.1e})",
            1.0 - retained
        )));
    }
    let state = QuantumState::pure(basis.clone(), psi)?.normalized()?;
    Ok(Superfluid { state, retained })
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub sector_n: u32,
    /// Basis indices of the sector, in basis order.
    pub indices: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors in sector coordinates.
    pub eigenvectors: DMatrix<C64>,
}

impl SpectrumResult {
    pub fn eigenvector(&self, k: usize, basis: &Arc<LatticeBasis>) -> Result<QuantumState> {
        let mut psi = DVector::zeros(basis.dim());
        for (p, &i) in self.indices.iter().enumerate() {
            psi[i] = self.eigenvectors[(p, k)];
        }
        QuantumState::pure(basis.clone(), psi)
    }

    /// Number of eigenvalues degenerate with the lowest one.
    pub fn ground_degeneracy(&self) -> usize {
        degenerate_cluster(&self.eigenvalues, 0).len()
    }

    /// `||P_ground v||^2` for a sector-coordinate vector.
    pub fn ground_projection(&self, v: &DVector<C64>) -> f64 {
        degenerate_cluster(&self.eigenvalues, 0)
            .into_iter()
            .map(|k| self.eigenvectors.column(k).dotc(v).norm_sqr())
            .sum()
    }
}

/// Ascending eigen-decomposition of a Hermitian matrix. Each eigenvector is
/// rotated so that its largest-magnitude component is real and positive.
pub fn eigh(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let d = h.nrows();
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = v
            .iter()
            .position(|z| z.norm() >= vmax * (1.0 - 1e-9))
            .unwrap_or(0);
        let phase = if v[pivot].norm() > 0.0 {
            v[pivot].conj() / v[pivot].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        vectors.set_column(col, &(v * phase));
    }
    (values, vectors)
}

/// Indices of eigenvalues degenerate with `values[k]`.
pub fn degenerate_cluster(values: &[f64], k: usize) -> Vec<usize> {
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = DEGENERACY_TOLERANCE * scale;
    (0..values.len())
        .filter(|&i| (values[i] - values[k]).abs() <= tol)
        .collect()
}

pub fn diagonalize_sector(basis: &LatticeBasis, params: &HamiltonianParams, n: u32) -> Result<SpectrumResult> {
    params.validate(basis.sites())?;
    let indices = basis.sector_indices(n);
    if indices.is_empty() {
        return Err(Error::domain(format!("sector N = {n} is empty in basis {:?}", basis.spec())));
    }
    let terms = HamiltonianTerms::new(basis, params.boundary).restrict(&indices);
    let h = terms.dense(&params.chi, params.kappa, &params.detuning);
    let (eigenvalues, eigenvectors) = eigh(&h);
    Ok(SpectrumResult {
        sector_n: n,
        indices,
        eigenvalues,
        eigenvectors,
    })
}

/// Single-particle correlations `G_jk = <c_j^dagger c_k>`.
pub fn correlation_matrix(state: &QuantumState) -> DMatrix<C64> {
    let basis = state.basis();
    let m = basis.sites();
    let cs: Vec<_> = (0..m).map(|j| annihilator(basis, j)).collect();
    let mut g = DMatrix::zeros(m, m);
    match state.data() {
        StateData::Pure(psi) => {
            let lowered: Vec<DVector<C64>> = cs.iter().map(|c| c.apply(psi)).collect();
            for j in 0..m {
                for k in 0..m {
                    g[(j, k)] = lowered[j].dotc(&lowered[k]);
                }
            }
        }
        StateData::Density(rho) => {
            for k in 0..m {
                // Tr(c_j^+ c_k rho) = sum_ab conj(c_j[a,b]) (c_k rho)[a,b]
                let x = cs[k].mul_dense(rho);
                for j in 0..m {
                    g[(j, k)] = cs[j].triplets().map(|(a, b, v)| v.conj() * x[(a, b)]).sum();
                }
            }
        }
    }
    g
}

/// `<b_q^dagger b_q>` for `b_q = (1/sqrt M) sum_j exp(-i q 2 pi j / M) c_j`, `q = 0..M-1`.
pub fn mode_populations(state: &QuantumState) -> Vec<f64> {
    let g = correlation_matrix(state);
    let m = g.nrows();
    (0..m)
        .map(|q| {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..m {
                for k in 0..m {
                    let ph = TWO_PI * (q as f64) * (j as f64 - k as f64) / m as f64;
                    s += C64::from_polar(1.0, ph) * g[(j, k)];
                }
            }
            s.re / m as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseScanRow {
    pub tau: f64,
    pub ground_energy: f64,
    /// Weight of `w_state(N, 0)` in the ground eigenspace.
    pub w_fidelity: f64,
    /// q = 0 population of the normalized ground-eigenspace projection of the W state.
    pub q0_population: f64,
}

/// Ground-state data for a uniform ring with `kappa = tau chi (N - 1)` at each `tau`.
pub fn phase_scan(basis: &Arc<LatticeBasis>, n: u32, chi: f64, taus: &[f64]) -> Result<Vec<PhaseScanRow>> {
    if n < 2 {
        return Err(Error::domain("phase scan needs N >= 2"));
    }
    let m = basis.sites();
    let w = w_state(basis, n, 0)?;
    let indices = basis.sector_indices(n);
    let w_sector = DVector::from_iterator(indices.len(), indices.iter().map(|&i| w.as_pure().unwrap()[i]));
    taus.par_iter()
        .map(|&t| {
            let kappa = t * chi * (n - 1) as f64;
            let spec = diagonalize_sector(basis, &HamiltonianParams::uniform(m, chi, kappa), n)?;
            let cluster = degenerate_cluster(&spec.eigenvalues, 0);
            let mut proj = DVector::zeros(indices.len());
            for &k in &cluster {
                let v = spec.eigenvectors.column(k);
                proj += v * v.dotc(&w_sector);
            }
            let weight = proj.norm_squared();
            let ground = if weight > 1e-12 { proj / C64::new(weight.sqrt(), 0.0) } else { spec.eigenvectors.column(0).into_owned() };
            let mut full = DVector::zeros(basis.dim());
            for (p, &i) in indices.iter().enumerate() {
                full[i] = ground[p];
            }
            let pops = mode_populations(&QuantumState::pure(basis.clone(), full)?);
            Ok(PhaseScanRow {
                tau: t,
                ground_energy: spec.eigenvalues[0],
                w_fidelity: weight.clamp(0.0, 1.0),
                q0_population: pops[0],
            })
        })
        .collect()
}

pub fn write_phase_scan_csv<W: Write>(rows: &[PhaseScanRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tau,ground_energy,w_fidelity,q0_population")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            r.tau, r.ground_energy, r.w_fidelity, r.q0_population
        )?;
    }
    Ok(())
}
