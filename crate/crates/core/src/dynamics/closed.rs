use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::rk4::{rk4_step, step_count};
use super::trajectory::{Sample, Trajectory};
use super::{ControlSource, IntegratorOptions};
use crate::basis::LatticeBasis;
use crate::error::{Error, Result};
use crate::operators::{Boundary, Controls, HamiltonianTerms};
use crate::spectra::eigh;
use crate::state::QuantumState;
use crate::{C64, TWO_PI};

/// Amplitude allowed outside the sector handed to [`evolve_closed_sector`].
pub const SECTOR_LEAKAGE_TOLERANCE: f64 = 1e-10;

/// Schrödinger right-hand side restricted to one number sector.
#[derive(Debug, Clone)]
pub struct SectorPropagator {
    n: u32,
    indices: Vec<usize>,
    terms: HamiltonianTerms,
    detuning: Vec<f64>,
}

impl SectorPropagator {
    pub fn new(basis: &LatticeBasis, boundary: Boundary, detuning: &[f64], n: u32) -> Result<Self> {
        let indices = basis.sector_indices(n);
        if indices.is_empty() {
            return Err(Error::domain(format!("sector N = {n} is empty")));
        }
        Self::from_terms(&HamiltonianTerms::new(basis, boundary), detuning, n, indices)
    }

    fn from_terms(full: &HamiltonianTerms, detuning: &[f64], n: u32, indices: Vec<usize>) -> Result<Self> {
        if detuning.len() != full.sites() {
            return Err(Error::dimension(format!("{} detunings for {} sites", detuning.len(), full.sites())));
        }
        Ok(Self {
            n,
            terms: full.restrict(&indices),
            indices,
            detuning: detuning.to_vec(),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn hamiltonian(&self, c: &Controls) -> DMatrix<C64> {
        self.terms.dense(&c.site_chi(self.terms.sites()), c.kappa, &self.detuning)
    }

    /// `-i H psi`.
    pub fn rhs(&self, c: &Controls, psi: &DVector<C64>) -> DVector<C64> {
        let diag = self.terms.diagonal(&c.site_chi(self.terms.sites()), &self.detuning);
        let mut out = DVector::from_iterator(
            psi.len(),
            psi.iter().zip(&diag).map(|(p, &e)| C64::new(p.im * e, -p.re * e)),
        );
        if c.kappa != 0.0 {
            // -i (-kappa K) psi
            self.terms
                .hopping()
                .apply_add(C64::new(0.0, c.kappa), psi.as_slice(), out.as_mut_slice());
        }
        out
    }

    pub fn extract(&self, full: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(self.dim(), self.indices.iter().map(|&i| full[i]))
    }

    pub fn scatter(&self, sector: &DVector<C64>, full: &mut DVector<C64>) {
        for (p, &i) in self.indices.iter().enumerate() {
            full[i] = sector[p];
        }
    }
}

/// Accumulated phase `phi(t) = arg <ref(t)|psi(t)>` of one sector, where `ref`
/// is an instantaneous eigenvector transported by continuity: at each update it
/// is the previous reference projected onto the eigenvalue cluster it overlaps
/// most, then renormalized.
#[derive(Debug, Clone, Default)]
pub struct PhaseLedger {
    pub times: Vec<f64>,
    /// Unwrapped phase in radians.
    pub phases: Vec<f64>,
    /// Fraction of the sector state in the tracked eigenspace.
    pub eigen_population: Vec<f64>,
    reference: Option<DVector<C64>>,
}

impl PhaseLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reference(&self) -> Option<&DVector<C64>> {
        self.reference.as_ref()
    }

    pub fn last_phase(&self) -> Option<f64> {
        self.phases.last().copied()
    }

    pub fn update(&mut self, t: f64, h: &DMatrix<C64>, psi: &DVector<C64>) {
        let (values, vectors) = eigh(h);
        let clusters = eigen_clusters(&values);
        let seed = self.reference.clone().unwrap_or_else(|| psi.clone());
        let weight = |cl: &[usize], v: &DVector<C64>| -> f64 {
            cl.iter().map(|&k| vectors.column(k).dotc(v).norm_sqr()).sum()
        };
        let best = clusters
            .iter()
            .max_by(|a, b| weight(a, &seed).total_cmp(&weight(b, &seed)))
            .expect("non-empty spectrum");
        let mut r = DVector::<C64>::zeros(psi.len());
        for &k in best {
            let v = vectors.column(k);
            r += v * v.dotc(&seed);
        }
        let rn = r.norm();
        if rn > 0.0 {
            r /= C64::new(rn, 0.0);
        }
        let raw = r.dotc(psi).arg();
        let phase = match self.phases.last() {
            Some(&prev) => prev + wrap_phase(raw - prev),
            None => raw,
        };
        self.times.push(t);
        self.phases.push(phase);
        let norm2 = psi.norm_squared();
        self.eigen_population.push(if norm2 > 0.0 { weight(best, psi) / norm2 } else { 0.0 });
        self.reference = Some(r);
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut y = x.rem_euclid(TWO_PI);
    if y > pi {
        y -= TWO_PI;
    }
    y
}

fn eigen_clusters(values: &[f64]) -> Vec<Vec<usize>> {
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = crate::spectra::DEGENERACY_TOLERANCE * scale;
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(cl) if (v - values[*cl.last().unwrap()]).abs() <= tol => cl.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Evolves a pure state confined to sector `n` from `t0` to `t1`, updating the
/// phase ledger every `options.stride` steps and at `t1`.
pub fn evolve_closed_sector(
    state: &QuantumState,
    n: u32,
    boundary: Boundary,
    detuning: &[f64],
    controls: &dyn ControlSource,
    t0: f64,
    t1: f64,
    options: IntegratorOptions,
) -> Result<(QuantumState, PhaseLedger)> {
    let basis = state.basis();
    let psi = state
        .as_pure()
        .ok_or_else(|| Error::config("closed-sector evolution needs a pure state"))?;
    let sector = SectorPropagator::new(basis, boundary, detuning, n)?;
    let inside = sector.extract(psi);
    let leak = (psi.norm_squared() - inside.norm_squared()).max(0.0).sqrt();
    if leak > SECTOR_LEAKAGE_TOLERANCE {
        return Err(Error::Invariant(format!(
            "state has amplitude {leak:.3e} outside sector N = {n}"
        )));
    }
    let mut ledger = PhaseLedger::new();
    let mut v = inside;
    ledger.update(t0, &sector.hamiltonian(&controls.controls(t0)), &v);
    let steps = step_count(t1 - t0, options.dt)?;
    if steps > 0 {
        let h = (t1 - t0) / steps as f64;
        let mut rhs = |t: f64, y: &DVector<C64>| sector.rhs(&controls.controls(t), y);
        for i in 0..steps {
            v = rk4_step(&v, t0 + i as f64 * h, h, i, &mut rhs)?;
            if (i + 1) % options.stride == 0 || i + 1 == steps {
                let t = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * h };
                ledger.update(t, &sector.hamiltonian(&controls.controls(t)), &v);
            }
        }
    }
    let mut full = DVector::zeros(basis.dim());
    sector.scatter(&v, &mut full);
    Ok((QuantumState::pure(basis.clone(), full)?, ledger))
}

/// Pure-state integrator that advances every occupied number sector in lockstep.
#[derive(Debug, Clone)]
pub struct ClosedIntegrator {
    basis: Arc<LatticeBasis>,
    sectors: Vec<SectorPropagator>,
    components: Vec<DVector<C64>>,
    targets: Vec<DVector<C64>>,
    ledgers: Option<Vec<PhaseLedger>>,
    t: f64,
    steps: usize,
    initial_norm: f64,
    options: IntegratorOptions,
}

impl ClosedIntegrator {
    /// Splits `psi` into its nonzero number sectors.
    pub fn new(
        basis: Arc<LatticeBasis>,
        boundary: Boundary,
        detuning: &[f64],
        psi: &DVector<C64>,
        target: &DVector<C64>,
        t0: f64,
        options: IntegratorOptions,
    ) -> Result<Self> {
        if psi.len() != basis.dim() || target.len() != basis.dim() {
            return Err(Error::dimension("state or target does not match basis"));
        }
        if options.stride == 0 {
            return Err(Error::config("sample stride must be at least 1"));
        }
        let full_terms = HamiltonianTerms::new(&basis, boundary);
        let max_n = (0..basis.dim()).map(|i| basis.total(i)).max().unwrap_or(0);
        let mut sectors = Vec::new();
        let mut components = Vec::new();
        let mut targets = Vec::new();
        for n in 0..=max_n {
            let idx = basis.sector_indices(n);
            if idx.iter().all(|&i| psi[i].norm_sqr() == 0.0) {
                continue;
            }
            let s = SectorPropagator::from_terms(&full_terms, detuning, n, idx)?;
            components.push(s.extract(psi));
            targets.push(s.extract(target));
            sectors.push(s);
        }
        Ok(Self {
            basis,
            sectors,
            components,
            targets,
            ledgers: None,
            t: t0,
            steps: 0,
            initial_norm: psi.norm_squared(),
            options,
        })
    }

    /// Enables phase tracking; ledgers are updated whenever a sample is recorded.
    pub fn track_phases(&mut self, controls: &dyn ControlSource) {
        let c = controls.controls(self.t);
        let mut ledgers = Vec::with_capacity(self.sectors.len());
        for (s, v) in self.sectors.iter().zip(&self.components) {
            let mut l = PhaseLedger::new();
            l.update(self.t, &s.hamiltonian(&c), v);
            ledgers.push(l);
        }
        self.ledgers = Some(ledgers);
    }

    pub fn ledgers(&self) -> Option<&[PhaseLedger]> {
        self.ledgers.as_deref()
    }

    pub fn sectors(&self) -> &[SectorPropagator] {
        &self.sectors
    }

    pub fn components(&self) -> &[DVector<C64>] {
        &self.components
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `<target_N | psi_N>` per sector.
    pub fn sector_overlaps(&self) -> Vec<(u32, C64)> {
        self.sectors
            .iter()
            .zip(self.components.iter().zip(&self.targets))
            .map(|(s, (v, t))| (s.n(), t.dotc(v)))
            .collect()
    }

    pub fn fidelity(&self) -> f64 {
        self.sector_overlaps()
            .iter()
            .map(|(_, o)| *o)
            .sum::<C64>()
            .norm_sqr()
            .clamp(0.0, 1.0)
    }

    pub fn state_vector(&self) -> DVector<C64> {
        let mut full = DVector::zeros(self.basis.dim());
        for (s, v) in self.sectors.iter().zip(&self.components) {
            s.scatter(v, &mut full);
        }
        full
    }

    pub fn state(&self) -> Result<QuantumState> {
        QuantumState::pure(self.basis.clone(), self.state_vector())
    }

    pub fn sample(&self, controls: &dyn ControlSource) -> Sample {
        let m = self.basis.sites();
        let mut occupations = vec![0.0; m];
        let mut norm = 0.0;
        for (s, v) in self.sectors.iter().zip(&self.components) {
            for (p, &i) in s.indices().iter().enumerate() {
                let w = v[p].norm_sqr();
                norm += w;
                for (j, &k) in self.basis.state(i).iter().enumerate() {
                    occupations[j] += w * k as f64;
                }
            }
        }
        Sample {
            t: self.t,
            fidelity: self.fidelity(),
            trace: norm,
            purity: 1.0,
            occupations,
            controls: controls.controls(self.t),
        }
    }

    pub fn record(&mut self, controls: &dyn ControlSource, trajectory: &mut Trajectory) {
        let s = self.sample(controls);
        trajectory.stats.max_trace_drift = trajectory.stats.max_trace_drift.max((s.trace - self.initial_norm).abs());
        if let Some(ledgers) = &mut self.ledgers {
            let c = controls.controls(self.t);
            for ((l, sec), v) in ledgers.iter_mut().zip(&self.sectors).zip(&self.components) {
                l.update(self.t, &sec.hamiltonian(&c), v);
            }
        }
        trajectory.push(s);
    }

    pub fn advance_to(&mut self, t1: f64, controls: &dyn ControlSource, trajectory: &mut Trajectory) -> Result<()> {
        let n = step_count(t1 - self.t, self.options.dt)?;
        if n == 0 {
            return Ok(());
        }
        let t0 = self.t;
        let h = (t1 - t0) / n as f64;
        for i in 0..n {
            let t = t0 + i as f64 * h;
            let sectors = &self.sectors;
            let mut rhs = |t: f64, ys: &Vec<DVector<C64>>| {
                let c = controls.controls(t);
                sectors.iter().zip(ys).map(|(s, y)| s.rhs(&c, y)).collect::<Vec<_>>()
            };
            self.components = rk4_step(&self.components, t, h, self.steps, &mut rhs)?;
            self.steps += 1;
            self.t = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
            if self.steps.is_multiple_of(self.options.stride) || i + 1 == n {
                self.record(controls, trajectory);
            }
        }
        trajectory.stats.steps = self.steps;
        Ok(())
    }
}
