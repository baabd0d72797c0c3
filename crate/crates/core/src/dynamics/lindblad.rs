use nalgebra::DMatrix;

use crate::basis::LatticeBasis;
use crate::error::{Error, Result};
use crate::operators::{annihilator, number, Boundary, Controls, HamiltonianTerms, SparseOperator};
use crate::C64;

/// Amplitude damping with a constant `T1` and pure dephasing whose `T_phi`
/// varies linearly with the Kerr strength of the site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingModel {
    pub t1: f64,
    pub tphi_zero_chi: f64,
    pub tphi_max_chi: f64,
    pub chi_max: f64,
}

impl DampingModel {
    pub fn new(t1: f64, tphi_zero_chi: f64, tphi_max_chi: f64, chi_max: f64) -> Result<Self> {
        for (name, v) in [
            ("t1", t1),
            ("tphi_zero_chi", tphi_zero_chi),
            ("tphi_max_chi", tphi_max_chi),
            ("chi_max", chi_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("damping parameter {name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            t1,
            tphi_zero_chi,
            tphi_max_chi,
            chi_max,
        })
    }

    /// `T1 = 20 us`, `T_phi` from 1 s at zero Kerr to 300 us at `chi_max`.
    pub fn reference(chi_max: f64) -> Self {
        Self {
            t1: 20e-6,
            tphi_zero_chi: 1.0,
            tphi_max_chi: 300e-6,
            chi_max,
        }
    }

    /// `T_phi(chi)`, linear between the endpoints and held constant outside `[0, chi_max]`.
    pub fn tphi(&self, chi: f64) -> f64 {
        let f = (chi / self.chi_max).clamp(0.0, 1.0);
        self.tphi_zero_chi + (self.tphi_max_chi - self.tphi_zero_chi) * f
    }

    pub fn decay_rate(&self) -> f64 {
        1.0 / self.t1
    }

    pub fn dephasing_rate(&self, chi: f64) -> f64 {
        1.0 / self.tphi(chi)
    }
}

/// Jump operators `c_j`, `n_j` and the derived products used by [`lindblad_rhs`].
#[derive(Debug, Clone)]
pub struct Dissipators {
    lowering: Vec<SparseOperator>,
    raising: Vec<SparseOperator>,
    number: Vec<SparseOperator>,
    number_sq: Vec<SparseOperator>,
}

impl Dissipators {
    pub fn new(basis: &LatticeBasis) -> Self {
        let m = basis.sites();
        let lowering: Vec<_> = (0..m).map(|j| annihilator(basis, j)).collect();
        let raising = lowering.iter().map(SparseOperator::adjoint).collect();
        let number: Vec<_> = (0..m).map(|j| self::number(basis, j)).collect();
        let number_sq = number.iter().map(|n| n.mul(n)).collect();
        Self {
            lowering,
            raising,
            number,
            number_sq,
        }
    }

    pub fn sites(&self) -> usize {
        self.lowering.len()
    }
}

/// `drho/dt = -i[H, rho] + sum_j (1/T1) D[c_j] rho + sum_j (1/T_phi(chi_j)) G[c_j] rho`
/// with `D[c] rho = c rho c^+ - {c^+ c, rho}/2` and `G[c] rho = n rho n - {n^2, rho}/2`.
///
/// This is the direct operator form; [`LindbladGenerator`] evaluates the same
/// right-hand side without forming any products.
pub fn lindblad_rhs(
    rho: &DMatrix<C64>,
    h: &SparseOperator,
    jumps: &Dissipators,
    damping: Option<&DampingModel>,
    chi_now: &[f64],
) -> DMatrix<C64> {
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (h.mul_dense(rho) - h.dense_mul(rho)) * minus_i;
    let Some(model) = damping else {
        return out;
    };
    let g1 = C64::new(model.decay_rate(), 0.0);
    let half = C64::new(0.5, 0.0);
    for j in 0..jumps.sites() {
        let (c, cd, n, n2) = (&jumps.lowering[j], &jumps.raising[j], &jumps.number[j], &jumps.number_sq[j]);
        let c_rho_cd = cd.dense_mul(&c.mul_dense(rho));
        let anti = n.mul_dense(rho) + n.dense_mul(rho);
        out += (c_rho_cd - anti * half) * g1;

        let gphi = C64::new(model.dephasing_rate(chi_now[j]), 0.0);
        let n_rho_n = n.dense_mul(&n.mul_dense(rho));
        let anti2 = n2.mul_dense(rho) + n2.dense_mul(rho);
        out += (n_rho_n - anti2 * half) * gphi;
    }
    out
}

/// Fast Lindblad right-hand side for the resonator ring.
///
/// All number-diagonal pieces (Kerr, detuning, the anticommutators and the
/// dephasing sandwich) collapse into one factor per matrix element; hopping is
/// a sparse product from each side and the jump term is a gather, since every
/// basis state has at most one source under `c_j`.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    terms: HamiltonianTerms,
    detuning: Vec<f64>,
    damping: Option<DampingModel>,
    total: Vec<f64>,
    /// Per site: `(target, source, amplitude)` with `c_j |source> = amplitude |target>`.
    jumps: Vec<Vec<(usize, usize, f64)>>,
}

impl LindbladGenerator {
    pub fn new(
        basis: &LatticeBasis,
        boundary: Boundary,
        detuning: Vec<f64>,
        damping: Option<DampingModel>,
    ) -> Result<Self> {
        if detuning.len() != basis.sites() {
            return Err(Error::dimension(format!(
                "{} detunings for {} sites",
                detuning.len(),
                basis.sites()
            )));
        }
        let ladder = basis.ladder_table();
        let jumps = ladder
            .lower
            .iter()
            .map(|per_site| {
                per_site
                    .iter()
                    .enumerate()
                    .filter_map(|(a, e)| e.map(|(src, amp)| (a, src, amp)))
                    .collect()
            })
            .collect();
        Ok(Self {
            terms: HamiltonianTerms::new(basis, boundary),
            detuning,
            damping,
            total: (0..basis.dim()).map(|i| basis.total(i) as f64).collect(),
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.terms.dim()
    }

    pub fn sites(&self) -> usize {
        self.terms.sites()
    }

    pub fn terms(&self) -> &HamiltonianTerms {
        &self.terms
    }

    pub fn detuning(&self) -> &[f64] {
        &self.detuning
    }

    pub fn damping(&self) -> Option<&DampingModel> {
        self.damping.as_ref()
    }

    pub fn hamiltonian(&self, c: &Controls) -> SparseOperator {
        self.terms.controls_operator(c, &self.detuning)
    }

    pub fn rhs(&self, c: &Controls, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim();
        let m = self.sites();
        let chi = c.site_chi(m);
        let diag = self.terms.diagonal(&chi, &self.detuning);
        let (g1, gphi): (f64, Vec<f64>) = match &self.damping {
            Some(model) => (model.decay_rate(), chi.iter().map(|&x| model.dephasing_rate(x)).collect()),
            None => (0.0, vec![0.0; m]),
        };
        let occ: Vec<&[f64]> = (0..m).map(|j| self.terms.occupation(j)).collect();

        let r = rho.as_slice();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for b in 0..d {
            let col = b * d;
            for a in 0..d {
                let mut loss = 0.5 * g1 * (self.total[a] + self.total[b]);
                for j in 0..m {
                    let x = occ[j][a] - occ[j][b];
                    loss += 0.5 * gphi[j] * x * x;
                }
                out[col + a] = C64::new(-loss, diag[b] - diag[a]) * r[col + a];
            }
        }

        if c.kappa != 0.0 {
            // -i[-kappa K, rho] = i kappa (K rho - rho K)
            let ik = C64::new(0.0, c.kappa);
            let hop = self.terms.hopping();
            for b in 0..d {
                let col = b * d;
                for a in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, v) in hop.row(a) {
                        acc += v * r[col + k];
                    }
                    out[col + a] += ik * acc;
                }
                // (rho K)[:, b] = sum_k rho[:, k] K[k, b], K real symmetric
                for (k, v) in hop.row(b) {
                    let src = k * d;
                    let s = ik * v;
                    for a in 0..d {
                        out[col + a] -= s * r[src + a];
                    }
                }
            }
        }

        if g1 > 0.0 {
            for per_site in &self.jumps {
                for &(b, sb, ab) in per_site {
                    let scol = sb * d;
                    let col = b * d;
                    let w = g1 * ab;
                    for &(a, sa, aa) in per_site {
                        out[col + a] += r[scol + sa] * (w * aa);
                    }
                }
            }
        }
        DMatrix::from_vec(d, d, out)
    }
}
