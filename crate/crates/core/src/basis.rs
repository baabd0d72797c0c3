//! Truncated multi-mode Fock bases.
//!
//! A [`LatticeBasis`] enumerates every occupation vector `(n_1, ..., n_M)` with
//! `0 <= n_j <= per_site_cap` and, optionally, `sum n_j <= total_cap`. States are
//! ordered lexicographically with site 1 as the most significant digit, so the
//! basis of `M = 2, cap = 1` is `(0,0), (0,1), (1,0), (1,1)`.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const DEFAULT_DIMENSION_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    pub sites: usize,
    pub per_site_cap: u32,
    pub total_cap: Option<u32>,
}

impl LatticeSpec {
    pub fn new(sites: usize, per_site_cap: u32, total_cap: Option<u32>) -> Result<Self> {
        let spec = Self {
            sites,
            per_site_cap,
            total_cap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::config("lattice needs at least one site"));
        }
        if let Some(total) = self.total_cap {
            let max_total = self.sites as u64 * self.per_site_cap as u64;
            if total as u64 > max_total {
                return Err(Error::config(format!(
                    "total_cap {total} exceeds sites * per_site_cap = {max_total}"
                )));
            }
        }
        Ok(())
    }

    /// Number of admissible occupation vectors, saturating at `u128::MAX`.
    pub fn dimension(&self) -> u128 {
        let width = self.per_site_cap as u128 + 1;
        match self.total_cap {
            None => (0..self.sites).fold(1u128, |acc, _| acc.saturating_mul(width)),
            Some(total) => {
                // ways[r] = number of ways the remaining sites can hold exactly r quanta
                let total = total as usize;
                let cap = self.per_site_cap as usize;
                let mut ways = vec![0u128; total + 1];
                ways[0] = 1;
                for _ in 0..self.sites {
                    let mut next = vec![0u128; total + 1];
                    for (r, &w) in ways.iter().enumerate() {
                        if w == 0 {
                            continue;
                        }
                        for n in 0..=cap.min(total - r) {
                            next[r + n] = next[r + n].saturating_add(w);
                        }
                    }
                    ways = next;
                }
                ways.iter().fold(0u128, |acc, &w| acc.saturating_add(w))
            }
        }
    }

    fn max_total(&self) -> u32 {
        self.total_cap
            .unwrap_or(self.per_site_cap.saturating_mul(self.sites as u32))
    }
}

#[derive(Debug, Clone)]
pub struct LatticeBasis {
    spec: LatticeSpec,
    /// Occupations stored row-major: state `i` is `states[i*M .. (i+1)*M]`.
    states: Vec<u32>,
    index: HashMap<Vec<u32>, usize>,
}

impl PartialEq for LatticeBasis {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl LatticeBasis {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        Self::with_limit(spec, DEFAULT_DIMENSION_LIMIT)
    }

    pub fn with_limit(spec: LatticeSpec, limit: usize) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dimension();
        if dim > limit as u128 {
            return Err(Error::Resource {
                what: "basis dimension",
                requested: usize::try_from(dim).unwrap_or(usize::MAX),
                limit,
            });
        }
        let dim = dim as usize;
        let m = spec.sites;
        let mut states = Vec::with_capacity(dim * m);
        let mut current = vec![0u32; m];
        enumerate(&spec, 0, spec.max_total(), &mut current, &mut states);
        debug_assert_eq!(states.len(), dim * m);

        let index = states
            .chunks_exact(m)
            .enumerate()
            .map(|(i, occ)| (occ.to_vec(), i))
            .collect();
        Ok(Self {
            spec,
            states,
            index,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn sites(&self) -> usize {
        self.spec.sites
    }

    pub fn per_site_cap(&self) -> u32 {
        self.spec.per_site_cap
    }

    pub fn dim(&self) -> usize {
        self.states.len() / self.spec.sites
    }

    pub fn state(&self, i: usize) -> &[u32] {
        let m = self.spec.sites;
        &self.states[i * m..(i + 1) * m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.states.chunks_exact(self.spec.sites)
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn total(&self, i: usize) -> u32 {
        self.state(i).iter().sum()
    }

    /// Indices of all basis states holding exactly `n` quanta, in basis order.
    pub fn sector_indices(&self, n: u32) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.total(i) == n).collect()
    }

    /// Index of the state with one quantum fewer on `site`, if `n_site > 0`.
    pub fn lowered(&self, i: usize, site: usize) -> Option<usize> {
        let occ = self.state(i);
        if occ[site] == 0 {
            return None;
        }
        let mut target = occ.to_vec();
        target[site] -= 1;
        self.index_of(&target)
    }

    /// Index of the state with one more quantum on `site`, if it is admissible.
    pub fn raised(&self, i: usize, site: usize) -> Option<usize> {
        let mut target = self.state(i).to_vec();
        target[site] += 1;
        self.index_of(&target)
    }

    /// Index of the all-sites-empty state.
    pub fn vacuum(&self) -> usize {
        0
    }

    pub fn ladder_table(&self) -> LadderTable {
        let m = self.sites();
        let dim = self.dim();
        let mut lower = vec![Vec::with_capacity(dim); m];
        let mut occupation = vec![Vec::with_capacity(dim); m];
        for i in 0..dim {
            let occ = self.state(i);
            for j in 0..m {
                occupation[j].push(occ[j] as f64);
                lower[j].push(self.raised(i, j).map(|src| (src, ((occ[j] + 1) as f64).sqrt())));
            }
        }
        LadderTable { lower, occupation }
    }
}

/// Precomputed action of the annihilators on a basis.
///
/// `lower[j][a] = Some((src, amp))` means `c_j |src> = amp |a>`; each target has at
/// most one source, which is what makes `c rho c^dagger` an O(dim^2) gather.
#[derive(Debug, Clone)]
pub struct LadderTable {
    pub lower: Vec<Vec<Option<(usize, f64)>>>,
    pub occupation: Vec<Vec<f64>>,
}

fn enumerate(spec: &LatticeSpec, site: usize, remaining: u32, current: &mut [u32], out: &mut Vec<u32>) {
    if site == spec.sites {
        out.extend_from_slice(current);
        return;
    }
    for n in 0..=spec.per_site_cap.min(remaining) {
        current[site] = n;
        enumerate(spec, site + 1, remaining - n, current, out);
    }
    current[site] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(m: usize, cap: u32, total: Option<u32>) -> Vec<Vec<u32>> {
        let width = cap as usize + 1;
        let count = width.pow(m as u32);
        let mut out = Vec::new();
        for code in 0..count {
            let mut occ = vec![0u32; m];
            let mut c = code;
            for j in (0..m).rev() {
                occ[j] = (c % width) as u32;
                c /= width;
            }
            if total.is_none_or(|t| occ.iter().sum::<u32>() <= t) {
                out.push(occ);
            }
        }
        out
    }

    #[test]
    fn product_basis_dimension() {
        let basis = LatticeBasis::new(LatticeSpec::new(3, 3, None).unwrap()).unwrap();
        assert_eq!(basis.dim(), 64);
    }

    #[test]
    fn single_site_vacuum_only() {
        let basis = LatticeBasis::new(LatticeSpec::new(1, 0, None).unwrap()).unwrap();
        assert_eq!(basis.dim(), 1);
        assert_eq!(basis.state(0), &[0]);
    }

    #[test]
    fn total_cap_matches_brute_force() {
        let basis = LatticeBasis::new(LatticeSpec::new(2, 2, Some(2)).unwrap()).unwrap();
        assert_eq!(basis.dim(), 6);
        let mut got: Vec<Vec<u32>> = basis.iter().map(|s| s.to_vec()).collect();
        let mut expected = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![1, 1],
            vec![2, 0],
        ];
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        for (m, cap, total) in [(3, 2, None), (3, 3, Some(3)), (4, 2, Some(3)), (2, 4, Some(4))] {
            let basis = LatticeBasis::new(LatticeSpec::new(m, cap, total).unwrap()).unwrap();
            let expected = brute_force(m, cap, total);
            let got: Vec<Vec<u32>> = basis.iter().map(|s| s.to_vec()).collect();
            assert_eq!(got, expected, "M={m} cap={cap} total={total:?}");
            assert_eq!(basis.spec().dimension(), expected.len() as u128);
        }
    }

    #[test]
    fn index_round_trip() {
        let basis = LatticeBasis::new(LatticeSpec::new(3, 3, Some(4)).unwrap()).unwrap();
        for i in 0..basis.dim() {
            assert_eq!(basis.index_of(basis.state(i)), Some(i));
        }
    }

    #[test]
    fn dimension_limit_is_enforced() {
        let spec = LatticeSpec::new(10, 3, None).unwrap();
        match LatticeBasis::new(spec) {
            Err(Error::Resource { requested, .. }) => assert_eq!(requested, 4usize.pow(10)),
            other => panic!("expected resource error, got {other:?}"),
        }
        // a total cap keeps the same lattice tractable
        let capped = LatticeBasis::new(LatticeSpec::new(10, 3, Some(2)).unwrap()).unwrap();
        assert_eq!(capped.dim(), 1 + 10 + 55);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(LatticeSpec::new(0, 3, None).is_err());
        assert!(LatticeSpec::new(2, 1, Some(3)).is_err());
        assert!(LatticeSpec::new(2, 1, Some(2)).is_ok());
    }

    #[test]
    fn ladder_neighbours() {
        let basis = LatticeBasis::new(LatticeSpec::new(2, 2, Some(2)).unwrap()).unwrap();
        let i = basis.index_of(&[1, 1]).unwrap();
        assert_eq!(basis.lowered(i, 0), basis.index_of(&[0, 1]));
        // (2,1) violates the total cap
        assert_eq!(basis.raised(i, 0), None);
        assert_eq!(basis.vacuum(), basis.index_of(&[0, 0]).unwrap());
    }
}
