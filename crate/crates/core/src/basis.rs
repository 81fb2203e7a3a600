//! Number-conserving basis of one cavity mode coupled to `L` hardcore-boson
//! exciton sites.
//!
//! States are ordered by excitation block (N = 2 first, then N = 1, then
//! N = 0 for the `N <= 2` sector), inside a block by cavity photon count
//! descending, then by exciton bit pattern ascending. Index 0 is therefore
//! always `|2; 0..0>` and indices `1..=L` are the one-photon, one-exciton
//! states in site order.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported lattice. Exciton occupations live in a `u128`.
pub const MAX_SITES: usize = 120;

/// Cavity Fock number plus exciton occupation bits (bit `i` = site `i`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationState {
    pub cavity_photons: u8,
    pub excitons: u128,
}

impl OccupationState {
    pub fn new(cavity_photons: u8, excitons: u128) -> Self {
        Self { cavity_photons, excitons }
    }

    pub fn exciton_count(&self) -> u32 {
        self.excitons.count_ones()
    }

    pub fn excitations(&self) -> u32 {
        self.cavity_photons as u32 + self.exciton_count()
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        (self.excitons >> site) & 1 == 1
    }

    /// Occupied sites in ascending order.
    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        let mut bits = self.excitons;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let site = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(site)
            }
        })
    }
}

/// Which excitation sectors the basis spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Exactly two excitations.
    Two,
    /// Zero, one or two excitations.
    UpToTwo,
}

impl Sector {
    /// Excitation numbers contained, in basis order.
    pub fn blocks(self) -> &'static [u32] {
        match self {
            Sector::Two => &[2],
            Sector::UpToTwo => &[2, 1, 0],
        }
    }
}

/// Enumerated sector basis with an O(1) inverse map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorBasis {
    sites: usize,
    sector: Sector,
    states: Vec<OccupationState>,
}

impl SectorBasis {
    pub fn build(sites: usize, sector: Sector) -> Result<Self> {
        if sites == 0 {
            return Err(Error::invalid("lattice must have at least one site"));
        }
        if sites > MAX_SITES {
            return Err(Error::TooManySites { sites, limit: MAX_SITES });
        }
        let mut states = Vec::with_capacity(sector_dimension(sites, sector));
        for &n in sector.blocks() {
            for photons in (0..=n.min(2)).rev() {
                let k = (n - photons) as usize;
                for pattern in KSubsets::new(sites, k) {
                    states.push(OccupationState::new(photons as u8, pattern));
                }
            }
        }
        debug_assert_eq!(states.len(), sector_dimension(sites, sector));
        Ok(Self { sites, sector, states })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> OccupationState {
        self.states[index]
    }

    /// Index range occupied by the block with `n` total excitations.
    pub fn block_range(&self, n: u32) -> Option<Range<usize>> {
        let mut start = 0;
        for &block in self.sector.blocks() {
            let len = block_dimension(self.sites, block);
            if block == n {
                return Some(start..start + len);
            }
            start += len;
        }
        None
    }

    /// Position of `state` in the basis, or `None` if it lies outside the sector.
    pub fn index_of(&self, state: &OccupationState) -> Option<usize> {
        if state.cavity_photons > 2 {
            return None;
        }
        if self.sites < 128 && state.excitons >> self.sites != 0 {
            return None;
        }
        let n = state.excitations();
        let mut offset = self.block_range(n)?.start;
        for photons in ((state.cavity_photons as u32 + 1)..=n.min(2)).rev() {
            offset += binomial(self.sites, (n - photons) as usize);
        }
        Some(offset + colex_rank(state.excitons))
    }
}

/// Dimension of a single excitation block: `sum_c C(L, n - c)` over cavity
/// occupations `c <= min(n, 2)`.
pub fn block_dimension(sites: usize, n: u32) -> usize {
    (0..=n.min(2)).map(|c| binomial(sites, (n - c) as usize)).sum()
}

/// `1 + L + L(L-1)/2` for N = 2, `3 + 2L + L(L-1)/2` for N <= 2.
pub fn sector_dimension(sites: usize, sector: Sector) -> usize {
    sector.blocks().iter().map(|&n| block_dimension(sites, n)).sum()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Rank of a bit pattern among all patterns with the same popcount in
/// ascending numeric order (combinatorial number system).
fn colex_rank(pattern: u128) -> usize {
    let mut rank = 0;
    let mut bits = pattern;
    let mut m = 1;
    while bits != 0 {
        let pos = bits.trailing_zeros() as usize;
        rank += binomial(pos, m);
        bits &= bits - 1;
        m += 1;
    }
    rank
}

/// All `k`-bit patterns over `n` bits in ascending numeric order.
struct KSubsets {
    n: usize,
    next: Option<u128>,
}

impl KSubsets {
    fn new(n: usize, k: usize) -> Self {
        let next = if k > n {
            None
        } else if k == 0 {
            Some(0)
        } else {
            Some(u128::MAX >> (128 - k))
        };
        Self { n, next }
    }
}

impl Iterator for KSubsets {
    type Item = u128;

    fn next(&mut self) -> Option<u128> {
        let current = self.next?;
        self.next = if current == 0 {
            None
        } else {
            // Gosper's hack.
            let c = current & current.wrapping_neg();
            let r = current.checked_add(c);
            match r {
                Some(r) => {
                    let next = (((r ^ current) >> 2) / c) | r;
                    if self.n < 128 && next >> self.n != 0 {
                        None
                    } else {
                        Some(next)
                    }
                }
                None => None,
            }
        };
        Some(current)
    }
}

/// Ordered, duplicate-free set of exciton sites forming a subsystem.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteSet {
    sites: Vec<usize>,
}

impl SiteSet {
    /// Sorts and validates `sites` against a lattice of `lattice_sites`.
    pub fn new(mut sites: Vec<usize>, lattice_sites: usize) -> Result<Self> {
        sites.sort_unstable();
        if sites.is_empty() {
            return Err(Error::SubsystemMismatch("subsystem must contain at least one site".into()));
        }
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::SubsystemMismatch(format!("duplicate sites in {sites:?}")));
        }
        if let Some(&bad) = sites.iter().find(|&&s| s >= lattice_sites) {
            return Err(Error::SubsystemMismatch(format!(
                "site {bad} is not on a lattice of {lattice_sites} sites"
            )));
        }
        if sites.len() > 16 {
            return Err(Error::SubsystemMismatch("subsystems above 16 sites are not supported".into()));
        }
        Ok(Self { sites })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn mask(&self) -> u128 {
        self.sites.iter().fold(0u128, |m, &s| m | (1u128 << s))
    }

    /// Dimension `2^|A|` of the subsystem's occupation space.
    pub fn local_dim(&self) -> usize {
        1 << self.sites.len()
    }
}

/// Everything outside the subsystem: cavity photons plus the remaining
/// exciton bits (subsystem bits cleared).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComplementConfig {
    pub cavity_photons: u8,
    pub excitons: u128,
}

/// Split a state into its subsystem bits (bit `k` = occupation of the `k`-th
/// site of `subsystem`) and its complement label.
pub fn decompose(state: &OccupationState, subsystem: &SiteSet) -> (u32, ComplementConfig) {
    let mut local = 0u32;
    for (k, &site) in subsystem.sites().iter().enumerate() {
        if state.is_occupied(site) {
            local |= 1 << k;
        }
    }
    let complement = ComplementConfig {
        cavity_photons: state.cavity_photons,
        excitons: state.excitons & !subsystem.mask(),
    };
    (local, complement)
}

/// Inverse of [`decompose`].
pub fn recombine(local: u32, complement: &ComplementConfig, subsystem: &SiteSet) -> OccupationState {
    let mut excitons = complement.excitons;
    for (k, &site) in subsystem.sites().iter().enumerate() {
        if (local >> k) & 1 == 1 {
            excitons |= 1 << site;
        }
    }
    OccupationState::new(complement.cavity_photons, excitons)
}
