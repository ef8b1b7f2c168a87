//! Randomly shifted Kronecker (Richtmyer) lattice with the tent periodizing
//! transform. Point `j` in dimension `d` is `tent(frac(j·√p_d + Δ_d))` where
//! `p_d` is the `d`-th prime and `Δ` is a uniform random shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= candidate).all(|&p| candidate % p != 0) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

#[derive(Debug, Clone)]
pub(crate) struct ShiftedLattice {
    generators: Vec<f64>,
    shift: Vec<f64>,
}

impl ShiftedLattice {
    /// Lattice for randomization `stream` of `seed`.
    pub(crate) fn new(dim: usize, seed: u64, stream: u64) -> Self {
        let generators = primes(dim).into_iter().map(|p| (p as f64).sqrt().fract()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { generators, shift }
    }

    /// Writes point `j` into `out`.
    #[inline]
    pub(crate) fn point(&self, j: u64, out: &mut [f64]) {
        let jf = j as f64;
        for ((o, &z), &s) in out.iter_mut().zip(&self.generators).zip(&self.shift) {
            let x = (jf * z + s).fract();
            *o = (2.0 * x - 1.0).abs();
        }
    }
}
