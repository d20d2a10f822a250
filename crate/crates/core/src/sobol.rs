//! Low-discrepancy initialization: a Sobol sequence built from primitive
//! polynomials and direction numbers (Joe–Kuo table, dimensions ≤ 21) with a
//! seeded Latin-hypercube fallback above the table limit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Highest dimension covered by the embedded direction-number table.
pub const MAX_SOBOL_DIM: usize = 21;

const BITS: u32 = 32;

/// (degree s, coefficient a, initial direction numbers m) for dimensions
/// 2..=21 of the Joe–Kuo "new-joe-kuo-6" table; dimension 1 is the van der
/// Corput radical inverse.
const JOE_KUO: [(u32, u32, &[u32]); 20] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

/// Direction integers for one dimension, scaled so point k is X_k / 2³².
fn direction_integers(dim_index: usize) -> Vec<u32> {
    let mut v = vec![0u32; BITS as usize + 1];
    if dim_index == 0 {
        for (k, slot) in v.iter_mut().enumerate().skip(1) {
            *slot = 1 << (BITS as usize - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim_index - 1];
    let s = s as usize;
    for k in 1..=s.min(BITS as usize) {
        v[k] = m[k - 1] << (BITS as usize - k);
    }
    for k in s + 1..=BITS as usize {
        let mut val = v[k - s] ^ (v[k - s] >> s);
        for i in 1..s {
            if (a >> (s - 1 - i)) & 1 == 1 {
                val ^= v[k - i];
            }
        }
        v[k] = val;
    }
    v
}

/// First n points of the Sobol sequence on the unit cube via Gray-code
/// advancement; `None` when the dimension exceeds the direction table.
pub fn sobol_sequence(dim: usize, n: usize) -> Option<Vec<Vec<f64>>> {
    if dim == 0 || dim > MAX_SOBOL_DIM {
        return None;
    }
    let dirs: Vec<Vec<u32>> = (0..dim).map(direction_integers).collect();
    let mut x = vec![0u32; dim];
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            // index (from 1) of the rightmost zero bit of i−1
            let c = (i as u32 - 1).trailing_ones() as usize + 1;
            for (j, xj) in x.iter_mut().enumerate() {
                *xj ^= dirs[j][c];
            }
        }
        points.push(x.iter().map(|&b| b as f64 / 2f64.powi(BITS as i32)).collect());
    }
    Some(points)
}

/// Seeded Latin hypercube on the unit cube: each dimension's points occupy
/// every stratum [i/n, (i+1)/n) exactly once.
pub fn latin_hypercube(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        cols.push(
            strata
                .into_iter()
                .map(|s| (s as f64 + rng.random::<f64>()) / n as f64)
                .collect(),
        );
    }
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// An initial design scaled into bounds, flagging whether the Sobol table
/// was exceeded and the Latin-hypercube fallback used.
#[derive(Clone, Debug)]
pub struct InitDesign {
    pub points: Vec<Vec<f64>>,
    pub lhs_fallback: bool,
}

/// First n quasi-random points scaled into `bounds`. Deterministic in
/// (dim, n); the seed only drives the Latin-hypercube fallback for
/// dimensions beyond the direction table.
pub fn sobol_init(dim: usize, n: usize, bounds: &[(f64, f64)], seed: u64) -> Result<InitDesign> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidInput("initial design needs dim ≥ 1 and n ≥ 1".into()));
    }
    if bounds.len() != dim {
        return Err(Error::InvalidInput(format!(
            "expected {dim} bounds, got {}",
            bounds.len()
        )));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("degenerate bound ({lo}, {hi})")));
        }
    }
    let (unit, lhs_fallback) = match sobol_sequence(dim, n) {
        Some(p) => (p, false),
        None => (latin_hypercube(dim, n, seed), true),
    };
    let points = unit
        .into_iter()
        .map(|p| {
            p.iter()
                .zip(bounds)
                .map(|(&u, &(lo, hi))| lo + u * (hi - lo))
                .collect()
        })
        .collect();
    Ok(InitDesign { points, lhs_fallback })
}
