//! Synthetic benchmark objectives and their registry: Levy, Schwefel, and a
//! piecewise test function with three regimes of different character.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// sin(π·t), exact at integer t. Plain `sin(PI * t)` returns ~1e-16 at
/// integers because PI itself is rounded; reducing the argument first keeps
/// the benchmark optima exact.
fn sin_pi(t: f64) -> f64 {
    let n = t.round();
    let s = (PI * (t - n)).sin();
    if n.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

fn check_box(x: &[f64], dim: usize, lo: f64, hi: f64, name: &str) -> Result<()> {
    if x.len() != dim {
        return Err(Error::InvalidInput(format!(
            "{name} expects dimension {dim}, got {}",
            x.len()
        )));
    }
    for (i, &xi) in x.iter().enumerate() {
        if !xi.is_finite() || xi < lo || xi > hi {
            return Err(Error::InvalidInput(format!(
                "{name} coordinate {i} = {xi} outside [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Levy function on [−10, 10]^d, global minimum 0 at (1, …, 1):
/// sin²(πw₁) + Σᵢ (wᵢ−1)²[1 + 10 sin²(πwᵢ + 1)] + (w_d−1)²[1 + sin²(2πw_d)]
/// with wᵢ = 1 + (xᵢ−1)/4.
pub fn levy(x: &[f64]) -> Result<f64> {
    check_box(x, x.len().max(1), -10.0, 10.0, "levy")?;
    let w: Vec<f64> = x.iter().map(|&xi| 1.0 + (xi - 1.0) / 4.0).collect();
    let d = w.len();
    let mut f = sin_pi(w[0]).powi(2);
    for wi in &w[..d - 1] {
        let s = (PI * wi + 1.0).sin();
        f += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * s * s);
    }
    let s_last = sin_pi(2.0 * w[d - 1]);
    f += (w[d - 1] - 1.0) * (w[d - 1] - 1.0) * (1.0 + s_last * s_last);
    Ok(f)
}

/// Schwefel function on [−500, 500]^d: 418.9829·d − Σ xᵢ sin(√|xᵢ|). The
/// global minimum sits near the boundary; its coordinate is deliberately not
/// encoded here.
pub fn schwefel(x: &[f64]) -> Result<f64> {
    check_box(x, x.len().max(1), -500.0, 500.0, "schwefel")?;
    let sum: f64 = x.iter().map(|&xi| xi * xi.abs().sqrt().sin()).sum();
    Ok(418.9829 * x.len() as f64 - sum)
}

/// Breakpoints of the piecewise test function.
pub const PIECEWISE_BREAKPOINTS: (f64, f64) = (-1.0 / 3.0, 1.0 / 3.0);

/// Piecewise test function on [−1, 1] with three regimes of clearly
/// different roughness and level: a gently textured plateau
/// 1.5 + 0.12·[cos(61x) + cos(83x)] on [−1, −1/3), a violent two-tone band
/// −1 − 1.5·[cos(61x) + cos(83x)] on [−1/3, 1/3), and an almost-linear
/// shelf 4 − 0.05x on [1/3, 1]. The derivative is discontinuous at both
/// breakpoints. Global minimum exactly −4 at x = 0, the only point where
/// both band tones trough together (61a = 83b has no other solution in
/// range). The construction is deliberate: the incommensurate tones are
/// unresolvable at moderate sampling densities — on every arithmetic
/// subsequence of samples they look like noise rather than a smooth thread
/// — so the three segments carry three distinct effective noise levels
/// (none, mild, heavy). Segments differing only in level or smoothness
/// would not do: a stationary kernel absorbs two far-apart smooth segments
/// into one regime at no likelihood cost, which would make the segments
/// unrecoverable by clustering.
pub fn piecewise_regime_1d(x: f64) -> Result<f64> {
    check_box(&[x], 1, -1.0, 1.0, "piecewise_regime_1d")?;
    let two_tone = (61.0 * x).cos() + (83.0 * x).cos();
    Ok(match piecewise_segment(x) {
        0 => 1.5 + 0.12 * two_tone,
        1 => -1.0 - 1.5 * two_tone,
        _ => 4.0 - 0.05 * x,
    })
}

/// Segment label (0, 1, 2) of a point in [−1, 1] by construction.
pub fn piecewise_segment(x: f64) -> usize {
    let (b0, b1) = PIECEWISE_BREAKPOINTS;
    if x < b0 {
        0
    } else if x < b1 {
        1
    } else {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Levy,
    Schwefel,
    Piecewise,
}

/// A named benchmark objective: bounds, direction, optional known optimum,
/// and a pure evaluator.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    name: &'static str,
    dim: usize,
    bounds: Vec<(f64, f64)>,
    direction: Direction,
    known_optimum: Option<(Vec<f64>, f64)>,
    kind: Kind,
}

impl ObjectiveSpec {
    pub fn levy(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("levy needs dimension ≥ 1".into()));
        }
        Ok(Self {
            name: "levy",
            dim,
            bounds: vec![(-10.0, 10.0); dim],
            direction: Direction::Minimize,
            known_optimum: Some((vec![1.0; dim], 0.0)),
            kind: Kind::Levy,
        })
    }

    pub fn schwefel(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("schwefel needs dimension ≥ 1".into()));
        }
        Ok(Self {
            name: "schwefel",
            dim,
            bounds: vec![(-500.0, 500.0); dim],
            direction: Direction::Minimize,
            // the minimizer coordinate is derived by search in tests, never
            // stored here
            known_optimum: None,
            kind: Kind::Schwefel,
        })
    }

    pub fn piecewise_regime_1d() -> Self {
        Self {
            name: "piecewise_regime_1d",
            dim: 1,
            bounds: vec![(-1.0, 1.0)],
            direction: Direction::Minimize,
            known_optimum: Some((vec![0.0], -4.0)),
            kind: Kind::Piecewise,
        }
    }

    /// Registry lookup by CLI name.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "levy" => Self::levy(dim),
            "schwefel" => Self::schwefel(dim),
            "piecewise_regime_1d" => {
                if dim != 1 {
                    return Err(Error::InvalidInput(format!(
                        "piecewise_regime_1d is 1-dimensional, got dim {dim}"
                    )));
                }
                Ok(Self::piecewise_regime_1d())
            }
            other => Err(Error::InvalidInput(format!(
                "unknown objective '{other}'; valid names: {}",
                Self::names().join(", ")
            ))),
        }
    }

    pub fn names() -> Vec<&'static str> {
        vec!["levy", "schwefel", "piecewise_regime_1d"]
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self.kind {
            Kind::Levy => levy(x),
            Kind::Schwefel => schwefel(x),
            Kind::Piecewise => {
                if x.len() != 1 {
                    return Err(Error::InvalidInput("piecewise objective is 1-D".into()));
                }
                piecewise_regime_1d(x[0])
            }
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn known_optimum(&self) -> Option<&(Vec<f64>, f64)> {
        self.known_optimum.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn levy_minimum_is_exact_zero() {
        for d in [1usize, 2, 6, 10] {
            assert_eq!(levy(&vec![1.0; d]).unwrap(), 0.0, "d = {d}");
        }
    }

    #[test]
    fn levy_hand_value_one_dimensional() {
        assert_relative_eq!(levy(&[0.0]).unwrap(), 0.625, epsilon = 1e-12);
    }

    #[test]
    fn levy_is_not_permutation_symmetric() {
        // (1,0): only the trailing term survives → 0.0625·(1+sin²(1.5π))
        let a = levy(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(a, 0.125, epsilon = 1e-12);
        // (0,1): leading sin² plus the middle sum term survive
        let s = (PI * 0.75 + 1.0).sin();
        let expect = 0.5 + 0.0625 * (1.0 + 10.0 * s * s);
        let b = levy(&[0.0, 1.0]).unwrap();
        assert_relative_eq!(b, expect, epsilon = 1e-12);
        assert_ne!(a, b);
    }

    #[test]
    fn schwefel_zero_input() {
        assert_eq!(schwefel(&[0.0]).unwrap(), 418.9829);
        assert_eq!(schwefel(&[0.0; 3]).unwrap(), 418.9829 * 3.0);
    }

    #[test]
    fn schwefel_is_separable() {
        let pts = [
            vec![12.0, -340.5, 77.7],
            vec![499.0, 0.1, -499.9],
            vec![-250.0, 250.0, 1.0],
        ];
        for x in pts {
            let joint = schwefel(&x).unwrap();
            let sum: f64 = x.iter().map(|&xi| schwefel(&[xi]).unwrap()).sum();
            assert_relative_eq!(joint, sum, epsilon = 1e-9);
        }
    }

    #[test]
    fn schwefel_grid_minimizer_value_near_zero() {
        // derive the 1-D minimizer by scanning, never by constant
        let n = 100_000;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let x = -500.0 + 1000.0 * i as f64 / n as f64;
            let f = schwefel(&[x]).unwrap();
            if f < best.0 {
                best = (f, x);
            }
        }
        assert!(best.0.abs() <= 1e-3, "min {} at {}", best.0, best.1);
        assert!(best.1 > 400.0, "minimizer should sit near the upper boundary");
    }

    #[test]
    fn piecewise_deterministic_and_segmented() {
        for x in [-0.9, -0.34, -0.3333, 0.0, 0.3334, 1.0] {
            assert_eq!(piecewise_regime_1d(x).unwrap(), piecewise_regime_1d(x).unwrap());
        }
        assert_eq!(piecewise_segment(-0.5), 0);
        assert_eq!(piecewise_segment(0.0), 1);
        assert_eq!(piecewise_segment(0.5), 2);
        let (b0, b1) = PIECEWISE_BREAKPOINTS;
        assert_eq!(piecewise_segment(b0), 1);
        assert_eq!(piecewise_segment(b1), 2);
    }

    #[test]
    fn piecewise_breakpoints_are_jumps() {
        let (b0, b1) = PIECEWISE_BREAKPOINTS;
        let eps = 1e-9;
        for b in [b0, b1] {
            let left = piecewise_regime_1d(b - eps).unwrap();
            let right = piecewise_regime_1d(b + eps).unwrap();
            assert!((left - right).abs() > 0.1, "no level jump at {b}");
        }
        // slope mismatch across the first breakpoint
        let h = 1e-6;
        let slope_left =
            (piecewise_regime_1d(b0 - h).unwrap() - piecewise_regime_1d(b0 - 2.0 * h).unwrap()) / h;
        let slope_right =
            (piecewise_regime_1d(b0 + 2.0 * h).unwrap() - piecewise_regime_1d(b0 + h).unwrap()) / h;
        assert!((slope_left - slope_right).abs() > 1.0);
    }

    #[test]
    fn piecewise_global_minimum_by_scan() {
        let n = 1_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let f = piecewise_regime_1d(x).unwrap();
            if f < best.0 {
                best = (f, x);
            }
        }
        assert_relative_eq!(best.0, -4.0, epsilon = 1e-9);
        assert_relative_eq!(best.1, 0.0, epsilon = 1e-4);
    }

    #[test]
    fn bounds_violations_are_input_errors() {
        assert!(levy(&[10.5]).is_err());
        assert!(schwefel(&[500.1, 0.0]).is_err());
        assert!(piecewise_regime_1d(-1.01).is_err());
        assert!(levy(&[f64::NAN]).is_err());
    }

    #[test]
    fn registry_round_trip() {
        assert_eq!(ObjectiveSpec::names(), vec!["levy", "schwefel", "piecewise_regime_1d"]);
        let o = ObjectiveSpec::by_name("levy", 6).unwrap();
        assert_eq!(o.dim(), 6);
        assert_eq!(o.direction(), Direction::Minimize);
        let (x_opt, f_opt) = o.known_optimum().unwrap();
        assert_eq!(o.evaluate(x_opt).unwrap(), *f_opt);
        assert!(ObjectiveSpec::by_name("rosenbrock", 2).is_err());
        assert!(ObjectiveSpec::by_name("piecewise_regime_1d", 2).is_err());
        assert!(ObjectiveSpec::by_name("piecewise_regime_1d", 1).is_ok());
        assert!(ObjectiveSpec::schwefel(2).unwrap().known_optimum().is_none());
    }
}
