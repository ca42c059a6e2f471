//! Random connected grids with an irreducible load block, for tests and
//! benchmarks.

use rand::Rng;

use crate::grid::{build_model, GridModel, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub loads: usize,
    pub sources: usize,
    /// Probability of each extra line beyond the spanning structure.
    pub extra_line_prob: f64,
    pub conductance: (f64, f64),
    pub source_voltage: (f64, f64),
}

impl SynthConfig {
    pub fn new(loads: usize, sources: usize) -> Self {
        Self {
            loads,
            sources,
            extra_line_prob: 0.3,
            conductance: (0.5, 5.0),
            source_voltage: (0.8, 1.2),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Loads are named `l0..`, sources `s0..`. A random spanning tree joins
/// the loads, every source gets at least one load neighbour and further
/// lines appear independently.
pub fn random_spec<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> GridSpec {
    assert!(cfg.loads >= 1 && cfg.sources >= 1);
    let mut spec = GridSpec::default();
    let loads: Vec<String> = (0..cfg.loads).map(|i| format!("l{i}")).collect();
    let sources: Vec<String> = (0..cfg.sources).map(|i| format!("s{i}")).collect();
    for l in &loads {
        spec.load(l);
    }
    for s in &sources {
        let v = uniform(rng, cfg.source_voltage);
        spec.source(s, v);
    }
    let mut present = vec![vec![false; cfg.loads + cfg.sources]; cfg.loads + cfg.sources];
    let mut add = |spec: &mut GridSpec, rng: &mut R, a: usize, b: usize| {
        if a == b || present[a][b] {
            return;
        }
        present[a][b] = true;
        present[b][a] = true;
        let name = |k: usize| {
            if k < cfg.loads {
                &loads[k]
            } else {
                &sources[k - cfg.loads]
            }
        };
        let w = uniform(rng, cfg.conductance);
        spec.line(name(a), name(b), w);
    };
    for i in 1..cfg.loads {
        let j = rng.random_range(0..i);
        add(&mut spec, rng, i, j);
    }
    for s in 0..cfg.sources {
        let l = rng.random_range(0..cfg.loads);
        add(&mut spec, rng, l, cfg.loads + s);
    }
    for a in 0..cfg.loads {
        for b in (a + 1)..(cfg.loads + cfg.sources) {
            if rng.random::<f64>() < cfg.extra_line_prob {
                add(&mut spec, rng, a, b);
            }
        }
    }
    spec
}

pub fn random_model<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> GridModel {
    build_model(&random_spec(cfg, rng)).expect("synthetic grids are valid by construction")
}

/// A grid with `1..=max_loads` loads and `1..=max_sources` sources.
pub fn random_small_model<R: Rng + ?Sized>(max_loads: usize, max_sources: usize, rng: &mut R) -> GridModel {
    let n = rng.random_range(1..=max_loads);
    let m = rng.random_range(1..=max_sources);
    random_model(&SynthConfig::new(n, m), rng)
}
