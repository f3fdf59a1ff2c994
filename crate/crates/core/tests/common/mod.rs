#![allow(dead_code)]

use fmclp::fairness::{AlphaParam, FairnessSpec, OwaFamily};
use fmclp::{Instance, NormSpec, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHAS: [&str; 4] = ["0", "1/2", "1", "2"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn alpha(s: &str) -> AlphaParam {
    s.parse().unwrap()
}

pub fn spec(family: &OwaFamily, p: usize, a: &str) -> FairnessSpec {
    FairnessSpec::from_family(family, p, alpha(a)).unwrap()
}

/// Every standard family crossed with every alpha of the grid.
pub fn all_specs(p: usize) -> Vec<FairnessSpec> {
    OwaFamily::standard()
        .iter()
        .flat_map(|f| ALPHAS.iter().map(move |a| spec(f, p, a)))
        .collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n).map(|_| Point::xy(rng.gen(), rng.gen())).collect()
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()
}

pub fn planar(rng: &mut ChaCha8Rng, n: usize, name: &str) -> Instance {
    let pts = random_points(rng, n);
    let w = random_weights(rng, n);
    Instance::new(name, pts, w, NormSpec::Euclidean).unwrap()
}

/// Demand points plus `m` separate random candidate sites.
pub fn discrete(rng: &mut ChaCha8Rng, n: usize, m: usize, name: &str) -> Instance {
    let inst = planar(rng, n, name);
    let cands = random_points(rng, m);
    inst.with_candidates(cands).unwrap()
}

pub fn ext_eq(a: fmclp::ExtReal, b: fmclp::ExtReal, tol: f64) -> bool {
    a.approx_eq(b, tol)
}
