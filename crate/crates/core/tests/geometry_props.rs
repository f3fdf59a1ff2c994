mod common;

use fmclp::geometry::{
    candidate_locations, cluster_feasible, distance, incompatible_sets, one_center, COVER_TOL,
};
use fmclp::{Exec, Instance, NormSpec, Point};
use proptest::prelude::*;

fn pts(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), n)
}

fn instance(raw: &[(f64, f64)]) -> Instance {
    let p = raw.iter().map(|&(x, y)| Point::xy(x, y)).collect();
    Instance::new("prop", p, vec![1.0; raw.len()], NormSpec::Euclidean).unwrap()
}

fn d2(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Smallest enclosing circle by trying every diametral pair and circumcircle.
fn enclosing_oracle(p: &[(f64, f64)]) -> f64 {
    if p.len() == 1 {
        return 0.0;
    }
    let covers = |c: (f64, f64), r: f64| p.iter().all(|&q| d2(c, q) <= r * (1.0 + 1e-12) + 1e-15);
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let c = ((p[i].0 + p[j].0) / 2.0, (p[i].1 + p[j].1) / 2.0);
            let r = d2(p[i], p[j]) / 2.0;
            if r < best && covers(c, r) {
                best = r;
            }
            for k in j + 1..p.len() {
                let (a, b, cc) = (p[i], p[j], p[k]);
                let d = 2.0 * (a.0 * (b.1 - cc.1) + b.0 * (cc.1 - a.1) + cc.0 * (a.1 - b.1));
                if d.abs() < 1e-14 {
                    continue;
                }
                let sa = a.0 * a.0 + a.1 * a.1;
                let sb = b.0 * b.0 + b.1 * b.1;
                let sc = cc.0 * cc.0 + cc.1 * cc.1;
                let ux = (sa * (b.1 - cc.1) + sb * (cc.1 - a.1) + sc * (a.1 - b.1)) / d;
                let uy = (sa * (cc.0 - b.0) + sb * (a.0 - cc.0) + sc * (b.0 - a.0)) / d;
                let r = d2((ux, uy), a);
                if r < best && covers((ux, uy), r) {
                    best = r;
                }
            }
        }
    }
    best
}

fn grid_radius(p: &[(f64, f64)], steps: usize) -> f64 {
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(x, y) in p {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        for b in 0..=steps {
            let c = (
                lo.0 + (hi.0 - lo.0) * a as f64 / steps as f64,
                lo.1 + (hi.1 - lo.1) * b as f64 / steps as f64,
            );
            best = best.min(p.iter().map(|&q| d2(c, q)).fold(0.0, f64::max));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(
        a in (-5.0f64..5.0, -5.0f64..5.0),
        b in (-5.0f64..5.0, -5.0f64..5.0),
        c in (-5.0f64..5.0, -5.0f64..5.0),
    ) {
        let (a, b, c) = (Point::xy(a.0, a.1), Point::xy(b.0, b.1), Point::xy(c.0, c.1));
        for norm in [NormSpec::Euclidean, NormSpec::L1, NormSpec::LInf, NormSpec::LTau { tau: 3.0 }] {
            let ab = distance(&a, &b, norm).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, distance(&b, &a, norm).unwrap());
            prop_assert_eq!(distance(&a, &a, norm).unwrap(), 0.0);
            let ac = distance(&a, &c, norm).unwrap();
            let cb = distance(&c, &b, norm).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }

    #[test]
    fn one_center_matches_oracles(raw in pts(1..=12)) {
        let points: Vec<Point> = raw.iter().map(|&(x, y)| Point::xy(x, y)).collect();
        let res = one_center(&points, NormSpec::Euclidean).unwrap();
        let exact = enclosing_oracle(&raw);
        prop_assert!((res.radius - exact).abs() <= 1e-6 * exact.max(1e-12), "{} vs {}", res.radius, exact);
        prop_assert!(res.radius <= grid_radius(&raw, 60) + 1e-12);
        let c = (res.center.coords()[0], res.center.coords()[1]);
        for &q in &raw {
            prop_assert!(d2(c, q) <= res.radius * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn support_is_small_and_removal_never_grows(raw in pts(2..=12)) {
        let points: Vec<Point> = raw.iter().map(|&(x, y)| Point::xy(x, y)).collect();
        let res = one_center(&points, NormSpec::Euclidean).unwrap();
        prop_assert!(!res.support.is_empty() && res.support.len() <= 3);
        for &s in &res.support {
            let rest: Vec<Point> = points.iter().enumerate().filter(|(i, _)| *i != s).map(|(_, p)| p.clone()).collect();
            if rest.is_empty() {
                continue;
            }
            let r = one_center(&rest, NormSpec::Euclidean).unwrap().radius;
            prop_assert!(r <= res.radius * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn feasibility_is_monotone_and_helly(raw in pts(2..=7), r in 0.05f64..0.6) {
        let inst = instance(&raw);
        let n = raw.len();
        let all: Vec<usize> = (0..n).collect();
        let whole = cluster_feasible(&all, &inst, r).unwrap();
        let mut small_infeasible = false;
        for mask in 1u32..(1 << n) {
            let q: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let f = cluster_feasible(&q, &inst, r).unwrap();
            if whole {
                prop_assert!(f, "subset {:?} of a feasible cluster is infeasible", q);
            }
            if q.len() <= 3 && !f {
                small_infeasible = true;
            }
        }
        prop_assert_eq!(whole, !small_infeasible);
    }

    #[test]
    fn candidates_certify_pairs(raw in pts(1..=8), r in 0.05f64..0.5) {
        let inst = instance(&raw);
        let cands = candidate_locations(&inst, r).unwrap();
        prop_assert!(cands.len() >= raw.len());
        for c in &cands {
            let near: Vec<usize> = inst
                .points
                .iter()
                .enumerate()
                .filter(|(_, a)| distance(c, a, NormSpec::Euclidean).unwrap() <= r * (1.0 + COVER_TOL))
                .map(|(i, _)| i)
                .collect();
            for (x, &i) in near.iter().enumerate() {
                for &j in &near[x + 1..] {
                    prop_assert!(cluster_feasible(&[i, j], &inst, r).unwrap());
                }
            }
        }
    }

    #[test]
    fn incompatible_sets_are_canonical(raw in pts(3..=14), r in 0.05f64..0.4) {
        let inst = instance(&raw);
        let seq = incompatible_sets(&inst, r, 3, Exec::Seq).unwrap();
        let par = incompatible_sets(&inst, r, 3, Exec::Par).unwrap();
        prop_assert_eq!(&seq, &par);
        let mut sorted = seq.clone();
        sorted.sort();
        prop_assert_eq!(&seq, &sorted);
        for q in &seq {
            prop_assert!(!cluster_feasible(q, &inst, r).unwrap());
            for skip in 0..q.len() {
                let sub: Vec<usize> = q.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
                prop_assert!(cluster_feasible(&sub, &inst, r).unwrap(), "{:?} is not minimal", q);
            }
        }
    }
}

#[test]
fn worked_examples() {
    let e = NormSpec::Euclidean;
    assert_eq!(distance(&Point::xy(0.0, 0.0), &Point::xy(3.0, 4.0), e).unwrap(), 5.0);
    assert_eq!(distance(&Point::xy(0.0, 0.0), &Point::xy(1.0, 1.0), NormSpec::L1).unwrap(), 2.0);
    assert_eq!(distance(&Point::xy(0.0, 0.0), &Point::xy(1.0, 1.0), NormSpec::LInf).unwrap(), 1.0);
    assert!(distance(&Point::xy(0.0, 0.0), &Point::new(vec![1.0, 2.0, 3.0]).unwrap(), e).is_err());

    let res = one_center(&[Point::xy(0.0, 0.0), Point::xy(2.0, 0.0), Point::xy(1.0, 1.0)], e).unwrap();
    assert!((res.radius - 1.0).abs() < 1e-12);
    let res = one_center(&[Point::xy(0.0, 0.0), Point::xy(4.0, 2.0)], NormSpec::LInf).unwrap();
    assert_eq!(res.radius, 2.0);
    assert_eq!(res.center.coords(), &[2.0, 1.0]);

    let tri = instance(&[(0.0, 0.0), (2.0, 0.0), (1.0, 1.0)]);
    assert!(cluster_feasible(&[0, 1, 2], &tri, 1.0).unwrap());
    assert!(!cluster_feasible(&[0, 1, 2], &tri, 0.99).unwrap());
    assert!(incompatible_sets(&tri, 1.0, 3, Exec::Seq).unwrap().is_empty());
}
