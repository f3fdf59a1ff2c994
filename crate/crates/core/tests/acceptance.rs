//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p fmclp --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_rational::Ratio;
use rand::Rng;

use fmclp::experiments::{gen_instance, run_grid, GridConfig};
use fmclp::fairness::{orness, owa_family, AlphaParam, OwaFamily};
use fmclp::geometry::{incompatible_sets, one_center, COVER_TOL};
use fmclp::metrics::{gini_index, price_of_efficiency, price_of_fairness};
use fmclp::model::{self, ModelIR, ModelOptions};
use fmclp::solver::{
    brute_force_multi, row_generation, solve_continuous_fds, solve_discrete, solve_row_generation, SolveOptions,
    Space, WarmStart,
};
use fmclp::{Exec, Instance, Point};

use common::{all_specs, discrete, ext_eq, planar, rng, spec};

type Q = Ratio<i128>;

const RADII: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn oracle_equivalence() -> Verdict {
    let opts = SolveOptions {
        brute_cap: 100_000_000,
        ..Default::default()
    };
    let mut solves = 0;
    let mut mismatches = Vec::new();
    for seed in 0..200u64 {
        let mut r = rng(1_000 + seed);
        let n = r.gen_range(3..=10);
        let m = r.gen_range(2..=8);
        let p = r.gen_range(1..=3.min(m));
        let radius = RADII[r.gen_range(0..RADII.len())];
        let inst = discrete(&mut r, n, m, &format!("oracle-{seed}"));
        let specs = all_specs(p);
        let oracle = brute_force_multi(&inst, &specs, p, radius, Space::Discrete, &opts).unwrap();
        for (s, o) in specs.iter().zip(&oracle) {
            let sol = solve_discrete(&inst, s, p, radius, &opts).unwrap();
            sol.verify(&inst, s, radius).unwrap();
            solves += 1;
            if !ext_eq(sol.objective, o.objective, 1e-9) {
                mismatches.push(format!(
                    "seed {seed} {}/{}: {:?} vs {:?}",
                    s.weights().family().letter(),
                    s.alpha(),
                    sol.objective,
                    o.objective
                ));
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "200 instances, {solves} solves vs brute force, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn continuous_equivalence() -> Verdict {
    let opts = SolveOptions::default();
    let mut bad = Vec::new();
    let mut pairs = 0;
    let catalogue = all_specs(1).len();
    for seed in 0..100u64 {
        let mut r = rng(2_000 + seed);
        let n = r.gen_range(2..=10);
        let p = r.gen_range(1..=3);
        let radius = RADII[r.gen_range(0..RADII.len())];
        let inst = planar(&mut r, n, &format!("cont-{seed}"));
        let specs = all_specs(p);
        for s in [&specs[0], &specs[seed as usize % catalogue]] {
            let fds = solve_continuous_fds(&inst, s, p, radius, &opts).unwrap();
            let rg = solve_row_generation(&inst, s, p, radius, &opts).unwrap();
            pairs += 1;
            for (label, sol) in [("fds", &fds), ("rowgen", &rg)] {
                if let Err(e) = sol.verify(&inst, s, radius) {
                    bad.push(format!("seed {seed} {label}: {e}"));
                }
            }
            if !ext_eq(fds.objective, rg.objective, 1e-9) {
                bad.push(format!("seed {seed}: fds {:?} vs rowgen {:?}", fds.objective, rg.objective));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "100 instances, {pairs} fairness settings, centers cover clusters within R(1+1e-9); {} failures{}",
            bad.len(),
            bad.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn harmonic_q(k: i128) -> Q {
    (1..=k).map(|l| Q::new(1, l)).sum()
}

/// Family weights in exact rational arithmetic.
fn exact_weights(letter: char, p: i128) -> Vec<Q> {
    match letter {
        'W' => vec![Q::new(1, p); p as usize],
        'C' => (0..p).map(|j| if j == 0 { Q::from(1) } else { Q::from(0) }).collect(),
        'K' => {
            let k = (p + 1) / 2;
            (1..=p).map(|j| if j <= k { Q::new(1, k) } else { Q::from(0) }).collect()
        }
        'D' => {
            let b = Q::new(1, 2);
            let den = Q::from(1) + Q::from(p - 1) * b;
            (1..=p).map(|j| if j == 1 { Q::from(1) / den } else { b / den }).collect()
        }
        'G' => (1..=p).map(|j| Q::new(2 * (p - j) + 1, p * p)).collect(),
        'H' => (1..=p).map(|j| (harmonic_q(p) - harmonic_q(j - 1)) / Q::from(p)).collect(),
        _ => unreachable!(),
    }
}

fn orness_q(l: &[Q]) -> Q {
    let p = l.len() as i128;
    l.iter()
        .enumerate()
        .map(|(j, x)| Q::new(p - 1 - j as i128, p - 1) * x)
        .sum()
}

fn q_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn owa_closed_forms() -> Verdict {
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for p in 2..=10i128 {
        let pf = p as f64;
        for fam in OwaFamily::standard() {
            let letter = fam.letter().chars().next().unwrap();
            let lib = owa_family(&fam, p as usize).unwrap();
            let exact = exact_weights(letter, p);
            if exact.iter().sum::<Q>() != Q::from(1) {
                bad.push(format!("{letter} p={p}: rational weights do not sum to 1"));
            }
            for (a, b) in lib.lambda().iter().zip(&exact) {
                if (a - q_f64(*b)).abs() > 1e-15 {
                    bad.push(format!("{letter} p={p}: weight {a} vs {}", q_f64(*b)));
                }
            }
            let sum: f64 = lib.lambda().iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                bad.push(format!("{letter} p={p}: floating sum {sum}"));
            }
            let direct = q_f64(orness_q(&exact));
            let computed = orness(&lib).unwrap();
            let k = ((p + 1) / 2) as f64;
            let table = match letter {
                'W' => Some(0.5),
                'C' => Some(1.0),
                'K' => Some(1.0 - (k - 1.0) / (2.0 * (pf - 1.0))),
                'G' => Some((4.0 * pf + 1.0) / (6.0 * pf)),
                'H' => Some(0.75),
                _ => None,
            };
            if (computed - direct).abs() > 1e-12 {
                bad.push(format!("{letter} p={p}: orness {computed} vs rational {direct}"));
            }
            match table {
                Some(t) if (t - computed).abs() > 1e-9 => {
                    bad.push(format!("{letter} p={p}: closed form {t} vs direct {computed}"))
                }
                Some(_) => {}
                None => {}
            }
        }
    }
    // D is not in the checked list; its stated closed form is compared and reported
    for p in 2..=10i128 {
        for (bn, bd) in [(0i128, 1i128), (1, 4), (1, 2), (3, 4), (1, 1)] {
            let b = Q::new(bn, bd);
            let den = Q::from(1) + Q::from(p - 1) * b;
            let lam: Vec<Q> = (1..=p).map(|j| if j == 1 { Q::from(1) / den } else { b / den }).collect();
            let direct = orness_q(&lam);
            let (pf, bf) = (p as f64, q_f64(b));
            let stated = (-pf * bf + pf + 2.0 * bf) / (2.0 * pf * bf - 2.0 * bf + 2.0);
            let lib = OwaFamily::MinAverage { beta_mix: bf }.closed_form_orness(p as usize).unwrap();
            if (lib - q_f64(direct)).abs() > 1e-12 {
                bad.push(format!("D p={p} beta_mix={b}: library closed form {lib} vs direct {direct}"));
            }
            if (stated - q_f64(direct)).abs() > 1e-9 && notes.is_empty() {
                notes.push(format!(
                    "D stated closed form disagrees with direct computation, e.g. p={p} beta_mix={b}: \
                     stated {stated:.6}, direct {:.6} = {direct}; they coincide only at beta_mix=1/2 or p=2",
                    q_f64(direct)
                ));
            }
        }
    }
    let mut detail = format!("p=2..10, W/C/K/G/H closed forms and exact sums; {} failures", bad.len());
    if let Some(b) = bad.first() {
        detail.push_str(&format!(" (first: {b})"));
    }
    for n in notes {
        detail.push_str(&format!("; flag: {n}"));
    }
    verdict(bad.is_empty(), detail)
}

fn baseline_identities() -> Verdict {
    let mut rows = Vec::new();
    for seed in [3u64, 17, 29] {
        let cfg = GridConfig::from_toml(&format!(
            "n_values = [8, 10]\np_values = [2, 3]\nR_values = [0.15, 0.25]\nseed = {seed}\n"
        ))
        .unwrap();
        let base = gen_instance(10, 2, seed).unwrap().instance;
        rows.extend(run_grid(&cfg, &base).unwrap().0);
    }
    let mut bad = Vec::new();
    let unit = |x: Option<f64>| x.is_none_or(|v| (0.0..=1.0).contains(&v));
    for r in &rows {
        if !r.error.is_empty() {
            bad.push(format!("{} {} {}: {}", r.instance, r.family, r.alpha, r.error));
            continue;
        }
        if r.family == "W" && r.alpha.is_zero() && r.pof != Some(0.0) {
            bad.push(format!("W0 row PoF {:?}", r.pof));
        }
        if r.family == "C" && r.poe != Some(0.0) {
            bad.push(format!("C row PoE {:?}", r.poe));
        }
        if !(unit(r.pof) && unit(r.poe) && unit(r.gini)) {
            bad.push(format!("metric outside [0,1]: {:?} {:?} {:?}", r.pof, r.poe, r.gini));
        }
    }
    verdict(
        bad.is_empty() && rows.len() == 3 * 16 * 21,
        format!(
            "{} grid rows over 3 instances; {} violations{}",
            rows.len(),
            bad.len(),
            bad.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn example_arithmetic() -> Verdict {
    fn envy_total(w: &[i64]) -> i64 {
        w.iter().flat_map(|a| w.iter().map(move |b| (b - a).max(0))).sum()
    }
    let mut bad = Vec::new();
    for (w, num, den) in [([1723i64, 2365, 2804], 2162i64, 41352i64), ([2126, 2162, 2278], 304, 39396)] {
        let total: i64 = w.iter().sum();
        if Ratio::new(envy_total(&w), 2 * 3 * total) != Ratio::new(num, den) {
            bad.push(format!("oracle disagrees with {num}/{den}"));
        }
        let wf: Vec<f64> = w.iter().map(|&x| x as f64).collect();
        let g = gini_index(&wf).unwrap();
        let target = num as f64 / den as f64;
        if (g - target).abs() > 1e-15 {
            bad.push(format!("gini {g} vs {num}/{den}"));
        }
    }
    let pof = fmclp_pof(62.58, 65.7);
    let expected = (65.7 - 62.58) / 65.7;
    if (pof - expected).abs() > 1e-6 {
        bad.push(format!("PoF {pof} vs {expected}"));
    }
    verdict(
        bad.is_empty(),
        format!(
            "Gini 2162/41352 and 304/39396, PoF {pof:.7} vs {expected:.7}{}",
            bad.first().map(|m| format!("; {m}")).unwrap_or_default()
        ),
    )
}

/// PoF through the public API: a solution whose coverage totals `total`.
fn fmclp_pof(total: f64, baseline: f64) -> f64 {
    let inst = Instance::new(
        "pof",
        vec![Point::xy(0.0, 0.0)],
        vec![total],
        fmclp::NormSpec::Euclidean,
    )
    .unwrap();
    let s = spec(&OwaFamily::Average, 1, "0");
    let sol = solve_discrete(&inst, &s, 1, 0.1, &SolveOptions::default()).unwrap();
    price_of_fairness(&sol, baseline).unwrap().unwrap()
}

/// `Z^b <= W^a` (alpha < 1) or `Z^b W^a >= 1` (alpha > 1), with `|1 - alpha| = a/b`.
fn scalar_holds(z: i128, w: i128, alpha: AlphaParam, scale: i128) -> bool {
    let (a, b, below) = alpha.one_minus();
    let zq = Q::new(z, scale);
    let wq = Q::new(w, scale);
    let pow = |x: Q, e: u64| (0..e).fold(Q::from(1), |acc, _| acc * x);
    if below {
        pow(zq, b) <= pow(wq, a)
    } else {
        pow(zq, b) * pow(wq, a) >= Q::from(1)
    }
}

fn cone_soundness() -> Verdict {
    let mut r = rng(6_000);
    let mut counter = Vec::new();
    let mut checked = 0;
    let mut holds = 0;
    for a in ["1/3", "1/2", "2/3", "2", "3"] {
        let alpha: AlphaParam = a.parse().unwrap();
        let sys = model::decompose_power("Z", "W", alpha).unwrap();
        for _ in 0..1000 {
            // grid (0, 10] with step 1/100
            let (zi, wi) = (r.gen_range(1..=1000i128), r.gen_range(1..=1000i128));
            let scalar = scalar_holds(zi, wi, alpha, 100);
            let x = sys.complete(zi as f64 / 100.0, wi as f64 / 100.0);
            let system = sys.is_satisfied(&x, 1e-12);
            checked += 1;
            holds += scalar as usize;
            if scalar != system {
                counter.push(format!("alpha {a}, Z={zi}/100, W={wi}/100: scalar {scalar}, system {system}"));
            }
        }
    }
    verdict(
        counter.is_empty(),
        format!(
            "{checked} grid points over 5 exponents ({holds} satisfying), {} counterexamples{}",
            counter.len(),
            counter.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn infeasible_by_oracle(inst: &Instance, set: &[usize], r: f64) -> bool {
    let pts: Vec<Point> = set.iter().map(|&i| inst.points[i].clone()).collect();
    one_center(&pts, inst.norm).unwrap().radius > r * (1.0 + COVER_TOL)
}

fn separation() -> Verdict {
    let mut bad = Vec::new();
    let (mut pool_total, mut added_total) = (0, 0);
    for seed in 0..50u64 {
        let mut r = rng(7_000 + seed);
        let n = r.gen_range(5..=10);
        let p = r.gen_range(1..=3);
        let radius = RADII[r.gen_range(0..RADII.len())];
        let inst = planar(&mut r, n, &format!("sep-{seed}"));
        let pool = incompatible_sets(&inst, radius, 3, Exec::Seq).unwrap();
        pool_total += pool.len();
        let mut minimal = Vec::new();
        let mut infeasible_triples = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if infeasible_by_oracle(&inst, &[i, j], radius) {
                    minimal.push(vec![i, j]);
                }
                for k in j + 1..n {
                    if infeasible_by_oracle(&inst, &[i, j, k], radius) {
                        infeasible_triples.push(vec![i, j, k]);
                    }
                }
            }
        }
        for t in &infeasible_triples {
            let has_pair = [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]]
                .iter()
                .any(|pr| minimal.iter().any(|m| m == pr));
            if !has_pair {
                minimal.push(t.clone());
            }
        }
        minimal.sort();
        for q in &pool {
            if !infeasible_by_oracle(&inst, q, radius) {
                bad.push(format!("seed {seed}: pool set {q:?} is feasible"));
            }
        }
        for t in &infeasible_triples {
            if !pool.iter().any(|q| q.iter().all(|i| t.contains(i))) {
                bad.push(format!("seed {seed}: infeasible triple {t:?} not cut"));
            }
        }
        if pool != minimal {
            bad.push(format!("seed {seed}: pool differs from the minimal infeasible sets"));
        }

        let s = spec(&OwaFamily::Average, p, "0");
        let opts = SolveOptions {
            warm_start: WarmStart::Empty,
            ..Default::default()
        };
        let out = row_generation(&inst, &s, p, radius, &opts).unwrap();
        added_total += out.added_cuts.len();
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for ev in &out.added_cuts {
            if !ev.violated || !infeasible_by_oracle(&inst, &ev.set, radius) {
                bad.push(format!("seed {seed}: cut {:?} not violated by an infeasible cluster", ev.set));
            }
            if seen.iter().any(|c| c.iter().all(|i| ev.set.contains(i))) {
                bad.push(format!("seed {seed}: incumbent of round {} broke an earlier cut", ev.round));
            }
            seen.push(ev.set.clone());
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "50 instances, {pool_total} pool sets vs exhaustive one-center enumeration, \
             {added_total} separation cuts checked; {} failures{}",
            bad.len(),
            bad.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn trends() -> (Verdict, String) {
    let opts = SolveOptions::default();
    let instances = 60;
    let (mut gini_c, mut gini_w, mut pof_c, mut pof_w) = (0.0, 0.0, 0.0, 0.0);
    let mut poe_monotone = 0;
    let mut gini_order = 0;
    let mut counted = 0;
    for seed in 0..instances {
        let mut r = rng(8_000 + seed);
        let n = 12;
        let p = r.gen_range(2..=3);
        let inst = planar(&mut r, n, &format!("trend-{seed}"));
        let radius = 0.2;
        let sol = |f: &OwaFamily, a: &str| solve_discrete(&inst, &spec(f, p, a), p, radius, &opts).unwrap();
        let w0 = sol(&OwaFamily::Average, "0");
        let c0 = sol(&OwaFamily::Minimum, "0");
        let sum_base = w0.total_coverage();
        let min_base = c0.min_coverage();
        let (Some(gc), Some(gw)) = (gini_index(&c0.coverage), gini_index(&w0.coverage)) else {
            continue;
        };
        counted += 1;
        gini_c += gc;
        gini_w += gw;
        gini_order += (gc <= gw + 1e-12) as usize;
        pof_c += price_of_fairness(&c0, sum_base).unwrap().unwrap();
        pof_w += price_of_fairness(&w0, sum_base).unwrap().unwrap();
        let poe: Vec<f64> = ["0", "1/2", "2"]
            .iter()
            .map(|a| {
                let s = sol(&OwaFamily::Average, a);
                price_of_efficiency(&s, min_base).unwrap().unwrap_or(0.0)
            })
            .collect();
        if poe.windows(2).all(|w| w[1] <= w[0] + 1e-12) {
            poe_monotone += 1;
        }
    }
    let c = counted as f64;
    let (gini_c, gini_w, pof_c, pof_w) = (gini_c / c, gini_w / c, pof_c / c, pof_w / c);
    let share = poe_monotone as f64 / c;
    let pass = counted >= 50 && gini_c <= gini_w && pof_c >= pof_w && share >= 0.8;
    let v = verdict(
        pass,
        format!(
            "{counted} instances: mean Gini C {gini_c:.4} <= W0 {gini_w:.4}; mean PoF C {pof_c:.4} >= W0 {pof_w:.4}; \
             PoE(W) non-increasing in alpha on {:.1}%",
            100.0 * share
        ),
    );
    let info = format!(
        "Gini(C0) <= Gini(W0) on {gini_order}/{counted} instances ({:.1}%)",
        100.0 * gini_order as f64 / c
    );
    (v, info)
}

fn model_export() -> Verdict {
    let mut bad = Vec::new();
    let mut built = 0;
    let mopts = ModelOptions::default();
    let mut check = |m: ModelIR, label: String| {
        built += 1;
        match m.to_json().and_then(|j| ModelIR::from_json(&j)) {
            Ok(back) if back == m => {}
            Ok(_) => bad.push(format!("{label}: round trip changed the model")),
            Err(e) => bad.push(format!("{label}: {e}")),
        }
    };
    for seed in 0..10u64 {
        let mut r = rng(9_000 + seed);
        let inst = discrete(&mut r, 6, 4, &format!("rt-{seed}"));
        let p = 2;
        for fam in OwaFamily::standard() {
            for a in common::ALPHAS {
                let s = spec(&fam, p, a);
                let label = format!("seed {seed} {} {a}", fam.letter());
                check(model::build_discrete(&inst, &s, p, 0.3, &mopts).unwrap(), format!("{label} disc"));
                check(model::build_continuous(&inst, &s, p, 0.3, &mopts).unwrap(), format!("{label} bigm"));
                check(
                    model::build_continuous_cut_model(&inst, &s, p, 0.3, None, &mopts).unwrap(),
                    format!("{label} cuts"),
                );
            }
        }
    }
    let mut compared = 0;
    for seed in 0..30u64 {
        let mut r = rng(9_500 + seed);
        let n = r.gen_range(2..=4);
        let m = r.gen_range(2..=3);
        let p = r.gen_range(1..=2.min(m));
        let radius = RADII[r.gen_range(0..RADII.len())];
        let inst = discrete(&mut r, n, m, &format!("ir-{seed}"));
        for fam in OwaFamily::standard() {
            let s = spec(&fam, p, "0");
            let ir = model::build_discrete(&inst, &s, p, radius, &mopts).unwrap();
            let ir_best = model::brute_force_ir(&ir, 20).unwrap();
            let sol = solve_discrete(&inst, &s, p, radius, &SolveOptions::default()).unwrap();
            compared += 1;
            match (ir_best, sol.objective.finite()) {
                (Some(a), Some(b)) if (a - b).abs() <= 1e-9 * a.abs().max(1.0) => {}
                other => bad.push(format!("seed {seed} {}: IR vs solver {other:?}", fam.letter())),
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{built} models round-tripped; {compared} alpha=0 IR optima vs solver; {} failures{}",
            bad.len(),
            bad.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let t = Instant::now();
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    });
    println!(
        "[{}] {name}: {} ({:.1}s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        t.elapsed().as_secs_f64()
    );
    v.pass
}

fn main() -> ExitCode {
    let mut info = String::new();
    let results = [
        run("1 oracle equivalence", oracle_equivalence),
        run("2 continuous method equivalence", continuous_equivalence),
        run("3 OWA closed forms", owa_closed_forms),
        run("4 baseline identities", baseline_identities),
        run("5 metric arithmetic", example_arithmetic),
        run("6 cone decomposition soundness", cone_soundness),
        run("7 separation machinery", separation),
        run("8 qualitative trends", || {
            let (v, i) = trends();
            info = i;
            v
        }),
        run("9 model export", model_export),
    ];
    if !info.is_empty() {
        println!("[INFO] {info}");
    }
    let passed = results.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
