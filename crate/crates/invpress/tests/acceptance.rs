//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use invpress::verify::{run_verify_example, spiral, VerifyOptions, DEFAULT_U0};
use invpress_core::controlset::{estimate_control_set, ControlSetOptions};
use invpress_core::model::{
    CompactSet, ControlRange, GeneralSystem, LinearSystem, Potential, QuantizedControl, System,
};
use invpress_core::pressure::{
    build_candidates, coverage_for_points, estimate_pressure, greedy_cover, min_weight_cover,
    CoverMethod, CoverageMatrix, CoverageOptions, PressureOptions,
};
use invpress_core::simulate::{
    divergence_integral, floquet_exponents, integrate_trajectory, integrate_variational,
    FloquetOptions,
};
use invpress_core::spectral::{formula_pressure, FormulaOptions};
use invpress_core::PNorm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn scalar() -> LinearSystem {
    LinearSystem::from_rows(
        1,
        1,
        &[1.0],
        &[1.0],
        ControlRange::interval(-1.0, 1.0).unwrap(),
    )
    .unwrap()
}

fn formula_on_spiral() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for &u0 in &DEFAULT_U0 {
        let lin = spiral(u0).unwrap();
        let f = Potential::NormDist {
            u_ref: vec![u0],
            norm: PNorm::Two,
        };
        let start = Instant::now();
        let v = formula_pressure(&lin, &f, FormulaOptions::default())
            .unwrap()
            .value;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max((v - 2.0).abs());
    }
    outcome(
        worst <= 1e-12 && slowest < 1.0,
        format!(
            "max |formula - 2| = {worst:.2e}, slowest {slowest:.2e} s over u0 in {DEFAULT_U0:?}"
        ),
    )
}

fn sandwich() -> Outcome {
    let opts = VerifyOptions::default();
    let mut passed = true;
    let mut parts = Vec::new();
    for &u0 in &DEFAULT_U0 {
        match run_verify_example(u0, &opts) {
            Ok(case) => {
                let failed: Vec<String> = case
                    .checks
                    .iter()
                    .filter(|c| c.criterion == 2 && !c.passed)
                    .map(|c| format!("{} = {} not in {}", c.name, c.value, c.expected))
                    .collect();
                passed &= failed.is_empty();
                parts.push(format!(
                    "u0={u0}: lower {:.4}, upper {:.4}, slope {}, pairs {}, {:.1} s{}",
                    case.lower_bound.value,
                    case.upper_bound.value,
                    case.estimate.as_ref().map_or_else(
                        || format!(
                            "unavailable ({})",
                            case.estimate_error.as_deref().unwrap_or("")
                        ),
                        |r| format!("{:.4}", r.slope)
                    ),
                    case.lower_bound.surviving_pairs,
                    case.seconds.sandwich(),
                    if failed.is_empty() {
                        String::new()
                    } else {
                        format!(" [{}]", failed.join("; "))
                    }
                ));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("u0={u0}: {e}"));
            }
        }
    }
    outcome(passed, parts.join(" | "))
}

fn scalar_benchmark() -> Outcome {
    let lin = scalar();
    let formula = formula_pressure(&lin, &Potential::zero(), FormulaOptions::default())
        .unwrap()
        .value;
    let sys: System = lin.into();
    let k = CompactSet::boxed(vec![-0.8], vec![0.8]).unwrap();
    let q = CompactSet::boxed(vec![-1.0], vec![1.0]).unwrap();
    let opts = PressureOptions {
        delta: 0.5,
        tau0: 0.5,
        levels: 3,
        n_max: 8,
        pitch: 0.001,
        lower_tau: 4.0,
        ..Default::default()
    };
    match estimate_pressure(&sys, &k, &q, &Potential::zero(), &opts) {
        Ok(r) => outcome(
            formula == 1.0 && (0.9..=1.7).contains(&r.slope),
            format!(
                "formula {formula}, slope {:.4} (pitch 0.001, delta = tau0 = 0.5, n_max 8)",
                r.slope
            ),
        ),
        Err(e) => outcome(false, format!("formula {formula}, estimate failed: {e}")),
    }
}

/// Random covering instance: every point has at least one coverer.
fn random_instance(
    rng: &mut ChaCha8Rng,
    max_c: usize,
    max_p: usize,
) -> (usize, Vec<Vec<usize>>, Vec<f64>) {
    let c = rng.random_range(1..=max_c);
    let p = rng.random_range(1..=max_p);
    let mut sets: Vec<Vec<usize>> = (0..c)
        .map(|_| (0..p).filter(|_| rng.random_bool(0.4)).collect())
        .collect();
    for j in 0..p {
        if !sets.iter().any(|s| s.contains(&j)) {
            let o = rng.random_range(0..c);
            sets[o].push(j);
            sets[o].sort();
        }
    }
    let weights = (0..c).map(|_| rng.random_range(0.05..5.0)).collect();
    (p, sets, weights)
}

fn exhaustive(points: usize, sets: &[Vec<usize>], weights: &[f64]) -> f64 {
    let n = sets.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let mut hit = vec![false; points];
        let mut total = 0.0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            total += weights[i];
            for &j in &sets[i] {
                hit[j] = true;
            }
        }
        if hit.iter().all(|h| *h) && total < best {
            best = total;
        }
    }
    best
}

fn exact_cover_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut mismatch, mut greedy_below) = (0, 0);
    for _ in 0..200 {
        let (p, sets, weights) = random_instance(&mut rng, 6, 8);
        let m = CoverageMatrix::from_weights(p, &sets, weights.clone(), 1.0).unwrap();
        let exact = min_weight_cover(&m, 20).unwrap();
        let oracle = exhaustive(p, &sets, &weights);
        if exact.method != CoverMethod::Exact || exact.total != oracle {
            mismatch += 1;
        }
        if greedy_cover(&m).total < exact.total {
            greedy_below += 1;
        }
    }
    outcome(
        mismatch == 0 && greedy_below == 0,
        format!("200 instances: {mismatch} exact/exhaustive mismatches, {greedy_below} greedy below exact"),
    )
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, r: f64) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random_range(-r..r)).collect()
}

fn random_affine(rng: &mut ChaCha8Rng) -> Potential {
    Potential::Affine {
        w: vec![rng.random_range(-1.0..1.0)],
        b: rng.random_range(-1.0..1.0),
    }
}

const COVERAGE: CoverageOptions = CoverageOptions {
    tau: 1.0,
    dt: 0.01,
    stride: 1,
};

fn shift_identity() -> Outcome {
    let sys: System = scalar().into();
    let q = CompactSet::cube(1, 1.0);
    let cands = build_candidates(sys.range(), 3, 1.0, 0.5, 10_000, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut index_changes, mut done) = (0.0f64, 0, 0);
    while done < 50 {
        let n = rng.random_range(1..=10);
        let pts = random_points(&mut rng, n, 1, 0.6);
        let f = random_affine(&mut rng);
        let base = coverage_for_points(&sys, &pts, &q, &f, &cands, COVERAGE).unwrap();
        if !base.uncovered().is_empty() {
            continue;
        }
        done += 1;
        let exact = min_weight_cover(&base, 20).unwrap();
        let greedy = greedy_cover(&base);
        for c in [-1.0, 0.3, 2.0] {
            let m = coverage_for_points(&sys, &pts, &q, &f.shifted(c), &cands, COVERAGE).unwrap();
            let scale = (c * COVERAGE.tau).exp();
            let e = min_weight_cover(&m, 20).unwrap();
            let g = greedy_cover(&m);
            worst = worst.max(((e.total - scale * exact.total) / (scale * exact.total)).abs());
            worst = worst.max(((g.total - scale * greedy.total) / (scale * greedy.total)).abs());
            if e.chosen != exact.chosen || g.chosen != greedy.chosen {
                index_changes += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && index_changes == 0,
        format!("50 instances x c in {{-1, 0.3, 2}}: max relative error {worst:.2e}, {index_changes} changed covers"),
    )
}

fn liouville() -> Outcome {
    let r = ControlRange::interval(-1.0, 1.0).unwrap();
    let systems: [(&str, System); 2] = [
        ("spiral", spiral(0.0).unwrap().into()),
        (
            "vanderpol",
            GeneralSystem::builtin("vanderpol", r).unwrap().into(),
        ),
    ];
    let w = QuantizedControl::unchecked(0.5, 1, vec![1.0, -0.5, 0.25, -1.0, 0.0, 0.75]).unwrap();
    let x0 = [0.1, -0.2];
    let mut worst = 0.0f64;
    for (_, sys) in &systems {
        for tau in [0.5, 1.0, 3.0] {
            let fm = integrate_variational(sys, &x0, &w, tau, 1e-3).unwrap();
            let tr = integrate_trajectory(sys, &x0, &w, tau, 1e-3).unwrap();
            worst = worst.max((fm.log_det() - divergence_integral(sys, &tr)).abs());
        }
    }
    outcome(
        worst <= 1e-5,
        format!("max |log det - divergence integral| = {worst:.2e} on spiral and vanderpol"),
    )
}

fn floquet_at_equilibrium() -> Outcome {
    let sys: System = spiral(0.0).unwrap().into();
    let w = QuantizedControl::constant(1.0, 1, &[0.0]).unwrap();
    match floquet_exponents(&sys, &[0.0, 0.0], &w, 1.0, FloquetOptions::default()) {
        Ok(s) => {
            let ok = s.exponents.len() == 1
                && (s.exponents[0].rho - 1.0).abs() <= 1e-6
                && s.exponents[0].multiplicity == 2;
            let list: Vec<String> = s
                .exponents
                .iter()
                .map(|e| format!("({}, {})", e.rho, e.multiplicity))
                .collect();
            outcome(ok, format!("spectrum {{{}}}", list.join(", ")))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn control_set_geometry() -> Outcome {
    let opts = ControlSetOptions {
        samples: 2000,
        horizon: 8.0,
        dt: 0.01,
        seed: 0,
    };
    let a = estimate_control_set(&scalar(), opts).unwrap();
    let (lo, hi) = a.hull.bounding_box();
    let ends_ok = (lo[0] + 1.0).abs() <= 0.05 && (hi[0] - 1.0).abs() <= 0.05;
    let s = estimate_control_set(&spiral(0.0).unwrap(), opts).unwrap();
    let radius = s
        .hull
        .vertices()
        .map(|v| PNorm::Two.of(v))
        .fold(0.0, f64::max);
    // every point of D is -∫ e^{-As} B u(s) ds with |e^{-As}| = e^{-s}
    let bounded = radius.is_finite() && radius <= 1.0;
    let interior = s.interior_margin > 0.0;
    outcome(
        ends_ok && bounded && interior,
        format!(
            "1-D hull [{:.4}, {:.4}]; spiral hull radius {radius:.4}, margin of 0 {:.4}",
            lo[0], hi[0], s.interior_margin
        ),
    )
}

fn monotonicity() -> Outcome {
    let spiral_sys: System = spiral(0.0).unwrap().into();
    let scalar_sys: System = scalar().into();
    let q2 = CompactSet::cube(2, 1.0);
    let q1 = CompactSet::cube(1, 1.0);
    let pool = build_candidates(scalar_sys.range(), 5, 1.0, 0.5, 10_000, 0).unwrap();
    let coarse = build_candidates(scalar_sys.range(), 3, 1.0, 0.5, 10_000, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zero = Potential::zero();

    let mut inflation = 0;
    for _ in 0..100 {
        let pts = random_points(&mut rng, 4, 2, 0.6);
        let eps = rng.random_range(0.0..0.5);
        let extra = rng.random_range(0.0..0.5);
        let small = coverage_for_points(
            &spiral_sys,
            &pts,
            &q2.inflate(eps, PNorm::Two).unwrap(),
            &zero,
            &coarse,
            COVERAGE,
        )
        .unwrap();
        let large = coverage_for_points(
            &spiral_sys,
            &pts,
            &q2.inflate(eps + extra, PNorm::Two).unwrap(),
            &zero,
            &coarse,
            COVERAGE,
        )
        .unwrap();
        inflation += (0..coarse.len())
            .filter(|&i| !small.covers[i].is_subset(&large.covers[i]))
            .count();
    }

    let mut ordering = 0;
    let mut cases = 0;
    while cases < 100 {
        let n = rng.random_range(1..=6);
        let pts = random_points(&mut rng, n, 1, 0.6);
        let g = random_affine(&mut rng);
        let Potential::Affine { w, b } = &g else {
            unreachable!()
        };
        // f ≤ g on U = [-1, 1]
        let f = Potential::Constant(b - w[0].abs() - rng.random_range(0.0..0.5));
        let mf = coverage_for_points(&scalar_sys, &pts, &q1, &f, &coarse, COVERAGE).unwrap();
        if !mf.uncovered().is_empty() {
            continue;
        }
        cases += 1;
        let mg = coverage_for_points(&scalar_sys, &pts, &q1, &g, &coarse, COVERAGE).unwrap();
        if min_weight_cover(&mf, 64).unwrap().total > min_weight_cover(&mg, 64).unwrap().total {
            ordering += 1;
        }
    }

    let mut refinement = 0;
    let mut cases = 0;
    while cases < 100 {
        let n = rng.random_range(1..=5);
        let pts = random_points(&mut rng, n, 1, 0.5);
        let extra = rng.random_range(1..=3);
        let more = random_points(&mut rng, extra, 1, 0.5);
        let f = random_affine(&mut rng);
        let base = coverage_for_points(&scalar_sys, &pts, &q1, &f, &coarse, COVERAGE).unwrap();
        let mut all = pts.clone();
        all.extend(&more);
        let with_points =
            coverage_for_points(&scalar_sys, &all, &q1, &f, &coarse, COVERAGE).unwrap();
        if !with_points.uncovered().is_empty() {
            continue;
        }
        cases += 1;
        let with_cands = coverage_for_points(&scalar_sys, &pts, &q1, &f, &pool, COVERAGE).unwrap();
        let a = min_weight_cover(&base, 64).unwrap().total;
        if min_weight_cover(&with_cands, 64).unwrap().total > a {
            refinement += 1;
        }
        if min_weight_cover(&with_points, 64).unwrap().total < a {
            refinement += 1;
        }
    }
    outcome(
        inflation + ordering + refinement == 0,
        format!(
            "100 instances each: {inflation} inflation, {ordering} f-ordering, {refinement} refinement violations"
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "formula on the spiral", formula_on_spiral),
        (2, "sandwich on the spiral", sandwich),
        (3, "1-D benchmark", scalar_benchmark),
        (4, "exact cover oracle", exact_cover_oracle),
        (5, "shift identity", shift_identity),
        (6, "Liouville", liouville),
        (7, "Floquet at equilibrium", floquet_at_equilibrium),
        (8, "control set geometry", control_set_geometry),
        (9, "monotonicity suite", monotonicity),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.passed);
        println!(
            "{} criterion {n} ({name}): {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
