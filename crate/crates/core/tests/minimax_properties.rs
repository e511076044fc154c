use dispbound::convexity::region_d_report;
use dispbound::dispfun::{FunctionFamily, SimplexPoint};
use dispbound::minimax::{closed_form_alpha, closed_form_alpha_exact, minimize, verify_uniform_optimum, Objective, SolverConfig};
use dispbound::symmetry::{k2_reference_permutations, relabeling_permutations, symmetry_check};
use dispbound::freegroup::enumerate_sphere;
use dispbound::rng::stream_rng;
use rand::Rng;

fn quick() -> SolverConfig {
    SolverConfig {
        restarts: 3,
        ..SolverConfig::default()
    }
}

#[test]
fn closed_form_matches_rank_two_expression() {
    for k in 2..=8 {
        assert_eq!(closed_form_alpha_exact(2, k), 12 * 3u128.pow(k as u32 - 1) - 3);
    }
    assert_eq!(closed_form_alpha_exact(3, 2), 145);
}

#[test]
fn solver_stays_in_bracket_and_ties_everything() {
    for k in 2..=3 {
        let fam = FunctionFamily::for_rank_radius(2, k).unwrap();
        let r = minimize(&fam, Objective::F, &quick()).unwrap();
        assert!(r.alpha_star >= 1.0 && r.alpha_star <= closed_form_alpha(2, k) * (1.0 + 1e-9));
        let values = fam.f_values(&r.x_star);
        let (lo, hi) = values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi - lo) / hi < 1e-5, "k={k}: spread {}", (hi - lo) / hi);
        assert!(r.kkt.satisfied);
        for run in &r.per_restart {
            for w in run.stages.windows(2) {
                assert!(w[1].best_so_far <= w[0].best_so_far);
            }
        }
    }
}

#[test]
fn g_equals_f_at_the_solution() {
    let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
    let r = minimize(&fam, Objective::G, &quick()).unwrap();
    let f = fam.eval_f_max(&r.x_star).value;
    let g = fam.eval_g_max(&r.x_star).value;
    assert!((f - g).abs() <= 1e-9 * g);
    assert!((r.alpha_star - 33.0).abs() <= 1e-6 * 33.0);
}

#[test]
fn minimizer_is_inside_every_region() {
    for k in 2..=3 {
        let fam = FunctionFamily::for_rank_radius(2, k).unwrap();
        let r = minimize(&fam, Objective::F, &quick()).unwrap();
        let rep = region_d_report(&fam, &r.x_star);
        assert!(rep.all_inside(), "k={k}: {rep:?}");
    }
}

#[test]
fn uniform_report_passes() {
    for k in 2..=4 {
        let rep = verify_uniform_optimum(&FunctionFamily::for_rank_radius(2, k).unwrap());
        assert!(rep.passed(), "k={k}: {rep:?}");
    }
}

#[test]
fn symmetries_leave_the_objective_invariant() {
    let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
    let ix = enumerate_sphere(2, 2).unwrap();
    let mut perms = k2_reference_permutations();
    perms.extend(relabeling_permutations(&ix));
    let mut rng = stream_rng(31, 0);
    for _ in 0..50 {
        let raw: Vec<f64> = (0..12).map(|_| rng.gen_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let x = SimplexPoint::new(raw.iter().map(|v| v / s).collect()).unwrap();
        let rep = symmetry_check(&fam, &x, &perms).unwrap();
        assert!(rep.invariant(1e-12), "{rep:?}");
    }
}

#[test]
fn runs_are_reproducible() {
    let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
    let a = serde_json::to_string(&minimize(&fam, Objective::F, &quick()).unwrap()).unwrap();
    let b = serde_json::to_string(&minimize(&fam, Objective::F, &quick()).unwrap()).unwrap();
    assert_eq!(a, b);
}
