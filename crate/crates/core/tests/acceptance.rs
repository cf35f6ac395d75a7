//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ppclf_core::clf::{self, input_affine_lg, pi_fn, psi, ClfId, Pairing};
use ppclf_core::controllers::{control, negativity_predicate, ControllerSpec, Epsilon};
use ppclf_core::dynamics::{vector_field, ModelId, PopulationState};
use ppclf_core::oracle::{integrate, psi_integral};
use ppclf_core::simulator::{
    clf_monotonicity, integrate_dense, invariant_drift, log_uniform_initial_conditions,
    orbit_recurrence, target_equivalence, IntegratorConfig,
};
use ppclf_core::verifier::{
    classify_point, classify_regions, closed_form_error, cross_term_residue, decomposition_error,
    gradient_fd_error, nonstrict_witness, scan_positive_definite_with, scan_vdot_negative_with,
    DomainGrid, FD_STEP, TEST_INPUTS,
};

const EQ_TOL: f64 = 1e-12;
const EXCLUSION: f64 = 1e-3;
const CLOSED_FORM_TOL: f64 = 1e-10;
const GRADIENT_TOL: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-8;
const RESIDUE_TOL: f64 = 1e-10;
const DECOMP_TOL: f64 = 1e-10;
const DRIFT_TOL: f64 = 1e-7;
const RECURRENCE_TOL: f64 = 1e-4;
const CONVERGENCE_TOL: f64 = 1e-6;
const MONOTONE_SLACK: f64 = 1e-9;
const GAP_TOL: f64 = 1e-6;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn st(x: f64, y: f64) -> PopulationState {
    PopulationState::new(x, y).unwrap()
}

fn eps(e: f64) -> Epsilon {
    Epsilon::new(e).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn all_pairings() -> Vec<Pairing> {
    Pairing::all(eps(0.5))
}

fn standard_grid() -> DomainGrid {
    DomainGrid::new(3.0, 200).unwrap()
}

fn c01_equilibrium_identities() -> Outcome {
    let one = PopulationState::EQUILIBRIUM;
    let mut worst = 0.0_f64;
    for e in [0.1, 0.5, 0.9] {
        for id in ClfId::catalog(eps(e)) {
            let (gx, gy) = clf::gradient(id, one);
            worst = worst
                .max(clf::value(id, one).abs())
                .max(gx.abs())
                .max(gy.abs());
        }
    }
    let ctrls = [
        ControllerSpec::OPEN_LOOP,
        ControllerSpec::PredatorLinear,
        ControllerSpec::MixedLinear(eps(0.5)),
        ControllerSpec::ForwardingFeedback,
        ControllerSpec::BacksteppingConventional,
        ControllerSpec::BacksteppingPositive,
    ];
    for c in ctrls {
        worst = worst.max((control(c, one) - 1.0).abs());
    }
    for m in ModelId::ALL {
        let f = vector_field(m, one, 1.0).unwrap();
        worst = worst.max(f.d_prey.abs()).max(f.d_predator.abs());
    }
    check(
        worst < EQ_TOL,
        format!("max |residual| = {worst:.2e} (tol {EQ_TOL:.0e})"),
    )
}

fn c02_strict_candidates_certified() -> Outcome {
    let grid = standard_grid();
    let mut notes = Vec::new();
    let mut ok = true;
    for p in all_pairings().into_iter().filter(|p| p.clf().is_strict()) {
        // both backstepping laws share one candidate; certify the positive one
        if p.controller() == ControllerSpec::BacksteppingConventional {
            continue;
        }
        let pd = scan_positive_definite_with(p.clf(), &grid, EXCLUSION);
        let nd =
            scan_vdot_negative_with(p.clf(), p.model(), p.controller(), &grid, EXCLUSION).unwrap();
        ok &= pd.passed() && nd.passed();
        notes.push(format!(
            "{}: pd={:+.1e} vdot={:+.1e}",
            p.clf(),
            pd.margin,
            nd.margin
        ));
    }
    for p in all_pairings().into_iter().filter(|p| !p.clf().is_strict()) {
        let nd =
            scan_vdot_negative_with(p.clf(), p.model(), p.controller(), &grid, EXCLUSION).unwrap();
        let on_line = nd.worst_point[1] == 1.0;
        let witness = nonstrict_witness(p.clf(), p.model(), p.controller()).unwrap();
        ok &= !nd.passed() && on_line && witness.predator() == 1.0;
        notes.push(format!(
            "{} fails at ({:.3}, {})",
            p.clf(),
            nd.worst_point[0],
            nd.worst_point[1]
        ));
    }
    check(ok, notes.join("; "))
}

fn c03_closed_form_fidelity() -> Outcome {
    let pts = DomainGrid::new(3.0, 100).unwrap().points();
    let mut cf = 0.0_f64;
    for p in all_pairings() {
        for &s in &pts {
            cf = cf.max(closed_form_error(p, s));
        }
    }
    let mut grad = 0.0_f64;
    for e in [0.1, 0.5, 0.9] {
        for id in ClfId::catalog(eps(e)) {
            for &s in &pts {
                grad = grad.max(gradient_fd_error(id, s, FD_STEP));
            }
        }
    }
    check(
        cf < CLOSED_FORM_TOL && grad < GRADIENT_TOL,
        format!(
            "{} pairings x {} points: closed form rel {cf:.2e} (tol {CLOSED_FORM_TOL:.0e}); gradient rel {grad:.2e} (tol {GRADIENT_TOL:.0e})",
            all_pairings().len(),
            pts.len()
        ),
    )
}

fn abscissae() -> Vec<f64> {
    (0..50)
        .map(|k| (-3.0 + 6.0 * k as f64 / 49.0).exp())
        .collect()
}

fn c04a_psi_matches_integral() -> Outcome {
    let worst = abscissae()
        .into_iter()
        .map(|s| (psi(s).unwrap() - psi_integral(s)).abs())
        .fold(0.0, f64::max);
    check(
        worst < QUAD_TOL,
        format!("max |closed - integral| = {worst:.2e} over 50 abscissae"),
    )
}

/// Integral form of `Pi` with kernel `(1 - t) / (1 + t (X - 1))^((1 + 2 eps) / (1 + eps))`.
fn kernel_pi_integral(x: f64, e: Epsilon) -> f64 {
    let p = (1.0 + 2.0 * e.value()) / (1.0 + e.value());
    let d = x - 1.0;
    d * d
        * integrate(
            |t| (1.0 - t) / (1.0 + t * d).powf(p),
            0.0,
            1.0,
            1e-15,
            1e-13,
        )
}

fn c04b_pi_closed_form_matches_integral_form() -> Outcome {
    let mut worst = (0.0_f64, 0.0, 0.0);
    for e in [0.1, 0.5, 0.9] {
        for x in abscissae() {
            let gap = (pi_fn(x, eps(e)).unwrap() - kernel_pi_integral(x, eps(e))).abs();
            if gap > worst.0 {
                worst = (gap, x, e);
            }
        }
    }
    check(
        worst.0 < QUAD_TOL,
        format!(
            "max |closed - integral| = {:.2e} at X={:.3}, eps={}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn c04c_cross_term_cancellation() -> Outcome {
    let pts = standard_grid().points();
    let mut worst = 0.0_f64;
    for e in [0.1, 0.5, 0.9] {
        for &s in &pts {
            worst = worst.max(cross_term_residue(eps(e), s));
        }
    }
    check(
        worst < RESIDUE_TOL,
        format!("max residue = {worst:.2e} (tol {RESIDUE_TOL:.0e})"),
    )
}

fn c05_decompositions() -> Outcome {
    let grid = standard_grid();
    let pts = grid.points();
    let mut dec = 0.0_f64;
    for id in [ClfId::VForwarding, ClfId::VBackstepping] {
        for &s in &pts {
            dec = dec.max(decomposition_error(id, s));
        }
    }
    let mut violations = 0usize;
    for s in grid.points_with_crosshair() {
        let lg = input_affine_lg(ClfId::VBackstepping, s).unwrap();
        if lg.gain > 0.0 && lg.drift >= 0.0 {
            violations += 1;
        }
    }
    let map = classify_regions(
        &grid,
        ControllerSpec::ForwardingFeedback,
        ClfId::VForwarding,
    )
    .unwrap();
    let probe = classify_point(
        ControllerSpec::ForwardingFeedback,
        ClfId::VForwarding,
        st(0.5, 0.1),
    )
    .unwrap();
    check(
        dec < DECOMP_TOL && violations == 0 && map.count_clf_failure() > 0 && probe.clf_failure,
        format!(
            "L+GU rel {dec:.2e} for U in {TEST_INPUTS:?}; backstepping G>0 & L>=0 at {violations} points; forwarding failure set {} points, (0.5,0.1) inside: {}",
            map.count_clf_failure(),
            probe.clf_failure
        ),
    )
}

fn c06_region_geometry() -> Outcome {
    let grid = DomainGrid::new(3.0, 1000).unwrap();
    let pts = grid.points();
    let (mut mismatch, mut checked, mut nonpositive) = (0usize, 0usize, 0usize);
    for &s in &pts {
        let u = control(ControllerSpec::ForwardingFeedback, s);
        if u.abs() > 1e-12 {
            checked += 1;
            if (u < 0.0) != negativity_predicate(ControllerSpec::ForwardingFeedback, s).negative {
                mismatch += 1;
            }
        }
        if control(ControllerSpec::BacksteppingPositive, s) <= 0.0 {
            nonpositive += 1;
        }
    }
    check(
        mismatch == 0 && nonpositive == 0,
        format!(
            "forwarding sign mismatches {mismatch}/{checked}; backstepping-positive U<=0 at {nonpositive}/{} points",
            pts.len()
        ),
    )
}

fn c07_conservation() -> Outcome {
    let cfg = IntegratorConfig {
        samples: 10_001,
        ..IntegratorConfig::with_tolerance(100.0, 1e-10)
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for s0 in [st(2.0, 1.0), st(0.5, 3.0)] {
        let dense = integrate_dense(
            ModelId::PredatorOnlyHarvest,
            ControllerSpec::OPEN_LOOP,
            s0,
            &cfg,
        )
        .unwrap();
        let drift = invariant_drift(&dense.sample(&cfg));
        let (t, d) = orbit_recurrence(&dense).unwrap_or((f64::NAN, f64::INFINITY));
        ok &= drift < DRIFT_TOL && d < RECURRENCE_TOL;
        notes.push(format!(
            "{s0}: drift {drift:.2e}, return {d:.2e} at t={t:.4}"
        ));
    }
    check(ok, notes.join("; "))
}

fn c08_stabilization() -> Outcome {
    let cfg = IntegratorConfig {
        samples: 4001,
        abs_tol: 1e-12,
        ..IntegratorConfig::with_tolerance(200.0, 1e-10)
    };
    let starts = log_uniform_initial_conditions(2024, 20, 2.0);
    let mut notes = Vec::new();
    let mut ok = true;
    for p in all_pairings() {
        let mut far = 0.0_f64;
        let mut rise = f64::NEG_INFINITY;
        for &s0 in &starts {
            let tr = integrate_dense(p.model(), p.controller(), s0, &cfg)
                .unwrap()
                .sample(&cfg);
            far = far.max(tr.final_state().max_distance_to_equilibrium());
            let mono = clf_monotonicity(&tr, p.clf()).unwrap();
            rise = rise.max(mono.margin);
        }
        ok &= far < CONVERGENCE_TOL && rise <= MONOTONE_SLACK;
        notes.push(format!("{p}: dist {far:.1e}, rise {rise:+.1e}"));
    }
    check(ok, notes.join("; "))
}

fn c09_target_equivalence() -> Outcome {
    let cfg = IntegratorConfig {
        samples: 2001,
        abs_tol: 1e-13,
        ..IntegratorConfig::with_tolerance(20.0, 1e-11)
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for s0 in [st(0.1, 8.0), st(2.0, 1.0), st(5.0, 0.2)] {
        let r = target_equivalence(s0, &cfg).unwrap();
        ok &= r.passed() && r.margin < GAP_TOL;
        notes.push(format!("{s0}: gap {:.2e}", r.margin));
    }
    check(ok, notes.join("; "))
}

fn c10_figure_regeneration() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path| {
        ppclf_core::cli::run(["ppclf", "figures", "--out", dir.to_str().unwrap()])
    };
    let codes = (run(a.path()), run(b.path()));
    let ma = std::fs::read(a.path().join("manifest.json")).unwrap();
    let mb = std::fs::read(b.path().join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&ma).unwrap();
    let files = manifest["outputs"].as_array().map_or(0, |v| v.len());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("V-both/meta.json")).unwrap())
            .unwrap();
    let levels: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(a.path().join("V-both-levels/meta.json")).unwrap(),
    )
    .unwrap();
    let eps_ok = meta["eps"] == 0.5 && levels["clf"] == "V_BOTH_STRICT(eps=0.9)";
    let figs = manifest["config"]["figures"]
        .as_array()
        .map_or(0, |v| v.len());
    check(
        codes == (0, 0) && ma == mb && files > 0 && figs >= 7 && eps_ok,
        format!(
            "exit codes {codes:?}; {figs} figures, {files} files; manifests identical: {}; eps 0.5 grid / 0.9 level sets: {eps_ok}",
            ma == mb
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("c01_equilibrium_identities", c01_equilibrium_identities),
        (
            "c02_strict_candidates_certified",
            c02_strict_candidates_certified,
        ),
        ("c03_closed_form_fidelity", c03_closed_form_fidelity),
        ("c04a_psi_matches_integral", c04a_psi_matches_integral),
        (
            "c04b_pi_closed_form_matches_integral_form",
            c04b_pi_closed_form_matches_integral_form,
        ),
        ("c04c_cross_term_cancellation", c04c_cross_term_cancellation),
        ("c05_decompositions", c05_decompositions),
        ("c06_region_geometry", c06_region_geometry),
        ("c07_conservation", c07_conservation),
        ("c08_stabilization", c08_stabilization),
        ("c09_target_equivalence", c09_target_equivalence),
        ("c10_figure_regeneration", c10_figure_regeneration),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name} [{:.1}s] {detail}", t.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
