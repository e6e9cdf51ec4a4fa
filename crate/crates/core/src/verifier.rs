//! Equilibrium verification by direct cost evaluation.
//!
//! A joint profile is an eps-equilibrium when, for each class, the cost is
//! constant (within eps) across the class's own support and no time outside
//! the support is cheaper (within eps). The verifier evaluates costs through
//! the exact fluid engine at every breakpoint of the induced trace plus a
//! uniform grid, so it is independent of how a candidate profile was
//! produced: supports are extracted from the profiles themselves, never
//! taken from solver metadata.

use crate::error::ModelError;
use crate::network::{compose, Class, GameParams, NetworkTrace, Topology};
use crate::profile::Curve;
use crate::solver::{EapKind, EapSolution, JointProfile, RegimeTag};
use serde::{Deserialize, Serialize};

/// Grid resolution of the scan in addition to trace breakpoints.
const SCAN_GRID: usize = 1000;

/// One structural invariant outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of an equilibrium check and/or structural audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub eps: f64,
    /// max - min cost across each class's support.
    pub iso_cost_deviation: [f64; 2],
    /// Best cost improvement available off-support, clipped at zero.
    pub deviation_gain: [f64; 2],
    /// |profile mass - lambda| per class.
    pub mass_error: [f64; 2],
    /// Cost on the support per class (max over support points), if any.
    pub support_cost: [Option<f64>; 2],
    pub social_cost: f64,
    pub invariants: Vec<InvariantCheck>,
    pub passed: bool,
}

fn scan_times(trace: &NetworkTrace) -> Vec<f64> {
    let s1 = trace.f1.support();
    let s2 = trace.f2.support();
    let span1 = s1.span();
    let span2 = s2.span();
    let (ta, tf) = match (span1, span2) {
        (Some((a1, f1)), Some((a2, f2))) => (a1.min(a2), f1.max(f2)),
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => return Vec::new(),
    };
    let span = (tf - ta).max(1.0);
    let mut times = trace.critical_times();
    let lo = ta - span;
    let hi = tf + span;
    times.reserve(SCAN_GRID + 2);
    for i in 0..=SCAN_GRID {
        times.push(lo + (hi - lo) * i as f64 / SCAN_GRID as f64);
    }
    // beyond this point the network is surely empty and cost only grows
    let p = &trace.params;
    times.push(tf + p.total_mass() / p.mu1.min(p.mu2));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    times
}

/// Checks whether `(f1, f2)` is an eps-equilibrium of the game `p`.
///
/// Mass mismatches are reported as a failing report, not an error; errors
/// are reserved for malformed curves or parameters.
pub fn check_equilibrium(
    f1: &Curve,
    f2: &Curve,
    p: &GameParams,
    eps: f64,
) -> Result<VerificationReport, ModelError> {
    let trace = compose(f1, f2, p)?;
    let times = scan_times(&trace);

    let mut report = VerificationReport {
        eps,
        iso_cost_deviation: [0.0; 2],
        deviation_gain: [0.0; 2],
        mass_error: [
            (f1.total_increase() - p.lambda1).abs(),
            (f2.total_increase() - p.lambda2).abs(),
        ],
        support_cost: [None, None],
        social_cost: social_cost_of_trace(&trace),
        invariants: Vec::new(),
        passed: true,
    };

    for class in Class::BOTH {
        let i = class.index();
        let sup = trace.class_support(class);
        if sup.is_empty() {
            continue; // vacuous for an empty class
        }
        let mut on_max = f64::NEG_INFINITY;
        let mut on_min = f64::INFINITY;
        let mut off_min = f64::INFINITY;
        for &t in &times {
            let c = trace.class_cost(class, t);
            if sup.contains(t, 1e-12) {
                on_max = on_max.max(c);
                on_min = on_min.min(c);
            } else {
                off_min = off_min.min(c);
            }
        }
        // support endpoints always participate in the iso check
        for &(lo, hi) in sup.intervals() {
            for t in [lo, hi] {
                let c = trace.class_cost(class, t);
                on_max = on_max.max(c);
                on_min = on_min.min(c);
            }
        }
        report.iso_cost_deviation[i] = on_max - on_min;
        report.deviation_gain[i] = (on_max - off_min).max(0.0);
        report.support_cost[i] = Some(on_max);
    }

    report.passed = (0..2).all(|i| {
        report.mass_error[i] <= eps
            && report.iso_cost_deviation[i] <= eps
            && report.deviation_gain[i] <= eps
    });
    Ok(report)
}

/// Social cost `sum_i \int C_i dF_i`, evaluated exactly: between
/// consecutive critical times every class cost is linear, so the trapezoid
/// rule on those pieces is not an approximation. Arrival atoms contribute
/// their expected (midpoint) cost.
pub fn social_cost(f1: &Curve, f2: &Curve, p: &GameParams) -> Result<f64, ModelError> {
    let trace = compose(f1, f2, p)?;
    Ok(social_cost_of_trace(&trace))
}

pub fn social_cost_of_trace(trace: &NetworkTrace) -> f64 {
    let times = trace.critical_times();
    let mut total = 0.0;
    for class in Class::BOTH {
        let f = trace.class_profile(class);
        for w in times.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dm = f.eval_left(b) - f.eval(a);
            if dm > 0.0 {
                let ca = trace.class_cost(class, a);
                let cb = trace.class_cost(class, b);
                total += 0.5 * (ca + cb) * dm;
            }
        }
        for k in f.knots() {
            if k.jump() > 0.0 {
                total += trace.class_cost(class, k.t) * k.jump();
            }
        }
    }
    total
}

fn push_check(checks: &mut Vec<InvariantCheck>, name: &str, passed: bool, detail: String) {
    checks.push(InvariantCheck { name: name.to_string(), passed, detail });
}

/// Piecewise slopes of a curve restricted to its support.
fn support_slopes(c: &Curve) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let knots = c.knots();
    for w in knots.windows(2) {
        let len = w[1].t - w[0].t;
        if len <= 1e-12 {
            continue;
        }
        let slope = (w[1].v_left - w[0].v_right) / len;
        if slope > 1e-12 {
            out.push((w[0].t, w[1].t, slope));
        }
    }
    out
}

/// Structural audit keyed to the model's lemmas: support shapes, arrival
/// rates, overlap thresholds and queue-idle times, plus the plain
/// equilibrium check on every profile the solution exposes.
pub fn audit_structure(sol: &EapSolution, p: &GameParams) -> Result<VerificationReport, ModelError> {
    let profiles = sol.verification_profiles();
    let mut report: Option<VerificationReport> = None;
    for profile in &profiles {
        let r = check_equilibrium(&profile.f1, &profile.f2, p, 1e-9)?;
        report = Some(match report {
            None => r,
            Some(mut acc) => {
                for i in 0..2 {
                    acc.iso_cost_deviation[i] = acc.iso_cost_deviation[i].max(r.iso_cost_deviation[i]);
                    acc.deviation_gain[i] = acc.deviation_gain[i].max(r.deviation_gain[i]);
                    acc.mass_error[i] = acc.mass_error[i].max(r.mass_error[i]);
                }
                acc.passed &= r.passed;
                acc
            }
        });
    }
    let mut report = report.expect("a solution always exposes at least one profile");
    let mut checks = Vec::new();

    for profile in &profiles {
        push_check(
            &mut checks,
            "profiles-non-decreasing",
            profile.f1.is_non_decreasing() && profile.f2.is_non_decreasing(),
            String::new(),
        );
    }

    match p.topology {
        Topology::Hds => audit_hds(sol, p, &profiles, &mut checks)?,
        Topology::Has => audit_has(sol, p, &profiles, &mut checks)?,
        _ => {}
    }

    if let EapKind::Convex { descriptor, extremes } = &sol.kind {
        for (i, e) in extremes.iter().enumerate() {
            push_check(
                &mut checks,
                "extreme-profile-in-convex-set",
                descriptor.contains(e, 1e-9),
                format!("extreme {i}"),
            );
        }
    }

    report.passed &= checks.iter().all(|c| c.passed);
    report.invariants = checks;
    Ok(report)
}

fn audit_hds(
    sol: &EapSolution,
    p: &GameParams,
    profiles: &[&JointProfile],
    checks: &mut Vec<InvariantCheck>,
) -> Result<(), ModelError> {
    let unequal = p.gamma1 != p.gamma2 && p.mu1 > p.mu2;
    for profile in profiles {
        let s1 = profile.f1.support();
        let s2 = profile.f2.support();
        // supports are intervals, and their union is an interval
        let union_ok = match (s1.span(), s2.span()) {
            (Some((a1, f1)), Some((a2, f2))) => a1.max(a2) <= f1.min(f2) + 1e-9,
            _ => true,
        };
        push_check(
            checks,
            "class-supports-are-intervals",
            s1.len() <= 1 && (!unequal || s2.len() <= 1) && union_ok,
            format!("support counts {} / {}", s1.len(), s2.len()),
        );
        if unequal {
            // contiguous-vs-overlapping threshold
            let expected_disjoint = p.mu1 <= p.mu2 * (p.gamma2 / p.gamma1).max(1.0);
            let overlap = interior_overlap(&s1, &s2);
            push_check(
                checks,
                "support-overlap-iff-rate-threshold",
                (overlap < 1e-9) == expected_disjoint,
                format!("interior overlap {overlap:.3e}, expected disjoint: {expected_disjoint}"),
            );
            // equilibrium arrival rates
            let r2_ok = support_slopes(&profile.f2)
                .iter()
                .all(|&(_, _, s)| (s - p.mu2 * p.gamma2).abs() <= 1e-9);
            let r1_ok = support_slopes(&profile.f1).iter().all(|&(lo, hi, s)| {
                let mid = 0.5 * (lo + hi);
                let expected = if s2.contains(mid, 1e-12) {
                    p.mu1 * p.gamma1 - p.mu2 * p.gamma2
                } else {
                    p.mu1 * p.gamma1
                };
                (s - expected).abs() <= 1e-9
            });
            push_check(checks, "arrival-rates-law", r1_ok && r2_ok, String::new());
            // queues drain exactly when the theory says they do
            let trace = compose(&profile.f1, &profile.f2, p)?;
            let t2f = sol.boundaries.t2f;
            let q2_at_drain = trace.queue2.q.eval(trace.queue1.tau.eval(t2f));
            let mut ok = q2_at_drain < 1e-9;
            let mut detail = format!("Q2(tau1(T2f)) = {q2_at_drain:.3e}");
            if p.mu1 * p.gamma1 > p.mu2 * p.gamma2 {
                let q1_at_end = trace.queue1.q.eval(sol.boundaries.t1f);
                ok &= q1_at_end < 1e-9;
                detail.push_str(&format!(", Q1(T1f) = {q1_at_end:.3e}"));
            }
            push_check(checks, "queues-idle-at-support-ends", ok, detail);
        }
    }
    if unequal {
        let b = &sol.boundaries;
        let order_ok = match sol.tag {
            RegimeTag::Hds1 => (b.t1f - b.t2a).abs() <= 1e-9,
            RegimeTag::Hds2a | RegimeTag::Hds2b => b.t1f <= b.t2f + 1e-9,
            RegimeTag::Hds3a | RegimeTag::Hds3b => b.t1a > b.t2a - 1e-9,
            _ => true,
        };
        push_check(checks, "arrival-order-of-classes", order_ok, format!("tag {}", sol.tag));
    }
    Ok(())
}

fn audit_has(
    sol: &EapSolution,
    p: &GameParams,
    profiles: &[&JointProfile],
    checks: &mut Vec<InvariantCheck>,
) -> Result<(), ModelError> {
    for profile in profiles {
        let trace = compose(&profile.f1, &profile.f2, p)?;
        if p.gamma1 != p.gamma2 {
            // queue 2 serves the classes over disjoint times iff mu1 >= mu2*gamma2;
            // equivalently the class streams never arrive at queue 2 together
            let inv = trace.tau1_inv.as_ref().expect("chained topology");
            let y1 = Curve::compose(&profile.f1, inv)?;
            let overlap = y1.support().overlap(&profile.f2.support());
            let expected_disjoint = p.mu1 >= p.mu2 * p.gamma2;
            push_check(
                checks,
                "queue2-service-split-iff-rate-threshold",
                (overlap < 1e-9) == expected_disjoint,
                format!("queue-2 inflow overlap {overlap:.3e}, expected disjoint: {expected_disjoint}"),
            );
        }
        if sol.tag == RegimeTag::HasII3c {
            let n = profile.f2.support().len();
            push_check(
                checks,
                "class2-arrives-in-two-intervals",
                n == 2,
                format!("{n} support intervals"),
            );
        }
        if let Some(t_empty) = sol.boundaries.t_empty {
            let q2 = trace.queue2.q.eval(t_empty);
            push_check(
                checks,
                "queue2-drains-at-reported-time",
                q2 < 1e-9,
                format!("Q2({t_empty}) = {q2:.3e}"),
            );
        }
    }
    Ok(())
}

fn interior_overlap(a: &crate::profile::Support, b: &crate::profile::Support) -> f64 {
    a.overlap(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{sample_convex_eap, solve};

    fn hds_case1() -> (GameParams, EapSolution) {
        let p = GameParams::new(Topology::Hds, 2.0, 1.0, 2.0, 1.0, 0.3, 0.8).unwrap();
        let sol = solve(&p).unwrap();
        (p, sol)
    }

    #[test]
    fn closed_form_passes() {
        let (p, sol) = hds_case1();
        let profile = sol.unique_profile().unwrap();
        let report = check_equilibrium(&profile.f1, &profile.f2, &p, 1e-9).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn shifted_support_fails_with_gain() {
        let (p, sol) = hds_case1();
        let profile = sol.unique_profile().unwrap();
        let shifted = profile.f2.shift_time(0.1);
        let report = check_equilibrium(&profile.f1, &shifted, &p, 1e-9).unwrap();
        assert!(!report.passed);
        assert!(report.deviation_gain[1] > 1e-6, "{report:?}");
    }

    #[test]
    fn zero_masses_pass_vacuously() {
        let p = GameParams::new(Topology::Hds, 2.0, 1.0, 0.0, 0.0, 0.3, 0.8).unwrap();
        let report = check_equilibrium(&Curve::zero(), &Curve::zero(), &p, 1e-9).unwrap();
        assert!(report.passed);
        assert_eq!(report.social_cost, 0.0);
    }

    #[test]
    fn mass_mismatch_is_reported_not_raised() {
        let (p, sol) = hds_case1();
        let profile = sol.unique_profile().unwrap();
        let half = profile.f2.scale(0.5);
        let report = check_equilibrium(&profile.f1, &half, &p, 1e-9).unwrap();
        assert!(!report.passed);
        assert!(report.mass_error[1] > 0.4);
    }

    #[test]
    fn monotone_in_eps() {
        let (p, sol) = hds_case1();
        let profile = sol.unique_profile().unwrap();
        let shifted = profile.f2.shift_time(1e-4);
        let strict = check_equilibrium(&profile.f1, &shifted, &p, 1e-9).unwrap();
        let loose = check_equilibrium(&profile.f1, &shifted, &p, 1.0).unwrap();
        assert!(!strict.passed);
        assert!(loose.passed);
    }

    #[test]
    fn report_is_deterministic() {
        let (p, sol) = hds_case1();
        let profile = sol.unique_profile().unwrap();
        let a = check_equilibrium(&profile.f1, &profile.f2, &p, 1e-9).unwrap();
        let b = check_equilibrium(&profile.f1, &profile.f2, &p, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn social_cost_matches_iso_cost_identity() {
        let (p, sol) = hds_case1();
        let profile = sol.unique_profile().unwrap();
        let report = check_equilibrium(&profile.f1, &profile.f2, &p, 1e-9).unwrap();
        let expected = p.lambda1 * report.support_cost[0].unwrap()
            + p.lambda2 * report.support_cost[1].unwrap();
        assert!((report.social_cost - expected).abs() <= 1e-9, "{report:?}");
    }

    #[test]
    fn convex_samples_share_social_cost() {
        let p = GameParams::new(Topology::Hds, 2.0, 1.0, 2.0, 1.0, 0.5, 0.5).unwrap();
        let sol = solve(&p).unwrap();
        let d = sol.convex_set().unwrap();
        let s0 = sample_convex_eap(d, 1).unwrap();
        let s1 = sample_convex_eap(d, 2).unwrap();
        let c0 = social_cost(&s0.f1, &s0.f2, &p).unwrap();
        let c1 = social_cost(&s1.f1, &s1.f2, &p).unwrap();
        assert!((c0 - c1).abs() <= 1e-9, "{c0} vs {c1}");
    }

    #[test]
    fn audit_hds_case1_structure() {
        let (p, sol) = hds_case1();
        let report = audit_structure(&sol, &p).unwrap();
        assert!(report.passed, "{:#?}", report.invariants);
        assert!(report
            .invariants
            .iter()
            .any(|c| c.name == "support-overlap-iff-rate-threshold"));
    }

    #[test]
    fn audit_has_3c_structure() {
        let p = GameParams::new(Topology::Has, 1.0, 2.0, 1.0, 2.0, 0.2, 0.5).unwrap();
        let sol = solve(&p).unwrap();
        assert_eq!(sol.tag, RegimeTag::HasII3c);
        let report = audit_structure(&sol, &p).unwrap();
        assert!(report.passed, "{:#?}", report.invariants);
        assert!(report
            .invariants
            .iter()
            .any(|c| c.name == "class2-arrives-in-two-intervals" && c.passed));
    }
}
