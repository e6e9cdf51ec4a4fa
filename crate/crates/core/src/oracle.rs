//! Discretized best-response oracle.
//!
//! An equilibrium finder that shares no code with the closed forms: class
//! masses live on a uniform time grid, costs are evaluated through the
//! exact fluid engine with the discrete profile taken as a step curve, and
//! the profile is updated by fictitious play (best responses averaged with
//! weight `1/(k+1)`, classes alternating). Used to cross-validate the
//! solver; convergence is an empirical matter and is reported, never
//! assumed.

use crate::error::ModelError;
use crate::network::{compose, Class, GameParams};
use crate::profile::{Curve, Knot};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Grid spacing.
    pub dt: f64,
    /// Closed time window carrying the grid.
    pub window: (f64, f64),
    pub max_iters: usize,
    /// Stop when the sup-norm change of a cumulative profile in one
    /// averaging step falls below this.
    pub stop_tol: f64,
}

impl OracleConfig {
    /// Window wide enough to contain every closed-form support boundary:
    /// `[-(1/gamma_min)(L1 + L2)/mu_min - 1, (L1 + L2)/mu_min + 1]`.
    pub fn auto(p: &GameParams, dt: f64) -> Self {
        let g_min = p.gamma1.min(p.gamma2);
        let mu_min = p.mu1.min(p.mu2);
        let spread = (p.lambda1 + p.lambda2) / mu_min;
        OracleConfig {
            dt,
            window: (-spread / g_min - 1.0, spread + 1.0),
            max_iters: 80_000,
            stop_tol: 1e-4,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ModelError::InvalidRate(self.dt));
        }
        Ok(())
    }
}

/// Per-class mass on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProfile {
    times: Vec<f64>,
    mass: [Vec<f64>; 2],
}

impl DiscreteProfile {
    /// Grid over the config window with each class's mass spread uniformly.
    pub fn uniform(p: &GameParams, cfg: &OracleConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let n = (((cfg.window.1 - cfg.window.0) / cfg.dt).floor() as usize).max(0) + 1;
        let times: Vec<f64> = (0..n).map(|i| cfg.window.0 + cfg.dt * i as f64).collect();
        let mut dp = DiscreteProfile { times, mass: [vec![0.0; n], vec![0.0; n]] };
        dp.place_uniformly(Class::One, p.lambda1, &(0..n).collect::<Vec<_>>());
        dp.place_uniformly(Class::Two, p.lambda2, &(0..n).collect::<Vec<_>>());
        Ok(dp)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn masses(&self, class: Class) -> &[f64] {
        &self.mass[class.index()]
    }

    pub fn class_mass(&self, class: Class) -> f64 {
        self.mass[class.index()].iter().sum()
    }

    /// Splits `total` over the given slots so that the slot masses add up
    /// to `total` exactly (the last slot absorbs the rounding).
    fn place_uniformly(&mut self, class: Class, total: f64, slots: &[usize]) {
        let v = &mut self.mass[class.index()];
        v.iter_mut().for_each(|m| *m = 0.0);
        if slots.is_empty() || total == 0.0 {
            return;
        }
        let share = total / slots.len() as f64;
        for &j in &slots[..slots.len() - 1] {
            v[j] = share;
        }
        v[slots[slots.len() - 1]] = total - share * (slots.len() - 1) as f64;
    }

    /// The discrete profile as a right-continuous step curve.
    pub fn to_curve(&self, class: Class) -> Curve {
        let mut acc = 0.0;
        let mut knots = Vec::new();
        for (&t, &m) in self.times.iter().zip(&self.mass[class.index()]) {
            if m > 0.0 {
                knots.push(Knot { t, v_left: acc, v_right: acc + m });
                acc += m;
            }
        }
        if knots.is_empty() {
            return Curve::zero();
        }
        Curve::from_knots(knots, 0.0).expect("grid times are sorted")
    }

    /// Cumulative value at the grid slots (left Riemann of the masses).
    fn cumulative(&self, class: Class) -> Vec<f64> {
        let mut acc = 0.0;
        self.mass[class.index()]
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }
}

/// Places all of `class`'s mass on the cost-minimizing grid slots, costs
/// evaluated under the current joint profile (own congestion included).
/// Exact ties share the mass uniformly; the scan runs earliest-first so a
/// unique minimizer resolves to the earliest slot.
pub fn best_response(
    current: &DiscreteProfile,
    p: &GameParams,
    class: Class,
) -> Result<DiscreteProfile, ModelError> {
    let f1 = current.to_curve(Class::One);
    let f2 = current.to_curve(Class::Two);
    let trace = compose(&f1, &f2, p)?;
    let costs: Vec<f64> = current.times.iter().map(|&t| trace.class_cost(class, t)).collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tie_tol = 1e-12 * (1.0 + min.abs());
    let winners: Vec<usize> =
        (0..costs.len()).filter(|&j| costs[j] <= min + tie_tol).collect();
    let mut next = current.clone();
    next.place_uniformly(class, p.lambda(class), &winners);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDiagnostics {
    pub iters: usize,
    /// Sup-norm cumulative-profile change of the last averaging step.
    pub final_change: f64,
    pub converged: bool,
    /// Kolmogorov distance to a reference profile, when one is supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_reference: Option<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub profile: DiscreteProfile,
    pub diagnostics: OracleDiagnostics,
}

/// Fictitious play: `x_{k+1} = x_k + (BR(x_k) - x_k) / (k + 1)`, classes
/// alternating. Non-convergence shows up in the diagnostics, not as an
/// error.
pub fn solve_fixed_point(p: &GameParams, cfg: &OracleConfig) -> Result<OracleResult, ModelError> {
    p.validate()?;
    let mut x = DiscreteProfile::uniform(p, cfg)?;
    let mut last_change = f64::INFINITY;
    let mut iters = 0;
    let mut updates = [0usize; 2]; // per-class k in the 1/(k+1) weight
    'outer: loop {
        // one round updates both classes; the stop rule looks at the whole
        // round so an empty class cannot end the run by itself
        let mut round_change: f64 = 0.0;
        for class in Class::BOTH {
            if iters >= cfg.max_iters {
                break 'outer;
            }
            let br = best_response(&x, p, class)?;
            let i = class.index();
            let w = 1.0 / (updates[i] as f64 + 1.0);
            let before = x.cumulative(class);
            {
                let target = &br.mass[i];
                let v = &mut x.mass[i];
                for (m, &b) in v.iter_mut().zip(target) {
                    *m += w * (b - *m);
                }
                // keep the class total exact against float drift
                let total: f64 = v.iter().sum();
                let lambda = p.lambda(class);
                if total > 0.0 && lambda > 0.0 {
                    let fix = lambda / total;
                    v.iter_mut().for_each(|m| *m *= fix);
                }
            }
            let after = x.cumulative(class);
            let change = before
                .iter()
                .zip(&after)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            round_change = round_change.max(change);
            updates[i] += 1;
            iters += 1;
        }
        last_change = round_change;
        if iters > 2 && round_change < cfg.stop_tol {
            break;
        }
    }
    let converged = last_change < cfg.stop_tol;
    Ok(OracleResult {
        profile: x,
        diagnostics: OracleDiagnostics {
            iters,
            final_change: last_change,
            converged,
            distance_to_reference: None,
        },
    })
}

/// Kolmogorov (sup-norm) distance between two cumulative curves carrying
/// the same total mass.
pub fn kolmogorov_distance(a: &Curve, b: &Curve) -> Result<f64, ModelError> {
    let (ma, mb) = (a.total_increase(), b.total_increase());
    if (ma - mb).abs() > 1e-9 * (1.0 + ma.abs().max(mb.abs())) {
        return Err(ModelError::DistanceMassMismatch(ma, mb));
    }
    let mut d: f64 = 0.0;
    for k in a.knots().iter().chain(b.knots().iter()) {
        d = d.max((a.eval(k.t) - b.eval(k.t)).abs());
        d = d.max((a.eval_left(k.t) - b.eval_left(k.t)).abs());
    }
    Ok(d)
}

/// Distance of a discrete profile's class to a reference curve.
pub fn profile_distance(
    dp: &DiscreteProfile,
    class: Class,
    reference: &Curve,
) -> Result<f64, ModelError> {
    kolmogorov_distance(&dp.to_curve(class), reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Topology;
    use crate::solver::solve;

    fn sq_params(l1: f64, l2: f64) -> GameParams {
        GameParams::new(Topology::SingleQueue, 1.0, 1.0, l1, l2, 0.5, 0.8).unwrap()
    }

    #[test]
    fn single_slot_is_identity() {
        let p = sq_params(1.0, 0.0);
        let cfg = OracleConfig { dt: 1.0, window: (0.0, 0.5), max_iters: 10, stop_tol: 1e-9 };
        let x = DiscreteProfile::uniform(&p, &cfg).unwrap();
        assert_eq!(x.times().len(), 1);
        let br = best_response(&x, &p, Class::One).unwrap();
        assert_eq!(br, x);
    }

    #[test]
    fn mass_is_conserved_exactly() {
        let p = sq_params(1.7, 0.4);
        let cfg = OracleConfig { dt: 0.25, window: (-4.0, 3.0), max_iters: 40, stop_tol: 0.0 };
        let result = solve_fixed_point(&p, &cfg).unwrap();
        for class in Class::BOTH {
            let total = result.profile.class_mass(class);
            assert!(
                (total - p.lambda(class)).abs() <= 1e-12 * (1.0 + p.lambda(class)),
                "{total}"
            );
        }
    }

    #[test]
    fn first_response_lands_in_equilibrium_window() {
        // empty opponent, empty own profile: the best response must land
        // inside the single-class equilibrium support
        let p = sq_params(1.0, 0.0);
        let sol = solve(&p).unwrap();
        let (ta, tf) = (sol.boundaries.t1a, sol.boundaries.t1f);
        let cfg = OracleConfig { dt: 0.05, window: (-3.0, 3.0), max_iters: 1, stop_tol: 0.0 };
        let mut x = DiscreteProfile::uniform(&p, &cfg).unwrap();
        x.mass[0].iter_mut().for_each(|m| *m = 0.0);
        let br = best_response(&x, &p, Class::One).unwrap();
        for (j, &m) in br.masses(Class::One).iter().enumerate() {
            if m > 0.0 {
                let t = br.times()[j];
                assert!(t >= ta - 0.05 && t <= tf + 0.05, "mass at {t}");
            }
        }
    }

    #[test]
    fn response_to_equilibrium_stays_near_own_support() {
        let p = sq_params(1.0, 1.0);
        let sol = solve(&p).unwrap();
        let profile = sol.unique_profile().unwrap();
        let cfg = OracleConfig { dt: 0.02, window: (-2.0, 2.5), max_iters: 1, stop_tol: 0.0 };
        let mut x = DiscreteProfile::uniform(&p, &cfg).unwrap();
        // discretize the closed form onto the grid
        for class in Class::BOTH {
            let f = if class == Class::One { &profile.f1 } else { &profile.f2 };
            let i = class.index();
            let times = x.times().to_vec();
            for (j, &t) in times.iter().enumerate() {
                let prev = if j == 0 { f64::NEG_INFINITY } else { times[j - 1] };
                x.mass[i][j] = f.eval(t) - if prev.is_finite() { f.eval(prev) } else { 0.0 };
            }
        }
        let br = best_response(&x, &p, Class::One).unwrap();
        let sup = profile.f1.support();
        for (j, &m) in br.masses(Class::One).iter().enumerate() {
            if m > 0.0 {
                assert!(sup.contains(br.times()[j], 3.0 * cfg.dt));
            }
        }
    }

    #[test]
    fn fixed_point_approaches_single_class_closed_form() {
        let p = sq_params(1.0, 0.0);
        let sol = solve(&p).unwrap();
        let cfg = OracleConfig { dt: 0.05, window: (-2.5, 2.0), max_iters: 6000, stop_tol: 1e-5 };
        let result = solve_fixed_point(&p, &cfg).unwrap();
        let d = profile_distance(&result.profile, Class::One, &sol.unique_profile().unwrap().f1)
            .unwrap();
        assert!(d <= 0.1, "kolmogorov distance {d}");
    }

    #[test]
    fn runs_are_deterministic() {
        let p = sq_params(1.0, 1.0);
        let cfg = OracleConfig { dt: 0.1, window: (-3.0, 3.0), max_iters: 60, stop_tol: 0.0 };
        let a = solve_fixed_point(&p, &cfg).unwrap();
        let b = solve_fixed_point(&p, &cfg).unwrap();
        assert_eq!(a.profile, b.profile);
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn kolmogorov_basics() {
        let c = Curve::ramp(0.0, 1.0, 1.0).unwrap();
        assert_eq!(kolmogorov_distance(&c, &c).unwrap(), 0.0);
        let at_zero =
            Curve::from_knots(vec![Knot { t: 0.0, v_left: 0.0, v_right: 1.0 }], 0.0).unwrap();
        let at_dt =
            Curve::from_knots(vec![Knot { t: 0.01, v_left: 0.0, v_right: 1.0 }], 0.0).unwrap();
        assert_eq!(kolmogorov_distance(&at_zero, &at_dt).unwrap(), 1.0);
        let heavier = Curve::ramp(0.0, 1.0, 2.0).unwrap();
        assert!(kolmogorov_distance(&c, &heavier).is_err());
    }
}
