//! Single deterministic fluid queue.
//!
//! The facility opens at time zero and serves at a fixed rate `mu`. Given a
//! cumulative arrival curve `A`, the queue length is
//!
//! ```text
//! Q(t) = A(t) - mu * max(t, 0) + sup_{s in [0,t]} max(mu * s - A(s), 0)
//! ```
//!
//! with `Q(t) = A(t)` before the opening. Everything here is computed
//! exactly on the piecewise-linear pieces: the running sup can only move at
//! breakpoints or where a linear piece crosses zero, so no gridding is ever
//! involved.

use crate::error::ModelError;
use crate::profile::{Curve, Knot, Support, TIME_TOL};

/// Queue values below this are treated as empty.
pub const Q_SNAP: f64 = 1e-12;

fn check_rate(mu: f64) -> Result<(), ModelError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(ModelError::InvalidRate(mu));
    }
    Ok(())
}

fn snap(v: f64) -> f64 {
    if v.abs() < Q_SNAP {
        0.0
    } else {
        v
    }
}

/// Queue length process `Q(t)`.
///
/// `a` must be non-decreasing. Its value before the first breakpoint is
/// treated as mass already waiting when time begins.
pub fn queue_length(a: &Curve, mu: f64) -> Result<Curve, ModelError> {
    check_rate(mu)?;
    if !a.is_non_decreasing() {
        return Err(ModelError::Curve(crate::profile::CurveError::NotMonotone));
    }

    let mut knots: Vec<Knot> = Vec::with_capacity(a.knots().len() + 4);
    // Before the opening the queue is the arrival curve itself.
    for k in a.knots() {
        if k.t < 0.0 {
            knots.push(*k);
        }
    }

    // Service starts at zero.
    let mut t_cur = 0.0;
    let mut q_cur = snap(a.eval(0.0));
    knots.push(Knot { t: 0.0, v_left: snap(a.eval_left(0.0)), v_right: q_cur });

    let mut boundaries: Vec<f64> = a.knots().iter().map(|k| k.t).filter(|&t| t > 0.0).collect();
    boundaries.dedup();

    for t_next in boundaries {
        let span = t_next - t_cur;
        let inflow = a.eval_left(t_next) - a.eval(t_cur);
        let rate = if span > 0.0 { inflow / span } else { 0.0 };
        let net = rate - mu;
        let mut q_end = q_cur + net * span;
        if q_cur > 0.0 && q_end < 0.0 {
            // drains dry inside the piece
            let cross = t_cur + q_cur / (mu - rate);
            knots.push(Knot::point(cross, 0.0));
            q_end = 0.0;
        } else if q_cur <= 0.0 && net <= 0.0 {
            q_end = 0.0;
        }
        q_end = snap(q_end.max(0.0));
        let jump = a.eval(t_next) - a.eval_left(t_next);
        q_cur = snap(q_end + jump.max(0.0));
        knots.push(Knot { t: t_next, v_left: q_end, v_right: q_cur });
        t_cur = t_next;
    }

    // Tail behaviour after the last arrival breakpoint.
    let net_tail = a.right_tail_slope() - mu;
    let tail_slope = if q_cur > 0.0 {
        if net_tail < 0.0 {
            let cross = t_cur + q_cur / -net_tail;
            knots.push(Knot::point(cross, 0.0));
            0.0
        } else {
            net_tail
        }
    } else {
        net_tail.max(0.0)
    };

    Ok(Curve::from_knots(knots, tail_slope)?)
}

/// Expected waiting time of a user arriving at `t`:
/// `(Q(t+) + Q(t-)) / (2 mu) + max(0, -t)`. The midpoint handles arrival
/// atoms, whose members are queued in uniformly random order.
pub fn waiting_time(a: &Curve, mu: f64, t: f64) -> Result<f64, ModelError> {
    let q = queue_length(a, mu)?;
    Ok(wait_from_q(&q, mu, t))
}

fn wait_from_q(q: &Curve, mu: f64, t: f64) -> f64 {
    q.eval_mid(t) / mu + (-t).max(0.0)
}

/// Departure map `tau(t) = t + W(t)` as a right-continuous curve:
/// `tau(t) = max(t, 0) + Q(t+) / mu`. At an arrival atom the curve carries
/// both one-sided limits; the midpoint is the atom's expected departure.
pub fn departure_map(a: &Curve, mu: f64) -> Result<Curve, ModelError> {
    let q = queue_length(a, mu)?;
    Ok(departure_from_q(&q, mu))
}

fn departure_from_q(q: &Curve, mu: f64) -> Curve {
    let opening = Curve::from_knots(vec![Knot::point(0.0, 0.0)], 1.0)
        .expect("static knot list is valid");
    q.scale(1.0 / mu).sum(&opening)
}

/// Closure of `{ s : Q(s) > 0 }` as disjoint closed intervals.
pub fn engaged_set(a: &Curve, mu: f64) -> Result<Support, ModelError> {
    let q = queue_length(a, mu)?;
    engaged_from_q(&q)
}

fn engaged_from_q(q: &Curve) -> Result<Support, ModelError> {
    if q.initial_value() > Q_SNAP {
        // positive mass since forever: the engaged set has no left endpoint
        return Err(ModelError::NonZeroInitialMass);
    }
    if q.final_value() > Q_SNAP || q.right_tail_slope() > 0.0 {
        return Err(ModelError::UnboundedQueue);
    }
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut push = |lo: f64, hi: f64| match intervals.last_mut() {
        Some(last) if lo <= last.1 + TIME_TOL => last.1 = last.1.max(hi),
        _ => intervals.push((lo, hi)),
    };
    let knots = q.knots();
    for (i, k) in knots.iter().enumerate() {
        if k.v_right > 0.0 {
            // positive at and after the knot; extends to the next knot
            if i + 1 < knots.len() {
                push(k.t, knots[i + 1].t);
            }
        } else if i + 1 < knots.len() && knots[i + 1].v_left > 0.0 {
            // rises off zero inside the piece; closure starts at the knot
            push(k.t, knots[i + 1].t);
        }
    }
    Ok(Support::new(intervals))
}

/// Everything the network layer needs about one queue.
#[derive(Debug, Clone)]
pub struct QueueTrace {
    pub mu: f64,
    pub arrivals: Curve,
    pub q: Curve,
    pub tau: Curve,
    pub engaged: Support,
}

impl QueueTrace {
    /// The waiting-time function object `W(t)`. Not a curve: the midpoint
    /// rule at atoms makes it non-right-continuous.
    pub fn wait(&self, t: f64) -> f64 {
        wait_from_q(&self.q, self.mu, t)
    }

    /// Expected departure time of a user arriving at `t`.
    pub fn departure(&self, t: f64) -> f64 {
        t + self.wait(t)
    }
}

/// Runs the queue once and bundles length, departure map and engaged set.
pub fn solve_queue(a: &Curve, mu: f64) -> Result<QueueTrace, ModelError> {
    let q = queue_length(a, mu)?;
    let tau = departure_from_q(&q, mu);
    let engaged = engaged_from_q(&q)?;
    Ok(QueueTrace { mu, arrivals: a.clone(), q, tau, engaged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Brute-force evaluation of the defining formula, sup included.
    fn queue_by_definition(a: &Curve, mu: f64, t: f64) -> f64 {
        if t < 0.0 {
            return a.eval(t);
        }
        let mut sup: f64 = 0.0;
        let mut candidates: Vec<f64> = a
            .knots()
            .iter()
            .flat_map(|k| [k.t, k.t - 1e-9])
            .filter(|&s| (0.0..=t).contains(&s))
            .collect();
        candidates.push(0.0);
        candidates.push(t);
        for i in 0..=2000 {
            candidates.push(t * i as f64 / 2000.0);
        }
        for s in candidates {
            sup = sup.max(mu * s - a.eval(s));
        }
        a.eval(t) - mu * t + sup
    }

    #[test]
    fn zero_arrivals() {
        let q = queue_length(&Curve::zero(), 1.0).unwrap();
        for t in [-3.0, 0.0, 1.0, 10.0] {
            assert_eq!(q.eval(t), 0.0);
        }
        assert!(engaged_set(&Curve::zero(), 1.0).unwrap().is_empty());
        let tau = departure_map(&Curve::zero(), 1.0).unwrap();
        assert_eq!(tau.eval(-2.0), 0.0);
        assert_eq!(tau.eval(3.0), 3.0);
    }

    #[test]
    fn arrivals_at_service_rate_leave_no_queue() {
        let mu = 1.3;
        let a = Curve::from_knots(vec![Knot::point(0.0, 0.0)], mu).unwrap();
        let q = queue_length(&a, mu).unwrap();
        for t in [0.0, 0.5, 7.0] {
            assert_eq!(q.eval(t), 0.0);
        }
    }

    #[test]
    fn pre_opening_burst() {
        // slope 2*mu on [-1, 0] with mu = 1: queue peaks at 2, drains at
        // slope -1, empty at t = 2
        let mu = 1.0;
        let a = Curve::ramp(-1.0, 0.0, 2.0).unwrap();
        let q = queue_length(&a, mu).unwrap();
        assert_close(q.eval(0.0), 2.0, 1e-12);
        assert_close(q.eval(1.0), 1.0, 1e-12);
        assert_close(q.eval(2.0), 0.0, 1e-12);
        assert_eq!(q.eval(3.0), 0.0);
        assert_close(waiting_time(&a, mu, 0.0).unwrap(), 2.0, 1e-12);
        let engaged = engaged_set(&a, mu).unwrap();
        assert_eq!(engaged.len(), 1);
        let (lo, hi) = engaged.intervals()[0];
        assert_close(lo, -1.0, 1e-12);
        assert_close(hi, 2.0, 1e-12);

        // discrete-time cross-check
        let dt = 1e-4;
        let mut sim_q = 0.0;
        let mut t = -1.0;
        while t < 2.5 {
            let t2 = t + dt;
            sim_q += a.eval(t2) - a.eval(t);
            sim_q = (sim_q - mu * (t2.min(2.5).max(0.0) - t.max(0.0))).max(0.0);
            assert!((q.eval(t2) - sim_q).abs() <= 2.0 * dt * mu, "at t={t2}");
            t = t2;
        }
    }

    #[test]
    fn waiting_before_opening() {
        assert_close(waiting_time(&Curve::zero(), 2.0, -3.0).unwrap(), 3.0, 1e-12);
    }

    #[test]
    fn atom_waits_half_itself() {
        // unit atom at t = 0, mu = 1: W(0) = (1 + 0) / 2
        let a = Curve::from_knots(vec![Knot { t: 0.0, v_left: 0.0, v_right: 1.0 }], 0.0).unwrap();
        assert_close(waiting_time(&a, 1.0, 0.0).unwrap(), 0.5, 1e-12);
    }

    #[test]
    fn departure_slope_on_engaged_interval() {
        // backlog from an atom keeps the queue engaged while arrivals come
        // at 0.6 < mu = 2; there tau'(t) = 0.6 / 2 = 0.3
        let base = Curve::from_knots(vec![Knot { t: -0.5, v_left: 0.0, v_right: 5.0 }], 0.0).unwrap();
        let a = base.sum(&Curve::ramp(0.0, 1.0, 0.6).unwrap());
        let tau = departure_map(&a, 2.0).unwrap();
        assert_close(tau.eval(0.9) - tau.eval(0.1), 0.3 * 0.8, 1e-12);
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(queue_length(&Curve::zero(), 0.0).is_err());
        assert!(queue_length(&Curve::zero(), -1.0).is_err());
        assert!(waiting_time(&Curve::zero(), 0.0, 1.0).is_err());
        assert!(departure_map(&Curve::zero(), f64::NAN).is_err());
    }

    #[test]
    fn two_bursts_two_engaged_intervals() {
        let a = Curve::from_rate_spans(&[(0.0, 1.0, 3.0), (10.0, 11.0, 3.0)]).unwrap();
        let engaged = engaged_set(&a, 1.0).unwrap();
        assert_eq!(engaged.len(), 2);
        let (lo0, hi0) = engaged.intervals()[0];
        let (lo1, hi1) = engaged.intervals()[1];
        assert_close(lo0, 0.0, 1e-12);
        assert_close(hi0, 3.0, 1e-12);
        assert_close(lo1, 10.0, 1e-12);
        assert_close(hi1, 13.0, 1e-12);
    }

    #[test]
    fn matches_defining_formula() {
        let inputs = [
            Curve::ramp(-1.0, 0.0, 2.0).unwrap(),
            Curve::from_rate_spans(&[(-2.0, -1.0, 1.5), (0.5, 1.0, 4.0)]).unwrap(),
            Curve::from_rate_spans(&[(0.0, 1.0, 0.4), (1.0, 2.0, 3.0), (4.0, 5.0, 2.0)]).unwrap(),
        ];
        for a in &inputs {
            let q = queue_length(a, 1.0).unwrap();
            for i in 0..=200 {
                let t = -3.0 + 12.0 * i as f64 / 200.0;
                assert_close(q.eval(t), queue_by_definition(a, 1.0, t).max(0.0), 1e-6);
            }
        }
    }

    /// Bursty arrival curves: idle stretches carry no inflow and bursts
    /// overload the server, so served mass equals `mu` times engaged time
    /// after the opening.
    fn bursts_above(mu: f64) -> impl Strategy<Value = Curve> {
        proptest::collection::vec((0.1f64..2.0, 0.1f64..4.0, 1.05f64..3.0), 1..5).prop_map(
            move |specs| {
                let mut spans = Vec::new();
                let mut t = -2.0;
                for (gap, len, factor) in specs {
                    let lo = t + gap;
                    let hi = lo + len;
                    spans.push((lo, hi, mu * factor));
                    t = hi;
                }
                Curve::from_rate_spans(&spans).unwrap()
            },
        )
    }

    fn bursts() -> impl Strategy<Value = Curve> {
        bursts_above(1.0)
    }

    proptest! {
        #[test]
        fn queue_is_nonnegative(a in bursts(), mu in 0.3f64..3.0) {
            let q = queue_length(&a, mu).unwrap();
            for w in q.knots().windows(2) {
                prop_assert!(w[0].v_right >= 0.0 && w[0].v_left >= 0.0);
                let mid = 0.5 * (w[0].t + w[1].t);
                prop_assert!(q.eval(mid) >= -1e-12);
            }
        }

        #[test]
        fn conservation_on_engaged_time(
            (mu, a) in (0.3f64..3.0).prop_flat_map(|mu| (Just(mu), bursts_above(mu))),
            frac in 0.0f64..1.0,
        ) {
            let trace = solve_queue(&a, mu).unwrap();
            let horizon = trace.q.last_time() + 1.0;
            let t = frac * horizon;
            let served = a.eval(t) - trace.q.eval(t);
            let engaged_time = trace.engaged.measure_within(0.0, t);
            prop_assert!((served - mu * engaged_time).abs() <= 1e-9,
                "served {} vs mu*engaged {}", served, mu * engaged_time);
        }

        #[test]
        fn departures_monotone_and_identity_off_engaged(a in bursts(), mu in 0.3f64..3.0) {
            let trace = solve_queue(&a, mu).unwrap();
            let t_hi = trace.q.last_time() + 1.0;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=400 {
                let t = -4.0 + (t_hi + 4.0) * i as f64 / 400.0;
                let v = trace.tau.eval(t);
                prop_assert!(v >= prev - 1e-12);
                prop_assert!(v >= t.max(0.0) - 1e-12);
                if t > 0.0 && !trace.engaged.contains(t, 1e-9) {
                    prop_assert!((v - t).abs() <= 1e-9);
                }
                prev = v;
            }
        }
    }
}
