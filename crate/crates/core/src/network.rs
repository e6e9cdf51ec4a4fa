//! Two-queue network topologies and per-class cost evaluation.
//!
//! Four routings of two customer classes over two queues are supported:
//!
//! * `SingleQueue` — both classes at one queue (rate `mu1`),
//! * `TandemCommon` — both classes traverse queue 1 then queue 2, which
//!   collapses to a single queue of rate `min(mu1, mu2)`,
//! * `Parallel` — class `i` is served by queue `i` alone,
//! * `Hds` — both classes enter queue 1, class 2 continues through queue 2,
//! * `Has` — class `i` enters queue `i`, both depart from queue 2.
//!
//! Both topologies are feed-forward, so queue 1 is always evaluated first
//! and queue 2 driven by its output; no fixed point is involved. The inflow
//! handed from queue 1 to queue 2 is the exact piecewise-linear composition
//! with the sup-inverse of queue 1's departure map; atoms created by that
//! composition are carried through and queue 2 prices them with the same
//! midpoint waiting rule as queue 1.

use crate::error::ModelError;
use crate::profile::{Curve, Support};
use crate::queue::{solve_queue, QueueTrace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    #[serde(rename = "SingleQueue", alias = "single_queue")]
    SingleQueue,
    #[serde(rename = "TandemCommon", alias = "tandem", alias = "tandem_common")]
    TandemCommon,
    #[serde(rename = "Parallel", alias = "parallel")]
    Parallel,
    #[serde(rename = "HDS", alias = "hds")]
    Hds,
    #[serde(rename = "HAS", alias = "has")]
    Has,
}

/// Customer class, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    One,
    Two,
}

impl Class {
    pub const BOTH: [Class; 2] = [Class::One, Class::Two];

    pub fn index(self) -> usize {
        match self {
            Class::One => 0,
            Class::Two => 1,
        }
    }
}

/// Problem parameters: topology, service rates, class masses and cost
/// preferences.
///
/// `gamma_i` is the normalized waiting-time weight `alpha_i / (alpha_i +
/// beta_i)` of the linear cost `alpha_i * W + beta_i * tau`; it must lie
/// strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub topology: Topology,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GameParams {
    pub fn new(
        topology: Topology,
        mu1: f64,
        mu2: f64,
        lambda1: f64,
        lambda2: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self, ModelError> {
        let p = GameParams { topology, mu1, mu2, lambda1, lambda2, gamma1, gamma2 };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from raw per-unit costs `alpha_i` (waiting) and
    /// `beta_i` (departure delay): `gamma_i = alpha_i / (alpha_i + beta_i)`.
    pub fn from_alpha_beta(
        topology: Topology,
        mu1: f64,
        mu2: f64,
        lambda1: f64,
        lambda2: f64,
        (alpha1, beta1): (f64, f64),
        (alpha2, beta2): (f64, f64),
    ) -> Result<Self, ModelError> {
        for v in [alpha1, beta1, alpha2, beta2] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidPreference(v));
            }
        }
        Self::new(
            topology,
            mu1,
            mu2,
            lambda1,
            lambda2,
            alpha1 / (alpha1 + beta1),
            alpha2 / (alpha2 + beta2),
        )
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for mu in [self.mu1, self.mu2] {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(ModelError::InvalidRate(mu));
            }
        }
        for gamma in [self.gamma1, self.gamma2] {
            if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
                return Err(ModelError::InvalidPreference(gamma));
            }
        }
        for lambda in [self.lambda1, self.lambda2] {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(ModelError::InvalidMass(lambda));
            }
        }
        Ok(())
    }

    pub fn gamma(&self, class: Class) -> f64 {
        match class {
            Class::One => self.gamma1,
            Class::Two => self.gamma2,
        }
    }

    pub fn lambda(&self, class: Class) -> f64 {
        match class {
            Class::One => self.lambda1,
            Class::Two => self.lambda2,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.lambda1 + self.lambda2
    }
}

/// How per-class waiting and departure are read off the two queue traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    /// Both classes see queue 1 only (single queue / tandem reduction).
    Common,
    /// Class i is served by queue i alone.
    Independent,
    /// Queue 1 feeds class 2 into queue 2.
    HdsChain,
    /// Queue 1 feeds class 1 into queue 2, which also serves class 2.
    HasChain,
}

/// Full network evaluation for one joint arrival profile.
#[derive(Debug, Clone)]
pub struct NetworkTrace {
    pub params: GameParams,
    pub f1: Curve,
    pub f2: Curve,
    pub queue1: QueueTrace,
    pub queue2: QueueTrace,
    /// Sup-inverse of queue 1's departure map (chained topologies only).
    pub tau1_inv: Option<Curve>,
    route: Route,
}

fn empty_queue(mu: f64) -> Result<QueueTrace, ModelError> {
    solve_queue(&Curve::zero(), mu)
}

/// Both classes at a single queue of rate `mu` (also the tandem reduction).
fn common_trace(f1: &Curve, f2: &Curve, p: &GameParams, mu: f64) -> Result<NetworkTrace, ModelError> {
    let queue1 = solve_queue(&f1.sum(f2), mu)?;
    Ok(NetworkTrace {
        params: *p,
        f1: f1.clone(),
        f2: f2.clone(),
        queue1,
        queue2: empty_queue(p.mu2)?,
        tau1_inv: None,
        route: Route::Common,
    })
}

fn expect_topology(p: &GameParams, expected: Topology) -> Result<(), ModelError> {
    if p.topology != expected {
        return Err(ModelError::TopologyMismatch { expected, got: p.topology });
    }
    Ok(())
}

/// Sup-inverse of a departure map, adjusted for routing: values below the
/// map's range resolve to a time strictly before the first arrival, so
/// that composing an arrival profile with it yields zero inflow before the
/// first departure (the plain inverse clamps to the first breakpoint,
/// which would teleport an opening atom into the downstream queue).
fn routing_inverse(tau: &Curve) -> Result<Curve, ModelError> {
    let inv = tau.generalized_inverse()?;
    let mut knots = inv.knots().to_vec();
    knots[0].v_left -= 1.0;
    Ok(Curve::from_knots(knots, inv.right_tail_slope())?)
}

/// Heterogeneous departures: `A1 = F1 + F2`, `A2 = F2 ∘ tau1^{-1}`.
pub fn compose_hds(f1: &Curve, f2: &Curve, p: &GameParams) -> Result<NetworkTrace, ModelError> {
    expect_topology(p, Topology::Hds)?;
    p.validate()?;
    let queue1 = solve_queue(&f1.sum(f2), p.mu1)?;
    let tau1_inv = routing_inverse(&queue1.tau)?;
    let a2 = Curve::compose(f2, &tau1_inv)?;
    let queue2 = solve_queue(&a2, p.mu2)?;
    Ok(NetworkTrace {
        params: *p,
        f1: f1.clone(),
        f2: f2.clone(),
        queue1,
        queue2,
        tau1_inv: Some(tau1_inv),
        route: Route::HdsChain,
    })
}

/// Heterogeneous arrivals: `A1 = F1`, `A2 = F1 ∘ tau1^{-1} + F2`.
pub fn compose_has(f1: &Curve, f2: &Curve, p: &GameParams) -> Result<NetworkTrace, ModelError> {
    expect_topology(p, Topology::Has)?;
    p.validate()?;
    let queue1 = solve_queue(f1, p.mu1)?;
    let tau1_inv = routing_inverse(&queue1.tau)?;
    let y1 = Curve::compose(f1, &tau1_inv)?;
    let queue2 = solve_queue(&y1.sum(f2), p.mu2)?;
    Ok(NetworkTrace {
        params: *p,
        f1: f1.clone(),
        f2: f2.clone(),
        queue1,
        queue2,
        tau1_inv: Some(tau1_inv),
        route: Route::HasChain,
    })
}

/// Tandem with a common route: a single queue of rate `min(mu1, mu2)`.
pub fn compose_tandem(f1: &Curve, f2: &Curve, p: &GameParams) -> Result<NetworkTrace, ModelError> {
    expect_topology(p, Topology::TandemCommon)?;
    p.validate()?;
    common_trace(f1, f2, p, p.mu1.min(p.mu2))
}

/// Two independent single-class queues.
pub fn compose_parallel(f1: &Curve, f2: &Curve, p: &GameParams) -> Result<NetworkTrace, ModelError> {
    expect_topology(p, Topology::Parallel)?;
    p.validate()?;
    let queue1 = solve_queue(f1, p.mu1)?;
    let queue2 = solve_queue(f2, p.mu2)?;
    Ok(NetworkTrace {
        params: *p,
        f1: f1.clone(),
        f2: f2.clone(),
        queue1,
        queue2,
        tau1_inv: None,
        route: Route::Independent,
    })
}

/// Dispatches on the topology in `p`.
pub fn compose(f1: &Curve, f2: &Curve, p: &GameParams) -> Result<NetworkTrace, ModelError> {
    match p.topology {
        Topology::SingleQueue => {
            p.validate()?;
            common_trace(f1, f2, p, p.mu1)
        }
        Topology::TandemCommon => compose_tandem(f1, f2, p),
        Topology::Parallel => compose_parallel(f1, f2, p),
        Topology::Hds => compose_hds(f1, f2, p),
        Topology::Has => compose_has(f1, f2, p),
    }
}

impl NetworkTrace {
    /// Waiting time through the network for a class-`i` user arriving at `t`.
    pub fn class_wait(&self, class: Class, t: f64) -> f64 {
        match (self.route, class) {
            (Route::Common, _) | (Route::Independent, Class::One) | (Route::HdsChain, Class::One) => {
                self.queue1.wait(t)
            }
            (Route::Independent, Class::Two) | (Route::HasChain, Class::Two) => self.queue2.wait(t),
            (Route::HdsChain, Class::Two) | (Route::HasChain, Class::One) => {
                let w1 = self.queue1.wait(t);
                w1 + self.queue2.wait(t + w1)
            }
        }
    }

    /// Departure time from the network for a class-`i` user arriving at `t`.
    pub fn class_departure(&self, class: Class, t: f64) -> f64 {
        t + self.class_wait(class, t)
    }

    /// Normalized cost `gamma_i * W + (1 - gamma_i) * tau`.
    pub fn class_cost(&self, class: Class, t: f64) -> f64 {
        let gamma = self.params.gamma(class);
        let w = self.class_wait(class, t);
        gamma * w + (1.0 - gamma) * (t + w)
    }

    pub fn class_profile(&self, class: Class) -> &Curve {
        match class {
            Class::One => &self.f1,
            Class::Two => &self.f2,
        }
    }

    pub fn class_support(&self, class: Class) -> Support {
        self.class_profile(class).support()
    }

    /// Every time at which some trace curve has a breakpoint, including the
    /// preimages (under queue 1's departure map) of queue 2's breakpoints.
    /// Between consecutive critical times all per-class cost functions are
    /// linear.
    pub fn critical_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = Vec::new();
        let mut push_curve = |c: &Curve| times.extend(c.knots().iter().map(|k| k.t));
        push_curve(&self.f1);
        push_curve(&self.f2);
        push_curve(&self.queue1.arrivals);
        push_curve(&self.queue1.q);
        push_curve(&self.queue2.arrivals);
        push_curve(&self.queue2.q);
        if let Some(inv) = &self.tau1_inv {
            for k in self.queue2.q.knots() {
                times.push(inv.eval(k.t));
                times.push(inv.eval_left(k.t));
            }
        }
        times.retain(|t| t.is_finite());
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        times
    }
}

/// Free-function form of [`NetworkTrace::class_cost`].
pub fn class_cost(trace: &NetworkTrace, class: Class, t: f64) -> f64 {
    trace.class_cost(class, t)
}
