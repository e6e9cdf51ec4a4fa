//! Shared test support: an independent discrete-time queue simulator and
//! seeded parameter samplers for every closed-form regime.

use eap_core::network::{GameParams, Topology};
use eap_core::profile::Curve;
use eap_core::solver::RegimeTag;
use rand::Rng;

/// Discrete-time single-queue recursion, independent of the exact engine:
/// `q_{k+1} = max(q_k + inflow - mu * service_time, 0)` with the service
/// clock starting at zero. Returns `(t, q)` samples on the grid.
pub fn simulate_queue(a: &Curve, mu: f64, dt: f64, t_lo: f64, t_hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut q: f64 = a.eval(t_lo);
    let mut t = t_lo;
    out.push((t, q));
    while t < t_hi {
        let t2 = t + dt;
        let inflow = a.eval(t2) - a.eval(t);
        let service = mu * (t2.max(0.0) - t.max(0.0));
        q = (q + inflow - service).max(0.0);
        out.push((t2, q));
        t = t2;
    }
    out
}

/// Random continuous piecewise-linear arrival curve (bursts of arbitrary
/// rate separated by quiet gaps).
pub fn random_arrivals(rng: &mut impl Rng) -> Curve {
    let pieces = rng.random_range(1..5usize);
    let mut spans = Vec::with_capacity(pieces);
    let mut t = rng.random_range(-2.0..0.0);
    for _ in 0..pieces {
        let lo = t + rng.random_range(0.0..1.5);
        let hi = lo + rng.random_range(0.1..2.5);
        spans.push((lo, hi, rng.random_range(0.1..4.0)));
        t = hi;
    }
    Curve::from_rate_spans(&spans).unwrap()
}

fn interp(lo: f64, hi: f64, v: f64) -> f64 {
    lo + v * (hi - lo)
}

/// Draws parameters that land in the given regime. Panics (in tests) if the
/// construction fails to classify as requested.
pub fn sample_params(tag: RegimeTag, rng: &mut impl Rng) -> GameParams {
    let p = sample_params_inner(tag, rng);
    let got = eap_core::solver::classify(&p).unwrap();
    assert_eq!(got, tag, "sampler for {tag} produced {got} at {p:?}");
    p
}

fn sample_params_inner(tag: RegimeTag, rng: &mut impl Rng) -> GameParams {
    let mass = |rng: &mut dyn rand::RngCore| -> f64 { rng.random_range(0.2..3.0) };
    match tag {
        RegimeTag::Sq => GameParams::new(
            Topology::SingleQueue,
            rng.random_range(0.4..3.0),
            1.0,
            mass(rng),
            mass(rng),
            rng.random_range(0.08..0.9),
            rng.random_range(0.08..0.9),
        )
        .unwrap(),
        RegimeTag::HdsReduce => {
            let mu1 = rng.random_range(0.4..2.0);
            let mu2 = mu1 * rng.random_range(1.0..2.5);
            GameParams::new(
                Topology::Hds,
                mu1,
                mu2,
                mass(rng),
                mass(rng),
                rng.random_range(0.08..0.9),
                rng.random_range(0.08..0.9),
            )
            .unwrap()
        }
        RegimeTag::Hds1 => {
            let mu2 = rng.random_range(0.4..2.0);
            let mu1 = mu2 * rng.random_range(1.05..3.0);
            let g2 = rng.random_range(0.2..0.92);
            let g1 = (mu2 / mu1) * g2 * rng.random_range(0.1..1.0);
            GameParams::new(Topology::Hds, mu1, mu2, mass(rng), mass(rng), g1, g2).unwrap()
        }
        RegimeTag::Hds2a | RegimeTag::Hds2b => {
            let mu2 = rng.random_range(0.4..2.0);
            let mu1 = mu2 * rng.random_range(1.05..3.0);
            let g2 = rng.random_range(0.3..0.92);
            let g1 = interp((mu2 / mu1) * g2, g2, rng.random_range(0.1..0.9));
            let l2 = mass(rng);
            let thr = (1.0 - g2) / (1.0 - g1) * (mu1 * g1 / (mu2 * g2) - 1.0) * l2;
            let l1 = if tag == RegimeTag::Hds2a {
                thr + rng.random_range(0.0..2.0)
            } else {
                thr * rng.random_range(0.05..0.95)
            };
            GameParams::new(Topology::Hds, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::Hds3a | RegimeTag::Hds3b => {
            let mu2 = rng.random_range(0.4..2.0);
            let mu1 = mu2 * rng.random_range(1.05..3.0);
            let g2 = rng.random_range(0.08..0.8);
            let g1 = rng.random_range(f64::min(g2 + 0.05, 0.94)..0.95);
            let l2 = mass(rng);
            let thr = (mu1 / mu2 - 1.0) * l2;
            let l1 = if tag == RegimeTag::Hds3a {
                thr + rng.random_range(0.0..2.0)
            } else {
                thr * rng.random_range(0.05..0.95)
            };
            GameParams::new(Topology::Hds, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HdsEq1 | RegimeTag::HdsEq2 => {
            let mu2 = rng.random_range(0.4..2.0);
            let mu1 = mu2 * rng.random_range(1.05..3.0);
            let g = rng.random_range(0.1..0.9);
            let l2 = mass(rng);
            let thr = (mu1 / mu2 - 1.0) * l2;
            let l1 = if tag == RegimeTag::HdsEq1 {
                thr * rng.random_range(0.05..0.95)
            } else {
                thr + rng.random_range(0.0..2.0)
            };
            GameParams::new(Topology::Hds, mu1, mu2, l1, l2, g, g).unwrap()
        }
        RegimeTag::HasI1a | RegimeTag::HasI1b => {
            let mu2 = rng.random_range(0.8..3.0);
            let g2 = rng.random_range(0.3..0.9);
            let mu1 = mu2 * g2 * rng.random_range(0.15..0.95);
            let g1 = rng.random_range(f64::min(g2 + 0.02, 0.95)..0.97);
            let l2 = mass(rng);
            let thr = (1.0 - g2) / (1.0 - g1) * mu1 / (mu2 - mu1) * l2;
            let l1 = if tag == RegimeTag::HasI1a {
                thr + rng.random_range(0.0..2.0)
            } else {
                thr * rng.random_range(0.05..0.95)
            };
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HasI2a | RegimeTag::HasI2b => {
            let mu2 = rng.random_range(0.8..3.0);
            let g2 = rng.random_range(0.3..0.9);
            let mu1 = mu2 * g2 * rng.random_range(0.15..0.95);
            let g1 = rng.random_range(0.05..f64::max(g2 - 0.02, 0.06));
            let l2 = mass(rng);
            let thr = mu1 / (mu2 - mu1) * l2;
            let l1 = if tag == RegimeTag::HasI2a {
                thr + rng.random_range(0.0..2.0)
            } else {
                thr * rng.random_range(0.05..0.95)
            };
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HasII1a | RegimeTag::HasII1b => {
            let mu2 = rng.random_range(0.5..3.0);
            let g2 = rng.random_range(0.08..0.7);
            let g1 = rng.random_range(f64::min(g2 + 0.05, 0.94)..0.95);
            let mu1 = mu2 * interp(g2, g1, rng.random_range(0.0..0.95));
            let l2 = mass(rng);
            let thr = mu1 / ((1.0 - g1) * mu2) * l2;
            let l1 = if tag == RegimeTag::HasII1a {
                thr + rng.random_range(0.0..2.0)
            } else {
                thr * rng.random_range(0.05..0.95)
            };
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HasII2a | RegimeTag::HasII3a => {
            let mu2 = rng.random_range(0.5..3.0);
            let (g1, g2) = if tag == RegimeTag::HasII2a {
                let g2 = rng.random_range(0.08..0.7);
                (rng.random_range(f64::min(g2 + 0.05, 0.94)..0.95), g2)
            } else {
                let g1 = rng.random_range(0.08..0.7);
                let g2 = rng.random_range(f64::min(g1 + 0.05, 0.94)..0.95);
                (g1, g2)
            };
            let g_hi = g1.max(g2);
            let mu1 = mu2 * interp(g_hi, 1.0, rng.random_range(0.0..0.9));
            let l2 = mass(rng);
            let l1 = l2 / (mu2 / mu1 - 1.0) * rng.random_range(1.02..3.0);
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HasII2b | RegimeTag::HasII3b => {
            let mu2 = rng.random_range(0.5..3.0);
            let (g1, g2) = if tag == RegimeTag::HasII2b {
                let g2 = rng.random_range(0.08..0.7);
                (rng.random_range(f64::min(g2 + 0.05, 0.94)..0.95), g2)
            } else {
                let g1 = rng.random_range(0.08..0.7);
                let g2 = rng.random_range(f64::min(g1 + 0.05, 0.94)..0.95);
                (g1, g2)
            };
            let g_hi = g1.max(g2);
            let mu1 = mu2 * interp(g_hi, 1.4, rng.random_range(0.0..1.0));
            let l1 = mass(rng);
            let lo = ((mu2 / mu1 - 1.0) * l1).max(0.0);
            let hi = (1.0 / g_hi - 1.0) * l1;
            let lo = lo.max(0.02 * hi);
            let l2 = interp(lo, hi, rng.random_range(0.02..0.98));
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HasII2c | RegimeTag::HasII3c => {
            let mu2 = rng.random_range(0.5..3.0);
            let (g1, g2) = if tag == RegimeTag::HasII2c {
                let g2 = rng.random_range(0.08..0.7);
                (rng.random_range(f64::min(g2 + 0.05, 0.94)..0.95), g2)
            } else {
                let g1 = rng.random_range(0.08..0.7);
                let g2 = rng.random_range(f64::min(g1 + 0.05, 0.94)..0.95);
                (g1, g2)
            };
            let g_hi = g1.max(g2);
            let mu1 = mu2 * interp(g_hi, 1.4, rng.random_range(0.0..1.0));
            let l1 = mass(rng);
            let l2 = (1.0 / g_hi - 1.0) * l1 + rng.random_range(0.02..2.0);
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g1, g2).unwrap()
        }
        RegimeTag::HasEqI1 | RegimeTag::HasEqI2 => {
            let mu2 = rng.random_range(0.8..3.0);
            let g = rng.random_range(0.3..0.9);
            let mu1 = mu2 * g * rng.random_range(0.15..0.95);
            let l2 = mass(rng);
            let thr = mu1 / (mu2 - mu1) * l2;
            let l1 = if tag == RegimeTag::HasEqI1 {
                thr * rng.random_range(1.02..3.0)
            } else {
                thr * rng.random_range(0.05..1.0)
            };
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g, g).unwrap()
        }
        RegimeTag::HasEqII1 => {
            let mu2 = rng.random_range(0.5..3.0);
            let g = rng.random_range(0.08..0.9);
            let mu1 = mu2 * interp(g, 1.0, rng.random_range(0.0..0.9));
            let l2 = mass(rng);
            let l1 = l2 / (mu2 / mu1 - 1.0) * rng.random_range(1.02..3.0);
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g, g).unwrap()
        }
        RegimeTag::HasEqII2 => {
            let mu2 = rng.random_range(0.5..3.0);
            let g = rng.random_range(0.08..0.9);
            let mu1 = mu2 * interp(g, 1.4, rng.random_range(0.0..1.0));
            let l1 = mass(rng);
            let lo = ((mu2 / mu1 - 1.0) * l1).max(0.0);
            let hi = (1.0 / g - 1.0) * l1;
            let lo = lo.max(0.02 * hi);
            let l2 = interp(lo, hi, rng.random_range(0.02..0.98));
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g, g).unwrap()
        }
        RegimeTag::HasEqII3 => {
            let mu2 = rng.random_range(0.5..3.0);
            let g = rng.random_range(0.08..0.9);
            let mu1 = mu2 * interp(g, 1.4, rng.random_range(0.0..1.0));
            let l1 = mass(rng);
            let l2 = (1.0 / g - 1.0) * l1 + rng.random_range(0.02..2.0);
            GameParams::new(Topology::Has, mu1, mu2, l1, l2, g, g).unwrap()
        }
    }
}

/// All regimes with a unique equilibrium profile.
pub fn unique_regime_tags() -> Vec<RegimeTag> {
    RegimeTag::ALL.iter().copied().filter(|t| !t.is_convex()).collect()
}
