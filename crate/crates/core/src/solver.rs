//! Closed-form equilibrium arrival profiles (EAPs).
//!
//! An EAP is a joint cumulative arrival profile under which each class's
//! cost is constant on its own support and no other arrival time is
//! cheaper. For each topology the parameter space splits into finitely many
//! regimes; [`classify`] picks the regime and [`solve`] emits the profile in
//! closed form. Equal cost preferences can make the equilibrium non-unique,
//! in which case the solver returns a [`ConvexSetDescriptor`] together with
//! the two extreme profiles that bound the set.
//!
//! All case conditions use the inclusive/exclusive inequalities of the
//! regime definitions verbatim, so every parameter point lands in exactly
//! one regime. Equal preferences are detected by exact equality of the two
//! gamma values; nearby values stay in the unequal-preference branch.

use crate::error::ModelError;
use crate::network::{compose, GameParams, Topology};
use crate::profile::Curve;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Parametric regime of the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    #[serde(rename = "SQ")]
    Sq,
    #[serde(rename = "HDS-Reduce")]
    HdsReduce,
    #[serde(rename = "HDS-1")]
    Hds1,
    #[serde(rename = "HDS-2a")]
    Hds2a,
    #[serde(rename = "HDS-2b")]
    Hds2b,
    #[serde(rename = "HDS-3a")]
    Hds3a,
    #[serde(rename = "HDS-3b")]
    Hds3b,
    #[serde(rename = "HDS-EQ-1")]
    HdsEq1,
    #[serde(rename = "HDS-EQ-2")]
    HdsEq2,
    #[serde(rename = "HAS-I-1a")]
    HasI1a,
    #[serde(rename = "HAS-I-1b")]
    HasI1b,
    #[serde(rename = "HAS-I-2a")]
    HasI2a,
    #[serde(rename = "HAS-I-2b")]
    HasI2b,
    #[serde(rename = "HAS-II-1a")]
    HasII1a,
    #[serde(rename = "HAS-II-1b")]
    HasII1b,
    #[serde(rename = "HAS-II-2a")]
    HasII2a,
    #[serde(rename = "HAS-II-2b")]
    HasII2b,
    #[serde(rename = "HAS-II-2c")]
    HasII2c,
    #[serde(rename = "HAS-II-3a")]
    HasII3a,
    #[serde(rename = "HAS-II-3b")]
    HasII3b,
    #[serde(rename = "HAS-II-3c")]
    HasII3c,
    #[serde(rename = "HAS-EQ-I-1")]
    HasEqI1,
    #[serde(rename = "HAS-EQ-I-2")]
    HasEqI2,
    #[serde(rename = "HAS-EQ-II-1")]
    HasEqII1,
    #[serde(rename = "HAS-EQ-II-2")]
    HasEqII2,
    #[serde(rename = "HAS-EQ-II-3")]
    HasEqII3,
}

impl RegimeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeTag::Sq => "SQ",
            RegimeTag::HdsReduce => "HDS-Reduce",
            RegimeTag::Hds1 => "HDS-1",
            RegimeTag::Hds2a => "HDS-2a",
            RegimeTag::Hds2b => "HDS-2b",
            RegimeTag::Hds3a => "HDS-3a",
            RegimeTag::Hds3b => "HDS-3b",
            RegimeTag::HdsEq1 => "HDS-EQ-1",
            RegimeTag::HdsEq2 => "HDS-EQ-2",
            RegimeTag::HasI1a => "HAS-I-1a",
            RegimeTag::HasI1b => "HAS-I-1b",
            RegimeTag::HasI2a => "HAS-I-2a",
            RegimeTag::HasI2b => "HAS-I-2b",
            RegimeTag::HasII1a => "HAS-II-1a",
            RegimeTag::HasII1b => "HAS-II-1b",
            RegimeTag::HasII2a => "HAS-II-2a",
            RegimeTag::HasII2b => "HAS-II-2b",
            RegimeTag::HasII2c => "HAS-II-2c",
            RegimeTag::HasII3a => "HAS-II-3a",
            RegimeTag::HasII3b => "HAS-II-3b",
            RegimeTag::HasII3c => "HAS-II-3c",
            RegimeTag::HasEqI1 => "HAS-EQ-I-1",
            RegimeTag::HasEqI2 => "HAS-EQ-I-2",
            RegimeTag::HasEqII1 => "HAS-EQ-II-1",
            RegimeTag::HasEqII2 => "HAS-EQ-II-2",
            RegimeTag::HasEqII3 => "HAS-EQ-II-3",
        }
    }

    /// Tags whose equilibrium is a convex set rather than a single profile.
    pub fn is_convex(self) -> bool {
        matches!(self, RegimeTag::HdsEq2 | RegimeTag::HasEqI2 | RegimeTag::HasEqII3)
    }

    pub const ALL: [RegimeTag; 26] = [
        RegimeTag::Sq,
        RegimeTag::HdsReduce,
        RegimeTag::Hds1,
        RegimeTag::Hds2a,
        RegimeTag::Hds2b,
        RegimeTag::Hds3a,
        RegimeTag::Hds3b,
        RegimeTag::HdsEq1,
        RegimeTag::HdsEq2,
        RegimeTag::HasI1a,
        RegimeTag::HasI1b,
        RegimeTag::HasI2a,
        RegimeTag::HasI2b,
        RegimeTag::HasII1a,
        RegimeTag::HasII1b,
        RegimeTag::HasII2a,
        RegimeTag::HasII2b,
        RegimeTag::HasII2c,
        RegimeTag::HasII3a,
        RegimeTag::HasII3b,
        RegimeTag::HasII3c,
        RegimeTag::HasEqI1,
        RegimeTag::HasEqI2,
        RegimeTag::HasEqII1,
        RegimeTag::HasEqII2,
        RegimeTag::HasEqII3,
    ];
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegimeTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown regime tag {s:?}"))
    }
}

/// Support endpoints of the equilibrium profiles.
///
/// `t1a`/`t1f` bound class 1, `t2a`/`t2f` class 2 (for a zero-mass class the
/// pair degenerates to zero). `ta`/`tf` bound the union support where a
/// regime defines it, and `t_empty` is the first time queue 2 drains in the
/// regimes whose profile shape depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBoundaries {
    pub t1a: f64,
    pub t1f: f64,
    pub t2a: f64,
    pub t2f: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_empty: Option<f64>,
}

impl SupportBoundaries {
    fn plain(t1a: f64, t1f: f64, t2a: f64, t2f: f64) -> Self {
        SupportBoundaries { t1a, t1f, t2a, t2f, ta: None, tf: None, t_empty: None }
    }
}

/// One joint arrival profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointProfile {
    pub f1: Curve,
    pub f2: Curve,
}

impl JointProfile {
    pub fn new(f1: Curve, f2: Curve) -> Self {
        JointProfile { f1, f2 }
    }
}

/// Constraint system describing a convex set of equilibria.
///
/// On `[window.0, free_from]` class 1 is silent and class 2 arrives at
/// exactly `prezero_class2_rate`. On `[free_from, window.1]` the joint rate
/// is pinned to `joint_rate` while each class rate stays within its cap;
/// terminal cumulative masses are fixed. Any profile satisfying all of this
/// is an equilibrium, and all of them share one social cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSetDescriptor {
    pub window: (f64, f64),
    pub free_from: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prezero_class2_rate: Option<f64>,
    pub joint_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class1_rate_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class2_rate_cap: Option<f64>,
    pub masses: (f64, f64),
}

impl ConvexSetDescriptor {
    /// Admissible class-2 rate range on the free region.
    pub fn class2_rate_bounds(&self) -> (f64, f64) {
        let lo = match self.class1_rate_cap {
            Some(cap) => (self.joint_rate - cap).max(0.0),
            None => 0.0,
        };
        let hi = match self.class2_rate_cap {
            Some(cap) => cap.min(self.joint_rate),
            None => self.joint_rate,
        };
        (lo, hi)
    }

    /// Class-2 mass that must arrive inside the free region.
    pub fn free_class2_mass(&self) -> f64 {
        let pre = self.prezero_class2_rate.unwrap_or(0.0) * (self.free_from - self.window.0);
        self.masses.1 - pre
    }

    /// Checks whether a concrete profile satisfies every constraint of the
    /// set, up to `tol` on rates and masses.
    pub fn contains(&self, profile: &JointProfile, tol: f64) -> bool {
        let (w0, w1) = self.window;
        if (profile.f1.total_increase() - self.masses.0).abs() > tol
            || (profile.f2.total_increase() - self.masses.1).abs() > tol
        {
            return false;
        }
        // mass outside the window
        if profile.f1.eval(w0 - tol) > tol
            || profile.f2.eval(w0 - tol) > tol
            || (profile.f1.total_increase() - profile.f1.eval(w1 + tol)).abs() > tol
            || (profile.f2.total_increase() - profile.f2.eval(w1 + tol)).abs() > tol
        {
            return false;
        }
        let mut grid: Vec<f64> = profile
            .f1
            .knots()
            .iter()
            .chain(profile.f2.knots().iter())
            .map(|k| k.t)
            .filter(|&t| t >= w0 - tol && t <= w1 + tol)
            .collect();
        grid.push(w0);
        grid.push(self.free_from);
        grid.push(w1);
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        let (lo2, hi2) = self.class2_rate_bounds();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-10 {
                continue;
            }
            let len = b - a;
            let r1 = (profile.f1.eval_left(b) - profile.f1.eval(a)) / len;
            let r2 = (profile.f2.eval_left(b) - profile.f2.eval(a)) / len;
            if r1 < -tol || r2 < -tol {
                return false;
            }
            if b <= self.free_from + 1e-12 {
                if r1 > tol {
                    return false;
                }
                if let Some(pre) = self.prezero_class2_rate {
                    if (r2 - pre).abs() > tol {
                        return false;
                    }
                }
            } else {
                if (r1 + r2 - self.joint_rate).abs() > tol {
                    return false;
                }
                if r2 < lo2 - tol || r2 > hi2 + tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Solver output: regime, boundaries, and either the unique profile or the
/// convex-set description with its two extreme members.
#[derive(Debug, Clone, PartialEq)]
pub struct EapSolution {
    pub tag: RegimeTag,
    pub boundaries: SupportBoundaries,
    pub kind: EapKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EapKind {
    Unique(JointProfile),
    Convex { descriptor: ConvexSetDescriptor, extremes: Box<[JointProfile; 2]> },
}

impl EapSolution {
    pub fn unique_profile(&self) -> Option<&JointProfile> {
        match &self.kind {
            EapKind::Unique(p) => Some(p),
            EapKind::Convex { .. } => None,
        }
    }

    pub fn convex_set(&self) -> Option<&ConvexSetDescriptor> {
        match &self.kind {
            EapKind::Unique(_) => None,
            EapKind::Convex { descriptor, .. } => Some(descriptor),
        }
    }

    /// Profiles a verifier should check: the unique one, or both extremes.
    pub fn verification_profiles(&self) -> Vec<&JointProfile> {
        match &self.kind {
            EapKind::Unique(p) => vec![p],
            EapKind::Convex { extremes, .. } => vec![&extremes[0], &extremes[1]],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EapSolutionRepr {
    tag: RegimeTag,
    boundaries: SupportBoundaries,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<JointProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convex_set: Option<ConvexSetDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extreme_profiles: Option<Vec<JointProfile>>,
}

impl Serialize for EapSolution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = match &self.kind {
            EapKind::Unique(p) => EapSolutionRepr {
                tag: self.tag,
                boundaries: self.boundaries,
                profile: Some(p.clone()),
                convex_set: None,
                extreme_profiles: None,
            },
            EapKind::Convex { descriptor, extremes } => EapSolutionRepr {
                tag: self.tag,
                boundaries: self.boundaries,
                profile: None,
                convex_set: Some(descriptor.clone()),
                extreme_profiles: Some(extremes.to_vec()),
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EapSolution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = EapSolutionRepr::deserialize(deserializer)?;
        let kind = match (repr.profile, repr.convex_set, repr.extreme_profiles) {
            (Some(p), None, None) => EapKind::Unique(p),
            (None, Some(d), Some(e)) if e.len() == 2 => {
                let mut it = e.into_iter();
                let a = it.next().unwrap();
                let b = it.next().unwrap();
                EapKind::Convex { descriptor: d, extremes: Box::new([a, b]) }
            }
            _ => return Err(D::Error::custom("solution needs a profile or a convex set")),
        };
        Ok(EapSolution { tag: repr.tag, boundaries: repr.boundaries, kind })
    }
}

fn unique(tag: RegimeTag, boundaries: SupportBoundaries, f1: Curve, f2: Curve) -> EapSolution {
    EapSolution { tag, boundaries, kind: EapKind::Unique(JointProfile::new(f1, f2)) }
}

// --- classification -------------------------------------------------------

/// Regime of the heterogeneous-departure system.
pub fn classify_hds(p: &GameParams) -> Result<RegimeTag, ModelError> {
    p.validate()?;
    if p.topology != Topology::Hds {
        return Err(ModelError::TopologyMismatch { expected: Topology::Hds, got: p.topology });
    }
    if p.lambda1 == 0.0 || p.lambda2 == 0.0 {
        return Ok(RegimeTag::Sq);
    }
    if p.mu1 <= p.mu2 {
        return Ok(RegimeTag::HdsReduce);
    }
    let (mu1, mu2, g1, g2, l1, l2) = (p.mu1, p.mu2, p.gamma1, p.gamma2, p.lambda1, p.lambda2);
    if g1 == g2 {
        return Ok(if l1 < (mu1 / mu2 - 1.0) * l2 { RegimeTag::HdsEq1 } else { RegimeTag::HdsEq2 });
    }
    if g1 <= (mu2 / mu1) * g2 {
        Ok(RegimeTag::Hds1)
    } else if g1 < g2 {
        let threshold = (1.0 - g2) / (1.0 - g1) * (mu1 * g1 / (mu2 * g2) - 1.0) * l2;
        Ok(if l1 >= threshold { RegimeTag::Hds2a } else { RegimeTag::Hds2b })
    } else {
        Ok(if l1 >= (mu1 / mu2 - 1.0) * l2 { RegimeTag::Hds3a } else { RegimeTag::Hds3b })
    }
}

/// Regime of the heterogeneous-arrival system.
pub fn classify_has(p: &GameParams) -> Result<RegimeTag, ModelError> {
    p.validate()?;
    if p.topology != Topology::Has {
        return Err(ModelError::TopologyMismatch { expected: Topology::Has, got: p.topology });
    }
    if p.lambda1 == 0.0 || p.lambda2 == 0.0 {
        return Ok(RegimeTag::Sq);
    }
    let (mu1, mu2, g1, g2, l1, l2) = (p.mu1, p.mu2, p.gamma1, p.gamma2, p.lambda1, p.lambda2);
    if g1 == g2 {
        let g = g1;
        if mu1 < mu2 * g {
            return Ok(if l1 > mu1 / (mu2 - mu1) * l2 {
                RegimeTag::HasEqI1
            } else {
                RegimeTag::HasEqI2
            });
        }
        return Ok(if (mu2 / mu1 - 1.0) * l1 > l2 {
            RegimeTag::HasEqII1
        } else if l2 > (1.0 / g - 1.0) * l1 {
            RegimeTag::HasEqII3
        } else {
            RegimeTag::HasEqII2
        });
    }
    if mu1 < mu2 * g2 {
        // regime I: queue 2 mixes the two classes
        if g1 > g2 {
            let threshold = (1.0 - g2) / (1.0 - g1) * mu1 / (mu2 - mu1) * l2;
            Ok(if l1 >= threshold { RegimeTag::HasI1a } else { RegimeTag::HasI1b })
        } else {
            Ok(if l1 >= mu1 / (mu2 - mu1) * l2 { RegimeTag::HasI2a } else { RegimeTag::HasI2b })
        }
    } else {
        // regime II: queue 2 serves the classes over disjoint times
        if g1 > g2 {
            if mu2 * g1 > mu1 {
                let threshold = mu1 / ((1.0 - g1) * mu2) * l2;
                Ok(if l1 >= threshold { RegimeTag::HasII1a } else { RegimeTag::HasII1b })
            } else if (mu2 / mu1 - 1.0) * l1 > l2 {
                Ok(RegimeTag::HasII2a)
            } else if l2 > (1.0 / g1 - 1.0) * l1 {
                Ok(RegimeTag::HasII2c)
            } else {
                Ok(RegimeTag::HasII2b)
            }
        } else if (mu2 / mu1 - 1.0) * l1 > l2 {
            Ok(RegimeTag::HasII3a)
        } else if l2 > (1.0 / g2 - 1.0) * l1 {
            Ok(RegimeTag::HasII3c)
        } else {
            Ok(RegimeTag::HasII3b)
        }
    }
}

/// Regime for any topology.
pub fn classify(p: &GameParams) -> Result<RegimeTag, ModelError> {
    match p.topology {
        Topology::Hds => classify_hds(p),
        Topology::Has => classify_has(p),
        _ => {
            p.validate()?;
            Ok(RegimeTag::Sq)
        }
    }
}

// --- single queue ---------------------------------------------------------

/// Closed form for two classes at one queue of rate `mu`: the class with
/// the smaller preference arrives first at rate `mu * gamma_min` over a
/// contiguous interval, the other follows at `mu * gamma_max`. Equal
/// preferences merge into one stream, split here in proportion to the class
/// masses.
fn single_queue_profiles(
    mu: f64,
    l1: f64,
    l2: f64,
    g1: f64,
    g2: f64,
) -> (JointProfile, SupportBoundaries) {
    if l1 == 0.0 && l2 == 0.0 {
        return (
            JointProfile::new(Curve::zero(), Curve::zero()),
            SupportBoundaries::plain(0.0, 0.0, 0.0, 0.0),
        );
    }
    if l2 == 0.0 {
        let ta = -(1.0 / g1 - 1.0) * l1 / mu;
        let tf = l1 / mu;
        let f1 = Curve::ramp(ta, tf, mu * g1).expect("valid span");
        return (
            JointProfile::new(f1, Curve::zero()),
            SupportBoundaries::plain(ta, tf, 0.0, 0.0),
        );
    }
    if l1 == 0.0 {
        let ta = -(1.0 / g2 - 1.0) * l2 / mu;
        let tf = l2 / mu;
        let f2 = Curve::ramp(ta, tf, mu * g2).expect("valid span");
        return (
            JointProfile::new(Curve::zero(), f2),
            SupportBoundaries::plain(0.0, 0.0, ta, tf),
        );
    }
    if g1 == g2 {
        let g = g1;
        let total = l1 + l2;
        let ta = -(1.0 / g - 1.0) * total / mu;
        let tf = total / mu;
        let f1 = Curve::ramp(ta, tf, mu * g * l1 / total).expect("valid span");
        let f2 = Curve::ramp(ta, tf, mu * g * l2 / total).expect("valid span");
        let mut b = SupportBoundaries::plain(ta, tf, ta, tf);
        b.ta = Some(ta);
        b.tf = Some(tf);
        return (JointProfile::new(f1, f2), b);
    }
    // order by preference
    let (g_lo, l_lo, g_hi, l_hi) = if g1 < g2 { (g1, l1, g2, l2) } else { (g2, l2, g1, l1) };
    let hi_f = (l1 + l2) / mu;
    let hi_a = l_lo / mu - (1.0 / g_hi - 1.0) * l_hi / mu;
    let lo_a = -(1.0 / g_lo - 1.0) * l_lo / mu - (1.0 / g_hi - 1.0) * l_hi / mu;
    let lo_f = hi_a;
    let f_lo = Curve::ramp(lo_a, lo_f, mu * g_lo).expect("valid span");
    let f_hi = Curve::ramp(hi_a, hi_f, mu * g_hi).expect("valid span");
    if g1 < g2 {
        (JointProfile::new(f_lo, f_hi), SupportBoundaries::plain(lo_a, lo_f, hi_a, hi_f))
    } else {
        (JointProfile::new(f_hi, f_lo), SupportBoundaries::plain(hi_a, hi_f, lo_a, lo_f))
    }
}

/// Both classes at a single queue of rate `mu1`.
pub fn solve_single_queue(p: &GameParams) -> Result<EapSolution, ModelError> {
    p.validate()?;
    let (profile, boundaries) =
        single_queue_profiles(p.mu1, p.lambda1, p.lambda2, p.gamma1, p.gamma2);
    Ok(EapSolution { tag: RegimeTag::Sq, boundaries, kind: EapKind::Unique(profile) })
}

// --- HDS ------------------------------------------------------------------

/// Unique EAP or convex set for the heterogeneous-departure system.
pub fn solve_hds(p: &GameParams) -> Result<EapSolution, ModelError> {
    let tag = classify_hds(p)?;
    let (mu1, mu2, g1, g2, l1, l2) = (p.mu1, p.mu2, p.gamma1, p.gamma2, p.lambda1, p.lambda2);
    match tag {
        RegimeTag::Sq => {
            // one class is empty; class 1 sees queue 1 only, class 2 the tandem
            let mu_eff = if l2 == 0.0 { mu1 } else { mu1.min(mu2) };
            let (profile, boundaries) = single_queue_profiles(mu_eff, l1, l2, g1, g2);
            Ok(EapSolution { tag, boundaries, kind: EapKind::Unique(profile) })
        }
        RegimeTag::HdsReduce => {
            let (profile, boundaries) = single_queue_profiles(mu1, l1, l2, g1, g2);
            Ok(EapSolution { tag, boundaries, kind: EapKind::Unique(profile) })
        }
        RegimeTag::Hds1 => {
            let t1a = -(1.0 / g1 - 1.0) * l1 / mu1 - (1.0 / g2 - 1.0) * l2 / mu2;
            let t1f = l1 / mu1 - (1.0 / g2 - 1.0) * l2 / mu2;
            let t2a = t1f;
            let t2f = l1 / mu1 + l2 / mu2;
            let f1 = Curve::ramp(t1a, t1f, mu1 * g1)?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::Hds2a => {
            let k = (1.0 - g2) / (1.0 - g1);
            let t1a = -(1.0 - g1) / (mu1 * g1) * (l1 + k * l2);
            let t1f = (l1 + k * l2) / mu1;
            let t2a = (l1 - (mu1 - mu2 * g2) / (mu2 * g2) * k * l2) / mu1;
            let t2f =
                (l1 + (mu1 * (g2 - g1) + mu2 * g2 * (1.0 - g2)) / (mu2 * g2 * (1.0 - g1)) * l2)
                    / mu1;
            let f1 = Curve::from_rate_spans(&[
                (t1a, t2a, mu1 * g1),
                (t2a, t1f, mu1 * g1 - mu2 * g2),
            ])?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::Hds2b | RegimeTag::Hds3b => {
            let t1a = (1.0 - g2) / (mu1 - mu2 * g2)
                * (l2 - (1.0 - g1) * mu1 / ((1.0 - g2) * (mu1 * g1 - mu2 * g2)) * l1);
            let t1f = (l1 + (1.0 - g2) * l2) / (mu1 - mu2 * g2);
            let t2a = -(1.0 - g2) / g2 * l2 / mu2;
            let t2f = l2 / mu2;
            let f1 = Curve::ramp(t1a, t1f, mu1 * g1 - mu2 * g2)?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::Hds3a => {
            let t1a = (g1 - g2) / g1 * l2 / (mu1 * g1 - mu2 * g2)
                - (1.0 - g1) / g1 * (l1 + l2) / mu1;
            let t1f = (l1 + l2) / mu1;
            let t2a = -(1.0 - g1) / g1 * l1 / mu1
                - (g1 / g2 + (1.0 - g1) * mu2 / mu1 - 1.0) * l2 / (mu2 * g1);
            let t2f = -(1.0 - g1) / g1 * l1 / mu1
                + (1.0 - (1.0 - g1) * mu2 / mu1) * l2 / (mu2 * g1);
            let f1 = Curve::from_rate_spans(&[
                (t1a, t2f, mu1 * g1 - mu2 * g2),
                (t2f, t1f, mu1 * g1),
            ])?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::HdsEq1 => {
            let g = g1;
            let t1a = (1.0 - g) / (mu1 - mu2 * g) * (l2 - mu1 / ((mu1 - mu2) * g) * l1);
            let t1f = (l1 + (1.0 - g) * l2) / (mu1 - mu2 * g);
            let ta = -(1.0 - g) / g * l2 / mu2;
            let tf = l2 / mu2;
            let f1 = Curve::ramp(t1a, t1f, (mu1 - mu2) * g)?;
            let f2 = Curve::ramp(ta, tf, mu2 * g)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, ta, tf);
            b.ta = Some(ta);
            b.tf = Some(tf);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HdsEq2 => {
            let g = g1;
            let ta = -(1.0 / g - 1.0) * (l1 + l2) / mu1;
            let tf = (l1 + l2) / mu1;
            let descriptor = ConvexSetDescriptor {
                window: (ta, tf),
                free_from: ta,
                prezero_class2_rate: None,
                joint_rate: mu1 * g,
                class1_rate_cap: None,
                class2_rate_cap: Some(mu2 * g),
                masses: (l1, l2),
            };
            // class 2 as late as possible (limit of the 2a regime) ...
            let s = tf - l2 / (mu2 * g);
            let late = JointProfile::new(
                Curve::from_rate_spans(&[(ta, s, mu1 * g), (s, tf, (mu1 - mu2) * g)])?,
                Curve::ramp(s, tf, mu2 * g)?,
            );
            // ... and as early as possible (limit of the 3a regime)
            let e = ta + l2 / (mu2 * g);
            let early = JointProfile::new(
                Curve::from_rate_spans(&[(ta, e, (mu1 - mu2) * g), (e, tf, mu1 * g)])?,
                Curve::ramp(ta, e, mu2 * g)?,
            );
            let mut b = SupportBoundaries::plain(ta, tf, ta, tf);
            b.ta = Some(ta);
            b.tf = Some(tf);
            Ok(EapSolution {
                tag,
                boundaries: b,
                kind: EapKind::Convex { descriptor, extremes: Box::new([late, early]) },
            })
        }
        _ => unreachable!("classify_hds only returns HDS tags"),
    }
}

// --- HAS ------------------------------------------------------------------

/// Class-1 profile with a rate switch at the preimage of `t_switch` under
/// queue 1's departure map: `split = t1a + slope * (t_switch - max(t1a, 0))`.
fn split_profile(
    t1a: f64,
    t1f: f64,
    rate_before: f64,
    rate_after: f64,
    t_switch: f64,
    inv_slope: f64,
) -> Result<(Curve, f64), ModelError> {
    let split = (t1a + inv_slope * (t_switch - t1a.max(0.0))).clamp(t1a, t1f);
    let c = Curve::from_rate_spans(&[(t1a, split, rate_before), (split, t1f, rate_after)])?;
    Ok((c, split))
}

/// Unique EAP or convex set for the heterogeneous-arrival system.
pub fn solve_has(p: &GameParams) -> Result<EapSolution, ModelError> {
    let tag = classify_has(p)?;
    let (mu1, mu2, g1, g2, l1, l2) = (p.mu1, p.mu2, p.gamma1, p.gamma2, p.lambda1, p.lambda2);
    match tag {
        RegimeTag::Sq => {
            // class 1 alone crosses both queues; class 2 alone sees queue 2
            let mu_eff = if l1 == 0.0 { mu2 } else { mu1.min(mu2) };
            let (profile, boundaries) = single_queue_profiles(mu_eff, l1, l2, g1, g2);
            Ok(EapSolution { tag, boundaries, kind: EapKind::Unique(profile) })
        }
        RegimeTag::HasI1a | RegimeTag::HasI2a => {
            let t1a = -(1.0 - g1) / g1 * l1 / mu1 + (1.0 - g2) / g1 * l2 / (mu2 - mu1);
            let t1f = l1 / mu1;
            let t2a = -(1.0 - g2) / g2 * l2 / (mu2 - mu1);
            let t2f = l2 / (mu2 - mu1);
            let (f1, _) = split_profile(t1a, t1f, mu1 * g1 / g2, mu1 * g1, t2f, g2 / g1)?;
            let f2 =
                Curve::from_rate_spans(&[(t2a, 0.0, mu2 * g2), (0.0, t2f, mu2 * g2 - mu1)])?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::HasI1b => {
            let t1a = (l2 - (1.0 - g1) / (1.0 - g2) * (mu2 - mu1) / mu1 * l1) / mu2;
            let t1f = (l2
                + ((g1 - g2) * mu2 + (1.0 - g1) * mu1) / ((1.0 - g2) * mu1) * l1)
                / mu2;
            let t2a = -((1.0 - g1) * l1 + (1.0 - g2) * l2) / (mu2 * g2);
            let t2f = (l2 + (1.0 - g1) / (1.0 - g2) * l1) / mu2;
            let (f1, _) = split_profile(t1a, t1f, mu1 * g1 / g2, mu1 * g1, t2f, g2 / g1)?;
            let p0 = t1a.max(0.0);
            let f2 =
                Curve::from_rate_spans(&[(t2a, p0, mu2 * g2), (p0, t2f, mu2 * g2 - mu1)])?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::HasI2b => {
            let t1a = -(g2 / g1 - 1.0) * l1 / mu1;
            let t1f = l1 / mu1;
            let t2a = -(1.0 - g2) / g2 * (l1 + l2) / mu2;
            let t2f = (l1 + l2) / mu2;
            let f1 = Curve::ramp(t1a, t1f, mu1 * g1 / g2)?;
            let f2 = Curve::from_rate_spans(&[
                (t2a, 0.0, mu2 * g2),
                (0.0, t1f, mu2 * g2 - mu1),
                (t1f, t2f, mu2 * g2),
            ])?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::HasII1a | RegimeTag::HasII2a | RegimeTag::HasII3a => {
            let t1a = l2 / (mu2 * g1) - (1.0 / g1 - 1.0) * l1 / mu1;
            let t1f = l1 / mu1;
            let t_empty = l2 / (mu2 - mu1);
            let t2a = -l2 / (mu2 * g2);
            let t2f = 0.0;
            let (f1, _) =
                split_profile(t1a, t1f, mu2 * g1, mu1 * g1, t_empty, mu1 / (mu2 * g1))?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, t2f);
            b.t_empty = Some(t_empty);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasII1b => {
            let t1a = (l2 - (1.0 - g1) * mu2 / mu1 * l1) / mu2;
            let t2f = t1a;
            let t1f = g1 * l1 / mu1 + l2 / mu2;
            let t_empty = l2 / mu2 + (1.0 - g1) * l1 / (mu2 - mu1);
            let t2a = -(1.0 / g2 - 1.0) * l2 / mu2 - (1.0 - g1) * l1 / mu1;
            let (f1, _) =
                split_profile(t1a, t1f, mu2 * g1, mu1 * g1, t_empty, mu1 / (mu2 * g1))?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, t2f);
            b.t_empty = Some(t_empty);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasII2b | RegimeTag::HasII3b => {
            let t1a = (l2 - (1.0 / g1 - 1.0) * l1) / mu2;
            let t1f = (l1 + l2) / mu2;
            let t2a = -l2 / (mu2 * g2);
            let t2f = 0.0;
            let f1 = Curve::ramp(t1a, t1f, mu2 * g1)?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, t2f);
            b.t_empty = Some(t1f);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasII2c => {
            let t1a = -(1.0 / g1 - 1.0) * l1 / mu2 + l2 / mu2;
            let t2f = t1a;
            let t1f = (l1 + l2) / mu2;
            let t2a = -(1.0 / g1 - 1.0) * l1 / mu2 - (1.0 / g2 - 1.0) * l2 / mu2;
            let f1 = Curve::ramp(t1a, t1f, mu2 * g1)?;
            let f2 = Curve::ramp(t2a, t2f, mu2 * g2)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, t2f);
            b.t_empty = Some(t1f);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasII3c => {
            let t1a = -(1.0 / g1 - 1.0 / g2) * l1 / mu2;
            let t1f = l1 / (mu2 * g2);
            let t2f = (l1 + l2) / mu2;
            let t_empty = t2f;
            let t2a = -(1.0 - g2) / g2 * (l1 + l2) / mu2;
            let f1 = Curve::ramp(t1a, t1f, mu2 * g1)?;
            let f2 =
                Curve::from_rate_spans(&[(t2a, 0.0, mu2 * g2), (t1f, t2f, mu2 * g2)])?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, t2f);
            b.t_empty = Some(t_empty);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasEqI1 => {
            let g = g1;
            let t1a = -(1.0 - g) / g * (l1 / mu1 - l2 / (mu2 - mu1));
            let t1f = l1 / mu1;
            let t2a = -(1.0 - g) / g * l2 / (mu2 - mu1);
            let t2f = l2 / (mu2 - mu1);
            let (f1, _) = split_profile(t1a, t1f, mu1, mu1 * g, t2f, 1.0)?;
            let f2 = Curve::from_rate_spans(&[(t2a, 0.0, mu2 * g), (0.0, t2f, mu2 * g - mu1)])?;
            Ok(unique(tag, SupportBoundaries::plain(t1a, t1f, t2a, t2f), f1, f2))
        }
        RegimeTag::HasEqI2 => {
            let g = g1;
            let ta = -(1.0 / g - 1.0) * (l1 + l2) / mu2;
            let tf = (l1 + l2) / mu2;
            let descriptor = ConvexSetDescriptor {
                window: (ta, tf),
                free_from: 0.0,
                prezero_class2_rate: Some(mu2 * g),
                joint_rate: mu2 * g,
                class1_rate_cap: Some(mu1),
                class2_rate_cap: None,
                masses: (l1, l2),
            };
            // class 1 as late as possible (limit of regime-I case 1b) ...
            let s = (l2 - (mu2 / mu1 - 1.0) * l1) / mu2;
            let late = JointProfile::new(
                Curve::ramp(s, tf, mu1)?,
                Curve::from_rate_spans(&[(ta, s, mu2 * g), (s, tf, mu2 * g - mu1)])?,
            );
            // ... and as early as possible (limit of regime-I case 2b)
            let e = l1 / mu1;
            let early = JointProfile::new(
                Curve::ramp(0.0, e, mu1)?,
                Curve::from_rate_spans(&[
                    (ta, 0.0, mu2 * g),
                    (0.0, e, mu2 * g - mu1),
                    (e, tf, mu2 * g),
                ])?,
            );
            let mut b = SupportBoundaries::plain(ta, tf, ta, tf);
            b.ta = Some(ta);
            b.tf = Some(tf);
            Ok(EapSolution {
                tag,
                boundaries: b,
                kind: EapKind::Convex { descriptor, extremes: Box::new([late, early]) },
            })
        }
        RegimeTag::HasEqII1 => {
            let g = g1;
            let t1a = l2 / (mu2 * g) - (1.0 / g - 1.0) * l1 / mu1;
            let t1f = l1 / mu1;
            let t_empty = l2 / (mu2 - mu1);
            let t2a = -l2 / (mu2 * g);
            let (f1, _) = split_profile(t1a, t1f, mu2 * g, mu1 * g, t_empty, mu1 / (mu2 * g))?;
            let f2 = Curve::ramp(t2a, 0.0, mu2 * g)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, 0.0);
            b.t_empty = Some(t_empty);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasEqII2 => {
            let g = g1;
            let t1a = (l2 - (1.0 / g - 1.0) * l1) / mu2;
            let t1f = (l1 + l2) / mu2;
            let t2a = -l2 / (mu2 * g);
            let f1 = Curve::ramp(t1a, t1f, mu2 * g)?;
            let f2 = Curve::ramp(t2a, 0.0, mu2 * g)?;
            let mut b = SupportBoundaries::plain(t1a, t1f, t2a, 0.0);
            b.t_empty = Some(t1f);
            Ok(unique(tag, b, f1, f2))
        }
        RegimeTag::HasEqII3 => {
            let g = g1;
            let ta = -(1.0 / g - 1.0) * (l1 + l2) / mu2;
            let tf = (l1 + l2) / mu2;
            let descriptor = ConvexSetDescriptor {
                window: (ta, tf),
                free_from: 0.0,
                prezero_class2_rate: Some(mu2 * g),
                joint_rate: mu2 * g,
                class1_rate_cap: None,
                class2_rate_cap: None,
                masses: (l1, l2),
            };
            // class 1 as late as possible (limit of regime-II case 2c) ...
            let s = (l2 - (1.0 / g - 1.0) * l1) / mu2;
            let late = JointProfile::new(
                Curve::ramp(s, tf, mu2 * g)?,
                Curve::ramp(ta, s, mu2 * g)?,
            );
            // ... and as early as possible (limit of regime-II case 3c)
            let e = l1 / (mu2 * g);
            let early = JointProfile::new(
                Curve::ramp(0.0, e, mu2 * g)?,
                Curve::from_rate_spans(&[(ta, 0.0, mu2 * g), (e, tf, mu2 * g)])?,
            );
            let mut b = SupportBoundaries::plain(ta, tf, ta, tf);
            b.ta = Some(ta);
            b.tf = Some(tf);
            Ok(EapSolution {
                tag,
                boundaries: b,
                kind: EapKind::Convex { descriptor, extremes: Box::new([late, early]) },
            })
        }
        _ => unreachable!("classify_has only returns HAS tags"),
    }
}

/// Solves any topology.
pub fn solve(p: &GameParams) -> Result<EapSolution, ModelError> {
    p.validate()?;
    match p.topology {
        Topology::SingleQueue => solve_single_queue(p),
        Topology::TandemCommon => {
            let (profile, boundaries) =
                single_queue_profiles(p.mu1.min(p.mu2), p.lambda1, p.lambda2, p.gamma1, p.gamma2);
            Ok(EapSolution { tag: RegimeTag::Sq, boundaries, kind: EapKind::Unique(profile) })
        }
        Topology::Parallel => {
            let (p1, b1) = single_queue_profiles(p.mu1, p.lambda1, 0.0, p.gamma1, p.gamma2);
            let (p2, b2) = single_queue_profiles(p.mu2, 0.0, p.lambda2, p.gamma1, p.gamma2);
            let boundaries = SupportBoundaries::plain(b1.t1a, b1.t1f, b2.t2a, b2.t2f);
            Ok(EapSolution {
                tag: RegimeTag::Sq,
                boundaries,
                kind: EapKind::Unique(JointProfile::new(p1.f1, p2.f2)),
            })
        }
        Topology::Hds => solve_hds(p),
        Topology::Has => solve_has(p),
    }
}

// --- convex-set sampling ----------------------------------------------------

/// Draws one member of a convex equilibrium set: class-2 rates are sampled
/// piecewise-constant on a random 64-piece grid over the free region, then a
/// single water-filling level shift repairs the terminal mass while
/// respecting the rate caps; class 1 takes the complement of the joint
/// rate. Deterministic per seed.
pub fn sample_convex_eap(
    d: &ConvexSetDescriptor,
    seed: u64,
) -> Result<JointProfile, ModelError> {
    let (w0, w1) = d.window;
    let free_len = w1 - d.free_from;
    let (lo, hi) = d.class2_rate_bounds();
    let m2 = d.free_class2_mass();
    let feas_tol = 1e-9 * (1.0 + m2.abs());
    if free_len <= 0.0 || m2 < lo * free_len - feas_tol || m2 > hi * free_len + feas_tol {
        return Err(ModelError::InfeasibleDescriptor(format!(
            "free class-2 mass {m2} outside [{}, {}]",
            lo * free_len,
            hi * free_len
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proposals: Vec<f64> = (0..63).map(|_| rng.random_range(d.free_from..w1)).collect();
    proposals.sort_by(f64::total_cmp);
    // short slivers would let value rounding contaminate the piece rates
    let min_gap = 1e-3 * free_len;
    let mut cuts: Vec<f64> = vec![d.free_from];
    for t in proposals {
        if t - cuts.last().unwrap() >= min_gap && w1 - t >= min_gap {
            cuts.push(t);
        }
    }
    cuts.push(w1);
    let draws: Vec<f64> = (0..cuts.len() - 1).map(|_| rng.random_range(lo..=hi)).collect();

    // water-filling: shift all draws by a common level, clamped to the box,
    // until the class-2 mass over the free region is exact
    let mass_at = |shift: f64| -> f64 {
        draws
            .iter()
            .zip(cuts.windows(2))
            .map(|(&u, w)| (u + shift).clamp(lo, hi) * (w[1] - w[0]))
            .sum()
    };
    let (mut shift_lo, mut shift_hi) = (lo - hi, hi - lo);
    for _ in 0..200 {
        let mid = 0.5 * (shift_lo + shift_hi);
        if mass_at(mid) < m2 {
            shift_lo = mid;
        } else {
            shift_hi = mid;
        }
        if shift_hi - shift_lo <= f64::EPSILON * (1.0 + shift_hi.abs()) {
            break;
        }
    }
    let shift = 0.5 * (shift_lo + shift_hi);

    let mut f2_spans: Vec<(f64, f64, f64)> = Vec::with_capacity(cuts.len() + 1);
    let mut f1_spans: Vec<(f64, f64, f64)> = Vec::with_capacity(cuts.len());
    if let Some(pre) = d.prezero_class2_rate {
        f2_spans.push((w0, d.free_from, pre));
    }
    for (&u, w) in draws.iter().zip(cuts.windows(2)) {
        let r2 = (u + shift).clamp(lo, hi);
        f2_spans.push((w[0], w[1], r2));
        f1_spans.push((w[0], w[1], (d.joint_rate - r2).max(0.0)));
    }
    Ok(JointProfile::new(
        Curve::from_rate_spans(&f1_spans)?,
        Curve::from_rate_spans(&f2_spans)?,
    ))
}

/// Cross-check used by tests and the structural audit: the closed-form rate
/// switch of a chained profile must coincide with the engine's departure
/// map, i.e. `tau1(split) == t_switch`.
pub fn split_point_from_engine(
    p: &GameParams,
    profile: &JointProfile,
    t_switch: f64,
) -> Result<f64, ModelError> {
    let trace = compose(&profile.f1, &profile.f2, p)?;
    let inv = trace.queue1.tau.generalized_inverse()?;
    Ok(inv.eval(t_switch))
}
