//! Piecewise-linear curve algebra for cumulative arrival profiles and
//! queue processes.
//!
//! A [`Curve`] is a right-continuous piecewise-linear function of time. It is
//! constant before its first knot, linear between knots, and linear with a
//! configurable slope after the last knot. Jumps are carried explicitly as
//! `(t, v_left, v_right)` records so that both one-sided limits stay
//! available; everything downstream (waiting times in particular) needs them.
//!
//! All operations return new curves; a curve is never mutated after
//! construction, so values can be shared freely across threads.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Breakpoints closer than this are merged into a single knot.
pub const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("curve needs at least one knot")]
    Empty,
    #[error("non-finite coordinate at knot {0}")]
    NonFinite(usize),
    #[error("breakpoints must be strictly increasing (violated at index {0})")]
    Unsorted(usize),
    #[error("operation requires a non-decreasing curve")]
    NotMonotone,
    #[error("cannot invert a curve that is constant everywhere")]
    ConstantCurve,
}

/// One breakpoint. `v_left` is the limit from the left, `v_right` the value
/// at and immediately after `t`; they differ exactly at a jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub v_left: f64,
    pub v_right: f64,
}

impl Knot {
    pub fn point(t: f64, v: f64) -> Self {
        Knot { t, v_left: v, v_right: v }
    }

    pub fn jump(&self) -> f64 {
        self.v_right - self.v_left
    }
}

/// Right-continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    knots: Vec<Knot>,
    right_tail_slope: f64,
}

impl Curve {
    /// Curve that equals `v` everywhere.
    pub fn constant(v: f64) -> Self {
        Curve { knots: vec![Knot::point(0.0, v)], right_tail_slope: 0.0 }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Builds a curve from raw knots. Knots within [`TIME_TOL`] of each other
    /// are merged (keeping the earliest left value and the latest right
    /// value), which also turns coincident-breakpoint input into a jump.
    pub fn from_knots(knots: Vec<Knot>, right_tail_slope: f64) -> Result<Self, CurveError> {
        if knots.is_empty() {
            return Err(CurveError::Empty);
        }
        if !right_tail_slope.is_finite() {
            return Err(CurveError::NonFinite(usize::MAX));
        }
        for (i, k) in knots.iter().enumerate() {
            if !(k.t.is_finite() && k.v_left.is_finite() && k.v_right.is_finite()) {
                return Err(CurveError::NonFinite(i));
            }
        }
        let mut merged: Vec<Knot> = Vec::with_capacity(knots.len());
        for k in knots {
            match merged.last_mut() {
                Some(last) if k.t <= last.t + TIME_TOL => {
                    if k.t < last.t - TIME_TOL {
                        return Err(CurveError::Unsorted(merged.len()));
                    }
                    last.v_right = k.v_right;
                }
                _ => merged.push(k),
            }
        }
        Ok(Curve { knots: merged, right_tail_slope })
    }

    /// Continuous curve through the given `(t, v)` points, flat tails.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, CurveError> {
        Self::from_knots(points.iter().map(|&(t, v)| Knot::point(t, v)).collect(), 0.0)
    }

    /// Cumulative curve that starts at zero and increases at `rate` over each
    /// span `(lo, hi, rate)`. Spans must be sorted and non-overlapping; gaps
    /// between spans are flat.
    pub fn from_rate_spans(spans: &[(f64, f64, f64)]) -> Result<Self, CurveError> {
        if spans.is_empty() {
            return Ok(Curve::zero());
        }
        let mut knots = Vec::with_capacity(spans.len() * 2);
        let mut acc = 0.0;
        for &(lo, hi, rate) in spans {
            if !(lo.is_finite() && hi.is_finite() && rate.is_finite()) {
                return Err(CurveError::NonFinite(knots.len()));
            }
            if hi < lo - TIME_TOL {
                return Err(CurveError::Unsorted(knots.len()));
            }
            knots.push(Knot::point(lo, acc));
            acc += rate * (hi - lo);
            knots.push(Knot::point(hi, acc));
        }
        let mut c = Self::from_knots(knots, 0.0)?;
        c.dedup_collinear();
        Ok(c)
    }

    /// Single linear ramp: value 0 before `lo`, slope `rate` on `[lo, hi]`,
    /// flat after.
    pub fn ramp(lo: f64, hi: f64, rate: f64) -> Result<Self, CurveError> {
        Self::from_rate_spans(&[(lo, hi, rate)])
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn right_tail_slope(&self) -> f64 {
        self.right_tail_slope
    }

    pub fn first_time(&self) -> f64 {
        self.knots[0].t
    }

    pub fn last_time(&self) -> f64 {
        self.knots[self.knots.len() - 1].t
    }

    /// Value before the first knot.
    pub fn initial_value(&self) -> f64 {
        self.knots[0].v_left
    }

    /// Value at and after the last knot (the tail then grows at
    /// `right_tail_slope`).
    pub fn final_value(&self) -> f64 {
        self.knots[self.knots.len() - 1].v_right
    }

    /// Total increase over the whole line. Only meaningful with a flat tail.
    pub fn total_increase(&self) -> f64 {
        self.final_value() - self.initial_value()
    }

    /// Right-continuous evaluation `c(t+)`.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t < self.knots[0].t {
            return self.knots[0].v_left;
        }
        if t >= self.knots[n - 1].t {
            return self.knots[n - 1].v_right + self.right_tail_slope * (t - self.knots[n - 1].t);
        }
        // index of the last knot with knot.t <= t
        let i = self.knots.partition_point(|k| k.t <= t) - 1;
        if t == self.knots[i].t {
            return self.knots[i].v_right;
        }
        let (a, b) = (&self.knots[i], &self.knots[i + 1]);
        interp(a.t, a.v_right, b.t, b.v_left, t)
    }

    /// Left limit `c(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0].t {
            return self.knots[0].v_left;
        }
        if t > self.knots[n - 1].t {
            return self.knots[n - 1].v_right + self.right_tail_slope * (t - self.knots[n - 1].t);
        }
        let i = self.knots.partition_point(|k| k.t < t) - 1;
        if t == self.knots[i].t {
            // only reachable when i is the exact knot (t > first knot)
            return self.knots[i].v_left;
        }
        let (a, b) = (&self.knots[i], &self.knots[i + 1]);
        if t == b.t {
            return b.v_left;
        }
        interp(a.t, a.v_right, b.t, b.v_left, t)
    }

    /// Midpoint of the two one-sided limits, `(c(t+) + c(t-)) / 2`.
    pub fn eval_mid(&self, t: f64) -> f64 {
        0.5 * (self.eval(t) + self.eval_left(t))
    }

    pub fn is_non_decreasing(&self) -> bool {
        if self.right_tail_slope < 0.0 {
            return false;
        }
        let mut prev = self.knots[0].v_left;
        for k in &self.knots {
            let tol = 1e-12 * (1.0 + prev.abs());
            if k.v_left < prev - tol || k.v_right < k.v_left - tol {
                return false;
            }
            prev = k.v_right.max(prev);
        }
        true
    }

    /// Removes sub-rounding decreases left behind by interpolation when the
    /// result is known to be mathematically non-decreasing.
    fn clamp_monotone_dust(&mut self) {
        let mut prev = self.knots[0].v_left;
        for k in &mut self.knots {
            let tol = 1e-9 * (1.0 + prev.abs());
            if k.v_left < prev && k.v_left > prev - tol {
                k.v_left = prev;
            }
            if k.v_right < k.v_left && k.v_right > k.v_left - tol {
                k.v_right = k.v_left;
            }
            prev = k.v_right.max(prev);
        }
    }

    /// Pointwise sum. Breakpoints are the merged breakpoint sets.
    pub fn sum(&self, other: &Curve) -> Curve {
        let mut times: Vec<f64> = self
            .knots
            .iter()
            .map(|k| k.t)
            .chain(other.knots.iter().map(|k| k.t))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= TIME_TOL);
        let knots = times
            .iter()
            .map(|&t| Knot {
                t,
                v_left: self.eval_left(t) + other.eval_left(t),
                v_right: self.eval(t) + other.eval(t),
            })
            .collect();
        let mut c = Curve::from_knots(knots, self.right_tail_slope + other.right_tail_slope)
            .expect("sum of valid curves is valid");
        if self.is_non_decreasing() && other.is_non_decreasing() {
            c.clamp_monotone_dust();
        }
        c.dedup_collinear();
        c
    }

    /// Pointwise scaling by a finite factor.
    pub fn scale(&self, factor: f64) -> Curve {
        Curve {
            knots: self
                .knots
                .iter()
                .map(|k| Knot { t: k.t, v_left: k.v_left * factor, v_right: k.v_right * factor })
                .collect(),
            right_tail_slope: self.right_tail_slope * factor,
        }
    }

    /// Translates the whole curve in time.
    pub fn shift_time(&self, dt: f64) -> Curve {
        Curve {
            knots: self
                .knots
                .iter()
                .map(|k| Knot { t: k.t + dt, v_left: k.v_left, v_right: k.v_right })
                .collect(),
            right_tail_slope: self.right_tail_slope,
        }
    }

    /// Sup-inverse `c^{-1}(v) = sup { s : c(s) <= v }` of a non-decreasing
    /// curve. Flat segments of `c` become jumps of the inverse and jumps of
    /// `c` become flat segments.
    ///
    /// Values below the curve's range are clamped to the first breakpoint
    /// time; if the curve has a flat right tail, values above the range are
    /// clamped to the last breakpoint time. Within the closed range the
    /// sup-inverse is exact.
    pub fn generalized_inverse(&self) -> Result<Curve, CurveError> {
        if !self.is_non_decreasing() {
            return Err(CurveError::NotMonotone);
        }
        if self.total_increase() <= 0.0 && self.right_tail_slope == 0.0 {
            return Err(CurveError::ConstantCurve);
        }
        let mut out: Vec<Knot> = Vec::with_capacity(self.knots.len() + 1);
        // The graph of c, walked left to right, alternates jumps (at knots)
        // and linear pieces (between knots). Jump (v_left -> v_right at t)
        // inverts to a flat piece at height t; a flat linear piece at value v
        // over [t0, t1] inverts to a jump at v from t0 to t1; a rising piece
        // inverts to a rising piece with reciprocal slope.
        let push = |out: &mut Vec<Knot>, k: Knot| {
            match out.last_mut() {
                Some(last) if (last.t - k.t).abs() <= TIME_TOL => last.v_right = k.v_right,
                _ => out.push(k),
            }
        };
        for (i, k) in self.knots.iter().enumerate() {
            if k.jump() > 0.0 {
                // inverse is flat at height k.t over [v_left, v_right]
                push(&mut out, Knot::point(k.v_left, k.t));
                push(&mut out, Knot::point(k.v_right, k.t));
            }
            if i + 1 < self.knots.len() {
                let nxt = &self.knots[i + 1];
                if nxt.v_left > k.v_right {
                    push(&mut out, Knot::point(k.v_right, k.t));
                    push(&mut out, Knot::point(nxt.v_left, nxt.t));
                } else {
                    // flat piece: inverse jumps at this value from k.t to nxt.t
                    push(
                        &mut out,
                        Knot { t: k.v_right, v_left: k.t, v_right: nxt.t },
                    );
                }
            }
        }
        if out.is_empty() {
            // single-knot curve with rising tail
            let k = self.knots[0];
            push(&mut out, Knot::point(k.v_right, k.t));
        }
        let tail = if self.right_tail_slope > 0.0 { 1.0 / self.right_tail_slope } else { 0.0 };
        let mut inv = Curve::from_knots(out, tail)?;
        inv.dedup_collinear();
        Ok(inv)
    }

    /// Exact composition `outer(inner(t))` for non-decreasing `inner`.
    ///
    /// Breakpoints of the result are the knots of `inner` together with the
    /// preimages of `outer`'s knots under `inner`.
    pub fn compose(outer: &Curve, inner: &Curve) -> Result<Curve, CurveError> {
        if !inner.is_non_decreasing() {
            return Err(CurveError::NotMonotone);
        }
        let mut times: Vec<f64> = inner.knots.iter().map(|k| k.t).collect();
        for ok in &outer.knots {
            preimage_times(inner, ok.t, &mut times);
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= TIME_TOL);

        let mut knots = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let v_right = outer.eval(inner.eval(t));
            // The left limit depends on how inner approaches t from below:
            // sitting flat at inner(t-) keeps outer's right-continuous value
            // there, a strict ascent picks up outer's left limit. Between
            // consecutive candidate times inner is linear, so comparing
            // values at t- and at the previous candidate decides which.
            let vl_in = inner.eval_left(t);
            let flat_left = if j == 0 {
                // left of the first candidate lies inner's constant tail
                true
            } else {
                inner.eval(times[j - 1]) == vl_in
            };
            let v_left = if flat_left { outer.eval(vl_in) } else { outer.eval_left(vl_in) };
            knots.push(Knot { t, v_left, v_right });
        }
        // The tail slope only matters when inner keeps rising; every outer
        // knot at or below inner's final value is then already crossed, so
        // nudge the lookup past rounding ties at that knot.
        let tail = if inner.right_tail_slope == 0.0 {
            0.0
        } else {
            let v = inner.final_value();
            outer_slope_at(outer, v + 1e-9 * (1.0 + v.abs())) * inner.right_tail_slope
        };
        let mut c = Curve::from_knots(knots, tail)?;
        if outer.is_non_decreasing() {
            c.clamp_monotone_dust();
        }
        c.dedup_collinear();
        Ok(c)
    }

    /// Minimal closed set carrying all increase of the curve. Stretches of
    /// zero slope (below 1e-12, so interpolation dust does not count as
    /// mass) longer than [`TIME_TOL`] split the support; jumps contribute
    /// their breakpoint.
    pub fn support(&self) -> Support {
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        let mut push = |lo: f64, hi: f64| match intervals.last_mut() {
            Some(last) if lo <= last.1 + TIME_TOL => last.1 = last.1.max(hi),
            _ => intervals.push((lo, hi)),
        };
        for (i, k) in self.knots.iter().enumerate() {
            if k.jump() > 1e-12 * (1.0 + k.v_left.abs()) {
                push(k.t, k.t);
            }
            if i + 1 < self.knots.len() {
                let nxt = &self.knots[i + 1];
                if nxt.v_left - k.v_right > 1e-12 * (nxt.t - k.t) {
                    push(k.t, nxt.t);
                }
            }
        }
        Support { intervals }
    }

    /// Removes interior knots that neither jump nor change slope.
    fn dedup_collinear(&mut self) {
        if self.knots.len() < 3 {
            return;
        }
        let mut out: Vec<Knot> = Vec::with_capacity(self.knots.len());
        out.push(self.knots[0]);
        for i in 1..self.knots.len() {
            let k = self.knots[i];
            if i + 1 == self.knots.len() {
                out.push(k);
                continue;
            }
            if k.jump() != 0.0 {
                out.push(k);
                continue;
            }
            let prev = out.last().unwrap();
            let nxt = self.knots[i + 1];
            let s0 = (k.v_left - prev.v_right) / (k.t - prev.t);
            let s1 = (nxt.v_left - k.v_right) / (nxt.t - k.t);
            if (s0 - s1).abs() > 1e-12 * (1.0 + s0.abs().max(s1.abs())) {
                out.push(k);
            }
        }
        self.knots = out;
    }
}

fn interp(t0: f64, v0: f64, t1: f64, v1: f64, t: f64) -> f64 {
    if t1 == t0 {
        return v0;
    }
    let w = (t - t0) / (t1 - t0);
    v0 + w * (v1 - v0)
}

/// Slope of `outer` at and immediately after domain point `t`.
fn outer_slope_at(outer: &Curve, t: f64) -> f64 {
    let n = outer.knots.len();
    if t >= outer.knots[n - 1].t {
        return outer.right_tail_slope;
    }
    if t < outer.knots[0].t {
        return 0.0;
    }
    let i = outer.knots.partition_point(|k| k.t <= t) - 1;
    let (a, b) = (&outer.knots[i], &outer.knots[i + 1]);
    (b.v_left - a.v_right) / (b.t - a.t)
}

/// Appends every time at which `inner` attains value `v`: both endpoints of
/// a flat stretch at `v`, or the unique crossing point on a rising piece.
fn preimage_times(inner: &Curve, v: f64, out: &mut Vec<f64>) {
    let lo = inner.initial_value();
    if v < lo {
        return;
    }
    let n = inner.knots.len();
    let hi = inner.final_value();
    if v > hi {
        if inner.right_tail_slope > 0.0 {
            out.push(inner.last_time() + (v - hi) / inner.right_tail_slope);
        }
        return;
    }
    for i in 0..n {
        let k = &inner.knots[i];
        if v >= k.v_left && v <= k.v_right {
            out.push(k.t);
        }
        if i + 1 < n {
            let nxt = &inner.knots[i + 1];
            if nxt.v_left > k.v_right && v >= k.v_right && v <= nxt.v_left {
                out.push(interp(k.v_right, k.t, nxt.v_left, nxt.t, v));
            } else if nxt.v_left == k.v_right && v == k.v_right {
                out.push(k.t);
                out.push(nxt.t);
            }
        }
    }
}

/// Ordered list of disjoint closed intervals carrying a curve's mass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Support {
    intervals: Vec<(f64, f64)>,
}

impl Support {
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        Support { intervals }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    /// Lebesgue measure of the support.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Measure of the intersection with `[lo, hi]`.
    pub fn measure_within(&self, lo: f64, hi: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0))
            .sum()
    }

    pub fn contains(&self, t: f64, tol: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| t >= lo - tol && t <= hi + tol)
    }

    /// Smallest and largest support point, if any.
    pub fn span(&self) -> Option<(f64, f64)> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(&(lo, _)), Some(&(_, hi))) => Some((lo, hi)),
            _ => None,
        }
    }

    /// Measure of the pairwise intersection of two supports.
    pub fn overlap(&self, other: &Support) -> f64 {
        let mut total = 0.0;
        for &(a, b) in &self.intervals {
            total += other.measure_within(a, b);
        }
        total
    }
}

// --- serialization -------------------------------------------------------
//
// A curve serializes as a JSON array of `{t, v}` knots; a jump is written as
// `{t, v_left, v_right}`. Tails are flat in the serialized form, which is all
// the exchange format needs: only cumulative arrival profiles cross the
// process boundary.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KnotRepr {
    Point { t: f64, v: f64 },
    Jump { t: f64, v_left: f64, v_right: f64 },
}

impl Serialize for Curve {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let reprs: Vec<KnotRepr> = self
            .knots
            .iter()
            .map(|k| {
                if k.jump() == 0.0 {
                    KnotRepr::Point { t: k.t, v: k.v_right }
                } else {
                    KnotRepr::Jump { t: k.t, v_left: k.v_left, v_right: k.v_right }
                }
            })
            .collect();
        reprs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Curve {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let reprs = Vec::<KnotRepr>::deserialize(deserializer)?;
        let knots = reprs
            .into_iter()
            .map(|r| match r {
                KnotRepr::Point { t, v } => Knot::point(t, v),
                KnotRepr::Jump { t, v_left, v_right } => Knot { t, v_left, v_right },
            })
            .collect();
        Curve::from_knots(knots, 0.0).map_err(D::Error::custom)
    }
}
