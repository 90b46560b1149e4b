//! Light-cone geometry of the EPRB layout in 1+1 dimensions (`c = 1`).
//!
//! The source sits at `x = 0`. Wing A detects at `x = +D`, wing B at `x = -D`,
//! both at `T = D/β + t_align`. The past light cone of each detection event
//! cuts the `t = 0` slice in an interval; those intervals and their overlap are
//! the domains that the field model and the factorization argument work with.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spacetime point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub x: f64,
    pub t: f64,
}

impl Event {
    pub fn new(x: f64, t: f64) -> Result<Self> {
        let e = Event { x, t };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.t.is_finite() {
            return Err(Error::Domain(format!(
                "event coordinates must be finite, got (x={}, t={})",
                self.x, self.t
            )));
        }
        if self.t < 0.0 {
            return Err(Error::Domain(format!(
                "event time must be >= 0, got t={}",
                self.t
            )));
        }
        Ok(())
    }

    /// Strict spacelike separation: `|Δx| > |Δt|`.
    pub fn is_spacelike_to(&self, other: &Event) -> bool {
        (self.x - other.x).abs() > (self.t - other.t).abs()
    }
}

/// An interval of the real line with independently open or closed ends.
///
/// Set differences of closed cone bases produce half-open pieces, so
/// closedness is tracked per endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Greater) => (self.lo, self.lo_closed),
            Some(Ordering::Less) => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Less) => (self.hi, self.hi_closed),
            Some(Ordering::Greater) => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed && other.hi_closed),
        };
        let out = Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        };
        (!out.is_empty()).then_some(out)
    }

    /// `self \ other` as up to two pieces.
    fn subtract(&self, other: &Interval) -> Vec<Interval> {
        if self.intersect(other).is_none() {
            return vec![*self];
        }
        let left = Interval {
            lo: f64::NEG_INFINITY,
            hi: other.lo,
            lo_closed: false,
            hi_closed: !other.lo_closed,
        };
        let right = Interval {
            lo: other.hi,
            hi: f64::INFINITY,
            lo_closed: !other.hi_closed,
            hi_closed: false,
        };
        [left, right]
            .iter()
            .filter_map(|piece| self.intersect(piece))
            .collect()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// A finite union of disjoint, sorted intervals on the `t = 0` slice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CausalDomain {
    intervals: Vec<Interval>,
}

impl CausalDomain {
    pub fn empty() -> Self {
        CausalDomain::default()
    }

    pub fn from_interval(interval: Interval) -> Self {
        Self::from_intervals(vec![interval])
    }

    /// Normalizes an arbitrary list: drops empty pieces, sorts, merges overlaps
    /// and touching endpoints where at least one side is closed.
    pub fn from_intervals(mut intervals: Vec<Interval>) -> Self {
        intervals.retain(|i| !i.is_empty());
        intervals.sort_by(|a, b| {
            a.lo.total_cmp(&b.lo)
                .then_with(|| b.lo_closed.cmp(&a.lo_closed))
        });
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for next in intervals {
            match merged.last_mut() {
                Some(cur)
                    if next.lo < cur.hi
                        || (next.lo == cur.hi && (next.lo_closed || cur.hi_closed)) =>
                {
                    match next.hi.partial_cmp(&cur.hi) {
                        Some(Ordering::Greater) => {
                            cur.hi = next.hi;
                            cur.hi_closed = next.hi_closed;
                        }
                        Some(Ordering::Equal) => cur.hi_closed |= next.hi_closed,
                        _ => {}
                    }
                }
                _ => merged.push(next),
            }
        }
        CausalDomain { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Total length (Lebesgue measure).
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    /// Smallest and largest endpoints, if non-empty.
    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.lo, self.intervals.last()?.hi))
    }

    /// Half of the hull width; for a single interval this is its radius.
    pub fn half_width(&self) -> Option<f64> {
        self.hull().map(|(lo, hi)| (hi - lo) / 2.0)
    }

    pub fn union(&self, other: &CausalDomain) -> CausalDomain {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::from_intervals(all)
    }

    pub fn intersection(&self, other: &CausalDomain) -> CausalDomain {
        let mut out = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                if let Some(i) = a.intersect(b) {
                    out.push(i);
                }
            }
        }
        Self::from_intervals(out)
    }

    pub fn difference(&self, other: &CausalDomain) -> CausalDomain {
        let mut pieces = self.intervals.clone();
        for cut in &other.intervals {
            pieces = pieces.iter().flat_map(|p| p.subtract(cut)).collect();
        }
        Self::from_intervals(pieces)
    }

    pub fn intersects(&self, other: &CausalDomain) -> bool {
        !self.intersection(other).is_empty()
    }

    pub fn is_subset_of(&self, other: &CausalDomain) -> bool {
        self.difference(other).is_empty()
    }

    /// Distance from `x` to the closure of the domain, together with whether
    /// the nearest endpoint belongs to the domain. `None` when empty.
    fn distance_to(&self, x: f64) -> Option<(f64, bool)> {
        let mut best: Option<(f64, bool)> = None;
        for i in &self.intervals {
            let cand = if x < i.lo {
                (i.lo - x, i.lo_closed)
            } else if x > i.hi {
                (x - i.hi, i.hi_closed)
            } else {
                // x sits in the closure; it is a member unless on an open end.
                (0.0, i.contains(x))
            };
            best = match best {
                Some(b) if b.0 < cand.0 || (b.0 == cand.0 && b.1 >= cand.1) => Some(b),
                _ => Some(cand),
            };
        }
        best
    }
}

impl fmt::Display for CausalDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (k, i) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// Base of the past light cone of `e` on the `t = 0` slice: `[x - t, x + t]`.
pub fn past_light_cone_base(e: Event) -> Result<CausalDomain> {
    e.validate()?;
    Ok(CausalDomain::from_interval(Interval::closed(
        e.x - e.t,
        e.x + e.t,
    )))
}

/// The events at which the two wings fix their analyzer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceEvents {
    pub a: Event,
    pub b: Event,
}

/// Source/detector layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGeometry {
    /// Source-detector distance.
    #[serde(rename = "D")]
    pub d: f64,
    /// Particle speed as a fraction of `c`.
    pub beta: f64,
    /// Time from arrival at the apparatus to completed spin alignment.
    #[serde(default)]
    pub t_align: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_events: Option<ChoiceEvents>,
}

impl ExperimentGeometry {
    pub fn new(d: f64, beta: f64, t_align: f64) -> Result<Self> {
        let g = ExperimentGeometry {
            d,
            beta,
            t_align,
            choice_events: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_choice_events(mut self, a: Event, b: Event) -> Result<Self> {
        self.choice_events = Some(ChoiceEvents { a, b });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_distance(self.d)?;
        check_beta(self.beta)?;
        if !self.t_align.is_finite() || self.t_align < 0.0 {
            return Err(Error::Domain(format!(
                "t_align must be finite and >= 0, got {}",
                self.t_align
            )));
        }
        if let Some(c) = &self.choice_events {
            c.a.validate()?;
            c.b.validate()?;
        }
        Ok(())
    }

    /// Arrival time at the apparatus, `τ = D/β`.
    pub fn tau(&self) -> f64 {
        self.d / self.beta
    }

    /// Measurement time `T = τ + t_align`.
    pub fn measurement_time(&self) -> f64 {
        self.tau() + self.t_align
    }

    /// Detection event of wing A, `(+D, T)`.
    pub fn detection_a(&self) -> Event {
        Event {
            x: self.d,
            t: self.measurement_time(),
        }
    }

    /// Detection event of wing B, `(-D, T)`.
    pub fn detection_b(&self) -> Event {
        Event {
            x: -self.d,
            t: self.measurement_time(),
        }
    }
}

fn check_distance(d: f64) -> Result<()> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::Domain(format!("D must be finite and > 0, got {d}")));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("beta out of (0,1]: {beta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentDomains {
    pub omega_a: CausalDomain,
    pub omega_b: CausalDomain,
    pub sigma_a: CausalDomain,
    pub sigma_b: CausalDomain,
    pub sigma_c: CausalDomain,
}

impl ExperimentDomains {
    /// `Ω_a ∪ Ω_b`, the support of the initial data that matters.
    pub fn support(&self) -> CausalDomain {
        self.omega_a.union(&self.omega_b)
    }
}

pub fn experiment_domains(g: &ExperimentGeometry) -> Result<ExperimentDomains> {
    g.validate()?;
    let omega_a = past_light_cone_base(g.detection_a())?;
    let omega_b = past_light_cone_base(g.detection_b())?;
    let sigma_c = omega_a.intersection(&omega_b);
    let sigma_a = omega_a.difference(&sigma_c);
    let sigma_b = omega_b.difference(&sigma_c);
    Ok(ExperimentDomains {
        omega_a,
        omega_b,
        sigma_a,
        sigma_b,
        sigma_c,
    })
}

/// Radius of `Σ_c` at arrival (`t_align = 0`): `D(1 - β)/β`.
pub fn sigma_c_radius(d: f64, beta: f64) -> Result<f64> {
    check_distance(d)?;
    check_beta(beta)?;
    Ok(d * (1.0 - beta) / beta)
}

/// Whether both apparatuses at `±D` lie strictly outside `Σ_c` (`t_align = 0`).
pub fn apparatus_excluded(d: f64, beta: f64) -> Result<bool> {
    Ok(sigma_c_radius(d, beta)? < d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionBoundary {
    /// Infimum of speeds keeping the apparatuses out of `Σ_c`; itself excluded.
    pub beta_star: f64,
    /// `Σ_c` radius at `β*` (equals `D`).
    pub radius_at_boundary: f64,
    /// `d radius / d β = -D/β²` evaluated at `β*`.
    pub slope_at_boundary: f64,
    /// The radius is strictly decreasing on the checked grid.
    pub strictly_decreasing: bool,
    pub grid_points: usize,
}

/// Number of `β` samples in the monotonicity certificate.
const MONOTONE_GRID: usize = 100;

pub fn apparatus_exclusion_boundary(d: f64) -> Result<ExclusionBoundary> {
    check_distance(d)?;
    // radius = D(1-β)/β < D  ⇔  1 - β < β  ⇔  β > 1/2, independent of D.
    let beta_star = 0.5;
    let grid = beta_grid(1.0 / MONOTONE_GRID as f64, 1.0, MONOTONE_GRID)?;
    let radii = grid
        .iter()
        .map(|&b| sigma_c_radius(d, b))
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = radii.windows(2).all(|w| w[1] < w[0]);
    Ok(ExclusionBoundary {
        beta_star,
        radius_at_boundary: sigma_c_radius(d, beta_star)?,
        slope_at_boundary: -d / (beta_star * beta_star),
        strictly_decreasing,
        grid_points: MONOTONE_GRID,
    })
}

/// `steps` evenly spaced speeds from `lo` to `hi` inclusive.
pub fn beta_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    check_beta(lo)?;
    check_beta(hi)?;
    if lo >= hi {
        return Err(Error::Domain(format!(
            "beta_min must be < beta_max, got {lo} >= {hi}"
        )));
    }
    if steps < 2 {
        return Err(Error::Domain(format!("steps must be >= 2, got {steps}")));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| {
            if k + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * k as f64 / last
            }
        })
        .collect())
}

/// Audit of one wing's setting-choice event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceAudit {
    pub event: Event,
    pub past_cone_base: CausalDomain,
    /// The choice event's causal past reaches into `Σ_c`.
    pub conspiracy_risk: bool,
    /// The choice is spacelike to the other wing's detection event.
    pub spacelike_to_remote_detection: bool,
    /// Supremum of choice times in `[0, T]` at this position keeping both flags
    /// safe; `None` when no such time exists.
    pub latest_safe_time: Option<f64>,
    /// Whether the supremum itself is safe (it is not when a bound is strict).
    pub latest_safe_time_attained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub a: ChoiceAudit,
    pub b: ChoiceAudit,
}

impl IndependenceReport {
    pub fn safe(&self) -> bool {
        [&self.a, &self.b]
            .iter()
            .all(|c| !c.conspiracy_risk && c.spacelike_to_remote_detection)
    }
}

pub fn settings_independence_report(g: &ExperimentGeometry) -> Result<IndependenceReport> {
    g.validate()?;
    let choices = g
        .choice_events
        .ok_or_else(|| Error::Usage("settings independence report needs choice events".into()))?;
    let domains = experiment_domains(g)?;
    let t_meas = g.measurement_time();
    let a = audit_choice(choices.a, g.detection_b(), &domains.sigma_c, t_meas)?;
    let b = audit_choice(choices.b, g.detection_a(), &domains.sigma_c, t_meas)?;
    Ok(IndependenceReport { a, b })
}

fn audit_choice(
    choice: Event,
    remote_detection: Event,
    sigma_c: &CausalDomain,
    t_meas: f64,
) -> Result<ChoiceAudit> {
    let past_cone_base = past_light_cone_base(choice)?;
    let conspiracy_risk = past_cone_base.intersects(sigma_c);
    let spacelike = choice.is_spacelike_to(&remote_detection);

    // Choice times keeping the cone base [x - t, x + t] clear of Σ_c.
    let clear = match sigma_c.distance_to(choice.x) {
        None => Some(Interval::closed(0.0, f64::INFINITY)),
        Some((dist, nearest_closed)) => {
            let iv = Interval {
                lo: 0.0,
                hi: dist,
                lo_closed: true,
                hi_closed: !nearest_closed,
            };
            (!iv.is_empty()).then_some(iv)
        }
    };
    // |x - x_remote| > |t - T|  ⇔  t ∈ (T - Δx, T + Δx).
    let dx = (choice.x - remote_detection.x).abs();
    let spacelike_window = Interval::open(remote_detection.t - dx, remote_detection.t + dx);
    let window = clear
        .and_then(|c| c.intersect(&spacelike_window))
        .and_then(|w| w.intersect(&Interval::closed(0.0, t_meas)));

    Ok(ChoiceAudit {
        event: choice,
        past_cone_base,
        conspiracy_risk,
        spacelike_to_remote_detection: spacelike,
        latest_safe_time: window.map(|w| w.hi),
        latest_safe_time_attained: window.is_some_and(|w| w.hi_closed),
    })
}
