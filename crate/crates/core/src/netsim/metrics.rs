use alloc::vec;
use alloc::vec::Vec;

use crate::synthesis::{EventDesign, Mode};
use crate::tol::TOL;

use super::world::{EventRecord, Logs};

/// Series and guarantee checks of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    /// Empty without a design.
    pub envelope: Vec<f64>,
    pub max_disagreement: Vec<f64>,
    pub event_counts: Vec<u64>,
    /// Seconds; `None` for an agent with fewer than two events.
    pub min_inter_event: Vec<Option<f64>>,
    pub envelope_violations: usize,
    pub first_envelope_violation: Option<f64>,
    pub tail_max_disagreement: f64,
    pub disagreement_bound: Option<f64>,
    pub tail_bound_violated: bool,
    /// Intervals must exceed this many steps (1 without delays, `p` with).
    pub inter_event_floor_steps: Option<u64>,
    pub inter_event_violations: usize,
    pub v_max: f64,
    pub v_m: Option<f64>,
    pub vm_exceeded: bool,
}

impl MetricsReport {
    /// Envelope, tail bound and inter-event floor. `vm_exceeded` is a
    /// diagnostic of the design premise and not part of this check.
    pub fn guarantees_hold(&self) -> bool {
        self.envelope_violations == 0 && !self.tail_bound_violated && self.inter_event_violations == 0
    }

    pub fn min_inter_event_all(&self) -> Option<f64> {
        self.min_inter_event.iter().flatten().copied().reduce(f64::min)
    }
}

/// Events of `agent` with `t0 ≤ t ≤ t1`.
pub fn events_in_window(events: &[EventRecord], agent: usize, h: f64, t0: f64, t1: f64) -> usize {
    let eps = 1e-9 * h;
    events
        .iter()
        .filter(|e| e.agent == agent)
        .filter(|e| {
            let t = e.step as f64 * h;
            t >= t0 - eps && t <= t1 + eps
        })
        .count()
}

/// Computes every series and flag from the logs.
pub fn metrics(logs: &Logs, n_agents: usize, h: f64, design: Option<&EventDesign>) -> MetricsReport {
    let t: Vec<f64> = logs.steps.iter().map(|s| s.t).collect();
    let v: Vec<f64> = logs.steps.iter().map(|s| s.v).collect();
    let max_disagreement: Vec<f64> = logs.steps.iter().map(|s| s.max_disagreement).collect();

    let mut event_counts = vec![0u64; n_agents];
    let mut last: Vec<Option<u64>> = vec![None; n_agents];
    let mut min_steps: Vec<Option<u64>> = vec![None; n_agents];
    let floor = design.map(|d| match d.mode {
        Mode::NoDelay => 1,
        Mode::Delay => d.p as u64,
    });
    let mut inter_event_violations = 0;
    for e in &logs.events {
        event_counts[e.agent] += 1;
        if let Some(prev) = last[e.agent] {
            let gap = e.step - prev;
            min_steps[e.agent] = Some(min_steps[e.agent].map_or(gap, |m| m.min(gap)));
            if floor.is_some_and(|f| gap <= f) {
                inter_event_violations += 1;
            }
        }
        last[e.agent] = Some(e.step);
    }
    let min_inter_event = min_steps.iter().map(|m| m.map(|s| s as f64 * h)).collect();

    let tail_len = (libm::ceil(v.len() as f64 * 0.1) as usize).max(1).min(v.len());
    let tail_max_disagreement = max_disagreement[max_disagreement.len() - tail_len..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let v_max = v.iter().copied().fold(0.0, f64::max);

    let mut envelope = Vec::new();
    let mut envelope_violations = 0;
    let mut first_envelope_violation = None;
    let mut disagreement_bound = None;
    let mut tail_bound_violated = false;
    let mut v_m = None;
    let mut vm_exceeded = false;
    if let Some(d) = design {
        envelope = t.iter().map(|&ti| d.envelope(ti)).collect();
        for ((&ti, &vi), &ei) in t.iter().zip(&v).zip(&envelope) {
            if vi > ei * (1.0 + TOL.envelope_slack) {
                envelope_violations += 1;
                first_envelope_violation.get_or_insert(ti);
            }
        }
        let bound = d.disagreement_bound();
        disagreement_bound = Some(bound);
        tail_bound_violated = !v.is_empty() && tail_max_disagreement > bound;
        v_m = Some(d.v_m);
        vm_exceeded = v_max > d.v_m * (1.0 + TOL.envelope_slack);
    }

    MetricsReport {
        t,
        v,
        envelope,
        max_disagreement,
        event_counts,
        min_inter_event,
        envelope_violations,
        first_envelope_violation,
        tail_max_disagreement,
        disagreement_bound,
        tail_bound_violated,
        inter_event_floor_steps: floor,
        inter_event_violations,
        v_max,
        v_m,
        vm_exceeded,
    }
}
