use alloc::vec;
use alloc::vec::Vec;

use libm::ceil;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::Message;
use crate::tol::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("delay {raw} s rounds to {p} steps, above the bound of {p_max}")]
    ExceedsBound { raw: f64, p: usize, p_max: usize },
    #[error("delay {0} s is negative or not finite")]
    InvalidDelay(f64),
    #[error("delay mode needs a nonempty delay set with every delay above zero")]
    EmptyDelaySet,
}

/// Whole sampling steps covering `raw` seconds, rounding up.
pub fn round_delay(raw: f64, h: f64, p_max: usize) -> Result<usize, ChannelError> {
    if !(raw >= 0.0) || !raw.is_finite() {
        return Err(ChannelError::InvalidDelay(raw));
    }
    if raw == 0.0 {
        return Ok(0);
    }
    let p = ceil(raw / h - TOL.delay_round).max(0.0) as usize;
    if p > p_max {
        return Err(ChannelError::ExceedsBound { raw, p, p_max });
    }
    Ok(p)
}

/// Finite delay set sampled with a reproducible per-event stream.
///
/// The stream for event `k` of agent `i` is ChaCha8 seeded with `seed` and
/// stream id `(i << 32) | k`. Each draw picks an index into the delay set by
/// the high half of `next_u64() · len`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    /// Whole steps, one per configured delay.
    steps: Vec<usize>,
    seed: u64,
    per_recipient: bool,
}

impl DelayModel {
    pub fn new(delays: &[f64], h: f64, p_max: usize, seed: u64, per_recipient: bool) -> Result<Self, ChannelError> {
        if delays.is_empty() {
            return Err(ChannelError::EmptyDelaySet);
        }
        let steps = delays.iter().map(|&d| round_delay(d, h, p_max)).collect::<Result<Vec<_>, _>>()?;
        if steps.contains(&0) {
            return Err(ChannelError::EmptyDelaySet);
        }
        Ok(Self { steps, seed, per_recipient })
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// Delay in steps for each of `recipients` of event `event_index` by `sender`.
    pub fn draw(&self, sender: usize, event_index: u64, recipients: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((sender as u64) << 32) | (event_index & 0xffff_ffff));
        let len = self.steps.len() as u128;
        let mut pick = || self.steps[((u128::from(rng.next_u64()) * len) >> 64) as usize];
        if self.per_recipient {
            (0..recipients).map(|_| pick()).collect()
        } else {
            vec![pick(); recipients]
        }
    }
}

/// A message on its way to one recipient.
#[derive(Debug, Clone, PartialEq)]
pub struct InFlight {
    pub msg: Message,
    pub recipient: usize,
    pub deliver_step: u64,
}

/// Timestamped in-flight messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    in_flight: Vec<InFlight>,
    delays: Option<DelayModel>,
    /// Newest applied send step per (recipient, sender).
    newest: Vec<Vec<Option<u64>>>,
    pub queued: u64,
    pub delivered: u64,
    pub dropped_stale: u64,
}

/// A message handed to its recipient.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub recipient: usize,
    pub msg: Message,
    pub elapsed: usize,
}

impl Channel {
    /// `delays = None` delivers at the sending instant.
    pub fn new(n_agents: usize, delays: Option<DelayModel>) -> Self {
        Self {
            in_flight: Vec::new(),
            delays,
            newest: vec![vec![None; n_agents]; n_agents],
            queued: 0,
            delivered: 0,
            dropped_stale: 0,
        }
    }

    pub fn is_delayed(&self) -> bool {
        self.delays.is_some()
    }

    pub fn in_flight(&self) -> &[InFlight] {
        &self.in_flight
    }

    /// Queues `msg` for every recipient. `event_index` selects the RNG stream.
    pub fn send(&mut self, msg: &Message, recipients: &[usize], event_index: u64) {
        let steps = match &self.delays {
            Some(model) => model.draw(msg.sender, event_index, recipients.len()),
            None => vec![0; recipients.len()],
        };
        for (&recipient, p) in recipients.iter().zip(steps) {
            self.queued += 1;
            self.in_flight.push(InFlight { msg: msg.clone(), recipient, deliver_step: msg.send_step + p as u64 });
        }
    }

    /// Removes every message due at or before `step`, oldest send first, and
    /// drops any that is older than one already applied for the same pair.
    pub fn take_due(&mut self, step: u64) -> Vec<Delivery> {
        let mut due: Vec<InFlight> = Vec::new();
        let mut keep = Vec::with_capacity(self.in_flight.len());
        for m in self.in_flight.drain(..) {
            if m.deliver_step <= step {
                due.push(m);
            } else {
                keep.push(m);
            }
        }
        self.in_flight = keep;
        due.sort_by_key(|m| (m.recipient, m.msg.sender, m.msg.send_step));
        let mut out = Vec::with_capacity(due.len());
        for m in due {
            let slot = &mut self.newest[m.recipient][m.msg.sender];
            if slot.is_some_and(|s| s > m.msg.send_step) {
                self.dropped_stale += 1;
                continue;
            }
            *slot = Some(m.msg.send_step);
            self.delivered += 1;
            out.push(Delivery { recipient: m.recipient, elapsed: (step - m.msg.send_step) as usize, msg: m.msg });
        }
        out
    }
}
