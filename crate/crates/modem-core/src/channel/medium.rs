//! Shared half-duplex medium driven by a virtual-time event queue.
//!
//! Endpoints transmit complex-baseband bursts tagged with a center frequency;
//! every other endpoint receives the channel-propagated burst as a single
//! event at its arrival end. Overlapping same-band arrivals are summed into
//! one collided burst. An endpoint is deaf while transmitting and for
//! `turnaround` seconds afterwards: arrival samples inside that window are
//! zeroed, modeling the receive blackout of a half-duplex transducer.
//!
//! All ordering is by virtual timestamp with an insertion-order tiebreak, so
//! runs are reproducible regardless of host scheduling.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{propagate_baseband, ChannelModel};
use crate::fec::splitmix64;
use crate::signal::BasebandSignal;
use crate::signal::C64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndpointId(pub(crate) usize);

impl EndpointId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Traffic class, used only for loss injection and the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxClass {
    Data,
    Control,
    Stream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub endpoint: usize,
    pub kind: LogKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogKind {
    TxStart {
        class: TxClass,
        f_center: f64,
        duration: f64,
    },
    RxDelivered {
        f_center: f64,
        duration: f64,
        collided: bool,
        muted: bool,
    },
    RxLost {
        class: TxClass,
    },
}

#[derive(Debug)]
pub enum MediumEvent {
    /// A complete burst (possibly a collision sum) recorded at an endpoint.
    Rx {
        at: EndpointId,
        time: f64,
        signal: BasebandSignal,
        f_center: f64,
        collided: bool,
        muted: bool,
    },
    /// A timer scheduled by the endpoint itself.
    Wake {
        at: EndpointId,
        time: f64,
        token: u64,
    },
}

#[derive(Debug)]
enum EvKind {
    ArrivalEnd { ep: usize, id: u64 },
    Wake { ep: usize, token: u64 },
}

#[derive(Debug)]
struct Ev {
    time: f64,
    seq: u64,
    kind: EvKind,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

struct PendingArrival {
    id: u64,
    start: f64,
    rate: f64,
    f_center: f64,
    samples: Vec<C64>,
    collided: bool,
}

impl PendingArrival {
    fn end(&self) -> f64 {
        self.start + self.samples.len() as f64 / self.rate
    }
}

struct Endpoint {
    name: String,
    tx_until: f64,
    /// Own transmit windows extended by turnaround: receive blackout spans.
    mute_windows: Vec<(f64, f64)>,
    active: Vec<PendingArrival>,
}

pub struct Medium {
    model: ChannelModel,
    rebased: ChannelModel,
    latency: f64,
    now: f64,
    seq: u64,
    arrival_counter: u64,
    heap: BinaryHeap<Reverse<Ev>>,
    endpoints: Vec<Endpoint>,
    data_loss: Option<(f64, u64)>, // probability, rng state
    log: Vec<LogEntry>,
}

impl Medium {
    pub fn new(model: ChannelModel) -> Result<Medium> {
        model.validate()?;
        let latency = model.latency();
        let mut rebased = model.clone();
        for tap in &mut rebased.taps {
            tap.0 -= latency;
        }
        Ok(Medium {
            model,
            rebased,
            latency,
            now: 0.0,
            seq: 0,
            arrival_counter: 0,
            heap: BinaryHeap::new(),
            endpoints: Vec::new(),
            data_loss: None,
            log: Vec::new(),
        })
    }

    pub fn add_endpoint(&mut self, name: &str) -> EndpointId {
        self.endpoints.push(Endpoint {
            name: name.to_string(),
            tx_until: f64::NEG_INFINITY,
            mute_windows: Vec::new(),
            active: Vec::new(),
        });
        EndpointId(self.endpoints.len() - 1)
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn endpoint_name(&self, ep: EndpointId) -> &str {
        &self.endpoints[ep.0].name
    }

    pub fn event_log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Drop DATA-class frames with probability `p`, deterministically from
    /// `seed`. Control traffic is never dropped.
    pub fn set_data_loss(&mut self, p: f64, seed: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("loss probability must be in [0, 1]"));
        }
        self.data_loss = Some((p, seed));
        Ok(())
    }

    /// Transmit a baseband burst from `from` at the current virtual time.
    /// Returns the transmission end time. Transmitting while the endpoint's
    /// previous transmission is still on the air is a protocol bug.
    pub fn transmit(
        &mut self,
        from: EndpointId,
        sig: &BasebandSignal,
        f_center: f64,
        class: TxClass,
    ) -> Result<f64> {
        if sig.samples.is_empty() {
            return Err(Error::param("cannot transmit an empty burst"));
        }
        let t0 = self.now;
        let duration = sig.duration();
        {
            let ep = &mut self.endpoints[from.0];
            if t0 < ep.tx_until {
                return Err(Error::param(format!(
                    "endpoint {} transmit overlaps its own previous transmission",
                    ep.name
                )));
            }
            ep.tx_until = t0 + duration;
            ep.mute_windows
                .push((t0, t0 + duration + self.model.turnaround));
        }
        self.log.push(LogEntry {
            time: t0,
            endpoint: from.0,
            kind: LogKind::TxStart {
                class,
                f_center,
                duration,
            },
        });

        let lost = if class == TxClass::Data {
            match &mut self.data_loss {
                Some((p, state)) => {
                    let draw = splitmix64(state) as f64 / u64::MAX as f64;
                    draw < *p
                }
                None => false,
            }
        } else {
            false
        };

        for idx in 0..self.endpoints.len() {
            if idx == from.0 {
                continue;
            }
            if lost {
                self.log.push(LogEntry {
                    time: t0,
                    endpoint: idx,
                    kind: LogKind::RxLost { class },
                });
                continue;
            }
            let mut seed_state = self
                .model
                .rng_seed
                .wrapping_add(self.arrival_counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            self.arrival_counter += 1;
            let mut per_arrival = self.rebased.clone();
            per_arrival.rng_seed = splitmix64(&mut seed_state);
            let rx = propagate_baseband(sig, f_center, &per_arrival)?;
            let id = self.seq;
            let arrival = PendingArrival {
                id,
                start: t0 + self.latency,
                rate: rx.sample_rate,
                f_center,
                samples: rx.samples,
                collided: false,
            };
            let end = arrival.end();
            self.endpoints[idx].active.push(arrival);
            self.push_event(end, EvKind::ArrivalEnd { ep: idx, id });
        }
        Ok(t0 + duration)
    }

    /// Schedule a wake event for an endpoint at `at >= now`.
    pub fn schedule_wake(&mut self, ep: EndpointId, at: f64, token: u64) -> Result<()> {
        if at < self.now {
            return Err(Error::param("cannot schedule a wake in the past"));
        }
        self.push_event(at, EvKind::Wake { ep: ep.0, token });
        Ok(())
    }

    fn push_event(&mut self, time: f64, kind: EvKind) {
        let ev = Ev {
            time,
            seq: self.seq,
            kind,
        };
        self.seq += 1;
        self.heap.push(Reverse(ev));
    }

    /// Advance virtual time to the next event and return it. `None` when the
    /// queue is drained.
    pub fn next(&mut self) -> Option<MediumEvent> {
        loop {
            let Reverse(ev) = self.heap.pop()?;
            self.now = self.now.max(ev.time);
            match ev.kind {
                EvKind::Wake { ep, token } => {
                    return Some(MediumEvent::Wake {
                        at: EndpointId(ep),
                        time: self.now,
                        token,
                    });
                }
                EvKind::ArrivalEnd { ep, id } => {
                    if let Some(event) = self.finish_arrival(ep, id) {
                        return Some(event);
                    }
                    // merged into a later-ending arrival; keep draining
                }
            }
        }
    }

    fn finish_arrival(&mut self, ep_idx: usize, id: u64) -> Option<MediumEvent> {
        let pos = self.endpoints[ep_idx].active.iter().position(|a| a.id == id)?;
        let arrival = self.endpoints[ep_idx].active.remove(pos);

        // same-band overlap with an arrival still on the air: fold this one
        // into it and deliver when that one ends
        let overlap_pos = self.endpoints[ep_idx].active.iter().position(|other| {
            other.f_center == arrival.f_center && other.start < arrival.end()
        });
        if let Some(pos) = overlap_pos {
            let ep = &mut self.endpoints[ep_idx];
            let other = ep.active.remove(pos);
            let merged = merge_arrivals(other, arrival);
            ep.active.push(merged);
            return None;
        }

        let mut arrival = arrival;
        let muted = apply_mute(&self.endpoints[ep_idx].mute_windows, &mut arrival);
        let duration = arrival.samples.len() as f64 / arrival.rate;
        self.log.push(LogEntry {
            time: self.now,
            endpoint: ep_idx,
            kind: LogKind::RxDelivered {
                f_center: arrival.f_center,
                duration,
                collided: arrival.collided,
                muted,
            },
        });
        let signal = BasebandSignal {
            samples: arrival.samples,
            sample_rate: arrival.rate,
        };
        Some(MediumEvent::Rx {
            at: EndpointId(ep_idx),
            time: self.now,
            signal,
            f_center: arrival.f_center,
            collided: arrival.collided,
            muted,
        })
    }

}

/// Zero arrival samples inside the endpoint's own blackout windows.
fn apply_mute(windows: &[(f64, f64)], arrival: &mut PendingArrival) -> bool {
    let start = arrival.start;
    let rate = arrival.rate;
    let len = arrival.samples.len();
    let end = start + len as f64 / rate;
    let mut muted = false;
    for &(w0, w1) in windows {
        if w1 <= start || w0 >= end {
            continue;
        }
        let lo = ((w0.max(start) - start) * rate).floor().max(0.0) as usize;
        let hi = (((w1.min(end) - start) * rate).ceil() as usize).min(len);
        if lo < hi {
            muted = true;
            for v in &mut arrival.samples[lo..hi] {
                *v = C64::new(0.0, 0.0);
            }
        }
    }
    muted
}

fn merge_arrivals(mut keep: PendingArrival, other: PendingArrival) -> PendingArrival {
    let rate = keep.rate;
    let new_start = keep.start.min(other.start);
    let new_end = keep.end().max(other.end());
    let n = ((new_end - new_start) * rate).round() as usize;
    let mut samples = vec![C64::new(0.0, 0.0); n];
    for (src_start, src) in [(keep.start, &keep.samples), (other.start, &other.samples)] {
        let off = ((src_start - new_start) * rate).round() as usize;
        for (i, &v) in src.iter().enumerate() {
            if off + i < samples.len() {
                samples[off + i] += v;
            }
        }
    }
    keep.start = new_start;
    keep.samples = samples;
    keep.collided = true;
    keep
}

/// Two named endpoints sharing one channel model.
pub fn half_duplex_link(
    a: &str,
    b: &str,
    model: &ChannelModel,
) -> Result<(Medium, EndpointId, EndpointId)> {
    let mut medium = Medium::new(model.clone())?;
    let ep_a = medium.add_endpoint(a);
    let ep_b = medium.add_endpoint(b);
    Ok((medium, ep_a, ep_b))
}
