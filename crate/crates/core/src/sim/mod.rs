//! Epoch-driven CSMA/CA simulator for independent (STR) links.
//!
//! Each link advances through epochs: a run of idle backoff slots, a success,
//! or a collision. Busy epochs include the trailing AIFS, and every epoch counts
//! as one counter decrement for the stations that did not transmit in it. Time
//! is kept in integer nanoseconds so busy and idle time add up to the step
//! length exactly.
//!
//! Links are processed in global time order, finishes before starts, lowest
//! link index first. Every link draws from its own random stream, so in gated
//! mode a link's trajectory does not depend on the others.

mod metrics;

pub use metrics::{jain_index, measure_access_delay, AccessEvent, StepMetrics};

use crate::bianchi::durations_at_rate;
use crate::channel::ChannelRealization;
use crate::mac::{max_backoff_stage, IcwMatrix, NetworkConfig, PolicyMatrix, TxMode};
use crate::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Per-(station, link) channel-occupancy observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// SNR in dB.
    pub g: Matrix<f64>,
    /// Fraction of the step the link was busy; identical across stations.
    pub u: Matrix<f64>,
}

impl Observation {
    pub fn new(snr_db: Matrix<f64>, busy_frac: &[f64]) -> Self {
        let u = Matrix::from_fn(snr_db.rows(), snr_db.cols(), |_, l| busy_frac[l]);
        Self { g: snr_db, u }
    }
}

/// Backoff state of one station on one link.
#[derive(Clone, Debug, PartialEq)]
pub struct StaLinkState {
    pub stage: u32,
    /// Slots left before the station's next transmission opportunity.
    pub counter: u32,
    pub cw: u32,
    pub hol_since_ns: u64,
    /// Holds a head-of-line packet (always true in gated mode).
    pub active: bool,
}

/// Cumulative per-link counters over the simulator's lifetime.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkCounters {
    /// Backoff slots, counting every idle slot and every busy epoch once.
    pub slots: u64,
    pub tx: Vec<u64>,
    pub collided: Vec<u64>,
    pub successes: u64,
    pub collisions: u64,
}

impl LinkCounters {
    /// Empirical per-slot transmission probability of a station.
    pub fn tx_rate(&self, sta: usize) -> f64 {
        self.tx[sta] as f64 / self.slots as f64
    }

    /// Fraction of a station's transmissions that collided.
    pub fn collision_rate(&self, sta: usize) -> f64 {
        self.collided[sta] as f64 / self.tx[sta] as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Tx,
    Success,
    Collision,
    Freeze,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Tx => "tx",
            TraceKind::Success => "success",
            TraceKind::Collision => "collision",
            TraceKind::Freeze => "freeze",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub timestamp_us: f64,
    pub link: usize,
    pub sta: usize,
    pub event: TraceKind,
}

#[derive(Clone, Debug)]
enum EpochKind {
    Idle { slots: u32 },
    Success { sta: usize },
    Collision { stas: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Epoch {
    start: u64,
    end: u64,
    kind: EpochKind,
    /// Stations whose counter expired without an allocated packet.
    misses: Vec<usize>,
    /// Stations that neither transmitted nor missed; they decrement at the end.
    waiting: Vec<usize>,
}

impl Epoch {
    fn is_busy(&self) -> bool {
        !matches!(self.kind, EpochKind::Idle { .. })
    }
}

/// Parameters in force during one step, per (station, link).
struct StepParams<'a> {
    beta: &'a PolicyMatrix,
    icw: &'a IcwMatrix,
    max_stage: Matrix<u32>,
    success_ns: Matrix<u64>,
    airtime_ns: Matrix<u64>,
    aifs_ns: u64,
    slot_ns: u64,
    window: (u64, u64),
}

impl StepParams<'_> {
    fn stage_window(&self, sta: usize, link: usize, stage: u32) -> u32 {
        self.icw.get(sta, link) << stage
    }
}

/// Per-step accumulators.
struct StepAccum {
    delivered: Matrix<u64>,
    busy_ns: Vec<u64>,
    idle_ns: Vec<u64>,
    collisions: u64,
    access: Vec<AccessEvent>,
}

impl StepAccum {
    fn account(&mut self, link: usize, start: u64, end: u64, busy: bool, window: (u64, u64)) {
        let lo = start.max(window.0);
        let hi = end.min(window.1);
        if hi > lo {
            if busy {
                self.busy_ns[link] += hi - lo;
            } else {
                self.idle_ns[link] += hi - lo;
            }
        }
    }
}

struct LinkEngine {
    rng: ChaCha8Rng,
    stations: Vec<StaLinkState>,
    /// Queue-draw mode: arrival times of packets queued behind the head.
    queues: Vec<VecDeque<u64>>,
    /// Queue-draw mode: packets assigned here but not yet seen by the link.
    arrivals: Vec<(u64, usize)>,
    now: u64,
    open: Option<Epoch>,
    counters: LinkCounters,
}

impl LinkEngine {
    fn has_contenders(&self) -> bool {
        self.stations.iter().any(|s| s.active)
    }

    /// Time of the next epoch start, if the link has anything to do.
    fn next_start(&self) -> Option<u64> {
        if self.open.is_some() {
            return None;
        }
        if self.has_contenders() {
            return Some(self.now);
        }
        self.arrivals
            .iter()
            .map(|&(t, _)| t)
            .min()
            .map(|t| t.max(self.now))
    }

    fn draw_counter(&mut self, cw: u32) -> u32 {
        self.rng.random_range(0..cw)
    }

    fn enter_stage(&mut self, sta: usize, stage: u32, params: &StepParams, link: usize) {
        let cw = params.stage_window(sta, link, stage);
        let counter = self.draw_counter(cw);
        let st = &mut self.stations[sta];
        st.stage = stage;
        st.cw = cw;
        st.counter = counter;
    }
}

/// A simulation session: backoff state persists across decision steps.
pub struct Simulator {
    cfg: NetworkConfig,
    links: Vec<LinkEngine>,
    umac_rng: ChaCha8Rng,
    clock_ns: u64,
    started: bool,
    trace: Option<Vec<TraceEvent>>,
}

/// Independent random stream `stream` of seed `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn us_to_ns(us: f64) -> u64 {
    (us * 1000.0).round() as u64
}

impl Simulator {
    pub fn new(cfg: &NetworkConfig, seed: u64) -> Self {
        let n = cfg.num_stas;
        let links = (0..cfg.num_links())
            .map(|l| LinkEngine {
                rng: rng_stream(seed, 1 + l as u64),
                stations: vec![
                    StaLinkState {
                        stage: 0,
                        counter: 0,
                        cw: cfg.w_min,
                        hol_since_ns: 0,
                        active: false,
                    };
                    n
                ],
                queues: vec![VecDeque::new(); n],
                arrivals: Vec::new(),
                now: 0,
                open: None,
                counters: LinkCounters {
                    tx: vec![0; n],
                    collided: vec![0; n],
                    ..LinkCounters::default()
                },
            })
            .collect();
        Self {
            cfg: cfg.clone(),
            links,
            umac_rng: rng_stream(seed, 0),
            clock_ns: 0,
            started: false,
            trace: None,
        }
    }

    /// Records tx/success/collision/freeze events from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Drains the recorded trace.
    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn link_counters(&self, link: usize) -> &LinkCounters {
        &self.links[link].counters
    }

    pub fn state(&self, sta: usize, link: usize) -> &StaLinkState {
        &self.links[link].stations[sta]
    }

    /// Session time at the start of the next step.
    pub fn clock_ns(&self) -> u64 {
        self.clock_ns
    }

    /// Simulates one decision step of `duration_us` with the given policy and channel.
    pub fn run_step(
        &mut self,
        beta: &PolicyMatrix,
        icw: &IcwMatrix,
        channel: &ChannelRealization,
        duration_us: u64,
    ) -> (Observation, StepMetrics) {
        let (n, l) = (self.cfg.num_stas, self.cfg.num_links());
        assert_eq!(beta.matrix().shape(), (n, l), "policy shape");
        assert_eq!(icw.matrix().shape(), (n, l), "ICW shape");
        assert_eq!(channel.rate_mbps.shape(), (n, l), "channel shape");

        let timing = &self.cfg.timing;
        let mut success_ns = Matrix::filled(n, l, 0);
        let mut airtime_ns = Matrix::filled(n, l, 0);
        for sta in 0..n {
            for link in 0..l {
                let rate = channel.rate_mbps[(sta, link)];
                let (t_su, _) = durations_at_rate(timing, rate);
                success_ns[(sta, link)] = us_to_ns(t_su);
                airtime_ns[(sta, link)] = us_to_ns(timing.phy_header_us + timing.payload_bits / rate);
            }
        }
        let start = self.clock_ns;
        let end = start + duration_us * 1000;
        let params = StepParams {
            beta,
            icw,
            max_stage: icw.matrix().map(|&w| max_backoff_stage(w, self.cfg.w_max)),
            success_ns,
            airtime_ns,
            aifs_ns: us_to_ns(timing.aifs_us),
            slot_ns: us_to_ns(timing.slot_us),
            window: (start, end),
        };
        let mut acc = StepAccum {
            delivered: Matrix::filled(n, l, 0),
            busy_ns: vec![0; l],
            idle_ns: vec![0; l],
            collisions: 0,
            access: Vec::new(),
        };

        if !self.started {
            self.bootstrap(&params);
            self.started = true;
        }
        self.refit_windows(&params);
        for (link, engine) in self.links.iter().enumerate() {
            if let Some(ep) = &engine.open {
                acc.account(link, ep.start, ep.end, ep.is_busy(), params.window);
            }
            for (sta, st) in engine.stations.iter().enumerate() {
                if st.active {
                    acc.access.push(AccessEvent::HeadOfLine {
                        sta,
                        link,
                        at_ns: st.hol_since_ns,
                    });
                }
            }
        }

        while let Some((link, finish)) = self.next_event(end) {
            if finish {
                self.finish_epoch(link, &params, &mut acc);
            } else {
                self.start_epoch(link, &params, &mut acc);
            }
        }
        for (link, engine) in self.links.iter_mut().enumerate() {
            if engine.open.is_none() && engine.now < end {
                acc.account(link, engine.now, end, false, params.window);
                engine.now = end;
            }
        }
        self.clock_ns = end;

        let metrics = self.summarize(&acc, duration_us);
        let obs = Observation::new(channel.snr_db.clone(), &metrics.busy_frac);
        (obs, metrics)
    }

    fn bootstrap(&mut self, params: &StepParams) {
        let now = params.window.0;
        match self.cfg.tx_mode {
            TxMode::Gated => {
                for link in 0..self.links.len() {
                    for sta in 0..self.cfg.num_stas {
                        let engine = &mut self.links[link];
                        engine.stations[sta].active = true;
                        engine.stations[sta].hol_since_ns = now;
                        engine.enter_stage(sta, 0, params, link);
                    }
                }
            }
            TxMode::QueueDraw => {
                // one packet in flight per link per station
                for sta in 0..self.cfg.num_stas {
                    for _ in 0..self.links.len() {
                        let target = self.draw_link(sta, params);
                        self.links[target].arrivals.push((now, sta));
                    }
                }
            }
        }
    }

    /// Clamps stages and counters to the windows of a new ICW.
    fn refit_windows(&mut self, params: &StepParams) {
        for (link, engine) in self.links.iter_mut().enumerate() {
            for (sta, st) in engine.stations.iter_mut().enumerate() {
                let stage = st.stage.min(params.max_stage[(sta, link)]);
                st.stage = stage;
                st.cw = params.stage_window(sta, link, stage);
                st.counter = st.counter.min(st.cw - 1);
            }
        }
    }

    fn draw_link(&mut self, sta: usize, params: &StepParams) -> usize {
        let row = params.beta.matrix().row(sta);
        let u: f64 = self.umac_rng.random();
        let mut acc = 0.0;
        for (link, &b) in row.iter().enumerate() {
            acc += b;
            if u < acc {
                return link;
            }
        }
        // rounding left u above the cumulative sum: last link with positive mass
        row.iter().rposition(|&b| b > 0.0).unwrap_or(row.len() - 1)
    }

    /// Earliest pending event before the step end: `(link, is_finish)`.
    fn next_event(&self, end: u64) -> Option<(usize, bool)> {
        let mut best: Option<(u64, u8, usize)> = None;
        for (link, engine) in self.links.iter().enumerate() {
            let candidate = match &engine.open {
                Some(ep) if ep.end <= end => Some((ep.end, 0, link)),
                Some(_) => None,
                None => engine
                    .next_start()
                    .filter(|&t| t < end)
                    .map(|t| (t, 1, link)),
            };
            if let Some(c) = candidate {
                if best.is_none_or(|b| c < b) {
                    best = Some(c);
                }
            }
        }
        best.map(|(_, kind, link)| (link, kind == 0))
    }

    fn start_epoch(&mut self, link: usize, params: &StepParams, acc: &mut StepAccum) {
        let gated = self.cfg.tx_mode == TxMode::Gated;
        let engine = &mut self.links[link];
        let t = engine.next_start().expect("start scheduled");
        if t > engine.now {
            acc.account(link, engine.now, t, false, params.window);
            engine.now = t;
        }

        // queued arrivals that have reached the link join now
        let mut i = 0;
        while i < engine.arrivals.len() {
            let (at, sta) = engine.arrivals[i];
            if at <= t {
                engine.arrivals.swap_remove(i);
                if engine.stations[sta].active {
                    engine.queues[sta].push_back(at);
                } else {
                    engine.stations[sta].active = true;
                    engine.stations[sta].hol_since_ns = at;
                    engine.enter_stage(sta, 0, params, link);
                    acc.access.push(AccessEvent::HeadOfLine { sta, link, at_ns: at });
                }
            } else {
                i += 1;
            }
        }

        let active: Vec<usize> = (0..engine.stations.len())
            .filter(|&s| engine.stations[s].active)
            .collect();
        let expired: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&s| engine.stations[s].counter == 0)
            .collect();

        let mut misses = Vec::new();
        let mut transmitters = Vec::new();
        if expired.is_empty() {
            let min = active
                .iter()
                .map(|&s| engine.stations[s].counter)
                .min()
                .expect("active station");
            let slots = if gated { min } else { 1 };
            engine.counters.slots += u64::from(slots);
            let epoch = Epoch {
                start: t,
                end: t + u64::from(slots) * params.slot_ns,
                kind: EpochKind::Idle { slots },
                misses,
                waiting: active,
            };
            acc.account(link, epoch.start, epoch.end, false, params.window);
            engine.open = Some(epoch);
            return;
        }

        for &s in &expired {
            if gated {
                let u: f64 = engine.rng.random();
                if u < params.beta.get(s, link) {
                    transmitters.push(s);
                } else {
                    misses.push(s);
                }
            } else {
                transmitters.push(s);
            }
        }
        engine.counters.slots += 1;
        for &s in &transmitters {
            engine.counters.tx[s] += 1;
        }
        let waiting: Vec<usize> = active
            .into_iter()
            .filter(|&s| engine.stations[s].counter > 0)
            .collect();

        let (kind, len) = match transmitters.len() {
            0 => (EpochKind::Idle { slots: 1 }, params.slot_ns),
            1 => {
                let sta = transmitters[0];
                (EpochKind::Success { sta }, params.success_ns[(sta, link)])
            }
            _ => {
                let airtime = transmitters
                    .iter()
                    .map(|&s| params.airtime_ns[(s, link)])
                    .max()
                    .unwrap_or(0);
                (
                    EpochKind::Collision {
                        stas: transmitters.clone(),
                    },
                    airtime + params.aifs_ns,
                )
            }
        };
        let epoch = Epoch {
            start: t,
            end: t + len,
            kind,
            misses,
            waiting,
        };
        acc.account(link, epoch.start, epoch.end, epoch.is_busy(), params.window);
        if let Some(trace) = self.trace.as_mut() {
            let ts = t as f64 / 1000.0;
            for &sta in &transmitters {
                trace.push(TraceEvent { timestamp_us: ts, link, sta, event: TraceKind::Tx });
            }
            if epoch.is_busy() {
                for &sta in &epoch.waiting {
                    trace.push(TraceEvent { timestamp_us: ts, link, sta, event: TraceKind::Freeze });
                }
            }
        }
        engine.open = Some(epoch);
    }

    fn finish_epoch(&mut self, link: usize, params: &StepParams, acc: &mut StepAccum) {
        let gated = self.cfg.tx_mode == TxMode::Gated;
        let epoch = self.links[link].open.take().expect("open epoch");
        let end = epoch.end;
        self.links[link].now = end;

        let decrement = match epoch.kind {
            EpochKind::Idle { slots } => slots,
            _ => 1,
        };
        {
            let engine = &mut self.links[link];
            for &s in &epoch.waiting {
                // a smaller ICW installed mid-epoch may have clamped the counter
                let st = &mut engine.stations[s];
                st.counter = st.counter.saturating_sub(decrement);
            }
            for &s in &epoch.misses {
                let stage = engine.stations[s].stage;
                engine.enter_stage(s, stage, params, link);
                engine.stations[s].hol_since_ns = end;
                acc.access.push(AccessEvent::HeadOfLine { sta: s, link, at_ns: end });
            }
        }

        match epoch.kind {
            EpochKind::Idle { .. } => {}
            EpochKind::Success { sta } => {
                acc.delivered[(sta, link)] += 1;
                acc.access.push(AccessEvent::Delivered { sta, link, at_ns: end });
                self.links[link].counters.successes += 1;
                self.trace_event(end, link, sta, TraceKind::Success);
                if gated {
                    let engine = &mut self.links[link];
                    engine.enter_stage(sta, 0, params, link);
                    engine.stations[sta].hol_since_ns = end;
                    acc.access.push(AccessEvent::HeadOfLine { sta, link, at_ns: end });
                } else {
                    let next = self.links[link].queues[sta].pop_front();
                    let engine = &mut self.links[link];
                    match next {
                        Some(_) => {
                            engine.enter_stage(sta, 0, params, link);
                            engine.stations[sta].hol_since_ns = end;
                            acc.access.push(AccessEvent::HeadOfLine { sta, link, at_ns: end });
                        }
                        None => engine.stations[sta].active = false,
                    }
                    // saturated source: the delivered packet is replaced
                    let target = self.draw_link(sta, params);
                    self.links[target].arrivals.push((end, sta));
                }
            }
            EpochKind::Collision { stas } => {
                acc.collisions += 1;
                self.links[link].counters.collisions += 1;
                for &s in &stas {
                    let engine = &mut self.links[link];
                    engine.counters.collided[s] += 1;
                    let stage = (engine.stations[s].stage + 1).min(params.max_stage[(s, link)]);
                    engine.enter_stage(s, stage, params, link);
                    self.trace_event(end, link, s, TraceKind::Collision);
                }
            }
        }
    }

    fn trace_event(&mut self, at_ns: u64, link: usize, sta: usize, event: TraceKind) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                timestamp_us: at_ns as f64 / 1000.0,
                link,
                sta,
                event,
            });
        }
    }

    fn summarize(&self, acc: &StepAccum, duration_us: u64) -> StepMetrics {
        let (n, l) = (self.cfg.num_stas, self.cfg.num_links());
        let payload = self.cfg.timing.payload_bits;
        let dur = duration_us as f64;
        let thr_link_mbps: Vec<f64> = (0..l)
            .map(|link| {
                let count: u64 = (0..n).map(|s| acc.delivered[(s, link)]).sum();
                count as f64 * payload / dur
            })
            .collect();
        let thr_sta_mbps: Vec<f64> = (0..n)
            .map(|sta| {
                let count: u64 = acc.delivered.row(sta).iter().sum();
                count as f64 * payload / dur
            })
            .collect();
        let (jain, jain_vacuous) = jain_index(&thr_sta_mbps);
        let dur_ns = duration_us * 1000;
        StepMetrics {
            busy_frac: acc
                .busy_ns
                .iter()
                .map(|&b| b as f64 / dur_ns as f64)
                .collect(),
            busy_ns: acc.busy_ns.clone(),
            idle_ns: acc.idle_ns.clone(),
            successes: acc.delivered.as_slice().iter().sum(),
            collisions: acc.collisions,
            access_delay_us: measure_access_delay(&acc.access),
            thr_link_mbps,
            thr_sta_mbps,
            jain,
            jain_vacuous,
        }
    }
}

/// One step from a fresh session.
pub fn run_step(
    cfg: &NetworkConfig,
    beta: &PolicyMatrix,
    icw: &IcwMatrix,
    channel: &ChannelRealization,
    duration_us: u64,
    seed: u64,
) -> (Observation, StepMetrics) {
    Simulator::new(cfg, seed).run_step(beta, icw, channel, duration_us)
}

#[cfg(test)]
mod tests;
