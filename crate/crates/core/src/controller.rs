//! Receptor firmware: impedance-rate classification, LED signalling, glitch
//! filtering and the wing-flap reaction.
//!
//! All state lives in fixed-size rings; nothing allocates after
//! construction.

use std::fmt;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{c, Scalar};
use crate::receptor::Site;

/// Upper bound on the impedance ring length.
pub const MAX_Z_SAMPLES: usize = 8;
/// Upper bound on the glitch ring length.
pub const MAX_GLITCH: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("tick at t={t} arrives before last tick {last} + interval")]
    OutOfOrder { t: f64, last: f64 },
    #[error("controller config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ControllerConfig<T> {
    /// s
    pub tick_interval: T,
    /// Duration of each pulse of the readout pair, ms.
    pub pulse_ms: T,
    /// s
    pub buffer_span: T,
    /// Ω per buffer span
    pub rate_threshold: T,
    pub glitch_count: u32,
    /// s
    pub reaction_duration: T,
    /// s
    pub flap_on: T,
    /// W
    pub flap_power: T,
    /// s
    pub flap_cooldown: T,
    pub site: Site,
}

impl<T: Scalar> Default for ControllerConfig<T> {
    fn default() -> Self {
        Self::new(Site::Thorax)
    }
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn new(site: Site) -> Self {
        Self {
            tick_interval: c(1.4),
            pulse_ms: c(200.0),
            buffer_span: c(3.0),
            rate_threshold: c(2000.0),
            glitch_count: 5,
            reaction_duration: c(65.0),
            flap_on: c(5.0),
            flap_power: c(6.6),
            flap_cooldown: c(60.0),
            site,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let err = |m: &str| Err(ControllerError::Config(m.into()));
        let positive = [
            self.tick_interval,
            self.pulse_ms,
            self.buffer_span,
            self.reaction_duration,
            self.flap_on,
            self.flap_power,
            self.flap_cooldown,
        ];
        if positive.iter().any(|v| !(*v > T::zero())) || !(self.rate_threshold >= T::zero()) {
            return err("durations, power and threshold must be positive");
        }
        if self.glitch_count == 0 || self.glitch_count as usize > MAX_GLITCH {
            return err("glitch_count out of range");
        }
        if self.z_capacity() > MAX_Z_SAMPLES {
            return err("buffer_span too long for the tick interval");
        }
        let sum = self.flap_on + self.flap_cooldown;
        if (sum - self.reaction_duration).abs() > self.reaction_duration * c(1e-9) {
            return err("flap_on + flap_cooldown must equal reaction_duration");
        }
        // the pulse pair must finish before the next tick
        if !(self.pulse_ms * c(2e-3) < self.tick_interval) {
            return err("pulse pair longer than the tick interval");
        }
        Ok(())
    }

    /// Samples retained: enough that the oldest is at least one tick short
    /// of `buffer_span` behind the newest.
    pub fn z_capacity(&self) -> usize {
        (self.buffer_span / self.tick_interval)
            .floor()
            .to_usize()
            .unwrap_or(0)
            + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Decrease,
    Increase,
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedColor {
    Red,
    Yellow,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedPattern {
    /// Four blinks at 4 Hz.
    #[serde(rename = "blink4")]
    Blink4,
    /// One 0.5 s blink.
    #[serde(rename = "single500")]
    Single500,
    #[serde(rename = "rapid10")]
    Rapid10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Led { color: LedColor, pattern: LedPattern },
    Flap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputEvent<T> {
    pub t: T,
    pub kind: EventKind,
    /// Actuator state after the event.
    pub flap_active: bool,
    /// W
    pub power: T,
}

impl<T: Scalar> fmt::Display for OutputEvent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, color, pattern) = match self.kind {
            EventKind::Led { color, pattern } => (
                "led",
                match color {
                    LedColor::Red => "red",
                    LedColor::Yellow => "yellow",
                    LedColor::Both => "both",
                },
                match pattern {
                    LedPattern::Blink4 => "blink4",
                    LedPattern::Single500 => "single500",
                    LedPattern::Rapid10 => "rapid10",
                },
            ),
            EventKind::Flap => ("flap", "-", "-"),
        };
        write!(
            f,
            "t={:.3} kind={} color={} pattern={} flap={} power_W={:.3}",
            self.t.as_f64(),
            kind,
            color,
            pattern,
            u8::from(self.flap_active),
            self.power.as_f64()
        )
    }
}

/// Events produced by one tick; at most a pending flap stop, the
/// classification LED, the reaction LED and the flap start.
pub type TickEvents<T> = ArrayVec<OutputEvent<T>, 4>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode<T> {
    Idle,
    Reaction { t_end: T },
}

/// Fixed ring of `(t, Ẑ)` samples.
#[derive(Debug, Clone)]
pub struct ZBuffer<T> {
    slots: [(T, T); MAX_Z_SAMPLES],
    capacity: usize,
    len: usize,
    head: usize,
}

impl<T: Scalar> ZBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!((1..=MAX_Z_SAMPLES).contains(&capacity));
        Self {
            slots: [(T::zero(), T::zero()); MAX_Z_SAMPLES],
            capacity,
            len: 0,
            head: 0,
        }
    }

    pub fn push(&mut self, t: T, z: T) {
        self.slots[self.head] = (t, z);
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn oldest(&self) -> Option<(T, T)> {
        (self.len > 0).then(|| self.slots[(self.head + self.capacity - self.len) % self.capacity])
    }

    pub fn newest(&self) -> Option<(T, T)> {
        (self.len > 0).then(|| self.slots[(self.head + self.capacity - 1) % self.capacity])
    }
}

/// Endpoint difference of the buffer scaled to `buffer_span`; `None` with
/// fewer than two samples.
pub fn compute_rate<T: Scalar>(buf: &ZBuffer<T>, buffer_span: T) -> Option<T> {
    if buf.len() < 2 {
        return None;
    }
    let (t0, z0) = buf.oldest()?;
    let (t1, z1) = buf.newest()?;
    if !(t1 > t0) {
        return None;
    }
    Some((z1 - z0) * buffer_span / (t1 - t0))
}

pub fn classify<T: Scalar>(rate: Option<T>, cfg: &ControllerConfig<T>) -> Classification {
    match rate {
        Some(r) if r.abs() > cfg.rate_threshold => {
            if r < T::zero() {
                Classification::Decrease
            } else {
                Classification::Increase
            }
        }
        _ => Classification::BelowThreshold,
    }
}

/// Flap start and stop for a reaction triggered at `t`.
pub fn flap_schedule<T: Scalar>(t: T, cfg: &ControllerConfig<T>) -> [OutputEvent<T>; 2] {
    [
        OutputEvent {
            t,
            kind: EventKind::Flap,
            flap_active: true,
            power: cfg.flap_power,
        },
        OutputEvent {
            t: t + cfg.flap_on,
            kind: EventKind::Flap,
            flap_active: false,
            power: T::zero(),
        },
    ]
}

#[derive(Debug, Clone)]
pub struct ControllerState<T> {
    pub mode: Mode<T>,
    z_buffer: ZBuffer<T>,
    glitch: [bool; MAX_GLITCH],
    glitch_len: usize,
    glitch_head: usize,
    last_tick: Option<T>,
    pending_stop: Option<OutputEvent<T>>,
    reactions: u32,
}

impl<T: Scalar> ControllerState<T> {
    pub fn new(cfg: &ControllerConfig<T>) -> Result<Self, ControllerError> {
        cfg.validate()?;
        Ok(Self {
            mode: Mode::Idle,
            z_buffer: ZBuffer::new(cfg.z_capacity()),
            glitch: [false; MAX_GLITCH],
            glitch_len: cfg.glitch_count as usize,
            glitch_head: 0,
            last_tick: None,
            pending_stop: None,
            reactions: 0,
        })
    }

    pub fn z_buffer(&self) -> &ZBuffer<T> {
        &self.z_buffer
    }

    pub fn glitch_ring(&self) -> &[bool] {
        &self.glitch[..self.glitch_len]
    }

    pub fn last_tick(&self) -> Option<T> {
        self.last_tick
    }

    pub fn reaction_count(&self) -> u32 {
        self.reactions
    }

    pub fn flap_active(&self, t: T) -> bool {
        self.pending_stop.is_some_and(|e| t < e.t)
    }

    /// Processes one impedance estimate taken at `t`.
    pub fn tick(
        &mut self,
        cfg: &ControllerConfig<T>,
        z: T,
        t: T,
    ) -> Result<TickEvents<T>, ControllerError> {
        if let Some(last) = self.last_tick {
            let slack = cfg.tick_interval * c(1e-6);
            if t + slack < last + cfg.tick_interval {
                return Err(ControllerError::OutOfOrder {
                    t: t.as_f64(),
                    last: last.as_f64(),
                });
            }
        }
        self.last_tick = Some(t);
        let mut out = TickEvents::new();
        out.extend(self.flush(t));

        if let Mode::Reaction { t_end } = self.mode {
            if t >= t_end {
                self.mode = Mode::Idle;
            }
        }

        self.z_buffer.push(t, z);
        let class = classify(compute_rate(&self.z_buffer, cfg.buffer_span), cfg);
        let flap = self.flap_active(t);
        let power = if flap { cfg.flap_power } else { T::zero() };
        let (color, pattern) = match class {
            Classification::Decrease => (LedColor::Red, LedPattern::Blink4),
            Classification::Increase => (LedColor::Yellow, LedPattern::Blink4),
            Classification::BelowThreshold => (LedColor::Both, LedPattern::Single500),
        };
        out.push(OutputEvent {
            t,
            kind: EventKind::Led { color, pattern },
            flap_active: flap,
            power,
        });

        self.glitch[self.glitch_head] = class == Classification::Decrease;
        self.glitch_head = (self.glitch_head + 1) % self.glitch_len;
        let all = self.glitch_ring().iter().all(|&d| d);
        if all && cfg.site == Site::Thorax && self.mode == Mode::Idle {
            self.mode = Mode::Reaction {
                t_end: t + cfg.reaction_duration,
            };
            self.reactions += 1;
            self.glitch = [false; MAX_GLITCH];
            let [start, stop] = flap_schedule(t, cfg);
            out.push(OutputEvent {
                t,
                kind: EventKind::Led {
                    color: LedColor::Red,
                    pattern: LedPattern::Rapid10,
                },
                flap_active: true,
                power: cfg.flap_power,
            });
            out.push(start);
            self.pending_stop = Some(stop);
        }
        Ok(out)
    }

    /// Releases a scheduled flap stop once `t` has reached it.
    pub fn flush(&mut self, t: T) -> Option<OutputEvent<T>> {
        match self.pending_stop {
            Some(e) if e.t <= t => {
                self.pending_stop = None;
                Some(e)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(site: Site) -> ControllerConfig<f64> {
        ControllerConfig::new(site)
    }

    fn buf(samples: &[(f64, f64)]) -> ZBuffer<f64> {
        let mut b = ZBuffer::new(3);
        for &(t, z) in samples {
            b.push(t, z);
        }
        b
    }

    #[test]
    fn capacity_is_three() {
        assert_eq!(cfg(Site::Thorax).z_capacity(), 3);
        cfg(Site::Thorax).validate().unwrap();
    }

    #[test]
    fn rate_examples() {
        let flat = buf(&[(0.0, 500e3), (1.4, 500e3), (2.8, 500e3)]);
        assert_eq!(compute_rate(&flat, 3.0), Some(0.0));
        let r = compute_rate(&buf(&[(0.0, 500e3), (2.8, 495e3)]), 3.0).unwrap();
        assert!((r + 5e3 * 3.0 / 2.8).abs() < 1e-9);
        assert!((r + 5357.142857).abs() < 1e-3);
        let shifted = compute_rate(&buf(&[(0.0, 600e3), (2.8, 595e3)]), 3.0).unwrap();
        assert!((shifted - r).abs() < 1e-9);
        assert_eq!(compute_rate(&buf(&[(0.0, 1.0)]), 3.0), None);
    }

    #[test]
    fn ring_drops_oldest() {
        let b = buf(&[(0.0, 9.0), (1.4, 1.0), (2.8, 2.0), (4.2, 3.0)]);
        assert_eq!(b.len(), 3);
        assert_eq!(b.oldest(), Some((1.4, 1.0)));
        assert_eq!(b.newest(), Some((4.2, 3.0)));
    }

    #[test]
    fn classification_examples() {
        let k = cfg(Site::Thorax);
        assert_eq!(classify(Some(-5360.0), &k), Classification::Decrease);
        assert_eq!(classify(Some(3000.0), &k), Classification::Increase);
        assert_eq!(classify(Some(-2000.0), &k), Classification::BelowThreshold);
        assert_eq!(classify(None, &k), Classification::BelowThreshold);
    }

    fn drive(k: &ControllerConfig<f64>, zs: &[f64]) -> Vec<OutputEvent<f64>> {
        let mut s = ControllerState::new(k).unwrap();
        let mut out = Vec::new();
        for (i, &z) in zs.iter().enumerate() {
            out.extend(s.tick(k, z, i as f64 * 1.4).unwrap());
        }
        out
    }

    #[test]
    fn five_decreases_trigger_flap() {
        let k = cfg(Site::Thorax);
        // two ticks to fill the buffer, then a steady 10 kΩ fall per tick
        let zs: Vec<f64> = (0..7).map(|i| 500e3 - 10e3 * i as f64).collect();
        let ev = drive(&k, &zs);
        let flaps: Vec<_> = ev.iter().filter(|e| e.kind == EventKind::Flap).collect();
        assert_eq!(flaps.len(), 1);
        // first decrease at tick 1, fifth at tick 5
        assert!((flaps[0].t - 7.0).abs() < 1e-12);
        assert!(flaps[0].flap_active);
        assert_eq!(flaps[0].power, 6.6);
        let rapid = ev
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Led { pattern: LedPattern::Rapid10, .. }))
            .count();
        assert_eq!(rapid, 1);
    }

    #[test]
    fn interrupted_run_does_not_trigger() {
        let k = cfg(Site::Thorax);
        let zs = [500e3, 490e3, 480e3, 480e3, 480e3, 470e3, 460e3, 450e3];
        let ev = drive(&k, &zs);
        assert!(ev.iter().all(|e| e.kind != EventKind::Flap));
    }

    #[test]
    fn wing_never_flaps() {
        let k = cfg(Site::Wing);
        let zs: Vec<f64> = (0..40).map(|i| 900e3 - 10e3 * i as f64).collect();
        let ev = drive(&k, &zs);
        assert!(ev.iter().all(|e| e.kind == EventKind::Flap || !e.flap_active));
        assert!(ev.iter().all(|e| e.kind != EventKind::Flap));
        assert!(ev.iter().filter(|e| matches!(e.kind, EventKind::Led { color: LedColor::Red, .. })).count() > 30);
    }

    #[test]
    fn lockout_and_stop_event() {
        let k = cfg(Site::Thorax);
        let zs: Vec<f64> = (0..80).map(|i| 900e3 - 10e3 * i as f64).collect();
        let ev = drive(&k, &zs);
        let flaps: Vec<_> = ev.iter().filter(|e| e.kind == EventKind::Flap).collect();
        // on at 7.0, off at 12.0, re-trigger at the first tick >= 72.0
        assert!((flaps[0].t - 7.0).abs() < 1e-9 && flaps[0].flap_active);
        assert!((flaps[1].t - 12.0).abs() < 1e-9 && !flaps[1].flap_active);
        assert!(flaps[2].flap_active && flaps[2].t >= 72.0 - 1e-9 && flaps[2].t < 73.4);
        assert!(ev.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn flap_schedule_values() {
        let [on, off] = flap_schedule(100.0, &cfg(Site::Thorax));
        assert_eq!((on.t, on.flap_active, on.power), (100.0, true, 6.6));
        assert_eq!((off.t, off.flap_active, off.power), (105.0, false, 0.0));
        assert!((on.power * (off.t - on.t) - 33.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_early_tick() {
        let k = cfg(Site::Thorax);
        let mut s = ControllerState::new(&k).unwrap();
        s.tick(&k, 1.0, 10.0).unwrap();
        assert!(matches!(s.tick(&k, 1.0, 10.5), Err(ControllerError::OutOfOrder { .. })));
        assert!(s.tick(&k, 1.0, 11.4).is_ok());
    }

    #[test]
    fn log_line_format() {
        let e = OutputEvent {
            t: 12.0,
            kind: EventKind::Flap,
            flap_active: true,
            power: 6.6,
        };
        assert_eq!(e.to_string(), "t=12.000 kind=flap color=- pattern=- flap=1 power_W=6.600");
        let l = OutputEvent {
            t: 1.4,
            kind: EventKind::Led {
                color: LedColor::Both,
                pattern: LedPattern::Single500,
            },
            flap_active: false,
            power: 0.0,
        };
        assert_eq!(l.to_string(), "t=1.400 kind=led color=both pattern=single500 flap=0 power_W=0.000");
    }

    #[test]
    fn rejects_inconsistent_config() {
        let mut k = cfg(Site::Thorax);
        k.flap_cooldown = 50.0;
        assert!(k.validate().is_err());
        let mut k = cfg(Site::Thorax);
        k.glitch_count = 0;
        assert!(ControllerState::new(&k).is_err());
    }
}
