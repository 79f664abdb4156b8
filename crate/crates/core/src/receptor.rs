//! Electrical model of a receptor channel and its bipolar-pulse divider
//! readout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{c, Scalar};
use crate::photo::SynthesisParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceptorError {
    #[error("time step must be positive")]
    NonPositiveStep,
    #[error("polaron density must be non-negative")]
    NegativePolaron,
    #[error("ADC code {0} outside 0..=1023")]
    CodeRange(u32),
    #[error("receptor {id}: {reason}")]
    Invalid { id: u32, reason: String },
    #[error("readout: {0}")]
    Readout(&'static str),
}

/// Full-scale ADC code.
pub const ADC_MAX: u16 = 1023;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    Thorax,
    Wing,
}

fn default_gap<T: Scalar>() -> T {
    c(130.0)
}

fn default_wire<T: Scalar>() -> T {
    c(30.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ElectrodePair<T> {
    pub id: u32,
    /// mm
    pub location: [T; 2],
    /// µm
    #[serde(default = "default_gap")]
    pub gap: T,
    /// µm
    #[serde(default = "default_wire")]
    pub wire_diameter: T,
    /// Matrix cell ids sensed by the pair.
    #[serde(default)]
    pub region: Vec<u32>,
    pub site: Site,
}

impl<T: Scalar> ElectrodePair<T> {
    pub fn validate(&self) -> Result<(), ReceptorError> {
        let err = |reason: &str| ReceptorError::Invalid {
            id: self.id,
            reason: reason.into(),
        };
        if !(self.gap > T::zero()) {
            return Err(err("gap must be positive"));
        }
        if !(self.wire_diameter > T::zero()) {
            return Err(err("wire_diameter must be positive"));
        }
        if self.region.is_empty() {
            return Err(err("region is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ReceptorElectrical<T> {
    /// Ω
    #[serde(rename = "R_py")]
    pub r_py: T,
    /// Ω
    #[serde(rename = "R_ppy")]
    pub r_ppy: T,
    /// F
    #[serde(rename = "C_py")]
    pub c_py: T,
    /// F
    #[serde(rename = "C_ppy")]
    pub c_ppy: T,
    pub beta: T,
}

impl<T: Scalar> Default for ReceptorElectrical<T> {
    fn default() -> Self {
        Self {
            r_py: c(5e6),
            r_ppy: c(400e3),
            c_py: c(1e-9),
            c_ppy: c(10e-9),
            beta: c(0.05),
        }
    }
}

impl<T: Scalar> ReceptorElectrical<T> {
    pub fn validate(&self) -> Result<(), ReceptorError> {
        let bad = |reason: &'static str| Err(ReceptorError::Readout(reason));
        if !(self.r_ppy > T::zero() && self.r_ppy < self.r_py) {
            return bad("need 0 < R_ppy < R_py");
        }
        if !(self.c_py >= T::zero() && self.c_ppy > self.c_py) {
            return bad("need 0 <= C_py < C_ppy");
        }
        if !(self.beta > T::zero()) {
            return bad("beta must be positive");
        }
        Ok(())
    }
}

/// Exact relaxation of the polaron population toward `α_p·x·I·τ_p`.
pub fn polaron_step<T: Scalar>(
    p: T,
    irradiance: T,
    params: &SynthesisParams<T>,
    x: T,
    dt: T,
) -> Result<T, ReceptorError> {
    if !(dt > T::zero()) {
        return Err(ReceptorError::NonPositiveStep);
    }
    if !(p >= T::zero()) {
        return Err(ReceptorError::NegativePolaron);
    }
    let decay = (-dt / params.tau_p).exp();
    let target = params.alpha_p * x * irradiance.max(T::zero()) * params.tau_p;
    Ok(p * decay + target * (T::one() - decay))
}

/// Parallel mixing of the two phases, reduced by photo-excited carriers.
/// `x̄` is clamped to `[0, 1]` and `p̄` to `>= 0`.
pub fn effective_resistance<T: Scalar>(elec: &ReceptorElectrical<T>, x: T, p: T) -> T {
    let x = x.max(T::zero()).min(T::one());
    let base = T::one() / (x / elec.r_ppy + (T::one() - x) / elec.r_py);
    base / (T::one() + elec.beta * p.max(T::zero()))
}

/// Capacitance mixes linearly with conversion and ignores polarons.
pub fn effective_capacitance<T: Scalar>(elec: &ReceptorElectrical<T>, x: T) -> T {
    let x = x.max(T::zero()).min(T::one());
    elec.c_py + (elec.c_ppy - elec.c_py) * x
}

/// Lumped state seen by the readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState<T> {
    /// Ω
    pub resistance: T,
    /// F
    pub capacitance: T,
}

impl<T: Scalar> ChannelState<T> {
    pub fn from_mix(elec: &ReceptorElectrical<T>, x: T, p: T) -> Self {
        Self {
            resistance: effective_resistance(elec, x, p),
            capacitance: effective_capacitance(elec, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Polarity {
    pub fn symbol(self) -> char {
        match self {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSample<T> {
    /// Start of the pulse, s.
    pub t: T,
    pub code: u16,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ReadoutConfig<T> {
    /// Ω
    pub divider_r: T,
    /// V
    pub vcc: T,
    /// Duration of each pulse of the pair, ms.
    pub pulse_ms: T,
    pub n_avg: u32,
}

impl<T: Scalar> Default for ReadoutConfig<T> {
    fn default() -> Self {
        Self {
            divider_r: c(460e3),
            vcc: c(4.2),
            pulse_ms: c(200.0),
            n_avg: 8,
        }
    }
}

impl<T: Scalar> ReadoutConfig<T> {
    pub fn validate(&self) -> Result<(), ReceptorError> {
        if !(self.divider_r > T::zero() && self.vcc > T::zero() && self.pulse_ms > T::zero()) {
            return Err(ReceptorError::Readout("divider_r, vcc and pulse_ms must be positive"));
        }
        if self.n_avg == 0 {
            return Err(ReceptorError::Readout("n_avg must be at least 1"));
        }
        Ok(())
    }

    pub fn pulse_s(&self) -> T {
        self.pulse_ms * c(1e-3)
    }

    /// Offsets of the ADC samples from pulse start: evenly over the second
    /// half, the last one at the pulse end.
    pub fn sample_offsets(&self) -> impl Iterator<Item = T> + '_ {
        let half = self.pulse_s() * c(0.5);
        let n = T::from_count(self.n_avg as usize);
        (1..=self.n_avg as usize).map(move |k| half + half * T::from_count(k) / n)
    }

    fn quantize(&self, v: T) -> u16 {
        let code = (c::<T>(f64::from(ADC_MAX)) * v.abs() / self.vcc + c(0.5)).floor();
        code.max(T::zero())
            .min(c(f64::from(ADC_MAX)))
            .to_u16()
            .unwrap_or(ADC_MAX)
    }
}

/// Node voltage of one constant-voltage pulse: the receptor (R ∥ C) sits on
/// the low side of the divider, so `C dv/dt = (V_drive − v)/R_div − v/R`.
#[derive(Debug, Clone, Copy)]
struct Pulse<T> {
    v0: T,
    v_ss: T,
    tau: T,
}

impl<T: Scalar> Pulse<T> {
    fn new(state: &ChannelState<T>, cfg: &ReadoutConfig<T>, drive: T, v0: T) -> Self {
        let r = state.resistance;
        let rd = cfg.divider_r;
        let v_ss = if r.is_infinite() {
            drive
        } else {
            drive * r / (rd + r)
        };
        let r_par = if r.is_infinite() { rd } else { rd * r / (rd + r) };
        Self {
            v0,
            v_ss,
            tau: r_par * state.capacitance,
        }
    }

    fn at(&self, t: T) -> T {
        if !(self.tau > T::zero()) {
            return self.v_ss;
        }
        self.v_ss + (self.v0 - self.v_ss) * (-t / self.tau).exp()
    }
}

/// One bipolar pulse pair starting at `t`: positive on `[t, t + T)`,
/// negative on `[t + T, t + 2T)`.
///
/// The positive pulse starts from a discharged receptor (the channel idles
/// in high impedance for about a second between pairs, far longer than any
/// `R·C`). The negative pulse starts from the voltage left by the positive
/// one. `noise` is added to every sampled voltage.
pub fn pulse_readout<T: Scalar>(
    state: &ChannelState<T>,
    cfg: &ReadoutConfig<T>,
    t: T,
    noise: &mut dyn FnMut() -> T,
) -> [AdcSample<T>; 2] {
    let pulse = cfg.pulse_s();
    let pos = Pulse::new(state, cfg, cfg.vcc, T::zero());
    let neg = Pulse::new(state, cfg, -cfg.vcc, pos.at(pulse));
    let mut read = |p: &Pulse<T>| {
        let n = T::from_count(cfg.n_avg as usize);
        let sum = cfg
            .sample_offsets()
            .fold(T::zero(), |acc, s| acc + p.at(s) + noise());
        cfg.quantize(sum / n)
    };
    [
        AdcSample {
            t,
            code: read(&pos),
            polarity: Polarity::Positive,
        },
        AdcSample {
            t: t + pulse,
            code: read(&neg),
            polarity: Polarity::Negative,
        },
    ]
}

/// Node voltage over one pulse pair sampled every `dt`, for waveform traces.
pub fn pulse_waveform<T: Scalar>(
    state: &ChannelState<T>,
    cfg: &ReadoutConfig<T>,
    dt: T,
) -> Result<Vec<(T, T)>, ReceptorError> {
    if !(dt > T::zero()) {
        return Err(ReceptorError::NonPositiveStep);
    }
    let pulse = cfg.pulse_s();
    let pos = Pulse::new(state, cfg, cfg.vcc, T::zero());
    let neg = Pulse::new(state, cfg, -cfg.vcc, pos.at(pulse));
    let n = (pulse * c(2.0) / dt).round().to_usize().unwrap_or(0);
    Ok((0..=n)
        .map(|k| {
            let s = T::from_count(k) * dt;
            let v = if s < pulse { pos.at(s) } else { neg.at(s - pulse) };
            (s, v)
        })
        .collect())
}

/// Impedance implied by an ADC code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Impedance<T> {
    Ohms(T),
    /// Full-scale code: open circuit.
    SaturatedHigh,
}

impl<T: Scalar> Impedance<T> {
    /// Finite value, with saturation mapped to the largest resolvable
    /// impedance (code 1022).
    pub fn finite(self, divider_r: T) -> T {
        match self {
            Impedance::Ohms(z) => z,
            Impedance::SaturatedHigh => divider_r * c(f64::from(ADC_MAX - 1)),
        }
    }
}

pub fn estimate_impedance<T: Scalar>(code: u32, divider_r: T) -> Result<Impedance<T>, ReceptorError> {
    let max = u32::from(ADC_MAX);
    if code > max {
        return Err(ReceptorError::CodeRange(code));
    }
    if code == max {
        return Ok(Impedance::SaturatedHigh);
    }
    Ok(Impedance::Ohms(
        divider_r * c(f64::from(code)) / c(f64::from(max - code)),
    ))
}

/// |Z| of the parallel RC model at `freq`. `amplitude` (V) does not enter a
/// linear model and is kept for parity with the instrument settings.
pub fn pe_is_reference<T: Scalar>(state: &ChannelState<T>, freq: T, _amplitude: T) -> T {
    let wrc = T::TAU() * freq * state.resistance * state.capacitance;
    state.resistance / (T::one() + wrc * wrc).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quiet() -> impl FnMut() -> f64 {
        || 0.0
    }

    fn channel(r: f64, cap: f64) -> ChannelState<f64> {
        ChannelState {
            resistance: r,
            capacitance: cap,
        }
    }

    #[test]
    fn polaron_examples() {
        let p = SynthesisParams::<f64>::default();
        let decayed = polaron_step(2.0, 0.0, &p, 1.0, 3.0).unwrap();
        assert!((decayed - 2.0 * (-0.3f64).exp()).abs() < 1e-15);
        let mut q = 0.0;
        for _ in 0..1000 {
            q = polaron_step(q, 100.0, &p, 0.0, 1.0).unwrap();
        }
        assert_eq!(q, 0.0);
        let mut q = 0.0;
        for _ in 0..500 {
            q = polaron_step(q, 30.0, &p, 1.0, 1.0).unwrap();
        }
        let fixed = p.alpha_p * 30.0 * p.tau_p;
        assert!((q - fixed).abs() < 1e-12);
        assert!((0.05 * fixed - 0.1).abs() < 1e-12);
        assert!(polaron_step(0.0, 1.0, &p, 1.0, 0.0).is_err());
        assert!(polaron_step(-1.0, 1.0, &p, 1.0, 1.0).is_err());
    }

    #[test]
    fn resistance_examples() {
        let e = ReceptorElectrical::<f64>::default();
        assert!((effective_resistance(&e, 0.0, 0.0) - 5e6).abs() < 1e-6);
        assert!((effective_resistance(&e, 1.0, 0.0) - 400e3).abs() < 1e-6);
        assert!((effective_resistance(&e, 1.0, 2.0) - 400e3 / 1.1).abs() < 1e-6);
        e.validate().unwrap();
    }

    #[test]
    fn divider_midpoint_and_limits() {
        let cfg = ReadoutConfig::default();
        let mid = pulse_readout(&channel(460e3, 0.0), &cfg, 0.0, &mut quiet());
        assert_eq!(mid[0].code, 512);
        assert_eq!(mid[1].code, 512);
        assert_eq!(pulse_readout(&channel(0.0, 0.0), &cfg, 0.0, &mut quiet())[0].code, 0);
        let open = pulse_readout(&channel(f64::INFINITY, 0.0), &cfg, 0.0, &mut quiet());
        assert_eq!(open[0].code, 1023);
    }

    #[test]
    fn settling_with_capacitance() {
        let cfg = ReadoutConfig::default();
        let st = channel(460e3, 10e-9);
        let pulse = Pulse::new(&st, &cfg, cfg.vcc, 0.0);
        assert!((pulse.tau - 2.3e-3).abs() < 1e-9);
        let n = cfg.n_avg as f64;
        let vbar: f64 = cfg.sample_offsets().map(|s| pulse.at(s)).sum::<f64>() / n;
        assert!((vbar - 2.1).abs() / 2.1 < 1e-3);
        let pair = pulse_readout(&st, &cfg, 0.0, &mut quiet());
        assert_eq!(pair[0].code, 512);
        assert_eq!(pair[1].code, 512);
    }

    #[test]
    fn sample_times_cover_second_half() {
        let cfg = ReadoutConfig::<f64>::default();
        let s: Vec<f64> = cfg.sample_offsets().collect();
        assert_eq!(s.len(), 8);
        assert!((s[0] - 0.1125).abs() < 1e-12);
        assert!((s[7] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_integrated_circuit() {
        // RK4 on C dv/dt = (Vd - v)/Rd - v/R across both pulses
        let cfg = ReadoutConfig::<f64>::default();
        let st = channel(300e3, 30e-9);
        let trace = pulse_waveform(&st, &cfg, 1e-3).unwrap();
        let f = |v: f64, vd: f64| ((vd - v) / cfg.divider_r - v / st.resistance) / st.capacitance;
        let h = 1e-6;
        let mut v = 0.0;
        let mut t = 0.0;
        let mut worst: f64 = 0.0;
        for &(ts, vs) in &trace {
            while t < ts - h / 2.0 {
                let vd = if t < 0.2 - h / 2.0 { cfg.vcc } else { -cfg.vcc };
                let k1 = f(v, vd);
                let k2 = f(v + 0.5 * h * k1, vd);
                let k3 = f(v + 0.5 * h * k2, vd);
                let k4 = f(v + h * k3, vd);
                v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += h;
            }
            worst = worst.max((v - vs).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn impedance_estimates() {
        let z = estimate_impedance::<f64>(512, 460e3).unwrap();
        assert_eq!(z, Impedance::Ohms(460e3 * 512.0 / 511.0));
        assert_eq!(estimate_impedance::<f64>(0, 460e3).unwrap(), Impedance::Ohms(0.0));
        assert_eq!(estimate_impedance::<f64>(1023, 460e3).unwrap(), Impedance::SaturatedHigh);
        assert_eq!(estimate_impedance::<f64>(1024, 460e3), Err(ReceptorError::CodeRange(1024)));
    }

    #[test]
    fn peis_examples() {
        assert_eq!(pe_is_reference(&channel(1e5, 0.0), 115.0, 0.01), 1e5);
        let corner = 1.0 / (std::f64::consts::TAU * 1e5 * 1e-8);
        let z = pe_is_reference(&channel(1e5, 1e-8), corner, 0.01);
        assert!((z - 1e5 / 2f64.sqrt()).abs() < 1e-6);
        let z = pe_is_reference(&channel(400e3, 10e-9), 115.0, 0.01);
        let wrc = std::f64::consts::TAU * 115.0 * 400e3 * 10e-9;
        assert!((wrc * wrc - 8.35).abs() < 0.05);
        assert!((z - 131e3).abs() < 1e3);
    }

    #[test]
    fn noise_hook_shifts_codes() {
        let cfg = ReadoutConfig::default();
        let mut bump = || 0.05;
        let pair = pulse_readout(&channel(460e3, 0.0), &cfg, 0.0, &mut bump);
        assert_eq!(pair[0].code, 524);
    }

    proptest! {
        #[test]
        fn resistance_monotone(x in 0.0f64..1.0, dx in 0.0f64..0.5, p in 0.0f64..10.0, dp in 0.0f64..10.0) {
            let e = ReceptorElectrical::default();
            let r = effective_resistance(&e, x, p);
            prop_assert!(effective_resistance(&e, (x + dx).min(1.0), p) <= r);
            prop_assert!(effective_resistance(&e, x, p + dp) <= r);
        }

        #[test]
        fn round_trip_at_midrange(r in 200e3f64..1e6) {
            let cfg = ReadoutConfig::default();
            let pair = pulse_readout(&channel(r, 1e-9), &cfg, 0.0, &mut || 0.0);
            let z = estimate_impedance(u32::from(pair[0].code), cfg.divider_r).unwrap().finite(cfg.divider_r);
            prop_assert!((z - r).abs() / r < 0.005);
            prop_assert!((i32::from(pair[0].code) - i32::from(pair[1].code)).abs() <= 1);
        }
    }
}
