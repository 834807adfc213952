//! Seeded generator for recurrent test series with injected anomalies.
//!
//! Patterns are strictly positive (offset above amplitude) so relative errors
//! behave like they do on real demand/volume data. Anomalies are
//! multiplicative: a spike scales single points up, a dip scales them down,
//! and a shift scales a whole segment.

use salad_core::evaluation::LabelWindow;
use salad_core::rng::SplitMix64;
use salad_core::RawPoint;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Sine,
    /// Primary sine plus a slower component, weekly-like by default
    /// (7x the period at half amplitude).
    DoubleSine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    Spike,
    Dip,
    Shift,
}

impl AnomalyKind {
    fn default_factor(self) -> f64 {
        match self {
            AnomalyKind::Spike => 3.0,
            AnomalyKind::Dip => 0.3,
            AnomalyKind::Shift => 1.5,
        }
    }
}

/// One injected anomaly: `kind@start[-end][xfactor]`, e.g. `spike@1500`,
/// `dip@1700x0.25`, `shift@2400-2419x1.5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub start: usize,
    pub end: usize,
    pub factor: f64,
}

impl std::str::FromStr for AnomalySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("anomaly spec `{s}`: {msg}"));
        let (kind, rest) = s.split_once('@').ok_or_else(|| bad("missing `@`"))?;
        let kind = match kind {
            "spike" => AnomalyKind::Spike,
            "dip" => AnomalyKind::Dip,
            "shift" => AnomalyKind::Shift,
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        };
        let (range, factor) = match rest.split_once('x') {
            Some((range, factor)) => {
                let factor: f64 = factor
                    .parse()
                    .map_err(|_| bad(&format!("bad factor `{factor}`")))?;
                (range, factor)
            }
            None => (rest, kind.default_factor()),
        };
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(bad("factor must be finite and > 0"));
        }
        let (start, end) = match range.split_once('-') {
            Some((a, b)) => {
                let start = a.parse().map_err(|_| bad(&format!("bad index `{a}`")))?;
                let end = b.parse().map_err(|_| bad(&format!("bad index `{b}`")))?;
                (start, end)
            }
            None => {
                let at: usize = range
                    .parse()
                    .map_err(|_| bad(&format!("bad index `{range}`")))?;
                (at, at)
            }
        };
        if start > end {
            return Err(bad("start is past end"));
        }
        Ok(AnomalySpec {
            kind,
            start,
            end,
            factor,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub pattern: Pattern,
    pub period: usize,
    pub length: usize,
    pub amplitude: f64,
    pub offset: f64,
    /// Gaussian noise sigma as a fraction of the amplitude.
    pub noise: f64,
    pub seed: u64,
    pub anomalies: Vec<AnomalySpec>,
}

impl SynthConfig {
    pub fn new(pattern: Pattern, period: usize, length: usize) -> Self {
        Self {
            pattern,
            period,
            length,
            amplitude: 50.0,
            offset: 100.0,
            noise: 0.0,
            seed: 0,
            anomalies: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.period < 4 {
            return Err(Error::Config(format!(
                "period must be at least 4, got {}",
                self.period
            )));
        }
        if self.length < 4 * self.period {
            return Err(Error::Config(format!(
                "length must be at least 4 periods ({}), got {}",
                4 * self.period,
                self.length
            )));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config("noise must be >= 0".into()));
        }
        for a in &self.anomalies {
            if a.end >= self.length {
                return Err(Error::Config(format!(
                    "anomaly at {}-{} is outside the series (length {})",
                    a.start, a.end, self.length
                )));
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut SplitMix64) -> f64 {
    // Box-Muller; 1 - u keeps the log argument away from zero.
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate the series and its matching label windows (one per anomaly).
pub fn generate(config: &SynthConfig) -> Result<(Vec<RawPoint>, Vec<LabelWindow>)> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);
    let mut points = Vec::with_capacity(config.length);
    for t in 0..config.length {
        let phase = std::f64::consts::TAU * t as f64 / config.period as f64;
        let base = match config.pattern {
            Pattern::Constant => config.offset,
            Pattern::Sine => config.offset + config.amplitude * phase.sin(),
            Pattern::DoubleSine => {
                config.offset
                    + config.amplitude * phase.sin()
                    + 0.5 * config.amplitude * (phase / 7.0).sin()
            }
        };
        let noise = if config.noise > 0.0 {
            config.noise * config.amplitude * gaussian(&mut rng)
        } else {
            0.0
        };
        points.push(RawPoint {
            t,
            value: base + noise,
            timestamp: Some(t.to_string()),
        });
    }
    let mut labels = Vec::with_capacity(config.anomalies.len());
    for spec in &config.anomalies {
        for t in spec.start..=spec.end {
            points[t].value *= spec.factor;
        }
        labels.push(LabelWindow::new(spec.start, spec.end).expect("validated above"));
    }
    Ok((points, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_strings_parse() {
        let s: AnomalySpec = "spike@1500".parse().unwrap();
        assert_eq!(s.kind, AnomalyKind::Spike);
        assert_eq!((s.start, s.end), (1500, 1500));
        assert_eq!(s.factor, 3.0);

        let s: AnomalySpec = "shift@2400-2419x1.5".parse().unwrap();
        assert_eq!(s.kind, AnomalyKind::Shift);
        assert_eq!((s.start, s.end), (2400, 2419));

        let s: AnomalySpec = "dip@99x0.25".parse().unwrap();
        assert_eq!(s.factor, 0.25);

        assert!("spike.1500".parse::<AnomalySpec>().is_err());
        assert!("wiggle@3".parse::<AnomalySpec>().is_err());
        assert!("spike@5-3".parse::<AnomalySpec>().is_err());
        assert!("spike@3x-1".parse::<AnomalySpec>().is_err());
    }

    #[test]
    fn spike_lands_where_labeled() {
        let mut config = SynthConfig::new(Pattern::Sine, 50, 3000);
        config.anomalies = vec!["spike@1500x3".parse().unwrap()];
        let (points, labels) = generate(&config).unwrap();
        assert_eq!(points.len(), 3000);
        assert_eq!(labels, vec![LabelWindow::new(1500, 1500).unwrap()]);
        // Neighbouring points one period apart are untouched.
        let clean = points[1450].value;
        assert!((points[1500].value - 3.0 * clean).abs() < 1e-9);
    }

    #[test]
    fn zero_noise_constant_is_flat() {
        let config = SynthConfig::new(Pattern::Constant, 10, 40);
        let (points, labels) = generate(&config).unwrap();
        assert!(labels.is_empty());
        assert!(points.iter().all(|p| p.value == config.offset));
    }

    #[test]
    fn short_length_is_rejected() {
        let config = SynthConfig::new(Pattern::Sine, 50, 150);
        assert!(matches!(generate(&config), Err(Error::Config(_))));
    }

    #[test]
    fn generation_is_seeded() {
        let mut config = SynthConfig::new(Pattern::Sine, 25, 200);
        config.noise = 0.05;
        let (a, _) = generate(&config).unwrap();
        let (b, _) = generate(&config).unwrap();
        assert_eq!(a, b);
        config.seed = 1;
        let (c, _) = generate(&config).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range_anomaly_is_rejected() {
        let mut config = SynthConfig::new(Pattern::Sine, 25, 200);
        config.anomalies = vec!["spike@250".parse().unwrap()];
        assert!(matches!(generate(&config), Err(Error::Config(_))));
    }
}
