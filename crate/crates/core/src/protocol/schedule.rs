use serde::{Deserialize, Serialize};

use crate::dynamics::ControlSource;
use crate::error::{Error, Result};
use crate::operators::Controls;

pub const STEPS: usize = 7;

/// Sign of the hopping while the quanta are spread out (steps 2 to 4).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoppingBranch {
    /// `kappa` ramps `0 -> +kappa_max` in step 2 and is held through step 4, so
    /// the localized state is carried along the lowest level into the superfluid.
    #[default]
    Ground,
    /// `kappa` ramps `0 -> -kappa_max` and step 4 sweeps it to `+kappa_max`.
    SignQuench,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub start: Controls,
    pub end: Controls,
}

/// Piecewise-linear programs for `(chi_1, chi, kappa)` over the seven steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    chi_max: f64,
    kappa_max: f64,
    branch: HoppingBranch,
    segments: Vec<Segment>,
    /// `bounds[k]` is the start time of step `k + 1`; `bounds[7] = T`.
    bounds: Vec<f64>,
}

fn corner_points(chi: f64, kappa: f64, branch: HoppingBranch) -> [Controls; STEPS + 1] {
    let k = match branch {
        HoppingBranch::Ground => kappa,
        HoppingBranch::SignQuench => -kappa,
    };
    [
        Controls::new(0.0, 0.0, 0.0),
        Controls::new(chi, 0.0, 0.0),
        Controls::new(chi, 0.0, k),
        Controls::new(0.0, 0.0, k),
        Controls::new(0.0, 0.0, kappa),
        Controls::new(chi, chi, kappa),
        Controls::new(chi, chi, 0.0),
        Controls::new(0.0, 0.0, 0.0),
    ]
}

/// Schedule with the default hopping branch.
pub fn build_schedule(chi_max: f64, kappa_max: f64, durations: [f64; STEPS]) -> Result<ControlSchedule> {
    ControlSchedule::new(chi_max, kappa_max, durations, HoppingBranch::Ground)
}

impl ControlSchedule {
    pub fn new(chi_max: f64, kappa_max: f64, durations: [f64; STEPS], branch: HoppingBranch) -> Result<Self> {
        if !(chi_max >= 0.0 && chi_max.is_finite()) {
            return Err(Error::config(format!("chi_max must be finite and non-negative, got {chi_max}")));
        }
        if !(kappa_max >= 0.0 && kappa_max.is_finite()) {
            return Err(Error::config(format!("kappa_max must be finite and non-negative, got {kappa_max}")));
        }
        for (k, &d) in durations.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config(format!("duration of step {} must be positive, got {d}", k + 1)));
            }
        }
        let p = corner_points(chi_max, kappa_max, branch);
        let segments = (0..STEPS)
            .map(|k| Segment {
                duration: durations[k],
                start: p[k],
                end: p[k + 1],
            })
            .collect();
        let mut bounds = vec![0.0];
        for d in durations {
            bounds.push(bounds.last().unwrap() + d);
        }
        Ok(Self {
            chi_max,
            kappa_max,
            branch,
            segments,
            bounds,
        })
    }

    pub fn chi_max(&self) -> f64 {
        self.chi_max
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn branch(&self) -> HoppingBranch {
        self.branch
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn durations(&self) -> [f64; STEPS] {
        let mut out = [0.0; STEPS];
        for (o, s) in out.iter_mut().zip(&self.segments) {
            *o = s.duration;
        }
        out
    }

    pub fn total_time(&self) -> f64 {
        self.bounds[STEPS]
    }

    /// Start of step `step` (1-based); `step_start(8)` is `T`.
    pub fn step_start(&self, step: usize) -> f64 {
        assert!((1..=STEPS + 1).contains(&step), "step {step} out of range");
        self.bounds[step - 1]
    }

    pub fn step_end(&self, step: usize) -> f64 {
        self.step_start(step + 1)
    }

    /// Step (1-based) containing `t`; segment ends belong to the earlier step.
    pub fn step_at(&self, t: f64) -> usize {
        (1..=STEPS).find(|&k| t <= self.bounds[k]).unwrap_or(STEPS)
    }

    /// Same program with one step duration replaced.
    pub fn with_duration(&self, step: usize, duration: f64) -> Result<Self> {
        let mut d = self.durations();
        d[step - 1] = duration;
        Self::new(self.chi_max, self.kappa_max, d, self.branch)
    }

    /// Controls at `t`, clamped to the schedule ends.
    pub fn at(&self, t: f64) -> Controls {
        if t <= 0.0 {
            return self.segments[0].start;
        }
        if t >= self.total_time() {
            return self.segments[STEPS - 1].end;
        }
        let k = self.step_at(t);
        let s = &self.segments[k - 1];
        let f = (t - self.bounds[k - 1]) / s.duration;
        Controls::lerp(s.start, s.end, f.clamp(0.0, 1.0))
    }
}

impl ControlSource for ControlSchedule {
    fn controls(&self, t: f64) -> Controls {
        self.at(t)
    }
}
