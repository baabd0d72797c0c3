use crate::operators::Controls;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub fidelity: f64,
    pub trace: f64,
    pub purity: f64,
    pub occupations: Vec<f64>,
    pub controls: Controls,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub steps: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sites: usize,
    pub samples: Vec<Sample>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn new(sites: usize) -> Self {
        Self {
            sites,
            samples: Vec::new(),
            stats: IntegrationStats::default(),
        }
    }

    pub fn push(&mut self, s: Sample) {
        // segment boundaries can be reached twice; keep the first record
        if self.samples.last().is_some_and(|last| last.t == s.t) {
            return;
        }
        self.samples.push(s);
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.samples.last().map(|s| s.fidelity)
    }

    pub fn peak(&self) -> Option<&Sample> {
        self.samples.iter().max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
    }

    /// Local maxima of the fidelity among samples with `t >= t_from`; the last
    /// sample counts when it is not below its predecessor.
    pub fn local_maxima(&self, t_from: f64) -> Vec<&Sample> {
        let s: Vec<&Sample> = self.samples.iter().filter(|x| x.t >= t_from).collect();
        let mut out = Vec::new();
        for i in 1..s.len() {
            let rising = s[i].fidelity >= s[i - 1].fidelity;
            let falling_next = i + 1 == s.len() || s[i].fidelity > s[i + 1].fidelity;
            if rising && falling_next {
                out.push(s[i]);
            }
        }
        out
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.stats.max_trace_drift
    }
}
