//! Channel draws, ambient symbols, pilot schedules and frame synthesis.
//!
//! The reader observes, for tag symbol `t` and ambient sample `k`,
//!
//! ```text
//! x_k(t) = w_{j(t)} s_k(t) + u_k(t),   w_j = h + sum_i b_{j,i} alpha_i f_i g_i
//! ```
//!
//! with one flat-fading channel draw per frame.

use crate::config::{ForwardFading, SourceKind, SystemConfig};
use crate::hypothesis::Hypothesis;
use crate::rng::RngStream;
use crate::{Error, Result, C64};

/// Direct channel, per-tag backscatter components and the `2^N` effective
/// channels they induce. Shared by true channels and estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    n_tags: usize,
    n_antennas: usize,
    /// Direct channel `h`, length `M`.
    pub h: Vec<C64>,
    /// Row-major `N x M`: row `i` is `v_i`.
    pub v: Vec<C64>,
    /// Row-major `2^N x M`: row `j` is `w_j`.
    pub w: Vec<C64>,
}

impl EffectiveChannels {
    /// Builds `w_j = h + sum_i b_{j,i} v_i`, summing tags in index order.
    pub fn new(h: Vec<C64>, v: Vec<C64>, n_tags: usize) -> Result<Self> {
        let m = h.len();
        if m == 0 {
            return Err(Error::config("n_antennas", "must be positive"));
        }
        Error::check_len("backscatter components", n_tags * m, v.len())?;
        let n_hyp = 1usize << n_tags;
        let mut w = Vec::with_capacity(n_hyp * m);
        for j in 0..n_hyp {
            for a in 0..m {
                let mut acc = h[a];
                for i in 0..n_tags {
                    if (j >> i) & 1 == 1 {
                        acc += v[i * m + a];
                    }
                }
                w.push(acc);
            }
        }
        Ok(EffectiveChannels {
            n_tags,
            n_antennas: m,
            h,
            v,
            w,
        })
    }

    pub fn n_tags(&self) -> usize {
        self.n_tags
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_hypotheses(&self) -> usize {
        1 << self.n_tags
    }

    pub fn v(&self, tag: usize) -> &[C64] {
        &self.v[tag * self.n_antennas..(tag + 1) * self.n_antennas]
    }

    pub fn w(&self, j: usize) -> &[C64] {
        &self.w[j * self.n_antennas..(j + 1) * self.n_antennas]
    }
}

/// One frame's channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Forward channels `f_i`.
    pub f: Vec<C64>,
    /// Row-major `N x M` backscatter channels `g_i`.
    pub g: Vec<C64>,
    pub alphas: Vec<f64>,
    pub effective: EffectiveChannels,
}

impl ChannelRealization {
    pub fn from_parts(h: Vec<C64>, f: Vec<C64>, g: Vec<C64>, alphas: Vec<f64>) -> Result<Self> {
        let n = f.len();
        let m = h.len();
        Error::check_len("backscatter channels", n * m, g.len())?;
        Error::check_len("reflection amplitudes", n, alphas.len())?;
        let mut v = Vec::with_capacity(n * m);
        for i in 0..n {
            for a in 0..m {
                v.push(g[i * m + a] * f[i] * alphas[i]);
            }
        }
        let effective = EffectiveChannels::new(h, v, n)?;
        Ok(ChannelRealization {
            f,
            g,
            alphas,
            effective,
        })
    }

    pub fn h(&self) -> &[C64] {
        &self.effective.h
    }

    pub fn v(&self, tag: usize) -> &[C64] {
        self.effective.v(tag)
    }

    pub fn w(&self, j: usize) -> &[C64] {
        self.effective.w(j)
    }

    /// Same draw with tags relabelled: new tag `i` is old tag `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.f.len();
        Error::check_len("tag permutation", n, perm.len())?;
        let m = self.effective.n_antennas();
        let f = perm.iter().map(|&p| self.f[p]).collect();
        let g = perm
            .iter()
            .flat_map(|&p| self.g[p * m..(p + 1) * m].iter().copied())
            .collect();
        let alphas = perm.iter().map(|&p| self.alphas[p]).collect();
        ChannelRealization::from_parts(self.effective.h.clone(), f, g, alphas)
    }
}

/// Rayleigh draw: `h ~ CN(0, I_M)`, `f_i ~ CN(0, 1)`, `g_i ~ CN(0, I_M)`.
pub fn draw_channel(cfg: &SystemConfig, rng: &mut RngStream) -> Result<ChannelRealization> {
    cfg.validate()?;
    let m = cfg.n_antennas;
    let n = cfg.n_tags;
    let h = rng.sample_circular_gaussian(m, 1.0)?;
    let mut f = rng.sample_circular_gaussian(n, 1.0)?;
    if cfg.forward_fading == ForwardFading::PhaseOnly {
        // Same draws as the Rayleigh case, keeping only the phase.
        for z in &mut f {
            let r = z.norm();
            *z = if r > 0.0 { *z / r } else { C64::new(1.0, 0.0) };
        }
    }
    let g = rng.sample_circular_gaussian(n * m, 1.0)?;
    ChannelRealization::from_parts(h, f, g, cfg.alphas())
}

/// Ambient source model with its constellation (empty for Gaussian).
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSource {
    pub kind: SourceKind,
    pub sigma_s_sq: f64,
    pub constellation: Vec<C64>,
}

impl AmbientSource {
    /// Standard constellation for `kind`, scaled to average power
    /// `sigma_s_sq`.
    pub fn new(kind: SourceKind, sigma_s_sq: f64) -> Self {
        let scale = sigma_s_sq.sqrt();
        let constellation = match kind {
            SourceKind::Gaussian => Vec::new(),
            SourceKind::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2 * scale;
                vec![
                    C64::new(a, a),
                    C64::new(-a, a),
                    C64::new(-a, -a),
                    C64::new(a, -a),
                ]
            }
            SourceKind::Qam16 => {
                let a = scale / 10f64.sqrt();
                let levels = [-3.0, -1.0, 1.0, 3.0];
                levels
                    .iter()
                    .flat_map(|&i| levels.iter().map(move |&q| C64::new(i * a, q * a)))
                    .collect()
            }
        };
        AmbientSource {
            kind,
            sigma_s_sq,
            constellation,
        }
    }

    pub fn for_config(cfg: &SystemConfig) -> Self {
        AmbientSource::new(cfg.source, cfg.sigma_s_sq)
    }

    /// `E|s|^4`: `2 sigma_s^4` for the Gaussian source, the constellation
    /// average otherwise.
    pub fn fourth_moment(&self) -> f64 {
        if self.constellation.is_empty() {
            return 2.0 * self.sigma_s_sq * self.sigma_s_sq;
        }
        self.constellation.iter().map(|c| c.norm_sqr().powi(2)).sum::<f64>()
            / self.constellation.len() as f64
    }
}

/// `count` i.i.d. ambient symbols.
pub fn draw_ambient(src: &AmbientSource, rng: &mut RngStream, count: usize) -> Result<Vec<C64>> {
    if count == 0 {
        return Err(Error::config("count", "must be at least 1"));
    }
    if src.kind == SourceKind::Gaussian {
        return rng.sample_circular_gaussian(count, src.sigma_s_sq);
    }
    if src.constellation.is_empty() {
        return Err(Error::config(
            "constellation",
            format!("empty constellation for modulated source {}", src.kind),
        ));
    }
    let n = src.constellation.len();
    Ok((0..count).map(|_| src.constellation[rng.index(n)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Every joint state appears, for prototype formation.
    ClassBalanced,
    /// All-off and single-tag-on configurations, for channel estimation.
    OneHot,
}

/// Tag states of the `P` pilot symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotSchedule {
    pub kind: ScheduleKind,
    pub n_tags: usize,
    /// Hypothesis index for `ClassBalanced`, configuration `i` in `0..=N` for
    /// `OneHot`.
    pub assignments: Vec<usize>,
}

impl PilotSchedule {
    /// Round robin over all `2^N` classes, shuffled.
    pub fn class_balanced(n_tags: usize, n_pilots: usize, rng: &mut RngStream) -> Result<Self> {
        let classes = 1usize << n_tags;
        if n_pilots < classes {
            return Err(Error::Schedule(format!(
                "class-balanced pilots need P >= 2^N = {classes}, got P = {n_pilots}"
            )));
        }
        let mut assignments: Vec<usize> = (0..n_pilots).map(|t| t % classes).collect();
        rng.shuffle(&mut assignments);
        Ok(PilotSchedule {
            kind: ScheduleKind::ClassBalanced,
            n_tags,
            assignments,
        })
    }

    /// Repeated blocks `0, 1, ..., N`; each configuration gets `P / (N+1)`
    /// pilots and the remainder goes to the all-off configuration.
    pub fn one_hot(n_tags: usize, n_pilots: usize) -> Result<Self> {
        let configs = n_tags + 1;
        if n_pilots < configs {
            return Err(Error::Schedule(format!(
                "one-hot pilots need P >= N + 1 = {configs}, got P = {n_pilots}"
            )));
        }
        let per = n_pilots / configs;
        let mut assignments: Vec<usize> = (0..per * configs).map(|t| t % configs).collect();
        assignments.resize(n_pilots, 0);
        Ok(PilotSchedule {
            kind: ScheduleKind::OneHot,
            n_tags,
            assignments,
        })
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Hypothesis index of pilot `t`.
    pub fn hypothesis(&self, t: usize) -> usize {
        let a = self.assignments[t];
        match self.kind {
            ScheduleKind::ClassBalanced => a,
            ScheduleKind::OneHot if a == 0 => 0,
            ScheduleKind::OneHot => 1 << (a - 1),
        }
    }

    /// Occurrences of each class (or configuration).
    pub fn counts(&self) -> Vec<usize> {
        let slots = match self.kind {
            ScheduleKind::ClassBalanced => 1 << self.n_tags,
            ScheduleKind::OneHot => self.n_tags + 1,
        };
        let mut counts = vec![0; slots];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        counts
    }
}

/// `M x K` observation of one tag symbol, stored antenna-major.
#[derive(Debug, Clone, Copy)]
pub struct ObsBlock<'a> {
    data: &'a [C64],
    n_antennas: usize,
    n_samples: usize,
}

impl<'a> ObsBlock<'a> {
    pub fn new(data: &'a [C64], n_antennas: usize, n_samples: usize) -> Result<Self> {
        Error::check_len("observation block", n_antennas * n_samples, data.len())?;
        Ok(ObsBlock {
            data,
            n_antennas,
            n_samples,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn get(&self, antenna: usize, k: usize) -> C64 {
        self.data[antenna * self.n_samples + k]
    }

    /// Antenna `a` across all samples.
    pub fn antenna(&self, a: usize) -> &'a [C64] {
        &self.data[a * self.n_samples..(a + 1) * self.n_samples]
    }

    /// Snapshot `x_k` across antennas.
    pub fn sample(&self, k: usize) -> Vec<C64> {
        (0..self.n_antennas).map(|a| self.get(a, k)).collect()
    }

    pub fn as_slice(&self) -> &'a [C64] {
        self.data
    }
}

/// One frame of `T` tag symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub n_tags: usize,
    pub n_antennas: usize,
    pub str_samples: usize,
    pub pilot_len: usize,
    pub schedule: PilotSchedule,
    /// Hypothesis index `j(t)` for every tag symbol.
    pub labels: Vec<usize>,
    /// Row-major `T x K` ambient symbols.
    pub ambient: Vec<C64>,
    /// Row-major `T x M x K` observations.
    pub obs: Vec<C64>,
}

impl Frame {
    pub fn frame_len(&self) -> usize {
        self.labels.len()
    }

    pub fn obs_block(&self, t: usize) -> ObsBlock<'_> {
        let len = self.n_antennas * self.str_samples;
        ObsBlock {
            data: &self.obs[t * len..(t + 1) * len],
            n_antennas: self.n_antennas,
            n_samples: self.str_samples,
        }
    }

    pub fn ambient_row(&self, t: usize) -> &[C64] {
        &self.ambient[t * self.str_samples..(t + 1) * self.str_samples]
    }

    /// Tag states `c_i(t)`.
    pub fn states(&self, t: usize) -> Vec<bool> {
        Hypothesis::new(self.labels[t], self.n_tags)
            .expect("labels are valid hypotheses")
            .bits()
    }

    pub fn data_range(&self) -> std::ops::Range<usize> {
        self.pilot_len..self.frame_len()
    }
}

/// Synthesizes a frame: pilots follow `sched`, data bits are i.i.d. uniform
/// and noise is i.i.d. `CN(0, sigma_u^2 I_M)`.
pub fn build_frame(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    sched: &PilotSchedule,
    rng: &mut RngStream,
) -> Result<Frame> {
    cfg.validate()?;
    if sched.n_tags != cfg.n_tags {
        return Err(Error::Schedule(format!(
            "schedule built for {} tags, configuration has {}",
            sched.n_tags, cfg.n_tags
        )));
    }
    if sched.len() != cfg.n_pilots {
        return Err(Error::Schedule(format!(
            "schedule has {} pilots, configuration expects {}",
            sched.len(),
            cfg.n_pilots
        )));
    }
    let eff = &ch.effective;
    Error::check_len("channel tags", cfg.n_tags, eff.n_tags())?;
    Error::check_len("channel antennas", cfg.n_antennas, eff.n_antennas())?;

    let (t_len, m, k) = (cfg.frame_len, cfg.n_antennas, cfg.str_samples);
    let n_hyp = cfg.n_hypotheses();
    let mut labels: Vec<usize> = (0..cfg.n_pilots).map(|t| sched.hypothesis(t)).collect();
    labels.extend((cfg.n_pilots..t_len).map(|_| rng.index(n_hyp)));

    let src = AmbientSource::for_config(cfg);
    let ambient = draw_ambient(&src, rng, t_len * k)?;

    let noise_var = cfg.noise_var();
    let mut obs = Vec::with_capacity(t_len * m * k);
    for t in 0..t_len {
        let w = eff.w(labels[t]);
        for &w_a in w.iter() {
            for kk in 0..k {
                let noise = rng.complex_gaussian(noise_var);
                obs.push(w_a * ambient[t * k + kk] + noise);
            }
        }
    }
    Ok(Frame {
        n_tags: cfg.n_tags,
        n_antennas: m,
        str_samples: k,
        pilot_len: cfg.n_pilots,
        schedule: sched.clone(),
        labels,
        ambient,
        obs,
    })
}
