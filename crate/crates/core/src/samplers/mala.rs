use rand::Rng as _;
use rand_distr::{Distribution as _, StandardNormal};

use super::ChainConfig;
use crate::error::{Error, Result};
use crate::models::ModelFamily;
use crate::sample::SampleBatch;
use crate::seed::rng_from_seed;

const TARGET_ACCEPTANCE: f64 = 0.574;

/// Output of a MALA run.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: SampleBatch,
    /// Fraction of accepted proposals after the pilot phase.
    pub acceptance_rate: f64,
    /// The frozen step size used after the pilot phase.
    pub step_size: f64,
}

struct State {
    x: Vec<f64>,
    logp: f64,
    score: Vec<f64>,
}

struct Mala<'a> {
    family: &'a dyn ModelFamily,
    theta: &'a [f64],
    proposal: State,
}

impl Mala<'_> {
    fn eval(&self, x: &[f64], score: &mut [f64]) -> Result<f64> {
        self.family.score_into(self.theta, x, score);
        self.family
            .unnorm_logdensity(self.theta, x)
            .ok_or_else(|| Error::Unsupported { model: self.family.name().into(), what: "an unnormalized log-density" })
    }

    /// log q(to | from) up to a constant shared by both directions.
    fn log_q(to: &[f64], from: &[f64], from_score: &[f64], eps: f64) -> f64 {
        let h = 0.5 * eps * eps;
        let r2: f64 = to.iter().zip(from).zip(from_score).map(|((t, f), s)| (t - f - h * s).powi(2)).sum();
        -r2 / (2.0 * eps * eps)
    }

    /// One Metropolis-adjusted Langevin step; returns the acceptance probability
    /// and whether the move was taken.
    fn step(&mut self, cur: &mut State, eps: f64, rng: &mut crate::seed::Rng) -> Result<(f64, bool)> {
        let h = 0.5 * eps * eps;
        for a in 0..cur.x.len() {
            let z: f64 = StandardNormal.sample(rng);
            self.proposal.x[a] = cur.x[a] + h * cur.score[a] + eps * z;
        }
        let prop_x = std::mem::take(&mut self.proposal.x);
        let mut prop_score = std::mem::take(&mut self.proposal.score);
        let prop_logp = self.eval(&prop_x, &mut prop_score)?;
        let log_ratio = prop_logp + Self::log_q(&cur.x, &prop_x, &prop_score, eps)
            - cur.logp
            - Self::log_q(&prop_x, &cur.x, &cur.score, eps);
        let accept_prob = if log_ratio.is_nan() || !prop_logp.is_finite() { 0.0 } else { log_ratio.exp().min(1.0) };
        let u: f64 = rng.random();
        let accepted = u < accept_prob;
        if accepted {
            self.proposal.x = std::mem::replace(&mut cur.x, prop_x);
            self.proposal.score = std::mem::replace(&mut cur.score, prop_score);
            cur.logp = prop_logp;
        } else {
            self.proposal.x = prop_x;
            self.proposal.score = prop_score;
        }
        Ok((accept_prob, accepted))
    }
}

/// Runs a MALA chain targeting `p_θ` from the origin and collects `n` states.
///
/// Proposal `x' = x + (ε²/2)·s(x) + ε·Z`, accepted with the usual
/// Metropolis–Hastings ratio on unnormalized densities.
pub fn mala_chain(family: &dyn ModelFamily, theta: &[f64], cfg: &ChainConfig, n: usize) -> Result<ChainRun> {
    cfg.validate()?;
    family.check_theta(theta)?;
    let d = family.data_dim();
    let mut rng = rng_from_seed(cfg.seed);
    let mut mala = Mala { family, theta, proposal: State { x: vec![0.0; d], logp: 0.0, score: vec![0.0; d] } };
    let mut cur = State { x: vec![0.0; d], logp: 0.0, score: vec![0.0; d] };
    let mut score = vec![0.0; d];
    cur.logp = mala.eval(&cur.x, &mut score)?;
    cur.score = score;
    if !cur.logp.is_finite() || cur.score.iter().any(|v| !v.is_finite()) {
        return Err(Error::Sampler("non-finite log-density or score at the initial state".into()));
    }

    let mut log_eps = cfg.step_size.ln();
    for t in 0..cfg.adapt_steps {
        let (prob, _) = mala.step(&mut cur, log_eps.exp(), &mut rng)?;
        log_eps += (prob - TARGET_ACCEPTANCE) / ((t + 1) as f64).powf(0.6);
        log_eps = log_eps.clamp(-12.0, 5.0);
    }
    let eps = log_eps.exp();

    let mut accepted = 0usize;
    let mut total = 0usize;
    for _ in 0..cfg.burn_in {
        accepted += usize::from(mala.step(&mut cur, eps, &mut rng)?.1);
        total += 1;
    }
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for _ in 0..cfg.thin {
            accepted += usize::from(mala.step(&mut cur, eps, &mut rng)?.1);
            total += 1;
        }
        data.extend_from_slice(&cur.x);
    }
    Ok(ChainRun {
        samples: SampleBatch::from_flat_unchecked(data, d),
        acceptance_rate: if total == 0 { f64::NAN } else { accepted as f64 / total as f64 },
        step_size: eps,
    })
}

pub fn mala_sample(family: &dyn ModelFamily, theta: &[f64], cfg: &ChainConfig, n: usize) -> Result<SampleBatch> {
    mala_chain(family, theta, cfg, n).map(|run| run.samples)
}
