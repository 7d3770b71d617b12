use serde::{Deserialize, Serialize};

use crate::netbuild::{LayerBank, Network, NetworkSpec};
use crate::{Error, Result};

use super::certify::{
    certify_bounds_enc, certify_bounds_skip, BoundCertificate, EncoderCertificates,
};
use super::data::TrainingSet;
use super::grad::{bank_params, loss_and_tap_gradient, set_bank_params};

/// Loss above which training is aborted.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Initial step of every Armijo line search.
    pub step_size: f64,
    pub iterations: usize,
    /// Recorded in reports; plain gradient descent draws no random numbers.
    pub seed: u64,
    /// Stop once the loss is at or below this value.
    pub target_loss: f64,
    /// Certificates every this many iterations (0 disables them).
    pub checkpoint_every: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            iterations: 500,
            seed: 0,
            target_loss: 0.0,
            checkpoint_every: 0,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainStep {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Accepted step; zero on the final row.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub skip: Vec<BoundCertificate>,
    pub encoder: Option<EncoderCertificates>,
    /// Why certificates could not be evaluated, if so.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    ZeroGradient,
    LineSearchFailed,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainResult {
    pub trajectory: Vec<TrainStep>,
    pub checkpoints: Vec<Checkpoint>,
    pub stop: StopReason,
    pub final_loss: f64,
    #[serde(skip)]
    pub bank: LayerBank,
}

fn checkpoint(net: &Network, data: &TrainingSet, iteration: usize) -> Checkpoint {
    let run = || -> Result<(Vec<BoundCertificate>, EncoderCertificates)> {
        let skip = if net.spec().skip {
            (1..=net.spec().kappa)
                .map(|l| certify_bounds_skip(net, data, l, 0.0))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok((skip, certify_bounds_enc(net, data, 0.0)?))
    };
    match run() {
        Ok((skip, enc)) => Checkpoint {
            iteration,
            skip,
            encoder: Some(enc),
            error: None,
        },
        Err(e) => Checkpoint {
            iteration,
            skip: Vec::new(),
            encoder: None,
            error: Some(e.to_string()),
        },
    }
}

/// Gradient descent on all filter taps (pooling fixed) with Armijo
/// backtracking.
pub fn train_gd(
    spec: &NetworkSpec,
    bank: &LayerBank,
    data: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    if !(cfg.step_size > 0.0 && cfg.backtrack > 0.0 && cfg.backtrack < 1.0) {
        return Err(Error::Precondition(
            "step_size must be positive and backtrack in (0, 1)".into(),
        ));
    }
    let mut bank = bank.clone();
    let mut net = Network::build(spec, &bank)?;
    let mut theta = bank_params(&bank);
    let mut trajectory = Vec::new();
    let mut checkpoints = Vec::new();
    let eval = |theta: &[f64], bank: &mut LayerBank| -> Result<(Network, f64, Vec<f64>)> {
        set_bank_params(bank, theta);
        let net = Network::build(spec, bank)?;
        let (c, g) = loss_and_tap_gradient(&net, bank, data)?;
        Ok((net, c, g))
    };
    let (_, mut c, mut g) = eval(&theta, &mut bank)?;
    let mut stop = StopReason::IterationLimit;
    for it in 0..=cfg.iterations {
        if !c.is_finite() || c > DIVERGENCE_LOSS {
            return Err(Error::Divergence {
                iteration: it,
                loss: c,
            });
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 {
            checkpoints.push(checkpoint(&net, data, it));
        }
        let mut row = TrainStep {
            iteration: it,
            loss: c,
            grad_norm: gn,
            step: 0.0,
        };
        if c <= cfg.target_loss {
            trajectory.push(row);
            stop = StopReason::TargetReached;
            break;
        }
        if gn == 0.0 {
            trajectory.push(row);
            stop = StopReason::ZeroGradient;
            break;
        }
        if it == cfg.iterations {
            trajectory.push(row);
            break;
        }
        let mut t = cfg.step_size;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(p, d)| p - t * d).collect();
            let (n2, c2, g2) = eval(&trial, &mut bank)?;
            if c2.is_finite() && c2 <= c - cfg.armijo_c1 * t * gn * gn {
                accepted = Some((trial, n2, c2, g2));
                break;
            }
            t *= cfg.backtrack;
        }
        let Some((trial, n2, c2, g2)) = accepted else {
            set_bank_params(&mut bank, &theta);
            trajectory.push(row);
            stop = StopReason::LineSearchFailed;
            break;
        };
        row.step = t;
        trajectory.push(row);
        theta = trial;
        net = n2;
        c = c2;
        g = g2;
    }
    set_bank_params(&mut bank, &theta);
    Ok(TrainResult {
        final_loss: c,
        trajectory,
        checkpoints,
        stop,
        bank,
    })
}
