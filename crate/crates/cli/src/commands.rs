//! Subcommand implementations. Each returns the result document and exit code.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use flatmaj::channels::{
    epsilon_smooth, power_universal_protocol, smoothing_fidelity_dense, uhlmann_channel, uhlmann_channel_via_oracle,
    ChannelCheck,
};
use flatmaj::conditions::{check_asymptotic, check_exact};
use flatmaj::entropies::{d_hat, phi, ParamPoint};
use flatmaj::feasibility::{solve, tensor_instance, Engine, FeasibilityStatus};
use flatmaj::jordan::{flat_pair_from_operators, jordan_decompose, realize_dense, ExtractOptions};
use flatmaj::json::{DenseMatrix, DensePairJson};
use flatmaj::rates::{certify_achievable, optimal_rate};
use flatmaj::{ChannelRep, FlatPair};

use crate::config::RunConfig;
use crate::report::{Failure, Outcome, EXIT_UNDETERMINED};
use crate::{ChannelCommand, Command, EngineArg, Mode};

fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::malformed(format!("bad JSON in {}: {e}", path.display())))
}

fn read_pair(path: &Path) -> Result<FlatPair, Failure> {
    let pair: FlatPair = read_json(path)?;
    pair.validate()?;
    Ok(pair)
}

/// Maps `-0.0` to `0.0` so identical values print identically.
fn tidy(x: f64) -> f64 {
    x + 0.0
}

#[derive(Serialize)]
struct EntropyResult {
    alpha: f64,
    z: Option<f64>,
    tropical: bool,
    phi: f64,
    d_hat: f64,
}

#[derive(Serialize)]
struct ChannelResult<'a> {
    channel: &'a ChannelRep,
    check: ChannelCheck,
}

#[derive(Serialize)]
struct JordanBlockResult {
    dim: usize,
    overlap: Option<f64>,
    in_p: bool,
    in_q: bool,
}

#[derive(Serialize)]
struct JordanResult {
    dim: usize,
    residual: f64,
    orthogonality_defect: f64,
    blocks: Vec<JordanBlockResult>,
    pair: FlatPair,
}

#[derive(Serialize)]
struct ExtractResult {
    pair: FlatPair,
    residual: f64,
}

#[derive(Serialize)]
struct SmoothResult {
    #[serde(flatten)]
    smoothed: flatmaj::channels::Smoothed<f64>,
    fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict_before: Option<flatmaj::Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict_after: Option<flatmaj::Verdict>,
}

fn parse_rate(text: &str) -> Result<(u64, u64), Failure> {
    let bad = || Failure::malformed(format!("rate {text:?} is not of the form num/den"));
    let (num, den) = text.split_once('/').unwrap_or((text, "1"));
    let num: u64 = num.trim().parse().map_err(|_| bad())?;
    let den: u64 = den.trim().parse().map_err(|_| bad())?;
    if num == 0 || den == 0 {
        return Err(bad());
    }
    Ok((num, den))
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    match command {
        Command::Entropy(a) => {
            let pair = read_pair(&a.pair)?;
            let pt = match a.z {
                Some(z) => ParamPoint::new(a.alpha, z)?,
                None => ParamPoint::tropical(a.alpha)?,
            };
            Ok(Outcome::ok(
                "alpha-z-entropy",
                EntropyResult {
                    alpha: a.alpha,
                    z: a.z,
                    tropical: a.tropical,
                    phi: tidy(phi(&pair, &pt)?),
                    d_hat: tidy(d_hat(&pair, &pt)?),
                },
            ))
        }
        Command::Check(a) => {
            let (pin, pout) = (read_pair(&a.pairs.input)?, read_pair(&a.pairs.output)?);
            let v = match a.mode {
                Mode::Exact => check_exact(&pin, &pout, &cfg.check())?,
                Mode::Asymptotic => check_asymptotic(&pin, &pout, &cfg.check())?,
            };
            let criterion = match a.mode {
                Mode::Exact if !v.conclusions.large_sample && v.conclusions.catalytic => "catalytic",
                Mode::Exact => "large-sample",
                Mode::Asymptotic if !v.conclusions.approximate_large_sample && v.conclusions.approximate_catalytic => {
                    "approximate-catalytic"
                }
                Mode::Asymptotic => "approximate-large-sample",
            };
            Ok(Outcome::ok(criterion, v))
        }
        Command::Rate(a) => {
            let (pin, pout) = (read_pair(&a.input)?, read_pair(&a.output)?);
            Ok(Outcome::ok("rates", optimal_rate(&pin, &pout, &cfg.minimize())?))
        }
        Command::Certify(a) => {
            let (pin, pout) = (read_pair(&a.pairs.input)?, read_pair(&a.pairs.output)?);
            let (num, den) = parse_rate(&a.rate)?;
            let cert = certify_achievable(&pin, &pout, num, den, a.nmax, &cfg.minimize(), &cfg.oracle())?;
            let code = if cert.n.is_some() { 0 } else { EXIT_UNDETERMINED };
            Ok(Outcome::ok("rates", cert).with_code(code))
        }
        Command::Jordan(a) => {
            if let (Some(p), Some(q)) = (&a.p, &a.q) {
                let p = read_json::<DenseMatrix>(p)?.to_cmat::<f64>()?;
                let q = read_json::<DenseMatrix>(q)?.to_cmat::<f64>()?;
                let dec = jordan_decompose(&p, &q)?;
                let pair = flatmaj::jordan::flat_pair_from_projections(&p, &q)?;
                let blocks = dec
                    .blocks
                    .iter()
                    .map(|b| JordanBlockResult {
                        dim: b.dim(),
                        overlap: b.overlap,
                        in_p: b.a_vector.is_some(),
                        in_q: b.b_vector.is_some(),
                    })
                    .collect();
                Ok(Outcome::ok(
                    "jordan-decomposition",
                    JordanResult {
                        dim: dec.dim,
                        residual: dec.residual,
                        orthogonality_defect: dec.orthogonality_defect(),
                        blocks,
                        pair,
                    },
                ))
            } else if let Some(path) = &a.operators {
                let json: DensePairJson = read_json(path)?;
                let pair = flatmaj::DenseOperatorPair {
                    a: json.a.to_cmat()?,
                    b: json.b.to_cmat()?,
                };
                let ex = flat_pair_from_operators(&pair, &ExtractOptions::default())?;
                Ok(Outcome::ok(
                    "jordan-decomposition",
                    ExtractResult {
                        pair: ex.pair,
                        residual: ex.residual,
                    },
                ))
            } else if let Some(path) = &a.realize {
                let dense = realize_dense(&read_pair(path)?)?;
                Ok(Outcome::ok(
                    "jordan-decomposition",
                    DensePairJson {
                        a: DenseMatrix::from_cmat(&dense.a),
                        b: DenseMatrix::from_cmat(&dense.b),
                    },
                ))
            } else {
                Err(Failure::malformed("jordan needs --p and --q, --operators, or --realize"))
            }
        }
        Command::Channel(ChannelCommand::Uhlmann { fin, fout, oracle }) => {
            let ch = if *oracle {
                uhlmann_channel_via_oracle(*fin, *fout, &cfg.oracle())?
            } else {
                uhlmann_channel(*fin, *fout)?
            };
            Ok(Outcome::ok(
                "pure-state-overlap",
                ChannelResult {
                    check: ch.verify(),
                    channel: &ch,
                },
            ))
        }
        Command::Channel(ChannelCommand::PowerUniversal { f, target, m_cap }) => {
            let target = read_pair(target)?;
            let pu = power_universal_protocol(*f, &target, *m_cap)?;
            let code = if pu.materialized { 0 } else { EXIT_UNDETERMINED };
            Ok(Outcome::ok("power-universal", pu).with_code(code))
        }
        Command::Smooth(a) => {
            let target = read_pair(&a.target)?;
            let smoothed = epsilon_smooth(&target, a.eps)?;
            let fidelity = smoothing_fidelity_dense(&target, &smoothed.pair)?;
            let (verdict_before, verdict_after) = match &a.input {
                Some(path) => {
                    let pin = read_pair(path)?;
                    (
                        Some(check_exact(&pin, &target, &cfg.check())?),
                        Some(check_exact(&pin, &smoothed.pair, &cfg.check())?),
                    )
                }
                None => (None, None),
            };
            Ok(Outcome::ok(
                "approximate-large-sample",
                SmoothResult {
                    smoothed,
                    fidelity,
                    verdict_before,
                    verdict_after,
                },
            ))
        }
        Command::Oracle(a) => {
            let (pin, pout) = (read_pair(&a.pairs.input)?, read_pair(&a.pairs.output)?);
            if a.n == 0 || a.m == 0 {
                return Err(Failure::malformed("--n and --m must be positive"));
            }
            let mut opts = cfg.oracle();
            if let Some(k) = a.iters {
                opts.max_iters = k;
            }
            opts.engine = match a.engine {
                EngineArg::DouglasRachford => Engine::DouglasRachford,
                EngineArg::Dykstra => Engine::Dykstra,
            };
            let prob = tensor_instance(&pin, &pout, a.n, a.m, &opts)?;
            let mut res = solve(&prob);
            if !a.emit_channel {
                res.channel = None;
            }
            let code = match res.status {
                FeasibilityStatus::Feasible => 0,
                FeasibilityStatus::Undetermined => EXIT_UNDETERMINED,
            };
            Ok(Outcome::ok("channel-existence", res).with_code(code))
        }
        Command::Selftest => crate::selftest::run(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_parsing() {
        assert_eq!(parse_rate("3/2").unwrap(), (3, 2));
        assert_eq!(parse_rate("2").unwrap(), (2, 1));
        assert!(parse_rate("0/1").is_err());
        assert!(parse_rate("a/b").is_err());
    }

    #[test]
    fn tidy_clears_negative_zero() {
        assert_eq!(tidy(-0.0).to_string(), "0");
    }
}
