//! Executes the analyses of a config and assembles the report.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use edcnn::analysis::{
    exact_region_count, jacobian_analytic, jacobian_fd, linear_rep, lipschitz_global,
    mask_bit_count, masked_forward, nrep_bound, region_census, RegionCensus, MAX_ENUMERATION_SITES,
};
use edcnn::frames::{build_frame_basis, cascade_filter_check, frame_residual, FrameMode};
use edcnn::landscape::{
    certify_bounds_enc, certify_bounds_skip, check_stationarity, fd_matrix_gradient,
    feature_matrices, grad_enc_analytic, grad_skip_analytic, loss, train_gd, BoundCertificate,
    Operator, SpectrumSummary, TrainingSet,
};
use edcnn::netbuild::check_embedding_dims;
use edcnn::rng::{gaussian_vector, seeded_rng};
use edcnn::{Error, LayerBank, Matrix, Network, NetworkSpec, Nonlinearity, Vector};

use crate::config::{Analysis, ExperimentConfig, Tolerances};
use crate::CliError;

/// One pass/fail assertion inside an analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value: Some(value),
            limit: Some(limit),
            note: None,
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: None,
            limit: None,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisBlock {
    pub name: Analysis,
    pub enforced: bool,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Toolkit {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub dims: Vec<usize>,
    pub skip_dims: Vec<usize>,
    pub feature_dim: usize,
    /// `n_l = r·q_l·q_{l-1}` per layer and side.
    pub filter_params: Vec<usize>,
    pub frame_compatible: bool,
    pub nrep_bound: String,
    pub mask_bits: usize,
    pub warnings: Vec<String>,
}

impl NetworkSummary {
    pub fn of(spec: &NetworkSpec) -> Self {
        Self {
            dims: spec.dims(),
            skip_dims: if spec.skip {
                spec.skip_dims()
            } else {
                Vec::new()
            },
            feature_dim: spec.feature_dim(),
            filter_params: (1..=spec.kappa).map(|l| spec.filter_params(l)).collect(),
            frame_compatible: spec.frame_compatible(),
            nrep_bound: nrep_bound(spec).to_string(),
            mask_bits: mask_bit_count(spec),
            warnings: check_embedding_dims(spec)
                .iter()
                .map(|w| w.to_string())
                .collect(),
        }
    }
}

/// Deterministic for a given config; timings live in [`Timings`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub toolkit: Toolkit,
    pub config: ExperimentConfig,
    pub network: NetworkSummary,
    pub analyses: Vec<AnalysisBlock>,
    /// Every enforced analysis passed.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisTiming {
    pub name: Analysis,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub analyses: Vec<AnalysisTiming>,
    pub total_seconds: f64,
}

/// A CSV or JSON file written next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct SideFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub timings: Timings,
    pub side_files: Vec<SideFile>,
    pub bank: LayerBank,
}

impl RunOutput {
    pub fn block(&self, analysis: Analysis) -> Option<&AnalysisBlock> {
        self.report.analyses.iter().find(|b| b.name == analysis)
    }

    /// Exit status: 0 when every enforced check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            2
        }
    }

    /// Write `report.json`, `timings.json`, `bank.json` and the side files.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), to_pretty(&self.report)?)?;
        std::fs::write(dir.join("timings.json"), to_pretty(&self.timings)?)?;
        self.bank.save(&dir.join("bank.json"))?;
        for f in &self.side_files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
        Ok(())
    }
}

pub fn to_pretty<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(edcnn::Error::from)?;
    s.push('\n');
    Ok(s)
}

struct Outcome {
    checks: Vec<Check>,
    result: Value,
    files: Vec<SideFile>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    spec: &'a NetworkSpec,
    bank: &'a LayerBank,
    net: Network,
    census: Option<RegionCensus>,
}

type Step = edcnn::Result<Outcome>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn csv_file<I, R>(name: &str, header: &[&str], rows: I) -> edcnn::Result<SideFile>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(to_io)?;
    for row in rows {
        w.write_record(row).map_err(to_io)?;
    }
    let contents = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(SideFile {
        name: name.to_string(),
        contents,
    })
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

impl Context<'_> {
    fn probes(&self, component: &str) -> Vec<Vector> {
        let mut rng = seeded_rng(self.cfg.sub_seed(self.cfg.probes.seed, component));
        (0..self.cfg.probes.count)
            .map(|_| gaussian_vector(&mut rng, self.spec.input_dim()))
            .collect()
    }

    fn tol(&self) -> &Tolerances {
        &self.cfg.tolerances
    }

    fn census(&mut self) -> edcnn::Result<&RegionCensus> {
        if self.census.is_none() {
            self.census = Some(region_census(&self.net, &self.cfg.sampler_config())?);
        }
        Ok(self.census.as_ref().expect("just computed"))
    }

    fn frames(&mut self) -> Step {
        let tol = *self.tol();
        let mode = FrameMode::for_spec(self.spec);
        let residuals = frame_residual(self.spec, self.bank, mode)?;
        let basis = build_frame_basis(self.spec, self.bank)?;
        let basis_residual = basis.reconstruction_residual();
        let linear = self.net.with_nonlinearity(Nonlinearity::None);
        let mut worst = 0.0_f64;
        for x in self.probes("probes/frames") {
            let y = linear.output(&x)?;
            worst = worst.max(relative((&y - &x).norm(), x.norm()));
        }
        let worst_layer = residuals
            .iter()
            .flat_map(|r| {
                [
                    r.pooling_residual,
                    r.filter_residual,
                    r.layer_identity_residual,
                ]
            })
            .fold(0.0, f64::max);
        let mut checks = vec![
            Check::at_most("frame_conditions", worst_layer, tol.identity),
            Check::at_most("frame_basis_identity", basis_residual, tol.identity),
            Check::at_most("perfect_reconstruction", worst, tol.identity),
        ];
        let cascade = match cascade_filter_check(self.spec, self.bank) {
            Ok(report) => {
                checks.push(Check::at_most(
                    "cascade_identity",
                    report.max_deviation,
                    tol.cascade,
                ));
                to_value(&report)
            }
            Err(Error::PoolingPresent(msg)) => json!({ "skipped": msg }),
            Err(e) => return Err(e),
        };
        Ok(Outcome {
            checks,
            result: json!({
                "mode": mode,
                "layers": residuals,
                "basis": {
                    "rows": basis.b.nrows(),
                    "feature_dim": basis.b.ncols(),
                    "identity_residual": basis_residual,
                },
                "reconstruction": {
                    "probes": self.cfg.probes.count,
                    "max_relative_error": worst,
                },
                "cascade": cascade,
            }),
            files: Vec::new(),
        })
    }

    fn representation(&mut self) -> Step {
        let tol = *self.tol();
        let mut worst = 0.0_f64;
        let mut worst_replay = 0.0_f64;
        let mut dims_ok = true;
        let mut patterns = std::collections::BTreeSet::new();
        for x in self.probes("probes/representation") {
            let rep = linear_rep(&self.net, &x)?;
            let y = self.net.output(&x)?;
            worst = worst.max(relative((rep.apply(&x) - &y).norm(), y.norm()));
            let replay = masked_forward(&self.net, &rep.pattern, &x)?;
            worst_replay = worst_replay.max(relative((replay - &y).norm(), y.norm()));
            dims_ok &= rep.feature_dim() == self.spec.feature_dim();
            patterns.insert(rep.pattern.hash_hex());
        }
        Ok(Outcome {
            checks: vec![
                Check::at_most("representation_identity", worst, tol.identity),
                Check::at_most("masked_replay", worst_replay, tol.identity),
                Check::flag(
                    "feature_dim",
                    dims_ok,
                    format!("expected {} columns", self.spec.feature_dim()),
                ),
            ],
            result: json!({
                "probes": self.cfg.probes.count,
                "feature_dim": self.spec.feature_dim(),
                "distinct_patterns": patterns.len(),
                "max_relative_error": worst,
                "max_replay_error": worst_replay,
            }),
            files: Vec::new(),
        })
    }

    fn regions(&mut self) -> Step {
        let sites = mask_bit_count(self.spec);
        let exact = if sites <= MAX_ENUMERATION_SITES {
            match exact_region_count(&self.net) {
                Ok(n) => Ok(n),
                Err(Error::Precondition(msg)) => Err(msg),
                Err(e) => return Err(e),
            }
        } else {
            Err(format!(
                "{sites} ReLU sites exceed the enumeration limit {MAX_ENUMERATION_SITES}"
            ))
        };
        let census = self.census()?;
        let mut checks = vec![
            Check {
                name: "within_nrep_bound".into(),
                passed: census.within_nrep_bound,
                value: Some(census.distinct as f64),
                limit: None,
                note: Some(format!("N_rep = {}", census.nrep_bound)),
            },
            Check {
                name: "within_mask_bit_bound".into(),
                passed: census.within_mask_bit_bound,
                value: Some(census.distinct as f64),
                limit: None,
                note: Some(format!(
                    "2^{} = {}",
                    census.mask_bits, census.mask_bit_bound
                )),
            },
        ];
        if let Ok(n) = &exact {
            checks.push(Check {
                name: "matches_exact_count".into(),
                passed: census.distinct == *n,
                value: Some(census.distinct as f64),
                limit: Some(*n as f64),
                note: None,
            });
        }
        let csv = csv_file(
            "regions.csv",
            &["pattern_hash", "count", "k_p"],
            census.regions.iter().map(|r| {
                [
                    r.pattern_hash.clone(),
                    r.count.to_string(),
                    format!("{:e}", r.k_p),
                ]
            }),
        )?;
        let mut result = to_value(census);
        result["exact_count"] = match exact {
            Ok(n) => json!(n),
            Err(msg) => json!({ "skipped": msg }),
        };
        Ok(Outcome {
            checks,
            result,
            files: vec![csv],
        })
    }

    fn lipschitz(&mut self) -> Step {
        let tol = *self.tol();
        let net = self.net.clone();
        let census = self.census()?;
        let global = lipschitz_global(census)?;
        let outputs: Vec<Vector> = census
            .inputs
            .iter()
            .map(|x| net.output(x))
            .collect::<edcnn::Result<_>>()?;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); census.regions.len()];
        for (i, &r) in census.assignment.iter().enumerate() {
            members[r].push(i);
        }
        let mut pairs = 0usize;
        let mut excess = f64::NEG_INFINITY;
        for (r, idx) in members.iter().enumerate() {
            let k = census.regions[r].k_p;
            for w in 1..idx.len() {
                for (a, b) in [(idx[0], idx[w]), (idx[w - 1], idx[w])] {
                    let dy = (&outputs[a] - &outputs[b]).norm();
                    let dx = (&census.inputs[a] - &census.inputs[b]).norm();
                    excess = excess.max(dy - k * dx);
                    pairs += 1;
                }
            }
        }
        let mut checks = Vec::new();
        if pairs > 0 {
            checks.push(Check::at_most(
                "pairwise_within_region",
                excess,
                tol.lipschitz,
            ));
        }
        let csv = csv_file(
            "lipschitz.csv",
            &["region_index", "k_p"],
            census
                .regions
                .iter()
                .enumerate()
                .map(|(i, r)| [i.to_string(), format!("{:e}", r.k_p)]),
        )?;
        Ok(Outcome {
            checks,
            result: json!({
                "global": global,
                "regions": census.regions.len(),
                "pairs_checked": pairs,
                "max_excess": if pairs > 0 { json!(excess) } else { Value::Null },
            }),
            files: vec![csv],
        })
    }

    fn jacobian(&mut self) -> Step {
        let tol = *self.tol();
        let mut rng = seeded_rng(self.cfg.sub_seed(self.cfg.probes.seed, "probes/jacobian"));
        let wanted = self.cfg.probes.count;
        let mut errors = Vec::with_capacity(wanted);
        let mut resampled = 0usize;
        while errors.len() < wanted {
            if resampled > 100 * wanted {
                return Err(Error::Resample(resampled));
            }
            let x = gaussian_vector(&mut rng, self.spec.input_dim());
            let analytic = match jacobian_analytic(&self.net, &x, tol.kink_margin) {
                Ok(j) => j,
                Err(Error::KinkMargin { .. }) => {
                    resampled += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let fd = jacobian_fd(&self.net, &x, tol.fd_step)?;
            errors.push(relative((&analytic - &fd).norm(), fd.norm()));
        }
        let worst = errors.iter().copied().fold(0.0, f64::max);
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        Ok(Outcome {
            checks: vec![Check::at_most(
                "finite_difference_agreement",
                worst,
                tol.finite_difference,
            )],
            result: json!({
                "points": wanted,
                "resampled": resampled,
                "kink_margin": tol.kink_margin,
                "fd_step": tol.fd_step,
                "max_relative_error": worst,
                "mean_relative_error": mean,
            }),
            files: Vec::new(),
        })
    }

    fn landscape(&mut self) -> Step {
        let tol = *self.tol();
        let section = self.cfg.landscape;
        let data = TrainingSet::random(
            self.spec.input_dim(),
            section.samples,
            self.cfg.sub_seed(section.seed, "landscape"),
        )?;
        let net = &self.net;
        let kappa = self.spec.kappa;
        let c = loss(net, &data)?;
        let features = feature_matrices(net, &data)?;
        let mut checks = Vec::new();
        let sandwich = |name: String, cert: &BoundCertificate, checks: &mut Vec<Check>| {
            if cert.applicable {
                let scale = cert.upper.max(cert.grad_norm);
                let slack = tol.bound_slack * scale;
                let passed =
                    cert.lower - slack <= cert.grad_norm && cert.grad_norm <= cert.upper + slack;
                checks.push(Check {
                    name,
                    passed,
                    value: Some(cert.grad_norm),
                    limit: Some(cert.upper),
                    note: Some(format!("lower {:e}", cert.lower)),
                });
            }
        };
        let mut skip_certs = Vec::new();
        let mut fd_errors = Vec::new();
        if self.spec.skip {
            for l in 1..=kappa {
                let cert = certify_bounds_skip(net, &data, l, tol.kink_margin)?;
                sandwich(format!("sandwich_skip_layer{l}"), &cert, &mut checks);
                skip_certs.push(cert);
                if section.finite_differences {
                    let an = grad_skip_analytic(net, &data, l, tol.kink_margin)?;
                    let fd = fd_matrix_gradient(net, &data, l, Operator::STilde, tol.fd_step)?;
                    fd_errors.push(json!({ "operator": format!("S̃^{l}"), "relative_error": rel_fro(&an, &fd) }));
                }
            }
        }
        let enc = certify_bounds_enc(net, &data, tol.kink_margin)?;
        sandwich("sandwich_encoder".into(), &enc.input_features, &mut checks);
        if section.finite_differences {
            let an = grad_enc_analytic(net, &data, tol.kink_margin)?;
            let fd = fd_matrix_gradient(net, &data, kappa, Operator::E, tol.fd_step)?;
            fd_errors.push(
                json!({ "operator": format!("E^{kappa}"), "relative_error": rel_fro(&an, &fd) }),
            );
        }
        if !fd_errors.is_empty() {
            let worst = fd_errors
                .iter()
                .map(|e| e["relative_error"].as_f64().unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                "gradient_finite_differences",
                worst,
                tol.finite_difference,
            ));
        }
        let stationarity = if self.spec.skip {
            let report = check_stationarity(
                net,
                &data,
                tol.kink_margin,
                tol.loss_floor,
                tol.grad_positive,
            )?;
            checks.push(Check::flag(
                "stationarity_implies_zero_loss",
                report.status != edcnn::landscape::StationarityStatus::Violated,
                format!("{:?}", report.status).to_lowercase(),
            ));
            to_value(&report)
        } else {
            json!({ "skipped": "needs skipped connections" })
        };
        Ok(Outcome {
            checks,
            result: json!({
                "samples": section.samples,
                "loss": c,
                "features": {
                    "xi_kappa": SpectrumSummary::of(features.xi_kappa()),
                    "gamma": features.gamma.iter().map(SpectrumSummary::of).collect::<Vec<_>>(),
                },
                "skip_certificates": skip_certs,
                "encoder_certificates": enc,
                "finite_differences": fd_errors,
                "stationarity": stationarity,
            }),
            files: Vec::new(),
        })
    }

    fn train(&mut self) -> Step {
        let section = self.cfg.train;
        let data = TrainingSet::random(
            self.spec.input_dim(),
            section.samples,
            self.cfg.sub_seed(section.data_seed, "train/data"),
        )?;
        let gd = section.gd_config(self.cfg.sub_seed(None, "train"));
        let res = train_gd(self.spec, self.bank, &data, &gd)?;
        let monotone = res.trajectory.windows(2).all(|w| w[1].loss <= w[0].loss);
        let csv = csv_file(
            "loss.csv",
            &["iteration", "loss", "grad_norm"],
            res.trajectory.iter().map(|s| {
                [
                    s.iteration.to_string(),
                    format!("{:e}", s.loss),
                    format!("{:e}", s.grad_norm),
                ]
            }),
        )?;
        let trained = SideFile {
            name: "trained_bank.json".into(),
            contents: to_pretty(&res.bank.to_json())
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?
                .into_bytes(),
        };
        let initial = res
            .trajectory
            .first()
            .map(|s| s.loss)
            .unwrap_or(res.final_loss);
        Ok(Outcome {
            checks: vec![Check::flag(
                "monotone_loss",
                monotone,
                "Armijo backtracking",
            )],
            result: json!({
                "samples": section.samples,
                "config": gd,
                "stop": res.stop,
                "iterations": res.trajectory.len().saturating_sub(1),
                "initial_loss": initial,
                "final_loss": res.final_loss,
                "checkpoints": res.checkpoints,
            }),
            files: vec![csv, trained],
        })
    }
}

fn rel_fro(a: &Matrix, b: &Matrix) -> f64 {
    relative((a - b).norm(), b.norm())
}

/// Run every analysis of `cfg` in declared order.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let bank = cfg.build_bank()?;
    let net = Network::build(&cfg.network, &bank)?;
    let mut ctx = Context {
        cfg,
        spec: &cfg.network,
        bank: &bank,
        net,
        census: None,
    };
    let mut blocks = Vec::new();
    let mut timings = Vec::new();
    let mut side_files = Vec::new();
    for &analysis in &cfg.analyses {
        let t0 = Instant::now();
        let step = match analysis {
            Analysis::Frames => ctx.frames(),
            Analysis::Representation => ctx.representation(),
            Analysis::Regions => ctx.regions(),
            Analysis::Lipschitz => ctx.lipschitz(),
            Analysis::Jacobian => ctx.jacobian(),
            Analysis::Landscape => ctx.landscape(),
            Analysis::Train => ctx.train(),
        };
        let enforced = cfg.enforce.contains(&analysis);
        let block = match step {
            Ok(out) => {
                side_files.extend(out.files);
                AnalysisBlock {
                    name: analysis,
                    enforced,
                    passed: out.checks.iter().all(|c| c.passed),
                    checks: out.checks,
                    error: None,
                    result: out.result,
                }
            }
            Err(e) => AnalysisBlock {
                name: analysis,
                enforced,
                passed: false,
                checks: vec![Check::flag("completed", false, e.to_string())],
                error: Some(e.to_string()),
                result: Value::Null,
            },
        };
        blocks.push(block);
        timings.push(AnalysisTiming {
            name: analysis,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let passed = blocks.iter().filter(|b| b.enforced).all(|b| b.passed);
    Ok(RunOutput {
        report: Report {
            toolkit: Toolkit {
                name: "edcnn",
                version: env!("CARGO_PKG_VERSION"),
            },
            config: cfg.clone(),
            network: NetworkSummary::of(&cfg.network),
            analyses: blocks,
            passed,
        },
        timings: Timings {
            analyses: timings,
            total_seconds: start.elapsed().as_secs_f64(),
        },
        side_files,
        bank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BankSource;

    fn spec(skip: bool, nl: Nonlinearity) -> NetworkSpec {
        NetworkSpec::new(2, vec![1, 2, 4], vec![4, 4, 4], skip, nl).unwrap()
    }

    #[test]
    fn frame_bank_passes_frames_analysis() {
        let mut cfg = ExperimentConfig::single(
            spec(true, Nonlinearity::None),
            BankSource::default(),
            Analysis::Frames,
            1,
        );
        cfg.enforce = vec![Analysis::Frames];
        let out = run(&cfg).unwrap();
        let block = out.block(Analysis::Frames).unwrap();
        assert!(block.passed, "{:#?}", block.checks);
        assert_eq!(out.exit_code(), 0);
        assert_eq!(block.checks.len(), 4);
    }

    #[test]
    fn random_bank_fails_enforced_frames() {
        let bank = BankSource::Random {
            seed: None,
            scale: 1.0,
        };
        let mut cfg =
            ExperimentConfig::single(spec(false, Nonlinearity::None), bank, Analysis::Frames, 1);
        cfg.enforce = vec![Analysis::Frames];
        let out = run(&cfg).unwrap();
        assert!(!out.report.passed);
        assert_eq!(out.exit_code(), 2);
    }

    #[test]
    fn every_analysis_runs_on_a_skip_relu_net() {
        let bank = BankSource::Random {
            seed: None,
            scale: 1.0,
        };
        let mut cfg =
            ExperimentConfig::single(spec(true, Nonlinearity::Relu), bank, Analysis::Frames, 5);
        cfg.analyses = Analysis::ALL.to_vec();
        cfg.enforce = vec![
            Analysis::Representation,
            Analysis::Regions,
            Analysis::Lipschitz,
            Analysis::Jacobian,
            Analysis::Landscape,
            Analysis::Train,
        ];
        cfg.sampler.count = 300;
        cfg.train.iterations = 20;
        cfg.train.step_size = 0.01;
        let out = run(&cfg).unwrap();
        for block in &out.report.analyses {
            assert!(block.error.is_none(), "{}: {:?}", block.name, block.error);
            if block.enforced {
                assert!(block.passed, "{}: {:#?}", block.name, block.checks);
            }
        }
        let names: Vec<&str> = out.side_files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "regions.csv",
                "lipschitz.csv",
                "loss.csv",
                "trained_bank.json"
            ]
        );
        let regions = String::from_utf8(out.side_files[0].contents.clone()).unwrap();
        assert!(regions.starts_with("pattern_hash,count,k_p\n"));
    }

    #[test]
    fn linear_census_has_one_region() {
        let cfg = ExperimentConfig::single(
            spec(false, Nonlinearity::None),
            BankSource::Random {
                seed: None,
                scale: 1.0,
            },
            Analysis::Regions,
            2,
        );
        let out = run(&cfg).unwrap();
        assert_eq!(out.block(Analysis::Regions).unwrap().result["distinct"], 1);
    }

    #[test]
    fn reports_are_deterministic() {
        let bank = BankSource::Random {
            seed: Some(4),
            scale: 1.0,
        };
        let mut cfg =
            ExperimentConfig::single(spec(true, Nonlinearity::Relu), bank, Analysis::Regions, 9);
        cfg.analyses = vec![Analysis::Regions, Analysis::Lipschitz, Analysis::Landscape];
        let a = to_pretty(&run(&cfg).unwrap().report).unwrap();
        let b = to_pretty(&run(&cfg).unwrap().report).unwrap();
        assert_eq!(a, b);
    }
}
