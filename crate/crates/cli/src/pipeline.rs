//! The ingest → train → audit → ablation pipeline and its run directories.
//!
//! ```text
//! <run>/config.toml        resolved config echo
//! <run>/dataset/           dataset archive (split included)
//! <run>/loss.csv           per-epoch loss breakdown
//! <run>/checkpoint.json    trained model
//! <run>/train_report.json  history and wall-clock time
//! <run>/audit/report.csv   audit table, long form
//! <run>/audit/report.md    audit table, methods × predictors
//! <run>/audit/predictions/ one CSV per (method, predictor)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cfvae_core::audit::{build_audit_set, default_inversions, evaluate, AuditReport, MethodSpec};
use cfvae_core::cfvae::CfvaeModel;
use cfvae_core::datasets::{
    generate_synthetic, load_adult, load_law, read_archive, split, write_archive, SyntheticSpec,
    TabularDataset,
};
use cfvae_core::predictors::{FeatureSetKind, MeanStd};
use cfvae_core::seed;
use cfvae_core::training::{train, write_loss_csv, TrainReport};
use serde::Serialize;

use crate::config::{Arm, DatasetKind, LoadedConfig};
use crate::RunError;

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Core(cfvae_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Load, subsample, split and standardise the configured dataset.
pub fn build_dataset(cfg: &LoadedConfig) -> Result<TabularDataset, RunError> {
    let c = &cfg.config;
    let d = &c.dataset;
    let raw = match d.kind {
        DatasetKind::Archive => {
            let p = cfg.dataset_path().expect("validated");
            return Ok(read_archive(&p)?);
        }
        DatasetKind::Adult => load_adult(&cfg.dataset_path().expect("validated"))?,
        DatasetKind::Law => load_law(&cfg.dataset_path().expect("validated"), &d.law_columns)?,
        DatasetKind::Synthetic => {
            let s = d.synthetic.as_ref().expect("validated");
            let mut spec = SyntheticSpec::new(
                s.n_samples,
                cfg.graph.clone(),
                s.sensitive_effect,
                seed::derive(c.seed, "synthetic"),
            );
            spec.noise_scale = s.noise_scale;
            spec.readouts_per_concept = s.readouts_per_concept;
            spec.sensitive_readouts = s.sensitive_readouts;
            if let Some(w) = &s.target_weights {
                spec.target_weights = w.clone();
            }
            generate_synthetic(&spec)?
        }
    };
    let sampled = match d.subsample {
        Some(n) => raw.subsample(n, seed::derive(c.seed, "subsample")),
        None => raw,
    };
    let mut ds = split(&sampled, d.train_fraction, seed::derive(c.seed, "split"))?;
    ds.standardize()?;
    Ok(ds)
}

fn echo_config(cfg: &LoadedConfig, out: &Path) -> Result<(), RunError> {
    let mut resolved = cfg.config.clone();
    resolved.graph.file = None;
    resolved.graph.text = Some(cfg.graph.to_text());
    if let Some(p) = cfg.dataset_path() {
        resolved.dataset.path = Some(p);
    }
    let text = toml::to_string_pretty(&resolved)
        .map_err(|e| RunError::Core(cfvae_core::Error::Serde(e.to_string())))?;
    write_file(&out.join("config.toml"), &text)
}

pub fn cmd_ingest(cfg: &LoadedConfig, out: &Path) -> Result<TabularDataset, RunError> {
    let ds = build_dataset(cfg)?;
    echo_config(cfg, out)?;
    write_archive(&ds, &out.join("dataset"))?;
    Ok(ds)
}

pub struct TrainOutcome {
    pub dataset: TabularDataset,
    pub report: TrainReport,
    pub model: CfvaeModel,
}

fn train_into(
    cfg: &LoadedConfig,
    ds: &TabularDataset,
    model_cfg: cfvae_core::CfvaeConfig,
    out: &Path,
) -> Result<(TrainReport, CfvaeModel), RunError> {
    let tcfg = cfg.train_config(model_cfg);
    let (report, model) = train(ds, &tcfg)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_loss_csv(&report.history, &out.join("loss.csv"))?;
    model.save(&out.join("checkpoint.json"))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| RunError::Core(cfvae_core::Error::Serde(e.to_string())))?;
    write_file(&out.join("train_report.json"), &json)?;
    Ok((report, model))
}

pub fn cmd_train(cfg: &LoadedConfig, out: &Path) -> Result<TrainOutcome, RunError> {
    let dataset = build_dataset(cfg)?;
    echo_config(cfg, out)?;
    write_archive(&dataset, &out.join("dataset"))?;
    let (report, model) = train_into(cfg, &dataset, cfg.cfvae_config(), out)?;
    log::info!(
        "trained {} epochs on {} rows in {:.1}s; final total loss {:.4}",
        report.history.len(),
        report.n_train,
        report.wall_clock_seconds,
        report.history.last().map_or(f64::NAN, |b| b.total)
    );
    Ok(TrainOutcome {
        dataset,
        report,
        model,
    })
}

fn audit_with(
    cfg: &LoadedConfig,
    ds: &TabularDataset,
    methods: &[MethodSpec<'_>],
) -> Result<AuditReport, RunError> {
    let mut rules = default_inversions(ds);
    rules.extend(cfg.config.audit.inversions.clone());
    let audit = build_audit_set(ds, &rules, &cfg.config.audit.selection)?;
    if audit.is_empty() {
        return Err(RunError::Core(cfvae_core::Error::Audit(format!(
            "selection '{}' matched no rows",
            audit.description
        ))));
    }
    log::info!("audit set: {} rows ({})", audit.len(), audit.description);
    let specs = cfg.predictor_specs(cfg.task(ds.schema()));
    Ok(evaluate(ds, &audit, methods, &specs)?)
}

/// Audit a trained run directory; writes `<run>/audit/`.
pub fn cmd_audit(cfg: &LoadedConfig, run_dir: &Path) -> Result<AuditReport, RunError> {
    let needs_model = cfg.config.audit.methods.iter().any(|m| m.features.needs_model());
    let ckpt = run_dir.join("checkpoint.json");
    let model = if needs_model {
        if !ckpt.exists() {
            return Err(RunError::Core(cfvae_core::Error::Audit(format!(
                "no checkpoint at {}; run `cfvae train` first",
                ckpt.display()
            ))));
        }
        Some(CfvaeModel::load(&ckpt)?)
    } else {
        None
    };
    let archive = run_dir.join("dataset");
    let ds = if archive.join("manifest.toml").exists() {
        read_archive(&archive)?
    } else {
        build_dataset(cfg)?
    };
    let methods: Vec<MethodSpec<'_>> = cfg
        .config
        .audit
        .methods
        .iter()
        .map(|m| MethodSpec {
            label: m.label.clone(),
            features: m.features,
            model: model.as_ref(),
        })
        .collect();
    let report = audit_with(cfg, &ds, &methods)?;
    report.write(&run_dir.join("audit"))?;
    Ok(report)
}

/// One cell of the ablation table, aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub arm: Arm,
    pub predictor: String,
    /// Median over seeds of the repeat-mean score.
    pub score: f64,
    /// Median over seeds of the repeat-mean unfairness.
    pub ufs: f64,
    /// Per-seed (score, ufs) repeat statistics.
    pub per_seed: Vec<(u64, MeanStd, MeanStd)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub score_name: String,
    pub ufs_name: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn cell(&self, arm: Arm, predictor: &str) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.arm == arm && c.predictor == predictor)
    }

    pub fn arms(&self) -> Vec<Arm> {
        let mut v: Vec<Arm> = self.cells.iter().map(|c| c.arm).collect();
        v.dedup();
        v
    }

    pub fn predictors(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.predictor) {
                v.push(c.predictor.clone());
            }
        }
        v
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("arm,predictor,{}_median,{}_median\n", self.score_name, self.ufs_name);
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{},{}", c.arm.slug(), c.predictor, c.score, c.ufs);
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let preds = self.predictors();
        let mut s = String::from("| Arm |");
        for p in &preds {
            let _ = write!(s, " {p} {} | {p} {} |", self.score_name, self.ufs_name);
        }
        s.push_str("\n|---|");
        for _ in &preds {
            s.push_str("---|---|");
        }
        s.push('\n');
        for arm in self.arms() {
            let _ = write!(s, "| {} |", arm.label());
            for p in &preds {
                let c = self.cell(arm, p).expect("complete table");
                let _ = write!(s, " {:.3} | {:.3} |", c.score, c.ufs);
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "\nMedian over seeds {:?} of the mean over predictor repeats.",
            self.seeds
        );
        s
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run the ablation arms for every configured seed; writes
/// `<out>/seed_<s>/<arm>/...`, `<out>/ablation.csv` and `<out>/ablation.md`.
pub fn cmd_ablation(cfg: &LoadedConfig, out: &Path, arms: Option<&[Arm]>) -> Result<AblationTable, RunError> {
    let arms: Vec<Arm> = arms.map_or_else(|| cfg.config.ablation.arms.clone(), <[Arm]>::to_vec);
    let seeds = if cfg.config.ablation.seeds.is_empty() {
        vec![cfg.config.seed]
    } else {
        cfg.config.ablation.seeds.clone()
    };
    echo_config(cfg, out)?;
    let mut reports: Vec<(u64, Arm, AuditReport)> = Vec::new();
    let mut names = (String::new(), String::new());
    for &s in &seeds {
        let seeded = cfg.clone().with_seed(s);
        let ds = build_dataset(&seeded)?;
        let seed_dir = out.join(format!("seed_{s}"));
        write_archive(&ds, &seed_dir.join("dataset"))?;
        for &arm in &arms {
            let arm_dir = seed_dir.join(arm.slug());
            let model = match arm.model_config(&seeded.cfvae_config()) {
                Some(mc) => Some(train_into(&seeded, &ds, mc, &arm_dir)?.1),
                None => None,
            };
            let method = MethodSpec {
                label: arm.label().to_string(),
                features: if model.is_some() {
                    FeatureSetKind::Zxp
                } else {
                    FeatureSetKind::Full
                },
                model: model.as_ref(),
            };
            let report = audit_with(&seeded, &ds, &[method])?;
            report.write(&arm_dir.join("audit"))?;
            names = (report.score_name().to_string(), report.ufs_name().to_string());
            reports.push((s, arm, report));
        }
    }
    let mut cells = Vec::new();
    for &arm in &arms {
        let of_arm: Vec<&(u64, Arm, AuditReport)> = reports.iter().filter(|r| r.1 == arm).collect();
        for c in &of_arm[0].2.cells {
            let per_seed: Vec<(u64, MeanStd, MeanStd)> = of_arm
                .iter()
                .map(|(s, _, r)| {
                    let cell = r.cell(&c.method, &c.predictor).expect("same predictors every seed");
                    (*s, cell.score, cell.ufs)
                })
                .collect();
            let mut sc: Vec<f64> = per_seed.iter().map(|p| p.1.mean).collect();
            let mut uf: Vec<f64> = per_seed.iter().map(|p| p.2.mean).collect();
            cells.push(AblationCell {
                arm,
                predictor: c.predictor.clone(),
                score: median(&mut sc),
                ufs: median(&mut uf),
                per_seed,
            });
        }
    }
    let table = AblationTable {
        score_name: names.0,
        ufs_name: names.1,
        seeds,
        cells,
    };
    write_file(&out.join("ablation.csv"), &table.to_csv())?;
    write_file(&out.join("ablation.md"), &table.to_markdown())?;
    Ok(table)
}

/// Output directory: the `--out` flag, else `out_dir` from the config.
pub fn output_dir(cfg: &LoadedConfig, flag: Option<PathBuf>) -> Result<PathBuf, RunError> {
    flag.or_else(|| cfg.config.out_dir.as_deref().map(|p| cfg.resolve(p)))
        .ok_or_else(|| RunError::Invalid("no output directory: pass --out or set out_dir".into()))
}
