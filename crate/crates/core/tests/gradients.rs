use cfvae_core::causal_graph::{ConceptGraph, SemMode};
use cfvae_core::cfvae::{CfvaeConfig, CfvaeModel, LossParts, Noise, TermWeights};
use cfvae_core::datasets::{ColumnSpec, Role, Schema};
use cfvae_core::seed;
use ndarray::{array, Array2};

const H: f64 = 1e-5;
const RTOL: f64 = 1e-4;

fn schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::binary("s", Role::Sensitive, "f", "m"),
        ColumnSpec::continuous("age", Role::Sensitive),
        ColumnSpec::categorical(
            "job",
            Role::Covariate,
            vec!["a".into(), "b".into(), "c".into()],
        ),
        ColumnSpec::continuous("x1", Role::Covariate),
        ColumnSpec::continuous("x2", Role::Covariate),
        ColumnSpec::continuous("y", Role::Target),
    ])
    .unwrap()
}

fn batch() -> (Array2<f64>, Array2<f64>) {
    let a = array![[1.0, 0.3], [0.0, -1.2], [1.0, 0.8], [0.0, 0.1]];
    let x = array![
        [1.0, 0.0, 0.0, 0.5, -0.2],
        [0.0, 1.0, 0.0, -1.1, 0.9],
        [0.0, 0.0, 1.0, 0.2, 1.4],
        [0.0, 1.0, 0.0, -0.4, -0.7],
    ];
    (a, x)
}

fn model(mode: SemMode, constrained: bool) -> CfvaeModel {
    let graph = ConceptGraph::parse("n 2\n0 1 0.7\n").unwrap();
    let mut cfg = CfvaeConfig::new(graph, 2.5);
    cfg.opr_weight = 1.5;
    cfg.sem_mode = mode;
    cfg.use_causal_constraints = constrained;
    cfg.encoder_hidden = vec![6];
    cfg.decoder_hidden = vec![5];
    cfg.seed = 11;
    CfvaeModel::new(cfg, &schema()).unwrap()
}

fn noise() -> Noise {
    Noise::sample(4, 2, 2, &mut seed::rng(99))
}

fn term(name: &str, cfg: &CfvaeConfig) -> TermWeights {
    let mut w = TermWeights::zero();
    match name {
        "recon_a" => w.recon_a = 1.0,
        "recon_x" => w.recon_x = 1.0,
        "kl_a" => w.kl_a = 1.0,
        "kl_x" => w.kl_x = 1.0,
        "tcr" => w.total_correlation = 1.0,
        "opr" => w.cosine = 1.0,
        "total" => w = TermWeights::objective(cfg),
        _ => unreachable!(),
    }
    w
}

fn eval(m: &CfvaeModel, w: &TermWeights) -> f64 {
    let (a, x) = batch();
    let p: LossParts = m.loss_parts(a.view(), x.view(), &noise(), 100).unwrap();
    w.apply(&p)
}

fn check(m: &CfvaeModel, name: &str) -> usize {
    let w = term(name, &m.config);
    let (a, x) = batch();
    let (_, grads) = m.gradients(a.view(), x.view(), &noise(), 100, &w).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = m.clone();
    let mut checked = 0;
    for (t, g) in analytic.iter().enumerate() {
        for k in 0..g.len() {
            let orig = probe.tensors()[t][k];
            probe.tensors_mut()[t][k] = orig + H;
            let up = eval(&probe, &w);
            probe.tensors_mut()[t][k] = orig - H;
            let down = eval(&probe, &w);
            probe.tensors_mut()[t][k] = orig;
            let fd = (up - down) / (2.0 * H);
            let scale = fd.abs().max(g[k].abs()).max(1e-3);
            assert!(
                (fd - g[k]).abs() <= RTOL * scale,
                "{name}: tensor {t} index {k}: finite difference {fd} vs analytic {}",
                g[k]
            );
            checked += 1;
        }
    }
    checked
}

#[test]
fn every_term_matches_finite_differences() {
    let m = model(SemMode::Exact, true);
    for name in ["recon_a", "recon_x", "kl_a", "kl_x", "tcr", "opr", "total"] {
        assert_eq!(check(&m, name), m.tensors().iter().map(|t| t.len()).sum::<usize>());
    }
}

#[test]
fn one_step_and_unconstrained_totals_match_finite_differences() {
    check(&model(SemMode::OneStep, true), "total");
    check(&model(SemMode::Exact, false), "total");
}

#[test]
fn tcr_gradient_vanishes_when_gamma_weight_is_zero() {
    let m = model(SemMode::Exact, true);
    let (a, x) = batch();
    let (_, g) = m.gradients(a.view(), x.view(), &noise(), 100, &TermWeights::zero()).unwrap();
    assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
}
