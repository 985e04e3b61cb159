//! Closed forms checked against independent computations.

use cfvae_core::audit::ufs_c;
use cfvae_core::causal_graph::{AdjacencyMatrix, SemMode, StructureTransform};
use cfvae_core::cfvae::kl_standard_normal;
use cfvae_core::datasets::{generate_synthetic_with_concepts, Role, SyntheticSpec};
use cfvae_core::predictors::least_squares;
use cfvae_core::seed;
use cfvae_core::ConceptGraph;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_dag(rng: &mut impl Rng, n: usize) -> AdjacencyMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut c = AdjacencyMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < 0.5 {
                c.set(order[i], order[j], rng.gen_range(-1.5..1.5));
            }
        }
    }
    c
}

/// Σ_{k<n} (Cᵀ)^k z by repeated multiplication.
fn neumann(c: &AdjacencyMatrix, z: &[f64]) -> Vec<f64> {
    let n = c.n();
    let mut term = z.to_vec();
    let mut sum = z.to_vec();
    for _ in 1..n {
        let mut next = vec![0.0; n];
        for (child, v) in next.iter_mut().enumerate() {
            for (parent, t) in term.iter().enumerate() {
                *v += c.get(parent, child) * t;
            }
        }
        for (s, v) in sum.iter_mut().zip(&next) {
            *s += v;
        }
        term = next;
    }
    sum
}

#[test]
fn transform_matches_neumann_series_on_random_dags() {
    let mut rng = seed::rng(2024);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let c = random_dag(&mut rng, n);
        let t = StructureTransform::new(&c, SemMode::Exact).unwrap();
        let z = Array2::from_shape_fn((8, n), |_| rng.sample::<f64, _>(StandardNormal));
        let out = t.apply(z.view()).unwrap();
        for (row, got) in z.rows().into_iter().zip(out.rows()) {
            let want = neumann(&c, row.as_slice().unwrap());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }
}

#[test]
fn zero_weight_equals_deleted_edge() {
    let mut rng = seed::rng(5);
    for _ in 0..50 {
        let c = random_dag(&mut rng, 5);
        let Some(edge) = c.edges().into_iter().next() else {
            continue;
        };
        let mut zeroed = c.clone();
        zeroed.set(edge.parent, edge.child, 0.0);
        let kept: Vec<_> = c
            .edges()
            .into_iter()
            .filter(|e| (e.parent, e.child) != (edge.parent, edge.child))
            .collect();
        let labels: Vec<String> = (0..5).map(|i| format!("v{i}")).collect();
        let deleted = ConceptGraph::new(labels, kept).unwrap().adjacency();
        let z = Array2::from_shape_fn((4, 5), |_| rng.sample::<f64, _>(StandardNormal));
        let a = StructureTransform::new(&zeroed, SemMode::Exact).unwrap().apply(z.view()).unwrap();
        let b = StructureTransform::new(&deleted, SemMode::Exact).unwrap().apply(z.view()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn weight_jacobian_matches_finite_differences() {
    let mut rng = seed::rng(17);
    let h = 1e-6;
    for _ in 0..20 {
        let c = random_dag(&mut rng, 4);
        let z: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let t = StructureTransform::new(&c, SemMode::Exact).unwrap();
        for e in c.edges() {
            let analytic = t.weight_jacobian(&z, e.parent, e.child).unwrap();
            let eval = |w: f64| {
                let mut p = c.clone();
                p.set(e.parent, e.child, w);
                let zz = Array2::from_shape_vec((1, 4), z.clone()).unwrap();
                StructureTransform::new(&p, SemMode::Exact).unwrap().apply(zz.view()).unwrap()
            };
            let plus = eval(e.weight + h);
            let minus = eval(e.weight - h);
            for k in 0..4 {
                let fd = (plus[[0, k]] - minus[[0, k]]) / (2.0 * h);
                let scale = fd.abs().max(analytic[k].abs()).max(1e-3);
                assert!((fd - analytic[k]).abs() / scale < 1e-4, "{fd} vs {}", analytic[k]);
            }
        }
    }
}

#[test]
fn kl_closed_form_matches_monte_carlo() {
    let mut rng = seed::rng(77);
    for _ in 0..20 {
        let mu: f64 = rng.gen_range(-1.5..1.5);
        let var: f64 = rng.gen_range(0.4..2.5);
        let sd = var.sqrt();
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let e: f64 = rng.sample(StandardNormal);
            let z = mu + sd * e;
            // log q(z) − log p(z); the 2π terms cancel
            acc += -0.5 * var.ln() - 0.5 * e * e + 0.5 * z * z;
        }
        let mc = acc / samples as f64;
        let closed = kl_standard_normal(
            Array2::from_elem((1, 1), mu).view(),
            Array2::from_elem((1, 1), var.ln()).view(),
        )
        .unwrap();
        assert!((mc - closed).abs() < 1e-2, "mu {mu} var {var}: {mc} vs {closed}");
    }
}

#[test]
fn ufs_c_matches_pair_count() {
    let mut rng = seed::rng(3);
    for n in [1usize, 2, 7, 100, 1000] {
        let o: Vec<f64> = (0..n).map(|_| f64::from(rng.gen::<bool>() as u8)).collect();
        let m: Vec<f64> = (0..n).map(|_| f64::from(rng.gen::<bool>() as u8)).collect();
        let mut flipped = 0usize;
        for i in 0..n {
            if (o[i] == 1.0) != (m[i] == 1.0) {
                flipped += 1;
            }
        }
        let got = ufs_c(Array1::from(o).view(), Array1::from(m).view()).unwrap();
        assert_eq!(got, flipped as f64 / n as f64);
    }
}

/// Solve `(XᵀX) β = Xᵀy` by Gaussian elimination with partial pivoting.
fn normal_equations(x: &Array2<f64>, y: &Array1<f64>) -> Vec<f64> {
    let (n, p) = x.dim();
    let k = p + 1;
    let row = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let mut m = vec![vec![0.0; k + 1]; k];
    for a in 0..k {
        for b in 0..k {
            m[a][b] = (0..n).map(|i| row(i, a) * row(i, b)).sum();
        }
        m[a][k] = (0..n).map(|i| row(i, a) * y[i]).sum();
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=k {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..k).map(|i| m[i][k] / m[i][i]).collect()
}

#[test]
fn least_squares_matches_normal_equations() {
    let graph = ConceptGraph::parse("n 3\n0 1 0.8\n0 2 0.5\n1 2 0.7\n").unwrap();
    let ds = generate_synthetic_with_concepts(&SyntheticSpec::new(2000, graph, 1.0, 9))
        .unwrap()
        .dataset;
    let rows = ds.all_indices();
    let mut x = ds.block(Role::Covariate, &rows);
    let a = ds.block(Role::Sensitive, &rows);
    x.push_column(a.column(0)).unwrap();
    let y = ds.target(&rows);
    let fit = least_squares(x.view(), y.view()).unwrap();
    let oracle = normal_equations(&x, &y);
    assert!((fit.intercept - oracle[0]).abs() < 1e-6);
    for (c, o) in fit.coefficients.iter().zip(&oracle[1..]) {
        assert!((c - o).abs() < 1e-6, "{c} vs {o}");
    }
}

#[test]
fn generator_coefficients_recovered_within_two_standard_errors() {
    let graph = ConceptGraph::parse("n 3\n0 1 0.8\n0 2 0.5\n1 2 0.7\n").unwrap();
    let spec = SyntheticSpec::new(10_000, graph, 1.0, 31);
    let sample = generate_synthetic_with_concepts(&spec).unwrap();
    let ds = &sample.dataset;
    let rows = ds.all_indices();
    let mut design = sample.concepts.clone();
    design.push_column(ds.block(Role::Sensitive, &rows).column(0)).unwrap();
    let y = ds.target(&rows);
    let fit = least_squares(design.view(), y.view()).unwrap();

    // standard errors from σ̂² (XᵀX)⁻¹ with the intercept column
    let n = design.nrows();
    let k = design.ncols() + 1;
    let full = nalgebra::DMatrix::from_fn(n, k, |r, c| if c == 0 { 1.0 } else { design[[r, c - 1]] });
    let pred = design.dot(&fit.coefficients) + fit.intercept;
    let rss: f64 = pred.iter().zip(y.iter()).map(|(p, t)| (p - t).powi(2)).sum();
    let sigma2 = rss / (n - k) as f64;
    let inv = (full.transpose() * &full).try_inverse().unwrap();
    let mut truth = spec.target_weights.clone();
    truth.push(spec.sensitive_effect);
    for (j, (c, t)) in fit.coefficients.iter().zip(&truth).enumerate() {
        let se = (sigma2 * inv[(j + 1, j + 1)]).sqrt();
        assert!((c - t).abs() <= 2.0 * se, "coef {j}: {c} vs {t} (se {se})");
    }
}
