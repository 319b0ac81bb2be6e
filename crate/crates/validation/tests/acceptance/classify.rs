use std::path::Path;

use ndarray::array;
use radaract_core::dataset::{generate_corpus, split, CorpusSpec, Split, WindowCorpus};
use radaract_core::gru::{evaluate, gru_cell_forward, train, GruLayerParams, GruModel, ModelSpec, Normalization, TrainConfig};
use radaract_core::radar::Activity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Checks, Context, Outcome};

fn small_spec(classes: usize) -> ModelSpec {
    ModelSpec {
        input_dim: 16,
        time_steps: 6,
        layer_dims: vec![8, 8],
        fc_dims: vec![10, classes],
        class_names: (0..classes).map(|c| format!("c{c}")).collect(),
    }
}

fn window(rng: &mut ChaCha8Rng, len: usize) -> Vec<f32> {
    (0..len).map(|_| rng.random_range(0.0..1.0)).collect()
}

fn loss(m: &GruModel<f64>, w: &[f32], label: usize) -> Result<f64, String> {
    let (p, _) = m.forward_raw(w).map_err(|e| e.to_string())?;
    Ok(-p[label].max(1e-300).ln())
}

pub fn gru_correctness(_: &mut Context) -> Outcome {
    let mut checks = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mut m = GruModel::<f64>::new(small_spec(6), Normalization::None, 4).map_err(|e| e.to_string())?;
    for i in 0..m.params.num_params() {
        let v = m.params.get_flat(i) + rng.random_range(-0.2..0.2);
        m.params.set_flat(i, v);
    }
    let w = window(&mut rng, 6 * 16);
    let label = 2;
    let (_, cache) = m.forward_raw(&w).map_err(|e| e.to_string())?;
    let (grads, _) = m.backward(&cache, &[label]).map_err(|e| e.to_string())?;
    let n = m.params.num_params();
    let sampled = rand::seq::index::sample(&mut rng, n, 150.min(n));
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = m.clone();
    for i in sampled.iter() {
        let orig = m.params.get_flat(i);
        probe.params.set_flat(i, orig + h);
        let up = loss(&probe, &w, label)?;
        probe.params.set_flat(i, orig - h);
        let down = loss(&probe, &w, label)?;
        probe.params.set_flat(i, orig);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get_flat(i);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
    }
    checks.check(worst < 1e-4, format!("{} sampled gradients, worst rel err {worst:.2e}", sampled.len()));

    let mut bounded = true;
    let mut worst_sum = 0.0f64;
    for trial in 0..40u64 {
        let mut m = GruModel::<f64>::new(small_spec(6), Normalization::None, trial).map_err(|e| e.to_string())?;
        m.params.scale(rng.random_range(0.1..25.0));
        let w: Vec<f32> = window(&mut rng, 6 * 16).into_iter().map(|x| x * 50.0 - 25.0).collect();
        let (p, cache) = m.forward_raw(&w).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
        for l in 0..2 {
            bounded &= cache.hidden_states(l).iter().all(|h| h.abs() <= 1.0);
        }
    }
    let big = GruModel::<f32>::new(ModelSpec::reduced(2, 32, &Activity::ALL), Normalization::Peak, 9).map_err(|e| e.to_string())?;
    for _ in 0..5 {
        let w = window(&mut rng, 50 * 256);
        let (p, cache) = big.forward_raw(&w).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((p.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
        for l in 0..2 {
            bounded &= cache.hidden_states(l).iter().all(|h| h.abs() <= 1.0);
        }
    }
    checks.check(bounded, "hidden states within [-1, 1]");
    checks.check(worst_sum <= 1e-6, format!("softmax sum off by {worst_sum:.1e}"));

    let mut p = GruLayerParams::<f64>::zeros(1, 1);
    for w in [&mut p.w_rh, &mut p.w_rx, &mut p.w_zh, &mut p.w_zx, &mut p.w_hh, &mut p.w_hx] {
        w.fill(1.0);
    }
    let (h, _) = gru_cell_forward(array![1.0].view(), array![0.0].view(), &p).map_err(|e| e.to_string())?;
    let expected = 0.204839;
    checks.check(
        (h[0] - expected).abs() <= 1e-6,
        format!("scalar cell {:.6} vs {expected} (diff {:.1e})", h[0], (h[0] - expected).abs()),
    );
    checks.finish()
}

fn train_config() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 64,
        learning_rate: 0.005,
        seed: 1,
        ..TrainConfig::default()
    }
}

struct SplitResult {
    accuracy: f64,
    walking_fp: Option<f64>,
    model: GruModel<f32>,
}

fn run_split(root: &Path, entries: &[radaract_core::dataset::ManifestEntry], classes: &[Activity], how: Split) -> Result<SplitResult, String> {
    let names: Vec<String> = classes.iter().map(|c| c.name().to_string()).collect();
    let sets = split(entries, how);
    let load = |e| WindowCorpus::load(root, e, &names).map_err(|e| e.to_string());
    let (tr, va, te) = (load(&sets.train)?, load(&sets.validation)?, load(&sets.test)?);
    let mut model = GruModel::<f32>::new(ModelSpec::reduced(2, 32, classes), Normalization::Peak, 1).map_err(|e| e.to_string())?;
    train(&mut model, &tr, Some(&va), &train_config()).map_err(|e| e.to_string())?;
    let ev = evaluate(&model, &te, 256).map_err(|e| e.to_string())?;
    let walking_fp = classes
        .iter()
        .position(|&a| a == Activity::Walking)
        .map(|i| ev.false_positive_rate(i));
    Ok(SplitResult {
        accuracy: ev.accuracy,
        walking_fp,
        model,
    })
}

pub fn six_class(ctx: &mut Context) -> Outcome {
    let root = ctx.scratch().join("six");
    let classes = Activity::ALL.to_vec();
    let mut spec = CorpusSpec::new(&classes, 2, 5, 8.0);
    spec.seed = 6;
    let entries = generate_corpus(&spec, &root).map_err(|e| e.to_string())?;
    let mut checks = Checks::default();
    let si = run_split(&root, &entries, &classes, Split::SessionIndependent { test_session: 4 })?;
    let us = run_split(&root, &entries, &classes, Split::UnseenSubject { test_subject: 1 })?;
    checks.check(si.accuracy >= 0.90, format!("{} windows; session-independent accuracy {:.4}", entries.len(), si.accuracy));
    checks.check(us.accuracy >= 0.80, format!("unseen-subject accuracy {:.4}", us.accuracy));
    for (name, r) in [("session-independent", &si), ("unseen-subject", &us)] {
        let fp = r.walking_fp.unwrap_or(1.0);
        checks.check(fp <= 0.05, format!("{name} walking false positives {:.2}%", 100.0 * fp));
    }
    crate::system::remember_model(&si.model);
    ctx.model = Some(si.model);
    checks.finish()
}

pub fn four_class(ctx: &mut Context) -> Outcome {
    let root = ctx.scratch().join("four");
    let classes = [Activity::Empty, Activity::Sedentary, Activity::InPlaceMovement, Activity::Walking];
    let mut spec = CorpusSpec::new(&classes, 2, 5, 8.0);
    spec.seed = 4;
    let entries = generate_corpus(&spec, &root).map_err(|e| e.to_string())?;
    let si = run_split(&root, &entries, &classes, Split::SessionIndependent { test_session: 4 })?;
    let mut checks = Checks::default();
    checks.check(si.accuracy >= 0.95, format!("{} windows; session-independent accuracy {:.4}", entries.len(), si.accuracy));
    checks.finish()
}
