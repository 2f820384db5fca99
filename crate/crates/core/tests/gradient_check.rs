//! Analytic tape gradients against central finite differences.
//!
//! Layer-level checks use the standalone forward functions (`dense_forward`,
//! `lstm_cell_step`) as the finite-difference oracle, so the reference path
//! never touches the tape. Model-level checks difference the model's scalar loss.

use hetero_forecast::aleatoric::laplace_nll;
use hetero_forecast::models::{build, Backbone, ModelSpec, Uncertainty};
use hetero_forecast::nn::{
    dense_forward, lstm_cell_step, Activation, DenseLayer, Gradients, LstmLayer, ParamStore, Tape, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-5;
const INSTANCES: u64 = 50;

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, zero when both vanish.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn flatten(grads: &Gradients) -> Vec<f64> {
    grads.iter().flat_map(|g| g.iter().copied()).collect()
}

/// Central differences of `f` with respect to every scalar in `store`.
fn numeric_gradient(store: &ParamStore, f: impl Fn(&ParamStore) -> f64) -> Vec<f64> {
    let mut work = store.clone();
    let mut out = Vec::with_capacity(store.num_scalars());
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for k in 0..store.get(id).len() {
            let orig = work.data(id)[k];
            work.data_mut(id)[k] = orig + STEP;
            let up = f(&work);
            work.data_mut(id)[k] = orig - STEP;
            let down = f(&work);
            work.data_mut(id)[k] = orig;
            out.push((up - down) / (2.0 * STEP));
        }
    }
    out
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng, spread: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.data_mut(id) {
            *v = rng.gen_range(-spread..spread);
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-spread..spread)).collect()
}

#[test]
fn dense_two_layer_matches_finite_differences() {
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Elu, Activation::Relu];
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_in, n_hidden, n_out) = (rng.gen_range(2..6), rng.gen_range(2..7), rng.gen_range(1..4));
        let a1 = acts[seed as usize % 4];
        let a2 = acts[(seed as usize + 1) % 4];
        let mut store = ParamStore::new();
        let l1 = DenseLayer::init(&mut store, "l1", n_in, n_hidden, a1, &mut rng);
        let l2 = DenseLayer::init(&mut store, "l2", n_hidden, n_out, a2, &mut rng);
        randomize(&mut store, &mut rng, 1.0);
        let x = random_vec(&mut rng, n_in, 2.0);
        let weights = random_vec(&mut rng, n_out, 1.0);

        let mut tape = Tape::new(&store);
        let xv = tape.input(&x);
        let h = l1.forward(&mut tape, xv).unwrap();
        let y = l2.forward(&mut tape, h).unwrap();
        let c = tape.input(&weights);
        let prod = tape.mul(y, c).unwrap();
        let loss = tape.sum(&[prod]);
        let analytic = flatten(&tape.backward(loss).unwrap());

        let numeric = numeric_gradient(&store, |s| {
            let h = dense_forward(&l1.snapshot(s), &x).unwrap();
            let y = dense_forward(&l2.snapshot(s), &h).unwrap();
            y.iter().zip(&weights).map(|(a, b)| a * b).sum()
        });
        let err = relative_error(&analytic, &numeric);
        worst = worst.max(err);
        assert!(err < TOL, "instance {seed}: relative error {err}");
    }
    println!("dense worst relative error {worst:e}");
}

#[test]
fn lstm_bptt_matches_finite_differences() {
    const T: usize = 6;
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let hidden = rng.gen_range(1..5);
        let input = rng.gen_range(1..3);
        let mut store = ParamStore::new();
        let layer = LstmLayer::init(&mut store, "lstm", input, hidden, &mut rng);
        randomize(&mut store, &mut rng, 0.8);
        let xs: Vec<Vec<f64>> = (0..T).map(|_| random_vec(&mut rng, input, 1.5)).collect();
        let wh = random_vec(&mut rng, hidden, 1.0);

        let mut tape = Tape::new(&store);
        let vars: Vec<Var> = xs.iter().map(|x| tape.input(x)).collect();
        let hs = layer.sequence(&mut tape, &vars).unwrap();
        let c = tape.input(&wh);
        // weight every time step so the loss depends on the whole unrolled chain
        let terms: Vec<Var> = hs.iter().map(|&h| tape.mul(h, c).unwrap()).collect();
        let loss = tape.sum(&terms);
        let analytic = flatten(&tape.backward(loss).unwrap());

        let numeric = numeric_gradient(&store, |s| {
            let p = layer.snapshot(s);
            let mut h = vec![0.0; hidden];
            let mut cell = vec![0.0; hidden];
            let mut total = 0.0;
            for x in &xs {
                let (h2, c2) = lstm_cell_step(&p, &h, &cell, x).unwrap();
                total += h2.iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>();
                h = h2;
                cell = c2;
            }
            total
        });
        let err = relative_error(&analytic, &numeric);
        worst = worst.max(err);
        assert!(err < TOL, "instance {seed}: relative error {err}");
    }
    println!("lstm worst relative error {worst:e}");
}

/// Difference the model's own loss; checks the composed forward including
/// the positivity transform, flooring and the target de-standardization.
fn check_model(spec: &ModelSpec, input_dim: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = build(spec, input_dim, seed).unwrap();
    randomize(model.params_mut(), &mut rng, 0.6);
    let x = random_vec(&mut rng, input_dim, 2.0);
    let target = rng.gen_range(-5.0..5.0);

    let mut tape = Tape::new(model.params());
    let loss = model.loss(&mut tape, &x, target, None).unwrap();
    let analytic = flatten(&tape.backward(loss).unwrap());

    let mut work = model.clone();
    let mut numeric = Vec::new();
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for k in 0..model.params().get(id).len() {
            let orig = work.params().data(id)[k];
            let mut eval = |v: f64| {
                work.params_mut().data_mut(id)[k] = v;
                let mut t = Tape::new(work.params());
                let l = work.loss(&mut t, &x, target, None).unwrap();
                t.scalar(l).unwrap()
            };
            let up = eval(orig + STEP);
            let down = eval(orig - STEP);
            work.params_mut().data_mut(id)[k] = orig;
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    relative_error(&analytic, &numeric)
}

#[test]
fn homoscedastic_and_heteroscedastic_losses_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        for unc in [Uncertainty::Homoscedastic, Uncertainty::Heteroscedastic] {
            let spec = ModelSpec::with_sizes(Backbone::Dense, unc, vec![5, 3], vec![]);
            let err = check_model(&spec, 6, 200 + seed);
            worst = worst.max(err);
            assert!(err < TOL, "{unc:?} instance {seed}: relative error {err}");
        }
    }
    println!("aleatoric loss worst relative error {worst:e}");
}

#[test]
fn composed_lstm_models_match_finite_differences() {
    for (i, unc) in Uncertainty::ALL.into_iter().enumerate() {
        let mut spec = ModelSpec::with_sizes(Backbone::Lstm, unc, vec![3], vec![3, 2]);
        spec.dropout_p = 0.0;
        let err = check_model(&spec, 8, 300 + i as u64);
        assert!(err < TOL, "{unc:?}: relative error {err}");
    }
}

#[test]
fn loss_gradients_match_closed_form_partials() {
    // d/dμ and d/db of the per-sample Laplace loss, differenced directly
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let y = rng.gen_range(-10.0..10.0);
        let m = rng.gen_range(-10.0..10.0);
        let b = rng.gen_range(0.1..5.0);
        let f = |m: f64, b: f64| laplace_nll(&[y], &[m], &[b]).unwrap();
        let (dm, db) = hetero_forecast::aleatoric::laplace_nll_grad(&[y], &[m], &[b]).unwrap();
        let nm = (f(m + STEP, b) - f(m - STEP, b)) / (2.0 * STEP);
        let nb = (f(m, b + STEP) - f(m, b - STEP)) / (2.0 * STEP);
        assert!(relative_error(&[dm[0], db[0]], &[nm, nb]) < 1e-6);
    }
}

#[test]
fn heteroscedastic_gradients_reach_both_towers() {
    let spec = ModelSpec::desk(Backbone::Dense, Uncertainty::Heteroscedastic);
    let model = build(&spec, 26, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut grads = Gradients::zeros_like(model.params());
    for _ in 0..16 {
        let x = random_vec(&mut rng, 26, 1.5);
        let mut tape = Tape::new(model.params());
        let loss = model.loss(&mut tape, &x, rng.gen_range(-3.0..3.0), None).unwrap();
        tape.backward_into(loss, 1.0, &mut grads).unwrap();
    }
    assert!(grads.l2_norm_of(&model.phi_param_ids()) > 0.0);
    assert!(grads.l2_norm_of(&model.psi_param_ids()) > 0.0);
}
