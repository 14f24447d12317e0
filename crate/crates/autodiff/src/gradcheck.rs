//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lstm::{Lstm, StackLstm};
use crate::params::{Gradients, Init, ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Error measure used by the checks: `|a - n| / max(|a|, |n|, floor)`.
/// The floor keeps round-off on near-zero gradients from dominating.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares the analytic gradient of the scalar built by `f` against
/// central differences with step `h` for every parameter value.
pub fn check_params(store: &mut ParamStore, h: f64, f: impl Fn(&mut Tape) -> Var) -> CheckReport {
    let mut grads = Gradients::new();
    {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape);
        tape.backward(loss, &mut grads);
    }
    let eval = |store: &ParamStore| {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape);
        tape.scalar(loss)
    };
    let mut report = CheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    for id in store.ids().collect::<Vec<_>>() {
        let n = store.get(id).values.len();
        for k in 0..n {
            let orig = store.get(id).values[k];
            store.get_mut(id).values[k] = orig + h;
            let up = eval(store);
            store.get_mut(id).values[k] = orig - h;
            let down = eval(store);
            store.get_mut(id).values[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g[k]);
            let e = relative_error(analytic, numeric, 1e-6);
            report.checked += 1;
            if e > report.max_rel_error {
                report.max_rel_error = e;
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    report
}

/// Step used by [`op_suite`].
pub const SUITE_STEP: f64 = 1e-4;

struct Fixture {
    a: ParamId,
    b: ParamId,
    m: ParamId,
    bias: ParamId,
    e: ParamId,
    probe: Vec<f64>,
}

fn fixture(seed: u64) -> (ParamStore, Fixture) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let a = store.add("a", &[6], Init::Uniform(1.0), &mut rng);
    let b = store.add("b", &[6], Init::Uniform(1.0), &mut rng);
    let m = store.add("m", &[5, 6], Init::Glorot, &mut rng);
    let bias = store.add("bias", &[5], Init::Uniform(0.5), &mut rng);
    let e = store.add("e", &[4, 6], Init::Uniform(0.5), &mut rng);
    let probe = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (store, Fixture { a, b, m, bias, e, probe })
}

/// Projects `v` onto a fixed random direction so every output element
/// matters for the loss.
fn project(t: &mut Tape, probe: &[f64], v: Var) -> Var {
    let n = t.value(v).len();
    let r = t.input(probe[..n].to_vec());
    t.dot(v, r).unwrap()
}

type Build = fn(&mut Tape, &Fixture) -> Var;

const OPS: &[(&str, Build)] = &[
    ("add", |t, f| {
        let (a, b) = (t.param(f.a), t.param(f.b));
        let y = t.add(a, b).unwrap();
        project(t, &f.probe, y)
    }),
    ("sub", |t, f| {
        let (a, b) = (t.param(f.a), t.param(f.b));
        let y = t.sub(a, b).unwrap();
        project(t, &f.probe, y)
    }),
    ("mul", |t, f| {
        let (a, b) = (t.param(f.a), t.param(f.b));
        let y = t.mul(a, b).unwrap();
        project(t, &f.probe, y)
    }),
    ("sum", |t, f| {
        let (a, b) = (t.param(f.a), t.param(f.b));
        let y = t.sum(&[a, b, a]).unwrap();
        project(t, &f.probe, y)
    }),
    ("scale", |t, f| {
        let a = t.param(f.a);
        let y = t.scale(a, -2.5);
        project(t, &f.probe, y)
    }),
    ("tanh", |t, f| {
        let a = t.param(f.a);
        let y = t.tanh(a);
        project(t, &f.probe, y)
    }),
    ("sigmoid", |t, f| {
        let a = t.param(f.a);
        let y = t.sigmoid(a);
        project(t, &f.probe, y)
    }),
    ("relu", |t, f| {
        let a = t.param(f.a);
        let y = t.relu(a);
        project(t, &f.probe, y)
    }),
    ("concat", |t, f| {
        let (a, b) = (t.param(f.a), t.param(f.b));
        let y = t.concat(&[b, a]);
        project(t, &f.probe, y)
    }),
    ("slice", |t, f| {
        let a = t.param(f.a);
        let y = t.slice(a, 2, 3).unwrap();
        project(t, &f.probe, y)
    }),
    ("lookup", |t, f| {
        let x = t.lookup(f.e, 2).unwrap();
        let y = t.lookup(f.e, 0).unwrap();
        let z = t.mul(x, y).unwrap();
        project(t, &f.probe, z)
    }),
    ("sum_elems", |t, f| {
        let a = t.param(f.a);
        let b = t.mul(a, a).unwrap();
        t.sum_elems(b)
    }),
    ("matvec", |t, f| {
        let a = t.param(f.a);
        let y = t.matvec(f.m, a).unwrap();
        project(t, &f.probe, y)
    }),
    ("affine", |t, f| {
        let a = t.param(f.a);
        let y = t.affine(f.m, f.bias, a).unwrap();
        project(t, &f.probe, y)
    }),
    ("dot", |t, f| {
        let (a, b) = (t.param(f.a), t.param(f.b));
        t.dot(a, b).unwrap()
    }),
    ("softmax", |t, f| {
        let a = t.param(f.a);
        let y = t.softmax(a);
        project(t, &f.probe, y)
    }),
    ("weighted_sum", |t, f| {
        let w = t.param(f.bias);
        let w = t.slice(w, 0, 3).unwrap();
        let w = t.softmax(w);
        let (a, b) = (t.param(f.a), t.param(f.b));
        let c = t.tanh(a);
        let y = t.weighted_sum(w, &[a, b, c]).unwrap();
        project(t, &f.probe, y)
    }),
    ("masked_nll", |t, f| {
        let a = t.param(f.a);
        t.masked_nll(a, &[true, false, true, true, false, true], 3).unwrap()
    }),
];

fn jitter(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    // nonzero biases so the check covers them away from zero
    for id in store.ids().collect::<Vec<_>>() {
        store.get_mut(id).values.iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
    }
}

fn lstm_check() -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let cell = Lstm::new(&mut store, "cell", 5, 4, &mut rng);
    jitter(&mut store, &mut rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    check_params(&mut store, SUITE_STEP, |t| {
        let inputs: Vec<Var> = xs.iter().map(|x| t.input(x.clone())).collect();
        let start = cell.zero_state(t);
        let hs = cell.run(t, &inputs, start).unwrap();
        let s = t.sum(&hs).unwrap();
        t.sum_elems(s)
    })
}

fn stack_check() -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut store = ParamStore::new();
    let stack = StackLstm::new(&mut store, "stack", 3, 4, &mut rng);
    jitter(&mut store, &mut rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    check_params(&mut store, SUITE_STEP, |t| {
        let mut run = stack.start(t);
        let a = t.input(xs[0].clone());
        run.push(t, a).unwrap();
        let b = t.input(xs[1].clone());
        run.push(t, b).unwrap();
        let mid = run.summary();
        run.pop().unwrap();
        let c = t.input(xs[2].clone());
        run.push(t, c).unwrap();
        let top = run.summary();
        let y = t.mul(mid, top).unwrap();
        t.sum_elems(y)
    })
}

/// Finite-difference checks of every tape operation (three random
/// fixtures each, worst one reported), an LSTM run and a Stack-LSTM
/// push/pop/push sequence. All dimensions are at most 8.
pub fn op_suite() -> Vec<(&'static str, CheckReport)> {
    let mut out = Vec::new();
    for &(name, build) in OPS {
        let mut worst: Option<CheckReport> = None;
        for seed in 0..3 {
            let (mut store, fx) = fixture(seed);
            let r = check_params(&mut store, SUITE_STEP, |t| build(t, &fx));
            if worst.as_ref().is_none_or(|w| r.max_rel_error > w.max_rel_error) {
                worst = Some(r);
            }
        }
        out.push((name, worst.expect("three seeds")));
    }
    out.push(("lstm", lstm_check()));
    out.push(("stack_lstm", stack_check()));
    out
}
