use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tapegrad::{
    compare_gradients, finite_difference, GradCheckConfig, GruCell, LstmCell, ParamSet, Tape,
    Tensor,
};

/// A small composite graph touching most primitives: embeddings feed a GRU
/// and an LSTM, attention-style softmax mixing, a classifier head.
fn composite_loss(ps: &ParamSet, ids: &[usize]) -> (f64, Option<tapegrad::Gradients>) {
    let emb = ps.id_of("emb").unwrap();
    let v = ps.id_of("v").unwrap();
    let head = ps.id_of("head").unwrap();
    let gru = gru_from(ps);
    let lstm = lstm_from(ps);

    let mut tape = Tape::new();
    let table = tape.param(ps, emb);
    let embedded = tape.embed(table, ids).unwrap();
    let rows: Vec<_> = (0..ids.len())
        .map(|t| tape.row(embedded, t).unwrap())
        .collect();

    let h0 = gru.zero_state(&mut tape);
    let gru_states = gru.run(&mut tape, ps, &rows, h0).unwrap();
    let s0 = lstm.zero_state(&mut tape);
    let lstm_states = lstm.run(&mut tape, ps, &rows, s0).unwrap();
    let u = lstm_states.last().unwrap().0;

    // softmax attention over GRU states conditioned on u
    let vn = tape.param(ps, v);
    let scores: Vec<_> = gru_states
        .iter()
        .map(|&z| {
            let cat = tape.concat(&[z, u]).unwrap();
            let m = tape.tanh(cat);
            tape.dot(vn, m).unwrap()
        })
        .collect();
    let logits = tape.concat(&scores).unwrap();
    let alpha = tape.softmax(logits).unwrap();
    let z_mat = tape.stack_rows(&gru_states).unwrap();
    let r = tape.matmul(alpha, z_mat).unwrap();

    let head_n = tape.param(ps, head);
    let class_logits = tape.matmul(head_n, r).unwrap();
    let ce = tape.cross_entropy(class_logits, 1).unwrap();
    let reg = tape.neg_entropy(alpha).unwrap();
    let reg_scaled = tape.scale(reg, 0.01);
    let loss = tape.add(ce, reg_scaled).unwrap();

    let value = tape.value(loss).item();
    let grads = tape.backward(loss).unwrap();
    (value, Some(grads))
}

fn gru_from(ps: &ParamSet) -> GruCell {
    GruCell {
        input_dim: 4,
        hidden_dim: 3,
        w_z: ps.id_of("g.w_z").unwrap(),
        u_z: ps.id_of("g.u_z").unwrap(),
        b_z: ps.id_of("g.b_z").unwrap(),
        w_r: ps.id_of("g.w_r").unwrap(),
        u_r: ps.id_of("g.u_r").unwrap(),
        b_r: ps.id_of("g.b_r").unwrap(),
        w_h: ps.id_of("g.w_h").unwrap(),
        u_h: ps.id_of("g.u_h").unwrap(),
        b_h: ps.id_of("g.b_h").unwrap(),
    }
}

fn lstm_from(ps: &ParamSet) -> LstmCell {
    LstmCell {
        input_dim: 4,
        hidden_dim: 3,
        w_i: ps.id_of("l.w_i").unwrap(),
        u_i: ps.id_of("l.u_i").unwrap(),
        b_i: ps.id_of("l.b_i").unwrap(),
        w_f: ps.id_of("l.w_f").unwrap(),
        u_f: ps.id_of("l.u_f").unwrap(),
        b_f: ps.id_of("l.b_f").unwrap(),
        w_o: ps.id_of("l.w_o").unwrap(),
        u_o: ps.id_of("l.u_o").unwrap(),
        b_o: ps.id_of("l.b_o").unwrap(),
        w_g: ps.id_of("l.w_g").unwrap(),
        u_g: ps.id_of("l.u_g").unwrap(),
        b_g: ps.id_of("l.b_g").unwrap(),
    }
}

fn build_params(seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    GruCell::new(&mut ps, "g", 4, 3, &mut rng).unwrap();
    LstmCell::new(&mut ps, "l", 4, 3, &mut rng).unwrap();
    ps.add("emb", tapegrad::init::normal_embedding(&mut rng, 6, 4, 0.1))
        .unwrap();
    ps.add("v", tapegrad::init::xavier_uniform(&mut rng, 1, 6))
        .unwrap();
    // v must be a vector for dot()
    let vid = ps.id_of("v").unwrap();
    let data = ps.value(vid).data().to_vec();
    ps.get_mut(vid).value = Tensor::vector(data);
    ps.add("head", tapegrad::init::xavier_uniform(&mut rng, 5, 3))
        .unwrap();
    ps
}

#[test]
fn composite_graph_gradients_match_finite_differences() {
    let mut ps = build_params(11);
    let ids = [0usize, 3, 5, 1];
    let (_, grads) = composite_loss(&ps, &ids);
    let analytic = grads.unwrap();
    let numeric = finite_difference(&mut ps, |p| composite_loss(p, &ids).0, 1e-5);
    compare_gradients(&ps, &analytic, &numeric, GradCheckConfig::default())
        .unwrap_or_else(|m| panic!("gradient mismatch: {m}"));
}

#[test]
fn forward_and_gradients_are_bit_deterministic() {
    let ps = build_params(23);
    let ids = [2usize, 4, 0];
    let (l1, g1) = composite_loss(&ps, &ids);
    let (l2, g2) = composite_loss(&ps, &ids);
    assert_eq!(l1.to_bits(), l2.to_bits());
    let (g1, g2) = (g1.unwrap(), g2.unwrap());
    for ((id1, a), (id2, b)) in g1.iter().zip(g2.iter()) {
        assert_eq!(id1, id2);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn forward_values_stay_finite() {
    let ps = build_params(5);
    let (loss, _) = composite_loss(&ps, &[1, 2, 3, 4, 5]);
    assert!(loss.is_finite());
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant(
        logits in proptest::collection::vec(-30.0f64..30.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(logits.clone()));
        let y = tape.softmax(x).unwrap();
        let p = tape.value(y).data().to_vec();
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|v| *v >= 0.0));

        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let xs = tape.constant(Tensor::vector(shifted));
        let ys = tape.softmax(xs).unwrap();
        for (a, b) in p.iter().zip(tape.value(ys).data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn elementwise_ops_preserve_finiteness(
        a in proptest::collection::vec(-1e3f64..1e3, 1..8),
    ) {
        let mut tape = Tape::new();
        let an = tape.constant(Tensor::vector(a.clone()));
        let t = tape.tanh(an);
        let s = tape.sigmoid(an);
        let m = tape.mul(t, s).unwrap();
        prop_assert!(tape.value(m).all_finite());
        prop_assert!(tape.value(t).data().iter().all(|v| v.abs() <= 1.0));
        prop_assert!(tape.value(s).data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
