//! GRU and LSTM cells built from tape primitives.

use rand::Rng;

use crate::init::{constant_vector, xavier_uniform, zeros_vector};
use crate::params::{ParamId, ParamSet};
use crate::tape::{NodeId, Tape};
use crate::{Result, Tensor};

/// Gated recurrent unit:
/// z = σ(Wz·x + Uz·h + bz), r = σ(Wr·x + Ur·h + br),
/// h̃ = tanh(Wh·x + Uh·(r⊙h) + bh), h' = (1−z)⊙h + z⊙h̃.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruCell {
    pub fn new(
        ps: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut mat = |ps: &mut ParamSet, name: &str, r: usize, c: usize| {
            ps.add(format!("{prefix}.{name}"), xavier_uniform(rng, r, c))
        };
        Ok(GruCell {
            input_dim,
            hidden_dim,
            w_z: mat(ps, "w_z", hidden_dim, input_dim)?,
            u_z: mat(ps, "u_z", hidden_dim, hidden_dim)?,
            w_r: mat(ps, "w_r", hidden_dim, input_dim)?,
            u_r: mat(ps, "u_r", hidden_dim, hidden_dim)?,
            w_h: mat(ps, "w_h", hidden_dim, input_dim)?,
            u_h: mat(ps, "u_h", hidden_dim, hidden_dim)?,
            b_z: ps.add(format!("{prefix}.b_z"), zeros_vector(hidden_dim))?,
            b_r: ps.add(format!("{prefix}.b_r"), zeros_vector(hidden_dim))?,
            b_h: ps.add(format!("{prefix}.b_h"), zeros_vector(hidden_dim))?,
        })
    }

    /// All parameter ids of this cell, in a fixed order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![
            self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_h, self.u_h,
            self.b_h,
        ]
    }

    pub fn zero_state(&self, tape: &mut Tape) -> NodeId {
        tape.constant(Tensor::vector(vec![0.0; self.hidden_dim]))
    }

    pub fn step(&self, tape: &mut Tape, ps: &ParamSet, x: NodeId, h: NodeId) -> Result<NodeId> {
        let gate = |tape: &mut Tape, w: ParamId, u: ParamId, b: ParamId, hin: NodeId| -> Result<NodeId> {
            let wn = tape.param(ps, w);
            let un = tape.param(ps, u);
            let bn = tape.param(ps, b);
            let wx = tape.matmul(wn, x)?;
            let uh = tape.matmul(un, hin)?;
            let s = tape.add(wx, uh)?;
            tape.add(s, bn)
        };
        let z_pre = gate(tape, self.w_z, self.u_z, self.b_z, h)?;
        let z = tape.sigmoid(z_pre);
        let r_pre = gate(tape, self.w_r, self.u_r, self.b_r, h)?;
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h)?;
        let h_pre = gate(tape, self.w_h, self.u_h, self.b_h, rh)?;
        let h_tilde = tape.tanh(h_pre);
        // (1−z)⊙h + z⊙h̃ rewritten as h + z⊙(h̃−h)
        let diff = tape.sub(h_tilde, h)?;
        let zd = tape.mul(z, diff)?;
        tape.add(h, zd)
    }

    /// Unroll over a sequence of input vectors, returning all hidden states.
    pub fn run(
        &self,
        tape: &mut Tape,
        ps: &ParamSet,
        inputs: &[NodeId],
        h0: NodeId,
    ) -> Result<Vec<NodeId>> {
        let mut h = h0;
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            h = self.step(tape, ps, x, h)?;
            states.push(h);
        }
        Ok(states)
    }
}

/// LSTM with the standard forget/input/output gating; the forget-gate bias
/// starts at 1.0 so the carry path is open early in training.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_i: ParamId,
    pub u_i: ParamId,
    pub b_i: ParamId,
    pub w_f: ParamId,
    pub u_f: ParamId,
    pub b_f: ParamId,
    pub w_o: ParamId,
    pub u_o: ParamId,
    pub b_o: ParamId,
    pub w_g: ParamId,
    pub u_g: ParamId,
    pub b_g: ParamId,
}

impl LstmCell {
    pub fn new(
        ps: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut mat = |ps: &mut ParamSet, name: &str, r: usize, c: usize| {
            ps.add(format!("{prefix}.{name}"), xavier_uniform(rng, r, c))
        };
        Ok(LstmCell {
            input_dim,
            hidden_dim,
            w_i: mat(ps, "w_i", hidden_dim, input_dim)?,
            u_i: mat(ps, "u_i", hidden_dim, hidden_dim)?,
            w_f: mat(ps, "w_f", hidden_dim, input_dim)?,
            u_f: mat(ps, "u_f", hidden_dim, hidden_dim)?,
            w_o: mat(ps, "w_o", hidden_dim, input_dim)?,
            u_o: mat(ps, "u_o", hidden_dim, hidden_dim)?,
            w_g: mat(ps, "w_g", hidden_dim, input_dim)?,
            u_g: mat(ps, "u_g", hidden_dim, hidden_dim)?,
            b_i: ps.add(format!("{prefix}.b_i"), zeros_vector(hidden_dim))?,
            b_f: ps.add(format!("{prefix}.b_f"), constant_vector(hidden_dim, 1.0))?,
            b_o: ps.add(format!("{prefix}.b_o"), zeros_vector(hidden_dim))?,
            b_g: ps.add(format!("{prefix}.b_g"), zeros_vector(hidden_dim))?,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![
            self.w_i, self.u_i, self.b_i, self.w_f, self.u_f, self.b_f, self.w_o, self.u_o,
            self.b_o, self.w_g, self.u_g, self.b_g,
        ]
    }

    pub fn zero_state(&self, tape: &mut Tape) -> (NodeId, NodeId) {
        let h = tape.constant(Tensor::vector(vec![0.0; self.hidden_dim]));
        let c = tape.constant(Tensor::vector(vec![0.0; self.hidden_dim]));
        (h, c)
    }

    pub fn step(
        &self,
        tape: &mut Tape,
        ps: &ParamSet,
        x: NodeId,
        state: (NodeId, NodeId),
    ) -> Result<(NodeId, NodeId)> {
        let (h, c) = state;
        let gate = |tape: &mut Tape, w: ParamId, u: ParamId, b: ParamId| -> Result<NodeId> {
            let wn = tape.param(ps, w);
            let un = tape.param(ps, u);
            let bn = tape.param(ps, b);
            let wx = tape.matmul(wn, x)?;
            let uh = tape.matmul(un, h)?;
            let s = tape.add(wx, uh)?;
            tape.add(s, bn)
        };
        let i_pre = gate(tape, self.w_i, self.u_i, self.b_i)?;
        let i = tape.sigmoid(i_pre);
        let f_pre = gate(tape, self.w_f, self.u_f, self.b_f)?;
        let f = tape.sigmoid(f_pre);
        let o_pre = gate(tape, self.w_o, self.u_o, self.b_o)?;
        let o = tape.sigmoid(o_pre);
        let g_pre = gate(tape, self.w_g, self.u_g, self.b_g)?;
        let g = tape.tanh(g_pre);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let tc = tape.tanh(c_new);
        let h_new = tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    pub fn run(
        &self,
        tape: &mut Tape,
        ps: &ParamSet,
        inputs: &[NodeId],
        state: (NodeId, NodeId),
    ) -> Result<Vec<(NodeId, NodeId)>> {
        let mut s = state;
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            s = self.step(tape, ps, x, s)?;
            states.push(s);
        }
        Ok(states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::stable_sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set_scalar(ps: &mut ParamSet, name: &str, v: f64) {
        let id = ps.id_of(name).unwrap();
        ps.get_mut(id).value.data_mut()[0] = v;
    }

    fn zero_all(ps: &mut ParamSet) {
        for i in 0..ps.len() {
            for v in ps.get_mut(ParamId(i)).value.data_mut() {
                *v = 0.0;
            }
        }
    }

    #[test]
    fn gru_zero_weights_keep_zero_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let cell = GruCell::new(&mut ps, "gru", 3, 2, &mut rng).unwrap();
        zero_all(&mut ps);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![5.0, -1.0, 2.0]));
        let h0 = cell.zero_state(&mut tape);
        let h1 = cell.step(&mut tape, &ps, x, h0).unwrap();
        assert_eq!(tape.value(h1).data(), &[0.0, 0.0]);
    }

    #[test]
    fn gru_output_within_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ps = ParamSet::new();
        let cell = GruCell::new(&mut ps, "gru", 4, 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.3, -2.0, 1.5, 0.0]));
        let mut h = cell.zero_state(&mut tape);
        for _ in 0..5 {
            h = cell.step(&mut tape, &ps, x, h).unwrap();
        }
        assert!(tape.value(h).data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn gru_scalar_hand_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let cell = GruCell::new(&mut ps, "g", 1, 1, &mut rng).unwrap();
        set_scalar(&mut ps, "g.w_z", 0.5);
        set_scalar(&mut ps, "g.u_z", -0.3);
        set_scalar(&mut ps, "g.b_z", 0.1);
        set_scalar(&mut ps, "g.w_r", 0.2);
        set_scalar(&mut ps, "g.u_r", 0.4);
        set_scalar(&mut ps, "g.b_r", -0.1);
        set_scalar(&mut ps, "g.w_h", 1.0);
        set_scalar(&mut ps, "g.u_h", 0.7);
        set_scalar(&mut ps, "g.b_h", 0.0);
        let (x, h) = (0.8, 0.5);

        // independent scalar computation of the same equations
        let z = stable_sigmoid(0.5 * x - 0.3 * h + 0.1);
        let r = stable_sigmoid(0.2 * x + 0.4 * h - 0.1);
        let h_tilde = (1.0 * x + 0.7 * (r * h)).tanh();
        let expected = (1.0 - z) * h + z * h_tilde;

        let mut tape = Tape::new();
        let xn = tape.constant(Tensor::vector(vec![x]));
        let hn = tape.constant(Tensor::vector(vec![h]));
        let out = cell.step(&mut tape, &ps, xn, hn).unwrap();
        assert!((tape.value(out).data()[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn lstm_zero_weights_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let cell = LstmCell::new(&mut ps, "lstm", 3, 2, &mut rng).unwrap();
        zero_all(&mut ps);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![9.0, -3.0, 1.0]));
        let s0 = cell.zero_state(&mut tape);
        let (h1, _) = cell.step(&mut tape, &ps, x, s0).unwrap();
        assert_eq!(tape.value(h1).data(), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_forced_gates_preserve_cell() {
        // forget gate ≈ 1, input gate ≈ 0 → c' = c
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let cell = LstmCell::new(&mut ps, "l", 1, 1, &mut rng).unwrap();
        zero_all(&mut ps);
        set_scalar(&mut ps, "l.b_f", 1e4);
        set_scalar(&mut ps, "l.b_i", -1e4);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.7]));
        let h = tape.constant(Tensor::vector(vec![0.2]));
        let c = tape.constant(Tensor::vector(vec![-0.6]));
        let (_, c2) = cell.step(&mut tape, &ps, x, (h, c)).unwrap();
        assert!((tape.value(c2).data()[0] - (-0.6)).abs() < 1e-12);
    }

    #[test]
    fn lstm_scalar_hand_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let cell = LstmCell::new(&mut ps, "l", 1, 1, &mut rng).unwrap();
        let vals = [
            ("l.w_i", 0.4),
            ("l.u_i", -0.2),
            ("l.b_i", 0.05),
            ("l.w_f", 0.3),
            ("l.u_f", 0.1),
            ("l.b_f", 1.0),
            ("l.w_o", -0.5),
            ("l.u_o", 0.6),
            ("l.b_o", 0.0),
            ("l.w_g", 0.9),
            ("l.u_g", -0.7),
            ("l.b_g", -0.1),
        ];
        for (n, v) in vals {
            set_scalar(&mut ps, n, v);
        }
        let (x, h, c) = (0.5, -0.3, 0.8);
        let i = stable_sigmoid(0.4 * x - 0.2 * h + 0.05);
        let f = stable_sigmoid(0.3 * x + 0.1 * h + 1.0);
        let o = stable_sigmoid(-0.5 * x + 0.6 * h);
        let g = (0.9 * x - 0.7 * h - 0.1).tanh();
        let c_exp = f * c + i * g;
        let h_exp = o * c_exp.tanh();

        let mut tape = Tape::new();
        let xn = tape.constant(Tensor::vector(vec![x]));
        let hn = tape.constant(Tensor::vector(vec![h]));
        let cn = tape.constant(Tensor::vector(vec![c]));
        let (h2, c2) = cell.step(&mut tape, &ps, xn, (hn, cn)).unwrap();
        assert!((tape.value(c2).data()[0] - c_exp).abs() < 1e-14);
        assert!((tape.value(h2).data()[0] - h_exp).abs() < 1e-14);
    }

    #[test]
    fn unroll_length_one_equals_single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new();
        let cell = GruCell::new(&mut ps, "g", 2, 3, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.4, -1.2]));
        let h0 = cell.zero_state(&mut tape);
        let single = cell.step(&mut tape, &ps, x, h0).unwrap();
        let run = cell.run(&mut tape, &ps, &[x], h0).unwrap();
        assert_eq!(tape.value(single).data(), tape.value(run[0]).data());
    }
}
