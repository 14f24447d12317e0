//! LSTM cell and the stack-pointer variant used for parser state.

use rand_chacha::ChaCha8Rng;

use crate::params::{Init, ParamId, ParamStore};
use crate::tape::{AdError, Tape, Var};

/// LSTM cell with input, forget and output gates and a tanh candidate.
/// Weights are one `[4h, in + h]` matrix over `[x; h]`.
#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = store.add(&format!("{prefix}.w"), &[4 * hidden, input + hidden], Init::Glorot, rng);
        let b = store.add(&format!("{prefix}.b"), &[4 * hidden], Init::Zeros, rng);
        Lstm { w, b, input, hidden }
    }

    /// All-zero state held as constants.
    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        let h = tape.input(vec![0.0; self.hidden]);
        let c = tape.input(vec![0.0; self.hidden]);
        LstmState { h, c }
    }

    pub fn step(&self, tape: &mut Tape, x: Var, prev: LstmState) -> Result<LstmState, AdError> {
        let n = self.hidden;
        let xh = tape.concat(&[x, prev.h]);
        let gates = tape.affine(self.w, self.b, xh)?;
        let i = tape.slice(gates, 0, n)?;
        let i = tape.sigmoid(i);
        let f = tape.slice(gates, n, n)?;
        let f = tape.sigmoid(f);
        let o = tape.slice(gates, 2 * n, n)?;
        let o = tape.sigmoid(o);
        let g = tape.slice(gates, 3 * n, n)?;
        let g = tape.tanh(g);
        let keep = tape.mul(f, prev.c)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    /// Runs over `xs` from `start`, returning the output at every position.
    pub fn run(&self, tape: &mut Tape, xs: &[Var], start: LstmState) -> Result<Vec<Var>, AdError> {
        let mut s = start;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            s = self.step(tape, x, s)?;
            out.push(s.h);
        }
        Ok(out)
    }
}

/// LSTM whose states form a stack: `push` runs one step from the current
/// top, `pop` returns to the state below. The empty stack's state is
/// learned.
#[derive(Debug, Clone, Copy)]
pub struct StackLstm {
    pub lstm: Lstm,
    pub h0: ParamId,
    pub c0: ParamId,
}

impl StackLstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let lstm = Lstm::new(store, prefix, input, hidden, rng);
        let h0 = store.add(&format!("{prefix}.h0"), &[hidden], Init::Zeros, rng);
        let c0 = store.add(&format!("{prefix}.c0"), &[hidden], Init::Zeros, rng);
        StackLstm { lstm, h0, c0 }
    }

    pub fn start(&self, tape: &mut Tape) -> StackLstmRun {
        let h = tape.param(self.h0);
        let c = tape.param(self.c0);
        StackLstmRun { cell: self.lstm, states: vec![LstmState { h, c }] }
    }
}

/// One use of a [`StackLstm`] on a tape.
#[derive(Debug, Clone)]
pub struct StackLstmRun {
    cell: Lstm,
    states: Vec<LstmState>,
}

impl StackLstmRun {
    pub fn push(&mut self, tape: &mut Tape, x: Var) -> Result<(), AdError> {
        let top = *self.states.last().expect("initial state is never popped");
        let next = self.cell.step(tape, x, top)?;
        self.states.push(next);
        Ok(())
    }

    pub fn pop(&mut self) -> Result<(), AdError> {
        if self.states.len() == 1 {
            return Err(AdError::EmptyStack);
        }
        self.states.pop();
        Ok(())
    }

    /// Output of the top state (the learned initial output when empty).
    pub fn summary(&self) -> Var {
        self.states.last().expect("initial state is never popped").h
    }

    /// Number of pushed entries.
    pub fn len(&self) -> usize {
        self.states.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.states.len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pop_restores_summary_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let s = StackLstm::new(&mut store, "s", 3, 4, &mut rng);
        let mut tape = Tape::new(&store);
        let mut run = s.start(&mut tape);
        let empty = tape.value(run.summary()).to_vec();
        assert_eq!(empty, store.get(s.h0).values);
        let a = tape.input(vec![0.1, -0.4, 2.0]);
        run.push(&mut tape, a).unwrap();
        let after_a = tape.value(run.summary()).to_vec();
        let b = tape.input(vec![1.0, 0.0, -1.0]);
        run.push(&mut tape, b).unwrap();
        assert_ne!(tape.value(run.summary()), &after_a[..]);
        run.pop().unwrap();
        assert_eq!(tape.value(run.summary()), &after_a[..]);
        run.pop().unwrap();
        assert_eq!(tape.value(run.summary()), &empty[..]);
        assert_eq!(run.pop(), Err(AdError::EmptyStack));
    }
}
