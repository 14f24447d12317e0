//! Named parameter tensors, their gradients, and the text checkpoint form.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Dense row-major tensor of rank 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), values: vec![0.0; shape.iter().product()] }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Uniform(f64),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("parameter `{0}` is missing from the checkpoint")]
    Missing(String),
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics if the name is taken.
    pub fn add(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut ChaCha8Rng) -> ParamId {
        assert!(!self.index.contains_key(name), "parameter `{name}` registered twice");
        let mut t = Tensor::zeros(shape);
        match init {
            Init::Zeros => {}
            Init::Glorot => {
                let fan_out = shape[0];
                let fan_in = shape.get(1).copied().unwrap_or(1);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                t.values.iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
            }
            Init::Uniform(a) => t.values.iter_mut().for_each(|v| *v = rng.gen_range(-a..a)),
        }
        let id = ParamId(self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn value_count(&self) -> usize {
        self.tensors.iter().map(|t| t.values.len()).sum()
    }

    /// `param NAME D1 [D2]` followed by one line of values each. Values use
    /// the shortest decimal form that reads back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, t) in self.names.iter().zip(&self.tensors) {
            out.push_str("param ");
            out.push_str(name);
            for d in &t.shape {
                write!(out, " {d}").unwrap();
            }
            out.push('\n');
            for (i, v) in t.values.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Overwrites every registered parameter from checkpoint text. The
    /// first line of `text` is numbered `first_line`.
    pub fn load_text(&mut self, text: &str, first_line: usize) -> Result<(), CheckpointError> {
        let lines: Vec<&str> = text.lines().collect();
        let mut seen = vec![false; self.tensors.len()];
        let mut i = 0;
        let fmt = |i: usize, m: &str| CheckpointError::Format { line: first_line + i, message: m.to_string() };
        while i < lines.len() {
            if lines[i].trim().is_empty() {
                i += 1;
                continue;
            }
            let mut head = lines[i].split_whitespace();
            if head.next() != Some("param") {
                return Err(fmt(i, "expected `param NAME DIMS`"));
            }
            let name = head.next().ok_or_else(|| fmt(i, "missing parameter name"))?;
            let shape: Vec<usize> =
                head.map(|d| d.parse().map_err(|_| fmt(i, "bad dimension"))).collect::<Result<_, _>>()?;
            let id = self.id(name).ok_or_else(|| fmt(i, &format!("unknown parameter `{name}`")))?;
            let t = &mut self.tensors[id.0];
            if t.shape != shape {
                return Err(CheckpointError::Shape { name: name.to_string(), expected: t.shape.clone(), found: shape });
            }
            let row = lines.get(i + 1).ok_or_else(|| fmt(i + 1, "missing values"))?;
            let values: Vec<f64> =
                row.split_whitespace().map(|v| v.parse().map_err(|_| fmt(i + 1, "bad number"))).collect::<Result<_, _>>()?;
            if values.len() != t.values.len() {
                return Err(fmt(i + 1, "wrong number of values"));
            }
            t.values = values;
            seen[id.0] = true;
            i += 2;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(CheckpointError::Missing(self.names[k].clone()));
        }
        Ok(())
    }
}

/// Gradient buffer, one dense slot per parameter, allocated on first use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    slots: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn slot(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        self.slots[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots.get(id.0).and_then(|s| s.as_deref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_deref().map(|g| (ParamId(i), g)))
    }

    pub fn add(&mut self, other: &Gradients) {
        for (id, g) in other.iter() {
            for (a, b) in self.slot(id, g.len()).iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slots.iter_mut().flatten() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn norm(&self) -> f64 {
        self.slots.iter().flatten().flat_map(|s| s.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when no slot holds a nonzero value.
    pub fn is_zero(&self) -> bool {
        self.slots.iter().flatten().all(|s| s.iter().all(|&v| v == 0.0))
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = ParamStore::new();
        a.add("w", &[3, 4], Init::Glorot, &mut rng);
        a.add("b", &[3], Init::Uniform(0.1), &mut rng);
        a.get_mut(ParamId(1)).values[0] = 1.0 / 3.0;
        a.get_mut(ParamId(1)).values[1] = -0.0;
        let text = a.to_text();
        let mut b = ParamStore::new();
        b.add("w", &[3, 4], Init::Zeros, &mut rng);
        b.add("b", &[3], Init::Zeros, &mut rng);
        b.load_text(&text, 1).unwrap();
        for id in a.ids() {
            let (x, y) = (&a.get(id).values, &b.get(id).values);
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn checkpoint_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::new();
        s.add("w", &[2], Init::Zeros, &mut rng);
        s.add("v", &[1], Init::Zeros, &mut rng);
        assert!(matches!(s.load_text("param w 2\n1 2\n", 1), Err(CheckpointError::Missing(n)) if n == "v"));
        assert!(matches!(s.load_text("param w 3\n1 2 3\n", 1), Err(CheckpointError::Shape { .. })));
        assert!(matches!(s.load_text("param w 2\n1 x\n", 5), Err(CheckpointError::Format { line: 6, .. })));
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::new();
        let id = s.add("w", &[10, 14], Init::Glorot, &mut rng);
        let a = (6.0f64 / 24.0).sqrt();
        assert!(s.get(id).values.iter().all(|v| v.abs() < a));
    }
}
